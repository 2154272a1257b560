//! Loop accounting for the two exact models.
//!
//! A boundary-less class costs `n` exclusion iterations and a
//! boundary-constrained one `2n - J_bound`. The counters walk the same
//! `(θ, n, m)` grid as [`Channel::total_gain`].

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::gain::{Channel, Model, ThetaBoundRule};
use crate::geometry::{Geometry, GeometryError};
use crate::materials::StackSpec;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleComplexity {
    pub theta: f64,
    /// `⌈L / (l2 tan θ) + 1⌉`.
    pub alpha: u64,
    /// Largest admissible refraction count; negative when none lands.
    pub beta: i64,
    pub classes: u64,
    pub loop_bl: BigInt,
    pub loop_bc: BigInt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub per_angle: Vec<AngleComplexity>,
    pub loop_bl: BigInt,
    pub loop_bc: BigInt,
    /// `Σ (n - J_bound)` over every iterated class.
    pub excess: BigInt,
    pub predicted_difference: f64,
    /// Some class had `2n - J_bound < 0`.
    pub negative_terms: bool,
}

impl ComplexityReport {
    fn empty() -> Self {
        ComplexityReport {
            per_angle: Vec::new(),
            loop_bl: BigInt::zero(),
            loop_bc: BigInt::zero(),
            excess: BigInt::zero(),
            predicted_difference: 0.0,
            negative_terms: false,
        }
    }

    pub fn empirical_difference(&self) -> BigInt {
        &self.loop_bc - &self.loop_bl
    }

    /// `|empirical - predicted| / |empirical|`; infinite when the empirical
    /// difference is zero and the prediction is not.
    pub fn relative_gap(&self) -> f64 {
        let emp = bigint_f64(&self.empirical_difference());
        let gap = (emp - self.predicted_difference).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / emp.abs()
        }
    }
}

fn bigint_f64(x: &BigInt) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

fn alpha(theta: f64, stack: &StackSpec, geom: &Geometry) -> u64 {
    (geom.antenna_length / (stack.thickness[1] * theta.tan()) + 1.0).ceil() as u64
}

/// Counters and closed-form prediction for `channel`.
pub fn complexity_report(channel: &Channel) -> Result<ComplexityReport, Error> {
    let geom = channel.geometry();
    let stack = channel.stack();
    let b = i128::from(geom.boundary_layers.unwrap_or(0));
    let mut report = ComplexityReport::empty();
    let mut predicted = Vec::new();
    for (sample, ranges) in channel.class_grid()? {
        let mut angle = AngleComplexity {
            theta: sample.theta,
            alpha: alpha(sample.theta, stack, geom),
            beta: ranges.refraction.max,
            classes: 0,
            loop_bl: BigInt::zero(),
            loop_bc: BigInt::zero(),
        };
        for (n, _) in ranges.classes() {
            angle.classes += 1;
            angle.loop_bl += channel.class_loops(Model::BoundaryLess, n);
            let bc = channel.class_loops(Model::BoundaryConstrained, n);
            report.negative_terms |= bc < 0;
            angle.loop_bc += bc;
            report.excess += i128::from(n) - b;
        }
        let beta = angle.beta as f64;
        let bf = b as f64;
        predicted.push(0.5 * angle.alpha as f64 * (-bf * bf + bf + beta * beta + beta));
        report.loop_bl += &angle.loop_bl;
        report.loop_bc += &angle.loop_bc;
        report.per_angle.push(angle);
    }
    report.predicted_difference = crate::numeric::compensated_sum(predicted);
    Ok(report)
}

fn channel_or_empty(geom: &Geometry, stack: &StackSpec) -> Result<Option<Channel>, Error> {
    match Channel::new(*stack, *geom, ThetaBoundRule::default()) {
        Ok(c) => Ok(Some(c)),
        Err(Error::Geometry(GeometryError::NoSolution)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// `(Loop_BL, Loop_BC)`; both zero when no angle reaches the antenna.
pub fn loop_counts(geom: &Geometry, stack: &StackSpec) -> Result<(BigInt, BigInt), Error> {
    let Some(channel) = channel_or_empty(geom, stack)? else {
        return Ok((BigInt::zero(), BigInt::zero()));
    };
    let r = complexity_report(&channel)?;
    Ok((r.loop_bl, r.loop_bc))
}

pub fn predicted_loop_difference(geom: &Geometry, stack: &StackSpec) -> Result<f64, Error> {
    let Some(channel) = channel_or_empty(geom, stack)? else {
        return Ok(0.0);
    };
    Ok(complexity_report(&channel)?.predicted_difference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack() -> StackSpec {
        StackSpec {
            thickness: [1e-6, 1e-6, 5e-6],
            index: [2.0, 1.96, 3.42],
            attenuation: [2000.0, 1000.0, 500.0],
            frequency: 1e12,
        }
    }

    fn geom(layers: u32, boundary: u32, samples: u32) -> Geometry {
        Geometry {
            layers,
            boundary_layers: Some(boundary),
            displacement: 10e-6,
            antenna_length: 4e-6,
            tx_gain: 1.0,
            rx_gain: 1.0,
            samples,
        }
    }

    #[test]
    fn single_class_by_hand() {
        // One sample at θ_bound admits only (J, 0).
        let (bl, bc) = loop_counts(&geom(2, 1, 1), &stack()).unwrap();
        assert_eq!((bl, bc), (BigInt::from(2), BigInt::from(3)));
    }

    #[test]
    fn empty_class_set_costs_nothing() {
        // A single sample steeper than anything that still lands.
        let ch = Channel::new(stack(), geom(2, 1, 1), ThetaBoundRule::Fixed(1.5)).unwrap();
        let r = complexity_report(&ch).unwrap();
        assert_eq!((r.loop_bl, r.loop_bc), (BigInt::zero(), BigInt::zero()));
    }

    #[test]
    fn counters_match_the_gain_loops() {
        let g = geom(2, 2, 10);
        let ch = Channel::new(stack(), g, ThetaBoundRule::default()).unwrap();
        let r = complexity_report(&ch).unwrap();
        let bl = ch.total_gain(Model::BoundaryLess).unwrap().loops_executed;
        let bc = ch.total_gain(Model::BoundaryConstrained).unwrap().loops_executed;
        assert_eq!(r.loop_bl, BigInt::from(bl));
        assert_eq!(r.loop_bc, BigInt::from(bc));
        assert_eq!(r.empirical_difference(), r.excess);
    }

    #[test]
    fn algebraic_zero() {
        // At θ_bound the largest admissible count is J, so J_bound = J + 1
        // zeroes every term.
        let r = predicted_loop_difference(&geom(2, 3, 1), &stack()).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn single_angle_prediction_by_hand() {
        let s = stack();
        let g = geom(2, 1, 1);
        let ch = Channel::new(s, g, ThetaBoundRule::default()).unwrap();
        let tb = ch.theta_bound();
        let a = (4e-6 / (1e-6 * tb.tan()) + 1.0).ceil();
        let want = 0.5 * a * (-1.0 + 1.0 + 4.0 + 2.0);
        assert_eq!(predicted_loop_difference(&g, &s).unwrap(), want);
    }

    #[test]
    fn negative_terms_are_flagged() {
        let ch = Channel::new(stack(), geom(1, 9, 3), ThetaBoundRule::default()).unwrap();
        assert!(complexity_report(&ch).unwrap().negative_terms);
        let ch = Channel::new(stack(), geom(2, 1, 3), ThetaBoundRule::default()).unwrap();
        assert!(!complexity_report(&ch).unwrap().negative_terms);
    }

    #[test]
    fn alpha_is_at_least_one() {
        let ch = Channel::new(stack(), geom(3, 2, 10), ThetaBoundRule::default()).unwrap();
        for a in complexity_report(&ch).unwrap().per_angle {
            assert!(a.alpha >= 1);
        }
    }
}
