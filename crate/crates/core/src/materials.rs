//! Material stack of one NoC layer and the interface coefficients derived
//! from it.
//!
//! A layer is three stacked materials (top to bottom: nitride, oxide,
//! silicon in the reference build). Interface coefficients are power
//! coefficients that depend only on the refractive indices, so every
//! `T` has a matching `R = 1 - T`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialsError {
    #[error("invalid stack: {field} = {value} ({constraint})")]
    InvalidStack {
        field: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("gain ratio is undefined: reflection coefficient product is zero")]
    DegenerateRatio,
}

/// Thicknesses, refractive indices and attenuation coefficients of the three
/// material stacks that make up one NoC layer.
///
/// Index 0 is the top material, index 2 the substrate the rays reflect in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    /// Layer thicknesses in meters.
    pub thickness: [f64; 3],
    /// Refractive indices.
    pub index: [f64; 3],
    /// Attenuation coefficients in 1/m.
    pub attenuation: [f64; 3],
    /// Carrier frequency in Hz. Carried along for reporting only.
    pub frequency: f64,
}

impl StackSpec {
    pub fn validate(&self) -> Result<(), MaterialsError> {
        const THICKNESS: [&str; 3] = ["l1", "l2", "l3"];
        const INDEX: [&str; 3] = ["n1", "n2", "n3"];
        const ATTENUATION: [&str; 3] = ["lambda1", "lambda2", "lambda3"];
        let fail = |field, value, constraint| {
            Err(MaterialsError::InvalidStack {
                field,
                value,
                constraint,
            })
        };
        for i in 0..3 {
            let l = self.thickness[i];
            if !(l.is_finite() && l > 0.0) {
                return fail(THICKNESS[i], l, "thickness must be > 0");
            }
            let n = self.index[i];
            if !(n.is_finite() && n >= 1.0) {
                return fail(INDEX[i], n, "refractive index must be >= 1");
            }
            let a = self.attenuation[i];
            if !(a.is_finite() && a >= 0.0) {
                return fail(ATTENUATION[i], a, "attenuation must be >= 0");
            }
        }
        // The substrate must be optically densest so the refraction angles
        // arcsin(n_i sin(theta) / n3) exist for every launch angle.
        if self.index[0] > self.index[2] {
            return fail("n1", self.index[0], "must not exceed n3");
        }
        if self.index[1] > self.index[2] {
            return fail("n2", self.index[1], "must not exceed n3");
        }
        if !(self.frequency.is_finite() && self.frequency >= 0.0) {
            return fail("frequency", self.frequency, "frequency must be >= 0");
        }
        Ok(())
    }

    /// Sum of `l_i * lambda_i` over the three materials.
    pub fn layer_attenuation(&self) -> f64 {
        (0..3)
            .map(|i| self.thickness[i] * self.attenuation[i])
            .sum()
    }
}

/// The twelve interface coefficients `T1..T6`, `R1..R6` (stored zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSet {
    pub t: [f64; 6],
    pub r: [f64; 6],
}

impl CoefficientSet {
    /// `T_k` with the one-based numbering used throughout the docs.
    pub fn t(&self, k: usize) -> f64 {
        self.t[k - 1]
    }

    /// `R_k`, one-based.
    pub fn r(&self, k: usize) -> f64 {
        self.r[k - 1]
    }
}

fn contrast(a: f64, b: f64) -> f64 {
    let q = (a - b) / (a + b);
    q * q
}

pub fn coefficient_set(stack: &StackSpec) -> Result<CoefficientSet, MaterialsError> {
    stack.validate()?;
    let [n1, n2, n3] = stack.index;
    let t1 = contrast(n3, n1);
    let t2 = contrast(n2, n1);
    let t3 = contrast(n3, n2);
    let t = [t1, t2, t3, t1, t2, t3];
    let r = t.map(|ti| 1.0 - ti);
    Ok(CoefficientSet { t, r })
}

/// One multiplicative gain factor kept in both linear and natural-log form.
///
/// The log form is assembled term by term rather than taken from the linear
/// product, so factors far below `f64::MIN_POSITIVE` stay representable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepFactor {
    pub linear: f64,
    pub ln: f64,
}

impl StepFactor {
    fn from_terms(coefficients: &[f64], attenuation_exponent: f64) -> Self {
        let linear = coefficients.iter().product::<f64>() * (-attenuation_exponent).exp();
        let ln = coefficients.iter().map(|c| c.ln()).sum::<f64>() - attenuation_exponent;
        StepFactor { linear, ln }
    }

    pub fn db(&self) -> f64 {
        10.0 * self.ln / std::f64::consts::LN_10
    }
}

/// Per-step gain factors a path class gain is composed of.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepGainTable {
    /// Launch and landing factor: `e^{-3(l1λ1+l2λ2+l3λ3)} T1² T2 T3 T4 R4`.
    pub prefix: StepFactor,
    /// One full-layer crossing: `T1 T2 T3 e^{-(l1λ1+l2λ2+l3λ3)}`.
    pub layer: StepFactor,
    /// Extra up/down refraction pair: `T1 T4 T5 R4 e^{-2l3λ3-l2λ2-l1λ1}`.
    pub pair: StepFactor,
    /// One reflection step: `R3 R6 e^{-2l3λ3}`.
    pub reflect: StepFactor,
}

pub fn step_gain_table(stack: &StackSpec, coeffs: &CoefficientSet) -> StepGainTable {
    let [l1, l2, l3] = stack.thickness;
    let [a1, a2, a3] = stack.attenuation;
    let c = coeffs;
    let att = stack.layer_attenuation();

    StepGainTable {
        prefix: StepFactor::from_terms(
            &[c.t(1), c.t(1), c.t(2), c.t(3), c.t(4), c.r(4)],
            3.0 * att,
        ),
        layer: StepFactor::from_terms(&[c.t(1), c.t(2), c.t(3)], att),
        pair: StepFactor::from_terms(
            &[c.t(1), c.t(4), c.t(5), c.r(4)],
            2.0 * l3 * a3 + l2 * a2 + l1 * a1,
        ),
        reflect: StepFactor::from_terms(&[c.r(3), c.r(6)], 2.0 * l3 * a3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn sample_stack() -> StackSpec {
        StackSpec {
            thickness: [1e-6, 1e-6, 5e-4],
            index: [2.0, 1.96, 3.42],
            attenuation: [100.0, 100.0, 100.0],
            frequency: 1e12,
        }
    }

    #[test]
    fn reference_indices_give_hand_values() {
        let c = coefficient_set(&sample_stack()).unwrap();
        assert!((c.t(1) - 0.068_64).abs() < 1e-5);
        assert!((c.t(2) - 1.0203e-4).abs() < 1e-8);
        assert!((c.t(3) - 0.073_64).abs() < 1e-5);
        for k in 1..=6 {
            assert_eq!(c.r(k), 1.0 - c.t(k));
        }
    }

    #[test]
    fn equal_indices_are_transparent_to_nothing() {
        let mut s = sample_stack();
        s.index = [2.5; 3];
        let c = coefficient_set(&s).unwrap();
        assert_eq!(c.t, [0.0; 6]);
        assert_eq!(c.r, [1.0; 6]);
    }

    #[test]
    fn rejects_invalid_stacks() {
        let mut s = sample_stack();
        s.thickness[1] = 0.0;
        assert!(matches!(
            coefficient_set(&s),
            Err(MaterialsError::InvalidStack { field: "l2", .. })
        ));
        let mut s = sample_stack();
        s.index[0] = 0.9;
        assert!(coefficient_set(&s).is_err());
        let mut s = sample_stack();
        s.index[1] = 3.5;
        assert!(matches!(
            coefficient_set(&s),
            Err(MaterialsError::InvalidStack { field: "n2", .. })
        ));
        let mut s = sample_stack();
        s.attenuation[2] = -1.0;
        assert!(coefficient_set(&s).is_err());
    }

    #[test]
    fn lossless_table_reduces_to_coefficients() {
        let mut s = sample_stack();
        s.attenuation = [0.0; 3];
        let c = coefficient_set(&s).unwrap();
        let t = step_gain_table(&s, &c);
        let want = c.t(1) * c.t(1) * c.t(2) * c.t(3) * c.t(4) * c.r(4);
        assert!((t.prefix.linear - want).abs() <= 1e-15 * want);
        assert!((t.reflect.linear - c.r(3) * c.r(6)).abs() < 1e-15);
    }

    #[test]
    fn equal_indices_table() {
        let mut s = sample_stack();
        s.index = [3.0; 3];
        let c = coefficient_set(&s).unwrap();
        let t = step_gain_table(&s, &c);
        assert_eq!(t.prefix.linear, 0.0);
        assert_eq!(t.pair.linear, 0.0);
        assert_eq!(t.prefix.ln, f64::NEG_INFINITY);
        let l3 = s.thickness[2];
        let want = (-2.0 * l3 * s.attenuation[2]).exp();
        assert!((t.reflect.linear - want).abs() < 1e-15);
    }

    #[test]
    fn sample_table_matches_direct_evaluation() {
        // Closed forms written out longhand.
        let (l1, l2, l3) = (1e-6_f64, 1e-6_f64, 5e-4_f64);
        let lam = 100.0_f64;
        let t1 = (1.42_f64 / 5.42).powi(2);
        let t2 = (0.04_f64 / 3.96).powi(2);
        let t3 = (1.46_f64 / 5.38).powi(2);
        let prefix = (-3.0 * (l1 + l2 + l3) * lam).exp() * t1 * t1 * t2 * t3 * t1 * (1.0 - t1);
        let layer = t1 * t2 * t3 * (-(l1 + l2 + l3) * lam).exp();
        let pair = t1 * t1 * t2 * (1.0 - t1) * (-(2.0 * l3 + l2 + l1) * lam).exp();
        let refl = (1.0 - t3).powi(2) * (-2.0 * l3 * lam).exp();

        let s = sample_stack();
        let t = step_gain_table(&s, &coefficient_set(&s).unwrap());
        for (got, want) in [
            (t.prefix.linear, prefix),
            (t.layer.linear, layer),
            (t.pair.linear, pair),
            (t.reflect.linear, refl),
        ] {
            assert!((got - want).abs() <= 1e-12 * want, "{got} vs {want}");
        }
    }

    fn stack_strategy() -> impl Strategy<Value = StackSpec> {
        (
            prop::array::uniform3(1e-7..1e-3f64),
            1.0..4.0f64,
            0.0..1.0f64,
            0.0..1.0f64,
            prop::array::uniform3(0.0..1e4f64),
        )
            .prop_map(|(thickness, n3, f1, f2, attenuation)| StackSpec {
                thickness,
                index: [1.0 + f1 * (n3 - 1.0), 1.0 + f2 * (n3 - 1.0), n3],
                attenuation,
                frequency: 1e12,
            })
    }

    proptest! {
        #[test]
        fn coefficients_conserve_power(s in stack_strategy()) {
            let c = coefficient_set(&s).unwrap();
            for k in 1..=6 {
                prop_assert!((c.t(k) + c.r(k) - 1.0).abs() <= f64::EPSILON);
                prop_assert!(c.t(k) >= 0.0 && c.t(k) < 1.0);
            }
            prop_assert_eq!(c.t(4), c.t(1));
            prop_assert_eq!(c.t(5), c.t(2));
            prop_assert_eq!(c.t(6), c.t(3));
            prop_assert_eq!(coefficient_set(&s).unwrap(), c);
        }

        #[test]
        fn log_and_linear_factors_agree(s in stack_strategy()) {
            let t = step_gain_table(&s, &coefficient_set(&s).unwrap());
            for f in [t.prefix, t.layer, t.pair, t.reflect] {
                prop_assert!(f.linear >= 0.0 && f.linear <= 1.0);
                if f.linear > 1e-300 {
                    prop_assert!((f.ln.exp() - f.linear).abs() <= 1e-12 * f.linear);
                }
            }
        }

        #[test]
        fn more_attenuation_means_less_gain(s in stack_strategy(), which in 0usize..3, bump in 1.0..100.0f64) {
            let c = coefficient_set(&s).unwrap();
            let before = step_gain_table(&s, &c);
            let mut s2 = s;
            s2.attenuation[which] += bump;
            let after = step_gain_table(&s2, &c);
            // Every factor carries attenuation of every material except the
            // reflection, which only sees the substrate.
            prop_assert!(after.prefix.ln < before.prefix.ln || before.prefix.linear == 0.0);
            prop_assert!(after.layer.ln < before.layer.ln || before.layer.linear == 0.0);
            prop_assert!(after.pair.ln < before.pair.ln || before.pair.linear == 0.0);
            if which == 2 {
                prop_assert!(after.reflect.ln < before.reflect.ln);
            } else {
                prop_assert_eq!(after.reflect.ln, before.reflect.ln);
            }
        }
    }
}
