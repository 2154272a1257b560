//! Channel gain of the boundary-less and boundary-constrained models and of
//! the reduced approximation.
//!
//! The angle integral is a right-endpoint Riemann sum over
//! `theta_k = k/r * theta_bound`, `k = 1..=r`. Class gains are combined in
//! the log domain and only exponentiated relative to the largest term, so
//! deep stacks whose gains sit hundreds of dB down do not underflow.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::counting::angle_counts;
use crate::geometry::{class_range, reflection_range, solve_theta_bound, AngleSample, ClassRange, Geometry};
use crate::materials::{coefficient_set, step_gain_table, CoefficientSet, MaterialsError, StackSpec, StepGainTable};
use crate::numeric::{ln_biguint, log_sum_exp};
use crate::Error;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    BoundaryLess,
    BoundaryConstrained,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::BoundaryLess => "boundary-less",
            Model::BoundaryConstrained => "boundary-constrained",
        }
    }
}

/// How the critical launch angle is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThetaBoundRule {
    /// Solve the critical-angle equation with extra refraction pairs `q`.
    Solve { q: u32 },
    /// Use the given angle in radians.
    Fixed(f64),
}

impl Default for ThetaBoundRule {
    fn default() -> Self {
        ThetaBoundRule::Solve { q: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    /// Channel coherence time `t_c` in seconds.
    pub coherence_time: f64,
    /// Propagation speed `v` in m/s.
    pub light_speed: f64,
    /// Keep only the minimum refraction count `n = J`.
    pub truncate_refractions: bool,
    /// Drop angle samples below the coherence cutoff angle.
    pub coherence_cutoff: bool,
}

impl Default for ApproxConfig {
    fn default() -> Self {
        ApproxConfig {
            coherence_time: 1e-11,
            light_speed: SPEED_OF_LIGHT,
            truncate_refractions: true,
            coherence_cutoff: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleGain {
    pub theta: f64,
    /// Partial gain `H_θ` including `Δθ` and the antenna gains.
    pub h: f64,
    pub ln_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassGain {
    pub theta: f64,
    pub n: u64,
    pub m: u64,
    pub count: BigUint,
    pub gain: f64,
    pub ln_gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelResult {
    pub model: Model,
    pub theta_bound: f64,
    pub h_linear: f64,
    pub h_db: f64,
    pub ln_h: f64,
    pub per_angle: Vec<AngleGain>,
    pub per_class: Option<Vec<ClassGain>>,
    /// Exclusion-loop iterations: `n` per boundary-less class and
    /// `2n - J_bound` per boundary-constrained class.
    pub loops_executed: i128,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    /// Arrival time of the earliest class at each sampled angle (`None`
    /// when the angle admits no class).
    pub t_theta: Vec<(f64, Option<f64>)>,
    pub t_min: f64,
    pub theta_t: f64,
    pub n_bound: u64,
    pub m_bound: u64,
}

/// Log of one class gain:
/// `count · prefix · layer^{J-1} · pair^{(n-J)/2} · reflect^m`.
pub fn class_ln_gain(count: &BigUint, n: u64, m: u64, layers: u64, table: &StepGainTable) -> f64 {
    debug_assert!(n >= layers && (n - layers).is_multiple_of(2));
    let pairs = ((n - layers) / 2) as f64;
    let mut ln = ln_biguint(count) + table.prefix.ln;
    // Skip zero exponents so a zero factor raised to zero stays neutral.
    if layers > 1 {
        ln += (layers - 1) as f64 * table.layer.ln;
    }
    if pairs > 0.0 {
        ln += pairs * table.pair.ln;
    }
    if m > 0 {
        ln += m as f64 * table.reflect.ln;
    }
    ln
}

pub fn class_gain(count: &BigUint, n: u64, m: u64, layers: u64, table: &StepGainTable) -> f64 {
    class_ln_gain(count, n, m, layers, table).exp()
}

/// Single-step refraction-to-reflection gain ratio
/// `T1 T2 T3 / ((1-T3)(1-T6)) · e^{2λ3l3 - λ2l2 - λ1l1}`.
pub fn gain_ratio(stack: &StackSpec, coeffs: &CoefficientSet) -> Result<f64, MaterialsError> {
    let denom = (1.0 - coeffs.t(3)) * (1.0 - coeffs.t(6));
    if denom == 0.0 {
        return Err(MaterialsError::DegenerateRatio);
    }
    let [l1, l2, l3] = stack.thickness;
    let [a1, a2, a3] = stack.attenuation;
    let numer = coeffs.t(1) * coeffs.t(2) * coeffs.t(3);
    Ok(numer / denom * (2.0 * a3 * l3 - a2 * l2 - a1 * l1).exp())
}

/// A stack, a placement and the derived constants needed to evaluate it.
#[derive(Debug, Clone)]
pub struct Channel {
    stack: StackSpec,
    geometry: Geometry,
    coeffs: CoefficientSet,
    table: StepGainTable,
    theta_bound: f64,
    parallel: bool,
    class_detail: bool,
}

impl Channel {
    pub fn new(stack: StackSpec, geometry: Geometry, rule: ThetaBoundRule) -> Result<Self, Error> {
        let coeffs = coefficient_set(&stack)?;
        geometry.validate()?;
        let table = step_gain_table(&stack, &coeffs);
        let theta_bound = match rule {
            ThetaBoundRule::Solve { q } => solve_theta_bound(&geometry, &stack, q)?,
            ThetaBoundRule::Fixed(t) => {
                if !(t > 0.0 && t < std::f64::consts::FRAC_PI_2) {
                    return Err(crate::geometry::GeometryError::AngleDomain { theta: t }.into());
                }
                t
            }
        };
        Ok(Channel {
            stack,
            geometry,
            coeffs,
            table,
            theta_bound,
            parallel: true,
            class_detail: false,
        })
    }

    /// Evaluate angle samples on the rayon pool (default) or serially.
    /// Results are identical either way.
    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }

    /// Record every class in [`ChannelResult::per_class`].
    pub fn with_class_detail(mut self, on: bool) -> Self {
        self.class_detail = on;
        self
    }

    pub fn stack(&self) -> &StackSpec {
        &self.stack
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn coefficients(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn table(&self) -> &StepGainTable {
        &self.table
    }

    pub fn theta_bound(&self) -> f64 {
        self.theta_bound
    }

    pub fn delta_theta(&self) -> f64 {
        self.theta_bound / f64::from(self.geometry.samples)
    }

    pub fn angle_samples(&self) -> Result<Vec<AngleSample>, Error> {
        let r = self.geometry.samples;
        (1..=r)
            .map(|k| {
                let theta = f64::from(k) / f64::from(r) * self.theta_bound;
                Ok(AngleSample::new(theta, &self.stack)?)
            })
            .collect()
    }

    /// The `(θ, n, m)` grid every gain evaluation iterates.
    pub fn class_grid(&self) -> Result<Vec<(AngleSample, ClassRange)>, Error> {
        self.angle_samples()?
            .into_iter()
            .map(|s| {
                let cr = class_range(&s, &self.geometry)?;
                Ok((s, cr))
            })
            .collect()
    }

    /// Loop units of one class under `model`.
    pub fn class_loops(&self, model: Model, n: u64) -> i128 {
        match (model, self.geometry.boundary_layers) {
            (Model::BoundaryConstrained, Some(b)) => 2 * i128::from(n) - i128::from(b),
            _ => i128::from(n),
        }
    }

    fn ceiling(&self, model: Model) -> Option<u32> {
        match model {
            Model::BoundaryLess => None,
            Model::BoundaryConstrained => self.geometry.boundary_layers,
        }
    }

    fn angle_counts(&self, sample: &AngleSample, ranges: &ClassRange, model: Model, min_only: bool) -> Result<Vec<(u64, u64, BigUint)>, Error> {
        Ok(angle_counts(sample, &self.geometry, ranges, self.ceiling(model), min_only)?)
    }

    fn angle_from_counts(&self, theta: f64, counts: Vec<(u64, u64, BigUint)>, model: Model) -> AngleEval {
        let layers = u64::from(self.geometry.layers);
        let mut terms = Vec::with_capacity(counts.len());
        let mut loops = 0i128;
        let mut classes = Vec::new();
        for (n, m, count) in counts {
            loops += self.class_loops(model, n);
            let ln = class_ln_gain(&count, n, m, layers, &self.table);
            if ln > f64::NEG_INFINITY {
                terms.push(ln);
            }
            if self.class_detail {
                classes.push(ClassGain {
                    theta,
                    n,
                    m,
                    count,
                    gain: ln.exp(),
                    ln_gain: ln,
                });
            }
        }
        let ln_weight = self.delta_theta().ln() + (self.geometry.tx_gain * self.geometry.rx_gain).ln();
        let ln_h = log_sum_exp(&terms) + ln_weight;
        AngleEval {
            gain: AngleGain {
                theta,
                h: ln_h.exp(),
                ln_h,
            },
            loops,
            classes,
        }
    }

    /// Integrate per-angle class counts produced by `counts`; `None` marks
    /// a skipped angle.
    pub(crate) fn integrate_counts<F>(&self, model: Model, counts: F) -> Result<ChannelResult, Error>
    where
        F: Fn(&AngleSample, &ClassRange) -> Result<Option<Vec<(u64, u64, BigUint)>>, Error> + Sync,
    {
        let grid = self.class_grid()?;
        let eval = |(s, cr): &(AngleSample, ClassRange)| -> Result<AngleEval, Error> {
            Ok(match counts(s, cr)? {
                Some(c) => self.angle_from_counts(s.theta, c, model),
                None => AngleEval::skipped(s.theta),
            })
        };
        let evals: Vec<AngleEval> = if self.parallel {
            grid.par_iter().map(eval).collect::<Result<_, _>>()?
        } else {
            grid.iter().map(eval).collect::<Result<_, _>>()?
        };
        Ok(self.assemble(model, evals))
    }

    fn assemble(&self, model: Model, evals: Vec<AngleEval>) -> ChannelResult {
        let ln_terms: Vec<f64> = evals.iter().map(|e| e.gain.ln_h).collect();
        let ln_h = log_sum_exp(&ln_terms);
        let loops_executed = evals.iter().map(|e| e.loops).sum();
        let mut per_angle = Vec::with_capacity(evals.len());
        let mut per_class = self.class_detail.then(Vec::new);
        for e in evals {
            per_angle.push(e.gain);
            if let Some(all) = per_class.as_mut() {
                all.extend(e.classes);
            }
        }
        ChannelResult {
            model,
            theta_bound: self.theta_bound,
            h_linear: ln_h.exp(),
            h_db: 10.0 * ln_h / std::f64::consts::LN_10,
            ln_h,
            per_angle,
            per_class,
            loops_executed,
        }
    }

    pub fn total_gain(&self, model: Model) -> Result<ChannelResult, Error> {
        self.integrate_counts(model, |s, cr| self.angle_counts(s, cr, model, false).map(Some))
    }

    /// Reference class `(J, max reflections at θ_bound)`; falls back to
    /// zero reflections when the direct class does not land at `θ_bound`.
    pub fn bound_class(&self) -> Result<(u64, u64), Error> {
        let layers = u64::from(self.geometry.layers);
        let s = AngleSample::new(self.theta_bound, &self.stack)?;
        let r = reflection_range(&s, layers, &self.geometry)?;
        Ok((layers, if r.is_empty() { 0 } else { r.max as u64 }))
    }

    fn arrival_time(&self, theta: f64, n: u64, m: u64, speed: f64) -> f64 {
        let l3 = self.stack.thickness[2];
        let n3 = self.stack.index[2];
        (2 * m + n + 1) as f64 * l3 / theta.tan() * n3 / speed
    }

    /// Arrival times and the coherence cutoff angle. `reference` defaults
    /// to [`Channel::bound_class`].
    pub fn theta_threshold(&self, approx: &ApproxConfig, reference: Option<(u64, u64)>) -> Result<TimingResult, Error> {
        let (n_bound, m_bound) = match reference {
            Some(c) => c,
            None => self.bound_class()?,
        };
        let v = approx.light_speed;
        let t_min = self.arrival_time(self.theta_bound, n_bound, m_bound, v);
        let mut t_theta = Vec::new();
        for (s, cr) in self.class_grid()? {
            let first = cr.reflections.first().map(|(n, r)| (*n, r.min));
            t_theta.push((s.theta, first.map(|(n, m)| self.arrival_time(s.theta, n, m, v))));
        }

        let n3 = self.stack.index[2];
        let l3 = self.stack.thickness[2];
        let tan_b = self.theta_bound.tan();
        // The cutoff compares a path of the reference composition at θ
        // against the same composition at θ_bound.
        let steps = (2 * m_bound + n_bound + 1) as f64;
        let numer = n3 * steps * l3 * tan_b;
        let denom = n3 * steps * l3 + v * approx.coherence_time * tan_b;
        let theta_t = (numer / denom).atan().clamp(0.0, self.theta_bound);
        Ok(TimingResult {
            t_theta,
            t_min,
            theta_t,
            n_bound,
            m_bound,
        })
    }

    pub fn approx_total_gain(&self, model: Model, approx: &ApproxConfig) -> Result<ChannelResult, Error> {
        let cutoff = if approx.coherence_cutoff {
            self.theta_threshold(approx, None)?.theta_t
        } else {
            0.0
        };
        let min_only = approx.truncate_refractions;
        self.integrate_counts(model, |s, cr| {
            if s.theta < cutoff {
                return Ok(None);
            }
            self.angle_counts(s, cr, model, min_only).map(Some)
        })
    }
}

struct AngleEval {
    gain: AngleGain,
    loops: i128,
    classes: Vec<ClassGain>,
}

impl AngleEval {
    fn skipped(theta: f64) -> Self {
        AngleEval {
            gain: AngleGain {
                theta,
                h: 0.0,
                ln_h: f64::NEG_INFINITY,
            },
            loops: 0,
            classes: Vec::new(),
        }
    }
}

fn model_for(bounded: bool) -> Model {
    if bounded {
        Model::BoundaryConstrained
    } else {
        Model::BoundaryLess
    }
}

/// Total gain with the critical angle solved at `q = 0`.
pub fn total_gain(geom: &Geometry, stack: &StackSpec, bounded: bool) -> Result<ChannelResult, Error> {
    Channel::new(*stack, *geom, ThetaBoundRule::default())?.total_gain(model_for(bounded))
}

/// Approximate gain of the boundary-constrained model when the geometry
/// carries a boundary, otherwise of the boundary-less one.
pub fn approx_total_gain(geom: &Geometry, stack: &StackSpec, approx: &ApproxConfig) -> Result<ChannelResult, Error> {
    let model = model_for(geom.boundary_layers.is_some());
    Channel::new(*stack, *geom, ThetaBoundRule::default())?.approx_total_gain(model, approx)
}

pub fn theta_threshold(geom: &Geometry, stack: &StackSpec, approx: &ApproxConfig, reference_class: Option<(u64, u64)>) -> Result<TimingResult, Error> {
    Channel::new(*stack, *geom, ThetaBoundRule::default())?.theta_threshold(approx, reference_class)
}
