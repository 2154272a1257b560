//! Exhaustive ray-walk reference for the counting module.
//!
//! Every interleaving of up, down and reflect steps is walked explicitly.
//! Landing positions are accumulated step by step from the per-step
//! displacements, and the absorption, boundary and window rules are tested
//! on the walk itself rather than through any counting formula.

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gain::{Channel, ChannelResult, Model, ThetaBoundRule};
use crate::geometry::{AngleSample, Geometry};
use crate::materials::{StackSpec, StepGainTable};
use crate::Error as CrateError;

/// Largest `n_max + m_max` the enumeration accepts.
pub const MAX_STEPS: u64 = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("enumeration caps n_max={n_max}, m_max={m_max} exceed {MAX_STEPS} steps")]
    CapExceeded { n_max: u64, m_max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caps {
    pub n_max: u64,
    pub m_max: u64,
}

impl Caps {
    pub fn new(n_max: u64, m_max: u64) -> Result<Self, OracleError> {
        if n_max + m_max > MAX_STEPS {
            return Err(OracleError::CapExceeded { n_max, m_max });
        }
        Ok(Caps { n_max, m_max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleClass {
    pub n: u64,
    pub m: u64,
    pub count: BigUint,
    /// Sum of per-sequence gains (product of per-step factors).
    pub gain_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub theta: f64,
    pub caps: Caps,
    pub bounded: bool,
    /// Classes that land on the antenna, in `(n, m)` order.
    pub classes: Vec<OracleClass>,
    pub sequences_visited: u64,
}

impl OracleReport {
    pub fn count(&self, n: u64, m: u64) -> BigUint {
        self.classes
            .iter()
            .find(|c| c.n == n && c.m == m)
            .map(|c| c.count.clone())
            .unwrap_or_default()
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Step {
    Down,
    Reflect,
    Up,
}

/// Walk state for one class.
struct Walk<'a, W: Fn(u64, u64) -> bool> {
    layers: i64,
    ceiling: Option<i64>,
    inside: &'a W,
    ln_step: [f64; 3],
    count: u64,
    gain: f64,
    visited: u64,
}

impl<W: Fn(u64, u64) -> bool> Walk<'_, W> {
    fn ln_for(&self, step: Step) -> f64 {
        match step {
            Step::Down => self.ln_step[0],
            Step::Reflect => self.ln_step[1],
            Step::Up => self.ln_step[2],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn go(&mut self, downs: u64, ups: u64, refls: u64, depth: i64, k: u64, j: u64, ln: f64) {
        self.visited += 1;
        if downs == 0 && ups == 0 && refls == 0 {
            if depth == -self.layers {
                self.count += 1;
                self.gain += ln.exp();
            }
            return;
        }
        for step in [Step::Down, Step::Reflect, Step::Up] {
            let (d, u, r) = match step {
                Step::Down if downs > 0 => (downs - 1, ups, refls),
                Step::Up if ups > 0 => (downs, ups - 1, refls),
                Step::Reflect if refls > 0 => (downs, ups, refls - 1),
                _ => continue,
            };
            let (depth2, k2, j2) = match step {
                Step::Down => (depth - 1, k + 1, j),
                Step::Up => (depth + 1, k + 1, j),
                Step::Reflect => (depth, k, j + 1),
            };
            if self.ceiling.is_some_and(|c| depth2 > c) {
                continue;
            }
            let last_refraction = d == 0 && u == 0;
            if step != Step::Reflect && !last_refraction && depth2 == -self.layers && (self.inside)(k2, j) {
                // Landed early: the receiver absorbs it here.
                continue;
            }
            self.go(d, u, r, depth2, k2, j2, ln + self.ln_for(step));
        }
    }
}

/// Count the sequences of class `(n, m)` that survive, given a window test
/// `inside(k, j)` for an arrival after `k` refractions and `j` reflections.
fn enumerate_class<W: Fn(u64, u64) -> bool>(
    n: u64,
    m: u64,
    layers: u64,
    ceiling: Option<u64>,
    inside: &W,
    table: &StepGainTable,
) -> (u64, f64, u64) {
    if n < layers || !(n - layers).is_multiple_of(2) {
        return (0, 0.0, 0);
    }
    let ups = (n - layers) / 2;
    let downs = n - ups;
    // The launch carries the prefix and the J-1 extra layers; each upward
    // step carries one refraction pair and each reflection one bounce.
    let mut base = table.prefix.ln;
    if layers > 1 {
        base += (layers - 1) as f64 * table.layer.ln;
    }
    let mut walk = Walk {
        layers: layers as i64,
        ceiling: ceiling.map(|c| c as i64),
        inside,
        ln_step: [0.0, table.reflect.ln, table.pair.ln],
        count: 0,
        gain: 0.0,
        visited: 0,
    };
    walk.go(downs, ups, m, 0, 0, 0, base);
    (walk.count, walk.gain, walk.visited)
}

/// Landing position walked out step by step.
fn walked_landing(sample: &AngleSample, k: u64, j: u64) -> f64 {
    let mut x = 2.0 * sample.launch_offset + sample.x_r;
    for _ in 0..k {
        x += sample.x_t + 0.5 * sample.x_r;
    }
    for _ in 0..j {
        x += 0.5 * sample.x_r;
    }
    x
}

fn on_antenna(sample: &AngleSample, geom: &Geometry, k: u64, j: u64) -> bool {
    let x = walked_landing(sample, k, j);
    let tol = 1e-9 * geom.far_edge();
    x >= geom.displacement - tol && x <= geom.far_edge() + tol
}

pub fn enumerate_paths(theta: f64, geom: &Geometry, stack: &StackSpec, caps: Caps, bounded: bool) -> Result<OracleReport, CrateError> {
    Caps::new(caps.n_max, caps.m_max)?;
    geom.validate()?;
    let coeffs = crate::materials::coefficient_set(stack)?;
    let table = crate::materials::step_gain_table(stack, &coeffs);
    let sample = AngleSample::new(theta, stack)?;
    Ok(enumerate_at(&sample, geom, &table, caps, bounded))
}

pub(crate) fn enumerate_at(sample: &AngleSample, geom: &Geometry, table: &StepGainTable, caps: Caps, bounded: bool) -> OracleReport {
    let layers = u64::from(geom.layers);
    let ceiling = if bounded { geom.boundary_layers.map(u64::from) } else { None };
    let inside = |k: u64, j: u64| on_antenna(sample, geom, k, j);
    let mut classes = Vec::new();
    let mut visited = 0;
    for n in 0..=caps.n_max {
        for m in 0..=caps.m_max {
            if n < layers || (n - layers) % 2 != 0 || !inside(n, m) {
                continue;
            }
            let (count, gain_sum, v) = enumerate_class(n, m, layers, ceiling, &inside, table);
            visited += v;
            classes.push(OracleClass {
                n,
                m,
                count: BigUint::from(count),
                gain_sum,
            });
        }
    }
    OracleReport {
        theta: sample.theta,
        caps,
        bounded,
        classes,
        sequences_visited: visited,
    }
}

/// Channel gain integrated from oracle counts, using the same grid and
/// summation order as the gain module.
pub fn oracle_total_gain(channel: &Channel, model: Model, caps: Caps) -> Result<ChannelResult, CrateError> {
    Caps::new(caps.n_max, caps.m_max)?;
    let bounded = model == Model::BoundaryConstrained;
    channel.integrate_counts(model, |s, _| {
        let report = enumerate_at(s, channel.geometry(), channel.table(), caps, bounded);
        Ok(Some(report.classes.into_iter().map(|c| (c.n, c.m, c.count)).collect()))
    })
}

/// [`oracle_total_gain`] with the critical angle solved at `q = 0`.
pub fn oracle_total_gain_for(geom: &Geometry, stack: &StackSpec, bounded: bool, caps: Caps) -> Result<ChannelResult, CrateError> {
    let channel = Channel::new(*stack, *geom, ThetaBoundRule::default())?;
    let model = if bounded {
        Model::BoundaryConstrained
    } else {
        Model::BoundaryLess
    };
    oracle_total_gain(&channel, model, caps)
}

/// First class whose counting-module count differs from the oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub theta: f64,
    pub layers: u32,
    pub boundary_layers: Option<u32>,
    pub n: u64,
    pub m: u64,
    pub counted: BigUint,
    pub enumerated: BigUint,
}

/// Compare counting against enumeration for every class within `caps`.
/// Classes the geometry does not admit must enumerate to zero.
pub fn check_angle(sample: &AngleSample, geom: &Geometry, table: &StepGainTable, caps: Caps, bounded: bool) -> Result<(usize, Option<Mismatch>), CrateError> {
    let report = enumerate_at(sample, geom, table, caps, bounded);
    let ranges = crate::geometry::class_range(sample, geom)?;
    let ceiling = if bounded { geom.boundary_layers } else { None };
    let counted = crate::counting::angle_counts(sample, geom, &ranges, ceiling, false)?;
    let lookup = |n: u64, m: u64| -> BigUint {
        counted
            .iter()
            .find(|(cn, cm, _)| *cn == n && *cm == m)
            .map(|(_, _, c)| c.clone())
            .unwrap_or_else(BigUint::zero)
    };
    let mut checked = 0;
    for n in 0..=caps.n_max {
        for m in 0..=caps.m_max {
            checked += 1;
            let want = report.count(n, m);
            let got = lookup(n, m);
            if want != got {
                return Ok((
                    checked,
                    Some(Mismatch {
                        theta: sample.theta,
                        layers: geom.layers,
                        boundary_layers: ceiling,
                        n,
                        m,
                        counted: got,
                        enumerated: want,
                    }),
                ));
            }
        }
    }
    Ok((checked, None))
}
