//! Ray geometry inside the stack: horizontal displacement per step, the
//! critical launch angle, and which (refraction, reflection) counts land on
//! the receiver antenna.
//!
//! A path of `n` refraction steps and `m` reflection steps launched at
//! `theta` lands at the horizontal offset
//!
//! ```text
//! D(n, m) = n·X_T + (n + m + 2)·X_R / 2 + 2·l1·tan(asin(n1 sin θ / n3))
//! ```
//!
//! and is received when `d <= D(n, m) <= d + L`. The critical-angle
//! equation, the maximum refraction count and both reflection-count bounds
//! are all the same inequality solved for a different unknown.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::materials::StackSpec;

/// Relative distance to the nearest integer below which a floor/ceil
/// argument is treated as that integer.
pub const SNAP_TOLERANCE: f64 = 1e-9;

/// Absolute tolerance of the critical-angle root search, in radians.
pub const THETA_TOLERANCE: f64 = 1e-12;

/// Smallest launch angle the root search will bracket.
pub const THETA_MIN: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid geometry: {field} ({constraint})")]
    InvalidGeometry {
        field: &'static str,
        constraint: &'static str,
    },
    #[error("launch angle {theta} rad is outside [0, pi/2)")]
    AngleDomain { theta: f64 },
    #[error("no launch angle reaches the receiver: displacement at the smallest angle already exceeds d + L")]
    NoSolution,
    #[error("degenerate launch angle {theta}: step displacements vanish")]
    DegenerateAngle { theta: f64 },
}

/// Transmitter/receiver placement and sampling resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// Layers between transmitter and receiver (`J`).
    pub layers: u32,
    /// Layers between transmitter and the nearest chip boundary (`J_bound`).
    /// `None` is the boundary-less idealisation.
    pub boundary_layers: Option<u32>,
    /// Horizontal transmitter-receiver displacement `d` in meters.
    pub displacement: f64,
    /// Receiver antenna length `L` in meters.
    pub antenna_length: f64,
    pub tx_gain: f64,
    pub rx_gain: f64,
    /// Number of launch-angle samples `r`.
    pub samples: u32,
}

impl Geometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |field, constraint| Err(GeometryError::InvalidGeometry { field, constraint });
        if self.layers < 1 {
            return bad("J", "J >= 1");
        }
        if self.samples < 1 {
            return bad("r", "r >= 1");
        }
        if !(self.displacement.is_finite() && self.displacement >= 0.0) {
            return bad("d", "d >= 0");
        }
        if !(self.antenna_length.is_finite() && self.antenna_length > 0.0) {
            return bad("L", "L > 0");
        }
        if !(self.tx_gain.is_finite() && self.tx_gain > 0.0) {
            return bad("g_t", "g_t > 0");
        }
        if !(self.rx_gain.is_finite() && self.rx_gain > 0.0) {
            return bad("g_r", "g_r > 0");
        }
        Ok(())
    }

    /// Right endpoint of the receiver window, `d + L`.
    pub fn far_edge(&self) -> f64 {
        self.displacement + self.antenna_length
    }
}

fn check_angle(theta: f64) -> Result<(), GeometryError> {
    if theta.is_finite() && (0.0..std::f64::consts::FRAC_PI_2).contains(&theta) {
        Ok(())
    } else {
        Err(GeometryError::AngleDomain { theta })
    }
}

/// Offset contributed by crossing material `i` (0 or 1) once.
fn crossing(theta: f64, stack: &StackSpec, i: usize) -> f64 {
    let s = stack.index[i] * theta.sin() / stack.index[2];
    stack.thickness[i] * s.asin().tan()
}

/// Horizontal displacement of one refraction step, `X_{θ,T}`.
pub fn x_refract(theta: f64, stack: &StackSpec) -> Result<f64, GeometryError> {
    check_angle(theta)?;
    Ok(crossing(theta, stack, 0) + crossing(theta, stack, 1))
}

/// Horizontal displacement of one reflection step, `X_{θ,R} = 2 l2 tan θ`.
pub fn x_reflect(theta: f64, stack: &StackSpec) -> f64 {
    2.0 * stack.thickness[1] * theta.tan()
}

/// Step displacements for one launch angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSample {
    pub theta: f64,
    /// `X_{θ,T}`.
    pub x_t: f64,
    /// `X_{θ,R}`.
    pub x_r: f64,
    /// Offset of the launch crossing through the top material.
    pub launch_offset: f64,
}

impl AngleSample {
    pub fn new(theta: f64, stack: &StackSpec) -> Result<Self, GeometryError> {
        Ok(AngleSample {
            theta,
            x_t: x_refract(theta, stack)?,
            x_r: x_reflect(theta, stack),
            launch_offset: crossing(theta, stack, 0),
        })
    }

    /// Landing displacement `D(n, m)` of a path with `n` refraction and `m`
    /// reflection steps.
    pub fn landing(&self, n: u64, m: u64) -> f64 {
        n as f64 * self.x_t + (n + m + 2) as f64 * self.x_r / 2.0 + 2.0 * self.launch_offset
    }
}

pub(crate) fn snap_floor(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP_TOLERANCE * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

pub(crate) fn snap_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= SNAP_TOLERANCE * x.abs().max(1.0) {
        r
    } else {
        x.ceil()
    }
}

/// Solve the critical-angle equation `D(J + 2q, 0) = d + L` for `theta`.
///
/// The landing displacement is strictly increasing in `theta`, so plain
/// bisection on `[THETA_MIN, pi/2)` converges. If the right-hand side never
/// reaches `d + L` below `pi/2` the upper bracket endpoint is returned.
pub fn solve_theta_bound(geom: &Geometry, stack: &StackSpec, q: u32) -> Result<f64, GeometryError> {
    geom.validate()?;
    let n = u64::from(geom.layers) + 2 * u64::from(q);
    let target = geom.far_edge();
    let excess = |theta: f64| -> f64 {
        // Angles in the bracket are always in the domain.
        let s = AngleSample::new(theta, stack).expect("bracketed angle");
        s.landing(n, 0) - target
    };

    let mut lo = THETA_MIN;
    let mut hi = std::f64::consts::FRAC_PI_2 - THETA_MIN;
    if excess(lo) >= 0.0 {
        return Err(GeometryError::NoSolution);
    }
    if excess(hi) <= 0.0 {
        return Ok(hi);
    }
    while hi - lo > THETA_TOLERANCE / 4.0 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Admissible refraction counts `J, J+2, ..., max` at one angle.
///
/// Counts whose parity differs from `J` can never end `J` layers down, so
/// the range steps by two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefractionRange {
    pub min: u64,
    /// Largest refraction count; may be below `min`, meaning no class exists.
    pub max: i64,
}

impl RefractionRange {
    pub fn is_empty(&self) -> bool {
        self.max < self.min as i64
    }

    /// Largest admissible count with the right parity.
    pub fn last(&self) -> Option<u64> {
        if self.is_empty() {
            return None;
        }
        let span = self.max as u64 - self.min;
        Some(self.min + span - span % 2)
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> {
        let stop = self.last().map_or(0, |l| l + 1);
        (self.min..stop).step_by(2)
    }
}

pub fn refraction_range(sample: &AngleSample, geom: &Geometry) -> Result<RefractionRange, GeometryError> {
    let denom = 2.0 * sample.x_t + sample.x_r;
    if denom.is_nan() || denom <= 0.0 {
        return Err(GeometryError::DegenerateAngle {
            theta: sample.theta,
        });
    }
    let numer = 2.0 * (geom.far_edge() - 2.0 * sample.launch_offset - sample.x_r);
    let max = snap_floor(numer / denom);
    Ok(RefractionRange {
        min: u64::from(geom.layers),
        max: max.clamp(i64::MIN as f64, i64::MAX as f64) as i64,
    })
}

/// Reflection counts `min..=max` that land a class with fixed `n` on the
/// receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionRange {
    pub min: u64,
    pub max: i64,
}

impl ReflectionRange {
    pub fn is_empty(&self) -> bool {
        self.max < self.min as i64
    }

    pub fn contains(&self, m: u64) -> bool {
        m >= self.min && (m as i64) <= self.max
    }

    pub fn len(&self) -> u64 {
        if self.is_empty() {
            0
        } else {
            (self.max - self.min as i64) as u64 + 1
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> {
        let stop = if self.is_empty() { self.min } else { self.max as u64 + 1 };
        self.min..stop
    }
}

/// Reflection-count window for `n` refractions. The lower bound is clamped
/// at zero; `n` does not have to be admissible, which lets the counting code
/// ask whether an intermediate arrival lands on the antenna.
pub fn reflection_range(sample: &AngleSample, n: u64, geom: &Geometry) -> Result<ReflectionRange, GeometryError> {
    if sample.x_r.is_nan() || sample.x_r <= 0.0 {
        return Err(GeometryError::DegenerateAngle {
            theta: sample.theta,
        });
    }
    let n_f = n as f64;
    let base = 2.0 * n_f * sample.x_t + (n_f + 2.0) * sample.x_r + 4.0 * sample.launch_offset;
    let lo = snap_ceil((2.0 * geom.displacement - base) / sample.x_r);
    let hi = snap_floor((2.0 * geom.far_edge() - base) / sample.x_r);
    let lo = lo.max(0.0);
    Ok(ReflectionRange {
        min: lo.min(u64::MAX as f64) as u64,
        max: hi.clamp(i64::MIN as f64, i64::MAX as f64) as i64,
    })
}

/// Every admissible `(n, m-range)` pair at one angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRange {
    pub theta: f64,
    pub refraction: RefractionRange,
    /// One entry per admissible `n` with a non-empty reflection window,
    /// ascending in `n`.
    pub reflections: Vec<(u64, ReflectionRange)>,
}

impl ClassRange {
    pub fn is_empty(&self) -> bool {
        self.reflections.is_empty()
    }

    pub fn max_refractions(&self) -> Option<u64> {
        self.reflections.last().map(|(n, _)| *n)
    }

    pub fn max_reflections(&self) -> Option<u64> {
        self.reflections.iter().map(|(_, r)| r.max as u64).max()
    }

    /// All `(n, m)` classes in `n`-then-`m` order.
    pub fn classes(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.reflections
            .iter()
            .flat_map(|(n, r)| r.iter().map(move |m| (*n, m)))
    }
}

pub fn class_range(sample: &AngleSample, geom: &Geometry) -> Result<ClassRange, GeometryError> {
    let refraction = refraction_range(sample, geom)?;
    let mut reflections = Vec::new();
    for n in refraction.iter() {
        let r = reflection_range(sample, n, geom)?;
        if !r.is_empty() {
            reflections.push((n, r));
        }
    }
    Ok(ClassRange {
        theta: sample.theta,
        refraction,
        reflections,
    })
}
