//! Exact path-class cardinalities.
//!
//! A path is a word over three steps: refract up (`+1`), refract down
//! (`-1`) and reflect (`0`). A class `(n, m)` holds every word with `n`
//! refraction steps summing to `-J` and `m` reflections. Two rules remove
//! words from a class:
//!
//! * absorption: a refraction step other than the last one arrives at depth
//!   `-J` at a horizontal offset inside the antenna window, so the energy is
//!   taken by the receiver before the path completes;
//! * boundary: the running depth rises above `J_bound`, so the path leaves
//!   the chip.
//!
//! Both rules are applied in one dynamic program over
//! `(refractions taken, reflections taken, depth)`, so words failing both are
//! removed once. All arithmetic is on [`BigUint`].

use num_bigint::BigUint;
use num_integer::binomial;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::geometry::{reflection_range, AngleSample, ClassRange, Geometry, GeometryError, ReflectionRange};

/// One path class at a launch angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathClass {
    pub theta: f64,
    /// Refraction steps `n_θ`.
    pub n: u64,
    /// Reflection steps `m_θ`.
    pub m: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    /// Every word of the class.
    pub raw: BigUint,
    /// Words absorbed by the receiver before their last refraction.
    pub redundant: BigUint,
    /// Words that are not absorbed but cross the boundary. Always zero for
    /// the boundary-less model.
    pub boundary_excluded: BigUint,
    /// `raw - redundant - boundary_excluded`.
    pub effective: BigUint,
}

pub(crate) fn choose(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    binomial(BigUint::from(n), BigUint::from(k))
}

/// Orderings of `n` refraction steps of `±1` that sum to `-J`.
pub fn refraction_combinations(n: u64, layers: u64) -> BigUint {
    if n < layers || !(n - layers).is_multiple_of(2) {
        return BigUint::zero();
    }
    choose(n, (n - layers) / 2)
}

/// Size of class `(n, m)` before any exclusion: refraction orderings times
/// the ways to interleave `m` reflections among them.
pub fn class_count(n: u64, m: u64, layers: u64) -> BigUint {
    let r = refraction_combinations(n, layers);
    if r.is_zero() {
        return r;
    }
    r * choose(n + m, m)
}

/// Words of class `(n, m)` whose running depth exceeds `J_bound` somewhere,
/// by the reflection principle: a walk from `0` to `-J` touching
/// `J_bound + 1` mirrors onto a walk ending at `2(J_bound + 1) + J`.
///
/// Absorption is not considered here; [`effective_count`] handles the
/// overlap between the two exclusions.
pub fn boundary_excluded_count(class: &PathClass, layers: u64, boundary_layers: u64) -> BigUint {
    let n = class.n;
    if n < layers || !(n - layers).is_multiple_of(2) {
        return BigUint::zero();
    }
    let mirrored_end = 2 * (boundary_layers + 1) + layers;
    if mirrored_end > n {
        return BigUint::zero();
    }
    // Up-steps `u` of the mirrored walk satisfy 2u - n = mirrored_end.
    let ups = (n + mirrored_end) / 2;
    choose(n, ups) * choose(n + class.m, class.m)
}

/// First-passage dynamic program shared by the per-class and per-angle entry
/// points.
struct FirstPassage<'a> {
    layers: u64,
    ceiling: Option<u64>,
    /// Absorbing reflection window of an arrival after `k` refractions,
    /// indexed by `k`.
    windows: &'a [Option<ReflectionRange>],
}

impl FirstPassage<'_> {
    /// Arrival counts: `out[k][j]` is the number of words with `k` refraction
    /// and `j` reflection steps whose final step is the `k`-th refraction,
    /// landing at depth `-J`, with no earlier absorbing arrival and no
    /// boundary crossing. Only rows listed in `wanted` are kept.
    ///
    /// `caps[k]` is the largest reflection count any continuation from `k`
    /// refractions needs, for `k = 0..n_max`.
    fn arrivals(&self, n_max: u64, caps: &[u64], wanted: &[u64]) -> Vec<(u64, Vec<BigUint>)> {
        let n_max_i = n_max as i64;
        let target = -(self.layers as i64);
        let ceiling = self.ceiling.map(|c| c as i64);
        let width = (2 * n_max + 1) as usize;
        let offset = n_max_i;
        let at = |j: u64, h: i64| j as usize * width + (h + offset) as usize;

        // Depth window that can still end at `target` within `n_max` steps.
        let depth_range = |k: u64| -> (i64, i64) {
            let k = k as i64;
            let slack = n_max_i - k;
            let lo = (-k).max(target - slack);
            let mut hi = k.min(target + slack);
            if let Some(c) = ceiling {
                hi = hi.min(c);
            }
            // Same parity as k.
            let lo = if (lo - k).rem_euclid(2) == 0 { lo } else { lo + 1 };
            let hi = if (hi - k).rem_euclid(2) == 0 { hi } else { hi - 1 };
            (lo, hi)
        };

        let max_cap = caps.iter().copied().max().unwrap_or(0);
        let cells = (max_cap as usize + 1) * width;
        let mut prev = vec![BigUint::zero(); cells];
        let mut cur = vec![BigUint::zero(); cells];

        // No refraction yet: only reflections, all at depth 0.
        for j in 0..=caps.first().copied().unwrap_or(0) {
            prev[at(j, 0)] = BigUint::one();
        }
        let mut prev_range = (0i64, 0i64);
        let mut prev_cap = caps.first().copied().unwrap_or(0);

        let mut out = Vec::with_capacity(wanted.len());
        for k in 1..=n_max {
            let keep = wanted.binary_search(&k).is_ok();
            let cap = if k < n_max { caps[k as usize] } else { 0 };
            // Arrivals at k may need reflection counts up to caps[k-1].
            let rows = prev_cap;
            let (lo, hi) = depth_range(k);
            let mut arrivals = if keep {
                vec![BigUint::zero(); rows as usize + 1]
            } else {
                Vec::new()
            };
            let window = self.windows.get(k as usize).copied().flatten();

            for j in 0..=rows.max(cap) {
                if lo > hi {
                    break;
                }
                let mut h = lo;
                while h <= hi {
                    let idx = at(j, h);
                    let mut v = BigUint::zero();
                    if j <= prev_cap {
                        for src in [h - 1, h + 1] {
                            if src >= prev_range.0 && src <= prev_range.1 {
                                v += &prev[at(j, src)];
                            }
                        }
                    }
                    if h == target {
                        if keep && j <= rows {
                            arrivals[j as usize].clone_from(&v);
                        }
                        if window.is_some_and(|w| w.contains(j)) {
                            v.set_zero();
                        }
                    }
                    if j > 0 {
                        v += &cur[at(j - 1, h)];
                    }
                    cur[idx] = v;
                    h += 2;
                }
            }
            if keep {
                out.push((k, arrivals));
            }
            std::mem::swap(&mut prev, &mut cur);
            prev_range = (lo, hi);
            prev_cap = cap;
        }
        out
    }
}

fn absorbing_windows(sample: &AngleSample, geom: &Geometry, n_max: u64) -> Result<Vec<Option<ReflectionRange>>, GeometryError> {
    let layers = u64::from(geom.layers);
    (0..=n_max)
        .map(|k| {
            if k < layers || (k - layers) % 2 != 0 {
                return Ok(None);
            }
            let w = reflection_range(sample, k, geom)?;
            Ok((!w.is_empty()).then_some(w))
        })
        .collect()
}

fn surviving(class: &PathClass, sample: &AngleSample, geom: &Geometry, ceiling: Option<u64>) -> Result<BigUint, GeometryError> {
    let layers = u64::from(geom.layers);
    if class.n < layers || !(class.n - layers).is_multiple_of(2) {
        return Ok(BigUint::zero());
    }
    let windows = absorbing_windows(sample, geom, class.n)?;
    let dp = FirstPassage {
        layers,
        ceiling,
        windows: &windows,
    };
    let caps = vec![class.m; class.n as usize];
    let rows = dp.arrivals(class.n, &caps, &[class.n]);
    Ok(rows[0].1.iter().sum())
}

/// Words of the class that are absorbed before their final refraction.
pub fn redundant_count(class: &PathClass, sample: &AngleSample, geom: &Geometry) -> Result<BigUint, GeometryError> {
    let raw = class_count(class.n, class.m, u64::from(geom.layers));
    let alive = surviving(class, sample, geom, None)?;
    Ok(raw - alive)
}

/// Full accounting for one class. In bounded mode the boundary comes from
/// `geom.boundary_layers` (a missing value means no boundary).
pub fn effective_count(class: &PathClass, sample: &AngleSample, geom: &Geometry, bounded: bool) -> Result<ClassCount, GeometryError> {
    let raw = class_count(class.n, class.m, u64::from(geom.layers));
    let free = surviving(class, sample, geom, None)?;
    let redundant = &raw - &free;
    let ceiling = geom.boundary_layers.filter(|_| bounded).map(u64::from);
    let (boundary_excluded, effective) = match ceiling {
        Some(c) => {
            let kept = surviving(class, sample, geom, Some(c))?;
            (&free - &kept, kept)
        }
        None => (BigUint::zero(), free),
    };
    Ok(ClassCount {
        raw,
        redundant,
        boundary_excluded,
        effective,
    })
}

/// Effective counts of every class at one angle in a single pass.
///
/// Returns `(n, m, count)` in `n`-then-`m` order, including zero counts.
/// With `min_refractions_only` set, only `n = J` classes are produced.
pub fn angle_counts(
    sample: &AngleSample,
    geom: &Geometry,
    ranges: &ClassRange,
    ceiling: Option<u32>,
    min_refractions_only: bool,
) -> Result<Vec<(u64, u64, BigUint)>, GeometryError> {
    let layers = u64::from(geom.layers);
    let classes: Vec<(u64, ReflectionRange)> = ranges
        .reflections
        .iter()
        .filter(|(n, _)| !min_refractions_only || *n == layers)
        .copied()
        .collect();
    let Some(&(n_max, _)) = classes.last() else {
        return Ok(Vec::new());
    };
    let windows = absorbing_windows(sample, geom, n_max)?;
    // caps[k] = max reflection bound over classes with n > k.
    let mut caps = vec![0u64; n_max as usize];
    for (n, r) in &classes {
        for cap in caps.iter_mut().take(*n as usize) {
            *cap = (*cap).max(r.max as u64);
        }
    }
    let wanted: Vec<u64> = classes.iter().map(|(n, _)| *n).collect();
    let dp = FirstPassage {
        layers,
        ceiling: ceiling.map(u64::from),
        windows: &windows,
    };
    let arrivals = dp.arrivals(n_max, &caps, &wanted);

    let mut out = Vec::new();
    for ((n, r), (k, row)) in classes.iter().zip(&arrivals) {
        debug_assert_eq!(n, k);
        let mut running = BigUint::zero();
        for (j, v) in row.iter().enumerate().take(r.max as usize + 1) {
            running += v;
            if j as u64 >= r.min {
                out.push((*n, j as u64, running.clone()));
            }
        }
    }
    Ok(out)
}
