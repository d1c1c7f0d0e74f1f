//! Ball and sphere census by breadth-first search, and growth-rate estimation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::group::{compose_unchecked, length_unchecked, Element, GroupSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallCensus {
    pub radius: usize,
    pub sphere_sizes: Vec<u64>,
    pub ball_sizes: Vec<u64>,
    /// Budget ran out; only complete spheres are reported.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthEstimate {
    pub v_cesaro: f64,
    pub v_ratio: f64,
    pub depth: usize,
    pub subexponential: bool,
}

fn require_unit_generators(spec: &GroupSpec) -> Result<()> {
    for (lab, g) in spec.generators() {
        let len = length_unchecked(spec, &g);
        if (len - 1.0).abs() > 1e-12 {
            return Err(Error::Unsupported(format!(
                "census needs unit generator lengths; {lab} has length {len}"
            )));
        }
    }
    Ok(())
}

/// Exact sphere/ball counts out to `radius`, or as far as `max_states` allows.
pub fn ball_census(spec: &GroupSpec, radius: usize, max_states: usize) -> Result<BallCensus> {
    spec.validate()?;
    require_unit_generators(spec)?;
    let gens: Vec<Element> = spec.generators().into_iter().map(|(_, g)| g).collect();
    let mut visited: HashSet<Element> = HashSet::new();
    let mut frontier = vec![spec.identity()];
    visited.insert(spec.identity());
    let mut sphere_sizes = vec![1u64];
    let mut truncated = false;
    for _ in 1..=radius {
        let mut next = Vec::new();
        for x in &frontier {
            for g in &gens {
                let y = compose_unchecked(spec, x, g);
                if visited.insert(y.clone()) {
                    next.push(y);
                    if visited.len() > max_states {
                        truncated = true;
                    }
                }
            }
        }
        if truncated {
            break;
        }
        if next.is_empty() {
            // finite group exhausted; trailing spheres are empty
            sphere_sizes.push(0);
            frontier = next;
            continue;
        }
        sphere_sizes.push(next.len() as u64);
        frontier = next;
    }
    let mut ball_sizes = Vec::with_capacity(sphere_sizes.len());
    let mut acc = 0u64;
    for s in &sphere_sizes {
        acc += s;
        ball_sizes.push(acc);
    }
    Ok(BallCensus {
        radius: sphere_sizes.len() - 1,
        sphere_sizes,
        ball_sizes,
        truncated,
    })
}

/// All elements with word length <= radius, in breadth-first layer order.
pub fn enumerate_ball(spec: &GroupSpec, radius: usize) -> Result<Vec<Element>> {
    require_unit_generators(spec)?;
    let gens: Vec<Element> = spec.generators().into_iter().map(|(_, g)| g).collect();
    let mut visited: HashSet<Element> = HashSet::new();
    let mut out = vec![spec.identity()];
    let mut frontier = vec![spec.identity()];
    visited.insert(spec.identity());
    for _ in 1..=radius {
        let mut next = Vec::new();
        for x in &frontier {
            for g in &gens {
                let y = compose_unchecked(spec, x, g);
                if visited.insert(y.clone()) {
                    next.push(y);
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// Growth-rate estimators from a census.
///
/// `v_cesaro` is `log #B(n) / n` at the deepest complete radius; `v_ratio`
/// averages `log(#S(k)/#S(k-1))` over the last `ceil(n/2)` radii. Subexponential
/// or finite growth is flagged rather than treated as an error.
pub fn growth_estimate(census: &BallCensus) -> Result<GrowthEstimate> {
    let n = census.radius;
    if n < 3 {
        return Err(Error::Domain(format!("growth estimate needs radius >= 3, got {n}")));
    }
    let v_cesaro = (census.ball_sizes[n] as f64).ln() / n as f64;
    let window = n.div_ceil(2);
    let mut sum = 0.0;
    let mut hit_empty = false;
    for k in (n - window + 1)..=n {
        let prev = census.sphere_sizes[k - 1];
        let cur = census.sphere_sizes[k];
        if prev == 0 || cur == 0 {
            hit_empty = true;
        } else {
            sum += (cur as f64 / prev as f64).ln();
        }
    }
    let v_ratio = if hit_empty { 0.0 } else { sum / window as f64 };
    Ok(GrowthEstimate {
        v_cesaro,
        v_ratio,
        depth: n,
        subexponential: v_ratio < 0.1,
    })
}
