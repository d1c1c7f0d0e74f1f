//! Sparse n-step laws by iterated convolution.

use std::collections::HashMap;

use serde::Serialize;

use crate::interner::{GroupCtx, IDENTITY_ID};
use crate::measure::Measure;
use crate::{Error, Result};

/// The law of the walk at a fixed step, sparsely represented. Entries are sorted
/// by element id; entries dropped by pruning are accounted in `pruned_mass`.
#[derive(Debug, Clone)]
pub struct Distribution {
    pub entries: Vec<(u32, f64)>,
    pub step: usize,
    pub pruned_mass: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistStats {
    pub h: f64,
    pub l: f64,
    pub return_prob: f64,
    pub mass: f64,
}

/// Compensated accumulator for long sums.
#[derive(Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub fn delta_identity() -> Distribution {
    Distribution {
        entries: vec![(IDENTITY_ID, 1.0)],
        step: 0,
        pruned_mass: 0.0,
    }
}

/// One convolution step: next(z) = sum_g dist(x) mu(g) over xg = z.
pub fn convolve_step(
    ctx: &mut GroupCtx,
    dist: &Distribution,
    measure: &Measure,
    prune_eps: f64,
    max_support: usize,
) -> Result<Distribution> {
    let mut acc: HashMap<u32, f64> = HashMap::with_capacity(dist.entries.len() * 2);
    for &(x, p) in &dist.entries {
        for &(g, q) in &measure.atoms {
            let z = ctx.compose_ids(x, g);
            *acc.entry(z).or_insert(0.0) += p * q;
        }
    }
    let mut pruned = KahanSum::default();
    pruned.add(dist.pruned_mass);
    let mut entries: Vec<(u32, f64)> = Vec::with_capacity(acc.len());
    for (id, p) in acc {
        if p <= prune_eps {
            pruned.add(p);
        } else {
            entries.push((id, p));
        }
    }
    if entries.len() > max_support {
        return Err(Error::Budget {
            stage: "exact-walk convolution".into(),
            reached: dist.step + 1,
            needed: entries.len(),
        });
    }
    entries.sort_by_key(|(id, _)| *id);
    Ok(Distribution {
        entries,
        step: dist.step + 1,
        pruned_mass: pruned.value(),
    })
}

/// The n-fold convolution mu^{*n}. `prune_eps = 0` keeps the law exact.
pub fn nstep(
    ctx: &mut GroupCtx,
    measure: &Measure,
    n: usize,
    prune_eps: f64,
    max_support: usize,
) -> Result<Distribution> {
    let mut dist = delta_identity();
    for _ in 0..n {
        dist = convolve_step(ctx, &dist, measure, prune_eps, max_support)?;
    }
    Ok(dist)
}

/// Entropy (nats), mean length, return probability, and retained mass.
/// Pruned mass contributes zero to all three statistics.
pub fn distribution_stats(ctx: &GroupCtx, dist: &Distribution) -> DistStats {
    let mut h = KahanSum::default();
    let mut l = KahanSum::default();
    let mut mass = KahanSum::default();
    let mut return_prob = 0.0;
    for &(id, p) in &dist.entries {
        h.add(-p * p.ln());
        l.add(p * ctx.length(id));
        mass.add(p);
        if id == IDENTITY_ID {
            return_prob = p;
        }
    }
    DistStats {
        h: h.value(),
        l: l.value(),
        return_prob,
        mass: mass.value(),
    }
}
