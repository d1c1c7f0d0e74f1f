//! Monte Carlo path sampling: drift estimates and entropy cross-checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dist::Distribution;
use crate::interner::{GroupCtx, IDENTITY_ID};
use crate::measure::Measure;
use crate::series::Estimate;
use crate::{Error, Result};

/// Draws single steps of the walk from a fixed measure.
pub(crate) struct StepSampler {
    cum: Vec<f64>,
    ids: Vec<u32>,
}

impl StepSampler {
    pub fn new(measure: &Measure) -> Self {
        let mut cum = Vec::with_capacity(measure.atoms.len());
        let mut ids = Vec::with_capacity(measure.atoms.len());
        let mut acc = 0.0;
        for &(id, p) in &measure.atoms {
            acc += p;
            cum.push(acc);
            ids.push(id);
        }
        if let Some(last) = cum.last_mut() {
            *last = 1.0;
        }
        StepSampler { cum, ids }
    }

    pub fn sample_atom(&self, rng: &mut impl Rng) -> u32 {
        let u: f64 = rng.gen();
        let idx = self.cum.partition_point(|&c| c <= u);
        self.ids[idx.min(self.ids.len() - 1)]
    }

    pub fn step(&self, ctx: &mut GroupCtx, rng: &mut impl Rng, at: u32) -> u32 {
        let g = self.sample_atom(rng);
        ctx.compose_ids(at, g)
    }
}

/// Per-path generator seeded from a common seed; path index selects the
/// stream, so results do not depend on scheduling order.
pub(crate) fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

#[derive(Debug, Clone)]
pub struct McRun {
    /// Drift estimate from the second half of the horizon; the error bar is
    /// the standard error plus the disagreement with the full-horizon mean
    /// (a transient-bias witness).
    pub drift: Estimate,
    /// Mean of -log mu^{*k0}(X_k0)/k0 against the supplied exact law.
    pub entropy_rate: Option<Estimate>,
    pub horizon: usize,
    pub count: usize,
    pub trajectories: Vec<Vec<u32>>,
}

struct MeanVar {
    n: f64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    fn new() -> Self {
        MeanVar {
            n: 0.0,
            mean: 0.0,
            m2: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn se(&self) -> f64 {
        // saturate at the mean magnitude rather than going infinite, so a
        // single-sample estimate still serializes as a finite (useless) bar
        if self.n < 2.0 {
            return self.mean.abs().max(1.0);
        }
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

/// Samples `count` independent paths of length `horizon`.
///
/// `exact_law` is an exactly convolved law at some step k0 <= horizon; when
/// supplied, each path also records -log mu^{*k0}(X_k0)/k0, whose mean is
/// H(k0)/k0. The first `keep_trajectories` paths are returned in full as
/// element-id sequences (including the start at the identity).
pub fn sample_paths(
    ctx: &mut GroupCtx,
    measure: &Measure,
    horizon: usize,
    count: usize,
    seed: u64,
    exact_law: Option<&Distribution>,
    keep_trajectories: usize,
) -> Result<McRun> {
    if count == 0 || horizon == 0 {
        return Err(Error::Domain(
            "sampling needs count >= 1 and horizon >= 1".into(),
        ));
    }
    if let Some(law) = exact_law {
        if law.step == 0 || law.step > horizon {
            return Err(Error::Domain(format!(
                "exact law at step {} is outside the horizon {horizon}",
                law.step
            )));
        }
    }
    let sampler = StepSampler::new(measure);
    let half = horizon / 2;
    let mut full = MeanVar::new();
    let mut late = MeanVar::new();
    let mut hmc = MeanVar::new();
    let mut trajectories = Vec::new();
    for path in 0..count {
        let mut rng = path_rng(seed, path as u64);
        let mut at = IDENTITY_ID;
        let mut len_half = 0.0;
        let mut keep = (path < keep_trajectories).then(|| vec![IDENTITY_ID]);
        for step in 1..=horizon {
            at = sampler.step(ctx, &mut rng, at);
            if let Some(tr) = keep.as_mut() {
                tr.push(at);
            }
            if step == half {
                len_half = ctx.length(at);
            }
            if let Some(law) = exact_law {
                if step == law.step {
                    let p = law
                        .entries
                        .binary_search_by_key(&at, |&(id, _)| id)
                        .ok()
                        .map(|i| law.entries[i].1)
                        .ok_or_else(|| {
                            Error::Domain(format!(
                                "exact law at step {} is missing the sampled element {}",
                                law.step,
                                ctx.display(at)
                            ))
                        })?;
                    hmc.push(-p.ln() / law.step as f64);
                }
            }
        }
        let len_end = ctx.length(at);
        full.push(len_end / horizon as f64);
        if half > 0 {
            late.push((len_end - len_half) / (horizon - half) as f64);
        }
        if let Some(tr) = keep {
            trajectories.push(tr);
        }
    }

    let (value, se, spread) = if half > 0 {
        (late.mean, late.se(), (late.mean - full.mean).abs())
    } else {
        (full.mean, full.se(), 0.0)
    };
    let mut drift = Estimate {
        value,
        err: se + spread,
        method: "mc".into(),
        in_range: true,
        note: Some(format!("{count} paths, horizon {horizon}")),
    };
    if drift.value < 0.0 {
        drift.value = 0.0;
    }
    let entropy_rate = exact_law.map(|law| Estimate {
        value: hmc.mean,
        err: hmc.se(),
        method: "mc-vs-exact-law".into(),
        in_range: true,
        note: Some(format!("cross-check at step {}", law.step)),
    });
    Ok(McRun {
        drift,
        entropy_rate,
        horizon,
        count,
        trajectories,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{distribution_stats, nstep};
    use crate::group::{parse_element, GroupSpec};
    use crate::measure::{build_measure, uniform_on_generators};

    #[test]
    fn asymmetric_line_drift() {
        let mut ctx = GroupCtx::new(GroupSpec::free_abelian(1)).unwrap();
        let pairs = vec![
            (parse_element(&ctx.spec, "(1)").unwrap(), 0.3),
            (parse_element(&ctx.spec, "(-1)").unwrap(), 0.7),
        ];
        let m = build_measure(&mut ctx, &pairs).unwrap();
        assert!(!m.is_symmetric);
        let run = sample_paths(&mut ctx, &m, 400, 4000, 11, None, 0).unwrap();
        assert!((run.drift.value - 0.4).abs() <= 3.0 * run.drift.err);
        assert!((run.drift.value - 0.4).abs() < 0.02);
    }

    #[test]
    fn weighted_free_group_drift() {
        let mut ctx = GroupCtx::new(GroupSpec::free_weighted(2, vec![1.0, 0.5])).unwrap();
        let m = uniform_on_generators(&mut ctx).unwrap();
        let run = sample_paths(&mut ctx, &m, 200, 4000, 7, None, 0).unwrap();
        assert!((run.drift.value - 0.375).abs() <= 3.0 * run.drift.err);
    }

    #[test]
    fn single_step_mean_length_is_first_moment() {
        let mut ctx = GroupCtx::new(GroupSpec::free_weighted(2, vec![1.0, 0.5])).unwrap();
        let m = uniform_on_generators(&mut ctx).unwrap();
        let run = sample_paths(&mut ctx, &m, 1, 20000, 3, None, 0).unwrap();
        // horizon 1: estimator falls back to the full mean, E|X_1| = M_1
        assert!((run.drift.value - 0.75).abs() <= 3.0 * run.drift.err);
        assert!(run.drift.err < 0.01);
    }

    #[test]
    fn entropy_cross_check_against_exact_law() {
        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let m = uniform_on_generators(&mut ctx).unwrap();
        let law = nstep(&mut ctx, &m, 6, 0.0, 1 << 20).unwrap();
        let exact = distribution_stats(&ctx, &law);
        let run = sample_paths(&mut ctx, &m, 10, 3000, 5, Some(&law), 0).unwrap();
        let e = run.entropy_rate.unwrap();
        assert!((e.value - exact.h / 6.0).abs() <= 3.0 * e.err);
        assert!(e.err < 0.01);
    }

    #[test]
    fn reproducible_and_stream_split() {
        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let m = uniform_on_generators(&mut ctx).unwrap();
        let a = sample_paths(&mut ctx, &m, 50, 200, 42, None, 3).unwrap();
        let b = sample_paths(&mut ctx, &m, 50, 200, 42, None, 3).unwrap();
        assert_eq!(a.drift.value, b.drift.value);
        assert_eq!(a.trajectories, b.trajectories);
        assert_eq!(a.trajectories.len(), 3);
        assert_eq!(a.trajectories[0].len(), 51);
        let c = sample_paths(&mut ctx, &m, 50, 200, 43, None, 3).unwrap();
        assert_ne!(a.drift.value, c.drift.value);
        // paths are distinct streams, not shifted copies of one another
        assert_ne!(a.trajectories[0], a.trajectories[1]);
    }

    #[test]
    fn law_outside_horizon_rejected() {
        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let m = uniform_on_generators(&mut ctx).unwrap();
        let law = nstep(&mut ctx, &m, 6, 0.0, 1 << 20).unwrap();
        assert!(sample_paths(&mut ctx, &m, 4, 10, 5, Some(&law), 0).is_err());
    }
}
