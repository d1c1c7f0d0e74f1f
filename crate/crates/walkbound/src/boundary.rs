//! First-passage probabilities, the boundary cocycle, and the two-valued
//! equality detector.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::group::{compose_and_reduce, word_length, Element, GroupSpec, Order, Syllable};
use crate::interner::{GroupCtx, IDENTITY_ID};
use crate::measure::{uniform_on_generators, Measure};
use crate::sample::{path_rng, StepSampler};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HitEntry {
    pub element: String,
    pub q: f64,
    pub err: f64,
}

/// First-passage probabilities q(g) = P(exists n >= 0 with X_n = g), keyed by
/// interned element id. Tree-exact tables have err = 0 and extend to reduced
/// words multiplicatively; Monte Carlo tables only answer for stored entries.
#[derive(Debug, Clone)]
pub struct HittingTable {
    pub method: &'static str,
    entries: HashMap<u32, (f64, f64)>,
    pub iterations: usize,
    tree: bool,
}

impl HittingTable {
    pub fn get(&self, id: u32) -> Option<(f64, f64)> {
        if id == IDENTITY_ID {
            return Some((1.0, 0.0));
        }
        self.entries.get(&id).copied()
    }

    pub fn insert(&mut self, id: u32, q: f64, err: f64) {
        self.entries.insert(id, (q, err));
    }

    pub fn rows(&self, ctx: &GroupCtx) -> Vec<HitEntry> {
        let mut rows: Vec<(u32, f64, f64)> = self
            .entries
            .iter()
            .map(|(&id, &(q, err))| (id, q, err))
            .collect();
        rows.sort_by_key(|r| r.0);
        rows.into_iter()
            .map(|(id, q, err)| HitEntry {
                element: ctx.display(id),
                q,
                err,
            })
            .collect()
    }

    /// q of a reduced word via cutpoint multiplicativity (tree tables only).
    pub fn eval(&self, ctx: &mut GroupCtx, g: &Element) -> Result<f64> {
        if !self.tree {
            let id = ctx.intern_checked(g.clone())?;
            return self
                .get(id)
                .map(|(q, _)| q)
                .ok_or_else(|| Error::Domain(format!("no hitting entry for {}", ctx.display(id))));
        }
        let word = match g {
            Element::Word(s) => s.clone(),
            _ => return Err(Error::Domain("tree hitting tables index words".into())),
        };
        let shape = ctx
            .spec
            .word_shape()
            .ok_or_else(|| Error::Domain("tree hitting tables index words".into()))?;
        let mut q = 1.0;
        for Syllable { factor, exp } in word {
            let letters: Vec<Syllable> = match shape.orders[factor as usize] {
                Order::Infinite => {
                    let sign = exp.signum();
                    (0..exp.abs()).map(|_| Syllable { factor, exp: sign }).collect()
                }
                Order::Finite(_) => vec![Syllable { factor, exp }],
            };
            for letter in letters {
                let id = ctx.intern(Element::Word(vec![letter]));
                let (ql, _) = self.get(id).ok_or_else(|| {
                    Error::Domain(format!("no hitting entry for letter {}", ctx.display(id)))
                })?;
                q *= ql;
            }
        }
        Ok(q)
    }
}

/// Solves the first-passage system on a Cayley tree by monotone iteration
/// from zero: q_s = mu(s) + q_s * sum_{t != s} mu(t) q_t. The iteration
/// selects the minimal (probabilistic) root; failure to converge within 200
/// rounds means the walk is recurrent or nearly so, and the table is refused.
pub fn solve_hitting_tree(ctx: &mut GroupCtx, measure: &Measure) -> Result<HittingTable> {
    if !ctx.spec.cayley_graph_is_tree() {
        return Err(Error::Unsupported(
            "hitting probabilities are exact only on Cayley trees; use Monte Carlo".into(),
        ));
    }
    if !measure.is_symmetric {
        return Err(Error::Unsupported(
            "the tree first-passage system assumes a symmetric measure".into(),
        ));
    }
    // nearest-neighbor check and unknown classes: one per (factor, |exp| = 1)
    let shape = ctx
        .spec
        .word_shape()
        .ok_or_else(|| Error::Unsupported("tree walk must be word-based".into()))?;
    let mut class_of: HashMap<u32, usize> = HashMap::new();
    let mut class_mu: Vec<f64> = Vec::new();
    let mut class_ids: Vec<Vec<u32>> = Vec::new();
    for &(id, p) in &measure.atoms {
        let elem = ctx.element(id).clone();
        let syl = match &elem {
            Element::Word(s) if s.len() == 1 => s[0],
            _ => {
                return Err(Error::Unsupported(format!(
                    "atom {} is not a single generator",
                    ctx.display(id)
                )))
            }
        };
        let ok = match shape.orders[syl.factor as usize] {
            Order::Infinite => syl.exp.abs() == 1,
            Order::Finite(2) => syl.exp == 1,
            Order::Finite(_) => false,
        };
        if !ok {
            return Err(Error::Unsupported(format!(
                "atom {} is not a tree edge",
                ctx.display(id)
            )));
        }
        let key = syl.factor as usize;
        match class_ids.iter().position(|ids| {
            ids.first()
                .map(|&i| matches!(ctx.element(i), Element::Word(s) if s[0].factor == syl.factor))
                .unwrap_or(false)
        }) {
            Some(c) => {
                if (class_mu[c] - p).abs() > 1e-12 {
                    return Err(Error::Unsupported(format!(
                        "direction weights within factor {key} differ",
                    )));
                }
                class_of.insert(id, c);
                class_ids[c].push(id);
            }
            None => {
                class_of.insert(id, class_ids.len());
                class_mu.push(p);
                class_ids.push(vec![id]);
            }
        }
    }

    let k = class_mu.len();
    let mut q = vec![0.0f64; k];
    let mut iterations = 0;
    loop {
        iterations += 1;
        // T = sum_t mu(t) q(t) over directed atoms
        let t_sum: f64 = (0..k)
            .map(|c| class_mu[c] * q[c] * class_ids[c].len() as f64)
            .sum();
        let mut delta: f64 = 0.0;
        let mut next = vec![0.0f64; k];
        for c in 0..k {
            next[c] = class_mu[c] + q[c] * (t_sum - class_mu[c] * q[c]);
            delta = delta.max((next[c] - q[c]).abs());
        }
        q = next;
        if delta <= 1e-13 {
            break;
        }
        if iterations >= 200 {
            return Err(Error::Domain(
                "first-passage iteration did not converge in 200 rounds; \
                 the walk is recurrent or too close to it"
                    .into(),
            ));
        }
    }

    let mut table = HittingTable {
        method: "tree-exact",
        entries: HashMap::new(),
        iterations,
        tree: true,
    };
    for (id, c) in class_of {
        table.insert(id, q[c], 0.0);
    }
    Ok(table)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McHit {
    pub estimate: f64,
    pub se: f64,
    /// Wilson interval at three sigma
    pub lo3: f64,
    pub hi3: f64,
    pub hits: usize,
    pub samples: usize,
    pub censored_fraction: f64,
    pub warning: Option<String>,
}

fn wilson(hits: usize, n: usize, z: f64) -> (f64, f64) {
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    (
        ((center - half) / denom).max(0.0),
        ((center + half) / denom).min(1.0),
    )
}

/// Frequency estimate of q(target) from `samples` independent paths.
///
/// A path stops early once the target is unreachable within the remaining
/// horizon (an exact, bias-free exit); paths that exhaust the horizon while
/// the target is still reachable are counted as censored.
pub fn hitting_mc(
    spec: &GroupSpec,
    measure_pairs: &[(Element, f64)],
    target: &Element,
    samples: usize,
    horizon: usize,
    seed: u64,
) -> Result<McHit> {
    if samples == 0 || horizon == 0 {
        return Err(Error::Domain("hitting MC needs samples and horizon".into()));
    }
    let mut ctx = GroupCtx::new(spec.clone())?;
    let measure = crate::measure::build_measure(&mut ctx, measure_pairs)?;
    let target = {
        crate::group::check_element(spec, target)?;
        target.clone()
    };
    if target == spec.identity() {
        return Ok(McHit {
            estimate: 1.0,
            se: 0.0,
            lo3: 1.0,
            hi3: 1.0,
            hits: samples,
            samples,
            censored_fraction: 0.0,
            warning: Some("target is the identity: hit at time 0 by convention".into()),
        });
    }
    let sampler = StepSampler::new(&measure);
    let target_len = word_length(spec, &target)?;
    let wmax = measure.support_radius;
    let mut hits = 0usize;
    let mut censored = 0usize;
    for path in 0..samples {
        let mut rng = path_rng(seed, path as u64);
        let mut at = spec.identity();
        let mut hit = false;
        let mut reachable = true;
        for step in 1..=horizon {
            let g = ctx.element(sampler.sample_atom(&mut rng)).clone();
            at = compose_and_reduce(spec, &at, &g)?;
            if at == target {
                hit = true;
                break;
            }
            let remaining = (horizon - step) as f64;
            if word_length(spec, &at)? - target_len > remaining * wmax + 1e-9 {
                reachable = false;
                break;
            }
        }
        if hit {
            hits += 1;
        } else if reachable {
            censored += 1;
        }
    }
    let n = samples as f64;
    let estimate = hits as f64 / n;
    let se = (estimate * (1.0 - estimate) / n).sqrt().max(0.5 / n);
    let (lo3, hi3) = wilson(hits, samples, 3.0);
    let censored_fraction = censored as f64 / n;
    let warning = (censored_fraction > se).then(|| {
        format!(
            "censored fraction {censored_fraction:.2e} exceeds the standard error; \
             increase the horizon"
        )
    });
    Ok(McHit {
        estimate,
        se,
        lo3,
        hi3,
        hits,
        samples,
        censored_fraction,
        warning,
    })
}

fn single_syllable(ctx: &GroupCtx, id: u32) -> Result<Syllable> {
    match ctx.element(id) {
        Element::Word(s) if s.len() == 1 => Ok(s[0]),
        _ => Err(Error::Domain(format!(
            "{} is not a generator letter",
            ctx.display(id)
        ))),
    }
}

/// The boundary Radon-Nikodym cocycle c0(a, xi) for a generator a and a ray
/// whose first letter is xi1: q(a) when the factors differ, q(a xi1)/q(xi1)
/// when they coincide.
pub fn rn_cocycle(ctx: &mut GroupCtx, table: &HittingTable, a: u32, xi1: u32) -> Result<f64> {
    let sa = single_syllable(ctx, a)?;
    let sx = single_syllable(ctx, xi1)?;
    if sa.factor != sx.factor {
        return table
            .get(a)
            .map(|(q, _)| q)
            .ok_or_else(|| Error::Domain(format!("no hitting entry for {}", ctx.display(a))));
    }
    let prod = {
        let ea = ctx.element(a).clone();
        let ex = ctx.element(xi1).clone();
        compose_and_reduce(&ctx.spec, &ea, &ex)?
    };
    let q_num = lookup_or_eval(ctx, table, &prod)?;
    let ex = ctx.element(xi1).clone();
    let q_den = lookup_or_eval(ctx, table, &ex)?;
    Ok(q_num / q_den)
}

fn lookup_or_eval(ctx: &mut GroupCtx, table: &HittingTable, g: &Element) -> Result<f64> {
    let id = ctx.intern(g.clone());
    if let Some((q, _)) = table.get(id) {
        return Ok(q);
    }
    table.eval(ctx, g)
}

/// General cocycle value c0(g, xi) on a tree, evaluated through a reduced
/// ray prefix long enough to clear g: q(g * prefix) / q(prefix).
pub fn rn_cocycle_word(
    ctx: &mut GroupCtx,
    table: &HittingTable,
    g: &Element,
    prefix: &Element,
) -> Result<f64> {
    let prod = compose_and_reduce(&ctx.spec, g, prefix)?;
    let num = table.eval(ctx, &prod)?;
    let den = table.eval(ctx, prefix)?;
    Ok(num / den)
}

/// Exact boundary-formula entropy for the uniform walk on the free group of
/// rank d: h = -sum_a mu(a) sum_{xi1} nu0(xi1) log c0(a, xi1), where nu0 is
/// the harmonic measure of first-letter cylinders (uniform by symmetry).
pub fn boundary_entropy_free(d: u32) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain("boundary entropy needs rank >= 2".into()));
    }
    let spec = GroupSpec::Free {
        rank: d as usize,
        labels: (1..=d).map(|i| format!("x{i}")).collect(),
        weights: vec![1.0; d as usize],
    };
    let mut ctx = GroupCtx::new(spec)?;
    let measure = uniform_on_generators(&mut ctx)?;
    let table = solve_hitting_tree(&mut ctx, &measure)?;
    let gens: Vec<u32> = measure.atoms.iter().map(|&(id, _)| id).collect();
    let mu = 1.0 / gens.len() as f64;
    let nu = 1.0 / gens.len() as f64;
    let mut h = 0.0;
    for &a in &gens {
        for &xi in &gens {
            let c0 = rn_cocycle(&mut ctx, &table, a, xi)?;
            h -= mu * nu * c0.ln();
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DetectorVerdict {
    pub two_valued: bool,
    pub alpha: f64,
    pub outlier_fraction: f64,
    pub tol: f64,
}

/// Tests whether log-cocycle samples are consistent with the two-point law
/// {+alpha, -alpha}: alpha is the midrange of |log c0|, two_valued iff every
/// sample lies within tol of +-alpha.
pub fn equality_detector(samples: &[f64], tol: f64) -> Result<DetectorVerdict> {
    if samples.len() < 100 {
        return Err(Error::Domain(format!(
            "equality detector needs at least 100 samples (got {})",
            samples.len()
        )));
    }
    if !(tol >= 0.0) || samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::Domain("detector inputs must be finite".into()));
    }
    let abs: Vec<f64> = samples.iter().map(|s| s.abs()).collect();
    let min = abs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = abs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let alpha = 0.5 * (min + max);
    let outliers = abs.iter().filter(|&&v| (v - alpha).abs() > tol).count();
    Ok(DetectorVerdict {
        two_valued: outliers == 0,
        alpha,
        outlier_fraction: outliers as f64 / samples.len() as f64,
    tol,
    })
}

/// Multiplicativity slack q(uv) - q(u) q(v) for a reduced concatenation.
pub fn cutpoint_check(
    ctx: &mut GroupCtx,
    table: &HittingTable,
    u: &Element,
    v: &Element,
) -> Result<f64> {
    let prod = compose_and_reduce(&ctx.spec, u, v)?;
    let lu = word_length(&ctx.spec, u)?;
    let lv = word_length(&ctx.spec, v)?;
    let lp = word_length(&ctx.spec, &prod)?;
    if (lp - lu - lv).abs() > 1e-9 {
        return Err(Error::Domain(
            "concatenation is not reduced: lengths do not add".into(),
        ));
    }
    let q_uv = lookup_or_eval(ctx, table, &prod)?;
    let q_u = lookup_or_eval(ctx, table, u)?;
    let q_v = lookup_or_eval(ctx, table, v)?;
    Ok(q_uv - q_u * q_v)
}
