//! Config-driven pipeline: resolve invariant inputs, run the enabled stages
//! in order, and emit a deterministic report bundle.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::boundary::{
    boundary_entropy_free, equality_detector, hitting_mc, rn_cocycle, solve_hitting_tree,
    DetectorVerdict, HitEntry,
};
use crate::bounds::{
    auxiliary_checks, theorem1_bounds, theorem1_rows, theorem2_check, BoundReport, BoundRow,
    GrowthBounds, InputValue, InvariantInputs, Provenance,
};
use crate::census::{ball_census, growth_estimate, BallCensus, GrowthEstimate};
use crate::chebyshev::{pointwise_bounds, PointwiseReport};
use crate::config::RunConfig;
use crate::dist::nstep;
use crate::group::{Element, GroupSpec, Order, ProductConvention};
use crate::interner::{GroupCtx, IDENTITY_ID};
use crate::measure::{build_measure, moment, Measure};
use crate::sample::{path_rng, sample_paths, StepSampler};
use crate::series::{Estimate, WalkSeries};
use crate::special::fg_inv;
use crate::{Error, Result};

const LADDER_TERMS: usize = 16;
const RAY_COUNT: usize = 120;
const RAY_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportHeader {
    pub name: String,
    pub seed: Option<u64>,
    /// wall-clock only; everything below it is a pure function of the config
    pub timestamp_ms: u64,
    pub version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CensusReport {
    pub census: BallCensus,
    pub growth: Option<GrowthEstimate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McReport {
    pub drift: Estimate,
    pub entropy_rate: Option<Estimate>,
    pub horizon: usize,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub method: String,
    pub entries: Vec<HitEntry>,
    /// -sum mu nu log c0 for the uniform free-group walk, when applicable
    pub boundary_entropy: Option<f64>,
    pub cocycle_samples: usize,
    pub detector: Option<DetectorVerdict>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowthReport {
    pub v: InputValue,
    pub m2: InputValue,
    pub bounds: GrowthBounds,
    pub rho_lower: Option<InputValue>,
    pub rho_upper: Option<InputValue>,
    /// FG_inv(1 - rho_upper): the entropy floor forced by the return exponent
    pub h_floor: Option<f64>,
    /// h_floor / v
    pub ell_floor: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageNote {
    pub stage: String,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageError {
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub header: ReportHeader,
    pub config: RunConfig,
    pub input_notes: Vec<String>,
    pub census: Option<CensusReport>,
    pub series: Option<WalkSeries>,
    pub monte_carlo: Option<McReport>,
    pub bounds: Option<BoundReport>,
    pub growth: Option<GrowthReport>,
    pub chebyshev: Option<PointwiseReport>,
    pub boundary: Option<BoundaryReport>,
    pub stage_notes: Vec<StageNote>,
    pub stage_errors: Vec<StageError>,
}

impl ReportBundle {
    /// Exit contract: success iff every computed row holds and no stage died.
    pub fn exit_ok(&self) -> bool {
        self.stage_errors.is_empty()
            && !self.bounds.as_ref().map(BoundReport::any_violated).unwrap_or(false)
    }
}

/// Closed-form invariant values for the (group, measure) families where they
/// are known exactly; anything not matched falls back to estimation.
#[derive(Debug, Default, Clone)]
struct ClosedForms {
    h: Option<f64>,
    ell: Option<f64>,
    rho: Option<f64>,
    v: Option<f64>,
    note: Option<String>,
}

fn uniform_on_generators(ctx: &mut GroupCtx, measure: &Measure) -> bool {
    let spec = ctx.spec.clone();
    let mut ids: Vec<u32> = spec
        .generators()
        .into_iter()
        .map(|(_, g)| ctx.intern(g))
        .collect();
    ids.sort_unstable();
    ids.dedup();
    if ids.len() != measure.atoms.len() {
        return false;
    }
    let p = 1.0 / ids.len() as f64;
    let mut atom_ids: Vec<u32> = measure.atoms.iter().map(|&(id, _)| id).collect();
    atom_ids.sort_unstable();
    ids == atom_ids && measure.atoms.iter().all(|&(_, q)| (q - p).abs() <= 1e-12)
}

/// Signed coordinates of an element of Z^r (in any of its encodings).
fn lattice_displacement(spec: &GroupSpec, x: &Element) -> Option<Vec<f64>> {
    match (spec, x) {
        (GroupSpec::FreeAbelian { .. }, Element::Vector(v)) => {
            Some(v.iter().map(|&a| a as f64).collect())
        }
        (
            GroupSpec::Free { rank: 1, .. } | GroupSpec::Cyclic { order: Order::Infinite, .. },
            Element::Word(w),
        ) => Some(vec![w.iter().map(|s| s.exp as f64).sum()]),
        _ => None,
    }
}

fn lattice_weights(spec: &GroupSpec) -> Option<Vec<f64>> {
    match spec {
        GroupSpec::Free { rank: 1, weights, .. } => Some(vec![weights[0]]),
        GroupSpec::Cyclic { order: Order::Infinite, .. } => Some(vec![1.0]),
        GroupSpec::FreeAbelian { rank, .. } => Some(vec![1.0; *rank]),
        _ => None,
    }
}

/// Groups of polynomial growth among the supported specs; these have h = 0
/// and v = 0 for every finitely supported walk, and rho = 1 for symmetric
/// ones (Kesten).
fn polynomial_growth(spec: &GroupSpec) -> bool {
    match spec {
        GroupSpec::Free { rank, .. } => *rank <= 1,
        GroupSpec::FreeAbelian { .. } | GroupSpec::Cyclic { .. } => true,
        GroupSpec::FreeProduct { factors } => {
            factors.len() == 2 && factors.iter().all(|f| f.order == Order::Finite(2))
        }
        GroupSpec::DirectProduct { components, .. } => components.iter().all(polynomial_growth),
    }
}

fn free_uniform_forms(d: usize, weights: &[f64], uniform: bool) -> ClosedForms {
    if !uniform || d < 2 {
        return ClosedForms::default();
    }
    let df = d as f64;
    let unit = weights.iter().all(|&w| (w - 1.0).abs() <= 1e-12);
    let mean_w = weights.iter().sum::<f64>() / df;
    ClosedForms {
        h: Some((1.0 - 1.0 / df) * (2.0 * df - 1.0).ln()),
        ell: Some((1.0 - 1.0 / df) * mean_w),
        rho: Some((2.0 * df - 1.0).sqrt() / df),
        v: unit.then(|| (2.0 * df - 1.0).ln()),
        note: Some("closed forms: uniform walk on a free group".into()),
    }
}

fn closed_forms(ctx: &mut GroupCtx, measure: &Measure) -> ClosedForms {
    let spec = ctx.spec.clone();
    match &spec {
        GroupSpec::Free { rank, weights, .. } if *rank >= 2 => {
            free_uniform_forms(*rank, weights, uniform_on_generators(ctx, measure))
        }
        GroupSpec::Free { .. }
        | GroupSpec::Cyclic { order: Order::Infinite, .. }
        | GroupSpec::FreeAbelian { .. } => {
            let weights = lattice_weights(&spec).unwrap();
            let mut mean = vec![0.0; weights.len()];
            for &(id, p) in &measure.atoms {
                let d = match lattice_displacement(&spec, ctx.element(id)) {
                    Some(d) => d,
                    None => return ClosedForms::default(),
                };
                for (m, di) in mean.iter_mut().zip(d) {
                    *m += p * di;
                }
            }
            let ell = weights.iter().zip(&mean).map(|(w, m)| w * m.abs()).sum();
            // rho = 2 sqrt(pq) for a two-sided unit-step walk; limsup-exact
            // even in the biased periodic case
            let rho = if measure.is_symmetric {
                Some(1.0)
            } else if measure.atoms.len() == 2 {
                let steps: Vec<(f64, f64)> = measure
                    .atoms
                    .iter()
                    .filter_map(|&(id, p)| {
                        lattice_displacement(&spec, ctx.element(id))
                            .filter(|d| d.len() == 1)
                            .map(|d| (d[0], p))
                    })
                    .collect();
                match steps.as_slice() {
                    [(a, p), (b, q)] if (a - 1.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12
                        || (a + 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12 =>
                    {
                        Some(2.0 * (p * q).sqrt())
                    }
                    _ => None,
                }
            } else {
                None
            };
            ClosedForms {
                h: Some(0.0),
                ell: Some(ell),
                rho,
                v: Some(0.0),
                note: Some("closed forms: lattice walk (polynomial growth)".into()),
            }
        }
        GroupSpec::Cyclic { order: Order::Finite(_), .. } => ClosedForms {
            h: Some(0.0),
            ell: Some(0.0),
            rho: Some(1.0),
            v: Some(0.0),
            note: Some("closed forms: finite group".into()),
        },
        _ if polynomial_growth(&spec) => ClosedForms {
            h: Some(0.0),
            ell: measure.is_symmetric.then_some(0.0),
            rho: measure.is_symmetric.then_some(1.0),
            v: Some(0.0),
            note: Some("closed forms: polynomial growth (h = v = 0; Kesten for rho)".into()),
        },
        GroupSpec::DirectProduct { components, convention: ProductConvention::Synchronized } => {
            let infinite: Vec<&GroupSpec> =
                components.iter().filter(|c| !c.is_finite_group()).collect();
            if let [GroupSpec::Free { rank, weights, .. }] = infinite.as_slice() {
                if *rank >= 2 && uniform_on_generators(ctx, measure) {
                    // the free marginal of the synchronized uniform walk is the
                    // uniform free-group walk, and the word length is the free
                    // part's length, so all four invariants are inherited
                    let mut forms = free_uniform_forms(*rank, weights, true);
                    forms.note = Some(
                        "closed forms: synchronized product inherits the free factor's \
                         invariants"
                            .into(),
                    );
                    return forms;
                }
            }
            ClosedForms::default()
        }
        _ => ClosedForms::default(),
    }
}

/// The invariant inputs after applying the precedence exact closed form >
/// cited external constant > finite-step estimate. A spectral radius is never
/// taken from an estimator: finite-step ratios are biased low and would turn
/// inequality checks into artifacts.
#[derive(Debug, Clone)]
struct Resolved {
    h: Option<InputValue>,
    ell: Option<InputValue>,
    rho: Option<InputValue>,
    v: Option<InputValue>,
    m2: InputValue,
    moments: Vec<(f64, f64)>,
    support_radius: f64,
    symmetric: bool,
    rho_lower: Option<InputValue>,
    rho_upper: Option<InputValue>,
    notes: Vec<String>,
}

fn estimate_input(e: &Estimate, fallback: Option<&Estimate>) -> Option<InputValue> {
    let pick = if e.in_range { Some(e) } else { fallback.filter(|f| f.in_range) };
    pick.map(|e| InputValue::estimated(e.value, e.err, &e.method))
}

fn resolve_inputs(
    cfg: &RunConfig,
    group: Option<(&mut GroupCtx, &Measure)>,
    series: Option<&WalkSeries>,
    census_growth: Option<&GrowthEstimate>,
) -> Result<Resolved> {
    let ext = |name: &str| {
        cfg.constant(name)
            .map(|c| InputValue::external(c.value, c.err, &c.citation))
    };
    let mut notes = Vec::new();

    let (forms, m2, moments, support_radius, symmetric) = match group {
        Some((ctx, measure)) => {
            let forms = closed_forms(ctx, measure);
            if let Some(n) = &forms.note {
                notes.push(n.clone());
            }
            let m2 = InputValue::exact(moment(ctx, measure, 2.0)?);
            let moments = (1..=LADDER_TERMS)
                .map(|n| {
                    let p = 1.0 + 1.0 / (2 * n - 1) as f64;
                    Ok((p, moment(ctx, measure, p)?))
                })
                .collect::<Result<Vec<_>>>()?;
            (forms, m2, moments, measure.support_radius, measure.is_symmetric)
        }
        None => {
            let m2 = ext("m2").unwrap_or_else(|| {
                notes.push("M2 defaulted to 1 (unit generator lengths assumed)".into());
                InputValue::exact(1.0)
            });
            notes.push("constants-only run: the measure is assumed symmetric".into());
            (ClosedForms::default(), m2, Vec::new(), 1.0, true)
        }
    };

    let h = forms
        .h
        .map(InputValue::exact)
        .or_else(|| ext("h"))
        .or_else(|| series.and_then(|s| estimate_input(&s.h_fit, Some(&s.h_est))));
    let ell = forms
        .ell
        .map(InputValue::exact)
        .or_else(|| ext("ell"))
        .or_else(|| series.and_then(|s| estimate_input(&s.l_fit, Some(&s.l_est))));

    let rho_lower = ext("rho_lower");
    let rho_upper = ext("rho_upper");
    let rho = forms
        .rho
        .map(InputValue::exact)
        .or_else(|| ext("rho"))
        .or_else(|| match (&rho_lower, &rho_upper) {
            (Some(lo), Some(hi)) => {
                let mid = 0.5 * (lo.value + hi.value);
                let half = 0.5 * (hi.value - lo.value) + lo.err.max(hi.err);
                Some(InputValue::external(mid, half, "midpoint of the cited bracket"))
            }
            _ => None,
        });
    if rho.is_none() {
        notes.push(
            "rho: no exact closed form or cited constant; finite-step ratio estimates \
             are biased low, so rho rows are skipped"
                .into(),
        );
    }

    let v = forms.v.map(InputValue::exact).or_else(|| ext("v")).or_else(|| {
        census_growth.map(|g| {
            let err = (g.v_ratio - g.v_cesaro).abs().max(f64::EPSILON);
            InputValue::estimated(g.v_ratio, err, "ball-count log-ratio")
        })
    });

    Ok(Resolved {
        h,
        ell,
        rho,
        v,
        m2,
        moments,
        support_radius,
        symmetric,
        rho_lower,
        rho_upper,
        notes,
    })
}

fn push_outcome<T>(
    stage: &str,
    out: Result<T>,
    slot: &mut Option<T>,
    notes: &mut Vec<StageNote>,
    errors: &mut Vec<StageError>,
) {
    match out {
        Ok(v) => *slot = Some(v),
        Err(Error::Unsupported(msg)) => notes.push(StageNote {
            stage: stage.into(),
            note: msg,
        }),
        Err(e) => errors.push(StageError {
            stage: stage.into(),
            message: e.to_string(),
        }),
    }
}

fn theorem2_or_skipped(inp: &InvariantInputs, base_tol: f64) -> Result<Vec<BoundRow>> {
    match theorem2_check(inp, base_tol) {
        Ok(rows) => Ok(rows),
        Err(Error::Unsupported(_)) => Ok([
            ("eq_main_rho", "FG_inv(1 - rho) <= h"),
            ("eq:main_ell", "F(l / M2) <= h"),
            ("avez", "-2 log rho <= h"),
            ("ledrappier", "4 (1 - rho) <= h"),
            ("dominance", "FG_inv(1 - rho) >= max(avez, ledrappier)"),
        ]
        .iter()
        .map(|(n, s)| BoundRow::skipped(n, s, "asymmetric measure"))
        .collect()),
        Err(e) => Err(e),
    }
}

fn bounds_stage(cfg: &RunConfig, res: &Resolved, notes: &mut Vec<StageNote>) -> Result<(Option<BoundReport>, Option<GrowthReport>)> {
    let base_tol = cfg.tolerances.equality_tol;
    if let (Some(h), Some(ell)) = (&res.h, &res.ell) {
        let inputs = InvariantInputs {
            h: h.clone(),
            ell: ell.clone(),
            m2: res.m2.clone(),
            rho: res.rho.clone(),
            v: res.v.clone(),
            symmetric: res.symmetric,
        };
        let mut report = BoundReport::new(inputs.clone(), base_tol);
        report.rows.extend(theorem2_or_skipped(&inputs, base_tol)?);
        report.rows.extend(theorem1_rows(&inputs, base_tol)?);
        report.rows.extend(auxiliary_checks(
            &inputs,
            &res.moments,
            res.support_radius,
            LADDER_TERMS,
            base_tol,
        )?);
        return Ok((Some(report), None));
    }
    if let Some(v) = &res.v {
        let bounds = theorem1_bounds(v.value, res.m2.value)?;
        let h_floor = res
            .rho_upper
            .as_ref()
            .map(|hi| fg_inv(1.0 - hi.value))
            .transpose()?;
        let ell_floor = h_floor.map(|f| f / v.value);
        return Ok((
            None,
            Some(GrowthReport {
                v: v.clone(),
                m2: res.m2.clone(),
                bounds,
                rho_lower: res.rho_lower.clone(),
                rho_upper: res.rho_upper.clone(),
                h_floor,
                ell_floor,
            }),
        ));
    }
    notes.push(StageNote {
        stage: "bounds".into(),
        note: "no h/l inputs and no growth constant; nothing to check".into(),
    });
    Ok((None, None))
}

fn tree_boundary(
    cfg: &RunConfig,
    ctx: &mut GroupCtx,
    measure: &Measure,
) -> Result<BoundaryReport> {
    let table = solve_hitting_tree(ctx, measure)?;
    let spec = ctx.spec.clone();
    let gen_ids: Vec<u32> = {
        let mut ids: Vec<u32> = spec
            .generators()
            .into_iter()
            .map(|(_, g)| ctx.intern(g))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let mut values = Vec::new();
    for &g in &gen_ids {
        for &xi in &gen_ids {
            values.push(rn_cocycle(ctx, &table, g, xi)?.ln());
        }
    }
    // the table is exact, so replication only feeds the detector's sample floor
    let samples: Vec<f64> = values.iter().copied().cycle().take(values.len().max(100)).collect();
    let tol = cfg.tolerances.detector_tol.max(1e-9);
    let detector = equality_detector(&samples, tol)?;
    let boundary_entropy = match &spec {
        GroupSpec::Free { rank, .. } if *rank >= 2 && uniform_on_generators(ctx, measure) => {
            Some(boundary_entropy_free(*rank as u32)?)
        }
        _ => None,
    };
    Ok(BoundaryReport {
        method: "tree-exact".into(),
        entries: table.rows(ctx),
        boundary_entropy,
        cocycle_samples: samples.len(),
        detector: Some(detector),
        note: None,
    })
}

fn mc_boundary(
    cfg: &RunConfig,
    ctx: &mut GroupCtx,
    measure: &Measure,
    pairs: &[(Element, f64)],
    seed: u64,
) -> Result<BoundaryReport> {
    if ctx.spec.word_shape().is_none() {
        return Err(Error::Unsupported(
            "boundary sampling needs a letter-based group (free, cyclic, or free product)".into(),
        ));
    }
    let spec = ctx.spec.clone();
    let sampler = StepSampler::new(measure);
    let horizon = cfg.budgets.mc_horizon;

    // boundary rays: the first two syllables of a long trajectory stand in
    // for the ray's initial segment under harmonic measure
    let mut rays: Vec<Element> = Vec::new();
    let mut attempt = 0u64;
    while rays.len() < RAY_COUNT && attempt < 10 * RAY_COUNT as u64 {
        let mut rng = path_rng(seed, RAY_STREAM_BASE + attempt);
        attempt += 1;
        let mut at = IDENTITY_ID;
        for _ in 0..horizon {
            at = sampler.step(ctx, &mut rng, at);
        }
        if let Element::Word(w) = ctx.element(at) {
            if w.len() >= 2 {
                rays.push(Element::Word(vec![w[0], w[1]]));
            }
        }
    }
    let gens: Vec<(String, Element)> = spec.generators();
    if rays.len() * gens.len() < 100 {
        return Err(Error::Domain(format!(
            "only {} usable boundary rays at horizon {horizon}; raise mc_horizon",
            rays.len()
        )));
    }

    // unique hitting targets: every ray prefix and every generator * prefix
    let mut targets: BTreeMap<String, Element> = BTreeMap::new();
    let mut sample_keys: Vec<(String, String)> = Vec::new();
    for prefix in &rays {
        let pid = ctx.intern(prefix.clone());
        let pkey = ctx.display(pid);
        targets.insert(pkey.clone(), prefix.clone());
        for (_, g) in &gens {
            let gid = ctx.intern(g.clone());
            let prod = ctx.compose_ids(gid, pid);
            let key = ctx.display(prod);
            targets.insert(key.clone(), ctx.element(prod).clone());
            sample_keys.push((key, pkey.clone()));
        }
    }

    let mut table: BTreeMap<String, crate::boundary::McHit> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (k, (key, elem)) in targets.iter().enumerate() {
        let hit = hitting_mc(
            &spec,
            pairs,
            elem,
            cfg.budgets.mc_samples,
            horizon,
            seed.wrapping_add(1 + k as u64),
        )?;
        if hit.estimate <= 0.0 {
            return Err(Error::Domain(format!(
                "target {key} was never hit in {} samples; raise mc_samples",
                cfg.budgets.mc_samples
            )));
        }
        if let Some(w) = &hit.warning {
            warnings.push(format!("{key}: {w}"));
        }
        table.insert(key.clone(), hit);
    }

    let mut samples = Vec::with_capacity(sample_keys.len());
    let mut worst_sigma = 0.0f64;
    for (num, den) in &sample_keys {
        let hn = &table[num];
        let hd = &table[den];
        samples.push(hn.estimate.ln() - hd.estimate.ln());
        worst_sigma =
            worst_sigma.max(hn.se / hn.estimate + hd.se / hd.estimate);
    }
    let tol = cfg.tolerances.detector_tol.max(3.0 * worst_sigma);
    let detector = equality_detector(&samples, tol)?;

    let entries: Vec<HitEntry> = table
        .iter()
        .map(|(key, hit)| HitEntry {
            element: key.clone(),
            q: hit.estimate,
            err: hit.se,
        })
        .collect();
    Ok(BoundaryReport {
        method: "monte-carlo".into(),
        entries,
        boundary_entropy: None,
        cocycle_samples: samples.len(),
        detector: Some(detector),
        note: (!warnings.is_empty()).then(|| warnings.join("; ")),
    })
}

fn boundary_stage(
    cfg: &RunConfig,
    ctx: &mut GroupCtx,
    measure: &Measure,
    pairs: &[(Element, f64)],
) -> Result<BoundaryReport> {
    if ctx.spec.cayley_graph_is_tree() {
        if !measure.is_symmetric {
            return Err(Error::Unsupported(
                "boundary stage skipped: the first-passage system assumes a symmetric measure"
                    .into(),
            ));
        }
        match tree_boundary(cfg, ctx, measure) {
            Err(Error::Domain(msg)) if msg.contains("recurrent") => Err(Error::Unsupported(
                "boundary stage skipped: the walk is recurrent, the boundary is trivial".into(),
            )),
            other => other,
        }
    } else {
        let seed = cfg.budgets.seed.ok_or_else(|| {
            Error::Config("budgets.seed required for Monte Carlo boundary sampling".into())
        })?;
        mc_boundary(cfg, ctx, measure, pairs, seed)
    }
}

pub fn run(cfg: &RunConfig) -> Result<ReportBundle> {
    cfg.validated()?;
    let timestamp_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0);
    let mut bundle = ReportBundle {
        header: ReportHeader {
            name: cfg.name.clone(),
            seed: cfg.budgets.seed,
            timestamp_ms,
            version: env!("CARGO_PKG_VERSION").into(),
        },
        config: cfg.clone(),
        input_notes: Vec::new(),
        census: None,
        series: None,
        monte_carlo: None,
        bounds: None,
        growth: None,
        chebyshev: None,
        boundary: None,
        stage_notes: Vec::new(),
        stage_errors: Vec::new(),
    };
    let mut notes = Vec::new();
    let mut errors = Vec::new();
    let max_support = cfg.effective_max_support();

    let mut group = match &cfg.group {
        Some(g) => {
            let spec = g.to_spec()?;
            let mut ctx = GroupCtx::new(spec)?;
            let pairs = cfg
                .measure
                .as_ref()
                .ok_or_else(|| Error::Config("measure block required".into()))?
                .to_pairs(&ctx.spec)?;
            let measure = build_measure(&mut ctx, &pairs)?;
            Some((ctx, measure, pairs))
        }
        None => None,
    };

    if cfg.stages.census {
        if let Some((ctx, _, _)) = &group {
            let spec = ctx.spec.clone();
            let out = ball_census(&spec, cfg.budgets.census_radius, max_support).map(|census| {
                let growth = growth_estimate(&census).ok();
                CensusReport { census, growth }
            });
            push_outcome("census", out, &mut bundle.census, &mut notes, &mut errors);
        }
    }

    if cfg.stages.exact_walk {
        if let Some((ctx, measure, _)) = &mut group {
            let out = crate::series::asymptotic_estimates(
                ctx,
                measure,
                cfg.budgets.n_max,
                cfg.tolerances.prune_eps,
                max_support,
            );
            push_outcome("exact-walk", out, &mut bundle.series, &mut notes, &mut errors);
        }
    }

    if cfg.stages.monte_carlo {
        if let Some((ctx, measure, _)) = &mut group {
            let seed = cfg.budgets.seed.expect("validated");
            let horizon = cfg.budgets.mc_horizon;
            let out = (|| {
                let k0 = 6.min(horizon).min(cfg.budgets.n_max.max(1));
                let law = nstep(ctx, measure, k0, 0.0, max_support)?;
                let run = sample_paths(
                    ctx,
                    measure,
                    horizon,
                    cfg.budgets.mc_samples,
                    seed,
                    Some(&law),
                    0,
                )?;
                Ok(McReport {
                    drift: run.drift,
                    entropy_rate: run.entropy_rate,
                    horizon: run.horizon,
                    count: run.count,
                })
            })();
            push_outcome("monte-carlo", out, &mut bundle.monte_carlo, &mut notes, &mut errors);
        }
    }

    if cfg.stages.bounds {
        let growth = bundle.census.as_ref().and_then(|c| c.growth.as_ref());
        let resolved = match &mut group {
            Some((ctx, measure, _)) => {
                resolve_inputs(cfg, Some((ctx, measure)), bundle.series.as_ref(), growth)
            }
            None => resolve_inputs(cfg, None, bundle.series.as_ref(), growth),
        };
        match resolved {
            Ok(res) => {
                bundle.input_notes = res.notes.clone();
                match bounds_stage(cfg, &res, &mut notes) {
                    Ok((bounds, growth_report)) => {
                        bundle.bounds = bounds;
                        bundle.growth = growth_report;
                    }
                    Err(e) => errors.push(StageError {
                        stage: "bounds".into(),
                        message: e.to_string(),
                    }),
                }
                if cfg.stages.chebyshev {
                    if let Some((ctx, measure, _)) = &mut group {
                        if measure.is_symmetric {
                            let rho_up = match &res.rho {
                                Some(r) if matches!(r.provenance, Provenance::Exact) => r.value,
                                _ => match &res.rho_upper {
                                    Some(hi) => hi.value,
                                    None => {
                                        notes.push(StageNote {
                                            stage: "chebyshev".into(),
                                            note: "no certified rho upper bound; using the \
                                                   trivial bound rho <= 1"
                                                .into(),
                                        });
                                        1.0
                                    }
                                },
                            };
                            let n = cfg.budgets.n_max.min(10).max(1);
                            let out = pointwise_bounds(ctx, measure, n, rho_up, max_support);
                            push_outcome(
                                "chebyshev",
                                out,
                                &mut bundle.chebyshev,
                                &mut notes,
                                &mut errors,
                            );
                        } else {
                            notes.push(StageNote {
                                stage: "chebyshev".into(),
                                note: "pointwise heat-kernel bounds assume a symmetric measure"
                                    .into(),
                            });
                        }
                    }
                }
            }
            Err(e) => errors.push(StageError {
                stage: "bounds".into(),
                message: e.to_string(),
            }),
        }
    }

    if cfg.stages.boundary {
        if let Some((ctx, measure, pairs)) = &mut group {
            let out = boundary_stage(cfg, ctx, measure, pairs);
            push_outcome("boundary", out, &mut bundle.boundary, &mut notes, &mut errors);
        }
    }

    bundle.stage_notes = notes;
    bundle.stage_errors = errors;
    Ok(bundle)
}

fn prov_cell(p: &Provenance) -> String {
    match p {
        Provenance::Exact => "exact".into(),
        Provenance::Estimated { method } => format!("estimated ({method})"),
        Provenance::External { citation } => format!("external: {citation}"),
    }
}

fn input_row(out: &mut String, label: &str, v: &InputValue) {
    out.push_str(&format!(
        "| {label} | {:.9e} | {:.1e} | {} |\n",
        v.value,
        v.err,
        prov_cell(&v.provenance)
    ));
}

pub fn render_bounds_md(bundle: &ReportBundle) -> String {
    let mut out = format!("# walkbound report: {}\n\n## inputs\n\n", bundle.header.name);
    out.push_str("| quantity | value | err | provenance |\n|---|---|---|---|\n");
    if let Some(b) = &bundle.bounds {
        input_row(&mut out, "h", &b.inputs.h);
        input_row(&mut out, "l", &b.inputs.ell);
        input_row(&mut out, "M2", &b.inputs.m2);
        if let Some(r) = &b.inputs.rho {
            input_row(&mut out, "rho", r);
        }
        if let Some(v) = &b.inputs.v {
            input_row(&mut out, "v", v);
        }
    } else if let Some(g) = &bundle.growth {
        input_row(&mut out, "v", &g.v);
        input_row(&mut out, "M2", &g.m2);
        if let Some(lo) = &g.rho_lower {
            input_row(&mut out, "rho_lower", lo);
        }
        if let Some(hi) = &g.rho_upper {
            input_row(&mut out, "rho_upper", hi);
        }
    }
    if !bundle.input_notes.is_empty() || !bundle.stage_notes.is_empty() {
        out.push_str("\nnotes:\n");
        for n in &bundle.input_notes {
            out.push_str(&format!("- {n}\n"));
        }
        for n in &bundle.stage_notes {
            out.push_str(&format!("- {}: {}\n", n.stage, n.note));
        }
    }
    if let Some(b) = &bundle.bounds {
        out.push_str("\n## inequality rows\n\n");
        out.push_str(&b.to_markdown());
        out.push_str(
            "\nmoment inputs for the ladder rows are exact sums over the step measure.\n",
        );
    }
    if let Some(g) = &bundle.growth {
        out.push_str("\n## growth-only bounds\n\n| bound | value | inputs |\n|---|---|---|\n");
        let src = format!(
            "v: {}; M2: {}",
            prov_cell(&g.v.provenance),
            prov_cell(&g.m2.provenance)
        );
        out.push_str(&format!(
            "| l <= M2 tanh(M2 v / 2) | {:.9} | {src} |\n",
            g.bounds.ell_max
        ));
        out.push_str(&format!(
            "| h <= M2 v tanh(M2 v / 2) | {:.9} | {src} |\n",
            g.bounds.h_max
        ));
        out.push_str(&format!(
            "| rho >= 1 / cosh(M2 v / 2) | {:.9} | {src} |\n",
            g.bounds.rho_min
        ));
        if let (Some(hf), Some(hi)) = (g.h_floor, &g.rho_upper) {
            out.push_str(&format!(
                "| h >= FG_inv(1 - rho_upper) | {hf:.9} | rho_upper {} |\n",
                prov_cell(&hi.provenance)
            ));
        }
        if let Some(lf) = g.ell_floor {
            out.push_str(&format!(
                "| l >= FG_inv(1 - rho_upper) / v | {lf:.9} | derived from the rows above |\n"
            ));
        }
    }
    if !bundle.stage_errors.is_empty() {
        out.push_str("\n## stage errors\n\n");
        for e in &bundle.stage_errors {
            out.push_str(&format!("- {}: {}\n", e.stage, e.message));
        }
    }
    out
}

pub fn bundle_from_json_str(s: &str) -> Result<ReportBundle> {
    serde_json::from_str(s).map_err(|e| Error::Serde(format!("bad report bundle: {e}")))
}

pub fn load_bundle(path: &Path) -> Result<ReportBundle> {
    let text = std::fs::read_to_string(path)?;
    bundle_from_json_str(&text)
}

/// Writes report.json, bounds.md, and the CSV artifacts present in the bundle.
pub fn write_bundle(bundle: &ReportBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(bundle)
        .map_err(|e| Error::Serde(e.to_string()))?;
    std::fs::write(dir.join("report.json"), json + "\n")?;
    std::fs::write(dir.join("bounds.md"), render_bounds_md(bundle))?;
    if let Some(series) = &bundle.series {
        std::fs::write(dir.join("series.csv"), series.to_csv())?;
    }
    if let Some(cheb) = &bundle.chebyshev {
        std::fs::write(dir.join("chebyshev.csv"), cheb.to_csv())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::from_toml_str;
    use crate::bounds::Verdict;

    fn resolved_for(toml: &str) -> (RunConfig, Resolved) {
        let cfg = from_toml_str(toml).unwrap();
        let spec = cfg.group.as_ref().unwrap().to_spec().unwrap();
        let mut ctx = GroupCtx::new(spec).unwrap();
        let pairs = cfg.measure.as_ref().unwrap().to_pairs(&ctx.spec).unwrap();
        let measure = build_measure(&mut ctx, &pairs).unwrap();
        let res = resolve_inputs(&cfg, Some((&mut ctx, &measure)), None, None).unwrap();
        (cfg, res)
    }

    #[test]
    fn resolver_free_group_closed_forms() {
        let (_, res) = resolved_for(
            r#"
name = "f2"
[group]
kind = "free"
rank = 2
[measure]
uniform = true
[budgets]
seed = 1
"#,
        );
        let h = res.h.unwrap();
        assert!(matches!(h.provenance, Provenance::Exact));
        assert!((h.value - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((res.ell.unwrap().value - 0.5).abs() < 1e-15);
        assert!((res.rho.unwrap().value - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((res.v.unwrap().value - 3f64.ln()).abs() < 1e-15);
        assert_eq!(res.m2.value, 1.0);
        assert_eq!(res.moments.len(), LADDER_TERMS);
    }

    #[test]
    fn resolver_weighted_free_group() {
        let (_, res) = resolved_for(
            r#"
name = "f2w"
[group]
kind = "free"
rank = 2
weights = [1.0, 0.5]
[measure]
uniform = true
[budgets]
seed = 1
"#,
        );
        assert!((res.ell.unwrap().value - 0.375).abs() < 1e-15);
        assert!((res.h.unwrap().value - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!(res.v.is_none(), "weighted metric has no closed-form growth here");
        assert!((res.m2.value - 0.625f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn resolver_biased_lattice() {
        let (_, res) = resolved_for(
            r#"
name = "z_biased"
[group]
kind = "cyclic"
label = "t"
[measure]
atoms = { "t" = 0.7, "t^-1" = 0.3 }
[budgets]
seed = 1
"#,
        );
        assert!(!res.symmetric);
        assert!((res.ell.unwrap().value - 0.4).abs() < 1e-15);
        assert_eq!(res.h.unwrap().value, 0.0);
        assert_eq!(res.v.unwrap().value, 0.0);
        let rho = res.rho.unwrap();
        assert!((rho.value - 2.0 * 0.21f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn resolver_symmetric_lattice_and_product() {
        let (_, res) = resolved_for(
            r#"
name = "z2"
[group]
kind = "free_abelian"
rank = 2
[measure]
uniform = true
[budgets]
seed = 1
"#,
        );
        assert_eq!(res.ell.unwrap().value, 0.0);
        assert_eq!(res.rho.unwrap().value, 1.0);
        assert_eq!(res.v.unwrap().value, 0.0);

        let (_, res) = resolved_for(
            r#"
name = "sync"
[group]
kind = "direct_product"
convention = "synchronized"
components = [
  { kind = "cyclic", order = 3, label = "z" },
  { kind = "free", rank = 2 },
]
[measure]
uniform = true
[budgets]
seed = 1
"#,
        );
        assert!((res.h.unwrap().value - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((res.ell.unwrap().value - 0.5).abs() < 1e-15);
        assert!((res.rho.unwrap().value - 3f64.sqrt() / 2.0).abs() < 1e-15);
        assert!((res.v.unwrap().value - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn resolver_modular_group_estimates_only() {
        let (_, res) = resolved_for(
            r#"
name = "pslz"
[group]
kind = "free_product"
factors = [{ order = 2, label = "a" }, { order = 3, label = "b" }]
[measure]
uniform = true
[budgets]
seed = 1
"#,
        );
        assert!(res.h.is_none() && res.ell.is_none() && res.rho.is_none() && res.v.is_none());
        assert!(res.notes.iter().any(|n| n.contains("biased low")));
    }

    #[test]
    fn free_group_run_reports_equalities() {
        let cfg = from_toml_str(
            r#"
name = "f2_quick"
[group]
kind = "free"
rank = 2
[measure]
uniform = true
[budgets]
n_max = 6
census_radius = 6
mc_samples = 500
mc_horizon = 60
seed = 7
"#,
        )
        .unwrap();
        let bundle = run(&cfg).unwrap();
        assert!(bundle.stage_errors.is_empty(), "{:?}", bundle.stage_errors);
        assert!(bundle.exit_ok());
        let bounds = bundle.bounds.as_ref().unwrap();
        for name in ["eq_main_rho", "eq:main_ell", "thm1_ell", "thm1_h", "thm1_rho", "fundamental"]
        {
            let row = bounds.row(name).unwrap();
            match &row.verdict {
                Verdict::SatisfiedEquality { .. } => {}
                other => panic!("{name}: {other:?}"),
            }
            assert!(row.slack.unwrap().abs() <= 1e-9);
        }
        let boundary = bundle.boundary.as_ref().unwrap();
        assert_eq!(boundary.method, "tree-exact");
        let det = boundary.detector.as_ref().unwrap();
        assert!(det.two_valued);
        assert!((det.alpha - 3f64.ln()).abs() < 1e-12);
        assert!((boundary.boundary_entropy.unwrap() - 0.5 * 3f64.ln()).abs() < 1e-12);
        assert!(bundle.series.is_some() && bundle.census.is_some());
        assert!(bundle.monte_carlo.is_some() && bundle.chebyshev.is_some());
    }

    #[test]
    fn biased_lattice_run_skips_and_exits_clean() {
        let cfg = from_toml_str(
            r#"
name = "z_biased"
[group]
kind = "cyclic"
[measure]
atoms = { "t" = 0.7, "t^-1" = 0.3 }
[budgets]
n_max = 8
census_radius = 12
mc_samples = 4000
mc_horizon = 100
seed = 5
"#,
        )
        .unwrap();
        let bundle = run(&cfg).unwrap();
        assert!(bundle.stage_errors.is_empty(), "{:?}", bundle.stage_errors);
        assert!(bundle.exit_ok());
        let bounds = bundle.bounds.as_ref().unwrap();
        for name in ["eq_main_rho", "eq:main_ell", "avez", "ledrappier", "dominance", "thm1_ell"] {
            match &bounds.row(name).unwrap().verdict {
                Verdict::Skipped { reason } => assert!(reason.contains("asymmetric")),
                other => panic!("{name}: {other:?}"),
            }
        }
        let drift = &bundle.monte_carlo.as_ref().unwrap().drift;
        assert!((drift.value - 0.4).abs() < 0.05, "drift {}", drift.value);
        // fundamental holds with h = 0 exactly
        assert!(bounds.row("fundamental").unwrap().slack.unwrap().abs() < 1e-12);
        // boundary and chebyshev skipped with notes, not errors
        assert!(bundle.boundary.is_none() && bundle.chebyshev.is_none());
        assert!(bundle
            .stage_notes
            .iter()
            .any(|n| n.stage == "boundary" && n.note.contains("symmetric")));
    }

    #[test]
    fn recurrent_boundary_is_a_note_not_an_error() {
        let cfg = from_toml_str(
            r#"
name = "z_simple"
[group]
kind = "cyclic"
[measure]
uniform = true
[stages]
census = false
exact_walk = false
monte_carlo = false
chebyshev = false
[budgets]
seed = 2
"#,
        )
        .unwrap();
        let bundle = run(&cfg).unwrap();
        assert!(bundle.stage_errors.is_empty(), "{:?}", bundle.stage_errors);
        assert!(bundle.boundary.is_none());
        assert!(bundle
            .stage_notes
            .iter()
            .any(|n| n.stage == "boundary" && n.note.contains("recurrent")));
        assert!(bundle.exit_ok());
    }

    #[test]
    fn constants_only_growth_digits() {
        let cfg = from_toml_str(
            r#"
name = "surface"
[stages]
census = false
exact_walk = false
monte_carlo = false
chebyshev = false
boundary = false

[[external.constants]]
name = "v"
value = 1.9430254
citation = "growth series of the genus-2 surface group"

[[external.constants]]
name = "rho_lower"
value = 0.662420
citation = "published spectral-radius bracket"

[[external.constants]]
name = "rho_upper"
value = 0.662816
citation = "published spectral-radius bracket"
"#,
        )
        .unwrap();
        let bundle = run(&cfg).unwrap();
        assert!(bundle.stage_errors.is_empty(), "{:?}", bundle.stage_errors);
        let g = bundle.growth.as_ref().unwrap();
        assert_eq!(format!("{:.9}", g.bounds.ell_max), "0.749368278");
        assert_eq!(format!("{:.9}", g.bounds.h_max), "1.456041598");
        assert_eq!(format!("{:.8}", g.bounds.rho_min), "0.66215344");
        assert_eq!(format!("{:.9}", g.h_floor.unwrap()), "1.452903618");
        assert_eq!(format!("{:.9}", g.ell_floor.unwrap()), "0.747753281");
        let md = render_bounds_md(&bundle);
        assert!(md.contains("0.749368278") && md.contains("external"));
    }

    #[test]
    fn bundle_round_trips_and_renders() {
        let cfg = from_toml_str(
            r#"
name = "f2_tiny"
[group]
kind = "free"
rank = 2
[measure]
uniform = true
[stages]
census = false
monte_carlo = false
chebyshev = false
boundary = false
[budgets]
n_max = 4
seed = 1
"#,
        )
        .unwrap();
        let bundle = run(&cfg).unwrap();
        let json = serde_json::to_string_pretty(&bundle).unwrap();
        let back = bundle_from_json_str(&json).unwrap();
        assert_eq!(render_bounds_md(&back), render_bounds_md(&bundle));
        let md = render_bounds_md(&bundle);
        assert!(md.contains("| h |") && md.contains("exact"));
        assert!(md.contains("satisfied-equality"));
    }
}
