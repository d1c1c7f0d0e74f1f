//! Inequality verification: Theorem-style rows comparing the walk invariants
//! h, l, rho, v against the sharp bounds, with provenance-aware verdicts.

use serde::{Deserialize, Serialize};

use crate::special::{a_carne, a_ledr, artanh, fg_inv};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Exact,
    Estimated { method: String },
    External { citation: String },
}

/// A numeric input with an error bar. Exact inputs carry err = 0; external
/// constants carry the half-width of their cited bracket.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputValue {
    pub value: f64,
    pub err: f64,
    pub provenance: Provenance,
}

impl InputValue {
    pub fn exact(value: f64) -> Self {
        InputValue {
            value,
            err: 0.0,
            provenance: Provenance::Exact,
        }
    }

    pub fn estimated(value: f64, err: f64, method: &str) -> Self {
        InputValue {
            value,
            err: err.abs(),
            provenance: Provenance::Estimated {
                method: method.to_string(),
            },
        }
    }

    pub fn external(value: f64, err: f64, citation: &str) -> Self {
        InputValue {
            value,
            err: err.abs(),
            provenance: Provenance::External {
                citation: citation.to_string(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Verdict {
    SatisfiedStrict,
    SatisfiedEquality { tol: f64 },
    Violated,
    Skipped { reason: String },
}

impl Verdict {
    pub fn is_satisfied(&self) -> bool {
        matches!(
            self,
            Verdict::SatisfiedStrict | Verdict::SatisfiedEquality { .. }
        )
    }
}

/// One verified inequality, oriented so that slack = rhs - lhs >= 0 means
/// satisfied. `slack_err` is the propagated input error on the slack.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundRow {
    pub name: String,
    pub statement: String,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
    pub slack_err: f64,
    pub verdict: Verdict,
}

impl BoundRow {
    pub fn skipped(name: &str, statement: &str, reason: impl Into<String>) -> BoundRow {
        BoundRow {
            name: name.to_string(),
            statement: statement.to_string(),
            lhs: None,
            rhs: None,
            slack: None,
            slack_err: 0.0,
            verdict: Verdict::Skipped {
                reason: reason.into(),
            },
        }
    }
}

/// The invariant inputs a report is judged against. `rho` and `v` are
/// optional: rows needing an absent input are skipped with a reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvariantInputs {
    pub h: InputValue,
    pub ell: InputValue,
    pub m2: InputValue,
    pub rho: Option<InputValue>,
    pub v: Option<InputValue>,
    pub symmetric: bool,
}

const NO_RHO: &str =
    "no exact or cited spectral radius; finite-step ratio estimates are biased low";
const NO_GROWTH: &str = "no growth rate available";
const RATIO_ARTIFACT: &str = "estimation artifact: drift-to-moment ratio reached 1";

/// Evaluates a row at the input centers and at every corner of the error box,
/// taking the worst corner deviation as the propagated slack error. The
/// equality tolerance is max(base_tol, 3 x propagated error).
fn assess(
    name: &str,
    statement: &str,
    inputs: &[&InputValue],
    base_tol: f64,
    eval: impl Fn(&[f64]) -> (f64, f64),
) -> BoundRow {
    let centers: Vec<f64> = inputs.iter().map(|i| i.value).collect();
    let (lhs, rhs) = eval(&centers);
    let slack = rhs - lhs;
    let fuzzy: Vec<usize> = (0..inputs.len()).filter(|&i| inputs[i].err > 0.0).collect();
    let mut slack_err: f64 = 0.0;
    for mask in 1..(1u32 << fuzzy.len()) {
        let mut corner = centers.clone();
        for (bit, &i) in fuzzy.iter().enumerate() {
            let sign = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
            corner[i] = inputs[i].value + sign * inputs[i].err;
        }
        let (l, r) = eval(&corner);
        slack_err = slack_err.max(((r - l) - slack).abs());
    }
    let tol = base_tol.max(3.0 * slack_err);
    let verdict = if slack < -tol {
        Verdict::Violated
    } else if slack.abs() <= tol {
        Verdict::SatisfiedEquality { tol }
    } else {
        Verdict::SatisfiedStrict
    };
    BoundRow {
        name: name.to_string(),
        statement: statement.to_string(),
        lhs: Some(lhs),
        rhs: Some(rhs),
        slack: Some(slack),
        slack_err,
        verdict,
    }
}

/// 2 sqrt(1-rho^2) artanh(sqrt(1-rho^2)) without cancellation: with
/// x = sqrt((1-rho)(1+rho)), artanh(x) = log((1+x)/rho).
fn entropy_floor_from_rho(rho: f64) -> f64 {
    let rho = rho.clamp(f64::MIN_POSITIVE, 1.0);
    let x = ((1.0 - rho) * (1.0 + rho)).max(0.0).sqrt();
    if x == 0.0 {
        0.0
    } else {
        2.0 * x * ((1.0 + x) / rho).ln()
    }
}

fn drift_ratio_floor(ell: f64, m2: f64) -> f64 {
    let x = (ell / m2).clamp(0.0, 1.0 - 1e-15);
    2.0 * x * artanh(x)
}

fn validate_inputs(inp: &InvariantInputs) -> Result<()> {
    if !(inp.h.value >= 0.0) {
        return Err(Error::Domain(format!("entropy must be >= 0, got {}", inp.h.value)));
    }
    if !(inp.ell.value >= 0.0) {
        return Err(Error::Domain(format!("drift must be >= 0, got {}", inp.ell.value)));
    }
    if !(inp.m2.value > 0.0) {
        return Err(Error::Domain(format!(
            "second moment must be positive, got {}",
            inp.m2.value
        )));
    }
    if let Some(rho) = &inp.rho {
        if !(rho.value > 0.0 && rho.value <= 1.0) {
            return Err(Error::Domain(format!(
                "spectral radius must lie in (0,1], got {}",
                rho.value
            )));
        }
    }
    if let Some(v) = &inp.v {
        if !(v.value >= 0.0) {
            return Err(Error::Domain(format!("growth must be >= 0, got {}", v.value)));
        }
    }
    Ok(())
}

/// The sharp entropy lower bounds and the classical rows they dominate.
pub fn theorem2_check(inp: &InvariantInputs, base_tol: f64) -> Result<Vec<BoundRow>> {
    if !inp.symmetric {
        return Err(Error::Unsupported(
            "the sharp entropy bounds assume a symmetric measure; rows refused".into(),
        ));
    }
    validate_inputs(inp)?;
    let mut rows = Vec::new();

    match &inp.rho {
        Some(rho) => {
            rows.push(assess(
                "eq_main_rho",
                "2 sqrt(1-rho^2) artanh(sqrt(1-rho^2)) <= h",
                &[rho, &inp.h],
                base_tol,
                |x| (entropy_floor_from_rho(x[0]), x[1]),
            ));
        }
        None => rows.push(BoundRow::skipped(
            "eq_main_rho",
            "2 sqrt(1-rho^2) artanh(sqrt(1-rho^2)) <= h",
            NO_RHO,
        )),
    }

    let ell_stmt = "F(l/M2) <= h";
    if inp.ell.value / inp.m2.value >= 1.0 {
        rows.push(BoundRow::skipped("eq:main_ell", ell_stmt, RATIO_ARTIFACT));
    } else {
        rows.push(assess(
            "eq:main_ell",
            ell_stmt,
            &[&inp.ell, &inp.m2, &inp.h],
            base_tol,
            |x| (drift_ratio_floor(x[0], x[1]), x[2]),
        ));
    }

    let classical: [(&str, &str, fn(f64) -> f64); 2] = [
        ("avez", "-2 log rho <= h", |r| -2.0 * r.ln()),
        ("ledrappier", "4 (1-rho) <= h", |r| 4.0 * (1.0 - r)),
    ];
    for (name, stmt, lhs_of) in classical {
        match &inp.rho {
            Some(rho) => rows.push(assess(name, stmt, &[rho, &inp.h], base_tol, |x| {
                (lhs_of(x[0].clamp(f64::MIN_POSITIVE, 1.0)), x[1])
            })),
            None => rows.push(BoundRow::skipped(name, stmt, NO_RHO)),
        }
    }

    let dom_stmt = "FG_inv(1-rho) >= max(-2 log rho, 4 (1-rho))";
    match &inp.rho {
        Some(rho) => rows.push(assess("dominance", dom_stmt, &[rho], base_tol, |x| {
            let r = x[0].clamp(f64::MIN_POSITIVE, 1.0);
            let gap = (1.0 - r).clamp(0.0, 1.0 - 1e-15);
            let classical = (-2.0 * r.ln()).max(4.0 * (1.0 - r));
            (classical, fg_inv(gap).expect("clamped into domain"))
        })),
        None => rows.push(BoundRow::skipped("dominance", dom_stmt, NO_RHO)),
    }

    Ok(rows)
}

/// The growth-only bounds: every invariant is constrained by v and M2 alone.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthBounds {
    pub ell_max: f64,
    pub h_max: f64,
    pub rho_min: f64,
    pub identity_residual: f64,
}

pub fn theorem1_bounds(v: f64, m2: f64) -> Result<GrowthBounds> {
    if !(v >= 0.0) {
        return Err(Error::Domain(format!("growth must be >= 0, got {v}")));
    }
    if !(m2 > 0.0) {
        return Err(Error::Domain(format!("second moment must be positive, got {m2}")));
    }
    let vt = m2 * v;
    let w = 0.5 * vt;
    let tanh_w = w.tanh();
    let rho_min = 1.0 / w.cosh();
    if rho_min == 0.0 {
        return Err(Error::Domain(format!("growth {vt} overflows the bound evaluation")));
    }
    let h_max = vt * tanh_w;
    // 2 sqrt(1-r^2) artanh(sqrt(1-r^2)) at r = 1/cosh(w) collapses to
    // 2 tanh(w) log((1+tanh(w)) cosh(w)) = vt tanh(w); check it numerically
    let identity_residual = (entropy_floor_from_rho(rho_min) - h_max).abs();
    if identity_residual > 1e-12 * h_max.abs().max(1.0) {
        return Err(Error::Domain(format!(
            "growth-bound identity check failed: residual {identity_residual:.3e}"
        )));
    }
    Ok(GrowthBounds {
        ell_max: m2 * tanh_w,
        h_max,
        rho_min,
        identity_residual,
    })
}

/// Rows comparing the measured invariants against the growth-only bounds.
pub fn theorem1_rows(inp: &InvariantInputs, base_tol: f64) -> Result<Vec<BoundRow>> {
    validate_inputs(inp)?;
    if !inp.symmetric {
        // the growth bounds presuppose a symmetric step measure (a biased
        // walk on Z has l > 0 with v = 0)
        return Ok(["thm1_ell", "thm1_h", "thm1_rho"]
            .iter()
            .map(|n| BoundRow::skipped(n, "growth bound", "asymmetric measure"))
            .collect());
    }
    let v = match &inp.v {
        Some(v) => v,
        None => {
            return Ok(["thm1_ell", "thm1_h", "thm1_rho"]
                .iter()
                .map(|n| BoundRow::skipped(n, "growth bound", NO_GROWTH))
                .collect())
        }
    };
    let mut rows = vec![
        assess(
            "thm1_ell",
            "l <= M2 tanh(M2 v / 2)",
            &[&inp.ell, &inp.m2, v],
            base_tol,
            |x| (x[0], x[1] * (0.5 * x[1] * x[2]).tanh()),
        ),
        assess(
            "thm1_h",
            "h <= M2 v tanh(M2 v / 2)",
            &[&inp.h, &inp.m2, v],
            base_tol,
            |x| {
                let vt = x[1] * x[2];
                (x[0], vt * (0.5 * vt).tanh())
            },
        ),
    ];
    match &inp.rho {
        Some(rho) => rows.push(assess(
            "thm1_rho",
            "rho >= 1 / cosh(M2 v / 2)",
            &[rho, &inp.m2, v],
            base_tol,
            |x| (1.0 / (0.5 * x[1] * x[2]).cosh(), x[0]),
        )),
        None => rows.push(BoundRow::skipped(
            "thm1_rho",
            "rho >= 1 / cosh(M2 v / 2)",
            NO_RHO,
        )),
    }
    Ok(rows)
}

/// The remaining comparison rows: the fundamental inequality, the combined
/// Carne and Ledrappier strengthenings, the moment-refined partial sums, and
/// the Varopoulos-Carne floor. `moments` holds (p, M_p) pairs.
pub fn auxiliary_checks(
    inp: &InvariantInputs,
    moments: &[(f64, f64)],
    support_radius: f64,
    n_terms: usize,
    base_tol: f64,
) -> Result<Vec<BoundRow>> {
    validate_inputs(inp)?;
    if !(support_radius > 0.0) {
        return Err(Error::Domain(format!(
            "support radius must be positive, got {support_radius}"
        )));
    }
    if n_terms == 0 {
        return Err(Error::Domain("moment sum needs at least one term".into()));
    }
    let mut rows = Vec::new();

    match &inp.v {
        Some(v) => rows.push(assess(
            "fundamental",
            "h <= l v",
            &[&inp.h, &inp.ell, v],
            base_tol,
            |x| (x[0], x[1] * x[2]),
        )),
        None => rows.push(BoundRow::skipped("fundamental", "h <= l v", NO_GROWTH)),
    }

    let carne_stmt = "A_carne(l/M2) + 2 |log rho| <= h";
    let ledr_stmt = "A_ledr(l/M2) + 4 (1-rho) <= h";
    let prop_stmt = "sum_n 2/(2n-1) (l / M_{1+1/(2n-1)})^{2n} <= h";
    let mono_stmt = "moment-refined sum >= M2-substituted sum";
    let vc_stmt = "l^2 / (2 k^2) <= h";

    if !inp.symmetric {
        for (name, stmt) in [
            ("carne_combined", carne_stmt),
            ("ledrappier_combined", ledr_stmt),
            ("prop_stronger", prop_stmt),
            ("prop_stronger_dominates_m2", mono_stmt),
            ("varopoulos_carne", vc_stmt),
        ] {
            rows.push(BoundRow::skipped(name, stmt, "asymmetric measure"));
        }
        return Ok(rows);
    }

    let ratio = inp.ell.value / inp.m2.value;
    match &inp.rho {
        Some(rho) if ratio <= 1.0 => {
            rows.push(assess(
                "carne_combined",
                carne_stmt,
                &[&inp.ell, &inp.m2, rho, &inp.h],
                base_tol,
                |x| {
                    let t = (x[0] / x[1]).clamp(0.0, 1.0);
                    let r = x[2].clamp(f64::MIN_POSITIVE, 1.0);
                    (
                        a_carne(t).expect("clamped into domain") + 2.0 * r.ln().abs(),
                        x[3],
                    )
                },
            ));
        }
        Some(_) => rows.push(BoundRow::skipped("carne_combined", carne_stmt, RATIO_ARTIFACT)),
        None => rows.push(BoundRow::skipped("carne_combined", carne_stmt, NO_RHO)),
    }
    match &inp.rho {
        Some(rho) if ratio < 1.0 => {
            rows.push(assess(
                "ledrappier_combined",
                ledr_stmt,
                &[&inp.ell, &inp.m2, rho, &inp.h],
                base_tol,
                |x| {
                    let t = (x[0] / x[1]).clamp(0.0, 1.0 - 1e-15);
                    let r = x[2].clamp(f64::MIN_POSITIVE, 1.0);
                    (
                        a_ledr(t).expect("clamped into domain") + 4.0 * (1.0 - r),
                        x[3],
                    )
                },
            ));
        }
        Some(_) => rows.push(BoundRow::skipped(
            "ledrappier_combined",
            ledr_stmt,
            RATIO_ARTIFACT,
        )),
        None => rows.push(BoundRow::skipped("ledrappier_combined", ledr_stmt, NO_RHO)),
    }

    // the moment ladder M_{1+1/(2n-1)} for n = 1..n_terms
    let mut ladder = Vec::with_capacity(n_terms);
    let mut missing = None;
    for n in 1..=n_terms {
        let p = 1.0 + 1.0 / (2.0 * n as f64 - 1.0);
        match moments
            .iter()
            .find(|(q, _)| (q - p).abs() < 1e-9)
            .map(|&(_, m)| m)
        {
            Some(m) => ladder.push(m),
            None => {
                missing = Some(p);
                break;
            }
        }
    }
    if let Some(p) = missing {
        let reason = format!("moment M_p missing for p = {p:.6}");
        rows.push(BoundRow::skipped("prop_stronger", prop_stmt, reason.clone()));
        rows.push(BoundRow::skipped("prop_stronger_dominates_m2", mono_stmt, reason));
    } else if ratio >= 1.0 {
        rows.push(BoundRow::skipped("prop_stronger", prop_stmt, RATIO_ARTIFACT));
        rows.push(BoundRow::skipped(
            "prop_stronger_dominates_m2",
            mono_stmt,
            RATIO_ARTIFACT,
        ));
    } else {
        let moment_sum = |ell: f64, per_term: &dyn Fn(usize) -> f64| -> f64 {
            let mut sum = 0.0;
            for n in 1..=n_terms {
                let x = ell / per_term(n - 1);
                sum += 2.0 / (2.0 * n as f64 - 1.0) * x.powi(2 * n as i32);
            }
            sum
        };
        rows.push(assess(
            "prop_stronger",
            prop_stmt,
            &[&inp.ell, &inp.h],
            base_tol,
            |x| (moment_sum(x[0], &|i| ladder[i]), x[1]),
        ));
        rows.push(assess(
            "prop_stronger_dominates_m2",
            mono_stmt,
            &[&inp.ell, &inp.m2],
            base_tol,
            |x| (moment_sum(x[0], &|_| x[1]), moment_sum(x[0], &|i| ladder[i])),
        ));
    }

    rows.push(assess(
        "varopoulos_carne",
        vc_stmt,
        &[&inp.ell, &inp.h],
        base_tol,
        |x| (x[0] * x[0] / (2.0 * support_radius * support_radius), x[1]),
    ));

    Ok(rows)
}

/// A full report: the inputs used and every checked row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: InvariantInputs,
    pub base_tol: f64,
    pub rows: Vec<BoundRow>,
}

impl BoundReport {
    pub fn new(inputs: InvariantInputs, base_tol: f64) -> BoundReport {
        BoundReport {
            inputs,
            base_tol,
            rows: Vec::new(),
        }
    }

    pub fn row(&self, name: &str) -> Option<&BoundRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn any_violated(&self) -> bool {
        self.rows.iter().any(|r| r.verdict == Verdict::Violated)
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| inequality | lhs | rhs | slack | verdict |\n|---|---|---|---|---|\n");
        for row in &self.rows {
            let num = |v: Option<f64>| v.map(|x| format!("{x:.9e}")).unwrap_or_default();
            let verdict = match &row.verdict {
                Verdict::SatisfiedStrict => "satisfied-strict".to_string(),
                Verdict::SatisfiedEquality { tol } => format!("satisfied-equality({tol:.1e})"),
                Verdict::Violated => "violated".to_string(),
                Verdict::Skipped { reason } => format!("skipped({reason})"),
            };
            out.push_str(&format!(
                "| {} ({}) | {} | {} | {} | {} |\n",
                row.name,
                row.statement,
                num(row.lhs),
                num(row.rhs),
                num(row.slack),
                verdict
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN3: f64 = 1.0986122886681098;
    const BASE: f64 = 1e-9;

    fn free_group_inputs() -> InvariantInputs {
        InvariantInputs {
            h: InputValue::exact(0.5 * LN3),
            ell: InputValue::exact(0.5),
            m2: InputValue::exact(1.0),
            rho: Some(InputValue::exact(3.0f64.sqrt() / 2.0)),
            v: Some(InputValue::exact(LN3)),
            symmetric: true,
        }
    }

    fn assert_equality(row: &BoundRow, tol_cap: f64) {
        match &row.verdict {
            Verdict::SatisfiedEquality { .. } => {
                assert!(row.slack.unwrap().abs() <= tol_cap, "{}: {:?}", row.name, row.slack)
            }
            other => panic!("{} expected equality, got {other:?}", row.name),
        }
    }

    fn assert_strict(row: &BoundRow) {
        assert!(
            matches!(row.verdict, Verdict::SatisfiedStrict),
            "{} expected strict, got {:?} (slack {:?})",
            row.name,
            row.verdict,
            row.slack
        );
    }

    #[test]
    fn free_group_equality_chain() {
        let inp = free_group_inputs();
        let t2 = theorem2_check(&inp, BASE).unwrap();
        let by = |n: &str| t2.iter().find(|r| r.name == n).unwrap();
        assert_equality(by("eq_main_rho"), 1e-12);
        assert_equality(by("eq:main_ell"), 1e-12);
        assert_strict(by("avez"));
        assert_strict(by("ledrappier"));
        assert_strict(by("dominance"));
        assert!((by("dominance").slack.unwrap() - 0.0134).abs() < 1e-3);

        let t1 = theorem1_rows(&inp, BASE).unwrap();
        for row in &t1 {
            assert_equality(row, 1e-12);
        }

        let moments: Vec<(f64, f64)> = (1..=16)
            .map(|n| (1.0 + 1.0 / (2.0 * n as f64 - 1.0), 1.0))
            .collect();
        let aux = auxiliary_checks(&inp, &moments, 1.0, 16, BASE).unwrap();
        let by = |n: &str| aux.iter().find(|r| r.name == n).unwrap();
        assert_equality(by("fundamental"), 1e-12);
        assert_equality(by("carne_combined"), 1e-12);
        assert_equality(by("ledrappier_combined"), 1e-12);
        // the truncated series sits ~5e-12 under F(1/2), inside the base tolerance
        assert_equality(by("prop_stronger"), 1e-8);
        assert!(by("prop_stronger").slack.unwrap() > 0.0);
        assert_equality(by("prop_stronger_dominates_m2"), 1e-15);
        assert_strict(by("varopoulos_carne"));
        assert!((by("varopoulos_carne").lhs.unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn weighted_metric_keeps_rho_equality_and_makes_ell_strict() {
        // uniform step law on F2 measured in the (1, 1/2)-weighted metric
        let m2 = 0.625f64.sqrt();
        let inp = InvariantInputs {
            h: InputValue::exact(0.5 * LN3),
            ell: InputValue::exact(0.375),
            m2: InputValue::exact(m2),
            rho: Some(InputValue::exact(3.0f64.sqrt() / 2.0)),
            v: None,
            symmetric: true,
        };
        let rows = theorem2_check(&inp, BASE).unwrap();
        let by = |n: &str| rows.iter().find(|r| r.name == n).unwrap();
        assert_equality(by("eq_main_rho"), 1e-12);
        assert_strict(by("eq:main_ell"));
        let expected = 0.5 * LN3 - 2.0 * (0.375 / m2) * artanh(0.375 / m2);
        assert!((by("eq:main_ell").slack.unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.060109).abs() < 1e-5);
    }

    #[test]
    fn surface_group_digits() {
        let b = theorem1_bounds(1.9430254, 1.0).unwrap();
        assert!((b.ell_max - 0.749368278).abs() < 5e-10);
        assert!((b.h_max - 1.456041598).abs() < 5e-10);
        assert!((b.rho_min - 0.66215344).abs() < 5e-9);

        let h_floor = fg_inv(1.0 - 0.662816).unwrap();
        assert!((h_floor - 1.452903618).abs() < 5e-10);
        assert!((h_floor / 1.9430254 - 0.747753281).abs() < 5e-10);
    }

    #[test]
    fn growth_identity_holds_across_scales() {
        for v in [0.0, 0.1, 1.0, LN3, 5.0, 20.0, 100.0] {
            for m2 in [0.5, 1.0, 2.0] {
                let b = theorem1_bounds(v, m2).unwrap();
                assert!(b.identity_residual <= 1e-12 * b.h_max.max(1.0));
                assert!(b.rho_min > 0.0 && b.rho_min <= 1.0);
            }
        }
        assert!(theorem1_bounds(-1.0, 1.0).is_err());
        assert!(theorem1_bounds(1.0, 0.0).is_err());
    }

    #[test]
    fn abelian_walk_collapses_to_equalities() {
        let inp = InvariantInputs {
            h: InputValue::exact(0.0),
            ell: InputValue::exact(0.0),
            m2: InputValue::exact(1.0),
            rho: Some(InputValue::exact(1.0)),
            v: Some(InputValue::exact(0.0)),
            symmetric: true,
        };
        for row in theorem2_check(&inp, BASE)
            .unwrap()
            .into_iter()
            .chain(theorem1_rows(&inp, BASE).unwrap())
            .chain(auxiliary_checks(&inp, &[(2.0, 1.0)], 1.0, 1, BASE).unwrap())
        {
            assert_equality(&row, 1e-15);
        }
    }

    #[test]
    fn asymmetric_measures_are_refused() {
        let mut inp = free_group_inputs();
        inp.symmetric = false;
        assert!(matches!(
            theorem2_check(&inp, BASE),
            Err(Error::Unsupported(_))
        ));
        // a biased walk on Z (l = 0.4, v = 0) must not read as a thm1 violation
        inp.ell = InputValue::exact(0.4);
        inp.v = Some(InputValue::exact(0.0));
        for row in theorem1_rows(&inp, BASE).unwrap() {
            match &row.verdict {
                Verdict::Skipped { reason } => assert!(reason.contains("asymmetric")),
                other => panic!("{} not skipped: {other:?}", row.name),
            }
        }
        let aux = auxiliary_checks(&inp, &[], 1.0, 4, BASE).unwrap();
        for row in &aux {
            if row.name == "fundamental" {
                assert!(row.slack.is_some());
            } else {
                match &row.verdict {
                    Verdict::Skipped { reason } => assert!(reason.contains("asymmetric")),
                    other => panic!("{} not skipped: {other:?}", row.name),
                }
            }
        }
    }

    #[test]
    fn missing_rho_skips_with_reason() {
        let mut inp = free_group_inputs();
        inp.rho = None;
        let rows = theorem2_check(&inp, BASE).unwrap();
        for name in ["eq_main_rho", "avez", "ledrappier", "dominance"] {
            let row = rows.iter().find(|r| r.name == name).unwrap();
            match &row.verdict {
                Verdict::Skipped { reason } => assert!(reason.contains("biased")),
                other => panic!("{name} not skipped: {other:?}"),
            }
        }
        assert!(rows.iter().any(|r| r.name == "eq:main_ell" && r.slack.is_some()));
    }

    #[test]
    fn estimated_inputs_widen_the_equality_band() {
        let inp = InvariantInputs {
            h: InputValue::estimated(0.61, 0.03, "increment"),
            ell: InputValue::estimated(0.5, 0.0095, "increment"),
            m2: InputValue::exact(1.0),
            rho: None,
            v: None,
            symmetric: true,
        };
        let rows = theorem2_check(&inp, BASE).unwrap();
        let row = rows.iter().find(|r| r.name == "eq:main_ell").unwrap();
        match &row.verdict {
            Verdict::SatisfiedEquality { tol } => {
                assert!(*tol > 0.1, "tol {tol}");
                assert!(row.slack_err > 0.03);
            }
            other => panic!("expected error-widened equality, got {other:?}"),
        }
    }

    #[test]
    fn drift_ratio_artifact_skips_dependent_rows() {
        let inp = InvariantInputs {
            h: InputValue::exact(0.5),
            ell: InputValue::estimated(1.2, 0.05, "increment"),
            m2: InputValue::exact(1.0),
            rho: Some(InputValue::exact(0.9)),
            v: None,
            symmetric: true,
        };
        let t2 = theorem2_check(&inp, BASE).unwrap();
        let ell_row = t2.iter().find(|r| r.name == "eq:main_ell").unwrap();
        assert!(matches!(&ell_row.verdict, Verdict::Skipped { reason } if reason.contains("artifact")));
        assert!(t2.iter().any(|r| r.name == "dominance" && r.slack.is_some()));

        let aux = auxiliary_checks(&inp, &[(2.0, 1.0)], 1.0, 1, BASE).unwrap();
        for name in ["carne_combined", "ledrappier_combined", "prop_stronger"] {
            let row = aux.iter().find(|r| r.name == name).unwrap();
            assert!(
                matches!(&row.verdict, Verdict::Skipped { reason } if reason.contains("artifact")),
                "{name}: {:?}",
                row.verdict
            );
        }
    }

    #[test]
    fn missing_moments_skip_the_ladder() {
        let inp = free_group_inputs();
        let aux = auxiliary_checks(&inp, &[(2.0, 1.0)], 1.0, 3, BASE).unwrap();
        let row = aux.iter().find(|r| r.name == "prop_stronger").unwrap();
        assert!(matches!(&row.verdict, Verdict::Skipped { reason } if reason.contains("M_p missing")));
    }

    #[test]
    fn modular_group_rows_with_computed_radius() {
        // exact invariants h = (log 2)/15, l = 2/15, v = (log 2)/2; the radius
        // is pinned by an offline free-probability computation
        let h = 2.0f64.ln() / 15.0;
        let rho = 0.988_482_212_661_305_0;
        let inp = InvariantInputs {
            h: InputValue::exact(h),
            ell: InputValue::exact(2.0 / 15.0),
            m2: InputValue::exact(1.0),
            rho: Some(InputValue::external(rho, 0.0, "subordination fixed point")),
            v: Some(InputValue::exact(0.5 * 2.0f64.ln())),
            symmetric: true,
        };
        let rows = theorem2_check(&inp, BASE).unwrap();
        let by = |n: &str| rows.iter().find(|r| r.name == n).unwrap();
        assert_strict(by("eq_main_rho"));
        let s = by("eq_main_rho").slack.unwrap();
        assert!(s > 4e-5 && s < 6e-5, "slack {s}");
        assert_strict(by("eq:main_ell"));
        assert!((by("eq:main_ell").slack.unwrap() - 0.010441).abs() < 1e-5);
        assert_strict(by("avez"));
        assert_strict(by("ledrappier"));
        let l = by("ledrappier").slack.unwrap();
        assert!(l > 1.2e-4 && l < 1.6e-4, "slack {l}");
        assert_strict(by("dominance"));

        let aux = auxiliary_checks(&inp, &[(2.0, 1.0)], 1.0, 1, BASE).unwrap();
        let fun = aux.iter().find(|r| r.name == "fundamental").unwrap();
        assert_equality(fun, 1e-15);
    }

    #[test]
    fn report_renders_markdown_and_json() {
        let inp = free_group_inputs();
        let mut report = BoundReport::new(inp.clone(), BASE);
        report.rows.extend(theorem2_check(&inp, BASE).unwrap());
        report.rows.push(BoundRow::skipped("demo", "x <= y", "why not"));
        let md = report.to_markdown();
        assert!(md.starts_with("| inequality | lhs | rhs | slack | verdict |\n"));
        assert!(md.contains("satisfied-equality"));
        assert!(md.contains("skipped(why not)"));
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"satisfied-strict\""));
        assert!(json.contains("\"exact\""));
        assert!(!report.any_violated());
        assert!(report.row("eq_main_rho").is_some());
    }

    #[test]
    fn violation_is_reported() {
        let inp = InvariantInputs {
            h: InputValue::exact(0.1),
            ell: InputValue::exact(0.5),
            m2: InputValue::exact(1.0),
            rho: None,
            v: None,
            symmetric: true,
        };
        let rows = theorem2_check(&inp, BASE).unwrap();
        let row = rows.iter().find(|r| r.name == "eq:main_ell").unwrap();
        assert_eq!(row.verdict, Verdict::Violated);
        assert!(row.slack.unwrap() < 0.0);
    }
}
