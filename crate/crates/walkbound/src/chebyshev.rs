//! Chebyshev decomposition of operator powers and pointwise heat-kernel bounds.

use serde::{Deserialize, Serialize};

use crate::dist::{nstep, KahanSum};
use crate::interner::GroupCtx;
use crate::measure::Measure;
use crate::special::a_carne;
use crate::{Error, Result};

/// T_k(x) by the three-term recurrence. Valid on all of R; for |x| > 1 this
/// tracks the dominant cosh branch, so the recurrence stays stable.
pub fn chebyshev_value(k: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if k == 0 {
        return 1.0;
    }
    for _ in 1..k {
        (prev, cur) = (cur, 2.0 * x * cur - prev);
    }
    cur
}

/// The law of the n-step simple walk on Z; probabilities are stored for the
/// achievable points -n, -n+2, ..., n.
pub struct SimpleWalkLaw {
    pub n: usize,
    probs: Vec<f64>,
}

impl SimpleWalkLaw {
    pub fn new(n: usize) -> Result<Self> {
        if n > 60 {
            return Err(Error::Domain(format!(
                "simple-walk law limited to n <= 60 (got {n})"
            )));
        }
        let mut lnfact = vec![0.0f64; n + 1];
        for i in 1..=n {
            lnfact[i] = lnfact[i - 1] + (i as f64).ln();
        }
        let ln2 = std::f64::consts::LN_2;
        let probs = (0..=n)
            .map(|j| {
                let m = j.min(n - j); // fixed subtraction order keeps p(k) = p(-k) exact
                (lnfact[n] - lnfact[m] - lnfact[n - m] - n as f64 * ln2).exp()
            })
            .collect();
        Ok(SimpleWalkLaw { n, probs })
    }

    /// P(S_n = k); zero off the parity class.
    pub fn p(&self, k: i64) -> f64 {
        let n = self.n as i64;
        if k.abs() > n || (k + n) % 2 != 0 {
            return 0.0;
        }
        self.probs[((k + n) / 2) as usize]
    }

    /// P(|S_n| = k) for k >= 0.
    pub fn p_abs(&self, k: usize) -> f64 {
        if k == 0 {
            self.p(0)
        } else {
            2.0 * self.p(k as i64)
        }
    }

    /// P(S_n >= k), summed from the thin end for accuracy.
    pub fn upper_tail(&self, k: usize) -> f64 {
        let mut acc = KahanSum::default();
        let n = self.n as i64;
        let mut j = n;
        while j >= k as i64 {
            acc.add(self.p(j));
            j -= 1;
        }
        acc.value()
    }
}

/// |x^n - sum_k P(|S_n|=k) T_k(x)|.
pub fn decomposition_residual(n: usize, x: f64) -> Result<f64> {
    let law = SimpleWalkLaw::new(n)?;
    let mut acc = KahanSum::default();
    for k in (0..=n).rev() {
        acc.add(law.p_abs(k) * chebyshev_value(k, x));
    }
    Ok((x.powi(n as i32) - acc.value()).abs())
}

/// exp(-(n/2) A(k/n)), the large-deviation bound on P(S_n >= k).
pub fn chernov_tail_bound(n: usize, k: usize) -> Result<f64> {
    if k > n {
        return Err(Error::Domain(format!("tail point {k} exceeds n = {n}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    Ok((-(n as f64 / 2.0) * a_carne(k as f64 / n as f64)?).exp())
}

/// Checks the exact tail against the Chernov bound for all 0 <= k <= n.
/// Returns the worst log-space margin ln(bound) - ln(tail) (>= -1e-12).
pub fn verify_chernov(n: usize) -> Result<f64> {
    let law = SimpleWalkLaw::new(n)?;
    let mut worst = f64::INFINITY;
    for k in 0..=n {
        let tail = law.upper_tail(k);
        let bound = chernov_tail_bound(n, k)?;
        let margin = bound.ln() - tail.ln();
        if margin < -1e-12 {
            return Err(Error::Domain(format!(
                "Chernov bound fails at n={n}, k={k}: tail {tail:e} > bound {bound:e}"
            )));
        }
        worst = worst.min(margin);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseRow {
    pub radius: f64,
    pub count: usize,
    pub exact_max: f64,
    pub loeuillot: f64,
    pub carne: f64,
    /// exact_max over the smaller of the two bounds
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointwiseReport {
    pub n: usize,
    pub rho_used: f64,
    pub support_radius: f64,
    pub rows: Vec<PointwiseRow>,
}

impl PointwiseReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("|g|,count,exact_max,loeuillot,carne,ratio\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:.6}\n",
                r.radius, r.count, r.exact_max, r.loeuillot, r.carne, r.ratio
            ));
        }
        out
    }
}

/// Verifies mu^{*n}(g) <= 2 rho^n exp(-(n/2) A(|g|/(n k))) and
/// mu^{*n}(g) <= 2 exp(-|g|^2 / (2 n k^2)) for every g in the support,
/// where k is the support radius of mu. `rho_upper` must be a true upper
/// bound on the spectral radius (1 is always valid).
pub fn pointwise_bounds(
    ctx: &mut GroupCtx,
    measure: &Measure,
    n: usize,
    rho_upper: f64,
    max_support: usize,
) -> Result<PointwiseReport> {
    if !(rho_upper > 0.0 && rho_upper <= 1.0) {
        return Err(Error::Domain(format!(
            "rho upper bound must lie in (0, 1], got {rho_upper}"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("pointwise bounds need n >= 1".into()));
    }
    let k_w = measure.support_radius;
    let dist = nstep(ctx, measure, n, 0.0, max_support)?;
    let nk = n as f64 * k_w;
    let mut rows: Vec<PointwiseRow> = Vec::new();
    for &(id, p) in &dist.entries {
        let r = ctx.length(id);
        if r > nk * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "support element {} at distance {r} exceeds n*k = {nk}",
                ctx.display(id)
            )));
        }
        let loe = 2.0 * rho_upper.powi(n as i32) * (-(n as f64 / 2.0) * a_carne(r / nk)?).exp();
        let carne = 2.0 * (-r * r / (2.0 * n as f64 * k_w * k_w)).exp();
        if p > loe * (1.0 + 1e-12) || p > carne * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "pointwise bound violated at {} (|g|={r}): exact {p:e}, bounds {loe:e}/{carne:e}",
                ctx.display(id)
            )));
        }
        match rows.iter_mut().find(|row| (row.radius - r).abs() < 1e-9) {
            Some(row) => {
                row.count += 1;
                row.exact_max = row.exact_max.max(p);
            }
            None => rows.push(PointwiseRow {
                radius: r,
                count: 1,
                exact_max: p,
                loeuillot: loe,
                carne,
                ratio: 0.0,
            }),
        }
    }
    rows.sort_by(|a, b| a.radius.total_cmp(&b.radius));
    for row in &mut rows {
        row.ratio = row.exact_max / row.loeuillot.min(row.carne);
    }
    Ok(PointwiseReport {
        n,
        rho_used: rho_upper,
        support_radius: k_w,
        rows,
    })
}

/// Kesten's spectral radius sqrt(2d-1)/d for the simple walk on the free
/// group of rank d.
pub fn kesten_rho_free(rank: u32) -> f64 {
    let d = rank as f64;
    (2.0 * d - 1.0).sqrt() / d
}
