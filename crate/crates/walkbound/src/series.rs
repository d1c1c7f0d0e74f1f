//! Entropy, drift and return-probability series with finite-step extrapolants.

use serde::{Deserialize, Serialize};

use crate::dist::{convolve_step, delta_identity, distribution_stats};
use crate::interner::GroupCtx;
use crate::measure::Measure;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeriesRow {
    pub n: usize,
    pub h: f64,
    pub l: f64,
    pub return_prob: f64,
    pub h_inc: Option<f64>,
    pub l_inc: Option<f64>,
    pub rho_ratio: Option<f64>,
}

/// A finite-step estimate of an asymptotic quantity. `err` is an empirical
/// error bar, not a certified one. `in_range` is false when the estimator
/// left the domain of the quantity it targets (e.g. a spectral-radius
/// estimate at or above 1), in which case downstream checks must not
/// certify anything with it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
    pub method: String,
    pub in_range: bool,
    pub note: Option<String>,
}

impl Estimate {
    fn new(value: f64, err: f64, method: &str) -> Self {
        Estimate {
            value,
            err,
            method: method.into(),
            in_range: true,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkSeries {
    pub rows: Vec<SeriesRow>,
    pub h_est: Estimate,
    pub l_est: Estimate,
    pub rho_est: Estimate,
    pub h_cesaro: Estimate,
    pub l_cesaro: Estimate,
    pub rho_root: Estimate,
    pub h_fit: Estimate,
    pub l_fit: Estimate,
    pub rho_llt: Estimate,
}

/// Computes mu^{*n} statistics for n = 0..n_max and all extrapolants.
pub fn asymptotic_estimates(
    ctx: &mut GroupCtx,
    measure: &Measure,
    n_max: usize,
    prune_eps: f64,
    max_support: usize,
) -> Result<WalkSeries> {
    if n_max < 3 {
        return Err(Error::Domain(format!(
            "n_max = {n_max} is too small for extrapolation (need at least 3)"
        )));
    }
    let mut rows = Vec::with_capacity(n_max + 1);
    rows.push(SeriesRow {
        n: 0,
        h: 0.0,
        l: 0.0,
        return_prob: 1.0,
        h_inc: None,
        l_inc: None,
        rho_ratio: None,
    });
    let mut dist = delta_identity();
    for n in 1..=n_max {
        dist = convolve_step(ctx, &dist, measure, prune_eps, max_support)?;
        let stats = distribution_stats(ctx, &dist);
        let prev = rows[n - 1];
        let rho_ratio = if n % 2 == 0 && n >= 2 {
            let u_prev = rows[n - 2].return_prob;
            (u_prev > 0.0 && stats.return_prob > 0.0).then(|| (stats.return_prob / u_prev).sqrt())
        } else {
            None
        };
        rows.push(SeriesRow {
            n,
            h: stats.h,
            l: stats.l,
            return_prob: stats.return_prob,
            h_inc: Some(stats.h - prev.h),
            l_inc: Some(stats.l - prev.l),
            rho_ratio,
        });
    }
    let _ = dist;

    let h_series: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let l_series: Vec<f64> = rows.iter().map(|r| r.l).collect();

    let h_est = increment_estimate(&h_series, "increment");
    let l_est = increment_estimate(&l_series, "increment");
    let h_cesaro = cesaro_estimate(&h_series);
    let l_cesaro = cesaro_estimate(&l_series);
    let (rho_est, rho_root, rho_llt) = rho_estimates(&rows);
    let h_fit = fit_estimate(&h_series);
    let l_fit = fit_estimate(&l_series);

    Ok(WalkSeries {
        rows,
        h_est,
        l_est,
        rho_est,
        h_cesaro,
        l_cesaro,
        rho_root,
        h_fit,
        l_fit,
        rho_llt,
    })
}

fn increment_estimate(series: &[f64], method: &str) -> Estimate {
    let n = series.len() - 1;
    let value = series[n] - series[n - 1];
    let prev = series[n - 1] - series[n - 2];
    Estimate::new(value, (value - prev).abs(), method)
}

fn cesaro_estimate(series: &[f64]) -> Estimate {
    let n = series.len() - 1;
    let value = series[n] / n as f64;
    let prev = series[n - 1] / (n - 1) as f64;
    Estimate::new(value, (value - prev).abs(), "cesaro")
}

/// Raw even-step ratio, even-step root, and the power-corrected ratio.
/// The correction fits u_n ~ C rho^n n^{-beta} through the last three even
/// return probabilities and removes the fitted polynomial factor.
fn rho_estimates(rows: &[SeriesRow]) -> (Estimate, Estimate, Estimate) {
    let evens: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.n >= 2 && r.n % 2 == 0 && r.return_prob > 0.0)
        .map(|r| (r.n, r.return_prob))
        .collect();
    // undefined estimates stay finite (zero, flagged out of range) so the
    // report serializes losslessly
    let missing = |method: &str| Estimate {
        value: 0.0,
        err: 0.0,
        method: method.into(),
        in_range: false,
        note: Some("not enough positive even-step return probabilities".into()),
    };
    if evens.len() < 2 {
        let root = evens
            .last()
            .map(|&(m, u)| {
                let value = u.powf(1.0 / m as f64);
                let mut e = Estimate::new(value, value, "root");
                e.note = Some("error bar saturated: single data point".into());
                e
            })
            .unwrap_or_else(|| missing("root"));
        return (missing("ratio"), root, missing("ratio-llt"));
    }

    let &(m, u_m) = evens.last().unwrap();
    let &(m1, u_m1) = &evens[evens.len() - 2];
    let ratio = (u_m / u_m1).sqrt();
    let ratio_prev = (evens.len() >= 3).then(|| {
        let (_, u_m2) = evens[evens.len() - 3];
        (u_m1 / u_m2).sqrt()
    });
    let spread = ratio_prev.map(|r| (ratio - r).abs()).unwrap_or(ratio);
    let mut rho_est = Estimate::new(ratio, spread, "ratio");
    if ratio_prev.is_none() {
        rho_est.note = Some("error bar saturated: too few even steps".into());
    }
    rho_est.in_range = ratio < 1.0;
    if !rho_est.in_range {
        rho_est.note = Some("ratio at or above 1: series is preasymptotic".into());
    }

    let root_val = u_m.powf(1.0 / m as f64);
    let root_prev = u_m1.powf(1.0 / m1 as f64);
    let rho_root = Estimate::new(root_val, (root_val - root_prev).abs(), "root");

    let rho_llt = if evens.len() >= 3 {
        let (m2, u_m2) = evens[evens.len() - 3];
        let r1 = (u_m / u_m1).ln();
        let r2 = (u_m1 / u_m2).ln();
        let denom = (m1 as f64 / m2 as f64).ln() - (m as f64 / m1 as f64).ln();
        let beta = if denom.abs() > 1e-12 {
            ((r1 - r2) / denom).clamp(0.0, 3.0)
        } else {
            0.0
        };
        let value = ratio * (m as f64 / m1 as f64).powf(beta / 2.0);
        let err = (value - ratio).abs().max(spread);
        let mut e = Estimate::new(value, err, "ratio-llt");
        e.note = Some(format!("fitted power beta = {beta:.3}"));
        if value >= 1.0 {
            e.in_range = false;
            e.note = Some(format!(
                "corrected ratio {value:.4} is at or above 1 (fitted power beta = {beta:.3}): series is preasymptotic"
            ));
        }
        e
    } else {
        missing("ratio-llt")
    };

    (rho_est, rho_root, rho_llt)
}

/// Extrapolates the increment limit by fitting pair-averaged increments
/// d_k = (S(k) - S(k-2))/2 linearly against x_k = (1/k + 1/(k-1))/2 over the
/// window k >= n/3. Averaging adjacent increments cancels period-2
/// oscillation; x_k is the exact mean abscissa, so data with increments
/// a + c/k lie on a straight line and the fit recovers `a` exactly.
///
/// The error bar is the largest of: twice the disagreement with the same fit
/// over k >= n/2, the disagreement with a quadratic-in-x fit, and three
/// times the rms residual. If the extrapolated limit is still drifting with
/// depth (the fit on the first 3/4 of the series lands more than 1.5 error
/// bars away), the bar widens to three times that drift. Increments with
/// corrections decaying slower than 1/n (diffusive drift on lattices decays
/// like n^{-1/2}) violate the model and can defeat these witnesses; such
/// series need closed forms or Monte Carlo instead.
fn fit_estimate(series: &[f64]) -> Estimate {
    let n = series.len() - 1;
    if n < 5 {
        let mut e = increment_estimate(series, "increment");
        e.note = Some("series too short for a 1/n fit".into());
        return e;
    }
    let (a, base) = pair_fit(series, n);
    let mut err = base;
    let mut note = None;
    let n34 = 3 * n / 4;
    if n34 >= 5 {
        let (a34, _) = pair_fit(series, n34);
        let drift = (a - a34).abs();
        if drift > 1.5 * base {
            err = base.max(3.0 * drift);
            note = Some("error bar widened: the extrapolated limit is still drifting with depth".into());
        }
    }
    let mut e = Estimate::new(a, err, "fit-1/n");
    e.note = note;
    if a < -err {
        e.in_range = false;
        e.note = Some("fitted limit is negative beyond its error bar".into());
    }
    e
}

/// Linear fit of pair-averaged increments of `series[..=n]` with its witness
/// bar (window disagreement, quadratic disagreement, residual).
fn pair_fit(series: &[f64], n: usize) -> (f64, f64) {
    let pairs: Vec<(f64, f64)> = (2..=n)
        .map(|k| {
            let x = 0.5 * (1.0 / k as f64 + 1.0 / (k - 1) as f64);
            (x, 0.5 * (series[k] - series[k - 2]))
        })
        .collect();
    let lo_long = (n / 3).max(2);
    let lo_short = (n / 2).max(lo_long + 1).min(n - 2).max(2);
    let long = &pairs[lo_long - 2..];
    let short = &pairs[lo_short - 2..];
    let (a, resid) = fit_poly(long, 2);
    let (a_short, _) = fit_poly(short, 2);
    let a_quad = if long.len() >= 4 { fit_poly(long, 3).0 } else { a };
    let err = (2.0 * (a - a_short).abs())
        .max((a - a_quad).abs())
        .max(3.0 * resid)
        .max(1e-12);
    (a, err)
}

/// Fits y = sum_{j<terms} coef_j x^j in least squares; returns the constant
/// term and the rms residual. `terms` is 2 or 3.
fn fit_poly(points: &[(f64, f64)], terms: usize) -> (f64, f64) {
    let dim = terms;
    let mut ata = [[0.0f64; 3]; 3];
    let mut atb = [0.0f64; 3];
    for &(x, y) in points {
        let basis = [1.0, x, x * x];
        for i in 0..dim {
            for j in 0..dim {
                ata[i][j] += basis[i] * basis[j];
            }
            atb[i] += basis[i] * y;
        }
    }
    let coef = solve_small(&ata, &atb, dim);
    let mut ss = 0.0;
    for &(x, y) in points {
        let basis = [1.0, x, x * x];
        let fit: f64 = (0..dim).map(|i| coef[i] * basis[i]).sum();
        ss += (y - fit) * (y - fit);
    }
    (coef[0], (ss / points.len() as f64).sqrt())
}

fn solve_small(a: &[[f64; 3]; 3], b: &[f64; 3], dim: usize) -> [f64; 3] {
    // Gaussian elimination with partial pivoting on a copy
    let mut m = [[0.0f64; 4]; 3];
    for i in 0..dim {
        for j in 0..dim {
            m[i][j] = a[i][j];
        }
        m[i][dim] = b[i];
    }
    for col in 0..dim {
        let piv = (col..dim)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        if p.abs() < 1e-300 {
            return [0.0; 3];
        }
        for row in 0..dim {
            if row == col {
                continue;
            }
            let f = m[row][col] / p;
            for j in col..=dim {
                m[row][j] -= f * m[col][j];
            }
        }
    }
    let mut out = [0.0f64; 3];
    for i in 0..dim {
        out[i] = m[i][dim] / m[i][i];
    }
    out
}

impl WalkSeries {
    /// CSV export with columns n,H,L,return_prob,h_inc,l_inc,rho_ratio.
    /// Cells for undefined entries are left blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,H,L,return_prob,h_inc,l_inc,rho_ratio\n");
        for r in &self.rows {
            let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.n,
                r.h,
                r.l,
                r.return_prob,
                cell(r.h_inc),
                cell(r.l_inc),
                cell(r.rho_ratio),
            ));
        }
        out
    }

    pub fn final_row(&self) -> &SeriesRow {
        self.rows.last().unwrap()
    }
}

/// Log-probability of the identity under mu^{*n}, used by sampling
/// cross-checks. Returns None when the identity left the retained support.
pub fn log_return_prob(rows: &[SeriesRow], n: usize) -> Option<f64> {
    rows.get(n)
        .filter(|r| r.return_prob > 0.0)
        .map(|r| r.return_prob.ln())
}
