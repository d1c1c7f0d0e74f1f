//! Poissonized laws mu_t = e^{-t} sum t^n/n! mu^{*n} and the symmetrized
//! derivative identities for entropy, length, and the Dirichlet form.
//!
//! Two routes are provided: a sparse route over interned elements for any
//! finitely supported walk, and a radial route for the uniform walk on a free
//! group, where the law depends on the word length alone. The radial route
//! reaches times whose truncation depth would overflow the sparse support.

use std::collections::HashMap;

use serde::Serialize;

use crate::dist::{convolve_step, delta_identity, Distribution, KahanSum};
use crate::interner::GroupCtx;
use crate::measure::Measure;
use crate::{Error, Result};

/// Truncated law of the continuous-time walk at time t. `dist.step` holds the
/// truncation depth N; the Poisson tail beyond N is `defect`.
#[derive(Debug, Clone)]
pub struct PoissonizedLaw {
    pub t: f64,
    pub truncation: usize,
    pub dist: Distribution,
    pub defect: f64,
}

/// Poisson(t) weights up to the minimal N with tail < defect_tol.
fn poisson_weights(t: f64, defect_tol: f64) -> Result<(Vec<f64>, f64)> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("poissonization time must be >= 0, got {t}")));
    }
    if !(defect_tol > 0.0) {
        return Err(Error::Domain("defect tolerance must be positive".into()));
    }
    let mut weights = vec![(-t).exp()];
    let mut cum = KahanSum::default();
    cum.add(weights[0]);
    while 1.0 - cum.value() >= defect_tol {
        let n = weights.len();
        if n > 5_000 {
            return Err(Error::Domain(
                "poisson truncation did not reach the tolerance by depth 5000".into(),
            ));
        }
        let w = weights[n - 1] * t / n as f64;
        weights.push(w);
        cum.add(w);
    }
    Ok((weights, (1.0 - cum.value()).max(0.0)))
}

pub fn poissonize(
    ctx: &mut GroupCtx,
    measure: &Measure,
    t: f64,
    defect_tol: f64,
    max_support: usize,
) -> Result<PoissonizedLaw> {
    let (weights, defect) = poisson_weights(t, defect_tol)?;
    let truncation = weights.len() - 1;
    let mut acc: HashMap<u32, KahanSum> = HashMap::new();
    let mut step = delta_identity();
    for (n, &w) in weights.iter().enumerate() {
        if n > 0 {
            step = convolve_step(ctx, &step, measure, 0.0, max_support).map_err(|e| match e {
                Error::Budget { reached, needed, .. } => Error::Budget {
                    stage: "poissonize truncation".into(),
                    reached,
                    needed,
                },
                other => other,
            })?;
        }
        for &(id, p) in &step.entries {
            acc.entry(id).or_default().add(w * p);
        }
    }
    let mut entries: Vec<(u32, f64)> = acc.into_iter().map(|(id, s)| (id, s.value())).collect();
    entries.sort_by_key(|(id, _)| *id);
    Ok(PoissonizedLaw {
        t,
        truncation,
        dist: Distribution {
            entries,
            step: truncation,
            pruned_mass: 0.0,
        },
        defect,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SymmetrizedDerivatives {
    pub dh: f64,
    pub dl: f64,
    pub dirichlet: f64,
    /// mu_t x mu mass sitting on edges that leave the truncated support
    pub boundary_mass: f64,
}

const DEFECT_CEILING: f64 = 1e-10;
const BOUNDARY_CEILING: f64 = 1e-8;

/// Evaluates the symmetrized derivative sums on the truncated law:
/// dH = 1/2 sum mu(g)(mu_t(xg)-mu_t(x))(log mu_t(xg)-log mu_t(x)),
/// dL = 1/2 sum mu(g)(|x|-|xg|)(mu_t(xg)-mu_t(x)),
/// dirichlet = 1/2 sum mu(g)(sqrt(mu_t(xg))-sqrt(mu_t(x)))^2.
///
/// Edges crossing the truncation boundary enter dL and dirichlet through
/// their zero-mass limits; for dH the limit diverges, so those edges are
/// dropped and the operation fails if they carry more than a negligible mass.
pub fn symmetrized_derivatives(
    ctx: &mut GroupCtx,
    measure: &Measure,
    law: &PoissonizedLaw,
) -> Result<SymmetrizedDerivatives> {
    if !measure.is_symmetric {
        return Err(Error::Unsupported(
            "the symmetrized derivative identities assume a symmetric measure".into(),
        ));
    }
    if law.defect >= DEFECT_CEILING {
        return Err(Error::Domain(format!(
            "truncation defect {:.3e} is too large for derivative sums",
            law.defect
        )));
    }
    if !(law.t > 0.0) {
        return Err(Error::Domain(
            "derivative sums need t > 0: at t = 0 the entropy slope diverges".into(),
        ));
    }
    let probs: HashMap<u32, f64> = law.dist.entries.iter().copied().collect();
    let mut dh = KahanSum::default();
    let mut dl = KahanSum::default();
    let mut dirichlet = KahanSum::default();
    let mut boundary = KahanSum::default();
    for &(x, p) in &law.dist.entries {
        let len_x = ctx.length(x);
        for &(g, q) in &measure.atoms {
            let z = ctx.compose_ids(x, g);
            let len_z = ctx.length(z);
            match probs.get(&z) {
                Some(&pz) => {
                    dh.add(q * (pz - p) * (pz.ln() - p.ln()));
                    dl.add(q * (len_x - len_z) * (pz - p));
                    let ds = pz.sqrt() - p.sqrt();
                    dirichlet.add(q * ds * ds);
                }
                None => {
                    // the reverse orientation of this edge is never enumerated,
                    // so its limit terms enter at double weight before halving
                    boundary.add(q * p);
                    dl.add(2.0 * q * (len_x - len_z) * (-p));
                    dirichlet.add(2.0 * q * p);
                }
            }
        }
    }
    if boundary.value() > BOUNDARY_CEILING {
        return Err(Error::Domain(format!(
            "support is not closed under walk steps within the truncation: \
             boundary mass {:.3e}",
            boundary.value()
        )));
    }
    Ok(SymmetrizedDerivatives {
        dh: 0.5 * dh.value(),
        dl: 0.5 * dl.value(),
        dirichlet: 0.5 * dirichlet.value(),
        boundary_mass: boundary.value(),
    })
}

/// Poissonized law of the uniform walk on the free group of rank d, stored by
/// word length: `shell_mass[k]` is the mu_t-mass of the sphere of radius k.
#[derive(Debug, Clone, Serialize)]
pub struct RadialPoisson {
    pub d: u32,
    pub t: f64,
    pub truncation: usize,
    pub shell_mass: Vec<f64>,
    pub defect: f64,
}

fn sphere_size(d: u32, k: usize) -> f64 {
    let m = 2.0 * d as f64;
    if k == 0 {
        1.0
    } else {
        m * (m - 1.0).powi(k as i32 - 1)
    }
}

/// Radial poissonization: the distance to the origin is a birth-death chain
/// that escapes with probability (2d-1)/2d away from 0 and 1 at 0.
pub fn poissonize_radial_free(d: u32, t: f64, defect_tol: f64) -> Result<RadialPoisson> {
    if d < 2 {
        return Err(Error::Domain("radial poissonization needs rank >= 2".into()));
    }
    let (weights, defect) = poisson_weights(t, defect_tol)?;
    let truncation = weights.len() - 1;
    let m = 2.0 * d as f64;
    let escape = (m - 1.0) / m;
    let back = 1.0 / m;
    let mut shell: Vec<KahanSum> = vec![KahanSum::default(); truncation + 1];
    let mut cur = vec![1.0f64];
    shell[0].add(weights[0]);
    for (n, &w) in weights.iter().enumerate().skip(1) {
        let mut next = vec![0.0f64; n + 1];
        for (k, &a) in cur.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            next[k + 1] += a * if k == 0 { 1.0 } else { escape };
            if k >= 1 {
                next[k - 1] += a * back;
            }
        }
        cur = next;
        for (k, &a) in cur.iter().enumerate() {
            if a != 0.0 {
                shell[k].add(w * a);
            }
        }
    }
    Ok(RadialPoisson {
        d,
        t,
        truncation,
        shell_mass: shell.into_iter().map(|s| s.value()).collect(),
        defect,
    })
}

impl RadialPoisson {
    pub fn return_prob(&self) -> f64 {
        self.shell_mass[0]
    }

    pub fn mass(&self) -> f64 {
        let mut s = KahanSum::default();
        for &m in &self.shell_mass {
            s.add(m);
        }
        s.value()
    }

    /// Per-element probability at radius k.
    pub fn prob_at_radius(&self, k: usize) -> f64 {
        if k >= self.shell_mass.len() {
            0.0
        } else {
            self.shell_mass[k] / sphere_size(self.d, k)
        }
    }

    pub fn entropy(&self) -> f64 {
        let mut h = KahanSum::default();
        for (k, &m) in self.shell_mass.iter().enumerate() {
            if m > 0.0 {
                h.add(-m * (m.ln() - sphere_size(self.d, k).ln()));
            }
        }
        h.value()
    }

    pub fn mean_length(&self) -> f64 {
        let mut l = KahanSum::default();
        for (k, &m) in self.shell_mass.iter().enumerate() {
            l.add(k as f64 * m);
        }
        l.value()
    }
}

/// The symmetrized derivative sums collapsed over spheres: the sphere of
/// radius k+1 carries s_{k+1} edges toward radius k, each of measure 1/2d.
pub fn radial_derivatives(law: &RadialPoisson) -> Result<SymmetrizedDerivatives> {
    if law.defect >= DEFECT_CEILING {
        return Err(Error::Domain(format!(
            "truncation defect {:.3e} is too large for derivative sums",
            law.defect
        )));
    }
    if !(law.t > 0.0) {
        return Err(Error::Domain(
            "derivative sums need t > 0: at t = 0 the entropy slope diverges".into(),
        ));
    }
    let n = law.truncation;
    let m = 2.0 * law.d as f64;
    let mut dh = KahanSum::default();
    let mut dl = KahanSum::default();
    let mut dirichlet = KahanSum::default();
    let p = |k: usize| law.prob_at_radius(k);
    for k in 0..=n {
        let edges = sphere_size(law.d, k + 1) / m;
        let (lo, hi) = (p(k), p(k + 1));
        dl.add(edges * (lo - hi));
        let ds = hi.sqrt() - lo.sqrt();
        dirichlet.add(edges * ds * ds);
        if k < n {
            dh.add(edges * (hi - lo) * (hi.ln() - lo.ln()));
        }
    }
    let boundary = law.shell_mass[n] * (m - 1.0) / m;
    if boundary > BOUNDARY_CEILING {
        return Err(Error::Domain(format!(
            "support is not closed under walk steps within the truncation: \
             boundary mass {boundary:.3e}",
        )));
    }
    Ok(SymmetrizedDerivatives {
        dh: dh.value(),
        dl: dl.value(),
        dirichlet: dirichlet.value(),
        boundary_mass: boundary,
    })
}
