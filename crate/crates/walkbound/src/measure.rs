//! Finitely supported probability measures on group elements.

use serde::Serialize;

use crate::group::Element;
use crate::interner::GroupCtx;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct Measure {
    /// Sorted by element id; probabilities exactly normalized.
    pub atoms: Vec<(u32, f64)>,
    /// mu(g) = mu(g^-1) with exactly equal probabilities.
    pub is_symmetric: bool,
    /// Largest word length in the support (the Carne radius k).
    pub support_radius: f64,
}

/// Validate and normalize a measure. Mass must be within 1e-9 of 1 (then divided
/// out exactly); probabilities must be positive; duplicate atoms are rejected.
/// Asymmetric measures are accepted but flagged.
pub fn build_measure(ctx: &mut GroupCtx, pairs: &[(Element, f64)]) -> Result<Measure> {
    if pairs.is_empty() {
        return Err(Error::BadMeasure("empty support".into()));
    }
    let mut atoms: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
    for (elem, p) in pairs {
        if !(p.is_finite() && *p > 0.0) {
            return Err(Error::BadMeasure(format!("probability {p} is not positive and finite")));
        }
        let id = ctx.intern_checked(elem.clone())?;
        if atoms.iter().any(|(q, _)| *q == id) {
            return Err(Error::BadMeasure(format!(
                "duplicate support element {}",
                ctx.display(id)
            )));
        }
        atoms.push((id, *p));
    }
    let mass: f64 = atoms.iter().map(|(_, p)| p).sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::BadMeasure(format!("total mass {mass} differs from 1 beyond 1e-9")));
    }
    if mass != 1.0 {
        for (_, p) in atoms.iter_mut() {
            *p /= mass;
        }
    }
    atoms.sort_by_key(|(id, _)| *id);
    let mut is_symmetric = true;
    for i in 0..atoms.len() {
        let (id, p) = atoms[i];
        let inv = ctx.invert_id(id);
        match atoms.binary_search_by_key(&inv, |(q, _)| *q) {
            Ok(j) if atoms[j].1 == p => {}
            _ => {
                is_symmetric = false;
                break;
            }
        }
    }
    let support_radius = atoms
        .iter()
        .map(|(id, _)| ctx.length(*id))
        .fold(0.0f64, f64::max);
    Ok(Measure {
        atoms,
        is_symmetric,
        support_radius,
    })
}

/// Uniform measure on the symmetric generating set.
pub fn uniform_on_generators(ctx: &mut GroupCtx) -> Result<Measure> {
    let gens = ctx.spec.generators();
    let p = 1.0 / gens.len() as f64;
    let pairs: Vec<(Element, f64)> = gens.into_iter().map(|(_, g)| (g, p)).collect();
    build_measure(ctx, &pairs)
}

/// M_p(mu) = (sum |g|^p mu(g))^{1/p}, p >= 1.
pub fn moment(ctx: &GroupCtx, measure: &Measure, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("moment index must be >= 1, got {p}")));
    }
    let sum: f64 = measure
        .atoms
        .iter()
        .map(|(id, prob)| ctx.length(*id).powf(p) * prob)
        .sum();
    Ok(sum.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{parse_element, GroupSpec};

    fn atoms(spec: &GroupSpec, list: &[(&str, f64)]) -> Vec<(Element, f64)> {
        list.iter()
            .map(|(s, p)| (parse_element(spec, s).unwrap(), *p))
            .collect()
    }

    #[test]
    fn uniform_free_group_measure() {
        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let m = uniform_on_generators(&mut ctx).unwrap();
        assert_eq!(m.atoms.len(), 4);
        assert!(m.is_symmetric);
        assert_eq!(m.support_radius, 1.0);
        for p in [1.0, 1.5, 2.0, 4.0] {
            assert!((moment(&ctx, &m, p).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn asymmetric_z_is_flagged() {
        let spec = GroupSpec::free_abelian(1);
        let mut ctx = GroupCtx::new(spec).unwrap();
        let pairs = atoms(&ctx.spec, &[("(-1)", 0.3), ("(1)", 0.7)]);
        let m = build_measure(&mut ctx, &pairs).unwrap();
        assert!(!m.is_symmetric);
    }

    #[test]
    fn modular_measure_symmetry() {
        let mut ctx = GroupCtx::new(GroupSpec::modular()).unwrap();
        let pairs = atoms(&ctx.spec, &[("a", 0.4), ("b", 0.3), ("b^2", 0.3)]);
        let m = build_measure(&mut ctx, &pairs).unwrap();
        assert!(m.is_symmetric);

        let mut ctx = GroupCtx::new(GroupSpec::modular()).unwrap();
        let pairs = atoms(&ctx.spec, &[("a", 0.4), ("b", 0.35), ("b^2", 0.25)]);
        let m = build_measure(&mut ctx, &pairs).unwrap();
        assert!(!m.is_symmetric);
    }

    #[test]
    fn mass_validation() {
        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let pairs = atoms(&ctx.spec, &[("a", 0.5), ("a^-1", 0.499)]);
        assert!(build_measure(&mut ctx, &pairs).is_err());

        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let eps = 2e-10;
        let pairs = atoms(&ctx.spec, &[("a", 0.5 + eps), ("a^-1", 0.5)]);
        let m = build_measure(&mut ctx, &pairs).unwrap();
        let mass: f64 = m.atoms.iter().map(|(_, p)| p).sum();
        assert!((mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_atoms() {
        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let pairs = atoms(&ctx.spec, &[("a", 0.5), ("a", 0.5)]);
        assert!(build_measure(&mut ctx, &pairs).is_err());

        let mut ctx = GroupCtx::new(GroupSpec::free(2)).unwrap();
        let pairs = atoms(&ctx.spec, &[("a", 1.0), ("b", -0.0)]);
        assert!(build_measure(&mut ctx, &pairs).is_err());
    }

    #[test]
    fn weighted_moments() {
        let spec = GroupSpec::free_weighted(2, vec![1.0, 0.5]);
        let mut ctx = GroupCtx::new(spec).unwrap();
        let m = uniform_on_generators(&mut ctx).unwrap();
        assert!((moment(&ctx, &m, 2.0).unwrap() - 0.625f64.sqrt()).abs() < 1e-15);
        assert!((moment(&ctx, &m, 1.0).unwrap() - 0.75).abs() < 1e-15);

        let z = GroupSpec::free_abelian(1);
        let mut ctx = GroupCtx::new(z).unwrap();
        let pairs = atoms(&ctx.spec, &[("(-2)", 0.5), ("(2)", 0.5)]);
        let m = build_measure(&mut ctx, &pairs).unwrap();
        assert_eq!(moment(&ctx, &m, 1.0).unwrap(), 2.0);
        assert_eq!(moment(&ctx, &m, 2.0).unwrap(), 2.0);
    }
}
