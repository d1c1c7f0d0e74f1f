//! Run configuration: a TOML document (JSON accepted as an alternative
//! encoding) describing a group, a step measure, stage toggles, budgets,
//! tolerances, and externally cited constants.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::group::{
    parse_element, CyclicFactor, Element, GroupSpec, Order, ProductConvention,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    #[serde(default)]
    pub group: Option<GroupConfig>,
    #[serde(default)]
    pub measure: Option<MeasureConfig>,
    #[serde(default)]
    pub stages: StagesConfig,
    #[serde(default)]
    pub budgets: BudgetsConfig,
    #[serde(default)]
    pub tolerances: TolerancesConfig,
    #[serde(default)]
    pub external: ExternalConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub kind: String,
    #[serde(default)]
    pub rank: Option<usize>,
    /// cyclic order; omit for the infinite cyclic group
    #[serde(default)]
    pub order: Option<u32>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub factors: Option<Vec<FactorConfig>>,
    #[serde(default)]
    pub components: Option<Vec<GroupConfig>>,
    #[serde(default)]
    pub convention: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorConfig {
    /// omit for an infinite cyclic factor
    #[serde(default)]
    pub order: Option<u32>,
    pub label: String,
    #[serde(default)]
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    #[serde(default)]
    pub uniform: bool,
    /// element string -> probability; used when uniform = false
    #[serde(default)]
    pub atoms: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StagesConfig {
    pub census: bool,
    pub exact_walk: bool,
    pub monte_carlo: bool,
    pub bounds: bool,
    pub chebyshev: bool,
    pub boundary: bool,
}

impl Default for StagesConfig {
    fn default() -> Self {
        StagesConfig {
            census: true,
            exact_walk: true,
            monte_carlo: true,
            bounds: true,
            chebyshev: true,
            boundary: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetsConfig {
    pub n_max: usize,
    pub census_radius: usize,
    pub max_support: usize,
    /// memory ceiling for interned state, in bytes
    pub mem_bytes: u64,
    pub mc_samples: usize,
    pub mc_horizon: usize,
    pub seed: Option<u64>,
}

impl Default for BudgetsConfig {
    fn default() -> Self {
        BudgetsConfig {
            n_max: 12,
            census_radius: 12,
            max_support: 2_000_000,
            mem_bytes: 2 << 30,
            mc_samples: 20_000,
            mc_horizon: 200,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolerancesConfig {
    pub equality_tol: f64,
    pub prune_eps: f64,
    pub detector_tol: f64,
}

impl Default for TolerancesConfig {
    fn default() -> Self {
        TolerancesConfig {
            equality_tol: 1e-9,
            prune_eps: 0.0,
            detector_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConfig {
    #[serde(default)]
    pub constants: Vec<ExternalConstant>,
}

/// A published numeric input. `err` is a half-width when the source gives a
/// bracket; the citation string is mandatory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalConstant {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub err: f64,
    pub citation: String,
}

pub fn from_toml_str(s: &str) -> Result<RunConfig> {
    toml::from_str(s).map_err(|e| Error::Config(format!("config parse error: {e}")))
}

pub fn from_json_str(s: &str) -> Result<RunConfig> {
    serde_json::from_str(s).map_err(|e| Error::Config(format!("config parse error: {e}")))
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json_str(&text),
        _ => from_toml_str(&text),
    }
}

impl GroupConfig {
    pub fn to_spec(&self) -> Result<GroupSpec> {
        let field = |what: &str| Error::Config(format!("group.{what} required for kind={}", self.kind));
        let spec = match self.kind.as_str() {
            "free" => {
                let rank = self.rank.ok_or_else(|| field("rank"))?;
                let labels = self
                    .labels
                    .clone()
                    .unwrap_or_else(|| crate::group::default_labels(rank));
                let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; rank]);
                GroupSpec::Free { rank, labels, weights }
            }
            "cyclic" => GroupSpec::Cyclic {
                order: match self.order {
                    Some(0) | None => Order::Infinite,
                    Some(m) => Order::Finite(m),
                },
                label: self.label.clone().unwrap_or_else(|| "t".into()),
            },
            "free_product" => {
                let factors = self.factors.as_ref().ok_or_else(|| field("factors"))?;
                GroupSpec::FreeProduct {
                    factors: factors
                        .iter()
                        .map(|f| CyclicFactor {
                            order: match f.order {
                                Some(0) | None => Order::Infinite,
                                Some(m) => Order::Finite(m),
                            },
                            label: f.label.clone(),
                            weight: f.weight.unwrap_or(1.0),
                        })
                        .collect(),
                }
            }
            "free_abelian" => {
                let rank = self.rank.ok_or_else(|| field("rank"))?;
                match &self.labels {
                    Some(labels) => GroupSpec::FreeAbelian {
                        rank,
                        labels: labels.clone(),
                    },
                    None => GroupSpec::free_abelian(rank),
                }
            }
            "direct_product" => {
                let comps = self.components.as_ref().ok_or_else(|| field("components"))?;
                let convention = match self.convention.as_deref() {
                    Some("synchronized") => ProductConvention::Synchronized,
                    Some("union") | None => ProductConvention::Union,
                    Some(other) => {
                        return Err(Error::Config(format!(
                            "group.convention must be union or synchronized, got {other}"
                        )))
                    }
                };
                GroupSpec::DirectProduct {
                    components: comps
                        .iter()
                        .map(|c| c.to_spec())
                        .collect::<Result<Vec<_>>>()?,
                    convention,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "group.kind must be one of free, cyclic, free_product, free_abelian, \
                     direct_product; got {other}"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl MeasureConfig {
    /// Element/probability pairs in deterministic (lexicographic) order.
    pub fn to_pairs(&self, spec: &GroupSpec) -> Result<Vec<(Element, f64)>> {
        if self.uniform {
            if !self.atoms.is_empty() {
                return Err(Error::Config(
                    "measure.uniform and measure.atoms are mutually exclusive".into(),
                ));
            }
            let gens = spec.generators();
            let p = 1.0 / gens.len() as f64;
            return Ok(gens.into_iter().map(|(_, g)| (g, p)).collect());
        }
        if self.atoms.is_empty() {
            return Err(Error::Config(
                "measure needs uniform = true or a nonempty atoms table".into(),
            ));
        }
        self.atoms
            .iter()
            .map(|(s, &p)| {
                if !p.is_finite() {
                    return Err(Error::Config(format!("measure.atoms[{s}] is not finite")));
                }
                Ok((parse_element(spec, s)?, p))
            })
            .collect()
    }
}

impl RunConfig {
    /// All schema and semantic problems, without running any stage.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.is_empty() {
            out.push("name must not be empty".into());
        }
        let walk_stages = [
            ("census", self.stages.census),
            ("exact_walk", self.stages.exact_walk),
            ("monte_carlo", self.stages.monte_carlo),
            ("chebyshev", self.stages.chebyshev),
            ("boundary", self.stages.boundary),
        ];
        let spec = match &self.group {
            Some(g) => match g.to_spec() {
                Ok(spec) => Some(spec),
                Err(e) => {
                    out.push(e.to_string());
                    None
                }
            },
            None => {
                for (name, on) in walk_stages {
                    if on {
                        out.push(format!(
                            "stages.{name} requires a group block (constants-only configs \
                             may enable bounds only)"
                        ));
                    }
                }
                None
            }
        };
        match (&self.group, &self.measure) {
            (Some(_), None) => out.push("measure block required when a group is given".into()),
            (None, Some(_)) => out.push("measure block requires a group block".into()),
            _ => {}
        }
        if let (Some(spec), Some(m)) = (&spec, &self.measure) {
            match m.to_pairs(spec) {
                Ok(pairs) => {
                    let mut ctx = crate::interner::GroupCtx::new(spec.clone()).unwrap();
                    if let Err(e) = crate::measure::build_measure(&mut ctx, &pairs) {
                        out.push(e.to_string());
                    }
                }
                Err(e) => out.push(e.to_string()),
            }
        }
        if self.stages.exact_walk && self.budgets.n_max < 3 {
            out.push("budgets.n_max must be >= 3 for the exact-walk stage".into());
        }
        if self.budgets.max_support == 0 {
            out.push("budgets.max_support must be positive".into());
        }
        if self.budgets.mem_bytes == 0 {
            out.push("budgets.mem_bytes must be positive".into());
        }
        if self.stages.monte_carlo {
            if self.budgets.mc_samples == 0 {
                out.push("budgets.mc_samples must be positive".into());
            }
            if self.budgets.mc_horizon == 0 {
                out.push("budgets.mc_horizon must be positive".into());
            }
        }
        let needs_seed = self.stages.monte_carlo
            || (self.stages.boundary
                && spec.as_ref().map(|s| !s.cayley_graph_is_tree()).unwrap_or(false));
        if needs_seed && self.budgets.seed.is_none() {
            out.push("budgets.seed required when Monte Carlo stages are enabled".into());
        }
        for t in [
            ("equality_tol", self.tolerances.equality_tol),
            ("detector_tol", self.tolerances.detector_tol),
        ] {
            if !(t.1 > 0.0) || !t.1.is_finite() {
                out.push(format!("tolerances.{} must be positive and finite", t.0));
            }
        }
        if !(self.tolerances.prune_eps >= 0.0) || !self.tolerances.prune_eps.is_finite() {
            out.push("tolerances.prune_eps must be >= 0 and finite".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.external.constants {
            if c.citation.trim().is_empty() {
                out.push(format!("external constant {} is missing its citation", c.name));
            }
            if !c.value.is_finite() || !c.err.is_finite() || c.err < 0.0 {
                out.push(format!("external constant {} has a bad value or err", c.name));
            }
            if !["h", "ell", "rho", "rho_lower", "rho_upper", "v", "m2"].contains(&c.name.as_str())
            {
                out.push(format!(
                    "external constant name {} not recognized (expected h, ell, rho, \
                     rho_lower, rho_upper, v, or m2)",
                    c.name
                ));
            }
            if !seen.insert(c.name.clone()) {
                out.push(format!("external constant {} given twice", c.name));
            }
        }
        out
    }

    pub fn validated(&self) -> Result<()> {
        let problems = self.diagnostics();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn constant(&self, name: &str) -> Option<&ExternalConstant> {
        self.external.constants.iter().find(|c| c.name == name)
    }

    /// Support-size cap implied by the memory budget, assuming ~160 bytes of
    /// interned state per element, combined with the explicit cap.
    pub fn effective_max_support(&self) -> usize {
        let by_mem = (self.budgets.mem_bytes / 160).max(1) as usize;
        self.budgets.max_support.min(by_mem)
    }
}
