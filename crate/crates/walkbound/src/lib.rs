//! Asymptotic invariants of symmetric random walks on finitely generated groups.
//!
//! The library computes or estimates four quantities for a random walk driven by a
//! finitely supported measure `mu` on a group with a decidable normal form:
//!
//! * entropy rate `h = lim H(mu^{*n})/n`,
//! * drift `l = lim E|X_n|/n` in the (possibly weighted) word metric,
//! * spectral radius `rho = limsup mu^{*n}(e)^{1/n}`,
//! * volume growth `v = lim (1/n) log #B(e,n)`,
//!
//! and verifies the sharp inequalities that relate them, including the classical
//! fundamental inequality `h <= l v`, the Avez and Ledrappier bounds, Chebyshev
//! transition-probability bounds, and the equality-case rigidity of the boundary
//! cocycle (two-valued Radon-Nikodym cocycle).
//!
//! Groups are described declaratively ([`group::GroupSpec`]): free groups, cyclic
//! groups, free products of cyclic groups, free abelian groups, and direct products.
//! Exact n-step laws are computed by sparse convolution over interned normal forms;
//! Monte-Carlo sampling, poissonization, first-passage solvers, and a config-driven
//! CLI pipeline sit on top.

pub mod boundary;
pub mod bounds;
pub mod census;
pub mod chebyshev;
pub mod config;
pub mod dist;
pub mod group;
pub mod interner;
pub mod measure;
pub mod pipeline;
pub mod poisson;
pub mod sample;
pub mod series;
pub mod special;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain violation: {0}")]
    Domain(String),
    #[error("malformed element: {0}")]
    BadElement(String),
    #[error("invalid measure: {0}")]
    BadMeasure(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("budget exceeded in {stage}: reached {reached}, needed {needed}")]
    Budget {
        stage: String,
        reached: usize,
        needed: usize,
    },
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;
