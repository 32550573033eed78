//! Property testers for additivity and linearity of functions `f: Rⁿ → R`
//! in the distribution-free model, plus a simulation of the matching
//! sample-based lower bound.
//!
//! The testers need query access to `f` (an [`Oracle`]), samples from the
//! standard Gaussian, and samples from an unknown distribution `D`
//! ([`SampleDistribution`]). They have one-sided error and make
//! `O((1/ε) log(1/ε))` queries, independent of the dimension.

pub mod distro;
pub mod error;
pub mod gauss;
pub mod harness;
pub mod linalg;
pub mod lower_bound;
pub mod normal;
pub mod oracle;
pub mod rng;
pub mod stats;
pub mod tester;

pub use distro::{DistributionSpec, SampleDistribution};
pub use error::{Error, Result};
pub use gauss::{
    empirical_tv, kl_gaussians, pinsker_tv_bound, sample_gaussian, shared_cov_tv_bound,
    CovarianceMatrix, GaussianDist, MeanVector, Point,
};
pub use lower_bound::{
    build_instance, run_distinguish_game, tv_bound, GameReport, LowerBoundConfig,
};
pub use oracle::{
    estimate_distance, CorruptionRegion, EqPolicy, FunctionOracle, OddPart, Oracle, OracleSpec,
};
pub use rng::SeedState;
pub use tester::{
    force_negativity, query_g, run_df_additivity, run_df_linearity, run_gaussian_additivity,
    scaling_index, test_additivity, Algorithm, ForceNegativity, QueryG, RejectSite, TesterConfig,
    Verdict,
};

/// Crate version, echoed into reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
