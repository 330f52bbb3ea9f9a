//! Randomized Dependence Coefficient.
//!
//! A non-linear dependence measure between multivariate samples: empirical
//! copula transform of each side, random sine/cosine projections of the
//! copulas, then the largest canonical correlation between the two feature
//! sets. The crate also carries independence tests, classical baseline
//! measures and the experiment drivers behind the `rdc` binary.

pub mod baselines;
pub mod cca;
pub mod cli;
pub mod coefficient;
pub mod copula;
pub mod error;
pub mod harness;
pub mod io;
pub mod projection;
pub mod sample;
pub mod seed;
pub mod synth;

pub use cca::{canonical_correlations, CcaResult};
pub use coefficient::{
    bartlett_test, bartlett_test_dims, median_heuristic, permutation_test, rdc, rdc_bartlett, IndependenceTest, RdcParams, RdcResult, Scale,
    TestMethod,
};
pub use copula::{copula_transform, empirical_cdf, CopulaSample};
pub use error::{RdcError, Result, Side};
pub use projection::{draw_projection, project, BiasMode, FeatureMatrix, Projection, ProjectionParams};
pub use sample::Sample;
