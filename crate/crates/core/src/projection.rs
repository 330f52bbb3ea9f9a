//! Random sinusoidal projections of copula samples.
//!
//! For `k` random directions `w_i ~ N(0, s I)` and phases `b_i ~ U[-pi, pi]`,
//! every row `u` of a copula sample maps to the `2k` features
//! `cos(w_i . u + b_i), sin(w_i . u + b_i)`, stored pairwise: column `2i` is
//! the cosine and column `2i + 1` the sine of direction `i`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::copula::CopulaSample;
use crate::error::{RdcError, Result};
use crate::seed;

/// How the per-direction offset is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasMode {
    /// Phases drawn uniformly from `[-pi, pi]`.
    #[default]
    Uniform,
    /// The copula is augmented with a constant-one column whose weight is
    /// drawn from the same normal law as the other weights, with no phase.
    AppendedNormal,
}

impl BiasMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            BiasMode::Uniform => "uniform",
            BiasMode::AppendedNormal => "appended-normal",
        }
    }
}

impl std::str::FromStr for BiasMode {
    type Err = RdcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "normative" => Ok(BiasMode::Uniform),
            "appended-normal" => Ok(BiasMode::AppendedNormal),
            other => Err(RdcError::InvalidInput(format!(
                "unknown bias mode `{other}` (expected uniform or appended-normal)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionParams {
    /// Number of random directions.
    pub k: usize,
    /// Variance of each weight entry.
    pub s: f64,
    pub seed: u64,
    pub bias_mode: BiasMode,
}

impl ProjectionParams {
    pub fn new(k: usize, s: f64, seed: u64) -> Result<Self> {
        let p = Self { k, s, seed, bias_mode: BiasMode::Uniform };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bias_mode(mut self, mode: BiasMode) -> Self {
        self.bias_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(RdcError::InvalidInput("number of random directions k must be >= 1".into()));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(RdcError::InvalidInput(format!("scale s must be positive and finite, got {}", self.s)));
        }
        Ok(())
    }
}

/// A drawn set of directions: `weights` is `d x k`, `bias` has length `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub weights: DMatrix<f64>,
    pub bias: Vec<f64>,
}

/// `n x 2k` matrix of paired cosine/sine features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    /// Number of random directions, half the column count.
    pub fn k(&self) -> usize {
        self.data.ncols() / 2
    }
}

/// Draws the weights and offsets for a `d`-dimensional copula.
///
/// Normals are drawn direction by direction (all `d` entries of direction 1,
/// then direction 2, ...) and scaled by `sqrt(s)`; the `k` uniform phases are
/// drawn afterwards. In [`BiasMode::AppendedNormal`] each direction draws
/// `d + 1` normals, the last one acting as the offset, and no phases are drawn.
pub fn draw_projection(d: usize, p: &ProjectionParams) -> Result<Projection> {
    p.validate()?;
    if d == 0 {
        return Err(RdcError::InvalidInput("input dimension must be >= 1".into()));
    }
    let mut rng = seed::rng(p.seed);
    let scale = p.s.sqrt();
    let mut weights = DMatrix::zeros(d, p.k);
    let mut bias = vec![0.0; p.k];
    match p.bias_mode {
        BiasMode::Uniform => {
            for i in 0..p.k {
                for j in 0..d {
                    let z: f64 = rng.sample(StandardNormal);
                    weights[(j, i)] = z * scale;
                }
            }
            for b in bias.iter_mut() {
                *b = rng.random_range(-PI..=PI);
            }
        }
        BiasMode::AppendedNormal => {
            for i in 0..p.k {
                for j in 0..=d {
                    let z: f64 = rng.sample(StandardNormal);
                    if j < d {
                        weights[(j, i)] = z * scale;
                    } else {
                        bias[i] = z * scale;
                    }
                }
            }
        }
    }
    Ok(Projection { weights, bias })
}

impl Projection {
    pub fn from_parts(weights: DMatrix<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.ncols() != bias.len() {
            return Err(RdcError::DimensionMismatch { expected: weights.ncols(), got: bias.len() });
        }
        Ok(Self { weights, bias })
    }

    pub fn k(&self) -> usize {
        self.bias.len()
    }

    pub fn d(&self) -> usize {
        self.weights.nrows()
    }

    /// Evaluates the features of every row of `u`.
    pub fn apply(&self, u: &CopulaSample) -> Result<FeatureMatrix> {
        self.apply_matrix(u.matrix())
    }

    pub(crate) fn apply_matrix(&self, u: &DMatrix<f64>) -> Result<FeatureMatrix> {
        if u.ncols() != self.d() {
            return Err(RdcError::DimensionMismatch { expected: self.d(), got: u.ncols() });
        }
        let n = u.nrows();
        let angles = u * &self.weights;
        let cols: Vec<(Vec<f64>, Vec<f64>)> = (0..self.k())
            .into_par_iter()
            .map(|i| {
                let b = self.bias[i];
                angles
                    .column(i)
                    .iter()
                    .map(|&a| {
                        let (s, c) = (a + b).sin_cos();
                        (c, s)
                    })
                    .unzip()
            })
            .collect();
        let mut data = DMatrix::zeros(n, 2 * self.k());
        for (i, (c, s)) in cols.iter().enumerate() {
            data.column_mut(2 * i).copy_from_slice(c);
            data.column_mut(2 * i + 1).copy_from_slice(s);
        }
        Ok(FeatureMatrix { data })
    }
}

/// Draws a projection for `u` and applies it.
pub fn project(u: &CopulaSample, p: &ProjectionParams) -> Result<FeatureMatrix> {
    draw_projection(u.d(), p)?.apply(u)
}
