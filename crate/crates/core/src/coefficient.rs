//! The randomized dependence coefficient and independence tests built on it.
//!
//! `rdc(x, y)` is the largest canonical correlation between random
//! sinusoidal projections of the empirical copulas of `x` and `y`. The two
//! projections draw from independent generators derived from one seed.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::cca::{self, Whitened, DEFAULT_RIDGE};
use crate::copula::{copula_transform, CopulaSample};
use crate::error::{RdcError, Result, Side};
use crate::projection::{draw_projection, BiasMode, ProjectionParams};
use crate::sample::Sample;
use crate::seed;

/// Default number of random directions per side.
pub const DEFAULT_K: usize = 10;

/// Rows used by the median heuristic before subsampling kicks in.
pub const DEFAULT_SCALE_CAP: usize = 1000;

/// Seed streams, relative to the coefficient seed.
const SCALE_X_STREAM: u64 = 3;
const SCALE_Y_STREAM: u64 = 4;

/// Weight variance for one side's projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scale {
    /// `2 / m` for `m` the median of pairwise squared distances between
    /// copula rows.
    Auto,
    Fixed(f64),
}

impl Scale {
    pub fn value(&self) -> Option<f64> {
        match self {
            Scale::Auto => None,
            Scale::Fixed(s) => Some(*s),
        }
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scale::Auto => f.write_str("auto"),
            Scale::Fixed(s) => write!(f, "{s}"),
        }
    }
}

impl std::str::FromStr for Scale {
    type Err = RdcError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Scale::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Scale::Fixed(v)),
            _ => Err(RdcError::InvalidInput(format!("scale must be `auto` or a positive number, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdcParams {
    pub k: usize,
    pub s_x: Scale,
    pub s_y: Scale,
    pub seed: u64,
    /// Relative ridge for the canonical correlation step.
    pub ridge: f64,
    pub bias_mode: BiasMode,
    /// Maximum rows fed to the median heuristic.
    pub scale_cap: usize,
}

impl Default for RdcParams {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            s_x: Scale::Auto,
            s_y: Scale::Auto,
            seed: 0,
            ridge: DEFAULT_RIDGE,
            bias_mode: BiasMode::Uniform,
            scale_cap: DEFAULT_SCALE_CAP,
        }
    }
}

impl RdcParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_scales(mut self, s_x: Scale, s_y: Scale) -> Self {
        self.s_x = s_x;
        self.s_y = s_y;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(RdcError::InvalidInput("k must be >= 1".into()));
        }
        for s in [self.s_x, self.s_y] {
            if let Scale::Fixed(v) = s {
                if !(v.is_finite() && v > 0.0) {
                    return Err(RdcError::InvalidInput(format!("explicit scale must be positive, got {v}")));
                }
            }
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return Err(RdcError::InvalidInput(format!("ridge must be >= 0, got {}", self.ridge)));
        }
        if self.scale_cap < 2 {
            return Err(RdcError::InvalidInput("scale subsample cap must be >= 2".into()));
        }
        Ok(())
    }

    /// Seeds used for the x-side and y-side projections.
    pub fn projection_seeds(&self) -> (u64, u64) {
        (seed::derive(self.seed, seed::X_STREAM), seed::derive(self.seed, seed::Y_STREAM))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RdcResult {
    pub coefficient: f64,
    /// All canonical correlations, descending.
    pub correlations: Vec<f64>,
    /// Parameters with automatic scales resolved to their values.
    pub params_used: RdcParams,
    pub n: usize,
    /// Feature directions per side not dominated by the ridge.
    pub effective_ranks: (usize, usize),
}

/// Median of squared Euclidean distances over all pairs of (at most `cap`)
/// rows of `u`. Rows are subsampled uniformly without replacement when
/// `n > cap`.
pub fn median_heuristic(u: &CopulaSample, cap: usize, seed: u64) -> Result<f64> {
    median_sq_distance(u.matrix(), cap, seed)
}

/// [`median_heuristic`] on an arbitrary `n x d` matrix of rows.
pub fn median_sq_distance(m: &DMatrix<f64>, cap: usize, seed: u64) -> Result<f64> {
    let n = m.nrows();
    if n < 2 {
        return Err(RdcError::InvalidInput("median heuristic needs at least 2 rows".into()));
    }
    if cap < 2 {
        return Err(RdcError::InvalidInput("median heuristic cap must be >= 2".into()));
    }
    let rows: Vec<usize> = if n <= cap {
        (0..n).collect()
    } else {
        let mut rng = seed::rng(seed);
        let mut picked = index::sample(&mut rng, n, cap).into_vec();
        picked.sort_unstable();
        picked
    };
    let d = m.ncols();
    let points: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| (0..d).map(|j| m[(r, j)]).collect())
        .collect();

    let mut dists = Vec::with_capacity(points.len() * (points.len() - 1) / 2);
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d2: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            dists.push(d2);
        }
    }
    let median = median_in_place(&mut dists);
    if median > 0.0 {
        Ok(median)
    } else if dists.iter().all(|&v| v == 0.0) {
        Err(RdcError::Degenerate("all subsampled rows are identical".into()))
    } else {
        // More than half the pairs coincide; fall back to the smallest
        // positive distance so the scale stays usable.
        Ok(dists.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min))
    }
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let len = v.len();
    let mid = len / 2;
    let (lower, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if len % 2 == 1 {
        upper
    } else {
        let lower_max = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower_max + upper)
    }
}

/// Features of both sides plus the parameters that produced them.
pub(crate) struct Prepared {
    pub fx: DMatrix<f64>,
    pub fy: DMatrix<f64>,
    pub params: RdcParams,
}

/// Weight variance whose features approximate the Gaussian kernel
/// `exp(-|u - u'|^2 / m)` for a median squared distance `m`.
pub fn auto_variance(m: f64) -> f64 {
    2.0 / m
}

fn resolve_scale(u: &CopulaSample, scale: Scale, cap: usize, seed: u64, side: Side) -> Result<f64> {
    match scale {
        Scale::Fixed(s) => Ok(s),
        Scale::Auto => median_heuristic(u, cap, seed).map(auto_variance).map_err(|e| match e {
            RdcError::Degenerate(_) => RdcError::DegenerateScale(side),
            other => other,
        }),
    }
}

pub(crate) fn prepare(x: &Sample, y: &Sample, p: &RdcParams) -> Result<Prepared> {
    p.validate()?;
    if x.n() != y.n() {
        return Err(RdcError::SizeMismatch { x: x.n(), y: y.n() });
    }
    let ux = copula_transform(x);
    let uy = copula_transform(y);
    let s_x = resolve_scale(&ux, p.s_x, p.scale_cap, seed::derive(p.seed, SCALE_X_STREAM), Side::X)?;
    let s_y = resolve_scale(&uy, p.s_y, p.scale_cap, seed::derive(p.seed, SCALE_Y_STREAM), Side::Y)?;
    let (seed_x, seed_y) = p.projection_seeds();

    let px = ProjectionParams { k: p.k, s: s_x, seed: seed_x, bias_mode: p.bias_mode };
    let py = ProjectionParams { k: p.k, s: s_y, seed: seed_y, bias_mode: p.bias_mode };
    let fx = draw_projection(ux.d(), &px)?.apply(&ux)?.into_matrix();
    let fy = draw_projection(uy.d(), &py)?.apply(&uy)?.into_matrix();

    let params = RdcParams { s_x: Scale::Fixed(s_x), s_y: Scale::Fixed(s_y), ..*p };
    Ok(Prepared { fx, fy, params })
}

/// Randomized dependence coefficient between the rows of `x` and `y`.
pub fn rdc(x: &Sample, y: &Sample, p: &RdcParams) -> Result<RdcResult> {
    let prepared = prepare(x, y, p)?;
    let n = x.n();
    let res = cca::canonical_correlations_owned(prepared.fx, prepared.fy, p.ridge)?;
    Ok(RdcResult {
        coefficient: res.largest(),
        correlations: res.correlations,
        params_used: prepared.params,
        n,
        effective_ranks: res.effective_ranks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TestMethod {
    Bartlett,
    Permutation,
}

impl TestMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            TestMethod::Bartlett => "bartlett",
            TestMethod::Permutation => "permutation",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceTest {
    pub statistic: f64,
    /// Chi-square degrees of freedom (Bartlett) or number of permutations.
    pub dof: usize,
    pub p_value: f64,
    pub method: TestMethod,
    /// Number of canonical correlations entering the statistic.
    pub correlations_used: usize,
    /// Set when a unit correlation made the statistic infinite.
    pub degenerate: bool,
}

impl IndependenceTest {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Bartlett's chi-square approximation for the hypothesis that all canonical
/// correlations between two `k`-dimensional feature sets vanish:
/// `((2k + 3)/2 - n) * ln prod(1 - rho_i^2)` against `chi^2` with `k^2`
/// degrees of freedom. The `k` largest entries of `correlations` are used.
pub fn bartlett_test(correlations: &[f64], k: usize, n: usize) -> Result<IndependenceTest> {
    bartlett_test_dims(correlations, k, k, n)
}

/// [`bartlett_test`] for feature sets of unequal dimension `p` and `q`:
/// factor `(p + q + 3)/2 - n`, `p q` degrees of freedom, and the
/// `min(p, q)` largest correlations.
pub fn bartlett_test_dims(correlations: &[f64], p: usize, q: usize, n: usize) -> Result<IndependenceTest> {
    let k = p.min(q);
    if k == 0 {
        return Err(RdcError::InvalidInput("Bartlett test needs at least one correlation".into()));
    }
    if correlations.len() < k {
        return Err(RdcError::InvalidInput(format!(
            "Bartlett test over {k} correlations got only {}",
            correlations.len()
        )));
    }
    if let Some(bad) = correlations.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(RdcError::InvalidInput(format!("canonical correlation {bad} outside [0, 1]")));
    }
    let mut used = correlations.to_vec();
    used.sort_by(|a, b| b.total_cmp(a));
    used.truncate(k);

    let offset = (p + q + 3) as f64 / 2.0;
    let factor = offset - n as f64;
    if factor >= 0.0 {
        return Err(RdcError::InvalidInput(format!(
            "Bartlett test needs n > {offset}, got n = {n}"
        )));
    }
    let dof = p * q;
    if used.contains(&1.0) {
        return Ok(IndependenceTest {
            statistic: f64::INFINITY,
            dof,
            p_value: 0.0,
            method: TestMethod::Bartlett,
            correlations_used: k,
            degenerate: true,
        });
    }
    let log_prod: f64 = used.iter().map(|&r| (-r * r).ln_1p()).sum();
    // Both factors are non-positive; the product is clamped against -0.0.
    let statistic = (factor * log_prod).max(0.0);
    let chi2 = ChiSquared::new(dof as f64).map_err(|e| RdcError::InvalidInput(e.to_string()))?;
    let p_value = chi2.sf(statistic).clamp(0.0, 1.0);
    Ok(IndependenceTest {
        statistic,
        dof,
        p_value,
        method: TestMethod::Bartlett,
        correlations_used: k,
        degenerate: false,
    })
}

/// Bartlett test on the random features of `x` and `y`.
///
/// The coefficient is computed as in [`rdc`]. The test statistic uses a
/// separate, ridge-free canonical correlation pass in which feature
/// directions whose variance falls below the ridge level are dropped, so the
/// degrees of freedom count only directions that carry signal.
pub fn rdc_bartlett(x: &Sample, y: &Sample, p: &RdcParams) -> Result<(RdcResult, IndependenceTest)> {
    let prepared = prepare(x, y, p)?;
    let n = x.n();
    let truncated = cca::truncated_canonical_correlations(&prepared.fx, &prepared.fy, p.ridge)?;
    let res = cca::canonical_correlations_owned(prepared.fx, prepared.fy, p.ridge)?;
    let (dx, dy) = truncated.ranks;
    let test = bartlett_test_dims(&truncated.correlations, dx, dy, n)?;
    let result = RdcResult {
        coefficient: res.largest(),
        correlations: res.correlations,
        params_used: prepared.params,
        n,
        effective_ranks: res.effective_ranks,
    };
    Ok((result, test))
}

/// Permutation test of independence using the coefficient as statistic.
///
/// The projections (and resolved scales) are drawn once; each permutation
/// reorders the rows of the y features with its own derived seed. The
/// p-value is `(1 + #{permuted >= observed}) / (1 + n_perm)`.
pub fn permutation_test(
    x: &Sample,
    y: &Sample,
    p: &RdcParams,
    n_perm: usize,
    seed: u64,
) -> Result<(RdcResult, IndependenceTest)> {
    if n_perm == 0 {
        return Err(RdcError::InvalidInput("permutation test needs n_perm >= 1".into()));
    }
    let prepared = prepare(x, y, p)?;
    let n = x.n();
    let white = Whitened::new(prepared.fx, prepared.fy, p.ridge)?;
    let correlations = white.correlations(None)?;
    let observed = correlations.first().copied().unwrap_or(0.0);

    let permuted: Vec<f64> = (0..n_perm as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = seed::rng(seed::derive(seed, b));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            white
                .correlations(Some(&perm))
                .map(|c| c.first().copied().unwrap_or(0.0))
        })
        .collect::<Result<_>>()?;
    let exceed = permuted.iter().filter(|&&v| v >= observed).count();
    let p_value = (1 + exceed) as f64 / (1 + n_perm) as f64;

    let result = RdcResult {
        coefficient: observed,
        correlations,
        params_used: prepared.params,
        n,
        effective_ranks: white.effective_ranks,
    };
    let test = IndependenceTest {
        statistic: observed,
        dof: n_perm,
        p_value,
        method: TestMethod::Permutation,
        correlations_used: result.correlations.len(),
        degenerate: false,
    };
    Ok((result, test))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn copula_1d(values: &[f64]) -> CopulaSample {
        copula_transform(&Sample::from_column(values).unwrap())
    }

    #[test]
    fn median_of_single_pair() {
        let m = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(median_sq_distance(&m, 1000, 0).unwrap(), 1.0);
    }

    #[test]
    fn median_of_three_points() {
        let m = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 2.0]);
        assert_eq!(median_sq_distance(&m, 1000, 0).unwrap(), 1.0);
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let u = copula_1d(&[3.0, 3.0, 3.0, 3.0]);
        assert!(median_heuristic(&u, 1000, 0).is_err());
        let x = Sample::from_column(&[3.0, 3.0, 3.0, 3.0]).unwrap();
        let y = Sample::from_column(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(
            rdc(&x, &y, &RdcParams::default()),
            Err(RdcError::DegenerateScale(Side::X))
        ));
    }

    #[test]
    fn subsampling_is_seeded() {
        let values: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64 + i as f64 * 1e-3).collect();
        let u = copula_1d(&values);
        let a = median_heuristic(&u, 50, 9).unwrap();
        assert_eq!(a, median_heuristic(&u, 50, 9).unwrap());
        assert!(a > 0.0);
    }

    #[test]
    fn bartlett_zero_correlations() {
        let t = bartlett_test(&[0.0, 0.0], 2, 50).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.dof, 4);
    }

    #[test]
    fn bartlett_single_correlation() {
        let t = bartlett_test(&[0.3], 1, 100).unwrap();
        let expected = (2.5 - 100.0) * 0.91f64.ln();
        assert!((t.statistic - expected).abs() < 1e-12);
        assert!((t.statistic - 9.195_29).abs() < 1e-4);
        assert_eq!(t.dof, 1);
        // chi^2_1 upper tail at 9.1953 is 2 * (1 - Phi(3.0324)).
        assert!((t.p_value - 0.002_427).abs() < 2e-5, "{}", t.p_value);
    }

    #[test]
    fn bartlett_unit_correlation_is_flagged() {
        let t = bartlett_test(&[1.0, 0.2], 2, 30).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.p_value, 0.0);
        assert!(t.statistic.is_infinite());
    }

    #[test]
    fn bartlett_rejects_small_n() {
        assert!(bartlett_test(&[0.1; 4], 4, 5).is_err());
        assert!(bartlett_test(&[], 1, 50).is_err());
        assert!(bartlett_test(&[0.1], 2, 50).is_err());
        assert!(bartlett_test(&[1.2], 1, 50).is_err());
    }

    #[test]
    fn bartlett_unequal_dims_match_symmetric_form() {
        let rho = [0.4, 0.2, 0.1];
        let sym = bartlett_test(&rho, 3, 80).unwrap();
        let gen = bartlett_test_dims(&rho, 3, 3, 80).unwrap();
        assert_eq!(sym, gen);
        let t = bartlett_test_dims(&rho, 2, 3, 80).unwrap();
        assert_eq!(t.dof, 6);
        assert_eq!(t.correlations_used, 2);
        let expected = (4.0 - 80.0) * ((1.0 - 0.16f64).ln() + (1.0 - 0.04f64).ln());
        assert!((t.statistic - expected).abs() < 1e-12);
    }

    #[test]
    fn permutation_needs_permutations() {
        let x = Sample::from_column(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(permutation_test(&x, &x, &RdcParams::default(), 0, 1).is_err());
    }

    #[test]
    fn size_mismatch() {
        let x = Sample::from_column(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = Sample::from_column(&[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(rdc(&x, &y, &RdcParams::default()), Err(RdcError::SizeMismatch { x: 4, y: 3 })));
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("auto".parse::<Scale>().unwrap(), Scale::Auto);
        assert_eq!("0.5".parse::<Scale>().unwrap(), Scale::Fixed(0.5));
        assert!("-1".parse::<Scale>().is_err());
        assert!("x".parse::<Scale>().is_err());
    }
}
