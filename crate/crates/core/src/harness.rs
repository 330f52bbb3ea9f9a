//! Experiment drivers: power estimation, runtime benchmarks, value panels
//! and greedy feature selection.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::baselines::MeasureId;
use crate::coefficient::RdcParams;
use crate::error::{RdcError, Result};
use crate::sample::Sample;
use crate::seed;
use crate::synth::{self, PatternId};

/// What plays the role of the dependent sample in a power run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DependentDraw {
    #[default]
    Pattern,
    /// A second independent surrogate, for calibration checks.
    Surrogate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerConfig {
    pub patterns: Vec<PatternId>,
    pub noise_variances: Vec<f64>,
    pub n: usize,
    pub repetitions: usize,
    pub alpha: f64,
    pub measures: Vec<MeasureId>,
    pub seed: u64,
    /// Template for the RDC; its seed is replaced per statistic.
    pub rdc_params: RdcParams,
    pub dependent: DependentDraw,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            patterns: PatternId::ALL.to_vec(),
            noise_variances: synth::default_noise_variances(),
            n: 500,
            repetitions: 500,
            alpha: 0.05,
            measures: MeasureId::ALL.to_vec(),
            seed: 0,
            rdc_params: RdcParams::default(),
            dependent: DependentDraw::Pattern,
        }
    }
}

impl PowerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patterns.is_empty() || self.noise_variances.is_empty() || self.measures.is_empty() {
            return Err(RdcError::InvalidInput("patterns, noise grid and measures must be non-empty".into()));
        }
        if self.noise_variances.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(RdcError::InvalidInput("noise variances must be finite and >= 0".into()));
        }
        if self.n < 4 {
            return Err(RdcError::InvalidInput(format!("power runs need n >= 4, got {}", self.n)));
        }
        if self.repetitions < 2 {
            return Err(RdcError::InvalidInput("power runs need at least 2 repetitions".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(RdcError::InvalidInput(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.rdc_params.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCell {
    pub measure: MeasureId,
    pub pattern: PatternId,
    pub noise_variance: f64,
    /// `None` when the measure failed on some repetition of this cell.
    pub power: Option<f64>,
    pub threshold: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerReport {
    pub cells: Vec<PowerCell>,
}

impl PowerReport {
    pub fn get(&self, measure: MeasureId, pattern: PatternId, noise_index: usize) -> Option<&PowerCell> {
        self.cells
            .iter()
            .filter(|c| c.measure == measure && c.pattern == pattern)
            .nth(noise_index)
    }
}

/// Empirical `1 - alpha` quantile: the `ceil((1 - alpha) m)`-th smallest value.
pub fn upper_quantile(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let idx = ((1.0 - alpha) * v.len() as f64).ceil() as usize;
    v[idx.clamp(1, v.len()) - 1]
}

fn statistic(m: MeasureId, x: &[f64], y: &[f64], params: &RdcParams, seed: u64) -> Result<f64> {
    m.evaluate_scalar(x, y, &params.with_seed(seed)).map(f64::abs)
}

/// Estimates the power of every measure on every (pattern, noise) cell.
///
/// Each repetition draws a dependent sample and an independent surrogate
/// with the same y-marginal. The rejection threshold is the empirical
/// `1 - alpha` quantile of the surrogate statistics; power is the fraction
/// of dependent statistics strictly above it. Signed measures enter in
/// absolute value.
pub fn estimate_power(cfg: &PowerConfig) -> Result<PowerReport> {
    cfg.validate()?;
    let mut cells = Vec::with_capacity(cfg.measures.len() * cfg.patterns.len() * cfg.noise_variances.len());
    let mut per_pattern = Vec::new();
    for (pi, &pattern) in cfg.patterns.iter().enumerate() {
        for (li, &var) in cfg.noise_variances.iter().enumerate() {
            per_pattern.push(power_cell(cfg, pi as u64, pattern, li as u64, var));
        }
    }
    for &m in &cfg.measures {
        for row in &per_pattern {
            cells.push(row.iter().find(|c| c.measure == m).expect("every measure evaluated").clone());
        }
    }
    Ok(PowerReport { cells })
}

fn power_cell(cfg: &PowerConfig, pi: u64, pattern: PatternId, li: u64, var: f64) -> Vec<PowerCell> {
    let sd = var.sqrt();
    let reps: Vec<Vec<Result<(f64, f64)>>> = (0..cfg.repetitions as u64)
        .into_par_iter()
        .map(|r| {
            let base = seed::derive_path(cfg.seed, &[pi, li, r]);
            let draw = || -> Result<(synth::PatternSample, synth::PatternSample)> {
                let dep = synth::generate(pattern, cfg.n, sd, seed::derive(base, 0))?;
                let null = synth::independent_surrogate(&dep, seed::derive(base, 1));
                let dep = match cfg.dependent {
                    DependentDraw::Pattern => dep,
                    DependentDraw::Surrogate => synth::independent_surrogate(&dep, seed::derive(base, 4)),
                };
                Ok((dep, null))
            };
            match draw() {
                Err(e) => cfg.measures.iter().map(|_| Err(e.clone())).collect(),
                Ok((dep, null)) => cfg
                    .measures
                    .iter()
                    .map(|&m| {
                        let a = statistic(m, &dep.x, &dep.y, &cfg.rdc_params, seed::derive(base, 2))?;
                        let b = statistic(m, &null.x, &null.y, &cfg.rdc_params, seed::derive(base, 3))?;
                        Ok((a, b))
                    })
                    .collect(),
            }
        })
        .collect();

    cfg.measures
        .iter()
        .enumerate()
        .map(|(mi, &measure)| {
            let cell = PowerCell { measure, pattern, noise_variance: var, power: None, threshold: None, error: None };
            summarise(cell, reps.iter().map(|r| r[mi].clone()), cfg.alpha)
        })
        .collect()
}

fn summarise(mut cell: PowerCell, pairs: impl Iterator<Item = Result<(f64, f64)>>, alpha: f64) -> PowerCell {
    match pairs.collect::<Result<Vec<_>>>() {
        Err(e) => {
            log::warn!("{} failed on {} at noise variance {}: {e}", cell.measure, cell.pattern, cell.noise_variance);
            cell.error = Some(e.to_string());
        }
        Ok(pairs) => {
            let null: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let t = upper_quantile(&null, alpha);
            let hits = pairs.iter().filter(|p| p.0 > t).count();
            cell.threshold = Some(t);
            cell.power = Some(hits as f64 / pairs.len() as f64);
        }
    }
    cell
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub measures: Vec<MeasureId>,
    pub sizes: Vec<usize>,
    pub repetitions: usize,
    pub timeout: Duration,
    pub seed: u64,
    pub rdc_params: RdcParams,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            measures: MeasureId::ALL.to_vec(),
            sizes: vec![1_000, 10_000, 100_000, 1_000_000],
            repetitions: 3,
            timeout: Duration::from_secs(600),
            seed: 0,
            rdc_params: RdcParams::default(),
        }
    }
}

/// Why a benchmark cell holds no timing.
#[derive(Debug, Clone, PartialEq)]
pub enum Absent {
    TimedOut,
    /// Skipped because a smaller size already timed out.
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchCell {
    pub measure: MeasureId,
    pub n: usize,
    /// Mean wall-clock seconds per evaluation.
    pub seconds: std::result::Result<f64, Absent>,
}

/// Times each measure on independent uniform scalar pairs, serially.
///
/// Sizes are run in the given order; once a measure times out, larger sizes
/// are skipped for that measure.
pub fn benchmark_runtimes(cfg: &BenchConfig) -> Result<Vec<BenchCell>> {
    if cfg.measures.is_empty() || cfg.sizes.is_empty() || cfg.repetitions == 0 {
        return Err(RdcError::InvalidInput("benchmark needs measures, sizes and repetitions >= 1".into()));
    }
    if let Some(&n) = cfg.sizes.iter().find(|&&n| n < 4) {
        return Err(RdcError::InvalidInput(format!("benchmark sizes must be >= 4, got {n}")));
    }
    let mut out = Vec::new();
    for &m in &cfg.measures {
        let mut stop = false;
        for (si, &n) in cfg.sizes.iter().enumerate() {
            if stop {
                out.push(BenchCell { measure: m, n, seconds: Err(Absent::Skipped) });
                continue;
            }
            let seconds = time_measure(cfg, m, si as u64, n);
            stop = matches!(seconds, Err(Absent::TimedOut));
            out.push(BenchCell { measure: m, n, seconds });
        }
    }
    Ok(out)
}

fn time_measure(cfg: &BenchConfig, m: MeasureId, si: u64, n: usize) -> std::result::Result<f64, Absent> {
    let mut total = Duration::ZERO;
    for r in 0..cfg.repetitions as u64 {
        let mut rng = seed::rng(seed::derive_path(cfg.seed, &[si, r]));
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let params = cfg.rdc_params.with_seed(seed::derive_path(cfg.seed, &[si, r, 1]));
        let start = Instant::now();
        let res = m.evaluate_scalar(&x, &y, &params);
        let took = start.elapsed();
        if let Err(e) = res {
            return Err(Absent::Failed(e.to_string()));
        }
        if took > cfg.timeout {
            return Err(Absent::TimedOut);
        }
        total += took;
    }
    Ok(total.as_secs_f64() / cfg.repetitions as f64)
}

/// A bivariate association used in the value panel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Association {
    Gaussian { rho: f64 },
    Pattern { pattern: PatternId, noise_sd: f64 },
    Independent,
    Identity,
}

impl Association {
    pub fn label(&self) -> String {
        match self {
            Association::Gaussian { rho } => format!("gaussian_rho={rho}"),
            Association::Pattern { pattern, noise_sd } => format!("{pattern}_sd={noise_sd}"),
            Association::Independent => "independent".into(),
            Association::Identity => "identity".into(),
        }
    }

    pub fn draw(&self, n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut rng = seed::rng(seed);
        match *self {
            Association::Gaussian { rho } => {
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(RdcError::InvalidInput(format!("rho must lie in [-1, 1], got {rho}")));
                }
                let c = (1.0 - rho * rho).sqrt();
                Ok((0..n)
                    .map(|_| {
                        let a: f64 = rng.sample(StandardNormal);
                        let b: f64 = rng.sample(StandardNormal);
                        (a, rho * a + c * b)
                    })
                    .unzip())
            }
            Association::Pattern { pattern, noise_sd } => {
                let s = synth::generate(pattern, n, noise_sd, seed)?;
                Ok((s.x, s.y))
            }
            Association::Independent => Ok((0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).unzip()),
            Association::Identity => {
                let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                Ok((x.clone(), x))
            }
        }
    }
}

/// Gaussians at several correlations, every pattern at low noise, plus the
/// independent and identity pairs.
pub fn default_associations() -> Vec<Association> {
    let mut v: Vec<Association> =
        [0.8, 0.4, 0.2, -0.4, -0.8].into_iter().map(|rho| Association::Gaussian { rho }).collect();
    v.extend(PatternId::ALL.iter().map(|&pattern| Association::Pattern { pattern, noise_sd: 0.1 }));
    v.push(Association::Independent);
    v.push(Association::Identity);
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub association: Association,
    /// One value per requested measure; `None` if the measure failed.
    pub values: Vec<Option<f64>>,
}

/// Evaluates every measure on one draw of every association.
pub fn value_panel(
    associations: &[Association],
    measures: &[MeasureId],
    n: usize,
    seed: u64,
    rdc_params: &RdcParams,
) -> Result<Vec<PanelRow>> {
    if associations.is_empty() || measures.is_empty() {
        return Err(RdcError::InvalidInput("panel needs associations and measures".into()));
    }
    associations
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let (x, y) = a.draw(n, seed::derive_path(seed, &[i as u64, 0]))?;
            let params = rdc_params.with_seed(seed::derive_path(seed, &[i as u64, 1]));
            let values = measures.iter().map(|m| m.evaluate_scalar(&x, &y, &params).ok()).collect();
            Ok(PanelRow { association: *a, values })
        })
        .collect()
}

/// Rows at which distance correlation is subsampled during selection.
pub const SELECT_DCOR_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionStep {
    pub step: usize,
    /// Index of the feature added at this step.
    pub feature: usize,
    /// Dependence between the selected set and the target on the training half.
    pub dependence: f64,
    /// Normalised test error of least squares on the selected set.
    pub nmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub measure: MeasureId,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    pub fn selected(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.feature).collect()
    }
}

/// Greedy forward selection of feature columns maximising the dependence
/// between the selected set and `target`.
///
/// Rows are split into equal disjoint train and test halves. Every candidate
/// at a step is scored with the same RDC seed; ties go to the lowest index.
pub fn greedy_select(
    features: &Sample,
    target: &Sample,
    measure: MeasureId,
    steps: usize,
    seed: u64,
    rdc_params: &RdcParams,
) -> Result<SelectionTrace> {
    if !measure.is_multivariate() {
        return Err(RdcError::Capability(format!("{measure} cannot score multivariate feature sets")));
    }
    if features.n() != target.n() {
        return Err(RdcError::SizeMismatch { x: features.n(), y: target.n() });
    }
    if steps == 0 || steps > features.d() {
        return Err(RdcError::InvalidInput(format!("steps must lie in 1..={}, got {steps}", features.d())));
    }
    let half = features.n() / 2;
    if half < 4 {
        return Err(RdcError::InvalidInput("selection needs at least 8 rows".into()));
    }
    let mut rows: Vec<usize> = (0..features.n()).collect();
    rows.shuffle(&mut seed::rng(seed::derive(seed, 0)));
    let mut train_rows = rows[..half].to_vec();
    let mut test_rows = rows[half..2 * half].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();

    let mut score_rows = train_rows.clone();
    if measure == MeasureId::Dcor && score_rows.len() > SELECT_DCOR_CAP {
        score_rows.shuffle(&mut seed::rng(seed::derive(seed, 1)));
        score_rows.truncate(SELECT_DCOR_CAP);
        score_rows.sort_unstable();
    }
    let fx = features.select_rows(&score_rows)?;
    let ty = target.select_rows(&score_rows)?;

    let mut chosen: Vec<usize> = Vec::new();
    let mut trace = Vec::with_capacity(steps);
    for step in 0..steps {
        let params = rdc_params.with_seed(seed::derive_path(seed, &[2, step as u64]));
        let candidates: Vec<usize> = (0..features.d()).filter(|j| !chosen.contains(j)).collect();
        let scores: Vec<Result<f64>> = candidates
            .par_iter()
            .map(|&j| {
                let mut cols = chosen.clone();
                cols.push(j);
                measure.evaluate(&fx.select_columns(&cols)?, &ty, &params)
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (&j, s) in candidates.iter().zip(scores) {
            let s = s?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let (feature, dependence) = best.expect("at least one candidate");
        chosen.push(feature);
        let nmse = ols_nmse(features, target, &chosen, &train_rows, &test_rows)?;
        trace.push(SelectionStep { step: step + 1, feature, dependence, nmse });
    }
    Ok(SelectionTrace { measure, train_rows, test_rows, steps: trace })
}

fn design(features: &Sample, cols: &[usize], rows: &[usize]) -> DMatrix<f64> {
    let m = features.matrix();
    DMatrix::from_fn(rows.len(), cols.len() + 1, |i, j| if j == 0 { 1.0 } else { m[(rows[i], cols[j - 1])] })
}

/// Mean squared test error of ordinary least squares (with intercept) over
/// the test variance, averaged across target columns.
pub fn ols_nmse(features: &Sample, target: &Sample, cols: &[usize], train: &[usize], test: &[usize]) -> Result<f64> {
    let xtr = design(features, cols, train);
    let xte = design(features, cols, test);
    let svd = xtr.svd(true, true);
    let mut total = 0.0;
    for t in 0..target.d() {
        let y = target.column(t);
        let ytr = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let yte = DVector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
        let beta = svd.solve(&ytr, 1e-12).map_err(|e| RdcError::Degenerate(e.into()))?;
        let resid = &xte * beta - &yte;
        let mean = yte.mean();
        let var = yte.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / test.len() as f64;
        if var == 0.0 {
            return Err(RdcError::Degenerate("constant target on the test half".into()));
        }
        total += resid.norm_squared() / test.len() as f64 / var;
    }
    Ok(total / target.d() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_picks_order_statistic() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(&v, 0.05), 95.0);
        assert_eq!(upper_quantile(&[3.0, 1.0, 2.0], 0.5), 2.0);
        assert_eq!(upper_quantile(&[1.0, 2.0], 0.999), 1.0);
    }

    #[test]
    fn small_power_run_is_deterministic() {
        let cfg = PowerConfig {
            patterns: vec![PatternId::Linear],
            noise_variances: vec![0.1, 3.0],
            n: 60,
            repetitions: 20,
            measures: vec![MeasureId::Pearson, MeasureId::Rdc],
            seed: 3,
            ..PowerConfig::default()
        };
        let a = estimate_power(&cfg).unwrap();
        assert_eq!(a, estimate_power(&cfg).unwrap());
        assert_eq!(a.cells.len(), 4);
        assert_eq!(a.get(MeasureId::Pearson, PatternId::Linear, 0).unwrap().power, Some(1.0));
    }

    #[test]
    fn failing_repetition_marks_cell() {
        let cell = PowerCell {
            measure: MeasureId::Pearson,
            pattern: PatternId::Step,
            noise_variance: 0.0,
            power: None,
            threshold: None,
            error: None,
        };
        let ok = summarise(cell.clone(), [Ok((0.9, 0.1)), Ok((0.05, 0.2))].into_iter(), 0.5);
        assert_eq!((ok.power, ok.threshold), (Some(0.5), Some(0.1)));
        let bad = summarise(cell, [Ok((0.9, 0.1)), Err(RdcError::Degenerate("zero variance".into()))].into_iter(), 0.5);
        assert_eq!(bad.power, None);
        assert!(bad.error.unwrap().contains("zero variance"));
    }

    #[test]
    fn bench_marks_failures_absent() {
        let cfg = BenchConfig {
            measures: vec![MeasureId::Pearson, MeasureId::Kendall],
            sizes: vec![100, 200],
            repetitions: 1,
            ..BenchConfig::default()
        };
        let cells = benchmark_runtimes(&cfg).unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.seconds.is_ok()));
        let zero = BenchConfig { timeout: Duration::ZERO, ..cfg };
        let cells = benchmark_runtimes(&zero).unwrap();
        assert_eq!(cells[0].seconds, Err(Absent::TimedOut));
        assert_eq!(cells[1].seconds, Err(Absent::Skipped));
    }

    #[test]
    fn identity_panel_row_is_maximal() {
        let rows = value_panel(&[Association::Identity], &MeasureId::ALL, 300, 1, &RdcParams::default()).unwrap();
        for v in &rows[0].values {
            assert!((v.unwrap() - 1.0).abs() < 1e-6, "{v:?}");
        }
    }

    #[test]
    fn selection_rejects_scalar_measures() {
        let f = Sample::from_columns(&[vec![1.0, 2.0, 3.0, 4.0], vec![4.0, 1.0, 3.0, 2.0]]).unwrap();
        let t = Sample::from_column(&[1.0, 2.0, 3.0, 5.0]).unwrap();
        let r = greedy_select(&f, &t, MeasureId::Spearman, 1, 0, &RdcParams::default());
        assert!(matches!(r, Err(RdcError::Capability(_))));
    }

    #[test]
    fn ols_recovers_linear_target() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let f = Sample::from_column(&x).unwrap();
        let t = Sample::from_column(&y).unwrap();
        let train: Vec<usize> = (0..20).collect();
        let test: Vec<usize> = (20..40).collect();
        assert!(ols_nmse(&f, &t, &[0], &train, &test).unwrap() < 1e-20);
    }
}
