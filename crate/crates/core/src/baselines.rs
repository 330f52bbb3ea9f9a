//! Classical dependence measures used as baselines.

use rayon::prelude::*;

use crate::coefficient::{rdc, RdcParams};
use crate::copula::empirical_cdf;
use crate::error::{RdcError, Result};
use crate::sample::Sample;

/// The dependence measures known to the harness and CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasureId {
    Pearson,
    Spearman,
    Kendall,
    Dcor,
    Rdc,
}

impl MeasureId {
    pub const ALL: [MeasureId; 5] =
        [MeasureId::Rdc, MeasureId::Pearson, MeasureId::Spearman, MeasureId::Kendall, MeasureId::Dcor];

    pub fn tag(&self) -> &'static str {
        match self {
            MeasureId::Pearson => "pearson",
            MeasureId::Spearman => "spearman",
            MeasureId::Kendall => "kendall",
            MeasureId::Dcor => "dcor",
            MeasureId::Rdc => "rdc",
        }
    }

    /// Whether the measure accepts samples with more than one column.
    pub fn is_multivariate(&self) -> bool {
        matches!(self, MeasureId::Dcor | MeasureId::Rdc)
    }

    /// Evaluates the measure on two samples. Scalar-only measures require
    /// one column per side. `params` only affects the RDC.
    pub fn evaluate(&self, x: &Sample, y: &Sample, params: &RdcParams) -> Result<f64> {
        if !self.is_multivariate() && (x.d() != 1 || y.d() != 1) {
            return Err(RdcError::Capability(self.tag().into()));
        }
        match self {
            MeasureId::Pearson => pearson(x.column(0), y.column(0)),
            MeasureId::Spearman => spearman(x.column(0), y.column(0)),
            MeasureId::Kendall => kendall(x.column(0), y.column(0)),
            MeasureId::Dcor => dcor(x, y),
            MeasureId::Rdc => rdc(x, y, params).map(|r| r.coefficient),
        }
    }

    pub fn evaluate_scalar(&self, x: &[f64], y: &[f64], params: &RdcParams) -> Result<f64> {
        match self {
            MeasureId::Pearson => pearson(x, y),
            MeasureId::Spearman => spearman(x, y),
            MeasureId::Kendall => kendall(x, y),
            _ => self.evaluate(&Sample::from_column(x)?, &Sample::from_column(y)?, params),
        }
    }
}

impl std::fmt::Display for MeasureId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for MeasureId {
    type Err = RdcError;

    fn from_str(s: &str) -> Result<Self> {
        MeasureId::ALL.into_iter().find(|m| m.tag() == s).ok_or_else(|| {
            let valid: Vec<&str> = MeasureId::ALL.iter().map(|m| m.tag()).collect();
            RdcError::InvalidInput(format!("unknown measure `{s}`; valid: {}", valid.join(", ")))
        })
    }
}

/// Memory ceiling for the two `n x n` distance matrices of [`dcor`].
pub const DEFAULT_DCOR_BUDGET: u64 = 8 << 30;

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(RdcError::SizeMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(RdcError::InvalidInput(format!("need at least 2 observations, got {}", x.len())));
    }
    for (col, v) in [x, y].iter().enumerate() {
        if let Some(row) = v.iter().position(|a| !a.is_finite()) {
            return Err(RdcError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Sample (Pearson) correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(RdcError::Degenerate("zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation: Pearson correlation of the empirical cdf
/// ranks (ties take the largest rank of their group).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    pearson(&empirical_cdf(x)?, &empirical_cdf(y)?)
}

/// Pair counts behind Kendall's tau-b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KendallCounts {
    /// Concordant minus discordant pairs.
    pub score: i64,
    /// Total number of pairs.
    pub pairs: i64,
    /// Pairs tied in x (including joint ties).
    pub ties_x: i64,
    /// Pairs tied in y (including joint ties).
    pub ties_y: i64,
}

impl KendallCounts {
    pub fn tau_b(&self) -> Result<f64> {
        let dx = self.pairs - self.ties_x;
        let dy = self.pairs - self.ties_y;
        if dx == 0 || dy == 0 {
            return Err(RdcError::Degenerate("all values tied on one side".into()));
        }
        Ok((self.score as f64 / ((dx as f64) * (dy as f64)).sqrt()).clamp(-1.0, 1.0))
    }
}

/// Kendall's tau-b via an O(n^2) pass over all pairs.
pub fn kendall_naive(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    kendall_counts_naive(x, y).tau_b()
}

pub fn kendall_counts_naive(x: &[f64], y: &[f64]) -> KendallCounts {
    let n = x.len();
    let mut c = KendallCounts { score: 0, pairs: (n * n.saturating_sub(1) / 2) as i64, ties_x: 0, ties_y: 0 };
    for i in 0..n {
        for j in (i + 1)..n {
            let sx = sign(x[i] - x[j]);
            let sy = sign(y[i] - y[j]);
            c.score += sx * sy;
            c.ties_x += (sx == 0) as i64;
            c.ties_y += (sy == 0) as i64;
        }
    }
    c
}

fn sign(v: f64) -> i64 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
pub fn kendall(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    kendall_counts(x, y).tau_b()
}

pub fn kendall_counts(x: &[f64], y: &[f64]) -> KendallCounts {
    let n = x.len();
    let pairs = (n * n.saturating_sub(1) / 2) as i64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_unstable_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let tie_pairs = |t: i64| t * (t - 1) / 2;
    let mut ties_x = 0;
    let mut joint = 0;
    let mut run_x = 1;
    let mut run_xy = 1;
    for w in 1..n {
        let (a, b) = (order[w - 1], order[w]);
        if x[a] == x[b] {
            run_x += 1;
            if y[a] == y[b] {
                run_xy += 1;
            } else {
                joint += tie_pairs(run_xy);
                run_xy = 1;
            }
        } else {
            ties_x += tie_pairs(run_x);
            joint += tie_pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    ties_x += tie_pairs(run_x);
    joint += tie_pairs(run_xy);

    let mut ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let mut buf = vec![0.0; n];
    let swaps = merge_count(&mut ys, &mut buf);

    let mut ties_y = 0;
    let mut run_y = 1;
    for w in 1..n {
        if ys[w - 1] == ys[w] {
            run_y += 1;
        } else {
            ties_y += tie_pairs(run_y);
            run_y = 1;
        }
    }
    ties_y += tie_pairs(run_y);

    KendallCounts { score: pairs - ties_x - ties_y + joint - 2 * swaps, pairs, ties_x, ties_y }
}

/// Sorts `v` ascending and returns the number of strict inversions.
fn merge_count(v: &mut [f64], buf: &mut [f64]) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (lo, hi) = v.split_at_mut(mid);
        let (blo, bhi) = buf.split_at_mut(mid);
        merge_count(lo, blo) + merge_count(hi, bhi)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as i64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Distance correlation (biased V-statistic form) with the default memory budget.
pub fn dcor(x: &Sample, y: &Sample) -> Result<f64> {
    dcor_with_budget(x, y, DEFAULT_DCOR_BUDGET)
}

/// Distance correlation, refusing inputs whose two `n x n` distance matrices
/// would exceed `budget` bytes.
pub fn dcor_with_budget(x: &Sample, y: &Sample, budget: u64) -> Result<f64> {
    if x.n() != y.n() {
        return Err(RdcError::SizeMismatch { x: x.n(), y: y.n() });
    }
    let n = x.n();
    let bytes = 2u64
        .saturating_mul(n as u64)
        .saturating_mul(n as u64)
        .saturating_mul(std::mem::size_of::<f64>() as u64);
    if bytes > budget {
        return Err(RdcError::Capacity { n, bytes, budget });
    }
    let a = centered_distances(x);
    let b = centered_distances(y);
    let nn = (n * n) as f64;
    let dot = |u: &[f64], v: &[f64]| -> f64 {
        u.par_chunks(n).zip(v.par_chunks(n)).map(|(r, s)| r.iter().zip(s).map(|(p, q)| p * q).sum::<f64>()).sum()
    };
    let cov = dot(&a, &b) / nn;
    let var_x = dot(&a, &a) / nn;
    let var_y = dot(&b, &b) / nn;
    let denom = (var_x * var_y).sqrt();
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok((cov.max(0.0) / denom).sqrt().min(1.0))
}

/// Double-centered Euclidean distance matrix, row-major.
fn centered_distances(s: &Sample) -> Vec<f64> {
    let n = s.n();
    let rows: Vec<Vec<f64>> = (0..n).map(|r| s.matrix().row(r).iter().copied().collect()).collect();
    let mut m = vec![0.0; n * n];
    m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            *out = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        }
    });
    let row_means: Vec<f64> = m.par_chunks(n).map(|r| r.iter().sum::<f64>() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // Symmetric, so column means equal row means.
    m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v += grand - row_means[i] - row_means[j];
        }
    });
    m
}
