//! Canonical correlation analysis.
//!
//! The canonical correlations between `A` (`n x p`) and `B` (`n x q`) are the
//! singular values of `Cxx^{-1/2} Cxy Cyy^{-1/2}`. Each covariance is
//! whitened through its symmetric eigendecomposition; eigen-directions below
//! a relative cutoff are dropped instead of inverted, so rank-deficient
//! feature sets shrink the number of returned correlations.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{RdcError, Result, Side};

/// Default relative ridge added to both covariance diagonals.
pub const DEFAULT_RIDGE: f64 = 1e-8;

/// Eigenvalues below `RANK_CUTOFF * trace / p` are treated as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// Correlations above `1 + OVERSHOOT_TOLERANCE` are reported as an error.
pub const OVERSHOOT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CcaResult {
    /// Canonical correlations in descending order, each in `[0, 1]`.
    pub correlations: Vec<f64>,
    /// Effective ranks of the two (regularized) covariances.
    pub ranks: (usize, usize),
    /// Absolute ridge added to each covariance diagonal.
    pub ridge: (f64, f64),
    /// Directions per side whose variance exceeds the absolute ridge, i.e.
    /// those not dominated by regularization. Equals `ranks` when no ridge
    /// is applied.
    pub effective_ranks: (usize, usize),
}

impl CcaResult {
    pub fn largest(&self) -> f64 {
        self.correlations.first().copied().unwrap_or(0.0)
    }
}

/// Canonical correlations between the columns of `a` and `b`.
///
/// `ridge` is relative: `ridge * mean(diag(C))` is added to the diagonal of
/// each covariance before whitening.
pub fn canonical_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> Result<CcaResult> {
    canonical_correlations_owned(a.clone(), b.clone(), ridge)
}

/// Canonical correlations without a ridge, after dropping the eigen-directions
/// of each covariance that fall below `cutoff * mean(diag(C))`. Never fails on
/// rank deficiency; the returned ranks say how many directions survived.
pub fn truncated_canonical_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>, cutoff: f64) -> Result<CcaResult> {
    check_inputs(a, b)?;
    if !(cutoff.is_finite() && cutoff >= 0.0) {
        return Err(RdcError::InvalidInput(format!("cutoff must be finite and >= 0, got {cutoff}")));
    }
    let white = Whitened::truncated(a.clone(), b.clone(), cutoff)?;
    Ok(CcaResult {
        correlations: white.correlations(None)?,
        ranks: white.ranks,
        ridge: white.ridge,
        effective_ranks: white.effective_ranks,
    })
}

fn check_inputs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    if n < 2 {
        return Err(RdcError::InvalidInput(format!("CCA needs at least 2 rows, got {n}")));
    }
    if b.nrows() != n {
        return Err(RdcError::SizeMismatch { x: n, y: b.nrows() });
    }
    if a.ncols() == 0 || b.ncols() == 0 {
        return Err(RdcError::InvalidInput("CCA needs at least one column per side".into()));
    }
    Ok(())
}

pub(crate) fn canonical_correlations_owned(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    ridge: f64,
) -> Result<CcaResult> {
    check_inputs(&a, &b)?;
    let n = a.nrows();
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(RdcError::InvalidInput(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    if n <= a.ncols().max(b.ncols()) {
        log::warn!(
            "CCA with n = {n} rows and {}/{} columns: correlations are inflated without regularization",
            a.ncols(),
            b.ncols()
        );
    }

    let white = Whitened::from_centered(center(a), center(b), Regularization::Ridge(ridge))?;
    let correlations = white.correlations(None)?;
    Ok(CcaResult {
        correlations,
        ranks: white.ranks,
        ridge: white.ridge,
        effective_ranks: white.effective_ranks,
    })
}

/// Both sides centered and multiplied by their whitening maps, so the
/// canonical correlations are the singular values of `zx' zy / (n - 1)`.
pub(crate) struct Whitened {
    zx: DMatrix<f64>,
    zy: DMatrix<f64>,
    pub ranks: (usize, usize),
    pub ridge: (f64, f64),
    pub effective_ranks: (usize, usize),
}

impl Whitened {
    pub(crate) fn new(a: DMatrix<f64>, b: DMatrix<f64>, ridge: f64) -> Result<Self> {
        Self::from_centered(center(a), center(b), Regularization::Ridge(ridge))
    }

    pub(crate) fn truncated(a: DMatrix<f64>, b: DMatrix<f64>, cutoff: f64) -> Result<Self> {
        Self::from_centered(center(a), center(b), Regularization::Truncate(cutoff))
    }

    fn from_centered(a: DMatrix<f64>, b: DMatrix<f64>, reg: Regularization) -> Result<Self> {
        let denom = (a.nrows() - 1) as f64;
        let wx = whitener(a.tr_mul(&a) / denom, reg, Side::X)?;
        let wy = whitener(b.tr_mul(&b) / denom, reg, Side::Y)?;
        Ok(Self {
            ranks: (wx.map.ncols(), wy.map.ncols()),
            ridge: (wx.ridge, wy.ridge),
            effective_ranks: (wx.effective_rank, wy.effective_rank),
            zx: a * wx.map,
            zy: b * wy.map,
        })
    }

    /// Canonical correlations, optionally after reordering the rows of the
    /// y side by `perm` (row `i` of y is replaced by row `perm[i]`).
    pub(crate) fn correlations(&self, perm: Option<&[usize]>) -> Result<Vec<f64>> {
        let denom = (self.zx.nrows() - 1) as f64;
        let cross = match perm {
            None => self.zx.tr_mul(&self.zy),
            Some(perm) => self.zx.tr_mul(&self.zy.select_rows(perm.iter())),
        } / denom;
        let mut correlations = if cross.is_empty() {
            Vec::new()
        } else {
            cross.singular_values().as_slice().to_vec()
        };
        correlations.sort_by(|x, y| y.total_cmp(x));
        correlations.truncate(self.ranks.0.min(self.ranks.1));
        for r in correlations.iter_mut() {
            if *r > 1.0 + OVERSHOOT_TOLERANCE || !r.is_finite() {
                return Err(RdcError::CorrelationOutOfRange { value: *r });
            }
            *r = r.clamp(0.0, 1.0);
        }
        Ok(correlations)
    }
}

fn center(mut m: DMatrix<f64>) -> DMatrix<f64> {
    center_columns(&mut m);
    m
}

fn center_columns(m: &mut DMatrix<f64>) {
    let n = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
}

#[derive(Clone, Copy)]
enum Regularization {
    /// Add `ridge * mean(diag)` to the diagonal.
    Ridge(f64),
    /// No ridge; drop eigen-directions below `cutoff * mean(diag)`.
    Truncate(f64),
}

struct Whitener {
    /// `V diag(lambda^{-1/2})` restricted to the retained eigenpairs.
    map: DMatrix<f64>,
    ridge: f64,
    effective_rank: usize,
}

fn whitener(mut cov: DMatrix<f64>, reg: Regularization, side: Side) -> Result<Whitener> {
    let (ridge, cutoff_rel) = match reg {
        Regularization::Ridge(r) => (r, RANK_CUTOFF),
        Regularization::Truncate(c) => (0.0, c.max(RANK_CUTOFF)),
    };
    let p = cov.nrows();
    let mean_diag = cov.trace() / p as f64;
    if mean_diag.is_nan() || mean_diag <= 0.0 {
        return Err(RdcError::Degenerate(format!("every column on side {side} is constant")));
    }
    let abs_ridge = ridge * mean_diag;
    for i in 0..p {
        cov[(i, i)] += abs_ridge;
    }
    let eig = SymmetricEigen::new(cov);
    let cutoff = cutoff_rel * mean_diag;
    let keep: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] > cutoff).collect();
    if keep.len() < p && matches!(reg, Regularization::Ridge(r) if r == 0.0) {
        return Err(RdcError::Singular(side));
    }
    let mut w = DMatrix::zeros(p, keep.len());
    for (c, &i) in keep.iter().enumerate() {
        let scale = eig.eigenvalues[i].sqrt().recip();
        w.column_mut(c).copy_from(&(eig.eigenvectors.column(i) * scale));
    }
    // Regularized eigenvalues are lambda + ridge; count those with lambda > ridge.
    let effective_rank = keep.iter().filter(|&&i| eig.eigenvalues[i] > 2.0 * abs_ridge).count();
    Ok(Whitener { map: w, ridge: abs_ridge, effective_rank })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(rng: &mut impl Rng, n: usize, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn identical_inputs_are_perfectly_correlated() {
        let mut rng = crate::seed::rng(1);
        let a = random_matrix(&mut rng, 30, 3);
        let res = canonical_correlations(&a, &a, 0.0).unwrap();
        assert_eq!(res.correlations.len(), 3);
        for r in res.correlations {
            assert!((r - 1.0).abs() < 1e-10, "{r}");
        }
    }

    #[test]
    fn scalar_case_is_absolute_pearson() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0, 5.0];
        let mx = x.iter().sum::<f64>() / 6.0;
        let my = y.iter().sum::<f64>() / 6.0;
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let pearson = sxy / (sxx * syy).sqrt();

        let a = DMatrix::from_column_slice(6, 1, &x);
        let b = DMatrix::from_column_slice(6, 1, &y.map(|v| -v));
        let res = canonical_correlations(&a, &b, 0.0).unwrap();
        assert_eq!(res.correlations.len(), 1);
        assert!((res.correlations[0] - pearson.abs()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = crate::seed::rng(2);
        let a = random_matrix(&mut rng, 25, 4);
        let b = random_matrix(&mut rng, 25, 2);
        let ab = canonical_correlations(&a, &b, 0.0).unwrap();
        let ba = canonical_correlations(&b, &a, 0.0).unwrap();
        for (x, y) in ab.correlations.iter().zip(&ba.correlations) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn invariant_under_invertible_maps() {
        let mut rng = crate::seed::rng(3);
        let a = random_matrix(&mut rng, 40, 3);
        let b = random_matrix(&mut rng, 40, 3);
        let t = random_matrix(&mut rng, 3, 3) + DMatrix::identity(3, 3) * 3.0;
        let base = canonical_correlations(&a, &b, 0.0).unwrap();
        let moved = canonical_correlations(&(&a * &t), &b, 0.0).unwrap();
        for (x, y) in base.correlations.iter().zip(&moved.correlations) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_without_ridge_names_side() {
        let mut rng = crate::seed::rng(4);
        let a = random_matrix(&mut rng, 20, 2);
        let mut b = random_matrix(&mut rng, 20, 3);
        let dup = b.column(0).into_owned();
        b.set_column(2, &dup);
        assert!(matches!(canonical_correlations(&a, &b, 0.0), Err(RdcError::Singular(Side::Y))));
        assert!(matches!(canonical_correlations(&b, &a, 0.0), Err(RdcError::Singular(Side::X))));
        // With a ridge the duplicated direction is regularized instead.
        let res = canonical_correlations(&a, &b, 1e-8).unwrap();
        assert!(res.correlations.iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn rejects_short_and_mismatched_inputs() {
        let one = DMatrix::from_element(1, 1, 1.0);
        assert!(canonical_correlations(&one, &one, 0.0).is_err());
        let a = DMatrix::from_element(3, 1, 1.0);
        let b = DMatrix::from_element(4, 1, 1.0);
        assert!(matches!(canonical_correlations(&a, &b, 0.0), Err(RdcError::SizeMismatch { .. })));
    }

    #[test]
    fn constant_side_is_degenerate() {
        let a = DMatrix::from_element(5, 2, 0.5);
        let b = DMatrix::from_column_slice(5, 1, &[1.0, 2.0, 3.0, 4.0, 6.0]);
        assert!(matches!(canonical_correlations(&a, &b, 1e-8), Err(RdcError::Degenerate(_))));
    }
}
