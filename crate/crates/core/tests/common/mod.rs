//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::Value;

use rdc::{copula_transform, Projection, Sample};

pub fn covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() as f64;
    let ca = a - DMatrix::from_fn(a.nrows(), a.ncols(), |_, j| a.column(j).mean());
    let cb = b - DMatrix::from_fn(b.nrows(), b.ncols(), |_, j| b.column(j).mean());
    ca.transpose() * cb / (n - 1.0)
}

/// Positive eigenvalues of [[0, Cxx^-1 Cxy], [Cyy^-1 Cyx, 0]], descending.
pub fn block_eigen_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let (p, q) = (a.ncols(), b.ncols());
    let cxx = covariance(a, a).try_inverse().unwrap();
    let cyy = covariance(b, b).try_inverse().unwrap();
    let cxy = covariance(a, b);
    let mut m = DMatrix::zeros(p + q, p + q);
    m.view_mut((0, p), (p, q)).copy_from(&(&cxx * &cxy));
    m.view_mut((p, 0), (q, p)).copy_from(&(&cyy * cxy.transpose()));
    let mut ev: Vec<f64> = m
        .complex_eigenvalues()
        .iter()
        .filter(|z| z.re > 0.0)
        .map(|z| {
            assert!(z.im.abs() < 1e-8, "complex eigenvalue {z}");
            z.re
        })
        .collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev.truncate(p.min(q));
    ev
}

/// Distance correlation from the moment form
/// `dCov^2 = S1 + S2 - 2 S3` of the distance covariance, by explicit loops.
pub fn dcor_oracle(x: &[Vec<f64>], y: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let nf = n as f64;
    let dist = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let dcov2 = |u: &[Vec<f64>], w: &[Vec<f64>]| {
        let (mut s1, mut su, mut sw, mut s3) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            for l in 0..n {
                let du = dist(&u[k], &u[l]);
                let dw = dist(&w[k], &w[l]);
                s1 += du * dw;
                su += du;
                sw += dw;
                for m in 0..n {
                    s3 += du * dist(&w[k], &w[m]);
                }
            }
        }
        s1 / (nf * nf) + (su / (nf * nf)) * (sw / (nf * nf)) - 2.0 * s3 / (nf * nf * nf)
    };
    let (vxy, vxx, vyy) = (dcov2(x, y), dcov2(x, x), dcov2(y, y));
    if vxx * vyy <= 0.0 {
        0.0
    } else {
        (vxy.max(0.0) / (vxx * vyy).sqrt()).sqrt()
    }
}

/// Ten uniform features; the target is a noisy sine of the first one.
pub fn planted(n: usize, seed: u64) -> (Sample, Sample) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols: Vec<Vec<f64>> = (0..10).map(|_| (0..n).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<f64> = cols[0]
        .iter()
        .map(|x| (2.0 * std::f64::consts::PI * x).sin() + 0.05 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    (Sample::from_columns(&cols).unwrap(), Sample::from_column(&y).unwrap())
}

/// Random instance for the CCA oracle: `b` mixes `a` with fresh noise.
pub fn cca_instance(rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = rng.random_range(30..80);
    let p = rng.random_range(1..5);
    let q = rng.random_range(1..5);
    let a = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mix = DMatrix::from_fn(p, q, |_, _| rng.sample::<f64, _>(StandardNormal) * 0.5);
    let b = &a * mix + DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    (a, b)
}

/// Rows of random points for the distance correlation oracle.
pub fn dcor_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = rng.random_range(2..=10);
    let (dx, dy) = (rng.random_range(1..3), rng.random_range(1..3));
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dx).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<Vec<f64>> = x.iter().map(|r| (0..dy).map(|j| r[0] * j as f64 + rng.random::<f64>()).collect()).collect();
    (x, y)
}

pub fn rows_sample(rows: &[Vec<f64>]) -> Sample {
    Sample::from_rows(rows.len(), rows[0].len(), &rows.concat()).unwrap()
}

pub const TOL: f64 = 1e-6;

pub fn fixture() -> Value {
    serde_json::from_str(include_str!("../fixtures/r_reference.json")).unwrap()
}

pub fn matrix(v: &Value) -> DMatrix<f64> {
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).unwrap();
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

pub fn max_difference(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    assert_eq!(got.shape(), want.shape());
    (got - want).amax()
}

/// Projection whose last weight row (the constant-one column) is the offset.
pub fn appended(w: &DMatrix<f64>) -> Projection {
    let d = w.nrows() - 1;
    Projection::from_parts(w.rows(0, d).into_owned(), w.row(d).iter().copied().collect()).unwrap()
}

/// Reorders interleaved cos/sin columns into R's all-cosines-then-all-sines.
pub fn r_order(f: &DMatrix<f64>) -> DMatrix<f64> {
    let k = f.ncols() / 2;
    DMatrix::from_fn(f.nrows(), f.ncols(), |i, j| if j < k { f[(i, 2 * j)] } else { f[(i, 2 * (j - k) + 1)] })
}

pub struct Stages {
    pub copula: DMatrix<f64>,
    pub features: DMatrix<f64>,
}

pub fn stages(data: &Value, w: &Value) -> Stages {
    let x = Sample::new(matrix(data)).unwrap();
    let u = copula_transform(&x);
    let f = appended(&matrix(w)).apply(&u).unwrap();
    Stages { copula: u.matrix().clone(), features: r_order(f.matrix()) }
}

