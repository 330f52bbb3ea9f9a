//! Bivariate association patterns with additive Gaussian noise.
//!
//! The input variable is uniform on `[0, 1]` and `y = g(x) + noise`, except
//! for the circle, which is generated parametrically and noised on both
//! coordinates.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{RdcError, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternId {
    Linear,
    Parabolic,
    Cubic,
    SineLowFreq,
    SineHighFreq,
    FourthRoot,
    Circle,
    Step,
}

impl PatternId {
    pub const ALL: [PatternId; 8] = [
        PatternId::Linear,
        PatternId::Parabolic,
        PatternId::Cubic,
        PatternId::SineLowFreq,
        PatternId::SineHighFreq,
        PatternId::FourthRoot,
        PatternId::Circle,
        PatternId::Step,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            PatternId::Linear => "linear",
            PatternId::Parabolic => "parabolic",
            PatternId::Cubic => "cubic",
            PatternId::SineLowFreq => "sine_low_freq",
            PatternId::SineHighFreq => "sine_high_freq",
            PatternId::FourthRoot => "fourth_root",
            PatternId::Circle => "circle",
            PatternId::Step => "step",
        }
    }

    /// Noiseless response for a functional pattern. `None` for the circle.
    pub fn shape(&self, x: f64) -> Option<f64> {
        let third = 1.0 / 3.0;
        Some(match self {
            PatternId::Linear => x,
            PatternId::Parabolic => 4.0 * (x - 0.5).powi(2),
            PatternId::Cubic => {
                let z = x - third;
                128.0 * z.powi(3) - 48.0 * z.powi(2) - 12.0 * z
            }
            PatternId::SineLowFreq => (4.0 * PI * x).sin(),
            PatternId::SineHighFreq => (16.0 * PI * x).sin(),
            PatternId::FourthRoot => x.powf(0.25),
            PatternId::Step => {
                if x > 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            PatternId::Circle => return None,
        })
    }
}

impl std::fmt::Display for PatternId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for PatternId {
    type Err = RdcError;

    fn from_str(s: &str) -> Result<Self> {
        PatternId::ALL.into_iter().find(|p| p.tag() == s).ok_or_else(|| {
            let valid: Vec<&str> = PatternId::ALL.iter().map(|p| p.tag()).collect();
            RdcError::InvalidInput(format!("unknown pattern `{s}`; valid: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub pattern: PatternId,
    pub noise_sd: f64,
    pub seed: u64,
}

fn check(n: usize, noise_sd: f64) -> Result<()> {
    if n < 2 {
        return Err(RdcError::InvalidInput(format!("pattern samples need n >= 2, got {n}")));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) {
        return Err(RdcError::InvalidInput(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    Ok(())
}

fn circle_point(t: f64) -> (f64, f64) {
    let (s, c) = (2.0 * PI * t).sin_cos();
    (c / 2.0 + 0.5, s / 2.0 + 0.5)
}

/// Draws `n` points of `pattern`.
///
/// Draw order: `n` uniforms, then `n` response noises, then (circle only)
/// `n` noises for the x coordinate.
pub fn generate(pattern: PatternId, n: usize, noise_sd: f64, seed: u64) -> Result<PatternSample> {
    check(n, noise_sd)?;
    let mut rng = seed::rng(seed);
    let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let eps_y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let (x, y) = match pattern {
        PatternId::Circle => {
            let eps_x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            t.iter()
                .zip(eps_x.iter().zip(&eps_y))
                .map(|(&t, (ex, ey))| {
                    let (cx, cy) = circle_point(t);
                    (cx + noise_sd * ex, cy + noise_sd * ey)
                })
                .unzip()
        }
        _ => {
            let y = t
                .iter()
                .zip(&eps_y)
                .map(|(&x, e)| pattern.shape(x).expect("functional pattern") + noise_sd * e)
                .collect();
            (t, y)
        }
    };
    Ok(PatternSample { x, y, pattern, noise_sd, seed })
}

/// Replaces `x` with a fresh draw from the pattern's x-marginal, keeping `y`.
pub fn independent_surrogate(s: &PatternSample, seed: u64) -> PatternSample {
    let n = s.x.len();
    let mut rng = seed::rng(seed);
    let x = match s.pattern {
        PatternId::Circle => {
            let t: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            t.into_iter()
                .map(|t| circle_point(t).0 + s.noise_sd * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        _ => (0..n).map(|_| rng.random::<f64>()).collect(),
    };
    PatternSample { x, y: s.y.clone(), pattern: s.pattern, noise_sd: s.noise_sd, seed }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GridSpacing {
    #[default]
    Linear,
    Geometric,
}

/// Noise variances from `min_var` to `max_var` inclusive.
pub fn noise_variances(levels: usize, min_var: f64, max_var: f64, spacing: GridSpacing) -> Result<Vec<f64>> {
    if levels == 0 || !(min_var > 0.0 && max_var >= min_var) {
        return Err(RdcError::InvalidInput("noise grid needs levels >= 1 and 0 < min <= max".into()));
    }
    if levels == 1 {
        return Ok(vec![min_var]);
    }
    let steps = (levels - 1) as f64;
    Ok((0..levels)
        .map(|i| {
            let f = i as f64 / steps;
            match spacing {
                GridSpacing::Linear => min_var + f * (max_var - min_var),
                GridSpacing::Geometric => min_var * (max_var / min_var).powf(f),
            }
        })
        .collect())
}

/// The default 30-level grid of variances from 1/30 to 3.
pub fn default_noise_variances() -> Vec<f64> {
    noise_variances(30, 1.0 / 30.0, 3.0, GridSpacing::Linear).expect("valid default grid")
}
