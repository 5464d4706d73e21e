//! Per-class summary statistics and Gaussian kernel density curves.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::ClassifierError;

/// Sample statistics; `std_dev` uses the `n - 1` divisor (0 when `n == 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub mean: f64,
    pub std_dev: f64,
    pub n: usize,
}

pub fn sample_stats(scores: &[f64]) -> Result<ClassStats, ClassifierError> {
    if scores.is_empty() {
        return Err(ClassifierError::EmptyInput);
    }
    let n = scores.len();
    let mean = scores.iter().sum::<f64>() / n as f64;
    let std_dev = if n > 1 {
        let ss: f64 = scores.iter().map(|s| (s - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(ClassStats { mean, std_dev, n })
}

/// Statistics for class 0 and class 1.
pub fn class_stats(scores: &[f64], labels: &[u8]) -> Result<[ClassStats; 2], ClassifierError> {
    if scores.len() != labels.len() {
        return Err(ClassifierError::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    let mut groups: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for (&s, &l) in scores.iter().zip(labels) {
        match l {
            0 | 1 => groups[l as usize].push(s),
            bad => return Err(ClassifierError::InvalidLabel(bad)),
        }
    }
    Ok([sample_stats(&groups[0])?, sample_stats(&groups[1])?])
}

pub const KDE_GRID_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeCurve {
    pub fn trapezoid_integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
            .sum()
    }

    /// Density at an arbitrary point (not restricted to the grid).
    pub fn evaluate(samples: &[f64], bandwidth: f64, x: f64) -> f64 {
        let norm = 1.0 / (samples.len() as f64 * bandwidth * (2.0 * PI).sqrt());
        samples
            .iter()
            .map(|s| {
                let u = (x - s) / bandwidth;
                (-0.5 * u * u).exp()
            })
            .sum::<f64>()
            * norm
    }
}

/// Silverman's rule of thumb: `1.06 · σ̂ · n^(-1/5)`.
pub fn silverman_bandwidth(scores: &[f64]) -> Result<f64, ClassifierError> {
    let stats = sample_stats(scores)?;
    let h = 1.06 * stats.std_dev * (scores.len() as f64).powf(-0.2);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(ClassifierError::Degenerate("all scores identical; bandwidth is zero"))
    }
}

/// Gaussian KDE on 201 evenly spaced points over `[min - 3h, max + 3h]`.
pub fn kde(scores: &[f64], bandwidth: Option<f64>) -> Result<KdeCurve, ClassifierError> {
    if scores.len() < 2 {
        return Err(ClassifierError::Degenerate("KDE needs at least two scores"));
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(ClassifierError::NonFinite(i));
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(_) => return Err(ClassifierError::Degenerate("bandwidth must be positive")),
        None => silverman_bandwidth(scores)?,
    };
    let lo = scores.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let last = (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / last)
        .collect();
    let density = grid
        .iter()
        .map(|&x| KdeCurve::evaluate(scores, h, x))
        .collect();
    Ok(KdeCurve {
        grid,
        density,
        bandwidth: h,
    })
}
