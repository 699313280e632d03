//! Bell-curve (color gradient normality) measure.
//!
//! Per interior pixel the RGB central differences are combined into one
//! stimulus, divided by a detection threshold, and every response above 1 is
//! kept. The retained responses are histogrammed into 100 bins and compared
//! with the Gaussian of the same mean and variance by KL divergence.

use libm::erf;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Image;

pub const GRADIENT_BINS: usize = 100;

/// Detection threshold on `[0, 1]`-scaled channels.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Replaces empty Gaussian bins under observed mass before renormalizing.
pub const Q_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientDistribution {
    /// Observed response histogram.
    pub p: Vec<f64>,
    /// Discretized Gaussian over the same bin edges.
    pub q: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub retained: usize,
}

/// Responses `S / threshold` above 1, in row-major pixel order. Border pixels
/// have no central difference and are skipped.
pub fn gradient_responses(image: &Image, threshold: f64) -> Vec<f64> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    if w < 3 || h < 3 {
        return Vec::new();
    }
    let px = image.pixels();
    let mut out = Vec::new();
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let (left, right) = (px[y * w + x - 1], px[y * w + x + 1]);
            let (up, down) = (px[(y - 1) * w + x], px[(y + 1) * w + x]);
            let mut sq = 0.0;
            for c in 0..3 {
                let dx = (right[c] as f64 - left[c] as f64) / 510.0;
                let dy = (down[c] as f64 - up[c] as f64) / 510.0;
                sq += dx * dx + dy * dy;
            }
            let response = sq.sqrt() / threshold;
            if response > 1.0 {
                out.push(response);
            }
        }
    }
    out
}

fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * (1.0 + erf((x - mean) / (sd * std::f64::consts::SQRT_2)))
}

impl GradientDistribution {
    /// Builds the observed and expected distributions from retained
    /// responses. Fewer than two responses, or responses without spread,
    /// leave nothing to fit.
    pub fn from_responses(responses: &[f64]) -> Result<Self> {
        let n = responses.len();
        let degenerate = Error::DegenerateDistribution { retained: n };
        if n < 2 {
            return Err(degenerate);
        }
        let min = responses.iter().copied().fold(f64::INFINITY, f64::min);
        let max = responses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = responses.iter().sum::<f64>() / n as f64;
        let variance = responses.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64;
        if !(max > min) || !(variance > 0.0) {
            return Err(degenerate);
        }

        let width = (max - min) / GRADIENT_BINS as f64;
        let mut counts = vec![0u64; GRADIENT_BINS];
        for &r in responses {
            let bin = (((r - min) / width).floor() as usize).min(GRADIENT_BINS - 1);
            counts[bin] += 1;
        }
        let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();

        let sd = variance.sqrt();
        let edge = |i: usize| {
            if i == GRADIENT_BINS {
                max
            } else {
                min + i as f64 * width
            }
        };
        let mut q: Vec<f64> = (0..GRADIENT_BINS)
            .map(|i| (normal_cdf(edge(i + 1), mean, sd) - normal_cdf(edge(i), mean, sd)).max(0.0))
            .collect();
        for (qi, &pi) in q.iter_mut().zip(&p) {
            if pi > 0.0 && *qi <= 0.0 {
                *qi = Q_FLOOR;
            }
        }
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|qi| *qi /= total);

        Ok(GradientDistribution {
            p,
            q,
            mean,
            variance,
            min,
            max,
            retained: n,
        })
    }
}

pub fn gradient_distribution(image: &Image, threshold: f64) -> Result<GradientDistribution> {
    GradientDistribution::from_responses(&gradient_responses(image, threshold))
}

/// `sum p_i ln(p_i / q_i)` over bins with `p_i > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum()
}

/// RRZ; 0 when the gradient distribution is degenerate.
pub fn bell_curve_measure(image: &Image, threshold: f64) -> f64 {
    gradient_distribution(image, threshold)
        .map(|g| kl_divergence(&g.p, &g.q))
        .unwrap_or(0.0)
}
