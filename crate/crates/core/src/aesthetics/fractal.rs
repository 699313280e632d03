//! Box-counting dimension and the FRD measure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Image, Rgb, CANVAS_SIZE};

/// Box edge lengths in pixels, coarse to fine.
pub const BOX_SIZES: [u32; 8] = [256, 128, 64, 32, 16, 8, 4, 2];

/// Dimension that maximizes FRD.
pub const PREFERRED_DIMENSION: f64 = 1.35;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxCountResult {
    pub box_sizes: Vec<u32>,
    pub counts: Vec<u64>,
    pub dimension: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r_squared)`.
/// A perfectly flat response counts as a perfect fit.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r_squared)
}

/// Occupied-box counts for [`BOX_SIZES`] on a 512x512 foreground mask.
pub fn box_counts(mask: &[bool]) -> Vec<u64> {
    let side = CANVAS_SIZE as usize;
    debug_assert_eq!(mask.len(), side * side);

    // occupancy on the finest grid, then 2x2 max-pooling up to the coarsest
    let finest = *BOX_SIZES.last().unwrap() as usize;
    let mut cells = side / finest;
    let mut grid = vec![false; cells * cells];
    for (i, &fg) in mask.iter().enumerate() {
        if fg {
            let (x, y) = (i % side, i / side);
            grid[(y / finest) * cells + x / finest] = true;
        }
    }
    let mut counts = vec![grid.iter().filter(|&&b| b).count() as u64];
    while counts.len() < BOX_SIZES.len() {
        let next = cells / 2;
        let mut coarse = vec![false; next * next];
        for y in 0..cells {
            for x in 0..cells {
                if grid[y * cells + x] {
                    coarse[(y / 2) * next + x / 2] = true;
                }
            }
        }
        counts.push(coarse.iter().filter(|&&b| b).count() as u64);
        grid = coarse;
        cells = next;
    }
    counts.reverse();
    counts
}

/// Box-counting dimension of the pixels that differ from `background`.
pub fn fractal_dimension(image: &Image, background: Rgb) -> Result<BoxCountResult> {
    if image.width() != CANVAS_SIZE || image.height() != CANVAS_SIZE {
        return Err(Error::Dimension {
            width: image.width(),
            height: image.height(),
            expected_width: CANVAS_SIZE,
            expected_height: CANVAS_SIZE,
        });
    }
    let mask: Vec<bool> = image.pixels().iter().map(|&p| p != background).collect();
    if !mask.iter().any(|&b| b) {
        return Err(Error::UndefinedDimension);
    }
    let counts = box_counts(&mask);
    let xs: Vec<f64> = BOX_SIZES.iter().map(|&e| (1.0 / e as f64).ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (dimension, _, r_squared) = linear_fit(&xs, &ys);
    Ok(BoxCountResult {
        box_sizes: BOX_SIZES.to_vec(),
        counts,
        dimension,
        r_squared,
    })
}

pub fn frd_measure(dimension: f64) -> f64 {
    (1.0 - (PREFERRED_DIMENSION - dimension).abs()).max(0.0)
}
