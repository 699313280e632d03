//! Benford's-law measure on the luminosity histogram.

use serde::{Deserialize, Serialize};

use crate::raster::{Image, Rgb};

/// Benford first-digit distribution, most to least frequent.
pub const BENFORD: [f64; 9] = [
    0.301, 0.176, 0.125, 0.097, 0.079, 0.067, 0.058, 0.051, 0.046,
];

/// Largest attainable L1 distance from [`BENFORD`]: reached when all mass sits
/// in one bin.
pub const D_MAX: f64 = 1.398;

pub const LUMINOSITY_BINS: usize = 9;

pub fn luminosity(rgb: Rgb) -> f64 {
    0.2126 * rgb[0] as f64 + 0.7152 * rgb[1] as f64 + 0.0722 * rgb[2] as f64
}

/// Index of the equal-width bin over `[0, 255]` holding `lum`.
pub fn luminosity_bin(lum: f64) -> usize {
    ((lum / 255.0 * LUMINOSITY_BINS as f64).floor().max(0.0) as usize).min(LUMINOSITY_BINS - 1)
}

/// Normalized 9-bin luminosity histogram, sorted in descending order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LuminosityHistogram {
    bins: [f64; LUMINOSITY_BINS],
}

impl LuminosityHistogram {
    pub fn from_counts(counts: [u64; LUMINOSITY_BINS]) -> Option<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return None;
        }
        let mut bins = counts.map(|c| c as f64 / total as f64);
        bins.sort_by(|a, b| b.total_cmp(a));
        Some(LuminosityHistogram { bins })
    }

    /// `None` for an image without pixels.
    pub fn from_image(image: &Image) -> Option<Self> {
        let mut counts = [0u64; LUMINOSITY_BINS];
        for &px in image.pixels() {
            counts[luminosity_bin(luminosity(px))] += 1;
        }
        Self::from_counts(counts)
    }

    pub fn bins(&self) -> &[f64; LUMINOSITY_BINS] {
        &self.bins
    }
}

/// `d_total`: L1 distance between a sorted histogram and [`BENFORD`].
pub fn benford_distance(sorted: &[f64; LUMINOSITY_BINS]) -> f64 {
    sorted.iter().zip(BENFORD).map(|(h, b)| (h - b).abs()).sum()
}

pub fn benford_from_histogram(hist: &LuminosityHistogram) -> f64 {
    (1.0 - benford_distance(hist.bins()) / D_MAX).clamp(0.0, 1.0)
}

/// BFL in `[0, 1]`; 1 when the sorted luminosity histogram follows Benford's
/// law exactly. An image without pixels scores 0.
pub fn benford_measure(image: &Image) -> f64 {
    LuminosityHistogram::from_image(image)
        .map(|h| benford_from_histogram(&h))
        .unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Row image with `counts[i]` pixels of a gray level inside bin `i`.
    fn banded(counts: &[u64]) -> Image {
        let pixels: Vec<Rgb> = counts
            .iter()
            .enumerate()
            .flat_map(|(bin, &n)| {
                let level = (bin as f64 * 255.0 / 9.0 + 10.0) as u8;
                std::iter::repeat_n([level; 3], n as usize)
            })
            .collect();
        Image::from_pixels(pixels.len() as u32, 1, pixels).unwrap()
    }

    #[test]
    fn luminosity_examples() {
        assert!((luminosity([255, 255, 255]) - 255.0).abs() < 1e-9);
        assert_eq!(luminosity([0, 0, 0]), 0.0);
        assert!((luminosity([255, 0, 0]) - 54.213).abs() < 1e-9);
    }

    #[test]
    fn benford_reference_sums_to_one_and_constant_attains_dmax() {
        assert!((BENFORD.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut constant = [0.0; 9];
        constant[0] = 1.0;
        assert!((benford_distance(&constant) - D_MAX).abs() < 1e-12);
    }

    #[test]
    fn constant_image_scores_zero() {
        let img = Image::filled(64, 64, [12, 200, 40]);
        assert!(benford_measure(&img).abs() < 1e-9);
    }

    #[test]
    fn benford_shaped_histogram_scores_one() {
        let counts = [46, 301, 58, 125, 79, 97, 176, 67, 51];
        assert_eq!(counts.iter().sum::<u64>(), 1000);
        assert!((benford_measure(&banded(&counts)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn uniform_histogram_matches_hand_sum() {
        let hand: f64 = BENFORD.iter().map(|b| (1.0 / 9.0 - b).abs()).sum();
        assert!((hand - 0.537_333).abs() < 1e-5);
        let bfl = benford_measure(&banded(&[7; 9]));
        assert!((bfl - (1.0 - hand / D_MAX)).abs() < 1e-12);
        assert!((bfl - 0.6157).abs() < 1e-3);
    }

    #[test]
    fn levels_land_in_expected_bins() {
        for bin in 0..9 {
            let level = (bin as f64 * 255.0 / 9.0 + 10.0) as u8;
            assert_eq!(luminosity_bin(luminosity([level; 3])), bin);
        }
        assert_eq!(luminosity_bin(255.0), 8);
        assert_eq!(luminosity_bin(0.0), 0);
    }

    proptest! {
        #[test]
        fn distance_never_exceeds_dmax(raw in proptest::array::uniform9(0.0f64..1.0)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let mut h = raw.map(|v| v / total);
            h.sort_by(|a, b| b.total_cmp(a));
            prop_assert!(benford_distance(&h) <= D_MAX + 1e-9);
        }

        #[test]
        fn bfl_ignores_pixel_positions(
            levels in proptest::collection::vec(any::<u8>(), 16..200),
            rot in 0usize..200,
        ) {
            let pixels: Vec<Rgb> = levels.iter().map(|&l| [l, l / 2, 255 - l]).collect();
            let mut shuffled = pixels.clone();
            let n = shuffled.len();
            shuffled.rotate_left(rot % n);
            shuffled.reverse();
            let a = Image::from_pixels(n as u32, 1, pixels).unwrap();
            let b = Image::from_pixels(1, n as u32, shuffled).unwrap();
            let (x, y) = (benford_measure(&a), benford_measure(&b));
            prop_assert_eq!(x, y);
            prop_assert!((0.0..=1.0).contains(&x));
        }
    }
}
