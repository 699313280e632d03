//! Computational aesthetic measures on 512x512 RGB images.
//!
//! * BFL: closeness of the sorted luminosity histogram to Benford's law.
//! * RRZ: KL divergence of the color-gradient response distribution from its
//!   fitted Gaussian.
//! * FRD: distance of the box-counting dimension from 1.35.

mod benford;
mod fractal;
mod gradient;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{Image, Rgb, CANVAS_SIZE};

pub use benford::{
    benford_distance, benford_from_histogram, benford_measure, luminosity, luminosity_bin,
    LuminosityHistogram, BENFORD, D_MAX, LUMINOSITY_BINS,
};
pub use fractal::{
    box_counts, fractal_dimension, frd_measure, linear_fit, BoxCountResult, BOX_SIZES,
    PREFERRED_DIMENSION,
};
pub use gradient::{
    bell_curve_measure, gradient_distribution, gradient_responses, kl_divergence,
    GradientDistribution, DEFAULT_THRESHOLD, GRADIENT_BINS, Q_FLOOR,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeasureId {
    Bfl,
    Rrz,
    Frd,
}

impl MeasureId {
    pub const ALL: [MeasureId; 3] = [MeasureId::Bfl, MeasureId::Rrz, MeasureId::Frd];

    pub fn as_str(self) -> &'static str {
        match self {
            MeasureId::Bfl => "BFL",
            MeasureId::Rrz => "RRZ",
            MeasureId::Frd => "FRD",
        }
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MeasureId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bfl" => Ok(MeasureId::Bfl),
            "rrz" => Ok(MeasureId::Rrz),
            "frd" => Ok(MeasureId::Frd),
            other => Err(Error::invalid(format!("unknown measure `{other}`"))),
        }
    }
}

/// Settings the measures depend on; recorded with every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasureConfig {
    /// Detection threshold for gradient responses.
    pub threshold: f64,
    /// Pixels of this color are background for box counting.
    pub background: Rgb,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig {
            threshold: DEFAULT_THRESHOLD,
            background: [255, 255, 255],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureReport {
    pub bfl: f64,
    pub rrz: f64,
    pub frd: f64,
    /// Set when the image has no foreground; FRD is then 0.
    pub frd_undefined: bool,
    pub histogram: LuminosityHistogram,
    pub gradient: Option<GradientDistribution>,
    pub box_count: Option<BoxCountResult>,
    pub config: MeasureConfig,
}

impl MeasureReport {
    pub fn get(&self, id: MeasureId) -> f64 {
        match id {
            MeasureId::Bfl => self.bfl,
            MeasureId::Rrz => self.rrz,
            MeasureId::Frd => self.frd,
        }
    }

    pub fn dimension(&self) -> Option<f64> {
        self.box_count.as_ref().map(|b| b.dimension)
    }

    pub fn r_squared(&self) -> Option<f64> {
        self.box_count.as_ref().map(|b| b.r_squared)
    }
}

/// All three measures plus their intermediates. Only dimension mismatches
/// are errors; degenerate inputs map to the documented conventions.
pub fn measure_all(image: &Image, config: &MeasureConfig) -> Result<MeasureReport> {
    if image.width() != CANVAS_SIZE || image.height() != CANVAS_SIZE {
        return Err(Error::Dimension {
            width: image.width(),
            height: image.height(),
            expected_width: CANVAS_SIZE,
            expected_height: CANVAS_SIZE,
        });
    }
    let histogram = LuminosityHistogram::from_image(image).expect("512x512 image has pixels");
    let bfl = benford_from_histogram(&histogram);

    let gradient = match gradient_distribution(image, config.threshold) {
        Ok(g) => Some(g),
        Err(Error::DegenerateDistribution { .. }) => None,
        Err(e) => return Err(e),
    };
    let rrz = gradient.as_ref().map_or(0.0, |g| kl_divergence(&g.p, &g.q));

    let box_count = match fractal_dimension(image, config.background) {
        Ok(b) => Some(b),
        Err(Error::UndefinedDimension) => None,
        Err(e) => return Err(e),
    };
    let frd = box_count.as_ref().map_or(0.0, |b| frd_measure(b.dimension));

    Ok(MeasureReport {
        bfl,
        rrz,
        frd,
        frd_undefined: box_count.is_none(),
        histogram,
        gradient,
        box_count,
        config: config.clone(),
    })
}

/// Only the requested measure, skipping the work for the other two.
pub fn measure_one(image: &Image, id: MeasureId, config: &MeasureConfig) -> Result<f64> {
    match id {
        MeasureId::Bfl => Ok(benford_measure(image)),
        MeasureId::Rrz => Ok(bell_curve_measure(image, config.threshold)),
        MeasureId::Frd => match fractal_dimension(image, config.background) {
            Ok(b) => Ok(frd_measure(b.dimension)),
            Err(Error::UndefinedDimension) => Ok(0.0),
            Err(e) => Err(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern_gen::{generate_pattern, uniform_configs, DesignParams};
    use crate::raster::{rasterize, CanvasSpec, Palette};

    #[test]
    fn blank_canvas_report() {
        let img = Image::filled(512, 512, [255, 255, 255]);
        let r = measure_all(&img, &MeasureConfig::default()).unwrap();
        assert!(r.bfl.abs() < 1e-9);
        assert_eq!(r.rrz, 0.0);
        assert_eq!(r.frd, 0.0);
        assert!(r.frd_undefined);
        assert!(r.gradient.is_none() && r.box_count.is_none());
    }

    #[test]
    fn report_matches_individual_measures() {
        let pattern = generate_pattern(&uniform_configs(&DesignParams::default()), 21).unwrap();
        let img = rasterize(
            &pattern,
            &CanvasSpec::default(),
            &Palette::default().with_base_hue(0.4),
        )
        .unwrap();
        let cfg = MeasureConfig::default();
        let r = measure_all(&img, &cfg).unwrap();
        assert_eq!(r.bfl, benford_measure(&img));
        assert_eq!(r.rrz, bell_curve_measure(&img, cfg.threshold));
        let d = fractal_dimension(&img, cfg.background).unwrap().dimension;
        assert_eq!(r.frd, frd_measure(d));
        for id in MeasureId::ALL {
            assert_eq!(measure_one(&img, id, &cfg).unwrap(), r.get(id));
        }

        assert!(r.bfl > 0.0 && r.bfl < 1.0);
        assert!(r.rrz >= 0.0);
        assert!(d > 1.0 && d < 2.0, "d = {d}");
    }

    #[test]
    fn wrong_dimensions_are_rejected() {
        let img = Image::filled(64, 64, [0, 0, 0]);
        assert!(matches!(
            measure_all(&img, &MeasureConfig::default()),
            Err(Error::Dimension { width: 64, .. })
        ));
    }

    #[test]
    fn measure_ids_round_trip_through_strings() {
        for id in MeasureId::ALL {
            assert_eq!(id.as_str().parse::<MeasureId>().unwrap(), id);
        }
    }
}
