use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::aesthetics::MeasureConfig;
use crate::error::{Error, Result};
use crate::guidance::Scale;
use crate::pattern_gen::{DesignParams, Template};
use crate::raster::{CanvasSpec, Palette};

/// Sample counts of the reference protocol: 100 images, 70 hues each.
pub const PAPER_SCALE: Scale = Scale {
    images: 100,
    hues: 70,
};
pub const DESK_SCALE: Scale = Scale {
    images: 20,
    hues: 10,
};

/// One-at-a-time sweep grids; parameters not being swept stay at their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Grids {
    pub num_burrows: Vec<usize>,
    pub max_trenches: Vec<usize>,
    pub pellet_distance: Vec<f64>,
    pub noise_variance: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Grids {
            num_burrows: vec![2, 3, 6, 10],
            max_trenches: vec![20, 50, 100],
            pellet_distance: vec![0.05, 0.25, 1.0],
            noise_variance: vec![0.3, 0.8],
        }
    }
}

impl Grids {
    pub fn validate(&self) -> Result<()> {
        if self.num_burrows.is_empty()
            || self.max_trenches.is_empty()
            || self.pellet_distance.is_empty()
            || self.noise_variance.is_empty()
        {
            return Err(Error::Config("sweep grids must be non-empty".into()));
        }
        if self.num_burrows.contains(&0) || self.max_trenches.contains(&0) {
            return Err(Error::Config(
                "num_burrows and max_trenches grids must be positive".into(),
            ));
        }
        if self
            .pellet_distance
            .iter()
            .any(|&d| !(d > 0.0) || !d.is_finite())
        {
            return Err(Error::Config(
                "pellet_distance grid must be positive".into(),
            ));
        }
        if self
            .noise_variance
            .iter()
            .any(|&v| !(v >= 0.0) || !v.is_finite())
        {
            return Err(Error::Config(
                "noise_variance grid must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Everything a command needs. Loaded from JSON, then overridden by flags, and
/// echoed verbatim into every sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub run_id: String,
    /// Drawn from the clock and recorded when absent.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub params: DesignParams,
    pub canvas: CanvasSpec,
    pub palette: Palette,
    /// Draw the base hue of each generated image from its seed instead of
    /// using `palette.base_hue`.
    pub random_hue: bool,
    pub measure: MeasureConfig,
    /// Images written by `generate`.
    pub count: usize,
    pub scale: Scale,
    pub grids: Grids,
    pub templates: Vec<Template>,
    pub max_burrows: usize,
    /// Worker threads for sweeps and comparisons; 0 means one per core.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            run_id: "sb".into(),
            seed: None,
            out: PathBuf::from("out"),
            params: DesignParams::default(),
            canvas: CanvasSpec::default(),
            palette: Palette::default(),
            random_hue: true,
            measure: MeasureConfig::default(),
            count: 1,
            scale: DESK_SCALE,
            grids: Grids::default(),
            templates: Template::ALL.to_vec(),
            max_burrows: 6,
            workers: 0,
        }
    }
}

impl RunConfig {
    /// Reads a config file. A generated sidecar is accepted too; its `config`
    /// member is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let value = match value.get("config") {
            Some(inner) if value.get("pattern").is_some() || value.get("kind").is_some() => {
                inner.clone()
            }
            _ => value,
        };
        serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fills in a missing seed from the clock.
    pub fn resolve_seed(&mut self) -> u64 {
        *self.seed.get_or_insert_with(|| {
            SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_nanos() as u64)
        })
    }

    pub fn validate(&self) -> Result<()> {
        let config = |e: Error| match e {
            Error::InvalidParameter(msg) => Error::Config(msg),
            other => other,
        };
        self.params.validate().map_err(config)?;
        self.canvas.validate().map_err(config)?;
        self.palette.validate().map_err(config)?;
        self.grids.validate()?;
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) {
            return Err(Error::Config(
                "run_id must be a non-empty file name component".into(),
            ));
        }
        if self.scale.images == 0 || self.scale.hues == 0 {
            return Err(Error::Config("n and m must be at least 1".into()));
        }
        if self.templates.is_empty() {
            return Err(Error::Config("templates must be non-empty".into()));
        }
        if !(self.measure.threshold >= 0.0) {
            return Err(Error::Config("threshold must be non-negative".into()));
        }
        Ok(())
    }

    /// `<out>/<run_id>_<seed><suffix>`.
    pub fn artifact(&self, seed: u64, suffix: &str) -> PathBuf {
        self.out.join(format!("{}_{}{}", self.run_id, seed, suffix))
    }
}
