//! One-at-a-time parameter sweeps: mean measures per template, grid value and
//! noise level.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aesthetics::{measure_all, MeasureConfig, MeasureId};
use crate::error::{Error, Result};
use crate::guidance::{sample_hue, sample_seed, Scale};
use crate::harness::config::Grids;
use crate::pattern_gen::{generate_pattern, uniform_configs, DesignParams, Template};
use crate::raster::{rasterize, CanvasSpec, Palette};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    NumBurrows,
    MaxTrenches,
    PelletDistance,
}

impl SweptParameter {
    pub const ALL: [SweptParameter; 3] = [
        SweptParameter::NumBurrows,
        SweptParameter::MaxTrenches,
        SweptParameter::PelletDistance,
    ];

    /// Field name in [`DesignParams`].
    pub fn as_str(self) -> &'static str {
        match self {
            SweptParameter::NumBurrows => "num_burrows",
            SweptParameter::MaxTrenches => "max_trenches",
            SweptParameter::PelletDistance => "pellet_distance",
        }
    }

    pub fn set(self, params: &mut DesignParams, value: f64) {
        match self {
            SweptParameter::NumBurrows => params.num_burrows = value as usize,
            SweptParameter::MaxTrenches => params.max_trenches = value as usize,
            SweptParameter::PelletDistance => params.pellet_distance = value,
        }
    }

    fn grid(self, grids: &Grids) -> Vec<f64> {
        match self {
            SweptParameter::NumBurrows => grids.num_burrows.iter().map(|&v| v as f64).collect(),
            SweptParameter::MaxTrenches => grids.max_trenches.iter().map(|&v| v as f64).collect(),
            SweptParameter::PelletDistance => grids.pellet_distance.clone(),
        }
    }
}

impl fmt::Display for SweptParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweptParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweptParameter::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown parameter `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub template: Template,
    pub parameter: SweptParameter,
    pub value: f64,
    pub noise_variance: f64,
    pub measure: MeasureId,
    /// Mean over all `n * m` renderings.
    pub mean: f64,
    /// Sample standard deviation of the `n` per-pattern means (each averaged
    /// over its `m` hues).
    pub std: f64,
    pub n: usize,
    pub m: usize,
}

impl SweepRow {
    pub fn standard_error(&self) -> f64 {
        self.std / (self.n as f64).sqrt()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "template",
            "parameter",
            "value",
            "noise_variance",
            "measure",
            "mean",
            "std",
            "n",
            "m",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.template.to_string(),
                r.parameter.to_string(),
                r.value.to_string(),
                r.noise_variance.to_string(),
                r.measure.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                r.n.to_string(),
                r.m.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut rows = Vec::new();
        for record in r.records() {
            let rec = record?;
            if rec.len() != 9 {
                return Err(Error::Config(format!(
                    "sweep row has {} fields, expected 9",
                    rec.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad number `{}` in sweep CSV", &rec[i])))
            };
            let count = |i: usize| -> Result<usize> {
                rec[i]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad count `{}` in sweep CSV", &rec[i])))
            };
            rows.push(SweepRow {
                template: rec[0].parse().map_err(config_error)?,
                parameter: rec[1].parse().map_err(config_error)?,
                value: num(2)?,
                noise_variance: num(3)?,
                measure: rec[4].parse().map_err(config_error)?,
                mean: num(5)?,
                std: num(6)?,
                n: count(7)?,
                m: count(8)?,
            });
        }
        Ok(SweepResult { rows })
    }

    /// Row for an exact grid point, if present.
    pub fn find(
        &self,
        template: Template,
        parameter: SweptParameter,
        value: f64,
        noise_variance: f64,
        measure: MeasureId,
    ) -> Option<&SweepRow> {
        self.rows.iter().find(|r| {
            r.template == template
                && r.parameter == parameter
                && r.value == value
                && r.noise_variance == noise_variance
                && r.measure == measure
        })
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::InvalidParameter(msg) => Error::Config(msg),
        other => other,
    }
}

/// What to sweep and how densely to sample it.
#[derive(Clone, Debug)]
pub struct SweepSpec<'a> {
    pub defaults: &'a DesignParams,
    pub grids: &'a Grids,
    pub templates: &'a [Template],
    pub scale: Scale,
    pub canvas: &'a CanvasSpec,
    pub palette: &'a Palette,
    pub measure: &'a MeasureConfig,
    pub seed: u64,
    pub workers: usize,
}

/// Per-measure mean over `m` hues for every sample of one configuration.
fn sample_means(params: &DesignParams, s: usize, spec: &SweepSpec<'_>) -> Result<[f64; 3]> {
    let pattern = generate_pattern(&uniform_configs(params), sample_seed(spec.seed, s))?;
    let mut sums = [0.0; 3];
    for h in 0..spec.scale.hues {
        let palette = spec
            .palette
            .clone()
            .with_base_hue(sample_hue(spec.seed, s, h));
        let image = rasterize(&pattern, spec.canvas, &palette)?;
        let report = measure_all(&image, spec.measure)?;
        for (i, id) in MeasureId::ALL.iter().enumerate() {
            sums[i] += report.get(*id);
        }
    }
    Ok(sums.map(|x| x / spec.scale.hues as f64))
}

pub(crate) fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Bit-exact key of a parameter point, so shared points are computed once.
type PointKey = (Template, u64, usize, usize, u64);

fn key(params: &DesignParams) -> PointKey {
    (
        params.template,
        params.noise_variance.to_bits(),
        params.num_burrows,
        params.max_trenches,
        params.pellet_distance.to_bits(),
    )
}

/// Runs the sweep. Every grid point reuses the same pattern seeds and hues
/// (common random numbers), so differences between points reflect the
/// parameters rather than sampling noise. Rows are ordered by template,
/// parameter, grid value, noise level and measure regardless of scheduling.
pub fn run_sweep(spec: &SweepSpec<'_>) -> Result<SweepResult> {
    spec.grids.validate()?;
    if spec.templates.is_empty() || spec.scale.images == 0 || spec.scale.hues == 0 {
        return Err(Error::invalid(
            "sweep needs templates and at least one image and hue",
        ));
    }

    let mut points: Vec<(Template, SweptParameter, f64, f64, DesignParams)> = Vec::new();
    for &t in spec.templates {
        for p in SweptParameter::ALL {
            for v in p.grid(spec.grids) {
                for &noise in &spec.grids.noise_variance {
                    let mut params = spec.defaults.clone().with_template(t);
                    params.noise_variance = noise;
                    p.set(&mut params, v);
                    params.validate()?;
                    points.push((t, p, v, noise, params));
                }
            }
        }
    }

    let mut distinct: BTreeMap<PointKey, DesignParams> = BTreeMap::new();
    for (.., params) in &points {
        distinct
            .entry(key(params))
            .or_insert_with(|| params.clone());
    }
    let jobs: Vec<(PointKey, &DesignParams, usize)> = distinct
        .iter()
        .flat_map(|(k, p)| (0..spec.scale.images).map(move |s| (*k, p, s)))
        .collect();

    let results: Vec<Result<[f64; 3]>> = pool(spec.workers)?.install(|| {
        jobs.par_iter()
            .map(|(_, p, s)| sample_means(p, *s, spec))
            .collect()
    });

    let mut per_point: BTreeMap<PointKey, Vec<[f64; 3]>> = BTreeMap::new();
    for ((k, _, _), r) in jobs.iter().zip(results) {
        per_point.entry(*k).or_default().push(r?);
    }

    let n = spec.scale.images;
    let mut rows = Vec::with_capacity(points.len() * 3);
    for (t, p, v, noise, params) in &points {
        let samples = &per_point[&key(params)];
        for (i, id) in MeasureId::ALL.iter().enumerate() {
            let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(SweepRow {
                template: *t,
                parameter: *p,
                value: *v,
                noise_variance: *noise,
                measure: *id,
                mean,
                std,
                n,
                m: spec.scale.hues,
            });
        }
    }
    Ok(SweepResult { rows })
}
