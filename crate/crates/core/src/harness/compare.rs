//! Guided-versus-template comparison under a shared burrow budget.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aesthetics::{measure_all, MeasureConfig, MeasureId};
use crate::error::{Error, Result};
use crate::guidance::{
    calibrate_expectations, guided_generate, random_template, sample_hue, sample_seed, Expectation,
    GuidedRun, GuidedSetup, LookupTable, Scale,
};
use crate::harness::sweep::pool;
use crate::pattern_gen::{generate_pattern, DesignParams, Template};
use crate::raster::{rasterize, CanvasSpec, Image, Palette};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Guided by the given measure.
    Guided(MeasureId),
    /// Every burrow uses the given template.
    Plain(Template),
}

impl Variant {
    pub fn all(guides: &[MeasureId]) -> Vec<Variant> {
        guides
            .iter()
            .map(|&m| Variant::Guided(m))
            .chain(Template::ALL.iter().map(|&t| Variant::Plain(t)))
            .collect()
    }

    pub fn label(self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Variant::Guided(m) => write!(f, "GC_{}", &m.as_str()[..1]),
            Variant::Plain(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub variant: String,
    pub measure: MeasureId,
    pub mean: f64,
    /// Sample standard deviation of the per-pattern means over hues.
    pub std: f64,
    pub n: usize,
    pub m: usize,
}

/// First guided run of a variant, kept for inspection.
#[derive(Clone, Debug)]
pub struct GuidedExample {
    pub variant: Variant,
    pub initial_template: Template,
    pub run: GuidedRun,
}

#[derive(Clone, Debug)]
pub struct Comparison {
    pub expectations: BTreeMap<MeasureId, Expectation>,
    pub rows: Vec<ComparisonRow>,
    pub examples: Vec<GuidedExample>,
}

impl Comparison {
    pub fn mean(&self, variant: Variant, measure: MeasureId) -> Option<f64> {
        let label = variant.label();
        self.rows
            .iter()
            .find(|r| r.variant == label && r.measure == measure)
            .map(|r| r.mean)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["variant", "measure", "mean", "std", "n", "m"])?;
        for r in &self.rows {
            w.write_record([
                r.variant.clone(),
                r.measure.to_string(),
                r.mean.to_string(),
                r.std.to_string(),
                r.n.to_string(),
                r.m.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Debug)]
pub struct ComparisonSpec<'a> {
    pub defaults: &'a DesignParams,
    pub guides: &'a [MeasureId],
    pub max_burrows: usize,
    pub scale: Scale,
    pub canvas: &'a CanvasSpec,
    pub palette: &'a Palette,
    pub measure: &'a MeasureConfig,
    pub seed: u64,
    pub workers: usize,
}

/// Configurations whose mean measure is the expectation for `measure`: the
/// default parameters with each of the table's actions for that measure
/// applied, all with `max_burrows` burrows. An empty entry falls back to the
/// four templates at their defaults.
pub fn candidate_configs(
    spec: &ComparisonSpec<'_>,
    table: &LookupTable,
    measure: MeasureId,
) -> Vec<DesignParams> {
    let base = DesignParams {
        num_burrows: spec.max_burrows,
        ..spec.defaults.clone()
    };
    let actions = table.actions(measure);
    if actions.is_empty() {
        Template::ALL
            .iter()
            .map(|&t| base.clone().with_template(t))
            .collect()
    } else {
        actions.iter().map(|a| a.action.apply(&base)).collect()
    }
}

pub fn calibrate(
    spec: &ComparisonSpec<'_>,
    table: &LookupTable,
) -> Result<BTreeMap<MeasureId, Expectation>> {
    // separate stream from the comparison samples so the threshold is not
    // fitted to the very images it is judged on
    let seed = crate::rng::derive_seed(spec.seed, &[0xCA11]);
    let mut out = BTreeMap::new();
    for &id in spec.guides {
        let configs = candidate_configs(spec, table, id);
        let e = calibrate_expectations(
            id,
            &configs,
            spec.scale,
            spec.canvas,
            spec.palette,
            spec.measure,
            seed,
        )?;
        out.insert(id, e);
    }
    Ok(out)
}

struct SampleOutcome {
    means: [f64; 3],
    example: Option<GuidedExample>,
}

fn run_sample(
    variant: Variant,
    s: usize,
    spec: &ComparisonSpec<'_>,
    table: &LookupTable,
    expectations: &BTreeMap<MeasureId, Expectation>,
) -> Result<SampleOutcome> {
    let seed = sample_seed(spec.seed, s);
    let mut sums = [0.0; 3];
    let mut example = None;
    let plain = match variant {
        Variant::Plain(t) => Some(generate_pattern(
            &vec![spec.defaults.clone().with_template(t); spec.max_burrows],
            seed,
        )?),
        Variant::Guided(_) => None,
    };
    for h in 0..spec.scale.hues {
        let palette = spec
            .palette
            .clone()
            .with_base_hue(sample_hue(spec.seed, s, h));
        let image: Image = match (variant, &plain) {
            (Variant::Plain(_), Some(pattern)) => rasterize(pattern, spec.canvas, &palette)?,
            (Variant::Guided(id), _) => {
                let initial_template = random_template(seed);
                let setup = GuidedSetup {
                    initial: spec.defaults.clone().with_template(initial_template),
                    measure: id,
                    expectation: expectations[&id].clone(),
                    max_burrows: spec.max_burrows,
                    canvas: spec.canvas,
                    palette: &palette,
                    measure_config: spec.measure,
                    seed,
                    keep_snapshots: false,
                };
                let run = guided_generate(&setup, table)?;
                let image = run.image.clone();
                if s == 0 && h == 0 {
                    example = Some(GuidedExample {
                        variant,
                        initial_template,
                        run,
                    });
                }
                image
            }
            _ => unreachable!("plain variants always have a pattern"),
        };
        let report = measure_all(&image, spec.measure)?;
        for (i, id) in MeasureId::ALL.iter().enumerate() {
            sums[i] += report.get(*id);
        }
    }
    Ok(SampleOutcome {
        means: sums.map(|x| x / spec.scale.hues as f64),
        example,
    })
}

/// Runs every guided variant and the four plain templates on the same
/// pattern seeds and hues and reports all three measures for each.
pub fn run_comparison(spec: &ComparisonSpec<'_>, table: &LookupTable) -> Result<Comparison> {
    if spec.max_burrows == 0 {
        return Err(Error::invalid("max_burrows must be at least 1"));
    }
    if spec.scale.images == 0 || spec.scale.hues == 0 {
        return Err(Error::invalid(
            "comparison needs at least one image and hue",
        ));
    }
    let expectations = calibrate(spec, table)?;
    let variants = Variant::all(spec.guides);
    let jobs: Vec<(Variant, usize)> = variants
        .iter()
        .flat_map(|&v| (0..spec.scale.images).map(move |s| (v, s)))
        .collect();
    let outcomes: Vec<Result<SampleOutcome>> = pool(spec.workers)?.install(|| {
        jobs.par_iter()
            .map(|&(v, s)| run_sample(v, s, spec, table, &expectations))
            .collect()
    });

    let mut per_variant: BTreeMap<Variant, Vec<[f64; 3]>> = BTreeMap::new();
    let mut examples = Vec::new();
    for (&(v, _), outcome) in jobs.iter().zip(outcomes) {
        let outcome = outcome?;
        per_variant.entry(v).or_default().push(outcome.means);
        examples.extend(outcome.example);
    }

    let n = spec.scale.images;
    let mut rows = Vec::new();
    for v in &variants {
        let samples = &per_variant[v];
        for (i, id) in MeasureId::ALL.iter().enumerate() {
            let xs: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            rows.push(ComparisonRow {
                variant: v.label(),
                measure: *id,
                mean,
                std,
                n,
                m: spec.scale.hues,
            });
        }
    }
    Ok(Comparison {
        expectations,
        rows,
        examples,
    })
}
