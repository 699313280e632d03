//! Measure-guided generation.
//!
//! A lookup table lists, per measure, actions that raised that measure in a
//! parameter sweep. Burrows are then placed one at a time; after each one the
//! guiding measure is taken on the cumulative image and, when it falls short of
//! a calibrated expectation, a randomly chosen action from the table changes
//! the settings used for the following burrows.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aesthetics::{measure_one, MeasureConfig, MeasureId};
use crate::error::{Error, Result};
use crate::harness::sweep::{SweepRow, SweptParameter};
use crate::pattern_gen::{
    generate_pattern, uniform_configs, DesignParams, Pattern, PatternGenerator, Template,
};
use crate::raster::{blank, draw_burrow, CanvasSpec, Image, Palette};
use crate::rng::{derive_seed, seeded};

/// Path index of the control stream, kept apart from the pattern stream so an
/// action draw never shifts pellet placement.
const CONTROL_STREAM: u64 = 0xC0_47_01;

/// Fixed change applied by a [`Action::SetParameter`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Step {
    Scale { factor: f64, min: f64, max: f64 },
    Add { delta: f64, min: f64, max: f64 },
}

impl Step {
    fn apply(&self, value: f64) -> f64 {
        match *self {
            Step::Scale { factor, min, max } => (value * factor).clamp(min, max),
            Step::Add { delta, min, max } => (value + delta).clamp(min, max),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    SwitchTemplate {
        target: Template,
    },
    SetParameter {
        parameter: SweptParameter,
        step: Step,
    },
}

impl Action {
    /// Settings for the next burrow after taking this action.
    pub fn apply(&self, params: &DesignParams) -> DesignParams {
        let mut next = params.clone();
        match self {
            Action::SwitchTemplate { target } => next.template = *target,
            Action::SetParameter { parameter, step } => match parameter {
                SweptParameter::MaxTrenches => {
                    next.max_trenches =
                        step.apply(params.max_trenches as f64).round().max(1.0) as usize;
                }
                SweptParameter::PelletDistance => {
                    next.pellet_distance = step.apply(params.pellet_distance);
                }
                SweptParameter::NumBurrows => {
                    next.num_burrows =
                        step.apply(params.num_burrows as f64).round().max(1.0) as usize;
                }
            },
        }
        next
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::SwitchTemplate { target } => write!(f, "switch_template({target})"),
            Action::SetParameter { parameter, step } => match step {
                Step::Scale { factor, .. } => write!(f, "set_parameter({parameter} x{factor})"),
                Step::Add { delta, .. } => write!(f, "set_parameter({parameter} {delta:+})"),
            },
        }
    }
}

/// An action with the sweep evidence that put it in the table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableAction {
    pub action: Action,
    /// Mean measure gain over the default configuration in the sweep.
    pub delta: f64,
    pub evidence: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    /// Sweep mean at the default configuration.
    pub baseline: f64,
    pub actions: Vec<TableAction>,
    /// No measure-increasing action was found.
    pub empty: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LookupTable {
    pub entries: BTreeMap<MeasureId, TableEntry>,
}

impl LookupTable {
    pub fn actions(&self, measure: MeasureId) -> &[TableAction] {
        self.entries
            .get(&measure)
            .map_or(&[], |e| e.actions.as_slice())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn nearest(values: &[f64], target: f64) -> Option<f64> {
    values
        .iter()
        .copied()
        .min_by(|a, b| (a - target).abs().total_cmp(&(b - target).abs()))
}

fn default_value(p: SweptParameter, params: &DesignParams) -> f64 {
    match p {
        SweptParameter::NumBurrows => params.num_burrows as f64,
        SweptParameter::MaxTrenches => params.max_trenches as f64,
        SweptParameter::PelletDistance => params.pellet_distance,
    }
}

fn step_towards(p: SweptParameter, increase: bool, lo: f64, hi: f64) -> Step {
    match (p, increase) {
        (SweptParameter::PelletDistance, true) => Step::Add {
            delta: 0.1,
            min: lo,
            max: hi,
        },
        (SweptParameter::PelletDistance, false) => Step::Add {
            delta: -0.1,
            min: lo,
            max: hi,
        },
        (_, true) => Step::Scale {
            factor: 2.0,
            min: 1.0,
            max: hi,
        },
        (_, false) => Step::Scale {
            factor: 0.5,
            min: 1.0,
            max: hi,
        },
    }
}

/// Derives measure-increasing actions from sweep rows.
///
/// Only rows at the default noise level are used. The default configuration
/// is the grid point nearest each parameter's default. A template qualifies
/// when its default-configuration mean beats the mean over all templates; a
/// per-burrow parameter qualifies when some grid value beats the default
/// value's mean (averaged over templates), and is stepped in that direction.
/// The number of burrows is a budget of the whole image, so it never becomes
/// an action.
pub fn build_lookup_table(rows: &[SweepRow], defaults: &DesignParams) -> Result<LookupTable> {
    if rows.is_empty() {
        return Err(Error::invalid("sweep has no rows"));
    }
    let noise_levels: Vec<f64> = rows.iter().map(|r| r.noise_variance).collect();
    let noise = nearest(&noise_levels, defaults.noise_variance).expect("non-empty");
    let rows: Vec<&SweepRow> = rows.iter().filter(|r| r.noise_variance == noise).collect();

    for t in Template::ALL {
        if !rows.iter().any(|r| r.template == t) {
            return Err(Error::invalid(format!("sweep does not cover template {t}")));
        }
    }
    for p in SweptParameter::ALL {
        if !rows.iter().any(|r| r.parameter == p) {
            return Err(Error::invalid(format!(
                "sweep does not cover parameter {p}"
            )));
        }
    }

    let mut table = LookupTable::default();
    for measure in MeasureId::ALL {
        let of_measure: Vec<&SweepRow> = rows
            .iter()
            .copied()
            .filter(|r| r.measure == measure)
            .collect();
        if of_measure.is_empty() {
            return Err(Error::invalid(format!("sweep has no {measure} rows")));
        }

        let grid = |p: SweptParameter| -> Vec<f64> {
            let mut vs: Vec<f64> = of_measure
                .iter()
                .filter(|r| r.parameter == p)
                .map(|r| r.value)
                .collect();
            vs.sort_by(f64::total_cmp);
            vs.dedup();
            vs
        };
        // mean over templates of the rows matching (p, v)
        let curve = |p: SweptParameter, v: f64, t: Option<Template>| -> Option<f64> {
            let sel: Vec<f64> = of_measure
                .iter()
                .filter(|r| r.parameter == p && r.value == v && t.is_none_or(|t| r.template == t))
                .map(|r| r.mean)
                .collect();
            (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
        };
        let defaults_at: Vec<(SweptParameter, f64)> = SweptParameter::ALL
            .iter()
            .map(|&p| {
                (
                    p,
                    nearest(&grid(p), default_value(p, defaults)).expect("covered"),
                )
            })
            .collect();

        let template_mean = |t: Template| -> f64 {
            let vals: Vec<f64> = defaults_at
                .iter()
                .filter_map(|&(p, v)| curve(p, v, Some(t)))
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        };
        let per_template: Vec<(Template, f64)> = Template::ALL
            .iter()
            .map(|&t| (t, template_mean(t)))
            .collect();
        let baseline = per_template.iter().map(|(_, m)| m).sum::<f64>() / per_template.len() as f64;

        let mut actions = Vec::new();
        for &(t, mean) in &per_template {
            if mean > baseline {
                actions.push(TableAction {
                    action: Action::SwitchTemplate { target: t },
                    delta: mean - baseline,
                    evidence: format!(
                        "{measure} mean {mean:.6} for {t} vs {baseline:.6} over all templates"
                    ),
                });
            }
        }
        for &(p, v0) in &defaults_at {
            if p == SweptParameter::NumBurrows {
                continue;
            }
            let values = grid(p);
            let at_default = curve(p, v0, None).expect("default point present");
            let best = values
                .iter()
                .filter(|&&v| v != v0)
                .filter_map(|&v| curve(p, v, None).map(|m| (v, m)))
                .max_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((v, m)) = best {
                if m > at_default {
                    let (lo, hi) = (values[0], values[values.len() - 1]);
                    actions.push(TableAction {
                        action: Action::SetParameter {
                            parameter: p,
                            step: step_towards(p, v > v0, lo, hi),
                        },
                        delta: m - at_default,
                        evidence: format!(
                            "{measure} mean {m:.6} at {p}={v} vs {at_default:.6} at {v0}"
                        ),
                    });
                }
            }
        }

        table.entries.insert(
            measure,
            TableEntry {
                baseline,
                empty: actions.is_empty(),
                actions,
            },
        );
    }
    Ok(table)
}

/// Calibrated mean of a measure, both for the finished image and for the
/// cumulative image after each burrow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub measure: MeasureId,
    /// Mean over finished images.
    pub value: f64,
    /// Entry `k - 1` is the mean after `k` burrows. Empty means `value`
    /// applies after every burrow.
    pub per_burrow: Vec<f64>,
    pub samples: usize,
}

impl Expectation {
    /// The same threshold after every burrow.
    pub fn constant(measure: MeasureId, value: f64) -> Self {
        Expectation {
            measure,
            value,
            per_burrow: Vec::new(),
            samples: 1,
        }
    }

    /// Threshold after the 1-based `burrow`; past the calibrated range the
    /// finished-image value is used.
    pub fn threshold(&self, burrow: usize) -> f64 {
        burrow
            .checked_sub(1)
            .and_then(|k| self.per_burrow.get(k))
            .copied()
            .unwrap_or(self.value)
    }
}

/// Sampling plan shared by calibration and experiments: `n` patterns, each
/// rendered under `m` random base hues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub images: usize,
    pub hues: usize,
}

/// Base hue for hue sample `h` of pattern sample `s`.
pub fn sample_hue(seed: u64, s: usize, h: usize) -> f64 {
    seeded(derive_seed(seed, &[0x0048_7565, s as u64, h as u64])).random::<f64>()
}

pub fn sample_seed(seed: u64, s: usize) -> u64 {
    derive_seed(seed, &[s as u64])
}

fn calibrate_ids(
    ids: &[MeasureId],
    configs: &[DesignParams],
    scale: Scale,
    canvas: &CanvasSpec,
    palette: &Palette,
    measure: &MeasureConfig,
    seed: u64,
) -> Result<Vec<Expectation>> {
    if configs.is_empty() || scale.images == 0 || scale.hues == 0 {
        return Err(Error::invalid(
            "calibration needs configs and at least one image and hue",
        ));
    }
    let depth = configs.iter().map(|c| c.num_burrows).max().unwrap_or(0);
    // [measure][k] running sums and counts over cumulative images
    let mut sums = vec![vec![0.0; depth]; ids.len()];
    let mut counts = vec![0usize; depth];
    let mut finals = vec![0.0; ids.len()];
    for s in 0..scale.images {
        let config = &configs[s % configs.len()];
        let pattern = generate_pattern(&uniform_configs(config), sample_seed(seed, s))?;
        for h in 0..scale.hues {
            let pal = palette.clone().with_base_hue(sample_hue(seed, s, h));
            let mut image = blank(canvas);
            for (k, burrow) in pattern.burrows.iter().enumerate() {
                draw_burrow(&mut image, burrow, k, canvas, &pal);
                counts[k] += 1;
                for (i, &id) in ids.iter().enumerate() {
                    let v = measure_one(&image, id, measure)?;
                    sums[i][k] += v;
                    if k + 1 == pattern.burrows.len() {
                        finals[i] += v;
                    }
                }
            }
        }
    }
    let samples = scale.images * scale.hues;
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, &id)| Expectation {
            measure: id,
            value: finals[i] / samples as f64,
            per_burrow: sums[i]
                .iter()
                .zip(&counts)
                .map(|(s, &c)| s / c as f64)
                .collect(),
            samples,
        })
        .collect())
}

/// Expectations of every measure over `scale.images` patterns (cycling
/// through `configs`, each with its own `num_burrows`) times `scale.hues`
/// base hues.
pub fn calibrate_all(
    configs: &[DesignParams],
    scale: Scale,
    canvas: &CanvasSpec,
    palette: &Palette,
    measure: &MeasureConfig,
    seed: u64,
) -> Result<BTreeMap<MeasureId, Expectation>> {
    let all = calibrate_ids(
        &MeasureId::ALL,
        configs,
        scale,
        canvas,
        palette,
        measure,
        seed,
    )?;
    Ok(all.into_iter().map(|e| (e.measure, e)).collect())
}

pub fn calibrate_expectations(
    measure_id: MeasureId,
    configs: &[DesignParams],
    scale: Scale,
    canvas: &CanvasSpec,
    palette: &Palette,
    measure: &MeasureConfig,
    seed: u64,
) -> Result<Expectation> {
    let mut one = calibrate_ids(
        &[measure_id],
        configs,
        scale,
        canvas,
        palette,
        measure,
        seed,
    )?;
    Ok(one.remove(0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    /// Measure met the expectation.
    Kept,
    /// Measure fell short but no table action would change the settings.
    NoAction,
    Applied {
        action: Action,
    },
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Kept => f.write_str("kept"),
            Decision::NoAction => f.write_str("kept(no_action)"),
            Decision::Applied { action } => write!(f, "{action}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub burrow: usize,
    pub measure: MeasureId,
    pub value: f64,
    pub expectation: f64,
    pub decision: Decision,
    /// Settings the burrow was generated with.
    pub template: Template,
    pub max_trenches: usize,
    pub pellet_distance: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlLog {
    pub records: Vec<ControlRecord>,
}

impl ControlLog {
    pub const CSV_HEADER: [&'static str; 5] =
        ["burrow", "measure", "value", "expectation", "action"];

    pub fn actions_taken(&self) -> usize {
        self.records
            .iter()
            .filter(|r| matches!(r.decision, Decision::Applied { .. }))
            .count()
    }

    pub fn csv_fields(record: &ControlRecord) -> [String; 5] {
        [
            record.burrow.to_string(),
            record.measure.to_string(),
            format!("{}", record.value),
            format!("{}", record.expectation),
            record.decision.to_string(),
        ]
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.records {
            w.write_record(Self::csv_fields(r))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            let cmp = if r.value < r.expectation { "<" } else { ">=" };
            let _ = writeln!(
                out,
                "burrow {:>3} [{} J_max={} d={}] {} = {:.6} {} {:.6} -> {}",
                r.burrow,
                r.template,
                r.max_trenches,
                r.pellet_distance,
                r.measure,
                r.value,
                cmp,
                r.expectation,
                r.decision
            );
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct GuidedRun {
    pub pattern: Pattern,
    pub image: Image,
    pub log: ControlLog,
    /// Cumulative image after each burrow, when requested.
    pub snapshots: Vec<Image>,
}

/// Inputs of one guided run besides the table.
#[derive(Clone, Debug)]
pub struct GuidedSetup<'a> {
    pub initial: DesignParams,
    pub measure: MeasureId,
    pub expectation: Expectation,
    pub max_burrows: usize,
    pub canvas: &'a CanvasSpec,
    pub palette: &'a Palette,
    pub measure_config: &'a MeasureConfig,
    pub seed: u64,
    pub keep_snapshots: bool,
}

/// Uniformly random template, drawn from the control stream of `seed`.
pub fn random_template(seed: u64) -> Template {
    let mut rng = seeded(derive_seed(seed, &[CONTROL_STREAM, 0]));
    Template::ALL[rng.random_range(0..Template::ALL.len())]
}

pub fn guided_generate(setup: &GuidedSetup<'_>, table: &LookupTable) -> Result<GuidedRun> {
    if setup.max_burrows == 0 {
        return Err(Error::invalid("max_burrows must be at least 1"));
    }
    setup.canvas.validate()?;
    setup.palette.validate()?;
    setup.initial.validate()?;

    let actions = table.actions(setup.measure);
    let mut control = seeded(derive_seed(setup.seed, &[CONTROL_STREAM, 1]));
    let mut generator = PatternGenerator::new(setup.seed);
    let mut image = blank(setup.canvas);
    let mut current = setup.initial.clone();
    let mut log = ControlLog::default();
    let mut snapshots = Vec::new();

    for position in 0..setup.max_burrows {
        let burrow = generator.push_burrow(&current)?;
        draw_burrow(&mut image, burrow, position, setup.canvas, setup.palette);
        let value = measure_one(&image, setup.measure, setup.measure_config)?;
        let expectation = setup.expectation.threshold(position + 1);

        let decision = if value < expectation {
            // an action that would leave the settings as they are (the active
            // template, a step already at its bound) cannot be activated
            let live: Vec<&Action> = actions
                .iter()
                .map(|a| &a.action)
                .filter(|a| a.apply(&current) != current)
                .collect();
            if live.is_empty() {
                Decision::NoAction
            } else {
                Decision::Applied {
                    action: live[control.random_range(0..live.len())].clone(),
                }
            }
        } else {
            Decision::Kept
        };
        log.records.push(ControlRecord {
            burrow: position + 1,
            measure: setup.measure,
            value,
            expectation,
            decision: decision.clone(),
            template: current.template,
            max_trenches: current.max_trenches,
            pellet_distance: current.pellet_distance,
        });
        if let Decision::Applied { action } = &decision {
            current = action.apply(&current);
        }
        if setup.keep_snapshots {
            snapshots.push(image.clone());
        }
    }

    Ok(GuidedRun {
        pattern: generator.finish(),
        image,
        log,
        snapshots,
    })
}


#[cfg(test)]
mod properties {
    use super::*;
    use crate::aesthetics::measure_all;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn control_branch_matches_the_comparison(seed: u64, expectation in 0.0f64..0.4) {
            let (canvas, palette, cfg) = (CanvasSpec::default(), Palette::default(), MeasureConfig::default());
            let actions = [
                Action::SwitchTemplate { target: Template::Gtl },
                Action::SwitchTemplate { target: Template::Ccr },
            ];
            let mut table = LookupTable::default();
            table.entries.insert(MeasureId::Bfl, TableEntry {
                baseline: 0.0,
                empty: false,
                actions: actions
                    .iter()
                    .cloned()
                    .map(|action| TableAction { action, delta: 0.0, evidence: String::new() })
                    .collect(),
            });
            let setup = GuidedSetup {
                initial: DesignParams { max_trenches: 12, trench_length_mean: 14.0, ..DesignParams::default() },
                measure: MeasureId::Bfl,
                expectation: Expectation::constant(MeasureId::Bfl, expectation),
                max_burrows: 4,
                canvas: &canvas,
                palette: &palette,
                measure_config: &cfg,
                seed,
                keep_snapshots: true,
            };
            let run = guided_generate(&setup, &table).unwrap();
            prop_assert_eq!(run.log.records.len(), 4);
            for (r, snap) in run.log.records.iter().zip(&run.snapshots) {
                prop_assert_eq!(measure_all(snap, &cfg).unwrap().bfl, r.value);
                match &r.decision {
                    Decision::Kept => prop_assert!(r.value >= r.expectation),
                    Decision::NoAction => prop_assert!(r.value < r.expectation),
                    Decision::Applied { action } => {
                        prop_assert!(r.value < r.expectation);
                        prop_assert!(actions.contains(action));
                    }
                }
            }
            // placed burrows keep the settings they were drawn with
            for (r, p) in run.log.records.iter().zip(&run.pattern.params_per_burrow) {
                prop_assert_eq!(r.template, p.template);
            }
        }
    }
}
