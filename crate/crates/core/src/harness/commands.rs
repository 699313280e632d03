use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::aesthetics::{measure_all, MeasureId};
use crate::error::{Error, Result};
use crate::guidance::{build_lookup_table, sample_hue, LookupTable};
use crate::harness::compare::{run_comparison, ComparisonSpec};
use crate::harness::config::RunConfig;
use crate::harness::sweep::{run_sweep, SweepResult, SweepSpec};
use crate::pattern_gen::{generate_pattern, uniform_configs};
use crate::raster::{rasterize, Image};

pub const TABLE_FILE: &str = "lookup_table.json";

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text)
}

fn prepared(config: &RunConfig) -> Result<(RunConfig, u64)> {
    let mut config = config.clone();
    let seed = config.resolve_seed();
    config.validate()?;
    ensure_dir(&config.out)?;
    Ok((config, seed))
}

/// Renders `count` patterns with seeds `seed, seed + 1, ...`. Each PNG gets a
/// JSON sidecar whose `config` member regenerates it on its own.
pub fn cmd_generate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (config, seed) = prepared(config)?;
    if config.count == 0 {
        return Err(Error::Config("count must be at least 1".into()));
    }
    let mut written = Vec::new();
    for k in 0..config.count as u64 {
        let image_seed = seed.wrapping_add(k);
        let pattern = generate_pattern(&uniform_configs(&config.params), image_seed)?;
        let mut palette = config.palette.clone();
        if config.random_hue {
            palette.base_hue = sample_hue(image_seed, 0, 0);
        }
        let image = rasterize(&pattern, &config.canvas, &palette)?;

        let png = config.artifact(image_seed, ".png");
        image.save_png(&png)?;
        let own = RunConfig {
            seed: Some(image_seed),
            count: 1,
            ..config.clone()
        };
        let sidecar = json!({
            "kind": "generate",
            "config": own,
            "seed": image_seed,
            "resolved_palette": palette,
            "pellets": pattern.pellet_count(),
            "pattern": pattern,
        });
        let side = config.artifact(image_seed, ".json");
        write_json(&side, &sidecar)?;
        written.push(png);
        written.push(side);
    }
    Ok(written)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeasureOutcome {
    pub rows: usize,
    pub dimension_errors: usize,
    pub io_errors: usize,
}

pub const MEASURE_HEADER: [&str; 10] = [
    "image_id",
    "bfl",
    "rrz",
    "frd",
    "d",
    "r2",
    "t0",
    "background",
    "frd_undefined",
    "error",
];

/// One CSV row per image. Unreadable or wrongly sized images get a row with
/// the error and empty measures; the caller decides the exit status from the
/// returned counts.
pub fn cmd_measure(
    paths: &[PathBuf],
    config: &RunConfig,
    sink: impl Write,
) -> Result<MeasureOutcome> {
    config.validate()?;
    let mcfg = &config.measure;
    let t0 = mcfg.threshold.to_string();
    let bg = format!(
        "#{:02x}{:02x}{:02x}",
        mcfg.background[0], mcfg.background[1], mcfg.background[2]
    );
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(MEASURE_HEADER)?;
    let mut outcome = MeasureOutcome::default();
    for path in paths {
        let id = path.file_stem().map_or_else(
            || path.display().to_string(),
            |s| s.to_string_lossy().into_owned(),
        );
        let result = Image::load(path).and_then(|img| measure_all(&img, mcfg));
        let record = match result {
            Ok(r) => vec![
                id,
                r.bfl.to_string(),
                r.rrz.to_string(),
                r.frd.to_string(),
                r.dimension().map_or_else(String::new, |d| d.to_string()),
                r.r_squared().map_or_else(String::new, |x| x.to_string()),
                t0.clone(),
                bg.clone(),
                r.frd_undefined.to_string(),
                String::new(),
            ],
            Err(e) => {
                match e {
                    Error::Dimension { .. } => outcome.dimension_errors += 1,
                    _ => outcome.io_errors += 1,
                }
                let mut rec = vec![id];
                rec.extend(std::iter::repeat_n(String::new(), 5));
                rec.extend([t0.clone(), bg.clone(), String::new(), e.to_string()]);
                rec
            }
        };
        w.write_record(&record)?;
        outcome.rows += 1;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(outcome)
}

/// Runs the sweep and writes `<run_id>_<seed>_sweep.csv` plus a sidecar.
pub fn cmd_sweep(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let (config, seed) = prepared(config)?;
    let spec = SweepSpec {
        defaults: &config.params,
        grids: &config.grids,
        templates: &config.templates,
        scale: config.scale,
        canvas: &config.canvas,
        palette: &config.palette,
        measure: &config.measure,
        seed,
        workers: config.workers,
    };
    let result = run_sweep(&spec)?;
    let csv_path = config.artifact(seed, "_sweep.csv");
    write_file(&csv_path, result.to_csv()?)?;
    let side = config.artifact(seed, "_sweep.json");
    write_json(
        &side,
        &json!({ "kind": "sweep", "config": config, "rows": result.rows.len() }),
    )?;
    Ok(vec![csv_path, side])
}

/// Builds the lookup table from a sweep CSV into `<out>/lookup_table.json`.
pub fn cmd_build_table(sweep_csv: &Path, config: &RunConfig) -> Result<PathBuf> {
    config.validate()?;
    let file = std::fs::File::open(sweep_csv).map_err(|e| Error::io(sweep_csv, e))?;
    let sweep = SweepResult::read_csv(std::io::BufReader::new(file))?;
    let table = build_lookup_table(&sweep.rows, &config.params)?;
    ensure_dir(&config.out)?;
    let path = config.out.join(TABLE_FILE);
    write_json(&path, &table)?;
    Ok(path)
}

/// Reads a lookup table, either bare or embedded in a guided sidecar.
pub fn load_table(path: &Path) -> Result<LookupTable> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::MissingTable(path.to_path_buf()))
        }
        Err(e) => return Err(Error::io(path, e)),
    };
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let value = match value.get("table") {
        Some(inner) => inner.clone(),
        None => value,
    };
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Guided-versus-template comparison. Writes the comparison CSV, and for each
/// guided variant the first run's PNG, control-log CSV and text trace.
pub fn cmd_guided(
    config: &RunConfig,
    table_path: &Path,
    guides: &[MeasureId],
) -> Result<Vec<PathBuf>> {
    if config.max_burrows == 0 {
        return Err(Error::invalid("max_burrows must be at least 1"));
    }
    let table = load_table(table_path)?;
    let (config, seed) = prepared(config)?;
    let spec = ComparisonSpec {
        defaults: &config.params,
        guides,
        max_burrows: config.max_burrows,
        scale: config.scale,
        canvas: &config.canvas,
        palette: &config.palette,
        measure: &config.measure,
        seed,
        workers: config.workers,
    };
    let comparison = run_comparison(&spec, &table)?;

    let mut written = Vec::new();
    let csv_path = config.artifact(seed, "_comparison.csv");
    write_file(&csv_path, comparison.to_csv()?)?;
    written.push(csv_path);

    let mut examples = Vec::new();
    for ex in &comparison.examples {
        let label = ex.variant.label();
        let png = config.artifact(seed, &format!("_{label}.png"));
        ex.run.image.save_png(&png)?;
        let log = config.artifact(seed, &format!("_{label}_log.csv"));
        write_file(&log, ex.run.log.to_csv()?)?;
        let trace = config.artifact(seed, &format!("_{label}_trace.txt"));
        write_file(&trace, ex.run.log.to_text())?;
        written.extend([png, log, trace]);
        examples.push(json!({
            "variant": label,
            "initial_template": ex.initial_template,
            "params_per_burrow": ex.run.pattern.params_per_burrow,
            "log": ex.run.log,
        }));
    }

    let side = config.artifact(seed, "_guided.json");
    write_json(
        &side,
        &json!({
            "kind": "guided",
            "config": config,
            "guides": guides,
            "table": table,
            "expectations": comparison.expectations.values().collect::<Vec<_>>(),
            "examples": examples,
        }),
    )?;
    written.push(side);
    Ok(written)
}
