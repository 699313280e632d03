use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sandbubbler::aesthetics::MeasureId;
use sandbubbler::harness::commands::TABLE_FILE;
use sandbubbler::harness::{
    cmd_build_table, cmd_generate, cmd_guided, cmd_measure, cmd_sweep, RunConfig, PAPER_SCALE,
};
use sandbubbler::pattern_gen::Template;
use sandbubbler::{Error, Result};

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_DIMENSION: u8 = 4;

#[derive(Parser)]
#[command(
    name = "sandbubbler",
    version,
    about = "Sand-bubbler inspired generative art and aesthetic measures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render seeded patterns to PNG with JSON sidecars.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of images; seeds run from --seed upwards.
        #[arg(long)]
        count: Option<usize>,
        /// Template for every burrow.
        #[arg(long, value_parser = parse_template)]
        template: Option<Template>,
    },
    /// Measure BFL, RRZ and FRD of PNG images; writes CSV.
    Measure {
        #[command(flatten)]
        common: Common,
        /// Images, or directories whose PNG files are measured.
        images: Vec<PathBuf>,
    },
    /// Mean measures over the parameter grids.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scale: ScaleArgs,
        /// Restrict the sweep to one template.
        #[arg(long, value_parser = parse_template)]
        template: Option<Template>,
    },
    /// Build the lookup table of measure-increasing actions from a sweep CSV.
    BuildTable {
        #[command(flatten)]
        common: Common,
        sweep_csv: PathBuf,
    },
    /// Compare guided generation with the plain templates.
    Guided {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scale: ScaleArgs,
        /// Guide by one measure only (default: all three).
        #[arg(long, value_parser = parse_measure)]
        measure: Option<MeasureId>,
        /// Lookup table (default: <out>/lookup_table.json).
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// JSON run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    /// Images per configuration.
    #[arg(long)]
    n: Option<usize>,
    /// Hue samples per image.
    #[arg(long)]
    m: Option<usize>,
    /// 100 images x 70 hues; explicit --n/--m still win.
    #[arg(long)]
    paper_scale: bool,
}

fn parse_template(s: &str) -> std::result::Result<Template, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_measure(s: &str) -> std::result::Result<MeasureId, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &common.out {
        config.out = out.clone();
    }
    Ok(config)
}

fn apply_scale(config: &mut RunConfig, scale: &ScaleArgs) {
    if scale.paper_scale {
        config.scale = PAPER_SCALE;
    }
    if let Some(n) = scale.n {
        config.scale.images = n;
    }
    if let Some(m) = scale.m {
        config.scale.hues = m;
    }
}

fn expand_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn report(out: &mut dyn Write, paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        writeln!(out, "{}", p.display()).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn run(cli: Cli, out: &mut dyn Write) -> Result<u8> {
    match cli.command {
        Command::Generate {
            common,
            count,
            template,
        } => {
            let mut config = base_config(&common)?;
            if let Some(c) = count {
                config.count = c;
            }
            if let Some(t) = template {
                config.params.template = t;
            }
            report(out, &cmd_generate(&config)?)?;
        }
        Command::Measure { common, images } => {
            let config = base_config(&common)?;
            let paths = expand_images(&images)?;
            let outcome = match &common.out {
                Some(_) => {
                    std::fs::create_dir_all(&config.out).map_err(|e| Error::Io {
                        path: config.out.clone(),
                        source: e,
                    })?;
                    let path = config.out.join(format!("{}_measures.csv", config.run_id));
                    let file = std::fs::File::create(&path).map_err(|e| Error::Io {
                        path: path.clone(),
                        source: e,
                    })?;
                    let outcome = cmd_measure(&paths, &config, file)?;
                    report(out, &[path])?;
                    outcome
                }
                None => cmd_measure(&paths, &config, &mut *out)?,
            };
            if outcome.dimension_errors > 0 {
                return Ok(EXIT_DIMENSION);
            }
            if outcome.io_errors > 0 {
                return Ok(EXIT_IO);
            }
        }
        Command::Sweep {
            common,
            scale,
            template,
        } => {
            let mut config = base_config(&common)?;
            apply_scale(&mut config, &scale);
            if let Some(t) = template {
                config.templates = vec![t];
            }
            report(out, &cmd_sweep(&config)?)?;
        }
        Command::BuildTable { common, sweep_csv } => {
            let config = base_config(&common)?;
            report(out, &[cmd_build_table(&sweep_csv, &config)?])?;
        }
        Command::Guided {
            common,
            scale,
            measure,
            table,
        } => {
            let mut config = base_config(&common)?;
            apply_scale(&mut config, &scale);
            let table = table.unwrap_or_else(|| config.out.join(TABLE_FILE));
            let guides = measure.map_or_else(|| MeasureId::ALL.to_vec(), |m| vec![m]);
            report(out, &cmd_guided(&config, &table, &guides)?)?;
        }
    }
    Ok(0)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::MissingTable(_) | Error::Json(_) => {
            EXIT_CONFIG
        }
        Error::Io { .. } | Error::Image { .. } | Error::Csv(_) => EXIT_IO,
        Error::Dimension { .. } => EXIT_DIMENSION,
        Error::DegenerateDistribution { .. } | Error::UndefinedDimension => EXIT_OTHER,
    }
}

fn status(result: Result<u8>) -> u8 {
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    ExitCode::from(status(run(Cli::parse(), &mut stdout.lock())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    use sandbubbler::raster::Image;

    struct Output {
        code: u8,
        stdout: String,
        error: String,
    }

    fn run_cli(args: &[&str]) -> Output {
        let cli = Cli::try_parse_from(std::iter::once("sandbubbler").chain(args.iter().copied()))
            .expect("valid arguments");
        let mut buf = Vec::new();
        let result = run(cli, &mut buf);
        let error = result
            .as_ref()
            .err()
            .map_or_else(String::new, |e| e.to_string());
        let code = match result {
            Ok(c) => c,
            Err(e) => exit_code(&e),
        };
        Output {
            code,
            stdout: String::from_utf8(buf).unwrap(),
            error,
        }
    }

    fn small_config(dir: &Path) -> String {
        let path = dir.join("config.json");
        std::fs::write(
            &path,
            r#"{"params": {"max_trenches": 8, "trench_length_mean": 10.0}, "max_burrows": 2}"#,
        )
        .unwrap();
        path.to_str().unwrap().to_owned()
    }

    #[test]
    fn generate_writes_png_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("g");
        let cfg = small_config(dir.path());
        let o = run_cli(&[
            "generate",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "1",
            "--count",
            "3",
        ]);
        assert!(o.code == 0, "{}", o.error);
        for seed in 1..=3 {
            let png = out.join(format!("sb_{seed}.png"));
            let img = Image::load(&png).unwrap();
            assert_eq!((img.width(), img.height()), (512, 512));
            let side: serde_json::Value = serde_json::from_slice(
                &std::fs::read(out.join(format!("sb_{seed}.json"))).unwrap(),
            )
            .unwrap();
            assert_eq!(side["seed"], seed);
            assert_eq!(side["config"]["seed"], seed);
            assert_eq!(side["config"]["params"]["max_trenches"], 8);
        }
    }

    #[test]
    fn sidecar_regenerates_its_image() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let cfg = small_config(dir.path());
        assert!(
            run_cli(&[
                "generate",
                "--config",
                &cfg,
                "--out",
                a.to_str().unwrap(),
                "--seed",
                "40",
                "--count",
                "2"
            ])
            .code
                == 0
        );
        let side = a.join("sb_41.json");
        assert!(
            run_cli(&[
                "generate",
                "--config",
                side.to_str().unwrap(),
                "--out",
                b.to_str().unwrap()
            ])
            .code
                == 0
        );
        assert_eq!(
            std::fs::read(a.join("sb_41.png")).unwrap(),
            std::fs::read(b.join("sb_41.png")).unwrap()
        );
    }

    #[test]
    fn measure_reports_rows_and_degenerate_images() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("white.png");
        Image::filled(512, 512, [255, 255, 255])
            .save_png(&white)
            .unwrap();
        let o = run_cli(&["measure", white.to_str().unwrap()]);
        assert!(o.code == 0);
        let text = o.stdout.clone();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "image_id,bfl,rrz,frd,d,r2,t0,background,frd_undefined,error"
        );
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields[0], "white");
        assert!(fields[1].parse::<f64>().unwrap().abs() < 1e-9);
        assert_eq!(fields[2], "0");
        assert_eq!(fields[3], "0");
        assert_eq!(fields[4], "");
        assert_eq!(fields[8], "true");
        assert!(lines.next().is_none());
    }

    #[test]
    fn empty_measure_input_gives_header_only() {
        let o = run_cli(&["measure"]);
        assert!(o.code == 0);
        assert_eq!(
            o.stdout.clone(),
            "image_id,bfl,rrz,frd,d,r2,t0,background,frd_undefined,error\n"
        );
    }

    #[test]
    fn wrong_dimensions_get_an_error_row_and_exit_code() {
        let dir = tempfile::tempdir().unwrap();
        let small = dir.path().join("small.png");
        let good = dir.path().join("good.png");
        Image::filled(64, 64, [0, 0, 0]).save_png(&small).unwrap();
        Image::filled(512, 512, [10, 20, 30])
            .save_png(&good)
            .unwrap();
        let o = run_cli(&["measure", dir.path().to_str().unwrap()]);
        assert_eq!(o.code, 4);
        let text = o.stdout.clone();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with("good,") && rows[0].ends_with(','));
        assert!(rows[1].starts_with("small,") && rows[1].contains("64x64"));
    }

    #[test]
    fn exit_codes_distinguish_error_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.json");
        std::fs::write(&bad, r#"{"params": {"pellet_distance": -1.0}}"#).unwrap();
        assert_eq!(
            run_cli(&["generate", "--config", bad.to_str().unwrap()]).code,
            2
        );

        assert_eq!(
            run_cli(&[
                "generate",
                "--config",
                dir.path().join("missing.json").to_str().unwrap()
            ])
            .code,
            3
        );

        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let o = run_cli(&[
            "generate",
            "--seed",
            "1",
            "--out",
            blocker.join("sub").to_str().unwrap(),
        ]);
        assert_eq!(o.code, 3);
        assert!(o.error.contains("sub"));
    }

    #[test]
    fn guided_requires_a_table_and_a_burrow_budget() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let o = run_cli(&[
            "guided",
            "--seed",
            "1",
            "--out",
            out.to_str().unwrap(),
            "--n",
            "1",
            "--m",
            "1",
        ]);
        assert_eq!(o.code, 2);
        assert!(o.error.contains("build-table"));

        std::fs::create_dir_all(&out).unwrap();
        std::fs::write(out.join("lookup_table.json"), r#"{"entries": {}}"#).unwrap();
        let zero = dir.path().join("zero.json");
        std::fs::write(&zero, r#"{"max_burrows": 0}"#).unwrap();
        let o = run_cli(&[
            "guided",
            "--config",
            zero.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--n",
            "1",
            "--m",
            "1",
        ]);
        assert_eq!(o.code, 2);
        assert!(o.error.contains("max_burrows"));
    }

    #[test]
    fn sweep_csv_has_one_row_per_grid_cell() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("s");
        let cfg = dir.path().join("c.json");
        std::fs::write(
            &cfg,
            r#"{"params": {"max_trenches": 6, "trench_length_mean": 8.0, "num_burrows": 1},
                "grids": {"num_burrows": [1], "max_trenches": [3, 6, 9], "pellet_distance": [0.5], "noise_variance": [0.3, 0.8]}}"#,
        )
        .unwrap();
        let o = run_cli(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "2",
            "--n",
            "1",
            "--m",
            "1",
        ]);
        assert!(o.code == 0, "{}", o.error);
        let text = std::fs::read_to_string(out.join("sb_2_sweep.csv")).unwrap();
        let j_rows = text
            .lines()
            .filter(|l| l.contains(",max_trenches,"))
            .count();
        assert_eq!(j_rows, 3 * 4 * 2 * 3);

        let o = run_cli(&[
            "build-table",
            "--out",
            out.to_str().unwrap(),
            out.join("sb_2_sweep.csv").to_str().unwrap(),
        ]);
        assert!(o.code == 0, "{}", o.error);
        let table: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("lookup_table.json")).unwrap()).unwrap();
        for m in ["BFL", "RRZ", "FRD"] {
            assert!(table["entries"][m].is_object());
        }
    }
}
