use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use regionsel::error::{Error, Result};
use regionsel::estimators::{point_estimate, Estimate, DEFAULT_LEVEL};
use regionsel::experiments::{
    run_experiment, summary_table, ExperimentConfig, ExperimentName, TOOL_NAME, TOOL_VERSION,
};
use regionsel::population::{
    generate_synthetic, load_pool_file, write_pool, PoolFormat, RegionPool, SyntheticSpec,
};
use regionsel::samplers::{SampleDraw, Scheme};
use regionsel::subsampling::{
    generate_candidates, select_subsample, SelectionCriterion, SubsampleReport, DEFAULT_TRIALS,
};

/// Pick small, representative sets of simulation regions and put confidence
/// intervals on what they predict.
#[derive(Parser)]
#[command(name = "regionsel", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic region pool from a JSON spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Per-configuration mean, spread and the sample size for a target margin.
    Summary {
        #[arg(long)]
        pool: PathBuf,
        /// Target relative margin of error, e.g. 0.03 for 3%.
        #[arg(long, default_value_t = 0.03)]
        target_rel_me: f64,
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Draw one sample and report its estimates for every configuration.
    Sample {
        #[arg(long)]
        pool: PathBuf,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Repeated subsampling: draw many candidates and keep the best one.
    Select {
        #[arg(long)]
        pool: PathBuf,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = CriterionArg::Baseline)]
        criterion: CriterionArg,
        /// Configuration the baseline criterion matches.
        #[arg(long, default_value_t = 0)]
        baseline_config: usize,
        /// Training configurations for the chebyshev and correlation criteria.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        train_configs: Vec<usize>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a named experiment and write its tables to a directory.
    Experiment {
        #[arg(value_parser = parse_experiment)]
        name: ExperimentName,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args)]
struct OutArgs {
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, requires = "out")]
    force: bool,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "scheme_choice")]
struct SchemeGroup {
    /// Simple random sample of N regions.
    #[arg(long, value_name = "N")]
    srs: Option<usize>,
    /// Ranked set sample with M cycles of set size K.
    #[arg(long, num_args = 2, value_names = ["M", "K"])]
    rss: Option<Vec<usize>>,
}

#[derive(Args)]
struct SchemeArgs {
    #[command(flatten)]
    group: SchemeGroup,
    /// Configuration used to rank units within each set.
    #[arg(long, default_value_t = 0)]
    rank_config: usize,
}

impl SchemeArgs {
    fn scheme(&self) -> Scheme {
        match (&self.group.srs, &self.group.rss) {
            (Some(n), _) => Scheme::Srs { n: *n },
            (None, Some(mk)) => Scheme::Rss {
                cycles: mk[0],
                set_size: mk[1],
                ranking_config: self.rank_config,
            },
            (None, None) => unreachable!("clap enforces one scheme"),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Baseline,
    Chebyshev,
    Correlation,
}

fn parse_experiment(s: &str) -> std::result::Result<ExperimentName, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct SampleOutput<'a> {
    tool: &'static str,
    version: &'static str,
    pool: String,
    seed: u64,
    scheme: Scheme,
    draw: &'a SampleDraw,
    region_ids: Vec<String>,
    estimates: Vec<Estimate>,
}

#[derive(Serialize)]
struct SelectOutput<'a> {
    tool: &'static str,
    version: &'static str,
    pool: String,
    seed: u64,
    #[serde(flatten)]
    report: &'a SubsampleReport,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            eprintln!("hint: {}", hint(&e));
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn hint(e: &Error) -> &'static str {
    match e {
        Error::Parse { .. } => "pool files need a `region_id,<config>,...` header and one positive number per config on every row",
        Error::InvalidInput(_) => "check the flag values; `regionsel <command> --help` lists them",
        Error::Infeasible(_) => "use a smaller sample (or set size) or a larger pool",
        Error::ConfigOutOfRange { .. } => "configuration indices are 0-based; run `regionsel summary` to list them",
        Error::Degenerate(_) => "the statistic needs variation across regions or configurations",
        Error::Json(_) => "the file must be valid JSON with the documented fields",
        Error::Io(_) | Error::Csv(_) if e.is_io() => "check that the path exists and is writable; pass --force to overwrite",
        Error::Io(_) | Error::Csv(_) => "the pool file is not well-formed CSV",
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            spec,
            seed,
            out,
            force,
        } => {
            let spec: SyntheticSpec = serde_json::from_slice(&fs::read(&spec)?)?;
            let pool = generate_synthetic(&spec, seed)?;
            let mut buf =
                format!("# generated by {TOOL_NAME} {TOOL_VERSION} seed={seed}\n").into_bytes();
            write_pool(&pool, &mut buf, PoolFormat::Csv)?;
            write_atomic(&out, &buf, force)
        }
        Command::Summary {
            pool,
            target_rel_me,
            level,
            out,
        } => {
            let pool = load_pool_file(&pool)?;
            let table = summary_table(&pool, target_rel_me, level)?;
            let header = vec![
                format!("tool={TOOL_NAME} version={TOOL_VERSION}"),
                format!("pool={} regions={}", pool.app_label(), pool.region_count()),
                format!("target_relative_me={target_rel_me} level={level}"),
            ];
            emit(&out, table.to_csv(&header)?.as_bytes())
        }
        Command::Sample {
            pool: path,
            scheme,
            seed,
            level,
            out,
        } => {
            let pool = load_pool_file(&path)?;
            let scheme = scheme.scheme();
            let draw = scheme.draw(&pool, seed)?;
            let estimates = (0..pool.config_count())
                .map(|c| point_estimate(&pool, &draw, c, level))
                .collect::<Result<Vec<_>>>()?;
            let doc = SampleOutput {
                tool: TOOL_NAME,
                version: TOOL_VERSION,
                pool: pool.app_label().to_owned(),
                seed,
                scheme,
                draw: &draw,
                region_ids: region_ids(&pool, &draw),
                estimates,
            };
            emit(&out, &json_bytes(&doc)?)
        }
        Command::Select {
            pool: path,
            scheme,
            trials,
            criterion,
            baseline_config,
            train_configs,
            seed,
            out,
        } => {
            let pool = load_pool_file(&path)?;
            let criterion = match criterion {
                CriterionArg::Baseline => SelectionCriterion::BaselineMean { baseline_config },
                CriterionArg::Chebyshev => SelectionCriterion::ChebyshevRelative {
                    training_configs: train_configs,
                },
                CriterionArg::Correlation => SelectionCriterion::CorrelationMax {
                    training_configs: train_configs,
                },
            };
            criterion.validate(pool.config_count())?;
            let set = generate_candidates(&pool, &scheme.scheme(), trials, seed)?;
            let report = select_subsample(&pool, &set, &criterion)?;
            let doc = SelectOutput {
                tool: TOOL_NAME,
                version: TOOL_VERSION,
                pool: pool.app_label().to_owned(),
                seed,
                report: &report,
            };
            emit(&out, &json_bytes(&doc)?)
        }
        Command::Experiment {
            name,
            config,
            out_dir,
            force,
        } => {
            let cfg: ExperimentConfig = serde_json::from_slice(&fs::read(&config)?)?;
            let base = config.parent().unwrap_or(Path::new("."));
            let output = run_experiment(name, &cfg, base)?;
            let files = output.files()?;
            fs::create_dir_all(&out_dir)?;
            if !force {
                for (file, _) in &files {
                    refuse_existing(&out_dir.join(file))?;
                }
            }
            for (file, contents) in &files {
                write_atomic(&out_dir.join(file), contents.as_bytes(), true)?;
                eprintln!("wrote {}", out_dir.join(file).display());
            }
            Ok(())
        }
    }
}

fn region_ids(pool: &RegionPool, draw: &SampleDraw) -> Vec<String> {
    draw.region_indices
        .iter()
        .map(|&r| pool.region_ids()[r].clone())
        .collect()
}

fn json_bytes<T: Serialize>(doc: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(doc)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn emit(out: &OutArgs, bytes: &[u8]) -> Result<()> {
    match &out.out {
        Some(path) => write_atomic(path, bytes, out.force),
        None => {
            std::io::stdout().lock().write_all(bytes)?;
            Ok(())
        }
    }
}

fn refuse_existing(path: &Path) -> Result<()> {
    if path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::AlreadyExists,
            format!("{} already exists", path.display()),
        )));
    }
    Ok(())
}

// Write to a sibling temp file, then rename, so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8], force: bool) -> Result<()> {
    if !force {
        refuse_existing(path)?;
    }
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}
