//! `zipcast` command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 data error,
//! 3 enumeration cap exceeded. Failures print one line to stderr of the form
//! `zipcast: error[<kind>]: <reason>`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zipcast_core::codec::{BackendSpec, SYMBOL_BASE};
use zipcast_core::eval::{self, BacktestReport, BaselineForecasts, Method};
use zipcast_core::forecast::{self, PointForecast};
use zipcast_core::io::{self as data, RunConfig, SeriesDataset};
use zipcast_core::prob::{enumeration_size, MixtureWeights};
use zipcast_core::{Error, ErrorKind, Result};

/// Decimal places for probabilities and values in forecast files.
const FORECAST_DECIMALS: usize = 10;

#[derive(Parser, Debug)]
#[command(
    name = "zipcast",
    version,
    about = "Forecast time series from compressor code lengths"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Input file; repeat for several (codelen).
    #[arg(long, global = true)]
    input: Vec<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true)]
    split: Option<usize>,
    /// Maximum partition depth.
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Comma-separated backends, e.g. `deflate:9,ppm:4,repair`.
    #[arg(long, global = true)]
    backends: Option<String>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Seed for synthetic series.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Forecast the next `horizon` values of a series.
    Forecast,
    /// Rolling-origin MAE evaluation.
    Backtest,
    /// Score an external baseline against a backtest report.
    Compare {
        /// CSV with columns origin, step, value.
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long, default_value = "baseline")]
        baseline_name: String,
    },
    /// Code length of each input under each backend.
    Codelen {
        /// Append every suffix of this length to the (single) input.
        #[arg(long)]
        suffix_length: Option<usize>,
        /// Alphabet size of appended suffixes.
        #[arg(long, default_value_t = 2)]
        alphabet: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            let first = first.trim_start_matches("error: ");
            eprintln!("zipcast: error[usage]: {first}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (label, code) = match e.kind() {
                ErrorKind::Config => ("config", 1),
                ErrorKind::Data => ("data", 2),
                ErrorKind::EnumerationCap => ("cap", 3),
                ErrorKind::Internal => ("internal", 2),
            };
            let reason = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("zipcast: error[{label}]: {reason}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    if let Some(jobs) = common.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Forecast => run_forecast(common),
        Command::Backtest => run_backtest(common),
        Command::Compare {
            baseline,
            baseline_name,
        } => run_compare(common, baseline, baseline_name),
        Command::Codelen {
            suffix_length,
            alphabet,
        } => run_codelen(common, *suffix_length, *alphabet),
    }
}

fn require_output(common: &Common) -> Result<&Path> {
    common
        .output
        .as_deref()
        .ok_or_else(|| Error::Config("--output is required".into()))
}

fn parse_backends(list: &str) -> Result<Vec<BackendSpec>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect()
}

/// Config file (or defaults) with command-line overrides applied and checked.
fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(h) = common.horizon {
        cfg.forecast.horizon = h;
    }
    if let Some(s) = common.split {
        cfg.forecast.split = s;
    }
    if let Some(d) = common.depth {
        if cfg.forecast.depth_weights.as_ref().map(Vec::len) != Some(d as usize) {
            cfg.forecast.depth_weights = None;
        }
        cfg.forecast.depth = d;
    }
    if let Some(list) = &common.backends {
        let names = parse_backends(list)?;
        if cfg.backends.weights.as_ref().map(Vec::len) != Some(names.len()) {
            cfg.backends.weights = None;
        }
        cfg.backends.names = names;
    }
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_series(common: &Common, cfg: &RunConfig) -> Result<SeriesDataset> {
    match common.input.as_slice() {
        [path] => data::load_csv(path, &cfg.data),
        [] => match &cfg.synthetic {
            Some(s) => data::generate_synthetic(&s.kind, s.length, cfg.seed),
            None => Err(Error::Config(
                "no --input and no [synthetic] section".into(),
            )),
        },
        _ => Err(Error::Config("expected a single --input".into())),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(Error::from)
}

/// Digits run together for alphabets up to 10, comma-separated otherwise.
fn symbols_label(symbols: &[u32], alphabet: u32) -> String {
    if alphabet <= 10 {
        symbols.iter().map(|s| s.to_string()).collect()
    } else {
        symbols
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[derive(serde::Serialize)]
struct ForecastFile<'a> {
    source: &'a str,
    history_len: usize,
    horizon: usize,
    split: usize,
    #[serde(flatten)]
    forecast: &'a PointForecast,
}

fn run_forecast(common: &Common) -> Result<()> {
    let output = require_output(common)?;
    let cfg = load_config(common)?;
    cfg.check_cap()?;
    let series = load_series(common, &cfg)?;
    let mut req = cfg.request(series.values.clone())?;
    req.round = cfg.forecast.round && series.is_integer_valued();
    let result = forecast::forecast(&req)?;
    if common.verbose {
        for sub in &result.subseries {
            println!(
                "subseries {}: top suffix {} p={:.6} interval=[{}, {}]",
                sub.residue,
                symbols_label(&sub.top_suffix, 1 << req.max_depth),
                sub.top_probability,
                sub.lower,
                sub.upper
            );
        }
        println!("values: {:?}", result.values);
    }
    let file = ForecastFile {
        source: &series.source,
        history_len: series.len(),
        horizon: req.horizon,
        split: req.split,
        forecast: &result,
    };
    write_file(output, &eval::canonical_json(&file, FORECAST_DECIMALS)?)
}

fn methods_for(cfg: &RunConfig) -> Result<Vec<Method>> {
    let template = cfg.request(Vec::new())?;
    let mut methods = Vec::new();
    if cfg.backtest.each_backend {
        for (spec, backend) in cfg.backends.names.iter().zip(&template.backends) {
            let mut single = template.clone();
            single.backends = vec![backend.clone()];
            single.weights = MixtureWeights::uniform(1);
            methods.push(Method::Compression {
                name: spec.to_string(),
                template: single,
            });
        }
    }
    methods.push(Method::Compression {
        name: "mixture".into(),
        template,
    });
    if cfg.backtest.last_value_baseline {
        methods.push(Method::LastValue);
    }
    Ok(methods)
}

fn table_path(output: &Path) -> PathBuf {
    output.with_extension("txt")
}

fn run_backtest(common: &Common) -> Result<()> {
    let output = require_output(common)?;
    let cfg = load_config(common)?;
    cfg.check_cap()?;
    let series = load_series(common, &cfg)?;
    let origins = cfg.origins(series.len())?;
    let mut methods = methods_for(&cfg)?;
    let integer = series.is_integer_valued();
    for m in &mut methods {
        if let Method::Compression { template, .. } = m {
            template.round = cfg.forecast.round && integer;
        }
    }
    let report = eval::backtest(&series.values, &methods, cfg.forecast.horizon, &origins)?;
    let rows: Vec<_> = report.methods.iter().map(|m| m.row.clone()).collect();
    let table = eval::render_table(&rows, cfg.report.decimals);
    print!("{table}");
    write_file(output, &eval::canonical_json(&report, cfg.report.decimals)?)?;
    write_file(&table_path(output), &table)
}

fn run_compare(common: &Common, baseline: &Path, name: &str) -> Result<()> {
    let output = require_output(common)?;
    let report_path = match common.input.as_slice() {
        [p] => p,
        _ => {
            return Err(Error::Config(
                "compare needs exactly one --input report".into(),
            ))
        }
    };
    let cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let text = std::fs::read_to_string(report_path)?;
    let report: BacktestReport = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidInput(format!("{}: {e}", report_path.display())))?;
    let base = BaselineForecasts::load(baseline, name)?;
    let cmp = eval::compare(&report, &base)?;
    let mut table = eval::render_table(&cmp.rows, cfg.report.decimals);
    table.push('\n');
    table.push_str(&eval::render_table(&cmp.differences, cfg.report.decimals));
    print!("{table}");
    write_file(output, &eval::canonical_json(&cmp, cfg.report.decimals)?)?;
    write_file(&table_path(output), &table)
}

fn run_codelen(common: &Common, suffix_length: Option<usize>, alphabet: u32) -> Result<()> {
    if common.input.is_empty() {
        return Err(Error::Config("codelen needs at least one --input".into()));
    }
    let specs = match &common.backends {
        Some(list) => parse_backends(list)?,
        None => match &common.config {
            Some(p) => RunConfig::load(p)?.backends.names,
            None => BackendSpec::all_defaults(),
        },
    };
    if specs.is_empty() {
        return Err(Error::Config("no backends given".into()));
    }
    let backends = specs
        .iter()
        .map(|s| s.build())
        .collect::<Result<Vec<_>>>()?;

    let mut rows: Vec<(String, Vec<u8>)> = Vec::new();
    match suffix_length {
        None => {
            for path in &common.input {
                rows.push((path.display().to_string(), std::fs::read(path)?));
            }
        }
        Some(h) => {
            let [path] = common.input.as_slice() else {
                return Err(Error::Config(
                    "--suffix-length takes a single --input".into(),
                ));
            };
            if !(2..=256).contains(&alphabet) {
                return Err(Error::UnsupportedAlphabet(alphabet as usize));
            }
            let history = std::fs::read(path)?;
            let count = enumeration_size(alphabet, h, zipcast_core::prob::DEFAULT_ENUMERATION_CAP)?;
            for index in 0..count {
                let mut digits = vec![0u32; h];
                let mut rest = index;
                for d in digits.iter_mut().rev() {
                    *d = (rest % alphabet as usize) as u32;
                    rest /= alphabet as usize;
                }
                let mut bytes = history.clone();
                bytes.extend(digits.iter().map(|&d| SYMBOL_BASE.wrapping_add(d as u8)));
                rows.push((symbols_label(&digits, alphabet), bytes));
            }
        }
    }

    let ids: Vec<String> = backends.iter().map(|b| b.id().to_string()).collect();
    let lengths: Vec<Vec<f64>> = rows
        .iter()
        .map(|(_, bytes)| {
            backends
                .iter()
                .map(|b| b.code_length(bytes).bits())
                .collect()
        })
        .collect();

    let label_width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    let col_width = ids.iter().map(String::len).max().unwrap_or(0).max(12);
    let mut table = format!("{:<label_width$}", "input");
    for id in &ids {
        let _ = write!(table, "  {id:>col_width$}");
    }
    table.push('\n');
    for ((label, _), row) in rows.iter().zip(&lengths) {
        let _ = write!(table, "{label:<label_width$}");
        for bits in row {
            let _ = write!(table, "  {bits:>col_width$.3}");
        }
        table.push('\n');
    }
    print!("{table}");

    if let Some(out) = &common.output {
        let mut csv = String::from("input");
        for id in &ids {
            let _ = write!(csv, ",{id}");
        }
        csv.push('\n');
        for ((label, _), row) in rows.iter().zip(&lengths) {
            csv.push_str(label);
            for bits in row {
                let _ = write!(csv, ",{bits}");
            }
            csv.push('\n');
        }
        write_file(out, &csv)?;
    }
    Ok(())
}
