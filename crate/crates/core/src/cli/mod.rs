//! The `aeroforecast` command line. Each subcommand is a plain library
//! function, so scripted use and the binary produce identical files.

mod config;

pub use config::{RunConfig, CONFIG_KEYS};

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDateTime};
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::data::{
    is_next_window, parse_csv, prepare_datasets, prepare_datasets_with_stats, preprocess, read_windows_csv,
    write_windows_csv, PreprocessReport, WindowSet, TIMESTAMP_FORMAT, WINDOW_HOURS,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, export_forecast_csv, export_histogram, export_loss_csv, Evaluation};
use crate::model::{Model, ModelConfig};
use crate::model_io::{load_model, save_model};
use crate::tensor::Tensor;
use crate::train::{train, TrainReport};

pub const LOG_ENV: &str = "AEROFORECAST_LOG";

/// Path of the text report written next to the window file.
pub fn report_path(windows_out: &Path) -> PathBuf {
    let mut s = windows_out.as_os_str().to_owned();
    s.push(".report.txt");
    PathBuf::from(s)
}

/// Default loss-curve path for a model file.
pub fn loss_path(model_out: &Path) -> PathBuf {
    let mut s = model_out.as_os_str().to_owned();
    s.push(".loss.csv");
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Raw hourly CSV → window CSV plus a `.report.txt` with row and window counts.
pub fn cmd_preprocess(raw_csv: &Path, windows_out: &Path, cfg: &RunConfig) -> Result<PreprocessReport> {
    cfg.validate()?;
    let parsed = parse_csv(raw_csv)?;
    for r in &parsed.report.rejected {
        log::warn!("{}: line {}: {}", raw_csv.display(), r.line, r.reason);
    }
    let (windows, report) = preprocess(parsed, &cfg.preprocess);
    write_windows_csv(&windows, windows_out)?;
    write_text(&report_path(windows_out), &report.to_string())?;
    log::info!("{} windows written to {}", report.windows_kept, windows_out.display());
    Ok(report)
}

/// Fits the normalizer on the training split, trains, and writes the model
/// and its per-epoch loss curve.
pub fn cmd_train(windows_csv: &Path, model_out: &Path, loss_csv: &Path, cfg: &RunConfig) -> Result<TrainReport> {
    cfg.validate()?;
    let set = read_windows_csv(windows_csv)?;
    let data = prepare_datasets(&set, cfg.model.lookback, &cfg.split)?;
    log::info!(
        "{} train / {} validation / {} test samples",
        data.train.len(),
        data.validation.len(),
        data.test.len()
    );
    let model_cfg = ModelConfig {
        features: set.feature_count(),
        ..cfg.model
    };
    let mut model = Model::build(model_cfg, data.stats.clone(), cfg.train.seed)?;
    log::info!("model has {} parameters", model.param_count());
    let report = train(&mut model, &data.train, &data.validation, &cfg.train)?;
    save_model(&model, model_out)?;
    export_loss_csv(&report, loss_csv)?;
    log::info!("trained in {:.1?}", report.wall_time);
    Ok(report)
}

fn check_columns(set: &WindowSet, model: &Model) -> Result<()> {
    if set.feature_names != model.stats.names {
        return Err(Error::Schema(format!(
            "window columns {:?} do not match the model's features {:?}",
            set.feature_names, model.stats.names
        )));
    }
    Ok(())
}

/// Scores the model on the test split and writes `forecast.csv`,
/// `metrics.txt` and `histogram.csv` (PM2.5 window means of the whole file)
/// into `report_dir`.
pub fn cmd_evaluate(windows_csv: &Path, model_in: &Path, report_dir: &Path, cfg: &RunConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let model = load_model(model_in)?;
    let set = read_windows_csv(windows_csv)?;
    check_columns(&set, &model)?;
    let data = prepare_datasets_with_stats(&set, model.config.lookback, &cfg.split, model.stats.clone())?;
    let result = evaluate(&model, &data.test)?;
    fs::create_dir_all(report_dir).map_err(|e| Error::io(report_dir, e))?;
    export_forecast_csv(&result.model, report_dir.join("forecast.csv"))?;
    write_text(&report_dir.join("metrics.txt"), &result.to_string())?;
    let pm25: Vec<f64> = set.windows.iter().map(|w| w.pm25_mean).collect();
    export_histogram(&pm25, cfg.bin_width, cfg.max_bins, report_dir.join("histogram.csv"))?;
    Ok(result)
}

/// Forecasts the window following each of the last `n_last` complete
/// lookback spans in the file. Returns (target window start, µg/m³) pairs.
pub fn cmd_predict(model_in: &Path, windows_csv: &Path, n_last: usize) -> Result<Vec<(NaiveDateTime, f64)>> {
    if n_last == 0 {
        return Err(Error::Config("--n-last must be at least 1".into()));
    }
    let model = load_model(model_in)?;
    let set = read_windows_csv(windows_csv)?;
    check_columns(&set, &model)?;
    let lookback = model.config.lookback;
    let w = &set.windows;
    let mut run = 0usize;
    let mut ends = Vec::new();
    for i in 0..w.len() {
        run = if i > 0 && is_next_window(&w[i - 1], &w[i]) { run + 1 } else { 1 };
        if run >= lookback {
            ends.push(i);
        }
    }
    if ends.is_empty() {
        return Err(Error::TooFewSamples { n: 0 });
    }
    let first = ends.len().saturating_sub(n_last);
    ends[first..]
        .iter()
        .map(|&end| {
            let span = &w[end + 1 - lookback..=end];
            let data = span.iter().flat_map(|r| model.stats.apply(&r.features)).collect();
            let x = Tensor::new(vec![lookback, set.feature_count()], data)?;
            Ok((w[end].start + Duration::hours(WINDOW_HOURS), model.predict(&x)?))
        })
        .collect()
}

pub fn format_predictions(preds: &[(NaiveDateTime, f64)]) -> String {
    let mut out = String::from("target_window_start,pred_ugm3\n");
    for (ts, p) in preds {
        out.push_str(&format!("{},{p}\n", ts.format(TIMESTAMP_FORMAT)));
    }
    out
}

fn command() -> Command {
    let mut cmd = Command::new("aeroforecast")
        .version(env!("CARGO_PKG_VERSION"))
        .about("CNN-LSTM forecaster for the next 6-hour mean PM2.5 concentration")
        .after_help(format!("Set {LOG_ENV}=error|warn|info|debug for progress on standard error."))
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .global(true)
                .help("key = value file; flags override it"),
        );
    for (key, help) in CONFIG_KEYS {
        cmd = cmd.arg(Arg::new(*key).long(*key).value_name("VALUE").global(true).help(*help));
    }
    let path = |name: &'static str| Arg::new(name).required(true).value_parser(clap::value_parser!(PathBuf));
    cmd.subcommand(
        Command::new("preprocess")
            .about("Clean raw hourly records and aggregate them into 6-hour windows")
            .arg(path("RAW_CSV"))
            .arg(path("OUT_WINDOWS_CSV")),
    )
    .subcommand(
        Command::new("train")
            .about("Train a model on a window file")
            .arg(path("WINDOWS_CSV"))
            .arg(path("MODEL_OUT"))
            .arg(
                Arg::new("loss-csv")
                    .long("loss-csv")
                    .value_name("PATH")
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("per-epoch losses [default: MODEL_OUT.loss.csv]"),
            ),
    )
    .subcommand(
        Command::new("evaluate")
            .about("Score a model on the test split and export forecast, metrics and histogram")
            .arg(path("WINDOWS_CSV"))
            .arg(path("MODEL_IN"))
            .arg(path("REPORT_DIR")),
    )
    .subcommand(
        Command::new("predict")
            .about("Forecast the window after the most recent lookback spans")
            .arg(path("MODEL_IN"))
            .arg(path("WINDOWS_CSV"))
            .arg(
                Arg::new("n-last")
                    .long("n-last")
                    .value_name("N")
                    .default_value("1")
                    .value_parser(clap::value_parser!(usize))
                    .action(ArgAction::Set),
            ),
    )
}

fn run_config(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = m.get_one::<String>("config") {
        cfg.apply_file(path)?;
    }
    for (key, _) in CONFIG_KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(m: &ArgMatches) -> Result<()> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cfg = run_config(sub)?;
    let path = |id: &str| sub.get_one::<PathBuf>(id).expect("required").as_path();
    match name {
        "preprocess" => {
            let report = cmd_preprocess(path("RAW_CSV"), path("OUT_WINDOWS_CSV"), &cfg)?;
            print!("{report}");
        }
        "train" => {
            let model_out = path("MODEL_OUT");
            let loss = sub.get_one::<PathBuf>("loss-csv").cloned().unwrap_or_else(|| loss_path(model_out));
            let report = cmd_train(path("WINDOWS_CSV"), model_out, &loss, &cfg)?;
            if let Some(last) = report.final_epoch() {
                println!("train_loss = {}", last.train_loss);
                if let Some(v) = last.val_loss {
                    println!("val_loss = {v}");
                }
            }
        }
        "evaluate" => {
            let result = cmd_evaluate(path("WINDOWS_CSV"), path("MODEL_IN"), path("REPORT_DIR"), &cfg)?;
            print!("{result}");
        }
        "predict" => {
            let n = *sub.get_one::<usize>("n-last").expect("has default");
            let preds = cmd_predict(path("MODEL_IN"), path("WINDOWS_CSV"), n)?;
            print!("{}", format_predictions(&preds));
        }
        _ => unreachable!("clap rejects unknown subcommands"),
    }
    Ok(())
}

/// `--help` and `--version` succeed; any other parse failure is a usage error.
fn usage_exit_code(e: &clap::Error) -> i32 {
    if e.use_stderr() {
        2
    } else {
        0
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .parse_env(env_logger::Env::new().filter(LOG_ENV))
        .format_timestamp(None)
        .try_init();
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return usage_exit_code(&e);
        }
    };
    match dispatch(&matches) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
