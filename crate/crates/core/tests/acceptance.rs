//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::fs::{self, File};
use std::io::BufWriter;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use aeroforecast::cli::{cmd_evaluate, cmd_preprocess, cmd_train, RunConfig};
use aeroforecast::data::{
    parse_csv, prepare_datasets, preprocess, ColumnSchema, FeatureRange, NormalizationStats, PreprocessOptions,
    SplitRatios, DEFAULT_LOOKBACK,
};
use aeroforecast::eval::{compute_metrics, EvalResult};
use aeroforecast::model_io::{decode_model, encode_model, HEADER_LEN};
use aeroforecast::synthetic::{beijing_like_records, write_raw_csv, BeijingLikeOptions};
use aeroforecast::train::{train, TrainConfig};
use aeroforecast::{Error, Model, ModelConfig};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::gradcheck::{check_all, Outcome, STEP, TOLERANCE};
use common::oracles::{CHECKS, INSTANCES, REL_TOL};

const GRAD_SEEDS: u64 = 20;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const IDENTITY_REL_TOL: f64 = 1e-9;
const IDENTITY_RANDOM_VECTORS: u64 = 100;
const DETERMINISM_EPOCHS: &str = "5";
const DETERMINISM_SEED: &str = "42";
const DETERMINISM_WINDOWS: usize = 500;
const CONVERGENCE_VAL_MSE: f64 = 0.005;
const CONVERGENCE_RATIO: f64 = 0.5;
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(5 * 60);
const BASELINE_MIN_IMPROVEMENT: f64 = 0.05;
const BASELINE_BUDGET: Duration = Duration::from_secs(15 * 60);
const CORRUPTION_TRIALS: usize = 100;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn gradient_checks() -> Result<Verdict, String> {
    let started = Instant::now();
    let mut total = Outcome::default();
    let mut failing = Vec::new();
    for seed in 0..GRAD_SEEDS {
        for (name, outcome) in check_all(seed).map_err(|e| e.to_string())? {
            if !outcome.passed() {
                failing.push(format!("seed {seed} {name}"));
            }
            total.merge(outcome);
        }
    }
    let elapsed = started.elapsed();
    let passed = failing.is_empty() && elapsed < GRAD_BUDGET;
    Ok(verdict(
        passed,
        format!(
            "{} gradients over {GRAD_SEEDS} seeds, h = {STEP:e}, worst rel err {:.2e} (< {TOLERANCE:e}) at {}, {:.1?} (< {:?}){}",
            total.checked,
            total.worst,
            total.worst_at,
            elapsed,
            GRAD_BUDGET,
            if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) }
        ),
    ))
}

fn oracle_equivalence() -> Result<Verdict, String> {
    let mut errors = Vec::new();
    for (name, check) in CHECKS {
        let failures: Vec<String> = (0..INSTANCES).filter_map(|seed| check(seed).err()).collect();
        if let Some(first) = failures.first() {
            errors.push(format!("{name}: {} mismatches, first: {first}", failures.len()));
        }
    }
    let names: Vec<&str> = CHECKS.iter().map(|(n, _)| *n).collect();
    let detail = format!(
        "{INSTANCES} instances each of {} (rel tol {REL_TOL:e})",
        names.join(", ")
    );
    if errors.is_empty() {
        Ok(verdict(true, detail))
    } else {
        Ok(verdict(false, format!("{detail}; {}", errors.join("; "))))
    }
}

fn rmse_identity(results: &[EvalResult]) -> Result<Verdict, String> {
    let mut all = results.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..IDENTITY_RANDOM_VECTORS {
        let n = rng.random_range(1..200);
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..700.0)).collect();
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..700.0)).collect();
        all.push(compute_metrics(&p, &t).map_err(|e| e.to_string())?);
    }
    let worst = all
        .iter()
        .map(|r| {
            let (a, b) = (r.rmse * r.rmse, r.mse);
            if a == b {
                0.0
            } else {
                (a - b).abs() / a.abs().max(b.abs())
            }
        })
        .fold(0.0, f64::max);
    Ok(verdict(
        worst <= IDENTITY_REL_TOL,
        format!(
            "{} results ({} from pipeline runs), worst |rmse² − mse| / mse = {worst:.2e} (≤ {IDENTITY_REL_TOL:e})",
            all.len(),
            results.len()
        ),
    ))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_aeroforecast"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn determinism() -> Result<Verdict, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let raw = dir.path().join("raw.csv");
    let opts = BeijingLikeOptions {
        start: NaiveDate::from_ymd_opt(2013, 12, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
        hours: DETERMINISM_WINDOWS * 6,
        outage_rate: 0.0,
        seed: 500,
    };
    let schema = ColumnSchema {
        has_snow: true,
        has_rain: true,
        has_weather: false,
    };
    let file = File::create(&raw).map_err(|e| e.to_string())?;
    write_raw_csv(&beijing_like_records(&opts), &schema, BufWriter::new(file)).map_err(|e| e.to_string())?;

    let outputs = [
        "windows.csv",
        "windows.csv.report.txt",
        "model.afm",
        "model.afm.loss.csv",
        "report/forecast.csv",
        "report/metrics.txt",
        "report/histogram.csv",
    ];
    let mut runs: Vec<Vec<Vec<u8>>> = Vec::new();
    for run in ["a", "b"] {
        let d = dir.path().join(run);
        fs::create_dir_all(&d).map_err(|e| e.to_string())?;
        let p = |f: &str| d.join(f).to_string_lossy().into_owned();
        run_cli(&["preprocess", raw.to_str().unwrap(), &p("windows.csv")])?;
        run_cli(&["train", &p("windows.csv"), &p("model.afm"), "--epochs", DETERMINISM_EPOCHS, "--seed", DETERMINISM_SEED])?;
        run_cli(&["evaluate", &p("windows.csv"), &p("model.afm"), &p("report"), "--seed", DETERMINISM_SEED])?;
        runs.push(outputs.iter().map(|f| fs::read(d.join(f)).unwrap_or_default()).collect());
    }
    let windows = String::from_utf8_lossy(&runs[0][0]).lines().count().saturating_sub(1);
    let differing: Vec<&str> = outputs
        .iter()
        .zip(runs[0].iter().zip(&runs[1]))
        .filter(|(_, (a, b))| a != b || a.is_empty())
        .map(|(f, _)| *f)
        .collect();
    let passed = differing.is_empty() && windows == DETERMINISM_WINDOWS;
    Ok(verdict(
        passed,
        format!(
            "{windows}-window fixture, seed {DETERMINISM_SEED}, {DETERMINISM_EPOCHS} epochs, {} files compared{}",
            outputs.len(),
            if differing.is_empty() { ", all bitwise identical".to_string() } else { format!(", differing: {}", differing.join(", ")) }
        ),
    ))
}

fn convergence() -> Result<Verdict, String> {
    let started = Instant::now();
    let parsed = parse_csv(common::sine_fixture()).map_err(|e| e.to_string())?;
    let rows = parsed.report.rows_read;
    let (windows, _) = preprocess(parsed, &PreprocessOptions::default());
    let data = prepare_datasets(&windows, DEFAULT_LOOKBACK, &SplitRatios::default()).map_err(|e| e.to_string())?;
    let cfg = TrainConfig::default();
    let mut model = Model::build(ModelConfig::new(windows.feature_count()), data.stats.clone(), cfg.seed)
        .map_err(|e| e.to_string())?;
    let report = train(&mut model, &data.train, &data.validation, &cfg).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let first = report.epochs[0].val_loss.ok_or("empty validation split")?;
    let last = report.final_epoch().and_then(|e| e.val_loss).ok_or("empty validation split")?;
    let ratio = last / first;
    let passed = last <= CONVERGENCE_VAL_MSE && ratio <= CONVERGENCE_RATIO && elapsed < CONVERGENCE_BUDGET;
    Ok(verdict(
        passed,
        format!(
            "{rows} hourly rows, {} epochs: val MSE {first:.5} → {last:.5} (≤ {CONVERGENCE_VAL_MSE}), ratio {ratio:.3} (≤ {CONVERGENCE_RATIO}), {:.1?} (< {:?})",
            report.epochs.len(),
            elapsed,
            CONVERGENCE_BUDGET
        ),
    ))
}

fn baseline(results: &mut Vec<EvalResult>) -> Result<Verdict, String> {
    let started = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let cfg = RunConfig::default();
    let windows = d.join("windows.csv");
    let model = d.join("model.afm");
    cmd_preprocess(&common::beijing_fixture(), &windows, &cfg).map_err(|e| e.to_string())?;
    cmd_train(&windows, &model, &d.join("loss.csv"), &cfg).map_err(|e| e.to_string())?;
    let eval = cmd_evaluate(&windows, &model, &d.join("report"), &cfg).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let improvement = eval.improvement();
    let passed = improvement >= BASELINE_MIN_IMPROVEMENT && elapsed < BASELINE_BUDGET;
    let detail = format!(
        "bundled 6-month fixture, {} test samples: model RMSE {:.3} vs persistence {:.3} µg/m³, improvement {:.1}% (≥ {:.0}%), {:.1?} (< {:?})",
        eval.model.n,
        eval.model.rmse,
        eval.baseline.rmse,
        100.0 * improvement,
        100.0 * BASELINE_MIN_IMPROVEMENT,
        elapsed,
        BASELINE_BUDGET
    );
    results.push(eval.model);
    results.push(eval.baseline);
    Ok(verdict(passed, detail))
}

fn bits(m: &Model) -> Vec<u64> {
    m.params().iter().flat_map(|t| t.data().iter().map(|v| v.to_bits())).collect()
}

fn serialization() -> Result<Verdict, String> {
    let mut names = vec!["pm25".to_string()];
    names.extend((1..16).map(|i| format!("f{i}")));
    let ranges = (0..16).map(|i| FeatureRange { min: -1.0 - i as f64, max: 500.0 / (i + 1) as f64 }).collect();
    let stats = NormalizationStats::new(names, ranges).map_err(|e| e.to_string())?;
    let model = Model::build(ModelConfig::new(16), stats, 42).map_err(|e| e.to_string())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("m.afm");
    aeroforecast::model_io::save_model(&model, &path).map_err(|e| e.to_string())?;
    let loaded = aeroforecast::model_io::load_model(&path).map_err(|e| e.to_string())?;
    let round_trip = bits(&loaded) == bits(&model) && loaded.stats == model.stats && loaded.config == model.config;

    let bytes = encode_model(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut detected = 0;
    for _ in 0..CORRUPTION_TRIALS {
        let mut bad = bytes.clone();
        let at = rng.random_range(HEADER_LEN..bad.len());
        bad[at] ^= rng.random_range(1..=255u8);
        if matches!(decode_model(&bad), Err(Error::Checksum { .. })) {
            detected += 1;
        }
    }
    let passed = round_trip && detected == CORRUPTION_TRIALS;
    Ok(verdict(
        passed,
        format!(
            "{} parameters round-trip {}; {detected}/{CORRUPTION_TRIALS} single-byte corruptions of payload or checksum reported as checksum mismatch",
            model.param_count(),
            if round_trip { "bitwise" } else { "WITH DIFFERENCES" }
        ),
    ))
}

fn report(name: &str, outcome: Result<Verdict, String>) -> bool {
    let v = outcome.unwrap_or_else(|e| verdict(false, format!("error: {e}")));
    println!("{} {name}: {}", if v.passed { "PASS" } else { "FAIL" }, v.detail);
    v.passed
}

fn main() -> ExitCode {
    println!("acceptance criteria");
    let mut results = Vec::new();
    let mut ok = true;
    ok &= report("gradient checks", gradient_checks());
    ok &= report("oracle equivalence", oracle_equivalence());
    ok &= report("determinism", determinism());
    ok &= report("synthetic convergence", convergence());
    ok &= report("baseline superiority", baseline(&mut results));
    ok &= report("rmse = sqrt(mse)", rmse_identity(&results));
    ok &= report("serialization", serialization());
    if ok {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("some acceptance criteria FAILED");
        ExitCode::FAILURE
    }
}
