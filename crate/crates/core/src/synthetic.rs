//! Seeded generators for hourly input files in the raw CSV layout.
//!
//! [`sine_records`] is a noisy diurnal sine used to check that training
//! converges. [`beijing_like_records`] imitates the winter half-year of the
//! Beijing station record: persistent wind regimes, pollution build-up under
//! calm or southerly flow, fast clearing behind north-westerly fronts, a
//! diurnal cycle, snow and rain events and sensor outages.

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{ColumnSchema, RawRecord, WindDirection};

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("finite positive standard deviation")
}

fn blank(timestamp: NaiveDateTime) -> RawRecord {
    RawRecord {
        timestamp,
        pm25: None,
        dewp: None,
        temp: None,
        pres: None,
        cbwd: None,
        iws: None,
        snow_hours: None,
        rain_hours: None,
        weather: None,
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

/// `hours` rows of PM2.5 = 100 + 50·sin(2πt/24) + N(0, 5) with loosely
/// varying weather columns. No `Is` / `Ir` columns.
pub fn sine_records(hours: usize, seed: u64) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = normal(0.0, 5.0);
    let walk = normal(0.0, 0.3);
    let start = NaiveDate::from_ymd_opt(2014, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
    let (mut dewp, mut temp, mut pres) = (-5.0, 2.0, 1020.0);
    let mut iws = 0.0;
    let mut wind = WindDirection::NorthWest;
    (0..hours)
        .map(|t| {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / 24.0;
            dewp += walk.sample(&mut rng);
            temp += walk.sample(&mut rng);
            pres += walk.sample(&mut rng);
            if rng.random_bool(0.1) {
                wind = WindDirection::ALL[rng.random_range(0..4)];
                iws = 0.0;
            }
            iws += rng.random_range(0.5..5.0);
            RawRecord {
                pm25: Some(100.0 + 50.0 * phase.sin() + noise.sample(&mut rng)),
                dewp: Some(dewp),
                temp: Some(temp),
                pres: Some(pres),
                cbwd: Some(wind),
                iws: Some(iws),
                ..blank(start + Duration::hours(t as i64))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeijingLikeOptions {
    pub start: NaiveDateTime,
    pub hours: usize,
    /// Per-hour probability that a PM2.5 sensor outage begins.
    pub outage_rate: f64,
    pub seed: u64,
}

impl Default for BeijingLikeOptions {
    /// October 2013 through March 2014.
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2013, 10, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            hours: 182 * 24,
            outage_rate: 0.003,
            seed: 2013,
        }
    }
}

struct Regime {
    dir: WindDirection,
    /// Mean wind speed, m/s.
    speed: f64,
    /// Hourly drift of ln(PM2.5) from accumulation or ventilation.
    drift: f64,
    dewp_offset: f64,
    pres_offset: f64,
    temp_offset: f64,
}

fn regime(dir: WindDirection) -> Regime {
    let (speed, drift, dewp_offset, pres_offset, temp_offset) = match dir {
        WindDirection::NorthWest => (5.5, -0.07, -9.0, 6.0, -2.5),
        WindDirection::NorthEast => (3.5, -0.03, -4.0, 3.0, -1.0),
        WindDirection::SouthEast => (2.2, 0.035, 5.0, -4.0, 1.5),
        WindDirection::Calm => (0.8, 0.045, 3.0, -2.0, 0.5),
    };
    Regime {
        dir,
        speed,
        drift,
        dewp_offset,
        pres_offset,
        temp_offset,
    }
}

fn next_direction(rng: &mut impl Rng, current: WindDirection) -> WindDirection {
    if rng.random_bool(0.95) {
        return current;
    }
    let u: f64 = rng.random();
    match u {
        u if u < 0.38 => WindDirection::NorthWest,
        u if u < 0.53 => WindDirection::NorthEast,
        u if u < 0.78 => WindDirection::SouthEast,
        _ => WindDirection::Calm,
    }
}

/// Hourly records with the qualitative behaviour of a Beijing winter.
/// Values are rounded like the station data (integer PM2.5, DEWP, TEMP,
/// PRES; two decimals for `Iws`).
pub fn beijing_like_records(opts: &BeijingLikeOptions) -> Vec<RawRecord> {
    use std::f64::consts::PI;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let shock = normal(0.0, 0.05);
    let weather_noise = normal(0.0, 0.6);
    let mut wind = WindDirection::NorthWest;
    let mut log_pm: f64 = 3.5;
    let mut iws = 0.0;
    let (mut dewp_anom, mut temp_anom, mut pres_anom) = (0.0, 0.0, 0.0);
    let (mut snow_run, mut rain_run) = (0.0, 0.0);
    let mut outage_left = 0usize;
    let mut out = Vec::with_capacity(opts.hours);

    for t in 0..opts.hours {
        let ts = opts.start + Duration::hours(t as i64);
        let hour = ts.hour() as f64;
        let doy = ts.ordinal0() as f64;
        let previous = wind;
        wind = next_direction(&mut rng, wind);
        let r = regime(wind);

        // seasonal cycle peaks in late July; the diurnal one mid-afternoon
        let season = (2.0 * PI * (doy - 200.0) / 365.25).cos();
        let diurnal = (2.0 * PI * (hour - 15.0) / 24.0).cos();
        dewp_anom = 0.9 * dewp_anom + 0.1 * r.dewp_offset + weather_noise.sample(&mut rng);
        temp_anom = 0.9 * temp_anom + 0.1 * r.temp_offset + weather_noise.sample(&mut rng);
        pres_anom = 0.92 * pres_anom + 0.08 * r.pres_offset + 0.5 * weather_noise.sample(&mut rng);
        let temp = 12.0 + 14.0 * season + 4.0 * diurnal + temp_anom;
        let dewp = (temp - 8.0 + dewp_anom).min(temp);
        let pres = 1020.0 - 10.0 * season + pres_anom;

        let speed = (r.speed * rng.random_range(0.5..1.5)).max(0.45);
        iws = if wind == previous { iws + speed } else { speed };

        let humid = matches!(wind, WindDirection::SouthEast | WindDirection::Calm);
        let precip_odds = if humid { 0.06 } else { 0.01 };
        let precipitating = if snow_run > 0.0 || rain_run > 0.0 {
            rng.random_bool(0.8)
        } else {
            rng.random_bool(precip_odds * 0.3)
        };
        if precipitating && temp <= 0.5 {
            snow_run += 1.0;
            rain_run = 0.0;
        } else if precipitating {
            rain_run += 1.0;
            snow_run = 0.0;
        } else {
            snow_run = 0.0;
            rain_run = 0.0;
        }

        // emissions peak in the evening; mixing height peaks mid-afternoon
        let daily = 0.05 * (2.0 * PI * (hour - 21.0) / 24.0).cos();
        let washout = if precipitating { 0.04 } else { 0.0 };
        let reversion = 0.015 * (5.0 - log_pm);
        log_pm += r.drift + daily - washout + reversion + shock.sample(&mut rng);
        log_pm = log_pm.clamp(1.1, 6.8);

        if outage_left == 0 && rng.random_bool(opts.outage_rate) {
            outage_left = rng.random_range(1..30);
        }
        let pm25 = if outage_left > 0 {
            outage_left -= 1;
            None
        } else {
            Some(log_pm.exp().round())
        };

        out.push(RawRecord {
            pm25,
            dewp: Some(dewp.round()),
            temp: Some(temp.round()),
            pres: Some(pres.round()),
            cbwd: Some(r.dir),
            iws: Some(round_to(iws, 2)),
            snow_hours: Some(snow_run),
            rain_hours: Some(rain_run),
            ..blank(ts)
        });
    }
    out
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

/// Writes records in the station file layout
/// (`No,year,month,day,hour,pm2.5,DEWP,TEMP,PRES,cbwd,Iws[,Is][,Ir]`).
pub fn write_raw_csv<W: Write>(records: &[RawRecord], schema: &ColumnSchema, mut out: W) -> std::io::Result<()> {
    let mut header = String::from("No,year,month,day,hour,pm2.5,DEWP,TEMP,PRES,cbwd,Iws");
    if schema.has_snow {
        header.push_str(",Is");
    }
    if schema.has_rain {
        header.push_str(",Ir");
    }
    writeln!(out, "{header}")?;
    for (i, r) in records.iter().enumerate() {
        let ts = r.timestamp;
        write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            ts.year(),
            ts.month(),
            ts.day(),
            ts.hour(),
            cell(r.pm25),
            cell(r.dewp),
            cell(r.temp),
            cell(r.pres),
            r.cbwd.map_or("NA", |w| w.token()),
            cell(r.iws),
        )?;
        if schema.has_snow {
            write!(out, ",{}", cell(r.snow_hours))?;
        }
        if schema.has_rain {
            write!(out, ",{}", cell(r.rain_hours))?;
        }
        writeln!(out)?;
    }
    out.flush()
}
