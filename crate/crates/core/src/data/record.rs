//! Hourly observations: CSV parsing, wind encoding and cleaning.

use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime};

use crate::error::{Error, Result};

/// Combined wind direction, one-hot encoded in the order NE, NW, SE, cv.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindDirection {
    NorthEast,
    NorthWest,
    SouthEast,
    /// Calm or variable.
    Calm,
}

impl WindDirection {
    pub const ALL: [WindDirection; 4] = [
        WindDirection::NorthEast,
        WindDirection::NorthWest,
        WindDirection::SouthEast,
        WindDirection::Calm,
    ];

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self as usize] = 1.0;
        v
    }

    pub fn token(self) -> &'static str {
        match self {
            WindDirection::NorthEast => "NE",
            WindDirection::NorthWest => "NW",
            WindDirection::SouthEast => "SE",
            WindDirection::Calm => "cv",
        }
    }
}

impl FromStr for WindDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NE" => Ok(WindDirection::NorthEast),
            "NW" => Ok(WindDirection::NorthWest),
            "SE" => Ok(WindDirection::SouthEast),
            "CV" => Ok(WindDirection::Calm),
            _ => Err(Error::UnknownWindToken(s.to_string())),
        }
    }
}

impl fmt::Display for WindDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One-hot encoding of a wind token in the fixed order `[NE, NW, SE, cv]`.
pub fn encode_wind(token: &str) -> Result<[f64; 4]> {
    token.parse::<WindDirection>().map(WindDirection::one_hot)
}

/// One hourly observation. Numeric fields are `None` when the source value
/// was missing (`NA`, empty, `NaN` or the `-99` sentinel).
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    pub pm25: Option<f64>,
    pub dewp: Option<f64>,
    pub temp: Option<f64>,
    pub pres: Option<f64>,
    pub cbwd: Option<WindDirection>,
    pub iws: Option<f64>,
    /// Cumulated hours of snow (`Is`).
    pub snow_hours: Option<f64>,
    /// Cumulated hours of rain (`Ir`).
    pub rain_hours: Option<f64>,
    pub weather: Option<String>,
}

/// Which optional columns the source file carried.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ColumnSchema {
    pub has_snow: bool,
    pub has_rain: bool,
    pub has_weather: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowReject {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    /// Data rows seen (header excluded).
    pub rows_read: usize,
    pub rejected: Vec<RowReject>,
}

impl ParseReport {
    pub fn rows_accepted(&self) -> usize {
        self.rows_read - self.rejected.len()
    }
}

#[derive(Debug, Clone)]
pub struct ParsedCsv {
    pub records: Vec<RawRecord>,
    pub schema: ColumnSchema,
    pub report: ParseReport,
}

#[derive(Debug, Default)]
struct ColumnIndex {
    year: Option<usize>,
    month: Option<usize>,
    day: Option<usize>,
    hour: Option<usize>,
    pm25: Option<usize>,
    dewp: Option<usize>,
    temp: Option<usize>,
    pres: Option<usize>,
    cbwd: Option<usize>,
    iws: Option<usize>,
    snow: Option<usize>,
    rain: Option<usize>,
    weather: Option<usize>,
}

impl ColumnIndex {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let mut idx = ColumnIndex::default();
        for (i, name) in header.iter().enumerate() {
            let slot = match name.trim().to_ascii_lowercase().as_str() {
                "year" => &mut idx.year,
                "month" => &mut idx.month,
                "day" => &mut idx.day,
                "hour" => &mut idx.hour,
                "pm2.5" | "pm25" => &mut idx.pm25,
                "dewp" => &mut idx.dewp,
                "temp" | "temperature" => &mut idx.temp,
                "pres" => &mut idx.pres,
                "cbwd" => &mut idx.cbwd,
                "iws" => &mut idx.iws,
                "is" => &mut idx.snow,
                "ir" => &mut idx.rain,
                "weather" => &mut idx.weather,
                _ => continue,
            };
            if slot.is_some() {
                return Err(Error::Schema(format!("duplicate column `{name}`")));
            }
            *slot = Some(i);
        }
        let required = [
            ("year", idx.year),
            ("month", idx.month),
            ("day", idx.day),
            ("hour", idx.hour),
            ("pm2.5", idx.pm25),
            ("DEWP", idx.dewp),
            ("TEMP", idx.temp),
            ("PRES", idx.pres),
            ("cbwd", idx.cbwd),
            ("Iws", idx.iws),
        ];
        let missing: Vec<&str> = required.iter().filter(|(_, i)| i.is_none()).map(|(n, _)| *n).collect();
        if !missing.is_empty() {
            return Err(Error::Schema(format!("missing required column(s): {}", missing.join(", "))));
        }
        Ok(idx)
    }

    fn schema(&self) -> ColumnSchema {
        ColumnSchema {
            has_snow: self.snow.is_some(),
            has_rain: self.rain.is_some(),
            has_weather: self.weather.is_some(),
        }
    }
}

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s.eq_ignore_ascii_case("na") || s.eq_ignore_ascii_case("nan")
}

fn numeric_field(row: &csv::StringRecord, col: Option<usize>, name: &str) -> Result<Option<f64>, String> {
    let Some(i) = col else { return Ok(None) };
    let raw = row.get(i).unwrap_or("").trim();
    if is_missing_token(raw) {
        return Ok(None);
    }
    let v: f64 = raw.parse().map_err(|_| format!("{name}: not a number: `{raw}`"))?;
    if !v.is_finite() || v == -99.0 {
        Ok(None)
    } else {
        Ok(Some(v))
    }
}

fn int_field(row: &csv::StringRecord, col: usize, name: &str) -> Result<i64, String> {
    let raw = row.get(col).unwrap_or("").trim();
    raw.parse::<i64>()
        .or_else(|_| {
            // some exports write calendar fields as 2010.0
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.fract() == 0.0)
                .map(|v| v as i64)
                .ok_or(())
        })
        .map_err(|_| format!("{name}: not an integer: `{raw}`"))
}

fn parse_row(row: &csv::StringRecord, idx: &ColumnIndex) -> Result<RawRecord, String> {
    let year = int_field(row, idx.year.unwrap(), "year")?;
    let month = int_field(row, idx.month.unwrap(), "month")?;
    let day = int_field(row, idx.day.unwrap(), "day")?;
    let hour = int_field(row, idx.hour.unwrap(), "hour")?;
    if !(0..=23).contains(&hour) {
        return Err(format!("hour out of range: {hour}"));
    }
    let date = i32::try_from(year)
        .ok()
        .zip(u32::try_from(month).ok())
        .zip(u32::try_from(day).ok())
        .and_then(|((y, m), d)| NaiveDate::from_ymd_opt(y, m, d))
        .ok_or_else(|| format!("invalid date {year}-{month}-{day}"))?;
    let timestamp = date.and_hms_opt(hour as u32, 0, 0).expect("hour validated");

    let cbwd_raw = row.get(idx.cbwd.unwrap()).unwrap_or("").trim();
    let cbwd = if is_missing_token(cbwd_raw) {
        None
    } else {
        Some(cbwd_raw.parse::<WindDirection>().map_err(|e| e.to_string())?)
    };
    let weather = idx
        .weather
        .and_then(|i| row.get(i))
        .map(str::trim)
        .filter(|s| !is_missing_token(s))
        .map(str::to_string);

    Ok(RawRecord {
        timestamp,
        pm25: numeric_field(row, idx.pm25, "pm2.5")?,
        dewp: numeric_field(row, idx.dewp, "DEWP")?,
        temp: numeric_field(row, idx.temp, "TEMP")?,
        pres: numeric_field(row, idx.pres, "PRES")?,
        cbwd,
        iws: numeric_field(row, idx.iws, "Iws")?,
        snow_hours: numeric_field(row, idx.snow, "Is")?,
        rain_hours: numeric_field(row, idx.rain, "Ir")?,
        weather,
    })
}

/// Parses hourly records from any reader. Rows with the wrong field count,
/// an out-of-range calendar value or an unparseable field are rejected and
/// listed (with their line number) in the report.
pub fn parse_csv_reader<R: Read>(reader: R) -> Result<ParsedCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    let idx = ColumnIndex::from_header(&header)?;
    let mut records = Vec::new();
    let mut report = ParseReport::default();
    let mut row = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(e) => {
                report.rows_read += 1;
                let line = e.position().map_or(0, |p| p.line());
                report.rejected.push(RowReject {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        report.rows_read += 1;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != header.len() {
            report.rejected.push(RowReject {
                line,
                reason: format!("expected {} fields, found {}", header.len(), row.len()),
            });
            continue;
        }
        match parse_row(&row, &idx) {
            Ok(rec) => records.push(rec),
            Err(reason) => report.rejected.push(RowReject { line, reason }),
        }
    }
    Ok(ParsedCsv {
        records,
        schema: idx.schema(),
        report,
    })
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<ParsedCsv> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv_reader(file)
}

fn is_complete(r: &RawRecord, schema: &ColumnSchema) -> bool {
    r.pm25.is_some_and(|v| v != -99.0)
        && r.dewp.is_some()
        && r.temp.is_some()
        && r.pres.is_some()
        && r.cbwd.is_some()
        && r.iws.is_some()
        && (!schema.has_snow || r.snow_hours.is_some())
        && (!schema.has_rain || r.rain_hours.is_some())
}

/// Drops rows with a missing or invalid value in any used column, sorts
/// chronologically and keeps the first row of each duplicated timestamp.
pub fn clean(records: Vec<RawRecord>, schema: &ColumnSchema) -> Vec<RawRecord> {
    let mut kept: Vec<RawRecord> = records.into_iter().filter(|r| is_complete(r, schema)).collect();
    kept.sort_by_key(|r| r.timestamp);
    kept.dedup_by_key(|r| r.timestamp);
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "No,year,month,day,hour,pm2.5,DEWP,TEMP,PRES,cbwd,Iws,Is,Ir\n";

    fn parse(body: &str) -> ParsedCsv {
        parse_csv_reader(format!("{HEADER}{body}").as_bytes()).unwrap()
    }

    #[test]
    fn wind_one_hot_order() {
        assert_eq!(encode_wind("NE").unwrap(), [1.0, 0.0, 0.0, 0.0]);
        assert_eq!(encode_wind("NW").unwrap(), [0.0, 1.0, 0.0, 0.0]);
        assert_eq!(encode_wind("SE").unwrap(), [0.0, 0.0, 1.0, 0.0]);
        assert_eq!(encode_wind("cv").unwrap(), [0.0, 0.0, 0.0, 1.0]);
        let err = encode_wind("XX").unwrap_err();
        assert!(matches!(&err, Error::UnknownWindToken(t) if t == "XX"));
        assert!(err.to_string().contains("XX"));
    }

    #[test]
    fn na_pm25_is_missing() {
        let p = parse("1,2010,1,1,0,NA,-21,-11,1021,NW,1.79,0,0\n");
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.records[0].pm25, None);
        assert_eq!(p.records[0].dewp, Some(-21.0));
        assert!(p.report.rejected.is_empty());
    }

    #[test]
    fn sentinel_is_missing() {
        let p = parse("1,2010,1,1,0,-99,-21,-11,1021,NW,1.79,0,0\n");
        assert_eq!(p.records[0].pm25, None);
    }

    #[test]
    fn hour_out_of_range_is_rejected() {
        let p = parse("1,2010,1,1,25,129,-16,-4,1020,SE,1.79,0,0\n2,2010,1,1,1,148,-15,-4,1020,SE,2.68,0,0\n");
        assert_eq!(p.report.rows_read, 2);
        assert_eq!(p.records.len(), 1);
        assert_eq!(p.report.rejected.len(), 1);
        assert_eq!(p.report.rejected[0].line, 2);
    }

    #[test]
    fn wrong_field_count_reports_line() {
        let p = parse("1,2010,1,1,0,129,-16,-4,1020,SE,1.79,0,0\n2,2010,1,1,1,148,-15\n");
        assert_eq!(p.report.rejected.len(), 1);
        assert_eq!(p.report.rejected[0].line, 3);
        assert!(p.report.rejected[0].reason.contains("fields"));
    }

    #[test]
    fn header_only_file() {
        let p = parse("");
        assert!(p.records.is_empty());
        assert_eq!(p.report.rows_read, 0);
        assert!(p.report.rejected.is_empty());
    }

    #[test]
    fn missing_required_column() {
        let err = parse_csv_reader("year,month,day,hour,pm2.5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn optional_columns_and_aliases() {
        let csv = "Year,Month,Day,Hour,PM25,DEWP,Temperature,PRES,cbwd,Iws,weather\n2012,3,4,5,10,1,2,1000,cv,0.5,fog\n";
        let p = parse_csv_reader(csv.as_bytes()).unwrap();
        assert_eq!(
            p.schema,
            ColumnSchema {
                has_snow: false,
                has_rain: false,
                has_weather: true
            }
        );
        assert_eq!(p.records[0].weather.as_deref(), Some("fog"));
        assert_eq!(p.records[0].temp, Some(2.0));
    }

    #[test]
    fn invalid_date_rejected() {
        let p = parse("1,2011,2,29,0,129,-16,-4,1020,SE,1.79,0,0\n");
        assert_eq!(p.report.rejected.len(), 1);
    }

    fn rec(hour: u32, pm25: Option<f64>) -> RawRecord {
        RawRecord {
            timestamp: NaiveDate::from_ymd_opt(2014, 5, 1).unwrap().and_hms_opt(hour, 0, 0).unwrap(),
            pm25,
            dewp: Some(1.0),
            temp: Some(2.0),
            pres: Some(1010.0),
            cbwd: Some(WindDirection::Calm),
            iws: Some(0.9),
            snow_hours: Some(0.0),
            rain_hours: Some(0.0),
            weather: None,
        }
    }

    fn full_schema() -> ColumnSchema {
        ColumnSchema {
            has_snow: true,
            has_rain: true,
            has_weather: false,
        }
    }

    #[test]
    fn clean_drops_sentinel_and_missing() {
        let out = clean(vec![rec(0, Some(-99.0)), rec(1, None), rec(2, Some(5.0))], &full_schema());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].pm25, Some(5.0));

        let mut no_dewp = rec(3, Some(5.0));
        no_dewp.dewp = None;
        assert!(clean(vec![no_dewp], &full_schema()).is_empty());
    }

    #[test]
    fn clean_sorts_and_keeps_valid_rows() {
        let input: Vec<RawRecord> = (0..10).rev().map(|h| rec(h, Some(h as f64 + 1.0))).collect();
        let out = clean(input, &full_schema());
        assert_eq!(out.len(), 10);
        assert!(out.windows(2).all(|w| w[0].timestamp < w[1].timestamp));
    }

    #[test]
    fn clean_collapses_duplicates_keeping_first() {
        let out = clean(vec![rec(4, Some(1.0)), rec(4, Some(2.0))], &full_schema());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].pm25, Some(1.0));
    }

    #[test]
    fn clean_is_idempotent() {
        let input = vec![rec(5, Some(3.0)), rec(1, None), rec(5, Some(9.0)), rec(0, Some(1.0))];
        let once = clean(input, &full_schema());
        assert_eq!(clean(once.clone(), &full_schema()), once);
    }

    #[test]
    fn absent_precipitation_columns_are_not_required() {
        let mut r = rec(0, Some(10.0));
        r.snow_hours = None;
        r.rain_hours = None;
        assert_eq!(clean(vec![r], &ColumnSchema::default()).len(), 1);
    }
}
