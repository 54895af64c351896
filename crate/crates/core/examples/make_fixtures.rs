//! Regenerates the CSV fixtures under `tests/data/`.
//!
//! cargo run --release --example make_fixtures

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use aeroforecast::data::ColumnSchema;
use aeroforecast::synthetic::{beijing_like_records, sine_records, write_raw_csv, BeijingLikeOptions};

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    std::fs::create_dir_all(&dir)?;

    let station = ColumnSchema {
        has_snow: true,
        has_rain: true,
        has_weather: false,
    };
    let records = beijing_like_records(&BeijingLikeOptions::default());
    write_raw_csv(&records, &station, BufWriter::new(File::create(dir.join("beijing_like_6mo.csv"))?))?;

    let sine = sine_records(2000, 7);
    write_raw_csv(&sine, &ColumnSchema::default(), BufWriter::new(File::create(dir.join("sine_2000h.csv"))?))?;
    Ok(())
}
