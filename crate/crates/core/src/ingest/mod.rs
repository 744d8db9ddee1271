//! External data ingestion: typed records, CSV parsing with row-level
//! rejects, CSV writers, and a synthetic city generator for benchmarks.
//!
//! Parsers are strict about file-level structure (header names and order)
//! and lenient about individual rows: a malformed row is counted and
//! skipped, never silently dropped and never allowed to produce a record
//! that violates a type invariant.

pub mod synth;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::datamodel::{GarageId, LocationId, Timestamp};
use crate::error::{Error, Result};

/// One parking stay: the car entered at `entry_time` and left at
/// `exit_time` (both minute precision, `entry_time <= exit_time`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRecord {
    pub garage: GarageId,
    pub entry_time: Timestamp,
    pub exit_time: Timestamp,
}

/// One traffic count observation at an induction loop, in vehicles per hour
/// (non-negative and finite).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficObservation {
    pub location: LocationId,
    pub time: Timestamp,
    pub flow_veh_per_hour: f64,
}

/// One weather observation: temperature in tenths of a degree Celsius and a
/// binary rain flag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeatherObservation {
    pub time: Timestamp,
    pub temperature_tenth_c: i32,
    pub rain: bool,
}

/// Result of parsing one file: the good rows plus a count of rejected ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseOutcome<T> {
    pub records: Vec<T>,
    pub rejected: usize,
}

fn open_reader(path: &Path, expected_header: &[&str]) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::FileUnreadable {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers = reader.headers()?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected_header {
        return Err(Error::SchemaMismatch {
            path: path.display().to_string(),
            expected: expected_header.join(","),
        });
    }
    Ok(reader)
}

/// Parses `transactions.csv` (`garage_id,entry_time,exit_time`).
///
/// Rows with malformed timestamps, the exit before the entry, or a wrong
/// field count are rejected and counted.
pub fn parse_transactions_csv(path: &Path) -> Result<ParseOutcome<TransactionRecord>> {
    let mut reader = open_reader(path, &["garage_id", "entry_time", "exit_time"])?;
    let mut records = Vec::new();
    let mut rejected = 0usize;
    for row in reader.records() {
        let row = row?;
        let parsed = (|| -> Option<TransactionRecord> {
            if row.len() != 3 {
                return None;
            }
            let entry_time = Timestamp::from_iso8601(row.get(1)?).ok()?;
            let exit_time = Timestamp::from_iso8601(row.get(2)?).ok()?;
            if exit_time < entry_time {
                return None;
            }
            Some(TransactionRecord {
                garage: GarageId::from(row.get(0)?),
                entry_time,
                exit_time,
            })
        })();
        match parsed {
            Some(r) => records.push(r),
            None => {
                rejected += 1;
                log::warn!("rejected transaction row {:?}", row);
            }
        }
    }
    Ok(ParseOutcome { records, rejected })
}

/// Parses `traffic.csv` (`location_id,time,flow_veh_per_hour`).
///
/// Rows with malformed timestamps or negative/non-finite flows are rejected
/// and counted.
pub fn parse_traffic_csv(path: &Path) -> Result<ParseOutcome<TrafficObservation>> {
    let mut reader = open_reader(path, &["location_id", "time", "flow_veh_per_hour"])?;
    let mut records = Vec::new();
    let mut rejected = 0usize;
    for row in reader.records() {
        let row = row?;
        let parsed = (|| -> Option<TrafficObservation> {
            if row.len() != 3 {
                return None;
            }
            let time = Timestamp::from_iso8601(row.get(1)?).ok()?;
            let flow: f64 = row.get(2)?.parse().ok()?;
            if !flow.is_finite() || flow < 0.0 {
                return None;
            }
            Some(TrafficObservation {
                location: LocationId::from(row.get(0)?),
                time,
                flow_veh_per_hour: flow,
            })
        })();
        match parsed {
            Some(r) => records.push(r),
            None => {
                rejected += 1;
                log::warn!("rejected traffic row {:?}", row);
            }
        }
    }
    Ok(ParseOutcome { records, rejected })
}

/// Parses `weather.csv` (`time,temperature_tenth_celsius,rain_binary`).
///
/// The rain column must be literally `0` or `1`; anything else rejects the
/// row.
pub fn parse_weather_csv(path: &Path) -> Result<ParseOutcome<WeatherObservation>> {
    let mut reader = open_reader(path, &["time", "temperature_tenth_celsius", "rain_binary"])?;
    let mut records = Vec::new();
    let mut rejected = 0usize;
    for row in reader.records() {
        let row = row?;
        let parsed = (|| -> Option<WeatherObservation> {
            if row.len() != 3 {
                return None;
            }
            let time = Timestamp::from_iso8601(row.get(0)?).ok()?;
            let temperature_tenth_c: i32 = row.get(1)?.parse().ok()?;
            let rain = match row.get(2)? {
                "0" => false,
                "1" => true,
                _ => return None,
            };
            Some(WeatherObservation {
                time,
                temperature_tenth_c,
                rain,
            })
        })();
        match parsed {
            Some(r) => records.push(r),
            None => {
                rejected += 1;
                log::warn!("rejected weather row {:?}", row);
            }
        }
    }
    Ok(ParseOutcome { records, rejected })
}

/// Parses `holidays.csv` (`date,is_holiday`) into a date -> flag map.
///
/// Dates must be `YYYY-MM-DD`; the flag must be `0` or `1`. Malformed rows
/// are rejected and counted in the second tuple element.
pub fn parse_holidays_csv(path: &Path) -> Result<(BTreeMap<String, bool>, usize)> {
    let mut reader = open_reader(path, &["date", "is_holiday"])?;
    let mut map = BTreeMap::new();
    let mut rejected = 0usize;
    for row in reader.records() {
        let row = row?;
        let parsed = (|| -> Option<(String, bool)> {
            if row.len() != 2 {
                return None;
            }
            let date = row.get(0)?;
            chrono::NaiveDate::parse_from_str(date, "%Y-%m-%d").ok()?;
            let flag = match row.get(1)? {
                "0" => false,
                "1" => true,
                _ => return None,
            };
            Some((date.to_string(), flag))
        })();
        match parsed {
            Some((date, flag)) => {
                map.insert(date, flag);
            }
            None => {
                rejected += 1;
                log::warn!("rejected holiday row {:?}", row);
            }
        }
    }
    Ok((map, rejected))
}

fn create_file(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Writes transactions in the `transactions.csv` schema.
pub fn write_transactions_csv(path: &Path, records: &[TransactionRecord]) -> Result<()> {
    let mut out = create_file(path)?;
    writeln!(out, "garage_id,entry_time,exit_time")?;
    for r in records {
        writeln!(
            out,
            "{},{},{}",
            r.garage,
            r.entry_time.to_iso8601(),
            r.exit_time.to_iso8601()
        )?;
    }
    Ok(())
}

/// Writes traffic observations in the `traffic.csv` schema.
pub fn write_traffic_csv(path: &Path, records: &[TrafficObservation]) -> Result<()> {
    let mut out = create_file(path)?;
    writeln!(out, "location_id,time,flow_veh_per_hour")?;
    for r in records {
        writeln!(
            out,
            "{},{},{}",
            r.location,
            r.time.to_iso8601(),
            r.flow_veh_per_hour
        )?;
    }
    Ok(())
}

/// Writes weather observations in the `weather.csv` schema.
pub fn write_weather_csv(path: &Path, records: &[WeatherObservation]) -> Result<()> {
    let mut out = create_file(path)?;
    writeln!(out, "time,temperature_tenth_celsius,rain_binary")?;
    for r in records {
        writeln!(
            out,
            "{},{},{}",
            r.time.to_iso8601(),
            r.temperature_tenth_c,
            u8::from(r.rain)
        )?;
    }
    Ok(())
}

/// Writes a holiday calendar in the `holidays.csv` schema.
pub fn write_holidays_csv(path: &Path, holidays: &BTreeMap<String, bool>) -> Result<()> {
    let mut out = create_file(path)?;
    writeln!(out, "date,is_holiday")?;
    for (date, flag) in holidays {
        writeln!(out, "{},{}", date, u8::from(*flag))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn transactions_round_trip() {
        let records = vec![
            TransactionRecord {
                garage: GarageId::from("central"),
                entry_time: Timestamp::from_iso8601("2024-01-01T08:00:00Z").unwrap(),
                exit_time: Timestamp::from_iso8601("2024-01-01T09:30:00Z").unwrap(),
            },
            TransactionRecord {
                garage: GarageId::from("central"),
                entry_time: Timestamp::from_iso8601("2024-01-01T08:05:00Z").unwrap(),
                exit_time: Timestamp::from_iso8601("2024-01-01T08:05:00Z").unwrap(),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transactions.csv");
        write_transactions_csv(&path, &records).unwrap();
        let outcome = parse_transactions_csv(&path).unwrap();
        assert_eq!(outcome.records, records);
        assert_eq!(outcome.rejected, 0);
    }

    #[test]
    fn malformed_transaction_rows_are_counted() {
        let f = write_tmp(
            "garage_id,entry_time,exit_time\n\
             g,2024-01-01T08:00:00Z,2024-01-01T09:00:00Z\n\
             g,not-a-time,2024-01-01T09:00:00Z\n\
             g,2024-01-01T09:00:00Z,2024-01-01T08:00:00Z\n\
             g,2024-01-01T08:00:00Z\n",
        );
        let outcome = parse_transactions_csv(f.path()).unwrap();
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.rejected, 3);
    }

    #[test]
    fn header_mismatch_is_a_schema_error() {
        let f = write_tmp("garage,entry,exit\na,b,c\n");
        assert!(matches!(
            parse_transactions_csv(f.path()),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn missing_file_is_unreadable() {
        let err = parse_traffic_csv(Path::new("/nonexistent/traffic.csv")).unwrap_err();
        assert!(matches!(err, Error::FileUnreadable { .. }));
    }

    #[test]
    fn traffic_rejects_negative_flow() {
        let f = write_tmp(
            "location_id,time,flow_veh_per_hour\n\
             loop-1,2024-01-01T00:00:00Z,240\n\
             loop-1,2024-01-01T00:01:00Z,-5\n\
             loop-1,2024-01-01T00:02:00Z,NaN\n",
        );
        let outcome = parse_traffic_csv(f.path()).unwrap();
        assert_eq!(outcome.records.len(), 1);
        assert_eq!(outcome.rejected, 2);
        assert_eq!(outcome.records[0].flow_veh_per_hour, 240.0);
    }

    #[test]
    fn weather_round_trip_and_rain_validation() {
        let records = vec![
            WeatherObservation {
                time: Timestamp::from_iso8601("2024-01-01T00:00:00Z").unwrap(),
                temperature_tenth_c: -25,
                rain: true,
            },
            WeatherObservation {
                time: Timestamp::from_iso8601("2024-01-01T00:10:00Z").unwrap(),
                temperature_tenth_c: 150,
                rain: false,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weather.csv");
        write_weather_csv(&path, &records).unwrap();
        let outcome = parse_weather_csv(&path).unwrap();
        assert_eq!(outcome.records, records);

        let f = write_tmp(
            "time,temperature_tenth_celsius,rain_binary\n\
             2024-01-01T00:00:00Z,150,2\n",
        );
        let outcome = parse_weather_csv(f.path()).unwrap();
        assert_eq!(outcome.records.len(), 0);
        assert_eq!(outcome.rejected, 1);
    }

    #[test]
    fn holidays_round_trip() {
        let mut holidays = BTreeMap::new();
        holidays.insert("2024-01-01".to_string(), true);
        holidays.insert("2024-01-02".to_string(), false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("holidays.csv");
        write_holidays_csv(&path, &holidays).unwrap();
        let (parsed, rejected) = parse_holidays_csv(&path).unwrap();
        assert_eq!(parsed, holidays);
        assert_eq!(rejected, 0);

        let f = write_tmp("date,is_holiday\n2024-13-45,1\n2024-02-01,yes\n");
        let (parsed, rejected) = parse_holidays_csv(f.path()).unwrap();
        assert!(parsed.is_empty());
        assert_eq!(rejected, 2);
    }
}
