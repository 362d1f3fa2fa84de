//! CSV and JSON input/output with atomic file replacement.
//!
//! Floats are written with 17 significant digits so that a value read back
//! is bit-identical to the one written.

use std::fs;
use std::io::Write;
use std::path::Path;

use chrono::DateTime;
use serde::Serialize;

use crate::atypicality::DetectionResult;
use crate::error::{Error, Result};
use crate::pipeline::{DayStats, KProfile, TimeSeries};
use crate::sparse::SelectionCurve;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_timestamp(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 9.0e15 {
        format!("{}", t as i64)
    } else {
        fmt_f64(t)
    }
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Pretty JSON with a trailing newline, written atomically.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_rows(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    write_atomic(path, &bytes)
}

/// Seconds since the epoch from integer or decimal seconds, or RFC3339.
pub fn parse_timestamp(field: &str) -> std::result::Result<f64, String> {
    if let Ok(n) = field.parse::<i64>() {
        return Ok(n as f64);
    }
    if let Ok(v) = field.parse::<f64>() {
        if v.is_finite() {
            return Ok(v);
        }
    }
    DateTime::parse_from_rfc3339(field)
        .map(|dt| dt.timestamp() as f64 + f64::from(dt.timestamp_subsec_nanos()) * 1e-9)
        .map_err(|_| format!("bad timestamp '{field}'"))
}

fn parse_value(field: &str) -> std::result::Result<f64, String> {
    if field.is_empty() {
        // missing readings become gaps for the outlier and binning stages
        return Ok(f64::NAN);
    }
    field
        .parse::<f64>()
        .map_err(|_| format!("bad value '{field}'"))
}

/// Parses a `timestamp,value` CSV. Timestamps are seconds (integer or
/// decimal) or RFC3339; empty values are read as missing.
pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let names: Vec<String> = header.iter().map(|h| h.to_ascii_lowercase()).collect();
    if names != ["timestamp", "value"] {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected header 'timestamp,value', found '{}'",
                names.join(",")
            ),
        });
    }
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        if record.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", record.len())));
        }
        let t = parse_timestamp(&record[0]).map_err(bad)?;
        let v = parse_value(&record[1]).map_err(bad)?;
        if let Some(&prev) = timestamps.last() {
            if t <= prev {
                return Err(bad(format!("timestamp {t} does not increase")));
            }
        }
        timestamps.push(t);
        values.push(v);
    }
    if timestamps.is_empty() {
        return Err(Error::EmptySeries);
    }
    TimeSeries::new(timestamps, values)
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    parse_series(&fs::read_to_string(path)?)
}

pub fn write_series(path: &Path, s: &TimeSeries) -> Result<()> {
    let rows = s
        .timestamps()
        .iter()
        .zip(s.values())
        .map(|(&t, &v)| vec![fmt_timestamp(t), fmt_f64(v)]);
    write_rows(path, &["timestamp", "value"], rows)
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `origin,k,k_fraction,codelength_bits`; degenerate windows leave the
/// last three fields empty.
pub fn write_kprofile(path: &Path, p: &KProfile) -> Result<()> {
    let rows = p.windows.iter().map(|w| {
        vec![
            w.origin.to_string(),
            opt(w.k),
            opt(w.k.map(|k| fmt_f64(k as f64 / p.l as f64))),
            opt(w.codelength_bits.map(fmt_f64)),
        ]
    });
    write_rows(
        path,
        &["origin", "k", "k_fraction", "codelength_bits"],
        rows,
    )
}

pub fn write_daystats(path: &Path, stats: &[DayStats]) -> Result<()> {
    let rows = stats.iter().map(|d| {
        vec![
            d.day.to_string(),
            fmt_f64(d.mean),
            fmt_f64(d.std),
            d.n.to_string(),
        ]
    });
    write_rows(path, &["day", "mean", "std", "n"], rows)
}

/// `basis,total_bits`, ascending by bits.
pub fn write_basis_report(path: &Path, ranked: &[(String, f64)]) -> Result<()> {
    let mut sorted = ranked.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let rows = sorted
        .into_iter()
        .map(|(name, bits)| vec![name, fmt_f64(bits)]);
    write_rows(path, &["basis", "total_bits"], rows)
}

pub fn write_detections(path: &Path, results: &[DetectionResult]) -> Result<()> {
    let rows = results.iter().map(|r| {
        vec![
            r.origin.to_string(),
            fmt_f64(r.typical_bits),
            fmt_f64(r.atypical_bits),
            fmt_f64(r.score),
            r.flagged.to_string(),
            r.k_atypical.to_string(),
        ]
    });
    write_rows(
        path,
        &[
            "origin",
            "L_t",
            "L_a_prime",
            "score",
            "flagged",
            "k_atypical",
        ],
        rows,
    )
}

/// Per-k curve with an `is_argmin` column marking the optimum.
pub fn write_curve(path: &Path, curve: &SelectionCurve) -> Result<()> {
    let best = curve.argmin().map(|p| p.k);
    let rows = curve.points.iter().map(|p| {
        vec![
            p.k.to_string(),
            fmt_f64(p.complexity_bits),
            fmt_f64(p.error_bits),
            fmt_f64(p.total_bits),
            u8::from(Some(p.k) == best).to_string(),
        ]
    });
    write_rows(
        path,
        &[
            "k",
            "complexity_bits",
            "error_bits",
            "total_bits",
            "is_argmin",
        ],
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 36.123456789012345, f64::MAX] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn parses_integer_and_rfc3339_timestamps() {
        let s = parse_series("timestamp,value\n0,36.5\n10,36.6\n").unwrap();
        assert_eq!(s.timestamps(), &[0.0, 10.0]);
        assert_eq!(s.values(), &[36.5, 36.6]);

        let s = parse_series(
            "timestamp,value\n1970-01-01T00:00:00Z,1\n1970-01-01T00:00:10.5+00:00,2\n",
        )
        .unwrap();
        assert_eq!(s.timestamps(), &[0.0, 10.5]);

        let s = parse_series("timestamp,value\n0,\n10,1\n").unwrap();
        assert!(s.values()[0].is_nan());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = parse_series("timestamp,value\n0,1\n10,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_series("timestamp,value\n0,1\n0,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_series("time,temp\n0,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = parse_series("timestamp,value\n0,1,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(
            parse_series("timestamp,value\n"),
            Err(Error::EmptySeries)
        ));
    }

    #[test]
    fn series_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("sparse-mdl-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("series.csv");
        let s = TimeSeries::new(vec![0.0, 10.0, 20.5], vec![36.1, 1.0 / 3.0, -0.0]).unwrap();
        write_series(&path, &s).unwrap();
        let back = read_series(&path).unwrap();
        assert_eq!(back, s);
        let names: Vec<_> = fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1, "temporary file left behind: {names:?}");
        fs::remove_dir_all(&dir).unwrap();
    }
}
