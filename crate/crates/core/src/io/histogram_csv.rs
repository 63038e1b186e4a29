//! Histogram CSV: `#`-prefixed metadata, then `bin_left,count` rows.
//!
//! ```text
//! # kind=coincidence
//! # bin_width_s=7.33e-11
//! # T_s=60
//! # N1_cps=7102.5
//! # N2_cps=7088.1
//! bin_left,count
//! -1.99376e-8,9
//! ```
//!
//! Raw counts are written as integers and normalized values with 17
//! significant digits, so both read back exactly. Spectrum histograms use
//! the same keys with the axis in nanometres.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::correlator::{Counts, Histogram, HistogramKind};
use crate::error::{Error, Result};

const REQUIRED: [&str; 5] = ["kind", "bin_width_s", "T_s", "N1_cps", "N2_cps"];

pub fn render_histogram_csv(h: &Histogram) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# kind={}", h.kind);
    let _ = writeln!(s, "# bin_width_s={:e}", h.bin_width);
    let _ = writeln!(s, "# T_s={:e}", h.duration_s);
    let _ = writeln!(s, "# N1_cps={:e}", h.n1_cps);
    let _ = writeln!(s, "# N2_cps={:e}", h.n2_cps);
    s.push_str("bin_left,count\n");
    match &h.counts {
        Counts::Integer(c) => {
            for (k, v) in c.iter().enumerate() {
                let _ = writeln!(s, "{:e},{v}", h.bin_left(k));
            }
        }
        Counts::Real(c) => {
            for (k, v) in c.iter().enumerate() {
                let _ = writeln!(s, "{:e},{v:.16e}", h.bin_left(k));
            }
        }
    }
    s
}

pub fn write_histogram_csv(h: &Histogram, path: &Path) -> Result<()> {
    super::write_file(path, render_histogram_csv(h).as_bytes())
}

/// Metadata `key=value` pairs from the leading `#` lines, and the remainder.
pub(crate) fn split_metadata(text: &str) -> Result<(BTreeMap<String, String>, String)> {
    let mut meta = BTreeMap::new();
    let mut body = String::new();
    for (i, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix('#') {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("line {}: metadata line without '=': {line:?}", i + 1)))?;
            meta.insert(k.trim().to_string(), v.trim().to_string());
        } else if !line.trim().is_empty() {
            body.push_str(line);
            body.push('\n');
        }
    }
    Ok((meta, body))
}

fn real(meta: &BTreeMap<String, String>, key: &str) -> Result<f64> {
    let v = &meta[key];
    v.parse::<f64>()
        .map_err(|_| Error::Format(format!("metadata {key}={v:?} is not a number")))
}

pub fn parse_histogram_csv(text: &str) -> Result<Histogram> {
    let (meta, body) = split_metadata(text)?;
    let missing: Vec<&str> = REQUIRED.iter().copied().filter(|k| !meta.contains_key(*k)).collect();
    if !missing.is_empty() {
        return Err(Error::Format(format!("missing metadata key(s): {}", missing.join(", "))));
    }
    let kind: HistogramKind = meta["kind"].parse()?;
    let bin_width = real(&meta, "bin_width_s")?;
    if !(bin_width.is_finite() && bin_width > 0.0) {
        return Err(Error::Format(format!("bin_width_s must be > 0, got {bin_width}")));
    }

    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["bin_left", "count"] {
        return Err(Error::Format(format!(
            "expected columns bin_left,count, found {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut lefts = Vec::new();
    let mut raw = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?;
        let left: f64 = rec[0]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bin_left {:?} is not a number", i + 1, &rec[0])))?;
        lefts.push(left);
        raw.push(rec[1].to_string());
    }
    let is_real = raw.iter().any(|v| v.contains(['e', 'E', '.']) || v.starts_with('-'));
    let counts = if is_real {
        Counts::Real(
            raw.iter()
                .enumerate()
                .map(|(i, v)| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Format(format!("row {}: count {v:?} is not a number", i + 1)))
                })
                .collect::<Result<_>>()?,
        )
    } else {
        Counts::Integer(
            raw.iter()
                .enumerate()
                .map(|(i, v)| {
                    v.parse::<u64>()
                        .map_err(|_| Error::Format(format!("row {}: count {v:?} is not a count", i + 1)))
                })
                .collect::<Result<_>>()?,
        )
    };
    let origin = lefts.first().copied().unwrap_or(0.0);
    let h = Histogram::new(kind, bin_width, origin, counts).with_acquisition(
        real(&meta, "T_s")?,
        real(&meta, "N1_cps")?,
        real(&meta, "N2_cps")?,
    );
    for (k, &left) in lefts.iter().enumerate() {
        let expect = h.bin_left(k);
        if (left - expect).abs() > 1e-6 * bin_width {
            return Err(Error::Format(format!(
                "row {}: bin_left {left:e} does not match the {bin_width:e} bin grid (expected {expect:e})",
                k + 1
            )));
        }
    }
    Ok(h)
}

pub fn read_histogram_csv(path: &Path) -> Result<Histogram> {
    parse_histogram_csv(&super::read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_round_trip() {
        let h = Histogram::new(HistogramKind::Coincidence, 7.33e-11, -272.0 * 7.33e-11, Counts::Integer(vec![1, 0, 99]))
            .with_acquisition(60.0, 7100.5, 7088.25);
        assert_eq!(parse_histogram_csv(&render_histogram_csv(&h)).unwrap(), h);
    }

    #[test]
    fn real_round_trip_is_exact() {
        let h = Histogram::new(HistogramKind::Coincidence, 1e-10, -1e-9, Counts::Real(vec![0.1 + 0.2, 1.0 / 3.0, 0.0]));
        assert_eq!(parse_histogram_csv(&render_histogram_csv(&h)).unwrap(), h);
    }

    #[test]
    fn empty_histogram() {
        let h = Histogram::new(HistogramKind::Tcspc, 1e-11, 0.0, Counts::Integer(vec![]));
        let text = render_histogram_csv(&h);
        assert!(text.ends_with("bin_left,count\n"));
        assert_eq!(parse_histogram_csv(&text).unwrap(), h);
    }

    #[test]
    fn missing_metadata_named() {
        let err = parse_histogram_csv("# kind=irf\n# T_s=1\nbin_left,count\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bin_width_s") && msg.contains("N1_cps"), "{msg}");
    }
}
