//! Two-column point CSVs for sweeps and spectra, with optional `# key=value`
//! metadata lines.

use std::fmt::Write as _;
use std::path::Path;

use super::histogram_csv::split_metadata;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointColumns {
    /// `power_uw,rate_cps`
    Saturation,
    /// `angle_deg,intensity_cps`
    Polarization,
    /// `wavelength_nm,intensity`
    Spectrum,
}

impl PointColumns {
    pub fn names(self) -> [&'static str; 2] {
        match self {
            PointColumns::Saturation => ["power_uw", "rate_cps"],
            PointColumns::Polarization => ["angle_deg", "intensity_cps"],
            PointColumns::Spectrum => ["wavelength_nm", "intensity"],
        }
    }
}

pub fn render_points(cols: PointColumns, x: &[f64], y: &[f64], meta: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    let [a, b] = cols.names();
    let _ = writeln!(s, "{a},{b}");
    for (xi, yi) in x.iter().zip(y) {
        let _ = writeln!(s, "{xi:e},{yi:.16e}");
    }
    s
}

pub fn write_points(path: &Path, cols: PointColumns, x: &[f64], y: &[f64], meta: &[(&str, String)]) -> Result<()> {
    super::write_file(path, render_points(cols, x, y, meta).as_bytes())
}

/// Reads the two named columns; other columns are ignored.
pub fn parse_points(text: &str, cols: PointColumns) -> Result<(Vec<f64>, Vec<f64>)> {
    let (_, body) = split_metadata(text)?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Format(e.to_string()))?.clone();
    let names = cols.names();
    let missing: Vec<&str> = names.iter().copied().filter(|n| !headers.iter().any(|h| h == *n)).collect();
    if !missing.is_empty() {
        return Err(Error::Format(format!(
            "missing column(s) {} (found {})",
            missing.join(", "),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let idx: Vec<usize> = names
        .iter()
        .map(|n| headers.iter().position(|h| h == *n).expect("checked"))
        .collect();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Format(format!("row {}: {e}", i + 1)))?;
        let get = |c: usize| -> Result<f64> {
            let v = rec.get(idx[c]).unwrap_or("");
            v.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Format(format!("row {}: {} {v:?} is not a number", i + 1, names[c])))
        };
        x.push(get(0)?);
        y.push(get(1)?);
    }
    Ok((x, y))
}

pub fn read_points(path: &Path, cols: PointColumns) -> Result<(Vec<f64>, Vec<f64>)> {
    parse_points(&super::read_text(path)?, cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let x = [25.0, 50.0, 100.0];
        let y = [2300.125, 4100.0, 1.0 / 3.0];
        let text = render_points(PointColumns::Saturation, &x, &y, &[("dark_cps", "0".into())]);
        let (a, b) = parse_points(&text, PointColumns::Saturation).unwrap();
        assert_eq!(a, x);
        assert_eq!(b, y);
    }

    #[test]
    fn missing_column_is_named() {
        let err = parse_points("power_uw,counts\n1,2\n", PointColumns::Saturation).unwrap_err();
        assert!(err.to_string().contains("rate_cps"));
    }

    #[test]
    fn malformed_value() {
        assert!(matches!(
            parse_points("angle_deg,intensity_cps\n0,abc\n", PointColumns::Polarization),
            Err(Error::Format(_))
        ));
    }
}
