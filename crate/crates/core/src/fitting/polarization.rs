use super::lsq::{least_squares, LsqOptions};
use super::models::PolarizationCurve;
use super::FitResult;
use crate::error::{Error, Result};

/// Fits `I(θ) = I₀·(1 − sin²φ·sin²(θ − θ₀))`. φ is reported in [0°, 90°] and
/// θ₀ in [0°, 180°).
///
/// Initial guess from the exact linear form
/// `I = c₀ + c₁·cos2θ + c₂·sin2θ`: `I₀ = c₀ + R`, `sin²φ = 2R/I₀`,
/// `θ₀ = ½·atan2(c₂, c₁)` with `R = √(c₁² + c₂²)`.
///
/// Derived quantities: `contrast` (`sin²φ`), `min_max_ratio` of the model and
/// `data_min_max_ratio`, the mean intensity at the points nearest the fitted
/// minimum over the mean at the points nearest the fitted maximum.
pub fn fit_polarization(angles_deg: &[f64], intensities: &[f64]) -> Result<FitResult> {
    if angles_deg.len() != intensities.len() {
        return Err(Error::Precondition(format!(
            "{} angles but {} intensities",
            angles_deg.len(),
            intensities.len()
        )));
    }
    if angles_deg.len() < 4 {
        return Err(Error::Precondition(format!(
            "polarization fit needs at least 4 angles, got {}",
            angles_deg.len()
        )));
    }
    let lo = angles_deg.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = angles_deg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 90.0 {
        return Err(Error::Precondition(format!(
            "polarization angles must span at least 90 deg, got {:.1}",
            hi - lo
        )));
    }

    let (i0, phi, theta0) = linear_guess(angles_deg, intensities)?;
    let curve = PolarizationCurve::new(angles_deg.to_vec());
    let sol = least_squares(
        &curve,
        &[i0, phi, theta0],
        intensities,
        &vec![1.0; intensities.len()],
        &LsqOptions::default(),
    )?;
    let mut fit = FitResult::from_solution(&curve, &sol);
    fit.params[2].value = fit.params[2].value.rem_euclid(180.0);
    let m = fit.polarization_model()?;

    let s = m.phi_deg.to_radians().sin().powi(2);
    let s_err = (2.0 * m.phi_deg.to_radians()).sin().abs() * fit.params[1].uncertainty.to_radians();
    fit.push_derived("contrast", "", s, s_err);
    fit.push_derived("min_max_ratio", "", m.min_max_ratio(), s_err);
    if let Some(r) = data_ratio(angles_deg, intensities, m.theta0_deg) {
        fit.push_derived("data_min_max_ratio", "", r, f64::NAN);
    }
    if s < 0.02 || !(s > 3.0 * s_err) {
        fit.warnings.push(format!(
            "low contrast: sin^2(phi) = {s:.4} +/- {s_err:.2e}; phi and theta0 are poorly determined"
        ));
    }
    Ok(fit)
}

fn linear_guess(angles: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    use nalgebra::{DMatrix, DVector};
    let a = DMatrix::from_fn(angles.len(), 3, |i, j| {
        let t = 2.0 * angles[i].to_radians();
        [1.0, t.cos(), t.sin()][j]
    });
    let c = a
        .svd(true, true)
        .solve(&DVector::from_column_slice(y), 1e-12)
        .map_err(|e| Error::numerical(e.to_string()))?;
    let r = c[1].hypot(c[2]);
    let i0 = (c[0] + r).max(f64::MIN_POSITIVE);
    let s = (2.0 * r / i0).clamp(0.0, 1.0);
    let phi = s.sqrt().asin().to_degrees().clamp(1.0, 89.0);
    Ok((i0, phi, 0.5 * c[2].atan2(c[1]).to_degrees()))
}

/// Angular distance modulo 180°.
fn axis_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

fn data_ratio(angles: &[f64], y: &[f64], theta0: f64) -> Option<f64> {
    let near = |target: f64| -> Option<f64> {
        let best = angles
            .iter()
            .map(|&a| axis_distance(a, target))
            .fold(f64::INFINITY, f64::min);
        let picked: Vec<f64> = angles
            .iter()
            .zip(y)
            .filter(|(&a, _)| axis_distance(a, target) <= best + 1e-9)
            .map(|(_, &v)| v)
            .collect();
        (!picked.is_empty()).then(|| picked.iter().sum::<f64>() / picked.len() as f64)
    };
    let max = near(theta0)?;
    let min = near(theta0 + 90.0)?;
    (max > 0.0).then(|| min / max)
}
