use super::lsq::{least_squares, LsqOptions};
use super::models::SaturationCurve;
use super::FitResult;
use crate::error::{Error, Result};

/// Fits `C(P) = C∞·P/(P + P_sat)` to background-subtracted rates.
///
/// Initial guess from the Lineweaver-Burk line `1/C = 1/C∞ + (P_sat/C∞)/P`;
/// when that line is unusable (noise, negative rates), `C∞` is 1.5× the
/// largest rate and `P_sat` the median power.
pub fn fit_saturation(powers_uw: &[f64], rates_cps: &[f64]) -> Result<FitResult> {
    if powers_uw.len() != rates_cps.len() {
        return Err(Error::Precondition(format!(
            "{} powers but {} rates",
            powers_uw.len(),
            rates_cps.len()
        )));
    }
    if let Some(p) = powers_uw.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
        return Err(Error::Domain(format!("power must be >= 0 uW, got {p}")));
    }
    let mut distinct = powers_uw.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::RankDeficient(format!(
            "saturation fit needs at least 3 distinct powers, got {}",
            distinct.len()
        )));
    }

    let (c0, p0) = lineweaver_burk(powers_uw, rates_cps).unwrap_or_else(|| {
        let cmax = rates_cps.iter().copied().fold(0.0, f64::max).max(1.0);
        (1.5 * cmax, distinct[distinct.len() / 2].max(1e-6))
    });
    let curve = SaturationCurve::new(powers_uw.to_vec());
    let sol = least_squares(&curve, &[c0, p0], rates_cps, &vec![1.0; rates_cps.len()], &LsqOptions::default())?;
    let mut fit = FitResult::from_solution(&curve, &sol);
    let pmax = distinct[distinct.len() - 1];
    if sol.params[1] > 10.0 * pmax {
        fit.warnings.push(format!(
            "P_sat {:.3e} uW is far beyond the largest power {pmax} uW; C_inf is an extrapolation",
            sol.params[1]
        ));
    }
    Ok(fit)
}

fn lineweaver_burk(powers: &[f64], rates: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = powers
        .iter()
        .zip(rates)
        .filter(|(p, c)| **p > 0.0 && **c > 0.0)
        .map(|(p, c)| (1.0 / p, 1.0 / c))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    (slope > 0.0 && intercept > 0.0 && slope.is_finite()).then(|| (1.0 / intercept, slope / intercept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::SaturationModel;

    #[test]
    fn exact_curve_recovered() {
        let truth = SaturationModel {
            c_inf_cps: 26e3,
            p_sat_uw: 249.0,
        };
        let powers = [25.0, 60.0, 120.0, 250.0, 400.0, 600.0, 800.0, 1000.0];
        let rates: Vec<f64> = powers.iter().map(|&p| truth.eval(p)).collect();
        let fit = fit_saturation(&powers, &rates).unwrap();
        let m = fit.saturation_model().unwrap();
        assert!((m.c_inf_cps / 26e3 - 1.0).abs() < 1e-9, "{fit}");
        assert!((m.p_sat_uw / 249.0 - 1.0).abs() < 1e-9);
        assert!((m.eval(m.p_sat_uw) - m.c_inf_cps / 2.0).abs() < 1e-9);
    }

    #[test]
    fn equal_powers_are_rank_deficient() {
        let err = fit_saturation(&[100.0; 5], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)));
    }
}
