use super::lsq::{least_squares, LsqOptions};
use super::models::{CurveModel, LifetimeCurve};
use super::{poisson_weights, FitResult};
use crate::correlator::{Histogram, HistogramKind};
use crate::error::{Error, Result};

/// Fits `amplitude·(exp ⊗ Gaussian)(t − t₀) + baseline` to a TCSPC histogram,
/// integrated over each bin, with the IRF width held fixed. With a period,
/// decays and jitter wrap around the window.
///
/// Initial guess: baseline from the quietest quarter of bins, `t₀` at the
/// peak, `τ` from the decay to 1/e of the peak.
pub fn fit_lifetime(h: &Histogram, irf_sigma_ns: f64, period_s: Option<f64>) -> Result<FitResult> {
    if h.kind != HistogramKind::Tcspc {
        return Err(Error::Precondition(format!("lifetime fit needs a tcspc histogram, got {}", h.kind)));
    }
    if !(irf_sigma_ns.is_finite() && irf_sigma_ns >= 0.0) {
        return Err(Error::Domain(format!("IRF sigma must be >= 0 ns, got {irf_sigma_ns}")));
    }
    let y = h.values();
    if y.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Precondition("no photons binned".into()));
    }
    if y.len() < 5 {
        return Err(Error::Precondition("lifetime fit needs at least 5 bins".into()));
    }
    let bin_ns = h.bin_width * 1e9;
    let edges: Vec<f64> = (0..=y.len()).map(|k| h.bin_left(k) * 1e9).collect();

    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let quiet = &sorted[..sorted.len().div_ceil(4)];
    let base0 = quiet.iter().sum::<f64>() / quiet.len() as f64;
    let (peak, &ymax) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
    let above = ymax - base0;
    let fall = (peak..y.len())
        .chain(0..peak)
        .find(|&k| y[k] - base0 < above / std::f64::consts::E)
        .map_or(y.len() / 4, |k| (k + y.len() - peak) % y.len());
    let tau0 = (fall as f64 * bin_ns).max(bin_ns);
    let amp0 = y.iter().map(|v| (v - base0).max(0.0)).sum::<f64>().max(1.0);
    let t0 = edges[peak] - 0.5 * irf_sigma_ns.min(tau0);

    let curve = LifetimeCurve::new(edges, irf_sigma_ns, period_s.map(|p| p * 1e9));
    let lo = curve.params()[2].bounds;
    let p0 = [amp0, tau0, lo.clamp(t0), base0.max(0.0)];
    let sol = least_squares(&curve, &p0, &y, &poisson_weights(&y), &LsqOptions::default())?;
    let mut fit = FitResult::from_solution(&curve, &sol);
    fit.push_derived("sigma_irf", "ns", irf_sigma_ns, 0.0);
    let span = h.len() as f64 * bin_ns;
    if span < 5.0 * sol.params[1] {
        fit.warnings
            .push(format!("histogram spans {span:.3} ns, less than 5 fitted lifetimes"));
    }
    Ok(fit)
}
