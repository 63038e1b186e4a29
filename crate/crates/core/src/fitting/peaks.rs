use super::lsq::{least_squares, LsqOptions};
use super::models::{uniform_sigma, CurveModel, GaussianCurve, SpectrumCurve};
use super::{axis_scale, poisson_weights, FitResult};
use crate::correlator::{Counts, Histogram, HistogramKind};
use crate::error::{Error, Result};

/// Fits a bin-integrated Gaussian plus baseline, e.g. to characterize an IRF.
/// Positions and widths are reported in ns for time histograms and nm for
/// spectra. σ is bounded below by the width of a uniform distribution over
/// one bin (`w/√12`); a fit that ends on that bound is flagged.
pub fn fit_gaussian(h: &Histogram) -> Result<FitResult> {
    let y = h.values();
    if y.len() < 2 {
        return Err(Error::Precondition("gaussian fit needs at least 2 bins".into()));
    }
    if y.iter().sum::<f64>() <= 0.0 {
        return Err(Error::Precondition("gaussian fit needs a non-empty histogram".into()));
    }
    let (scale, unit) = axis_scale(h.kind);
    let edges: Vec<f64> = (0..=y.len()).map(|k| h.bin_left(k) * scale).collect();
    let w = h.bin_width * scale;
    let min_sigma = uniform_sigma(w);

    let mut sorted = y.clone();
    sorted.sort_by(f64::total_cmp);
    let base0 = if y.len() >= 8 {
        let q = &sorted[..y.len() / 4];
        q.iter().sum::<f64>() / q.len() as f64
    } else {
        0.0
    };
    let excess: Vec<f64> = y.iter().map(|v| (v - base0).max(0.0)).collect();
    let amp0 = excess.iter().sum::<f64>().max(1e-12);
    let centers: Vec<f64> = (0..y.len()).map(|k| 0.5 * (edges[k] + edges[k + 1])).collect();
    let mean = excess.iter().zip(&centers).map(|(e, c)| e * c).sum::<f64>() / amp0;
    let var = excess.iter().zip(&centers).map(|(e, c)| e * (c - mean).powi(2)).sum::<f64>() / amp0;
    let sigma0 = var.sqrt().max(1.5 * min_sigma);

    let curve = GaussianCurve::new(edges, min_sigma, unit);
    let p0 = [amp0, curve.params()[1].bounds.clamp(mean), sigma0, base0];
    let weights = match h.counts {
        Counts::Integer(_) => poisson_weights(&y),
        Counts::Real(_) => vec![1.0; y.len()],
    };
    let sol = least_squares(&curve, &p0, &y, &weights, &LsqOptions::default())?;
    let mut fit = FitResult::from_solution(&curve, &sol);
    if sol.params[2] <= min_sigma * (1.0 + 1e-9) {
        fit.warnings.push(format!(
            "sigma at its lower bound (bin width/sqrt(12) = {min_sigma:.4e} {unit}): peak is unresolved"
        ));
    }
    Ok(fit)
}

/// Multi-Gaussian fit of a spectrum histogram sampled at its bin centers.
pub fn fit_spectrum(h: &Histogram, n_components: usize) -> Result<FitResult> {
    if h.kind != HistogramKind::Spectrum {
        return Err(Error::Precondition(format!("spectrum fit needs a spectrum histogram, got {}", h.kind)));
    }
    fit_spectrum_points(&h.centers(), &h.values(), n_components)
}

/// Multi-Gaussian fit of `(wavelength nm, intensity)` samples with a free
/// constant baseline. Components are reported sorted by center.
///
/// Initial guess is greedy: the baseline from the lowest decile, then each
/// component at the largest remaining residual with a width from its
/// half-maximum crossings, subtracted before placing the next.
pub fn fit_spectrum_points(wavelengths_nm: &[f64], y: &[f64], n_components: usize) -> Result<FitResult> {
    if !(1..=4).contains(&n_components) {
        return Err(Error::Usage(format!("n_components must be 1..4, got {n_components}")));
    }
    if wavelengths_nm.len() != y.len() || y.len() < 2 {
        return Err(Error::Precondition("spectrum needs matching wavelength and intensity samples".into()));
    }
    if wavelengths_nm.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("spectrum wavelengths must be strictly increasing".into()));
    }
    let x = wavelengths_nm;
    let min_step = x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let min_width = 0.25 * min_step;

    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let low = &sorted[..(y.len() / 10).max(1)];
    let base0 = low.iter().sum::<f64>() / low.len() as f64;
    let mut resid: Vec<f64> = y.iter().map(|v| v - base0).collect();
    let mut p0 = vec![base0];
    for _ in 0..n_components {
        let (i, &amp) = resid.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty");
        let amp = amp.max(0.0);
        let half = 0.5 * amp;
        let left = (0..i).rev().find(|&k| resid[k] < half).unwrap_or(0);
        let right = (i..x.len()).find(|&k| resid[k] < half).unwrap_or(x.len() - 1);
        let width = ((x[right] - x[left]) / 2.3548).max(2.0 * min_step).max(min_width);
        let center = x[i];
        for (r, &xi) in resid.iter_mut().zip(x) {
            *r -= amp * (-0.5 * ((xi - center) / width).powi(2)).exp();
        }
        p0.extend([amp, center, width]);
    }

    let curve = SpectrumCurve::new(x.to_vec(), n_components, min_width);
    let mut sol = least_squares(&curve, &p0, y, &vec![1.0; y.len()], &LsqOptions::default())?;

    let mut order: Vec<usize> = (0..n_components).collect();
    order.sort_by(|&a, &b| sol.params[2 + 3 * a].total_cmp(&sol.params[2 + 3 * b]));
    let (params, errs) = (sol.params.clone(), sol.uncertainties.clone());
    for (slot, &k) in order.iter().enumerate() {
        for d in 0..3 {
            sol.params[1 + 3 * slot + d] = params[1 + 3 * k + d];
            sol.uncertainties[1 + 3 * slot + d] = errs[1 + 3 * k + d];
        }
    }

    let mut fit = FitResult::from_solution(&curve, &sol);
    let amax = (0..n_components).map(|k| sol.params[1 + 3 * k]).fold(0.0, f64::max);
    for k in 0..n_components {
        let (a, da) = (sol.params[1 + 3 * k], sol.uncertainties[1 + 3 * k]);
        if a <= 1e-3 * amax || !(a > 2.0 * da) {
            fit.warnings.push(format!(
                "component {} amplitude {a:.3e} is consistent with zero: the data may not support {n_components} components",
                k + 1
            ));
        }
    }
    Ok(fit)
}
