use super::lsq::{least_squares, LsqOptions, LsqSolution};
use super::models::{model_g2_convolved, G2Curve};
use super::FitResult;
use crate::correlator::{Counts, Histogram, HistogramKind};
use crate::error::{Error, Result};

/// g²(0) below this certifies a single emitter.
pub const SINGLE_EMITTER_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IrfSigma {
    Fixed(f64),
    Free,
}

/// Fits the IRF-convolved antibunching model to a normalized coincidence
/// histogram (raw counts are normalized with the histogram's metadata).
/// Reports `g2_zero` and the single-emitter verdict.
///
/// Initial guess: the dip depth from the bins closest to zero lag, `τ₁` from
/// the lag where the |τ|-averaged curve recovers to `1 − a/e`.
pub fn fit_g2(h: &Histogram, sigma: IrfSigma) -> Result<FitResult> {
    if h.kind != HistogramKind::Coincidence {
        return Err(Error::Precondition(format!("g2 fit needs a coincidence histogram, got {}", h.kind)));
    }
    let normalized;
    let h = match h.counts {
        Counts::Integer(_) => {
            normalized = h.normalized_g2()?;
            &normalized
        }
        Counts::Real(_) => h,
    };
    if h.len() < 4 {
        return Err(Error::Precondition("g2 fit needs at least 4 bins".into()));
    }
    if h.total() <= 0.0 {
        return Err(Error::Precondition("no coincidences in the histogram".into()));
    }
    let lags: Vec<f64> = h.centers().iter().map(|t| t * 1e9).collect();
    let y = h.values();

    let (a0, tau0) = initial_guess(&lags, &y, h.bin_width * 1e9);
    let fixed = match sigma {
        IrfSigma::Fixed(s) if s.is_finite() && s >= 0.0 => Some(s),
        IrfSigma::Fixed(s) => return Err(Error::Domain(format!("IRF sigma must be >= 0 ns, got {s}"))),
        IrfSigma::Free => None,
    };
    let curve = G2Curve::new(lags, fixed);
    let mut p0 = vec![a0, tau0];
    if fixed.is_none() {
        p0.push(0.3);
    }
    let sol = least_squares(&curve, &p0, &y, &vec![1.0; y.len()], &LsqOptions::default())?;

    let mut fit = FitResult::from_solution(&curve, &sol);
    if let Some(s) = fixed {
        fit.push_derived("sigma_irf", "ns", s, 0.0);
    }
    let (g0, g0_err) = g2_zero(&curve, &sol);
    fit.push_derived("g2_zero", "", g0, g0_err);
    Ok(fit)
}

fn g2_zero(curve: &G2Curve, sol: &LsqSolution) -> (f64, f64) {
    let at = |p: &[f64]| model_g2_convolved(0.0, &curve.model(p));
    let g0 = at(&sol.params);
    let n = sol.params.len();
    let mut grad = vec![0.0; n];
    for (j, g) in grad.iter_mut().enumerate() {
        let mut q = sol.params.clone();
        let h = 1e-6 * q[j].abs().max(1e-3);
        q[j] += h;
        *g = (at(&q) - g0) / h;
    }
    let mut var = 0.0;
    for i in 0..n {
        for j in 0..n {
            if grad[i] != 0.0 && grad[j] != 0.0 {
                var += grad[i] * sol.covariance[(i, j)] * grad[j];
            }
        }
    }
    (g0, var.max(0.0).sqrt())
}

fn initial_guess(lags: &[f64], y: &[f64], bin_ns: f64) -> (f64, f64) {
    let mut order: Vec<usize> = (0..lags.len()).collect();
    order.sort_by(|&i, &j| lags[i].abs().total_cmp(&lags[j].abs()));
    let chunk = (lags.len() / 40).max(4);
    let means: Vec<(f64, f64)> = order
        .chunks(chunk)
        .map(|c| {
            let n = c.len() as f64;
            let t = c.iter().map(|&i| lags[i].abs()).sum::<f64>() / n;
            let v = c.iter().map(|&i| y[i]).sum::<f64>() / n;
            (t, v)
        })
        .collect();
    let dip = (1.0 - means[0].1).clamp(0.05, 1.0);
    let target = 1.0 - dip / std::f64::consts::E;
    let tau = means
        .iter()
        .find(|(_, v)| *v >= target)
        .map_or(1.0, |(t, _)| *t)
        .max(bin_ns);
    (dip, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::models::G2Model;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn synthetic(m: &G2Model, noise: f64, seed: u64) -> Histogram {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = Normal::new(0.0, noise).unwrap();
        let w = 73.3e-12;
        let k = 272;
        let values = (0..2 * k)
            .map(|i| {
                let t = (i as f64 - k as f64 + 0.5) * w * 1e9;
                model_g2_convolved(t, m) + n.sample(&mut rng)
            })
            .collect();
        Histogram::new(HistogramKind::Coincidence, w, -(k as f64) * w, Counts::Real(values))
    }

    #[test]
    fn recovers_reference_parameters() {
        let truth = G2Model {
            a: 1.0,
            tau1_ns: 1.27,
            sigma_irf_ns: 0.41,
        };
        let fit = fit_g2(&synthetic(&truth, 0.01, 3), IrfSigma::Fixed(0.41)).unwrap();
        let tau = fit.value("tau1").unwrap();
        assert!((tau / 1.27 - 1.0).abs() < 0.05, "{fit}");
        assert_eq!(fit.single_emitter(), Some(true));
        let free = fit_g2(&synthetic(&truth, 0.01, 4), IrfSigma::Free).unwrap();
        assert!((free.value("tau1").unwrap() / 1.27 - 1.0).abs() < 0.05, "{free}");
        assert!(free.g2_model().is_ok());
    }

    #[test]
    fn flat_curve_is_not_a_single_emitter() {
        let h = Histogram::new(HistogramKind::Coincidence, 1e-10, -5e-9, Counts::Real(vec![1.0; 100]));
        let fit = fit_g2(&h, IrfSigma::Fixed(0.41)).unwrap();
        assert!(fit.value("a").unwrap() < 1e-6, "{fit}");
        assert_eq!(fit.single_emitter(), Some(false));
    }

    #[test]
    fn empty_histogram_has_no_verdict() {
        let h = Histogram::new(HistogramKind::Coincidence, 1e-10, -5e-9, Counts::Integer(vec![0; 100]))
            .with_acquisition(60.0, 500.0, 500.0);
        assert!(matches!(fit_g2(&h, IrfSigma::Free), Err(Error::Precondition(_))));
    }

    #[test]
    fn tcspc_histogram_rejected() {
        let h = Histogram::new(HistogramKind::Tcspc, 1e-10, 0.0, Counts::Real(vec![1.0; 10]));
        assert!(fit_g2(&h, IrfSigma::Free).is_err());
    }
}
