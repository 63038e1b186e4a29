//! Closed-form models and their curve adapters for least squares.

use std::f64::consts::FRAC_1_SQRT_2;

use super::lsq::Bounds;
use super::special::{exp_gauss, exp_gauss_integral, norm_cdf};
use crate::error::{Error, Result};

/// Antibunching curve `1 − a·e^{−|τ|/τ₁}` convolved with a Gaussian IRF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Model {
    pub a: f64,
    pub tau1_ns: f64,
    pub sigma_irf_ns: f64,
}

impl G2Model {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau1_ns > 0.0 && self.sigma_irf_ns >= 0.0 && self.a.is_finite()) {
            return Err(Error::Domain(format!("invalid g2 model {self:?}")));
        }
        Ok(())
    }

    pub fn eval(&self, tau_ns: f64) -> f64 {
        model_g2_convolved(tau_ns, self)
    }
}

/// `g²(τ)` of [`G2Model`]:
/// `1 − (a/2)·e^{σ²/2τ₁²}·[e^{−τ/τ₁}·erfc(σ/√2τ₁ − τ/√2σ) + e^{τ/τ₁}·erfc(σ/√2τ₁ + τ/√2σ)]`.
pub fn model_g2_convolved(tau_ns: f64, m: &G2Model) -> f64 {
    1.0 - m.a * (exp_gauss(tau_ns, m.tau1_ns, m.sigma_irf_ns) + exp_gauss(-tau_ns, m.tau1_ns, m.sigma_irf_ns))
}

/// `1 − a·e^{−|τ|/τ₁}`.
pub fn model_g2_ideal(tau_ns: f64, a: f64, tau1_ns: f64) -> f64 {
    1.0 - a * (-tau_ns.abs() / tau1_ns).exp()
}

/// `C(P) = C∞·P / (P + P_sat)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationModel {
    pub c_inf_cps: f64,
    pub p_sat_uw: f64,
}

impl SaturationModel {
    pub fn eval(&self, power_uw: f64) -> f64 {
        self.c_inf_cps * power_uw / (power_uw + self.p_sat_uw)
    }
}

/// `I(θ) = I₀·(1 − sin²φ·sin²(θ − θ₀))`, angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationModel {
    pub i0: f64,
    pub phi_deg: f64,
    pub theta0_deg: f64,
}

impl PolarizationModel {
    pub fn eval(&self, theta_deg: f64) -> f64 {
        let s = self.phi_deg.to_radians().sin().powi(2);
        self.i0 * (1.0 - s * (theta_deg - self.theta0_deg).to_radians().sin().powi(2))
    }

    /// Minimum over maximum intensity, `1 − sin²φ`.
    pub fn min_max_ratio(&self) -> f64 {
        1.0 - self.phi_deg.to_radians().sin().powi(2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl GaussianComponent {
    pub fn eval(&self, x: f64) -> f64 {
        self.amplitude * (-0.5 * ((x - self.center) / self.width).powi(2)).exp()
    }
}

/// Sum of Gaussian peaks on a constant baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumModel {
    pub components: Vec<GaussianComponent>,
    pub baseline: f64,
}

impl SpectrumModel {
    pub fn eval(&self, x: f64) -> f64 {
        self.baseline + self.components.iter().map(|c| c.eval(x)).sum::<f64>()
    }
}

/// Name, unit and admissible range of one fit parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub unit: String,
    pub bounds: Bounds,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, unit: impl Into<String>, bounds: Bounds) -> Self {
        ParamSpec {
            name: name.into(),
            unit: unit.into(),
            bounds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    G2,
    Lifetime,
    Saturation,
    Polarization,
    Gaussian,
    Spectrum,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::G2,
        ModelKind::Lifetime,
        ModelKind::Saturation,
        ModelKind::Polarization,
        ModelKind::Gaussian,
        ModelKind::Spectrum,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::G2 => "g2",
            ModelKind::Lifetime => "lifetime",
            ModelKind::Saturation => "saturation",
            ModelKind::Polarization => "polarization",
            ModelKind::Gaussian => "gaussian",
            ModelKind::Spectrum => "spectrum",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Usage(format!("unknown fit kind {s:?}")))
    }
}

/// A parametric curve evaluated on a fixed design (sample points or bins).
pub trait CurveModel {
    fn kind(&self) -> ModelKind;
    fn params(&self) -> &[ParamSpec];
    fn n_points(&self) -> usize;
    /// Writes the model value at every design point into `out`.
    fn eval(&self, p: &[f64], out: &mut [f64]);
}

/// g² at lags (ns). Parameters `a, tau1_ns` and, unless fixed, `sigma_irf_ns`.
#[derive(Debug, Clone)]
pub struct G2Curve {
    pub lags_ns: Vec<f64>,
    pub fixed_sigma_ns: Option<f64>,
    specs: Vec<ParamSpec>,
}

impl G2Curve {
    pub fn new(lags_ns: Vec<f64>, fixed_sigma_ns: Option<f64>) -> Self {
        let mut specs = vec![
            ParamSpec::new("a", "", Bounds::between(0.0, 1.0)),
            ParamSpec::new("tau1", "ns", Bounds::at_least(1e-4)),
        ];
        if fixed_sigma_ns.is_none() {
            specs.push(ParamSpec::new("sigma_irf", "ns", Bounds::at_least(0.0)));
        }
        G2Curve {
            lags_ns,
            fixed_sigma_ns,
            specs,
        }
    }

    pub fn model(&self, p: &[f64]) -> G2Model {
        G2Model {
            a: p[0],
            tau1_ns: p[1],
            sigma_irf_ns: self.fixed_sigma_ns.unwrap_or_else(|| p[2]),
        }
    }
}

impl CurveModel for G2Curve {
    fn kind(&self) -> ModelKind {
        ModelKind::G2
    }
    fn params(&self) -> &[ParamSpec] {
        &self.specs
    }
    fn n_points(&self) -> usize {
        self.lags_ns.len()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) {
        let m = self.model(p);
        for (o, &t) in out.iter_mut().zip(&self.lags_ns) {
            *o = model_g2_convolved(t, &m);
        }
    }
}

/// Expected TCSPC counts per bin: `A·∫_bin Σₖ f(t − t₀ − kT) dt + B`, with
/// `f` the unit-area exponential ⊗ Gaussian density. Without a period only
/// `k = 0` contributes. Parameters `amplitude, tau, t0, baseline`.
#[derive(Debug, Clone)]
pub struct LifetimeCurve {
    /// Bin edges, ns (one more than the number of bins).
    pub edges_ns: Vec<f64>,
    pub sigma_irf_ns: f64,
    pub period_ns: Option<f64>,
    specs: Vec<ParamSpec>,
}

impl LifetimeCurve {
    pub fn new(edges_ns: Vec<f64>, sigma_irf_ns: f64, period_ns: Option<f64>) -> Self {
        let lo = edges_ns.first().copied().unwrap_or(0.0);
        let hi = edges_ns.last().copied().unwrap_or(0.0);
        let specs = vec![
            ParamSpec::new("amplitude", "counts", Bounds::at_least(0.0)),
            ParamSpec::new("tau", "ns", Bounds::at_least(1e-4)),
            ParamSpec::new("t0", "ns", Bounds::between(lo - (hi - lo), hi)),
            ParamSpec::new("baseline", "counts/bin", Bounds::at_least(0.0)),
        ];
        LifetimeCurve {
            edges_ns,
            sigma_irf_ns,
            period_ns,
            specs,
        }
    }

    fn cumulative(&self, t: f64, tau: f64) -> f64 {
        let one = |s: f64| exp_gauss_integral(s, tau, self.sigma_irf_ns) / tau;
        match self.period_ns {
            None => one(t),
            Some(period) => (-2..=1).map(|k| one(t - k as f64 * period)).sum(),
        }
    }
}

impl CurveModel for LifetimeCurve {
    fn kind(&self) -> ModelKind {
        ModelKind::Lifetime
    }
    fn params(&self) -> &[ParamSpec] {
        &self.specs
    }
    fn n_points(&self) -> usize {
        self.edges_ns.len().saturating_sub(1)
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) {
        let (amp, tau, t0, base) = (p[0], p[1], p[2], p[3]);
        let mut prev = self.cumulative(self.edges_ns[0] - t0, tau);
        for (o, &right) in out.iter_mut().zip(&self.edges_ns[1..]) {
            let next = self.cumulative(right - t0, tau);
            *o = amp * (next - prev) + base;
            prev = next;
        }
    }
}

/// Saturation curve at powers (µW). Parameters `c_inf, p_sat`.
#[derive(Debug, Clone)]
pub struct SaturationCurve {
    pub powers_uw: Vec<f64>,
    specs: Vec<ParamSpec>,
}

impl SaturationCurve {
    pub fn new(powers_uw: Vec<f64>) -> Self {
        SaturationCurve {
            powers_uw,
            specs: vec![
                ParamSpec::new("c_inf", "cts/s", Bounds::at_least(1e-12)),
                ParamSpec::new("p_sat", "uW", Bounds::at_least(1e-12)),
            ],
        }
    }
}

impl CurveModel for SaturationCurve {
    fn kind(&self) -> ModelKind {
        ModelKind::Saturation
    }
    fn params(&self) -> &[ParamSpec] {
        &self.specs
    }
    fn n_points(&self) -> usize {
        self.powers_uw.len()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) {
        let m = SaturationModel {
            c_inf_cps: p[0],
            p_sat_uw: p[1],
        };
        for (o, &x) in out.iter_mut().zip(&self.powers_uw) {
            *o = m.eval(x);
        }
    }
}

/// Polarization response at angles (degrees). Parameters `i0, phi, theta0`.
#[derive(Debug, Clone)]
pub struct PolarizationCurve {
    pub angles_deg: Vec<f64>,
    specs: Vec<ParamSpec>,
}

impl PolarizationCurve {
    pub fn new(angles_deg: Vec<f64>) -> Self {
        PolarizationCurve {
            angles_deg,
            specs: vec![
                ParamSpec::new("i0", "cts/s", Bounds::at_least(0.0)),
                ParamSpec::new("phi", "deg", Bounds::between(0.0, 90.0)),
                ParamSpec::new("theta0", "deg", Bounds::FREE),
            ],
        }
    }
}

impl CurveModel for PolarizationCurve {
    fn kind(&self) -> ModelKind {
        ModelKind::Polarization
    }
    fn params(&self) -> &[ParamSpec] {
        &self.specs
    }
    fn n_points(&self) -> usize {
        self.angles_deg.len()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) {
        let m = PolarizationModel {
            i0: p[0],
            phi_deg: p[1],
            theta0_deg: p[2],
        };
        for (o, &x) in out.iter_mut().zip(&self.angles_deg) {
            *o = m.eval(x);
        }
    }
}

/// Bin-integrated Gaussian peak on a baseline. Parameters
/// `amplitude` (area, counts), `center`, `sigma`, `baseline` (counts/bin).
#[derive(Debug, Clone)]
pub struct GaussianCurve {
    pub edges: Vec<f64>,
    specs: Vec<ParamSpec>,
}

impl GaussianCurve {
    /// `min_sigma` is the lower bound on the width; `unit` labels the axis.
    pub fn new(edges: Vec<f64>, min_sigma: f64, unit: &str) -> Self {
        let lo = edges.first().copied().unwrap_or(0.0);
        let hi = edges.last().copied().unwrap_or(0.0);
        GaussianCurve {
            edges,
            specs: vec![
                ParamSpec::new("amplitude", "counts", Bounds::at_least(0.0)),
                ParamSpec::new("center", unit, Bounds::between(lo, hi)),
                ParamSpec::new("sigma", unit, Bounds::at_least(min_sigma)),
                ParamSpec::new("baseline", "counts/bin", Bounds::at_least(0.0)),
            ],
        }
    }
}

impl CurveModel for GaussianCurve {
    fn kind(&self) -> ModelKind {
        ModelKind::Gaussian
    }
    fn params(&self) -> &[ParamSpec] {
        &self.specs
    }
    fn n_points(&self) -> usize {
        self.edges.len().saturating_sub(1)
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) {
        let (amp, c, s, base) = (p[0], p[1], p[2], p[3]);
        let mut prev = norm_cdf((self.edges[0] - c) / s);
        for (o, &right) in out.iter_mut().zip(&self.edges[1..]) {
            let next = norm_cdf((right - c) / s);
            *o = amp * (next - prev) + base;
            prev = next;
        }
    }
}

/// Multi-Gaussian spectrum at sample wavelengths (nm). Parameters
/// `baseline` then `amplitude_k, center_k, width_k` for each component.
#[derive(Debug, Clone)]
pub struct SpectrumCurve {
    pub wavelengths_nm: Vec<f64>,
    pub n_components: usize,
    specs: Vec<ParamSpec>,
}

impl SpectrumCurve {
    pub fn new(wavelengths_nm: Vec<f64>, n_components: usize, min_width_nm: f64) -> Self {
        let lo = wavelengths_nm.first().copied().unwrap_or(0.0);
        let hi = wavelengths_nm.last().copied().unwrap_or(0.0);
        let mut specs = vec![ParamSpec::new("baseline", "", Bounds::FREE)];
        for k in 1..=n_components {
            specs.push(ParamSpec::new(format!("amplitude_{k}"), "", Bounds::at_least(0.0)));
            specs.push(ParamSpec::new(format!("center_{k}"), "nm", Bounds::between(lo, hi)));
            specs.push(ParamSpec::new(format!("width_{k}"), "nm", Bounds::at_least(min_width_nm)));
        }
        SpectrumCurve {
            wavelengths_nm,
            n_components,
            specs,
        }
    }

    pub fn model(&self, p: &[f64]) -> SpectrumModel {
        SpectrumModel {
            baseline: p[0],
            components: p[1..]
                .chunks_exact(3)
                .map(|c| GaussianComponent {
                    amplitude: c[0],
                    center: c[1],
                    width: c[2],
                })
                .collect(),
        }
    }
}

impl CurveModel for SpectrumCurve {
    fn kind(&self) -> ModelKind {
        ModelKind::Spectrum
    }
    fn params(&self) -> &[ParamSpec] {
        &self.specs
    }
    fn n_points(&self) -> usize {
        self.wavelengths_nm.len()
    }
    fn eval(&self, p: &[f64], out: &mut [f64]) {
        for (o, &x) in out.iter_mut().zip(&self.wavelengths_nm) {
            let mut v = p[0];
            for c in p[1..].chunks_exact(3) {
                v += c[0] * (-0.5 * ((x - c[1]) / c[2]).powi(2)).exp();
            }
            *o = v;
        }
    }
}

/// Equivalent σ of a uniform distribution one bin wide.
pub fn uniform_sigma(width: f64) -> f64 {
    width * FRAC_1_SQRT_2 / 6f64.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(a: f64) -> G2Model {
        G2Model {
            a,
            tau1_ns: 1.27,
            sigma_irf_ns: 0.41,
        }
    }

    /// Direct quadrature of `∫ N(s; 0, σ)·(1 − a·e^{−|τ−s|/τ₁}) ds`.
    fn quadrature(tau: f64, m: &G2Model) -> f64 {
        let n = 400_000;
        let lim = 12.0 * m.sigma_irf_ns;
        let h = 2.0 * lim / n as f64;
        let mut acc = 0.0;
        for i in 0..=n {
            let s = -lim + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            let gauss = (-0.5 * (s / m.sigma_irf_ns).powi(2)).exp()
                / (m.sigma_irf_ns * (2.0 * std::f64::consts::PI).sqrt());
            acc += w * gauss * model_g2_ideal(tau - s, m.a, m.tau1_ns);
        }
        acc * h
    }

    #[test]
    fn convolution_matches_quadrature() {
        for tau in [-3.0, -0.7, 0.0, 0.2, 1.5, 4.0] {
            let m = reference(1.0);
            let q = quadrature(tau, &m);
            assert!((model_g2_convolved(tau, &m) - q).abs() < 1e-7, "{tau}");
        }
    }

    #[test]
    fn reference_dip_depth() {
        let g0 = model_g2_convolved(0.0, &reference(1.0));
        assert!((g0 - 0.215).abs() < 0.005, "{g0}");
        let g0 = model_g2_convolved(0.0, &reference(0.9));
        assert!((g0 - 0.293).abs() < 0.002 && g0 < 0.5, "{g0}");
    }

    #[test]
    fn limits() {
        let ideal = G2Model {
            a: 1.0,
            tau1_ns: 1.27,
            sigma_irf_ns: 0.0,
        };
        assert_eq!(model_g2_convolved(0.0, &ideal), 0.0);
        assert!((model_g2_convolved(1e3, &reference(1.0)) - 1.0).abs() < 1e-15);
        assert!((model_g2_convolved(-1e3, &reference(1.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn saturation_midpoint() {
        let m = SaturationModel {
            c_inf_cps: 26e3,
            p_sat_uw: 249.0,
        };
        assert_eq!(m.eval(249.0), 13e3);
    }

    #[test]
    fn polarization_contrast() {
        let m = PolarizationModel {
            i0: 1.0,
            phi_deg: 53.6,
            theta0_deg: 0.0,
        };
        assert!((m.min_max_ratio() - 0.352).abs() < 1e-3);
        assert!((m.eval(90.0) - m.min_max_ratio()).abs() < 1e-15);
    }

    #[test]
    fn lifetime_curve_conserves_area() {
        let edges: Vec<f64> = (0..=2000).map(|i| i as f64 * 0.01).collect();
        let c = LifetimeCurve::new(edges, 0.41, Some(20.0));
        let mut out = vec![0.0; c.n_points()];
        c.eval(&[1000.0, 0.25, 3.0, 0.0], &mut out);
        assert!((out.iter().sum::<f64>() - 1000.0).abs() < 1e-6);
        // Wrapped: a peak at t0 = 0.1 spills into the end of the window.
        c.eval(&[1000.0, 0.25, 0.1, 0.0], &mut out);
        assert!((out.iter().sum::<f64>() - 1000.0).abs() < 1e-6);
        assert!(out[1999] > 0.0);
    }
}
