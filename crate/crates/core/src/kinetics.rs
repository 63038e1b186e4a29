//! Level scheme and rate model of a single molecular emitter.
//!
//! Three effective levels are modelled: the ground doublet, the optically
//! excited doublet and a single shelving level standing in for the
//! intersystem-crossing manifold. Rates are in ns⁻¹ throughout; detected
//! count rates are in counts per second.
//!
//! Excitation is linear in power:
//!
//! ```text
//! k_exc = alpha · sigma_rel(λ) · P · (1 − sin²φ · sin²θ)
//! ```
//!
//! where φ is the tilt of the molecular normal from the optical axis and θ
//! the excitation polarization angle. For the two-level case (no shelving)
//! the steady-state detected rate is exactly `C∞·P/(P + P_sat)` with
//! `C∞ = η·k_rad` and `P_sat = (k_rad + k_nr) / (alpha·sigma_rel·(1 − sin²φ sin²θ))`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};

/// Red (resonant) excitation wavelength, nm.
pub const RED_NM: u32 = 658;
/// Green (off-resonant) excitation wavelength, nm.
pub const GREEN_NM: u32 = 515;

/// Fluorescence lifetime of the reference emitter under red excitation, ns.
pub const REFERENCE_LIFETIME_NS: f64 = 1.27;
/// Lifetime measured under green pulsed excitation, ns.
pub const GREEN_LIFETIME_NS: f64 = 0.25;
/// Saturation power of the reference emitter under red excitation, µW.
pub const REFERENCE_P_SAT_UW: f64 = 249.0;
/// Red-to-green ratio of relative absorption cross-sections.
pub const RED_GREEN_CROSS_SECTION_RATIO: f64 = 7.0;
/// Default overall detection efficiency: η·k_rad ≈ 26 kcts/s for k_rad = (1.27 ns)⁻¹.
pub const DEFAULT_DETECTION_EFFICIENCY: f64 = 3.3e-5;
/// Energy split of the excited eₓ/e_y pair, eV. Carried as metadata only.
pub const DEFAULT_EXCITED_SPLITTING_EV: f64 = 0.07;

/// Power-to-rate calibration that puts the reference emitter's red saturation
/// power at [`REFERENCE_P_SAT_UW`].
pub fn default_alpha() -> f64 {
    1.0 / REFERENCE_LIFETIME_NS / REFERENCE_P_SAT_UW
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmitterConfig {
    /// Radiative decay rate, ns⁻¹.
    pub k_rad: f64,
    /// Non-radiative decay rate by excitation wavelength (nm), ns⁻¹.
    pub k_nr_by_wavelength: BTreeMap<u32, f64>,
    /// Excited → shelving crossing rate, ns⁻¹.
    pub k_isc: f64,
    /// Shelving → ground return rate, ns⁻¹.
    pub k_isc_return: f64,
    /// Angle between the molecular normal and the optical axis, degrees.
    pub tilt_phi_deg: f64,
    /// Relative absorption cross-section by excitation wavelength (nm).
    pub sigma_rel_by_wavelength: BTreeMap<u32, f64>,
    pub excited_splitting_ev: f64,
}

impl EmitterConfig {
    /// The reference molecule: τ = 1.27 ns with negligible non-radiative decay
    /// under red excitation, τ = 0.25 ns under green, and a green cross-section
    /// seven times smaller than the red one. No shelving, no tilt.
    pub fn reference() -> Self {
        let k_rad = 1.0 / REFERENCE_LIFETIME_NS;
        EmitterConfig {
            k_rad,
            k_nr_by_wavelength: BTreeMap::from([
                (GREEN_NM, 1.0 / GREEN_LIFETIME_NS - k_rad),
                (RED_NM, 0.0),
            ]),
            k_isc: 0.0,
            k_isc_return: 0.0,
            tilt_phi_deg: 0.0,
            sigma_rel_by_wavelength: BTreeMap::from([
                (GREEN_NM, 1.0 / RED_GREEN_CROSS_SECTION_RATIO),
                (RED_NM, 1.0),
            ]),
            excited_splitting_ev: DEFAULT_EXCITED_SPLITTING_EV,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_rad.is_finite() && self.k_rad > 0.0) {
            return Err(Error::Config(format!("k_rad must be > 0, got {}", self.k_rad)));
        }
        for (name, v) in [("k_isc", self.k_isc), ("k_isc_return", self.k_isc_return)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (wl, &v) in &self.k_nr_by_wavelength {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("k_nr[{wl}] must be >= 0, got {v}")));
            }
        }
        for (wl, &v) in &self.sigma_rel_by_wavelength {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("sigma_rel[{wl}] must be >= 0, got {v}")));
            }
        }
        if !(0.0..=90.0).contains(&self.tilt_phi_deg) {
            return Err(Error::Config(format!(
                "tilt_phi must lie in [0, 90] degrees, got {}",
                self.tilt_phi_deg
            )));
        }
        Ok(())
    }

    pub fn k_nr(&self, wavelength_nm: u32) -> Result<f64> {
        self.k_nr_by_wavelength
            .get(&wavelength_nm)
            .copied()
            .ok_or_else(|| Error::Config(format!("no k_nr entry for wavelength {wavelength_nm} nm")))
    }

    pub fn sigma_rel(&self, wavelength_nm: u32) -> Result<f64> {
        self.sigma_rel_by_wavelength
            .get(&wavelength_nm)
            .copied()
            .ok_or_else(|| {
                Error::Config(format!("no sigma_rel entry for wavelength {wavelength_nm} nm"))
            })
    }

    /// Total excited-state depopulation rate back to the ground state,
    /// `k_rad + k_nr(λ)`.
    pub fn decay_rate(&self, wavelength_nm: u32) -> Result<f64> {
        Ok(self.k_rad + self.k_nr(wavelength_nm)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExcitationMode {
    Cw,
    /// Rectangular pulses of `pulse_width_ps` repeating every `period_ns`.
    Pulsed { period_ns: f64, pulse_width_ps: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationContext {
    pub wavelength_nm: u32,
    /// Time-averaged power, µW.
    pub power_uw: f64,
    pub pol_theta_deg: f64,
    pub mode: ExcitationMode,
    /// Power-to-rate calibration, ns⁻¹·µW⁻¹.
    pub alpha: f64,
}

impl ExcitationContext {
    pub fn cw(wavelength_nm: u32, power_uw: f64) -> Self {
        ExcitationContext {
            wavelength_nm,
            power_uw,
            pol_theta_deg: 0.0,
            mode: ExcitationMode::Cw,
            alpha: default_alpha(),
        }
    }

    pub fn pulsed(wavelength_nm: u32, power_uw: f64, period_ns: f64, pulse_width_ps: f64) -> Self {
        ExcitationContext {
            mode: ExcitationMode::Pulsed {
                period_ns,
                pulse_width_ps,
            },
            ..Self::cw(wavelength_nm, power_uw)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.power_uw.is_finite() && self.power_uw >= 0.0) {
            return Err(Error::Config(format!("power must be >= 0 µW, got {}", self.power_uw)));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if !self.pol_theta_deg.is_finite() {
            return Err(Error::Config("polarization angle must be finite".into()));
        }
        if let ExcitationMode::Pulsed {
            period_ns,
            pulse_width_ps,
        } = self.mode
        {
            let width_ns = pulse_width_ps / 1000.0;
            if !(width_ns > 0.0 && period_ns > width_ns && period_ns.is_finite()) {
                return Err(Error::Config(format!(
                    "pulse period ({period_ns} ns) must exceed pulse width ({pulse_width_ps} ps) > 0"
                )));
            }
        }
        Ok(())
    }
}

/// Excitation rate (ns⁻¹) for the given emitter and excitation conditions.
pub fn excitation_rate(cfg: &EmitterConfig, ctx: &ExcitationContext) -> Result<f64> {
    let sigma = cfg.sigma_rel(ctx.wavelength_nm)?;
    let phi = cfg.tilt_phi_deg.to_radians();
    let theta = ctx.pol_theta_deg.to_radians();
    let polarization = 1.0 - phi.sin().powi(2) * theta.sin().powi(2);
    Ok((ctx.alpha * sigma * ctx.power_uw * polarization).max(0.0))
}

/// Fluorescence lifetime `(k_rad + k_nr)⁻¹`, ns.
pub fn effective_lifetime(k_rad: f64, k_nr: f64) -> Result<f64> {
    if !(k_rad >= 0.0 && k_nr >= 0.0) {
        return Err(Error::Domain(format!("rates must be >= 0 (k_rad={k_rad}, k_nr={k_nr})")));
    }
    let total = k_rad + k_nr;
    if total <= 0.0 {
        return Err(Error::Domain("k_rad + k_nr must be > 0".into()));
    }
    Ok(1.0 / total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Ground = 0,
    Excited = 1,
    Isc = 2,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Ground, Level::Excited, Level::Isc];

    pub fn label(self) -> &'static str {
        match self {
            Level::Ground => "ground (2B2)",
            Level::Excited => "excited (2E)",
            Level::Isc => "isc (2E'/4E')",
        }
    }
}

/// Transition-rate generator. Entry `(to, from)` holds the rate from `from`
/// to `to`; the diagonal holds minus the total departure rate, so every
/// column sums to zero and `dp/dt = Q·p`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    q: Matrix3<f64>,
}

impl RateMatrix {
    /// Builds the generator from off-diagonal transition rates.
    pub fn from_transitions(transitions: &[(Level, Level, f64)]) -> Result<Self> {
        let mut q = Matrix3::zeros();
        for &(from, to, rate) in transitions {
            if from == to {
                continue;
            }
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(Error::Config(format!(
                    "transition {from:?}->{to:?} has invalid rate {rate}"
                )));
            }
            q[(to as usize, from as usize)] += rate;
        }
        for j in 0..3 {
            let out: f64 = (0..3).filter(|&i| i != j).map(|i| q[(i, j)]).sum();
            q[(j, j)] = -out;
        }
        Ok(RateMatrix { q })
    }

    pub fn rate(&self, from: Level, to: Level) -> f64 {
        if from == to {
            0.0
        } else {
            self.q[(to as usize, from as usize)]
        }
    }

    pub fn escape_rate(&self, level: Level) -> f64 {
        -self.q[(level as usize, level as usize)]
    }

    pub fn generator(&self) -> &Matrix3<f64> {
        &self.q
    }

    /// Levels reachable from the ground state (the simulation's initial state).
    pub fn reachable_from_ground(&self) -> Vec<Level> {
        let mut seen = vec![Level::Ground];
        let mut frontier = vec![Level::Ground];
        while let Some(from) = frontier.pop() {
            for to in Level::ALL {
                if self.rate(from, to) > 0.0 && !seen.contains(&to) {
                    seen.push(to);
                    frontier.push(to);
                }
            }
        }
        seen.sort();
        seen
    }
}

impl fmt::Display for RateMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..3 {
            let row: Vec<String> = (0..3).map(|j| format!("{:>12.6e}", self.q[(i, j)])).collect();
            writeln!(f, "[{}]  <- {}", row.join(" "), Level::ALL[i].label())?;
        }
        Ok(())
    }
}

/// Rate matrix for continuous excitation. Pulsed contexts are rejected: the
/// simulator modulates the excitation rate in time itself.
pub fn build_rate_matrix(cfg: &EmitterConfig, ctx: &ExcitationContext) -> Result<RateMatrix> {
    if ctx.mode != ExcitationMode::Cw {
        return Err(Error::Precondition(
            "build_rate_matrix requires a CW excitation context".into(),
        ));
    }
    cfg.validate()?;
    ctx.validate()?;
    let k_exc = excitation_rate(cfg, ctx)?;
    let k_decay = cfg.decay_rate(ctx.wavelength_nm)?;
    RateMatrix::from_transitions(&[
        (Level::Ground, Level::Excited, k_exc),
        (Level::Excited, Level::Ground, k_decay),
        (Level::Excited, Level::Isc, cfg.k_isc),
        (Level::Isc, Level::Ground, cfg.k_isc_return),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// Populations indexed by [`Level`].
    pub populations: [f64; 3],
    /// `det_eff · k_rad · p_excited`, counts per second.
    pub detected_rate_cps: f64,
}

impl SteadyState {
    pub fn population(&self, level: Level) -> f64 {
        self.populations[level as usize]
    }
}

/// Stationary populations of the generator and the resulting detected rate.
///
/// The chain is restricted to the levels reachable from the ground state.
/// A reachable absorbing level (other than an unexcited ground state) makes
/// the problem ill-posed and is reported with the matrix.
pub fn steady_state(m: &RateMatrix, k_rad: f64, det_eff: f64) -> Result<SteadyState> {
    if !(k_rad > 0.0) || !(0.0..=1.0).contains(&det_eff) {
        return Err(Error::Domain(format!(
            "need k_rad > 0 and det_eff in [0,1] (k_rad={k_rad}, det_eff={det_eff})"
        )));
    }
    let reachable = m.reachable_from_ground();
    let mut populations = [0.0; 3];
    if reachable.len() == 1 {
        populations[Level::Ground as usize] = 1.0;
    } else {
        if let Some(level) = reachable.iter().find(|&&l| m.escape_rate(l) <= 0.0) {
            return Err(Error::Numerical {
                message: format!("level {} is absorbing under excitation", level.label()),
                matrix: Some(m.to_string()),
            });
        }
        // Replace the first balance equation with normalization.
        let n = reachable.len();
        let mut a = DMatrix::zeros(n, n);
        for (r, &to) in reachable.iter().enumerate() {
            for (c, &from) in reachable.iter().enumerate() {
                a[(r, c)] = m.generator()[(to as usize, from as usize)];
            }
        }
        let mut b = DVector::zeros(n);
        for c in 0..n {
            a[(0, c)] = 1.0;
        }
        b[0] = 1.0;
        let p = a.lu().solve(&b).ok_or_else(|| Error::Numerical {
            message: "singular balance equations".into(),
            matrix: Some(m.to_string()),
        })?;
        for (i, &level) in reachable.iter().enumerate() {
            populations[level as usize] = p[i].max(0.0);
        }
        let total: f64 = populations.iter().sum();
        for p in &mut populations {
            *p /= total;
        }
    }
    Ok(SteadyState {
        populations,
        detected_rate_cps: det_eff * k_rad * 1e9 * populations[Level::Excited as usize],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(k_rad: f64, k_nr: f64) -> EmitterConfig {
        EmitterConfig {
            k_rad,
            k_nr_by_wavelength: BTreeMap::from([(RED_NM, k_nr)]),
            k_isc: 0.0,
            k_isc_return: 0.0,
            tilt_phi_deg: 0.0,
            sigma_rel_by_wavelength: BTreeMap::from([(RED_NM, 1.0)]),
            excited_splitting_ev: DEFAULT_EXCITED_SPLITTING_EV,
        }
    }

    #[test]
    fn cross_section_ratio_sets_rate_ratio() {
        let cfg = EmitterConfig::reference();
        let red = excitation_rate(&cfg, &ExcitationContext::cw(RED_NM, 100.0)).unwrap();
        let green = excitation_rate(&cfg, &ExcitationContext::cw(GREEN_NM, 100.0)).unwrap();
        assert!((red / green - 7.0).abs() < 1e-12);
    }

    #[test]
    fn untilted_emitter_ignores_polarization() {
        let cfg = EmitterConfig::reference();
        let mut ctx = ExcitationContext::cw(RED_NM, 50.0);
        let base = excitation_rate(&cfg, &ctx).unwrap();
        for theta in [13.0, 45.0, 90.0, 271.0] {
            ctx.pol_theta_deg = theta;
            assert_eq!(excitation_rate(&cfg, &ctx).unwrap(), base);
        }
    }

    #[test]
    fn tilted_emitter_contrast() {
        let mut cfg = EmitterConfig::reference();
        cfg.tilt_phi_deg = 37.4;
        let mut ctx = ExcitationContext::cw(RED_NM, 50.0);
        let at0 = excitation_rate(&cfg, &ctx).unwrap();
        ctx.pol_theta_deg = 90.0;
        let at90 = excitation_rate(&cfg, &ctx).unwrap();
        // 1 − sin²(37.4°) = cos²(37.4°)
        assert!((at90 / at0 - 0.631_094_6).abs() < 1e-6);
    }

    #[test]
    fn unknown_wavelength_is_named() {
        let cfg = EmitterConfig::reference();
        let err = excitation_rate(&cfg, &ExcitationContext::cw(405, 1.0)).unwrap_err();
        assert!(err.to_string().contains("405"), "{err}");
    }

    #[test]
    fn lifetimes() {
        assert!((effective_lifetime(1.0 / 1.27, 0.0).unwrap() - 1.27).abs() < 1e-12);
        assert_eq!(effective_lifetime(1.0, 0.0).unwrap(), 1.0);
        let k_nr: f64 = 1.0 / 0.25 - 1.0 / 1.27;
        assert!((k_nr - 3.2126).abs() < 1e-4);
        assert!((effective_lifetime(1.0 / 1.27, k_nr).unwrap() - 0.25).abs() < 1e-12);
        assert!(matches!(effective_lifetime(0.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn lifetime_decreases_with_nonradiative_rate() {
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let tau = effective_lifetime(0.8, i as f64 * 0.1).unwrap();
            assert!(tau < last);
            last = tau;
        }
    }

    #[test]
    fn rate_matrix_structure() {
        let cfg = two_level(0.7874, 0.0);
        let mut ctx = ExcitationContext::cw(RED_NM, 1.0);
        ctx.alpha = 0.5;
        let m = build_rate_matrix(&cfg, &ctx).unwrap();
        assert_eq!(m.rate(Level::Excited, Level::Ground), 0.7874);
        assert_eq!(m.rate(Level::Ground, Level::Excited), 0.5);
        for l in Level::ALL {
            assert_eq!(m.rate(Level::Isc, l), 0.0);
            assert_eq!(m.rate(l, Level::Isc), 0.0);
        }
        for j in 0..3 {
            let s: f64 = (0..3).map(|i| m.generator()[(i, j)]).sum();
            assert!(s.abs() < 1e-15);
        }
    }

    #[test]
    fn zero_power_leaves_only_decays() {
        let mut cfg = EmitterConfig::reference();
        cfg.k_isc = 0.1;
        cfg.k_isc_return = 0.01;
        let m = build_rate_matrix(&cfg, &ExcitationContext::cw(RED_NM, 0.0)).unwrap();
        assert_eq!(m.escape_rate(Level::Ground), 0.0);
        assert!(m.rate(Level::Excited, Level::Ground) > 0.0);
        let ss = steady_state(&m, cfg.k_rad, 0.5).unwrap();
        assert_eq!(ss.population(Level::Ground), 1.0);
        assert_eq!(ss.detected_rate_cps, 0.0);
    }

    #[test]
    fn pulsed_context_rejected() {
        let cfg = EmitterConfig::reference();
        let ctx = ExcitationContext::pulsed(GREEN_NM, 10.0, 20.0, 50.0);
        assert!(matches!(build_rate_matrix(&cfg, &ctx), Err(Error::Precondition(_))));
    }

    #[test]
    fn half_population_at_saturation_power() {
        let cfg = two_level(0.7, 0.3);
        let mut ctx = ExcitationContext::cw(RED_NM, 1.0);
        ctx.alpha = 1.0; // k_exc = 1 = k_rad + k_nr
        let m = build_rate_matrix(&cfg, &ctx).unwrap();
        let ss = steady_state(&m, cfg.k_rad, 0.01).unwrap();
        assert!((ss.population(Level::Excited) - 0.5).abs() < 1e-14);
        let c_inf = 0.01 * 0.7e9;
        assert!((ss.detected_rate_cps - c_inf / 2.0).abs() < 1e-6);
    }

    #[test]
    fn saturation_curve_value_at_100uw() {
        // C∞ = 26 kcts/s and P_sat = 249 µW: C(100) = 26000·100/349.
        let cfg = EmitterConfig::reference();
        let det_eff = 26_000.0 / (cfg.k_rad * 1e9);
        let m = build_rate_matrix(&cfg, &ExcitationContext::cw(RED_NM, 100.0)).unwrap();
        let ss = steady_state(&m, cfg.k_rad, det_eff).unwrap();
        assert!((ss.detected_rate_cps - 26_000.0 * 100.0 / 349.0).abs() < 1e-6);
        assert!((ss.detected_rate_cps - 7450.0).abs() < 1.0);
    }

    #[test]
    fn shelving_matches_closed_form() {
        let mut cfg = EmitterConfig::reference();
        cfg.k_isc = 0.05;
        cfg.k_isc_return = 0.002;
        let ctx = ExcitationContext::cw(RED_NM, 300.0);
        let m = build_rate_matrix(&cfg, &ctx).unwrap();
        let ss = steady_state(&m, cfg.k_rad, 1e-3).unwrap();
        let k_exc = excitation_rate(&cfg, &ctx).unwrap();
        let k_e = cfg.k_rad + cfg.k_isc;
        let p_e = 1.0 / (k_e / k_exc + 1.0 + cfg.k_isc / cfg.k_isc_return);
        assert!((ss.population(Level::Excited) - p_e).abs() < 1e-13);
        assert!((ss.population(Level::Isc) - p_e * cfg.k_isc / cfg.k_isc_return).abs() < 1e-12);
        assert!((ss.populations.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn absorbing_shelf_is_reported() {
        let mut cfg = EmitterConfig::reference();
        cfg.k_isc = 0.05;
        let m = build_rate_matrix(&cfg, &ExcitationContext::cw(RED_NM, 10.0)).unwrap();
        match steady_state(&m, cfg.k_rad, 1e-3) {
            Err(Error::Numerical { matrix: Some(text), .. }) => assert!(text.contains("isc")),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn tilt_out_of_range_rejected() {
        let mut cfg = EmitterConfig::reference();
        cfg.tilt_phi_deg = 95.0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
