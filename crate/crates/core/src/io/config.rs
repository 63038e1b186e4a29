//! TOML experiment configuration.
//!
//! ```toml
//! [emitter]
//! k_rad_per_ns = 0.7874015748031495
//! k_nr_per_ns = { 658 = 0.0, 515 = 3.2125984251968505 }
//! k_isc_per_ns = 0.0
//! k_isc_return_per_ns = 0.0
//! tilt_phi_deg = 0.0
//! sigma_rel = { 658 = 1.0, 515 = 0.14285714285714285 }
//!
//! [excitation]
//! wavelength_nm = 658
//! power_uw = 300.0
//! pol_theta_deg = 0.0
//! mode = "cw"                 # or "pulsed" with period_ns and pulse_width_ps
//!
//! [detector]
//! efficiency = 3.3e-5
//! jitter_sigma_ns = 0.29
//! dead_time_ns = 22.0
//! dark_rate_cps = 0.0
//! background_rate_cps = 0.0
//!
//! [correlator]                # optional
//! bin_width_ps = 73.3
//! window_ns = 20.0
//! ```
//!
//! Optional keys: `emitter.excited_splitting_ev`,
//! `excitation.alpha_per_ns_per_uw` (power-to-rate calibration), and the
//! whole `[correlator]` section. Any other key is rejected. Errors carry the
//! line number of the offending key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::kinetics::{default_alpha, EmitterConfig, ExcitationContext, ExcitationMode, DEFAULT_EXCITED_SPLITTING_EV};
use crate::montecarlo::DetectorConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorConfig {
    pub bin_width_ps: f64,
    pub window_ns: f64,
}

impl Default for CorrelatorConfig {
    fn default() -> Self {
        CorrelatorConfig {
            bin_width_ps: 73.3,
            window_ns: 20.0,
        }
    }
}

impl CorrelatorConfig {
    pub fn bin_width_s(&self) -> f64 {
        self.bin_width_ps * 1e-12
    }

    pub fn window_s(&self) -> f64 {
        self.window_ns * 1e-9
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub emitter: EmitterConfig,
    pub excitation: ExcitationContext,
    pub detector: DetectorConfig,
    pub correlator: CorrelatorConfig,
}

impl ExperimentConfig {
    /// Canonical TOML rendering; parses back to an equal value.
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        let map = |m: &BTreeMap<u32, f64>| {
            m.iter().map(|(k, v)| format!("{k} = {v:?}")).collect::<Vec<_>>().join(", ")
        };
        let e = &self.emitter;
        let _ = writeln!(s, "[emitter]");
        let _ = writeln!(s, "k_rad_per_ns = {:?}", e.k_rad);
        let _ = writeln!(s, "k_nr_per_ns = {{ {} }}", map(&e.k_nr_by_wavelength));
        let _ = writeln!(s, "k_isc_per_ns = {:?}", e.k_isc);
        let _ = writeln!(s, "k_isc_return_per_ns = {:?}", e.k_isc_return);
        let _ = writeln!(s, "tilt_phi_deg = {:?}", e.tilt_phi_deg);
        let _ = writeln!(s, "sigma_rel = {{ {} }}", map(&e.sigma_rel_by_wavelength));
        let _ = writeln!(s, "excited_splitting_ev = {:?}", e.excited_splitting_ev);
        let x = &self.excitation;
        let _ = writeln!(s, "\n[excitation]");
        let _ = writeln!(s, "wavelength_nm = {}", x.wavelength_nm);
        let _ = writeln!(s, "power_uw = {:?}", x.power_uw);
        let _ = writeln!(s, "pol_theta_deg = {:?}", x.pol_theta_deg);
        let _ = writeln!(s, "alpha_per_ns_per_uw = {:?}", x.alpha);
        match x.mode {
            ExcitationMode::Cw => {
                let _ = writeln!(s, "mode = \"cw\"");
            }
            ExcitationMode::Pulsed {
                period_ns,
                pulse_width_ps,
            } => {
                let _ = writeln!(s, "mode = \"pulsed\"");
                let _ = writeln!(s, "period_ns = {period_ns:?}");
                let _ = writeln!(s, "pulse_width_ps = {pulse_width_ps:?}");
            }
        }
        let d = &self.detector;
        let _ = writeln!(s, "\n[detector]");
        let _ = writeln!(s, "efficiency = {:?}", d.efficiency);
        let _ = writeln!(s, "jitter_sigma_ns = {:?}", d.jitter_sigma_ns);
        let _ = writeln!(s, "dead_time_ns = {:?}", d.dead_time_ns);
        let _ = writeln!(s, "dark_rate_cps = {:?}", d.dark_rate_cps);
        let _ = writeln!(s, "background_rate_cps = {:?}", d.background_rate_cps);
        let _ = writeln!(s, "\n[correlator]");
        let _ = writeln!(s, "bin_width_ps = {:?}", self.correlator.bin_width_ps);
        let _ = writeln!(s, "window_ns = {:?}", self.correlator.window_ns);
        s
    }
}

type Num = Spanned<f64>;
type ByWavelength = Spanned<BTreeMap<String, Num>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    emitter: RawEmitter,
    excitation: RawExcitation,
    detector: RawDetector,
    correlator: Option<RawCorrelator>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmitter {
    k_rad_per_ns: Num,
    k_nr_per_ns: ByWavelength,
    k_isc_per_ns: Num,
    k_isc_return_per_ns: Num,
    tilt_phi_deg: Num,
    sigma_rel: ByWavelength,
    excited_splitting_ev: Option<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExcitation {
    wavelength_nm: Spanned<u32>,
    power_uw: Num,
    pol_theta_deg: Num,
    mode: Spanned<String>,
    period_ns: Option<Num>,
    pulse_width_ps: Option<Num>,
    alpha_per_ns_per_uw: Option<Num>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    efficiency: Num,
    jitter_sigma_ns: Num,
    dead_time_ns: Num,
    dark_rate_cps: Num,
    background_rate_cps: Num,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCorrelator {
    bin_width_ps: Num,
    window_ns: Num,
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    fn err(&self, span: Range<usize>, msg: impl std::fmt::Display) -> Error {
        Error::Config(format!("line {}: {msg}", self.line(span)))
    }

    fn section_err(&self, section: &str, msg: impl std::fmt::Display) -> Error {
        let header = format!("[{section}]");
        match self.text.find(&header) {
            Some(at) => self.err(at..at, msg),
            None => Error::Config(msg.to_string()),
        }
    }

    fn check(&self, v: &Num, key: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<f64> {
        let x = *v.get_ref();
        if x.is_finite() && ok(x) {
            Ok(x)
        } else {
            Err(self.err(v.span(), format!("{key} must be {rule}, got {x}")))
        }
    }

    fn non_negative(&self, v: &Num, key: &str) -> Result<f64> {
        self.check(v, key, |x| x >= 0.0, ">= 0")
    }

    fn positive(&self, v: &Num, key: &str) -> Result<f64> {
        self.check(v, key, |x| x > 0.0, "> 0")
    }

    fn by_wavelength(&self, m: &ByWavelength, key: &str) -> Result<BTreeMap<u32, f64>> {
        let mut out = BTreeMap::new();
        for (k, v) in m.get_ref() {
            let wl: u32 = k
                .parse()
                .map_err(|_| self.err(m.span(), format!("{key}: wavelength key {k:?} is not an integer (nm)")))?;
            out.insert(wl, self.non_negative(v, &format!("{key}.{k}"))?);
        }
        Ok(out)
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let c = Checker { text };
    let raw: RawConfig = toml::from_str(text).map_err(|e| match e.span() {
        Some(span) => c.err(span, e.message()),
        None => Error::Config(e.message().to_string()),
    })?;

    let e = &raw.emitter;
    let emitter = EmitterConfig {
        k_rad: c.positive(&e.k_rad_per_ns, "k_rad_per_ns")?,
        k_nr_by_wavelength: c.by_wavelength(&e.k_nr_per_ns, "k_nr_per_ns")?,
        k_isc: c.non_negative(&e.k_isc_per_ns, "k_isc_per_ns")?,
        k_isc_return: c.non_negative(&e.k_isc_return_per_ns, "k_isc_return_per_ns")?,
        tilt_phi_deg: c.check(&e.tilt_phi_deg, "tilt_phi_deg", |x| (0.0..=90.0).contains(&x), "in [0, 90]")?,
        sigma_rel_by_wavelength: c.by_wavelength(&e.sigma_rel, "sigma_rel")?,
        excited_splitting_ev: match &e.excited_splitting_ev {
            Some(v) => c.non_negative(v, "excited_splitting_ev")?,
            None => DEFAULT_EXCITED_SPLITTING_EV,
        },
    };
    if emitter.k_isc > 0.0 && emitter.k_isc_return == 0.0 {
        return Err(c.err(
            e.k_isc_return_per_ns.span(),
            "k_isc_return_per_ns must be > 0 when k_isc_per_ns > 0 (the shelving level would be absorbing)",
        ));
    }
    emitter.validate().map_err(|err| c.section_err("emitter", err))?;

    let x = &raw.excitation;
    let wl = *x.wavelength_nm.get_ref();
    for (key, map) in [("k_nr_per_ns", &emitter.k_nr_by_wavelength), ("sigma_rel", &emitter.sigma_rel_by_wavelength)] {
        if !map.contains_key(&wl) {
            return Err(c.err(x.wavelength_nm.span(), format!("emitter.{key} has no entry for {wl} nm")));
        }
    }
    let mode = match x.mode.get_ref().as_str() {
        "cw" => {
            for (key, v) in [("period_ns", &x.period_ns), ("pulse_width_ps", &x.pulse_width_ps)] {
                if let Some(v) = v {
                    return Err(c.err(v.span(), format!("{key} is only valid with mode = \"pulsed\"")));
                }
            }
            ExcitationMode::Cw
        }
        "pulsed" => {
            let need = |v: &Option<Num>, key: &str| -> Result<f64> {
                match v {
                    Some(v) => c.positive(v, key),
                    None => Err(c.err(x.mode.span(), format!("mode = \"pulsed\" requires {key}"))),
                }
            };
            ExcitationMode::Pulsed {
                period_ns: need(&x.period_ns, "period_ns")?,
                pulse_width_ps: need(&x.pulse_width_ps, "pulse_width_ps")?,
            }
        }
        other => return Err(c.err(x.mode.span(), format!("mode must be \"cw\" or \"pulsed\", got {other:?}"))),
    };
    let excitation = ExcitationContext {
        wavelength_nm: wl,
        power_uw: c.non_negative(&x.power_uw, "power_uw")?,
        pol_theta_deg: c.check(&x.pol_theta_deg, "pol_theta_deg", |_| true, "finite")?,
        mode,
        alpha: match &x.alpha_per_ns_per_uw {
            Some(v) => c.non_negative(v, "alpha_per_ns_per_uw")?,
            None => default_alpha(),
        },
    };
    excitation.validate().map_err(|err| c.section_err("excitation", err))?;

    let d = &raw.detector;
    let detector = DetectorConfig {
        efficiency: c.check(&d.efficiency, "efficiency", |v| (0.0..=1.0).contains(&v), "in [0, 1]")?,
        jitter_sigma_ns: c.non_negative(&d.jitter_sigma_ns, "jitter_sigma_ns")?,
        dead_time_ns: c.non_negative(&d.dead_time_ns, "dead_time_ns")?,
        dark_rate_cps: c.non_negative(&d.dark_rate_cps, "dark_rate_cps")?,
        background_rate_cps: c.non_negative(&d.background_rate_cps, "background_rate_cps")?,
    };

    let correlator = match &raw.correlator {
        Some(r) => {
            let bin_width_ps = c.positive(&r.bin_width_ps, "bin_width_ps")?;
            let window_ns = c.positive(&r.window_ns, "window_ns")?;
            if window_ns * 1e3 <= bin_width_ps {
                return Err(c.err(r.window_ns.span(), "window_ns must exceed bin_width_ps"));
            }
            CorrelatorConfig {
                bin_width_ps,
                window_ns,
            }
        }
        None => CorrelatorConfig::default(),
    };

    Ok(ExperimentConfig {
        emitter,
        excitation,
        detector,
        correlator,
    })
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig> {
    parse_config(&super::read_text(path)?).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}
