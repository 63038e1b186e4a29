//! Model fitting: antibunching, lifetime, saturation, polarization, Gaussian
//! peaks and multi-Gaussian spectra.
//!
//! Every fitter builds a [`CurveModel`], derives a model-specific initial
//! guess and hands both to [`least_squares`]. Raw count histograms are
//! weighted `1/max(count, 1)`; normalized g², sweep points and spectra are
//! weighted uniformly.

mod g2;
mod lifetime;
pub mod lsq;
pub mod models;
mod peaks;
mod polarization;
mod saturation;
pub mod special;

use std::fmt;

pub use g2::{fit_g2, IrfSigma, SINGLE_EMITTER_THRESHOLD};
pub use lifetime::fit_lifetime;
pub use lsq::{least_squares, minimize, Bounds, LsqOptions, LsqSolution, StopReason};
pub use models::{
    model_g2_convolved, model_g2_ideal, CurveModel, G2Model, GaussianComponent, ModelKind, ParamSpec,
    PolarizationModel, SaturationModel, SpectrumModel,
};
pub use peaks::{fit_gaussian, fit_spectrum, fit_spectrum_points};
pub use polarization::fit_polarization;
pub use saturation::fit_saturation;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FittedParam {
    pub name: String,
    pub unit: String,
    pub value: f64,
    /// 1σ; infinite if the parameter is not identifiable from the data.
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: ModelKind,
    pub params: Vec<FittedParam>,
    /// Quantities computed from the optimum (g²(0), contrast, ...).
    pub derived: Vec<FittedParam>,
    pub rss: f64,
    pub n_points: usize,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub gradient_norm: f64,
    pub rank_deficient: bool,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn from_solution(model: &dyn CurveModel, sol: &LsqSolution) -> Self {
        let params = model
            .params()
            .iter()
            .zip(&sol.params)
            .zip(&sol.uncertainties)
            .map(|((spec, &value), &uncertainty)| FittedParam {
                name: spec.name.clone(),
                unit: spec.unit.clone(),
                value,
                uncertainty,
            })
            .collect();
        let mut warnings = Vec::new();
        if !sol.converged {
            warnings.push(format!(
                "optimizer did not converge (stop: {}, scaled gradient {:.3e})",
                sol.stop.as_str(),
                sol.gradient_norm
            ));
        }
        if sol.rank_deficient {
            warnings.push("rank-deficient Jacobian: some parameters are not identifiable".into());
        }
        FitResult {
            model: model.kind(),
            params,
            derived: Vec::new(),
            rss: sol.rss,
            n_points: model.n_points(),
            iterations: sol.iterations,
            converged: sol.converged,
            stop: sol.stop,
            gradient_norm: sol.gradient_norm,
            rank_deficient: sol.rank_deficient,
            warnings,
        }
    }

    pub fn param(&self, name: &str) -> Option<&FittedParam> {
        self.params.iter().chain(&self.derived).find(|p| p.name == name)
    }

    /// Value of a fitted or derived quantity.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.value)
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.uncertainty)
    }

    pub(crate) fn require(&self, name: &str) -> Result<f64> {
        self.value(name)
            .ok_or_else(|| Error::Precondition(format!("{} fit has no parameter {name:?}", self.model)))
    }

    pub(crate) fn push_derived(&mut self, name: &str, unit: &str, value: f64, uncertainty: f64) {
        self.derived.push(FittedParam {
            name: name.into(),
            unit: unit.into(),
            value,
            uncertainty,
        });
    }

    /// `Some(g²(0) < 0.5)` for antibunching fits.
    pub fn single_emitter(&self) -> Option<bool> {
        (self.model == ModelKind::G2)
            .then(|| self.value("g2_zero"))
            .flatten()
            .map(|g| g < SINGLE_EMITTER_THRESHOLD)
    }

    pub fn g2_model(&self) -> Result<G2Model> {
        Ok(G2Model {
            a: self.require("a")?,
            tau1_ns: self.require("tau1")?,
            sigma_irf_ns: self.require("sigma_irf")?,
        })
    }

    pub fn saturation_model(&self) -> Result<SaturationModel> {
        Ok(SaturationModel {
            c_inf_cps: self.require("c_inf")?,
            p_sat_uw: self.require("p_sat")?,
        })
    }

    pub fn polarization_model(&self) -> Result<PolarizationModel> {
        Ok(PolarizationModel {
            i0: self.require("i0")?,
            phi_deg: self.require("phi")?,
            theta0_deg: self.require("theta0")?,
        })
    }

    pub fn spectrum_model(&self) -> Result<SpectrumModel> {
        let mut components = Vec::new();
        for k in 1.. {
            let Some(amplitude) = self.value(&format!("amplitude_{k}")) else { break };
            components.push(GaussianComponent {
                amplitude,
                center: self.require(&format!("center_{k}"))?,
                width: self.require(&format!("width_{k}"))?,
            });
        }
        Ok(SpectrumModel {
            components,
            baseline: self.require("baseline")?,
        })
    }
}

impl fmt::Display for FitResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model = {}", self.model)?;
        writeln!(f, "converged = {}", self.converged)?;
        writeln!(f, "stop = {}", self.stop.as_str())?;
        writeln!(f, "iterations = {}", self.iterations)?;
        writeln!(f, "points = {}", self.n_points)?;
        writeln!(f, "rss = {:.9e}", self.rss)?;
        writeln!(f, "gradient = {:.3e}", self.gradient_norm)?;
        for (label, list) in [("param", &self.params), ("derived", &self.derived)] {
            for p in list {
                write!(f, "{label} {} = {:.9e} +/- {:.3e}", p.name, p.value, p.uncertainty)?;
                if p.unit.is_empty() {
                    writeln!(f)?;
                } else {
                    writeln!(f, " {}", p.unit)?;
                }
            }
        }
        if let Some(verdict) = self.single_emitter() {
            writeln!(
                f,
                "verdict = {}",
                if verdict { "single emitter" } else { "not a single emitter" }
            )?;
        }
        for w in &self.warnings {
            writeln!(f, "warning = {w}")?;
        }
        Ok(())
    }
}

/// `1/max(count, 1)` weights for raw counts.
pub(crate) fn poisson_weights(counts: &[f64]) -> Vec<f64> {
    counts.iter().map(|&c| 1.0 / c.max(1.0)).collect()
}

/// Scale from a histogram's axis unit to the unit its fits report in
/// (seconds to nanoseconds for time histograms).
pub(crate) fn axis_scale(kind: crate::correlator::HistogramKind) -> (f64, &'static str) {
    use crate::correlator::HistogramKind::*;
    match kind {
        Coincidence | Tcspc | Irf => (1e9, "ns"),
        Spectrum => (1.0, "nm"),
    }
}
