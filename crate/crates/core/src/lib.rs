//! Photophysics workbench for a single molecular quantum emitter.
//!
//! The crate simulates photon timestamp streams from a three-level emitter
//! (ground, excited, shelving) and runs the standard single-emitter analysis
//! chain on them or on measured data:
//!
//! * [`kinetics`]: level scheme, excitation model, steady state.
//! * [`montecarlo`]: exact stochastic trajectories, HBT splitting and a
//!   detector model (efficiency, jitter, dead time, dark counts).
//! * [`correlator`]: coincidence and TCSPC histograms, g² normalization.
//! * [`fitting`]: IRF-convolved antibunching and lifetime models, saturation,
//!   polarization, Gaussian and multi-Gaussian fits on a damped
//!   Gauss-Newton solver.
//! * [`io`]: binary timestamp files, histogram CSV, experiment configs.
//! * [`cli`]: the pipelines behind the `photonlab` binary.

pub mod cli;
pub mod correlator;
pub mod error;
pub mod fitting;
pub mod io;
pub mod kinetics;
pub mod montecarlo;

pub use error::{Error, Result};
