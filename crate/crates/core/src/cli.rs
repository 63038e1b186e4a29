//! Pipelines behind the `photonlab` binary. Each `cmd_*` function writes its
//! output files, saves its report next to them and returns the report.
//!
//! Sweep point `i` is simulated with seed `seed + i`; the dark reference
//! (power 0, same dwell) uses `seed + n` for an `n`-point sweep.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::correlator::{coincidence_histogram, tcspc_histogram, Histogram};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_g2, fit_gaussian, fit_lifetime, fit_polarization, fit_saturation, fit_spectrum_points, FitResult, IrfSigma,
    ModelKind,
};
use crate::io::{
    read_config, read_histogram_csv, read_points, read_timestamps, write_histogram_csv, write_points,
    write_timestamps, ExperimentConfig, PointColumns,
};
use crate::kinetics::{build_rate_matrix, steady_state, ExcitationMode};
use crate::montecarlo::{acquire, TimestampStream, SYNC_CHANNEL, TCSPC_PHOTON_CHANNEL};

/// Default IRF width for lifetime fits, ns.
pub const DEFAULT_IRF_SIGMA_NS: f64 = 0.41;
/// Default TCSPC bin, ps.
pub const DEFAULT_TCSPC_BIN_PS: f64 = 50.0;
/// Default dwell per sweep point, s.
pub const DEFAULT_DWELL_S: f64 = 20.0;

/// What a pipeline did: inputs, per-stage numbers, the fit and the files written.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub command: String,
    pub config_hash: Option<String>,
    pub seed: Option<u64>,
    /// Ordered `(key, value)` lines, keys prefixed by stage.
    pub entries: Vec<(String, String)>,
    pub fit: Option<FitResult>,
    pub outputs: Vec<PathBuf>,
}

impl PipelineReport {
    fn new(command: &str) -> Self {
        PipelineReport {
            command: command.into(),
            config_hash: None,
            seed: None,
            entries: Vec::new(),
            fit: None,
            outputs: Vec::new(),
        }
    }

    fn add(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Parsed numeric entry.
    pub fn number(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    /// `Some(g²(0) < 0.5)` when an antibunching fit ran.
    pub fn single_emitter(&self) -> Option<bool> {
        self.fit.as_ref()?.single_emitter()
    }

    fn save(&mut self, path: PathBuf) -> Result<()> {
        self.outputs.push(path.clone());
        crate::io::write_file(&path, self.to_string().as_bytes())
    }
}

impl fmt::Display for PipelineReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "command = {}", self.command)?;
        if let Some(h) = &self.config_hash {
            writeln!(f, "config_hash = {h}")?;
        }
        if let Some(s) = self.seed {
            writeln!(f, "seed = {s}")?;
        }
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        if let Some(fit) = &self.fit {
            writeln!(f, "[fit]")?;
            write!(f, "{fit}")?;
        }
        for p in &self.outputs {
            writeln!(f, "output = {}", p.display())?;
        }
        Ok(())
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn sci(v: f64) -> String {
    format!("{v:.9e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateArgs {
    pub config: PathBuf,
    pub duration_s: f64,
    pub seed: u64,
    pub out: PathBuf,
}

/// Simulates the configured experiment (HBT pair under CW, sync + detector
/// under pulsed excitation) and writes the timestamp file.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<PipelineReport> {
    if !(args.duration_s.is_finite() && args.duration_s > 0.0) {
        return Err(Error::Usage(format!("--duration must be > 0 s, got {}", args.duration_s)));
    }
    let cfg = read_config(&args.config)?;
    let stream = acquire(&cfg.emitter, &cfg.excitation, &cfg.detector, args.duration_s, args.seed)?;
    write_timestamps(&stream, &args.out)?;

    let mut r = PipelineReport::new("simulate");
    r.config_hash = Some(stream.provenance.hash_hex());
    r.seed = Some(args.seed);
    r.add("config", args.config.display());
    r.add("duration_s", args.duration_s);
    r.add(
        "mode",
        match cfg.excitation.mode {
            ExcitationMode::Cw => "cw",
            ExcitationMode::Pulsed { .. } => "pulsed",
        },
    );
    r.add("power_uw", cfg.excitation.power_uw);
    if cfg.excitation.mode == ExcitationMode::Cw {
        let ss = steady_state(&build_rate_matrix(&cfg.emitter, &cfg.excitation)?, cfg.emitter.k_rad, cfg.detector.efficiency)?;
        r.add("predicted_total_cps", sci(ss.detected_rate_cps));
    }
    for id in 0..stream.n_channels() as u8 {
        r.add(&format!("channel{id}.events"), stream.count(id));
        r.add(&format!("channel{id}.rate_cps"), sci(stream.rate_cps(id)));
    }
    r.outputs.push(args.out.clone());
    r.save(with_suffix(&args.out, ".report.txt"))?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct G2Args {
    pub input: PathBuf,
    pub bin_ps: f64,
    pub window_ns: f64,
    pub fit: bool,
    /// Fixed IRF width; `None` fits it.
    pub irf_sigma_ns: Option<f64>,
}

/// Correlates channels 0 and 1, writes the raw (`<in>.coinc.csv`) and
/// normalized (`<in>.g2.csv`) histograms and optionally fits antibunching.
pub fn cmd_g2(args: &G2Args) -> Result<PipelineReport> {
    if !(args.bin_ps.is_finite() && args.bin_ps > 0.0) {
        return Err(Error::Usage(format!("--bin must be > 0 ps, got {}", args.bin_ps)));
    }
    if !(args.window_ns.is_finite() && args.window_ns * 1e3 > args.bin_ps) {
        return Err(Error::Usage(format!("--window ({} ns) must exceed --bin ({} ps)", args.window_ns, args.bin_ps)));
    }
    let stream = read_timestamps(&args.input)?;
    if stream.n_channels() < 2 {
        return Err(Error::Usage(format!(
            "{} has {} channel(s); g2 needs two",
            args.input.display(),
            stream.n_channels()
        )));
    }
    let (h, g2) = correlate(&stream, args.bin_ps * 1e-12, args.window_ns * 1e-9)?;
    let raw_path = with_suffix(&args.input, ".coinc.csv");
    let g2_path = with_suffix(&args.input, ".g2.csv");
    write_histogram_csv(&h, &raw_path)?;
    write_histogram_csv(&g2, &g2_path)?;

    let mut r = PipelineReport::new("g2");
    r.config_hash = Some(stream.provenance.hash_hex());
    r.seed = Some(stream.provenance.seed);
    r.add("input", args.input.display());
    r.add("correlate.bin_width_s", format!("{:e}", h.bin_width));
    r.add("correlate.window_s", format!("{:e}", args.window_ns * 1e-9));
    r.add("correlate.T_s", sci(h.duration_s));
    r.add("correlate.N1_cps", sci(h.n1_cps));
    r.add("correlate.N2_cps", sci(h.n2_cps));
    r.add("correlate.coincidences", h.total());
    let v = g2.values();
    let mid = v.len() / 2;
    r.add("normalize.g2_central_bins", sci(0.5 * (v[mid - 1] + v[mid])));
    if args.fit {
        let sigma = args.irf_sigma_ns.map_or(IrfSigma::Free, IrfSigma::Fixed);
        let fit = fit_g2(&g2, sigma)?;
        r.add("fit.g2_zero", sci(fit.value("g2_zero").unwrap_or(f64::NAN)));
        r.add(
            "verdict",
            if fit.single_emitter() == Some(true) { "single emitter" } else { "not a single emitter" },
        );
        r.fit = Some(fit);
    }
    r.outputs.extend([raw_path, g2_path]);
    r.save(with_suffix(&args.input, ".g2.report.txt"))?;
    Ok(r)
}

/// Raw coincidences between channels 0 and 1 with acquisition metadata,
/// and their normalization.
pub fn correlate(stream: &TimestampStream, bin_s: f64, window_s: f64) -> Result<(Histogram, Histogram)> {
    let h = coincidence_histogram(stream.channel(0)?, stream.channel(1)?, bin_s, window_s)?.with_acquisition(
        stream.duration_s(),
        stream.rate_cps(0),
        stream.rate_cps(1),
    );
    let g2 = h.normalized_g2()?;
    Ok((h, g2))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeArgs {
    pub input: PathBuf,
    pub bin_ps: f64,
    pub irf_sigma_ns: f64,
}

/// TCSPC histogram of channel 1 against the sync on channel 0 and an
/// IRF-convolved exponential fit. The period is the median sync spacing.
pub fn cmd_lifetime(args: &LifetimeArgs) -> Result<PipelineReport> {
    if !(args.bin_ps.is_finite() && args.bin_ps > 0.0) {
        return Err(Error::Usage(format!("--bin must be > 0 ps, got {}", args.bin_ps)));
    }
    let stream = read_timestamps(&args.input)?;
    if stream.n_channels() < 2 {
        return Err(Error::Usage(format!(
            "{} has no sync channel (needs sync on channel {SYNC_CHANNEL}, photons on channel {TCSPC_PHOTON_CHANNEL})",
            args.input.display()
        )));
    }
    let syncs = stream.channel(SYNC_CHANNEL)?;
    let photons = stream.channel(TCSPC_PHOTON_CHANNEL)?;
    let period_s = sync_period_s(syncs).ok_or_else(|| {
        Error::Usage(format!("{}: fewer than two sync events on channel {SYNC_CHANNEL}", args.input.display()))
    })?;
    let t = tcspc_histogram(photons, syncs, period_s, args.bin_ps * 1e-12)?;
    let h = t
        .histogram
        .with_acquisition(stream.duration_s(), stream.rate_cps(TCSPC_PHOTON_CHANNEL), stream.rate_cps(SYNC_CHANNEL));
    let path = with_suffix(&args.input, ".tcspc.csv");
    write_histogram_csv(&h, &path)?;

    let mut r = PipelineReport::new("lifetime");
    r.config_hash = Some(stream.provenance.hash_hex());
    r.seed = Some(stream.provenance.seed);
    r.add("input", args.input.display());
    r.add("tcspc.period_s", format!("{period_s:e}"));
    r.add("tcspc.bin_width_s", format!("{:e}", h.bin_width));
    r.add("tcspc.binned", h.total());
    r.add("tcspc.discarded", t.discarded);
    if h.total() == 0.0 {
        return Err(Error::Precondition("no photons binned".into()));
    }
    let fit = fit_lifetime(&h, args.irf_sigma_ns, Some(period_s))?;
    r.add("fit.tau_ns", sci(fit.value("tau").unwrap_or(f64::NAN)));
    r.fit = Some(fit);
    r.outputs.push(path);
    r.save(with_suffix(&args.input, ".lifetime.report.txt"))?;
    Ok(r)
}

fn sync_period_s(syncs: &[u64]) -> Option<f64> {
    let mut gaps: Vec<u64> = syncs.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_unstable();
    Some(gaps[gaps.len() / 2] as f64 * 1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepArgs {
    pub config: PathBuf,
    /// Powers (µW) for saturation, polarizer angles (deg) for polarization.
    pub values: Vec<f64>,
    pub dwell_s: f64,
    pub seed: u64,
    /// Output CSV; defaults to `<config>.saturation.csv` / `<config>.polarization.csv`.
    pub out: Option<PathBuf>,
}

/// Background-subtracted detected rate at each sweep point.
struct Sweep {
    rates: Vec<f64>,
    dark_cps: f64,
    config_hash: String,
}

fn run_sweep(
    cfg: &ExperimentConfig,
    args: &SweepArgs,
    set: impl Fn(&mut ExperimentConfig, f64) + Sync,
) -> Result<Sweep> {
    if !(args.dwell_s.is_finite() && args.dwell_s > 0.0) {
        return Err(Error::Usage(format!("--dwell must be > 0 s, got {}", args.dwell_s)));
    }
    let n = args.values.len();
    let rate = |c: &ExperimentConfig, seed: u64| -> Result<(f64, String)> {
        let s = acquire(&c.emitter, &c.excitation, &c.detector, args.dwell_s, seed)?;
        let events = match c.excitation.mode {
            ExcitationMode::Cw => s.total_events(),
            ExcitationMode::Pulsed { .. } => s.count(TCSPC_PHOTON_CHANNEL),
        };
        Ok((events as f64 / s.duration_s(), s.provenance.hash_hex()))
    };
    let points: Vec<(f64, String)> = args
        .values
        .par_iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut c = cfg.clone();
            set(&mut c, v);
            rate(&c, args.seed + i as u64)
        })
        .collect::<Result<_>>()?;
    let mut dark = cfg.clone();
    dark.excitation.power_uw = 0.0;
    let (dark_cps, _) = rate(&dark, args.seed + n as u64)?;
    Ok(Sweep {
        rates: points.iter().map(|(r, _)| r - dark_cps).collect(),
        dark_cps,
        config_hash: crate::montecarlo::Provenance::of(&(&cfg, &args.values, args.dwell_s.to_bits()), args.seed)
            .hash_hex(),
    })
}

/// Saturation sweep over `values` (µW) with a `C∞·P/(P + P_sat)` fit.
pub fn cmd_saturation(args: &SweepArgs) -> Result<PipelineReport> {
    let mut distinct = args.values.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Usage(format!("--powers needs at least 3 distinct values, got {}", distinct.len())));
    }
    let cfg = read_config(&args.config)?;
    let sweep = run_sweep(&cfg, args, |c, p| c.excitation.power_uw = p)?;
    let fit = fit_saturation(&args.values, &sweep.rates)?;

    let out = args.out.clone().unwrap_or_else(|| with_suffix(&args.config, ".saturation.csv"));
    write_points(
        &out,
        PointColumns::Saturation,
        &args.values,
        &sweep.rates,
        &[("dark_cps", sci(sweep.dark_cps)), ("dwell_s", args.dwell_s.to_string()), ("seed", args.seed.to_string())],
    )?;
    let mut r = PipelineReport::new("saturation");
    r.config_hash = Some(sweep.config_hash);
    r.seed = Some(args.seed);
    r.add("config", args.config.display());
    r.add("sweep.points", args.values.len());
    r.add("sweep.dwell_s", args.dwell_s);
    r.add("sweep.dark_cps", sci(sweep.dark_cps));
    r.add("fit.c_inf_cps", sci(fit.value("c_inf").unwrap_or(f64::NAN)));
    r.add("fit.p_sat_uw", sci(fit.value("p_sat").unwrap_or(f64::NAN)));
    r.fit = Some(fit);
    r.outputs.push(out.clone());
    r.save(with_suffix(&out, ".report.txt"))?;
    Ok(r)
}

/// Polarization sweep over `values` (deg) with a `1 − sin²φ·sin²(θ − θ₀)` fit.
pub fn cmd_polarization(args: &SweepArgs) -> Result<PipelineReport> {
    if args.values.len() < 4 {
        return Err(Error::Usage(format!("--angles needs at least 4 values, got {}", args.values.len())));
    }
    let cfg = read_config(&args.config)?;
    let sweep = run_sweep(&cfg, args, |c, a| c.excitation.pol_theta_deg = a)?;
    let fit = fit_polarization(&args.values, &sweep.rates)?;

    let out = args.out.clone().unwrap_or_else(|| with_suffix(&args.config, ".polarization.csv"));
    write_points(
        &out,
        PointColumns::Polarization,
        &args.values,
        &sweep.rates,
        &[("dark_cps", sci(sweep.dark_cps)), ("dwell_s", args.dwell_s.to_string()), ("seed", args.seed.to_string())],
    )?;
    let mut r = PipelineReport::new("polarization");
    r.config_hash = Some(sweep.config_hash);
    r.seed = Some(args.seed);
    r.add("config", args.config.display());
    r.add("sweep.points", args.values.len());
    r.add("sweep.dwell_s", args.dwell_s);
    r.add("sweep.dark_cps", sci(sweep.dark_cps));
    r.add("fit.phi_deg", sci(fit.value("phi").unwrap_or(f64::NAN)));
    r.add("fit.min_max_ratio", sci(fit.value("min_max_ratio").unwrap_or(f64::NAN)));
    if let Some(v) = fit.value("data_min_max_ratio") {
        r.add("data.min_max_ratio", sci(v));
    }
    if fit.warnings.iter().any(|w| w.starts_with("low contrast")) {
        r.add("flag", "low contrast");
    }
    r.fit = Some(fit);
    r.outputs.push(out.clone());
    r.save(with_suffix(&out, ".report.txt"))?;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitArgs {
    pub kind: ModelKind,
    pub input: PathBuf,
    /// g2: fixed IRF width (free if absent). lifetime: IRF width (default 0.41 ns).
    pub irf_sigma_ns: Option<f64>,
    /// lifetime: repetition period; defaults to 1/N2 from the histogram metadata.
    pub period_ns: Option<f64>,
    /// spectrum: number of Gaussian components.
    pub components: usize,
}

/// Fits externally supplied data. Histogram kinds (g2, lifetime, gaussian)
/// read histogram CSV; sweeps and spectra read point CSV.
pub fn cmd_fit(args: &FitArgs) -> Result<PipelineReport> {
    let fit = match args.kind {
        ModelKind::G2 => {
            let h = read_histogram_csv(&args.input)?;
            fit_g2(&h, args.irf_sigma_ns.map_or(IrfSigma::Free, IrfSigma::Fixed))?
        }
        ModelKind::Lifetime => {
            let h = read_histogram_csv(&args.input)?;
            let period_s = match args.period_ns {
                Some(p) => Some(p * 1e-9),
                None => (h.n2_cps > 0.0).then(|| 1.0 / h.n2_cps),
            };
            fit_lifetime(&h, args.irf_sigma_ns.unwrap_or(DEFAULT_IRF_SIGMA_NS), period_s)?
        }
        ModelKind::Gaussian => fit_gaussian(&read_histogram_csv(&args.input)?)?,
        ModelKind::Saturation => {
            let (p, c) = read_points(&args.input, PointColumns::Saturation)?;
            fit_saturation(&p, &c)?
        }
        ModelKind::Polarization => {
            let (a, i) = read_points(&args.input, PointColumns::Polarization)?;
            fit_polarization(&a, &i)?
        }
        ModelKind::Spectrum => {
            let (x, y) = read_points(&args.input, PointColumns::Spectrum)?;
            fit_spectrum_points(&x, &y, args.components)?
        }
    };
    let mut r = PipelineReport::new("fit");
    r.add("kind", args.kind);
    r.add("input", args.input.display());
    r.fit = Some(fit);
    Ok(r)
}
