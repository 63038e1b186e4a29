use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use photonlab::cli::{
    cmd_fit, cmd_g2, cmd_lifetime, cmd_polarization, cmd_saturation, cmd_simulate, FitArgs, G2Args, LifetimeArgs,
    PipelineReport, SimulateArgs, SweepArgs, DEFAULT_DWELL_S, DEFAULT_IRF_SIGMA_NS, DEFAULT_TCSPC_BIN_PS,
};
use photonlab::fitting::ModelKind;

/// Single-emitter photophysics: simulate photon streams, correlate, fit.
#[derive(Parser)]
#[command(name = "photonlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a timestamp file from an experiment config.
    Simulate {
        config: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        duration: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coincidence histogram, g² normalization and optional antibunching fit.
    G2 {
        input: PathBuf,
        /// Bin width, ps.
        #[arg(long, default_value_t = 73.3)]
        bin: f64,
        /// Half-window, ns.
        #[arg(long, default_value_t = 20.0)]
        window: f64,
        #[arg(long)]
        fit: bool,
        /// Fixed IRF sigma, ns; fitted when absent.
        #[arg(long)]
        irf_sigma: Option<f64>,
    },
    /// TCSPC histogram against the sync channel and lifetime fit.
    Lifetime {
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TCSPC_BIN_PS)]
        bin: f64,
        #[arg(long, default_value_t = DEFAULT_IRF_SIGMA_NS)]
        irf_sigma: f64,
    },
    /// Power sweep and saturation fit.
    Saturation {
        config: PathBuf,
        /// Powers in µW, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        powers: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_DWELL_S)]
        dwell: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Polarizer-angle sweep and tilt fit.
    Polarization {
        config: PathBuf,
        /// Angles in degrees, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        angles: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_DWELL_S)]
        dwell: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit externally supplied data.
    Fit {
        kind: ModelKind,
        input: PathBuf,
        #[arg(long)]
        irf_sigma: Option<f64>,
        /// Lifetime repetition period, ns.
        #[arg(long)]
        period: Option<f64>,
        /// Spectrum components (1 to 4).
        #[arg(long, default_value_t = 2)]
        components: usize,
    },
}

fn run(cmd: Command) -> photonlab::Result<PipelineReport> {
    match cmd {
        Command::Simulate { config, duration, seed, out } => cmd_simulate(&SimulateArgs {
            config,
            duration_s: duration,
            seed,
            out,
        }),
        Command::G2 { input, bin, window, fit, irf_sigma } => cmd_g2(&G2Args {
            input,
            bin_ps: bin,
            window_ns: window,
            fit,
            irf_sigma_ns: irf_sigma,
        }),
        Command::Lifetime { input, bin, irf_sigma } => cmd_lifetime(&LifetimeArgs {
            input,
            bin_ps: bin,
            irf_sigma_ns: irf_sigma,
        }),
        Command::Saturation { config, powers, dwell, seed, out } => cmd_saturation(&SweepArgs {
            config,
            values: powers,
            dwell_s: dwell,
            seed,
            out,
        }),
        Command::Polarization { config, angles, dwell, seed, out } => cmd_polarization(&SweepArgs {
            config,
            values: angles,
            dwell_s: dwell,
            seed,
            out,
        }),
        Command::Fit { kind, input, irf_sigma, period, components } => cmd_fit(&FitArgs {
            kind,
            input,
            irf_sigma_ns: irf_sigma,
            period_ns: period,
            components,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
