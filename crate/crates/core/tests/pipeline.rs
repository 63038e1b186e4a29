use std::path::{Path, PathBuf};
use std::process::Command;

use photonlab::cli::*;
use photonlab::fitting::{model_g2_convolved, G2Model, ModelKind, SaturationModel};
use photonlab::io::{read_timestamps, write_points, write_timestamps, ExperimentConfig, PointColumns};
use photonlab::kinetics::default_alpha;
use photonlab::montecarlo::{Provenance, TimestampStream};
use photonlab::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, name: &str, edit: impl FnOnce(&mut ExperimentConfig)) -> PathBuf {
    let mut cfg = photonlab::io::read_config(&config("reference_red_cw.toml")).unwrap();
    edit(&mut cfg);
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

fn simulate(cfg: &Path, duration_s: f64, seed: u64, out: &Path) -> PipelineReport {
    cmd_simulate(&SimulateArgs {
        config: cfg.to_path_buf(),
        duration_s,
        seed,
        out: out.to_path_buf(),
    })
    .unwrap()
}

fn g2(input: &Path, irf: Option<f64>) -> photonlab::Result<PipelineReport> {
    cmd_g2(&G2Args {
        input: input.to_path_buf(),
        bin_ps: 73.3,
        window_ns: 20.0,
        fit: true,
        irf_sigma_ns: irf,
    })
}

fn antibunching_round_trip(power_uw: f64, efficiency: f64, duration_s: f64) -> (f64, f64, f64, f64, bool) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bright.toml", |c| {
        c.excitation.power_uw = power_uw;
        c.detector.efficiency = efficiency;
    });
    let file = dir.path().join("bright.phts");
    simulate(&cfg, duration_s, 5, &file);
    let r = g2(&file, Some(0.41)).unwrap();
    let fit = r.fit.as_ref().unwrap();
    let tau_expected = 1.0 / (default_alpha() * power_uw + 1.0 / 1.27);
    let g0_expected = model_g2_convolved(
        0.0,
        &G2Model {
            a: 1.0,
            tau1_ns: tau_expected,
            sigma_irf_ns: 0.41,
        },
    );
    (
        fit.value("tau1").unwrap(),
        tau_expected,
        fit.value("g2_zero").unwrap(),
        g0_expected,
        r.single_emitter() == Some(true),
    )
}

#[test]
fn antibunching_round_trip_at_low_power() {
    let (tau, tau_expected, g0, g0_expected, single) = antibunching_round_trip(10.0, 0.01, 60.0);
    assert!((tau / tau_expected - 1.0).abs() < 0.10, "tau1 {tau} vs {tau_expected}");
    assert!((tau / 1.27 - 1.0).abs() < 0.10, "tau1 {tau}");
    assert!((g0 - g0_expected).abs() < 0.05 && (g0 - 0.215).abs() < 0.05, "g2(0) {g0} vs {g0_expected}");
    assert!(single);
}

#[test]
fn antibunching_round_trip_at_reference_power() {
    let (tau, tau_expected, g0, g0_expected, single) = antibunching_round_trip(300.0, 3.3e-3, 30.0);
    assert!((tau_expected - 0.576).abs() < 1e-3);
    assert!((tau / tau_expected - 1.0).abs() < 0.10, "tau1 {tau} vs {tau_expected}");
    assert!((g0 - g0_expected).abs() < 0.05, "g2(0) {g0} vs {g0_expected}");
    assert!(single);
}

#[test]
fn reference_arm_rates_match_steady_state() {
    let dir = tempfile::tempdir().unwrap();
    let r = simulate(&config("reference_red_cw.toml"), 20.0, 1, &dir.path().join("ref.phts"));
    let total = r.number("predicted_total_cps").unwrap();
    assert!((total - 14_199.0).abs() < 1.0, "{r}");
    for ch in ["channel0.rate_cps", "channel1.rate_cps"] {
        let rate = r.number(ch).unwrap();
        let sigma = (total / 2.0 / 20.0).sqrt();
        assert!((rate - total / 2.0).abs() < 4.0 * sigma, "{ch} {rate}");
    }
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("reference_red_cw.toml");
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    simulate(&cfg, 5.0, 1, &a);
    simulate(&cfg, 5.0, 1, &b);
    simulate(&cfg, 5.0, 2, &c);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn zero_power_gives_only_dark_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dark.toml", |c| {
        c.excitation.power_uw = 0.0;
        c.detector.dark_rate_cps = 200.0;
    });
    let out = dir.path().join("dark.phts");
    let r = simulate(&cfg, 10.0, 3, &out);
    assert_eq!(r.number("predicted_total_cps"), Some(0.0));
    let s = read_timestamps(&out).unwrap();
    for ch in 0..2 {
        let n = s.count(ch) as f64;
        assert!((n - 2000.0).abs() < 5.0 * 2000f64.sqrt(), "channel {ch}: {n}");
    }
}

#[test]
fn config_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("reference_red_cw.toml"))
        .unwrap()
        .replace("power_uw = 300.0", "power_uw = -5.0");
    let line = text.lines().position(|l| l.starts_with("power_uw")).unwrap() + 1;
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, text).unwrap();
    let err = cmd_simulate(&SimulateArgs {
        config: path,
        duration_s: 1.0,
        seed: 1,
        out: dir.path().join("x"),
    })
    .unwrap_err();
    assert!(err.to_string().contains(&format!("line {line}")), "{err}");
    assert_eq!(err.exit_code(), 2);
}

fn poisson_pair(rate: f64, duration_s: f64, seed: u64) -> TimestampStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let duration_ps = (duration_s * 1e12) as u64;
    let n = (rate * duration_s) as usize;
    let mut channels = Vec::new();
    for _ in 0..2 {
        let mut v: Vec<u64> = (0..n).map(|_| rng.random_range(0..duration_ps)).collect();
        v.sort_unstable();
        v.dedup();
        channels.push(v);
    }
    TimestampStream {
        channels,
        duration_ps,
        provenance: Provenance::of("poisson", seed),
    }
}

#[test]
fn independent_channels_are_not_a_single_emitter() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("poisson.phts");
    write_timestamps(&poisson_pair(50e3, 200.0, 7), &file).unwrap();
    let r = g2(&file, Some(0.41)).unwrap();
    assert_eq!(r.single_emitter(), Some(false), "{r}");
    assert_eq!(r.get("verdict"), Some("not a single emitter"));
    let g2_csv = photonlab::io::read_histogram_csv(&dir.path().join("poisson.phts.g2.csv")).unwrap();
    let v = g2_csv.values();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!((mean - 1.0).abs() < 0.03, "{mean}");
}

#[test]
fn g2_argument_errors() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.phts");
    write_timestamps(&poisson_pair(1e3, 1.0, 1), &file).unwrap();
    let zero_bin = cmd_g2(&G2Args {
        input: file.clone(),
        bin_ps: 0.0,
        window_ns: 20.0,
        fit: false,
        irf_sigma_ns: None,
    })
    .unwrap_err();
    assert!(matches!(zero_bin, Error::Usage(_)), "{zero_bin}");
    assert_eq!(zero_bin.exit_code(), 1);

    let single = dir.path().join("single.phts");
    let mut s = poisson_pair(1e3, 1.0, 1);
    s.channels.truncate(1);
    write_timestamps(&s, &single).unwrap();
    assert!(matches!(g2(&single, None), Err(Error::Usage(_))));
}

#[test]
fn lifetime_needs_sync_and_photons() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = poisson_pair(1e3, 1.0, 1);
    s.channels.truncate(1);
    let no_sync = dir.path().join("nosync.phts");
    write_timestamps(&s, &no_sync).unwrap();
    let args = |input: PathBuf| LifetimeArgs {
        input,
        bin_ps: 50.0,
        irf_sigma_ns: 0.41,
    };
    assert!(matches!(cmd_lifetime(&args(no_sync)), Err(Error::Usage(_))));

    let syncs: Vec<u64> = (0..1000).map(|k| k * 20_000).collect();
    let empty = TimestampStream {
        channels: vec![syncs, Vec::new()],
        duration_ps: 20_000_000,
        provenance: Provenance::of("empty", 0),
    };
    let path = dir.path().join("empty.phts");
    write_timestamps(&empty, &path).unwrap();
    let err = cmd_lifetime(&args(path)).unwrap_err();
    assert!(err.to_string().contains("no photons binned"), "{err}");
}

#[test]
fn sweep_argument_errors() {
    let sweep = |values: Vec<f64>, dwell_s: f64| SweepArgs {
        config: config("reference_red_cw.toml"),
        values,
        dwell_s,
        seed: 1,
        out: None,
    };
    assert!(matches!(cmd_saturation(&sweep(vec![10.0, 100.0], 1.0)), Err(Error::Usage(_))));
    assert!(matches!(cmd_saturation(&sweep(vec![10.0, 100.0, 300.0], 0.0)), Err(Error::Usage(_))));
    assert!(matches!(cmd_polarization(&sweep(vec![0.0, 90.0, 180.0], 1.0)), Err(Error::Usage(_))));
}

#[test]
fn flat_molecule_is_flagged_low_contrast() {
    let dir = tempfile::tempdir().unwrap();
    let r = cmd_polarization(&SweepArgs {
        config: config("polarization_flat.toml"),
        values: (0..24).map(|k| 15.0 * k as f64).collect(),
        dwell_s: 20.0,
        seed: 3,
        out: Some(dir.path().join("flat.csv")),
    })
    .unwrap();
    assert_eq!(r.get("flag"), Some("low contrast"), "{r}");
    assert!(r.number("fit.phi_deg").unwrap() < 10.0);
}

#[test]
fn sweep_points_are_ordered_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let out = dir.path().join(out);
        cmd_saturation(&SweepArgs {
            config: config("reference_red_cw.toml"),
            values: vec![1000.0, 25.0, 300.0, 100.0],
            dwell_s: 2.0,
            seed: 11,
            out: Some(out.clone()),
        })
        .unwrap();
        std::fs::read_to_string(out).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    assert_eq!(a, b);
    let powers: Vec<f64> = a
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(powers, [1000.0, 25.0, 300.0, 100.0]);
}

fn fit(kind: ModelKind, input: PathBuf, components: usize) -> photonlab::Result<PipelineReport> {
    cmd_fit(&FitArgs {
        kind,
        input,
        irf_sigma_ns: None,
        period_ns: None,
        components,
    })
}

#[test]
fn fit_exact_saturation_points() {
    let dir = tempfile::tempdir().unwrap();
    let m = SaturationModel {
        c_inf_cps: 26e3,
        p_sat_uw: 249.0,
    };
    let p = [25.0, 50.0, 100.0, 200.0, 300.0, 500.0, 750.0, 1000.0];
    let c: Vec<f64> = p.iter().map(|&x| m.eval(x)).collect();
    let path = dir.path().join("sat.csv");
    write_points(&path, PointColumns::Saturation, &p, &c, &[]).unwrap();
    let r = fit(ModelKind::Saturation, path, 2).unwrap();
    let f = r.fit.unwrap();
    assert!((f.value("c_inf").unwrap() / 26e3 - 1.0).abs() < 1e-9, "{f}");
    assert!((f.value("p_sat").unwrap() / 249.0 - 1.0).abs() < 1e-9);
}

#[test]
fn fit_two_gaussian_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..400).map(|i| 750.0 + 0.5 * i as f64).collect();
    let y: Vec<f64> = x
        .iter()
        .map(|&w| {
            let g = |a: f64, c: f64, s: f64| a * (-0.5 * ((w - c) / s).powi(2)).exp();
            g(100.0, 850.0, 12.0) + g(70.0, 900.0, 20.0) + 2.0 + rng.random_range(-1.0..1.0)
        })
        .collect();
    let path = dir.path().join("spec.csv");
    write_points(&path, PointColumns::Spectrum, &x, &y, &[]).unwrap();
    let r = fit(ModelKind::Spectrum, path, 2).unwrap();
    let m = r.fit.unwrap().spectrum_model().unwrap();
    assert!((m.components[0].center - 850.0).abs() < 2.0, "{m:?}");
    assert!((m.components[1].center - 900.0).abs() < 2.0, "{m:?}");
}

#[test]
fn fit_rejects_malformed_and_mismatched_csv() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "power_uw,rate_cps\n10,abc\n").unwrap();
    let err = fit(ModelKind::Saturation, bad, 2).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");

    let wrong = dir.path().join("wrong.csv");
    std::fs::write(&wrong, "angle_deg,intensity_cps\n0,1\n90,2\n").unwrap();
    let err = fit(ModelKind::Saturation, wrong, 2).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Format(_)) && msg.contains("power_uw") && msg.contains("rate_cps"), "{msg}");
}

#[test]
fn g2_csv_refits_to_the_same_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "b.toml", |c| {
        c.excitation.power_uw = 10.0;
        c.detector.efficiency = 0.01;
    });
    let file = dir.path().join("b.phts");
    simulate(&cfg, 10.0, 9, &file);
    let direct = g2(&file, Some(0.41)).unwrap().fit.unwrap();
    let again = cmd_fit(&FitArgs {
        kind: ModelKind::G2,
        input: dir.path().join("b.phts.coinc.csv"),
        irf_sigma_ns: Some(0.41),
        period_ns: None,
        components: 2,
    })
    .unwrap()
    .fit
    .unwrap();
    assert_eq!(direct.value("tau1"), again.value("tau1"));
}

#[test]
fn lifetime_csv_refits_with_inferred_period() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("p.phts");
    simulate(&config("pulsed_green.toml"), 0.05, 4, &file);
    let direct = cmd_lifetime(&LifetimeArgs {
        input: file.clone(),
        bin_ps: 50.0,
        irf_sigma_ns: 0.41,
    })
    .unwrap();
    let again = fit(ModelKind::Lifetime, dir.path().join("p.phts.tcspc.csv"), 2).unwrap();
    let (a, b) = (direct.fit.unwrap(), again.fit.unwrap());
    assert!((a.value("tau").unwrap() - b.value("tau").unwrap()).abs() < 1e-9, "{a}\n{b}");
}

fn photonlab_bin(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_photonlab")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr),
    )
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let cfg = config("reference_red_cw.toml").to_string_lossy().into_owned();

    let (code, out) = photonlab_bin(&["simulate", &cfg, "--duration", "2", "--seed", "1", "--out", &d("r.phts")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("channel0.rate_cps") && out.contains("channel1.rate_cps"));

    assert_eq!(photonlab_bin(&["g2", &d("r.phts"), "--bin", "0"]).0, 1);
    assert_eq!(photonlab_bin(&["g2", &d("r.phts"), "--bin", "abc"]).0, 1);
    assert_eq!(photonlab_bin(&["frobnicate"]).0, 1);
    assert_eq!(photonlab_bin(&["--help"]).0, 0);

    std::fs::write(d("junk.phts"), b"JUNKJUNKJUNK").unwrap();
    assert_eq!(photonlab_bin(&["g2", &d("junk.phts")]).0, 2);
    assert_eq!(photonlab_bin(&["g2", &d("missing.phts")]).0, 2);

    write_points(
        Path::new(&d("two.csv")),
        PointColumns::Saturation,
        &[100.0, 100.0, 200.0],
        &[1.0, 1.0, 2.0],
        &[],
    )
    .unwrap();
    let (code, out) = photonlab_bin(&["fit", "saturation", &d("two.csv")]);
    assert_eq!(code, 3, "{out}");

    let (code, out) = photonlab_bin(&["saturation", &cfg, "--powers", "25,100,300,1000", "--dwell", "1", "--out", &d("s.csv")]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("param c_inf"));
}

#[test]
fn reports_trace_numbers_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("r.phts");
    simulate(&config("reference_red_cw.toml"), 2.0, 1, &file);
    let r = cmd_g2(&G2Args {
        input: file.clone(),
        bin_ps: 73.3,
        window_ns: 20.0,
        fit: false,
        irf_sigma_ns: None,
    })
    .unwrap();
    for p in &r.outputs {
        assert!(p.exists(), "{}", p.display());
    }
    let saved = std::fs::read_to_string(r.outputs.last().unwrap()).unwrap();
    assert_eq!(saved, r.to_string());
    let s = read_timestamps(&file).unwrap();
    assert_eq!(r.get("correlate.N1_cps").unwrap(), format!("{:.9e}", s.rate_cps(0)));
}
