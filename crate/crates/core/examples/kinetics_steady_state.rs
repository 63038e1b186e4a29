//! Steady-state count rate of the reference molecule versus excitation power
//! at both laser wavelengths, with the lifetimes each wavelength implies.

use photonlab::kinetics::{
    build_rate_matrix, effective_lifetime, steady_state, EmitterConfig, ExcitationContext, Level, GREEN_NM, RED_NM,
};

fn main() -> photonlab::Result<()> {
    let cfg = EmitterConfig::reference();
    let det_eff = 3.3e-5;
    for wl in [RED_NM, GREEN_NM] {
        let tau = effective_lifetime(cfg.k_rad, cfg.k_nr(wl)?)?;
        println!("{wl} nm: lifetime {tau:.3} ns");
        println!("  {:>8}  {:>10}  {:>9}", "P (uW)", "rate (cps)", "p_excited");
        for p in [10.0, 50.0, 100.0, 250.0, 500.0, 1000.0, 2000.0] {
            let ss = steady_state(&build_rate_matrix(&cfg, &ExcitationContext::cw(wl, p))?, cfg.k_rad, det_eff)?;
            println!(
                "  {p:>8.0}  {:>10.0}  {:>9.4}",
                ss.detected_rate_cps,
                ss.populations[Level::Excited as usize]
            );
        }
    }

    let shelving = EmitterConfig {
        k_isc: 0.01,
        k_isc_return: 1e-3,
        ..cfg
    };
    let ss = steady_state(
        &build_rate_matrix(&shelving, &ExcitationContext::cw(RED_NM, 1000.0))?,
        shelving.k_rad,
        det_eff,
    )?;
    println!(
        "with shelving (k_isc 0.01/ns, return 1e-3/ns) at 1000 uW: {:.0} cps, populations {:?}",
        ss.detected_rate_cps, ss.populations
    );
    Ok(())
}
