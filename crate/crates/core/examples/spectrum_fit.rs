//! Multi-Gaussian decomposition of an emission spectrum with a baseline,
//! comparing one-, two- and three-component fits.

use photonlab::fitting::{fit_spectrum_points, GaussianComponent, SpectrumModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> photonlab::Result<()> {
    let truth = SpectrumModel {
        components: vec![
            GaussianComponent {
                amplitude: 120.0,
                center: 830.0,
                width: 9.0,
            },
            GaussianComponent {
                amplitude: 60.0,
                center: 900.0,
                width: 25.0,
            },
        ],
        baseline: 4.0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 2.0).unwrap();
    let x: Vec<f64> = (0..500).map(|i| 750.0 + 0.5 * i as f64).collect();
    let y: Vec<f64> = x.iter().map(|&w| truth.eval(w) + noise.sample(&mut rng)).collect();
    for n in 1..=3 {
        let fit = fit_spectrum_points(&x, &y, n)?;
        println!("--- {n} component(s): rss {:.1}", fit.rss);
        for c in fit.spectrum_model()?.components {
            println!("  center {:.2} nm, width {:.2} nm, amplitude {:.1}", c.center, c.width, c.amplitude);
        }
        for w in &fit.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
