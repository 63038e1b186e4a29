//! The damped Gauss-Newton solver on a user-defined residual: a biexponential
//! decay with one bounded rate.

use photonlab::fitting::{minimize, Bounds, LsqOptions};

fn main() -> photonlab::Result<()> {
    let t: Vec<f64> = (0..200).map(|i| 0.05 * i as f64).collect();
    let model = |p: &[f64], x: f64| p[0] * (-x / p[1]).exp() + p[2] * (-x / p[3]).exp();
    let truth = [100.0, 0.25, 20.0, 1.27];
    let y: Vec<f64> = t.iter().map(|&x| model(&truth, x)).collect();
    let bounds = [Bounds::at_least(0.0), Bounds::between(0.01, 1.0), Bounds::at_least(0.0), Bounds::at_least(0.5)];
    let sol = minimize(
        |p, r| {
            for ((ri, &x), yi) in r.iter_mut().zip(&t).zip(&y) {
                *ri = model(p, x) - yi;
            }
        },
        t.len(),
        &[50.0, 0.5, 50.0, 3.0],
        &bounds,
        &LsqOptions::default(),
    )?;
    println!(
        "stop {} after {} iterations, converged {}, rss {:.3e}",
        sol.stop.as_str(),
        sol.iterations,
        sol.converged,
        sol.rss
    );
    for (name, (v, u)) in ["a1", "tau1", "a2", "tau2"].iter().zip(sol.params.iter().zip(&sol.uncertainties)) {
        println!("  {name} = {v:.6} +/- {u:.2e}");
    }
    Ok(())
}
