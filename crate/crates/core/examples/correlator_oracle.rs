//! The sweep correlator against all-pairs enumeration and the parallel
//! version, with timings.

use std::time::Instant;

use photonlab::correlator::{brute_force_pairs, coincidence_histogram, coincidence_histogram_par};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn stream(rng: &mut ChaCha8Rng, n: usize, span_ps: u64) -> Vec<u64> {
    let mut v: Vec<u64> = (0..n).map(|_| rng.random_range(0..span_ps)).collect();
    v.sort_unstable();
    v
}

fn main() -> photonlab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, b) = (stream(&mut rng, 10_000, 1_000_000_000), stream(&mut rng, 10_000, 1_000_000_000));
    let t = Instant::now();
    let oracle = brute_force_pairs(&a, &b, 73.3e-12, 20e-9)?;
    let t_oracle = t.elapsed();
    let t = Instant::now();
    let sweep = coincidence_histogram(&a, &b, 73.3e-12, 20e-9)?;
    let t_sweep = t.elapsed();
    println!(
        "10k x 10k events: all-pairs {t_oracle:?}, sweep {t_sweep:?}, identical: {}",
        oracle == sweep
    );

    let (a, b) = (stream(&mut rng, 5_000_000, 100_000_000_000_000), stream(&mut rng, 5_000_000, 100_000_000_000_000));
    let t = Instant::now();
    let serial = coincidence_histogram(&a, &b, 73.3e-12, 20e-9)?;
    let t_serial = t.elapsed();
    let t = Instant::now();
    let par = coincidence_histogram_par(&a, &b, 73.3e-12, 20e-9)?;
    println!(
        "5M x 5M events: serial {t_serial:?}, parallel {:?} on {} threads, identical: {}, {} pairs",
        t.elapsed(),
        rayon::current_num_threads(),
        serial == par,
        serial.total()
    );
    Ok(())
}
