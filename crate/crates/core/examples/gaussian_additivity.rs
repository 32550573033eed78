//! The standard-Gaussian additivity tester on a few function families.

use lintest::oracle::CorruptionRegion;
use lintest::{run_gaussian_additivity, FunctionOracle, SeedState, TesterConfig};

fn main() -> lintest::Result<()> {
    let n = 10;
    let w = SeedState::new(1).standard_normal_vec(n);
    let u = SeedState::new(2).standard_normal_vec(n);

    let cases = vec![
        ("linear", FunctionOracle::linear(w.clone())?),
        (
            "linear + 1",
            FunctionOracle::constant_shift(w.clone(), 1.0)?,
        ),
        (
            "corrupted on 30% of N(0,I)",
            FunctionOracle::corrupted(w.clone(), CorruptionRegion::new(u, 0.3, false)?, 1.0)?,
        ),
        ("noisy", FunctionOracle::noisy(w, 0.1, 9)?),
        ("euclidean norm", FunctionOracle::norm(n)?),
    ];

    let cfg = TesterConfig::new(0.1)?.with_seed(7);
    for (name, f) in &cases {
        let v = run_gaussian_additivity(f, &cfg)?;
        println!(
            "{name:<28} {:?} at {:?} after {} queries",
            v.outcome, v.reject_site, v.queries_used
        );
    }
    println!(
        "accept-path budget at eps = 0.1: {}",
        cfg.accept_path_queries(lintest::Algorithm::GaussianAdditivity)
    );
    Ok(())
}
