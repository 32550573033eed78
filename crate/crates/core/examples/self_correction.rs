//! Reading the self-corrected function `g` through a lightly corrupted `f`.

use lintest::gauss::dot;
use lintest::oracle::CorruptionRegion;
use lintest::{query_g, scaling_index, FunctionOracle, QueryG, SeedState, TesterConfig};

fn main() -> lintest::Result<()> {
    let n = 10;
    let w = SeedState::new(1).standard_normal_vec(n);
    let u = SeedState::new(2).standard_normal_vec(n);
    let f = FunctionOracle::corrupted(w.clone(), CorruptionRegion::new(u, 0.01, false)?, 1.0)?;
    let cfg = TesterConfig::new(0.1)?;

    let mut points = SeedState::new(3);
    let mut probes = SeedState::new(4);
    let (mut exact, mut rejected, mut wrong) = (0, 0, 0);
    let total = 2000;
    for _ in 0..total {
        let p = points.standard_normal_vec(n);
        match query_g(&f, &p, &cfg, &mut probes)? {
            QueryG::Value(v) if cfg.policy.approx_eq(v, dot(&w, &p)) => exact += 1,
            QueryG::Value(_) => wrong += 1,
            QueryG::Reject => rejected += 1,
        }
    }
    println!(
        "g(p) = w·p on {exact}/{total}, probes disagreed on {rejected}, wrong value on {wrong}"
    );

    let far = vec![3.0; n];
    println!(
        "scaling index of a point with norm {:.2}: {}",
        dot(&far, &far).sqrt(),
        scaling_index(&far, cfg.r).get()
    );
    Ok(())
}
