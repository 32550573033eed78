//! The odd-part wrapper and the distribution-free linearity tester.

use lintest::oracle::CorruptionRegion;
use lintest::{
    force_negativity, run_df_linearity, ForceNegativity, FunctionOracle, Oracle,
    SampleDistribution, SeedState, TesterConfig,
};

fn main() -> lintest::Result<()> {
    let n = 6;
    let w = SeedState::new(3).standard_normal_vec(n);
    let u = SeedState::new(4).standard_normal_vec(n);
    let cfg = TesterConfig::new(0.1)?.with_seed(5);

    // A constant shift is not odd, but its odd part is exactly linear.
    let shifted = FunctionOracle::constant_shift(w.clone(), 2.0)?;
    let mut d = SampleDistribution::standard_gaussian(n, 1);
    match force_negativity(&shifted, &mut d, &cfg)? {
        ForceNegativity::Odd(_) => println!("constant shift passed the odd check"),
        ForceNegativity::Reject(v) => println!(
            "constant shift rejected by the odd check after {} queries",
            v.queries_used
        ),
    }

    let cases = vec![
        ("linear", FunctionOracle::linear(w.clone())?),
        ("norm", FunctionOracle::norm(n)?),
        (
            "odd corruption on 20%",
            FunctionOracle::corrupted(w, CorruptionRegion::new(u, 0.2, true)?, 1.0)?,
        ),
    ];
    for (name, f) in &cases {
        let mut d = SampleDistribution::standard_gaussian(n, 2);
        let v = run_df_linearity(f, &mut d, &cfg)?;
        println!(
            "{name:<24} {:?} at {:?}, {} queries (oracle counted {})",
            v.outcome,
            v.reject_site,
            v.queries_used,
            f.query_count()
        );
    }
    Ok(())
}
