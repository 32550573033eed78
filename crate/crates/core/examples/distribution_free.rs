//! A corruption that the standard Gaussian almost never sees but `D` does.
//!
//! The bad region is `{u·x > 6}`: Gaussian mass about 1e-9. `D` is a unit
//! Gaussian centred so that 30% of its mass lands in the region. The
//! Gaussian tester accepts, the distribution-free tester rejects.

use lintest::oracle::CorruptionRegion;
use lintest::rng::derive_seed;
use lintest::{
    run_df_additivity, run_gaussian_additivity, FunctionOracle, SampleDistribution, SeedState,
    TesterConfig,
};

fn main() -> lintest::Result<()> {
    let n = 10;
    let trials = 100;
    let w = SeedState::new(1).standard_normal_vec(n);
    let u = SeedState::new(2).standard_normal_vec(n);
    let region = CorruptionRegion::new(u, 1e-9, false)?;
    // Φ⁻¹(0.7) ≈ 0.5244: the region covers 30% of N(µ, I).
    let shift = region.threshold() - 0.524_400_512_708_041_2;
    let mean: Vec<f64> = region.direction().iter().map(|v| v * shift).collect();
    let f = FunctionOracle::corrupted(w, region, 1.0)?;

    let (mut gauss_rejects, mut df_rejects) = (0, 0);
    for t in 0..trials {
        let seed = derive_seed(11, t);
        let cfg = TesterConfig::new(0.1)?.with_seed(seed);
        let mut d = SampleDistribution::shifted_gaussian(mean.clone(), derive_seed(seed, 1))?;
        gauss_rejects += !run_gaussian_additivity(&f, &cfg)?.accepted() as u32;
        df_rejects += !run_df_additivity(&f, &mut d, &cfg)?.accepted() as u32;
    }
    println!("Gaussian tester rejected          {gauss_rejects}/{trials}");
    println!("distribution-free tester rejected {df_rejects}/{trials}");
    Ok(())
}
