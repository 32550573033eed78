//! Sampling, KL divergence and the total-variation bounds for Gaussians.

use lintest::gauss::{empirical_tv, kl_gaussians, pinsker_tv_bound, shared_cov_tv_bound};
use lintest::{sample_gaussian, CovarianceMatrix, GaussianDist, MeanVector, SeedState};

fn main() -> lintest::Result<()> {
    let cov = CovarianceMatrix::from_rows(&[vec![2.0, 0.6], vec![0.6, 1.0]])?;
    let p = GaussianDist::new(MeanVector::zeros(2), cov.clone())?;
    let q = GaussianDist::new(MeanVector::new(vec![0.3, -0.2])?, cov.clone())?;

    let mut rng = SeedState::new(42);
    for _ in 0..3 {
        println!("sample {:?}", sample_gaussian(&p, &mut rng)?);
    }

    let kl = kl_gaussians(&p, &q)?;
    let pinsker = pinsker_tv_bound(kl)?;
    let shared = shared_cov_tv_bound(p.mean(), q.mean(), &cov)?;
    let tv = empirical_tv(&p, &q, 100_000, &mut rng)?;
    println!("KL(p||q)            = {kl:.6}");
    println!("Pinsker bound       = {pinsker:.6}");
    println!("shared-cov bound    = {shared:.6}");
    println!(
        "Monte Carlo TV      = {:.6} ± {:.6}",
        tv.estimate, tv.std_error
    );
    Ok(())
}
