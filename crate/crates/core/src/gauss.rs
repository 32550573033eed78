//! Multivariate Gaussians: seeded sampling, log-densities, and the closed-form
//! divergence and distance bounds.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{inverse_spectral_norm, psd_factor, symmetrize, PdFactor};
use crate::rng::SeedState;

pub type Point = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeanVector(Vec<f64>);

impl MeanVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("mean vector must have dimension >= 1"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mean vector has non-finite entries"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n.max(1)])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Symmetric covariance. Construction symmetrizes small asymmetry away and
/// rejects large asymmetry; definiteness is checked where it is needed.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceMatrix(DMatrix<f64>);

impl CovarianceMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 {
            return Err(Error::invalid("covariance must have dimension >= 1"));
        }
        Ok(Self(symmetrize(&entries)?))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        for r in rows {
            check_dim(n, r.len())?;
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        Self(DMatrix::identity(n, n) * scale)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn is_identity(&self) -> bool {
        self.0 == DMatrix::identity(self.dim(), self.dim())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianDist {
    mean: MeanVector,
    cov: CovarianceMatrix,
}

impl GaussianDist {
    pub fn new(mean: MeanVector, cov: CovarianceMatrix) -> Result<Self> {
        check_dim(mean.dim(), cov.dim())?;
        Ok(Self { mean, cov })
    }

    pub fn standard(n: usize) -> Self {
        Self {
            mean: MeanVector::zeros(n),
            cov: CovarianceMatrix::identity(n.max(1)),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn mean(&self) -> &MeanVector {
        &self.mean
    }

    pub fn cov(&self) -> &CovarianceMatrix {
        &self.cov
    }

    pub fn sampler(&self) -> Result<GaussianSampler> {
        GaussianSampler::new(self)
    }

    pub fn log_density(&self) -> Result<LogDensity> {
        LogDensity::new(self)
    }
}

/// Draws `µ + L z` with `L Lᵀ = Σ` and `z` standard normal.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    mean: Vec<f64>,
    // None for the identity covariance.
    factor: Option<DMatrix<f64>>,
}

impl GaussianSampler {
    pub fn new(dist: &GaussianDist) -> Result<Self> {
        let factor = if dist.cov.is_identity() {
            None
        } else {
            Some(psd_factor(dist.cov.matrix())?)
        };
        Ok(Self {
            mean: dist.mean.0.clone(),
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut SeedState) -> Point {
        let z = rng.standard_normal_vec(self.dim());
        match &self.factor {
            None => self.mean.iter().zip(&z).map(|(m, v)| m + v).collect(),
            Some(l) => (0..self.dim())
                .map(|i| {
                    let lz: f64 = (0..=i).map(|k| l[(i, k)] * z[k]).sum();
                    self.mean[i] + lz
                })
                .collect(),
        }
    }
}

/// One draw from `dist`. Callers drawing many points should hold a
/// [`GaussianSampler`] instead so the factorization is computed once.
pub fn sample_gaussian(dist: &GaussianDist, rng: &mut SeedState) -> Result<Point> {
    Ok(dist.sampler()?.sample(rng))
}

/// Log-density of a Gaussian with positive-definite covariance.
#[derive(Clone, Debug)]
pub struct LogDensity {
    mean: Vec<f64>,
    factor: PdFactor,
    constant: f64,
}

impl LogDensity {
    pub fn new(dist: &GaussianDist) -> Result<Self> {
        let factor = PdFactor::new(dist.cov.matrix())?;
        let n = dist.dim() as f64;
        let constant = -0.5 * (n * (2.0 * PI).ln() + factor.log_det());
        Ok(Self {
            mean: dist.mean.0.clone(),
            factor,
            constant,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.constant - 0.5 * self.factor.quad_form_inv(&centered)
    }
}

/// `KL(d1 ‖ d2)` in closed form. Both covariances must be positive definite.
pub fn kl_gaussians(d1: &GaussianDist, d2: &GaussianDist) -> Result<f64> {
    check_dim(d1.dim(), d2.dim())?;
    let n = d1.dim();
    let f1 = PdFactor::new(d1.cov.matrix())?;
    let f2 = PdFactor::new(d2.cov.matrix())?;

    let sigma1 = d1.cov.matrix();
    let mut trace = 0.0;
    for j in 0..n {
        let col: Vec<f64> = sigma1.column(j).iter().copied().collect();
        trace += f2.solve(&col)[j];
    }
    let diff: Vec<f64> = d2
        .mean
        .as_slice()
        .iter()
        .zip(d1.mean.as_slice())
        .map(|(a, b)| a - b)
        .collect();
    let maha = f2.quad_form_inv(&diff);
    let kl = 0.5 * ((f2.log_det() - f1.log_det()) + (trace - n as f64) + maha);
    debug_assert!(kl >= -1e-12, "negative KL {kl}");
    Ok(kl.max(0.0))
}

/// Pinsker's inequality: `TV ≤ sqrt(KL / 2)`.
pub fn pinsker_tv_bound(kl: f64) -> Result<f64> {
    if kl.is_nan() || kl < 0.0 {
        return Err(Error::invalid(format!(
            "KL divergence must be >= 0, got {kl}"
        )));
    }
    Ok((kl / 2.0).sqrt())
}

/// Upper bound on `TV(N(µ1, Σ), N(µ2, Σ))`: `½ ‖µ1 − µ2‖₂ sqrt(‖Σ⁻¹‖₂)`.
pub fn shared_cov_tv_bound(
    mu1: &MeanVector,
    mu2: &MeanVector,
    cov: &CovarianceMatrix,
) -> Result<f64> {
    check_dim(mu1.dim(), mu2.dim())?;
    check_dim(mu1.dim(), cov.dim())?;
    let diff: Vec<f64> = mu1.0.iter().zip(&mu2.0).map(|(a, b)| a - b).collect();
    let inv_norm = inverse_spectral_norm(cov.matrix())?;
    Ok(0.5 * norm2(&diff) * inv_norm.sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of `TV(d1, d2) = E_{x~d1} (1 − d2(x)/d1(x))⁺`.
pub fn empirical_tv(
    d1: &GaussianDist,
    d2: &GaussianDist,
    m: usize,
    rng: &mut SeedState,
) -> Result<TvEstimate> {
    if m < 1000 {
        return Err(Error::invalid(format!(
            "empirical TV needs at least 1000 samples, got {m}"
        )));
    }
    check_dim(d1.dim(), d2.dim())?;
    let sampler = d1.sampler()?;
    let ld1 = d1.log_density()?;
    let ld2 = d2.log_density()?;

    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..m {
        let x = sampler.sample(rng);
        let log_ratio = ld2.eval(&x) - ld1.eval(&x);
        // TV = E_{d1}[(1 − q/p)⁺], bounded in [0, 1].
        let term = (1.0 - log_ratio.min(0.0).exp()).max(0.0);
        sum += term;
        sum_sq += term * term;
    }
    let mf = m as f64;
    let mean = sum / mf;
    let var = ((sum_sq / mf) - mean * mean).max(0.0) * mf / (mf - 1.0);
    Ok(TvEstimate {
        estimate: mean.clamp(0.0, 1.0),
        std_error: (var / mf).sqrt(),
        samples: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(mean: Vec<f64>, cov: DMatrix<f64>) -> GaussianDist {
        GaussianDist::new(
            MeanVector::new(mean).unwrap(),
            CovarianceMatrix::new(cov).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_moments() {
        let s = GaussianDist::standard(1).sampler().unwrap();
        let mut rng = SeedState::new(1);
        let m = 1_000_000;
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..m {
            let x = s.sample(&mut rng)[0];
            sum += x;
            sq += x * x;
        }
        let mean = sum / m as f64;
        let var = sq / m as f64 - mean * mean;
        assert!(mean.abs() <= 0.005, "{mean}");
        assert!((0.99..=1.01).contains(&var), "{var}");
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let d = gauss(vec![1.5, -2.0], DMatrix::zeros(2, 2));
        let mut rng = SeedState::new(5);
        assert_eq!(sample_gaussian(&d, &mut rng).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn scaled_covariance_is_recovered() {
        let d = gauss(vec![0.0, 0.0], DMatrix::identity(2, 2) * 2.0);
        let s = d.sampler().unwrap();
        let mut rng = SeedState::new(17);
        let m = 1_000_000;
        let mut c = [[0.0; 2]; 2];
        for _ in 0..m {
            let x = s.sample(&mut rng);
            for i in 0..2 {
                for j in 0..2 {
                    c[i][j] += x[i] * x[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 2.0 } else { 0.0 };
                assert!((c[i][j] / m as f64 - expected).abs() < 0.02);
            }
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let d = gauss(
            vec![1.0, 2.0, 3.0],
            DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.1, 0.0, 0.1, 0.5]),
        );
        let a: Vec<Point> = {
            let mut rng = SeedState::new(99);
            (0..50)
                .map(|_| sample_gaussian(&d, &mut rng).unwrap())
                .collect()
        };
        let b: Vec<Point> = {
            let mut rng = SeedState::new(99);
            (0..50)
                .map(|_| sample_gaussian(&d, &mut rng).unwrap())
                .collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn non_psd_and_mismatched_inputs_fail() {
        let bad =
            CovarianceMatrix::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        let d = GaussianDist::new(MeanVector::zeros(2), bad).unwrap();
        assert!(matches!(d.sampler(), Err(Error::NotPsd { .. })));
        assert!(matches!(
            GaussianDist::new(MeanVector::zeros(3), CovarianceMatrix::identity(2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn kl_examples() {
        let std2 = GaussianDist::standard(2);
        assert_eq!(kl_gaussians(&std2, &std2).unwrap(), 0.0);

        let shifted = gauss(vec![0.3, -0.4], DMatrix::identity(2, 2));
        let kl = kl_gaussians(&std2, &shifted).unwrap();
        assert!((kl - 0.5 * 0.25).abs() < 1e-15);

        let wide = gauss(vec![0.0], DMatrix::identity(1, 1) * 2.0);
        let kl = kl_gaussians(&GaussianDist::standard(1), &wide).unwrap();
        assert!((kl - 0.5 * (2f64.ln() + 0.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn kl_rejects_singular_covariance() {
        let singular = gauss(
            vec![0.0, 0.0],
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
        );
        assert!(matches!(
            kl_gaussians(&GaussianDist::standard(2), &singular),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn pinsker_examples() {
        assert_eq!(pinsker_tv_bound(0.0).unwrap(), 0.0);
        assert!((pinsker_tv_bound(0.02).unwrap() - 0.1).abs() < 1e-15);
        assert!(pinsker_tv_bound(-1.0).is_err());
        let p = gauss(vec![0.02, 0.0], DMatrix::identity(2, 2));
        let kl = kl_gaussians(&GaussianDist::standard(2), &p).unwrap();
        assert!((pinsker_tv_bound(kl).unwrap() - 0.01).abs() < 1e-15);
    }

    #[test]
    fn shared_cov_examples() {
        let id = CovarianceMatrix::identity(3);
        let mu = MeanVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(shared_cov_tv_bound(&mu, &mu, &id).unwrap(), 0.0);
        let a = MeanVector::new(vec![0.02, 0.0, 0.0]).unwrap();
        let b = MeanVector::zeros(3);
        assert!((shared_cov_tv_bound(&a, &b, &id).unwrap() - 0.01).abs() < 1e-15);

        let scaled = CovarianceMatrix::scaled_identity(3, 0.25);
        assert!((shared_cov_tv_bound(&a, &b, &scaled).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn empirical_tv_examples() {
        let std1 = GaussianDist::standard(1);
        let mut rng = SeedState::new(3);
        let m = 100_000;
        let same = empirical_tv(&std1, &std1, m, &mut rng).unwrap();
        assert!(same.estimate <= 3.0 / (m as f64).sqrt());

        let far = gauss(vec![10.0], DMatrix::identity(1, 1));
        assert!(empirical_tv(&std1, &far, m, &mut rng).unwrap().estimate >= 0.999);

        let near = gauss(vec![1.0], DMatrix::identity(1, 1));
        let est = empirical_tv(&std1, &near, m, &mut rng).unwrap();
        // 2Φ(½) − 1
        assert!(
            (est.estimate - 0.382_924_922_548_026).abs() < 0.01,
            "{est:?}"
        );
        assert!(est.std_error > 0.0 && est.std_error < 0.01);
    }

    #[test]
    fn empirical_tv_requires_enough_samples() {
        let d = GaussianDist::standard(1);
        assert!(empirical_tv(&d, &d, 999, &mut SeedState::new(0)).is_err());
    }

    #[test]
    fn log_density_handles_high_dimension() {
        let d = GaussianDist::standard(200);
        let ld = d.log_density().unwrap();
        let x = vec![3.0; 200];
        let v = ld.eval(&x);
        assert!(v.is_finite());
        let expected = -0.5 * (200.0 * (2.0 * PI).ln() + 200.0 * 9.0);
        assert!((v - expected).abs() < 1e-9);
    }
}
