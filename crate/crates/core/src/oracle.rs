//! Query access to functions `f: Rⁿ → R`.
//!
//! Every evaluation goes through [`Oracle::query`], which counts it. The
//! testers compare values with an [`EqPolicy`] instead of exact equality.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distro::SampleDistribution;
use crate::error::{check_dim, Error, Result};
use crate::gauss::{dot, norm2};
use crate::normal::inverse_cdf;
use crate::rng::{bits_to_normal, mix64, SeedState};

pub trait Oracle: Send + Sync {
    fn dim(&self) -> usize;

    /// Evaluates the function at `x`, counting one query.
    fn query(&self, x: &[f64]) -> Result<f64>;

    /// Total evaluations of the underlying function so far.
    fn query_count(&self) -> u64;
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn query(&self, x: &[f64]) -> Result<f64> {
        (**self).query(x)
    }
    fn query_count(&self) -> u64 {
        (**self).query_count()
    }
}

/// Approximate equality: `|a − b| ≤ abs_tol + rel_tol · max(|a|, |b|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EqPolicy {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for EqPolicy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
        }
    }
}

impl EqPolicy {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Result<Self> {
        let policy = Self { rel_tol, abs_tol };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t.is_finite() && t >= 0.0;
        if ok(self.rel_tol) && ok(self.abs_tol) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "tolerances must be finite and >= 0, got rel {} abs {}",
                self.rel_tol, self.abs_tol
            )))
        }
    }

    pub fn approx_eq(&self, a: f64, b: f64) -> bool {
        a == b || (a - b).abs() <= self.abs_tol + self.rel_tol * a.abs().max(b.abs())
    }
}

/// Half-space `{x : u·x > t}` (and, when symmetric, its mirror `{u·x < −t}`)
/// whose standard-Gaussian mass is `target_mass`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorruptionRegion {
    direction: Vec<f64>,
    threshold: f64,
    target_mass: f64,
    symmetric: bool,
}

impl CorruptionRegion {
    pub fn new(direction: Vec<f64>, target_mass: f64, symmetric: bool) -> Result<Self> {
        if !(target_mass > 0.0 && target_mass < 1.0) {
            return Err(Error::invalid(format!(
                "corruption mass must lie in (0, 1), got {target_mass}"
            )));
        }
        let len = norm2(&direction);
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::invalid(
                "corruption direction must be a nonzero finite vector",
            ));
        }
        let tail = if symmetric {
            target_mass / 2.0
        } else {
            target_mass
        };
        Ok(Self {
            direction: direction.iter().map(|v| v / len).collect(),
            threshold: -inverse_cdf(tail),
            target_mass,
            symmetric,
        })
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Mass of the region under N(0, I).
    pub fn target_mass(&self) -> f64 {
        self.target_mass
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// +1 inside the upper half-space, −1 inside the mirrored one, else 0.
    pub fn indicator(&self, x: &[f64]) -> f64 {
        let s = dot(&self.direction, x);
        if s > self.threshold {
            1.0
        } else if self.symmetric && s < -self.threshold {
            -1.0
        } else {
            0.0
        }
    }
}

pub type CustomFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum Family {
    Linear {
        w: Vec<f64>,
    },
    ConstantShiftLinear {
        w: Vec<f64>,
        shift: f64,
    },
    /// `w·x + payload · indicator(x)`.
    CorruptedLinear {
        w: Vec<f64>,
        region: CorruptionRegion,
        payload: f64,
    },
    /// `w·x + ε_x`, with `ε_x ~ N(0, variance)` keyed by the bits of `x`.
    NoisyLinear {
        w: Vec<f64>,
        variance: f64,
        noise_seed: u64,
    },
    Norm,
    Custom(CustomFn),
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Linear { w } => f.debug_struct("Linear").field("w", w).finish(),
            Family::ConstantShiftLinear { w, shift } => f
                .debug_struct("ConstantShiftLinear")
                .field("w", w)
                .field("shift", shift)
                .finish(),
            Family::CorruptedLinear { w, region, payload } => f
                .debug_struct("CorruptedLinear")
                .field("w", w)
                .field("region", region)
                .field("payload", payload)
                .finish(),
            Family::NoisyLinear {
                w,
                variance,
                noise_seed,
            } => f
                .debug_struct("NoisyLinear")
                .field("w", w)
                .field("variance", variance)
                .field("noise_seed", noise_seed)
                .finish(),
            Family::Norm => f.write_str("Norm"),
            Family::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Hash of the canonical little-endian bit pattern of `x` (with `-0.0`
/// folded into `0.0`), keyed by `seed`.
pub fn point_hash(x: &[f64], seed: u64) -> u64 {
    x.iter().fold(mix64(seed ^ x.len() as u64), |h, &v| {
        let v = if v == 0.0 { 0.0 } else { v };
        mix64(h ^ u64::from_le_bytes(v.to_le_bytes()))
    })
}

/// A concrete function with an atomic query counter.
#[derive(Debug)]
pub struct FunctionOracle {
    dim: usize,
    family: Family,
    count: AtomicU64,
}

impl Clone for FunctionOracle {
    /// The clone starts with a fresh counter.
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            family: self.family.clone(),
            count: AtomicU64::new(0),
        }
    }
}

impl FunctionOracle {
    pub fn new(dim: usize, family: Family) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("oracle dimension must be >= 1"));
        }
        let weights = match &family {
            Family::Linear { w }
            | Family::ConstantShiftLinear { w, .. }
            | Family::CorruptedLinear { w, .. }
            | Family::NoisyLinear { w, .. } => Some(w),
            Family::Norm | Family::Custom(_) => None,
        };
        if let Some(w) = weights {
            check_dim(dim, w.len())?;
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("weights must be finite"));
            }
        }
        match &family {
            Family::CorruptedLinear {
                region, payload, ..
            } => {
                check_dim(dim, region.direction.len())?;
                if !payload.is_finite() {
                    return Err(Error::invalid("corruption payload must be finite"));
                }
            }
            Family::NoisyLinear { variance, .. } if !(*variance >= 0.0 && variance.is_finite()) => {
                return Err(Error::invalid("noise variance must be finite and >= 0"));
            }
            Family::ConstantShiftLinear { shift, .. } if !shift.is_finite() => {
                return Err(Error::invalid("shift must be finite"));
            }
            _ => {}
        }
        Ok(Self {
            dim,
            family,
            count: AtomicU64::new(0),
        })
    }

    pub fn linear(w: Vec<f64>) -> Result<Self> {
        Self::new(w.len(), Family::Linear { w })
    }

    pub fn constant_shift(w: Vec<f64>, shift: f64) -> Result<Self> {
        Self::new(w.len(), Family::ConstantShiftLinear { w, shift })
    }

    pub fn corrupted(w: Vec<f64>, region: CorruptionRegion, payload: f64) -> Result<Self> {
        Self::new(w.len(), Family::CorruptedLinear { w, region, payload })
    }

    pub fn noisy(w: Vec<f64>, variance: f64, noise_seed: u64) -> Result<Self> {
        Self::new(
            w.len(),
            Family::NoisyLinear {
                w,
                variance,
                noise_seed,
            },
        )
    }

    pub fn norm(dim: usize) -> Result<Self> {
        Self::new(dim, Family::Norm)
    }

    pub fn custom(dim: usize, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::new(dim, Family::Custom(Arc::new(f)))
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// The linear part `w`, for the families that have one.
    pub fn weights(&self) -> Option<&[f64]> {
        match &self.family {
            Family::Linear { w }
            | Family::ConstantShiftLinear { w, .. }
            | Family::CorruptedLinear { w, .. }
            | Family::NoisyLinear { w, .. } => Some(w),
            Family::Norm | Family::Custom(_) => None,
        }
    }

    pub fn corruption_region(&self) -> Option<&CorruptionRegion> {
        match &self.family {
            Family::CorruptedLinear { region, .. } => Some(region),
            _ => None,
        }
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.family {
            Family::Linear { w } => dot(w, x),
            Family::ConstantShiftLinear { w, shift } => dot(w, x) + shift,
            Family::CorruptedLinear { w, region, payload } => {
                dot(w, x) + payload * region.indicator(x)
            }
            Family::NoisyLinear {
                w,
                variance,
                noise_seed,
            } => dot(w, x) + variance.sqrt() * bits_to_normal(point_hash(x, *noise_seed)),
            Family::Norm => norm2(x),
            Family::Custom(f) => f(x),
        }
    }
}

impl Oracle for FunctionOracle {
    fn dim(&self) -> usize {
        self.dim
    }

    fn query(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("query point has non-finite entries"));
        }
        self.count.fetch_add(1, Ordering::Relaxed);
        Ok(self.evaluate(x))
    }

    fn query_count(&self) -> u64 {
        self.count.load(Ordering::Relaxed)
    }
}

/// `f′(x) = (f(x) − f(−x)) / 2`. Each query costs two queries of `f`.
#[derive(Debug, Clone, Copy)]
pub struct OddPart<O> {
    inner: O,
}

impl<O: Oracle> OddPart<O> {
    pub fn new(inner: O) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: Oracle> Oracle for OddPart<O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn query(&self, x: &[f64]) -> Result<f64> {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let pos = self.inner.query(x)?;
        let mirrored = self.inner.query(&neg)?;
        Ok((pos - mirrored) / 2.0)
    }

    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }
}

/// Result of [`estimate_distance`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    /// Disagreements divided by the number of samples.
    pub distance: f64,
    /// Hoeffding half-width at 95% confidence.
    pub half_width: f64,
    pub samples: usize,
    pub disagreements: usize,
    /// Samples where the reference could not produce a value.
    pub indeterminate: usize,
}

/// Estimates `Pr_{x~D}[f(x) ≠ g(x)]`. `reference` returns `None` when it
/// cannot produce a value at `x` (e.g. a self-corrector that rejected).
pub fn estimate_distance<O, G>(
    f: &O,
    mut reference: G,
    dist: &mut SampleDistribution,
    m: usize,
    policy: &EqPolicy,
) -> Result<DistanceEstimate>
where
    O: Oracle + ?Sized,
    G: FnMut(&[f64]) -> Result<Option<f64>>,
{
    if m == 0 {
        return Err(Error::invalid(
            "distance estimate needs at least one sample",
        ));
    }
    check_dim(f.dim(), dist.dim())?;
    let (mut disagreements, mut indeterminate) = (0, 0);
    for _ in 0..m {
        let x = dist.draw()?;
        let fx = f.query(&x)?;
        match reference(&x)? {
            Some(gx) if policy.approx_eq(fx, gx) => {}
            Some(_) => disagreements += 1,
            None => indeterminate += 1,
        }
    }
    Ok(DistanceEstimate {
        distance: disagreements as f64 / m as f64,
        half_width: ((2.0f64 / 0.05).ln() / (2.0 * m as f64)).sqrt(),
        samples: m,
        disagreements,
        indeterminate,
    })
}

/// JSON description of an oracle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub family: FamilyName,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_explicit: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    Linear,
    ConstantShiftLinear,
    CorruptedLinear,
    NoisyLinear,
    Norm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionSpec {
    pub mass: f64,
    #[serde(default = "default_payload")]
    pub payload: f64,
    #[serde(default)]
    pub symmetric: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<f64>>,
}

fn default_payload() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// Variance of the per-point noise.
    pub delta: f64,
}

impl OracleSpec {
    pub fn linear(dim: usize, seed: u64) -> Self {
        Self {
            family: FamilyName::Linear,
            dim,
            seed,
            w_seed: None,
            w_explicit: None,
            shift: None,
            corruption: None,
            noise: None,
        }
    }

    fn weights(&self) -> Result<Vec<f64>> {
        match (&self.w_explicit, self.w_seed) {
            (Some(_), Some(_)) => Err(Error::config("give either w_seed or w_explicit, not both")),
            (Some(w), None) => {
                check_dim(self.dim, w.len())?;
                Ok(w.clone())
            }
            (None, seed) => {
                Ok(SeedState::new(seed.unwrap_or(self.seed)).standard_normal_vec(self.dim))
            }
        }
    }

    pub fn build(&self) -> Result<FunctionOracle> {
        if self.dim == 0 {
            return Err(Error::config("oracle dim must be >= 1"));
        }
        let reject_extra = |present: bool, field: &str| {
            if present {
                Err(Error::config(format!(
                    "field `{field}` does not apply to family {:?}",
                    self.family
                )))
            } else {
                Ok(())
            }
        };
        if self.family != FamilyName::ConstantShiftLinear {
            reject_extra(self.shift.is_some(), "shift")?;
        }
        if self.family != FamilyName::CorruptedLinear {
            reject_extra(self.corruption.is_some(), "corruption")?;
        }
        if self.family != FamilyName::NoisyLinear {
            reject_extra(self.noise.is_some(), "noise")?;
        }
        if self.family == FamilyName::Norm {
            reject_extra(self.w_seed.is_some(), "w_seed")?;
            reject_extra(self.w_explicit.is_some(), "w_explicit")?;
        }

        match self.family {
            FamilyName::Linear => FunctionOracle::linear(self.weights()?),
            FamilyName::ConstantShiftLinear => {
                FunctionOracle::constant_shift(self.weights()?, self.shift.unwrap_or(1.0))
            }
            FamilyName::CorruptedLinear => {
                let c = self
                    .corruption
                    .as_ref()
                    .ok_or_else(|| Error::config("corrupted-linear needs `corruption`"))?;
                let direction = match &c.direction {
                    Some(d) => d.clone(),
                    None => SeedState::new(self.seed)
                        .substream(1)
                        .standard_normal_vec(self.dim),
                };
                let region = CorruptionRegion::new(direction, c.mass, c.symmetric)?;
                FunctionOracle::corrupted(self.weights()?, region, c.payload)
            }
            FamilyName::NoisyLinear => {
                let noise = self
                    .noise
                    .as_ref()
                    .ok_or_else(|| Error::config("noisy-linear needs `noise`"))?;
                FunctionOracle::noisy(
                    self.weights()?,
                    noise.delta,
                    mix64(self.seed ^ 0x6e6f_6973_65),
                )
            }
            FamilyName::Norm => FunctionOracle::norm(self.dim),
        }
    }
}
