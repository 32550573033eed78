//! Simulation of the sample-based lower bound.
//!
//! A sample-based tester sees only `(f(x₁), …, f(xₙ))` for Gaussian `xᵢ`.
//! Under the YES distribution `f(x) = ⟨w, x⟩`, under NO `f(x) = ⟨w, x⟩ + ε_x`
//! with `ε_x ~ N(0, δ)`. Stacking the `xᵢ` as rows of `X`, the observation is
//! `N(0, XXᵀ)` versus `N(0, XXᵀ + δI)`. With `δ = C·σ_min(X)²/n²` the total
//! variation between the two is at most `½√C`, so no algorithm distinguishes
//! them with probability above `½ + ¼√C`. The game here plays the
//! likelihood-ratio test, which attains the optimum.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_eigenvalues, PdFactor};
use crate::rng::{derive_seed, SeedState};
use crate::stats::{proportion_std_error, wilson95, Interval};

/// `C` must stay below `(2/3)²`.
pub const C_LIMIT: f64 = 4.0 / 9.0;
pub const DEGENERATE_LAMBDA: f64 = 1e-10;
pub const MAX_RESAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundConfig {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    /// Replaces the derived `δ`, for control runs outside the small-`δ` regime.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_override: Option<f64>,
}

impl LowerBoundConfig {
    pub fn new(n: usize, c: f64, trials: usize, seed: u64) -> Self {
        Self {
            n,
            c,
            trials,
            seed,
            delta_override: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config(format!("n must be >= 2, got {}", self.n)));
        }
        if !(self.c > 0.0 && self.c < C_LIMIT) {
            return Err(Error::config(format!(
                "C must lie in (0, 4/9), got {}",
                self.c
            )));
        }
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        if let Some(d) = self.delta_override {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::config(format!(
                    "delta override must be >= 0, got {d}"
                )));
            }
        }
        Ok(())
    }
}

/// `X` with Gaussian rows, its Gram matrix `XXᵀ`, and the Gram spectrum.
#[derive(Clone, Debug)]
pub struct SampleMatrix {
    x: DMatrix<f64>,
    gram: DMatrix<f64>,
    /// Eigenvalues of `XXᵀ`, ascending.
    eigenvalues: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_matrix(x: DMatrix<f64>) -> Result<Self> {
        if x.nrows() != x.ncols() || x.nrows() == 0 {
            return Err(Error::invalid("sample matrix must be square and nonempty"));
        }
        let gram = &x * x.transpose();
        let eigenvalues = gram_eigenvalues(&x)?;
        Ok(Self {
            x,
            gram,
            eigenvalues,
        })
    }

    pub fn sample(n: usize, rng: &mut SeedState) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| rng.standard_normal_vec(n)).collect();
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn gram_eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Smallest eigenvalue of `XXᵀ`, i.e. `σ_min(X)²`.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().expect("nonempty")
    }

    /// `C · σ_min(X)² / n²`.
    pub fn default_delta(&self, c: f64) -> f64 {
        let n = self.n() as f64;
        c * self.lambda_min() / (n * n)
    }
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub matrix: SampleMatrix,
    pub delta: f64,
    /// Draws discarded as numerically degenerate before this one.
    pub resamples: usize,
}

/// Draws `X` (resampling degenerate draws up to [`MAX_RESAMPLES`] times) and
/// sets `δ`.
pub fn build_instance(cfg: &LowerBoundConfig, rng: &mut SeedState) -> Result<Instance> {
    cfg.validate()?;
    let mut last = 0.0;
    for attempt in 0..MAX_RESAMPLES {
        let matrix = SampleMatrix::sample(cfg.n, rng)?;
        last = matrix.lambda_min();
        if last > DEGENERATE_LAMBDA {
            let delta = cfg
                .delta_override
                .unwrap_or_else(|| matrix.default_delta(cfg.c));
            return Ok(Instance {
                matrix,
                delta,
                resamples: attempt,
            });
        }
    }
    Err(Error::DegenerateSample {
        attempts: MAX_RESAMPLES,
        lambda_min: last,
    })
}

/// Pinsker bound on `TV(N(0, XXᵀ), N(0, XXᵀ + δI))` with its two ingredients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvBound {
    pub bound: f64,
    /// `log(det Σ_YES / det Σ_NO)`; never positive.
    pub log_det_ratio: f64,
    /// `trace(Σ_YES⁻¹ Σ_NO)`.
    pub trace: f64,
    /// `n + δ n² / σ_min(X)²`, the cap on the trace.
    pub trace_cap: f64,
}

/// `sqrt(¼ (log(det Σ_YES / det Σ_NO) + trace(Σ_YES⁻¹ Σ_NO) − n))`.
pub fn tv_bound(sm: &SampleMatrix, delta: f64) -> Result<TvBound> {
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::invalid(format!("delta must be >= 0, got {delta}")));
    }
    if sm.lambda_min() <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            index: 0,
            pivot: sm.lambda_min(),
        });
    }
    let n = sm.n() as f64;
    let (mut log_det_ratio, mut excess, mut inv_trace) = (0.0, 0.0, 0.0);
    for &lambda in sm.gram_eigenvalues() {
        let t = delta / lambda;
        let l = t.ln_1p();
        log_det_ratio -= l;
        // t − ln(1+t) ≥ 0, summed directly to avoid cancellation.
        excess += t - l;
        inv_trace += 1.0 / lambda;
    }
    let bound = (0.25 * excess.max(0.0)).sqrt();
    let tb = TvBound {
        bound,
        log_det_ratio,
        trace: n + delta * inv_trace,
        trace_cap: n + delta * n * n / sm.lambda_min(),
    };
    debug_assert!(tb.log_det_ratio <= 0.0);
    debug_assert!(tb.trace <= tb.trace_cap * (1.0 + 1e-12));
    Ok(tb)
}

/// Log-likelihood ratio `log N(v; 0, Σ_YES) − log N(v; 0, Σ_NO)`.
pub fn log_likelihood_ratio(sm: &SampleMatrix, delta: f64, v: &[f64]) -> Result<f64> {
    if delta == 0.0 {
        return Ok(0.0);
    }
    let n = sm.n();
    let yes = PdFactor::new(sm.gram())?;
    let no = PdFactor::new(&(sm.gram() + DMatrix::<f64>::identity(n, n) * delta))?;
    let a = yes.solve(v);
    let b = no.solve(v);
    let cross: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    let log_det_term: f64 = sm
        .gram_eigenvalues()
        .iter()
        .map(|&l| (delta / l).ln_1p())
        .sum();
    let llr = 0.5 * log_det_term - 0.5 * delta * cross;
    if llr.is_finite() {
        Ok(llr)
    } else {
        Err(Error::invalid(format!(
            "non-finite log-likelihood ratio {llr}"
        )))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub truth_yes: bool,
    pub guess_yes: bool,
    pub delta: f64,
    pub tv: TvBound,
    pub resamples: usize,
}

/// One round: draw `X` and `w`, flip the coin, observe, classify.
pub fn play_trial(cfg: &LowerBoundConfig, seed: u64) -> Result<TrialOutcome> {
    let mut rng = SeedState::new(seed);
    let inst = build_instance(cfg, &mut rng)?;
    let n = cfg.n;
    let w = rng.standard_normal_vec(n);
    let truth_yes = rng.uniform() < 0.5;
    let mut v: Vec<f64> = (&inst.matrix.x * nalgebra::DVector::from_vec(w))
        .iter()
        .copied()
        .collect();
    if !truth_yes {
        let sd = inst.delta.sqrt();
        for vi in v.iter_mut() {
            *vi += sd * rng.standard_normal();
        }
    }
    let llr = log_likelihood_ratio(&inst.matrix, inst.delta, &v)?;
    // Ties (δ = 0) go to YES; with a fair coin that is still a coin flip.
    let guess_yes = llr >= 0.0;
    Ok(TrialOutcome {
        truth_yes,
        guess_yes,
        delta: inst.delta,
        tv: tv_bound(&inst.matrix, inst.delta)?,
        resamples: inst.resamples,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub n: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub delta_override: Option<f64>,
    pub delta_stats: DeltaStats,
    pub trials: usize,
    pub successes: u64,
    pub success_rate: f64,
    pub wilson_interval: Interval,
    pub mean_tv_bound: f64,
    pub max_tv_bound: f64,
    /// `½√C`.
    pub tv_cap: f64,
    pub resamples: usize,
    /// Draws where `det Σ_NO / det Σ_YES ≤ 1` with `δ > 0`, or the trace
    /// exceeded its cap. Zero when the algebra holds.
    pub bound_violations: usize,
    /// `success_rate ≤ ½ + ½·mean_tv_bound + 3·stderr`.
    pub within_tv_limit: bool,
}

/// Plays `cfg.trials` independent rounds of the distinguishing game.
pub fn run_distinguish_game(cfg: &LowerBoundConfig) -> Result<GameReport> {
    cfg.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|i| play_trial(cfg, derive_seed(cfg.seed, i)))
        .collect::<Result<_>>()?;
    Ok(summarize(cfg, &outcomes))
}

fn summarize(cfg: &LowerBoundConfig, outcomes: &[TrialOutcome]) -> GameReport {
    let trials = outcomes.len();
    let successes = outcomes
        .iter()
        .filter(|o| o.truth_yes == o.guess_yes)
        .count() as u64;
    let success_rate = successes as f64 / trials as f64;
    let mean =
        |f: &dyn Fn(&TrialOutcome) -> f64| outcomes.iter().map(f).sum::<f64>() / trials as f64;
    let deltas = outcomes.iter().map(|o| o.delta);
    let delta_stats = DeltaStats {
        mean: mean(&|o| o.delta),
        min: deltas.clone().fold(f64::INFINITY, f64::min),
        max: deltas.fold(f64::NEG_INFINITY, f64::max),
    };
    let mean_tv_bound = mean(&|o| o.tv.bound);
    let max_tv_bound = outcomes.iter().map(|o| o.tv.bound).fold(0.0, f64::max);
    let bound_violations = outcomes
        .iter()
        .filter(|o| {
            let det_bad = o.delta > 0.0 && o.tv.log_det_ratio >= 0.0;
            let trace_bad = o.tv.trace > o.tv.trace_cap * (1.0 + 1e-12);
            det_bad || trace_bad
        })
        .count();
    let stderr = proportion_std_error(successes, trials as u64);
    GameReport {
        n: cfg.n,
        c: cfg.c,
        delta_override: cfg.delta_override,
        delta_stats,
        trials,
        successes,
        success_rate,
        wilson_interval: wilson95(successes, trials as u64),
        mean_tv_bound,
        max_tv_bound,
        tv_cap: 0.5 * cfg.c.sqrt(),
        resamples: outcomes.iter().map(|o| o.resamples).sum(),
        bound_violations,
        within_tv_limit: success_rate <= 0.5 + 0.5 * mean_tv_bound + 3.0 * stderr,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_fixture() {
        let sm = SampleMatrix::from_matrix(DMatrix::identity(2, 2)).unwrap();
        assert_eq!(sm.lambda_min(), 1.0);
        assert_eq!(sm.default_delta(0.01), 0.01 / 4.0);

        let tb = tv_bound(&sm, 1.0).unwrap();
        let expected = (0.25 * (2.0 - 4f64.ln())).sqrt();
        assert!((tb.bound - expected).abs() < 1e-15);
        assert!((tb.bound - 0.392).abs() < 1e-3);
        assert!((tb.log_det_ratio + 4f64.ln()).abs() < 1e-15);
        assert_eq!(tb.trace, 4.0);

        assert_eq!(tv_bound(&sm, 0.0).unwrap().bound, 0.0);
        assert!(tv_bound(&sm, -1.0).is_err());
    }

    #[test]
    fn default_delta_keeps_bound_under_half_root_c() {
        let c = 0.01;
        let cfg = LowerBoundConfig::new(100, c, 1, 0);
        let mut rng = SeedState::new(8);
        let inst = build_instance(&cfg, &mut rng).unwrap();
        let sm = &inst.matrix;
        assert!(inst.delta > 0.0);
        assert!(inst.delta <= c * sm.lambda_max() / 1e4);
        let tb = tv_bound(sm, inst.delta).unwrap();
        assert!(tb.bound <= 0.5 * c.sqrt());
        assert!(tb.log_det_ratio < 0.0);
        assert!(tb.trace <= 100.0 + c);
    }

    #[test]
    fn llr_matches_direct_log_densities() {
        use crate::gauss::{CovarianceMatrix, GaussianDist, MeanVector};
        let mut rng = SeedState::new(4);
        let sm = SampleMatrix::sample(4, &mut rng).unwrap();
        let delta = 0.7;
        let v = rng.standard_normal_vec(4);
        let yes = GaussianDist::new(
            MeanVector::zeros(4),
            CovarianceMatrix::new(sm.gram().clone()).unwrap(),
        )
        .unwrap();
        let no = GaussianDist::new(
            MeanVector::zeros(4),
            CovarianceMatrix::new(sm.gram() + DMatrix::identity(4, 4) * delta).unwrap(),
        )
        .unwrap();
        let direct = yes.log_density().unwrap().eval(&v) - no.log_density().unwrap().eval(&v);
        let llr = log_likelihood_ratio(&sm, delta, &v).unwrap();
        assert!((llr - direct).abs() < 1e-9, "{llr} vs {direct}");
    }

    #[test]
    fn config_validation() {
        assert!(LowerBoundConfig::new(1, 0.01, 10, 0).validate().is_err());
        assert!(LowerBoundConfig::new(10, 0.5, 10, 0).validate().is_err());
        assert!(LowerBoundConfig::new(10, 0.0, 10, 0).validate().is_err());
        assert!(LowerBoundConfig::new(10, 0.01, 0, 0).validate().is_err());
        let mut c = LowerBoundConfig::new(10, 0.01, 10, 0);
        c.delta_override = Some(-1.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_delta_game_is_a_coin_flip() {
        let mut cfg = LowerBoundConfig::new(5, 0.01, 2000, 3);
        cfg.delta_override = Some(0.0);
        let r = run_distinguish_game(&cfg).unwrap();
        assert!(
            r.wilson_interval.low <= 0.5 && 0.5 <= r.wilson_interval.high,
            "{r:?}"
        );
        assert_eq!(r.mean_tv_bound, 0.0);
    }

    #[test]
    fn game_is_reproducible() {
        let cfg = LowerBoundConfig::new(6, 0.01, 200, 9);
        assert_eq!(
            run_distinguish_game(&cfg).unwrap(),
            run_distinguish_game(&cfg).unwrap()
        );
    }

    #[test]
    fn report_json_has_declared_fields() {
        let r = run_distinguish_game(&LowerBoundConfig::new(3, 0.01, 50, 1)).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        for key in [
            "n",
            "C",
            "delta_stats",
            "trials",
            "success_rate",
            "wilson_interval",
            "mean_tv_bound",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
