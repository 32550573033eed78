//! Additivity and linearity testers.
//!
//! * [`test_additivity`]: repeated negation / difference / three-point checks
//!   on standard Gaussian points.
//! * [`query_g`]: the self-corrected value `k_p · (f(p/k_p − x) + f(x))`,
//!   rejecting when independent probes disagree.
//! * [`run_gaussian_additivity`] and [`run_df_additivity`]: the additivity
//!   testers over `N(0, I)` and over an arbitrary sampleable `D`.
//! * [`force_negativity`] and [`run_df_linearity`]: the linearity tester for
//!   continuous `f`, which first replaces `f` by its odd part.
//!
//! All equality checks use the configured [`EqPolicy`] and every tester
//! rejects at the first failed check.

use serde::{Deserialize, Serialize};

use crate::distro::SampleDistribution;
use crate::error::{check_dim, Error, Result};
use crate::gauss::norm2;
use crate::oracle::{EqPolicy, OddPart, Oracle};
use crate::rng::SeedState;

/// Smallest `N` with `(99/100)^N < 1/10`.
pub fn derived_testadd_rounds() -> usize {
    let mut n = 1;
    while 0.99f64.powi(n as i32) >= 0.1 {
        n += 1;
    }
    n
}

/// Smallest `N` with `2^{−N} ≤ ε/2`, i.e. `⌈log₂(2/ε)⌉`.
pub fn derived_queryg_samples(epsilon: f64) -> usize {
    let mut n = 1;
    while 0.5f64.powi(n as i32) > epsilon / 2.0 {
        n += 1;
    }
    n
}

/// `⌈2 ln 10 / ε⌉`, so that `(1 − ε/2)^N < 1/10`.
pub fn derived_main_rounds(epsilon: f64) -> usize {
    (2.0 * 10f64.ln() / epsilon).ceil() as usize
}

/// `⌈ln 10 / ε⌉`, so that `(1 − ε)^N ≤ 1/10`.
pub fn derived_forceneg_rounds(epsilon: f64) -> usize {
    (10f64.ln() / epsilon).ceil() as usize
}

/// Negation (2), difference (3) and three-point (3) checks.
pub const TESTADD_QUERIES_PER_ROUND: u64 = 8;

pub const DEFAULT_R: u32 = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    GaussianAdditivity,
    DfAdditivity,
    DfLinearity,
}

impl Algorithm {
    /// Whether the algorithm samples from `D`.
    pub fn uses_distribution(self) -> bool {
        !matches!(self, Algorithm::GaussianAdditivity)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TesterConfig {
    pub epsilon: f64,
    /// Radius parameter: self-correction works inside the ball of radius `1/r`.
    pub r: u32,
    pub n_testadd: usize,
    pub n_queryg: usize,
    pub n_main: usize,
    /// Main rounds of the linearity tester, derived at `ε/2`.
    pub n_main_linearity: usize,
    pub n_forceneg: usize,
    pub policy: EqPolicy,
    pub seed: u64,
    /// Keep every queried point in [`Verdict::transcript`].
    #[serde(default)]
    pub record_transcript: bool,
}

impl TesterConfig {
    /// Config with every repetition count derived from `epsilon`.
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::config(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(Self {
            epsilon,
            r: DEFAULT_R,
            n_testadd: derived_testadd_rounds(),
            n_queryg: derived_queryg_samples(epsilon),
            n_main: derived_main_rounds(epsilon),
            n_main_linearity: derived_main_rounds(epsilon / 2.0),
            n_forceneg: derived_forceneg_rounds(epsilon),
            policy: EqPolicy::default(),
            seed: 0,
            record_transcript: false,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config(format!(
                "epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.r == 0 {
            return Err(Error::config("r must be a positive integer"));
        }
        let counts = [
            ("n_testadd", self.n_testadd),
            ("n_queryg", self.n_queryg),
            ("n_main", self.n_main),
            ("n_main_linearity", self.n_main_linearity),
            ("n_forceneg", self.n_forceneg),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(format!("{name} must be >= 1")));
            }
        }
        self.policy.validate()
    }

    /// Queries spent by `algorithm` when it accepts, i.e. when every round runs.
    pub fn accept_path_queries(&self, algorithm: Algorithm) -> u64 {
        let testadd = TESTADD_QUERIES_PER_ROUND * self.n_testadd as u64;
        let per_round = 1 + 2 * self.n_queryg as u64;
        match algorithm {
            Algorithm::GaussianAdditivity | Algorithm::DfAdditivity => {
                testadd + self.n_main as u64 * per_round
            }
            Algorithm::DfLinearity => {
                2 * self.n_forceneg as u64
                    + 2 * (testadd + self.n_main_linearity as u64 * per_round)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Accept,
    Reject,
}

/// Which check fired.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectSite {
    /// `f(−x) ≠ −f(x)` inside the additivity test.
    Negation,
    /// `f(x − y) ≠ f(x) − f(y)`.
    Difference,
    /// `f((x−y)/2) ≠ f((x−z)/2) + f((z−y)/2)`.
    ThreePoint,
    /// Self-correction probes disagreed.
    QueryGDisagreement,
    /// `f(p)` differs from the self-corrected value.
    #[serde(rename = "f-neq-g")]
    FNotEqualG,
    /// `f(−x) ≠ −f(x)` for some `x ~ D` in the odd-part check.
    ForceNegativity,
}

impl RejectSite {
    /// Kebab-case name, as serialized.
    pub fn name(self) -> &'static str {
        match self {
            RejectSite::Negation => "negation",
            RejectSite::Difference => "difference",
            RejectSite::ThreePoint => "three-point",
            RejectSite::QueryGDisagreement => "query-g-disagreement",
            RejectSite::FNotEqualG => "f-neq-g",
            RejectSite::ForceNegativity => "force-negativity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub point: Vec<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub reject_site: Option<RejectSite>,
    pub queries_used: u64,
    pub seed: u64,
    pub epsilon: f64,
    /// Every query, in order, when the config asks for it.
    #[serde(skip)]
    pub transcript: Vec<Probe>,
    /// Queries made by the check that fired.
    #[serde(skip)]
    pub evidence: Vec<Probe>,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.outcome == Outcome::Accept
    }
}

/// `k_p`: the integer that maps `p` into the ball of radius `1/r`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ScalingIndex(u64);

impl ScalingIndex {
    pub fn get(self) -> u64 {
        self.0
    }
}

/// `1` when `‖p‖₂ ≤ 1/r`, otherwise `⌈r · ‖p‖₂⌉`, bumped by one in the rare
/// case where rounding leaves `‖p/k‖₂` a hair above `1/r`.
pub fn scaling_index(p: &[f64], r: u32) -> ScalingIndex {
    let radius = 1.0 / r as f64;
    let len = norm2(p);
    if len <= radius {
        return ScalingIndex(1);
    }
    let mut k = (r as f64 * len).ceil().max(1.0) as u64;
    while norm2(&scale(p, k)) > radius {
        k += 1;
    }
    ScalingIndex(k)
}

fn scale(p: &[f64], k: u64) -> Vec<f64> {
    let k = k as f64;
    p.iter().map(|v| v / k).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum QueryG {
    Value(f64),
    Reject,
}

/// Bookkeeping shared by one tester run.
struct Session<'a, O: ?Sized> {
    f: &'a O,
    policy: EqPolicy,
    gauss: &'a mut SeedState,
    transcript: Option<Vec<Probe>>,
    check: Vec<Probe>,
}

impl<'a, O: Oracle + ?Sized> Session<'a, O> {
    fn new(f: &'a O, policy: EqPolicy, gauss: &'a mut SeedState, record: bool) -> Self {
        Self {
            f,
            policy,
            gauss,
            transcript: record.then(Vec::new),
            check: Vec::new(),
        }
    }

    fn begin_check(&mut self) {
        self.check.clear();
    }

    fn q(&mut self, x: Vec<f64>) -> Result<f64> {
        let value = self.f.query(&x)?;
        if let Some(t) = self.transcript.as_mut() {
            t.push(Probe {
                point: x.clone(),
                value,
            });
        }
        self.check.push(Probe { point: x, value });
        Ok(value)
    }

    fn eq(&self, a: f64, b: f64) -> bool {
        self.policy.approx_eq(a, b)
    }

    fn gaussian(&mut self) -> Vec<f64> {
        self.gauss.standard_normal_vec(self.f.dim())
    }

    fn test_additivity(&mut self, rounds: usize) -> Result<Option<RejectSite>> {
        for _ in 0..rounds {
            let x = self.gaussian();
            let y = self.gaussian();
            let z = self.gaussian();

            self.begin_check();
            let fx = self.q(x.clone())?;
            let f_neg_x = self.q(x.iter().map(|v| -v).collect())?;
            if !self.eq(f_neg_x, -fx) {
                return Ok(Some(RejectSite::Negation));
            }

            self.begin_check();
            let f_diff = self.q(sub(&x, &y))?;
            let fx = self.q(x.clone())?;
            let fy = self.q(y.clone())?;
            if !self.eq(f_diff, fx - fy) {
                return Ok(Some(RejectSite::Difference));
            }

            self.begin_check();
            let lhs = self.q(half_diff(&x, &y))?;
            let a = self.q(half_diff(&x, &z))?;
            let b = self.q(half_diff(&z, &y))?;
            if !self.eq(lhs, a + b) {
                return Ok(Some(RejectSite::ThreePoint));
            }
        }
        Ok(None)
    }

    fn query_g(&mut self, p: &[f64], r: u32, samples: usize) -> Result<QueryG> {
        let k = scaling_index(p, r).get();
        let shrunk = scale(p, k);
        self.begin_check();
        let mut first = None;
        for _ in 0..samples {
            let x = self.gaussian();
            let v = self.q(sub(&shrunk, &x))? + self.q(x)?;
            match first {
                None => first = Some(v),
                Some(v1) if !self.eq(v, v1) => return Ok(QueryG::Reject),
                Some(_) => {}
            }
        }
        let v1 = first.expect("at least one probe");
        Ok(QueryG::Value(k as f64 * v1))
    }

    /// One round of the distance check at `p`.
    fn compare_with_g(
        &mut self,
        p: Vec<f64>,
        r: u32,
        samples: usize,
    ) -> Result<Option<RejectSite>> {
        let g = match self.query_g(&p, r, samples)? {
            QueryG::Reject => return Ok(Some(RejectSite::QueryGDisagreement)),
            QueryG::Value(g) => g,
        };
        let fp = self.q(p)?;
        if self.eq(fp, g) {
            Ok(None)
        } else {
            Ok(Some(RejectSite::FNotEqualG))
        }
    }

    fn finish(self, site: Option<RejectSite>, cfg: &TesterConfig, queries_used: u64) -> Verdict {
        let evidence = if site.is_some() {
            self.check
        } else {
            Vec::new()
        };
        Verdict {
            outcome: if site.is_some() {
                Outcome::Reject
            } else {
                Outcome::Accept
            },
            reject_site: site,
            queries_used,
            seed: cfg.seed,
            epsilon: cfg.epsilon,
            transcript: self.transcript.unwrap_or_default(),
            evidence,
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn half_diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (x - y) / 2.0).collect()
}

/// Runs `n_testadd` rounds of the three additivity checks on `x, y, z ~ N(0, I)`.
pub fn test_additivity<O: Oracle + ?Sized>(f: &O, cfg: &TesterConfig) -> Result<Verdict> {
    cfg.validate()?;
    let start = f.query_count();
    let mut gauss = SeedState::new(cfg.seed);
    let mut s = Session::new(f, cfg.policy, &mut gauss, cfg.record_transcript);
    let site = s.test_additivity(cfg.n_testadd)?;
    Ok(s.finish(site, cfg, f.query_count() - start))
}

/// Self-corrected value of `f` at `p` from `n_queryg` probes drawn from `rng`.
pub fn query_g<O: Oracle + ?Sized>(
    f: &O,
    p: &[f64],
    cfg: &TesterConfig,
    rng: &mut SeedState,
) -> Result<QueryG> {
    cfg.validate()?;
    check_dim(f.dim(), p.len())?;
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("query_g point has non-finite entries"));
    }
    Session::new(f, cfg.policy, rng, false).query_g(p, cfg.r, cfg.n_queryg)
}

enum PointSource<'d> {
    Gaussian,
    Distribution(&'d mut SampleDistribution),
}

fn run_additivity<O: Oracle + ?Sized>(
    f: &O,
    mut source: PointSource<'_>,
    rounds: usize,
    cfg: &TesterConfig,
    gauss: &mut SeedState,
) -> Result<(Option<RejectSite>, Vec<Probe>, Vec<Probe>)> {
    let mut s = Session::new(f, cfg.policy, gauss, cfg.record_transcript);
    let mut site = s.test_additivity(cfg.n_testadd)?;
    if site.is_none() {
        for _ in 0..rounds {
            let p = match &mut source {
                PointSource::Gaussian => s.gaussian(),
                PointSource::Distribution(d) => d.draw()?,
            };
            site = s.compare_with_g(p, cfg.r, cfg.n_queryg)?;
            if site.is_some() {
                break;
            }
        }
    }
    let evidence = if site.is_some() { s.check } else { Vec::new() };
    Ok((site, s.transcript.unwrap_or_default(), evidence))
}

fn verdict(
    site: Option<RejectSite>,
    cfg: &TesterConfig,
    queries_used: u64,
    transcript: Vec<Probe>,
    evidence: Vec<Probe>,
) -> Verdict {
    Verdict {
        outcome: if site.is_some() {
            Outcome::Reject
        } else {
            Outcome::Accept
        },
        reject_site: site,
        queries_used,
        seed: cfg.seed,
        epsilon: cfg.epsilon,
        transcript,
        evidence,
    }
}

/// Additivity tester over the standard Gaussian.
pub fn run_gaussian_additivity<O: Oracle + ?Sized>(f: &O, cfg: &TesterConfig) -> Result<Verdict> {
    cfg.validate()?;
    let start = f.query_count();
    let mut gauss = SeedState::new(cfg.seed);
    let (site, transcript, evidence) =
        run_additivity(f, PointSource::Gaussian, cfg.n_main, cfg, &mut gauss)?;
    Ok(verdict(
        site,
        cfg,
        f.query_count() - start,
        transcript,
        evidence,
    ))
}

/// Distribution-free additivity tester: distance rounds draw `p ~ d`, all
/// other sampling stays on `N(0, I)`.
pub fn run_df_additivity<O: Oracle + ?Sized>(
    f: &O,
    d: &mut SampleDistribution,
    cfg: &TesterConfig,
) -> Result<Verdict> {
    cfg.validate()?;
    check_dim(f.dim(), d.dim())?;
    let start = f.query_count();
    let mut gauss = SeedState::new(cfg.seed);
    let (site, transcript, evidence) =
        run_additivity(f, PointSource::Distribution(d), cfg.n_main, cfg, &mut gauss)?;
    Ok(verdict(
        site,
        cfg,
        f.query_count() - start,
        transcript,
        evidence,
    ))
}

pub enum ForceNegativity<O> {
    /// `f(−x) = −f(x)` held on every sample; queries go to the odd part.
    Odd(OddPart<O>),
    Reject(Verdict),
}

impl<O> ForceNegativity<O> {
    pub fn is_reject(&self) -> bool {
        matches!(self, ForceNegativity::Reject(_))
    }
}

/// Checks `f(−x) = −f(x)` on `n_forceneg` points `x ~ d` and, when every
/// check passes, hands back `f′(x) = (f(x) − f(−x))/2`.
pub fn force_negativity<O: Oracle>(
    f: O,
    d: &mut SampleDistribution,
    cfg: &TesterConfig,
) -> Result<ForceNegativity<O>> {
    cfg.validate()?;
    check_dim(f.dim(), d.dim())?;
    let start = f.query_count();
    let mut gauss = SeedState::new(cfg.seed);
    let mut s = Session::new(&f, cfg.policy, &mut gauss, cfg.record_transcript);
    let mut site = None;
    for _ in 0..cfg.n_forceneg {
        let x = d.draw()?;
        s.begin_check();
        let fx = s.q(x.clone())?;
        let f_neg_x = s.q(x.iter().map(|v| -v).collect())?;
        if !s.eq(f_neg_x, -fx) {
            site = Some(RejectSite::ForceNegativity);
            break;
        }
    }
    if site.is_some() {
        let used = f.query_count() - start;
        return Ok(ForceNegativity::Reject(s.finish(site, cfg, used)));
    }
    drop(s);
    Ok(ForceNegativity::Odd(OddPart::new(f)))
}

/// Distribution-free linearity tester for continuous `f`.
pub fn run_df_linearity<O: Oracle + ?Sized>(
    f: &O,
    d: &mut SampleDistribution,
    cfg: &TesterConfig,
) -> Result<Verdict> {
    cfg.validate()?;
    check_dim(f.dim(), d.dim())?;
    let start = f.query_count();
    // The odd-part check and the additivity part share one Gaussian stream;
    // the odd-part check itself draws only from `d`.
    let odd = match force_negativity(f, d, cfg)? {
        ForceNegativity::Reject(mut v) => {
            v.queries_used = f.query_count() - start;
            return Ok(v);
        }
        ForceNegativity::Odd(odd) => odd,
    };
    let mut gauss = SeedState::new(cfg.seed);
    let (site, transcript, evidence) = run_additivity(
        &odd,
        PointSource::Distribution(d),
        cfg.n_main_linearity,
        cfg,
        &mut gauss,
    )?;
    Ok(verdict(
        site,
        cfg,
        f.query_count() - start,
        transcript,
        evidence,
    ))
}

/// Runs `algorithm` on `f`. `d` is ignored by the Gaussian tester.
pub fn run<O: Oracle + ?Sized>(
    algorithm: Algorithm,
    f: &O,
    d: &mut SampleDistribution,
    cfg: &TesterConfig,
) -> Result<Verdict> {
    match algorithm {
        Algorithm::GaussianAdditivity => run_gaussian_additivity(f, cfg),
        Algorithm::DfAdditivity => run_df_additivity(f, d, cfg),
        Algorithm::DfLinearity => run_df_linearity(f, d, cfg),
    }
}
