//! Experiment orchestration behind the `lintest` binary.
//!
//! An [`ExperimentSpec`] is read from JSON, optionally overridden from the
//! command line, validated, and executed into an [`ExperimentReport`]. Trials
//! are seeded by `derive_seed(seed, trial)` and merged in trial order, so the
//! report does not depend on the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distro::{fmt_float, DistributionSpec, SampleDistribution};
use crate::error::{Error, Result};
use crate::lower_bound::{run_distinguish_game, GameReport, LowerBoundConfig};
use crate::oracle::{FunctionOracle, Oracle, OracleSpec};
use crate::rng::derive_seed;
use crate::stats::{wilson95, Interval};
use crate::tester::{run, Algorithm, Outcome, RejectSite, TesterConfig, TESTADD_QUERIES_PER_ROUND};
use crate::VERSION;

/// Largest tolerated spread of the normalized query ratio across a sweep.
pub const SCALING_BAND: f64 = 4.0;

/// Environment variable consulted when neither flag nor spec sets a seed.
pub const SEED_ENV: &str = "LINTEST_SEED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    TestAdditivity,
    TestLinearity,
    Calibrate,
    LowerBound,
    QueryScaling,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TestAdditivity => "test-additivity",
            Command::TestLinearity => "test-linearity",
            Command::Calibrate => "calibrate",
            Command::LowerBound => "lower-bound",
            Command::QueryScaling => "query-scaling",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// `(n, C)` cells for the lower-bound sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundGrid {
    pub ns: Vec<usize>,
    #[serde(rename = "Cs")]
    pub cs: Vec<f64>,
    /// Replaces the computed δ in every cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_override: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_spec: Option<OracleSpec>,
    /// `D`; a standard Gaussian of the oracle's dimension when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution_spec: Option<DistributionSpec>,
    /// Defaults by command: `df-linearity` for test-linearity, otherwise
    /// `df-additivity` when a distribution is given and
    /// `gaussian-additivity` when not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Strictly decreasing, for query-scaling.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<LowerBoundGrid>,
    /// Drop per-trial verdicts from the report.
    #[serde(default)]
    pub elide_verdicts: bool,
}

fn one() -> usize {
    1
}

/// Command-line values that take precedence over the spec file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub epsilon: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

impl ExperimentSpec {
    /// A spec for `command` with every optional field unset.
    pub fn new(command: Command) -> Self {
        Self {
            command,
            oracle_spec: None,
            distribution_spec: None,
            algorithm: None,
            epsilon: None,
            epsilons: None,
            trials: 1,
            seed: None,
            output: None,
            format: Format::Json,
            lower_bound: None,
            elide_verdicts: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(e) = o.epsilon {
            self.epsilon = Some(e);
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(p) = &o.output {
            self.output = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.format = f;
        }
    }

    /// Fills an unset seed from `env` (the value of [`SEED_ENV`]), else 0.
    pub fn resolve_seed(&mut self, env: Option<&str>) -> Result<u64> {
        if self.seed.is_none() {
            let seed = match env {
                Some(text) => text.trim().parse().map_err(|_| {
                    Error::config(format!(
                        "{SEED_ENV} must be an unsigned integer, got {text:?}"
                    ))
                })?,
                None => 0,
            };
            self.seed = Some(seed);
        }
        Ok(self.seed.unwrap_or(0))
    }

    pub fn algorithm(&self) -> Algorithm {
        match (self.algorithm, self.command) {
            (Some(a), _) => a,
            (None, Command::TestLinearity) => Algorithm::DfLinearity,
            (None, _) if self.distribution_spec.is_some() => Algorithm::DfAdditivity,
            (None, _) => Algorithm::GaussianAdditivity,
        }
    }

    /// Checks everything that can be checked without sampling.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials must be >= 1"));
        }
        match self.command {
            Command::LowerBound => {
                let grid = self
                    .lower_bound
                    .as_ref()
                    .ok_or_else(|| Error::config("lower-bound needs a `lower_bound` grid"))?;
                if grid.ns.is_empty() || grid.cs.is_empty() {
                    return Err(Error::config("lower-bound grid is empty"));
                }
                for cell in self.lower_bound_cells()? {
                    cell.validate()?;
                }
                Ok(())
            }
            Command::TestAdditivity | Command::TestLinearity | Command::Calibrate => {
                let alg = self.algorithm();
                match (self.command, alg) {
                    (Command::TestAdditivity, Algorithm::DfLinearity) => {
                        return Err(Error::config("test-additivity cannot run df-linearity"))
                    }
                    (Command::TestLinearity, a) if a != Algorithm::DfLinearity => {
                        return Err(Error::config("test-linearity runs df-linearity only"))
                    }
                    _ => {}
                }
                let eps = self
                    .epsilon
                    .ok_or_else(|| Error::config("epsilon is required"))?;
                TesterConfig::new(eps)?;
                self.check_oracle_and_distribution()
            }
            Command::QueryScaling => {
                let eps = self
                    .epsilons
                    .as_ref()
                    .ok_or_else(|| Error::config("query-scaling needs `epsilons`"))?;
                if eps.is_empty() {
                    return Err(Error::config("epsilons is empty"));
                }
                for e in eps {
                    TesterConfig::new(*e)?;
                }
                if eps.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::config("epsilons must be strictly decreasing"));
                }
                self.check_oracle_and_distribution()
            }
        }
    }

    fn check_oracle_and_distribution(&self) -> Result<()> {
        let oracle = self
            .oracle_spec
            .as_ref()
            .ok_or_else(|| Error::config("oracle_spec is required"))?
            .build()?;
        if let Some(d) = &self.distribution_spec {
            let d = d.build(0)?;
            if d.dim() != oracle.dim() {
                return Err(Error::Dimension {
                    expected: oracle.dim(),
                    got: d.dim(),
                });
            }
        }
        Ok(())
    }

    fn lower_bound_cells(&self) -> Result<Vec<LowerBoundConfig>> {
        let grid = self
            .lower_bound
            .as_ref()
            .ok_or_else(|| Error::config("lower-bound needs a `lower_bound` grid"))?;
        let seed = self.seed.unwrap_or(0);
        let mut cells = Vec::new();
        for &n in &grid.ns {
            for &c in &grid.cs {
                let mut cell =
                    LowerBoundConfig::new(n, c, self.trials, derive_seed(seed, cells.len() as u64));
                cell.delta_override = grid.delta_override;
                cells.push(cell);
            }
        }
        Ok(cells)
    }

    fn build_oracle(&self) -> Result<FunctionOracle> {
        self.oracle_spec
            .as_ref()
            .ok_or_else(|| Error::config("oracle_spec is required"))?
            .build()
    }

    fn build_distribution(&self, dim: usize) -> Result<SampleDistribution> {
        match &self.distribution_spec {
            Some(d) => d.build(0),
            None => Ok(SampleDistribution::standard_gaussian(dim, 0)),
        }
    }
}

/// One tester run inside an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialVerdict {
    pub trial: u64,
    pub seed: u64,
    pub outcome: Outcome,
    pub reject_site: Option<RejectSite>,
    pub queries_used: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub trials: usize,
    pub accepts: u64,
    pub rejects: u64,
    pub accept_rate: f64,
    pub reject_rate: f64,
    pub accept_interval: Interval,
    pub reject_interval: Interval,
    pub mean_queries: f64,
    pub max_queries: u64,
    /// Queries used → number of trials.
    pub query_histogram: BTreeMap<u64, u64>,
    pub reject_sites: BTreeMap<RejectSite, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdicts: Option<Vec<TrialVerdict>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub n_main: usize,
    pub n_queryg: usize,
    pub max_queries: u64,
    /// Accept-path count of the algorithm.
    pub formula: u64,
    /// `max_queries / ((1/ε)·log₂(1/ε))`.
    pub ratio: f64,
    /// Same ratio with the ε-independent additivity-test queries removed.
    pub main_loop_ratio: f64,
    pub all_accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryScaling {
    pub algorithm: Algorithm,
    pub rows: Vec<ScalingRow>,
    pub measured_within_formula: bool,
    /// Every trial accepted and used exactly the formula count.
    pub measured_equals_formula: bool,
    pub formula_increasing: bool,
    /// `max(ratio) / min(ratio)`.
    pub ratio_spread: f64,
    pub main_loop_ratio_spread: f64,
    /// `ratio_spread < SCALING_BAND`.
    pub ratio_within_band: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub command: Command,
    pub seed: u64,
    /// The effective spec after overrides.
    pub spec: ExperimentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<Calibration>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub query_scaling: Option<QueryScaling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<Vec<GameReport>>,
    pub wall_clock_secs: f64,
}

/// Runs `f` on a pool of `jobs` workers (available parallelism when `None`).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::config("jobs must be >= 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Validates and runs `spec`. An unset seed is treated as 0.
pub fn execute(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let mut spec = spec.clone();
    if spec.seed.is_none() {
        spec.seed = Some(0);
    }
    spec.validate()?;
    let start = Instant::now();
    let mut report = ExperimentReport {
        version: VERSION.to_string(),
        command: spec.command,
        seed: spec.seed.unwrap_or(0),
        spec: spec.clone(),
        calibration: None,
        query_scaling: None,
        lower_bound: None,
        wall_clock_secs: 0.0,
    };
    match spec.command {
        Command::TestAdditivity | Command::TestLinearity | Command::Calibrate => {
            report.calibration = Some(cmd_calibrate(&spec)?);
        }
        Command::QueryScaling => report.query_scaling = Some(cmd_query_scaling(&spec)?),
        Command::LowerBound => report.lower_bound = Some(cmd_lower_bound(&spec)?),
    }
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

fn run_trials(
    spec: &ExperimentSpec,
    algorithm: Algorithm,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<TrialVerdict>> {
    let oracle = spec.build_oracle()?;
    let base = spec.build_distribution(oracle.dim())?;
    (0..spec.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = derive_seed(seed, trial);
            // A fresh clone per trial keeps query counts trial-local.
            let f = oracle.clone();
            let mut d = base.clone();
            d.reseed(derive_seed(trial_seed, 1));
            let cfg = TesterConfig::new(epsilon)?.with_seed(trial_seed);
            let v = run(algorithm, &f, &mut d, &cfg)?;
            Ok(TrialVerdict {
                trial,
                seed: trial_seed,
                outcome: v.outcome,
                reject_site: v.reject_site,
                queries_used: v.queries_used,
            })
        })
        .collect()
}

/// Repeated tester runs with acceptance statistics.
pub fn cmd_calibrate(spec: &ExperimentSpec) -> Result<Calibration> {
    spec.validate()?;
    let algorithm = spec.algorithm();
    let epsilon = spec.epsilon.unwrap_or_default();
    let verdicts = run_trials(spec, algorithm, epsilon, spec.seed.unwrap_or(0))?;

    let trials = verdicts.len();
    let accepts = verdicts
        .iter()
        .filter(|v| v.outcome == Outcome::Accept)
        .count() as u64;
    let rejects = trials as u64 - accepts;
    let accept_rate = accepts as f64 / trials as f64;
    let mut query_histogram = BTreeMap::new();
    let mut reject_sites = BTreeMap::new();
    for v in &verdicts {
        *query_histogram.entry(v.queries_used).or_insert(0) += 1;
        if let Some(site) = v.reject_site {
            *reject_sites.entry(site).or_insert(0) += 1;
        }
    }
    Ok(Calibration {
        algorithm,
        epsilon,
        trials,
        accepts,
        rejects,
        accept_rate,
        reject_rate: 1.0 - accept_rate,
        accept_interval: wilson95(accepts, trials as u64),
        reject_interval: wilson95(rejects, trials as u64),
        mean_queries: verdicts.iter().map(|v| v.queries_used as f64).sum::<f64>() / trials as f64,
        max_queries: verdicts.iter().map(|v| v.queries_used).max().unwrap_or(0),
        query_histogram,
        reject_sites,
        verdicts: (!spec.elide_verdicts).then_some(verdicts),
    })
}

/// Query counts across an ε sweep against the closed-form accept-path count.
pub fn cmd_query_scaling(spec: &ExperimentSpec) -> Result<QueryScaling> {
    spec.validate()?;
    let algorithm = spec.algorithm();
    let seed = spec.seed.unwrap_or(0);
    let mut rows = Vec::new();
    let mut exact = true;
    for (i, &eps) in spec
        .epsilons
        .as_deref()
        .unwrap_or_default()
        .iter()
        .enumerate()
    {
        let cfg = TesterConfig::new(eps)?;
        let formula = cfg.accept_path_queries(algorithm);
        let verdicts = run_trials(spec, algorithm, eps, derive_seed(seed, i as u64))?;
        let max_queries = verdicts.iter().map(|v| v.queries_used).max().unwrap_or(0);
        let all_accepted = verdicts.iter().all(|v| v.outcome == Outcome::Accept);
        exact &= all_accepted && verdicts.iter().all(|v| v.queries_used == formula);
        let scale = (1.0 / eps) * (1.0 / eps).log2();
        let fixed = fixed_queries(&cfg, algorithm);
        rows.push(ScalingRow {
            epsilon: eps,
            n_main: match algorithm {
                Algorithm::DfLinearity => cfg.n_main_linearity,
                _ => cfg.n_main,
            },
            n_queryg: cfg.n_queryg,
            max_queries,
            formula,
            ratio: max_queries as f64 / scale,
            main_loop_ratio: max_queries.saturating_sub(fixed) as f64 / scale,
            all_accepted,
        });
    }
    let spread = |f: fn(&ScalingRow) -> f64| {
        let (lo, hi) = rows
            .iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r), hi.max(r))
            });
        hi / lo
    };
    let ratio_spread = spread(|r| r.ratio);
    Ok(QueryScaling {
        algorithm,
        measured_within_formula: rows.iter().all(|r| r.max_queries <= r.formula),
        measured_equals_formula: exact,
        formula_increasing: rows.windows(2).all(|w| w[1].formula > w[0].formula),
        ratio_spread,
        main_loop_ratio_spread: spread(|r| r.main_loop_ratio),
        ratio_within_band: ratio_spread < SCALING_BAND,
        rows,
    })
}

/// Accept-path queries that do not depend on ε.
fn fixed_queries(cfg: &TesterConfig, algorithm: Algorithm) -> u64 {
    let testadd = TESTADD_QUERIES_PER_ROUND * cfg.n_testadd as u64;
    match algorithm {
        Algorithm::DfLinearity => 2 * testadd,
        _ => testadd,
    }
}

/// One distinguishing game per `(n, C)` cell, in grid order.
pub fn cmd_lower_bound(spec: &ExperimentSpec) -> Result<Vec<GameReport>> {
    spec.validate()?;
    spec.lower_bound_cells()?
        .iter()
        .map(run_distinguish_game)
        .collect()
}

impl ExperimentReport {
    /// Serializes in `format`. JSON output is pretty-printed.
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => Ok(serde_json::to_string_pretty(self)? + "\n"),
            Format::Csv => Ok(self.to_csv()),
        }
    }

    /// Column order:
    /// - calibration: `trial,seed,outcome,reject_site,queries_used`
    ///   (one aggregate row `accepts,rejects,accept_rate,mean_queries,max_queries`
    ///   when verdicts are elided)
    /// - query scaling: `epsilon,n_main,n_queryg,max_queries,formula,ratio,main_loop_ratio,all_accepted`
    /// - lower bound: `n,C,delta_override,trials,successes,success_rate,wilson_low,wilson_high,delta_mean,mean_tv_bound,max_tv_bound,tv_cap,resamples,bound_violations,within_tv_limit`
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let mut line = |fields: Vec<String>| {
            out.push_str(&fields.join(","));
            out.push('\n');
        };
        if let Some(c) = &self.calibration {
            match &c.verdicts {
                Some(vs) => {
                    line(cols("trial,seed,outcome,reject_site,queries_used"));
                    for v in vs {
                        line(vec![
                            v.trial.to_string(),
                            v.seed.to_string(),
                            match v.outcome {
                                Outcome::Accept => "accept".into(),
                                Outcome::Reject => "reject".into(),
                            },
                            v.reject_site.map(RejectSite::name).unwrap_or("").into(),
                            v.queries_used.to_string(),
                        ]);
                    }
                }
                None => {
                    line(cols("accepts,rejects,accept_rate,mean_queries,max_queries"));
                    line(vec![
                        c.accepts.to_string(),
                        c.rejects.to_string(),
                        fmt_float(c.accept_rate),
                        fmt_float(c.mean_queries),
                        c.max_queries.to_string(),
                    ]);
                }
            }
        }
        if let Some(q) = &self.query_scaling {
            line(cols(
                "epsilon,n_main,n_queryg,max_queries,formula,ratio,main_loop_ratio,all_accepted",
            ));
            for r in &q.rows {
                line(vec![
                    fmt_float(r.epsilon),
                    r.n_main.to_string(),
                    r.n_queryg.to_string(),
                    r.max_queries.to_string(),
                    r.formula.to_string(),
                    fmt_float(r.ratio),
                    fmt_float(r.main_loop_ratio),
                    r.all_accepted.to_string(),
                ]);
            }
        }
        if let Some(cells) = &self.lower_bound {
            line(cols("n,C,delta_override,trials,successes,success_rate,wilson_low,wilson_high,delta_mean,mean_tv_bound,max_tv_bound,tv_cap,resamples,bound_violations,within_tv_limit"));
            for g in cells {
                line(vec![
                    g.n.to_string(),
                    fmt_float(g.c),
                    g.delta_override.map(fmt_float).unwrap_or_default(),
                    g.trials.to_string(),
                    g.successes.to_string(),
                    fmt_float(g.success_rate),
                    fmt_float(g.wilson_interval.low),
                    fmt_float(g.wilson_interval.high),
                    fmt_float(g.delta_stats.mean),
                    fmt_float(g.mean_tv_bound),
                    fmt_float(g.max_tv_bound),
                    fmt_float(g.tv_cap),
                    g.resamples.to_string(),
                    g.bound_violations.to_string(),
                    g.within_tv_limit.to_string(),
                ]);
            }
        }
        out
    }
}

fn cols(header: &str) -> Vec<String> {
    header.split(',').map(String::from).collect()
}
