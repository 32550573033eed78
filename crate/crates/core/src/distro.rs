//! The unknown distribution `D` of the distribution-free model.
//!
//! Testers only ever sample from `D`; no densities are evaluated here.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::gauss::{CovarianceMatrix, GaussianDist, GaussianSampler, MeanVector, Point};
use crate::rng::SeedState;

const WEIGHT_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
enum Kind {
    StandardGaussian(usize),
    Gaussian {
        dist: GaussianDist,
        sampler: GaussianSampler,
    },
    Mixture {
        cumulative: Vec<f64>,
        components: Vec<Kind>,
    },
    Empirical(Arc<Vec<Point>>),
}

impl Kind {
    fn dim(&self) -> usize {
        match self {
            Kind::StandardGaussian(n) => *n,
            Kind::Gaussian { dist, .. } => dist.dim(),
            Kind::Mixture { components, .. } => components[0].dim(),
            Kind::Empirical(rows) => rows[0].len(),
        }
    }

    fn draw(&self, rng: &mut SeedState, selector: &mut SeedState) -> Point {
        match self {
            Kind::StandardGaussian(n) => rng.standard_normal_vec(*n),
            Kind::Gaussian { sampler, .. } => sampler.sample(rng),
            Kind::Mixture {
                cumulative,
                components,
            } => {
                let u = selector.uniform();
                let i = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(components.len() - 1);
                components[i].draw(rng, selector)
            }
            Kind::Empirical(rows) => rows[rng.index(rows.len())].clone(),
        }
    }
}

/// A seeded sampler over `Rⁿ`. Cloning copies the stream position.
#[derive(Clone, Debug)]
pub struct SampleDistribution {
    kind: Kind,
    rng: SeedState,
    // Mixture component choices use their own ChaCha stream so that the
    // coordinates drawn by a component do not depend on the selection draws.
    selector: SeedState,
}

impl SampleDistribution {
    fn from_kind(kind: Kind, seed: u64) -> Self {
        let rng = SeedState::new(seed);
        let selector = rng.substream(1);
        Self {
            kind,
            rng,
            selector,
        }
    }

    pub fn standard_gaussian(n: usize, seed: u64) -> Self {
        Self::from_kind(Kind::StandardGaussian(n.max(1)), seed)
    }

    pub fn gaussian(dist: GaussianDist, seed: u64) -> Result<Self> {
        let sampler = dist.sampler()?;
        Ok(Self::from_kind(Kind::Gaussian { dist, sampler }, seed))
    }

    /// `N(µ, I)`.
    pub fn shifted_gaussian(mean: Vec<f64>, seed: u64) -> Result<Self> {
        let n = mean.len();
        let dist = GaussianDist::new(MeanVector::new(mean)?, CovarianceMatrix::identity(n.max(1)))?;
        Self::gaussian(dist, seed)
    }

    /// Mixture of the given components. Component seeds are ignored; the
    /// mixture drives all components from its own stream.
    pub fn mixture(
        weights: Vec<f64>,
        components: Vec<SampleDistribution>,
        seed: u64,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::invalid(format!(
                "mixture needs one weight per component, got {} weights and {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("mixture weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SLACK {
            return Err(Error::invalid(format!(
                "mixture weights sum to {total}, not 1"
            )));
        }
        let dim = components[0].dim();
        for c in &components {
            check_dim(dim, c.dim())?;
        }
        let cumulative = weights
            .iter()
            .scan(0.0, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let components = components.into_iter().map(|c| c.kind).collect();
        Ok(Self::from_kind(
            Kind::Mixture {
                cumulative,
                components,
            },
            seed,
        ))
    }

    /// Uniform with replacement over `rows`.
    pub fn empirical(rows: Vec<Point>, seed: u64) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::invalid("empirical dataset is empty"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::invalid("empirical rows must have dimension >= 1"));
        }
        for row in &rows {
            check_dim(dim, row.len())?;
        }
        Ok(Self::from_kind(Kind::Empirical(Arc::new(rows)), seed))
    }

    /// Loads a CSV dataset (one point per line, no header) as an empirical
    /// distribution.
    pub fn load_empirical(path: impl AsRef<Path>, seed: u64) -> Result<Self> {
        Self::empirical(read_points_csv(path)?, seed)
    }

    pub fn dim(&self) -> usize {
        self.kind.dim()
    }

    pub fn seed(&self) -> u64 {
        self.rng.seed()
    }

    /// Restarts the stream under a new seed.
    pub fn reseed(&mut self, seed: u64) {
        self.rng = SeedState::new(seed);
        self.selector = self.rng.substream(1);
    }

    pub fn draw(&mut self) -> Result<Point> {
        Ok(self.kind.draw(&mut self.rng, &mut self.selector))
    }
}

/// Parses a headerless CSV of floats with a constant row width.
pub fn parse_points_csv(text: &str, path: &Path) -> Result<Vec<Point>> {
    let mut rows: Vec<Point> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                let field = field.trim();
                field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        line: line_no,
                        message: format!("`{field}` is not a finite number"),
                    })
            })
            .collect::<Result<Point>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("expected {} columns, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok(rows)
}

pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_points_csv(&text, path)
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_float(v: f64) -> String {
    format!("{v:?}")
}

pub fn format_points_csv(rows: &[Point]) -> String {
    let mut out = String::new();
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| fmt_float(*v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// JSON description of a sample distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DistributionSpec {
    StandardGaussian {
        dim: usize,
    },
    ShiftedGaussian {
        mean: Vec<f64>,
        /// Identity when omitted.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cov: Option<Vec<Vec<f64>>>,
    },
    Mixture {
        weights: Vec<f64>,
        components: Vec<DistributionSpec>,
    },
    Empirical {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<Vec<Point>>,
    },
}

impl DistributionSpec {
    pub fn build(&self, seed: u64) -> Result<SampleDistribution> {
        match self {
            DistributionSpec::StandardGaussian { dim } => {
                if *dim == 0 {
                    return Err(Error::config("distribution dim must be >= 1"));
                }
                Ok(SampleDistribution::standard_gaussian(*dim, seed))
            }
            DistributionSpec::ShiftedGaussian { mean, cov } => match cov {
                None => SampleDistribution::shifted_gaussian(mean.clone(), seed),
                Some(rows) => {
                    let dist = GaussianDist::new(
                        MeanVector::new(mean.clone())?,
                        CovarianceMatrix::from_rows(rows)?,
                    )?;
                    SampleDistribution::gaussian(dist, seed)
                }
            },
            DistributionSpec::Mixture {
                weights,
                components,
            } => {
                let comps = components
                    .iter()
                    .map(|c| c.build(seed))
                    .collect::<Result<Vec<_>>>()?;
                SampleDistribution::mixture(weights.clone(), comps, seed)
            }
            DistributionSpec::Empirical { path, rows } => match (path, rows) {
                (Some(p), None) => SampleDistribution::load_empirical(p, seed),
                (None, Some(r)) => SampleDistribution::empirical(r.clone(), seed),
                _ => Err(Error::config(
                    "empirical distribution needs exactly one of `path` or `rows`",
                )),
            },
        }
    }
}
