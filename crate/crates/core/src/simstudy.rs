//! Replicated simulation studies: generate tables from a known population,
//! estimate `N` on each, and report average, standard error and RMSE.
//!
//! Replication `r` draws its table from stream `(master, r)` and runs its
//! chains under seed `derive_seed(master, r)`, so results do not depend on
//! how replications are scheduled.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{cell_probabilities, DrsData, PopulationSpec};
use crate::distributions::{derive_seed, sample_multinomial, RngStream};
use crate::error::{Error, Result};
use crate::estimators::ClosedForm;
use crate::posterior::{nearest_rank, pooled_summary, summarize_histogram, PosteriorSummary};
use crate::samplers::{run_ab_con, run_ab_flat, ChainConfig, NPrior, PhiPriorPolicy};

pub const BUILTIN_POPULATIONS: [&str; 8] = ["P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8"];

/// The eight benchmark populations, all of size 500.
///
/// P1–P4 are recapture-prone (φ = 1.25), P5–P8 recapture-averse (φ = 0.8),
/// over the same four `(p1., p.1)` pairs.
pub fn builtin_population(name: &str) -> Result<PopulationSpec> {
    const PAIRS: [(f64, f64); 4] = [(0.50, 0.65), (0.60, 0.70), (0.80, 0.70), (0.70, 0.55)];
    let index = BUILTIN_POPULATIONS
        .iter()
        .position(|p| p.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Config(format!("unknown population '{name}' (expected P1 to P8)")))?;
    let (p1dot, pdot1) = PAIRS[index % 4];
    Ok(PopulationSpec {
        n_true: 500,
        p1dot,
        pdot1,
        phi: if index < 4 { 1.25 } else { 0.8 },
    })
}

/// Draws one observed table, discarding the unobserved cell.
pub fn generate_dataset(spec: &PopulationSpec, rng: &mut RngStream) -> Result<DrsData> {
    let cells = cell_probabilities(spec)?;
    let [x11, x10, x01, _] = sample_multinomial(spec.n_true, &cells, rng);
    DrsData::new(x11, x10, x01)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyMethod {
    ClosedForm(ClosedForm),
    AbFlat {
        phi: PhiPriorPolicy,
        n_prior: NPrior,
        chains: ChainConfig,
    },
    AbCon {
        n_prior: NPrior,
        chains: ChainConfig,
    },
}

impl StudyMethod {
    pub fn label(&self) -> &'static str {
        match self {
            StudyMethod::ClosedForm(c) => c.name(),
            StudyMethod::AbFlat { .. } => "ab-flat",
            StudyMethod::AbCon { .. } => "ab-con",
        }
    }
}

/// Which posterior point estimate a Bayesian replication reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointEstimator {
    #[default]
    Mean,
    Median,
    Map,
    Sre,
}

impl PointEstimator {
    pub fn pick(self, s: &PosteriorSummary) -> f64 {
        match self {
            PointEstimator::Mean => s.mean,
            PointEstimator::Median => s.median,
            PointEstimator::Map => s.map,
            PointEstimator::Sre => s.sre,
        }
    }
}

impl FromStr for PointEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            "map" => Ok(Self::Map),
            "sre" => Ok(Self::Sre),
            _ => Err(Error::Config(format!(
                "unknown point estimator '{s}' (expected mean, median, map or sre)"
            ))),
        }
    }
}

impl fmt::Display for PointEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Median => "median",
            Self::Map => "map",
            Self::Sre => "sre",
        })
    }
}

/// How per-replication credible intervals become one study interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiPooling {
    /// Average the lower and upper endpoints separately.
    #[default]
    EndpointAverage,
    /// Quantiles of all replications' draws pooled together.
    PooledQuantile,
}

impl FromStr for CiPooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "endpoint-average" => Ok(Self::EndpointAverage),
            "pooled-quantile" => Ok(Self::PooledQuantile),
            _ => Err(Error::Config(format!(
                "unknown CI pooling '{s}' (expected endpoint-average or pooled-quantile)"
            ))),
        }
    }
}

impl fmt::Display for CiPooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::EndpointAverage => "endpoint-average",
            Self::PooledQuantile => "pooled-quantile",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub spec: PopulationSpec,
    pub replications: usize,
    pub method: StudyMethod,
    pub estimator: PointEstimator,
    pub level: f64,
    pub ci_pooling: CiPooling,
    pub master_seed: u64,
}

impl StudyDesign {
    pub fn new(
        spec: PopulationSpec,
        replications: usize,
        method: StudyMethod,
        master_seed: u64,
    ) -> Self {
        Self {
            spec,
            replications,
            method,
            estimator: PointEstimator::Mean,
            level: 0.95,
            ci_pooling: CiPooling::EndpointAverage,
            master_seed,
        }
    }
}

/// Estimates from one successful replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationEstimate {
    /// The design's point estimate.
    pub point: f64,
    /// Posterior mean, median, mode and SRE; all equal `point` for closed forms.
    pub mean: f64,
    pub median: f64,
    pub map: f64,
    pub sre: f64,
    pub ci: Option<(f64, f64)>,
    #[serde(skip)]
    pub histogram: Option<BTreeMap<u64, u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub data: Option<DrsData>,
    pub estimate: Option<ReplicationEstimate>,
    pub error: Option<String>,
}

/// One row of a study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub method: String,
    pub n_true: u64,
    pub replications: usize,
    pub failures: usize,
    pub average: f64,
    /// Standard deviation of the point estimates (`R − 1` denominator).
    pub se: f64,
    /// `sqrt(mean (est − N)²)`.
    pub rmse: f64,
    pub bias: f64,
    pub ci: Option<(f64, f64)>,
    /// Set when fewer than two replications succeeded, so `se` is reported as 0.
    pub se_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOutcome {
    pub row: StudyRow,
    pub records: Vec<ReplicationRecord>,
}

/// Runs a study and returns its summary row.
pub fn run_study(design: &StudyDesign) -> Result<StudyRow> {
    run_study_detailed(design).map(|o| o.row)
}

/// Runs a study and keeps the per-replication records.
pub fn run_study_detailed(design: &StudyDesign) -> Result<StudyOutcome> {
    if design.replications == 0 {
        return Err(Error::Config(
            "a study needs at least one replication".into(),
        ));
    }
    if !(0.0..1.0).contains(&design.level) {
        return Err(Error::Config(format!(
            "credible level must lie in [0, 1), got {}",
            design.level
        )));
    }
    cell_probabilities(&design.spec)?;

    let records = (0..design.replications)
        .into_par_iter()
        .map(|r| replicate(design, r))
        .collect::<Result<Vec<_>>>()?;

    let row = aggregate(design, &records)?;
    Ok(StudyOutcome { row, records })
}

fn replicate(design: &StudyDesign, r: usize) -> Result<ReplicationRecord> {
    let mut rng = RngStream::new(design.master_seed, r as u64);
    let mut record = ReplicationRecord {
        replication: r,
        data: None,
        estimate: None,
        error: None,
    };
    let data = match generate_dataset(&design.spec, &mut rng) {
        Ok(d) => d,
        Err(e @ Error::DegenerateData(_)) => {
            record.error = Some(e.to_string());
            return Ok(record);
        }
        Err(e) => return Err(e),
    };
    record.data = Some(data);
    match estimate(design, &data, derive_seed(design.master_seed, r as u64)) {
        Ok(est) => record.estimate = Some(est),
        Err(e) if is_replication_failure(&e) => record.error = Some(e.to_string()),
        Err(e) => return Err(e),
    }
    Ok(record)
}

fn is_replication_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::DegenerateData(_)
            | Error::UndefinedEstimator { .. }
            | Error::ChainFailure { .. }
            | Error::Underflow { .. }
    ) || matches!(e, Error::Config(msg) if msg.starts_with("cannot set the Poisson prior mean"))
}

fn estimate(design: &StudyDesign, data: &DrsData, chain_seed: u64) -> Result<ReplicationEstimate> {
    let traces = match design.method {
        StudyMethod::ClosedForm(c) => {
            let v = c.estimate(data)?;
            return Ok(ReplicationEstimate {
                point: v,
                mean: v,
                median: v,
                map: v,
                sre: v,
                ci: None,
                histogram: None,
            });
        }
        StudyMethod::AbFlat {
            phi,
            n_prior,
            chains,
        } => run_ab_flat(
            data,
            &phi,
            n_prior,
            &ChainConfig {
                seed: chain_seed,
                ..chains
            },
        )?,
        StudyMethod::AbCon { n_prior, chains } => run_ab_con(
            data,
            n_prior,
            &ChainConfig {
                seed: chain_seed,
                ..chains
            },
        )?,
    };
    let s = pooled_summary(&traces, design.level)?;
    Ok(ReplicationEstimate {
        point: design.estimator.pick(&s),
        mean: s.mean,
        median: s.median,
        map: s.map,
        sre: s.sre,
        ci: Some(s.ci),
        histogram: (design.ci_pooling == CiPooling::PooledQuantile).then_some(s.histogram),
    })
}

fn aggregate(design: &StudyDesign, records: &[ReplicationRecord]) -> Result<StudyRow> {
    let ok: Vec<&ReplicationEstimate> =
        records.iter().filter_map(|r| r.estimate.as_ref()).collect();
    let failures = records.len() - ok.len();
    if ok.is_empty() {
        let first = records
            .iter()
            .find_map(|r| r.error.clone())
            .unwrap_or_default();
        return Err(Error::Study(format!(
            "all {} replications failed; first error: {first}",
            records.len()
        )));
    }
    let points: Vec<f64> = ok.iter().map(|e| e.point).collect();
    let n_true = design.spec.n_true as f64;
    let m = points.len() as f64;
    let average = points.iter().sum::<f64>() / m;
    let se_undefined = points.len() < 2;
    let se = if se_undefined {
        0.0
    } else {
        (points.iter().map(|x| (x - average).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    };
    let rmse = (points.iter().map(|x| (x - n_true).powi(2)).sum::<f64>() / m).sqrt();

    let ci = if matches!(design.method, StudyMethod::ClosedForm(_)) {
        // Percentile interval of the replication estimates.
        let mut sorted = points.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = ((1.0 - design.level) / 2.0, (1.0 + design.level) / 2.0);
        let n = sorted.len();
        Some((
            sorted[nearest_rank(lo, n) - 1],
            sorted[nearest_rank(hi, n) - 1],
        ))
    } else {
        match design.ci_pooling {
            CiPooling::EndpointAverage => {
                let cis: Vec<(f64, f64)> = ok.iter().filter_map(|e| e.ci).collect();
                let k = cis.len() as f64;
                Some((
                    cis.iter().map(|c| c.0).sum::<f64>() / k,
                    cis.iter().map(|c| c.1).sum::<f64>() / k,
                ))
            }
            CiPooling::PooledQuantile => {
                let mut merged = BTreeMap::new();
                for h in ok.iter().filter_map(|e| e.histogram.as_ref()) {
                    for (&v, &c) in h {
                        *merged.entry(v).or_insert(0u64) += c;
                    }
                }
                Some(summarize_histogram(&merged, design.level)?.ci)
            }
        }
    };

    Ok(StudyRow {
        method: design.method.label().to_string(),
        n_true: design.spec.n_true,
        replications: records.len(),
        failures,
        average,
        se,
        rmse,
        bias: average - n_true,
        ci,
        se_undefined,
    })
}
