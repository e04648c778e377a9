//! Resolves model settings from flags, an optional config file and defaults.
//!
//! Precedence is flag, then config-file key, then default. The seed falls
//! back to `DRS_SEED` before its default. Every resolved setting can be
//! written back as flags, which is what manifests store for replays.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use dualrec::{
    ChainConfig, CiPooling, ClosedForm, LambdaSource, NPrior, PUpdate, Param, PhiKnowledge,
    PhiPriorPolicy, PointEstimator,
};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::input::read_config;

pub const SEED_ENV: &str = "DRS_SEED";
pub const DEFAULT_SEED: u64 = 1;

/// Flags shared by every command that runs an estimator.
#[derive(Args, Debug, Clone, Default)]
pub struct ModelArgs {
    /// mt, mb, nour, closed-form-all, ab-flat or ab-con.
    #[arg(long)]
    pub method: Option<String>,
    /// Directional knowledge about φ: gt1, lt1 or none.
    #[arg(long)]
    pub phi_knowledge: Option<String>,
    /// Upper bound β of the φ prior for gt1 and none.
    #[arg(long)]
    pub phi_upper: Option<f64>,
    /// Explicit φ prior interval `α,β`; overrides --phi-knowledge.
    #[arg(long)]
    pub phi_range: Option<String>,
    /// jeffreys or poisson.
    #[arg(long)]
    pub n_prior: Option<String>,
    /// Poisson prior mean: mb, nour or fixed:<value>.
    #[arg(long)]
    pub lambda: Option<String>,
    /// AB-Flat p update: c-over-phi or lloyd.
    #[arg(long)]
    pub p_update: Option<String>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Burn-in k; each chain runs 2k iterations.
    #[arg(long)]
    pub burnin: Option<usize>,
    /// AB-Con variance tuning.
    #[arg(long)]
    pub t: Option<f64>,
    /// Master seed (default: $DRS_SEED, then 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Credible level.
    #[arg(long)]
    pub level: Option<f64>,
    /// Point estimate for studies: mean, median, map or sre.
    #[arg(long)]
    pub estimator: Option<String>,
    /// Key-value file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Flags for burn-in scans.
#[derive(Args, Debug, Clone, Default)]
pub struct DiagArgs {
    /// Comma-separated burn-in values to scan.
    #[arg(long)]
    pub k_grid: Option<String>,
    /// Traced parameter: N, phi, p or p1dot.
    #[arg(long)]
    pub parameter: Option<String>,
    /// Acceptance threshold for the scale-reduction statistic.
    #[arg(long)]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Closed(ClosedForm),
    ClosedFormAll,
    AbFlat,
    AbCon,
}

impl Method {
    pub fn is_bayesian(self) -> bool {
        matches!(self, Method::AbFlat | Method::AbCon)
    }
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mt" => Method::Closed(ClosedForm::Mt),
            "mb" => Method::Closed(ClosedForm::Mb),
            "nour" => Method::Closed(ClosedForm::Nour),
            "closed-form-all" | "closed-form" => Method::ClosedFormAll,
            "ab-flat" => Method::AbFlat,
            "ab-con" => Method::AbCon,
            _ => return Err(CliError::Config(format!(
                "unknown method '{s}' (expected mt, mb, nour, closed-form-all, ab-flat or ab-con)"
            ))),
        })
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Closed(c) => c.name(),
            Method::ClosedFormAll => "closed-form-all",
            Method::AbFlat => "ab-flat",
            Method::AbCon => "ab-con",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Settings {
    pub method: Method,
    pub phi: PhiPriorPolicy,
    pub n_prior: NPrior,
    pub chain: ChainConfig,
    pub level: f64,
    pub estimator: PointEstimator,
    pub reps: usize,
    pub ci_pooling: CiPooling,
    pub k_grid: Option<Vec<usize>>,
    pub parameter: Param,
    pub threshold: f64,
}

/// Command-specific values that also accept config-file keys.
#[derive(Debug, Clone, Default)]
pub struct Extra {
    pub reps: Option<usize>,
    pub ci_pooling: Option<String>,
    pub diag: DiagArgs,
}

const KNOWN_KEYS: [&str; 18] = [
    "method",
    "phi-knowledge",
    "phi-upper",
    "phi-range",
    "n-prior",
    "lambda",
    "p-update",
    "chains",
    "burnin",
    "t",
    "seed",
    "level",
    "estimator",
    "reps",
    "ci-pooling",
    "k-grid",
    "parameter",
    "threshold",
];

struct Layers {
    config_path: Option<PathBuf>,
    config: BTreeMap<String, (usize, String)>,
}

impl Layers {
    fn load(path: Option<&Path>) -> Result<Self> {
        let config = match path {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        for key in config.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown key '{key}' in config file {}",
                    path.map(|p| p.display().to_string()).unwrap_or_default()
                )));
            }
        }
        Ok(Self {
            config_path: path.map(Path::to_path_buf),
            config,
        })
    }

    /// Flag value if set, else the parsed config value.
    fn get<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.config.get(key) {
            None => Ok(None),
            Some((line, raw)) => raw.parse::<T>().map(Some).map_err(|e| {
                let path = self.config_path.as_deref().unwrap_or(Path::new("config"));
                CliError::parse(path, *line, format!("{key}: cannot read '{raw}': {e}"))
            }),
        }
    }
}

fn parse_pair(raw: &str) -> Result<(f64, f64)> {
    let bad = || CliError::Config(format!("expected 'α,β' for the φ range, found '{raw}'"));
    let (a, b) = raw.split_once(',').ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

pub fn parse_k_grid(raw: &str) -> Result<Vec<usize>> {
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad burn-in grid value '{s}' in '{raw}'")))
        })
        .collect()
}

fn core<T>(r: dualrec::Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        dualrec::Error::Config(msg) => CliError::Config(msg),
        other => CliError::Core(other),
    })
}

impl Settings {
    pub fn resolve(model: &ModelArgs, extra: &Extra, default_method: Method) -> Result<Self> {
        let layers = Layers::load(model.config.as_deref())?;
        let method = match layers.get::<String>("method", model.method.clone())? {
            Some(m) => m.parse()?,
            None => default_method,
        };

        let knowledge: PhiKnowledge =
            match layers.get::<String>("phi-knowledge", model.phi_knowledge.clone())? {
                Some(k) => core(k.parse())?,
                None => PhiKnowledge::GreaterThanOne,
            };
        let upper = layers.get("phi-upper", model.phi_upper)?.unwrap_or(2.0);
        let range = layers
            .get::<String>("phi-range", model.phi_range.clone())?
            .map(|r| parse_pair(&r))
            .transpose()?;
        let phi = PhiPriorPolicy {
            knowledge,
            upper,
            range,
        };

        let lambda = layers
            .get::<String>("lambda", model.lambda.clone())?
            .map(|l| core(l.parse::<LambdaSource>()))
            .transpose()?;
        let n_prior = match layers
            .get::<String>("n-prior", model.n_prior.clone())?
            .as_deref()
        {
            None | Some("jeffreys") => {
                if lambda.is_some() {
                    return Err(CliError::Config(
                        "--lambda only applies with --n-prior poisson".into(),
                    ));
                }
                NPrior::Jeffreys
            }
            Some("poisson") => NPrior::Poisson {
                lambda: lambda.unwrap_or(LambdaSource::MbEstimate),
            },
            Some(other) => {
                return Err(CliError::Config(format!(
                    "unknown N prior '{other}' (expected jeffreys or poisson)"
                )))
            }
        };
        if let NPrior::Poisson {
            lambda: LambdaSource::NourEstimate,
        } = n_prior
        {
            if method != Method::AbFlat
                || knowledge != PhiKnowledge::GreaterThanOne
                || range.is_some()
            {
                return Err(CliError::Config(
                    "--lambda nour requires --method ab-flat with --phi-knowledge gt1 and no --phi-range"
                        .into(),
                ));
            }
        }

        let p_update = match layers.get::<String>("p-update", model.p_update.clone())? {
            Some(u) => core(u.parse())?,
            None => PUpdate::COverPhi,
        };
        let default_k = if method == Method::AbCon { 7000 } else { 2000 };
        let seed = match layers.get("seed", model.seed)? {
            Some(s) => s,
            None => match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| {
                    CliError::Config(format!("{SEED_ENV} = '{v}' is not an unsigned integer"))
                })?,
                Err(_) => DEFAULT_SEED,
            },
        };
        let chain = ChainConfig {
            burn_in: layers.get("burnin", model.burnin)?.unwrap_or(default_k),
            chains: layers.get("chains", model.chains)?.unwrap_or(5),
            seed,
            p_update,
            t: layers.get("t", model.t)?.unwrap_or(20.0),
            prior_only: false,
        };
        if chain.burn_in == 0 || chain.chains == 0 {
            return Err(CliError::Config(
                "--burnin and --chains must be at least 1".into(),
            ));
        }
        if !(chain.t > 0.0) {
            return Err(CliError::Config(format!(
                "--t must be positive, got {}",
                chain.t
            )));
        }
        let level = layers.get("level", model.level)?.unwrap_or(0.95);
        if !(0.0..1.0).contains(&level) {
            return Err(CliError::Config(format!(
                "--level must lie in [0, 1), got {level}"
            )));
        }
        let estimator = match layers.get::<String>("estimator", model.estimator.clone())? {
            Some(e) => core(e.parse())?,
            None => PointEstimator::Mean,
        };
        let reps = layers.get("reps", extra.reps)?.unwrap_or(50);
        let ci_pooling = match layers.get::<String>("ci-pooling", extra.ci_pooling.clone())? {
            Some(c) => core(c.parse())?,
            None => CiPooling::EndpointAverage,
        };
        let k_grid = layers
            .get::<String>("k-grid", extra.diag.k_grid.clone())?
            .map(|g| parse_k_grid(&g))
            .transpose()?;
        let parameter = match layers.get::<String>("parameter", extra.diag.parameter.clone())? {
            Some(p) => core(p.parse())?,
            None => Param::N,
        };
        let threshold = layers
            .get("threshold", extra.diag.threshold)?
            .unwrap_or(1.1);
        if method == Method::AbCon && p_update != PUpdate::COverPhi {
            return Err(CliError::Config(
                "--p-update applies to ab-flat only".into(),
            ));
        }

        Ok(Settings {
            method,
            phi,
            n_prior,
            chain,
            level,
            estimator,
            reps,
            ci_pooling,
            k_grid,
            parameter,
            threshold,
        })
    }

    /// Flags that reproduce these settings without a config file or environment.
    pub fn model_flags(&self) -> Vec<String> {
        let mut out = vec!["--method".to_string(), self.method.to_string()];
        let mut push = |k: &str, v: String| {
            out.push(format!("--{k}"));
            out.push(v);
        };
        if self.method.is_bayesian() {
            if self.method == Method::AbFlat {
                push("phi-knowledge", self.phi.knowledge.to_string());
                push("phi-upper", self.phi.upper.to_string());
                if let Some((a, b)) = self.phi.range {
                    push("phi-range", format!("{a},{b}"));
                }
                push("p-update", self.chain.p_update.to_string());
            } else {
                push("t", self.chain.t.to_string());
            }
            match self.n_prior {
                NPrior::Jeffreys => push("n-prior", "jeffreys".into()),
                NPrior::Poisson { lambda } => {
                    push("n-prior", "poisson".into());
                    push("lambda", lambda.to_string());
                }
            }
            push("chains", self.chain.chains.to_string());
            push("burnin", self.chain.burn_in.to_string());
            push("estimator", self.estimator.to_string());
        }
        push("seed", self.chain.seed.to_string());
        push("level", self.level.to_string());
        out
    }

    pub fn diag_flags(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(grid) = &self.k_grid {
            out.push("--k-grid".into());
            out.push(
                grid.iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(","),
            );
        }
        out.extend([
            "--parameter".into(),
            self.parameter.to_string(),
            "--threshold".into(),
            self.threshold.to_string(),
        ]);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn resolve(model: ModelArgs) -> Result<Settings> {
        Settings::resolve(&model, &Extra::default(), Method::AbFlat)
    }

    #[test]
    fn defaults() {
        let s = resolve(ModelArgs {
            seed: Some(3),
            ..ModelArgs::default()
        })
        .unwrap();
        assert_eq!(s.method, Method::AbFlat);
        assert_eq!(s.phi.knowledge, PhiKnowledge::GreaterThanOne);
        assert_eq!(s.phi.upper, 2.0);
        assert_eq!(s.chain.burn_in, 2000);
        assert_eq!(s.chain.chains, 5);
        assert_eq!(s.level, 0.95);
        assert_eq!(s.reps, 50);
        let con = resolve(ModelArgs {
            method: Some("ab-con".into()),
            seed: Some(3),
            ..ModelArgs::default()
        })
        .unwrap();
        assert_eq!(con.chain.burn_in, 7000);
        assert_eq!(con.chain.t, 20.0);
    }

    #[test]
    fn flags_override_config_which_overrides_defaults() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(
            file,
            "# shared settings\nchains = 3\nburnin = 500\nphi-knowledge = lt1\nseed = 9"
        )
        .unwrap();
        let s = resolve(ModelArgs {
            chains: Some(4),
            config: Some(file.path().to_path_buf()),
            ..ModelArgs::default()
        })
        .unwrap();
        assert_eq!(s.chain.chains, 4);
        assert_eq!(s.chain.burn_in, 500);
        assert_eq!(s.phi.knowledge, PhiKnowledge::LessThanOne);
        assert_eq!(s.chain.seed, 9);
    }

    #[test]
    fn config_errors_carry_line_numbers() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "chains = 3\nburnin = lots").unwrap();
        let err = resolve(ModelArgs {
            config: Some(file.path().to_path_buf()),
            ..ModelArgs::default()
        })
        .unwrap_err();
        assert!(matches!(err, CliError::Parse { line: 2, .. }), "{err}");

        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "colour = blue").unwrap();
        let err = resolve(ModelArgs {
            config: Some(file.path().to_path_buf()),
            ..ModelArgs::default()
        })
        .unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn conflicts_are_named() {
        let err = resolve(ModelArgs {
            lambda: Some("mb".into()),
            ..ModelArgs::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("--lambda"));
        let err = resolve(ModelArgs {
            n_prior: Some("poisson".into()),
            lambda: Some("nour".into()),
            phi_knowledge: Some("lt1".into()),
            ..ModelArgs::default()
        })
        .unwrap_err();
        assert!(err.to_string().contains("nour"));
        assert!(resolve(ModelArgs {
            method: Some("bootstrap".into()),
            ..ModelArgs::default()
        })
        .is_err());
    }

    #[test]
    fn flags_round_trip() {
        let s = resolve(ModelArgs {
            phi_range: Some("0.8,1.6".into()),
            n_prior: Some("poisson".into()),
            lambda: Some("fixed:480".into()),
            seed: Some(77),
            chains: Some(3),
            ..ModelArgs::default()
        })
        .unwrap();
        let flags = s.model_flags();
        let mut model = ModelArgs::default();
        let mut it = flags.iter();
        while let (Some(k), Some(v)) = (it.next(), it.next()) {
            let v = v.clone();
            match k.as_str() {
                "--method" => model.method = Some(v),
                "--phi-knowledge" => model.phi_knowledge = Some(v),
                "--phi-upper" => model.phi_upper = Some(v.parse().unwrap()),
                "--phi-range" => model.phi_range = Some(v),
                "--p-update" => model.p_update = Some(v),
                "--n-prior" => model.n_prior = Some(v),
                "--lambda" => model.lambda = Some(v),
                "--chains" => model.chains = Some(v.parse().unwrap()),
                "--burnin" => model.burnin = Some(v.parse().unwrap()),
                "--estimator" => model.estimator = Some(v),
                "--seed" => model.seed = Some(v.parse().unwrap()),
                "--level" => model.level = Some(v.parse().unwrap()),
                other => panic!("unexpected flag {other}"),
            }
        }
        assert_eq!(resolve(model).unwrap(), s);
    }
}
