use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Subcommand};
use dualrec::diagnostics::default_k_grid;
use dualrec::samplers::ab_con_hyperparameters;
use dualrec::{
    builtin_population, burnin_scan, pooled_phi_summary, pooled_summary, psrf, resolve_lambda,
    resolve_phi_prior, run_ab_con, run_ab_flat, run_study_detailed, ChainTrace, ClosedForm,
    DrsData, NPrior, PopulationSpec, PsrfReport, StudyDesign, StudyMethod,
};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::input::{read_data, read_trace};
use crate::output::{self, Manifest, MANIFEST};
use crate::settings::{DiagArgs, Extra, Method, ModelArgs, Settings};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Estimate the population size from one observed table.
    Estimate(EstimateArgs),
    /// Run a replicated simulation study on a known population.
    Simulate(SimulateArgs),
    /// Scan the scale-reduction statistic over burn-in lengths.
    Diagnose(DiagnoseArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    /// Data file with x11, x10 and x01.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub diag: DiagArgs,
    /// Also write one trace file per chain.
    #[arg(long)]
    pub traces: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Built-in population P1 to P8.
    pub population: Option<String>,
    /// Custom population `N,p1.,p.1,phi`.
    #[arg(long, conflicts_with = "population")]
    pub spec: Option<String>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of replications.
    #[arg(long, short = 'R')]
    pub reps: Option<usize>,
    /// endpoint-average or pooled-quantile.
    #[arg(long)]
    pub ci_pooling: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    /// Trace files written by `estimate --traces`; give at least two.
    #[arg(long = "trace", num_args = 1..)]
    pub traces: Vec<PathBuf>,
    /// Run the sampler on this data file instead of reading traces.
    #[arg(long, conflicts_with = "traces")]
    pub data: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub diag: DiagArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReplayArgs {
    /// manifest.json of an earlier run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the replayed outputs.
    #[arg(long)]
    pub out: PathBuf,
}

fn absolute(path: &Path) -> String {
    std::fs::canonicalize(path)
        .unwrap_or_else(|_| path.to_path_buf())
        .display()
        .to_string()
}

fn data_json(data: &DrsData) -> Value {
    json!({
        "x11": data.x11,
        "x10": data.x10,
        "x01": data.x01,
        "x0": data.x0(),
        "c_hat": data.c_hat().ok(),
    })
}

fn settings_json(settings: &Settings) -> Value {
    serde_json::to_value(settings).unwrap_or(Value::Null)
}

fn finish(
    mut manifest: Manifest,
    started: Instant,
    out: &Path,
    mut outputs: Vec<PathBuf>,
) -> Result<()> {
    manifest.wall_time_secs = started.elapsed().as_secs_f64();
    outputs.push(out.join(MANIFEST));
    manifest.outputs = outputs
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    output::write_json(out, MANIFEST, &manifest)?;
    Ok(())
}

/// Runs the configured Bayesian sampler.
fn sample(settings: &Settings, data: &DrsData) -> Result<Vec<ChainTrace>> {
    Ok(match settings.method {
        Method::AbFlat => run_ab_flat(data, &settings.phi, settings.n_prior, &settings.chain)?,
        Method::AbCon => run_ab_con(data, settings.n_prior, &settings.chain)?,
        _ => unreachable!("closed forms do not sample"),
    })
}

fn scan(settings: &Settings, traces: &[ChainTrace]) -> Result<PsrfReport> {
    let grid = match &settings.k_grid {
        Some(g) => g.clone(),
        None => default_k_grid(traces, 20),
    };
    Ok(burnin_scan(
        traces,
        settings.parameter,
        &grid,
        settings.threshold,
    )?)
}

pub fn estimate(args: &EstimateArgs) -> Result<String> {
    let started = Instant::now();
    let settings = Settings::resolve(
        &args.model,
        &Extra {
            diag: args.diag.clone(),
            ..Extra::default()
        },
        Method::AbFlat,
    )?;
    let data = read_data(&args.data)?;
    let mut argv = vec![
        "estimate".to_string(),
        "--data".into(),
        absolute(&args.data),
    ];
    argv.extend(settings.model_flags());
    if settings.method.is_bayesian() {
        argv.extend(settings.diag_flags());
        if args.traces {
            argv.push("--traces".into());
        }
    }

    let mut text = String::new();
    let _ = writeln!(
        text,
        "table           x11={} x10={} x01={}  (x0={})",
        data.x11,
        data.x10,
        data.x01,
        data.x0()
    );
    let _ = writeln!(text, "method          {}", settings.method);

    let mut files = Vec::new();
    let (summary, seeds) = match settings.method {
        Method::Closed(_) | Method::ClosedFormAll => {
            let methods: Vec<ClosedForm> = match settings.method {
                Method::Closed(c) => vec![c],
                _ => ClosedForm::ALL.to_vec(),
            };
            let mut estimates = serde_json::Map::new();
            let mut undefined = serde_json::Map::new();
            for c in methods {
                match c.estimate(&data) {
                    Ok(v) => {
                        let _ = writeln!(text, "{:<16}{v:.2}", format!("N ({})", c.name()));
                        estimates.insert(c.name().into(), json!(v));
                    }
                    Err(e) if settings.method == Method::ClosedFormAll => {
                        let _ = writeln!(text, "{:<16}undefined: {e}", format!("N ({})", c.name()));
                        undefined.insert(c.name().into(), json!(e.to_string()));
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let summary = json!({
                "method": settings.method.to_string(),
                "data": data_json(&data),
                "estimates": estimates,
                "undefined": undefined,
            });
            (summary, json!({}))
        }
        Method::AbFlat | Method::AbCon => {
            let traces = sample(&settings, &data)?;
            let n = pooled_summary(&traces, settings.level)?;
            let phi = pooled_phi_summary(&traces, settings.level)?;
            let k = settings.chain.burn_in;
            let diag = if traces.len() >= 2 {
                match (
                    psrf(&traces, settings.parameter, k).map_err(CliError::from),
                    scan(&settings, &traces),
                ) {
                    (Ok(at_k), Ok(report)) => {
                        if let Some(out) = &args.out {
                            files.push(output::write_file(
                                out,
                                "psrf.csv",
                                &output::psrf_csv(&report),
                            )?);
                        }
                        json!({
                            "parameter": settings.parameter.to_string(),
                            "at_burn_in": at_k,
                            "threshold": report.threshold,
                            "recommended_k": report.recommended_k,
                        })
                    }
                    (Err(e), _) | (_, Err(e)) => json!({ "error": e.to_string() }),
                }
            } else {
                json!({ "error": "a single chain has no scale-reduction statistic" })
            };
            let prior = match settings.method {
                Method::AbFlat => {
                    let (a, b) = resolve_phi_prior(&settings.phi, &data)?;
                    json!({ "family": "uniform", "alpha": a, "beta": b, "p_update": settings.chain.p_update.to_string() })
                }
                _ => {
                    let (a, b) = ab_con_hyperparameters(&data, settings.chain.t);
                    json!({ "family": "gb1", "t": settings.chain.t, "a": a, "b": b })
                }
            };
            let n_prior = match settings.n_prior {
                NPrior::Jeffreys => json!({ "kind": "jeffreys" }),
                NPrior::Poisson { lambda } => json!({
                    "kind": "poisson",
                    "lambda_source": lambda.to_string(),
                    "lambda": resolve_lambda(lambda, &data)?,
                }),
            };

            let pct = settings.level * 100.0;
            let _ = writeln!(text, "N mean          {:.2}  (sd {:.2})", n.mean, n.sd);
            let _ = writeln!(text, "N median        {}", n.median);
            let _ = writeln!(text, "N MAP           {}", n.map);
            let _ = writeln!(text, "N SRE           {:.2}", n.sre);
            let _ = writeln!(
                text,
                "{:<16}[{}, {}]",
                format!("N {pct}% CI"),
                n.ci.0,
                n.ci.1
            );
            let _ = writeln!(text, "phi mean        {:.4}", phi.mean);
            let _ = writeln!(
                text,
                "{:<16}[{:.4}, {:.4}]",
                format!("phi {pct}% CI"),
                phi.ci.0,
                phi.ci.1
            );
            match (diag.get("at_burn_in"), diag.get("recommended_k")) {
                (Some(v), Some(rk)) => {
                    let label = format!("R-hat^1/2 ({})", settings.parameter);
                    let _ = writeln!(
                        text,
                        "{label:<16}{:.4} at k={k}",
                        v.as_f64().unwrap_or(f64::NAN)
                    );
                    let _ = writeln!(
                        text,
                        "recommended k   {}",
                        rk.as_u64().map_or("none".into(), |v| v.to_string())
                    );
                }
                _ => {
                    let _ = writeln!(
                        text,
                        "R-hat^1/2       {}",
                        diag["error"].as_str().unwrap_or("")
                    );
                }
            }

            if let Some(out) = &args.out {
                files.push(output::write_file(
                    out,
                    "histogram.csv",
                    &output::histogram_csv(&n.histogram),
                )?);
                if args.traces {
                    for t in &traces {
                        files.push(output::write_file(
                            out,
                            &format!("trace_chain{}.csv", t.chain + 1),
                            &output::trace_csv(t),
                        )?);
                    }
                }
            }
            let summary = json!({
                "method": settings.method.to_string(),
                "data": data_json(&data),
                "phi_prior": prior,
                "n_prior": n_prior,
                "chains": settings.chain.chains,
                "burn_in": k,
                "iterations": settings.chain.iterations(),
                "seed": settings.chain.seed,
                "level": settings.level,
                "n": {
                    "mean": n.mean,
                    "sd": n.sd,
                    "median": n.median,
                    "map": n.map,
                    "sre": n.sre,
                    "ci": [n.ci.0, n.ci.1],
                    "n_draws": n.n_draws,
                },
                "phi": {
                    "mean": phi.mean,
                    "sd": phi.sd,
                    "median": phi.median,
                    "ci": [phi.ci.0, phi.ci.1],
                    "n_draws": phi.n_draws,
                },
                "psrf": diag,
                "redraws": traces.iter().map(|t| t.redraws).collect::<Vec<_>>(),
            });
            let seeds = json!({
                "master": settings.chain.seed,
                "chain_streams": (0..settings.chain.chains).collect::<Vec<_>>(),
            });
            (summary, seeds)
        }
    };

    if let Some(out) = &args.out {
        files.push(output::write_json(out, "summary.json", &summary)?);
        let manifest = Manifest::new("estimate", argv, settings_json(&settings), seeds);
        finish(manifest, started, out, files)?;
    }
    Ok(text)
}

fn parse_spec(raw: &str) -> Result<PopulationSpec> {
    let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
    let bad = || CliError::Config(format!("expected --spec N,p1.,p.1,phi, found '{raw}'"));
    if parts.len() != 4 {
        return Err(bad());
    }
    Ok(PopulationSpec {
        n_true: parts[0].parse().map_err(|_| bad())?,
        p1dot: parts[1].parse().map_err(|_| bad())?,
        pdot1: parts[2].parse().map_err(|_| bad())?,
        phi: parts[3].parse().map_err(|_| bad())?,
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let started = Instant::now();
    let settings = Settings::resolve(
        &args.model,
        &Extra {
            reps: args.reps,
            ci_pooling: args.ci_pooling.clone(),
            ..Extra::default()
        },
        Method::AbFlat,
    )?;
    let (label, spec, mut argv) = match (&args.population, &args.spec) {
        (Some(name), None) => {
            let spec = builtin_population(name).map_err(|e| CliError::Config(e.to_string()))?;
            (
                name.to_uppercase(),
                spec,
                vec!["simulate".to_string(), name.to_uppercase()],
            )
        }
        (None, Some(raw)) => (
            "custom".to_string(),
            parse_spec(raw)?,
            vec!["simulate".to_string(), "--spec".into(), raw.clone()],
        ),
        _ => {
            return Err(CliError::Config(
                "name a built-in population (P1 to P8) or give --spec".into(),
            ))
        }
    };
    if settings.reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    let method = match settings.method {
        Method::Closed(c) => StudyMethod::ClosedForm(c),
        Method::ClosedFormAll => {
            return Err(CliError::Config(
                "simulate runs one method at a time; choose mt, mb or nour".into(),
            ))
        }
        Method::AbFlat => StudyMethod::AbFlat {
            phi: settings.phi,
            n_prior: settings.n_prior,
            chains: settings.chain,
        },
        Method::AbCon => StudyMethod::AbCon {
            n_prior: settings.n_prior,
            chains: settings.chain,
        },
    };
    let design = StudyDesign {
        spec,
        replications: settings.reps,
        method,
        estimator: settings.estimator,
        level: settings.level,
        ci_pooling: settings.ci_pooling,
        master_seed: settings.chain.seed,
    };
    argv.extend(settings.model_flags());
    argv.extend([
        "--reps".into(),
        settings.reps.to_string(),
        "--ci-pooling".into(),
        settings.ci_pooling.to_string(),
    ]);

    let outcome = run_study_detailed(&design)?;
    let row = &outcome.row;
    let estimator = if settings.method.is_bayesian() {
        settings.estimator.to_string()
    } else {
        "closed-form".to_string()
    };

    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<10}{:<10}{:>5}{:>10}{:>10}{:>10}{:>10}  CI",
        "pop", "method", "R", "failures", "average", "se", "rmse"
    );
    let ci = row
        .ci
        .map_or("-".to_string(), |(lo, hi)| format!("[{lo:.1}, {hi:.1}]"));
    let _ = writeln!(
        text,
        "{:<10}{:<10}{:>5}{:>10}{:>10.2}{:>10.2}{:>10.2}  {ci}",
        label, row.method, row.replications, row.failures, row.average, row.se, row.rmse
    );
    if row.se_undefined {
        let _ = writeln!(
            text,
            "note: fewer than two successful replications; se reported as 0"
        );
    }

    if let Some(out) = &args.out {
        let files = vec![
            output::write_file(
                out,
                "study.csv",
                &output::study_csv(&label, &estimator, row),
            )?,
            output::write_file(
                out,
                "replications.csv",
                &output::replications_csv(&outcome.records),
            )?,
        ];
        let seeds = json!({
            "master": design.master_seed,
            "data_stream": "(master, replication)",
            "chain_seed": "splitmix64(master, replication), one stream per chain",
        });
        let mut settings_value = settings_json(&settings);
        settings_value["population"] = json!({ "label": label, "spec": spec });
        let manifest = Manifest::new("simulate", argv, settings_value, seeds);
        finish(manifest, started, out, files)?;
    }
    Ok(text)
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<String> {
    let started = Instant::now();
    let settings = Settings::resolve(
        &args.model,
        &Extra {
            diag: args.diag.clone(),
            ..Extra::default()
        },
        Method::AbFlat,
    )?;
    let mut argv = vec!["diagnose".to_string()];
    let traces = match &args.data {
        Some(path) => {
            if !settings.method.is_bayesian() {
                return Err(CliError::Config(
                    "diagnose needs --method ab-flat or ab-con".into(),
                ));
            }
            argv.extend(["--data".into(), absolute(path)]);
            argv.extend(settings.model_flags());
            sample(&settings, &read_data(path)?)?
        }
        None => {
            for t in &args.traces {
                argv.extend(["--trace".into(), absolute(t)]);
            }
            args.traces
                .iter()
                .enumerate()
                .map(|(j, p)| read_trace(p, j))
                .collect::<Result<Vec<_>>>()?
        }
    };
    if traces.len() < 2 {
        return Err(CliError::Config(format!(
            "diagnosis needs at least 2 chains, got {}",
            traces.len()
        )));
    }
    argv.extend(settings.diag_flags());
    let report = scan(&settings, &traces)?;

    let mut text = String::from("k         R-hat^1/2\n");
    for (k, v) in &report.curve {
        let _ = writeln!(text, "{k:<10}{v:.5}");
    }
    let _ = writeln!(
        text,
        "recommended k: {} (threshold {})",
        report
            .recommended_k
            .map_or("none".into(), |k| k.to_string()),
        report.threshold
    );
    if let Some(out) = &args.out {
        let files = vec![output::write_file(
            out,
            "psrf.csv",
            &output::psrf_csv(&report),
        )?];
        let seeds = json!({ "master": settings.chain.seed });
        let manifest = Manifest::new("diagnose", argv, settings_json(&settings), seeds);
        finish(manifest, started, out, files)?;
    }
    Ok(text)
}

/// Arguments for replaying a manifest into `out`.
pub fn replay_argv(args: &ReplayArgs) -> Result<Vec<String>> {
    let manifest = Manifest::read(&args.manifest)?;
    if manifest.command == "replay" || manifest.argv.first() != Some(&manifest.command) {
        return Err(CliError::Json(format!(
            "{}: manifest does not record a replayable command",
            args.manifest.display()
        )));
    }
    let mut argv = vec!["dualrec".to_string()];
    argv.extend(manifest.argv);
    argv.push("--out".into());
    argv.push(args.out.display().to_string());
    Ok(argv)
}
