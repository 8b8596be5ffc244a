//! Command-line front end: subcommand dispatch, config-file handling, and
//! the interleaved estimate/purify protocol driver.
//!
//! Configuration precedence: command-line flags > `--config` key=value file
//! > built-in defaults. Exit codes: 0 success, 1 domain error, 2 usage
//! error. `--json` switches human tables to a stable JSON schema carrying a
//! `schema_version` field.

use std::collections::HashMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::circuit::{self, build_circuit, CircuitModel};
use crate::error::{Error, Result};
use crate::estimate::{self, ParityProportions};
use crate::mc::{self, SweepConfig};
use crate::plan;
use crate::purify;
use crate::states::{BellDiagonalState, NoiseModel};
use crate::stats::{self, SigmaConvention};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "bellboot", version, about = "Bell-pair purification, estimation, and planning")]
pub struct Cli {
    /// Emit machine-readable JSON instead of human tables.
    #[arg(long, global = true)]
    pub json: bool,
    /// Key = value config file; flags take precedence over its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone)]
pub struct StateArgs {
    /// Bell-diagonal coefficients "a,b,c,d".
    #[arg(long, value_name = "a,b,c,d", conflicts_with = "fidelity")]
    pub state: Option<String>,
    /// Werner-state fidelity (shorthand for the one-parameter family).
    #[arg(long)]
    pub fidelity: Option<f64>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run recursive purification rounds and print the trajectory.
    Purify {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
    },
    /// Success probability of a single purification round.
    SuccessProb {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Joint parity-outcome distribution and agree marginals.
    Distribution {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Invert parity proportions to a state estimate.
    Estimate {
        /// Agree proportions "p1,p2,p3".
        #[arg(long, value_name = "p1,p2,p3")]
        p: String,
        /// Shot count behind the proportions (0 = exact input).
        #[arg(long)]
        n: Option<u64>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// σ₁ of the fidelity estimator (σ(n) = σ₁/√n).
    Sigma {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        lambda: Option<f64>,
        /// Covariance convention: "diag" (default) or "full".
        #[arg(long)]
        convention: Option<String>,
    },
    /// Bell pairs to certify a fidelity within ±halfwidth.
    Plan {
        #[arg(long)]
        fidelity: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        halfwidth: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
    },
    /// Purify-then-certify pipeline cost from an initial fidelity.
    CertifyPlan {
        #[arg(long)]
        fidelity: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
    },
    /// Sample-and-invert sweep over a shot-count grid; emits CSV.
    Sweep {
        #[arg(long)]
        fidelity: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        n_start: Option<u64>,
        #[arg(long)]
        n_step: Option<u64>,
        #[arg(long)]
        n_max: Option<u64>,
        #[arg(long)]
        replicates: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path; also writes a `.manifest.txt`. Stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shot-sampled nested purification; reports per-round error rates.
    SampledPurify {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        rounds: Option<usize>,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Full protocol driver: estimate, purify until threshold, deliver.
    Protocol {
        #[command(flatten)]
        state: StateArgs,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        batch: Option<u64>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Largest λ at which one purification round still gains fidelity.
    ThresholdLambda {
        #[arg(long)]
        fidelity: Option<f64>,
    },
}

/// Parsed `key = value` config file (`#` comments, UTF-8).
pub struct Config {
    map: HashMap<String, String>,
}

impl Config {
    pub fn empty() -> Self {
        Self {
            map: HashMap::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { map })
    }

    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::empty()),
            Some(p) => Self::parse(&std::fs::read_to_string(p)?),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.map.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("bad value for {key}: {v}"))),
        }
    }

    /// flag > config > default.
    fn resolve<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(match flag {
            Some(v) => v,
            None => self.get(key)?.unwrap_or(default),
        })
    }

    fn resolve_opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.get(key)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolEvent {
    Estimate {
        round: usize,
        n_shots: u64,
        a_hat: f64,
        ci_low: f64,
        ci_high: f64,
    },
    Purify {
        round: usize,
        success_probability: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    Deliver { fidelity_estimate: f64 },
    Abort { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRunLog {
    pub events: Vec<ProtocolEvent>,
    pub decision: Decision,
    pub total_circuit_runs: u64,
    pub total_bell_pairs: u64,
}

/// Interleaved estimate/purify driver. Each round samples a measurement
/// batch, inverts it, and either delivers (estimate ≥ threshold), purifies
/// once more, or aborts (max_rounds hit, or the model-level fidelity gain
/// per round drops below 1e-6 — the plateau detector that guarantees
/// termination when the threshold is unreachable at this noise level).
pub fn run_protocol(
    initial: &BellDiagonalState,
    noise: NoiseModel,
    oracle: &CircuitModel,
    threshold: f64,
    batch_shots: u64,
    max_rounds: usize,
    seed: u64,
) -> Result<ProtocolRunLog> {
    if !(0.5..1.0).contains(&threshold) {
        return Err(Error::Domain {
            value: threshold,
            domain: "threshold in (0.5, 1)",
        });
    }
    if batch_shots == 0 {
        return Err(Error::Domain {
            value: 0.0,
            domain: "batch_shots >= 1",
        });
    }
    let mut events = Vec::new();
    let mut runs = 0u64;
    let mut state = *initial;
    let mut purify_rounds = 0usize;
    let decision = loop {
        let tally = circuit::sample_shots(&state, oracle, batch_shots, seed.wrapping_add(purify_rounds as u64))?;
        let rec = estimate::estimate_from_tally(&tally, noise, oracle)?;
        runs += batch_shots;
        let (ci_low, ci_high) = match stats::sigma_one(&rec.state, noise, oracle) {
            Ok(curve) => stats::confidence_interval(rec.a_hat, &curve, batch_shots, 3.0),
            Err(_) => (rec.a_hat, rec.a_hat),
        };
        events.push(ProtocolEvent::Estimate {
            round: purify_rounds,
            n_shots: batch_shots,
            a_hat: rec.a_hat,
            ci_low,
            ci_high,
        });
        if rec.a_hat >= threshold {
            break Decision::Deliver {
                fidelity_estimate: rec.a_hat,
            };
        }
        if purify_rounds >= max_rounds {
            break Decision::Abort {
                reason: format!("threshold {threshold} not reached within {max_rounds} rounds"),
            };
        }
        let before = state.fidelity();
        let (next, p) = if noise.is_noiseless() {
            let o = purify::purify_once_ideal(&state)?;
            (o.output, o.success_probability)
        } else {
            circuit::single_run_output(&state, noise.lambda())?
        };
        purify_rounds += 1;
        events.push(ProtocolEvent::Purify {
            round: purify_rounds,
            success_probability: p,
        });
        if next.fidelity() - before < 1e-6 {
            break Decision::Abort {
                reason: format!(
                    "fidelity plateau below threshold: per-round gain {:.2e} < 1e-6",
                    next.fidelity() - before
                ),
            };
        }
        state = next;
    };
    Ok(ProtocolRunLog {
        events,
        decision,
        total_circuit_runs: runs,
        total_bell_pairs: 4 * runs,
    })
}

fn parse_quad(s: &str) -> Result<[f64; 4]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("expected four comma-separated numbers, got {s:?}")))?;
    if parts.len() != 4 {
        return Err(Error::Config(format!("expected 4 values, got {}", parts.len())));
    }
    Ok([parts[0], parts[1], parts[2], parts[3]])
}

fn parse_triple(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("expected three comma-separated numbers, got {s:?}")))?;
    if parts.len() != 3 {
        return Err(Error::Config(format!("expected 3 values, got {}", parts.len())));
    }
    Ok([parts[0], parts[1], parts[2]])
}

fn resolve_state(args: &StateArgs, cfg: &Config) -> Result<BellDiagonalState> {
    if let Some(s) = &args.state {
        let [a, b, c, d] = parse_quad(s)?;
        return BellDiagonalState::new(a, b, c, d);
    }
    if let Some(f) = cfg.resolve_opt(args.fidelity, "fidelity")? {
        return BellDiagonalState::werner(f);
    }
    if let Some(s) = cfg.map.get("state") {
        let [a, b, c, d] = parse_quad(s)?;
        return BellDiagonalState::new(a, b, c, d);
    }
    Err(Error::Config("no input state: pass --state or --fidelity".into()))
}

fn emit(json_mode: bool, value: serde_json::Value, human: String) {
    if json_mode {
        let mut obj = value;
        if let Some(map) = obj.as_object_mut() {
            map.insert("schema_version".into(), json!(SCHEMA_VERSION));
        }
        println!("{}", serde_json::to_string_pretty(&obj).expect("serializable"));
    } else {
        println!("{human}");
    }
}

/// Dispatches a parsed invocation. The binary maps the error to exit 1.
pub fn execute(cli: Cli) -> Result<()> {
    let cfg = Config::load(cli.config.as_ref())?;
    let json_mode = cli.json;
    match cli.command {
        Command::Purify { state, lambda, rounds } => {
            let st = resolve_state(&state, &cfg)?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let rounds = cfg.resolve(rounds, "rounds", 1)?;
            let t = purify::iterate(&st, noise, rounds)?;
            let mut human = format!("initial: {:?}\n", st.coeffs());
            for r in &t.rounds {
                human += &format!(
                    "round {}: F = {:.6}, P_success = {:.6}, coeffs = {:?}\n",
                    r.round_index,
                    r.output.fidelity(),
                    r.success_probability,
                    r.output.coeffs()
                );
            }
            emit(json_mode, json!({ "command": "purify", "trajectory": t }), human);
        }
        Command::SuccessProb { state, lambda } => {
            let st = resolve_state(&state, &cfg)?;
            let lam = cfg.resolve(lambda, "lambda", 0.0)?;
            let p = if lam == 0.0 {
                purify::success_probability_ideal(&st)
            } else {
                circuit::single_run_output(&st, lam)?.1
            };
            emit(
                json_mode,
                json!({ "command": "success-prob", "lambda": lam, "success_probability": p }),
                format!("P_success = {p:.6}"),
            );
        }
        Command::Distribution { state, lambda } => {
            let st = resolve_state(&state, &cfg)?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let model = build_circuit(noise)?;
            let dist = circuit::joint_parity_distribution(&st, &model);
            let m = dist.agree_marginals();
            let mut human = String::new();
            let mut cells = Vec::new();
            for s1 in 0..2 {
                for s2 in 0..2 {
                    for s3 in 0..2 {
                        let p = dist.prob[s1][s2][s3];
                        cells.push(json!({ "s1": s1, "s2": s2, "s3": s3, "p": p }));
                        human += &format!("({s1},{s2},{s3}): {p:.6}\n");
                    }
                }
            }
            human += &format!("agree marginals: {:.6}, {:.6}, {:.6}", m[0], m[1], m[2]);
            emit(
                json_mode,
                json!({ "command": "distribution", "cells": cells, "agree_marginals": m }),
                human,
            );
        }
        Command::Estimate { p, n, lambda } => {
            let [p1, p2, p3] = parse_triple(&p)?;
            let n_shots = cfg.resolve(n, "n", 0)?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let props = ParityProportions { p1, p2, p3, n_shots };
            let rec = if noise.is_noiseless() {
                estimate::invert_ideal(&props)?
            } else {
                let model = build_circuit(noise)?;
                estimate::invert_general(&props, noise, &model)?
            };
            emit(
                json_mode,
                json!({ "command": "estimate", "result": rec }),
                format!(
                    "a_hat = {:.6}\ncoeffs = {:?}\nclamped = {}, projected = {}",
                    rec.a_hat,
                    rec.state.coeffs(),
                    rec.clamped,
                    rec.projected
                ),
            );
        }
        Command::Sigma { state, lambda, convention } => {
            let st = resolve_state(&state, &cfg)?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let conv = cfg.resolve(convention, "convention", "diag".to_string())?;
            let conv = match conv.as_str() {
                "diag" => SigmaConvention::Diagonal,
                "full" => SigmaConvention::FullJoint,
                other => return Err(Error::Config(format!("unknown convention {other:?}"))),
            };
            let model = build_circuit(noise)?;
            let curve = stats::sigma_one_with(&st, noise, &model, conv)?;
            emit(
                json_mode,
                json!({ "command": "sigma", "sigma1": curve.sigma1, "lambda": noise.lambda() }),
                format!("sigma(n) = {:.4}/sqrt(n)", curve.sigma1),
            );
        }
        Command::Plan { fidelity, lambda, halfwidth, k } => {
            let f = cfg
                .resolve_opt(fidelity, "fidelity")?
                .ok_or_else(|| Error::Config("--fidelity required".into()))?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let h = cfg.resolve(halfwidth, "halfwidth", 0.01)?;
            let k = cfg.resolve(k, "k", 3.0)?;
            let model = build_circuit(noise)?;
            let plan = plan::pairs_for_certification(f, noise, &model, h, k)?;
            emit(
                json_mode,
                json!({ "command": "plan", "plan": plan }),
                format!(
                    "circuit runs: {}\nbell pairs:   {}",
                    plan.circuit_runs, plan.bell_pairs
                ),
            );
        }
        Command::CertifyPlan { fidelity, lambda, threshold, k } => {
            let f0 = cfg
                .resolve_opt(fidelity, "fidelity")?
                .ok_or_else(|| Error::Config("--fidelity required".into()))?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let threshold = cfg.resolve(threshold, "threshold", 0.9)?;
            let k = cfg.resolve(k, "k", 3.0)?;
            let model = build_circuit(noise)?;
            let plan = plan::purify_and_certify_plan(f0, noise, &model, threshold, k)?;
            emit(
                json_mode,
                json!({ "command": "certify-plan", "plan": plan }),
                format!(
                    "rounds: {}\nruns: {}\nbell pairs: {}\nper-round success: {:?}",
                    plan.rounds, plan.circuit_runs, plan.bell_pairs, plan.per_round_success
                ),
            );
        }
        Command::Sweep {
            fidelity,
            lambda,
            n_start,
            n_step,
            n_max,
            replicates,
            seed,
            out,
        } => {
            let f = cfg
                .resolve_opt(fidelity, "fidelity")?
                .ok_or_else(|| Error::Config("--fidelity required".into()))?;
            let lam = cfg.resolve(lambda, "lambda", 0.0)?;
            let start = cfg.resolve(n_start, "n_start", 1000)?;
            let step = cfg.resolve(n_step, "n_step", 1000)?;
            let max = cfg.resolve(n_max, "n_max", 20_000)?;
            if step == 0 || start == 0 || max < start {
                return Err(Error::Config("need n_start >= 1, n_step >= 1, n_max >= n_start".into()));
            }
            let config = SweepConfig {
                werner_f: f,
                lambda: lam,
                n_grid: (start..=max).step_by(step as usize).collect(),
                replicates: cfg.resolve(replicates, "replicates", 20)?,
                base_seed: cfg.resolve(seed, "seed", 0)?,
            };
            let model = build_circuit(NoiseModel::new(lam)?)?;
            let rows = mc::run_reconstruction_sweep(&config, &model)?;
            match out {
                Some(path) => {
                    mc::write_sweep_outputs(&config, &rows, &path)?;
                    emit(
                        json_mode,
                        json!({ "command": "sweep", "csv": path, "rows": rows.len() }),
                        format!("wrote {} rows to {}", rows.len(), path.display()),
                    );
                }
                None => print!("{}", mc::sweep_csv(&config, &rows)),
            }
        }
        Command::SampledPurify { state, lambda, rounds, shots, seed } => {
            let st = resolve_state(&state, &cfg)?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let rounds = cfg.resolve(rounds, "rounds", 3)?;
            let shots = cfg.resolve(shots, "shots", 100_000)?;
            let seed = cfg.resolve(seed, "seed", 0)?;
            let rows = mc::run_sampled_purification(&st, noise, rounds, shots, seed)?;
            emit(
                json_mode,
                json!({ "command": "sampled-purify", "rounds": rows }),
                mc::sampled_csv(&rows),
            );
        }
        Command::Protocol { state, lambda, threshold, batch, max_rounds, seed } => {
            let st = resolve_state(&state, &cfg)?;
            let noise = NoiseModel::new(cfg.resolve(lambda, "lambda", 0.0)?)?;
            let threshold = cfg.resolve(threshold, "threshold", 0.9)?;
            let max_rounds = cfg.resolve(max_rounds, "max_rounds", 10)?;
            let seed = cfg.resolve(seed, "seed", 0)?;
            let model = build_circuit(noise)?;
            let batch = match cfg.resolve_opt(batch, "batch")? {
                Some(b) => b,
                // default: the planner's run count for this threshold
                None => plan::purify_and_certify_plan(st.fidelity(), noise, &model, threshold, 3.0)
                    .map(|p| p.circuit_runs)
                    .unwrap_or(1000)
                    .max(1),
            };
            let log = run_protocol(&st, noise, &model, threshold, batch, max_rounds, seed)?;
            let mut human = String::new();
            for e in &log.events {
                match e {
                    ProtocolEvent::Estimate { round, n_shots, a_hat, ci_low, ci_high } => {
                        human += &format!(
                            "round {round}: estimated F = {a_hat:.4} (n = {n_shots}, 3-sigma CI [{ci_low:.4}, {ci_high:.4}])\n"
                        )
                    }
                    ProtocolEvent::Purify { round, success_probability } => {
                        human += &format!("round {round}: purified (P_success = {success_probability:.4})\n")
                    }
                }
            }
            human += &match &log.decision {
                Decision::Deliver { fidelity_estimate } => {
                    format!("deliver (F = {fidelity_estimate:.4})")
                }
                Decision::Abort { reason } => format!("abort: {reason}"),
            };
            human += &format!(
                "\ntotals: {} circuit runs, {} bell pairs",
                log.total_circuit_runs, log.total_bell_pairs
            );
            emit(json_mode, json!({ "command": "protocol", "log": log }), human);
        }
        Command::ThresholdLambda { fidelity } => {
            let f = cfg
                .resolve_opt(fidelity, "fidelity")?
                .ok_or_else(|| Error::Config("--fidelity required".into()))?;
            let lam = purify::find_lambda_threshold(f)?;
            emit(
                json_mode,
                json!({ "command": "threshold-lambda", "fidelity": f, "lambda_threshold": lam }),
                format!("lambda* = {lam:.4}"),
            );
        }
    }
    Ok(())
}
