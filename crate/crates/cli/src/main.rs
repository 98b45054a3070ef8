//! `mim`: validate configs, run simulations and hypotheses, and compute
//! alignment, bottleneck and rate–distortion curves from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mim_core::agent::leading_candidate;
use mim_core::align::{optimize_alignment, AlignMode};
use mim_core::candidate::candidate_seed;
use mim_core::canonical::to_canonical_string;
use mim_core::config::{parse_config, prepare, ConfigError, HypothesisId, RunConfig};
use mim_core::output::{curves_csv, emit_metrics, record_curves, write_atomic, CurvePoint};
use mim_core::probkit::{ib_solve, rd_curve, Distortion};
use mim_core::scenarios::{run_hypothesis, ScenarioError};

const EXIT_HYPOTHESIS_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "mim", version, about = "Multi-phase inference simulator")]
struct Cli {
    /// Overrides the config seed (takes precedence over MIM_SEED).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a config; prints its digest.
    Validate { config: PathBuf },
    /// Run the engine and write record.json, metrics.json and curves.csv.
    Run {
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate one hypothesis scenario. Exits 1 when it fails.
    Hypothesis {
        id: String,
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align one agent's representation into another agent's space.
    Align {
        config: PathBuf,
        #[arg(long)]
        sender: String,
        #[arg(long)]
        receiver: String,
        /// Sender candidate key; defaults to the sender's highest-r admissible candidate.
        #[arg(long)]
        candidate: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Solve the bottleneck for one phase point, or sweep β given as `lo:hi:n`.
    Ib {
        config: PathBuf,
        #[arg(long)]
        target: String,
        #[arg(long)]
        basis: String,
        #[arg(long)]
        cardinality: usize,
        #[arg(long)]
        beta: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rate–distortion curve under Hamming distortion.
    Rd {
        config: PathBuf,
        /// Comma-separated distortion values.
        #[arg(long, value_delimiter = ',', required = true)]
        grid: Vec<f64>,
        /// `obs` for the observation marginal, or a target name for its prior.
        #[arg(long, default_value = "obs")]
        source: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Greedy,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(c) => Failure::Config(c.to_string()),
            ScenarioError::Mismatch(m) => Failure::Config(format!("config mismatch: {m}")),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

/// Flag, then `MIM_SEED`, then the config's own seed.
fn load(path: &Path, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = parse_config(path)?;
    let env = match std::env::var("MIM_SEED") {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|_| Failure::Config(format!("MIM_SEED must be an unsigned integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    if let Some(s) = seed.or(env) {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config, cli.seed)?;
            prepare(&cfg)?;
            println!("ok {}", cfg.digest());
            Ok(0)
        }
        Command::Run { config, out } => {
            let cfg = load(&config, cli.seed)?;
            let record = mim_core::engine::run(&cfg).map_err(|e| match e {
                mim_core::EngineError::Config(c) => Failure::from(c),
                other => Failure::Runtime(other.to_string()),
            })?;
            emit_metrics(Some(&record), None, &record_curves(&record), &out).map_err(|e| io_failure(&out, e))?;
            let path = out.join("record.json");
            write_atomic(&path, record.to_canonical().as_bytes()).map_err(|e| io_failure(&path, e))?;
            println!("record {} ({} events)", record.digest(), record.events.len());
            Ok(0)
        }
        Command::Hypothesis { id, config, out } => {
            let hid = HypothesisId::parse(&id)
                .ok_or_else(|| Failure::Config(format!("unknown hypothesis `{id}`; expected h1..h4")))?;
            let cfg = load(&config, cli.seed)?;
            let result = run_hypothesis(&cfg, hid)?;
            if let Some(dir) = out {
                let curves = result.record.as_ref().map(record_curves).unwrap_or_default();
                emit_metrics(result.record.as_ref(), Some(&result.outcome), &curves, &dir)
                    .map_err(|e| io_failure(&dir, e))?;
            }
            print!("{}", to_canonical_string(&result.outcome));
            Ok(if result.outcome.pass { 0 } else { EXIT_HYPOTHESIS_FAIL })
        }
        Command::Align {
            config,
            sender,
            receiver,
            candidate,
            mode,
        } => {
            let cfg = load(&config, cli.seed)?;
            let prepared = prepare(&cfg)?;
            let find = |id: &str| {
                prepared
                    .agent(id)
                    .ok_or_else(|| Failure::Config(format!("unknown agent `{id}`")))
            };
            let (s, r) = (find(&sender)?, find(&receiver)?);
            let index = match &candidate {
                Some(key) => s
                    .space
                    .registry
                    .index_of(key)
                    .filter(|x| s.space.phases[*x].admissible)
                    .ok_or_else(|| Failure::Config(format!("`{key}` is not an admissible candidate of `{sender}`")))?,
                None => leading_candidate(&s.agent.state, &s.space)
                    .ok_or_else(|| Failure::Runtime(format!("`{sender}` has no admissible candidate")))?,
            };
            let mut opts = cfg.engine.align_options();
            if let Some(m) = mode {
                opts.mode = match m {
                    ModeArg::Exhaustive => AlignMode::Exhaustive,
                    ModeArg::Greedy => AlignMode::Greedy,
                };
            }
            let report = optimize_alignment(
                &prepared.world,
                &s.space.candidates[index],
                s.agent.state.zeta.kappa,
                &r.agent.state,
                &r.space,
                &opts,
            )
            .map_err(|e| Failure::Runtime(e.to_string()))?;
            print!("{}", to_canonical_string(&report));
            Ok(0)
        }
        Command::Ib {
            config,
            target,
            basis,
            cardinality,
            beta,
            out,
        } => {
            let cfg = load(&config, cli.seed)?;
            let world = mim_core::build_world(&cfg.world).map_err(|e| Failure::Config(e.to_string()))?;
            let t = world
                .target_index(&target)
                .map_err(|_| Failure::Config(format!("unknown target `{target}`")))?;
            let b = cfg
                .bases
                .iter()
                .find(|b| b.id == basis)
                .ok_or_else(|| Failure::Config(format!("unknown basis `{basis}`")))?;
            if cardinality == 0 {
                return Err(Failure::Config("cardinality must be at least 1".into()));
            }
            let betas = parse_betas(&beta).map_err(Failure::Config)?;
            let joint = world.obs_target_joint(t).merge_rows(&b.map, b.features());
            let seed = candidate_seed(cfg.seed, &format!("{target}/{basis}/m{cardinality}"));
            let mut points = Vec::new();
            for beta in betas {
                let r = ib_solve(&joint, cardinality, beta, &cfg.engine.ib, seed);
                points.push(CurvePoint::new("i_ot", beta, r.i_ot));
                points.push(CurvePoint::new("i_ty", beta, r.i_ty));
                points.push(CurvePoint::new("objective", beta, r.objective()));
            }
            points.sort_by(|a, b| a.series.cmp(&b.series));
            write_curves(&points, out.as_deref())
        }
        Command::Rd {
            config,
            grid,
            source,
            out,
        } => {
            let cfg = load(&config, cli.seed)?;
            let world = mim_core::build_world(&cfg.world).map_err(|e| Failure::Config(e.to_string()))?;
            let dist = if source == "obs" {
                world.obs_marginal().clone()
            } else {
                let t = world
                    .target_index(&source)
                    .map_err(|_| Failure::Config(format!("unknown source `{source}`")))?;
                world.target_prior(t)
            };
            if grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return Err(Failure::Config("grid values must be finite and non-negative".into()));
            }
            let curve = rd_curve(&dist, &Distortion::hamming(dist.len()), &grid);
            let points: Vec<CurvePoint> = curve
                .iter()
                .map(|p| CurvePoint::new("rate", p.distortion, p.rate))
                .collect();
            write_curves(&points, out.as_deref())
        }
    }
}

fn write_curves(points: &[CurvePoint], out: Option<&Path>) -> Result<u8, Failure> {
    let csv = curves_csv(points);
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            let path = dir.join("curves.csv");
            write_atomic(&path, csv.as_bytes()).map_err(|e| io_failure(&path, e))?;
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

/// A single value, or `lo:hi:n` for `n` evenly spaced values.
fn parse_betas(spec: &str) -> Result<Vec<f64>, String> {
    let bad = || format!("invalid --beta `{spec}`; expected a number or lo:hi:n");
    let parts: Vec<&str> = spec.split(':').collect();
    let values = match parts.as_slice() {
        [b] => vec![b.trim().parse::<f64>().map_err(|_| bad())?],
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(bad());
            }
            if n == 1 {
                vec![lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        }
        _ => return Err(bad()),
    };
    if values.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
        return Err("beta values must be finite and non-negative".into());
    }
    Ok(values)
}
