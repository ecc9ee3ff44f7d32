use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use multiprice::adversary::build_instance;
use multiprice::choice::AssortmentFamily;
use multiprice::engine::{run_policy, ArrivalSequence, Forecast, Policy, PolicyContext, Setup, ValueMode};
use multiprice::harness::{lp_bound, run_experiment, trial_seed, ExperimentConfig, InstanceSource};
use multiprice::lp::{solve_choice_lp, solve_primal};
use multiprice::perturb::{best_certified_bound, rounded_procedure, single_unit_procedure, verify_conditions};
use multiprice::{Error, PriceSet, ValueFunction};

#[derive(Parser)]
#[command(name = "multiprice", version, about = "Online allocation of multi-price inventory")]
struct Cli {
    /// Base seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Monte-Carlo trials per instance.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file, or directory for the experiment commands.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Booking limits, borders and ratios of a price set.
    Valuefn {
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        /// Also sample the value function at this many intervals.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Value-function rounding procedures.
    Perturb {
        #[command(subcommand)]
        action: PerturbAction,
    },
    /// Run policies on an instance file.
    Simulate {
        instance: PathBuf,
    },
    /// Hindsight LP bound of an instance file.
    LpBound {
        instance: PathBuf,
    },
    /// Hard instances with nested interest sets.
    Adversary {
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Print one instance as an instance file instead of simulating.
        #[arg(long)]
        emit: bool,
    },
    /// Hotel experiment over loading factors.
    HotelSim {
        /// Experiment config; flags below are ignored when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        fare_diff: bool,
        #[arg(long, value_delimiter = ',')]
        loading_factors: Option<Vec<f64>>,
    },
}

#[derive(Subcommand)]
enum PerturbAction {
    /// Check the per-unit conditions of a procedure at ratio `c`.
    Verify {
        #[arg(long, value_delimiter = ',', required = true)]
        prices: Vec<f64>,
        #[arg(long)]
        k: usize,
        /// Defaults to the best certified bound for the price set and `k`.
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, value_enum, default_value_t = Procedure::Rounded)]
        procedure: Procedure,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Procedure {
    Rounded,
    SingleUnit,
}

/// Instance file read by `simulate` and `lp-bound`.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    setup: Setup,
    arrivals: ArrivalSequence,
    #[serde(default)]
    policies: Vec<Policy>,
    #[serde(default)]
    forecast: Option<Forecast>,
    #[serde(default)]
    family: AssortmentFamily,
}

#[derive(Serialize)]
struct PolicySummary {
    policy: String,
    mean_revenue: f64,
    stdev_revenue: f64,
    mean_ratio: Option<f64>,
    trials: usize,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_limit() { 3 } else { 2 })
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            log::info!("wrote {}", p.display());
            Ok(())
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Error> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn read_instance(path: &Path) -> Result<InstanceFile, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let inst: InstanceFile = serde_json::from_str(&text)?;
    inst.arrivals.validate(&inst.setup)?;
    Ok(inst)
}

fn run(cli: &Cli) -> Result<(), Error> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Valuefn { prices, grid } => {
            let vf = ValueFunction::new(PriceSet::new(prices.clone())?)?;
            let mut v = serde_json::json!({
                "prices": vf.prices(),
                "alphas": vf.alphas(),
                "borders": vf.borders(),
                "sigmas": vf.sigmas(),
                "f": vf.ratio_f(),
                "g": vf.ratio_g(),
            });
            if let Some(g) = grid {
                if *g == 0 {
                    return Err(Error::InvalidArgument("grid must be at least 1".into()));
                }
                v["samples"] = serde_json::json!(vf.sample(*g));
            }
            emit(out, &to_json(&v)?)
        }
        Command::Perturb {
            action:
                PerturbAction::Verify {
                    prices,
                    k,
                    c,
                    procedure,
                },
        } => {
            let ps = PriceSet::new(prices.clone())?;
            let vf = ValueFunction::new(ps.clone())?;
            let c = c.unwrap_or_else(|| best_certified_bound(&vf, *k));
            let proc = match procedure {
                Procedure::Rounded => rounded_procedure(&vf, *k)?,
                Procedure::SingleUnit => {
                    if *k != 1 {
                        return Err(Error::InvalidArgument("the single-unit procedure needs k = 1".into()));
                    }
                    single_unit_procedure(&ps)
                }
            };
            let rep = verify_conditions(&proc, &ps, *k, c)?;
            emit(out, &to_json(&serde_json::json!({ "c": c, "report": rep }))?)
        }
        Command::Simulate { instance } => {
            let inst = read_instance(instance)?;
            let trials = cli.trials.unwrap_or(10);
            if trials == 0 {
                return Err(Error::InvalidArgument("trials must be at least 1".into()));
            }
            let bound = match lp_bound(&inst.setup, &inst.arrivals, &inst.family) {
                Ok(b) => Some(b),
                Err(e) if matches!(e, Error::Unsupported(_)) => {
                    log::warn!("no LP bound: {e}");
                    None
                }
                Err(e) => return Err(e),
            };
            let policies = if inst.policies.is_empty() {
                vec![Policy::Balance {
                    value_mode: ValueMode::Perturbed,
                }]
            } else {
                inst.policies.clone()
            };
            let ctx = PolicyContext {
                forecast: inst.forecast.clone(),
                family: inst.family.clone(),
            };
            let mut rows = Vec::new();
            for p in &policies {
                let mut revs = Vec::with_capacity(trials);
                for t in 0..trials {
                    revs.push(run_policy(p, &inst.setup, &inst.arrivals, trial_seed(cli.seed, 0, t), &ctx)?.revenue);
                }
                let n = revs.len() as f64;
                let mean = revs.iter().sum::<f64>() / n;
                let var = revs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
                rows.push(PolicySummary {
                    policy: p.label(),
                    mean_revenue: mean,
                    stdev_revenue: var.sqrt(),
                    mean_ratio: bound.filter(|b| *b > 0.0).map(|b| mean / b),
                    trials,
                });
            }
            emit(out, &to_json(&serde_json::json!({ "lp_bound": bound, "policies": rows }))?)
        }
        Command::LpBound { instance } => {
            let inst = read_instance(instance)?;
            let sol = match &inst.arrivals {
                ArrivalSequence::Assortment(a) => solve_choice_lp(&inst.setup, &a.type_counts(0), &a.model, &inst.family)?,
                _ => solve_primal(&inst.setup, &inst.arrivals)?,
            };
            emit(
                out,
                &to_json(&serde_json::json!({
                    "objective": sol.objective,
                    "dual_objective": sol.dual_objective,
                    "inventory_duals": sol.inventory_duals,
                    "arrival_duals": sol.arrival_duals,
                    "columns": sol.columns,
                    "pivots": sol.pivots,
                }))?,
            )
        }
        Command::Adversary { prices, n, k, emit: dump } => {
            if *dump {
                let inst = build_instance(&PriceSet::new(prices.clone())?, *n, *k, cli.seed)?;
                let file = InstanceFile {
                    setup: inst.setup,
                    arrivals: inst.arrivals,
                    policies: Vec::new(),
                    forecast: None,
                    family: AssortmentFamily::default(),
                };
                return emit(out, &to_json(&file)?);
            }
            let cfg = ExperimentConfig {
                source: InstanceSource::Adversary {
                    prices: prices.clone(),
                    n: *n,
                    k: *k,
                    instances: cli.trials.unwrap_or(100),
                },
                policies: vec![
                    Policy::Ranking,
                    Policy::Balance {
                        value_mode: ValueMode::Perturbed,
                    },
                    Policy::Balance {
                        value_mode: ValueMode::Fixed,
                    },
                    Policy::Myopic,
                    Policy::Gnr,
                    Policy::Conservative,
                ],
                trials: 1,
                seed: cli.seed,
                loading_factors: Vec::new(),
                family: AssortmentFamily::default(),
                output: out.map(Path::to_path_buf),
            };
            print!("{}", run_experiment(&cfg)?.table_csv());
            Ok(())
        }
        Command::HotelSim {
            config,
            fare_diff,
            loading_factors,
        } => {
            let mut cfg = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
                    serde_json::from_str(&text)?
                }
                None => {
                    let mut c = ExperimentConfig::hotel(*fare_diff);
                    if let Some(lf) = loading_factors {
                        c.loading_factors = lf.clone();
                    }
                    c.seed = cli.seed;
                    c
                }
            };
            if let Some(t) = cli.trials {
                cfg.trials = t;
            }
            if out.is_some() {
                cfg.output = out.map(Path::to_path_buf);
            }
            let report = run_experiment(&cfg)?;
            for f in &report.failures {
                log::warn!("{} lf={:?} instance {} {}: {}", f.ensemble, f.loading_factor, f.instance, f.policy, f.message);
            }
            print!("{}", report.table_csv());
            Ok(())
        }
    }
}
