use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hotel::{build_ensemble, generate_days, hotel_model, HotelProfile, DEFAULT_LOADING_FACTORS};
use super::transactions::{ingest_transactions, read_transactions};
use crate::adversary::build_instance;
use crate::choice::AssortmentFamily;
use crate::engine::{run_policy, ArrivalSequence, BidPriceMode, Policy, PolicyContext, Setup, ValueMode};
use crate::error::{Error, Result};
use crate::lp::{solve_choice_lp, solve_primal};
use crate::valuefn::PriceSet;

/// First line of every CSV the harness writes.
pub const SCHEMA_HEADER: &str = "# multiprice-report v1";

/// Ratios above one by more than this many standard errors are flagged.
const FLAG_SIGMAS: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSource {
    /// Hard instances, one per seed `seed .. seed + instances`.
    Adversary {
        prices: Vec<f64>,
        n: usize,
        k: usize,
        instances: usize,
    },
    SyntheticHotel {
        #[serde(default)]
        fare_differentiation: bool,
        #[serde(default)]
        profile: HotelProfile,
    },
    Csv {
        path: PathBuf,
        #[serde(default = "default_replication")]
        replication: usize,
        #[serde(default)]
        fare_differentiation: bool,
    },
}

fn default_replication() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: InstanceSource,
    #[serde(default = "hotel_policies")]
    pub policies: Vec<Policy>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_loading_factors")]
    pub loading_factors: Vec<f64>,
    #[serde(default)]
    pub family: AssortmentFamily,
    /// Directory for `table.csv` and `figure.csv`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_trials() -> usize {
    10
}

fn default_loading_factors() -> Vec<f64> {
    DEFAULT_LOADING_FACTORS.to_vec()
}

/// The ten policies compared on the hotel ensembles.
pub fn hotel_policies() -> Vec<Policy> {
    let mut v = vec![
        Policy::Myopic,
        Policy::Conservative,
        Policy::Gnr,
        Policy::Balance {
            value_mode: ValueMode::Fixed,
        },
    ];
    for mode in [
        BidPriceMode::OneShot,
        BidPriceMode::Resolving,
        BidPriceMode::Learning,
        BidPriceMode::Clairvoyant,
    ] {
        v.push(Policy::BidPrice {
            mode,
            resolve_every: 100,
        });
    }
    for base in [BidPriceMode::Resolving, BidPriceMode::Learning] {
        v.push(Policy::Hybrid {
            base,
            gamma: 1.5,
            resolve_every: 100,
        });
    }
    v
}

impl ExperimentConfig {
    pub fn hotel(fare_differentiation: bool) -> Self {
        ExperimentConfig {
            source: InstanceSource::SyntheticHotel {
                fare_differentiation,
                profile: HotelProfile::default(),
            },
            policies: hotel_policies(),
            trials: default_trials(),
            seed: 0,
            loading_factors: default_loading_factors(),
            family: AssortmentFamily::Unconstrained,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidArgument("no policies to run".into()));
        }
        for &lf in &self.loading_factors {
            if !(lf > 0.0) || !lf.is_finite() {
                return Err(Error::Domain {
                    what: "loading_factor",
                    value: lf,
                    domain: "(0, inf)",
                });
            }
        }
        let hotel = !matches!(self.source, InstanceSource::Adversary { .. });
        if hotel && self.loading_factors.is_empty() {
            return Err(Error::InvalidArgument("hotel sources need at least one loading factor".into()));
        }
        for p in &self.policies {
            if let Policy::Hybrid { gamma, .. } = p {
                if !(*gamma > 1.0) {
                    return Err(Error::Domain {
                        what: "gamma",
                        value: *gamma,
                        domain: "(1, inf]",
                    });
                }
            }
            let needs_choice = matches!(p, Policy::BidPrice { .. } | Policy::Hybrid { .. });
            if needs_choice && !hotel {
                return Err(Error::InvalidArgument(format!(
                    "policy {} needs assortment arrivals",
                    p.label()
                )));
            }
            if !hotel && matches!(p, Policy::FractionalBalance) {
                return Err(Error::InvalidArgument("fractional balance needs fractional arrivals".into()));
            }
        }
        Ok(())
    }
}

/// One instance with its benchmark.
struct Instance {
    setup: Setup,
    arrivals: ArrivalSequence,
    ctx: PolicyContext,
    /// Hindsight optimum, or why it could not be computed.
    opt: std::result::Result<f64, String>,
}

/// Instances sharing one row of the report.
struct Group {
    ensemble: String,
    loading_factor: Option<f64>,
    instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub ensemble: String,
    pub loading_factor: Option<f64>,
    pub policy: String,
    /// Mean over instances of the trial-averaged revenue / optimum.
    pub mean: f64,
    /// Sample standard deviation of the same over instances.
    pub stdev: f64,
    /// Instances with every trial completed.
    pub instances: usize,
    pub failures: usize,
    /// Instances whose mean ratio exceeds one by more than three standard
    /// errors.
    pub flagged: usize,
    pub override_fraction: f64,
    /// Per-instance ratios, in instance order.
    #[serde(skip)]
    pub ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub ensemble: String,
    pub loading_factor: Option<f64>,
    pub instance: usize,
    pub trial: Option<usize>,
    pub policy: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub failures: Vec<RunFailure>,
}

/// Trial seed shared by all policies on one instance.
pub fn trial_seed(base: u64, instance: usize, trial: usize) -> u64 {
    let mut z = base
        ^ (instance as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (trial as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn load_groups(cfg: &ExperimentConfig) -> Result<Vec<Group>> {
    match &cfg.source {
        InstanceSource::Adversary {
            prices,
            n,
            k,
            instances,
        } => {
            let ps = PriceSet::new(prices.clone())?;
            let mut v = Vec::with_capacity(*instances);
            for idx in 0..*instances {
                let inst = build_instance(&ps, *n, *k, cfg.seed.wrapping_add(idx as u64))?;
                let opt = Ok(inst.opt());
                v.push(Instance {
                    setup: inst.setup,
                    arrivals: inst.arrivals,
                    ctx: PolicyContext {
                        forecast: None,
                        family: cfg.family.clone(),
                    },
                    opt,
                });
            }
            Ok(vec![Group {
                ensemble: "adversary".into(),
                loading_factor: None,
                instances: v,
            }])
        }
        InstanceSource::SyntheticHotel {
            fare_differentiation,
            profile,
        } => {
            let model = hotel_model(*fare_differentiation);
            let days = generate_days(profile, &model, cfg.seed)?;
            let label = if *fare_differentiation { "hotel_fare_diff" } else { "hotel" };
            hotel_groups(cfg, days, model, *fare_differentiation, profile.booking_curve.clone(), label)
        }
        InstanceSource::Csv {
            path,
            replication,
            fare_differentiation,
        } => {
            let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            let records = read_transactions(file)?;
            let model = hotel_model(*fare_differentiation);
            let days = ingest_transactions(&records, &model, *replication)?;
            if days.is_empty() {
                return Ok(Vec::new());
            }
            let label = if *fare_differentiation { "csv_fare_diff" } else { "csv" };
            hotel_groups(cfg, days, model, *fare_differentiation, Default::default(), label)
        }
    }
}

fn hotel_groups(
    cfg: &ExperimentConfig,
    days: Vec<super::hotel::HotelDay>,
    model: crate::choice::MnlModel,
    fare_differentiation: bool,
    curve: crate::engine::ForecastCurve,
    label: &str,
) -> Result<Vec<Group>> {
    let mut groups = Vec::new();
    for &lf in &cfg.loading_factors {
        let ens = build_ensemble(days.clone(), model.clone(), fare_differentiation, lf, curve.clone())?;
        let ctx = PolicyContext {
            forecast: Some(ens.forecast.clone()),
            family: cfg.family.clone(),
        };
        let instances: Vec<Instance> = ens
            .days
            .par_iter()
            .map(|d| {
                let counts = d.customers().type_counts(0);
                let opt = solve_choice_lp(&ens.setup, &counts, &ens.model, &cfg.family)
                    .map(|s| s.objective)
                    .map_err(|e| e.to_string());
                Instance {
                    setup: ens.setup.clone(),
                    arrivals: d.arrivals.clone(),
                    ctx: ctx.clone(),
                    opt,
                }
            })
            .collect();
        groups.push(Group {
            ensemble: label.into(),
            loading_factor: Some(lf),
            instances,
        });
    }
    Ok(groups)
}

fn mean_stdev(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Cell {
    ratio: std::result::Result<f64, String>,
    overrides: f64,
}

/// Runs every policy on every instance for the configured number of trials.
/// Per-run failures are collected in the report rather than aborting.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let groups = load_groups(cfg)?;
    let mut report = ExperimentReport::default();

    for group in &groups {
        let jobs: Vec<(usize, usize, usize)> = (0..group.instances.len())
            .flat_map(|i| (0..cfg.trials).flat_map(move |t| (0..cfg.policies.len()).map(move |p| (i, t, p))))
            .collect();
        let cells: Vec<Cell> = jobs
            .par_iter()
            .map(|&(i, t, p)| {
                let inst = &group.instances[i];
                let opt = match &inst.opt {
                    Ok(v) => *v,
                    Err(e) => {
                        return Cell {
                            ratio: Err(format!("benchmark: {e}")),
                            overrides: 0.0,
                        }
                    }
                };
                let seed = trial_seed(cfg.seed, i, t);
                match run_policy(&cfg.policies[p], &inst.setup, &inst.arrivals, seed, &inst.ctx) {
                    Ok(r) => Cell {
                        ratio: Ok(if opt > 0.0 { r.revenue / opt } else { 1.0 }),
                        overrides: r.override_fraction(),
                    },
                    Err(e) => Cell {
                        ratio: Err(e.to_string()),
                        overrides: 0.0,
                    },
                }
            })
            .collect();

        let cell = |i: usize, t: usize, p: usize| &cells[(i * cfg.trials + t) * cfg.policies.len() + p];
        for (p, policy) in cfg.policies.iter().enumerate() {
            let label = policy.label();
            let mut ratios = Vec::new();
            let mut overrides = Vec::new();
            let mut failures = 0;
            let mut flagged = 0;
            for i in 0..group.instances.len() {
                let mut trial_ratios = Vec::with_capacity(cfg.trials);
                let mut failed = false;
                for t in 0..cfg.trials {
                    let c = cell(i, t, p);
                    match &c.ratio {
                        Ok(r) => {
                            trial_ratios.push(*r);
                            overrides.push(c.overrides);
                        }
                        Err(msg) => {
                            failed = true;
                            report.failures.push(RunFailure {
                                ensemble: group.ensemble.clone(),
                                loading_factor: group.loading_factor,
                                instance: i,
                                trial: Some(t),
                                policy: label.clone(),
                                message: msg.clone(),
                            });
                        }
                    }
                }
                if failed {
                    failures += 1;
                    continue;
                }
                let (m, s) = mean_stdev(&trial_ratios);
                let se = s / (trial_ratios.len() as f64).sqrt();
                if m > 1.0 + 1e-9 + FLAG_SIGMAS * se {
                    flagged += 1;
                }
                ratios.push(m);
            }
            let (mean, stdev) = mean_stdev(&ratios);
            report.rows.push(ReportRow {
                ensemble: group.ensemble.clone(),
                loading_factor: group.loading_factor,
                policy: label,
                mean,
                stdev,
                instances: ratios.len(),
                failures,
                flagged,
                override_fraction: mean_stdev(&overrides).0,
                ratios,
            });
        }
    }

    if let Some(dir) = &cfg.output {
        report.write(dir)?;
    }
    Ok(report)
}

fn fmt_lf(lf: Option<f64>) -> String {
    lf.map(|v| format!("{v}")).unwrap_or_default()
}

impl ExperimentReport {
    pub fn row(&self, ensemble: &str, loading_factor: Option<f64>, policy: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.ensemble == ensemble && r.loading_factor == loading_factor && r.policy == policy)
    }

    /// Mean and standard deviation per ensemble, loading factor and policy.
    pub fn table_csv(&self) -> String {
        let mut s = format!("{SCHEMA_HEADER}\nensemble,loading_factor,policy,mean,stdev,instances,failures,flagged,override_fraction\n");
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{:.6},{:.6},{},{},{},{:.6}",
                r.ensemble,
                fmt_lf(r.loading_factor),
                r.policy,
                r.mean,
                r.stdev,
                r.instances,
                r.failures,
                r.flagged,
                r.override_fraction
            )
            .expect("write to string");
        }
        s
    }

    /// Mean ratio by loading factor, one column per policy.
    pub fn figure_csv(&self) -> String {
        let mut policies: Vec<&str> = Vec::new();
        let mut keys: Vec<(&str, Option<f64>)> = Vec::new();
        for r in &self.rows {
            if !policies.contains(&r.policy.as_str()) {
                policies.push(&r.policy);
            }
            let key = (r.ensemble.as_str(), r.loading_factor);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.sort_by(|a, b| {
            a.0.cmp(b.0)
                .then(a.1.unwrap_or(0.0).total_cmp(&b.1.unwrap_or(0.0)))
        });
        let mut s = format!("{SCHEMA_HEADER}\nensemble,loading_factor");
        for p in &policies {
            s.push(',');
            s.push_str(p);
        }
        s.push('\n');
        for (e, lf) in keys {
            s.push_str(e);
            s.push(',');
            s.push_str(&fmt_lf(lf));
            for p in &policies {
                match self.row(e, lf, p) {
                    Some(r) => write!(s, ",{:.6}", r.mean).expect("write to string"),
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Writes `table.csv` and `figure.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("table.csv"), self.table_csv())?;
        std::fs::write(dir.join("figure.csv"), self.figure_csv())?;
        Ok(())
    }
}

/// Hindsight optimum of a non-choice instance.
pub fn lp_bound(setup: &Setup, arrivals: &ArrivalSequence, family: &AssortmentFamily) -> Result<f64> {
    match arrivals {
        ArrivalSequence::Assortment(a) => {
            solve_choice_lp(setup, &a.type_counts(0), &a.model, family).map(|s| s.objective)
        }
        _ => solve_primal(setup, arrivals).map(|s| s.objective),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_hotel() -> ExperimentConfig {
        ExperimentConfig {
            source: InstanceSource::SyntheticHotel {
                fare_differentiation: false,
                profile: HotelProfile {
                    mean_daily_arrivals: 200.0,
                    days: 3,
                    ..Default::default()
                },
            },
            policies: vec![Policy::Myopic],
            trials: 1,
            seed: 5,
            loading_factors: vec![1.6],
            family: AssortmentFamily::Unconstrained,
            output: None,
        }
    }

    #[test]
    fn single_policy_single_instance() {
        let cfg = ExperimentConfig {
            source: InstanceSource::Adversary {
                prices: vec![1.0, 3.0],
                n: 20,
                k: 1,
                instances: 1,
            },
            policies: vec![Policy::Ranking],
            trials: 1,
            seed: 0,
            loading_factors: vec![],
            family: AssortmentFamily::Unconstrained,
            output: None,
        };
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].instances, 1);
        assert!(r.rows[0].mean > 0.0 && r.rows[0].mean <= 1.0 + 1e-9);
        assert_eq!(r.table_csv().lines().count(), 3);
    }

    #[test]
    fn deterministic_csv() {
        let mut cfg = small_hotel();
        cfg.policies = vec![
            Policy::Myopic,
            Policy::Balance {
                value_mode: ValueMode::Fixed,
            },
        ];
        cfg.trials = 2;
        let dir = tempfile::tempdir().unwrap();
        cfg.output = Some(dir.path().to_path_buf());
        let a = run_experiment(&cfg).unwrap();
        let first = std::fs::read(dir.path().join("table.csv")).unwrap();
        let b = run_experiment(&cfg).unwrap();
        let second = std::fs::read(dir.path().join("table.csv")).unwrap();
        assert_eq!(first, second);
        assert_eq!(a.figure_csv(), b.figure_csv());
        assert!(a.table_csv().starts_with(SCHEMA_HEADER));
        for row in &a.rows {
            assert!(row.mean <= 1.0 + 1e-9);
            assert_eq!(row.flagged, 0);
        }
    }

    #[test]
    fn failures_are_recorded() {
        let mut cfg = small_hotel();
        cfg.policies = vec![Policy::FractionalBalance, Policy::Myopic];
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows[0].failures, 3);
        assert_eq!(r.rows[0].instances, 0);
        assert_eq!(r.rows[1].instances, 3);
        assert_eq!(r.failures.len(), 3);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small_hotel();
        cfg.trials = 0;
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small_hotel();
        cfg.loading_factors = vec![-1.0];
        assert!(run_experiment(&cfg).is_err());
        let mut cfg = small_hotel();
        cfg.policies = vec![Policy::Hybrid {
            base: BidPriceMode::Resolving,
            gamma: 1.0,
            resolve_every: 100,
        }];
        assert!(run_experiment(&cfg).is_err());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = ExperimentConfig::hotel(true);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let minimal: ExperimentConfig =
            serde_json::from_str(r#"{"source": {"kind": "synthetic_hotel"}, "trials": 2}"#).unwrap();
        assert_eq!(minimal.policies.len(), 10);
        assert_eq!(minimal.loading_factors, vec![1.4, 1.6, 1.8]);
    }
}
