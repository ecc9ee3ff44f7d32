//! Randomized rounding of segment borders onto the `1/k` grid and the
//! perturbed value functions built from it.
//!
//! With integer inventory `k`, the balance policy only ever evaluates the
//! value function at `N/k`. Borders are rounded up or down with one shared
//! uniform seed, so they keep their order and their pairwise spacing moves by
//! at most one grid step. [`verify_conditions`] checks the per-unit
//! dual-fitting conditions exactly over the enumerated seed support.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::valuefn::{PriceSet, ValueFunction};

/// `L * k` values this close to an integer are treated as exact multiples.
const GRID_SNAP: f64 = 1e-12;
/// Relative tolerance when checking the conditions, to absorb rounding in
/// cases where they hold with equality.
pub const CONDITION_RTOL: f64 = 1e-9;

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("inventory k must be at least 1".into()));
    }
    Ok(())
}

fn check_seed(w: f64) -> Result<()> {
    if (0.0..1.0).contains(&w) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "w_seed",
            value: w,
            domain: "[0, 1)",
        })
    }
}

/// Floor of `L * k` and its fractional part, with near-integers snapped.
fn split_scaled(border: f64, k: usize) -> (usize, f64) {
    let x = border * k as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= GRID_SNAP * x.max(1.0) {
        return (nearest as usize, 0.0);
    }
    let fl = x.floor();
    (fl as usize, x - fl)
}

/// Rounded borders in grid units (`L~(j) * k`), for seed `w_seed`.
pub fn round_borders(vf: &ValueFunction, k: usize, w_seed: f64) -> Result<Vec<usize>> {
    check_k(k)?;
    check_seed(w_seed)?;
    Ok(round_unchecked(vf, k, w_seed))
}

fn round_unchecked(vf: &ValueFunction, k: usize, w_seed: f64) -> Vec<usize> {
    vf.borders()
        .iter()
        .map(|&b| {
            let (fl, frac) = split_scaled(b, k);
            if w_seed < frac {
                fl + 1
            } else {
                fl
            }
        })
        .collect()
}

/// Grid values `Phi~(N/k)` for `N = 0..=k`, given rounded borders in grid
/// units. Each realized segment contributes its own exponential term with
/// the ideal booking limit in the denominator, so the sum does not telescope.
pub fn grid_values(vf: &ValueFunction, k: usize, borders: &[usize]) -> Vec<f64> {
    let m = vf.m();
    let prices = vf.prices();
    let kf = k as f64;
    let term = |j: usize, span: f64| -> f64 {
        if span == 0.0 {
            0.0
        } else {
            (prices.level(j) - prices.level(j - 1)) * span.exp_m1() / vf.alphas()[j - 1].exp_m1()
        }
    };

    let mut out = Vec::with_capacity(k + 1);
    let mut seg = 1;
    let mut completed = 0.0;
    for n in 0..=k {
        // advance to the segment with L~(seg-1) <= n < L~(seg); the last one is closed
        while seg < m && n >= borders[seg] {
            completed += term(seg, (borders[seg] - borders[seg - 1]) as f64 / kf);
            seg += 1;
        }
        let partial = term(seg, (n - borders[seg - 1]) as f64 / kf);
        out.push(completed + partial);
    }
    out
}

/// One realization of the randomized value function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbedValueFunction {
    pub k: usize,
    /// Rounded borders `L~(0..=m)` in grid units.
    pub tilde_borders: Vec<usize>,
    /// `Phi~(N/k)` for `N = 0..=k`.
    pub grid_values: Vec<f64>,
    pub seed_w: f64,
}

impl PerturbedValueFunction {
    pub fn new(vf: &ValueFunction, k: usize, w_seed: f64) -> Result<Self> {
        let tilde_borders = round_borders(vf, k, w_seed)?;
        let grid_values = grid_values(vf, k, &tilde_borders);
        Ok(PerturbedValueFunction {
            k,
            tilde_borders,
            grid_values,
            seed_w: w_seed,
        })
    }

    /// Rounded border `j` as a fraction of inventory.
    pub fn border(&self, j: usize) -> f64 {
        self.tilde_borders[j] as f64 / self.k as f64
    }

    /// `Phi~(L~(j))` for one-based price level `j`.
    pub fn target(&self, j: usize) -> f64 {
        self.grid_values[self.tilde_borders[j]]
    }

    pub fn at(&self, sold: usize) -> f64 {
        self.grid_values[sold]
    }
}

pub fn build_perturbed(vf: &ValueFunction, k: usize, w_seed: f64) -> Result<PerturbedValueFunction> {
    PerturbedValueFunction::new(vf, k, w_seed)
}

/// One outcome of a randomized procedure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub probability: f64,
    /// Borders `L~(0..=m)` in grid units.
    pub borders: Vec<usize>,
    /// Value function on the grid, `N = 0..=k`.
    pub grid_values: Vec<f64>,
    /// A seed that produces this configuration (left end of its interval).
    pub seed: f64,
}

impl Configuration {
    pub fn target(&self, j: usize) -> f64 {
        self.grid_values[self.borders[j]]
    }
}

/// A finite distribution over value-function configurations for one item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedProcedure {
    pub k: usize,
    pub prices: PriceSet,
    pub configurations: Vec<Configuration>,
}

impl RandomizedProcedure {
    /// Exact `E[L~(j)]` over the support, as fractions of inventory.
    pub fn expected_borders(&self) -> Vec<f64> {
        let m = self.prices.len();
        (0..=m)
            .map(|j| {
                self.configurations
                    .iter()
                    .map(|c| c.probability * c.borders[j] as f64 / self.k as f64)
                    .sum()
            })
            .collect()
    }

    /// Exact `E[Phi~(L~(j))]` for `j = 1..=m`.
    pub fn expected_targets(&self) -> Vec<f64> {
        (1..=self.prices.len())
            .map(|j| self.configurations.iter().map(|c| c.probability * c.target(j)).sum())
            .collect()
    }

    /// Draws a configuration index for a uniform `u` in `[0, 1)`.
    pub fn pick(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (d, c) in self.configurations.iter().enumerate() {
            acc += c.probability;
            if u < acc {
                return d;
            }
        }
        self.configurations.len() - 1
    }
}

/// The comonotone rounding procedure with its support enumerated exactly.
///
/// The outcome is a step function of the seed that only changes at the
/// distinct fractional parts of `L(j) * k`, so each interval between
/// consecutive breakpoints is one configuration weighted by its length.
pub fn rounded_procedure(vf: &ValueFunction, k: usize) -> Result<RandomizedProcedure> {
    check_k(k)?;
    let mut cuts: Vec<f64> = vf.borders().iter().map(|&b| split_scaled(b, k).1).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    cuts.dedup();

    let configurations = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let borders = round_unchecked(vf, k, w[0]);
            let grid_values = grid_values(vf, k, &borders);
            Configuration {
                probability: w[1] - w[0],
                borders,
                grid_values,
                seed: w[0],
            }
        })
        .collect();
    Ok(RandomizedProcedure {
        k,
        prices: vf.prices().clone(),
        configurations,
    })
}

/// The optimal procedure for a single unit: configuration `d` puts every
/// border from `d` on at 1, takes value `r(d) / sigma(1)` there, and is drawn
/// with probability `sigma(d)`.
pub fn single_unit_procedure(prices: &PriceSet) -> RandomizedProcedure {
    let sigmas = crate::valuefn::solve_sigmas(prices);
    let m = prices.len();
    let configurations = (1..=m)
        .map(|d| Configuration {
            probability: sigmas[d - 1],
            borders: (0..=m).map(|j| usize::from(j >= d)).collect(),
            grid_values: vec![0.0, prices.level(d) / sigmas[0]],
            seed: 0.0,
        })
        .collect();
    RandomizedProcedure {
        k: 1,
        prices: prices.clone(),
        configurations,
    }
}

/// Outcome of checking a procedure against a target ratio `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub holds: bool,
    /// Per-unit optimality condition, on every configuration.
    pub optimality_holds: bool,
    /// Feasibility in expectation over configurations.
    pub feasibility_holds: bool,
    /// `min (r(j)/c - lhs) / (r(j)/c)` over configurations, levels and units.
    pub optimality_slack: f64,
    /// `min (E[Phi~(L~(j))] - r(j)) / r(j)` over levels.
    pub feasibility_slack: f64,
    /// Largest `c` the optimality condition admits; `None` if the procedure
    /// is infeasible in expectation.
    pub certified_c: Option<f64>,
    pub expected_targets: Vec<f64>,
    /// Location of the tightest optimality constraint: (configuration, level, N).
    pub tightest: Option<(usize, usize, usize)>,
}

/// Checks both conditions exactly over the procedure's support.
pub fn verify_conditions(
    proc: &RandomizedProcedure,
    prices: &PriceSet,
    k: usize,
    c: f64,
) -> Result<ConditionReport> {
    check_k(k)?;
    if !(c > 0.0) {
        return Err(Error::Domain {
            what: "c",
            value: c,
            domain: "(0, inf)",
        });
    }
    if proc.k != k || proc.prices != *prices {
        return Err(Error::DimensionMismatch(
            "procedure was built for a different price set or inventory".into(),
        ));
    }
    let total: f64 = proc.configurations.iter().map(|c| c.probability).sum();
    if (total - 1.0).abs() > 1e-12 || proc.configurations.iter().any(|c| c.probability < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "configuration probabilities must be nonnegative and sum to 1 (got {total})"
        )));
    }
    let m = prices.len();
    let kf = k as f64;

    let mut opt_slack = f64::INFINITY;
    let mut certified = f64::INFINITY;
    let mut tightest = None;
    for (d, conf) in proc.configurations.iter().enumerate() {
        if conf.borders.len() != m + 1 || conf.grid_values.len() != k + 1 {
            return Err(Error::DimensionMismatch(format!(
                "configuration {d} has the wrong shape"
            )));
        }
        let g = &conf.grid_values;
        for j in 1..=m {
            let r = prices.level(j);
            let top = conf.borders[j];
            let target = g[top];
            for n in 0..top {
                let lhs = kf * (g[n + 1] - g[n]) + target - g[n];
                let slack = 1.0 - lhs * c / r;
                if slack < opt_slack {
                    opt_slack = slack;
                    tightest = Some((d, j, n));
                }
                if lhs > 0.0 {
                    certified = certified.min(r / lhs);
                }
            }
        }
    }

    let expected_targets = proc.expected_targets();
    let feas_slack = expected_targets
        .iter()
        .enumerate()
        .map(|(j, &e)| (e - prices.price(j)) / prices.price(j))
        .fold(f64::INFINITY, f64::min);

    let optimality_holds = opt_slack >= -CONDITION_RTOL;
    let feasibility_holds = feas_slack >= -CONDITION_RTOL;
    Ok(ConditionReport {
        holds: optimality_holds && feasibility_holds,
        optimality_holds,
        feasibility_holds,
        optimality_slack: opt_slack,
        feasibility_slack: feas_slack,
        certified_c: feasibility_holds.then_some(certified),
        expected_targets,
        tightest,
    })
}

/// Ratio certified for the rounding procedure with inventory `k`.
pub fn bound_rounded(f: f64, k: usize) -> f64 {
    let kf = k as f64;
    f / ((1.0 + kf) * (1.0 / kf).exp_m1())
}

/// Ratio certified by splitting every unit into its own single-unit item.
pub fn bound_single_unit(g: f64) -> f64 {
    g / 2.0
}

/// Improved ratio of the rounding procedure when there is one price.
pub fn bound_one_price(k: usize) -> f64 {
    let kf = k as f64;
    (1.0 - 1.0 / E) / ((1.0 + kf) * -(-1.0 / kf).exp_m1())
}

/// Best of the certified lower bounds that apply to `(prices, k)`.
pub fn best_certified_bound(vf: &ValueFunction, k: usize) -> f64 {
    let mut best = bound_rounded(vf.ratio_f(), k).max(bound_single_unit(vf.ratio_g()));
    if vf.m() == 1 {
        best = best.max(bound_one_price(k));
    }
    best
}
