//! Randomized hard instances: `n` identical items, customers arriving in
//! groups with nested interest sets over a random item order, and later
//! groups paying higher prices. No online policy can earn more than a
//! fraction `F` of the hindsight optimum on them as `n` grows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{ArrivalSequence, Interest, Setup};
use crate::error::{Error, Result};
use crate::valuefn::{PriceSet, ValueFunction};

/// Phase sizes: `tails[j] = beta[j] + ... + beta[m-1]` with `tails[0] = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phases {
    pub betas: Vec<f64>,
    pub tails: Vec<f64>,
}

impl Phases {
    /// Largest deviation from `tails[j] r(j) exp(-alpha(j))` being constant.
    pub fn residual(&self, vf: &ValueFunction) -> f64 {
        let p = vf.prices();
        let v: Vec<f64> = (0..p.len())
            .map(|j| self.tails[j] * p.price(j) * (-vf.alphas()[j]).exp())
            .collect();
        v.iter().map(|x| (x - v[0]).abs()).fold(0.0, f64::max)
    }
}

/// Solves for the phase fractions by the forward recursion
/// `B(j) = B(j-1) r(j-1) e^{-alpha(j-1)} / (r(j) e^{-alpha(j)})`.
pub fn solve_betas(vf: &ValueFunction) -> Phases {
    let p = vf.prices();
    let a = vf.alphas();
    let m = p.len();
    let mut tails = vec![1.0; m];
    for j in 1..m {
        tails[j] = tails[j - 1] * (p.price(j - 1) * (-a[j - 1]).exp()) / (p.price(j) * (-a[j]).exp());
    }
    let betas = (0..m)
        .map(|j| tails[j] - if j + 1 < m { tails[j + 1] } else { 0.0 })
        .collect();
    Phases { betas, tails }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticBounds {
    /// Hindsight optimum with unrounded phases.
    pub opt: f64,
    /// Upper bound on any online policy's expected revenue.
    pub online_ub: f64,
    pub ratio: f64,
}

pub fn analytic_bounds(vf: &ValueFunction, n: usize, k: usize) -> AnalyticBounds {
    let ph = solve_betas(vf);
    let p = vf.prices();
    let nk = (n * k) as f64;
    let opt = nk * (0..p.len()).map(|j| p.price(j) * ph.betas[j]).sum::<f64>();
    let online_ub = nk
        * (0..p.len())
            .map(|j| p.price(j) * ph.tails[j] * -(-vf.alphas()[j]).exp_m1())
            .sum::<f64>();
    AnalyticBounds {
        opt,
        online_ub,
        ratio: online_ub / opt,
    }
}

/// One draw of the hard instance.
#[derive(Debug, Clone, PartialEq)]
pub struct AdversarialInstance {
    pub prices: PriceSet,
    pub n: usize,
    pub k: usize,
    pub phases: Phases,
    /// Groups per phase after rounding.
    pub phase_groups: Vec<usize>,
    /// Item order; group `g` wants items `permutation[g..]`.
    pub permutation: Vec<usize>,
    pub seed: u64,
    pub setup: Setup,
    pub arrivals: ArrivalSequence,
}

impl AdversarialInstance {
    /// Hindsight optimum of this draw: every customer is served at their
    /// phase's price.
    pub fn opt(&self) -> f64 {
        self.phase_groups
            .iter()
            .enumerate()
            .map(|(j, &g)| self.prices.price(j) * (g * self.k) as f64)
            .sum()
    }
}

/// Group counts per phase: cumulative shares times `n`, rounded half to even.
pub fn phase_groups(phases: &Phases, n: usize) -> Result<Vec<usize>> {
    let m = phases.betas.len();
    let mut bounds = vec![0usize];
    let mut cum = 0.0;
    for j in 0..m {
        cum += phases.betas[j];
        let b = if j + 1 == m {
            n
        } else {
            (cum * n as f64).round_ties_even() as usize
        };
        bounds.push(b.min(n));
    }
    let groups: Vec<usize> = bounds.windows(2).map(|w| w[1].saturating_sub(w[0])).collect();
    if let Some(j) = groups.iter().position(|&g| g == 0) {
        return Err(Error::InvalidArgument(format!(
            "n = {n} leaves phase {} without groups; increase n",
            j + 1
        )));
    }
    Ok(groups)
}

pub fn build_instance(prices: &PriceSet, n: usize, k: usize, seed: u64) -> Result<AdversarialInstance> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidArgument("n and k must be at least 1".into()));
    }
    let vf = ValueFunction::new(prices.clone())?;
    let phases = solve_betas(&vf);
    let groups = phase_groups(&phases, n)?;

    let mut permutation: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    permutation.shuffle(&mut rng);

    let mut customers = Vec::with_capacity(n * k);
    let mut g = 0;
    for (j, &count) in groups.iter().enumerate() {
        for _ in 0..count {
            let interest: Vec<Interest> = permutation[g..]
                .iter()
                .map(|&item| Interest { item, level: j + 1 })
                .collect();
            for _ in 0..k {
                customers.push(interest.clone());
            }
            g += 1;
        }
    }
    Ok(AdversarialInstance {
        prices: prices.clone(),
        n,
        k,
        phases,
        phase_groups: groups,
        permutation,
        seed,
        setup: Setup::uniform(n, k, prices.clone())?,
        arrivals: ArrivalSequence::Deterministic(customers),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::solve_primal;

    fn vf(p: &[f64]) -> ValueFunction {
        ValueFunction::new(PriceSet::new(p.to_vec()).unwrap()).unwrap()
    }

    #[test]
    fn single_price_has_one_phase() {
        let ph = solve_betas(&vf(&[2.0]));
        assert_eq!(ph.betas, vec![1.0]);
        let b = analytic_bounds(&vf(&[2.0]), 10, 3);
        assert!((b.ratio - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn two_price_phases() {
        let v = vf(&[1.0, 3.0]);
        let ph = solve_betas(&v);
        assert!((ph.tails[1] - 0.258_170_254_294_318_3).abs() < 1e-12);
        assert!((ph.betas[0] - (1.0 - 0.258_170_254_294_318_3)).abs() < 1e-12);
        assert!(ph.residual(&v) < 1e-12);
        let b = analytic_bounds(&v, 100, 1);
        assert!((b.ratio - v.ratio_f()).abs() < 1e-10);
    }

    #[test]
    fn nested_interest_sets() {
        let inst = build_instance(&PriceSet::new(vec![1.0, 3.0]).unwrap(), 12, 2, 4).unwrap();
        let ArrivalSequence::Deterministic(cs) = &inst.arrivals else { panic!() };
        assert_eq!(cs.len(), 24);
        for g in 0..12 {
            assert_eq!(cs[2 * g].len(), 12 - g);
            assert_eq!(cs[2 * g], cs[2 * g + 1]);
        }
        assert_eq!(inst.phase_groups.iter().sum::<usize>(), 12);
    }

    #[test]
    fn optimum_matches_lp() {
        let prices = PriceSet::new(vec![1.0, 3.0]).unwrap();
        for seed in 0..5 {
            let inst = build_instance(&prices, 10, 2, seed).unwrap();
            let sol = solve_primal(&inst.setup, &inst.arrivals).unwrap();
            assert!((sol.objective - inst.opt()).abs() < 1e-8);
        }
    }

    #[test]
    fn classic_gadget() {
        let inst = build_instance(&PriceSet::single(1.0).unwrap(), 2, 1, 0).unwrap();
        let ArrivalSequence::Deterministic(cs) = &inst.arrivals else { panic!() };
        assert_eq!(cs[0].len(), 2);
        assert_eq!(cs[1].len(), 1);
    }

    #[test]
    fn too_few_groups() {
        let prices = PriceSet::new(vec![1.0, 1.01, 100.0]).unwrap();
        assert!(build_instance(&prices, 2, 1, 0).is_err());
    }
}
