use rand::Rng;

use super::{ArrivalSequence, DualStep, RunOptions, RunResult, Sale, Setup, Streams, ValueMode, POSITIVE};
use crate::error::{Error, Result};
use crate::perturb::{single_unit_procedure, PerturbedValueFunction};
use crate::valuefn::{PriceSet, ValueFunction};

/// Value-function tables of one item: bid price after `N` sales and the
/// target value at each price index.
#[derive(Debug, Clone)]
pub(crate) struct ItemValues {
    pub grid: Vec<f64>,
    pub targets: Vec<f64>,
}

impl ItemValues {
    pub fn pseudorevenue(&self, j: usize, sold: usize) -> f64 {
        self.targets[j] - self.grid[sold]
    }
}

/// Builds value functions once per distinct price set.
#[derive(Default)]
pub(crate) struct ValueCache {
    entries: Vec<(PriceSet, ValueFunction)>,
}

impl ValueCache {
    pub fn get(&mut self, prices: &PriceSet) -> Result<&ValueFunction> {
        let pos = match self.entries.iter().position(|(p, _)| p == prices) {
            Some(p) => p,
            None => {
                self.entries.push((prices.clone(), ValueFunction::new(prices.clone())?));
                self.entries.len() - 1
            }
        };
        Ok(&self.entries[pos].1)
    }
}

pub(crate) fn item_values(setup: &Setup, mode: ValueMode, streams: &Streams) -> Result<Vec<ItemValues>> {
    let mut cache = ValueCache::default();
    setup
        .items
        .iter()
        .enumerate()
        .map(|(i, it)| {
            let vf = cache.get(&it.prices)?;
            let k = it.inventory;
            let m = it.prices.len();
            Ok(match mode {
                ValueMode::Perturbed => {
                    let w: f64 = streams.item(i).random();
                    let p = PerturbedValueFunction::new(vf, k, w)?;
                    ItemValues {
                        targets: (1..=m).map(|j| p.target(j)).collect(),
                        grid: p.grid_values,
                    }
                }
                ValueMode::Fixed => ItemValues {
                    grid: (0..=k).map(|n| vf.eval_unchecked(n as f64 / k as f64)).collect(),
                    targets: it.prices.prices().to_vec(),
                },
                ValueMode::SingleUnit => {
                    if k != 1 {
                        return Err(Error::InvalidArgument(format!(
                            "single-unit value functions need inventory 1, item {i} has {k}; split units first"
                        )));
                    }
                    let proc = single_unit_procedure(&it.prices);
                    let u: f64 = streams.item(i).random();
                    let conf = &proc.configurations[proc.pick(u)];
                    ItemValues {
                        targets: (1..=m).map(|j| conf.target(j)).collect(),
                        grid: conf.grid_values.clone(),
                    }
                }
            })
        })
        .collect()
}

/// Argmax rule shared by the policies: larger value wins, then lower item
/// index, then higher price index. Values must exceed [`POSITIVE`].
pub(crate) fn prefer(v: f64, i: usize, j: usize, best: Option<(f64, usize, usize)>) -> bool {
    match best {
        None => v > POSITIVE,
        Some((bv, bi, bj)) => v > bv || (v == bv && (i < bi || (i == bi && j > bj))),
    }
}

/// The balance policy on single-offer or deterministic arrivals: offer the
/// (item, price) with the largest expected pseudorevenue, if positive.
pub fn run_balance(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunResult> {
    if !matches!(
        arrivals,
        ArrivalSequence::SingleOffer(_) | ArrivalSequence::Deterministic(_)
    ) {
        return Err(Error::InvalidArgument(format!(
            "balance needs single-offer or deterministic arrivals, got {}",
            arrivals.kind()
        )));
    }
    arrivals.validate(setup)?;
    let mut streams = Streams::new(seed);
    let values = item_values(setup, opts.value_mode, &streams)?;
    let mut sold = vec![0usize; setup.len()];
    let mut result = RunResult::new(setup, arrivals.len());
    let mut trace = opts.trace_duals.then(Vec::new);

    for t in 0..arrivals.len() {
        let u: f64 = streams.customers.random();
        // (value, item, price index, purchase probability)
        let mut best: Option<(f64, usize, usize, f64)> = None;
        let mut consider = |i: usize, j: usize, p: f64, sold: &[usize]| {
            if p <= 0.0 || sold[i] >= setup.items[i].inventory {
                return;
            }
            let v = p * values[i].pseudorevenue(j, sold[i]);
            if prefer(v, i, j, best.map(|b| (b.0, b.1, b.2))) {
                best = Some((v, i, j, p));
            }
        };
        match arrivals {
            ArrivalSequence::Deterministic(cs) => {
                for int in &cs[t] {
                    for j in (0..int.level).rev() {
                        consider(int.item, j, 1.0, &sold);
                    }
                }
            }
            ArrivalSequence::SingleOffer(cs) => {
                for row in &cs[t] {
                    for j in (0..row.probs.len()).rev() {
                        consider(row.item, j, row.probs[j], &sold);
                    }
                }
            }
            _ => unreachable!(),
        }
        let Some((_, i, j, p)) = best else { continue };
        result.offers += 1;
        assert!(sold[i] < setup.items[i].inventory, "offered a stocked-out item");
        if u < p {
            let z = values[i].pseudorevenue(j, sold[i]);
            let y_inc = values[i].grid[sold[i] + 1] - values[i].grid[sold[i]];
            let price = setup.items[i].prices.price(j);
            if let Some(c) = opts.check_ratio {
                let k = setup.items[i].inventory as f64;
                if k * y_inc + z > price / c * (1.0 + 1e-9) {
                    result.invariant_violations += 1;
                }
            }
            if let Some(tr) = trace.as_mut() {
                tr.push(DualStep {
                    t,
                    item: i,
                    y_increment: y_inc,
                    z,
                    revenue: price,
                });
            }
            sold[i] += 1;
            result.record(Sale {
                t,
                item: i,
                price_index: j,
                price,
                pseudorevenue: z,
                quantity: 1.0,
            });
        }
    }
    result.duals_trace = trace;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Interest, OfferRow};

    fn ps(v: &[f64]) -> PriceSet {
        PriceSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn single_item_single_customer() {
        let s = Setup::uniform(1, 1, ps(&[7.0])).unwrap();
        let a = ArrivalSequence::SingleOffer(vec![vec![OfferRow {
            item: 0,
            probs: vec![1.0],
        }]]);
        let r = run_balance(&s, &a, 3, &RunOptions::default()).unwrap();
        assert_eq!(r.revenue, 7.0);
        assert_eq!(r.final_inventory, vec![0.0]);
    }

    #[test]
    fn low_then_high_stream() {
        let s = Setup::uniform(1, 100, ps(&[150.0, 450.0])).unwrap();
        let mut cs = vec![vec![Interest { item: 0, level: 1 }]; 100];
        cs.extend(vec![vec![Interest { item: 0, level: 2 }]; 100]);
        let a = ArrivalSequence::Deterministic(cs);
        for seed in 0..20 {
            let r = run_balance(&s, &a, seed, &RunOptions::default()).unwrap();
            let low = r.sales.iter().filter(|x| x.price_index == 0).count();
            assert!((62..=64).contains(&low), "sold {low} low");
            assert_eq!(r.sales.len(), 100);
            assert!(r.sales.iter().all(|x| x.pseudorevenue > 0.0));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let s = Setup::uniform(3, 4, ps(&[1.0, 2.0, 5.0])).unwrap();
        let cs: Vec<Vec<OfferRow>> = (0..30)
            .map(|t| {
                (0..3)
                    .map(|i| OfferRow {
                        item: i,
                        probs: vec![0.9, 0.5, ((t * 7 + i) % 10) as f64 / 10.0],
                    })
                    .collect()
            })
            .collect();
        let a = ArrivalSequence::SingleOffer(cs);
        let opts = RunOptions {
            trace_duals: true,
            ..Default::default()
        };
        let x = run_balance(&s, &a, 11, &opts).unwrap();
        let y = run_balance(&s, &a, 11, &opts).unwrap();
        assert_eq!(x, y);
        for i in 0..3 {
            assert!(x.units_sold(i) <= 4.0);
        }
        let total: f64 = x.sales.iter().map(|s| s.price).sum();
        assert!((total - x.revenue).abs() < 1e-9);
    }

    #[test]
    fn single_unit_mode_requires_unit_items() {
        let s = Setup::uniform(1, 2, ps(&[1.0, 2.0])).unwrap();
        let a = ArrivalSequence::Deterministic(vec![]);
        let opts = RunOptions {
            value_mode: ValueMode::SingleUnit,
            ..Default::default()
        };
        assert!(run_balance(&s, &a, 0, &opts).is_err());
        let (split, _) = s.split_units();
        assert!(run_balance(&split, &a, 0, &opts).is_ok());
    }

    #[test]
    fn rejects_assortment_arrivals() {
        let s = Setup::uniform(1, 1, ps(&[1.0])).unwrap();
        let a = ArrivalSequence::Fractional(vec![]);
        assert!(run_balance(&s, &a, 0, &RunOptions::default()).is_err());
    }
}
