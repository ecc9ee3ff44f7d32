use rand::Rng;

use super::balance::{prefer, ValueCache};
use super::{ArrivalSequence, RunResult, Sale, Setup, Streams};
use crate::error::{Error, Result};

/// The balance policy for budgeted bidders: a bid with probability `p` pays
/// `p * r` for certain and uses up `p` units. The unrounded value function
/// is evaluated at the continuous sold fraction. A bid larger than the
/// remaining capacity is filled partially and counted in `truncations`.
pub fn run_balance_fractional(setup: &Setup, arrivals: &ArrivalSequence, seed: u64) -> Result<RunResult> {
    let ArrivalSequence::Fractional(customers) = arrivals else {
        return Err(Error::InvalidArgument(format!(
            "fractional balance needs fractional arrivals, got {}",
            arrivals.kind()
        )));
    };
    arrivals.validate(setup)?;
    let mut streams = Streams::new(seed);
    let mut cache = ValueCache::default();
    let vfs = setup
        .items
        .iter()
        .map(|it| cache.get(&it.prices).cloned())
        .collect::<Result<Vec<_>>>()?;
    let mut used = vec![0.0f64; setup.len()];
    let mut result = RunResult::new(setup, customers.len());

    for (t, rows) in customers.iter().enumerate() {
        let _u: f64 = streams.customers.random();
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for row in rows {
            let i = row.item;
            let k = setup.items[i].inventory as f64;
            let w = (used[i] / k).min(1.0);
            let bid = vfs[i].eval_unchecked(w);
            for j in (0..row.probs.len()).rev() {
                let p = row.probs[j];
                if p <= 0.0 {
                    continue;
                }
                let v = p * (setup.items[i].prices.price(j) - bid);
                if prefer(v, i, j, best.map(|b| (b.0, b.1, b.2))) {
                    best = Some((v, i, j, p));
                }
            }
        }
        let Some((v, i, j, p)) = best else { continue };
        result.offers += 1;
        let k = setup.items[i].inventory as f64;
        let room = k - used[i];
        let q = if p > room {
            result.truncations += 1;
            room
        } else {
            p
        };
        if q <= 0.0 {
            continue;
        }
        used[i] += q;
        result.record(Sale {
            t,
            item: i,
            price_index: j,
            price: setup.items[i].prices.price(j),
            pseudorevenue: v / p,
            quantity: q,
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_balance, Interest, OfferRow, RunOptions, ValueMode};
    use crate::valuefn::PriceSet;

    #[test]
    fn capacity_binds_on_small_bids() {
        let s = Setup::uniform(1, 10, PriceSet::single(2.0).unwrap()).unwrap();
        let a = ArrivalSequence::Fractional(vec![
            vec![OfferRow {
                item: 0,
                probs: vec![0.25],
            }];
            10_000
        ]);
        let r = run_balance_fractional(&s, &a, 0).unwrap();
        assert!((r.revenue - 20.0).abs() < 1e-9);
        assert!(r.final_inventory[0].abs() < 1e-9);
    }

    #[test]
    fn zero_one_bids_match_fixed_balance() {
        let prices = PriceSet::new(vec![150.0, 450.0]).unwrap();
        let s = Setup::uniform(2, 20, prices).unwrap();
        let det: Vec<Vec<Interest>> = (0..80)
            .map(|t| {
                vec![
                    Interest {
                        item: 0,
                        level: 1 + (t / 30) % 2,
                    },
                    Interest {
                        item: 1,
                        level: 1 + (t % 2),
                    },
                ]
            })
            .collect();
        let det = ArrivalSequence::Deterministic(det);
        let frac = ArrivalSequence::Fractional((0..80).map(|t| det.offer_rows(&s, t)).collect());
        let a = run_balance_fractional(&s, &frac, 5).unwrap();
        let opts = RunOptions {
            value_mode: ValueMode::Fixed,
            ..Default::default()
        };
        let b = run_balance(&s, &det, 5, &opts).unwrap();
        assert!((a.revenue - b.revenue).abs() < 1e-9);
        assert_eq!(a.sales.len(), b.sales.len());
        assert_eq!(a.truncations, 0);
    }
}
