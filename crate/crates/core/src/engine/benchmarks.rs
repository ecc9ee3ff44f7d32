use std::f64::consts::E;

use rand::Rng;

use super::balance::prefer;
use super::{ArrivalSequence, RunResult, Sale, Setup, Streams};
use crate::choice::{optimize_assortment, AssortmentFamily};
use crate::error::{Error, Result};

/// Inventory-balancing discount `(e - e^w) / (e - 1)` for sold fraction `w`.
pub fn gnr_psi(w: f64) -> f64 {
    (E - w.exp()) / (E - 1.0)
}

/// How a benchmark scores selling item `i` at price index `j`, given the
/// item's sold fraction. `None` excludes the pair.
type Score<'a> = dyn Fn(&Setup, usize, usize, f64) -> Option<f64> + 'a;

fn run_scored(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    family: &AssortmentFamily,
    seed: u64,
    score: &Score<'_>,
) -> Result<RunResult> {
    arrivals.validate(setup)?;
    let mut streams = Streams::new(seed);
    let mut sold = vec![0usize; setup.len()];
    let mut result = RunResult::new(setup, arrivals.len());
    let frac = |i: usize, sold: &[usize]| sold[i] as f64 / setup.items[i].inventory as f64;

    match arrivals {
        ArrivalSequence::SingleOffer(_) | ArrivalSequence::Deterministic(_) => {
            for t in 0..arrivals.len() {
                let u: f64 = streams.customers.random();
                let mut best: Option<(f64, usize, usize, f64)> = None;
                let mut consider = |i: usize, j: usize, p: f64| {
                    if p <= 0.0 || sold[i] >= setup.items[i].inventory {
                        return;
                    }
                    if let Some(s) = score(setup, i, j, frac(i, &sold)) {
                        let v = p * s;
                        if prefer(v, i, j, best.map(|b| (b.0, b.1, b.2))) {
                            best = Some((v, i, j, p));
                        }
                    }
                };
                match arrivals {
                    ArrivalSequence::Deterministic(cs) => {
                        for int in &cs[t] {
                            for j in (0..int.level).rev() {
                                consider(int.item, j, 1.0);
                            }
                        }
                    }
                    ArrivalSequence::SingleOffer(cs) => {
                        for row in &cs[t] {
                            for j in (0..row.probs.len()).rev() {
                                consider(row.item, j, row.probs[j]);
                            }
                        }
                    }
                    _ => unreachable!(),
                }
                let Some((_, i, j, p)) = best else { continue };
                result.offers += 1;
                if u < p {
                    let price = setup.items[i].prices.price(j);
                    sold[i] += 1;
                    result.record(Sale {
                        t,
                        item: i,
                        price_index: j,
                        price,
                        pseudorevenue: 0.0,
                        quantity: 1.0,
                    });
                }
            }
        }
        ArrivalSequence::Assortment(a) => {
            let products = a.model.products();
            for (t, cust) in a.customers.iter().enumerate() {
                let u: f64 = streams.customers.random();
                let values: Vec<f64> = products
                    .iter()
                    .map(|p| {
                        if sold[p.item] >= setup.items[p.item].inventory {
                            return f64::NEG_INFINITY;
                        }
                        score(setup, p.item, p.price, frac(p.item, &sold)).unwrap_or(f64::NEG_INFINITY)
                    })
                    .collect();
                let best = optimize_assortment(&a.model, cust.customer_type, &values, family)?;
                if best.products.is_empty() {
                    continue;
                }
                result.offers += 1;
                if let Some(p) = a.model.choose_with_uniform(cust.customer_type, &best.products, u) {
                    let prod = &products[p];
                    sold[prod.item] += 1;
                    result.record(Sale {
                        t,
                        item: prod.item,
                        price_index: prod.price,
                        price: setup.items[prod.item].prices.price(prod.price),
                        pseudorevenue: 0.0,
                        quantity: 1.0,
                    });
                }
            }
        }
        ArrivalSequence::Fractional(_) => {
            return Err(Error::InvalidArgument(
                "benchmarks do not run on fractional arrivals".into(),
            ))
        }
    }
    Ok(result)
}

/// Maximizes immediate expected revenue over items in stock.
pub fn run_myopic(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    family: &AssortmentFamily,
    seed: u64,
) -> Result<RunResult> {
    run_scored(setup, arrivals, family, seed, &|s, i, j, _| {
        Some(s.items[i].prices.price(j))
    })
}

/// Maximizes expected revenue discounted by each item's sold fraction.
pub fn run_gnr(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    family: &AssortmentFamily,
    seed: u64,
) -> Result<RunResult> {
    run_scored(setup, arrivals, family, seed, &|s, i, j, w| {
        Some(s.items[i].prices.price(j) * gnr_psi(w))
    })
}

/// Offers items only at their top prices, choosing among them like
/// [`run_gnr`].
pub fn run_conservative(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    family: &AssortmentFamily,
    seed: u64,
) -> Result<RunResult> {
    run_scored(setup, arrivals, family, seed, &|s, i, j, w| {
        let ps = &s.items[i].prices;
        (j + 1 == ps.len()).then(|| ps.price(j) * gnr_psi(w))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_balance, Interest, OfferRow, RunOptions};
    use crate::valuefn::PriceSet;

    fn fam() -> AssortmentFamily {
        AssortmentFamily::Unconstrained
    }

    #[test]
    fn psi_endpoints() {
        assert!((gnr_psi(0.0) - 1.0).abs() < 1e-15);
        assert!(gnr_psi(1.0).abs() < 1e-15);
    }

    #[test]
    fn all_agree_on_fresh_single_price() {
        let s = Setup::uniform(2, 3, PriceSet::single(4.0).unwrap()).unwrap();
        let a = ArrivalSequence::SingleOffer(vec![vec![
            OfferRow {
                item: 0,
                probs: vec![0.5],
            },
            OfferRow {
                item: 1,
                probs: vec![0.7],
            },
        ]]);
        let b = run_balance(&s, &a, 9, &RunOptions::default()).unwrap();
        for r in [
            run_myopic(&s, &a, &fam(), 9).unwrap(),
            run_gnr(&s, &a, &fam(), 9).unwrap(),
            run_conservative(&s, &a, &fam(), 9).unwrap(),
        ] {
            assert_eq!(r.revenue, b.revenue);
            assert_eq!(r.sales.len(), b.sales.len());
        }
    }

    #[test]
    fn low_then_high() {
        let s = Setup::uniform(1, 100, PriceSet::new(vec![150.0, 450.0]).unwrap()).unwrap();
        let mut cs = vec![vec![Interest { item: 0, level: 1 }]; 100];
        cs.extend(vec![vec![Interest { item: 0, level: 2 }]; 100]);
        let a = ArrivalSequence::Deterministic(cs);
        let gnr = run_gnr(&s, &a, &fam(), 1).unwrap();
        assert_eq!(gnr.revenue, 15_000.0);
        let cons = run_conservative(&s, &a, &fam(), 1).unwrap();
        assert_eq!(cons.revenue, 45_000.0);
        let only_low = ArrivalSequence::Deterministic(vec![vec![Interest { item: 0, level: 1 }]; 50]);
        assert_eq!(run_conservative(&s, &only_low, &fam(), 1).unwrap().revenue, 0.0);
    }
}
