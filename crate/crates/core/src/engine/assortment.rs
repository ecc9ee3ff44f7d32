use rand::Rng;

use super::balance::{item_values, ItemValues};
use super::{ArrivalSequence, RunOptions, RunResult, Sale, Setup, Streams};
use crate::choice::{optimize_assortment, AssortmentFamily, MnlModel};
use crate::error::{Error, Result};

/// Per-product pseudorevenue given current sales; stocked-out items are
/// excluded.
pub(crate) fn pseudorevenues(model: &MnlModel, setup: &Setup, values: &[ItemValues], sold: &[usize]) -> Vec<f64> {
    model
        .products()
        .iter()
        .map(|p| {
            if sold[p.item] >= setup.items[p.item].inventory {
                f64::NEG_INFINITY
            } else {
                values[p.item].pseudorevenue(p.price, sold[p.item])
            }
        })
        .collect()
}

/// The balance policy with choice: each customer is shown the assortment
/// with the largest expected pseudorevenue and picks from it by the MNL law.
pub fn run_balance_assortment(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    family: &AssortmentFamily,
    seed: u64,
    opts: &RunOptions,
) -> Result<RunResult> {
    let ArrivalSequence::Assortment(a) = arrivals else {
        return Err(Error::InvalidArgument(format!(
            "assortment balance needs assortment arrivals, got {}",
            arrivals.kind()
        )));
    };
    arrivals.validate(setup)?;
    let mut streams = Streams::new(seed);
    let values = item_values(setup, opts.value_mode, &streams)?;
    let mut sold = vec![0usize; setup.len()];
    let mut result = RunResult::new(setup, a.customers.len());

    for (t, cust) in a.customers.iter().enumerate() {
        let u: f64 = streams.customers.random();
        let pr = pseudorevenues(&a.model, setup, &values, &sold);
        let best = optimize_assortment(&a.model, cust.customer_type, &pr, family)?;
        if best.products.is_empty() {
            continue;
        }
        result.offers += 1;
        if let Some(p) = a.model.choose_with_uniform(cust.customer_type, &best.products, u) {
            let prod = &a.model.products()[p];
            let i = prod.item;
            assert!(sold[i] < setup.items[i].inventory, "offered a stocked-out item");
            sold[i] += 1;
            result.record(Sale {
                t,
                item: i,
                price_index: prod.price,
                price: setup.items[i].prices.price(prod.price),
                pseudorevenue: pr[p],
                quantity: 1.0,
            });
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice::{CustomerType, Product};
    use crate::engine::{AssortmentArrivals, AssortmentCustomer, ValueMode};
    use crate::valuefn::PriceSet;

    fn one_product() -> (Setup, ArrivalSequence) {
        let model = MnlModel::new(
            vec![Product {
                name: "x".into(),
                item: 0,
                price: 0,
            }],
            vec![CustomerType {
                name: "t".into(),
                share: 1.0,
                no_purchase: 0.0,
                utilities: vec![Some(5.0)],
            }],
        )
        .unwrap();
        let setup = Setup::uniform(1, 3, PriceSet::single(10.0).unwrap()).unwrap();
        let customers = vec![
            AssortmentCustomer {
                customer_type: 0,
                days_before: 0.0
            };
            20
        ];
        (setup, ArrivalSequence::Assortment(AssortmentArrivals { model, customers }))
    }

    #[test]
    fn singleton_until_stockout() {
        let (s, a) = one_product();
        for mode in [ValueMode::Fixed, ValueMode::Perturbed] {
            let opts = RunOptions {
                value_mode: mode,
                ..Default::default()
            };
            let r = run_balance_assortment(&s, &a, &AssortmentFamily::Unconstrained, 2, &opts).unwrap();
            assert_eq!(r.units_sold(0), 3.0);
            assert!(r.offers >= 3);
            assert!((r.revenue - 30.0).abs() < 1e-12);
        }
    }
}
