use serde::{Deserialize, Serialize};

use crate::choice::MnlModel;
use crate::error::{Error, Result};
use crate::valuefn::PriceSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub inventory: usize,
    pub prices: PriceSet,
}

/// Items with their starting inventories and price sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Item>", into = "Vec<Item>")]
pub struct Setup {
    pub items: Vec<Item>,
}

impl TryFrom<Vec<Item>> for Setup {
    type Error = Error;

    fn try_from(items: Vec<Item>) -> Result<Self> {
        Setup::new(items)
    }
}

impl From<Setup> for Vec<Item> {
    fn from(s: Setup) -> Self {
        s.items
    }
}

impl Setup {
    pub fn new(items: Vec<Item>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("setup needs at least one item".into()));
        }
        if let Some(i) = items.iter().position(|it| it.inventory == 0) {
            return Err(Error::InvalidArgument(format!("item {i} has zero inventory")));
        }
        Ok(Setup { items })
    }

    /// `n` copies of one item.
    pub fn uniform(n: usize, inventory: usize, prices: PriceSet) -> Result<Self> {
        Setup::new(
            (0..n)
                .map(|_| Item {
                    inventory,
                    prices: prices.clone(),
                })
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Replaces every item by single-unit copies. Returns the new setup and,
    /// per new item, the item it came from.
    pub fn split_units(&self) -> (Setup, Vec<usize>) {
        let mut items = Vec::new();
        let mut origin = Vec::new();
        for (i, it) in self.items.iter().enumerate() {
            for _ in 0..it.inventory {
                items.push(Item {
                    inventory: 1,
                    prices: it.prices.clone(),
                });
                origin.push(i);
            }
        }
        (Setup { items }, origin)
    }
}

/// Purchase probabilities of one customer for one item, per price index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfferRow {
    pub item: usize,
    pub probs: Vec<f64>,
}

/// A deterministic customer's interest in one item: buys at any price up to
/// the one-based `level`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interest {
    pub item: usize,
    pub level: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssortmentCustomer {
    pub customer_type: usize,
    /// Days between this arrival and the service date.
    #[serde(default)]
    pub days_before: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssortmentArrivals {
    pub model: MnlModel,
    pub customers: Vec<AssortmentCustomer>,
}

impl AssortmentArrivals {
    pub fn type_counts(&self, from: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.model.num_types()];
        for cust in &self.customers[from.min(self.customers.len())..] {
            c[cust.customer_type] += 1.0;
        }
        c
    }
}

/// The customer stream. Items a customer is not listed for have purchase
/// probability zero at every price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "customers", rename_all = "snake_case")]
pub enum ArrivalSequence {
    SingleOffer(Vec<Vec<OfferRow>>),
    Deterministic(Vec<Vec<Interest>>),
    /// Bids pay `p * r` for sure and consume `p` units.
    Fractional(Vec<Vec<OfferRow>>),
    Assortment(AssortmentArrivals),
}

impl ArrivalSequence {
    pub fn len(&self) -> usize {
        match self {
            ArrivalSequence::SingleOffer(v) | ArrivalSequence::Fractional(v) => v.len(),
            ArrivalSequence::Deterministic(v) => v.len(),
            ArrivalSequence::Assortment(a) => a.customers.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ArrivalSequence::SingleOffer(_) => "single_offer",
            ArrivalSequence::Deterministic(_) => "deterministic",
            ArrivalSequence::Fractional(_) => "fractional",
            ArrivalSequence::Assortment(_) => "assortment",
        }
    }

    /// Checks that every reference fits the setup.
    pub fn validate(&self, setup: &Setup) -> Result<()> {
        let n = setup.len();
        let rows = |v: &[Vec<OfferRow>]| -> Result<()> {
            for (t, cust) in v.iter().enumerate() {
                for row in cust {
                    if row.item >= n {
                        return Err(Error::DimensionMismatch(format!(
                            "customer {t} references item {} of {n}",
                            row.item
                        )));
                    }
                    let m = setup.items[row.item].prices.len();
                    if row.probs.len() != m {
                        return Err(Error::DimensionMismatch(format!(
                            "customer {t} gives {} probabilities for item {} with {m} prices",
                            row.probs.len(),
                            row.item
                        )));
                    }
                    if row.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
                        return Err(Error::InvalidArgument(format!(
                            "customer {t} has a probability outside [0, 1]"
                        )));
                    }
                }
            }
            Ok(())
        };
        match self {
            ArrivalSequence::SingleOffer(v) | ArrivalSequence::Fractional(v) => rows(v),
            ArrivalSequence::Deterministic(v) => {
                for (t, cust) in v.iter().enumerate() {
                    for int in cust {
                        if int.item >= n || int.level > setup.items[int.item].prices.len() {
                            return Err(Error::DimensionMismatch(format!(
                                "customer {t} has interest {int:?} outside the setup"
                            )));
                        }
                    }
                }
                Ok(())
            }
            ArrivalSequence::Assortment(a) => {
                for (p, prod) in a.model.products().iter().enumerate() {
                    if prod.item >= n || prod.price >= setup.items[prod.item].prices.len() {
                        return Err(Error::DimensionMismatch(format!(
                            "product {p} ({}) does not exist in the setup",
                            prod.name
                        )));
                    }
                }
                if let Some(c) = a.customers.iter().find(|c| c.customer_type >= a.model.num_types()) {
                    return Err(Error::UnknownType(c.customer_type));
                }
                Ok(())
            }
        }
    }

    /// Probability rows of customer `t` (deterministic interests expanded).
    pub fn offer_rows(&self, setup: &Setup, t: usize) -> Vec<OfferRow> {
        match self {
            ArrivalSequence::SingleOffer(v) | ArrivalSequence::Fractional(v) => v[t].clone(),
            ArrivalSequence::Deterministic(v) => v[t]
                .iter()
                .map(|int| OfferRow {
                    item: int.item,
                    probs: (1..=setup.items[int.item].prices.len())
                        .map(|j| if j <= int.level { 1.0 } else { 0.0 })
                        .collect(),
                })
                .collect(),
            ArrivalSequence::Assortment(_) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(v: &[f64]) -> PriceSet {
        PriceSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn setup_validation() {
        assert!(Setup::new(vec![]).is_err());
        assert!(Setup::new(vec![Item {
            inventory: 0,
            prices: ps(&[1.0])
        }])
        .is_err());
    }

    #[test]
    fn split_units_keeps_origin() {
        let s = Setup::new(vec![
            Item {
                inventory: 2,
                prices: ps(&[1.0]),
            },
            Item {
                inventory: 1,
                prices: ps(&[2.0, 3.0]),
            },
        ])
        .unwrap();
        let (split, origin) = s.split_units();
        assert_eq!(split.len(), 3);
        assert_eq!(origin, vec![0, 0, 1]);
    }

    #[test]
    fn arrival_validation() {
        let s = Setup::uniform(2, 1, ps(&[1.0, 2.0])).unwrap();
        let ok = ArrivalSequence::Deterministic(vec![vec![Interest { item: 1, level: 2 }]]);
        assert!(ok.validate(&s).is_ok());
        let bad = ArrivalSequence::Deterministic(vec![vec![Interest { item: 2, level: 1 }]]);
        assert!(bad.validate(&s).is_err());
        let bad = ArrivalSequence::SingleOffer(vec![vec![OfferRow {
            item: 0,
            probs: vec![0.5],
        }]]);
        assert!(bad.validate(&s).is_err());
        let rows = ok.offer_rows(&s, 0);
        assert_eq!(rows[0].probs, vec![1.0, 1.0]);
    }

    #[test]
    fn json_round_trip() {
        let s = Setup::uniform(1, 3, ps(&[150.0, 450.0])).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Setup>(&text).unwrap(), s);
        let a = ArrivalSequence::Deterministic(vec![vec![Interest { item: 0, level: 1 }]]);
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<ArrivalSequence>(&text).unwrap(), a);
    }
}
