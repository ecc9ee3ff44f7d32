//! Multinomial-logit customer choice and single-shot assortment optimization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest product count handled by exhaustive enumeration.
pub const MAX_ENUMERATED_PRODUCTS: usize = 20;

const HOTEL_MODEL: &str = include_str!("../data/hotel_mnl.json");

/// A (item, price level) pair that can be placed in an assortment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Product {
    pub name: String,
    pub item: usize,
    /// Zero-based index into the item's price set.
    pub price: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerType {
    pub name: String,
    pub share: f64,
    pub no_purchase: f64,
    /// Mean utility per product; `None` means the product is never chosen.
    pub utilities: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MnlSpec", into = "MnlSpec")]
pub struct MnlModel {
    products: Vec<Product>,
    types: Vec<CustomerType>,
    /// `exp(u)` per type and product, 0 for unavailable pairs.
    weights: Vec<Vec<f64>>,
    no_purchase_weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MnlSpec {
    products: Vec<Product>,
    types: Vec<CustomerType>,
}

impl TryFrom<MnlSpec> for MnlModel {
    type Error = Error;

    fn try_from(s: MnlSpec) -> Result<Self> {
        MnlModel::new(s.products, s.types)
    }
}

impl From<MnlModel> for MnlSpec {
    fn from(m: MnlModel) -> Self {
        MnlSpec {
            products: m.products,
            types: m.types,
        }
    }
}

impl MnlModel {
    pub fn new(products: Vec<Product>, types: Vec<CustomerType>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::InvalidArgument("choice model needs at least one type".into()));
        }
        let total: f64 = types.iter().map(|t| t.share).sum();
        if types.iter().any(|t| !(t.share >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "type shares must be nonnegative and sum to 1 (got {total})"
            )));
        }
        for t in &types {
            if t.utilities.len() != products.len() {
                return Err(Error::DimensionMismatch(format!(
                    "type {} has {} utilities for {} products",
                    t.name,
                    t.utilities.len(),
                    products.len()
                )));
            }
            if !t.no_purchase.is_finite() || t.utilities.iter().flatten().any(|u| !u.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "type {} has a non-finite utility",
                    t.name
                )));
            }
        }
        let weights = types
            .iter()
            .map(|t| t.utilities.iter().map(|u| u.map_or(0.0, f64::exp)).collect())
            .collect();
        let no_purchase_weights = types.iter().map(|t| t.no_purchase.exp()).collect();
        Ok(MnlModel {
            products,
            types,
            weights,
            no_purchase_weights,
        })
    }

    /// The bundled eight-type hotel model.
    pub fn hotel() -> Self {
        serde_json::from_str(HOTEL_MODEL).expect("bundled model is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn types(&self) -> &[CustomerType] {
        &self.types
    }

    pub fn num_products(&self) -> usize {
        self.products.len()
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn shares(&self) -> Vec<f64> {
        self.types.iter().map(|t| t.share).collect()
    }

    /// Product index for `(item, price)`, if the model has one.
    pub fn product_of(&self, item: usize, price: usize) -> Option<usize> {
        self.products.iter().position(|p| p.item == item && p.price == price)
    }

    /// Copy with every type's no-purchase utility shifted by `delta`.
    pub fn with_no_purchase_shift(&self, delta: f64) -> Result<Self> {
        let types = self
            .types
            .iter()
            .map(|t| CustomerType {
                no_purchase: t.no_purchase + delta,
                ..t.clone()
            })
            .collect();
        MnlModel::new(self.products.clone(), types)
    }

    fn check_type(&self, a: usize) -> Result<()> {
        if a < self.types.len() {
            Ok(())
        } else {
            Err(Error::UnknownType(a))
        }
    }

    pub(crate) fn weight(&self, a: usize, product: usize) -> f64 {
        self.weights[a][product]
    }

    pub(crate) fn no_purchase_weight(&self, a: usize) -> f64 {
        self.no_purchase_weights[a]
    }

    /// Choice probabilities of the products in `assortment` (same order) and
    /// of walking away.
    pub fn choice_probs(&self, a: usize, assortment: &[usize]) -> Result<ChoiceProbs> {
        self.check_type(a)?;
        if let Some(&bad) = assortment.iter().find(|&&p| p >= self.products.len()) {
            return Err(Error::InvalidArgument(format!("unknown product {bad}")));
        }
        Ok(self.choice_probs_unchecked(a, assortment))
    }

    pub(crate) fn choice_probs_unchecked(&self, a: usize, assortment: &[usize]) -> ChoiceProbs {
        let w = &self.weights[a];
        let denom = self.no_purchase_weights[a] + assortment.iter().map(|&p| w[p]).sum::<f64>();
        ChoiceProbs {
            products: assortment.iter().map(|&p| w[p] / denom).collect(),
            no_purchase: self.no_purchase_weights[a] / denom,
        }
    }

    /// `sum_{p in S} P(p | S) * values[p]`.
    pub fn expected_value(&self, a: usize, assortment: &[usize], values: &[f64]) -> f64 {
        let w = &self.weights[a];
        let mut num = 0.0;
        let mut denom = self.no_purchase_weights[a];
        for &p in assortment {
            num += w[p] * values[p];
            denom += w[p];
        }
        num / denom
    }

    /// Maps a uniform draw in `[0, 1)` to a choice from `assortment`;
    /// `None` is the no-purchase outcome.
    pub fn choose_with_uniform(&self, a: usize, assortment: &[usize], u: f64) -> Option<usize> {
        let w = &self.weights[a];
        let denom = self.no_purchase_weights[a] + assortment.iter().map(|&p| w[p]).sum::<f64>();
        let mut acc = 0.0;
        for &p in assortment {
            acc += w[p] / denom;
            if u < acc {
                return Some(p);
            }
        }
        None
    }

    pub fn sample_choice<R: Rng + ?Sized>(
        &self,
        a: usize,
        assortment: &[usize],
        rng: &mut R,
    ) -> Result<Option<usize>> {
        self.check_type(a)?;
        let u: f64 = rng.random();
        Ok(self.choose_with_uniform(a, assortment, u))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceProbs {
    pub products: Vec<f64>,
    pub no_purchase: f64,
}

/// Which assortments may be offered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AssortmentFamily {
    /// Any subset of the available products.
    #[default]
    Unconstrained,
    /// At most one price level per item.
    OnePricePerItem,
    /// Only the listed assortments (plus the empty one).
    Explicit(Vec<Vec<usize>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assortment {
    /// Product indices, ascending.
    pub products: Vec<usize>,
    pub objective: f64,
}

impl Assortment {
    pub fn empty() -> Self {
        Assortment {
            products: Vec::new(),
            objective: 0.0,
        }
    }
}

/// Maximizes `sum_{p in S} P(p | S) * values[p]` over the family.
///
/// Products whose value is not finite (use `f64::NEG_INFINITY`) are treated
/// as unavailable. Products with nonpositive value never enter an optimal
/// MNL assortment, and neither do products the type never picks.
pub fn optimize_assortment(
    model: &MnlModel,
    a: usize,
    values: &[f64],
    family: &AssortmentFamily,
) -> Result<Assortment> {
    model.check_type(a)?;
    if values.len() != model.num_products() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} products",
            values.len(),
            model.num_products()
        )));
    }
    let useful: Vec<usize> = (0..values.len())
        .filter(|&p| values[p].is_finite() && values[p] > 0.0 && model.weight(a, p) > 0.0)
        .collect();
    match family {
        AssortmentFamily::Unconstrained => Ok(revenue_ordered(model, a, values, useful)),
        AssortmentFamily::OnePricePerItem => {
            if model.num_products() > MAX_ENUMERATED_PRODUCTS {
                return Err(Error::Unsupported(format!(
                    "one-price-per-item enumeration is limited to {MAX_ENUMERATED_PRODUCTS} products"
                )));
            }
            Ok(one_price_per_item(model, a, values, &useful))
        }
        AssortmentFamily::Explicit(list) => {
            if model.num_products() > MAX_ENUMERATED_PRODUCTS {
                return Err(Error::Unsupported(format!(
                    "explicit families are limited to {MAX_ENUMERATED_PRODUCTS} products"
                )));
            }
            let mut best = Assortment::empty();
            for s in list {
                if s.iter().any(|&p| p >= values.len() || !values[p].is_finite()) {
                    continue;
                }
                let obj = model.expected_value(a, s, values);
                if obj > best.objective {
                    let mut products = s.clone();
                    products.sort_unstable();
                    best = Assortment {
                        products,
                        objective: obj,
                    };
                }
            }
            Ok(best)
        }
    }
}

fn revenue_ordered(model: &MnlModel, a: usize, values: &[f64], mut useful: Vec<usize>) -> Assortment {
    useful.sort_by(|&x, &y| values[y].partial_cmp(&values[x]).expect("finite").then(x.cmp(&y)));
    let mut num = 0.0;
    let mut denom = model.no_purchase_weight(a);
    let mut best = Assortment::empty();
    let mut best_len = 0;
    for (n, &p) in useful.iter().enumerate() {
        let w = model.weight(a, p);
        num += w * values[p];
        denom += w;
        let obj = num / denom;
        if obj > best.objective {
            best.objective = obj;
            best_len = n + 1;
        }
    }
    best.products = useful[..best_len].to_vec();
    best.products.sort_unstable();
    best
}

fn one_price_per_item(model: &MnlModel, a: usize, values: &[f64], useful: &[usize]) -> Assortment {
    let mut items: Vec<usize> = useful.iter().map(|&p| model.products()[p].item).collect();
    items.sort_unstable();
    items.dedup();
    let options: Vec<Vec<usize>> = items
        .iter()
        .map(|&i| useful.iter().copied().filter(|&p| model.products()[p].item == i).collect())
        .collect();

    let mut best = Assortment::empty();
    let mut current = Vec::new();
    fn walk(
        depth: usize,
        options: &[Vec<usize>],
        current: &mut Vec<usize>,
        model: &MnlModel,
        a: usize,
        values: &[f64],
        best: &mut Assortment,
    ) {
        if depth == options.len() {
            let obj = model.expected_value(a, current, values);
            if obj > best.objective {
                let mut products = current.clone();
                products.sort_unstable();
                *best = Assortment {
                    products,
                    objective: obj,
                };
            }
            return;
        }
        walk(depth + 1, options, current, model, a, values, best);
        for &p in &options[depth] {
            current.push(p);
            walk(depth + 1, options, current, model, a, values, best);
            current.pop();
        }
    }
    walk(0, &options, &mut current, model, a, values, &mut best);
    best
}

/// Exhaustive search over every subset of the available products.
pub fn brute_force_assortment(model: &MnlModel, a: usize, values: &[f64]) -> Result<Assortment> {
    model.check_type(a)?;
    let n = model.num_products();
    if n > MAX_ENUMERATED_PRODUCTS {
        return Err(Error::Unsupported("too many products to enumerate".into()));
    }
    let mut best = Assortment::empty();
    for mask in 1u32..(1u32 << n) {
        let s: Vec<usize> = (0..n).filter(|&p| mask & (1 << p) != 0).collect();
        if s.iter().any(|&p| !values[p].is_finite()) {
            continue;
        }
        let obj = model.expected_value(a, &s, values);
        if obj > best.objective {
            best = Assortment {
                products: s,
                objective: obj,
            };
        }
    }
    Ok(best)
}
