use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::assortment::pseudorevenues;
use super::balance::item_values;
use super::{ArrivalSequence, AssortmentArrivals, RunResult, Sale, Setup, Streams, ValueMode};
use crate::choice::{optimize_assortment, AssortmentFamily};
use crate::error::{Error, Result};
use crate::lp::{bid_prices, solve_choice_lp_with_inventory};

/// Below this booked fraction the seen count is too small to scale up, and
/// the remaining total falls back to the prior mean.
const MIN_BOOKED_FRACTION: f64 = 0.05;

/// How the bid-price policies forecast the customers still to come.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BidPriceMode {
    /// Mean daily arrivals split by aggregate shares; solved once.
    OneShot,
    /// Remaining total scaled from arrivals so far; aggregate shares.
    Resolving,
    /// As resolving, with shares taken from the types seen so far.
    Learning,
    /// The true remaining count of every type.
    Clairvoyant,
}

impl BidPriceMode {
    pub fn label(&self) -> &'static str {
        match self {
            BidPriceMode::OneShot => "lp_one_shot",
            BidPriceMode::Resolving => "lp_resolving",
            BidPriceMode::Learning => "lp_learning",
            BidPriceMode::Clairvoyant => "lp_clairvoyant",
        }
    }

    pub fn hybrid_label(&self) -> &'static str {
        match self {
            BidPriceMode::OneShot => "one_shot",
            BidPriceMode::Resolving => "resolve",
            BidPriceMode::Learning => "learn",
            BidPriceMode::Clairvoyant => "clairvoyant",
        }
    }
}

/// Cumulative share of a day's customers that have arrived by a given
/// number of days before the service date; piecewise linear between knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastCurve {
    /// `(days_before, booked_fraction)`, any order.
    pub knots: Vec<(f64, f64)>,
}

impl Default for ForecastCurve {
    fn default() -> Self {
        ForecastCurve {
            knots: vec![(100.0, 0.0), (25.0, 0.5), (0.0, 1.0)],
        }
    }
}

impl ForecastCurve {
    pub fn new(mut knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("booking curve needs at least one knot".into()));
        }
        knots.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
        for w in knots.windows(2) {
            if w[1].1 < w[0].1 {
                return Err(Error::InvalidArgument("booking curve must be nondecreasing".into()));
            }
        }
        if knots.iter().any(|k| !(0.0..=1.0).contains(&k.1)) {
            return Err(Error::InvalidArgument("booked fractions must lie in [0, 1]".into()));
        }
        Ok(ForecastCurve { knots })
    }

    /// Share of arrivals that happen at least `days_before` days out.
    pub fn booked(&self, days_before: f64) -> f64 {
        let mut k = self.knots.clone();
        k.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
        if days_before >= k[0].0 {
            return k[0].1;
        }
        for w in k.windows(2) {
            let (d0, f0) = w[0];
            let (d1, f1) = w[1];
            if days_before >= d1 {
                let s = (d0 - days_before) / (d0 - d1);
                return f0 + s * (f1 - f0);
            }
        }
        k[k.len() - 1].1
    }

    /// Inverse of [`Self::booked`]: days out by which `fraction` has arrived.
    pub fn days_for(&self, fraction: f64) -> f64 {
        let mut k = self.knots.clone();
        k.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
        if fraction <= k[0].1 {
            return k[0].0;
        }
        for w in k.windows(2) {
            let (d0, f0) = w[0];
            let (d1, f1) = w[1];
            if fraction <= f1 {
                if f1 == f0 {
                    return d1;
                }
                return d0 + (fraction - f0) / (f1 - f0) * (d1 - d0);
            }
        }
        k[k.len() - 1].0
    }
}

/// Prior knowledge available to the forecasting policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub curve: ForecastCurve,
    pub mean_arrivals: f64,
    pub type_shares: Vec<f64>,
}

impl Forecast {
    fn counts(&self, mode: BidPriceMode, t: usize, a: &AssortmentArrivals) -> Vec<f64> {
        let prior: Vec<f64> = self.type_shares.iter().map(|s| s * self.mean_arrivals).collect();
        if mode == BidPriceMode::OneShot || t == 0 {
            return prior;
        }
        let seen = t as f64;
        let frac = self.curve.booked(a.customers[t].days_before);
        let remaining = if frac >= MIN_BOOKED_FRACTION {
            seen * (1.0 - frac) / frac
        } else {
            self.mean_arrivals * (1.0 - frac)
        };
        let shares: Vec<f64> = if mode == BidPriceMode::Learning {
            let mut c = vec![0.0; self.type_shares.len()];
            for cust in &a.customers[..t] {
                c[cust.customer_type] += 1.0 / seen;
            }
            c
        } else {
            self.type_shares.clone()
        };
        shares
            .into_iter()
            .map(|s| {
                let v = s * remaining;
                if v < 0.0 {
                    warn!("negative forecast count {v} clamped to zero");
                    0.0
                } else {
                    v
                }
            })
            .collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn run_forecasting(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    mode: BidPriceMode,
    resolve_every: usize,
    forecast: Option<&Forecast>,
    family: &AssortmentFamily,
    seed: u64,
    gamma: Option<f64>,
) -> Result<RunResult> {
    let ArrivalSequence::Assortment(a) = arrivals else {
        return Err(Error::InvalidArgument(format!(
            "bid-price policies need assortment arrivals, got {}",
            arrivals.kind()
        )));
    };
    arrivals.validate(setup)?;
    if resolve_every == 0 {
        return Err(Error::InvalidArgument("resolve_every must be at least 1".into()));
    }
    let forecast = match (mode, forecast) {
        (BidPriceMode::Clairvoyant, f) => f.cloned(),
        (_, Some(f)) => Some(f.clone()),
        (_, None) => {
            return Err(Error::InvalidArgument(format!(
                "{} needs a forecast",
                mode.label()
            )))
        }
    };
    if let Some(f) = &forecast {
        if f.type_shares.len() != a.model.num_types() {
            return Err(Error::DimensionMismatch(format!(
                "forecast has {} type shares for {} types",
                f.type_shares.len(),
                a.model.num_types()
            )));
        }
    }

    let mut streams = Streams::new(seed);
    let fixed = match gamma {
        Some(_) => Some(item_values(setup, ValueMode::Fixed, &streams)?),
        None => None,
    };
    let products = a.model.products();
    let mut sold = vec![0usize; setup.len()];
    let mut y = vec![0.0; setup.len()];
    let mut result = RunResult::new(setup, a.customers.len());

    for (t, cust) in a.customers.iter().enumerate() {
        let u: f64 = streams.customers.random();
        let due = t == 0 || (mode != BidPriceMode::OneShot && t % resolve_every == 0);
        if due {
            let counts = match mode {
                BidPriceMode::Clairvoyant => a.type_counts(t),
                _ => forecast.as_ref().expect("checked above").counts(mode, t, a),
            };
            let remaining: Vec<f64> = setup
                .items
                .iter()
                .zip(&sold)
                .map(|(it, &s)| (it.inventory - s) as f64)
                .collect();
            let sol = solve_choice_lp_with_inventory(setup, &remaining, &counts, &a.model, family)?;
            y = bid_prices(&sol);
            result.lp_solves += 1;
        }
        let values: Vec<f64> = products
            .iter()
            .map(|p| {
                if sold[p.item] >= setup.items[p.item].inventory {
                    f64::NEG_INFINITY
                } else {
                    setup.items[p.item].prices.price(p.price) - y[p.item]
                }
            })
            .collect();
        let mut offer = optimize_assortment(&a.model, cust.customer_type, &values, family)?.products;

        if let (Some(g), Some(fixed)) = (gamma, fixed.as_ref()) {
            let pr = pseudorevenues(&a.model, setup, fixed, &sold);
            let ours = optimize_assortment(&a.model, cust.customer_type, &pr, family)?;
            let theirs = a.model.expected_value(cust.customer_type, &offer, &pr);
            if theirs < ours.objective / g {
                offer = ours.products;
                result.overrides += 1;
            }
        }

        if offer.is_empty() {
            continue;
        }
        result.offers += 1;
        if let Some(p) = a.model.choose_with_uniform(cust.customer_type, &offer, u) {
            let prod = &products[p];
            sold[prod.item] += 1;
            let price = setup.items[prod.item].prices.price(prod.price);
            result.record(Sale {
                t,
                item: prod.item,
                price_index: prod.price,
                price,
                pseudorevenue: price - y[prod.item],
                quantity: 1.0,
            });
        }
    }
    Ok(result)
}

/// Bid-price control: re-solve the choice LP on the forecast at the given
/// cadence and show each customer the assortment maximizing expected
/// revenue net of the items' shadow prices.
#[allow(clippy::too_many_arguments)]
pub fn run_bidprice(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    mode: BidPriceMode,
    resolve_every: usize,
    forecast: Option<&Forecast>,
    family: &AssortmentFamily,
    seed: u64,
) -> Result<RunResult> {
    run_forecasting(setup, arrivals, mode, resolve_every, forecast, family, seed, None)
}

/// Follows the bid-price assortment unless its expected pseudorevenue under
/// the fixed value functions is below `1 / gamma` of the best achievable,
/// in which case the best one is shown instead.
#[allow(clippy::too_many_arguments)]
pub fn run_hybrid(
    setup: &Setup,
    arrivals: &ArrivalSequence,
    base: BidPriceMode,
    gamma: f64,
    resolve_every: usize,
    forecast: Option<&Forecast>,
    family: &AssortmentFamily,
    seed: u64,
) -> Result<RunResult> {
    if !(gamma > 1.0) {
        return Err(Error::Domain {
            what: "gamma",
            value: gamma,
            domain: "(1, inf]",
        });
    }
    run_forecasting(setup, arrivals, base, resolve_every, forecast, family, seed, Some(gamma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_interpolates() {
        let c = ForecastCurve::default();
        assert_eq!(c.booked(200.0), 0.0);
        assert_eq!(c.booked(100.0), 0.0);
        assert!((c.booked(25.0) - 0.5).abs() < 1e-15);
        assert!((c.booked(62.5) - 0.25).abs() < 1e-15);
        assert_eq!(c.booked(0.0), 1.0);
        assert!((c.days_for(0.5) - 25.0).abs() < 1e-12);
        assert!((c.days_for(0.75) - 12.5).abs() < 1e-12);
        assert!(ForecastCurve::new(vec![(10.0, 0.8), (0.0, 0.2)]).is_err());
    }

    #[test]
    fn hotel_style_forecast() {
        // 500 seen by 25 days out with half booked -> 500 remaining
        let model = crate::choice::MnlModel::hotel();
        let mut customers = vec![
            crate::engine::AssortmentCustomer {
                customer_type: 2,
                days_before: 30.0
            };
            500
        ];
        customers.push(crate::engine::AssortmentCustomer {
            customer_type: 0,
            days_before: 25.0,
        });
        let a = AssortmentArrivals { model, customers };
        let f = Forecast {
            curve: ForecastCurve::default(),
            mean_arrivals: 1340.0,
            type_shares: a.model.shares(),
        };
        let c = f.counts(BidPriceMode::Resolving, 500, &a);
        assert!((c.iter().sum::<f64>() - 500.0).abs() < 1e-9);
        assert!((c[2] - 140.0).abs() < 1e-9);
        let c = f.counts(BidPriceMode::Learning, 500, &a);
        assert!((c[2] - 500.0).abs() < 1e-9);
        let c = f.counts(BidPriceMode::OneShot, 500, &a);
        assert!((c.iter().sum::<f64>() - 1340.0).abs() < 1e-9);
    }
}
