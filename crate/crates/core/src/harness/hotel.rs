use chrono::{Datelike, Days, NaiveDate};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::choice::MnlModel;
use crate::engine::{
    ArrivalSequence, AssortmentArrivals, AssortmentCustomer, Forecast, ForecastCurve, Item, Setup,
};
use crate::error::{Error, Result};
use crate::valuefn::PriceSet;

/// Room categories as `(name, low fare, high fare, share of rooms)`.
pub const ROOM_CATEGORIES: [(&str, f64, f64, f64); 4] = [
    ("king", 307.0, 361.0, 0.52),
    ("queen", 304.0, 361.0, 0.15),
    ("suite", 384.0, 496.0, 0.13),
    ("two_double", 306.0, 342.0, 0.20),
];

/// No-purchase utility shift applied with the doubled high fares.
pub const FARE_DIFF_NO_PURCHASE_SHIFT: f64 = 2.0;

pub const DEFAULT_LOADING_FACTORS: [f64; 3] = [1.4, 1.6, 1.8];

/// Shape of the synthetic booking season.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HotelProfile {
    /// Mean arrivals per occupancy date after replication.
    pub mean_daily_arrivals: f64,
    /// Each drawn customer is repeated this many times in a row.
    pub replication: usize,
    pub days: usize,
    pub start_date: NaiveDate,
    /// Relative demand by weekday, Monday first.
    pub weekday_weights: [f64; 7],
    /// Dirichlet concentration of the per-day type mix around the aggregate
    /// shares; `None` keeps every day at the aggregate mix.
    pub mix_concentration: Option<f64>,
    pub booking_curve: ForecastCurve,
}

impl Default for HotelProfile {
    fn default() -> Self {
        HotelProfile {
            mean_daily_arrivals: 1340.0,
            replication: 10,
            days: 35,
            start_date: NaiveDate::from_ymd_opt(2007, 3, 11).expect("valid date"),
            weekday_weights: [1.25, 0.95, 0.9, 0.9, 0.95, 0.9, 1.15],
            mix_concentration: Some(150.0),
            booking_curve: ForecastCurve::default(),
        }
    }
}

impl HotelProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_daily_arrivals > 0.0) || !self.mean_daily_arrivals.is_finite() {
            return Err(Error::Domain {
                what: "mean_daily_arrivals",
                value: self.mean_daily_arrivals,
                domain: "(0, inf)",
            });
        }
        if self.replication == 0 || self.days == 0 {
            return Err(Error::InvalidArgument("replication and days must be at least 1".into()));
        }
        if self.weekday_weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite())
            || self.weekday_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidArgument("weekday weights must be nonnegative and not all zero".into()));
        }
        if let Some(c) = self.mix_concentration {
            if !(c > 0.0) || !c.is_finite() {
                return Err(Error::Domain {
                    what: "mix_concentration",
                    value: c,
                    domain: "(0, inf)",
                });
            }
        }
        ForecastCurve::new(self.booking_curve.knots.clone())?;
        Ok(())
    }
}

/// One occupancy date.
#[derive(Debug, Clone, PartialEq)]
pub struct HotelDay {
    pub date: NaiveDate,
    pub arrivals: ArrivalSequence,
}

impl HotelDay {
    pub fn customers(&self) -> &AssortmentArrivals {
        match &self.arrivals {
            ArrivalSequence::Assortment(a) => a,
            _ => unreachable!("hotel days always carry assortment arrivals"),
        }
    }
}

/// Days sharing one set of starting inventories.
#[derive(Debug, Clone, PartialEq)]
pub struct HotelEnsemble {
    pub loading_factor: f64,
    pub setup: Setup,
    pub model: MnlModel,
    pub days: Vec<HotelDay>,
    /// What the forecasting policies know: the average day and type mix.
    pub forecast: Forecast,
}

impl HotelEnsemble {
    pub fn mean_arrivals(&self) -> f64 {
        mean_arrivals(&self.days)
    }
}

fn mean_arrivals(days: &[HotelDay]) -> f64 {
    if days.is_empty() {
        return 0.0;
    }
    days.iter().map(|d| d.arrivals.len() as f64).sum::<f64>() / days.len() as f64
}

/// The four room categories with their fares; doubles the high fares when
/// `fare_differentiation` is set.
pub fn hotel_prices(fare_differentiation: bool) -> Vec<PriceSet> {
    ROOM_CATEGORIES
        .iter()
        .map(|&(_, low, high, _)| {
            let high = if fare_differentiation { 2.0 * low } else { high };
            PriceSet::new(vec![low, high]).expect("fares are valid")
        })
        .collect()
}

pub fn hotel_model(fare_differentiation: bool) -> MnlModel {
    let m = MnlModel::hotel();
    if fare_differentiation {
        m.with_no_purchase_shift(FARE_DIFF_NO_PURCHASE_SHIFT)
            .expect("finite shift")
    } else {
        m
    }
}

/// Room counts giving `mean_arrivals / loading_factor` rooms in total, split
/// by the category shares.
pub fn hotel_inventories(mean_arrivals: f64, loading_factor: f64) -> Result<Vec<usize>> {
    if !(loading_factor > 0.0) || !loading_factor.is_finite() {
        return Err(Error::Domain {
            what: "loading_factor",
            value: loading_factor,
            domain: "(0, inf)",
        });
    }
    let total = mean_arrivals / loading_factor;
    Ok(ROOM_CATEGORIES
        .iter()
        .map(|c| ((total * c.3).round() as usize).max(1))
        .collect())
}

/// Draws the occupancy dates of one season. The draw depends only on the
/// profile, the shares and the seed, so every loading factor sees the same
/// customers.
pub fn generate_days(profile: &HotelProfile, model: &MnlModel, seed: u64) -> Result<Vec<HotelDay>> {
    profile.validate()?;
    let shares = model.shares();
    if shares.iter().any(|s| !(*s >= 0.0)) || shares.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidArgument("type shares must be nonnegative and not all zero".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mean_weight = profile.weekday_weights.iter().sum::<f64>() / 7.0;
    let base_mean = profile.mean_daily_arrivals / profile.replication as f64;
    let curve = &profile.booking_curve;

    let mut days = Vec::with_capacity(profile.days);
    for d in 0..profile.days {
        let date = profile.start_date + Days::new(d as u64);
        let w = profile.weekday_weights[date.weekday().num_days_from_monday() as usize] / mean_weight;
        let lambda = base_mean * w;
        let count = if lambda > 0.0 {
            Poisson::new(lambda)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?
                .sample(&mut rng) as usize
        } else {
            0
        };
        let mix = match profile.mix_concentration {
            // Dirichlet draw via normalized gammas
            Some(c) => {
                let mut g = Vec::with_capacity(shares.len());
                for s in &shares {
                    let x: f64 = if *s > 0.0 {
                        Gamma::new(s * c, 1.0)
                            .map_err(|e| Error::InvalidArgument(e.to_string()))?
                            .sample(&mut rng)
                    } else {
                        0.0
                    };
                    g.push(x);
                }
                let total: f64 = g.iter().sum();
                if total > 0.0 {
                    g.iter().map(|x| x / total).collect()
                } else {
                    shares.clone()
                }
            }
            None => shares.clone(),
        };
        let pick = WeightedIndex::new(&mix).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut base: Vec<AssortmentCustomer> = (0..count)
            .map(|_| {
                let customer_type = pick.sample(&mut rng);
                let u: f64 = rng.random();
                AssortmentCustomer {
                    customer_type,
                    days_before: curve.days_for(u).floor(),
                }
            })
            .collect();
        // earliest bookings first
        base.sort_by(|a, b| b.days_before.total_cmp(&a.days_before));
        let customers = base
            .into_iter()
            .flat_map(|c| std::iter::repeat_n(c, profile.replication))
            .collect();
        days.push(HotelDay {
            date,
            arrivals: ArrivalSequence::Assortment(AssortmentArrivals {
                model: model.clone(),
                customers,
            }),
        });
    }
    Ok(days)
}

/// Aggregate type mix over all days.
pub fn empirical_shares(days: &[HotelDay], types: usize) -> Vec<f64> {
    let mut c = vec![0.0; types];
    for d in days {
        for (a, x) in d.customers().type_counts(0).into_iter().enumerate() {
            c[a] += x;
        }
    }
    let total: f64 = c.iter().sum();
    if total > 0.0 {
        c.iter_mut().for_each(|x| *x /= total);
    }
    c
}

/// Puts days under common inventories set by the loading factor and the
/// realized mean arrivals per day.
pub fn build_ensemble(
    days: Vec<HotelDay>,
    model: MnlModel,
    fare_differentiation: bool,
    loading_factor: f64,
    curve: ForecastCurve,
) -> Result<HotelEnsemble> {
    let mean = mean_arrivals(&days);
    if mean <= 0.0 {
        return Err(Error::InvalidArgument("ensemble has no arrivals".into()));
    }
    let inv = hotel_inventories(mean, loading_factor)?;
    let setup = Setup::new(
        hotel_prices(fare_differentiation)
            .into_iter()
            .zip(inv)
            .map(|(prices, inventory)| Item { inventory, prices })
            .collect(),
    )?;
    let type_shares = empirical_shares(&days, model.num_types());
    Ok(HotelEnsemble {
        loading_factor,
        setup,
        model,
        days,
        forecast: Forecast {
            curve,
            mean_arrivals: mean,
            type_shares,
        },
    })
}

/// Synthetic ensemble for one loading factor.
pub fn generate_hotel_ensemble(
    profile: &HotelProfile,
    fare_differentiation: bool,
    loading_factor: f64,
    seed: u64,
) -> Result<HotelEnsemble> {
    let model = hotel_model(fare_differentiation);
    let days = generate_days(profile, &model, seed)?;
    build_ensemble(days, model, fare_differentiation, loading_factor, profile.booking_curve.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inventories_follow_loading_factor() {
        let inv = hotel_inventories(1340.0, 1.4).unwrap();
        assert_eq!(inv[0], 498);
        assert!((inv.iter().sum::<usize>() as f64 - 1340.0 / 1.4).abs() <= 2.0);
        let a = hotel_inventories(1000.0, 1.6).unwrap();
        let b = hotel_inventories(2000.0, 1.6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((2 * x).abs_diff(*y) <= 1);
        }
        assert!(hotel_inventories(1340.0, 0.0).is_err());
    }

    #[test]
    fn fare_differentiation_doubles_high_fares() {
        let p = hotel_prices(true);
        let highs: Vec<f64> = p.iter().map(|s| s.highest()).collect();
        assert_eq!(highs, vec![614.0, 608.0, 768.0, 612.0]);
        let m = hotel_model(true);
        assert!(m.types().iter().all(|t| t.no_purchase == 2.0));
    }

    #[test]
    fn season_shape() {
        let profile = HotelProfile::default();
        let days = generate_days(&profile, &MnlModel::hotel(), 7).unwrap();
        assert_eq!(days.len(), 35);
        assert_eq!(days[0].date.weekday(), chrono::Weekday::Sun);
        let mean = mean_arrivals(&days);
        assert!((mean - 1340.0).abs() < 100.0, "mean {mean}");
        for d in &days {
            let cs = &d.customers().customers;
            assert_eq!(cs.len() % 10, 0);
            for w in cs.windows(2) {
                assert!(w[0].days_before >= w[1].days_before);
            }
            for block in cs.chunks(10) {
                assert!(block.iter().all(|c| c == &block[0]));
            }
        }
        let again = generate_days(&profile, &MnlModel::hotel(), 7).unwrap();
        assert_eq!(days, again);
    }

    #[test]
    fn type_shares_converge() {
        let profile = HotelProfile {
            mean_daily_arrivals: 100_000.0,
            replication: 1,
            days: 1,
            mix_concentration: None,
            weekday_weights: [1.0; 7],
            ..Default::default()
        };
        let model = MnlModel::hotel();
        let days = generate_days(&profile, &model, 3).unwrap();
        let n = days[0].arrivals.len() as f64;
        let counts = days[0].customers().type_counts(0);
        for (c, s) in counts.iter().zip(model.shares()) {
            let sigma = (n * s * (1.0 - s)).sqrt();
            assert!((c - n * s).abs() < 3.0 * sigma + 1.0, "{c} vs {}", n * s);
        }
    }
}
