//! Online policies and the instance types they run on.
//!
//! Every policy sees customers one at a time, decides what to offer from the
//! items still in stock, and draws exactly one uniform per customer for the
//! purchase decision. Runs on the same instance and seed therefore share
//! their customer randomness across policies.

mod assortment;
mod balance;
mod benchmarks;
mod bidprice;
mod fractional;
mod ranking;
mod setup;

pub use assortment::run_balance_assortment;
pub use balance::run_balance;
pub use benchmarks::{gnr_psi, run_conservative, run_gnr, run_myopic};
pub use bidprice::{run_bidprice, run_hybrid, BidPriceMode, Forecast, ForecastCurve};
pub use fractional::run_balance_fractional;
pub use ranking::run_ranking;
pub use setup::{
    AssortmentArrivals, AssortmentCustomer, ArrivalSequence, Interest, Item, OfferRow, Setup,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::choice::AssortmentFamily;
use crate::error::Result;

/// Offers with expected pseudorevenue at or below this are not made.
pub const POSITIVE: f64 = 1e-12;

/// Which value function the balance policy uses for each item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    /// Borders rounded to the inventory grid with a random seed per item.
    #[default]
    Perturbed,
    /// The unrounded value function, evaluated at the sold fraction.
    Fixed,
    /// The optimal randomized procedure for single-unit items.
    SingleUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sale {
    pub t: usize,
    pub item: usize,
    /// Zero-based price index.
    pub price_index: usize,
    pub price: f64,
    pub pseudorevenue: f64,
    /// Units consumed; below one only for partially filled fractional bids.
    pub quantity: f64,
}

/// One dual update made by the balance policy on a sale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualStep {
    pub t: usize,
    pub item: usize,
    /// Increase of the item's bid price.
    pub y_increment: f64,
    pub z: f64,
    pub revenue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunResult {
    pub revenue: f64,
    pub sales: Vec<Sale>,
    /// Remaining inventory per item.
    pub final_inventory: Vec<f64>,
    /// Customers shown a nonempty offer.
    pub offers: usize,
    pub lp_solves: usize,
    /// Hybrid decisions that deferred to the value-function assortment.
    pub overrides: usize,
    /// Fractional bids cut short at capacity.
    pub truncations: usize,
    /// Sales that broke the per-step invariant the policy checks at runtime.
    pub invariant_violations: usize,
    pub duals_trace: Option<Vec<DualStep>>,
    pub customers: usize,
}

impl RunResult {
    fn new(setup: &Setup, customers: usize) -> Self {
        RunResult {
            final_inventory: setup.items.iter().map(|i| i.inventory as f64).collect(),
            customers,
            ..Default::default()
        }
    }

    fn record(&mut self, sale: Sale) {
        self.revenue += sale.price * sale.quantity;
        self.final_inventory[sale.item] -= sale.quantity;
        self.sales.push(sale);
    }

    pub fn units_sold(&self, item: usize) -> f64 {
        self.sales.iter().filter(|s| s.item == item).map(|s| s.quantity).sum()
    }

    pub fn override_fraction(&self) -> f64 {
        if self.customers == 0 {
            0.0
        } else {
            self.overrides as f64 / self.customers as f64
        }
    }
}

/// Extra switches shared by the policies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub value_mode: ValueMode,
    /// Record the balance policy's dual updates.
    pub trace_duals: bool,
    /// Ratio to check each balance dual update against.
    pub check_ratio: Option<f64>,
}

/// Customer stream and per-item streams derived from one seed.
pub(crate) struct Streams {
    pub customers: ChaCha8Rng,
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let mut customers = ChaCha8Rng::seed_from_u64(seed);
        customers.set_stream(0);
        Streams { customers, seed }
    }

    pub fn item(&self, i: usize) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(i as u64 + 1);
        r
    }
}

/// A policy with its parameters, as named in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Policy {
    Balance {
        #[serde(default)]
        value_mode: ValueMode,
    },
    Ranking,
    Myopic,
    Conservative,
    Gnr,
    BidPrice {
        mode: BidPriceMode,
        #[serde(default = "default_resolve_every")]
        resolve_every: usize,
    },
    Hybrid {
        base: BidPriceMode,
        gamma: f64,
        #[serde(default = "default_resolve_every")]
        resolve_every: usize,
    },
    FractionalBalance,
}

pub fn default_resolve_every() -> usize {
    100
}

impl Policy {
    /// Short label for reports.
    pub fn label(&self) -> String {
        match self {
            Policy::Balance { value_mode } => match value_mode {
                ValueMode::Perturbed => "balance".into(),
                ValueMode::Fixed => "balance_fixed".into(),
                ValueMode::SingleUnit => "balance_single_unit".into(),
            },
            Policy::Ranking => "ranking".into(),
            Policy::Myopic => "myopic".into(),
            Policy::Conservative => "conservative".into(),
            Policy::Gnr => "gnr".into(),
            Policy::BidPrice { mode, .. } => mode.label().into(),
            Policy::Hybrid { base, gamma, .. } => format!("{}-{gamma}", base.hybrid_label()),
            Policy::FractionalBalance => "balance_fractional".into(),
        }
    }
}

/// Inputs some policies need beyond the instance itself.
#[derive(Debug, Clone, Default)]
pub struct PolicyContext {
    pub forecast: Option<Forecast>,
    pub family: AssortmentFamily,
}

/// Runs `policy` on one instance, picking the variant that matches the
/// arrival kind.
pub fn run_policy(
    policy: &Policy,
    setup: &Setup,
    arrivals: &ArrivalSequence,
    seed: u64,
    ctx: &PolicyContext,
) -> Result<RunResult> {
    let assortment = matches!(arrivals, ArrivalSequence::Assortment(_));
    match policy {
        Policy::Balance { value_mode } => {
            let opts = RunOptions {
                value_mode: *value_mode,
                ..Default::default()
            };
            if assortment {
                run_balance_assortment(setup, arrivals, &ctx.family, seed, &opts)
            } else {
                run_balance(setup, arrivals, seed, &opts)
            }
        }
        Policy::Ranking => run_ranking(setup, arrivals, seed),
        Policy::Myopic => run_myopic(setup, arrivals, &ctx.family, seed),
        Policy::Conservative => run_conservative(setup, arrivals, &ctx.family, seed),
        Policy::Gnr => run_gnr(setup, arrivals, &ctx.family, seed),
        Policy::BidPrice {
            mode,
            resolve_every,
        } => run_bidprice(
            setup,
            arrivals,
            *mode,
            *resolve_every,
            ctx.forecast.as_ref(),
            &ctx.family,
            seed,
        ),
        Policy::Hybrid {
            base,
            gamma,
            resolve_every,
        } => run_hybrid(
            setup,
            arrivals,
            *base,
            *gamma,
            *resolve_every,
            ctx.forecast.as_ref(),
            &ctx.family,
            seed,
        ),
        Policy::FractionalBalance => run_balance_fractional(setup, arrivals, seed),
    }
}
