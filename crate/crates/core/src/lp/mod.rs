//! Hindsight linear programs: the per-customer allocation LP that bounds
//! every online policy, and the choice-based LP over assortments solved by
//! column generation. Both are solved by the dense revised simplex in
//! [`simplex`].

mod choice_lp;
mod hindsight;
pub mod simplex;

pub use choice_lp::{solve_choice_lp, solve_choice_lp_with_inventory, CG_TOL, MAX_COLUMNS};
pub use hindsight::{solve_primal, MAX_NONZEROS, MAX_ROWS};

use serde::{Deserialize, Serialize};

/// A primal variable of either program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variable {
    /// Offer item `item` at zero-based price index `price` to customer `t`.
    Offer { t: usize, item: usize, price: usize },
    /// Show assortment `products` to customers of type `customer_type`.
    Assortment {
        customer_type: usize,
        products: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalEntry {
    pub var: Variable,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub objective: f64,
    /// Value of the dual solution read off the final basis.
    pub dual_objective: f64,
    /// Nonzero primal values.
    pub primal: Vec<PrimalEntry>,
    /// Shadow price of each item's inventory constraint.
    pub inventory_duals: Vec<f64>,
    /// Shadow price of each customer (or customer-type) constraint.
    pub arrival_duals: Vec<f64>,
    pub pivots: usize,
    /// Columns in the final master program.
    pub columns: usize,
}

impl LpSolution {
    pub fn duality_gap(&self) -> f64 {
        (self.dual_objective - self.objective).abs() / self.objective.abs().max(1.0)
    }
}

/// Bid price of each item: the shadow price of its inventory constraint.
pub fn bid_prices(sol: &LpSolution) -> Vec<f64> {
    sol.inventory_duals.iter().map(|y| y.max(0.0)).collect()
}
