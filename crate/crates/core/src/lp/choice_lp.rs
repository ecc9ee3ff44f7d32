use std::collections::HashSet;

use super::simplex::Simplex;
use super::{LpSolution, PrimalEntry, Variable};
use crate::choice::{optimize_assortment, AssortmentFamily, MnlModel};
use crate::engine::Setup;
use crate::error::{Error, Result};

/// A column enters the master when its reduced cost exceeds this.
pub const CG_TOL: f64 = 1e-7;
pub const MAX_COLUMNS: usize = 10_000;

/// Solves the choice-based LP with each item's full starting inventory.
pub fn solve_choice_lp(
    setup: &Setup,
    counts: &[f64],
    model: &MnlModel,
    family: &AssortmentFamily,
) -> Result<LpSolution> {
    let inv: Vec<f64> = setup.items.iter().map(|it| it.inventory as f64).collect();
    solve_choice_lp_with_inventory(setup, &inv, counts, model, family)
}

/// Solves
///
/// ```text
/// max  sum_a sum_S x_a(S) sum_{p in S} P_a(p | S) r_p
/// s.t. sum_a sum_S x_a(S) sum_{p in S, item(p) = i} P_a(p | S) <= K_i
///      sum_S x_a(S) = N_a
///      x >= 0
/// ```
///
/// by column generation. The empty assortment plays the role of the slack
/// in each type's row, so those rows are stored as `<=`. The pricing problem
/// for type `a` is a single-shot assortment problem with values `r_p - y_i`.
pub fn solve_choice_lp_with_inventory(
    setup: &Setup,
    inventory: &[f64],
    counts: &[f64],
    model: &MnlModel,
    family: &AssortmentFamily,
) -> Result<LpSolution> {
    let n = setup.len();
    let types = model.num_types();
    if inventory.len() != n || counts.len() != types {
        return Err(Error::DimensionMismatch(format!(
            "expected {n} inventories and {types} type counts, got {} and {}",
            inventory.len(),
            counts.len()
        )));
    }
    if counts.iter().chain(inventory).any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "inventories and type counts must be finite and nonnegative".into(),
        ));
    }
    let prices: Vec<f64> = model
        .products()
        .iter()
        .map(|p| {
            setup
                .items
                .get(p.item)
                .filter(|it| p.price < it.prices.len())
                .map(|it| it.prices.price(p.price))
                .ok_or_else(|| Error::DimensionMismatch(format!("product {} is not in the setup", p.name)))
        })
        .collect::<Result<_>>()?;

    let mut b = inventory.to_vec();
    b.extend_from_slice(counts);
    let mut lp = Simplex::new(b.clone())?;
    let mut vars: Vec<Variable> = Vec::new();
    let mut seen: HashSet<(usize, Vec<usize>)> = HashSet::new();
    let mut last_objective = f64::NEG_INFINITY;

    loop {
        let out = lp.solve()?;
        debug_assert!(out.objective >= last_objective - 1e-7, "master objective decreased");
        last_objective = out.objective;
        let y = &out.duals[..n];
        let z = &out.duals[n..];
        let values: Vec<f64> = model
            .products()
            .iter()
            .zip(&prices)
            .map(|(p, r)| r - y[p.item])
            .collect();

        let mut added = 0;
        let mut lagrangian: f64 = y.iter().zip(inventory).map(|(a, b)| a * b).sum();
        for a in 0..types {
            let best = optimize_assortment(model, a, &values, family)?;
            lagrangian += counts[a] * best.objective.max(0.0);
            if best.objective <= z[a] + CG_TOL || best.products.is_empty() {
                continue;
            }
            if !seen.insert((a, best.products.clone())) {
                continue;
            }
            let probs = model.choice_probs_unchecked(a, &best.products);
            let mut cost = 0.0;
            let mut use_per_item = vec![0.0; n];
            for (&p, &q) in best.products.iter().zip(&probs.products) {
                cost += q * prices[p];
                use_per_item[model.products()[p].item] += q;
            }
            let mut col: Vec<(usize, f64)> = use_per_item
                .into_iter()
                .enumerate()
                .filter(|(_, v)| *v > 0.0)
                .collect();
            col.push((n + a, 1.0));
            lp.add_column(cost, col)?;
            vars.push(Variable::Assortment {
                customer_type: a,
                products: best.products,
            });
            added += 1;
        }

        if added == 0 {
            let dual_objective = out.duals.iter().zip(&b).map(|(d, b)| d * b).sum();
            let primal = vars
                .into_iter()
                .zip(&out.x)
                .filter(|(_, &x)| x > 1e-12)
                .map(|(var, &value)| PrimalEntry { var, value })
                .collect();
            return Ok(LpSolution {
                objective: out.objective,
                dual_objective,
                primal,
                inventory_duals: y.to_vec(),
                arrival_duals: z.to_vec(),
                pivots: out.pivots,
                columns: lp.num_columns(),
            });
        }
        if lp.num_columns() >= MAX_COLUMNS {
            return Err(Error::SolverLimit(format!(
                "column generation stopped at {MAX_COLUMNS} columns; objective {} with bound {lagrangian} (gap {})",
                out.objective,
                lagrangian - out.objective
            )));
        }
    }
}
