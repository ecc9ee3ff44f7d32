use super::simplex::Simplex;
use super::{LpSolution, PrimalEntry, Variable};
use crate::engine::{ArrivalSequence, Setup};
use crate::error::{Error, Result};

/// Size guard for the dense basis inverse.
pub const MAX_ROWS: usize = 3_000;
pub const MAX_NONZEROS: usize = 100_000;

/// Solves the hindsight allocation LP
///
/// ```text
/// max  sum p[t][i][j] r[i][j] x[t][i][j]
/// s.t. sum_{t,j} p[t][i][j] x[t][i][j] <= k[i]   for every item
///      sum_{i,j} x[t][i][j]            <= 1      for every customer
///      x >= 0
/// ```
///
/// whose optimum bounds the expected revenue of any online policy. For
/// deterministic customers only the top acceptable price of each item gets a
/// variable, since lower prices use the same capacity for less revenue.
pub fn solve_primal(setup: &Setup, arrivals: &ArrivalSequence) -> Result<LpSolution> {
    if matches!(arrivals, ArrivalSequence::Assortment(_)) {
        return Err(Error::InvalidArgument(
            "use the choice LP for assortment arrivals".into(),
        ));
    }
    arrivals.validate(setup)?;
    let n = setup.len();
    let t_count = arrivals.len();
    let rows = n + t_count;
    if rows > MAX_ROWS {
        return Err(Error::Unsupported(format!(
            "LP has {rows} rows; the dense solver is limited to {MAX_ROWS}"
        )));
    }

    let mut vars = Vec::new();
    let mut cols = Vec::new();
    let mut nonzeros = 0;
    for t in 0..t_count {
        let entries: Vec<(usize, usize, f64)> = match arrivals {
            ArrivalSequence::Deterministic(cs) => cs[t]
                .iter()
                .filter(|int| int.level > 0)
                .map(|int| (int.item, int.level - 1, 1.0))
                .collect(),
            ArrivalSequence::SingleOffer(cs) | ArrivalSequence::Fractional(cs) => cs[t]
                .iter()
                .flat_map(|row| {
                    row.probs
                        .iter()
                        .enumerate()
                        .filter(|(_, &p)| p > 0.0)
                        .map(move |(j, &p)| (row.item, j, p))
                })
                .collect(),
            ArrivalSequence::Assortment(_) => unreachable!(),
        };
        for (i, j, p) in entries {
            let r = setup.items[i].prices.price(j);
            cols.push((p * r, vec![(i, p), (n + t, 1.0)]));
            vars.push(Variable::Offer { t, item: i, price: j });
            nonzeros += 2;
        }
    }
    if nonzeros > MAX_NONZEROS {
        return Err(Error::Unsupported(format!(
            "LP has {nonzeros} nonzeros; limit is {MAX_NONZEROS}"
        )));
    }

    let mut b: Vec<f64> = setup.items.iter().map(|it| it.inventory as f64).collect();
    b.extend(std::iter::repeat_n(1.0, t_count));
    let mut lp = Simplex::new(b.clone())?;
    for (c, col) in cols {
        lp.add_column(c, col)?;
    }
    let out = lp.solve()?;
    let dual_objective = out.duals.iter().zip(&b).map(|(y, b)| y * b).sum();
    let primal = vars
        .into_iter()
        .zip(&out.x)
        .filter(|(_, &x)| x > 1e-12)
        .map(|(var, &value)| PrimalEntry { var, value })
        .collect();
    Ok(LpSolution {
        objective: out.objective,
        dual_objective,
        primal,
        inventory_duals: out.duals[..n].to_vec(),
        arrival_duals: out.duals[n..].to_vec(),
        pivots: out.pivots,
        columns: lp.num_columns(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Interest, OfferRow};
    use crate::valuefn::PriceSet;

    #[test]
    fn one_unit_two_customers() {
        let s = Setup::uniform(1, 1, PriceSet::single(3.0).unwrap()).unwrap();
        let a = ArrivalSequence::Deterministic(vec![vec![Interest { item: 0, level: 1 }]; 2]);
        let sol = solve_primal(&s, &a).unwrap();
        assert!((sol.objective - 3.0).abs() < 1e-12);
        assert!(sol.duality_gap() < 1e-9);
    }

    #[test]
    fn stochastic_duals_are_feasible() {
        let s = Setup::uniform(2, 2, PriceSet::new(vec![1.0, 4.0]).unwrap()).unwrap();
        let cs: Vec<Vec<OfferRow>> = (0..6)
            .map(|t| {
                (0..2)
                    .map(|i| OfferRow {
                        item: i,
                        probs: vec![0.9 - 0.1 * t as f64, 0.1 + 0.05 * (i + t) as f64],
                    })
                    .collect()
            })
            .collect();
        let a = ArrivalSequence::SingleOffer(cs.clone());
        let sol = solve_primal(&s, &a).unwrap();
        assert!(sol.duality_gap() < 1e-9);
        for (t, rows) in cs.iter().enumerate() {
            for row in rows {
                for (j, &p) in row.probs.iter().enumerate() {
                    let r = s.items[row.item].prices.price(j);
                    let lhs = p * sol.inventory_duals[row.item] + sol.arrival_duals[t];
                    assert!(lhs >= p * r - 1e-9);
                }
            }
        }
    }

    #[test]
    fn size_guard() {
        let s = Setup::uniform(1, 1, PriceSet::single(1.0).unwrap()).unwrap();
        let a = ArrivalSequence::Deterministic(vec![vec![]; MAX_ROWS + 1]);
        assert!(matches!(solve_primal(&s, &a), Err(Error::Unsupported(_))));
    }
}
