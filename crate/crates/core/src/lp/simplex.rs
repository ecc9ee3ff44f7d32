//! Dense revised simplex for `max c'x  s.t.  Ax <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is always feasible, so there is no phase one. Columns can
//! be appended between solves and the next solve starts from the current
//! basis, which is what column generation needs.

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-9;
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Degenerate pivots in a row before switching to the smallest-index rule.
const DEGENERATE_STREAK: usize = 50;
/// Pivots between full refactorizations of the basis inverse.
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone)]
pub struct Simplex {
    rows: usize,
    b: Vec<f64>,
    cost: Vec<f64>,
    /// Sparse structural columns as (row, value).
    cols: Vec<Vec<(usize, f64)>>,
    /// Basic variable per row; indices `>= cols.len()` encode slacks as
    /// `SLACK_BASE + row`.
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    x_b: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
}

const SLACK_BASE: usize = usize::MAX / 2;

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub objective: f64,
    pub x: Vec<f64>,
    /// Row duals (shadow prices), nonnegative at optimum.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

impl Simplex {
    pub fn new(b: Vec<f64>) -> Result<Self> {
        if let Some(v) = b.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "right-hand sides must be finite and nonnegative (got {v})"
            )));
        }
        let rows = b.len();
        let binv = (0..rows)
            .map(|i| {
                let mut r = vec![0.0; rows];
                r[i] = 1.0;
                r
            })
            .collect();
        Ok(Simplex {
            rows,
            x_b: b.clone(),
            b,
            cost: Vec::new(),
            cols: Vec::new(),
            basis: (0..rows).map(|i| SLACK_BASE + i).collect(),
            binv,
            pivots: 0,
            max_pivots: 50_000,
        })
    }

    pub fn with_max_pivots(mut self, n: usize) -> Self {
        self.max_pivots = n;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.cols.len()
    }

    /// Appends a structural column and returns its index.
    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> Result<usize> {
        if let Some(&(r, _)) = entries.iter().find(|(r, _)| *r >= self.rows) {
            return Err(Error::DimensionMismatch(format!("column touches row {r}")));
        }
        if !cost.is_finite() || entries.iter().any(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidArgument("column has a non-finite entry".into()));
        }
        self.cost.push(cost);
        self.cols.push(entries);
        Ok(self.cols.len() - 1)
    }

    fn var_cost(&self, v: usize) -> f64 {
        if v >= SLACK_BASE {
            0.0
        } else {
            self.cost[v]
        }
    }

    /// `B^{-1} a_v`.
    fn ftran(&self, v: usize) -> Vec<f64> {
        if v >= SLACK_BASE {
            let r = v - SLACK_BASE;
            return self.binv.iter().map(|row| row[r]).collect();
        }
        let col = &self.cols[v];
        self.binv
            .iter()
            .map(|row| col.iter().map(|&(r, a)| row[r] * a).sum())
            .collect()
    }

    fn duals(&self) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for (i, &v) in self.basis.iter().enumerate() {
            let c = self.var_cost(v);
            if c != 0.0 {
                for (yr, &bi) in y.iter_mut().zip(&self.binv[i]) {
                    *yr += c * bi;
                }
            }
        }
        y
    }

    fn reduced_cost(&self, v: usize, y: &[f64]) -> f64 {
        if v >= SLACK_BASE {
            -y[v - SLACK_BASE]
        } else {
            self.cost[v] - self.cols[v].iter().map(|&(r, a)| y[r] * a).sum::<f64>()
        }
    }

    /// Rebuilds `B^{-1}` and `x_B` by Gauss-Jordan elimination.
    fn refactor(&mut self) -> Result<()> {
        let m = self.rows;
        let mut mat = vec![vec![0.0; 2 * m]; m];
        for (j, &v) in self.basis.iter().enumerate() {
            if v >= SLACK_BASE {
                mat[v - SLACK_BASE][j] = 1.0;
            } else {
                for &(r, a) in &self.cols[v] {
                    mat[r][j] = a;
                }
            }
        }
        for (i, row) in mat.iter_mut().enumerate() {
            row[m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&a, &b| mat[a][c].abs().partial_cmp(&mat[b][c].abs()).expect("finite"))
                .expect("nonempty");
            if mat[p][c].abs() < 1e-12 {
                return Err(Error::SolverLimit("basis became singular".into()));
            }
            mat.swap(c, p);
            let piv = mat[c][c];
            for v in mat[c].iter_mut() {
                *v /= piv;
            }
            let pivot_row = mat[c].clone();
            for (r, row) in mat.iter_mut().enumerate() {
                if r != c && row[c] != 0.0 {
                    let f = row[c];
                    for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * pv;
                    }
                }
            }
        }
        // Row j of the inverse belongs to basis position j.
        self.binv = mat.into_iter().map(|row| row[m..].to_vec()).collect();
        self.x_b = self
            .binv
            .iter()
            .map(|row| row.iter().zip(&self.b).map(|(a, b)| a * b).sum::<f64>().max(0.0))
            .collect();
        Ok(())
    }

    pub fn solve(&mut self) -> Result<SimplexOutcome> {
        let mut degenerate = 0;
        let mut since_refactor = 0;
        loop {
            if self.pivots >= self.max_pivots {
                return Err(Error::SolverLimit(format!(
                    "simplex exceeded {} pivots",
                    self.max_pivots
                )));
            }
            let y = self.duals();
            let bland = degenerate >= DEGENERATE_STREAK;
            let in_basis = {
                let mut mark = vec![false; self.cols.len()];
                let mut slack = vec![false; self.rows];
                for &v in &self.basis {
                    if v >= SLACK_BASE {
                        slack[v - SLACK_BASE] = true;
                    } else {
                        mark[v] = true;
                    }
                }
                (mark, slack)
            };
            let candidates = (0..self.cols.len())
                .filter(|&v| !in_basis.0[v])
                .chain((0..self.rows).filter(|&r| !in_basis.1[r]).map(|r| SLACK_BASE + r));
            let mut entering = None;
            let mut best = OPTIMALITY_TOL;
            for v in candidates {
                let d = self.reduced_cost(v, &y);
                if d > best {
                    entering = Some(v);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(q) = entering else {
                return Ok(self.outcome(y));
            };

            let u = self.ftran(q);
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                if u[i] > PIVOT_TOL {
                    let ratio = self.x_b[i] / u[i];
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-12
                                || (ratio <= best_ratio + 1e-12 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = best_ratio.min(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(Error::InvalidArgument("linear program is unbounded".into()));
            };
            let step = self.x_b[r] / u[r];
            degenerate = if step <= 1e-12 { degenerate + 1 } else { 0 };

            for i in 0..self.rows {
                if i != r {
                    self.x_b[i] = (self.x_b[i] - step * u[i]).max(0.0);
                }
            }
            self.x_b[r] = step;
            let piv = u[r];
            for v in self.binv[r].iter_mut() {
                *v /= piv;
            }
            let pivot_row = self.binv[r].clone();
            for (i, row) in self.binv.iter_mut().enumerate() {
                if i != r && u[i] != 0.0 {
                    let f = u[i];
                    for (x, &pv) in row.iter_mut().zip(&pivot_row) {
                        *x -= f * pv;
                    }
                }
            }
            self.basis[r] = q;
            self.pivots += 1;
            since_refactor += 1;
            if since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
                since_refactor = 0;
            }
        }
    }

    fn outcome(&self, y: Vec<f64>) -> SimplexOutcome {
        let mut x = vec![0.0; self.cols.len()];
        for (i, &v) in self.basis.iter().enumerate() {
            if v < SLACK_BASE {
                x[v] = self.x_b[i];
            }
        }
        let objective = x.iter().zip(&self.cost).map(|(a, c)| a * c).sum();
        SimplexOutcome {
            objective,
            x,
            duals: y.into_iter().map(|v| v.max(0.0)).collect(),
            pivots: self.pivots,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_example() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut s = Simplex::new(vec![4.0, 12.0, 18.0]).unwrap();
        s.add_column(3.0, vec![(0, 1.0), (2, 3.0)]).unwrap();
        s.add_column(5.0, vec![(1, 2.0), (2, 2.0)]).unwrap();
        let out = s.solve().unwrap();
        assert!((out.objective - 36.0).abs() < 1e-9);
        assert!((out.x[0] - 2.0).abs() < 1e-9 && (out.x[1] - 6.0).abs() < 1e-9);
        // duals (0, 1.5, 1)
        assert!((out.duals[0]).abs() < 1e-9);
        assert!((out.duals[1] - 1.5).abs() < 1e-9);
        assert!((out.duals[2] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_rhs_is_degenerate_but_fine() {
        let mut s = Simplex::new(vec![0.0, 1.0]).unwrap();
        s.add_column(1.0, vec![(0, 1.0), (1, 1.0)]).unwrap();
        s.add_column(1.0, vec![(1, 1.0)]).unwrap();
        let out = s.solve().unwrap();
        assert!((out.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_is_reported() {
        let mut s = Simplex::new(vec![1.0]).unwrap();
        s.add_column(1.0, vec![(0, -1.0)]).unwrap();
        assert!(s.solve().is_err());
    }

    #[test]
    fn warm_start_after_adding_columns() {
        let mut s = Simplex::new(vec![1.0]).unwrap();
        s.add_column(1.0, vec![(0, 1.0)]).unwrap();
        let a = s.solve().unwrap().objective;
        s.add_column(2.0, vec![(0, 1.0)]).unwrap();
        let b = s.solve().unwrap().objective;
        assert!(b >= a);
        assert!((b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_rhs() {
        assert!(Simplex::new(vec![-1.0]).is_err());
    }

    #[test]
    fn refactor_keeps_solution() {
        // many small columns to force several refactorizations
        let n = 40;
        let mut s = Simplex::new(vec![1.0; n]).unwrap();
        for i in 0..n {
            for j in 0..n {
                let w = 1.0 + ((i * 7 + j * 13) % 17) as f64;
                s.add_column(w, vec![(i, 1.0), (j, 1.0)]).unwrap();
            }
        }
        let out = s.solve().unwrap();
        let mut used = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                let x = out.x[i * n + j];
                used[i] += x;
                used[j] += x;
            }
        }
        assert!(used.iter().all(|&u| u <= 1.0 + 1e-8));
        let dual_obj: f64 = out.duals.iter().sum();
        assert!((dual_obj - out.objective).abs() < 1e-6);
    }
}
