//! Value functions for a set of discrete prices.
//!
//! A [`ValueFunction`] maps the fraction `w` of an item's starting inventory
//! that has already been sold to a bid price: the opportunity cost of one more
//! unit. It is piecewise exponential over `m` segments whose lengths are the
//! booking limits `alpha`; the function reaches price `r[j]` exactly at the
//! segment border `L[j]`.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance for the booking-limit bisection.
pub const BISECTION_TOL: f64 = 1e-12;
/// Iteration cap for the booking-limit bisection.
pub const MAX_BISECTION_ITERS: usize = 200;
/// Fractions this close to a segment border are treated as the border.
pub const BORDER_SNAP: f64 = 1e-15;

/// Strictly increasing, strictly positive prices of one item.
///
/// The implicit zeroth price `r(0) = 0` is never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PriceSet(Vec<f64>);

impl PriceSet {
    pub fn new(prices: Vec<f64>) -> Result<Self> {
        if prices.is_empty() {
            return Err(Error::InvalidPriceSet("at least one price is required".into()));
        }
        for (j, &r) in prices.iter().enumerate() {
            if !r.is_finite() || r <= 0.0 {
                return Err(Error::InvalidPriceSet(format!(
                    "price {j} = {r} is not a positive finite number"
                )));
            }
        }
        for (j, pair) in prices.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidPriceSet(format!(
                    "prices must be strictly increasing; got {} then {} at position {}",
                    pair[0],
                    pair[1],
                    j + 1
                )));
            }
        }
        Ok(PriceSet(prices))
    }

    pub fn single(price: f64) -> Result<Self> {
        Self::new(vec![price])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.0
    }

    /// Price at zero-based index `j`.
    pub fn price(&self, j: usize) -> f64 {
        self.0[j]
    }

    /// Price at one-based level `j`, with level 0 meaning the implicit zero price.
    pub fn level(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.0[j - 1]
        }
    }

    pub fn lowest(&self) -> f64 {
        self.0[0]
    }

    pub fn highest(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    /// `r(j-1) / r(j)` for zero-based index `j`; 0 for the lowest price.
    pub fn step_ratio(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.0[j - 1] / self.0[j]
        }
    }
}

impl TryFrom<Vec<f64>> for PriceSet {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        PriceSet::new(v)
    }
}

impl From<PriceSet> for Vec<f64> {
    fn from(p: PriceSet) -> Self {
        p.0
    }
}

/// Sorts and deduplicates raw prices. Non-positive or non-finite entries are
/// still rejected.
pub fn canonicalize_prices(raw: &[f64]) -> Result<PriceSet> {
    let mut v = raw.to_vec();
    if v.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidPriceSet("non-finite price".into()));
    }
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup();
    PriceSet::new(v)
}

/// Left-hand side of the product equation in `gamma = exp(-alpha(1))`:
/// `gamma * prod_j ((1 - s_j) gamma + s_j)` with `s_j = r(j-1)/r(j)`.
fn gamma_product(prices: &PriceSet, gamma: f64) -> f64 {
    (1..prices.len()).fold(gamma, |acc, j| {
        let s = prices.step_ratio(j);
        acc * ((1.0 - s) * gamma + s)
    })
}

/// Booking limits `alpha(1..m)`: positive, summing to one, with
/// `(1 - exp(-alpha(j))) / (1 - r(j-1)/r(j))` equal across `j`.
pub fn solve_alphas(prices: &PriceSet, tol: f64) -> Result<Vec<f64>> {
    solve_alphas_bracketed(prices, tol, (1.0 / E, 1.0))
}

/// [`solve_alphas`] with an explicit bisection bracket for `exp(-alpha(1))`.
/// The bracket must lie inside `[1/e, 1]` and contain the root.
pub fn solve_alphas_bracketed(prices: &PriceSet, tol: f64, bracket: (f64, f64)) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::Domain {
            what: "tol",
            value: tol,
            domain: "(0, inf)",
        });
    }
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || lo < 1.0 / E - 1e-15 || hi > 1.0 {
        return Err(Error::InvalidArgument(format!(
            "bisection bracket ({lo}, {hi}) must be increasing and inside [1/e, 1]"
        )));
    }
    let target = 1.0 / E;
    let f_lo = gamma_product(prices, lo) - target;
    let f_hi = gamma_product(prices, hi) - target;
    if f_lo > 0.0 || f_hi < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bisection bracket ({lo}, {hi}) does not contain the root"
        )));
    }

    // Run to floating-point exhaustion; the loop is cheap and it keeps
    // sum(alpha) within a few ulps of one.
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gamma_product(prices, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gamma = 0.5 * (lo + hi);

    let alphas: Vec<f64> = (0..prices.len())
        .map(|j| {
            let s = prices.step_ratio(j);
            let g = (1.0 - s) * gamma + s;
            -g.ln()
        })
        .collect();

    let residual = alpha_residual(prices, &alphas);
    if residual >= tol {
        return Err(Error::SolverLimit(format!(
            "booking-limit residual {residual:e} did not reach tolerance {tol:e}"
        )));
    }
    Ok(alphas)
}

/// Largest violation of the booking-limit system: either the spread of the
/// per-segment ratios or the distance of `sum(alpha)` from one.
pub fn alpha_residual(prices: &PriceSet, alphas: &[f64]) -> f64 {
    let ratios: Vec<f64> = alphas
        .iter()
        .enumerate()
        .map(|(j, &a)| -(-a).exp_m1() / (1.0 - prices.step_ratio(j)))
        .collect();
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let sum: f64 = alphas.iter().sum();
    (max - min).max((sum - 1.0).abs())
}

/// Single-item booking limits `sigma(1..m)`, in closed form.
pub fn solve_sigmas(prices: &PriceSet) -> Vec<f64> {
    let gaps: Vec<f64> = (0..prices.len()).map(|j| 1.0 - prices.step_ratio(j)).collect();
    let total: f64 = gaps.iter().sum();
    gaps.into_iter().map(|g| g / total).collect()
}

/// Competitive ratio `F` of the two-price set `{1, xi}` in closed form.
pub fn two_price_f(xi: f64) -> Result<f64> {
    if !(xi > 1.0) || !xi.is_finite() {
        return Err(Error::Domain {
            what: "xi",
            value: xi,
            domain: "(1, inf)",
        });
    }
    // 1 - (sqrt(1 + 4 xi (xi-1)/e) - 1) / (2 (xi - 1)), rationalized so the
    // xi -> 1 limit does not cancel.
    let root = (1.0 + 4.0 * xi * (xi - 1.0) / E).sqrt();
    Ok(1.0 - 2.0 * xi / (E * (1.0 + root)))
}

/// The value function of one price set, with its booking limits and ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunction {
    prices: PriceSet,
    alphas: Vec<f64>,
    borders: Vec<f64>,
    sigmas: Vec<f64>,
    f: f64,
    g: f64,
}

impl ValueFunction {
    pub fn new(prices: PriceSet) -> Result<Self> {
        let alphas = solve_alphas(&prices, BISECTION_TOL)?;
        let sigmas = solve_sigmas(&prices);
        let mut borders = Vec::with_capacity(alphas.len() + 1);
        borders.push(0.0);
        let mut acc = 0.0;
        for a in &alphas {
            acc += a;
            borders.push(acc);
        }
        *borders.last_mut().expect("m >= 1") = 1.0;
        let f = -(-alphas[0]).exp_m1();
        let g = sigmas[0];
        Ok(ValueFunction {
            prices,
            alphas,
            borders,
            sigmas,
            f,
            g,
        })
    }

    pub fn prices(&self) -> &PriceSet {
        &self.prices
    }

    pub fn m(&self) -> usize {
        self.prices.len()
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// Segment borders `L(0) = 0, ..., L(m) = 1`.
    pub fn borders(&self) -> &[f64] {
        &self.borders
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    /// `F = 1 - exp(-alpha(1))`.
    pub fn ratio_f(&self) -> f64 {
        self.f
    }

    /// `G = sigma(1)`.
    pub fn ratio_g(&self) -> f64 {
        self.g
    }

    fn check_domain(w: f64) -> Result<()> {
        if (0.0..=1.0).contains(&w) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "w",
                value: w,
                domain: "[0, 1]",
            })
        }
    }

    /// One-based segment index of `w` (half-open segments, last one closed),
    /// plus `w` snapped onto a border when within [`BORDER_SNAP`].
    fn segment(&self, w: f64) -> (usize, f64) {
        let m = self.m();
        let mut w = w;
        for &b in &self.borders {
            if (w - b).abs() <= BORDER_SNAP {
                w = b;
            }
        }
        let seg = (1..=m).find(|&j| w < self.borders[j]).unwrap_or(m);
        (seg, w)
    }

    /// Bid price at sold fraction `w`.
    pub fn eval(&self, w: f64) -> Result<f64> {
        Self::check_domain(w)?;
        Ok(self.eval_unchecked(w))
    }

    pub(crate) fn eval_unchecked(&self, w: f64) -> f64 {
        let (seg, w) = self.segment(w.clamp(0.0, 1.0));
        let lo = self.prices.level(seg - 1);
        let hi = self.prices.level(seg);
        lo + (hi - lo) * (w - self.borders[seg - 1]).exp_m1() / self.alphas[seg - 1].exp_m1()
    }

    /// Right derivative of the value function at `w`.
    pub fn derivative(&self, w: f64) -> Result<f64> {
        Self::check_domain(w)?;
        let (seg, w) = self.segment(w);
        let lo = self.prices.level(seg - 1);
        let hi = self.prices.level(seg);
        Ok((hi - lo) * (w - self.borders[seg - 1]).exp() / self.alphas[seg - 1].exp_m1())
    }

    /// Samples the function on `grid + 1` evenly spaced points of `[0, 1]`.
    pub fn sample(&self, grid: usize) -> Vec<(f64, f64)> {
        let grid = grid.max(1);
        (0..=grid)
            .map(|i| {
                let w = i as f64 / grid as f64;
                (w, self.eval_unchecked(w))
            })
            .collect()
    }
}

/// Convenience alias for [`ValueFunction::new`].
pub fn build_value_function(prices: PriceSet) -> Result<ValueFunction> {
    ValueFunction::new(prices)
}

/// Principal branch of the Lambert W function for `x >= 0`, by Halley
/// iteration seeded at `ln(1 + x)`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "[0, inf)",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = x.ln_1p();
    for _ in 0..100 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 1e-15 * (1.0 + w.abs()) {
            return Ok(w);
        }
    }
    Err(Error::SolverLimit(format!("Lambert W did not converge at x = {x}")))
}

/// Booking limit for a continuum of prices by bisection on
/// `1 - exp(-a) = (1 - a) / spread`, where `spread = ln(r_max / r_min)`.
pub fn continuum_alpha_bisection(spread: f64) -> Result<f64> {
    if !(spread > 0.0) {
        return Err(Error::Domain {
            what: "spread",
            value: spread,
            domain: "(0, inf)",
        });
    }
    let h = |a: f64| -(-a).exp_m1() - (1.0 - a) / spread;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Value function when any price in `[r_min, r_max]` may be charged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuumValueFunction {
    pub r_min: f64,
    pub r_max: f64,
    pub alpha: f64,
    pub f: f64,
    /// `ln(r_max / r_min)`.
    pub spread: f64,
}

impl ContinuumValueFunction {
    pub fn new(r_min: f64, r_max: f64) -> Result<Self> {
        if !(r_min > 0.0) || !(r_max > r_min) || !r_max.is_finite() {
            return Err(Error::InvalidRange { r_min, r_max });
        }
        let spread = (r_max / r_min).ln();
        // alpha + spread - 1 = W(spread * e^(spread - 1))
        let arg = spread * (spread - 1.0).exp();
        let alpha = if arg.is_finite() {
            lambert_w0(arg)? - spread + 1.0
        } else {
            continuum_alpha_bisection(spread)?
        };
        let f = -(-alpha).exp_m1();
        Ok(ContinuumValueFunction {
            r_min,
            r_max,
            alpha,
            f,
            spread,
        })
    }

    pub fn eval(&self, w: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::Domain {
                what: "w",
                value: w,
                domain: "[0, 1]",
            });
        }
        Ok(if w <= self.alpha {
            self.r_min * w.exp_m1() / self.alpha.exp_m1()
        } else {
            let t = 1.0 - self.alpha;
            self.r_min.powf((1.0 - w) / t) * self.r_max.powf((w - self.alpha) / t)
        })
    }
}

pub fn build_continuum(r_min: f64, r_max: f64) -> Result<ContinuumValueFunction> {
    ContinuumValueFunction::new(r_min, r_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(v: &[f64]) -> PriceSet {
        PriceSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_bad_price_sets() {
        assert!(PriceSet::new(vec![]).is_err());
        assert!(PriceSet::new(vec![0.0, 1.0]).is_err());
        assert!(PriceSet::new(vec![-1.0]).is_err());
        assert!(PriceSet::new(vec![2.0, 1.0]).is_err());
        assert!(PriceSet::new(vec![1.0, 1.0]).is_err());
        assert!(PriceSet::new(vec![f64::NAN]).is_err());
        assert!(serde_json::from_str::<PriceSet>("[3.0, 1.0]").is_err());
    }

    #[test]
    fn canonicalize_sorts_and_dedups() {
        let p = canonicalize_prices(&[450.0, 150.0, 450.0]).unwrap();
        assert_eq!(p.prices(), &[150.0, 450.0]);
        assert!(canonicalize_prices(&[0.0, 2.0]).is_err());
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        assert!(solve_alphas(&ps(&[1.0, 2.0]), 0.0).is_err());
        assert!(solve_alphas(&ps(&[1.0, 2.0]), -1.0).is_err());
    }

    #[test]
    fn single_price_books_everything() {
        let vf = ValueFunction::new(ps(&[42.0])).unwrap();
        assert_eq!(vf.alphas(), &[1.0]);
        assert!((vf.ratio_f() - (1.0 - 1.0 / E)).abs() < 1e-15);
        assert_eq!(vf.ratio_g(), 1.0);
        for i in 0..=10 {
            let w = i as f64 / 10.0;
            let expect = 42.0 * w.exp_m1() / (E - 1.0);
            assert!((vf.eval(w).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn two_price_booking_limits() {
        // mpmath reference, 30 digits
        let vf = ValueFunction::new(ps(&[150.0, 450.0])).unwrap();
        assert!((vf.alphas()[0] - 0.627_761_861_332_670_1).abs() < 1e-12);
        assert!((vf.alphas()[1] - 0.372_238_138_667_329_9).abs() < 1e-12);
        assert!((vf.ratio_f() - 0.466_214_849_746_970_85).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_bisection_at_xi_three() {
        let f = two_price_f(3.0).unwrap();
        assert!((f - 0.466_214_849_746_970_85).abs() < 1e-14);
        let vf = ValueFunction::new(ps(&[1.0, 3.0])).unwrap();
        assert!((vf.ratio_f() - f).abs() < 1e-9);
    }

    #[test]
    fn two_price_f_domain_and_limits() {
        assert!(two_price_f(1.0).is_err());
        assert!(two_price_f(0.5).is_err());
        assert!((two_price_f(1.0 + 1e-12).unwrap() - (1.0 - 1.0 / E)).abs() < 1e-9);
        assert!((two_price_f(1e9).unwrap() - (1.0 - E.powf(-0.5))).abs() < 1e-6);
    }

    #[test]
    fn sigma_closed_forms() {
        assert_eq!(solve_sigmas(&ps(&[7.0])), vec![1.0]);
        let s = solve_sigmas(&ps(&[150.0, 450.0]));
        assert!((s[0] - 0.6).abs() < 1e-15 && (s[1] - 0.4).abs() < 1e-15);
        let s = solve_sigmas(&ps(&[1.0, 2.0, 4.0]));
        assert!((s[0] - 0.5).abs() < 1e-15);
        assert!((s[1] - 0.25).abs() < 1e-15 && (s[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn phi_values_on_two_price_set() {
        let vf = ValueFunction::new(ps(&[150.0, 450.0])).unwrap();
        assert_eq!(vf.eval(0.0).unwrap(), 0.0);
        assert!((vf.eval(vf.borders()[1]).unwrap() - 150.0).abs() < 1e-10);
        assert!((vf.eval(1.0).unwrap() - 450.0).abs() < 1e-10);
        // mpmath: 150 (e^0.3 - 1)/(e^alpha1 - 1)
        assert!((vf.eval(0.3).unwrap() - 60.084_777_309_428_4).abs() < 1e-9);
        assert!(vf.eval(-1e-9).is_err());
        assert!(vf.eval(1.0 + 1e-9).is_err());
    }

    #[test]
    fn phi_is_increasing_and_convex_per_segment() {
        let vf = ValueFunction::new(ps(&[150.0, 450.0])).unwrap();
        let pts = vf.sample(100);
        for w in pts.windows(2) {
            assert!(w[1].1 > w[0].1);
        }
        let border = vf.borders()[1];
        for w in pts.windows(3) {
            let same_segment = (w[0].0 >= border) == (w[2].0 >= border);
            if same_segment {
                let second = w[2].1 - 2.0 * w[1].1 + w[0].1;
                assert!(second > -1e-9, "not convex near {}", w[1].0);
            }
        }
    }

    #[test]
    fn three_price_alphas_match_reference() {
        let vf = ValueFunction::new(ps(&[1.0, 2.0, 4.0])).unwrap();
        let want = [0.535_413_437_641_142_3, 0.232_293_281_179_428_9, 0.232_293_281_179_428_9];
        for (a, b) in vf.alphas().iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lambert_w_reference_values() {
        assert!((lambert_w0(1.0).unwrap() - 0.567_143_290_409_784).abs() < 1e-14);
        assert!((lambert_w0(E).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!(lambert_w0(-0.1).is_err());
        let w = lambert_w0(1e6).unwrap();
        assert!((w * w.exp() - 1e6).abs() / 1e6 < 1e-13);
    }

    #[test]
    fn continuum_unit_spread() {
        // ln(r_max / r_min) = 1 gives alpha = W(1)
        let c = ContinuumValueFunction::new(1.0, E).unwrap();
        assert!((c.alpha - 0.567_143_290_409_784).abs() < 1e-12);
        assert!((c.alpha - continuum_alpha_bisection(1.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn continuum_routes_agree_and_shape_holds() {
        for &(lo, hi) in &[(1.0, 1.001), (1.0, 2.0), (10.0, 35.0), (1.0, 100.0), (3.0, 1e4)] {
            let c = ContinuumValueFunction::new(lo, hi).unwrap();
            let b = continuum_alpha_bisection(c.spread).unwrap();
            assert!((c.alpha - b).abs() < 1e-9, "{lo} {hi}: {} vs {b}", c.alpha);
            assert!((-(-c.alpha).exp_m1() - (1.0 - c.alpha) / c.spread).abs() < 1e-10);
            assert_eq!(c.eval(0.0).unwrap(), 0.0);
            assert!((c.eval(c.alpha).unwrap() - lo).abs() < 1e-9 * hi);
            assert!((c.eval(1.0).unwrap() - hi).abs() < 1e-9 * hi);
            // one-sided difference quotients at alpha agree
            let h = 1e-6;
            let left = (c.eval(c.alpha).unwrap() - c.eval(c.alpha - h).unwrap()) / h;
            let right = (c.eval(c.alpha + h).unwrap() - c.eval(c.alpha).unwrap()) / h;
            assert!((left - right).abs() / left < 1e-4);
        }
    }

    #[test]
    fn continuum_tends_to_single_price_limit() {
        let c = ContinuumValueFunction::new(1.0, 1.0 + 1e-9).unwrap();
        assert!((c.alpha - 1.0).abs() < 1e-6);
        assert!((c.f - (1.0 - 1.0 / E)).abs() < 1e-6);
        assert!(ContinuumValueFunction::new(2.0, 2.0).is_err());
        assert!(ContinuumValueFunction::new(3.0, 2.0).is_err());
        assert!(ContinuumValueFunction::new(0.0, 2.0).is_err());
    }

    #[test]
    fn bracket_validation() {
        let p = ps(&[1.0, 3.0]);
        assert!(solve_alphas_bracketed(&p, 1e-12, (0.9, 0.95)).is_err());
        assert!(solve_alphas_bracketed(&p, 1e-12, (0.5, 0.4)).is_err());
        let a = solve_alphas_bracketed(&p, 1e-12, (0.5, 0.6)).unwrap();
        let b = solve_alphas(&p, 1e-12).unwrap();
        assert!((a[0] - b[0]).abs() < 2e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let vf = ValueFunction::new(ps(&[1.0, 2.5, 4.0])).unwrap();
        for &w in &[0.1, 0.4, 0.7, 0.95] {
            let h = 1e-7;
            let fd = (vf.eval(w + h).unwrap() - vf.eval(w - h).unwrap()) / (2.0 * h);
            assert!((vf.derivative(w).unwrap() - fd).abs() < 1e-5);
        }
    }
}
