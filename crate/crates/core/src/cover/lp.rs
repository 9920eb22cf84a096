//! Dense simplex (Bland's rule) for the fractional cover problem, generic
//! over floats and exact rationals.
//!
//! The fractional cover `min Σ c_i x_i` s.t. every leaf is covered with
//! total weight `>= 1` is solved through its dual packing problem
//! `max Σ y_ℓ` s.t. `Σ_{ℓ ∈ B_i} y_ℓ <= c_i`, `y >= 0`, whose slack basis is
//! feasible from the start. An unbounded dual means an uncoverable leaf.

use std::ops::{Add, Div, Mul, Sub};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::brute::Menu;
use super::tree::ExactCost;
use super::{CoverError, CoverProblem};

pub trait LpScalar:
    Clone + PartialOrd + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn is_positive(&self) -> bool;
    fn is_negative(&self) -> bool;
}

/// Pivot tolerance for the float path (costs are normalized to max 1).
const FLOAT_TOL: f64 = 1e-12;

impl LpScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_positive(&self) -> bool {
        *self > FLOAT_TOL
    }
    fn is_negative(&self) -> bool {
        *self < -FLOAT_TOL
    }
}

impl LpScalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<T> {
    Optimal(T),
    Unbounded,
}

/// `max cᵀy` s.t. `A y <= b`, `y >= 0`, with `b >= 0`.
pub fn maximize<T: LpScalar>(a: &[Vec<T>], b: &[T], c: &[T]) -> LpOutcome<T> {
    let rows = a.len();
    let cols = c.len();
    let width = cols + rows + 1;
    let mut t: Vec<Vec<T>> = Vec::with_capacity(rows + 1);
    for (i, row) in a.iter().enumerate() {
        let mut r = row.clone();
        r.extend((0..rows).map(|j| if i == j { T::one() } else { T::zero() }));
        r.push(b[i].clone());
        t.push(r);
    }
    let mut obj: Vec<T> = c.iter().map(|v| T::zero() - v.clone()).collect();
    obj.extend((0..=rows).map(|_| T::zero()));
    t.push(obj);
    let mut basis: Vec<usize> = (cols..cols + rows).collect();
    loop {
        let Some(enter) = (0..width - 1).find(|&j| t[rows][j].is_negative()) else {
            return LpOutcome::Optimal(t[rows][width - 1].clone());
        };
        let mut leave: Option<(usize, T)> = None;
        for i in 0..rows {
            if !t[i][enter].is_positive() {
                continue;
            }
            let ratio = t[i][width - 1].clone() / t[i][enter].clone();
            let better = match &leave {
                None => true,
                Some((l, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*l]),
            };
            if better {
                leave = Some((i, ratio));
            }
        }
        let Some((r, _)) = leave else {
            return LpOutcome::Unbounded;
        };
        let pivot = t[r][enter].clone();
        for v in t[r].iter_mut() {
            *v = v.clone() / pivot.clone();
        }
        let pivot_row = t[r].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[enter].clone();
            if f.is_positive() || f.is_negative() {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v = v.clone() - f.clone() * p.clone();
                }
            }
        }
        basis[r] = enter;
    }
}

fn packing<T: LpScalar>(menu: &Menu, costs: Vec<T>) -> LpOutcome<T> {
    let a: Vec<Vec<T>> = menu
        .balls
        .iter()
        .map(|ball| {
            menu.leaves
                .iter()
                .map(|leaf| if leaf.starts_with(&ball.word) { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let c = vec![T::one(); menu.leaves.len()];
    maximize(&a, &costs, &c)
}

/// Largest ball menu the simplex fallback accepts.
pub const MAX_LP_BALLS: usize = 512;

/// `W^s_{N,ε}` by linear programming, in floats.
pub fn weighted_cover_cost_lp(p: &CoverProblem, s: f64) -> Result<f64, CoverError> {
    if p.target.is_empty() {
        return Ok(0.0);
    }
    let menu = Menu::new(p, MAX_LP_BALLS)?;
    let costs: Vec<f64> = menu.balls.iter().map(|b| b.cost(s)).collect();
    let scale = costs.iter().fold(0.0f64, |a, &b| a.max(b));
    if !(scale.is_finite()) {
        return Err(CoverError::NotANumber(s));
    }
    if scale == 0.0 {
        return match packing(&menu, costs) {
            LpOutcome::Optimal(v) => Ok(v),
            LpOutcome::Unbounded => Err(CoverError::Truncation(p.max_depth)),
        };
    }
    match packing(&menu, costs.iter().map(|c| c / scale).collect()) {
        LpOutcome::Optimal(v) => Ok(v * scale),
        LpOutcome::Unbounded => Err(CoverError::Truncation(p.max_depth)),
    }
}

/// `W^s_{N,ε}` by linear programming in exact rationals, with each ball cost
/// taken as the exact value of its double.
pub fn weighted_cover_cost_lp_exact(p: &CoverProblem, s: f64) -> Result<BigRational, CoverError> {
    if p.target.is_empty() {
        return Ok(<BigRational as Zero>::zero());
    }
    let menu = Menu::new(p, MAX_LP_BALLS)?;
    let costs: Vec<BigRational> = menu
        .balls
        .iter()
        .map(|b| ExactCost::from_f64(b.cost(s)).0.ok_or(CoverError::NotANumber(s)))
        .collect::<Result<_, _>>()?;
    match packing(&menu, costs) {
        LpOutcome::Optimal(v) => Ok(v),
        LpOutcome::Unbounded => Err(CoverError::Truncation(p.max_depth)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    fn q(x: i64) -> BigRational {
        BigRational::from_i64(x).unwrap()
    }

    #[test]
    fn textbook_lp() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let a = vec![vec![q(1), q(0)], vec![q(0), q(2)], vec![q(3), q(2)]];
        let b = vec![q(4), q(12), q(18)];
        let c = vec![q(3), q(5)];
        assert_eq!(maximize(&a, &b, &c), LpOutcome::Optimal(q(36)));
        let af: Vec<Vec<f64>> = vec![vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]];
        match maximize(&af, &[4.0, 12.0, 18.0], &[3.0, 5.0]) {
            LpOutcome::Optimal(v) => assert!((v - 36.0).abs() < 1e-12),
            LpOutcome::Unbounded => panic!(),
        }
    }

    #[test]
    fn unbounded_detected() {
        let a = vec![vec![q(1), q(0)]];
        assert_eq!(maximize(&a, &[q(1)], &[q(1), q(1)]), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the largest-coefficient rule.
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        let a = vec![
            vec![r(1, 4), r(-8, 1), r(-1, 1), r(9, 1)],
            vec![r(1, 2), r(-12, 1), r(-1, 2), r(3, 1)],
            vec![q(0), q(0), q(1), q(0)],
        ];
        let b = vec![q(0), q(0), q(1)];
        let c = vec![r(3, 4), r(-20, 1), r(1, 2), r(-6, 1)];
        assert_eq!(maximize(&a, &b, &c), LpOutcome::Optimal(r(5, 4)));
    }
}
