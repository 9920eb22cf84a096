//! Exhaustive cover enumeration over the finite ball menu, for tiny
//! instances. Independent of the tree engines: it lists allowed words
//! directly and tests every subset of the menu for coverage.

use num_rational::BigRational;
use num_traits::Zero;

use super::tree::ExactCost;
use super::{CoverError, CoverProblem};
use crate::systems::{Symbol, System};

/// Largest ball menu accepted by the enumeration.
pub const MAX_MENU: usize = 16;

/// One admissible ball of the menu.
#[derive(Debug, Clone, PartialEq)]
pub struct MenuBall {
    pub word: Vec<Symbol>,
    pub order: usize,
    /// `φ`-part of its cost.
    pub value: f64,
}

impl MenuBall {
    pub fn cost(&self, s: f64) -> f64 {
        (-(self.order as f64) * s + self.value).exp()
    }
}

/// The menu of admissible balls meeting the target, plus the depth-`D_max`
/// words (leaves) meeting the target. Balls at depth at most `D_max` are
/// unions of leaves, so coverage is decided leaf by leaf.
#[derive(Debug, Clone)]
pub struct Menu {
    pub balls: Vec<MenuBall>,
    pub leaves: Vec<Vec<Symbol>>,
}

fn all_words(p: &CoverProblem, len: usize) -> Vec<Vec<Symbol>> {
    match &p.system {
        System::Shift(s) => s.words(len),
        System::Circle(c) => {
            let mut out = vec![Vec::new()];
            for _ in 0..len {
                out = out
                    .into_iter()
                    .flat_map(|w: Vec<Symbol>| {
                        (0..c.degree() as Symbol).map(move |a| {
                            let mut x = w.clone();
                            x.push(a);
                            x
                        })
                    })
                    .collect();
            }
            out
        }
    }
}

impl Menu {
    pub fn new(p: &CoverProblem, max_balls: usize) -> Result<Self, CoverError> {
        let mut balls = Vec::new();
        for d in 0..=p.max_depth {
            let Some(n) = p.order_at_depth(d) else { continue };
            for w in all_words(p, d) {
                if p.target.meets(&w) {
                    if balls.len() == max_balls {
                        return Err(CoverError::TooLarge(format!("more than {max_balls} balls")));
                    }
                    let value = p.ball_value(&w, n)?;
                    balls.push(MenuBall { word: w, order: n, value });
                }
            }
        }
        let leaves = all_words(p, p.max_depth)
            .into_iter()
            .filter(|w| p.target.meets(w))
            .collect();
        Ok(Self { balls, leaves })
    }

    /// For each leaf, the bitmask of menu balls containing it.
    fn leaf_masks(&self) -> Vec<u32> {
        let mut masks: Vec<u32> = self
            .leaves
            .iter()
            .map(|leaf| {
                self.balls
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| leaf.starts_with(&b.word))
                    .fold(0u32, |m, (i, _)| m | (1 << i))
            })
            .collect();
        masks.sort_unstable();
        masks.dedup();
        masks
    }

    /// Subsets of the menu that cover every leaf.
    pub fn covers(&self) -> impl Iterator<Item = u32> + '_ {
        let masks = self.leaf_masks();
        let k = self.balls.len();
        (0u32..(1u32 << k)).filter(move |&sub| masks.iter().all(|m| m & sub != 0))
    }
}

/// Minimum float cost over all covers, each summed in menu order.
pub fn brute_force_cover_cost(p: &CoverProblem, s: f64) -> Result<f64, CoverError> {
    if p.target.is_empty() {
        return Ok(0.0);
    }
    let menu = Menu::new(p, MAX_MENU)?;
    let costs: Vec<f64> = menu.balls.iter().map(|b| b.cost(s)).collect();
    menu.covers()
        .map(|sub| {
            (0..costs.len())
                .filter(|i| sub >> i & 1 == 1)
                .map(|i| costs[i])
                .sum::<f64>()
        })
        .min_by(f64::total_cmp)
        .ok_or(CoverError::Truncation(p.max_depth))
}

/// Minimum exact cost over all covers, each ball cost taken as the exact
/// value of its double.
pub fn brute_force_cover_cost_exact(p: &CoverProblem, s: f64) -> Result<BigRational, CoverError> {
    if p.target.is_empty() {
        return Ok(BigRational::zero());
    }
    let menu = Menu::new(p, MAX_MENU)?;
    let costs: Vec<BigRational> = menu
        .balls
        .iter()
        .map(|b| ExactCost::from_f64(b.cost(s)).0.ok_or(CoverError::NotANumber(s)))
        .collect::<Result<_, _>>()?;
    menu.covers()
        .map(|sub| {
            (0..costs.len())
                .filter(|i| sub >> i & 1 == 1)
                .fold(BigRational::zero(), |acc, i| acc + &costs[i])
        })
        .min()
        .ok_or(CoverError::Truncation(p.max_depth))
}
