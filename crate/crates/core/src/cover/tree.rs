//! Explicit level-ordered cylinder trees carrying the admissible ball menu,
//! and the bottom-up cover recursion over them.

use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use rayon::prelude::*;

use super::{CoverError, CoverProblem};
use crate::systems::{Symbol, System};

/// Trees larger than this are refused; use the compressed engine instead.
pub const MAX_TREE_NODES: usize = 1 << 22;

const PAR_THRESHOLD: usize = 1 << 12;

/// One depth of the tree. Children of node `i` occupy
/// `child_start[i]..child_start[i + 1]` in the next level.
#[derive(Debug, Clone, Default)]
pub struct Level {
    pub symbol: Vec<Symbol>,
    pub parent: Vec<u32>,
    pub child_start: Vec<u32>,
    /// Order of the balls at this depth, if any.
    pub order: Option<usize>,
    /// Ball log-values `φ`-part (sup or center), one per node when `order` is set.
    pub value: Vec<f64>,
}

impl Level {
    pub fn len(&self) -> usize {
        self.symbol.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbol.is_empty()
    }

    pub fn children(&self, i: usize) -> std::ops::Range<usize> {
        self.child_start[i] as usize..self.child_start[i + 1] as usize
    }
}

#[derive(Debug, Clone)]
pub struct BallTree {
    pub levels: Vec<Level>,
    /// True when the target is empty: the zero cover suffices.
    pub empty: bool,
}

impl BallTree {
    /// Builds the tree of cylinders meeting the problem's target, down to
    /// `max_depth`. `keep` prunes further nodes (used for measure supports).
    pub fn build(
        p: &CoverProblem,
        keep: Option<&(dyn Fn(&[Symbol]) -> bool + Sync)>,
        whole_space: bool,
    ) -> Result<Self, CoverError> {
        let alphabet = p.system.alphabet_size();
        let shift = match &p.system {
            System::Shift(s) => Some(s),
            System::Circle(_) => None,
        };
        let meets = |w: &[Symbol]| -> bool {
            (whole_space || p.target.meets(w)) && keep.is_none_or(|k| k(w))
        };
        let mut levels = Vec::with_capacity(p.max_depth + 1);
        levels.push(Level {
            symbol: vec![0],
            parent: vec![0],
            ..Level::default()
        });
        let empty = !meets(&[]);
        let mut total = 1usize;
        let mut words: Vec<Vec<Symbol>> = vec![Vec::new()];
        for d in 0..=p.max_depth {
            let order = p.order_at_depth(d);
            if let Some(n) = order {
                let values: Result<Vec<f64>, CoverError> = words
                    .par_iter()
                    .map(|w| p.ball_value(w, n))
                    .collect();
                levels[d].value = values?;
            }
            levels[d].order = order;
            if d == p.max_depth || empty {
                levels[d].child_start = vec![0; words.len() + 1];
                break;
            }
            let mut next = Level::default();
            let mut next_words = Vec::new();
            let mut starts = Vec::with_capacity(words.len() + 1);
            for (i, w) in words.iter().enumerate() {
                starts.push(next.symbol.len() as u32);
                let last = w.last().copied();
                for b in 0..alphabet as Symbol {
                    if let (Some(s), Some(a)) = (shift, last) {
                        if !s.allowed(a, b) {
                            continue;
                        }
                    }
                    let mut c = w.clone();
                    c.push(b);
                    if !meets(&c) {
                        continue;
                    }
                    next.symbol.push(b);
                    next.parent.push(i as u32);
                    next_words.push(c);
                }
            }
            starts.push(next.symbol.len() as u32);
            levels[d].child_start = starts;
            total += next.symbol.len();
            if total > MAX_TREE_NODES {
                return Err(CoverError::TooLarge(format!(
                    "explicit tree exceeds {MAX_TREE_NODES} nodes"
                )));
            }
            levels.push(next);
            words = next_words;
        }
        Ok(Self { levels, empty })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Level::len).sum()
    }

    /// Word of node `i` at depth `d`.
    pub fn word(&self, d: usize, mut i: usize) -> Vec<Symbol> {
        let mut w = vec![0; d];
        for k in (1..=d).rev() {
            w[k - 1] = self.levels[k].symbol[i];
            i = self.levels[k].parent[i] as usize;
        }
        w
    }

    /// `e^{-ns + value}` for the ball at node `i` of depth `d`.
    pub fn ball_cost(&self, d: usize, i: usize, s: f64) -> Option<f64> {
        let l = &self.levels[d];
        l.order.map(|n| (-(n as f64) * s + l.value[i]).exp())
    }

    /// Bottom-up cover recursion truncated at `depth` (≤ tree depth).
    /// Returns the per-level node costs.
    pub fn solve<T: CostValue>(
        &self,
        depth: usize,
        own: impl Fn(usize, usize) -> Option<T> + Sync,
    ) -> Vec<Vec<T>> {
        let mut costs: Vec<Vec<T>> = vec![Vec::new(); depth + 1];
        for d in (0..=depth).rev() {
            let level = &self.levels[d];
            let below = if d < depth { Some(&costs[d + 1]) } else { None };
            let node = |i: usize| -> T {
                let own = own(d, i);
                let children = below.map(|c| {
                    level
                        .children(i)
                        .fold(T::zero(), |acc, j| acc.add(&c[j]))
                });
                match (own, children) {
                    (Some(o), Some(c)) => {
                        // ties go to the single ball
                        if c.less_than(&o) {
                            c
                        } else {
                            o
                        }
                    }
                    (Some(o), None) => o,
                    (None, Some(c)) => c,
                    (None, None) => T::infinity(),
                }
            };
            costs[d] = if level.len() >= PAR_THRESHOLD {
                (0..level.len()).into_par_iter().map(node).collect()
            } else {
                (0..level.len()).map(node).collect()
            };
        }
        costs
    }

    /// Float cover cost at `s`, truncated at `depth`.
    pub fn cost(&self, s: f64, depth: usize) -> f64 {
        if self.empty {
            return 0.0;
        }
        self.solve(depth, |d, i| self.ball_cost(d, i, s))[0][0]
    }

    /// Exact rational evaluation of the same recursion, with each ball cost
    /// taken as the exact value of its double. `None` is `+∞`.
    pub fn cost_exact(&self, s: f64) -> Option<BigRational> {
        if self.empty {
            return Some(BigRational::zero());
        }
        let r = self.solve(self.depth(), |d, i| {
            self.ball_cost(d, i, s).map(ExactCost::from_f64)
        });
        r[0][0].0.clone()
    }

    /// Selected balls `(depth, node)` of an optimal cover at `s`.
    pub fn optimal_cover(&self, s: f64) -> Vec<(usize, usize)> {
        let depth = self.depth();
        if self.empty {
            return Vec::new();
        }
        let costs = self.solve(depth, |d, i| self.ball_cost(d, i, s));
        let mut out = Vec::new();
        let mut stack = vec![(0usize, 0usize)];
        while let Some((d, i)) = stack.pop() {
            let own = self.ball_cost(d, i, s);
            let take = match own {
                Some(o) => d == depth || !costs[d][i].less_than(&o),
                None => false,
            };
            if take {
                out.push((d, i));
            } else if d < depth {
                stack.extend(self.levels[d].children(i).rev().map(|j| (d + 1, j)));
            }
        }
        out.sort();
        out
    }
}

/// Cost arithmetic for the cover recursion (floats or exact rationals).
pub trait CostValue: Clone + Send + Sync {
    fn zero() -> Self;
    fn infinity() -> Self;
    fn add(&self, other: &Self) -> Self;
    fn less_than(&self, other: &Self) -> bool;
}

impl CostValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn infinity() -> Self {
        f64::INFINITY
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn less_than(&self, other: &Self) -> bool {
        self < other
    }
}

/// Nonnegative rational or `+∞` (`None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCost(pub Option<BigRational>);

impl ExactCost {
    pub fn from_f64(x: f64) -> Self {
        if x.is_infinite() {
            ExactCost(None)
        } else {
            ExactCost(Some(BigRational::from_f64(x).expect("finite cost")))
        }
    }
}

impl CostValue for ExactCost {
    fn zero() -> Self {
        ExactCost(Some(BigRational::zero()))
    }
    fn infinity() -> Self {
        ExactCost(None)
    }
    fn add(&self, other: &Self) -> Self {
        match (&self.0, &other.0) {
            (Some(a), Some(b)) => ExactCost(Some(a + b)),
            _ => ExactCost(None),
        }
    }
    fn less_than(&self, other: &Self) -> bool {
        match (&self.0, &other.0) {
            (Some(a), Some(b)) => a < b,
            (Some(_), None) => true,
            _ => false,
        }
    }
}
