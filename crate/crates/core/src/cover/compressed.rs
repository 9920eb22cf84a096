//! Cover recursion for additive potentials on a whole subshift, with nodes
//! merged by a sliding window of their last symbols.
//!
//! Every ball below a node of depth `d` has order at least
//! `k0(d) = max(N, min{n : L(n) >= d})`, so the Birkhoff prefix over the
//! first `f(d) = min(k0(d), d)` symbols factors out of the whole subtree.
//! The remaining cost depends only on the symbols at positions
//! `start(d)..d` with `start(d) = min(f(d), d - 1)`, which always include
//! the last symbol for the transition rule.

use super::{CoverError, CoverProblem};
use crate::systems::System;

/// Largest number of window states held for a single depth.
pub const MAX_LEVEL_STATES: usize = 1 << 22;
/// Largest number of window states across all depths.
pub const MAX_TOTAL_STATES: usize = 1 << 24;

#[derive(Debug, Clone)]
struct DepthPlan {
    /// Window length `d - start(d)`.
    width: usize,
    /// Order and `Σ φ(w_i)` for `f(d) <= i < n`, per window state.
    own: Option<(usize, Vec<f64>)>,
    /// Index inside the child's extended window whose symbol multiplies the
    /// child cost (`f(d+1) = f(d) + 1`), counted from the oldest symbol.
    carry: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CompressedPlan {
    alphabet: usize,
    allowed: Vec<Vec<bool>>,
    g: Vec<f64>,
    depths: Vec<DepthPlan>,
}

impl CompressedPlan {
    pub fn applicable(p: &CoverProblem) -> bool {
        matches!(p.system, System::Shift(_))
            && p.potential.additive_values().is_some()
            && p.target.is_whole()
    }

    pub fn new(p: &CoverProblem) -> Result<Self, CoverError> {
        let System::Shift(sys) = &p.system else {
            return Err(CoverError::Unsupported("compressed engine needs a shift".into()));
        };
        let phi = p
            .potential
            .additive_values()
            .ok_or_else(|| CoverError::Unsupported("compressed engine needs an additive potential".into()))?;
        if !p.target.is_whole() {
            return Err(CoverError::Unsupported("compressed engine needs the whole subshift".into()));
        }
        let m = sys.alphabet_size();
        let big_d = p.max_depth;
        let k0 = |d: usize| -> usize {
            let mut n = 1;
            while sys.cylinder_length(n, p.epsilon) < d {
                n += 1;
            }
            n.max(p.min_order)
        };
        let f: Vec<usize> = (0..=big_d + 1).map(|d| k0(d).min(d)).collect();
        let start = |d: usize| if d == 0 { 0 } else { f[d].min(d - 1) };
        let mut total = 0usize;
        let mut depths = Vec::with_capacity(big_d + 1);
        for d in 0..=big_d {
            let width = d - start(d);
            let size = m.checked_pow(width as u32).filter(|&s| s <= MAX_LEVEL_STATES).ok_or_else(|| {
                CoverError::TooLarge(format!("window of {width} symbols at depth {d}"))
            })?;
            total += size;
            if total > MAX_TOTAL_STATES {
                return Err(CoverError::TooLarge("compressed state space".into()));
            }
            let own = p.order_at_depth(d).map(|n| {
                // window position of absolute index i is i - start(d)
                let lo = f[d] - start(d);
                let hi = n - start(d);
                (n, window_sums(m, width, lo, hi, &phi))
            });
            let carry = (d < big_d && f[d + 1] > f[d]).then(|| f[d] - start(d));
            depths.push(DepthPlan { width, own, carry });
        }
        Ok(Self {
            alphabet: m,
            allowed: sys.transitions().to_vec(),
            g: phi.iter().map(|v| v.exp()).collect(),
            depths,
        })
    }

    pub fn max_depth(&self) -> usize {
        self.depths.len() - 1
    }

    pub fn state_count(&self) -> usize {
        self.depths.iter().map(|d| self.alphabet.pow(d.width as u32)).sum()
    }

    /// Cover cost at `s` with the recursion truncated at `depth`.
    pub fn cost(&self, s: f64, depth: usize) -> f64 {
        let m = self.alphabet;
        let mut below: Vec<f64> = Vec::new();
        for d in (0..=depth).rev() {
            let plan = &self.depths[d];
            let size = m.pow(plan.width as u32);
            let mut cur = vec![0.0; size];
            let child_mod = (d < depth).then(|| m.pow(self.depths[d + 1].width as u32));
            for (code, slot) in cur.iter_mut().enumerate() {
                let own = plan
                    .own
                    .as_ref()
                    .map(|(n, sums)| (-(*n as f64) * s + sums[code]).exp());
                let children = child_mod.map(|modulus| {
                    let last = (plan.width > 0).then(|| code % m);
                    let mut total = 0.0;
                    for a in 0..m {
                        if let Some(l) = last {
                            if !self.allowed[l][a] {
                                continue;
                            }
                        }
                        let full = code * m + a;
                        let mult = match plan.carry {
                            Some(r) => self.g[digit(full, plan.width + 1, r, m)],
                            None => 1.0,
                        };
                        total += mult * below[full % modulus];
                    }
                    total
                });
                *slot = match (own, children) {
                    (Some(o), Some(c)) => {
                        if c < o {
                            c
                        } else {
                            o
                        }
                    }
                    (Some(o), None) => o,
                    (None, Some(c)) => c,
                    (None, None) => f64::INFINITY,
                };
            }
            below = cur;
        }
        below[0]
    }
}

/// Symbol at index `r` (0 = oldest) of a `width`-symbol window code.
#[inline]
fn digit(code: usize, width: usize, r: usize, m: usize) -> usize {
    (code / m.pow((width - 1 - r) as u32)) % m
}

/// `Σ_{lo <= r < hi} φ(digit r)` for every window code of the given width.
fn window_sums(m: usize, width: usize, lo: usize, hi: usize, phi: &[f64]) -> Vec<f64> {
    // built by appending one symbol at a time; position k is the k-th oldest
    let mut sums = vec![0.0];
    for k in 0..width {
        let counted = (lo..hi).contains(&k);
        let mut next = Vec::with_capacity(sums.len() * m);
        for &prefix in &sums {
            for v in phi.iter().take(m) {
                next.push(if counted { prefix + v } else { prefix });
            }
        }
        sums = next;
    }
    sums
}
