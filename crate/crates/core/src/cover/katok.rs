//! Measure-constrained covers: the cheapest family of admissible balls
//! capturing `μ`-mass strictly greater than `1 - δ`.
//!
//! The general engine keeps, for every node, the Pareto frontier of
//! (captured mass, cost) pairs of its subtree. Frontiers above a budget are
//! thinned by mass bins; the bin widths add up to a certified slack, giving
//! an upper bound (achieved by an actual cover) and a lower bound (the best
//! cost with mass above `1 - δ - slack`). When all balls share one order the
//! cover problem is a knapsack over the leaves; the greedy ratio order gives
//! an integral upper bound and the fractional lower bound.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::brute::{Menu, MAX_MENU};
use super::tree::BallTree;
use super::{bisect_unit_crossing, CoverError, CoverProblem, SearchOptions, Target};
use crate::measures::{Measure, MeasureError};
use crate::systems::{Symbol, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KatokMethod {
    #[default]
    Auto,
    Pareto,
    Greedy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatokOptions {
    /// Largest frontier kept per node before thinning.
    pub budget: usize,
    /// Largest certified slack accepted before failing.
    pub max_slack: f64,
    pub method: KatokMethod,
}

impl Default for KatokOptions {
    fn default() -> Self {
        Self {
            budget: 2048,
            max_slack: 0.01,
            method: KatokMethod::Auto,
        }
    }
}

/// Bounds on the Katok cost at one `(s, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KatokCost {
    /// Cost of an actual cover with mass `> 1 - δ`.
    pub upper: f64,
    pub lower: f64,
    pub slack: f64,
}

/// Mass of the node with digits `w` (its cylinder, or its `m`-adic interval).
pub fn node_mass(mu: &Measure, sys: &System, w: &[Symbol]) -> Result<f64, MeasureError> {
    match (mu, sys) {
        (Measure::Lebesgue, System::Circle(c)) => Ok((c.degree() as f64).powi(-(w.len() as i32))),
        _ => mu.cylinder_mass(w),
    }
}

#[derive(Debug, Clone)]
pub struct KatokTree {
    tree: BallTree,
    mass: Vec<Vec<f64>>,
    /// The order when every admissible ball sits at the bottom depth.
    single_order: Option<usize>,
}

type Frontier = Vec<(f64, f64)>;

impl KatokTree {
    /// The tree of positive-mass cylinders down to `D_max`. The problem's
    /// target is ignored.
    pub fn new(p: &CoverProblem, mu: &Measure) -> Result<Self, MeasureError> {
        mu.validate(&p.system)?;
        let keep = |w: &[Symbol]| node_mass(mu, &p.system, w).map_or(true, |m| m > 0.0);
        let tree = BallTree::build(p, Some(&keep), true)?;
        let mass = (0..=tree.depth())
            .map(|d| {
                (0..tree.levels[d].len())
                    .into_par_iter()
                    .map(|i| node_mass(mu, &p.system, &tree.word(d, i)))
                    .collect::<Result<Vec<f64>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        let depth = tree.depth();
        let single_order = tree.levels[depth]
            .order
            .filter(|_| tree.levels[..depth].iter().all(|l| l.order.is_none()));
        Ok(Self { tree, mass, single_order })
    }

    pub fn single_order(&self) -> Option<usize> {
        self.single_order
    }

    fn method(&self, opts: &KatokOptions) -> Result<KatokMethod, CoverError> {
        match (opts.method, self.single_order) {
            (KatokMethod::Auto, Some(_)) | (KatokMethod::Greedy, Some(_)) => Ok(KatokMethod::Greedy),
            (KatokMethod::Auto, None) | (KatokMethod::Pareto, _) => Ok(KatokMethod::Pareto),
            (KatokMethod::Greedy, None) => Err(CoverError::Unsupported(
                "greedy Katok bounds need a single ball order".into(),
            )),
        }
    }

    pub fn cost(&self, s: f64, delta: f64, opts: &KatokOptions) -> Result<KatokCost, CoverError> {
        check_delta(delta)?;
        match self.method(opts)? {
            KatokMethod::Greedy => {
                let n = self.single_order.expect("single order") as f64;
                let (lu, ll) = self.greedy_log(delta);
                Ok(KatokCost {
                    upper: (lu - n * s).exp(),
                    lower: (ll - n * s).exp(),
                    slack: 0.0,
                })
            }
            _ => self.pareto(s, delta, opts),
        }
    }

    /// Log of the greedy integral and fractional costs at `s = 0`.
    fn greedy_log(&self, delta: f64) -> (f64, f64) {
        let depth = self.tree.depth();
        let values = &self.tree.levels[depth].value;
        let masses = &self.mass[depth];
        let mut items: Vec<usize> = (0..masses.len()).collect();
        let ratio = |i: usize| values[i] - masses[i].ln();
        items.sort_by(|&a, &b| ratio(a).total_cmp(&ratio(b)).then(a.cmp(&b)));
        let need = 1.0 - delta;
        let shift = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut mass = 0.0;
        let mut cost = 0.0;
        let mut lower = None;
        for &i in &items {
            let c = (values[i] - shift).exp();
            if lower.is_none() && mass + masses[i] >= need {
                let frac = ((need - mass) / masses[i]).clamp(0.0, 1.0);
                lower = Some(cost + frac * c);
            }
            mass += masses[i];
            cost += c;
            if mass > need {
                let l = lower.unwrap_or(cost);
                return (cost.ln() + shift, l.ln() + shift);
            }
        }
        (f64::INFINITY, lower.map_or(f64::INFINITY, |l| l.ln() + shift))
    }

    fn pareto(&self, s: f64, delta: f64, opts: &KatokOptions) -> Result<KatokCost, CoverError> {
        let budget = opts.budget.max(2);
        let depth = self.tree.depth();
        let mut below: Vec<(Frontier, f64)> = Vec::new();
        for d in (0..=depth).rev() {
            let level = &self.tree.levels[d];
            let node = |i: usize| -> (Frontier, f64) {
                let mv = self.mass[d][i];
                let mut slack = 0.0;
                let mut f: Frontier = vec![(0.0, 0.0)];
                if d < depth {
                    for j in level.children(i) {
                        let (cf, cs) = &below[j];
                        slack += cs;
                        if f.len() * cf.len() <= 4 * budget {
                            f = prune(minkowski(&f, cf));
                            slack += thin(&mut f, mv, budget);
                        } else {
                            f = binned_minkowski(&f, cf, mv, budget);
                            slack += mv / budget as f64;
                        }
                    }
                }
                if let Some(c) = self.tree.ball_cost(d, i, s) {
                    f.push((mv, c));
                    f = prune(f);
                }
                (f, slack)
            };
            below = if level.len() >= 256 {
                (0..level.len()).into_par_iter().map(node).collect()
            } else {
                (0..level.len()).map(node).collect()
            };
        }
        let (root, slack) = &below[0];
        if *slack > opts.max_slack {
            return Err(CoverError::FrontierBudget {
                slack: *slack,
                allowed: opts.max_slack,
            });
        }
        let best = |need: f64| {
            root.iter()
                .filter(|(m, _)| *m > need)
                .map(|(_, c)| *c)
                .fold(f64::INFINITY, f64::min)
        };
        Ok(KatokCost {
            upper: best(1.0 - delta),
            lower: if *slack > 0.0 { best(1.0 - delta - slack) } else { best(1.0 - delta) },
            slack: *slack,
        })
    }
}

fn check_delta(delta: f64) -> Result<(), CoverError> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(CoverError::InvalidDelta(delta))
    }
}

fn minkowski(a: &[(f64, f64)], b: &[(f64, f64)]) -> Frontier {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &(ma, ca) in a {
        for &(mb, cb) in b {
            out.push((ma + mb, ca + cb));
        }
    }
    out
}

/// `thin(prune(minkowski(a, b)))` without materializing the sum: the
/// cheapest point of each mass bin (heaviest among ties), plus the
/// heaviest point overall, then pruned.
fn binned_minkowski(a: &[(f64, f64)], b: &[(f64, f64)], mass: f64, budget: usize) -> Frontier {
    let width = mass / budget as f64;
    let mut bins: Vec<Option<(f64, f64)>> = vec![None; budget + 2];
    let mut heaviest = (f64::NEG_INFINITY, f64::INFINITY);
    for &(ma, ca) in a {
        for &(mb, cb) in b {
            let p = (ma + mb, ca + cb);
            let k = ((p.0 / width).floor() as usize).min(budget + 1);
            match &mut bins[k] {
                Some(q) if q.1 < p.1 || (q.1 == p.1 && q.0 >= p.0) => {}
                slot => *slot = Some(p),
            }
            if p.0 > heaviest.0 || (p.0 == heaviest.0 && p.1 < heaviest.1) {
                heaviest = p;
            }
        }
    }
    let mut f: Frontier = bins.into_iter().flatten().collect();
    f.push(heaviest);
    prune(f)
}

/// Pareto points (more mass, less cost), sorted by increasing mass.
fn prune(mut f: Frontier) -> Frontier {
    f.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.total_cmp(&y.1)));
    let mut out: Frontier = Vec::with_capacity(f.len());
    let mut best = f64::INFINITY;
    for p in f {
        if p.1 < best {
            best = p.1;
            out.push(p);
        }
    }
    out.reverse();
    out
}

/// Keeps the cheapest point per mass bin of width `mass / budget`, plus
/// the heaviest point. Returns the mass slack introduced.
fn thin(f: &mut Frontier, mass: f64, budget: usize) -> f64 {
    if f.len() <= budget {
        return 0.0;
    }
    let width = mass / budget as f64;
    let last = *f.last().expect("nonempty");
    let mut out: Frontier = Vec::with_capacity(budget + 1);
    let mut bin = None;
    for &p in f.iter() {
        // cost increases with mass, so the first point of a bin is its cheapest
        let b = (p.0 / width).floor() as i64;
        if bin != Some(b) {
            bin = Some(b);
            out.push(p);
        }
    }
    if *out.last().expect("nonempty") != last {
        out.push(last);
    }
    *f = out;
    width
}

/// Critical exponents of the Katok cost at one `δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KatokEstimate {
    pub delta: f64,
    /// Root of `upper(s) = 1`; an upper bound on the truncated Katok exponent.
    pub critical_s: f64,
    pub bracket: (f64, f64),
    /// Root of `lower(s) = 1`.
    pub lower_s: f64,
    pub slack: f64,
    pub method: KatokMethod,
}

pub fn katok_estimate(
    tree: &KatokTree,
    delta: f64,
    opts: &KatokOptions,
    search: &SearchOptions,
) -> Result<KatokEstimate, CoverError> {
    check_delta(delta)?;
    let method = tree.method(opts)?;
    if method == KatokMethod::Greedy {
        // cost(s) = e^{-ns} cost(0), so the root is explicit
        let n = tree.single_order.expect("single order") as f64;
        let (lu, ll) = tree.greedy_log(delta);
        if !lu.is_finite() {
            return Err(CoverError::Truncation(tree.tree.depth()));
        }
        let s = lu / n;
        return Ok(KatokEstimate {
            delta,
            critical_s: s,
            bracket: (s, s),
            lower_s: ll / n,
            slack: 0.0,
            method,
        });
    }
    let mut slack = 0.0f64;
    let (lo, hi) = bisect_unit_crossing(
        |s| {
            let c = tree.pareto(s, delta, opts)?;
            slack = slack.max(c.slack);
            Ok(c.upper)
        },
        search,
    )?;
    let lower_s = if slack > 0.0 {
        let (l, h) = bisect_unit_crossing(|s| Ok(tree.pareto(s, delta, opts)?.lower), search)?;
        0.5 * (l + h)
    } else {
        0.5 * (lo + hi)
    };
    Ok(KatokEstimate {
        delta,
        critical_s: 0.5 * (lo + hi),
        bracket: (lo, hi),
        lower_s,
        slack,
        method,
    })
}

/// Upper Katok cost at `(s, δ)`.
pub fn katok_cover_cost(p: &CoverProblem, mu: &Measure, s: f64, delta: f64) -> Result<f64, MeasureError> {
    let tree = KatokTree::new(p, mu)?;
    Ok(tree.cost(s, delta, &KatokOptions::default())?.upper)
}

/// Katok cost by enumerating subsets of the whole-space ball menu; captured
/// mass is the measure of the union, summed over depth-`D_max` leaves.
pub fn brute_force_katok_cost(p: &CoverProblem, mu: &Measure, s: f64, delta: f64) -> Result<f64, MeasureError> {
    check_delta(delta)?;
    let q = p.clone().with_target(Target::Whole)?;
    let menu = Menu::new(&q, MAX_MENU)?;
    let leaf_mass: Vec<f64> = menu
        .leaves
        .iter()
        .map(|w| node_mass(mu, &q.system, w))
        .collect::<Result<_, _>>()?;
    let costs: Vec<f64> = menu.balls.iter().map(|b| b.cost(s)).collect();
    let masks: Vec<u32> = menu
        .leaves
        .iter()
        .map(|leaf| {
            menu.balls
                .iter()
                .enumerate()
                .filter(|(_, b)| leaf.starts_with(&b.word))
                .fold(0u32, |m, (i, _)| m | (1 << i))
        })
        .collect();
    let mut best = f64::INFINITY;
    for sub in 0u32..(1u32 << menu.balls.len()) {
        let mass: f64 = masks
            .iter()
            .zip(&leaf_mass)
            .filter(|(m, _)| *m & sub != 0)
            .map(|(_, w)| w)
            .sum();
        if mass > 1.0 - delta {
            let c: f64 = (0..costs.len()).filter(|i| sub >> i & 1 == 1).map(|i| costs[i]).sum();
            best = best.min(c);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binned_merge_matches_prune_then_thin() {
        let a: Frontier = prune((0..60).map(|k| (k as f64 / 120.0, (k as f64 * 0.37).sin().abs() + k as f64)).collect());
        let b: Frontier = prune((0..70).map(|k| (k as f64 / 140.0, (k as f64 * 0.91).cos().abs() + 0.5 * k as f64)).collect());
        let mut slow = prune(minkowski(&a, &b));
        thin(&mut slow, 1.0, 16);
        assert_eq!(binned_minkowski(&a, &b, 1.0, 16), slow);
    }

    #[test]
    fn prune_keeps_pareto_points() {
        let f = prune(vec![(0.0, 0.0), (0.5, 2.0), (0.5, 1.0), (0.4, 1.5), (1.0, 3.0)]);
        assert_eq!(f, vec![(0.0, 0.0), (0.5, 1.0), (1.0, 3.0)]);
    }

    #[test]
    fn thinning_reports_width_and_keeps_heaviest() {
        let mut f: Frontier = (0..100).map(|k| (k as f64 / 100.0, k as f64)).collect();
        let w = thin(&mut f, 1.0, 10);
        assert_eq!(w, 0.1);
        assert!(f.len() <= 11);
        assert_eq!(*f.last().unwrap(), (0.99, 99.0));
    }
}
