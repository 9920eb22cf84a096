//! Constructive Frostman measures from a node-capacitated flow on the
//! cylinder tree.
//!
//! Each admissible ball caps the flow through its cylinder at its cover
//! cost `e^{-ns + sup φ_n}`. The maximal flow obeys
//! `F(v) = min(cap(v), Σ F(children))`, and since cuts of the tree are
//! exactly ball covers, `F(root)` is the minimal cover cost. Routing the
//! flow down proportionally and normalizing by `F` gives a measure with
//! `μ(B) <= cap(B) / F` for every admissible ball `B` of depth at most `D`.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{BallTree, CoverError, CoverProblem};
use crate::measures::{MeasureError, TreeMeasure};
use crate::systems::{format_word, parse_word, Symbol, System, SystemError};

#[derive(Debug, Error)]
pub enum FrostmanError {
    #[error("Frostman construction needs a shift system")]
    NotShift,
    #[error("total flow is zero: s is above the critical value")]
    ZeroFlow,
    #[error("total flow is infinite: no cover exists within the truncation")]
    InfiniteFlow,
    #[error("test ball {word:?} of order {order} is not admissible at this truncation")]
    NotAdmissible { word: Vec<Symbol>, order: usize },
    #[error("csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrostmanResult {
    pub measure: TreeMeasure,
    /// `F(root)`.
    pub total_flow: f64,
    /// The weighted cover cost at the same parameters.
    pub c_reference: f64,
    pub s: f64,
    pub min_order: usize,
    pub epsilon: f64,
    pub depth: usize,
    /// Orders whose balls the bound covers: all `n >= N` with `L(n, ε) <= D`.
    pub orders: Vec<usize>,
}

/// Capacity of node `i` at depth `d`; `+∞` without an admissible ball.
fn capacity(tree: &BallTree, d: usize, i: usize, s: f64) -> f64 {
    tree.ball_cost(d, i, s).unwrap_or(f64::INFINITY)
}

/// Max-flow values `F(v)` per level.
fn max_flow(tree: &BallTree, s: f64) -> Vec<Vec<f64>> {
    let depth = tree.depth();
    let mut flows: Vec<Vec<f64>> = vec![Vec::new(); depth + 1];
    for d in (0..=depth).rev() {
        let level = &tree.levels[d];
        let below = flows.get(d + 1).cloned().unwrap_or_default();
        flows[d] = (0..level.len())
            .into_par_iter()
            .map(|i| {
                let cap = capacity(tree, d, i, s);
                if d == depth {
                    return cap;
                }
                let through: f64 = level.children(i).map(|j| below[j]).sum();
                if through < cap {
                    through
                } else {
                    cap
                }
            })
            .collect();
    }
    flows
}

/// Runs the flow construction on the problem's target tree at `s`.
pub fn construct(p: &CoverProblem, s: f64) -> Result<FrostmanResult, FrostmanError> {
    let System::Shift(_) = &p.system else {
        return Err(FrostmanError::NotShift);
    };
    let tree = BallTree::build(p, None, false)?;
    if tree.empty {
        return Err(FrostmanError::ZeroFlow);
    }
    let flows = max_flow(&tree, s);
    let total = flows[0][0];
    if total == 0.0 {
        return Err(FrostmanError::ZeroFlow);
    }
    if !total.is_finite() {
        return Err(FrostmanError::InfiniteFlow);
    }
    // top-down proportional routing
    let depth = tree.depth();
    let mut routed = vec![total];
    for d in 0..depth {
        let level = &tree.levels[d];
        let mut next = vec![0.0; tree.levels[d + 1].len()];
        for (i, &f) in routed.iter().enumerate() {
            let kids = level.children(i);
            let infinite: Vec<usize> = kids.clone().filter(|&j| flows[d + 1][j].is_infinite()).collect();
            if !infinite.is_empty() {
                let share = f / infinite.len() as f64;
                for j in infinite {
                    next[j] = share;
                }
                continue;
            }
            let sum: f64 = kids.clone().map(|j| flows[d + 1][j]).sum();
            if sum > 0.0 {
                for j in kids {
                    next[j] = f * (flows[d + 1][j] / sum);
                }
            }
        }
        routed = next;
    }
    let leaves = routed
        .iter()
        .enumerate()
        .map(|(i, &f)| (tree.word(depth, i), f / total));
    let measure = TreeMeasure::from_leaves(p.system.alphabet_size(), depth, leaves)?;
    let c_reference = crate::cover::weighted_cover_cost(p, s, &p.target)?;
    Ok(FrostmanResult {
        measure,
        total_flow: total,
        c_reference,
        s,
        min_order: p.min_order,
        epsilon: p.epsilon,
        depth,
        orders: p.orders(),
    })
}

/// Every admissible ball of the problem as `(cylinder word, order)`.
pub fn admissible_balls(p: &CoverProblem) -> Result<Vec<(Vec<Symbol>, usize)>, FrostmanError> {
    let tree = BallTree::build(p, None, false)?;
    let mut out = Vec::new();
    for d in 0..=tree.depth() {
        if let Some(n) = tree.levels[d].order {
            out.extend((0..tree.levels[d].len()).map(|i| (tree.word(d, i), n)));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub word: String,
    pub order: usize,
    pub mass: f64,
    pub cap: f64,
}

/// Relative slack allowed in `μ(B)·F <= cap(B)`.
pub const BOUND_TOL: f64 = 1e-12;

/// Checks `μ(B)·F <= cap(B)(1 + 1e-12)` on each test ball, given as its
/// cylinder word and order. Capacities are recomputed from the problem.
pub fn verify_bound(
    r: &FrostmanResult,
    p: &CoverProblem,
    test_balls: &[(Vec<Symbol>, usize)],
) -> Result<Vec<Violation>, FrostmanError> {
    let System::Shift(sys) = &p.system else {
        return Err(FrostmanError::NotShift);
    };
    let mut out = Vec::new();
    for (w, n) in test_balls {
        if *n < p.min_order || sys.cylinder_length(*n, p.epsilon) != w.len() || w.len() > r.depth {
            return Err(FrostmanError::NotAdmissible { word: w.clone(), order: *n });
        }
        let mass = r.measure.mass(w).unwrap_or(0.0);
        let cap = (-(*n as f64) * r.s + p.ball_value(w, *n)?).exp();
        if mass * r.total_flow > cap * (1.0 + BOUND_TOL) {
            out.push(Violation {
                word: format_word(w),
                order: *n,
                mass,
                cap,
            });
        }
    }
    Ok(out)
}

/// Writes the depth-`D` leaves as `word,mass` CSV.
pub fn write_tree_csv(t: &TreeMeasure, out: impl Write) -> Result<(), FrostmanError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| FrostmanError::Csv(e.to_string());
    w.write_record(["word", "mass"]).map_err(csv_err)?;
    for (word, mass) in t.leaves() {
        w.write_record([format_word(&word), format!("{mass:?}")]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| FrostmanError::Csv(e.to_string()))
}

/// Reads a `word,mass` CSV back into a tree measure; all words must share
/// one length.
pub fn read_tree_csv(input: impl Read, alphabet_size: usize) -> Result<TreeMeasure, FrostmanError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = r.headers().map_err(|e| FrostmanError::Csv(e.to_string()))?;
    if headers.iter().collect::<Vec<_>>() != ["word", "mass"] {
        return Err(FrostmanError::Csv(format!("expected header word,mass, got {headers:?}")));
    }
    let mut depth = None;
    let mut leaves = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| FrostmanError::Csv(e.to_string()))?;
        let word = parse_word(&rec[0])?;
        let mass: f64 = rec[1]
            .parse()
            .map_err(|_| FrostmanError::Csv(format!("bad mass {:?}", &rec[1])))?;
        match depth {
            None => depth = Some(word.len()),
            Some(d) if d != word.len() => {
                return Err(FrostmanError::Csv("words of different lengths".into()));
            }
            _ => {}
        }
        leaves.push((word, mass));
    }
    let depth = depth.ok_or_else(|| FrostmanError::Csv("no rows".into()))?;
    Ok(TreeMeasure::from_leaves(alphabet_size, depth, leaves)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::{cover_cost, Target};
    use crate::potentials::Potential;
    use crate::systems::SymbolicSystem;

    fn shift(m: usize) -> System {
        System::Shift(SymbolicSystem::full_shift(m).unwrap())
    }

    #[test]
    fn single_order_gives_uniform_measure() {
        let p = CoverProblem::with_depth_extra(shift(2), Target::Whole, Potential::zero(2), 5, 0.2, 0).unwrap();
        let s = 0.4;
        let r = construct(&p, s).unwrap();
        let expected = 2f64.powi(6) * (-5.0 * s).exp();
        assert!((r.total_flow - expected).abs() <= 1e-12 * expected);
        for (_, m) in r.measure.leaves() {
            assert_eq!(m, 1.0 / 64.0);
        }
    }

    #[test]
    fn single_branch_is_a_point_mass() {
        let p = CoverProblem::new(shift(2), Target::Cylinders(vec![vec![1, 0, 1]]), Potential::symbolic(vec![0.5, -0.5]), 1, 0.0, 3)
            .unwrap();
        let r = construct(&p, 0.3).unwrap();
        assert_eq!(r.measure.leaves(), vec![(vec![1, 0, 1], 1.0)]);
        let caps: Vec<f64> = (1..=3).map(|n| (-(n as f64) * 0.3 + p.ball_value(&[1, 0, 1][..n], n).unwrap()).exp()).collect();
        assert_eq!(r.total_flow, caps.into_iter().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn flow_equals_cover_cost_and_bound_holds() {
        let sys = System::Shift(SymbolicSystem::new(vec![vec![true, true, false], vec![true, false, true], vec![true, true, true]]).unwrap());
        let p = CoverProblem::with_depth_extra(sys, Target::Whole, Potential::symbolic(vec![0.3, -0.2, 0.1]), 2, 0.4, 4).unwrap();
        for s in [0.2, 0.6, 1.0] {
            let r = construct(&p, s).unwrap();
            assert_eq!(r.total_flow, cover_cost(&p, s).unwrap());
            assert_eq!(r.total_flow, r.c_reference);
            r.measure.check_conservation().unwrap();
            let balls = admissible_balls(&p).unwrap();
            assert!(verify_bound(&r, &p, &balls).unwrap().is_empty());
        }
    }

    #[test]
    fn corrupted_measure_is_caught() {
        let p = CoverProblem::with_depth_extra(shift(2), Target::Whole, Potential::symbolic(vec![0.0, 0.4]), 3, 0.3, 0).unwrap();
        let mut r = construct(&p, 0.9).unwrap();
        let leaves = r.measure.leaves();
        let (from, to) = (&leaves[0].0, &leaves[1].0);
        r.measure = r.measure.corrupted(from, to, leaves[0].1 * 0.5).unwrap();
        let v = verify_bound(&r, &p, &admissible_balls(&p).unwrap()).unwrap();
        assert!(!v.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let p = CoverProblem::with_depth_extra(shift(3), Target::Whole, Potential::symbolic(vec![0.0, 0.2, 0.5]), 2, 0.5, 1).unwrap();
        let r = construct(&p, 1.0).unwrap();
        let mut buf = Vec::new();
        write_tree_csv(&r.measure, &mut buf).unwrap();
        let back = read_tree_csv(buf.as_slice(), 3).unwrap();
        assert_eq!(back.leaves(), r.measure.leaves());
        assert!(read_tree_csv("word,mass\n0,0.5\n11,0.5\n".as_bytes(), 2).is_err());
        assert!(read_tree_csv("w,m\n0,1\n".as_bytes(), 2).is_err());
    }
}
