//! The 5r covering lemma for families of same-radius Bowen balls.
//!
//! For ball `i` let `I(i)` be the set of family members meeting it. Balls
//! are scanned by decreasing `|I(i)|` (then index) and kept when their
//! `I`-set is disjoint from those already kept. Any skipped ball shares a
//! neighbour `k` with a kept ball `j`, so `d(x_i, x_j) < 4r` and
//! `B(x_i, r) ⊆ B(x_j, 5r)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::systems::{bowen_distance, CirclePoint, Point, Symbol, System, SystemError};

/// The constant of the covering lemma.
pub const FIVE: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveRSelection {
    /// Kept indices in selection order.
    pub selected: Vec<usize>,
    /// `I(i)` for every input ball, sorted.
    pub neighbours: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveRCheck {
    pub disjoint: bool,
    /// Every input center lies within `4r` of a kept center.
    pub centers_within_4r: bool,
    /// Sampled members of input balls that fell outside every kept `5r` ball.
    pub membership_failures: usize,
    pub membership_tests: usize,
}

impl FiveRCheck {
    pub fn passed(&self) -> bool {
        self.disjoint && self.centers_within_4r && self.membership_failures == 0
    }
}

/// Whether `B_n(x, r)` and `B_n(y, r)` intersect.
///
/// On a shift `d_n` is an ultrametric, so they meet iff `d_n(x, y) < r`. On
/// the circle, radii up to the arc limit make each ball the arc of radius
/// `r / m^{n-1}`, and two such arcs meet iff their centers are closer than
/// twice that.
pub fn balls_meet(sys: &System, x: &Point, y: &Point, order: usize, r: f64) -> Result<bool, SystemError> {
    match (sys, x, y) {
        (System::Shift(_), _, _) => Ok(bowen_distance(sys, x, y, order)? < r),
        (System::Circle(c), Point::Circle(a), Point::Circle(b)) => {
            let arc = r / (c.degree() as f64).powi(order as i32 - 1);
            Ok(a.arc_distance(b) < 2.0 * arc)
        }
        _ => Err(SystemError::KindMismatch),
    }
}

fn check_family(sys: &System, centers: &[Point], order: usize, r: f64) -> Result<(), SystemError> {
    if order == 0 {
        return Err(SystemError::InvalidOrder);
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(SystemError::InvalidEpsilon(r));
    }
    if let System::Circle(c) = sys {
        if r > c.arc_limit(order) {
            return Err(SystemError::Resolution {
                order,
                epsilon: f64::NAN,
                rho: r,
                limit: c.arc_limit(order),
            });
        }
    }
    centers.iter().try_for_each(|x| sys.validate_point(x))
}

pub fn five_r_subfamily(sys: &System, centers: &[Point], order: usize, r: f64) -> Result<FiveRSelection, SystemError> {
    check_family(sys, centers, order, r)?;
    let k = centers.len();
    let mut neighbours = vec![Vec::new(); k];
    for i in 0..k {
        for j in 0..k {
            if i == j || balls_meet(sys, &centers[i], &centers[j], order, r)? {
                neighbours[i].push(j);
            }
        }
    }
    let mut ordering: Vec<usize> = (0..k).collect();
    ordering.sort_by(|&a, &b| neighbours[b].len().cmp(&neighbours[a].len()).then(a.cmp(&b)));
    let mut taken = vec![false; k];
    let mut selected = Vec::new();
    for i in ordering {
        if neighbours[i].iter().all(|&j| !taken[j]) {
            neighbours[i].iter().for_each(|&j| taken[j] = true);
            selected.push(i);
        }
    }
    Ok(FiveRSelection { selected, neighbours })
}

/// Checks both conclusions of the lemma: pairwise disjoint `I`-sets, and
/// containment of every input ball in the kept `5r` balls, the latter by
/// testing `samples` random members of each input ball (plus its center).
pub fn verify_five_r(
    sys: &System,
    centers: &[Point],
    order: usize,
    r: f64,
    sel: &FiveRSelection,
    samples: usize,
    seed: u64,
) -> Result<FiveRCheck, SystemError> {
    check_family(sys, centers, order, r)?;
    let mut disjoint = true;
    for (a, &i) in sel.selected.iter().enumerate() {
        for &j in &sel.selected[a + 1..] {
            if sel.neighbours[i].iter().any(|k| sel.neighbours[j].contains(k)) {
                disjoint = false;
            }
        }
    }
    let mut centers_within_4r = true;
    for x in centers {
        let mut ok = false;
        for &j in &sel.selected {
            ok |= bowen_distance(sys, x, &centers[j], order)? < 4.0 * r;
        }
        centers_within_4r &= ok;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = 0;
    let mut tests = 0;
    for x in centers {
        for t in 0..=samples {
            let z = if t == 0 { x.clone() } else { member_sample(sys, x, order, r, &mut rng)? };
            if bowen_distance(sys, &z, x, order)? >= r {
                continue;
            }
            tests += 1;
            let mut inside = false;
            for &j in &sel.selected {
                inside |= bowen_distance(sys, &z, &centers[j], order)? < FIVE * r;
            }
            if !inside {
                failures += 1;
            }
        }
    }
    Ok(FiveRCheck {
        disjoint,
        centers_within_4r,
        membership_failures: failures,
        membership_tests: tests,
    })
}

/// A random point of `B_n(x, r)` (rejected by the caller if rounding puts
/// it outside).
fn member_sample(sys: &System, x: &Point, order: usize, r: f64, rng: &mut impl Rng) -> Result<Point, SystemError> {
    match (sys, x) {
        (System::Shift(s), Point::Symbolic(p)) => {
            let keep = if r >= 1.0 {
                0
            } else {
                order + ((1.0 / r).ln() / s.log_base()).ceil() as usize
            };
            let mut w = p.prefix(keep);
            for _ in 0..8 {
                let choices: Vec<Symbol> = s.successors(w.last().copied()).collect();
                w.push(choices[rng.gen_range(0..choices.len())]);
            }
            Ok(Point::Symbolic(s.complete_point(w)))
        }
        (System::Circle(c), Point::Circle(a)) => {
            let arc = r / (c.degree() as f64).powi(order as i32 - 1);
            let t: f64 = rng.gen_range(-1.0..1.0);
            let z = (a.to_f64() + t * arc).rem_euclid(1.0);
            Ok(Point::Circle(CirclePoint::from_f64(if z >= 1.0 { 0.0 } else { z })?))
        }
        _ => Err(SystemError::KindMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{CircleSystem, SymbolicSystem};

    fn circle() -> System {
        System::Circle(CircleSystem::new(2).unwrap())
    }

    fn at(x: f64) -> Point {
        Point::Circle(CirclePoint::from_f64(x).unwrap())
    }

    #[test]
    fn single_ball_is_kept() {
        let sel = five_r_subfamily(&circle(), &[at(0.25)], 1, 0.1).unwrap();
        assert_eq!(sel.selected, vec![0]);
    }

    #[test]
    fn far_apart_balls_both_kept() {
        let sel = five_r_subfamily(&circle(), &[at(0.1), at(0.6)], 1, 0.1).unwrap();
        assert_eq!(sel.selected, vec![0, 1]);
    }

    #[test]
    fn chain_of_three_keeps_the_middle() {
        let centers = [at(0.1), at(0.25), at(0.4)];
        let sel = five_r_subfamily(&circle(), &centers, 1, 0.1).unwrap();
        assert_eq!(sel.selected, vec![1]);
        let check = verify_five_r(&circle(), &centers, 1, 0.1, &sel, 32, 3).unwrap();
        assert!(check.passed(), "{check:?}");
    }

    #[test]
    fn shift_balls_meet_only_when_equal() {
        let sys = System::Shift(SymbolicSystem::full_shift(2).unwrap());
        let p = |s: &str| Point::Symbolic(s.parse().unwrap());
        let centers = [p("0010(1)"), p("0011(0)"), p("01(0)")];
        let sel = five_r_subfamily(&sys, &centers, 2, 0.5).unwrap();
        // radius 1/2 at order 2 is a length-2 cylinder
        assert_eq!(sel.neighbours[0], vec![0, 1]);
        assert_eq!(sel.selected.len(), 2);
        assert!(verify_five_r(&sys, &centers, 2, 0.5, &sel, 16, 1).unwrap().passed());
    }
}
