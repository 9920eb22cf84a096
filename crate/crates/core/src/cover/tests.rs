use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::brute::{brute_force_cover_cost, brute_force_cover_cost_exact};
use super::katok::{brute_force_katok_cost, KatokMethod, KatokOptions, KatokTree};
use super::lp::{weighted_cover_cost_lp, weighted_cover_cost_lp_exact};
use super::*;
use crate::measures::Measure;
use crate::potentials::Cocycle;
use crate::systems::{CircleSystem, SymbolicSystem};

fn shift(m: usize) -> System {
    System::Shift(SymbolicSystem::full_shift(m).unwrap())
}

fn golden() -> System {
    System::Shift(SymbolicSystem::new(vec![vec![true, true], vec![true, false]]).unwrap())
}

fn pressure_problem(n: usize, eps: f64, extra: usize) -> CoverProblem {
    CoverProblem::with_depth_extra(shift(2), Target::Whole, Potential::symbolic(vec![0.0, LN_2]), n, eps, extra)
        .unwrap()
}

#[test]
fn single_order_closed_form() {
    // only order 20 fits: L(20, 0.25) = 25
    let p = pressure_problem(20, 0.25, 0);
    assert_eq!(p.orders(), vec![20]);
    for s in [0.5f64, 1.0, 1.5] {
        let expected = 32.0 * 3f64.powi(20) * (-20.0 * s).exp();
        let got = cover_cost(&p, s).unwrap();
        assert!((got - expected).abs() <= 1e-12 * expected, "{got} vs {expected}");
    }
}

#[test]
fn large_s_cost_vanishes() {
    let p = CoverProblem::with_depth_extra(shift(2), Target::Whole, Potential::zero(2), 6, 0.3, 0).unwrap();
    let c = cover_cost(&p, 50.0).unwrap();
    assert!(c > 0.0 && c < 1e-100);
}

#[test]
fn dp_matches_brute_force_on_small_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..12 {
        let sys = if rng.gen_bool(0.5) { shift(2) } else { golden() };
        let phi = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let eps = [0.0, 0.3, 0.7][rng.gen_range(0..3)];
        let p = CoverProblem::new(sys, Target::Whole, Potential::symbolic(phi), 1, eps, 3).unwrap();
        let s = rng.gen_range(-0.5..1.5);
        assert_eq!(cover_cost_exact(&p, s).unwrap(), brute_force_cover_cost_exact(&p, s).unwrap());
        let f = cover_cost_with(&p, s, Engine::Explicit).unwrap();
        let b = brute_force_cover_cost(&p, s).unwrap();
        assert!((f - b).abs() <= 1e-12 * b);
    }
}

#[test]
fn lp_matches_dp_exactly() {
    let p = CoverProblem::new(golden(), Target::Cylinders(vec![vec![0, 1], vec![1]]), Potential::symbolic(vec![0.2, -0.4]), 1, 0.4, 4)
        .unwrap();
    for s in [0.0, 0.5, 1.0] {
        assert_eq!(weighted_cover_cost_lp_exact(&p, s).unwrap(), cover_cost_exact(&p, s).unwrap());
        let lp = weighted_cover_cost_lp(&p, s).unwrap();
        let dp = cover_cost(&p, s).unwrap();
        assert!((lp - dp).abs() <= 1e-12 * dp);
    }
}

#[test]
fn compressed_matches_explicit() {
    for (eps, n, extra) in [(0.1, 6, 5), (0.35, 5, 5), (0.0, 3, 8)] {
        for sys in [shift(2), golden(), shift(3)] {
            let m = sys.alphabet_size();
            let phi: Vec<f64> = (0..m).map(|a| 0.3 * a as f64 - 0.1).collect();
            let p = CoverProblem::with_depth_extra(sys, Target::Whole, Potential::symbolic(phi), n, eps, extra).unwrap();
            let explicit = p.prepare(Engine::Explicit).unwrap();
            let compressed = p.prepare(Engine::Compressed).unwrap();
            for s in [0.0, 0.7, 1.3] {
                let a = explicit.cost(s);
                let b = compressed.cost(s);
                assert!((a - b).abs() <= 1e-12 * a, "eps {eps} m {m} s {s}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn cost_monotone_in_s_n_and_depth() {
    let p = pressure_problem(4, 0.3, 5);
    let costs: Vec<f64> = (0..10).map(|k| cover_cost(&p, 0.2 * k as f64).unwrap()).collect();
    assert!(costs.windows(2).all(|w| w[1] < w[0]));
    let s = 1.0;
    let by_n: Vec<f64> = (2..7)
        .map(|n| {
            let q = p.clone();
            CoverProblem::new(q.system, q.target, q.potential, n, q.epsilon, q.max_depth).map(|q| cover_cost(&q, s).unwrap())
        })
        .map(Result::unwrap)
        .collect();
    assert!(by_n.windows(2).all(|w| w[1] >= w[0]));
    let by_depth: Vec<f64> = (p.max_depth..p.max_depth + 4)
        .map(|d| cover_cost(&p.clone().with_max_depth(d).unwrap(), s).unwrap())
        .collect();
    assert!(by_depth.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn constant_shift_moves_exponent_by_constant() {
    let p = pressure_problem(5, 0.2, 4);
    let base = critical_exponent(&p).unwrap().critical_s;
    let shifted = p.clone().with_potential(Potential::symbolic(vec![0.0, LN_2]).with_offset(0.37)).unwrap();
    let moved = critical_exponent(&shifted).unwrap().critical_s;
    assert!((moved - base - 0.37).abs() < 1e-9);
}

#[test]
fn estimate_bracket_and_curve() {
    let e = critical_exponent(&pressure_problem(6, 0.25, 3)).unwrap();
    assert!(e.bracket.0 <= e.critical_s && e.critical_s <= e.bracket.1);
    assert!(e.bracket.1 - e.bracket.0 <= 1e-10);
    assert!(e.cost_curve.windows(2).all(|w| w[1].cost < w[0].cost));
    let t = e.truncation.unwrap();
    assert!(t.cost_at_depth <= t.cost_at_previous_depth);
}

#[test]
fn entropy_of_full_shift_at_zero_epsilon() {
    let p = CoverProblem::with_depth_extra(shift(3), Target::Whole, Potential::zero(3), 10, 0.0, 0).unwrap();
    let e = critical_exponent(&p).unwrap();
    assert!((e.critical_s - 3f64.ln()).abs() < 1e-9);
}

#[test]
fn empty_target_costs_nothing() {
    let p = pressure_problem(3, 0.1, 0).with_target(Target::Cylinders(vec![])).unwrap();
    assert_eq!(cover_cost(&p, -5.0).unwrap(), 0.0);
    assert!(critical_exponent(&p).is_err());
}

#[test]
fn invalid_targets_rejected() {
    let p = pressure_problem(3, 0.1, 0);
    assert!(matches!(
        p.clone().with_target(Target::Cylinders(vec![vec![2]])),
        Err(CoverError::InvalidTarget(_))
    ));
    let g = CoverProblem::new(golden(), Target::Whole, Potential::zero(2), 1, 0.0, 2).unwrap();
    assert!(g.with_target(Target::Cylinders(vec![vec![1, 1]])).is_err());
    assert!(CoverProblem::new(shift(2), Target::Whole, Potential::zero(2), 4, 0.5, 3).is_err());
}

#[test]
fn center_mode_never_exceeds_sup_mode() {
    let c = Cocycle::diagonal(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
    let p = CoverProblem::with_depth_extra(shift(2), Target::Whole, Potential::cocycle(c), 3, 0.3, 3).unwrap();
    let q = p.clone().with_mode(ValueMode::Center);
    for s in [0.0, 0.5, 1.0] {
        assert!(cover_cost(&q, s).unwrap() <= cover_cost(&p, s).unwrap());
    }
}

#[test]
fn circle_homogeneous_matches_explicit() {
    let sys = System::Circle(CircleSystem::new(2).unwrap());
    let phi = Potential::circle(crate::potentials::CircleFunction::constant(0.2).unwrap());
    let p = CoverProblem::with_depth_extra(sys, Target::Whole, phi, 4, 0.3, 4).unwrap();
    let h = p.prepare(Engine::Homogeneous).unwrap();
    let e = p.prepare(Engine::Explicit).unwrap();
    for s in [0.5, 1.0, 2.0] {
        assert!((h.cost(s) - e.cost(s)).abs() <= 1e-12 * e.cost(s));
    }
}

#[test]
fn optimal_cover_realizes_cost() {
    let p = pressure_problem(3, 0.3, 3);
    let tree = BallTree::build(&p, None, false).unwrap();
    let s = 1.1;
    let cover = tree.optimal_cover(s);
    let total: f64 = cover.iter().map(|&(d, i)| tree.ball_cost(d, i, s).unwrap()).sum();
    assert!((total - tree.cost(s, tree.depth())).abs() <= 1e-12 * total);
}

#[test]
fn katok_pareto_matches_brute_force() {
    let mu = Measure::bernoulli(vec![0.3, 0.7]).unwrap();
    let p = CoverProblem::new(shift(2), Target::Whole, Potential::symbolic(vec![0.1, -0.2]), 1, 0.4, 3).unwrap();
    let tree = KatokTree::new(&p, &mu).unwrap();
    let opts = KatokOptions { method: KatokMethod::Pareto, ..KatokOptions::default() };
    for delta in [0.05, 0.3, 0.6, 0.95] {
        for s in [0.0, 0.8] {
            let k = tree.cost(s, delta, &opts).unwrap();
            let b = brute_force_katok_cost(&p, &mu, s, delta).unwrap();
            assert_eq!(k.slack, 0.0);
            assert!((k.upper - b).abs() <= 1e-12 * b, "delta {delta}: {} vs {b}", k.upper);
        }
    }
}

#[test]
fn katok_greedy_brackets_pareto() {
    let mu = Measure::bernoulli(vec![0.2, 0.8]).unwrap();
    let p = CoverProblem::with_depth_extra(shift(2), Target::Whole, Potential::symbolic(vec![0.0, 0.5]), 6, 0.3, 0).unwrap();
    let tree = KatokTree::new(&p, &mu).unwrap();
    assert!(tree.single_order().is_some());
    let pareto = KatokOptions { method: KatokMethod::Pareto, ..KatokOptions::default() };
    for delta in [0.1, 0.5] {
        let g = tree.cost(0.7, delta, &KatokOptions::default()).unwrap();
        let exact = tree.cost(0.7, delta, &pareto).unwrap().upper;
        assert!(g.lower <= exact * (1.0 + 1e-12) && exact <= g.upper * (1.0 + 1e-12));
    }
}

#[test]
fn katok_never_exceeds_bowen() {
    let mu = Measure::uniform(2);
    let p = pressure_problem(3, 0.25, 3);
    let tree = KatokTree::new(&p, &mu).unwrap();
    for delta in [0.01, 0.2] {
        for s in [0.5, 1.0, 1.5] {
            let k = tree.cost(s, delta, &KatokOptions::default()).unwrap().upper;
            assert!(k <= cover_cost(&p, s).unwrap());
        }
    }
}

#[test]
fn katok_rejects_bad_delta() {
    let mu = Measure::uniform(2);
    let tree = KatokTree::new(&pressure_problem(3, 0.0, 0), &mu).unwrap();
    assert!(tree.cost(0.0, 0.0, &KatokOptions::default()).is_err());
    assert!(tree.cost(0.0, 1.0, &KatokOptions::default()).is_err());
}

#[test]
fn katok_uniform_count_uses_strict_mass() {
    // L = 4 uniform leaves of mass 1/16; mass > 1/2 needs 9 of them
    let mu = Measure::uniform(2);
    let p = CoverProblem::with_depth_extra(shift(2), Target::Whole, Potential::zero(2), 4, 0.0, 0).unwrap();
    let tree = KatokTree::new(&p, &mu).unwrap();
    let k = tree.cost(0.0, 0.5, &KatokOptions::default()).unwrap();
    assert!((k.upper - 9.0).abs() < 1e-12);
}
