//! Probability measures with exact ball masses, Monte Carlo sampling, the
//! lower neutralized Brin–Katok local pressure and the Katok pressure.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::katok::{katok_estimate, KatokEstimate, KatokOptions, KatokTree};
use crate::cover::{CoverError, CoverProblem, SearchOptions};
use crate::potentials::{Potential, PotentialError};
use crate::systems::{
    check_epsilon, Ball, BallGeometry, CirclePoint, Point, Symbol, SymbolicPoint, SymbolicSystem,
    System, SystemError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("probabilities must be finite, nonnegative and sum to 1 (sum = {0})")]
    NotProbability(f64),
    #[error("markov matrix must be square with stochastic rows")]
    NotStochastic,
    #[error("stationary vector violates piP = pi by {0}")]
    NotStationary(f64),
    #[error("measure does not match the system: {0}")]
    Incompatible(String),
    #[error("tree measure is not conservative at {0:?}")]
    NotConservative(Vec<Symbol>),
    #[error("cylinder of length {len} is deeper than the tree measure depth {depth}")]
    BeyondDepth { len: usize, depth: usize },
    #[error("point has zero ball mass at order {0}")]
    ZeroMass(usize),
    #[error("need n_max > N and at least 2 samples")]
    InvalidSampling,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Cover(#[from] CoverError),
}

/// Tolerance on probability vectors summing to one.
pub const PROB_TOL: f64 = 1e-12;
/// Tolerance on `πP = π`.
pub const STATIONARY_TOL: f64 = 1e-10;

/// A cylinder mass table at depth `D`; every node's mass is the sum of its
/// children's.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeMeasure {
    alphabet_size: usize,
    depth: usize,
    masses: HashMap<Vec<Symbol>, f64>,
}

impl TreeMeasure {
    /// Builds from depth-`D` leaf masses; internal masses are summed bottom-up
    /// in symbol order, so conservation holds by construction.
    pub fn from_leaves(
        alphabet_size: usize,
        depth: usize,
        leaves: impl IntoIterator<Item = (Vec<Symbol>, f64)>,
    ) -> Result<Self, MeasureError> {
        let mut level: Vec<(Vec<Symbol>, f64)> = Vec::new();
        for (w, m) in leaves {
            if w.len() != depth || w.iter().any(|&a| a as usize >= alphabet_size) {
                return Err(MeasureError::Incompatible(format!("leaf {w:?} at depth {depth}")));
            }
            if !(m.is_finite() && m >= 0.0) {
                return Err(MeasureError::NotProbability(m));
            }
            if m > 0.0 {
                level.push((w, m));
            }
        }
        level.sort_by(|a, b| a.0.cmp(&b.0));
        if level.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(MeasureError::Incompatible("duplicate leaf".into()));
        }
        let mut masses = HashMap::new();
        for _ in 0..depth {
            let mut parents: Vec<(Vec<Symbol>, f64)> = Vec::new();
            for (w, m) in &level {
                let parent = &w[..w.len() - 1];
                match parents.last_mut() {
                    Some((p, total)) if p.as_slice() == parent => *total += m,
                    _ => parents.push((parent.to_vec(), *m)),
                }
            }
            masses.extend(level);
            level = parents;
        }
        masses.extend(level);
        let total = masses.get(&Vec::new()).copied().unwrap_or(0.0);
        if (total - 1.0).abs() > PROB_TOL {
            return Err(MeasureError::NotProbability(total));
        }
        Ok(Self {
            alphabet_size,
            depth,
            masses,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn mass(&self, w: &[Symbol]) -> Option<f64> {
        self.masses.get(w).copied()
    }

    /// Leaf words and masses in lexicographic order.
    pub fn leaves(&self) -> Vec<(Vec<Symbol>, f64)> {
        let mut v: Vec<_> = self
            .masses
            .iter()
            .filter(|(w, _)| w.len() == self.depth)
            .map(|(w, m)| (w.clone(), *m))
            .collect();
        v.sort_by(|a, b| a.0.cmp(&b.0));
        v
    }

    /// Checks that every node's mass equals the ordered sum of its children.
    pub fn check_conservation(&self) -> Result<(), MeasureError> {
        for (w, &m) in &self.masses {
            if w.len() == self.depth {
                continue;
            }
            let mut sum = 0.0;
            for a in 0..self.alphabet_size as Symbol {
                let mut c = w.clone();
                c.push(a);
                sum += self.masses.get(&c).copied().unwrap_or(0.0);
            }
            if sum != m {
                return Err(MeasureError::NotConservative(w.clone()));
            }
        }
        Ok(())
    }

    /// Moves `amount` of mass from leaf `from` to leaf `to` (for mutation tests).
    pub fn corrupted(&self, from: &[Symbol], to: &[Symbol], amount: f64) -> Result<Self, MeasureError> {
        let mut leaves: HashMap<Vec<Symbol>, f64> = self.leaves().into_iter().collect();
        *leaves.entry(from.to_vec()).or_insert(0.0) -= amount;
        *leaves.entry(to.to_vec()).or_insert(0.0) += amount;
        Self::from_leaves(self.alphabet_size, self.depth, leaves)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Bernoulli(Vec<f64>),
    Markov { p: Vec<Vec<f64>>, pi: Vec<f64> },
    Lebesgue,
    FrostmanTree(TreeMeasure),
}

fn check_prob(p: &[f64]) -> Result<(), MeasureError> {
    let sum: f64 = p.iter().sum();
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (sum - 1.0).abs() > PROB_TOL {
        return Err(MeasureError::NotProbability(sum));
    }
    Ok(())
}

/// Stationary vector of an irreducible stochastic matrix.
pub fn stationary_vector(p: &[Vec<f64>]) -> Result<Vec<f64>, MeasureError> {
    let m = p.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            a[(i, j)] = p[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(m);
    b[m - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or(MeasureError::NotStochastic)?;
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

impl Measure {
    pub fn bernoulli(p: Vec<f64>) -> Result<Self, MeasureError> {
        check_prob(&p)?;
        Ok(Measure::Bernoulli(p))
    }

    pub fn uniform(m: usize) -> Self {
        Measure::Bernoulli(vec![1.0 / m as f64; m])
    }

    /// Markov measure started from the stationary vector (computed when absent).
    pub fn markov(p: Vec<Vec<f64>>, pi: Option<Vec<f64>>) -> Result<Self, MeasureError> {
        let m = p.len();
        if m == 0 || p.iter().any(|r| r.len() != m) {
            return Err(MeasureError::NotStochastic);
        }
        for row in &p {
            check_prob(row).map_err(|_| MeasureError::NotStochastic)?;
        }
        let pi = match pi {
            Some(pi) => pi,
            None => stationary_vector(&p)?,
        };
        if pi.len() != m {
            return Err(MeasureError::NotStochastic);
        }
        check_prob(&pi)?;
        let defect = (0..m)
            .map(|j| ((0..m).map(|i| pi[i] * p[i][j]).sum::<f64>() - pi[j]).abs())
            .fold(0.0, f64::max);
        if defect > STATIONARY_TOL {
            return Err(MeasureError::NotStationary(defect));
        }
        Ok(Measure::Markov { p, pi })
    }

    /// Checks that the measure lives on the system's space.
    pub fn validate(&self, sys: &System) -> Result<(), MeasureError> {
        let bad = |s: &str| Err(MeasureError::Incompatible(s.into()));
        match (self, sys) {
            (Measure::Bernoulli(p), System::Shift(s)) => {
                if p.len() != s.alphabet_size() {
                    return bad("probability vector length differs from alphabet size");
                }
                for a in 0..p.len() {
                    for b in 0..p.len() {
                        if p[a] > 0.0 && p[b] > 0.0 && !s.allowed(a as Symbol, b as Symbol) {
                            return bad("bernoulli support is not inside the subshift");
                        }
                    }
                }
                Ok(())
            }
            (Measure::Markov { p, .. }, System::Shift(s)) => {
                if p.len() != s.alphabet_size() {
                    return bad("matrix size differs from alphabet size");
                }
                for (a, row) in p.iter().enumerate() {
                    for (b, &v) in row.iter().enumerate() {
                        if v > 0.0 && !s.allowed(a as Symbol, b as Symbol) {
                            return bad("markov transition outside the subshift");
                        }
                    }
                }
                Ok(())
            }
            (Measure::FrostmanTree(t), System::Shift(s)) => {
                if t.alphabet_size != s.alphabet_size() {
                    return bad("tree measure alphabet differs");
                }
                if t.masses.keys().any(|w| w.len() > 1 && !s.word_allowed(w)) {
                    return bad("tree measure charges a forbidden word");
                }
                Ok(())
            }
            (Measure::Lebesgue, System::Circle(_)) => Ok(()),
            _ => bad("measure kind does not fit the system kind"),
        }
    }

    /// `μ([w])`, exact up to float rounding of the product.
    pub fn cylinder_mass(&self, w: &[Symbol]) -> Result<f64, MeasureError> {
        Ok(match self {
            Measure::Bernoulli(p) => w.iter().map(|&a| p[a as usize]).product(),
            Measure::Markov { p, pi } => match w.first() {
                None => 1.0,
                Some(&a) => w.windows(2).fold(pi[a as usize], |acc, t| acc * p[t[0] as usize][t[1] as usize]),
            },
            Measure::FrostmanTree(t) => {
                if w.len() > t.depth {
                    return match t.mass(&w[..t.depth]) {
                        None => Ok(0.0),
                        Some(_) => Err(MeasureError::BeyondDepth { len: w.len(), depth: t.depth }),
                    };
                }
                t.mass(w).unwrap_or(0.0)
            }
            Measure::Lebesgue => return Err(MeasureError::Incompatible("lebesgue has no cylinders".into())),
        })
    }

    /// `log μ([x_0 .. x_{k-1}])` for `k = 0..=len`.
    pub fn log_prefix_masses(&self, x: &SymbolicPoint, len: usize) -> Result<Vec<f64>, MeasureError> {
        let mut out = Vec::with_capacity(len + 1);
        out.push(0.0);
        match self {
            Measure::Bernoulli(p) => {
                let mut acc = 0.0;
                for i in 0..len {
                    acc += p[x.symbol(i) as usize].ln();
                    out.push(acc);
                }
            }
            Measure::Markov { p, pi } => {
                let mut acc = 0.0;
                for i in 0..len {
                    let a = x.symbol(i) as usize;
                    acc += if i == 0 { pi[a].ln() } else { p[x.symbol(i - 1) as usize][a].ln() };
                    out.push(acc);
                }
            }
            _ => {
                for k in 1..=len {
                    out.push(self.cylinder_mass(&x.prefix(k))?.ln());
                }
            }
        }
        Ok(out)
    }

    /// Exact `μ(B)`.
    pub fn ball_mass(&self, ball: &Ball) -> Result<f64, MeasureError> {
        match (&ball.geometry, self) {
            (BallGeometry::Arc { radius }, Measure::Lebesgue) => Ok((2.0 * radius).min(1.0)),
            (BallGeometry::Cylinder(w), m) if !matches!(m, Measure::Lebesgue) => self.cylinder_mass(w),
            _ => Err(MeasureError::Incompatible("measure kind does not fit the ball".into())),
        }
    }

    /// Entropy rate `h(μ)` for Bernoulli and Markov measures.
    pub fn entropy(&self) -> Option<f64> {
        let h = |p: &[f64]| -> f64 { p.iter().filter(|&&v| v > 0.0).map(|v| -v * v.ln()).sum() };
        match self {
            Measure::Bernoulli(p) => Some(h(p)),
            Measure::Markov { p, pi } => Some(pi.iter().zip(p).map(|(w, row)| w * h(row)).sum()),
            _ => None,
        }
    }

    /// `∫ φ dμ` for an additive per-symbol potential.
    pub fn mean_of(&self, values: &[f64]) -> Option<f64> {
        match self {
            Measure::Bernoulli(p) => Some(p.iter().zip(values).map(|(a, b)| a * b).sum()),
            Measure::Markov { pi, .. } => Some(pi.iter().zip(values).map(|(a, b)| a * b).sum()),
            _ => None,
        }
    }

    /// Draws a point whose first `length` coordinates follow `μ`.
    pub fn sample(&self, sys: &System, length: usize, seed: u64) -> Result<SampledPoint, MeasureError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(sys, length, &mut rng)
    }

    fn sample_with(&self, sys: &System, length: usize, rng: &mut impl Rng) -> Result<SampledPoint, MeasureError> {
        let weighted = |w: &[f64]| WeightedIndex::new(w).map_err(|_| MeasureError::NotProbability(w.iter().sum()));
        let word: Vec<Symbol> = match self {
            Measure::Lebesgue => {
                let k: u64 = rng.gen_range(0..1u64 << 52);
                let p = CirclePoint::new(k, 1u64 << 52)?;
                return Ok(SampledPoint { point: Point::Circle(p), exact_len: usize::MAX });
            }
            Measure::Bernoulli(p) => {
                let d = weighted(p)?;
                (0..length).map(|_| d.sample(rng) as Symbol).collect()
            }
            Measure::Markov { p, pi } => {
                let rows: Vec<_> = p.iter().map(|r| weighted(r)).collect::<Result<_, _>>()?;
                let mut w = Vec::with_capacity(length);
                if length > 0 {
                    w.push(weighted(pi)?.sample(rng) as Symbol);
                }
                while w.len() < length {
                    let last = *w.last().expect("nonempty") as usize;
                    w.push(rows[last].sample(rng) as Symbol);
                }
                w
            }
            Measure::FrostmanTree(t) => {
                let mut w = Vec::with_capacity(length);
                while w.len() < length.min(t.depth) {
                    let masses: Vec<f64> = (0..t.alphabet_size as Symbol)
                        .map(|a| {
                            let mut c = w.clone();
                            c.push(a);
                            t.mass(&c).unwrap_or(0.0)
                        })
                        .collect();
                    w.push(weighted(&masses)?.sample(rng) as Symbol);
                }
                w
            }
        };
        let System::Shift(s) = sys else {
            return Err(MeasureError::Incompatible("symbolic measure on the circle".into()));
        };
        let exact_len = word.len();
        Ok(SampledPoint {
            point: Point::Symbolic(complete_with(s, word)),
            exact_len,
        })
    }
}

fn complete_with(s: &SymbolicSystem, word: Vec<Symbol>) -> SymbolicPoint {
    s.complete_point(word)
}

/// A sampled point; coordinates past `exact_len` are a periodic
/// continuation, not draws from the measure.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPoint {
    pub point: Point,
    pub exact_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub n: usize,
    pub quotient: f64,
}

/// `n ↦ (-log μ(B_n(x, e^{-nε})) + φ_n(x)) / n` for `n = N..=n_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPressureTrace {
    pub point: String,
    pub epsilon: f64,
    pub min_order: usize,
    pub n_max: usize,
    pub window: (usize, usize),
    pub values: Vec<TracePoint>,
    /// Minimum over the window.
    pub liminf: f64,
    /// First order with zero ball mass, if any.
    pub zero_mass_at: Option<usize>,
}

/// Default liminf window `[n_max / 2, n_max]`, clipped to start at `N`.
pub fn default_window(min_order: usize, n_max: usize) -> (usize, usize) {
    ((n_max / 2).max(min_order), n_max)
}

#[allow(clippy::too_many_arguments)]
pub fn bk_local(
    mu: &Measure,
    potential: &Potential,
    sys: &System,
    epsilon: f64,
    x: &Point,
    min_order: usize,
    n_max: usize,
    window: Option<(usize, usize)>,
) -> Result<LocalPressureTrace, MeasureError> {
    check_epsilon(epsilon)?;
    if min_order == 0 || n_max <= min_order {
        return Err(MeasureError::InvalidSampling);
    }
    let window = window.unwrap_or_else(|| default_window(min_order, n_max));
    let mut values = Vec::with_capacity(n_max - min_order + 1);
    let mut zero_mass_at = None;
    let mut push = |n: usize, neg_log_mass: f64, phi: f64| {
        let q = if neg_log_mass.is_infinite() {
            zero_mass_at.get_or_insert(n);
            f64::INFINITY
        } else {
            (neg_log_mass + phi) / n as f64
        };
        values.push(TracePoint { n, quotient: q });
    };
    match (sys, x) {
        (System::Shift(s), Point::Symbolic(p)) => {
            let logs = mu.log_prefix_masses(p, s.cylinder_length(n_max, epsilon))?;
            let phis = potential_prefix_values(potential, p, min_order, n_max)?;
            for n in min_order..=n_max {
                push(n, -logs[s.cylinder_length(n, epsilon)], phis[n - min_order]);
            }
        }
        (System::Circle(_), Point::Circle(_)) => {
            for n in min_order..=n_max {
                let ball = crate::systems::neutralized_ball(sys, x, n, epsilon)?;
                let mass = mu.ball_mass(&ball)?;
                push(n, -mass.ln(), potential.evaluate(sys, x, n)?);
            }
        }
        _ => return Err(SystemError::KindMismatch.into()),
    }
    let liminf = values
        .iter()
        .filter(|t| t.n >= window.0 && t.n <= window.1)
        .map(|t| t.quotient)
        .fold(f64::INFINITY, f64::min);
    Ok(LocalPressureTrace {
        point: match x {
            Point::Symbolic(p) => p.to_string(),
            Point::Circle(c) => c.to_string(),
        },
        epsilon,
        min_order,
        n_max,
        window,
        values,
        liminf,
        zero_mass_at,
    })
}

/// `φ_n(x)` for `n = from..=to`, incrementally for additive and cocycle kinds.
fn potential_prefix_values(
    potential: &Potential,
    x: &SymbolicPoint,
    from: usize,
    to: usize,
) -> Result<Vec<f64>, MeasureError> {
    use crate::potentials::{PotentialKind, ScaledProduct};
    let offset = potential.offset();
    let mut out = Vec::with_capacity(to - from + 1);
    match potential.kind() {
        PotentialKind::Symbolic(v) => {
            let mut acc = 0.0;
            for n in 1..=to {
                acc += v[x.symbol(n - 1) as usize];
                if n >= from {
                    out.push(acc + n as f64 * offset);
                }
            }
        }
        PotentialKind::Cocycle(c) => {
            let mut prod = ScaledProduct::identity(c.dim());
            for n in 1..=to {
                prod.push(&c.matrices()[x.symbol(n - 1) as usize]);
                if n >= from {
                    out.push(prod.log_norm() + n as f64 * offset);
                }
            }
        }
        _ => {
            for n in from..=to {
                let len = potential.word_len(n)?;
                out.push(potential.evaluate_word(&x.prefix(len), n)?);
            }
        }
    }
    Ok(out)
}

/// Monte Carlo estimate of the integrated lower Brin–Katok pressure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub min_order: usize,
    pub n_max: usize,
    pub window: (usize, usize),
    pub liminfs: Vec<f64>,
}

/// Per-sample seeds drawn from the master seed, independent of worker count.
pub fn sample_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn bk_pressure(
    mu: &Measure,
    potential: &Potential,
    sys: &System,
    epsilon: f64,
    samples: usize,
    seed: u64,
    min_order: usize,
    n_max: usize,
) -> Result<BkEstimate, MeasureError> {
    if samples < 2 || min_order == 0 || n_max <= min_order {
        return Err(MeasureError::InvalidSampling);
    }
    mu.validate(sys)?;
    let length = match sys {
        System::Shift(s) => s.cylinder_length(n_max, epsilon),
        System::Circle(_) => 0,
    };
    let window = default_window(min_order, n_max);
    let liminfs: Vec<f64> = sample_seeds(seed, samples)
        .par_iter()
        .map(|&sd| -> Result<f64, MeasureError> {
            let x = mu.sample(sys, length, sd)?;
            let t = bk_local(mu, potential, sys, epsilon, &x.point, min_order, n_max, Some(window))?;
            match t.zero_mass_at {
                Some(n) => Err(MeasureError::ZeroMass(n)),
                None => Ok(t.liminf),
            }
        })
        .collect::<Result<_, _>>()?;
    let k = liminfs.len() as f64;
    let mean = liminfs.iter().sum::<f64>() / k;
    let var = liminfs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    Ok(BkEstimate {
        mean,
        stderr: (var / k).sqrt(),
        samples,
        min_order,
        n_max,
        window,
        liminfs,
    })
}

/// Katok pressure of `μ` for a ladder of `δ` values, computed on the
/// problem's truncation (the target is ignored: Katok covers need only
/// capture `μ`-mass).
pub fn katok_pressure(
    mu: &Measure,
    problem: &CoverProblem,
    deltas: &[f64],
    opts: &KatokOptions,
) -> Result<Vec<KatokEstimate>, MeasureError> {
    mu.validate(&problem.system)?;
    let tree = KatokTree::new(problem, mu)?;
    let search = SearchOptions::default();
    deltas
        .iter()
        .map(|&d| katok_estimate(&tree, d, opts, &search).map_err(MeasureError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{neutralized_ball, CircleSystem};

    fn shift(m: usize) -> System {
        System::Shift(SymbolicSystem::full_shift(m).unwrap())
    }

    #[test]
    fn uniform_cylinder_mass() {
        let sys = shift(2);
        let x: Point = Point::Symbolic("(0110)".parse().unwrap());
        let b = neutralized_ball(&sys, &x, 10, 0.3).unwrap();
        assert_eq!(Measure::uniform(2).ball_mass(&b).unwrap(), 2f64.powi(-13));
    }

    #[test]
    fn markov_product_and_total_mass() {
        let p = vec![vec![0.0, 1.0], vec![0.6, 0.4]];
        let mu = Measure::markov(p.clone(), None).unwrap();
        let Measure::Markov { pi, .. } = &mu else { unreachable!() };
        let m = mu.cylinder_mass(&[0, 1, 0, 1]).unwrap();
        assert!((m - pi[0] * p[0][1] * p[1][0] * p[0][1]).abs() < 1e-16);
        let s = SymbolicSystem::full_shift(2).unwrap();
        let total: f64 = s.words(4).iter().map(|w| mu.cylinder_mass(w).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lebesgue_arc_mass() {
        let sys = System::Circle(CircleSystem::new(2).unwrap());
        let b = neutralized_ball(&sys, &Point::Circle(CirclePoint::zero()), 3, 0.5).unwrap();
        assert_eq!(Measure::Lebesgue.ball_mass(&b).unwrap(), 2.0 * b.radius().unwrap());
    }

    #[test]
    fn degenerate_bernoulli_samples_zeros() {
        let sys = shift(2);
        let x = Measure::bernoulli(vec![1.0, 0.0]).unwrap().sample(&sys, 50, 9).unwrap();
        let Point::Symbolic(p) = x.point else { unreachable!() };
        assert!(p.prefix(50).iter().all(|&a| a == 0));
    }

    #[test]
    fn trace_entry_matches_cylinder_length() {
        let sys = shift(2);
        let x = Point::Symbolic("(01)".parse().unwrap());
        let t = bk_local(&Measure::uniform(2), &Potential::zero(2), &sys, 0.5, &x, 1, 20, None).unwrap();
        let q10 = t.values.iter().find(|v| v.n == 10).unwrap().quotient;
        assert!((q10 - 1.5 * std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(t.values.len(), 20);
        assert!(t.values.iter().filter(|v| v.n >= 10).all(|v| v.quotient >= t.liminf));
    }

    #[test]
    fn zero_mass_is_reported() {
        let sys = shift(2);
        let x = Point::Symbolic("(1)".parse().unwrap());
        let mu = Measure::bernoulli(vec![1.0, 0.0]).unwrap();
        let t = bk_local(&mu, &Potential::zero(2), &sys, 0.1, &x, 1, 5, None).unwrap();
        assert_eq!(t.zero_mass_at, Some(1));
        assert!(t.liminf.is_infinite());
    }

    #[test]
    fn tree_measure_conservation_and_lookup() {
        let t = TreeMeasure::from_leaves(2, 2, vec![(vec![0, 0], 0.25), (vec![0, 1], 0.5), (vec![1, 1], 0.25)]).unwrap();
        t.check_conservation().unwrap();
        assert_eq!(t.mass(&[0]), Some(0.75));
        let mu = Measure::FrostmanTree(t);
        assert_eq!(mu.cylinder_mass(&[1, 0]).unwrap(), 0.0);
        assert!(mu.cylinder_mass(&[0, 1, 1]).is_err());
        assert_eq!(mu.cylinder_mass(&[1, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn invalid_measures_rejected() {
        assert!(Measure::bernoulli(vec![0.5, 0.6]).is_err());
        assert!(Measure::markov(vec![vec![0.5, 0.5], vec![1.0, 0.1]], None).is_err());
        assert!(Measure::markov(vec![vec![0.5, 0.5], vec![0.5, 0.5]], Some(vec![0.9, 0.1])).is_err());
        let golden = System::Shift(SymbolicSystem::new(vec![vec![true, true], vec![true, false]]).unwrap());
        assert!(Measure::uniform(2).validate(&golden).is_err());
    }
}
