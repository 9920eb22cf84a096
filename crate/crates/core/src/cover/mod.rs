//! Cover optimization for the neutralized Bowen pressure: the costs
//! `M^s_{N,ε}`, their center-value variants, the weighted (fractional)
//! relaxation, the measure-constrained Katok cost, critical exponents, and
//! the 5r covering lemma.
//!
//! Admissible balls are neutralized balls of order `n >= N` whose geometry
//! fits above the truncation depth `D_max`. On a shift a ball of order `n`
//! is a cylinder of length `L(n, ε)`; on the circle it is an arc placed on
//! the `m`-adic interval of level `d(n)` (the smallest level whose intervals
//! fit inside the arc). Since `L` and `d` are strictly increasing, each depth
//! carries at most one order and the cover problem is a recursion on the
//! cylinder tree.

pub mod brute;
pub mod compressed;
pub mod katok;
pub mod lp;
pub mod tree;
pub mod vitali;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::potentials::{circle_gap, Potential, PotentialError, ValueMode};
use crate::systems::{check_epsilon, CirclePoint, Point, Symbol, System, SystemError};

pub use compressed::CompressedPlan;
pub use tree::BallTree;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoverError {
    #[error("minimum order N must be >= 1")]
    InvalidOrder,
    #[error("truncation depth {depth} is below the first admissible depth {needed}")]
    DepthTooSmall { depth: usize, needed: usize },
    #[error("truncation failure: no cover exists within depth {0}")]
    Truncation(usize),
    #[error("target cylinder {0:?} is not an allowed word")]
    InvalidTarget(Vec<Symbol>),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("cost never crosses 1 on [{lo}, {hi}]: cost({lo}) = {cost_lo}, cost({hi}) = {cost_hi}")]
    NotBracketable {
        lo: f64,
        hi: f64,
        cost_lo: f64,
        cost_hi: f64,
    },
    #[error("cost evaluated to NaN at s = {0}")]
    NotANumber(f64),
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("frontier thinning slack {slack} exceeds the allowed {allowed}")]
    FrontierBudget { slack: f64, allowed: f64 },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// The set `Z` to be covered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    /// The whole subshift or circle.
    Whole,
    /// A finite union of cylinders (empty means `Z = ∅`).
    Cylinders(Vec<Vec<Symbol>>),
}

impl Target {
    pub fn is_whole(&self) -> bool {
        matches!(self, Target::Whole)
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Target::Cylinders(z) if z.is_empty())
    }

    /// Whether the cylinder of `w` meets the target.
    pub fn meets(&self, w: &[Symbol]) -> bool {
        match self {
            Target::Whole => true,
            Target::Cylinders(zs) => zs.iter().any(|z| z.starts_with(w) || w.starts_with(z)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    #[default]
    Auto,
    Explicit,
    Compressed,
    Homogeneous,
}

/// Explicit trees up to this many estimated nodes are preferred by `Auto`.
const AUTO_EXPLICIT_NODES: f64 = (1u64 << 20) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverProblem {
    pub system: System,
    pub target: Target,
    pub potential: Potential,
    pub min_order: usize,
    pub epsilon: f64,
    pub max_depth: usize,
    pub value_mode: ValueMode,
}

impl CoverProblem {
    pub fn new(
        system: System,
        target: Target,
        potential: Potential,
        min_order: usize,
        epsilon: f64,
        max_depth: usize,
    ) -> Result<Self, CoverError> {
        let p = Self {
            system,
            target,
            potential,
            min_order,
            epsilon,
            max_depth,
            value_mode: ValueMode::Sup,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same problem truncated at `L(N, ε) + extra`.
    pub fn with_depth_extra(
        system: System,
        target: Target,
        potential: Potential,
        min_order: usize,
        epsilon: f64,
        extra: usize,
    ) -> Result<Self, CoverError> {
        check_epsilon(epsilon)?;
        if min_order == 0 {
            return Err(CoverError::InvalidOrder);
        }
        let base = depth_of_order(&system, min_order, epsilon);
        Self::new(system, target, potential, min_order, epsilon, base + extra)
    }

    pub fn with_mode(mut self, mode: ValueMode) -> Self {
        self.value_mode = mode;
        self
    }

    pub fn with_target(mut self, target: Target) -> Result<Self, CoverError> {
        self.target = target;
        self.validate()?;
        Ok(self)
    }

    pub fn with_potential(mut self, potential: Potential) -> Result<Self, CoverError> {
        self.potential = potential;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_depth(mut self, depth: usize) -> Result<Self, CoverError> {
        self.max_depth = depth;
        self.validate()?;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, CoverError> {
        self.epsilon = epsilon;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), CoverError> {
        if self.min_order == 0 {
            return Err(CoverError::InvalidOrder);
        }
        check_epsilon(self.epsilon)?;
        self.potential.validate(&self.system)?;
        let needed = self.depth_of_order(self.min_order);
        if self.max_depth < needed {
            return Err(CoverError::DepthTooSmall {
                depth: self.max_depth,
                needed,
            });
        }
        match (&self.system, &self.target) {
            (System::Circle(c), Target::Whole) => {
                for n in self.orders() {
                    c.arc_radius(n, self.epsilon)?;
                }
            }
            (System::Circle(_), Target::Cylinders(_)) => {
                return Err(CoverError::Unsupported("circle targets must be the whole circle".into()))
            }
            (System::Shift(s), Target::Cylinders(zs)) => {
                if let Some(z) = zs.iter().find(|z| z.is_empty() || !s.word_allowed(z)) {
                    return Err(CoverError::InvalidTarget(z.clone()));
                }
            }
            (System::Shift(_), Target::Whole) => {}
        }
        Ok(())
    }

    /// Depth at which balls of order `n` sit.
    pub fn depth_of_order(&self, n: usize) -> usize {
        depth_of_order(&self.system, n, self.epsilon)
    }

    /// The admissible order at depth `d`, if any.
    pub fn order_at_depth(&self, d: usize) -> Option<usize> {
        (self.min_order..=d + 1).find(|&n| self.depth_of_order(n) >= d)
            .filter(|&n| self.depth_of_order(n) == d)
    }

    /// Admissible orders `N..=n_max(D_max)`.
    pub fn orders(&self) -> Vec<usize> {
        (self.min_order..)
            .take_while(|&n| self.depth_of_order(n) <= self.max_depth)
            .collect()
    }

    /// The `φ`-part of the cost of the ball of order `n` on the cylinder
    /// (or `m`-adic interval) of `word`.
    pub fn ball_value(&self, word: &[Symbol], n: usize) -> Result<f64, CoverError> {
        match &self.system {
            System::Shift(s) => {
                let (lo, hi) = self.potential.cylinder_extremes(s, word, n)?;
                Ok(match self.value_mode {
                    ValueMode::Sup => hi,
                    ValueMode::Center => lo,
                })
            }
            System::Circle(c) => {
                let center = interval_midpoint(c.degree(), word)?;
                let v = self.potential.evaluate(&self.system, &Point::Circle(center), n)?;
                Ok(match self.value_mode {
                    ValueMode::Center => v,
                    ValueMode::Sup => {
                        let lip = self.potential.circle_function().map_or(0.0, |f| f.lipschitz());
                        v + circle_gap(lip, c.degree(), c.arc_radius(n, self.epsilon)?, n)
                    }
                })
            }
        }
    }

    fn estimated_nodes(&self) -> f64 {
        let m = self.system.alphabet_size() as f64;
        (0..=self.max_depth).map(|d| m.powi(d as i32)).sum()
    }

    /// Precomputes the engine-specific structure for repeated cost queries.
    pub fn prepare(&self, engine: Engine) -> Result<PreparedCover, CoverError> {
        let engine = match engine {
            Engine::Auto => {
                if HomogeneousPlan::applicable(self) {
                    Engine::Homogeneous
                } else if CompressedPlan::applicable(self) && self.estimated_nodes() > AUTO_EXPLICIT_NODES {
                    Engine::Compressed
                } else {
                    Engine::Explicit
                }
            }
            e => e,
        };
        Ok(match engine {
            Engine::Explicit => PreparedCover::Explicit(BallTree::build(self, None, false)?),
            Engine::Compressed => PreparedCover::Compressed(CompressedPlan::new(self)?),
            Engine::Homogeneous => PreparedCover::Homogeneous(HomogeneousPlan::new(self)?),
            Engine::Auto => unreachable!(),
        })
    }
}

pub(crate) fn depth_of_order(system: &System, n: usize, epsilon: f64) -> usize {
    match system {
        System::Shift(s) => s.cylinder_length(n, epsilon),
        System::Circle(c) => c.cover_depth(n, epsilon),
    }
}

/// Midpoint of the `m`-adic interval with digits `word`.
pub fn interval_midpoint(degree: u64, word: &[Symbol]) -> Result<CirclePoint, CoverError> {
    let too_deep = || CoverError::TooLarge(format!("m-adic level {} overflows", word.len()));
    let mut k: u64 = 0;
    let mut scale: u64 = 1;
    for &a in word {
        k = k.checked_mul(degree).and_then(|v| v.checked_add(a as u64)).ok_or_else(too_deep)?;
        scale = scale.checked_mul(degree).ok_or_else(too_deep)?;
    }
    let den = scale.checked_mul(2).ok_or_else(too_deep)?;
    Ok(CirclePoint::new(2 * k + 1, den)?)
}

/// Circle covers with a constant potential: every node of a level costs the
/// same, so the recursion runs on one value per depth.
#[derive(Debug, Clone)]
pub struct HomogeneousPlan {
    branching: f64,
    /// `(order, value)` per depth.
    balls: Vec<Option<(usize, f64)>>,
}

impl HomogeneousPlan {
    pub fn applicable(p: &CoverProblem) -> bool {
        matches!(p.system, System::Circle(_)) && p.potential.circle_constant().is_some()
    }

    pub fn new(p: &CoverProblem) -> Result<Self, CoverError> {
        let c = p
            .potential
            .circle_constant()
            .filter(|_| matches!(p.system, System::Circle(_)))
            .ok_or_else(|| CoverError::Unsupported("homogeneous engine needs a constant circle potential".into()))?;
        Ok(Self {
            branching: p.system.alphabet_size() as f64,
            balls: (0..=p.max_depth)
                .map(|d| p.order_at_depth(d).map(|n| (n, n as f64 * c)))
                .collect(),
        })
    }

    pub fn cost(&self, s: f64, depth: usize) -> f64 {
        let mut below = f64::INFINITY;
        for d in (0..=depth).rev() {
            let own = self.balls[d].map(|(n, v)| (-(n as f64) * s + v).exp());
            let children = (d < depth).then(|| self.branching * below);
            below = match (own, children) {
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
        below
    }
}

#[derive(Debug, Clone)]
pub enum PreparedCover {
    Explicit(BallTree),
    Compressed(CompressedPlan),
    Homogeneous(HomogeneousPlan),
}

impl PreparedCover {
    pub fn engine(&self) -> Engine {
        match self {
            PreparedCover::Explicit(_) => Engine::Explicit,
            PreparedCover::Compressed(_) => Engine::Compressed,
            PreparedCover::Homogeneous(_) => Engine::Homogeneous,
        }
    }

    pub fn max_depth(&self) -> usize {
        match self {
            PreparedCover::Explicit(t) => t.depth(),
            PreparedCover::Compressed(c) => c.max_depth(),
            PreparedCover::Homogeneous(h) => h.balls.len() - 1,
        }
    }

    /// Raw recursion value; `+∞` when no cover exists.
    pub fn cost_at_depth(&self, s: f64, depth: usize) -> f64 {
        match self {
            PreparedCover::Explicit(t) => t.cost(s, depth.min(t.depth())),
            PreparedCover::Compressed(c) => c.cost(s, depth),
            PreparedCover::Homogeneous(h) => h.cost(s, depth),
        }
    }

    pub fn cost(&self, s: f64) -> f64 {
        self.cost_at_depth(s, self.max_depth())
    }
}

/// `M^s_{N,ε}(Z, Φ)` (or its center-value variant) at the problem's truncation.
pub fn cover_cost(p: &CoverProblem, s: f64) -> Result<f64, CoverError> {
    cover_cost_with(p, s, Engine::Auto)
}

pub fn cover_cost_with(p: &CoverProblem, s: f64, engine: Engine) -> Result<f64, CoverError> {
    let prepared = p.prepare(engine)?;
    checked_cost(&prepared, s, p.max_depth)
}

/// Cost at `s`, with `+∞` reported as a truncation failure unless it comes
/// from overflow of a cover that does exist.
pub fn checked_cost(prepared: &PreparedCover, s: f64, depth: usize) -> Result<f64, CoverError> {
    let c = prepared.cost(s);
    if c.is_nan() {
        Err(CoverError::NotANumber(s))
    } else if c.is_infinite() && !structurally_coverable(prepared) {
        Err(CoverError::Truncation(depth))
    } else {
        Ok(c)
    }
}

/// Cover cost in exact rational arithmetic (explicit tree only).
pub fn cover_cost_exact(p: &CoverProblem, s: f64) -> Result<BigRational, CoverError> {
    BallTree::build(p, None, false)?
        .cost_exact(s)
        .ok_or(CoverError::Truncation(p.max_depth))
}

/// `W^s_{N,ε}` for the target function `f = χ_F`. Balls form a laminar
/// family, so the fractional optimum equals the integral one.
pub fn weighted_cover_cost(p: &CoverProblem, s: f64, f: &Target) -> Result<f64, CoverError> {
    let q = p.clone().with_target(f.clone())?;
    if q.target.is_empty() {
        return Ok(0.0);
    }
    cover_cost(&q, s)
}

/// One sampled point of a cost curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub s: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationDiagnostic {
    pub s: f64,
    pub depth: usize,
    pub cost_at_depth: f64,
    pub previous_depth: usize,
    pub cost_at_previous_depth: f64,
}

/// A critical exponent with its bracket and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub critical_s: f64,
    pub bracket: (f64, f64),
    pub min_order: usize,
    pub epsilon: f64,
    pub max_depth: usize,
    pub metric_base: f64,
    pub mode: ValueMode,
    pub engine: Engine,
    pub cost_curve: Vec<CurvePoint>,
    pub truncation: Option<TruncationDiagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Initial bracket; expanded outward if it does not straddle the root.
    pub initial: (f64, f64),
    pub tolerance: f64,
    /// Offsets from the root at which the cost curve is sampled.
    pub curve_offsets: &'static [f64],
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            initial: (-64.0, 64.0),
            tolerance: 1e-10,
            curve_offsets: &[-0.4, -0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2, 0.4],
        }
    }
}

/// Root of the nonincreasing `cost(s) = 1` by bracketing and safeguarded
/// false position.
/// `+∞` (overflow) counts as `>= 1`. Returns `(lo, hi)` with
/// `cost(lo) >= 1 > cost(hi)`.
pub fn bisect_unit_crossing(
    mut cost: impl FnMut(f64) -> Result<f64, CoverError>,
    opts: &SearchOptions,
) -> Result<(f64, f64), CoverError> {
    let (mut lo, mut hi) = opts.initial;
    let mut eval = |s: f64| -> Result<f64, CoverError> {
        let c = cost(s)?;
        if c.is_nan() {
            Err(CoverError::NotANumber(s))
        } else {
            Ok(c)
        }
    };
    let mut step = (hi - lo).max(1.0);
    let mut c_lo = eval(lo)?;
    let mut tries = 0;
    while c_lo < 1.0 {
        tries += 1;
        hi = lo;
        lo -= step;
        step *= 2.0;
        c_lo = eval(lo)?;
        if tries > 12 {
            let c_hi = eval(hi)?;
            return Err(CoverError::NotBracketable { lo, hi, cost_lo: c_lo, cost_hi: c_hi });
        }
    }
    let mut c_hi = eval(hi)?;
    tries = 0;
    while c_hi >= 1.0 {
        tries += 1;
        lo = hi;
        hi += step;
        step *= 2.0;
        c_hi = eval(hi)?;
        if tries > 12 {
            return Err(CoverError::NotBracketable { lo, hi, cost_lo: c_lo, cost_hi: c_hi });
        }
    }
    // Illinois false position on ln cost, which is close to linear in s near
    // the root; a bisection step is forced whenever the bracket fails to
    // halve over two iterations.
    let (mut g_lo, mut g_hi) = (c_lo.ln(), c_hi.ln());
    let mut kept = 0i8;
    let mut width_before = [hi - lo; 2];
    while hi - lo > opts.tolerance {
        let mid = 0.5 * (lo + hi);
        let stalled = hi - lo > 0.5 * width_before[0];
        let x = if !stalled && g_lo.is_finite() && g_hi.is_finite() && g_lo > g_hi {
            let x = lo + (hi - lo) * g_lo / (g_lo - g_hi);
            let pad = 0.25 * opts.tolerance;
            x.clamp(lo + pad, hi - pad)
        } else {
            mid
        };
        if x <= lo || x >= hi {
            break;
        }
        let w = hi - lo;
        let c = eval(x)?;
        if c >= 1.0 {
            lo = x;
            g_lo = c.ln();
            if kept == 1 {
                g_hi *= 0.5;
            }
            kept = 1;
        } else {
            hi = x;
            g_hi = c.ln();
            if kept == -1 {
                g_lo *= 0.5;
            }
            kept = -1;
        }
        width_before = [width_before[1], w];
    }
    Ok((lo, hi))
}

/// Structural check that every target point has an admissible ball above
/// it within `D_max`, so `+∞` costs can be attributed to overflow.
fn structurally_coverable(prepared: &PreparedCover) -> bool {
    // at s = +huge every finite ball cost underflows to 0, so the value is
    // finite iff a cover exists
    prepared.cost(1e300).is_finite()
}

/// Critical exponent of `cost(s) = 1` with the configured engine.
pub fn critical_exponent(p: &CoverProblem) -> Result<PressureEstimate, CoverError> {
    critical_exponent_with(p, Engine::Auto, &SearchOptions::default())
}

pub fn critical_exponent_with(
    p: &CoverProblem,
    engine: Engine,
    opts: &SearchOptions,
) -> Result<PressureEstimate, CoverError> {
    let prepared = p.prepare(engine)?;
    estimate_from_prepared(p, &prepared, opts)
}

pub fn estimate_from_prepared(
    p: &CoverProblem,
    prepared: &PreparedCover,
    opts: &SearchOptions,
) -> Result<PressureEstimate, CoverError> {
    if p.target.is_empty() {
        return Err(CoverError::NotBracketable {
            lo: opts.initial.0,
            hi: opts.initial.1,
            cost_lo: 0.0,
            cost_hi: 0.0,
        });
    }
    if !structurally_coverable(prepared) {
        return Err(CoverError::Truncation(p.max_depth));
    }
    let (lo, hi) = bisect_unit_crossing(|s| Ok(prepared.cost(s)), opts)?;
    let critical_s = 0.5 * (lo + hi);
    let mut cost_curve: Vec<CurvePoint> = opts
        .curve_offsets
        .iter()
        .map(|o| {
            let s = critical_s + o;
            CurvePoint { s, cost: prepared.cost(s) }
        })
        .collect();
    cost_curve.sort_by(|a, b| a.s.total_cmp(&b.s));
    let depth = prepared.max_depth();
    let first = p.depth_of_order(p.min_order);
    let truncation = (depth > first).then(|| TruncationDiagnostic {
        s: critical_s,
        depth,
        cost_at_depth: prepared.cost_at_depth(critical_s, depth),
        previous_depth: depth - 1,
        cost_at_previous_depth: prepared.cost_at_depth(critical_s, depth - 1),
    });
    Ok(PressureEstimate {
        critical_s,
        bracket: (lo, hi),
        min_order: p.min_order,
        epsilon: p.epsilon,
        max_depth: p.max_depth,
        metric_base: match &p.system {
            System::Shift(s) => s.metric_base(),
            System::Circle(_) => std::f64::consts::E,
        },
        mode: p.value_mode,
        engine: prepared.engine(),
        cost_curve,
        truncation,
    })
}

/// Estimates for a ladder of minimum orders, each truncated at
/// `L(N, ε) + depth_extra`, so the growth in `N` is visible.
pub fn critical_exponent_ladder(
    p: &CoverProblem,
    orders: &[usize],
    depth_extra: usize,
) -> Result<Vec<PressureEstimate>, CoverError> {
    orders
        .iter()
        .map(|&n| {
            let q = CoverProblem::with_depth_extra(
                p.system.clone(),
                p.target.clone(),
                p.potential.clone(),
                n,
                p.epsilon,
                depth_extra,
            )?
            .with_mode(p.value_mode);
            critical_exponent(&q)
        })
        .collect()
}

#[cfg(test)]
mod tests;
