//! Dynamical systems `(X, T, d)`: one-sided subshifts of finite type with the
//! metric `d(x, y) = λ^{-k}` (k = first disagreement) and the expanding circle
//! maps `E_m(x) = m·x mod 1` with the arc metric.
//!
//! Points are exact: symbolic points are eventually periodic sequences and
//! circle points are reduced rationals, so `T^j` can be evaluated for any `j`
//! without rounding.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub type Symbol = u8;

/// Largest alphabet accepted by the text formats (digits then `a..z`).
pub const MAX_ALPHABET: usize = 36;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SystemError {
    #[error("alphabet size must be in 2..={MAX_ALPHABET}, got {0}")]
    InvalidAlphabet(usize),
    #[error("transition matrix must be {expected}x{expected}")]
    TransitionShape { expected: usize },
    #[error("symbol {0} has no allowed successor or predecessor")]
    DeadSymbol(usize),
    #[error("metric base must be finite and > 1, got {0}")]
    InvalidMetricBase(f64),
    #[error("circle degree must be >= 2, got {0}")]
    InvalidDegree(u64),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("point kind does not match system kind")]
    KindMismatch,
    #[error("order must be >= 1")]
    InvalidOrder,
    #[error("epsilon must be finite and >= 0, got {0}")]
    InvalidEpsilon(f64),
    #[error(
        "circle ball of order {order} at epsilon {epsilon} is not an arc: e^(-n eps) = {rho} exceeds {limit}"
    )]
    Resolution {
        order: usize,
        epsilon: f64,
        rho: f64,
        limit: f64,
    },
    #[error("parse error: {0}")]
    Parse(String),
}

/// `floor(q)` that treats values within a relative `1e-9` of an integer as
/// that integer, so decimal inputs like `n = 10, ε = 0.3` give `⌊3⌋ = 3`.
pub(crate) fn snapped_floor(q: f64) -> i64 {
    let r = q.round();
    if (q - r).abs() <= 1e-9 * q.abs().max(1.0) {
        r as i64
    } else {
        q.floor() as i64
    }
}

pub(crate) fn check_epsilon(epsilon: f64) -> Result<(), SystemError> {
    if epsilon.is_finite() && epsilon >= 0.0 {
        Ok(())
    } else {
        Err(SystemError::InvalidEpsilon(epsilon))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolicSystem {
    alphabet_size: usize,
    transitions: Vec<Vec<bool>>,
    metric_base: f64,
    log_base: f64,
}

impl SymbolicSystem {
    pub fn full_shift(alphabet_size: usize) -> Result<Self, SystemError> {
        Self::new(vec![vec![true; alphabet_size]; alphabet_size])
    }

    /// Builds an SFT with metric base `e`.
    pub fn new(transitions: Vec<Vec<bool>>) -> Result<Self, SystemError> {
        let m = transitions.len();
        if !(2..=MAX_ALPHABET).contains(&m) {
            return Err(SystemError::InvalidAlphabet(m));
        }
        if transitions.iter().any(|row| row.len() != m) {
            return Err(SystemError::TransitionShape { expected: m });
        }
        for a in 0..m {
            let has_out = transitions[a].iter().any(|&t| t);
            let has_in = (0..m).any(|b| transitions[b][a]);
            if !has_out || !has_in {
                return Err(SystemError::DeadSymbol(a));
            }
        }
        Ok(Self {
            alphabet_size: m,
            transitions,
            metric_base: std::f64::consts::E,
            log_base: 1.0,
        })
    }

    pub fn with_metric_base(mut self, base: f64) -> Result<Self, SystemError> {
        if !base.is_finite() || base <= 1.0 {
            return Err(SystemError::InvalidMetricBase(base));
        }
        self.metric_base = base;
        self.log_base = if base == std::f64::consts::E {
            1.0
        } else {
            base.ln()
        };
        Ok(self)
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn metric_base(&self) -> f64 {
        self.metric_base
    }

    pub fn log_base(&self) -> f64 {
        self.log_base
    }

    pub fn transitions(&self) -> &[Vec<bool>] {
        &self.transitions
    }

    pub fn is_full_shift(&self) -> bool {
        self.transitions.iter().all(|row| row.iter().all(|&t| t))
    }

    #[inline]
    pub fn allowed(&self, a: Symbol, b: Symbol) -> bool {
        self.transitions[a as usize][b as usize]
    }

    /// Symbols that may follow `prev` (every symbol when `prev` is `None`).
    pub fn successors(&self, prev: Option<Symbol>) -> impl Iterator<Item = Symbol> + '_ {
        (0..self.alphabet_size as Symbol).filter(move |&b| prev.is_none_or(|a| self.allowed(a, b)))
    }

    pub fn word_allowed(&self, word: &[Symbol]) -> bool {
        word.iter().all(|&a| (a as usize) < self.alphabet_size)
            && word.windows(2).all(|w| self.allowed(w[0], w[1]))
    }

    /// All allowed words of the given length, in lexicographic order.
    pub fn words(&self, len: usize) -> Vec<Vec<Symbol>> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            let mut next = Vec::with_capacity(out.len() * self.alphabet_size);
            for w in &out {
                for b in self.successors(w.last().copied()) {
                    let mut ext = w.clone();
                    ext.push(b);
                    next.push(ext);
                }
            }
            out = next;
        }
        out
    }

    /// Length `L(n, ε)` of the cylinder that equals the neutralized ball
    /// `B_n(x, e^{-nε})`: the smallest `k` with `k > n - 1 + nε / log λ`.
    pub fn cylinder_length(&self, n: usize, epsilon: f64) -> usize {
        n + snapped_floor(n as f64 * epsilon / self.log_base).max(0) as usize
    }

    /// `d(x, y) = λ^{-k}` with `k` the first index of disagreement.
    pub fn distance(&self, x: &SymbolicPoint, y: &SymbolicPoint) -> f64 {
        match x.first_disagreement(y) {
            None => 0.0,
            Some(k) => (-(k as f64) * self.log_base).exp(),
        }
    }

    pub fn validate_point(&self, x: &SymbolicPoint) -> Result<(), SystemError> {
        let bad = |msg: String| Err(SystemError::InvalidPoint(msg));
        for &a in x.preperiod.iter().chain(&x.period) {
            if a as usize >= self.alphabet_size {
                return bad(format!("symbol {a} outside alphabet"));
            }
        }
        let check = |w: &[Symbol]| w.windows(2).all(|p| self.allowed(p[0], p[1]));
        if !check(&x.preperiod) || !check(&x.period) {
            return bad("forbidden transition".into());
        }
        let wrap = (x.period[x.period.len() - 1], x.period[0]);
        if !self.allowed(wrap.0, wrap.1) {
            return bad("forbidden transition at period wrap".into());
        }
        if let Some(&last) = x.preperiod.last() {
            if !self.allowed(last, x.period[0]) {
                return bad("forbidden transition at preperiod junction".into());
            }
        }
        Ok(())
    }

    /// Extends an allowed word to an eventually periodic point by following
    /// the lowest allowed successor until a symbol repeats.
    pub fn complete_point(&self, word: Vec<Symbol>) -> SymbolicPoint {
        let mut tail = Vec::new();
        let mut cur = match word.last() {
            Some(&a) => self.successors(Some(a)).next().expect("no dead symbols"),
            None => 0,
        };
        loop {
            if let Some(pos) = tail.iter().position(|&t| t == cur) {
                let period = tail.split_off(pos);
                let mut pre = word;
                pre.extend(tail);
                return SymbolicPoint::new(pre, period).expect("nonempty period");
            }
            tail.push(cur);
            cur = self.successors(Some(cur)).next().expect("no dead symbols");
        }
    }
}

/// The expanding circle map `E_m(x) = m·x mod 1` on `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CircleSystem {
    degree: u64,
}

impl CircleSystem {
    pub fn new(degree: u64) -> Result<Self, SystemError> {
        if degree < 2 {
            return Err(SystemError::InvalidDegree(degree));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> u64 {
        self.degree
    }

    pub fn step(&self, x: &CirclePoint) -> CirclePoint {
        x.iterate(self.degree, 1)
    }

    /// Largest `e^{-nε}` for which the neutralized ball is exactly an arc.
    ///
    /// For `n = 1` this is `1/2`. For `n >= 2` the ball is the arc of radius
    /// `e^{-nε} m^{-(n-1)}` iff `e^{-nε} <= 1/(m+1)`; above that threshold a
    /// point whose orbit wraps around once stays inside the ball.
    pub fn arc_limit(&self, n: usize) -> f64 {
        if n == 1 {
            0.5
        } else {
            1.0 / (self.degree as f64 + 1.0)
        }
    }

    pub fn arc_radius(&self, n: usize, epsilon: f64) -> Result<f64, SystemError> {
        if n == 0 {
            return Err(SystemError::InvalidOrder);
        }
        check_epsilon(epsilon)?;
        let rho = (-(n as f64) * epsilon).exp();
        let limit = self.arc_limit(n);
        if rho > limit {
            return Err(SystemError::Resolution {
                order: n,
                epsilon,
                rho,
                limit,
            });
        }
        Ok(rho / (self.degree as f64).powi(n as i32 - 1))
    }

    /// Level `d` of the `m`-adic intervals covered by an order-`n` arc placed
    /// at the interval midpoint: the smallest `d` with `m^{-d} < 2·radius`.
    pub fn cover_depth(&self, n: usize, epsilon: f64) -> usize {
        let lm = (self.degree as f64).ln();
        let x = (n as f64 - 1.0) + (n as f64 * epsilon - std::f64::consts::LN_2) / lm;
        (snapped_floor(x) + 1).max(0) as usize
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// An eventually periodic one-sided sequence `pre · period^∞`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SymbolicPoint {
    preperiod: Vec<Symbol>,
    period: Vec<Symbol>,
}

impl SymbolicPoint {
    pub fn new(preperiod: Vec<Symbol>, period: Vec<Symbol>) -> Result<Self, SystemError> {
        if period.is_empty() {
            return Err(SystemError::InvalidPoint("empty period".into()));
        }
        Ok(Self { preperiod, period })
    }

    pub fn periodic(period: Vec<Symbol>) -> Result<Self, SystemError> {
        Self::new(Vec::new(), period)
    }

    pub fn preperiod(&self) -> &[Symbol] {
        &self.preperiod
    }

    pub fn period(&self) -> &[Symbol] {
        &self.period
    }

    #[inline]
    pub fn symbol(&self, i: usize) -> Symbol {
        let p = self.preperiod.len();
        if i < p {
            self.preperiod[i]
        } else {
            self.period[(i - p) % self.period.len()]
        }
    }

    pub fn prefix(&self, len: usize) -> Vec<Symbol> {
        (0..len).map(|i| self.symbol(i)).collect()
    }

    /// `T^j x`.
    pub fn shift(&self, j: usize) -> SymbolicPoint {
        let p = self.preperiod.len();
        if j <= p {
            return SymbolicPoint {
                preperiod: self.preperiod[j..].to_vec(),
                period: self.period.clone(),
            };
        }
        let r = (j - p) % self.period.len();
        let mut period = self.period[r..].to_vec();
        period.extend_from_slice(&self.period[..r]);
        SymbolicPoint {
            preperiod: Vec::new(),
            period,
        }
    }

    /// Pads the preperiod by unrolling the period; the sequence is unchanged.
    pub fn unrolled(&self, extra: usize) -> SymbolicPoint {
        let mut pre = self.preperiod.clone();
        let start = pre.len();
        pre.extend((start..start + extra).map(|i| self.symbol(i)));
        let shifted = self.shift(start + extra);
        SymbolicPoint {
            preperiod: pre,
            period: shifted.period,
        }
    }

    /// Index of the first disagreement, `None` when the sequences are equal.
    pub fn first_disagreement(&self, other: &SymbolicPoint) -> Option<usize> {
        let pre = self.preperiod.len().max(other.preperiod.len()) as u128;
        let (a, b) = (self.period.len() as u128, other.period.len() as u128);
        let bound = pre + a / gcd(a, b) * b;
        (0..bound as usize).find(|&i| self.symbol(i) != other.symbol(i))
    }
}

fn symbol_char(a: Symbol) -> char {
    std::char::from_digit(a as u32, MAX_ALPHABET as u32).expect("symbol < 36")
}

fn parse_symbols(s: &str) -> Result<Vec<Symbol>, SystemError> {
    s.chars()
        .map(|c| {
            c.to_digit(MAX_ALPHABET as u32)
                .map(|d| d as Symbol)
                .ok_or_else(|| SystemError::Parse(format!("bad symbol {c:?}")))
        })
        .collect()
}

/// Word notation: `0110`, symbols `0-9` then `a-z`.
pub fn parse_word(s: &str) -> Result<Vec<Symbol>, SystemError> {
    parse_symbols(s.trim())
}

pub fn format_word(w: &[Symbol]) -> String {
    w.iter().map(|&a| symbol_char(a)).collect()
}

impl fmt::Display for SymbolicPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}({})",
            format_word(&self.preperiod),
            format_word(&self.period)
        )
    }
}

impl FromStr for SymbolicPoint {
    type Err = SystemError;

    /// `pre(period)`, e.g. `01(10)`; a bare word `w` means `(w)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.find('(') {
            None => SymbolicPoint::periodic(parse_symbols(s)?),
            Some(open) => {
                let rest = &s[open + 1..];
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| SystemError::Parse("missing ')'".into()))?;
                SymbolicPoint::new(parse_symbols(&s[..open])?, parse_symbols(inner)?)
            }
        }
    }
}

/// A rational point `num/den` of the circle `[0, 1)`, kept reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CirclePoint {
    num: u64,
    den: u64,
}

impl CirclePoint {
    pub fn new(num: u64, den: u64) -> Result<Self, SystemError> {
        if den == 0 {
            return Err(SystemError::InvalidPoint("zero denominator".into()));
        }
        let num = num % den;
        let g = gcd(num as u128, den as u128) as u64;
        Ok(Self {
            num: num / g,
            den: den / g,
        })
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    /// Exact conversion of a finite `x` in `[0, 1)` (every double is dyadic).
    pub fn from_f64(x: f64) -> Result<Self, SystemError> {
        if !(0.0..1.0).contains(&x) {
            return Err(SystemError::InvalidPoint(format!("{x} not in [0,1)")));
        }
        let mut num = x;
        let mut k = 0u32;
        while num.fract() != 0.0 {
            if k >= 63 {
                return Err(SystemError::InvalidPoint(format!(
                    "{x} needs a denominator above 2^63"
                )));
            }
            num *= 2.0;
            k += 1;
        }
        Self::new(num as u64, 1u64 << k)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `E_m^j(x)` computed exactly with modular exponentiation.
    pub fn iterate(&self, degree: u64, j: usize) -> CirclePoint {
        let den = self.den as u128;
        let mut factor = 1u128 % den;
        let mut base = degree as u128 % den;
        let mut e = j;
        while e > 0 {
            if e & 1 == 1 {
                factor = factor * base % den;
            }
            base = base * base % den;
            e >>= 1;
        }
        CirclePoint {
            num: ((self.num as u128 * factor) % den) as u64,
            den: self.den,
        }
        .reduced()
    }

    fn reduced(self) -> Self {
        let g = gcd(self.num as u128, self.den as u128) as u64;
        Self {
            num: self.num / g,
            den: self.den / g,
        }
    }

    /// Arc distance `min(|x - y|, 1 - |x - y|)`.
    pub fn arc_distance(&self, other: &CirclePoint) -> f64 {
        let a = self.num as u128 * other.den as u128;
        let b = other.num as u128 * self.den as u128;
        let total = self.den as u128 * other.den as u128;
        let diff = a.abs_diff(b);
        let d = diff.min(total - diff);
        d as f64 / total as f64
    }
}

impl fmt::Display for CirclePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for CirclePoint {
    type Err = SystemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (p, q) = s
            .trim()
            .split_once('/')
            .ok_or_else(|| SystemError::Parse("expected p/q".into()))?;
        let p = p.trim().parse().map_err(|_| SystemError::Parse(format!("bad numerator {p:?}")))?;
        let q = q.trim().parse().map_err(|_| SystemError::Parse(format!("bad denominator {q:?}")))?;
        CirclePoint::new(p, q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum System {
    Shift(SymbolicSystem),
    Circle(CircleSystem),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Point {
    Symbolic(SymbolicPoint),
    Circle(CirclePoint),
}

impl From<SymbolicPoint> for Point {
    fn from(p: SymbolicPoint) -> Self {
        Point::Symbolic(p)
    }
}

impl From<CirclePoint> for Point {
    fn from(p: CirclePoint) -> Self {
        Point::Circle(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BallGeometry {
    /// The ball is the cylinder of this word.
    Cylinder(Vec<Symbol>),
    /// The ball is the open arc of this radius around the center.
    Arc { radius: f64 },
}

/// A neutralized Bowen ball `B_n(x, e^{-nε})` with its exact geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Point,
    pub order: usize,
    pub epsilon: f64,
    pub geometry: BallGeometry,
}

impl Ball {
    pub fn cylinder(&self) -> Option<&[Symbol]> {
        match &self.geometry {
            BallGeometry::Cylinder(w) => Some(w),
            BallGeometry::Arc { .. } => None,
        }
    }

    pub fn radius(&self) -> Option<f64> {
        match self.geometry {
            BallGeometry::Arc { radius } => Some(radius),
            BallGeometry::Cylinder(_) => None,
        }
    }
}

impl System {
    pub fn alphabet_size(&self) -> usize {
        match self {
            System::Shift(s) => s.alphabet_size(),
            System::Circle(c) => c.degree() as usize,
        }
    }

    pub fn validate_point(&self, x: &Point) -> Result<(), SystemError> {
        match (self, x) {
            (System::Shift(s), Point::Symbolic(p)) => s.validate_point(p),
            (System::Circle(_), Point::Circle(_)) => Ok(()),
            _ => Err(SystemError::KindMismatch),
        }
    }

    /// `d(x, y)`.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64, SystemError> {
        match (self, x, y) {
            (System::Shift(s), Point::Symbolic(a), Point::Symbolic(b)) => Ok(s.distance(a, b)),
            (System::Circle(_), Point::Circle(a), Point::Circle(b)) => Ok(a.arc_distance(b)),
            _ => Err(SystemError::KindMismatch),
        }
    }

    /// `T^j x`.
    pub fn iterate(&self, x: &Point, j: usize) -> Result<Point, SystemError> {
        match (self, x) {
            (System::Shift(_), Point::Symbolic(p)) => Ok(Point::Symbolic(p.shift(j))),
            (System::Circle(c), Point::Circle(p)) => Ok(Point::Circle(p.iterate(c.degree(), j))),
            _ => Err(SystemError::KindMismatch),
        }
    }
}

/// The Bowen metric `d_n(x, y) = max_{0 <= j < n} d(T^j x, T^j y)`.
pub fn bowen_distance(sys: &System, x: &Point, y: &Point, n: usize) -> Result<f64, SystemError> {
    if n == 0 {
        return Err(SystemError::InvalidOrder);
    }
    match (sys, x, y) {
        (System::Shift(s), Point::Symbolic(a), Point::Symbolic(b)) => {
            // d(T^j a, T^j b) = λ^{-(k - j)} for j <= k and 1 after the split.
            Ok(match a.first_disagreement(b) {
                None => 0.0,
                Some(k) if k < n => 1.0,
                Some(k) => (-((k + 1 - n) as f64) * s.log_base()).exp(),
            })
        }
        (System::Circle(c), Point::Circle(a), Point::Circle(b)) => {
            let (mut a, mut b) = (*a, *b);
            let mut max = 0.0f64;
            for _ in 0..n {
                max = max.max(a.arc_distance(&b));
                a = c.step(&a);
                b = c.step(&b);
            }
            Ok(max)
        }
        _ => Err(SystemError::KindMismatch),
    }
}

/// Exact geometry of `B_n(x, e^{-nε})`. `ε = 0` gives the classical Bowen
/// ball of radius 1 (a length-`n` cylinder on the shift).
pub fn neutralized_ball(
    sys: &System,
    x: &Point,
    n: usize,
    epsilon: f64,
) -> Result<Ball, SystemError> {
    if n == 0 {
        return Err(SystemError::InvalidOrder);
    }
    check_epsilon(epsilon)?;
    let geometry = match (sys, x) {
        (System::Shift(s), Point::Symbolic(p)) => {
            BallGeometry::Cylinder(p.prefix(s.cylinder_length(n, epsilon)))
        }
        (System::Circle(c), Point::Circle(_)) => BallGeometry::Arc {
            radius: c.arc_radius(n, epsilon)?,
        },
        _ => return Err(SystemError::KindMismatch),
    };
    Ok(Ball {
        center: x.clone(),
        order: n,
        epsilon,
        geometry,
    })
}

pub fn ball_contains(sys: &System, ball: &Ball, y: &Point) -> Result<bool, SystemError> {
    match (sys, &ball.geometry, &ball.center, y) {
        (System::Shift(_), BallGeometry::Cylinder(w), _, Point::Symbolic(p)) => {
            Ok(w.iter().enumerate().all(|(i, &a)| p.symbol(i) == a))
        }
        (System::Circle(_), BallGeometry::Arc { radius }, Point::Circle(c), Point::Circle(p)) => {
            Ok(c.arc_distance(p) < *radius)
        }
        _ => Err(SystemError::KindMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: &str) -> Point {
        Point::Symbolic(s.parse().unwrap())
    }

    #[test]
    fn bowen_distance_identity_is_zero() {
        let sys = System::Shift(SymbolicSystem::full_shift(2).unwrap());
        assert_eq!(bowen_distance(&sys, &pt("01(10)"), &pt("01(10)"), 7).unwrap(), 0.0);
        // same sequence, different representation
        assert_eq!(bowen_distance(&sys, &pt("(01)"), &pt("0101(01)"), 3).unwrap(), 0.0);
    }

    #[test]
    fn bowen_distance_matches_brute_force_maximum() {
        let shift = SymbolicSystem::full_shift(2).unwrap();
        let sys = System::Shift(shift.clone());
        // first disagreement at k = 5
        let x = pt("00000(0)");
        let y = pt("00000(1)");
        let n = 3;
        let brute = (0..n)
            .map(|j| {
                let (a, b) = (x.clone(), y.clone());
                let (Point::Symbolic(a), Point::Symbolic(b)) = (a, b) else { unreachable!() };
                shift.distance(&a.shift(j), &b.shift(j))
            })
            .fold(0.0f64, f64::max);
        let d = bowen_distance(&sys, &x, &y, n).unwrap();
        assert_eq!(d, (-3.0f64).exp());
        assert!((d - brute).abs() < 1e-15);
    }

    #[test]
    fn circle_bowen_distance_two_terms() {
        let sys = System::Circle(CircleSystem::new(2).unwrap());
        let x = Point::Circle(CirclePoint::zero());
        let y = Point::Circle(CirclePoint::new(1, 10).unwrap());
        assert!((bowen_distance(&sys, &x, &y, 2).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn neutralized_ball_cylinder_lengths() {
        let sys = System::Shift(SymbolicSystem::full_shift(2).unwrap());
        let x = pt("(0110)");
        let b = neutralized_ball(&sys, &x, 10, 0.3).unwrap();
        assert_eq!(b.cylinder().unwrap().len(), 13);
        let b0 = neutralized_ball(&sys, &x, 10, 0.0).unwrap();
        assert_eq!(b0.cylinder().unwrap().len(), 10);
    }

    #[test]
    fn metric_base_rescales_epsilon() {
        let s = SymbolicSystem::full_shift(2).unwrap().with_metric_base(2.0).unwrap();
        // n ε / ln 2 = 10 * 0.3 / 0.693 = 4.328
        assert_eq!(s.cylinder_length(10, 0.3), 14);
    }

    #[test]
    fn ball_boundary_at_cylinder_length() {
        let sys = System::Shift(SymbolicSystem::full_shift(2).unwrap());
        let x = SymbolicPoint::periodic(vec![0]).unwrap();
        let b = neutralized_ball(&sys, &Point::Symbolic(x.clone()), 10, 0.3).unwrap();
        let l = b.cylinder().unwrap().len();
        let flip_at = |k: usize| {
            let mut w = x.prefix(k + 1);
            w[k] = 1;
            Point::Symbolic(SymbolicPoint::new(w, vec![0]).unwrap())
        };
        assert!(ball_contains(&sys, &b, &b.center).unwrap());
        assert!(!ball_contains(&sys, &b, &flip_at(l - 1)).unwrap());
        assert!(ball_contains(&sys, &b, &flip_at(l)).unwrap());
        // agrees with the defining inequality
        let r = (-10.0f64 * 0.3).exp();
        let c = &b.center;
        assert!(bowen_distance(&sys, c, &flip_at(l - 1), 10).unwrap() >= r);
        assert!(bowen_distance(&sys, c, &flip_at(l), 10).unwrap() < r);
    }

    #[test]
    fn circle_ball_radius_and_strict_boundary() {
        let c = CircleSystem::new(2).unwrap();
        let sys = System::Circle(c);
        let center = Point::Circle(CirclePoint::zero());
        let b = neutralized_ball(&sys, &center, 3, 0.5).unwrap();
        let r = b.radius().unwrap();
        assert!((r - (-1.5f64).exp() / 4.0).abs() < 1e-16);
        let edge = Point::Circle(CirclePoint::from_f64(r).unwrap());
        assert!(!ball_contains(&sys, &b, &edge).unwrap());
        let inside = Point::Circle(CirclePoint::from_f64(r * 0.999).unwrap());
        assert!(ball_contains(&sys, &b, &inside).unwrap());
    }

    #[test]
    fn circle_ball_outside_arc_regime_errors() {
        let sys = System::Circle(CircleSystem::new(2).unwrap());
        let x = Point::Circle(CirclePoint::zero());
        // e^{-0.3} = 0.74: every point of the circle is in the ball
        let err = neutralized_ball(&sys, &x, 3, 0.1).unwrap_err();
        assert!(matches!(err, SystemError::Resolution { .. }));
        let y = Point::Circle(CirclePoint::new(1, 2).unwrap());
        assert!(bowen_distance(&sys, &x, &y, 3).unwrap() < (-0.3f64).exp());
    }

    #[test]
    fn circle_arc_limit_is_sharp() {
        // m = 2, n = 2, e^{-nε} slightly above 1/3: a wrapped point sneaks in.
        let c = CircleSystem::new(2).unwrap();
        let sys = System::Circle(c);
        let rho: f64 = 0.34;
        let eps = -rho.ln() / 2.0;
        assert!(c.arc_radius(2, eps).is_err());
        let x = Point::Circle(CirclePoint::zero());
        // δ = 0.33: distances 0.33 and 0.66 -> 0.34 (not < 0.34), use 0.331
        let y = Point::Circle(CirclePoint::new(331, 1000).unwrap());
        let d = bowen_distance(&sys, &x, &y, 2).unwrap();
        assert!(d < rho, "d = {d}");
        assert!(0.331 > rho / 2.0);
        // just below the limit the arc formula holds
        let eps_ok = -(1.0f64 / 3.0).ln() / 2.0 + 1e-9;
        assert!(c.arc_radius(2, eps_ok).is_ok());
    }

    #[test]
    fn circle_iterate_is_exact() {
        let p = CirclePoint::new(1, 7).unwrap();
        let mut q = p;
        for _ in 0..5 {
            q = q.iterate(3, 1);
        }
        assert_eq!(q, p.iterate(3, 5));
        assert_eq!(p.iterate(3, 6), p); // 3 has order 6 mod 7
    }

    #[test]
    fn point_parse_and_display_roundtrip() {
        let p: SymbolicPoint = "01(10)".parse().unwrap();
        assert_eq!(p.to_string(), "01(10)");
        assert_eq!(p.prefix(6), vec![0, 1, 1, 0, 1, 0]);
        assert!("01(".parse::<SymbolicPoint>().is_err());
        assert!("()".parse::<SymbolicPoint>().is_err());
    }

    #[test]
    fn sft_validation() {
        let golden = SymbolicSystem::new(vec![vec![true, true], vec![true, false]]).unwrap();
        assert!(golden.validate_point(&"(01)".parse().unwrap()).is_ok());
        assert!(golden.validate_point(&"(011)".parse().unwrap()).is_err());
        assert!(golden.validate_point(&"1(1)".parse().unwrap()).is_err());
        assert_eq!(golden.words(3).len(), 5);
        assert!(SymbolicSystem::new(vec![vec![true, false], vec![true, false]]).is_err());
        let p = golden.complete_point(vec![1, 0, 1]);
        assert!(golden.validate_point(&p).is_ok());
        assert_eq!(p.prefix(3), vec![1, 0, 1]);
    }

    #[test]
    fn shift_rotates_period() {
        let p: SymbolicPoint = "2(012)".parse().unwrap();
        let q = p.shift(3);
        assert_eq!(q.prefix(6), vec![2, 0, 1, 2, 0, 1]);
        assert_eq!(p.unrolled(4).prefix(12), p.prefix(12));
    }
}
