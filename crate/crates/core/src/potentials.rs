//! Potential sequences `Φ = {φ_n}`: additive Birkhoff sums, log-norms of
//! matrix cocycles, and explicit tables, with sup-over-ball bounds and
//! tempered-distortion diagnostics.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::systems::{
    bowen_distance, check_epsilon, Ball, BallGeometry, CirclePoint, CircleSystem, Point, Symbol,
    SymbolicSystem, System, SystemError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("potential has {got} symbol values but the alphabet has {expected}")]
    AlphabetMismatch { expected: usize, got: usize },
    #[error("potential kind does not fit the system kind")]
    KindMismatch,
    #[error("cocycle needs at least one matrix, all square of equal dimension >= 1")]
    CocycleShape,
    #[error("cocycle matrix for symbol {0} is zero")]
    ZeroMatrix(usize),
    #[error("declared Lipschitz constant {declared} is below the certified bound {certified}")]
    Lipschitz { declared: f64, certified: f64 },
    #[error("order {order} exceeds the table horizon {horizon}")]
    HorizonExceeded { order: usize, horizon: usize },
    #[error("table has no level for order {0}")]
    MissingLevel(usize),
    #[error("table has no value for word {0:?}")]
    MissingWord(Vec<Symbol>),
    #[error("table level for order {order} has word length {word_len} < order")]
    ShortTableWord { order: usize, word_len: usize },
    #[error("enumeration of {0} extensions is too large")]
    TooManyExtensions(u128),
    #[error("non-finite potential value")]
    NonFinite,
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Center-value selection for cover costs: `Sup` uses the supremum of `φ_n`
/// over the ball, `Center` the value at the best center inside the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValueMode {
    #[default]
    Sup,
    Center,
}

/// `φ(x) = c + Σ_k a_k cos(2πkx) + b_k sin(2πkx)` on the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct CircleFunction {
    constant: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
    lipschitz: f64,
}

impl CircleFunction {
    /// `lipschitz = None` uses the certified bound `2π Σ k·|(a_k, b_k)|`.
    pub fn new(
        constant: f64,
        cos: Vec<f64>,
        sin: Vec<f64>,
        lipschitz: Option<f64>,
    ) -> Result<Self, PotentialError> {
        let all = std::iter::once(constant).chain(cos.iter().copied()).chain(sin.iter().copied());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite);
        }
        let k = cos.len().max(sin.len());
        let certified: f64 = (0..k)
            .map(|i| {
                let a = cos.get(i).copied().unwrap_or(0.0);
                let b = sin.get(i).copied().unwrap_or(0.0);
                TAU * (i + 1) as f64 * a.hypot(b)
            })
            .sum();
        let lipschitz = match lipschitz {
            None => certified,
            Some(l) if l.is_finite() && l >= certified * (1.0 - 1e-12) => l,
            Some(l) => {
                return Err(PotentialError::Lipschitz {
                    declared: l,
                    certified,
                })
            }
        };
        Ok(Self {
            constant,
            cos,
            sin,
            lipschitz,
        })
    }

    pub fn constant(c: f64) -> Result<Self, PotentialError> {
        Self::new(c, Vec::new(), Vec::new(), None)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&v| v == 0.0)
    }

    pub fn constant_term(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut v = self.constant;
        for (k, &a) in self.cos.iter().enumerate() {
            v += a * (TAU * (k + 1) as f64 * x).cos();
        }
        for (k, &b) in self.sin.iter().enumerate() {
            v += b * (TAU * (k + 1) as f64 * x).sin();
        }
        v
    }
}

/// One matrix per symbol; `φ_n(x) = log ‖A_{x_{n-1}} ⋯ A_{x_0}‖₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cocycle {
    matrices: Vec<DMatrix<f64>>,
}

/// A matrix product carried as `scale · exp(log_scale)` so long products
/// neither overflow nor underflow.
#[derive(Debug, Clone)]
pub struct ScaledProduct {
    matrix: DMatrix<f64>,
    log_scale: f64,
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values().iter().fold(0.0f64, |a, &b| a.max(b))
}

impl ScaledProduct {
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            log_scale: 0.0,
        }
    }

    /// `self ← a · self`.
    pub fn push(&mut self, a: &DMatrix<f64>) {
        self.matrix = a * &self.matrix;
        let max = self.matrix.amax();
        if max > 0.0 && max.is_finite() {
            self.matrix /= max;
            self.log_scale += max.ln();
        }
    }

    pub fn log_norm(&self) -> f64 {
        let n = spectral_norm(&self.matrix);
        if n == 0.0 {
            f64::NEG_INFINITY
        } else {
            n.ln() + self.log_scale
        }
    }
}

impl Cocycle {
    pub fn new(matrices: Vec<DMatrix<f64>>) -> Result<Self, PotentialError> {
        let dim = matrices.first().map(|m| m.nrows()).unwrap_or(0);
        if dim == 0 || matrices.iter().any(|m| m.nrows() != dim || m.ncols() != dim) {
            return Err(PotentialError::CocycleShape);
        }
        for (a, m) in matrices.iter().enumerate() {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(PotentialError::NonFinite);
            }
            if m.iter().all(|&v| v == 0.0) {
                return Err(PotentialError::ZeroMatrix(a));
            }
        }
        Ok(Self { matrices })
    }

    /// Diagonal cocycle `A_a = diag(rows[0][a], rows[1][a], ...)`.
    pub fn diagonal(rows: &[Vec<f64>]) -> Result<Self, PotentialError> {
        let m = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != m) {
            return Err(PotentialError::CocycleShape);
        }
        let mats = (0..m)
            .map(|a| DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|r| r[a]))))
            .collect();
        Self::new(mats)
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn log_norm(&self, word: &[Symbol]) -> f64 {
        let mut p = ScaledProduct::identity(self.dim());
        for &a in word {
            p.push(&self.matrices[a as usize]);
        }
        p.log_norm()
    }
}

/// Values of `φ_n` for one order `n`: `φ_n(x)` depends on the first
/// `word_len` symbols of `x` (`word_len >= n`).
#[derive(Debug, Clone, PartialEq)]
pub struct TableLevel {
    pub word_len: usize,
    pub values: HashMap<Vec<Symbol>, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TablePotential {
    levels: Vec<Option<TableLevel>>,
}

impl TablePotential {
    /// `levels[n]` for `n = 1..=horizon`; index 0 is unused.
    pub fn new(levels: Vec<(usize, TableLevel)>) -> Result<Self, PotentialError> {
        let horizon = levels.iter().map(|(n, _)| *n).max().unwrap_or(0);
        if horizon == 0 {
            return Err(PotentialError::MissingLevel(1));
        }
        let mut out = vec![None; horizon + 1];
        for (n, level) in levels {
            if n == 0 {
                return Err(PotentialError::MissingLevel(0));
            }
            if level.word_len < n {
                return Err(PotentialError::ShortTableWord {
                    order: n,
                    word_len: level.word_len,
                });
            }
            if level.values.values().any(|v| !v.is_finite()) {
                return Err(PotentialError::NonFinite);
            }
            out[n] = Some(level);
        }
        Ok(Self { levels: out })
    }

    /// Tabulates `f(word)` over all allowed words of length `word_len(n)`.
    pub fn from_fn(
        sys: &SymbolicSystem,
        horizon: usize,
        word_len: impl Fn(usize) -> usize,
        f: impl Fn(usize, &[Symbol]) -> f64,
    ) -> Result<Self, PotentialError> {
        let levels = (1..=horizon)
            .map(|n| {
                let len = word_len(n);
                let values = sys.words(len).into_iter().map(|w| {
                    let v = f(n, &w);
                    (w, v)
                });
                (
                    n,
                    TableLevel {
                        word_len: len,
                        values: values.collect(),
                    },
                )
            })
            .collect();
        Self::new(levels)
    }

    pub fn horizon(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn level(&self, n: usize) -> Result<&TableLevel, PotentialError> {
        if n > self.horizon() {
            return Err(PotentialError::HorizonExceeded {
                order: n,
                horizon: self.horizon(),
            });
        }
        self.levels[n].as_ref().ok_or(PotentialError::MissingLevel(n))
    }

    pub fn levels(&self) -> impl Iterator<Item = (usize, &TableLevel)> {
        self.levels
            .iter()
            .enumerate()
            .filter_map(|(n, l)| l.as_ref().map(|l| (n, l)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// Additive on a shift: `φ_n(x) = Σ_{j<n} values[x_j]`.
    Symbolic(Vec<f64>),
    /// Additive on the circle: `φ_n(x) = Σ_{j<n} φ(E_m^j x)`.
    Circle(CircleFunction),
    Cocycle(Cocycle),
    Table(TablePotential),
}

/// A potential sequence `φ_n + n·offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    kind: PotentialKind,
    offset: f64,
}

/// Upper bound of `sup_{y∈B} φ_n(y)`; `exact` when it is the supremum itself.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupBound {
    pub value: f64,
    pub center_value: f64,
    pub exact: bool,
}

/// Bounds on `φ_n(ε) = sup{|φ_n(x) - φ_n(y)| : y ∈ B_n(x, e^{-nε})}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationBound {
    pub upper: f64,
    pub lower: f64,
    pub exact: bool,
}

/// Largest extension enumeration performed for table potentials.
const MAX_EXTENSIONS: u128 = 1 << 22;

impl Potential {
    pub fn new(kind: PotentialKind) -> Self {
        Self { kind, offset: 0.0 }
    }

    pub fn zero(alphabet_size: usize) -> Self {
        Self::symbolic(vec![0.0; alphabet_size])
    }

    pub fn symbolic(values: Vec<f64>) -> Self {
        Self::new(PotentialKind::Symbolic(values))
    }

    pub fn circle(f: CircleFunction) -> Self {
        Self::new(PotentialKind::Circle(f))
    }

    pub fn cocycle(c: Cocycle) -> Self {
        Self::new(PotentialKind::Cocycle(c))
    }

    pub fn table(t: TablePotential) -> Self {
        Self::new(PotentialKind::Table(t))
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `φ_n + n·c`.
    pub fn with_offset(mut self, c: f64) -> Self {
        self.offset += c;
        self
    }

    /// Checks the potential against a system.
    pub fn validate(&self, sys: &System) -> Result<(), PotentialError> {
        match (&self.kind, sys) {
            (PotentialKind::Symbolic(v), System::Shift(s)) => {
                if v.len() != s.alphabet_size() {
                    return Err(PotentialError::AlphabetMismatch {
                        expected: s.alphabet_size(),
                        got: v.len(),
                    });
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(PotentialError::NonFinite);
                }
            }
            (PotentialKind::Cocycle(c), System::Shift(s)) => {
                if c.matrices.len() != s.alphabet_size() {
                    return Err(PotentialError::AlphabetMismatch {
                        expected: s.alphabet_size(),
                        got: c.matrices.len(),
                    });
                }
            }
            (PotentialKind::Table(_), System::Shift(_)) | (PotentialKind::Circle(_), System::Circle(_)) => {}
            _ => return Err(PotentialError::KindMismatch),
        }
        if !self.offset.is_finite() {
            return Err(PotentialError::NonFinite);
        }
        Ok(())
    }

    /// Number of leading symbols that determine `φ_n` on a shift.
    pub fn word_len(&self, n: usize) -> Result<usize, PotentialError> {
        match &self.kind {
            PotentialKind::Symbolic(_) | PotentialKind::Cocycle(_) => Ok(n),
            PotentialKind::Table(t) => Ok(t.level(n)?.word_len),
            PotentialKind::Circle(_) => Err(PotentialError::KindMismatch),
        }
    }

    /// `φ_n` of any sequence starting with `word` (`word.len() >= word_len(n)`).
    pub fn evaluate_word(&self, word: &[Symbol], n: usize) -> Result<f64, PotentialError> {
        let base = match &self.kind {
            PotentialKind::Symbolic(v) => word[..n].iter().map(|&a| v[a as usize]).sum(),
            PotentialKind::Cocycle(c) => c.log_norm(&word[..n]),
            PotentialKind::Table(t) => {
                let level = t.level(n)?;
                let key = &word[..level.word_len];
                *level
                    .values
                    .get(key)
                    .ok_or_else(|| PotentialError::MissingWord(key.to_vec()))?
            }
            PotentialKind::Circle(_) => return Err(PotentialError::KindMismatch),
        };
        Ok(base + n as f64 * self.offset)
    }

    fn circle_sum(&self, f: &CircleFunction, c: &CircleSystem, x: &CirclePoint, n: usize) -> f64 {
        let mut y = *x;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += f.eval(y.to_f64());
            y = c.step(&y);
        }
        sum + n as f64 * self.offset
    }

    /// Exact `φ_n(x)`.
    pub fn evaluate(&self, sys: &System, x: &Point, n: usize) -> Result<f64, PotentialError> {
        if n == 0 {
            return Err(SystemError::InvalidOrder.into());
        }
        match (sys, x, &self.kind) {
            (System::Circle(c), Point::Circle(p), PotentialKind::Circle(f)) => {
                Ok(self.circle_sum(f, c, p, n))
            }
            (System::Shift(_), Point::Symbolic(p), kind) if !matches!(kind, PotentialKind::Circle(_)) => {
                let len = self.word_len(n)?;
                self.evaluate_word(&p.prefix(len), n)
            }
            _ => Err(PotentialError::KindMismatch),
        }
    }

    /// `(inf, sup)` of `φ_n` over the cylinder of `word`, exact. Tables
    /// longer than the word are resolved by enumerating allowed extensions.
    pub fn cylinder_extremes(
        &self,
        sys: &SymbolicSystem,
        word: &[Symbol],
        n: usize,
    ) -> Result<(f64, f64), PotentialError> {
        let need = self.word_len(n)?;
        if word.len() >= need {
            let v = self.evaluate_word(word, n)?;
            return Ok((v, v));
        }
        let free = need - word.len();
        let count = (sys.alphabet_size() as u128).saturating_pow(free as u32);
        if count > MAX_EXTENSIONS {
            return Err(PotentialError::TooManyExtensions(count));
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut buf = word.to_vec();
        extend_words(sys, &mut buf, need, &mut |w| {
            let v = self.evaluate_word(w, n)?;
            lo = lo.min(v);
            hi = hi.max(v);
            Ok(())
        })?;
        Ok((lo, hi))
    }

    /// `sup φ_n` over a neutralized ball: exact on shifts; on the circle
    /// the center value plus the certified orbit gap
    /// `Lip · r · (m^n - 1)/(m - 1)`, which is at most `n·Lip·e^{-nε}`.
    pub fn sup_over_ball(&self, sys: &System, ball: &Ball) -> Result<SupBound, PotentialError> {
        let center_value = self.evaluate(sys, &ball.center, ball.order)?;
        match (sys, &ball.geometry, &self.kind) {
            (System::Shift(s), BallGeometry::Cylinder(w), _) => {
                let (_, hi) = self.cylinder_extremes(s, w, ball.order)?;
                Ok(SupBound {
                    value: hi,
                    center_value,
                    exact: true,
                })
            }
            (System::Circle(c), BallGeometry::Arc { radius }, PotentialKind::Circle(f)) => {
                let gap = circle_gap(f.lipschitz(), c.degree(), *radius, ball.order);
                Ok(SupBound {
                    value: center_value + gap,
                    center_value,
                    exact: gap == 0.0,
                })
            }
            _ => Err(PotentialError::KindMismatch),
        }
    }

    /// Bounds on `φ_n(ε)`. Shift potentials are resolved exactly; circle
    /// potentials get the telescoped bound `n·Lip·e^{-nε}` and a sampled
    /// lower bound.
    pub fn variation(
        &self,
        sys: &System,
        n: usize,
        epsilon: f64,
    ) -> Result<VariationBound, PotentialError> {
        if n == 0 {
            return Err(SystemError::InvalidOrder.into());
        }
        check_epsilon(epsilon)?;
        match (sys, &self.kind) {
            (System::Shift(s), PotentialKind::Table(_)) => {
                let l = s.cylinder_length(n, epsilon);
                let need = self.word_len(n)?;
                if need <= l {
                    return Ok(VariationBound { upper: 0.0, lower: 0.0, exact: true });
                }
                let mut worst = 0.0f64;
                for w in s.words(l) {
                    let (lo, hi) = self.cylinder_extremes(s, &w, n)?;
                    worst = worst.max(hi - lo);
                }
                Ok(VariationBound { upper: worst, lower: worst, exact: true })
            }
            (System::Shift(_), PotentialKind::Symbolic(_) | PotentialKind::Cocycle(_)) => {
                Ok(VariationBound { upper: 0.0, lower: 0.0, exact: true })
            }
            (System::Circle(c), PotentialKind::Circle(f)) => {
                let rho = (-(n as f64) * epsilon).exp();
                let upper = n as f64 * f.lipschitz() * rho;
                if f.is_constant() {
                    return Ok(VariationBound { upper: 0.0, lower: 0.0, exact: true });
                }
                let lower = self.sampled_circle_variation(sys, c, n, rho, 256, 0x5eed)?;
                Ok(VariationBound { upper, lower, exact: false })
            }
            _ => Err(PotentialError::KindMismatch),
        }
    }

    fn sampled_circle_variation(
        &self,
        sys: &System,
        c: &CircleSystem,
        n: usize,
        rho: f64,
        samples: usize,
        seed: u64,
    ) -> Result<f64, PotentialError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = rho / (c.degree() as f64).powi(n as i32 - 1);
        let mut best = 0.0f64;
        for _ in 0..samples {
            let x: f64 = rng.gen();
            let t: f64 = rng.gen_range(-1.0..1.0) * r;
            let y = (x + t).rem_euclid(1.0);
            let (Ok(px), Ok(py)) = (CirclePoint::from_f64(x), CirclePoint::from_f64(y)) else {
                continue;
            };
            let (px, py) = (Point::Circle(px), Point::Circle(py));
            if bowen_distance(sys, &px, &py, n)? >= rho {
                continue;
            }
            let d = (self.evaluate(sys, &px, n)? - self.evaluate(sys, &py, n)?).abs();
            best = best.max(d);
        }
        Ok(best)
    }

    pub fn is_shift_kind(&self) -> bool {
        !matches!(self.kind, PotentialKind::Circle(_))
    }

    /// Per-symbol values (offset included) when the potential is additive on a shift.
    pub fn additive_values(&self) -> Option<Vec<f64>> {
        match &self.kind {
            PotentialKind::Symbolic(v) => Some(v.iter().map(|x| x + self.offset).collect()),
            _ => None,
        }
    }

    /// `Some(c)` when `φ_n ≡ n·c` on the circle.
    pub fn circle_constant(&self) -> Option<f64> {
        match &self.kind {
            PotentialKind::Circle(f) if f.is_constant() => Some(f.constant_term() + self.offset),
            _ => None,
        }
    }

    pub fn circle_function(&self) -> Option<&CircleFunction> {
        match &self.kind {
            PotentialKind::Circle(f) => Some(f),
            _ => None,
        }
    }
}

pub(crate) fn circle_gap(lip: f64, degree: u64, radius: f64, n: usize) -> f64 {
    if lip == 0.0 {
        return 0.0;
    }
    let m = degree as f64;
    lip * radius * (m.powi(n as i32) - 1.0) / (m - 1.0)
}

fn extend_words(
    sys: &SymbolicSystem,
    buf: &mut Vec<Symbol>,
    target: usize,
    visit: &mut dyn FnMut(&[Symbol]) -> Result<(), PotentialError>,
) -> Result<(), PotentialError> {
    if buf.len() == target {
        return visit(buf);
    }
    let next: Vec<Symbol> = sys.successors(buf.last().copied()).collect();
    for b in next {
        buf.push(b);
        extend_words(sys, buf, target, visit)?;
        buf.pop();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "tempered (exact)")]
    TemperedExact,
    #[serde(rename = "tempered (bounded)")]
    TemperedBounded,
    #[serde(rename = "tempered on tested grid")]
    TemperedOnGrid,
    #[serde(rename = "not tempered on tested grid")]
    NotTemperedOnGrid,
}

impl Verdict {
    pub fn is_tempered(self) -> bool {
        !matches!(self, Verdict::NotTemperedOnGrid)
    }

    pub fn label(self) -> &'static str {
        match self {
            Verdict::TemperedExact => "tempered (exact)",
            Verdict::TemperedBounded => "tempered (bounded)",
            Verdict::TemperedOnGrid => "tempered on tested grid",
            Verdict::NotTemperedOnGrid => "not tempered on tested grid",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionEntry {
    pub n: usize,
    pub epsilon: f64,
    pub bound: VariationBound,
    /// `upper / n`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub epsilons: Vec<f64>,
    pub orders: Vec<usize>,
    /// Row-major by epsilon, then order.
    pub entries: Vec<DistortionEntry>,
    /// Per epsilon, the maximum of `φ_n(ε)/n` over the upper half of the order grid.
    pub tail_max: Vec<f64>,
    /// Threshold applied to the smallest epsilon's tail maximum for table potentials.
    pub threshold: f64,
    pub verdict: Verdict,
}

/// Default limit on `φ_n(ε)/n` at the smallest tested `ε` for a grid verdict.
pub const TEMPERED_THRESHOLD: f64 = 0.05;

pub fn tempered_report(
    potential: &Potential,
    sys: &System,
    eps_grid: &[f64],
    n_grid: &[usize],
) -> Result<DistortionReport, PotentialError> {
    let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
    if eps_grid.is_empty() || n_grid.is_empty() || !increasing(eps_grid) || !n_grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(SystemError::Parse("grids must be nonempty and increasing".into()).into());
    }
    let mut entries = Vec::new();
    let mut tail_max = Vec::new();
    let tail_from = n_grid[n_grid.len() / 2];
    for &eps in eps_grid {
        let mut tail = 0.0f64;
        for &n in n_grid {
            let bound = potential.variation(sys, n, eps)?;
            let ratio = bound.upper / n as f64;
            if n >= tail_from {
                tail = tail.max(ratio);
            }
            entries.push(DistortionEntry { n, epsilon: eps, bound, ratio });
        }
        tail_max.push(tail);
    }
    let all_zero = entries.iter().all(|e| e.bound.exact && e.bound.upper == 0.0);
    let verdict = if all_zero {
        Verdict::TemperedExact
    } else if matches!(potential.kind(), PotentialKind::Circle(_)) {
        // φ_n(ε)/n <= Lip·e^{-nε} -> 0 for every ε > 0.
        Verdict::TemperedBounded
    } else if tail_max[0] <= TEMPERED_THRESHOLD {
        Verdict::TemperedOnGrid
    } else {
        Verdict::NotTemperedOnGrid
    };
    Ok(DistortionReport {
        epsilons: eps_grid.to_vec(),
        orders: n_grid.to_vec(),
        entries,
        tail_max,
        threshold: TEMPERED_THRESHOLD,
        verdict,
    })
}
