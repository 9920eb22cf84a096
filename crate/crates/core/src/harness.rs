//! Verification harness: closed-form baselines, the finite-scale
//! variational-principle report, `ε → 0` extrapolation, and the flat-file
//! outputs (sweep CSV, `vp_report.csv`, `estimate.json`, trace CSV).

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError};
use crate::cover::katok::{katok_estimate, KatokOptions, KatokTree};
use crate::cover::{
    critical_exponent_with, weighted_cover_cost, CoverError, CoverProblem, Engine, PressureEstimate, SearchOptions,
    Target,
};
use crate::measures::{bk_pressure, LocalPressureTrace, Measure, MeasureError};
use crate::potentials::{tempered_report, Potential, PotentialError, PotentialKind, ValueMode, Verdict};
use crate::systems::{Symbol, System};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown baseline family {0:?}")]
    UnknownFamily(String),
    #[error("baseline {family} does not apply: {reason}")]
    NotApplicable { family: String, reason: String },
    #[error("csv: {0}")]
    Csv(String),
    #[error("json: {0}")]
    Json(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Cover(#[from] CoverError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

fn csv_err(e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Csv(e.to_string())
}

// ---------------------------------------------------------------------------
// Extrapolation
// ---------------------------------------------------------------------------

/// Least-squares line through the smallest-`ε` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    /// Value at `ε = 0`.
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub points: usize,
}

/// Number of smallest grid points used by [`extrapolate`].
pub const FIT_POINTS: usize = 3;

/// Linear fit over the `FIT_POINTS` smallest `ε` with finite values.
pub fn extrapolate(eps: &[f64], values: &[f64]) -> Option<Extrapolation> {
    let mut pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .map(|(&e, &v)| (e, v))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts.truncate(FIT_POINTS);
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / k).sqrt();
    Some(Extrapolation {
        intercept,
        slope,
        residual,
        points: pts.len(),
    })
}

// ---------------------------------------------------------------------------
// Baselines
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineValue {
    pub family: String,
    pub epsilon: f64,
    pub value: f64,
    /// Identifier of the closed form used.
    pub derivation: String,
}

pub const BASELINE_FAMILIES: &[&str] = &[
    "shift-entropy",
    "circle-entropy",
    "shift-pressure",
    "bk-measure",
    "bk-optimum",
    "diagonal-cocycle",
];

fn log_sum_exp(v: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = v.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Closed-form values of a registered family on the config's `ε` grid.
///
/// * `shift-entropy`: full shift, `φ ≡ 0`: `(1 + ε/log λ) log m`.
/// * `circle-entropy`: `E_m`: `log m + ε`.
/// * `shift-pressure`: full shift, additive `φ`: `log Σ_a e^{φ(a)} + (ε/log λ) log m`,
///   exact for single-order covers when `nε/log λ` is an integer.
/// * `bk-measure`: Bernoulli or Markov `μ`, additive `φ`: `(1 + ε/log λ) h(μ) + ∫φ dμ`.
/// * `bk-optimum`: best Bernoulli value `(1+ε') log Σ_a e^{φ(a)/(1+ε')}`, `ε' = ε/log λ`.
/// * `diagonal-cocycle`: diagonal matrices with entries `d_i(a)`:
///   `max_i log Σ_a d_i(a) + (ε/log λ) log m`.
pub fn baseline_expectations(family: &str, config: &Config) -> Result<Vec<BaselineValue>, HarnessError> {
    let sys = config.build_system()?;
    let phi = config.build_potential(&sys)?;
    let na = |reason: &str| HarnessError::NotApplicable {
        family: family.to_string(),
        reason: reason.to_string(),
    };
    let shift = match &sys {
        System::Shift(s) => Some(s),
        System::Circle(_) => None,
    };
    let full_shift = || shift.filter(|s| s.is_full_shift()).ok_or_else(|| na("needs a full shift"));
    let additive = || match phi.kind() {
        PotentialKind::Symbolic(v) => Ok(v.iter().map(|x| x + phi.offset()).collect::<Vec<f64>>()),
        _ => Err(na("needs an additive potential")),
    };
    let per_eps: Box<dyn Fn(f64) -> f64> = match family {
        "shift-entropy" => {
            let s = full_shift()?;
            let lm = (s.alphabet_size() as f64).ln();
            let lb = s.log_base();
            Box::new(move |e| (1.0 + e / lb) * lm)
        }
        "circle-entropy" => {
            let System::Circle(c) = &sys else {
                return Err(na("needs a circle map"));
            };
            let lm = (c.degree() as f64).ln();
            Box::new(move |e| lm + e)
        }
        "shift-pressure" => {
            let s = full_shift()?;
            let (lm, lb) = ((s.alphabet_size() as f64).ln(), s.log_base());
            let p0 = log_sum_exp(additive()?);
            Box::new(move |e| p0 + e / lb * lm)
        }
        "bk-measure" => {
            let s = shift.ok_or_else(|| na("needs a shift"))?;
            let lb = s.log_base();
            let mu = config.build_measure(&sys, None)?.ok_or_else(|| na("needs a measure"))?;
            let h = mu.entropy().ok_or_else(|| na("needs a Bernoulli or Markov measure"))?;
            let mean = mu.mean_of(&additive()?).expect("entropy implies mean");
            Box::new(move |e| (1.0 + e / lb) * h + mean)
        }
        "bk-optimum" => {
            let s = full_shift()?;
            let lb = s.log_base();
            let v = additive()?;
            Box::new(move |e| {
                let t = 1.0 + e / lb;
                t * log_sum_exp(v.iter().map(|x| x / t))
            })
        }
        "diagonal-cocycle" => {
            let s = full_shift()?;
            let (lm, lb) = ((s.alphabet_size() as f64).ln(), s.log_base());
            let PotentialKind::Cocycle(c) = phi.kind() else {
                return Err(na("needs a cocycle potential"));
            };
            let diagonal = c.matrices().iter().all(|m| {
                (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] == 0.0))
            });
            if !diagonal || c.matrices().iter().any(|m| (0..m.nrows()).any(|i| m[(i, i)] < 0.0)) {
                return Err(na("needs nonnegative diagonal matrices"));
            }
            let best = (0..c.dim())
                .map(|i| c.matrices().iter().map(|m| m[(i, i)]).sum::<f64>().ln())
                .fold(f64::NEG_INFINITY, f64::max)
                + phi.offset();
            Box::new(move |e| best + e / lb * lm)
        }
        other => return Err(HarnessError::UnknownFamily(other.to_string())),
    };
    let derivation = match family {
        "shift-entropy" => "cylinder-count",
        "circle-entropy" => "arc-count",
        "shift-pressure" => "single-order-cover",
        "bk-measure" => "shannon-mcmillan-breiman",
        "bk-optimum" => "lagrange-bernoulli",
        _ => "diagonal-exchange",
    };
    Ok(config
        .run
        .epsilon
        .iter()
        .map(|&e| BaselineValue {
            family: family.to_string(),
            epsilon: e,
            value: per_eps(e),
            derivation: derivation.to_string(),
        })
        .collect())
}

pub fn write_baselines_csv(rows: &[BaselineValue], out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweeps and estimates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub min_order: usize,
    #[serde(rename = "D_max")]
    pub max_depth: usize,
    pub s: f64,
    pub cost: f64,
    pub mode: ValueMode,
}

/// Cover cost at each `s`, one prepared engine per problem.
pub fn cost_sweep(p: &CoverProblem, s_values: &[f64], engine: Engine) -> Result<Vec<SweepRow>, HarnessError> {
    let prepared = p.prepare(engine)?;
    s_values
        .iter()
        .map(|&s| {
            Ok(SweepRow {
                epsilon: p.epsilon,
                min_order: p.min_order,
                max_depth: p.max_depth,
                s,
                cost: crate::cover::checked_cost(&prepared, s, p.max_depth)?,
                mode: p.value_mode,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimate_json<T: Serialize>(value: &T, out: impl Write) -> Result<(), HarnessError> {
    serde_json::to_writer_pretty(out, value).map_err(|e| HarnessError::Json(e.to_string()))
}

/// Parses `estimate.json` (one estimate or a list) and checks each bracket.
pub fn parse_estimate_json(text: &str) -> Result<Vec<PressureEstimate>, HarnessError> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(PressureEstimate),
        Many(Vec<PressureEstimate>),
    }
    let all = match serde_json::from_str(text).map_err(|e| HarnessError::Json(e.to_string()))? {
        OneOrMany::One(e) => vec![e],
        OneOrMany::Many(v) => v,
    };
    for e in &all {
        let (lo, hi) = e.bracket;
        if !(lo <= e.critical_s && e.critical_s <= hi) {
            return Err(HarnessError::Json("critical_s outside its bracket".into()));
        }
    }
    Ok(all)
}

/// Local pressure traces at the first `count` sample points used by
/// [`bk_pressure`] with the same seed.
#[allow(clippy::too_many_arguments)]
pub fn bk_sample_traces(
    mu: &Measure,
    potential: &Potential,
    sys: &System,
    epsilon: f64,
    count: usize,
    seed: u64,
    min_order: usize,
    n_max: usize,
) -> Result<Vec<LocalPressureTrace>, HarnessError> {
    let length = match sys {
        System::Shift(s) => s.cylinder_length(n_max, epsilon),
        System::Circle(_) => 0,
    };
    let window = crate::measures::default_window(min_order, n_max);
    crate::measures::sample_seeds(seed, count)
        .into_iter()
        .map(|sd| {
            let x = mu.sample(sys, length, sd)?;
            Ok(crate::measures::bk_local(mu, potential, sys, epsilon, &x.point, min_order, n_max, Some(window))?)
        })
        .collect()
}

pub fn write_trace_csv(traces: &[LocalPressureTrace], out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["point", "epsilon", "n", "quotient"]).map_err(csv_err)?;
    for t in traces {
        for v in &t.values {
            w.write_record([t.point.clone(), t.epsilon.to_string(), v.n.to_string(), v.quotient.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sandwich
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub epsilon: f64,
    pub min_order: usize,
    pub max_depth: usize,
    pub s: f64,
    pub theta: f64,
    /// Center-value cost at `(s + θ, ε/2)`.
    pub center: f64,
    pub weighted: f64,
    pub sup: f64,
}

impl SandwichRow {
    pub fn holds(&self) -> bool {
        self.center <= self.weighted && self.weighted <= self.sup
    }
}

/// The three costs of the sandwich at the sup-mode problem's truncation.
pub fn sandwich_row(p: &CoverProblem, s: f64, theta: f64) -> Result<SandwichRow, HarnessError> {
    let sup_problem = p.clone().with_mode(ValueMode::Sup);
    let half = CoverProblem::new(
        p.system.clone(),
        p.target.clone(),
        p.potential.clone(),
        p.min_order,
        p.epsilon / 2.0,
        p.max_depth,
    )?
    .with_mode(ValueMode::Center);
    Ok(SandwichRow {
        epsilon: p.epsilon,
        min_order: p.min_order,
        max_depth: p.max_depth,
        s,
        theta,
        center: crate::cover::cover_cost(&half, s + theta)?,
        weighted: weighted_cover_cost(&sup_problem, s, &p.target)?,
        sup: crate::cover::cover_cost(&sup_problem, s)?,
    })
}

// ---------------------------------------------------------------------------
// Measure families
// ---------------------------------------------------------------------------

/// Parametric measure families searched by the report.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureFamily {
    /// Bernoulli measures (full shifts).
    Bernoulli,
    /// Markov measures supported on the allowed transitions.
    Markov,
    /// A single measure (e.g. Lebesgue on the circle).
    Fixed(Measure),
}

impl Serialize for MeasureFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            MeasureFamily::Bernoulli => "bernoulli",
            MeasureFamily::Markov => "markov",
            MeasureFamily::Fixed(_) => "fixed",
        })
    }
}

/// Rows of probability vectors; a Bernoulli parameter has one row.
pub type FamilyParams = Vec<Vec<f64>>;

pub fn format_params(p: &FamilyParams) -> String {
    p.iter()
        .map(|row| row.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>().join(";"))
        .collect::<Vec<_>>()
        .join("|")
}

impl MeasureFamily {
    pub fn default_for(sys: &System) -> Self {
        match sys {
            System::Circle(_) => MeasureFamily::Fixed(Measure::Lebesgue),
            System::Shift(s) if s.is_full_shift() => MeasureFamily::Bernoulli,
            System::Shift(_) => MeasureFamily::Markov,
        }
    }

    /// Allowed support of each parameter row.
    fn supports(&self, sys: &System) -> Vec<Vec<usize>> {
        let m = sys.alphabet_size();
        match (self, sys) {
            (MeasureFamily::Markov, System::Shift(s)) => (0..m)
                .map(|a| (0..m).filter(|&b| s.allowed(a as Symbol, b as Symbol)).collect())
                .collect(),
            _ => vec![(0..m).collect()],
        }
    }

    pub fn build(&self, sys: &System, params: &FamilyParams) -> Result<Measure, MeasureError> {
        match self {
            MeasureFamily::Bernoulli => Measure::bernoulli(params[0].clone()),
            MeasureFamily::Markov => Measure::markov(params.clone(), None),
            MeasureFamily::Fixed(mu) => {
                mu.validate(sys)?;
                Ok(mu.clone())
            }
        }
    }

    /// Grid points with every row a composition of `g` over its support.
    pub fn grid(&self, sys: &System, g: usize) -> Vec<FamilyParams> {
        if let MeasureFamily::Fixed(_) = self {
            return vec![Vec::new()];
        }
        let m = sys.alphabet_size();
        let row_points: Vec<Vec<Vec<f64>>> = self
            .supports(sys)
            .iter()
            .map(|support| {
                compositions(g, support.len())
                    .into_iter()
                    .map(|c| {
                        let mut row = vec![0.0; m];
                        for (k, &a) in support.iter().enumerate() {
                            row[a] = c[k] as f64 / g as f64;
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        let mut out: Vec<FamilyParams> = vec![Vec::new()];
        for rows in &row_points {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    rows.iter().map(move |r| {
                        let mut p = prefix.clone();
                        p.push(r.clone());
                        p
                    })
                })
                .collect();
        }
        out
    }

    /// Moves of mass `h` between two support entries of one row.
    fn neighbours(&self, sys: &System, p: &FamilyParams, h: f64) -> Vec<FamilyParams> {
        if let MeasureFamily::Fixed(_) = self {
            return Vec::new();
        }
        let mut out = Vec::new();
        for (r, support) in self.supports(sys).iter().enumerate() {
            for &i in support {
                for &j in support {
                    if i != j && p[r][i] >= h {
                        let mut q = p.clone();
                        q[r][i] -= h;
                        q[r][j] += h;
                        // keep rows exactly normalized
                        let last = *support.last().expect("nonempty support");
                        let rest: f64 = support.iter().filter(|&&a| a != last).map(|&a| q[r][a]).sum();
                        q[r][last] = (1.0 - rest).max(0.0);
                        out.push(q);
                    }
                }
            }
        }
        out
    }
}

fn compositions(g: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![g]];
    }
    (0..=g)
        .flat_map(|first| {
            compositions(g - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

/// Best value of `objective` over the family: grid search, then local
/// moves with halving step. Ties keep the earlier candidate.
pub fn optimize_family<F>(
    family: &MeasureFamily,
    sys: &System,
    grid: usize,
    rounds: usize,
    objective: F,
) -> Option<(FamilyParams, f64)>
where
    F: Fn(&Measure) -> Option<f64> + Sync,
{
    let eval = |p: &FamilyParams| family.build(sys, p).ok().and_then(|mu| objective(&mu));
    let candidates = family.grid(sys, grid.max(1));
    let scored: Vec<Option<f64>> = candidates.par_iter().map(eval).collect();
    let mut best: Option<(FamilyParams, f64)> = None;
    for (p, v) in candidates.into_iter().zip(scored) {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            if best.as_ref().is_none_or(|b| v > b.1) {
                best = Some((p, v));
            }
        }
    }
    let (mut bp, mut bv) = best?;
    let mut h = 0.5 / grid.max(1) as f64;
    for _ in 0..rounds {
        for _ in 0..32 {
            let moves = family.neighbours(sys, &bp, h);
            let scored: Vec<Option<f64>> = moves.par_iter().map(eval).collect();
            let mut improved = false;
            for (q, v) in moves.into_iter().zip(scored) {
                if let Some(v) = v.filter(|v| v.is_finite() && *v > bv) {
                    bp = q;
                    bv = v;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }
        h /= 2.0;
    }
    Some((bp, bv))
}

// ---------------------------------------------------------------------------
// Variational-principle report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VpConfig {
    pub epsilons: Vec<f64>,
    pub min_order: usize,
    pub depth_extra: usize,
    /// `δ` of the Katok column.
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub n_max: usize,
    pub family: MeasureFamily,
    pub family_grid: usize,
    pub refine_rounds: usize,
    pub katok: KatokOptions,
    /// Orders used by the distortion pre-check.
    pub distortion_orders: Vec<usize>,
}

impl VpConfig {
    pub fn from_config(c: &Config, sys: &System) -> Self {
        Self {
            epsilons: c.run.epsilon.clone(),
            min_order: c.run.min_order,
            depth_extra: c.run.depth_extra,
            delta: c.run.deltas.iter().copied().fold(f64::INFINITY, f64::min),
            samples: c.run.samples,
            seed: c.run.seed,
            n_max: c.run.n_max,
            family: MeasureFamily::default_for(sys),
            family_grid: c.run.family_grid,
            refine_rounds: c.run.refine_rounds,
            katok: KatokOptions::default(),
            distortion_orders: c.run.orders.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpRow {
    pub epsilon: f64,
    pub cover_s: Option<f64>,
    pub cover_bracket: Option<(f64, f64)>,
    /// Best Katok exponent over the family at `ε`.
    pub katok_s: Option<f64>,
    pub katok_width: f64,
    pub katok_params: Option<String>,
    /// Best Brin–Katok estimate over the family at `ε`.
    pub bk_mean: Option<f64>,
    pub bk_stderr: Option<f64>,
    pub bk_params: Option<String>,
    /// Katok exponent at `2ε` for the Brin–Katok maximizer.
    pub katok_2eps_s: Option<f64>,
    pub gap_ck: Option<f64>,
    pub gap_cb: Option<f64>,
    /// Columns that could not be computed, with reasons.
    pub flags: Vec<String>,
}

impl VpRow {
    /// Slack allowed in `katok ≤ cover`.
    pub fn ck_tolerance(&self) -> f64 {
        self.cover_bracket.map_or(0.0, |(a, b)| b - a) + self.katok_width + 1e-9
    }

    /// `katok ≤ cover + tolerance` (vacuous when a column is missing).
    pub fn katok_below_cover(&self) -> bool {
        match (self.katok_s, self.cover_s) {
            (Some(k), Some(c)) => k <= c + self.ck_tolerance(),
            _ => true,
        }
    }

    /// Slack allowed in `katok(2ε) ≥ bk(ε)`.
    pub fn cross_tolerance(&self) -> f64 {
        2.0 * (self.bk_stderr.unwrap_or(0.0) + self.katok_width) + 1e-9
    }

    pub fn katok_2eps_above_bk(&self) -> bool {
        match (self.katok_2eps_s, self.bk_mean) {
            (Some(k), Some(b)) => k >= b - self.cross_tolerance(),
            _ => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VpReport {
    pub rows: Vec<VpRow>,
    pub cover_limit: Option<Extrapolation>,
    pub katok_limit: Option<Extrapolation>,
    pub bk_limit: Option<Extrapolation>,
    pub config: VpConfig,
    pub window: (usize, usize),
    pub distortion: Option<Verdict>,
    pub warnings: Vec<String>,
}

impl VpReport {
    /// Rows violating either finite-scale inequality.
    pub fn violations(&self) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| !r.katok_below_cover() || !r.katok_2eps_above_bk())
            .map(|r| r.epsilon)
            .collect()
    }
}

fn katok_exponent(p: &CoverProblem, mu: &Measure, delta: f64, opts: &KatokOptions) -> Result<(f64, f64), HarnessError> {
    let tree = KatokTree::new(p, mu)?;
    let e = katok_estimate(&tree, delta, opts, &SearchOptions::default())?;
    Ok((e.critical_s, (e.bracket.1 - e.bracket.0) + (e.critical_s - e.lower_s)))
}

/// Computes the three columns per `ε`, with extrapolations.
pub fn vp_report(sys: &System, target: &Target, potential: &Potential, cfg: &VpConfig) -> Result<VpReport, HarnessError> {
    let mut warnings = Vec::new();
    let mut eps_sorted = cfg.epsilons.clone();
    eps_sorted.sort_by(f64::total_cmp);
    eps_sorted.dedup();
    let distortion = match tempered_report(potential, sys, &eps_sorted, &cfg.distortion_orders) {
        Ok(r) => {
            if !r.verdict.is_tempered() {
                warnings.push(format!("potential is {} on the grid", r.verdict.label()));
            }
            Some(r.verdict)
        }
        Err(e) => {
            warnings.push(format!("distortion check failed: {e}"));
            None
        }
    };
    let problem = |eps: f64| {
        CoverProblem::with_depth_extra(sys.clone(), target.clone(), potential.clone(), cfg.min_order, eps, cfg.depth_extra)
    };
    let mut rows = Vec::new();
    for &eps in &cfg.epsilons {
        let mut row = VpRow {
            epsilon: eps,
            cover_s: None,
            cover_bracket: None,
            katok_s: None,
            katok_width: 0.0,
            katok_params: None,
            bk_mean: None,
            bk_stderr: None,
            bk_params: None,
            katok_2eps_s: None,
            gap_ck: None,
            gap_cb: None,
            flags: Vec::new(),
        };
        let p = match problem(eps) {
            Ok(p) => p,
            Err(e) => {
                row.flags.push(format!("problem: {e}"));
                rows.push(row);
                continue;
            }
        };
        match critical_exponent_with(&p, Engine::Auto, &SearchOptions::default()) {
            Ok(e) => {
                row.cover_s = Some(e.critical_s);
                row.cover_bracket = Some(e.bracket);
            }
            Err(e) => row.flags.push(format!("cover: {e}")),
        }
        let widths = std::sync::Mutex::new(0.0f64);
        let katok_best = optimize_family(&cfg.family, sys, cfg.family_grid, cfg.refine_rounds, |mu| {
            let (s, w) = katok_exponent(&p, mu, cfg.delta, &cfg.katok).ok()?;
            let mut g = widths.lock().expect("unpoisoned");
            *g = g.max(w);
            Some(s)
        });
        row.katok_width = *widths.lock().expect("unpoisoned");
        match katok_best {
            Some((params, s)) => {
                row.katok_s = Some(s);
                row.katok_params = Some(format_params(&params));
            }
            None => row.flags.push("katok: no family member evaluated".into()),
        }
        let bk_best = optimize_family(&cfg.family, sys, cfg.family_grid, cfg.refine_rounds, |mu| {
            bk_pressure(mu, potential, sys, eps, cfg.samples, cfg.seed, cfg.min_order, cfg.n_max)
                .ok()
                .map(|b| b.mean)
        });
        match bk_best {
            Some((params, _)) => {
                let mu = cfg.family.build(sys, &params)?;
                let b = bk_pressure(&mu, potential, sys, eps, cfg.samples, cfg.seed, cfg.min_order, cfg.n_max)?;
                row.bk_mean = Some(b.mean);
                row.bk_stderr = Some(b.stderr);
                row.bk_params = Some(format_params(&params));
                match problem(2.0 * eps).map_err(HarnessError::from).and_then(|p2| katok_exponent(&p2, &mu, cfg.delta, &cfg.katok)) {
                    Ok((s, w)) => {
                        row.katok_2eps_s = Some(s);
                        row.katok_width = row.katok_width.max(w);
                    }
                    Err(e) => row.flags.push(format!("katok at 2ε: {e}")),
                }
            }
            None => row.flags.push("bk: no family member evaluated".into()),
        }
        row.gap_ck = row.cover_s.zip(row.katok_s).map(|(c, k)| c - k);
        row.gap_cb = row.cover_s.zip(row.bk_mean).map(|(c, b)| c - b);
        rows.push(row);
    }
    let column = |f: &dyn Fn(&VpRow) -> Option<f64>| -> (Vec<f64>, Vec<f64>) {
        rows.iter().filter_map(|r| f(r).map(|v| (r.epsilon, v))).unzip()
    };
    let fit = |f: &dyn Fn(&VpRow) -> Option<f64>| {
        let (e, v) = column(f);
        extrapolate(&e, &v)
    };
    Ok(VpReport {
        cover_limit: fit(&|r| r.cover_s),
        katok_limit: fit(&|r| r.katok_s),
        bk_limit: fit(&|r| r.bk_mean),
        window: crate::measures::default_window(cfg.min_order, cfg.n_max),
        config: cfg.clone(),
        distortion,
        warnings,
        rows,
    })
}

/// One `vp_report.csv` row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpCsvRow {
    pub epsilon: f64,
    pub cover_s: Option<f64>,
    pub katok_s: Option<f64>,
    pub bk_mean: Option<f64>,
    pub bk_stderr: Option<f64>,
    pub gap_ck: Option<f64>,
    pub gap_cb: Option<f64>,
    pub opt_measure_params: Option<String>,
}

pub const VP_CSV_COLUMNS: [&str; 8] = [
    "epsilon",
    "cover_s",
    "katok_s",
    "bk_mean",
    "bk_stderr",
    "gap_ck",
    "gap_cb",
    "opt_measure_params",
];

pub fn write_vp_csv(report: &VpReport, out: impl Write) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.rows {
        w.serialize(VpCsvRow {
            epsilon: r.epsilon,
            cover_s: r.cover_s,
            katok_s: r.katok_s,
            bk_mean: r.bk_mean,
            bk_stderr: r.bk_stderr,
            gap_ck: r.gap_ck,
            gap_cb: r.gap_cb,
            opt_measure_params: r.bk_params.clone(),
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `vp_report.csv`, requiring exactly the published columns.
pub fn parse_vp_report_csv(input: impl Read) -> Result<Vec<VpCsvRow>, HarnessError> {
    let mut r = csv::Reader::from_reader(input);
    let headers: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if headers != VP_CSV_COLUMNS {
        let missing: Vec<&str> = VP_CSV_COLUMNS.iter().copied().filter(|c| !headers.iter().any(|h| h == c)).collect();
        return Err(HarnessError::Csv(format!("column mismatch: got {headers:?}, missing {missing:?}")));
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let e = extrapolate(&[0.3, 0.1, 0.2, 0.9], &[1.3, 1.1, 1.2, 5.0]).unwrap();
        assert!((e.intercept - 1.0).abs() < 1e-12 && (e.slope - 1.0).abs() < 1e-12);
        assert!(e.residual < 1e-12);
        assert_eq!(e.points, 3);
        assert!(extrapolate(&[0.1], &[1.0]).is_none());
    }

    #[test]
    fn compositions_count() {
        assert_eq!(compositions(4, 3).len(), 15);
        assert!(compositions(5, 2).iter().all(|c| c.iter().sum::<usize>() == 5));
    }

    #[test]
    fn unknown_family_rejected() {
        let c = Config::parse("[system]\nkind = \"shift\"\nalphabet_size = 2\n").unwrap();
        assert!(matches!(baseline_expectations("nope", &c), Err(HarnessError::UnknownFamily(_))));
        assert!(baseline_expectations("circle-entropy", &c).is_err());
        let v = baseline_expectations("shift-entropy", &c).unwrap();
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn vp_csv_round_trip_and_column_check() {
        let row = VpCsvRow {
            epsilon: 0.1,
            cover_s: Some(1.2),
            katok_s: None,
            bk_mean: Some(1.0),
            bk_stderr: Some(0.01),
            gap_ck: None,
            gap_cb: Some(0.2),
            opt_measure_params: Some("0.5;0.5".into()),
        };
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.serialize(&row).unwrap();
        }
        assert_eq!(parse_vp_report_csv(buf.as_slice()).unwrap(), vec![row]);
        assert!(parse_vp_report_csv("epsilon,cover_s\n0.1,1\n".as_bytes()).is_err());
    }
}
