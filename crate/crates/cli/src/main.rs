//! `nbp`: command-line front end for the neutralized Bowen pressure lab.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nbp_core::config::Config;
use nbp_core::cover::katok::KatokOptions;
use nbp_core::cover::{critical_exponent_with, CoverProblem, SearchOptions, Target};
use nbp_core::frostman::{admissible_balls, construct, verify_bound, write_tree_csv};
use nbp_core::harness::{
    baseline_expectations, bk_sample_traces, cost_sweep, sandwich_row, vp_report, write_baselines_csv,
    write_estimate_json, write_sweep_csv, write_trace_csv, write_vp_csv, HarnessError, VpConfig, BASELINE_FAMILIES,
};
use nbp_core::measures::{bk_pressure, katok_pressure, Measure};
use nbp_core::potentials::{tempered_report, Potential};
use nbp_core::systems::System;
use serde::Serialize;

#[derive(Parser)]
#[command(name = "nbp", version, about = "Neutralized Bowen pressure estimates and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Critical exponent of the Bowen cover cost.
    Pressure(Common),
    /// Weighted cover costs at the configured `s` values, with the sandwich check.
    Weighted(Common),
    /// Katok pressure of the configured measure for each δ.
    Katok(Common),
    /// Brin–Katok local pressure averaged over sampled points.
    Bk(Common),
    /// Frostman measure for the cover problem.
    Frostman(Common),
    /// Tempered-distortion diagnostics of the potential.
    Distortion(Common),
    /// Finite-scale variational principle report.
    VpCheck(Common),
    /// Closed-form baseline values.
    Baselines {
        #[command(flatten)]
        common: Common,
        /// Baseline family; all applicable families when omitted.
        #[arg(long)]
        family: Option<String>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated ε grid (overrides `run.epsilon`).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Minimum order N.
    #[arg(long = "bigN")]
    big_n: Option<usize>,
    /// Truncation depth D_max.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

struct Setup {
    config: Config,
    system: System,
    potential: Potential,
    target: Target,
    out: PathBuf,
    format: Format,
    base: PathBuf,
}

impl Setup {
    fn new(c: &Common) -> Result<Self> {
        let mut config = Config::load(&c.config)?;
        if let Some(e) = &c.eps {
            config.run.epsilon = e.clone();
        }
        if let Some(n) = c.big_n {
            config.run.min_order = n;
        }
        if c.depth.is_some() {
            config.run.depth = c.depth;
        }
        if let Some(s) = c.seed {
            config.run.seed = s;
        }
        if config.run.epsilon.is_empty() {
            bail!("empty ε grid");
        }
        let system = config.build_system()?;
        let potential = config.build_potential(&system)?;
        let target = config.build_target()?;
        fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
        Ok(Self {
            base: c.config.parent().map(Path::to_path_buf).unwrap_or_default(),
            config,
            system,
            potential,
            target,
            out: c.out.clone(),
            format: c.format,
        })
    }

    fn problem(&self, eps: f64) -> Result<CoverProblem> {
        let r = &self.config.run;
        let p = match r.depth {
            Some(d) => CoverProblem::new(
                self.system.clone(),
                self.target.clone(),
                self.potential.clone(),
                r.min_order,
                eps,
                d,
            ),
            None => CoverProblem::with_depth_extra(
                self.system.clone(),
                self.target.clone(),
                self.potential.clone(),
                r.min_order,
                eps,
                r.depth_extra,
            ),
        }?;
        Ok(p.with_mode(r.mode))
    }

    fn measure(&self) -> Result<Measure> {
        self.config
            .build_measure(&self.system, Some(&self.base))?
            .context("this command needs a [measure] section")
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        Ok(BufWriter::new(
            File::create(&path).with_context(|| format!("creating {}", path.display()))?,
        ))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        write_estimate_json(value, self.create(name)?)?;
        Ok(())
    }

    fn csv<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.create(name)?);
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn pressure(s: &Setup) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        epsilon: f64,
        #[serde(rename = "N")]
        min_order: usize,
        #[serde(rename = "D_max")]
        max_depth: usize,
        critical_s: f64,
        bracket_lo: f64,
        bracket_hi: f64,
    }
    let mut estimates = Vec::new();
    for &eps in &s.config.run.epsilon {
        let p = s.problem(eps)?;
        let e = critical_exponent_with(&p, s.config.run.engine, &SearchOptions::default())?;
        println!("eps={eps} N={} D={} s*={:.10}", e.min_order, e.max_depth, e.critical_s);
        estimates.push(e);
    }
    s.json("estimate.json", &estimates)?;
    if s.format == Format::Csv {
        let rows: Vec<Row> = estimates
            .iter()
            .map(|e| Row {
                epsilon: e.epsilon,
                min_order: e.min_order,
                max_depth: e.max_depth,
                critical_s: e.critical_s,
                bracket_lo: e.bracket.0,
                bracket_hi: e.bracket.1,
            })
            .collect();
        s.csv("pressure.csv", &rows)?;
    }
    Ok(())
}

fn weighted(s: &Setup) -> Result<()> {
    let r = &s.config.run;
    if r.s.is_empty() {
        bail!("set `run.s` to the exponents to evaluate");
    }
    let mut sweep = Vec::new();
    let mut sandwich = Vec::new();
    for &eps in &r.epsilon {
        let p = s.problem(eps)?;
        sweep.extend(cost_sweep(&p, &r.s, r.engine)?);
        for &x in &r.s {
            let row = sandwich_row(&p, x, r.theta)?;
            if !row.holds() {
                eprintln!("sandwich fails at eps={eps} s={x}: {row:?}");
            }
            sandwich.push(row);
        }
    }
    match s.format {
        Format::Csv => {
            write_sweep_csv(&sweep, s.create("sweep.csv")?)?;
            s.csv("sandwich.csv", &sandwich)?;
        }
        Format::Json => s.json("weighted.json", &serde_json::json!({ "sweep": sweep, "sandwich": sandwich }))?,
    }
    println!("{} cost rows, {} sandwich rows", sweep.len(), sandwich.len());
    Ok(())
}

fn katok(s: &Setup) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        epsilon: f64,
        delta: f64,
        critical_s: f64,
        lower_s: f64,
        slack: f64,
    }
    let mu = s.measure()?;
    let mut rows = Vec::new();
    for &eps in &s.config.run.epsilon {
        let p = s.problem(eps)?;
        for k in katok_pressure(&mu, &p, &s.config.run.deltas, &KatokOptions::default())? {
            println!("eps={eps} delta={} s*={:.10} lower={:.10}", k.delta, k.critical_s, k.lower_s);
            rows.push(Row {
                epsilon: eps,
                delta: k.delta,
                critical_s: k.critical_s,
                lower_s: k.lower_s,
                slack: k.slack,
            });
        }
    }
    match s.format {
        Format::Csv => s.csv("katok.csv", &rows),
        Format::Json => s.json("katok.json", &rows),
    }
}

/// Number of per-point traces written by `bk`.
const TRACE_COUNT: usize = 8;

fn bk(s: &Setup) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        epsilon: f64,
        mean: f64,
        stderr: f64,
        samples: usize,
        window_start: usize,
        window_end: usize,
    }
    let r = &s.config.run;
    let mu = s.measure()?;
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    for &eps in &r.epsilon {
        let b = bk_pressure(&mu, &s.potential, &s.system, eps, r.samples, r.seed, r.min_order, r.n_max)?;
        println!("eps={eps} mean={:.6} se={:.6}", b.mean, b.stderr);
        traces.extend(bk_sample_traces(
            &mu,
            &s.potential,
            &s.system,
            eps,
            TRACE_COUNT.min(r.samples),
            r.seed,
            r.min_order,
            r.n_max,
        )?);
        rows.push(Row {
            epsilon: eps,
            mean: b.mean,
            stderr: b.stderr,
            samples: b.samples,
            window_start: b.window.0,
            window_end: b.window.1,
        });
    }
    write_trace_csv(&traces, s.create("bk_traces.csv")?)?;
    match s.format {
        Format::Csv => s.csv("bk.csv", &rows),
        Format::Json => s.json("bk.json", &rows),
    }
}

fn frostman(s: &Setup) -> Result<()> {
    #[derive(Serialize)]
    struct Summary {
        epsilon: f64,
        s: f64,
        depth: usize,
        total_flow: f64,
        c_reference: f64,
        balls_checked: usize,
        violations: usize,
        file: String,
    }
    let mut out = Vec::new();
    for &eps in &s.config.run.epsilon {
        let p = s.problem(eps)?;
        let exps = match s.config.run.s.as_slice() {
            [] => vec![critical_exponent_with(&p, s.config.run.engine, &SearchOptions::default())?.critical_s],
            v => v.to_vec(),
        };
        for x in exps {
            let r = construct(&p, x)?;
            let balls = admissible_balls(&p)?;
            let bad = verify_bound(&r, &p, &balls)?;
            let file = format!("frostman_eps{eps}_s{x}.csv");
            write_tree_csv(&r.measure, s.create(&file)?)?;
            println!("eps={eps} s={x} F={:.6e} violations={}", r.total_flow, bad.len());
            out.push(Summary {
                epsilon: eps,
                s: x,
                depth: r.depth,
                total_flow: r.total_flow,
                c_reference: r.c_reference,
                balls_checked: balls.len(),
                violations: bad.len(),
                file,
            });
        }
    }
    match s.format {
        Format::Csv => s.csv("frostman.csv", &out),
        Format::Json => s.json("frostman.json", &out),
    }
}

fn distortion(s: &Setup) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        epsilon: f64,
        n: usize,
        lower: f64,
        upper: f64,
        exact: bool,
        ratio: f64,
    }
    let mut eps = s.config.run.epsilon.clone();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    let report = tempered_report(&s.potential, &s.system, &eps, &s.config.run.orders)?;
    println!("{}", report.verdict.label());
    match s.format {
        Format::Csv => {
            let rows: Vec<Row> = report
                .entries
                .iter()
                .map(|e| Row {
                    epsilon: e.epsilon,
                    n: e.n,
                    lower: e.bound.lower,
                    upper: e.bound.upper,
                    exact: e.bound.exact,
                    ratio: e.ratio,
                })
                .collect();
            s.csv("distortion.csv", &rows)
        }
        Format::Json => s.json("distortion.json", &report),
    }
}

fn vp_check(s: &Setup) -> Result<bool> {
    let cfg = VpConfig::from_config(&s.config, &s.system);
    let report = vp_report(&s.system, &s.target, &s.potential, &cfg)?;
    write_vp_csv(&report, s.create("vp_report.csv")?)?;
    s.json("vp_report.json", &report)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for r in &report.rows {
        for f in &r.flags {
            eprintln!("eps={}: {f}", r.epsilon);
        }
    }
    let fmt = |e: &Option<nbp_core::harness::Extrapolation>| e.map_or("n/a".into(), |e| format!("{:.6}", e.intercept));
    println!(
        "eps->0: cover {} katok {} bk {}",
        fmt(&report.cover_limit),
        fmt(&report.katok_limit),
        fmt(&report.bk_limit)
    );
    let bad = report.violations();
    if !bad.is_empty() {
        eprintln!("inequality violated at eps {bad:?}");
    }
    Ok(bad.is_empty())
}

fn baselines(s: &Setup, family: Option<&str>) -> Result<()> {
    let rows = match family {
        Some(f) => baseline_expectations(f, &s.config)?,
        None => {
            let mut all = Vec::new();
            for f in BASELINE_FAMILIES {
                match baseline_expectations(f, &s.config) {
                    Ok(v) => all.extend(v),
                    Err(HarnessError::NotApplicable { .. }) => {}
                    Err(e) => return Err(e.into()),
                }
            }
            all
        }
    };
    if rows.is_empty() {
        bail!("no baseline family applies to this configuration");
    }
    for r in &rows {
        println!("{} eps={} {:.10}", r.family, r.epsilon, r.value);
    }
    match s.format {
        Format::Csv => Ok(write_baselines_csv(&rows, s.create("baselines.csv")?)?),
        Format::Json => s.json("baselines.json", &rows),
    }
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Pressure(c) => pressure(&Setup::new(c)?)?,
        Command::Weighted(c) => weighted(&Setup::new(c)?)?,
        Command::Katok(c) => katok(&Setup::new(c)?)?,
        Command::Bk(c) => bk(&Setup::new(c)?)?,
        Command::Frostman(c) => frostman(&Setup::new(c)?)?,
        Command::Distortion(c) => distortion(&Setup::new(c)?)?,
        Command::VpCheck(c) => return vp_check(&Setup::new(c)?),
        Command::Baselines { common, family } => baselines(&Setup::new(common)?, family.as_deref())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
