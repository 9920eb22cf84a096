//! TOML run configuration: system, potential, measure and run parameters.
//!
//! ```toml
//! [system]
//! kind = "shift"
//! alphabet_size = 2
//! transitions = ["11", "10"]
//!
//! [potential]
//! kind = "additive"
//! values = [0.0, 0.6931471805599453]
//!
//! [measure]
//! kind = "bernoulli"
//! p = [0.5, 0.5]
//!
//! [run]
//! epsilon = [0.1, 0.2, 0.3]
//! min_order = 10
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{Engine, Target};
use crate::frostman::{read_tree_csv, FrostmanError};
use crate::measures::{Measure, MeasureError};
use crate::potentials::{CircleFunction, Cocycle, Potential, PotentialError, ValueMode};
use crate::systems::{parse_word, CircleSystem, SymbolicSystem, System, SystemError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(String),
    #[error("config: {0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Frostman(#[from] FrostmanError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Shift,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub kind: SystemKind,
    pub alphabet_size: Option<usize>,
    /// Rows of `0`/`1`; omitted for the full shift.
    pub transitions: Option<Vec<String>>,
    pub metric_base: Option<f64>,
    pub degree: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialKindConfig {
    Zero,
    Additive,
    Cocycle,
    Circle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKindConfig,
    /// Per-symbol values (additive).
    pub values: Option<Vec<f64>>,
    /// One row-major matrix per symbol (cocycle).
    pub matrices: Option<Vec<Vec<f64>>>,
    pub constant: Option<f64>,
    pub cos: Option<Vec<f64>>,
    pub sin: Option<Vec<f64>>,
    pub lipschitz: Option<f64>,
    /// Adds `n·offset` to `φ_n`.
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKindConfig {
    Bernoulli,
    Markov,
    Lebesgue,
    FrostmanTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub kind: MeasureKindConfig,
    pub p: Option<Vec<f64>>,
    /// Markov matrix rows.
    pub rows: Option<Vec<Vec<f64>>>,
    pub pi: Option<Vec<f64>>,
    /// `word,mass` CSV for a tree measure, relative to the config file.
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub epsilon: Vec<f64>,
    pub min_order: usize,
    /// Explicit truncation depth; otherwise `L(N, ε) + depth_extra`.
    pub depth: Option<usize>,
    pub depth_extra: usize,
    /// Cylinder words of the target; empty means the whole space.
    pub target: Vec<String>,
    pub mode: ValueMode,
    pub engine: Engine,
    pub seed: u64,
    pub samples: usize,
    pub n_max: usize,
    pub deltas: Vec<f64>,
    /// Cost-curve points for sweeps.
    pub s: Vec<f64>,
    pub theta: f64,
    /// Grid resolution per probability simplex in measure-family searches.
    pub family_grid: usize,
    pub refine_rounds: usize,
    /// Orders used by the distortion report.
    pub orders: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            epsilon: vec![0.1, 0.2, 0.3],
            min_order: 10,
            depth: None,
            depth_extra: 0,
            target: Vec::new(),
            mode: ValueMode::Sup,
            engine: Engine::Auto,
            seed: 1,
            samples: 64,
            n_max: 200,
            deltas: vec![0.2, 0.1, 0.05, 0.01],
            s: Vec::new(),
            theta: 0.1,
            family_grid: 10,
            refine_rounds: 4,
            orders: vec![5, 10, 20, 40, 80],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub system: SystemConfig,
    pub potential: Option<PotentialConfig>,
    pub measure: Option<MeasureConfig>,
    #[serde(default)]
    pub run: RunConfig,
}

fn need<T: Clone>(v: &Option<T>, what: &str) -> Result<T, ConfigError> {
    v.clone().ok_or_else(|| ConfigError::Invalid(format!("missing `{what}`")))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn build_system(&self) -> Result<System, ConfigError> {
        let c = &self.system;
        match c.kind {
            SystemKind::Shift => {
                let mut s = match &c.transitions {
                    Some(rows) => {
                        let matrix = rows
                            .iter()
                            .map(|r| {
                                r.chars()
                                    .map(|ch| match ch {
                                        '1' => Ok(true),
                                        '0' => Ok(false),
                                        _ => Err(ConfigError::Invalid(format!("transition row {r:?}"))),
                                    })
                                    .collect::<Result<Vec<bool>, _>>()
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        if let Some(m) = c.alphabet_size {
                            if m != matrix.len() {
                                return Err(ConfigError::Invalid("alphabet_size differs from transitions".into()));
                            }
                        }
                        SymbolicSystem::new(matrix)?
                    }
                    None => SymbolicSystem::full_shift(need(&c.alphabet_size, "system.alphabet_size")?)?,
                };
                if let Some(b) = c.metric_base {
                    s = s.with_metric_base(b)?;
                }
                Ok(System::Shift(s))
            }
            SystemKind::Circle => {
                if c.transitions.is_some() || c.metric_base.is_some() {
                    return Err(ConfigError::Invalid("circle systems take only `degree`".into()));
                }
                Ok(System::Circle(CircleSystem::new(need(&c.degree, "system.degree")?)?))
            }
        }
    }

    /// The configured potential (zero when absent), validated against `sys`.
    pub fn build_potential(&self, sys: &System) -> Result<Potential, ConfigError> {
        let Some(c) = &self.potential else {
            return Ok(zero_potential(sys)?);
        };
        let p = match c.kind {
            PotentialKindConfig::Zero => zero_potential(sys)?,
            PotentialKindConfig::Additive => Potential::symbolic(need(&c.values, "potential.values")?),
            PotentialKindConfig::Cocycle => {
                let mats = need(&c.matrices, "potential.matrices")?;
                let matrices = mats
                    .iter()
                    .map(|m| {
                        let dim = (m.len() as f64).sqrt().round() as usize;
                        if dim == 0 || dim * dim != m.len() {
                            return Err(ConfigError::Invalid("cocycle matrices must be square".into()));
                        }
                        Ok(DMatrix::from_row_slice(dim, dim, m))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Potential::cocycle(Cocycle::new(matrices)?)
            }
            PotentialKindConfig::Circle => Potential::circle(CircleFunction::new(
                c.constant.unwrap_or(0.0),
                c.cos.clone().unwrap_or_default(),
                c.sin.clone().unwrap_or_default(),
                c.lipschitz,
            )?),
        };
        let p = p.with_offset(c.offset.unwrap_or(0.0));
        p.validate(sys)?;
        Ok(p)
    }

    /// The configured measure, if any. Tree CSV paths resolve against `base`.
    pub fn build_measure(&self, sys: &System, base: Option<&Path>) -> Result<Option<Measure>, ConfigError> {
        let Some(c) = &self.measure else {
            return Ok(None);
        };
        let mu = match c.kind {
            MeasureKindConfig::Bernoulli => Measure::bernoulli(need(&c.p, "measure.p")?)?,
            MeasureKindConfig::Markov => Measure::markov(need(&c.rows, "measure.rows")?, c.pi.clone())?,
            MeasureKindConfig::Lebesgue => Measure::Lebesgue,
            MeasureKindConfig::FrostmanTree => {
                let rel = need(&c.path, "measure.path")?;
                let path = base.map_or_else(|| Path::new(&rel).to_path_buf(), |b| b.join(&rel));
                let file = std::fs::File::open(&path).map_err(|source| ConfigError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                Measure::FrostmanTree(read_tree_csv(file, sys.alphabet_size())?)
            }
        };
        mu.validate(sys)?;
        Ok(Some(mu))
    }

    pub fn build_target(&self) -> Result<Target, ConfigError> {
        if self.run.target.is_empty() {
            return Ok(Target::Whole);
        }
        Ok(Target::Cylinders(
            self.run.target.iter().map(|w| parse_word(w)).collect::<Result<_, _>>()?,
        ))
    }
}

fn zero_potential(sys: &System) -> Result<Potential, PotentialError> {
    Ok(match sys {
        System::Shift(s) => Potential::zero(s.alphabet_size()),
        System::Circle(_) => Potential::circle(CircleFunction::constant(0.0)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = r#"
[system]
kind = "shift"
transitions = ["11", "10"]

[potential]
kind = "cocycle"
matrices = [[2.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0]]

[measure]
kind = "markov"
rows = [[0.5, 0.5], [1.0, 0.0]]

[run]
epsilon = [0.2]
min_order = 4
target = ["0", "10"]
mode = "center"
"#;

    #[test]
    fn parses_and_builds() {
        let c = Config::parse(GOLDEN).unwrap();
        let sys = c.build_system().unwrap();
        assert_eq!(sys.alphabet_size(), 2);
        c.build_potential(&sys).unwrap();
        let mu = c.build_measure(&sys, None).unwrap().unwrap();
        assert!(matches!(mu, Measure::Markov { .. }));
        assert_eq!(c.build_target().unwrap(), Target::Cylinders(vec![vec![0], vec![1, 0]]));
        assert_eq!(c.run.mode, ValueMode::Center);
        assert_eq!(c.run.samples, 64);
        assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_and_bad_shapes_rejected() {
        assert!(Config::parse("[system]\nkind = \"shift\"\nalphabet = 2\n").is_err());
        let c = Config::parse("[system]\nkind = \"shift\"\ntransitions = [\"12\"]\n").unwrap();
        assert!(c.build_system().is_err());
        let c = Config::parse("[system]\nkind = \"circle\"\n").unwrap();
        assert!(c.build_system().is_err());
        let c = Config::parse(
            "[system]\nkind = \"shift\"\nalphabet_size = 2\n[potential]\nkind = \"cocycle\"\nmatrices = [[1.0, 2.0, 3.0]]\n",
        )
        .unwrap();
        let sys = c.build_system().unwrap();
        assert!(c.build_potential(&sys).is_err());
    }
}
