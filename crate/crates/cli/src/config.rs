//! Scenario configuration: TOML schema, `key=value` overrides, complex
//! matrix parsing, and expansion into the core domain types.
//!
//! Complex numbers are written as strings like `"1.5"`, `"-2i"`, or
//! `"0.3-0.7i"`; matrices are row-major nested lists of those strings.
//! Named fading generators expand to explicit matrices:
//!
//! - `iid-rayleigh`: zero mean, identity covariance.
//! - `rician` with `k_factor`: all-ones line-of-sight scaled so that
//!   `||vec mean||^2 / tr(cov) = k_factor`, total path power `m*n`.
//! - `kronecker` with `rtx`/`rrx`: `cov = rtx^T kron rrx` (column-major
//!   vectorization), zero mean.
//! - `explicit` with `mean`/`cov` matrices.

use mimo_capacity::prelude::*;
use std::result::Result;
use serde::Deserialize;

use crate::error::{CliError, ErrKind};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    /// Scenario identifier carried into every report row.
    pub scenario: Option<String>,
    pub seed: u64,
    pub dims: DimsSection,
    pub noise: NoiseSection,
    pub constraint: ConstraintSection,
    pub fading: FadingSection,
    pub csi: CsiSection,
    pub task: TaskSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsSection {
    pub tx: usize,
    pub rx: usize,
    #[serde(default = "one")]
    pub block_len: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub sigma2: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    #[serde(default = "two")]
    pub eta: f64,
    pub gamma: f64,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingSection {
    pub kind: String,
    pub k_factor: Option<f64>,
    pub rtx: Option<Vec<Vec<String>>>,
    pub rrx: Option<Vec<Vec<String>>>,
    pub mean: Option<Vec<Vec<String>>>,
    pub cov: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsiSection {
    pub kind: String,
    /// Partial CSI shorthand: observation `v = vec H + CN(0, est_var I)`.
    pub est_var: Option<f64>,
    pub sigma_hv: Option<Vec<Vec<String>>>,
    pub mu_v: Option<Vec<String>>,
    pub sigma_vv: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: String,
    pub n_samples: Option<usize>,
    pub iters: Option<usize>,
    pub mc_samples: Option<usize>,
    pub step: Option<f64>,
    pub tol: Option<f64>,
    /// Explicit input covariance (row-major, n x n) for ergodic / kt-check.
    pub s: Option<Vec<Vec<String>>>,
    pub grid: Option<String>,
    pub grid_levels: Option<usize>,
    pub grid_phases: Option<usize>,
    pub grid_max_amp: Option<f64>,
    pub grid_scales: Option<usize>,
    pub grid_frames: Option<usize>,
}

/// Parse a complex scalar written as `a`, `bi`, or `a+bi` / `a-bi`
/// (exponents allowed, e.g. `1e-3+2.5e2i`).
pub fn parse_complex(s: &str) -> Result<C64, CliError> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(CliError::new(ErrKind::Parse, "empty complex literal"));
    }
    let bad = |_| CliError::new(ErrKind::Parse, format!("bad complex literal {s:?}"));
    // Find the split between real and imaginary parts: the last '+'/'-'
    // that is not leading and not part of an exponent.
    let bytes = t.as_bytes();
    let mut split = None;
    for i in (1..bytes.len()).rev() {
        let c = bytes[i] as char;
        if (c == '+' || c == '-') && !matches!(bytes[i - 1] as char, 'e' | 'E') {
            split = Some(i);
            break;
        }
    }
    match split {
        Some(i) if t.ends_with('i') => {
            let re: f64 = t[..i].parse().map_err(bad)?;
            let imag_str = &t[i..t.len() - 1];
            let im: f64 = match imag_str {
                "+" => 1.0,
                "-" => -1.0,
                _ => imag_str.parse().map_err(bad)?,
            };
            Ok(C64::new(re, im))
        }
        _ if t.ends_with('i') => {
            let imag_str = &t[..t.len() - 1];
            let im: f64 = match imag_str {
                "" | "+" => 1.0,
                "-" => -1.0,
                _ => imag_str.parse().map_err(bad)?,
            };
            Ok(C64::new(0.0, im))
        }
        _ => Ok(C64::new(t.parse().map_err(bad)?, 0.0)),
    }
}

pub fn parse_matrix(rows: &[Vec<String>], what: &str) -> Result<CMat, CliError> {
    if rows.is_empty() || rows[0].is_empty() {
        return Err(CliError::new(ErrKind::Validation, format!("{what}: empty matrix")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::new(ErrKind::Validation, format!("{what}: ragged rows")));
    }
    let mut data = Vec::with_capacity(rows.len() * ncols);
    for row in rows {
        for cell in row {
            data.push(parse_complex(cell)?);
        }
    }
    Ok(CMat::from_row_slice(rows.len(), ncols, &data))
}

fn parse_vector(cells: &[String], what: &str) -> Result<CVec, CliError> {
    let mut data = Vec::with_capacity(cells.len());
    for cell in cells {
        data.push(parse_complex(cell)?);
    }
    if data.is_empty() {
        return Err(CliError::new(ErrKind::Validation, format!("{what}: empty vector")));
    }
    Ok(CVec::from_column_slice(&data))
}

/// Receiver knowledge regime of a scenario.
#[derive(Debug, Clone)]
pub enum CsiMode {
    /// Channel fixed at the fading mean and known everywhere.
    Awgn,
    /// Realization known at the receiver.
    Full,
    /// No knowledge; the fading is marginalized out.
    None,
    /// Jointly Gaussian observation of the realization.
    Partial(PartialCsiModel),
}

/// Task selection with its options resolved against defaults.
#[derive(Debug, Clone)]
pub enum Task {
    Waterfill,
    Ergodic { n_samples: usize, s: Option<InputCovariance> },
    OptimizeCov { step: f64, iters: usize, mc_samples: usize, tol: f64 },
    Mi { n_samples: usize, grid: InputGrid },
    Ba { iters: usize, n_samples: usize, tol_bits: f64, grid: InputGrid },
    KtCheck { n_samples: usize, s: Option<InputCovariance> },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Waterfill => "waterfill",
            Task::Ergodic { .. } => "ergodic",
            Task::OptimizeCov { .. } => "optimize-cov",
            Task::Mi { .. } => "mi",
            Task::Ba { .. } => "ba",
            Task::KtCheck { .. } => "kt-check",
        }
    }
}

/// A fully validated scenario, ready to execute.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub seed: u64,
    pub dims: ChannelDims,
    pub law: FadingLaw,
    pub noise: NoiseModel,
    pub constraint: PowerConstraint,
    pub csi: CsiMode,
    pub task: Task,
}

fn validation(e: impl std::fmt::Display) -> CliError {
    CliError::new(ErrKind::Validation, e.to_string())
}

impl RawConfig {
    pub fn parse_toml(text: &str) -> Result<toml::Value, CliError> {
        text.parse::<toml::Value>()
            .map_err(|e| CliError::new(ErrKind::Parse, format!("config is not valid TOML: {e}")))
    }

    pub fn from_value(value: toml::Value) -> Result<Self, CliError> {
        value
            .try_into()
            .map_err(|e| CliError::new(ErrKind::Parse, format!("config schema error: {e}")))
    }

    /// Apply `--set path.to.key=value` overrides onto the parsed TOML tree.
    pub fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), CliError> {
        let (path, raw) = spec.split_once('=').ok_or_else(|| {
            CliError::new(ErrKind::Parse, format!("override {spec:?} is not key=value"))
        })?;
        // Interpret the value as a TOML literal (number, bool, array, ...);
        // anything that does not parse is taken as a bare string.
        let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Value>() {
            Ok(doc) => doc["v"].clone(),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        let mut node = root;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = node.as_table_mut().ok_or_else(|| {
                CliError::new(ErrKind::Parse, format!("override path {path:?} crosses a non-table"))
            })?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), parsed);
                return Ok(());
            }
            node = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        unreachable!("override paths have at least one segment")
    }

    /// Validate and expand into core types.
    pub fn expand(&self, fallback_id: &str) -> Result<Scenario, CliError> {
        let dims =
            ChannelDims::new(self.dims.tx, self.dims.rx, self.dims.block_len).map_err(validation)?;
        let noise = NoiseModel::new(self.noise.sigma2).map_err(validation)?;
        let constraint =
            PowerConstraint::new(self.constraint.eta, self.constraint.gamma).map_err(validation)?;

        let law = match self.fading.kind.as_str() {
            "iid-rayleigh" => FadingLaw::iid_rayleigh(&dims),
            "rician" => {
                let k = self.fading.k_factor.ok_or_else(|| {
                    CliError::new(ErrKind::Validation, "rician fading needs k_factor")
                })?;
                FadingLaw::rician(&dims, k).map_err(validation)?
            }
            "kronecker" => {
                let rtx = parse_matrix(
                    self.fading.rtx.as_deref().ok_or_else(|| {
                        CliError::new(ErrKind::Validation, "kronecker fading needs rtx")
                    })?,
                    "fading.rtx",
                )?;
                let rrx = parse_matrix(
                    self.fading.rrx.as_deref().ok_or_else(|| {
                        CliError::new(ErrKind::Validation, "kronecker fading needs rrx")
                    })?,
                    "fading.rrx",
                )?;
                if rtx.nrows() != dims.n || rrx.nrows() != dims.m {
                    return Err(CliError::new(
                        ErrKind::Validation,
                        "kronecker correlation sizes must match dims.tx / dims.rx",
                    ));
                }
                FadingLaw::kronecker(&rtx, &rrx).map_err(validation)?
            }
            "explicit" => {
                let mean = parse_matrix(
                    self.fading.mean.as_deref().ok_or_else(|| {
                        CliError::new(ErrKind::Validation, "explicit fading needs mean")
                    })?,
                    "fading.mean",
                )?;
                let cov = parse_matrix(
                    self.fading.cov.as_deref().ok_or_else(|| {
                        CliError::new(ErrKind::Validation, "explicit fading needs cov")
                    })?,
                    "fading.cov",
                )?;
                if mean.shape() != (dims.m, dims.n) {
                    return Err(CliError::new(
                        ErrKind::Validation,
                        format!(
                            "fading.mean must be {}x{}, got {}x{}",
                            dims.m,
                            dims.n,
                            mean.nrows(),
                            mean.ncols()
                        ),
                    ));
                }
                FadingLaw::new(mean, cov).map_err(validation)?
            }
            other => {
                return Err(CliError::new(
                    ErrKind::Validation,
                    format!("unknown fading kind {other:?}"),
                ))
            }
        };

        let csi = match self.csi.kind.as_str() {
            "awgn" => CsiMode::Awgn,
            "full" => CsiMode::Full,
            "none" => CsiMode::None,
            "partial" => {
                let model = if let Some(est_var) = self.csi.est_var {
                    PartialCsiModel::noisy_observation(&law, est_var).map_err(validation)?
                } else {
                    let sigma_hv = parse_matrix(
                        self.csi.sigma_hv.as_deref().ok_or_else(|| {
                            CliError::new(
                                ErrKind::Validation,
                                "partial CSI needs est_var or explicit sigma_hv/mu_v/sigma_vv",
                            )
                        })?,
                        "csi.sigma_hv",
                    )?;
                    let mu_v = parse_vector(
                        self.csi.mu_v.as_deref().ok_or_else(|| {
                            CliError::new(ErrKind::Validation, "partial CSI needs mu_v")
                        })?,
                        "csi.mu_v",
                    )?;
                    let sigma_vv = parse_matrix(
                        self.csi.sigma_vv.as_deref().ok_or_else(|| {
                            CliError::new(ErrKind::Validation, "partial CSI needs sigma_vv")
                        })?,
                        "csi.sigma_vv",
                    )?;
                    PartialCsiModel::new(&law, sigma_hv, mu_v, sigma_vv).map_err(validation)?
                };
                CsiMode::Partial(model)
            }
            other => {
                return Err(CliError::new(ErrKind::Validation, format!("unknown csi kind {other:?}")))
            }
        };

        let parse_s = |cells: &Option<Vec<Vec<String>>>| -> Result<Option<InputCovariance>, CliError> {
            match cells {
                None => Ok(None),
                Some(rows) => {
                    let m = parse_matrix(rows, "task.s")?;
                    Ok(Some(InputCovariance::new(m).map_err(validation)?))
                }
            }
        };

        let grid = |t: &TaskSection| -> Result<InputGrid, CliError> {
            let kind = t.grid.as_deref().unwrap_or("amplitude");
            let max_amp = t.grid_max_amp.unwrap_or(3.0 * constraint.gamma.sqrt());
            match kind {
                "amplitude" => InputGrid::amplitude_levels(t.grid_levels.unwrap_or(13), max_amp)
                    .map_err(validation),
                "ring" => InputGrid::amplitude_phase(
                    t.grid_levels.unwrap_or(5),
                    t.grid_phases.unwrap_or(8),
                    max_amp,
                )
                .map_err(validation),
                "frames" => InputGrid::random_frames(
                    dims.n,
                    dims.block_len,
                    t.grid_scales.unwrap_or(3),
                    t.grid_frames.unwrap_or(4),
                    max_amp,
                    self.seed ^ 0x5eed,
                )
                .map_err(validation),
                other => Err(CliError::new(
                    ErrKind::Validation,
                    format!("unknown grid kind {other:?}"),
                )),
            }
        };

        let t = &self.task;
        let task = match t.kind.as_str() {
            "waterfill" => Task::Waterfill,
            "ergodic" => {
                Task::Ergodic { n_samples: t.n_samples.unwrap_or(100_000), s: parse_s(&t.s)? }
            }
            "optimize-cov" => Task::OptimizeCov {
                step: t.step.unwrap_or(0.5),
                iters: t.iters.unwrap_or(200),
                mc_samples: t.mc_samples.unwrap_or(20_000),
                tol: t.tol.unwrap_or(1e-3),
            },
            "mi" => Task::Mi { n_samples: t.n_samples.unwrap_or(50_000), grid: grid(t)? },
            "ba" => Task::Ba {
                iters: t.iters.unwrap_or(5000),
                n_samples: t.n_samples.unwrap_or(1500),
                tol_bits: t.tol.unwrap_or(1e-3),
                grid: grid(t)?,
            },
            "kt-check" => {
                Task::KtCheck { n_samples: t.n_samples.unwrap_or(100_000), s: parse_s(&t.s)? }
            }
            other => {
                return Err(CliError::new(
                    ErrKind::Validation,
                    format!("unknown task kind {other:?}"),
                ))
            }
        };

        // Grid-based tasks run against scalar channels only when dims agree.
        if let Task::Mi { grid: g, .. } | Task::Ba { grid: g, .. } = &task {
            let (gn, gl) = g.candidates[0].shape();
            if gn != dims.n || gl != dims.block_len {
                return Err(CliError::new(
                    ErrKind::Validation,
                    format!(
                        "grid atoms are {gn}x{gl} but dims require {}x{}; pick grid=\"frames\" \
                         for multi-antenna scenarios",
                        dims.n, dims.block_len
                    ),
                ));
            }
        }

        Ok(Scenario {
            id: self.scenario.clone().unwrap_or_else(|| fallback_id.to_string()),
            seed: self.seed,
            dims,
            law,
            noise,
            constraint,
            csi,
            task,
        })
    }
}
