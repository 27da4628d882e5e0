//! On-disk JSON formats: sweep configurations, state files, channel files.
//!
//! A configuration is the Cartesian grid `targets x protocols x attacks x
//! theorems`. States and per-copy effects are written as row-major complex
//! entries, each entry an `[re, im]` pair.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use qsv_core::algebra::Matrix;
use qsv_core::channels::{BlockState, Channel};
use qsv_core::protocols::{AcceptanceTest, RoundDistribution, TargetSpec};
use qsv_core::verifier::{AttackSelector, ProtocolEntry, SweepConfig, TheoremTag};
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub targets: Vec<TargetCfg>,
    #[serde(default)]
    pub protocols: Vec<ProtocolCfg>,
    #[serde(default)]
    pub attacks: Vec<AttackCfg>,
    #[serde(default)]
    pub theorems: Vec<String>,
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetCfg {
    /// `prod(dims)` amplitudes.
    Pure {
        dims: Vec<usize>,
        amplitudes: Vec<[f64; 2]>,
        #[serde(default)]
        cut: usize,
    },
    /// Diagonal density matrix with the given spectrum.
    Mixed {
        dims: Vec<usize>,
        spectrum: Vec<f64>,
        #[serde(default)]
        cut: usize,
    },
}

impl TargetCfg {
    fn build(&self) -> Result<TargetSpec> {
        let spec = match self {
            TargetCfg::Pure { dims, amplitudes, cut } => {
                let amps: Vec<Complex64> = amplitudes.iter().copied().map(cx).collect();
                TargetSpec::new(dims.clone(), BlockState::pure(&amps)?, *cut)?
            }
            TargetCfg::Mixed { dims, spectrum, cut } => {
                let state = BlockState::single_block(Matrix::diag(spectrum))?;
                TargetSpec::new(dims.clone(), state, *cut)?
            }
        };
        Ok(spec)
    }
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProtocolCfg {
    /// Fixed-round game: `N + 1` copies prepared, `N` tested, one released.
    Simple {
        #[serde(rename = "N")]
        n: usize,
        #[serde(default)]
        test: Option<TestCfg>,
    },
    /// Explicit `[r, i, w]` rows of `p(r, i)`.
    General {
        p_table: Vec<(usize, usize, f64)>,
        /// Round cap; defaults to the largest `r` in the table.
        #[serde(default)]
        cap: Option<usize>,
        /// Per-client released states for terminal rows (`i = r`), required
        /// when the table carries terminal mass.
        #[serde(default)]
        fallback: Vec<StateFile>,
        #[serde(default)]
        test: Option<TestCfg>,
    },
}

impl ProtocolCfg {
    fn build(&self) -> Result<ProtocolEntry> {
        match self {
            ProtocolCfg::Simple { n, test } => Ok(ProtocolEntry {
                dist: RoundDistribution::point_mass(n + 1, *n)?,
                tests: build_tests(test)?,
            }),
            ProtocolCfg::General { p_table, cap, fallback, test } => {
                let cap = cap
                    .or_else(|| p_table.iter().map(|&(r, _, _)| r).max())
                    .context("empty p_table")?;
                let mut dist = RoundDistribution::from_table(p_table.clone(), cap)?;
                if !fallback.is_empty() {
                    let states =
                        fallback.iter().map(StateFile::to_state).collect::<Result<Vec<_>>>()?;
                    dist = dist.with_fallback(states)?;
                }
                Ok(ProtocolEntry { dist, tests: build_tests(test)? })
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestCfg {
    /// Projector onto the target state (the default when omitted).
    Exact,
    AllPass { effect: MatrixFile },
    Threshold { effect: MatrixFile, min_passes: usize },
}

/// An empty list makes the sweep fall back to the target's exact test.
fn build_tests(test: &Option<TestCfg>) -> Result<Vec<AcceptanceTest>> {
    Ok(match test {
        None | Some(TestCfg::Exact) => Vec::new(),
        Some(TestCfg::AllPass { effect }) => {
            vec![AcceptanceTest::all_pass(effect.to_matrix()?)?]
        }
        Some(TestCfg::Threshold { effect, min_passes }) => {
            vec![AcceptanceTest::threshold(effect.to_matrix()?, *min_passes)?]
        }
    })
}

#[derive(Deserialize)]
#[serde(untagged)]
pub enum AttackCfg {
    Named(String),
    Custom { custom: StateFile },
}

impl AttackCfg {
    fn build(&self) -> Result<AttackSelector> {
        Ok(match self {
            AttackCfg::Named(name) => match name.as_str() {
                "pure-tau" => AttackSelector::PureTau,
                "mixed-alpha" => AttackSelector::MixedAlpha,
                "depolarized" => AttackSelector::Depolarized,
                "measurement" => AttackSelector::Measurement,
                other => bail!(
                    "unknown attack {other:?}; expected pure-tau, mixed-alpha, depolarized, \
                     measurement, or {{\"custom\": <state>}}"
                ),
            },
            AttackCfg::Custom { custom } => AttackSelector::Custom(custom.to_state()?),
        })
    }
}

/// State payload. `prod(dims)` entries are read as pure-state amplitudes,
/// `prod(dims)^2` as a row-major density matrix.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dims: Vec<usize>,
    pub entries: Vec<[f64; 2]>,
}

impl StateFile {
    pub fn to_state(&self) -> Result<BlockState> {
        let d: usize = self.dims.iter().product();
        let entries: Vec<Complex64> = self.entries.iter().copied().map(cx).collect();
        let state = if entries.len() == d {
            BlockState::pure(&entries)?
        } else if entries.len() == d * d {
            BlockState::single_block(Matrix::new(d, d, entries)?)?
        } else {
            bail!(
                "state on dims {:?} needs {d} amplitudes or {} density entries, got {}",
                self.dims,
                d * d,
                entries.len()
            );
        };
        Ok(state)
    }
}

/// Square matrix payload for per-copy effects.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub dim: usize,
    pub entries: Vec<[f64; 2]>,
}

impl MatrixFile {
    pub fn to_matrix(&self) -> Result<Matrix> {
        let entries: Vec<Complex64> = self.entries.iter().copied().map(cx).collect();
        Ok(Matrix::new(self.dim, self.dim, entries)?)
    }
}

/// Channel payload: a list of Kraus operators, each `rows x cols` row-major.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelFile {
    pub kraus: Vec<KrausCfg>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrausCfg {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<[f64; 2]>,
}

impl ChannelFile {
    pub fn to_channel(&self) -> Result<Channel> {
        let kraus: Vec<Matrix> = self
            .kraus
            .iter()
            .map(|k| {
                let entries: Vec<Complex64> = k.entries.iter().copied().map(cx).collect();
                Ok(Matrix::new(k.rows, k.cols, entries)?)
            })
            .collect::<Result<_>>()?;
        Ok(Channel::from_kraus(&kraus)?)
    }
}

impl ConfigFile {
    pub fn to_sweep(&self) -> Result<SweepConfig> {
        Ok(SweepConfig {
            targets: self.targets.iter().map(TargetCfg::build).collect::<Result<_>>()?,
            protocols: self.protocols.iter().map(ProtocolCfg::build).collect::<Result<_>>()?,
            attacks: self.attacks.iter().map(AttackCfg::build).collect::<Result<_>>()?,
            theorems: self
                .theorems
                .iter()
                .map(|s| {
                    TheoremTag::parse(s).map_err(|_| {
                        anyhow!(
                            "unknown theorem {s:?}; expected simple-single, simple-multi, \
                             general-single, general-multi, appendix-measurement, or \
                             appendix-unital"
                        )
                    })
                })
                .collect::<Result<_>>()?,
        })
    }
}

pub fn load_config(path: &Path) -> Result<ConfigFile> {
    parse_json(path)
}

pub fn load_state(path: &Path) -> Result<BlockState> {
    parse_json::<StateFile>(path)?
        .to_state()
        .with_context(|| format!("in state file {}", path.display()))
}

pub fn load_channel(path: &Path) -> Result<Channel> {
    parse_json::<ChannelFile>(path)?
        .to_channel()
        .with_context(|| format!("in channel file {}", path.display()))
}

fn parse_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cx([re, im]: [f64; 2]) -> Complex64 {
    Complex64::new(re, im)
}
