//! Experiment configuration: serde-validated specs for kernels, models, and
//! runs. Unknown fields are rejected, and every run embeds its resolved
//! configuration in the JSON output.

use serde::{Deserialize, Serialize};

use ustat::constraint::Mode;
use ustat::error::{Error, Result};
use ustat::kernel::{Alphabet, Kernel};
use ustat::model::{FiniteDist, SequenceModel};
use ustat::named;
use ustat::{Constraint, ObsSeq};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Word indicator over an alphabet given as a string of symbols
    /// (defaults to binary "01").
    Word {
        word: String,
        #[serde(default)]
        alphabet: Option<String>,
    },
    /// Permutation pattern in one-line notation.
    Perm { pattern: Vec<usize> },
    /// Dense table over `alphabet^arity`.
    Table {
        alphabet: Vec<char>,
        arity: usize,
        values: Vec<f64>,
    },
    /// Sign of the induced permutation.
    Sign { arity: usize },
    /// Table kernel loaded from a JSON document
    /// `{"alphabet": [...], "arity": l, "values": [...]}`.
    TableFile { path: String },
    /// One of the built-in worked cases.
    Example { name: String },
    /// Weighted sum of kernels.
    Linear { parts: Vec<(f64, KernelSpec)> },
}

fn parse_alphabet(s: &Option<String>) -> Result<Alphabet> {
    match s {
        None => Ok(Alphabet::binary()),
        Some(s) => Alphabet::new(s.chars().collect()),
    }
}

impl KernelSpec {
    pub fn build(&self) -> Result<(Kernel, Option<Alphabet>)> {
        match self {
            KernelSpec::Word { word, alphabet } => {
                let a = parse_alphabet(alphabet)?;
                Ok((Kernel::word_from_text(word, &a)?, Some(a)))
            }
            KernelSpec::Perm { pattern } => Ok((Kernel::perm_pattern(pattern.clone())?, None)),
            KernelSpec::Table {
                alphabet,
                arity,
                values,
            } => {
                let a = Alphabet::new(alphabet.clone())?;
                Ok((Kernel::table(a.size(), *arity, values.clone())?, Some(a)))
            }
            KernelSpec::Sign { arity } => Ok((Kernel::Sign { arity: *arity }, None)),
            KernelSpec::TableFile { path } => {
                let doc = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidInput(format!("cannot read {path}: {e}"))
                })?;
                let (k, a) = Kernel::table_from_json(&doc)?;
                Ok((k, Some(a)))
            }
            KernelSpec::Example { name } => {
                let case = named::named_case(name)?;
                Ok((case.kernel, None))
            }
            KernelSpec::Linear { parts } => {
                let mut built = Vec::with_capacity(parts.len());
                let mut alphabet = None;
                for (c, spec) in parts {
                    let (k, a) = spec.build()?;
                    alphabet = alphabet.or(a);
                    built.push((*c, k));
                }
                let k = Kernel::Linear(built);
                k.validate()?;
                Ok((k, alphabet))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    UniformBinary,
    IidFinite { probs: Vec<f64> },
    Uniform01,
    BlockFactor {
        base_probs: Vec<f64>,
        window: usize,
        map: Vec<u32>,
        out_size: usize,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<SequenceModel> {
        match self {
            ModelSpec::UniformBinary => Ok(SequenceModel::iid_uniform_binary()),
            ModelSpec::IidFinite { probs } => Ok(SequenceModel::IidFinite {
                dist: FiniteDist::new(probs.clone())?,
            }),
            ModelSpec::Uniform01 => Ok(SequenceModel::IidUniform01),
            ModelSpec::BlockFactor {
                base_probs,
                window,
                map,
                out_size,
            } => SequenceModel::block_factor(
                FiniteDist::new(base_probs.clone())?,
                *window,
                map.clone(),
                *out_size,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Count,
    Moments,
    Degeneracy,
    Simulate,
    Renewal,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulateKind {
    Clt,
    Degenerate,
    Functional,
}

fn default_replicates() -> usize {
    10_000
}

fn default_seed() -> u64 {
    1
}

/// One experiment, fully resolved. Doubles as the `--config` file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    /// Gap bounds like "1,inf,2"; omitted means unconstrained.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<String>,
    /// Read finite gaps as exact rather than upper bounds.
    #[serde(default)]
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text_file: Option<String>,
    /// Whitespace-separated integers for permutation input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_grid: Option<Vec<f64>>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u128>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate_kind: Option<SimulateKind>,
    /// Sample-size for functional runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Rescale exponent override for degenerate runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rescale_exponent: Option<f64>,
    /// Step-function kernel for renewal runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<KernelSpec>,
    #[serde(default)]
    pub conditioned: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<String>,
    /// Nystrom grid size for spectral runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigen_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mgf_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("bad config: {e}")))
    }

    pub fn mode(&self) -> Mode {
        if self.exact {
            Mode::Exact
        } else {
            Mode::Bounded
        }
    }

    /// Kernel, constraint, and (when the kernel is a named example) the
    /// default mode/model attached to it.
    pub fn resolve_statistic(&self) -> Result<(Kernel, Constraint, Mode, Option<SequenceModel>)> {
        if let Some(KernelSpec::Example { name }) = &self.kernel {
            let case = named::named_case(name)?;
            let constraint = match &self.gaps {
                Some(g) => Constraint::parse(g)?,
                None => case.constraint,
            };
            return Ok((case.kernel, constraint, case.mode, Some(case.model)));
        }
        let (kernel, _) = self
            .kernel
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("a kernel is required".into()))?
            .build()?;
        let constraint = match &self.gaps {
            Some(g) => Constraint::parse(g)?,
            None => Constraint::unconstrained(kernel.arity()),
        };
        Ok((kernel, constraint, self.mode(), None))
    }

    pub fn resolve_model(&self, fallback: Option<SequenceModel>) -> Result<SequenceModel> {
        if let Some(spec) = &self.model {
            return spec.build();
        }
        fallback.ok_or_else(|| Error::InvalidInput("a model is required".into()))
    }

    /// The observation sequence for counting commands.
    pub fn resolve_input(&self, kernel: &Kernel) -> Result<ObsSeq> {
        if let Some(p) = &self.permutation {
            let values: Vec<f64> = p
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad entry '{tok}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            let xs = ObsSeq::from_reals(values);
            xs.check_distinct()?;
            return Ok(xs);
        }
        let text = if let Some(t) = &self.text {
            t.clone()
        } else if let Some(path) = &self.text_file {
            std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidInput(format!("cannot read {path}: {e}")))?
                .trim()
                .to_string()
        } else {
            return Err(Error::InvalidInput(
                "provide --text, --text-file, or --permutation".into(),
            ));
        };
        let alphabet = match &self.kernel {
            Some(KernelSpec::Word { alphabet, .. }) => parse_alphabet(alphabet)?,
            Some(KernelSpec::Table { alphabet, .. }) => Alphabet::new(alphabet.clone())?,
            Some(KernelSpec::TableFile { path }) => {
                let doc = std::fs::read_to_string(path).map_err(|e| {
                    Error::InvalidInput(format!("cannot read {path}: {e}"))
                })?;
                Kernel::table_from_json(&doc)?.1
            }
            _ => Alphabet::binary(),
        };
        let _ = kernel;
        ObsSeq::from_text(&text, &alphabet)
    }
}
