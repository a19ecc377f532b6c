mod config;
mod run;

use clap::{Args, Parser, Subcommand};

use config::{CommandKind, ExperimentConfig, KernelSpec, ModelSpec, SimulateKind};

#[derive(Parser)]
#[command(
    name = "ustat",
    about = "Constrained U-statistics: counting, moments, degeneracy, and Monte-Carlo experiments",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct KernelArgs {
    /// Word pattern, e.g. 101.
    #[arg(long)]
    word: Option<String>,
    /// Alphabet symbols for word/text input [default: 01].
    #[arg(long)]
    alphabet: Option<String>,
    /// Permutation pattern in one-line notation, e.g. 2,1.
    #[arg(long, value_delimiter = ',')]
    perm: Option<Vec<usize>>,
    /// Built-in example: e0, e21, e4, inversions, word-101.
    #[arg(long)]
    example: Option<String>,
    /// Path to a table-kernel JSON document.
    #[arg(long)]
    kernel_json: Option<String>,
    /// Gap bounds, e.g. 1,inf,2.
    #[arg(long)]
    gaps: Option<String>,
    /// Read finite gaps as exact instead of upper bounds.
    #[arg(long)]
    exact: bool,
}

impl KernelArgs {
    fn kernel_spec(&self) -> Option<KernelSpec> {
        if let Some(w) = &self.word {
            Some(KernelSpec::Word {
                word: w.clone(),
                alphabet: self.alphabet.clone(),
            })
        } else if let Some(p) = &self.perm {
            Some(KernelSpec::Perm { pattern: p.clone() })
        } else if let Some(name) = &self.example {
            Some(KernelSpec::Example { name: name.clone() })
        } else {
            self.kernel_json
                .as_ref()
                .map(|path| KernelSpec::TableFile { path: path.clone() })
        }
    }
}

#[derive(Args, Clone, Default)]
struct ModelArgs {
    /// Letter probabilities for an independent finite model, e.g. 0.5,0.5.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    /// Independent uniform(0,1) observations.
    #[arg(long)]
    uniform01: bool,
}

impl ModelArgs {
    fn model_spec(&self) -> Option<ModelSpec> {
        if self.uniform01 {
            Some(ModelSpec::Uniform01)
        } else {
            self.probs
                .as_ref()
                .map(|p| ModelSpec::IidFinite { probs: p.clone() })
        }
    }
}

#[derive(Args, Clone, Default)]
struct OutputArgs {
    /// Output path stem; writes <out>.json and <out>.csv.
    #[arg(long)]
    out: Option<String>,
    /// Restrict file output: json or csv.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Enumeration budget override.
    #[arg(long)]
    budget: Option<u128>,
    /// Tolerance override for degeneracy verdicts.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Count constrained occurrences in a concrete string or permutation.
    Count {
        #[command(flatten)]
        kernel: KernelArgs,
        /// Text input over the declared alphabet.
        #[arg(long)]
        text: Option<String>,
        /// Read the text from a file.
        #[arg(long)]
        text_file: Option<String>,
        /// Whitespace-separated values for permutation input.
        #[arg(long)]
        permutation: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact/semi-exact asymptotic means, variance, and projections.
    Moments {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Degeneracy verdict with the summed-covariance diagnostics.
    Degeneracy {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte-Carlo experiments: CLT, degenerate rescaling, or functional.
    Simulate {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Sample sizes, e.g. 256,512,1024.
        #[arg(long, value_delimiter = ',')]
        n_grid: Option<Vec<usize>>,
        /// Experiment kind: clt, degenerate, functional [default: clt].
        #[arg(long)]
        kind: Option<String>,
        /// Sample size for functional runs.
        #[arg(long)]
        n: Option<usize>,
        /// Time grid for functional runs, e.g. 0.25,0.5,1.
        #[arg(long, value_delimiter = ',')]
        t_grid: Option<Vec<f64>>,
        /// Rescale exponent override for degenerate runs.
        #[arg(long)]
        rescale_exponent: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Renewal-stopped statistics over a grid of levels.
    Renewal {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Levels, e.g. 512,2048.
        #[arg(long, value_delimiter = ',')]
        x_grid: Option<Vec<f64>>,
        /// Step function: indicator of this letter index.
        #[arg(long)]
        step_letter: Option<u32>,
        /// Condition on the stopped sum hitting the level exactly.
        #[arg(long)]
        conditioned: bool,
        /// Stopping side: minus or plus [default: minus].
        #[arg(long)]
        side: Option<String>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Spectral diagnostics: level dimensions, eigenvalues, limit MGF.
    Spectral {
        #[command(flatten)]
        kernel: KernelArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Nystrom grid size for the integral-operator eigenvalues.
        #[arg(long)]
        grid: Option<usize>,
        /// Number of leading eigenvalues to report.
        #[arg(long)]
        eigen_count: Option<usize>,
        /// Evaluate the limit MGF at this point.
        #[arg(long)]
        mgf_s: Option<f64>,
        /// Series truncation for the MGF sampler.
        #[arg(long)]
        truncation: Option<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Run a JSON experiment config (the schema emitted by --out).
    Run {
        /// Path to the config; accepts a bare config or an emitted summary.
        #[arg(long)]
        config: String,
    },
}

fn base_config(kind: CommandKind, kernel: &KernelArgs, output: &OutputArgs) -> ExperimentConfig {
    ExperimentConfig {
        command: kind,
        kernel: kernel.kernel_spec(),
        gaps: kernel.gaps.clone(),
        exact: kernel.exact,
        model: None,
        text: None,
        text_file: None,
        permutation: None,
        n_grid: None,
        x_grid: None,
        t_grid: None,
        replicates: output.reps.unwrap_or(10_000),
        seed: output.seed.unwrap_or(1),
        budget: output.budget,
        tol: output.tol,
        simulate_kind: None,
        n: None,
        rescale_exponent: None,
        step: None,
        conditioned: false,
        side: None,
        grid: None,
        eigen_count: None,
        mgf_s: None,
        truncation: None,
        out: output.out.clone(),
        format: output.format.clone(),
    }
}

fn build_config(cli: Command) -> Result<ExperimentConfig, ustat::Error> {
    Ok(match cli {
        Command::Count {
            kernel,
            text,
            text_file,
            permutation,
            output,
        } => {
            let mut cfg = base_config(CommandKind::Count, &kernel, &output);
            cfg.text = text;
            cfg.text_file = text_file;
            cfg.permutation = permutation;
            cfg
        }
        Command::Moments {
            kernel,
            model,
            output,
        } => {
            let mut cfg = base_config(CommandKind::Moments, &kernel, &output);
            cfg.model = model.model_spec();
            cfg
        }
        Command::Degeneracy {
            kernel,
            model,
            output,
        } => {
            let mut cfg = base_config(CommandKind::Degeneracy, &kernel, &output);
            cfg.model = model.model_spec();
            cfg
        }
        Command::Simulate {
            kernel,
            model,
            n_grid,
            kind,
            n,
            t_grid,
            rescale_exponent,
            output,
        } => {
            let mut cfg = base_config(CommandKind::Simulate, &kernel, &output);
            cfg.model = model.model_spec();
            cfg.n_grid = n_grid;
            cfg.n = n;
            cfg.t_grid = t_grid;
            cfg.rescale_exponent = rescale_exponent;
            cfg.simulate_kind = Some(match kind.as_deref() {
                None | Some("clt") => SimulateKind::Clt,
                Some("degenerate") => SimulateKind::Degenerate,
                Some("functional") => SimulateKind::Functional,
                Some(other) => {
                    return Err(ustat::Error::InvalidInput(format!(
                        "unknown simulate kind '{other}'"
                    )))
                }
            });
            cfg
        }
        Command::Renewal {
            kernel,
            model,
            x_grid,
            step_letter,
            conditioned,
            side,
            output,
        } => {
            let mut cfg = base_config(CommandKind::Renewal, &kernel, &output);
            cfg.model = model.model_spec();
            cfg.x_grid = x_grid;
            cfg.conditioned = conditioned;
            cfg.side = side;
            cfg.step = step_letter.map(|letter| KernelSpec::Table {
                alphabet: vec!['0', '1'],
                arity: 1,
                values: (0..2).map(|s| if s == letter { 1.0 } else { 0.0 }).collect(),
            });
            cfg
        }
        Command::Spectral {
            kernel,
            model,
            grid,
            eigen_count,
            mgf_s,
            truncation,
            output,
        } => {
            let mut cfg = base_config(CommandKind::Spectral, &kernel, &output);
            cfg.model = model.model_spec();
            cfg.grid = grid;
            cfg.eigen_count = eigen_count;
            cfg.mgf_s = mgf_s;
            cfg.truncation = truncation;
            cfg
        }
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| {
                ustat::Error::InvalidInput(format!("cannot read {config}: {e}"))
            })?;
            // Accept either a bare config or an emitted summary that embeds
            // one under "config".
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| ustat::Error::InvalidInput(format!("bad config: {e}")))?;
            let cfg_value = value.get("config").cloned().unwrap_or(value);
            ExperimentConfig::from_json(&cfg_value.to_string())?
        }
    })
}

fn main() {
    let cli = Cli::parse();
    let cfg = match build_config(cli.command) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(run::exit_code(&e));
        }
    };
    match run::run(&cfg) {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(run::exit_code(&e));
        }
    }
}
