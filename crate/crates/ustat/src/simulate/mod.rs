//! Monte-Carlo verification harness for the limit theorems: fixed-n central
//! limit behavior with Kolmogorov distances, degenerate rescalings,
//! functional (partial-path) statistics, and renewal stopping.
//!
//! Replicates draw from counter-style RNG streams keyed by
//! `(seed, stream, replicate)`, so results are reproducible and independent
//! of evaluation order; aggregation uses pairwise summation.

mod renewal;

pub use renewal::{
    mc_renewal, renewal_degeneracy_projections, renewal_stop, RenewalConfig, RenewalStats,
    RenewalStop, RenewalSummary, Side,
};

use serde::Serialize;

use crate::constraint::{Constraint, Mode};
use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::kernel::Kernel;
use crate::linalg;
use crate::model::SequenceModel;
use crate::moments::{self, MomentOptions, Target, Verdict};
use crate::patterns;

pub(crate) const STREAM_CLT: u64 = 0x100;
pub(crate) const STREAM_DEGEN: u64 = 0x200;
pub(crate) const STREAM_PATH: u64 = 0x300;
pub(crate) const STREAM_RENEWAL: u64 = 0x400;

/// Options shared by the simulation drivers.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub replicates: usize,
    pub seed: u64,
    /// Keep raw per-replicate samples in the summary.
    pub keep_samples: bool,
    pub moments: MomentOptions,
    pub eval: EvalOptions,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            replicates: 10_000,
            seed: 1,
            keep_samples: false,
            moments: MomentOptions::default(),
            eval: EvalOptions::default(),
        }
    }
}

/// Summary statistics of one batch of replicate values.
#[derive(Debug, Clone, Serialize)]
pub struct BatchStats {
    pub replicates: usize,
    pub mean: f64,
    pub mean_se: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub variance_se: f64,
    pub moment4: f64,
    pub moment4_se: f64,
}

pub fn batch_stats(samples: &[f64]) -> BatchStats {
    let n = samples.len();
    let nf = n as f64;
    let mean = linalg::mean(samples);
    let m2 = linalg::central_moment(samples, 2);
    let m4 = linalg::central_moment(samples, 4);
    let m8 = linalg::central_moment(samples, 8);
    let variance = if n > 1 { m2 * nf / (nf - 1.0) } else { 0.0 };
    BatchStats {
        replicates: n,
        mean,
        mean_se: (m2 / nf).sqrt(),
        variance,
        variance_se: ((m4 - m2 * m2).max(0.0) / nf).sqrt(),
        moment4: m4,
        moment4_se: ((m8 - m4 * m4).max(0.0) / nf).sqrt(),
    }
}

/// Per-sample-size results of a fixed-n experiment.
#[derive(Debug, Clone, Serialize)]
pub struct RunStats {
    pub n: usize,
    /// Centering used for standardization.
    pub center: f64,
    /// Whether the center is the exact expectation (otherwise the replicate
    /// mean, which biases the Kolmogorov distance slightly).
    pub center_exact: bool,
    pub stats: BatchStats,
    /// Kolmogorov distance of the standardized samples to N(0, sigma2).
    pub kolmogorov: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

/// Results of a Monte-Carlo experiment over an n-grid.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub replicates: usize,
    pub block_count: usize,
    pub sigma2: f64,
    pub per_n: Vec<RunStats>,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Kolmogorov distance between the empirical law of `samples` and a CDF.
pub fn kolmogorov_distance_cdf<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(((i + 1) as f64 / n - f).abs());
        d = d.max((f - i as f64 / n).abs());
    }
    d
}

/// Kolmogorov distance to the centered normal with variance `sigma2`.
pub fn kolmogorov_distance(samples: &[f64], sigma2: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    if sigma2 <= 0.0 {
        return Err(Error::DegenerateTarget(sigma2));
    }
    let sd = sigma2.sqrt();
    Ok(kolmogorov_distance_cdf(samples, |x| normal_cdf(x / sd)))
}

fn standardized_samples(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    n: usize,
    stream: u64,
    opt: &SimOptions,
) -> Result<(Vec<f64>, f64, bool)> {
    let b = constraint.block_count();
    let scale = (n as f64).powf(b as f64 - 0.5);
    let expected = moments::expected_un(
        f,
        Target::Constrained(constraint, mode),
        n,
        model,
        &opt.moments,
    )?;
    let mut raw = Vec::with_capacity(opt.replicates);
    for rep in 0..opt.replicates {
        let xs = model.generate(n, opt.seed, stream, rep as u64);
        let v = patterns::u_stat_prefixes(f, constraint, mode, &xs, &[n], &opt.eval)?[0];
        raw.push(v);
    }
    let (center, center_exact) = if expected.exact {
        (expected.value, true)
    } else {
        (linalg::mean(&raw), false)
    };
    let samples: Vec<f64> = raw.iter().map(|&v| (v - center) / scale).collect();
    Ok((samples, center, center_exact))
}

/// Fixed-n experiment: standardized statistics `(U_n - E U_n)/n^{b-1/2}`
/// over an n-grid, with variance scaling and Kolmogorov distances against
/// the asymptotic normal.
pub fn mc_clt(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    n_grid: &[usize],
    opt: &SimOptions,
) -> Result<SimulationSummary> {
    let report = moments::sigma2(f, Target::Constrained(constraint, mode), model, &opt.moments)?;
    if report.sigma2 <= 0.0 {
        return Err(Error::DegenerateTarget(report.sigma2));
    }
    let mut per_n = Vec::with_capacity(n_grid.len());
    for (idx, &n) in n_grid.iter().enumerate() {
        let (samples, center, center_exact) = standardized_samples(
            f,
            constraint,
            mode,
            model,
            n,
            STREAM_CLT + idx as u64,
            opt,
        )?;
        let stats = batch_stats(&samples);
        let kolmogorov = Some(kolmogorov_distance(&samples, report.sigma2)?);
        per_n.push(RunStats {
            n,
            center,
            center_exact,
            stats,
            kolmogorov,
            samples: opt.keep_samples.then(|| samples.clone()),
        });
    }
    Ok(SimulationSummary {
        seed: opt.seed,
        replicates: opt.replicates,
        block_count: constraint.block_count(),
        sigma2: report.sigma2,
        per_n,
    })
}

/// Degenerate-case experiment: rescaled raw statistics `U_n / n^e`, default
/// exponent `e = b - 1`; requires a degenerate kernel/constraint pair.
pub fn mc_degenerate(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    n_grid: &[usize],
    rescale_exponent: Option<f64>,
    opt: &SimOptions,
) -> Result<SimulationSummary> {
    let report = moments::sigma2(f, Target::Constrained(constraint, mode), model, &opt.moments)?;
    if moments::degeneracy_test(&report, opt.moments.degeneracy_tolerance)
        == Verdict::NonDegenerate
    {
        return Err(Error::InvalidInput(
            "statistic is not degenerate; use the CLT harness".into(),
        ));
    }
    let b = constraint.block_count();
    let exponent = rescale_exponent.unwrap_or(b as f64 - 1.0);
    let mut per_n = Vec::with_capacity(n_grid.len());
    for (idx, &n) in n_grid.iter().enumerate() {
        let scale = (n as f64).powf(exponent);
        let mut samples = Vec::with_capacity(opt.replicates);
        for rep in 0..opt.replicates {
            let xs = model.generate(n, opt.seed, STREAM_DEGEN + idx as u64, rep as u64);
            let v = patterns::u_stat_prefixes(f, constraint, mode, &xs, &[n], &opt.eval)?[0];
            samples.push(v / scale);
        }
        let stats = batch_stats(&samples);
        per_n.push(RunStats {
            n,
            center: 0.0,
            center_exact: true,
            stats,
            kolmogorov: None,
            samples: opt.keep_samples.then(|| samples.clone()),
        });
    }
    Ok(SimulationSummary {
        seed: opt.seed,
        replicates: opt.replicates,
        block_count: b,
        sigma2: report.sigma2,
        per_n,
    })
}

/// Per-time-point results of the partial-path experiment.
#[derive(Debug, Clone, Serialize)]
pub struct PathStats {
    pub t: f64,
    pub prefix_len: usize,
    pub stats: BatchStats,
    /// Asymptotic variance of the limit process at `t`: `t^{2b-1} sigma2`.
    pub target_variance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalSummary {
    pub seed: u64,
    pub replicates: usize,
    pub n: usize,
    pub block_count: usize,
    pub sigma2: f64,
    pub per_t: Vec<PathStats>,
}

/// Partial-path statistic `t -> (U_{floor(nt)} - E U_{floor(nt)})/n^{b-1/2}`
/// sampled at a grid of times, with per-t empirical variances against the
/// limiting `t^{2b-1} sigma2`.
pub fn functional_paths(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    n: usize,
    t_grid: &[f64],
    opt: &SimOptions,
) -> Result<FunctionalSummary> {
    if t_grid.iter().any(|&t| !(0.0..=1.0).contains(&t)) {
        return Err(Error::InvalidInput("time grid must lie in [0, 1]".into()));
    }
    let mut ts = t_grid.to_vec();
    ts.sort_by(|a, b| a.total_cmp(b));
    let report = moments::sigma2(f, Target::Constrained(constraint, mode), model, &opt.moments)?;
    let b = constraint.block_count();
    let scale = (n as f64).powf(b as f64 - 0.5);
    let checkpoints: Vec<usize> = ts.iter().map(|&t| (n as f64 * t).floor() as usize).collect();
    let centers: Vec<(f64, bool)> = checkpoints
        .iter()
        .map(|&c| {
            let e = moments::expected_un(
                f,
                Target::Constrained(constraint, mode),
                c,
                model,
                &opt.moments,
            )?;
            Ok((e.value, e.exact))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut per_t_samples: Vec<Vec<f64>> = vec![Vec::with_capacity(opt.replicates); ts.len()];
    for rep in 0..opt.replicates {
        let xs = model.generate(n, opt.seed, STREAM_PATH, rep as u64);
        let values = patterns::u_stat_prefixes(f, constraint, mode, &xs, &checkpoints, &opt.eval)?;
        for (k, &v) in values.iter().enumerate() {
            per_t_samples[k].push(v);
        }
    }
    let mut per_t = Vec::with_capacity(ts.len());
    for (k, t) in ts.iter().enumerate() {
        let (center, exact) = centers[k];
        let center = if exact {
            center
        } else {
            linalg::mean(&per_t_samples[k])
        };
        let samples: Vec<f64> = per_t_samples[k].iter().map(|&v| (v - center) / scale).collect();
        per_t.push(PathStats {
            t: *t,
            prefix_len: checkpoints[k],
            stats: batch_stats(&samples),
            target_variance: moments::var_z(*t, report.sigma2, b),
        });
    }
    Ok(FunctionalSummary {
        seed: opt.seed,
        replicates: opt.replicates,
        n,
        block_count: b,
        sigma2: report.sigma2,
        per_t,
    })
}
