//! Renewal stopping: evaluate the statistic at the last/first time the
//! partial sum of a one-variable function crosses a level, and the
//! Monte-Carlo harness for the renewal limit theorem.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraint::{Constraint, Mode};
use crate::error::{Error, Result};
use crate::kernel::{Domain, Kernel};
use crate::model::{stream_rng, SequenceModel};
use crate::moments::{self, MomentOptions, ProjectionTable};
use crate::patterns;
use crate::poly::factorial;
use crate::seq::ObsSeq;

use super::{batch_stats, BatchStats, SimOptions, STREAM_RENEWAL};

/// Which stopping index the standardized statistic uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// Last index with partial sum `<= x`.
    Minus,
    /// First index with partial sum `> x`.
    Plus,
}

/// One replicate's stopping data.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RenewalStop {
    pub n_minus: usize,
    pub s_minus: f64,
    /// Partial sum one step past the last admissible index.
    pub s_after_minus: f64,
    pub n_plus: usize,
    pub s_plus: f64,
    /// Letters scanned before the certified stop.
    pub steps: usize,
}

impl RenewalStop {
    pub fn pick(&self, side: Side) -> (usize, f64) {
        match side {
            Side::Minus => (self.n_minus, self.s_minus),
            Side::Plus => (self.n_plus, self.s_plus),
        }
    }

    /// The defining inequalities of the two stopping indices.
    pub fn sandwich_holds(&self, x: f64) -> bool {
        self.s_minus <= x && x < self.s_after_minus && self.s_plus > x
    }
}

/// Value range of an arity-1 kernel, for the certified stopping rule.
fn kernel_range(h: &Kernel) -> Result<(f64, f64)> {
    match h {
        Kernel::Table { values, .. } => {
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            Ok((lo, hi))
        }
        Kernel::Word { word, .. } if word.len() == 1 => Ok((0.0, 1.0)),
        Kernel::PermPattern { pattern } if pattern.len() == 1 => Ok((1.0, 1.0)),
        Kernel::Sign { arity: 1 } => Ok((1.0, 1.0)),
        Kernel::Linear(parts) => {
            let mut lo = 0.0;
            let mut hi = 0.0;
            for (c, k) in parts {
                let (a, b) = kernel_range(k)?;
                if *c >= 0.0 {
                    lo += c * a;
                    hi += c * b;
                } else {
                    lo += c * b;
                    hi += c * a;
                }
            }
            Ok((lo, hi))
        }
        _ => Err(Error::InvalidInput(
            "renewal step function must have arity 1".into(),
        )),
    }
}

/// Incremental stationary-sequence generator; block factors keep the base
/// window alive across calls so the joint law matches batch generation.
struct ModelStream<'m> {
    model: &'m SequenceModel,
    rng: ChaCha8Rng,
    carry: Vec<u32>,
    bit_buf: u64,
    bit_left: u8,
}

impl<'m> ModelStream<'m> {
    fn new(model: &'m SequenceModel, rng: ChaCha8Rng) -> Self {
        ModelStream {
            model,
            rng,
            carry: Vec::new(),
            bit_buf: 0,
            bit_left: 0,
        }
    }

    fn fair_bit(&mut self) -> u32 {
        if self.bit_left == 0 {
            self.bit_buf = self.rng.gen();
            self.bit_left = 64;
        }
        let b = (self.bit_buf & 1) as u32;
        self.bit_buf >>= 1;
        self.bit_left -= 1;
        b
    }

    fn base_letter(&mut self, dist: &crate::model::FiniteDist) -> u32 {
        if dist.size() == 2 && dist.probs()[0] == 0.5 {
            self.fair_bit()
        } else {
            dist.sample(&mut self.rng)
        }
    }

    fn next_sym(&mut self) -> u32 {
        match self.model {
            SequenceModel::IidFinite { dist } => self.base_letter(&dist.clone()),
            SequenceModel::BlockFactor {
                base, window, map, ..
            } => {
                let base = base.clone();
                let window = *window;
                while self.carry.len() < window - 1 {
                    let l = self.base_letter(&base);
                    self.carry.push(l);
                }
                let newest = self.base_letter(&base);
                let mut code = 0usize;
                for &c in &self.carry {
                    code = code * base.size() + c as usize;
                }
                code = code * base.size() + newest as usize;
                if window > 1 {
                    self.carry.remove(0);
                    self.carry.push(newest);
                }
                map[code]
            }
            SequenceModel::IidUniform01 => panic!("symbol stream over a real model"),
        }
    }

    fn next_obs(&mut self) -> f64 {
        match self.model {
            SequenceModel::IidUniform01 => self.rng.gen::<f64>(),
            _ => panic!("real stream over a symbol model"),
        }
    }
}

struct StopScan {
    stop: RenewalStop,
    seq: ObsSeq,
}

fn scan_to_stop(
    model: &SequenceModel,
    h: &Kernel,
    x: f64,
    margin: Option<f64>,
    rng: ChaCha8Rng,
) -> Result<StopScan> {
    let (h_lo, h_hi) = kernel_range(h)?;
    let below = (-h_lo).max(0.0);
    let m = model.dependence();
    let default_margin = if below == 0.0 {
        0.0
    } else {
        // Heuristic slack past the certified bound for signed steps.
        8.0 * (m + 1) as f64 * h_lo.abs().max(h_hi.abs()).max(1.0)
    };
    let margin = margin.unwrap_or(default_margin);
    let threshold = x + below * (m + 1) as f64 + margin;

    let finite = model.is_finite();
    let mut stream = ModelStream::new(model, rng);
    let mut syms: Vec<u32> = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    let mut s = 0.0f64;
    let mut n_minus = 0usize;
    let mut s_minus = 0.0f64;
    let mut s_after_minus = f64::NAN;
    let mut after_pending = true;
    let mut n_plus: Option<usize> = None;
    let mut s_plus = f64::NAN;
    let mut n = 0usize;
    let hard_cap = ((x.max(1.0) * 1e4) as usize).max(1 << 22);
    loop {
        n += 1;
        let step = if finite {
            let sym = stream.next_sym();
            syms.push(sym);
            h.eval_sym(&[sym])
        } else {
            let v = stream.next_obs();
            reals.push(v);
            h.eval_real(&[v])
        };
        s += step;
        if after_pending {
            s_after_minus = s;
            after_pending = false;
        }
        if s <= x {
            n_minus = n;
            s_minus = s;
            after_pending = true;
        }
        if n_plus.is_none() && s > x {
            n_plus = Some(n);
            s_plus = s;
        }
        if n_plus.is_some() && s > threshold {
            break;
        }
        if n > hard_cap {
            return Err(Error::InvalidInput(format!(
                "renewal scan exceeded {hard_cap} letters without a certified stop"
            )));
        }
    }
    if after_pending {
        // The final candidate was the stopping step itself; impossible since
        // stopping requires s > x, but keep the field well-defined.
        s_after_minus = s;
    }
    let stop = RenewalStop {
        n_minus,
        s_minus,
        s_after_minus,
        n_plus: n_plus.expect("stop implies a crossing"),
        s_plus,
        steps: n,
    };
    let seq = if finite {
        ObsSeq::from_symbols(syms, model.alphabet_size().unwrap())?
    } else {
        ObsSeq::Reals(reals)
    };
    Ok(StopScan { stop, seq })
}

/// Stopping indices and sums for one simulated replicate.
pub fn renewal_stop(
    model: &SequenceModel,
    h: &Kernel,
    x: f64,
    seed: u64,
    replicate: u64,
    margin: Option<f64>,
) -> Result<RenewalStop> {
    let nu = drift(h, model)?;
    if x <= 0.0 {
        return Err(Error::InvalidInput("level x must be positive".into()));
    }
    let _ = nu;
    let rng = stream_rng(seed, STREAM_RENEWAL, replicate);
    Ok(scan_to_stop(model, h, x, margin, rng)?.stop)
}

fn drift(h: &Kernel, model: &SequenceModel) -> Result<f64> {
    if h.arity() != 1 {
        return Err(Error::InvalidInput(
            "renewal step function must have arity 1".into(),
        ));
    }
    let nu = moments::mu(h, model, &MomentOptions::default())?.value;
    if nu <= 0.0 {
        return Err(Error::NonpositiveDrift(nu));
    }
    Ok(nu)
}

/// Configuration of the renewal harness.
#[derive(Debug, Clone)]
pub struct RenewalConfig {
    pub h: Kernel,
    pub side: Side,
    /// Condition on the stopped sum hitting the level exactly (independent
    /// integer-valued steps only), via rejection sampling.
    pub conditioned: bool,
    pub margin: Option<f64>,
}

/// Per-level results.
#[derive(Debug, Clone, Serialize)]
pub struct RenewalStats {
    pub x: f64,
    pub stats: BatchStats,
    /// Number of replicates violating the stopping-sum inequalities
    /// (must be zero).
    pub sandwich_violations: usize,
    /// Whether `N_+ = N_- + 1` held on every replicate.
    pub plus_is_minus_plus_one: bool,
    pub mean_stop_index: f64,
    pub attempts: u64,
    pub accepted: usize,
    /// Estimated variance indistinguishable from zero at three standard
    /// errors (the degenerate renewal case).
    pub gamma2_near_zero: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalSummary {
    pub seed: u64,
    pub replicates: usize,
    pub block_count: usize,
    pub side: Side,
    pub conditioned: bool,
    /// Drift of the step function.
    pub nu: f64,
    /// Mean coefficient of the constrained statistic.
    pub mu_coeff: f64,
    pub per_x: Vec<RenewalStats>,
}

/// Renewal-stopped statistics standardized as
/// `(U_{N(x)} - mu_D nu^{-b} x^b / b!) / x^{b-1/2}` over a grid of levels.
pub fn mc_renewal(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    cfg: &RenewalConfig,
    x_grid: &[f64],
    opt: &SimOptions,
) -> Result<RenewalSummary> {
    let nu = drift(&cfg.h, model)?;
    if cfg.conditioned {
        if model.dependence() != 0 {
            return Err(Error::InvalidInput(
                "conditioned renewal requires independent observations".into(),
            ));
        }
        if !cfg.h.integer_valued() {
            return Err(Error::InvalidInput(
                "conditioned renewal requires an integer-valued step function".into(),
            ));
        }
    }
    let b = constraint.block_count();
    let mu_coeff = match mode {
        Mode::Bounded => moments::mu_constrained(f, constraint, model, &opt.moments)?.value,
        Mode::Exact => {
            moments::mu_exactly_constrained(f, constraint, model, &opt.moments)?.value
        }
    };
    let b_fact = factorial(b);
    let b_fact = num_traits::ToPrimitive::to_f64(&b_fact).unwrap();
    let mut per_x = Vec::with_capacity(x_grid.len());
    for (xi, &x) in x_grid.iter().enumerate() {
        if x <= 0.0 {
            return Err(Error::InvalidInput("levels must be positive".into()));
        }
        let center = mu_coeff * nu.powi(-(b as i32)) * x.powi(b as i32) / b_fact;
        let scale = x.powf(b as f64 - 0.5);
        let mut samples = Vec::with_capacity(opt.replicates);
        let mut sandwich_violations = 0usize;
        let mut plus_ok = true;
        let mut stop_total = 0.0f64;
        let mut attempts: u64 = 0;
        while samples.len() < opt.replicates {
            let rng = stream_rng(
                opt.seed,
                STREAM_RENEWAL + 1 + xi as u64,
                attempts,
            );
            attempts += 1;
            if attempts > 20_000 {
                let rate = samples.len() as f64 / attempts as f64;
                if rate < 1e-4 {
                    return Err(Error::ConditioningImpossible { rate, attempts });
                }
            }
            let scan = scan_to_stop(model, &cfg.h, x, cfg.margin, rng)?;
            if cfg.conditioned && scan.stop.s_minus != x {
                continue;
            }
            if !scan.stop.sandwich_holds(x) {
                sandwich_violations += 1;
            }
            if scan.stop.n_plus != scan.stop.n_minus + 1 {
                plus_ok = false;
            }
            let (n_stop, _) = scan.stop.pick(cfg.side);
            stop_total += n_stop as f64;
            let u = patterns::u_stat_prefixes(
                f,
                constraint,
                mode,
                &scan.seq,
                &[n_stop],
                &opt.eval,
            )?[0];
            samples.push((u - center) / scale);
        }
        let stats = batch_stats(&samples);
        let gamma2_near_zero = stats.variance <= 3.0 * stats.variance_se;
        per_x.push(RenewalStats {
            x,
            stats,
            sandwich_violations,
            plus_is_minus_plus_one: plus_ok,
            mean_stop_index: stop_total / opt.replicates as f64,
            attempts,
            accepted: samples.len(),
            gamma2_near_zero,
            samples: opt.keep_samples.then_some(samples),
        });
    }
    Ok(RenewalSummary {
        seed: opt.seed,
        replicates: opt.replicates,
        block_count: b,
        side: cfg.side,
        conditioned: cfg.conditioned,
        nu,
        mu_coeff,
        per_x,
    })
}

/// The adjusted window projections whose telescoping characterizes the
/// degenerate renewal case: `tg_j(y) = g_j(y) + mu_D - (mu_D / nu) h(y_1)`.
///
/// Exact tables for finite models; their degeneracy is tested numerically
/// through the renewal harness (`gamma2_near_zero`), not constructively.
pub fn renewal_degeneracy_projections(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    h: &Kernel,
    opts: &MomentOptions,
) -> Result<ProjectionTable> {
    let nu = drift(h, model)?;
    if !matches!(h.domain(), Domain::Finite(_)) {
        return Err(Error::InvalidInput(
            "adjusted projections are tabulated for finite models only".into(),
        ));
    }
    let mu_coeff = match mode {
        Mode::Bounded => moments::mu_constrained(f, constraint, model, opts)?.value,
        Mode::Exact => moments::mu_exactly_constrained(f, constraint, model, opts)?.value,
    };
    let proj = moments::reduced_projections(f, constraint, mode, model, opts)?;
    let ProjectionTable::Finite {
        slots,
        window,
        alphabet_size,
        mut tables,
        window_dist,
    } = proj
    else {
        return Err(Error::InvalidInput(
            "adjusted projections require exact finite tables".into(),
        ));
    };
    let a = alphabet_size;
    for table in &mut tables {
        for (code, v) in table.iter_mut().enumerate() {
            // Leading symbol of the window code.
            let first = (code / a.pow(window as u32 - 1)) as u32;
            *v += mu_coeff - (mu_coeff / nu) * h.eval_sym(&[first]);
        }
    }
    Ok(ProjectionTable::Finite {
        slots,
        window,
        alphabet_size,
        tables,
        window_dist,
    })
}
