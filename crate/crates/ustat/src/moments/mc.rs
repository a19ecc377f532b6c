//! Monte-Carlo estimation of window-reduction projections and their lag
//! covariances when exact enumeration is out of reach (order-based kernels
//! under constraints, or finite state spaces beyond the budget).
//!
//! Covariances use common random numbers across slots and lags, and two
//! independent inner estimates per outer draw so products stay unbiased.

use rand::Rng;

use crate::blocks::ReducedKernel;
use crate::constraint::{Constraint, Mode};
use crate::error::Result;
use crate::kernel::Domain;
use crate::kernel::Kernel;
use crate::linalg;
use crate::model::{stream_rng, SequenceModel};
use crate::seq::ObsSeq;

use super::{beta_inner, Estimate, GammaArray, MomentOptions, ProjectionTable};

const STREAM_GAMMA: u64 = 0x6a;
const STREAM_PROJ: u64 = 0x6b;

enum Windows {
    Sym(Vec<u32>),
    Real(Vec<f64>),
}

impl Windows {
    fn from_seq(xs: ObsSeq) -> Windows {
        match xs {
            ObsSeq::Symbols { data, .. } => Windows::Sym(data),
            ObsSeq::Reals(data) => Windows::Real(data),
        }
    }

    fn eval(&self, rk: &ReducedKernel, offsets: &[usize], window: usize) -> f64 {
        match self {
            Windows::Sym(data) => {
                let views: Vec<&[u32]> =
                    offsets.iter().map(|&o| &data[o..o + window]).collect();
                rk.eval_windows_sym(&views)
            }
            Windows::Real(data) => {
                let views: Vec<&[f64]> =
                    offsets.iter().map(|&o| &data[o..o + window]).collect();
                rk.eval_windows_real(&views)
            }
        }
    }
}

/// Buffer of independent windows packed into one stationary stretch with
/// separations larger than the dependence range.
struct ContextPool {
    data: Windows,
    stride: usize,
}

impl ContextPool {
    fn draw<R: Rng>(
        model: &SequenceModel,
        window: usize,
        count: usize,
        rng: &mut R,
    ) -> ContextPool {
        let stride = window + model.dependence() + 1;
        let len = if count == 0 { 0 } else { stride * count };
        ContextPool {
            data: Windows::from_seq(model.generate_with(len, rng)),
            stride,
        }
    }

    fn offset(&self, k: usize) -> usize {
        k * self.stride
    }
}

struct GammaSample {
    /// `prod[i][j][r]` for r >= 0: one draw of `g_i(Y_1) g_j(Y_{1+r})`.
    prod: Vec<f64>,
}

/// Shared machinery: one outer draw of the stretch plus two independent
/// inner context sets, evaluating every slot's projection estimate at every
/// lag window with common random numbers.
struct McEngine<'a> {
    rk: ReducedKernel,
    model: &'a SequenceModel,
    mu_target: f64,
    window: usize,
    m_eff: usize,
    slots: usize,
    inner: usize,
}

impl<'a> McEngine<'a> {
    fn new(
        f: &Kernel,
        constraint: &Constraint,
        mode: Mode,
        model: &'a SequenceModel,
        opts: &MomentOptions,
    ) -> Result<Self> {
        let window = constraint.gap_sum() + 1;
        let rk = match mode {
            Mode::Exact => ReducedKernel::exact(f, constraint, window)?,
            Mode::Bounded => ReducedKernel::full(f, constraint, window)?,
        };
        let mu_target = match mode {
            Mode::Exact => super::mu_exactly_constrained(f, constraint, model, opts)?.value,
            Mode::Bounded => super::mu_constrained(f, constraint, model, opts)?.value,
        };
        Ok(McEngine {
            slots: rk.arity(),
            rk,
            model,
            mu_target,
            window,
            m_eff: model.dependence() + constraint.gap_sum(),
            inner: opts.mc_inner,
        })
    }

    /// Estimate `g_i` at the window starting at `offset` inside `stretch`,
    /// averaging over the contexts for the other slots.
    fn project<'b>(
        &self,
        stretch: &Windows,
        offset: usize,
        slot: usize,
        contexts: &ContextPool,
    ) -> f64 {
        let b = self.slots;
        if b == 1 {
            return stretch.eval(&self.rk, &[offset], self.window) - self.mu_target;
        }
        let mut acc = 0.0;
        let mut offsets = vec![0usize; b];
        for k in 0..self.inner {
            let mut ctx = 0usize;
            for (q, o) in offsets.iter_mut().enumerate() {
                if q == slot {
                    *o = usize::MAX; // patched below
                } else {
                    *o = contexts.offset(k * (b - 1) + ctx);
                    ctx += 1;
                }
            }
            offsets[slot] = offset;
            // The slot window lives in `stretch`, others in the pool; they
            // are evaluated through a merged view.
            acc += self.eval_mixed(stretch, contexts, &offsets, slot);
        }
        acc / self.inner as f64 - self.mu_target
    }

    fn eval_mixed(
        &self,
        stretch: &Windows,
        contexts: &ContextPool,
        offsets: &[usize],
        slot: usize,
    ) -> f64 {
        match (stretch, &contexts.data) {
            (Windows::Sym(s), Windows::Sym(c)) => {
                let views: Vec<&[u32]> = offsets
                    .iter()
                    .enumerate()
                    .map(|(q, &o)| {
                        if q == slot {
                            &s[o..o + self.window]
                        } else {
                            &c[o..o + self.window]
                        }
                    })
                    .collect();
                self.rk.eval_windows_sym(&views)
            }
            (Windows::Real(s), Windows::Real(c)) => {
                let views: Vec<&[f64]> = offsets
                    .iter()
                    .enumerate()
                    .map(|(q, &o)| {
                        if q == slot {
                            &s[o..o + self.window]
                        } else {
                            &c[o..o + self.window]
                        }
                    })
                    .collect();
                self.rk.eval_windows_real(&views)
            }
            _ => unreachable!("model and kernel domains agree"),
        }
    }

    fn draw_sample(&self, seed: u64, replicate: u64) -> GammaSample {
        let mut rng = stream_rng(seed, STREAM_GAMMA, replicate);
        let stretch_len = self.window + self.m_eff;
        let stretch = Windows::from_seq(self.model.generate_with(stretch_len, &mut rng));
        let ctx_count = if self.slots > 1 {
            self.inner * (self.slots - 1)
        } else {
            0
        };
        let pool1 = ContextPool::draw(self.model, self.window, ctx_count, &mut rng);
        let pool2 = ContextPool::draw(self.model, self.window, ctx_count, &mut rng);
        // Projection estimates at lag 0 (first half) and at each lag
        // (second half), common random numbers across slots and lags.
        let g_left: Vec<f64> = (0..self.slots)
            .map(|i| self.project(&stretch, 0, i, &pool1))
            .collect();
        let mut prod = vec![0.0; self.slots * self.slots * (self.m_eff + 1)];
        for r in 0..=self.m_eff {
            let g_right: Vec<f64> = (0..self.slots)
                .map(|j| self.project(&stretch, r, j, &pool2))
                .collect();
            for i in 0..self.slots {
                for j in 0..self.slots {
                    prod[(i * self.slots + j) * (self.m_eff + 1) + r] =
                        g_left[i] * g_right[j];
                }
            }
        }
        GammaSample { prod }
    }
}

/// Monte-Carlo lag covariances plus the per-sample sigma^2 standard error.
pub fn constrained_gamma_mc(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<(ProjectionTable, GammaArray, f64)> {
    let engine = McEngine::new(f, constraint, mode, model, opts)?;
    let slots = engine.slots;
    let m_eff = engine.m_eff;
    let reps = opts.mc_outer.max(2);
    let lanes = slots * slots * (m_eff + 1);
    let mut sums = vec![0.0; lanes];
    let mut sumsq = vec![0.0; lanes];
    // Per-sample sigma^2 contribution, for an honest overall SE.
    let beta: Vec<f64> = (0..slots * slots)
        .map(|k| {
            let (i, j) = (k / slots + 1, k % slots + 1);
            num_traits::ToPrimitive::to_f64(&beta_inner(i, j, slots)).unwrap()
        })
        .collect();
    let mut s2_sum = 0.0;
    let mut s2_sumsq = 0.0;
    for rep in 0..reps {
        let sample = engine.draw_sample(opts.seed, rep as u64);
        let mut s2 = 0.0;
        for i in 0..slots {
            for j in 0..slots {
                let base = (i * slots + j) * (m_eff + 1);
                for r in 0..=m_eff {
                    let v = sample.prod[base + r];
                    sums[base + r] += v;
                    sumsq[base + r] += v * v;
                    s2 += beta[i * slots + j] * if r == 0 { v } else { 2.0 * v };
                }
            }
        }
        s2_sum += s2;
        s2_sumsq += s2 * s2;
    }
    let n = reps as f64;
    let mut gamma = GammaArray::new_zero(slots, m_eff, false);
    let mut se = vec![0.0; slots * slots * (2 * m_eff + 1)];
    for i in 0..slots {
        for j in 0..slots {
            let base = (i * slots + j) * (m_eff + 1);
            for r in 0..=m_eff {
                let mean = sums[base + r] / n;
                let var = (sumsq[base + r] / n - mean * mean).max(0.0);
                let e = (var / n).sqrt();
                gamma.set(i, j, r as isize, mean);
                gamma.set(j, i, -(r as isize), mean);
                se[gamma.index(i, j, r as isize)] = e;
                se[gamma.index(j, i, -(r as isize))] = e;
            }
        }
    }
    gamma.se = Some(se);
    let s2_mean = s2_sum / n;
    let s2_var = (s2_sumsq / n - s2_mean * s2_mean).max(0.0);
    let s2_se = (s2_var / n).sqrt();
    let proj = reduced_projections_mc(f, constraint, mode, model, opts)?;
    Ok((proj, gamma, s2_se))
}

/// Monte-Carlo point estimates of the reduced projections at sampled window
/// points, with per-point standard errors.
pub fn reduced_projections_mc(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<ProjectionTable> {
    let engine = McEngine::new(f, constraint, mode, model, opts)?;
    let slots = engine.slots;
    let window = engine.window;
    let n_points = 64usize;
    let mut points = Vec::with_capacity(n_points);
    let mut values = vec![Vec::with_capacity(n_points); slots];
    let mut ses = vec![Vec::with_capacity(n_points); slots];
    for p in 0..n_points {
        let mut rng = stream_rng(opts.seed, STREAM_PROJ, p as u64);
        let stretch_seq = model.generate_with(window, &mut rng);
        let point: Vec<f64> = match &stretch_seq {
            ObsSeq::Symbols { data, .. } => data.iter().map(|&s| s as f64).collect(),
            ObsSeq::Reals(data) => data.clone(),
        };
        let stretch = Windows::from_seq(stretch_seq);
        points.push(point);
        let ctx_count = if slots > 1 {
            engine.inner * (slots - 1)
        } else {
            0
        };
        for i in 0..slots {
            // Batch means over independent context pools.
            let batches = 16usize;
            let mut vals = Vec::with_capacity(batches);
            for bidx in 0..batches {
                let mut brng =
                    stream_rng(opts.seed, STREAM_PROJ + 1, (p * batches + bidx) as u64);
                let pool = ContextPool::draw(model, window, ctx_count, &mut brng);
                vals.push(engine.project(&stretch, 0, i, &pool));
            }
            let mean = linalg::mean(&vals);
            let var = linalg::variance(&vals);
            values[i].push(mean);
            ses[i].push((var / batches as f64).sqrt());
        }
    }
    Ok(ProjectionTable::McPoints {
        slots,
        window,
        points,
        values,
        ses,
    })
}

/// Monte-Carlo mean estimate for kernels without an exact route; draws
/// independent marginal copies per the hat-variable construction.
#[allow(dead_code)]
pub fn mu_mc(f: &Kernel, model: &SequenceModel, opts: &MomentOptions) -> Result<Estimate> {
    let ell = f.arity();
    let reps = opts.mc_outer.max(2);
    let mut vals = Vec::with_capacity(reps);
    let stride = 1 + model.dependence() + 1;
    for rep in 0..reps {
        let mut rng = stream_rng(opts.seed, 0x6c, rep as u64);
        let xs = model.generate_with(stride * ell, &mut rng);
        let v = match (&xs, f.domain()) {
            (ObsSeq::Symbols { data, .. }, Domain::Finite(_)) => {
                let args: Vec<u32> = (0..ell).map(|i| data[i * stride]).collect();
                f.eval_sym(&args)
            }
            (ObsSeq::Reals(data), Domain::RealOrder) => {
                let args: Vec<f64> = (0..ell).map(|i| data[i * stride]).collect();
                f.eval_real(&args)
            }
            _ => unreachable!("domains checked by callers"),
        };
        vals.push(v);
    }
    let mean = linalg::mean(&vals);
    let se = (linalg::variance(&vals) / reps as f64).sqrt();
    Ok(Estimate {
        value: mean,
        se: Some(se),
    })
}
