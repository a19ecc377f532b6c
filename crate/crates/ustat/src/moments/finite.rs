//! Exact moment computations for finite-alphabet kernels and models by
//! state enumeration.

use crate::blocks::block_structure;
use crate::constraint::{Constraint, Mode};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::model::{JointDist, SequenceModel};

use super::{GammaArray, ProjectionTable};

fn alphabet_size(model: &SequenceModel) -> usize {
    model.alphabet_size().expect("finite model")
}

fn pow_checked(a: usize, e: usize, budget: u128) -> Result<usize> {
    let states = (a as u128).checked_pow(e as u32).unwrap_or(u128::MAX);
    if states > budget {
        return Err(Error::BudgetExceeded {
            needed: states,
            budget,
            unit: "joint states",
        });
    }
    Ok(states as usize)
}

fn decode(mut code: usize, a: usize, out: &mut [u32]) {
    for slot in (0..out.len()).rev() {
        out[slot] = (code % a) as u32;
        code /= a;
    }
}

/// `E f(X^_1, ..., X^_l)` with independent copies of the marginal.
pub fn mu_finite(f: &Kernel, model: &SequenceModel, budget: u128) -> Result<f64> {
    let a = alphabet_size(model);
    let ell = f.arity();
    let marginal = model.marginal()?;
    let states = pow_checked(a, ell, budget)?;
    let mut args = vec![0u32; ell];
    let mut total = 0.0;
    for code in 0..states {
        decode(code, a, &mut args);
        let p: f64 = args.iter().map(|&s| marginal.prob(s)).product();
        if p != 0.0 {
            total += p * f.eval_sym(&args);
        }
    }
    Ok(total)
}

/// Per-block joint laws of the coordinates a block reads, marginalized from
/// the window law of the underlying process.
fn block_laws(
    constraint: &Constraint,
    model: &SequenceModel,
    budget: u128,
) -> Result<Vec<JointDist>> {
    let bs = block_structure(constraint);
    let mut laws = Vec::with_capacity(bs.count);
    for q in 0..bs.count {
        let span = bs.spans[q];
        let joint = model.joint_window(span + 1, budget)?;
        laws.push(joint.marginal_of_lags(&bs.offsets[q]));
    }
    Ok(laws)
}

/// Mean of one exactly-constrained term: blocks far apart are independent,
/// each block's coordinates keep the process law at their lags.
pub fn mu_exactly_constrained_finite(
    f: &Kernel,
    constraint: &Constraint,
    model: &SequenceModel,
    budget: u128,
) -> Result<f64> {
    let bs = block_structure(constraint);
    let laws = block_laws(constraint, model, budget)?;
    let a = alphabet_size(model);
    pow_checked(a, f.arity(), budget)?;
    let mut args = vec![0u32; f.arity()];
    let mut total = 0.0;
    // Odometer over the per-block tuples.
    let mut codes = vec![0usize; bs.count];
    loop {
        let mut p = 1.0;
        for (q, law) in laws.iter().enumerate() {
            p *= law.probs[codes[q]];
            if p == 0.0 {
                break;
            }
        }
        if p != 0.0 {
            let mut slot = 0usize;
            for (q, law) in laws.iter().enumerate() {
                let mut c = codes[q];
                for r in (0..bs.lengths[q]).rev() {
                    args[slot + r] = (c % law.alphabet_size) as u32;
                    c /= law.alphabet_size;
                }
                slot += bs.lengths[q];
            }
            total += p * f.eval_sym(&args);
        }
        // Advance the odometer.
        let mut q = bs.count;
        loop {
            if q == 0 {
                return Ok(total);
            }
            q -= 1;
            codes[q] += 1;
            if codes[q] < laws[q].probs.len() {
                break;
            }
            codes[q] = 0;
        }
    }
}

/// Exact one-variable projection tables over single symbols.
pub fn projections_finite(
    f: &Kernel,
    model: &SequenceModel,
    budget: u128,
) -> Result<ProjectionTable> {
    let a = alphabet_size(model);
    let ell = f.arity();
    let marginal = model.marginal()?;
    let states = pow_checked(a, ell, budget)?;
    let mu = mu_finite(f, model, budget)?;
    let mut tables = vec![vec![0.0f64; a]; ell];
    let mut args = vec![0u32; ell];
    for code in 0..states {
        decode(code, a, &mut args);
        let value = f.eval_sym(&args);
        if value == 0.0 {
            continue;
        }
        // Full product once, then peel off one factor per slot.
        for i in 0..ell {
            let mut w = 1.0;
            for (j, &s) in args.iter().enumerate() {
                if j != i {
                    w *= marginal.prob(s);
                }
            }
            tables[i][args[i] as usize] += w * value;
        }
    }
    for table in &mut tables {
        for v in table.iter_mut() {
            *v -= mu;
        }
    }
    Ok(ProjectionTable::Finite {
        slots: ell,
        window: 1,
        alphabet_size: a,
        tables,
        window_dist: marginal.probs().to_vec(),
    })
}

/// Exact projections of the window reduction, as tables over window codes.
pub fn reduced_projections_finite(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    budget: u128,
) -> Result<ProjectionTable> {
    let a = alphabet_size(model);
    let ell = f.arity();
    let b = constraint.block_count();
    let window = constraint.gap_sum() + 1;
    let window_states = pow_checked(a, window, budget)?;
    let window_joint = model.joint_window(window, budget)?;

    let parts: Vec<Constraint> = match mode {
        Mode::Exact => vec![constraint.clone()],
        Mode::Bounded => constraint.exact_subconstraints(),
    };
    // Work estimate: per part and slot we enumerate window codes times the
    // other blocks' tuples.
    let mut mu_target = 0.0;
    let mut tables = vec![vec![0.0f64; window_states]; b];
    let mut args = vec![0u32; ell];
    let mut window_syms = vec![0u32; window];
    for part in &parts {
        let bs = block_structure(part);
        debug_assert_eq!(bs.count, b);
        let laws = block_laws(part, model, budget)?;
        let mu_part = mu_exactly_constrained_finite(f, part, model, budget)?;
        mu_target += mu_part;
        for i in 0..b {
            let other_states: u128 = (0..b)
                .filter(|&q| q != i)
                .map(|q| laws[q].probs.len() as u128)
                .product();
            let work = (window_states as u128).saturating_mul(other_states);
            if work > budget {
                return Err(Error::BudgetExceeded {
                    needed: work,
                    budget,
                    unit: "projection states",
                });
            }
            for y in 0..window_states {
                decode(y, a, &mut window_syms);
                // Block i's arguments come from the given window.
                let mut acc = 0.0;
                let mut codes = vec![0usize; b];
                'outer: loop {
                    let mut p = 1.0;
                    for q in 0..b {
                        if q != i {
                            p *= laws[q].probs[codes[q]];
                        }
                    }
                    if p != 0.0 {
                        let mut slot = 0usize;
                        for q in 0..b {
                            if q == i {
                                for r in 0..bs.lengths[q] {
                                    args[slot + r] =
                                        window_syms[bs.shifts[q] + bs.offsets[q][r]];
                                }
                            } else {
                                let law = &laws[q];
                                let mut c = codes[q];
                                for r in (0..bs.lengths[q]).rev() {
                                    args[slot + r] = (c % law.alphabet_size) as u32;
                                    c /= law.alphabet_size;
                                }
                            }
                            slot += bs.lengths[q];
                        }
                        acc += p * f.eval_sym(&args);
                    }
                    let mut q = b;
                    loop {
                        if q == 0 {
                            break 'outer;
                        }
                        q -= 1;
                        if q == i {
                            if q == 0 {
                                break 'outer;
                            }
                            continue;
                        }
                        codes[q] += 1;
                        if codes[q] < laws[q].probs.len() {
                            break;
                        }
                        codes[q] = 0;
                    }
                }
                tables[i][y] += acc;
            }
        }
    }
    for table in &mut tables {
        for v in table.iter_mut() {
            *v -= mu_target;
        }
    }
    Ok(ProjectionTable::Finite {
        slots: b,
        window,
        alphabet_size: a,
        tables,
        window_dist: window_joint.probs,
    })
}

/// Exact lag covariances of finite projection tables.
pub fn gamma_finite(
    proj: &ProjectionTable,
    model: &SequenceModel,
    m_eff: usize,
    budget: u128,
) -> Result<GammaArray> {
    let ProjectionTable::Finite {
        slots,
        window,
        alphabet_size: a,
        tables,
        ..
    } = proj
    else {
        return Err(Error::InvalidInput("finite projection table required".into()));
    };
    let (slots, window, a) = (*slots, *window, *a);
    let mut gamma = GammaArray::new_zero(slots, m_eff, true);
    let mut syms = vec![0u32; window + m_eff];
    for r in 0..=m_eff {
        let joint = model.joint_window(window + r, budget)?;
        // Means under this joint, to cancel table centering roundoff.
        let mut mean0 = vec![0.0; slots];
        let mut mean_r = vec![0.0; slots];
        let mut prods = vec![0.0; slots * slots];
        for (code, &p) in joint.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            decode(code, a, &mut syms[..window + r]);
            let mut y0 = 0usize;
            let mut yr = 0usize;
            for k in 0..window {
                y0 = y0 * a + syms[k] as usize;
                yr = yr * a + syms[r + k] as usize;
            }
            for i in 0..slots {
                let ti = tables[i][y0];
                let tir = tables[i][yr];
                mean0[i] += p * ti;
                mean_r[i] += p * tir;
                for j in 0..slots {
                    prods[i * slots + j] += p * ti * tables[j][yr];
                }
            }
        }
        for i in 0..slots {
            for j in 0..slots {
                let cov = prods[i * slots + j] - mean0[i] * mean_r[j];
                gamma.set(i, j, r as isize, cov);
                gamma.set(j, i, -(r as isize), cov);
            }
        }
    }
    Ok(gamma)
}
