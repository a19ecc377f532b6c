//! Block structure of a constraint and the reduction of exactly-constrained
//! U-statistics to unconstrained ones over sliding windows.

use serde::Serialize;

use crate::constraint::{Constraint, Gap};
use crate::error::{Error, Result};
use crate::eval::{EvalOptions, Value};
use crate::kernel::{Domain, Kernel};
use crate::seq::ObsSeq;

/// Derived combinatorics of a constraint: the maximal runs of slots joined
/// by finite gap bounds, and the offsets needed to read a kernel's arguments
/// out of sliding windows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockStructure {
    /// Number of blocks `b`.
    pub count: usize,
    /// First slot of each block (0-based into the kernel slots).
    pub starts: Vec<usize>,
    /// Slots per block; sums to the kernel arity.
    pub lengths: Vec<usize>,
    /// `offsets[q][r]`: position offset of the r-th slot of block q relative
    /// to the block's first slot; `offsets[q][0] = 0`.
    pub offsets: Vec<Vec<usize>>,
    /// Total offset spanned by each block (last entry of its offsets).
    pub spans: Vec<usize>,
    /// Cumulative span of the preceding blocks.
    pub shifts: Vec<usize>,
    /// Sum of all finite gap bounds.
    pub gap_sum: usize,
    /// Window width used for lifting; the minimal admissible `gap_sum + 1`.
    pub window: usize,
}

/// Block decomposition of a constraint.
pub fn block_structure(constraint: &Constraint) -> BlockStructure {
    let gaps = constraint.gaps();
    let ell = constraint.ell();
    let mut starts = vec![0usize];
    for (j, g) in gaps.iter().enumerate() {
        if !g.is_finite() {
            starts.push(j + 1);
        }
    }
    let count = starts.len();
    let mut lengths = Vec::with_capacity(count);
    let mut offsets = Vec::with_capacity(count);
    let mut spans = Vec::with_capacity(count);
    let mut shifts = Vec::with_capacity(count);
    let mut cumulative = 0usize;
    for (q, &start) in starts.iter().enumerate() {
        let end = if q + 1 < count { starts[q + 1] } else { ell };
        let len = end - start;
        let mut offs = Vec::with_capacity(len);
        let mut t = 0usize;
        offs.push(0);
        for r in 1..len {
            match gaps[start + r - 1] {
                Gap::Finite(d) => t += d,
                Gap::Unbounded => unreachable!("unbounded gap inside a block"),
            }
            offs.push(t);
        }
        shifts.push(cumulative);
        cumulative += t;
        spans.push(t);
        lengths.push(len);
        offsets.push(offs);
    }
    let gap_sum = constraint.gap_sum();
    debug_assert_eq!(cumulative, gap_sum);
    BlockStructure {
        count,
        starts,
        lengths,
        offsets,
        spans,
        shifts,
        gap_sum,
        window: gap_sum + 1,
    }
}

impl BlockStructure {
    /// Dependence range of the lifted sequence when the base sequence is
    /// m-dependent and windows have width `window`.
    pub fn lifted_dependence(&self, m: usize, window: usize) -> usize {
        m + window - 1
    }
}

/// A lazily materialized sequence of sliding windows over a base sequence.
#[derive(Debug, Clone, Copy)]
pub struct LiftedSequence<'a> {
    base: &'a ObsSeq,
    window: usize,
}

/// Windows `(x_i, ..., x_{i+window-1})`; requires `xs.len() >= window >= 1`.
pub fn lift(xs: &ObsSeq, window: usize) -> Result<LiftedSequence<'_>> {
    if window == 0 {
        return Err(Error::InvalidInput("window must be >= 1".into()));
    }
    if xs.len() < window {
        return Err(Error::SequenceTooShort {
            n: xs.len(),
            window,
        });
    }
    Ok(LiftedSequence { base: xs, window })
}

impl<'a> LiftedSequence<'a> {
    pub fn len(&self) -> usize {
        self.base.len() - self.window + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn base(&self) -> &'a ObsSeq {
        self.base
    }

    /// The i-th window (0-based) as a symbol slice.
    pub fn window_syms(&self, i: usize) -> Option<&'a [u32]> {
        self.base.symbols().map(|s| &s[i..i + self.window])
    }

    /// The i-th window (0-based) as a real slice.
    pub fn window_reals(&self, i: usize) -> Option<&'a [f64]> {
        self.base.reals().map(|s| &s[i..i + self.window])
    }
}

/// The window kernel realizing an exactly- or fully-constrained U-statistic
/// as an unconstrained one of arity `block_count` on lifted windows.
///
/// For an exact constraint this is a single coordinate-selection of the
/// original kernel; for a bounded constraint it is the sum of those
/// selections over every exact sub-constraint.
#[derive(Debug, Clone)]
pub struct ReducedKernel {
    inner: Kernel,
    parts: Vec<BlockStructure>,
    window: usize,
    arity: usize,
}

impl ReducedKernel {
    /// Reduce the exact constraint `D=`; requires `window > gap_sum`.
    pub fn exact(f: &Kernel, constraint: &Constraint, window: usize) -> Result<Self> {
        Self::check(f, constraint, window)?;
        let blocks = block_structure(constraint);
        Ok(ReducedKernel {
            inner: f.clone(),
            arity: blocks.count,
            parts: vec![blocks],
            window,
        })
    }

    /// Reduce the bounded constraint `D` as the sum over its exact
    /// sub-constraints; all parts share the same block count and window.
    pub fn full(f: &Kernel, constraint: &Constraint, window: usize) -> Result<Self> {
        Self::check(f, constraint, window)?;
        let parts: Vec<BlockStructure> = constraint
            .exact_subconstraints()
            .iter()
            .map(block_structure)
            .collect();
        Ok(ReducedKernel {
            inner: f.clone(),
            arity: constraint.block_count(),
            parts,
            window,
        })
    }

    fn check(f: &Kernel, constraint: &Constraint, window: usize) -> Result<()> {
        if f.arity() != constraint.ell() {
            return Err(Error::ArityMismatch {
                arity: f.arity(),
                got: constraint.ell(),
            });
        }
        if window <= constraint.gap_sum() {
            return Err(Error::WindowTooSmall {
                window,
                gap_sum: constraint.gap_sum(),
            });
        }
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn window_len(&self) -> usize {
        self.window
    }

    pub fn inner(&self) -> &Kernel {
        &self.inner
    }

    pub fn parts(&self) -> &[BlockStructure] {
        &self.parts
    }

    pub fn domain(&self) -> Domain {
        self.inner.domain()
    }

    pub fn integer_valued(&self) -> bool {
        self.inner.integer_valued()
    }

    /// Evaluate on `arity` windows of symbols.
    pub fn eval_windows_sym(&self, windows: &[&[u32]]) -> f64 {
        debug_assert_eq!(windows.len(), self.arity);
        let ell = self.inner.arity();
        let mut args = vec![0u32; ell];
        let mut total = 0.0;
        for part in &self.parts {
            let mut slot = 0;
            for q in 0..part.count {
                for r in 0..part.lengths[q] {
                    args[slot] = windows[q][part.shifts[q] + part.offsets[q][r]];
                    slot += 1;
                }
            }
            total += self.inner.eval_sym(&args);
        }
        total
    }

    /// Evaluate on `arity` windows of reals.
    pub fn eval_windows_real(&self, windows: &[&[f64]]) -> f64 {
        debug_assert_eq!(windows.len(), self.arity);
        let ell = self.inner.arity();
        let mut args = vec![0.0f64; ell];
        let mut total = 0.0;
        for part in &self.parts {
            let mut slot = 0;
            for q in 0..part.count {
                for r in 0..part.lengths[q] {
                    args[slot] = windows[q][part.shifts[q] + part.offsets[q][r]];
                    slot += 1;
                }
            }
            total += self.inner.eval_real(&args);
        }
        total
    }
}

/// Unconstrained U-statistic of a reduced kernel over the first `n_eff`
/// windows of a lifted sequence.
pub fn u_stat_on_windows(
    g: &ReducedKernel,
    lifted: &LiftedSequence<'_>,
    n_eff: usize,
    opts: &EvalOptions,
) -> Result<Value> {
    let n = n_eff.min(lifted.len());
    let b = g.arity();
    let count = crate::eval::binomial_u128(n as u128, b as u128);
    if count > opts.budget {
        return Err(Error::BudgetExceeded {
            needed: count,
            budget: opts.budget,
            unit: "term evaluations",
        });
    }
    let integer = g.integer_valued();
    let mut acc_int: i128 = 0;
    let mut acc_real = 0.0f64;
    let mut overflowed = false;
    let mut windows: Vec<usize> = (0..b).collect();
    let mut big = num_bigint::BigInt::from(0);
    if n >= b && b > 0 {
        loop {
            let term = match g.domain() {
                Domain::Finite(_) => {
                    let views: Vec<&[u32]> = windows
                        .iter()
                        .map(|&i| lifted.window_syms(i).expect("symbol sequence"))
                        .collect();
                    g.eval_windows_sym(&views)
                }
                Domain::RealOrder => {
                    let views: Vec<&[f64]> = windows
                        .iter()
                        .map(|&i| lifted.window_reals(i).expect("real sequence"))
                        .collect();
                    g.eval_windows_real(&views)
                }
            };
            if integer {
                if overflowed {
                    big += num_bigint::BigInt::from(term as i128);
                } else {
                    match acc_int.checked_add(term as i128) {
                        Some(v) => acc_int = v,
                        None if opts.bigint => {
                            big = num_bigint::BigInt::from(acc_int)
                                + num_bigint::BigInt::from(term as i128);
                            overflowed = true;
                        }
                        None => return Err(Error::Overflow),
                    }
                }
            } else {
                acc_real += term;
            }
            // Next combination of window indices.
            let mut k = b;
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                if windows[k] + 1 <= n - (b - k) {
                    windows[k] += 1;
                    for j in k + 1..b {
                        windows[j] = windows[j - 1] + 1;
                    }
                    break;
                }
                if k == 0 {
                    return Ok(finish(integer, overflowed, acc_int, big, acc_real));
                }
            }
        }
    }
    Ok(finish(integer, overflowed, acc_int, big, acc_real))
}

fn finish(
    integer: bool,
    overflowed: bool,
    acc_int: i128,
    big: num_bigint::BigInt,
    acc_real: f64,
) -> Value {
    if integer {
        if overflowed {
            Value::Big(big)
        } else {
            Value::Int(acc_int)
        }
    } else {
        Value::Real(acc_real)
    }
}

/// `U_n(f; D=)` computed through the window reduction; equals the direct
/// exactly-constrained evaluation for every `n`, with value 0 when the
/// sequence is shorter than the gap sum.
pub fn exactly_constrained_via_reduction(
    f: &Kernel,
    constraint: &Constraint,
    xs: &ObsSeq,
    opts: &EvalOptions,
) -> Result<Value> {
    let d = constraint.gap_sum();
    let window = d + 1;
    let g = ReducedKernel::exact(f, constraint, window)?;
    if xs.len() < window {
        return Ok(zero_like(f));
    }
    let lifted = lift(xs, window)?;
    let n_eff = xs.len() - d;
    u_stat_on_windows(&g, &lifted, n_eff, opts)
}

/// `U_n(f; D)` computed through the window reduction over all exact
/// sub-constraints.
pub fn constrained_via_reduction(
    f: &Kernel,
    constraint: &Constraint,
    xs: &ObsSeq,
    opts: &EvalOptions,
) -> Result<Value> {
    let d = constraint.gap_sum();
    let window = d + 1;
    if xs.len() < window {
        // Short sequences may still admit tuples under smaller
        // sub-constraints; fall back to summing their reductions.
        let mut parts = Vec::new();
        for sub in constraint.exact_subconstraints() {
            parts.push(exactly_constrained_via_reduction(f, &sub, xs, opts)?);
        }
        return Ok(sum_values(f, parts));
    }
    // All sub-constraints share the window, but each keeps its own index
    // shift n - D'; sum their individual reductions.
    let mut parts = Vec::new();
    for sub in constraint.exact_subconstraints() {
        parts.push(exactly_constrained_via_reduction(f, &sub, xs, opts)?);
    }
    Ok(sum_values(f, parts))
}

fn zero_like(f: &Kernel) -> Value {
    if f.integer_valued() {
        Value::Int(0)
    } else {
        Value::Real(0.0)
    }
}

fn sum_values(f: &Kernel, parts: Vec<Value>) -> Value {
    if f.integer_valued() {
        let mut acc = num_bigint::BigInt::from(0);
        for p in parts {
            acc += p.to_big().expect("integer parts");
        }
        use num_traits::ToPrimitive;
        match acc.to_i128() {
            Some(v) => Value::Int(v),
            None => Value::Big(acc),
        }
    } else {
        Value::Real(parts.iter().map(|p| p.as_f64()).sum())
    }
}
