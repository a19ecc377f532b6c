//! Naive reference evaluators for (constrained) U-statistics.
//!
//! These enumerate index tuples directly and serve as the exact oracle for
//! the fast counters in `patterns`. A budget guard rejects enumerations that
//! would be too large instead of silently grinding.

use num_bigint::BigInt;

use crate::constraint::{Constraint, Gap};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::seq::ObsSeq;

/// Options for the naive evaluators.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Maximum number of term evaluations.
    pub budget: u128,
    /// Escalate the 128-bit integer accumulator to arbitrary precision on
    /// overflow instead of failing.
    pub bigint: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            budget: 1_000_000_000,
            bigint: false,
        }
    }
}

/// Result of a U-statistic evaluation: exact integers for integer-valued
/// kernels, double precision otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i128),
    Big(BigInt),
    Real(f64),
}

impl Value {
    pub fn as_f64(&self) -> f64 {
        match self {
            Value::Int(v) => *v as f64,
            Value::Big(v) => {
                use num_traits::ToPrimitive;
                v.to_f64().unwrap_or(f64::NAN)
            }
            Value::Real(v) => *v,
        }
    }

    pub fn to_big(&self) -> Option<BigInt> {
        match self {
            Value::Int(v) => Some(BigInt::from(*v)),
            Value::Big(v) => Some(v.clone()),
            Value::Real(_) => None,
        }
    }

    /// Exact equality: integer values compare exactly, reals bitwise.
    pub fn exact_eq(&self, other: &Value) -> bool {
        match (self.to_big(), other.to_big()) {
            (Some(a), Some(b)) => a == b,
            _ => self.as_f64() == other.as_f64(),
        }
    }
}

enum Acc {
    Int(i128),
    Big(BigInt),
    Real(f64),
}

impl Acc {
    fn new(integer: bool) -> Self {
        if integer {
            Acc::Int(0)
        } else {
            Acc::Real(0.0)
        }
    }

    fn add(&mut self, term: f64, allow_big: bool) -> Result<()> {
        match self {
            Acc::Real(acc) => {
                *acc += term;
                Ok(())
            }
            Acc::Int(acc) => {
                debug_assert_eq!(term.fract(), 0.0);
                match acc.checked_add(term as i128) {
                    Some(v) => {
                        *acc = v;
                        Ok(())
                    }
                    None if allow_big => {
                        let big = BigInt::from(*acc) + BigInt::from(term as i128);
                        *self = Acc::Big(big);
                        Ok(())
                    }
                    None => Err(Error::Overflow),
                }
            }
            Acc::Big(acc) => {
                *acc += BigInt::from(term as i128);
                Ok(())
            }
        }
    }

    fn finish(self) -> Value {
        match self {
            Acc::Int(v) => Value::Int(v),
            Acc::Big(v) => Value::Big(v),
            Acc::Real(v) => Value::Real(v),
        }
    }
}

/// Gap rule applied between consecutive indices.
#[derive(Debug, Clone, Copy)]
enum GapRule<'a> {
    /// No restriction.
    Free,
    /// `i_{j+1} - i_j <= d_j` for finite entries.
    AtMost(&'a [Gap]),
    /// `i_{j+1} - i_j = d_j` for finite entries.
    Exact(&'a [Gap]),
    /// All gaps `> m`.
    Above(usize),
}

impl GapRule<'_> {
    /// Inclusive range of allowed next indices after `prev`.
    fn next_range(&self, slot: usize, prev: usize, n: usize) -> (usize, usize) {
        match self {
            GapRule::Free => (prev + 1, n),
            GapRule::AtMost(gaps) => match gaps[slot - 1] {
                Gap::Finite(d) => (prev + 1, (prev + d).min(n)),
                Gap::Unbounded => (prev + 1, n),
            },
            GapRule::Exact(gaps) => match gaps[slot - 1] {
                Gap::Finite(d) => (prev + d, (prev + d).min(n)),
                Gap::Unbounded => (prev + 1, n),
            },
            GapRule::Above(m) => (prev + m + 1, n),
        }
    }
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial_u128(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Cheap upper bound on the number of admissible tuples, used for the budget
/// guard before enumeration starts.
fn tuple_count_bound(n: usize, ell: usize, rule: &GapRule) -> u128 {
    let n = n as u128;
    let ell_u = ell as u128;
    match rule {
        GapRule::Free => binomial_u128(n, ell_u),
        GapRule::Above(m) => {
            let shrink = (ell as u128 - 1) * (*m as u128);
            if n >= shrink {
                binomial_u128(n - shrink, ell_u)
            } else {
                0
            }
        }
        GapRule::AtMost(gaps) => {
            let b = 1 + gaps.iter().filter(|g| !g.is_finite()).count() as u128;
            let prod: u128 = gaps
                .iter()
                .map(|g| match g {
                    Gap::Finite(d) => *d as u128,
                    Gap::Unbounded => 1,
                })
                .product();
            binomial_u128(n, b).saturating_mul(prod).min(binomial_u128(n, ell_u))
        }
        GapRule::Exact(gaps) => {
            let b = 1 + gaps.iter().filter(|g| !g.is_finite()).count() as u128;
            let d: u128 = gaps
                .iter()
                .map(|g| match g {
                    Gap::Finite(d) => *d as u128,
                    Gap::Unbounded => 0,
                })
                .sum();
            if n >= d {
                binomial_u128(n - d, b)
            } else {
                0
            }
        }
    }
}

fn sum_over_tuples(
    n: usize,
    ell: usize,
    rule: GapRule,
    opts: &EvalOptions,
    integer: bool,
    term: &mut dyn FnMut(&[usize]) -> f64,
) -> Result<Value> {
    if ell > 6 {
        return Err(Error::BudgetExceeded {
            needed: ell as u128,
            budget: 6,
            unit: "kernel arity (naive evaluator supports arity <= 6)",
        });
    }
    let bound = tuple_count_bound(n, ell, &rule);
    if bound > opts.budget {
        return Err(Error::BudgetExceeded {
            needed: bound,
            budget: opts.budget,
            unit: "term evaluations",
        });
    }
    let mut acc = Acc::new(integer);
    if n < ell {
        return Ok(acc.finish());
    }
    // Indices are 1-based during enumeration to match the gap arithmetic.
    let mut idx = vec![0usize; ell];
    let mut slot = 0usize;
    let mut lo = 1usize;
    let mut hi = n;
    loop {
        if lo > hi {
            // Backtrack.
            if slot == 0 {
                break;
            }
            slot -= 1;
            let resume = idx[slot] + 1;
            if slot == 0 {
                lo = resume;
                hi = n;
            } else {
                let (_, h) = rule.next_range(slot, idx[slot - 1], n);
                lo = resume;
                hi = h;
            }
            continue;
        }
        idx[slot] = lo;
        if slot + 1 == ell {
            acc.add(term(&idx), opts.bigint)?;
            lo += 1;
        } else {
            slot += 1;
            let (l, h) = rule.next_range(slot, idx[slot - 1], n);
            lo = l;
            hi = h;
        }
    }
    Ok(acc.finish())
}

fn run(f: &Kernel, xs: &ObsSeq, rule: GapRule, opts: &EvalOptions) -> Result<Value> {
    xs.check_kernel(f)?;
    let ell = f.arity();
    let integer = f.integer_valued();
    let mut args_sym: Vec<u32> = vec![0; ell];
    let mut args_real: Vec<f64> = vec![0.0; ell];
    match xs {
        ObsSeq::Symbols { data, .. } => sum_over_tuples(
            data.len(),
            ell,
            rule,
            opts,
            integer,
            &mut |idx: &[usize]| {
                for (a, &i) in args_sym.iter_mut().zip(idx) {
                    *a = data[i - 1];
                }
                f.eval_sym(&args_sym)
            },
        ),
        ObsSeq::Reals(data) => sum_over_tuples(
            data.len(),
            ell,
            rule,
            opts,
            integer,
            &mut |idx: &[usize]| {
                for (a, &i) in args_real.iter_mut().zip(idx) {
                    *a = data[i - 1];
                }
                f.eval_real(&args_real)
            },
        ),
    }
}

/// Sum of `f` over all increasing index tuples; 0 when `n < arity`.
pub fn u_stat(f: &Kernel, xs: &ObsSeq, opts: &EvalOptions) -> Result<Value> {
    run(f, xs, GapRule::Free, opts)
}

/// Sum restricted to `i_{j+1} - i_j <= d_j` for every finite gap bound.
pub fn u_stat_constrained(
    f: &Kernel,
    constraint: &Constraint,
    xs: &ObsSeq,
    opts: &EvalOptions,
) -> Result<Value> {
    check_arity(f, constraint)?;
    run(f, xs, GapRule::AtMost(constraint.gaps()), opts)
}

/// Sum restricted to `i_{j+1} - i_j = d_j` for every finite gap bound.
pub fn u_stat_exactly_constrained(
    f: &Kernel,
    constraint: &Constraint,
    xs: &ObsSeq,
    opts: &EvalOptions,
) -> Result<Value> {
    check_arity(f, constraint)?;
    run(f, xs, GapRule::Exact(constraint.gaps()), opts)
}

/// Sum restricted to all gaps `> m`; `m = 0` recovers the plain U-statistic.
pub fn u_stat_min_gap(f: &Kernel, m: usize, xs: &ObsSeq, opts: &EvalOptions) -> Result<Value> {
    run(f, xs, GapRule::Above(m), opts)
}

fn check_arity(f: &Kernel, constraint: &Constraint) -> Result<()> {
    if f.arity() != constraint.ell() {
        return Err(Error::ArityMismatch {
            arity: f.arity(),
            got: constraint.ell(),
        });
    }
    Ok(())
}
