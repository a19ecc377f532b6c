//! Asymptotic means and variances of (constrained) U-statistics via
//! one-variable projections, lag covariances, and Beta-integral weights,
//! plus the degeneracy diagnostics.
//!
//! For finite-alphabet models every quantity is an exact expectation
//! computed by state enumeration (block factors enumerate their base
//! letters). Order-based kernels get exact rational polynomials in the
//! unconstrained case and a common-random-numbers Monte-Carlo estimator
//! under constraints.

mod finite;
mod mc;
mod realorder;

pub use realorder::sigma2_rational;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::constraint::{Constraint, Mode};
use crate::error::{Error, Result};
use crate::eval::binomial_u128;
use crate::kernel::{Domain, Kernel};
use crate::linalg;
use crate::model::SequenceModel;
use crate::poly::{factorial, RatPoly};

/// Which statistic a moment computation refers to.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Unconstrained,
    Constrained(&'a Constraint, Mode),
}

impl<'a> Target<'a> {
    fn constraint_mode(&self, ell: usize) -> (Constraint, Mode) {
        match self {
            Target::Unconstrained => (Constraint::unconstrained(ell), Mode::Bounded),
            Target::Constrained(d, mode) => ((*d).clone(), *mode),
        }
    }
}

/// Options for the moment engine.
#[derive(Debug, Clone)]
pub struct MomentOptions {
    /// Maximum number of enumerated joint states before falling back to MC.
    pub state_budget: u128,
    /// Outer Monte-Carlo replicates for estimated covariances.
    pub mc_outer: usize,
    /// Inner replicates per conditional-expectation estimate.
    pub mc_inner: usize,
    pub seed: u64,
    /// Most negative sigma^2 treated as roundoff and clamped to 0.
    pub negative_tolerance: f64,
    /// Degeneracy threshold on the summed-covariance matrix in exact mode.
    pub degeneracy_tolerance: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            state_budget: 10_000_000,
            mc_outer: 20_000,
            mc_inner: 64,
            seed: 0x5eed,
            negative_tolerance: 1e-10,
            degeneracy_tolerance: 1e-10,
        }
    }
}

/// A value with an optional Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, se: None }
    }
}

/// One-variable projections of a kernel (or of its window reduction).
#[derive(Debug, Clone, Serialize)]
pub enum ProjectionTable {
    /// Exact tables over window codes; `window == 1` in the unconstrained
    /// case, so codes are single symbols.
    Finite {
        slots: usize,
        window: usize,
        alphabet_size: usize,
        /// `tables[slot][window_code]`.
        tables: Vec<Vec<f64>>,
        /// Law of one window, by code.
        window_dist: Vec<f64>,
    },
    /// Exact polynomials on (0,1), one per slot.
    Polynomial {
        slots: usize,
        #[serde(skip)]
        polys: Vec<RatPoly>,
        /// Coefficients (ascending powers) for reporting.
        coeffs: Vec<Vec<f64>>,
    },
    /// Monte-Carlo point estimates of the window projections at sampled
    /// window points, with per-point standard errors.
    McPoints {
        slots: usize,
        window: usize,
        points: Vec<Vec<f64>>,
        values: Vec<Vec<f64>>,
        ses: Vec<Vec<f64>>,
    },
}

impl ProjectionTable {
    pub fn slots(&self) -> usize {
        match self {
            ProjectionTable::Finite { slots, .. }
            | ProjectionTable::Polynomial { slots, .. }
            | ProjectionTable::McPoints { slots, .. } => *slots,
        }
    }

    /// Largest |E f_i| over slots; exact representations must be centered.
    pub fn centering_error(&self) -> f64 {
        match self {
            ProjectionTable::Finite {
                tables,
                window_dist,
                ..
            } => tables
                .iter()
                .map(|t| {
                    t.iter()
                        .zip(window_dist)
                        .map(|(v, p)| v * p)
                        .sum::<f64>()
                        .abs()
                })
                .fold(0.0, f64::max),
            ProjectionTable::Polynomial { polys, .. } => polys
                .iter()
                .map(|p| p.integral01().to_f64().unwrap_or(f64::NAN).abs())
                .fold(0.0, f64::max),
            ProjectionTable::McPoints { .. } => f64::NAN,
        }
    }

    /// Evaluate slot `i` at a window code (finite tables only).
    pub fn finite_value(&self, slot: usize, code: usize) -> Option<f64> {
        match self {
            ProjectionTable::Finite { tables, .. } => Some(tables[slot][code]),
            _ => None,
        }
    }
}

/// Lag covariances of the projections:
/// `gamma(i, j, r) = Cov(f_i(X_k), f_j(X_{k+r}))` for `|r| <= m_eff`.
#[derive(Debug, Clone, Serialize)]
pub struct GammaArray {
    pub slots: usize,
    pub m_eff: usize,
    /// Row-major `[i][j][r + m_eff]`.
    pub values: Vec<f64>,
    pub exact: bool,
    /// Standard errors in MC mode, same layout.
    pub se: Option<Vec<f64>>,
}

impl GammaArray {
    pub fn new_zero(slots: usize, m_eff: usize, exact: bool) -> Self {
        GammaArray {
            slots,
            m_eff,
            values: vec![0.0; slots * slots * (2 * m_eff + 1)],
            exact,
            se: None,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, r: isize) -> usize {
        debug_assert!(r.unsigned_abs() <= self.m_eff);
        (i * self.slots + j) * (2 * self.m_eff + 1) + (r + self.m_eff as isize) as usize
    }

    pub fn get(&self, i: usize, j: usize, r: isize) -> f64 {
        self.values[self.index(i, j, r)]
    }

    pub fn set(&mut self, i: usize, j: usize, r: isize, v: f64) {
        let idx = self.index(i, j, r);
        self.values[idx] = v;
    }

    /// Largest violation of the stationarity symmetry
    /// `gamma(i,j,r) = gamma(j,i,-r)`.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.slots {
            for j in 0..self.slots {
                for r in -(self.m_eff as isize)..=(self.m_eff as isize) {
                    worst = worst.max((self.get(i, j, r) - self.get(j, i, -r)).abs());
                }
            }
        }
        worst
    }

    /// Summed-covariance matrix `b_ij = sum_r gamma(i,j,r)`, row-major.
    pub fn b_matrix(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.slots * self.slots];
        for i in 0..self.slots {
            for j in 0..self.slots {
                let mut acc = 0.0;
                for r in -(self.m_eff as isize)..=(self.m_eff as isize) {
                    acc += self.get(i, j, r);
                }
                b[i * self.slots + j] = acc;
            }
        }
        b
    }

    /// Standard errors of the `b_ij` entries, if estimated.
    pub fn b_matrix_se(&self) -> Option<Vec<f64>> {
        let se = self.se.as_ref()?;
        let mut out = vec![0.0; self.slots * self.slots];
        for i in 0..self.slots {
            for j in 0..self.slots {
                let mut acc = 0.0;
                for r in -(self.m_eff as isize)..=(self.m_eff as isize) {
                    let s = se[self.index(i, j, r)];
                    acc += s * s;
                }
                out[i * self.slots + j] = acc.sqrt();
            }
        }
        Some(out)
    }
}

/// Degeneracy verdict under the standard normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Degenerate,
    NonDegenerate,
    /// MC error too large to distinguish zero from small.
    Inconclusive,
}

/// Everything the variance computation produced, with method tags.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub mu: f64,
    pub mu_exact_constrained: Estimate,
    pub mu_constrained: Estimate,
    pub sigma2: f64,
    pub sigma2_se: Option<f64>,
    /// Effective slot count: kernel arity unconstrained, block count after
    /// reduction.
    pub slots: usize,
    pub m_eff: usize,
    pub window: usize,
    pub block_count: usize,
    pub beta: Vec<Vec<f64>>,
    pub gamma: GammaArray,
    pub b_matrix: Vec<Vec<f64>>,
    pub b_matrix_max_abs: f64,
    pub b_matrix_se_max: Option<f64>,
    pub psd_min_eigenvalue: f64,
    pub centering_error: f64,
    pub projections: ProjectionTable,
    pub verdict: Verdict,
    pub exact: bool,
}

/// Exact Beta integral of two slot polynomials:
/// `int_0^1 psi_i psi_j = (i+j-2)!(2l-i-j)! / ((i-1)!(j-1)!(l-i)!(l-j)!(2l-1)!)`
/// with 1-based `i, j`.
pub fn beta_inner(i: usize, j: usize, ell: usize) -> BigRational {
    assert!(1 <= i && i <= ell && 1 <= j && j <= ell);
    let num = factorial(i + j - 2) * factorial(2 * ell - i - j);
    let den = factorial(i - 1)
        * factorial(j - 1)
        * factorial(ell - i)
        * factorial(ell - j)
        * factorial(2 * ell - 1);
    BigRational::new(num, den)
}

/// The slot weight polynomial `psi_j(x) = x^{j-1}(1-x)^{l-j}/((j-1)!(l-j)!)`.
pub fn psi_poly(j: usize, ell: usize) -> RatPoly {
    RatPoly::beta_term(j - 1, ell - j)
}

fn beta_matrix_f64(ell: usize) -> Vec<Vec<f64>> {
    (1..=ell)
        .map(|i| {
            (1..=ell)
                .map(|j| beta_inner(i, j, ell).to_f64().unwrap())
                .collect()
        })
        .collect()
}

fn check_domains(f: &Kernel, model: &SequenceModel) -> Result<()> {
    f.validate()?;
    match (f.domain(), model.is_finite()) {
        (Domain::Finite(a), true) => {
            let size = model.alphabet_size().unwrap();
            if a != size {
                Err(Error::AlphabetMismatch {
                    expected: a,
                    found: size,
                })
            } else {
                Ok(())
            }
        }
        (Domain::RealOrder, false) => Ok(()),
        _ => Err(Error::InvalidInput(
            "kernel domain does not match the sequence model".into(),
        )),
    }
}

/// `E f(X^_1, ..., X^_l)` over independent copies of the marginal law.
pub fn mu(f: &Kernel, model: &SequenceModel, opts: &MomentOptions) -> Result<Estimate> {
    check_domains(f, model)?;
    match f.domain() {
        Domain::Finite(_) => Ok(Estimate::exact(finite::mu_finite(
            f,
            model,
            opts.state_budget,
        )?)),
        Domain::RealOrder => Ok(Estimate::exact(realorder::mu_analytic(f)?)),
    }
}

/// Mean of one exactly-constrained term with well-separated blocks; equals
/// `mu` for independent models.
pub fn mu_exactly_constrained(
    f: &Kernel,
    constraint: &Constraint,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<Estimate> {
    check_domains(f, model)?;
    check_kernel_constraint(f, constraint)?;
    if model.dependence() == 0 {
        return mu(f, model, opts);
    }
    Ok(Estimate::exact(finite::mu_exactly_constrained_finite(
        f,
        constraint,
        model,
        opts.state_budget,
    )?))
}

/// Mean coefficient of a bounded constraint: the sum over its exact
/// sub-constraints; the product form `mu * prod d_j` for independent models.
pub fn mu_constrained(
    f: &Kernel,
    constraint: &Constraint,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<Estimate> {
    check_domains(f, model)?;
    check_kernel_constraint(f, constraint)?;
    let product = constraint.exact_subconstraint_count();
    if model.dependence() == 0 {
        let base = mu(f, model, opts)?;
        return Ok(Estimate {
            value: base.value * product as f64,
            se: base.se.map(|s| s * product as f64),
        });
    }
    if product > 1_000_000 {
        return Err(Error::BudgetExceeded {
            needed: product,
            budget: 1_000_000,
            unit: "exact sub-constraints",
        });
    }
    let mut total = 0.0;
    for sub in constraint.exact_subconstraints() {
        total += finite::mu_exactly_constrained_finite(f, &sub, model, opts.state_budget)?;
    }
    Ok(Estimate::exact(total))
}

/// Expected value of the statistic at sample size `n`, exact for
/// independent models and a leading-order term otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedUn {
    pub value: f64,
    pub exact: bool,
    /// Power of the error term when not exact: `O(n^error_order)`.
    pub error_order: Option<u32>,
}

pub fn expected_un(
    f: &Kernel,
    target: Target<'_>,
    n: usize,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<ExpectedUn> {
    check_domains(f, model)?;
    let ell = f.arity();
    let (constraint, mode) = target.constraint_mode(ell);
    check_kernel_constraint(f, &constraint)?;
    let b = constraint.block_count();
    if model.dependence() == 0 {
        let mu0 = mu(f, model, opts)?.value;
        let value = match (constraint.is_unconstrained(), mode) {
            (true, _) => binomial_f64(n, ell) * mu0,
            (false, Mode::Exact) => {
                binomial_shifted(n, constraint.gap_sum(), b) * mu0
            }
            (false, Mode::Bounded) => {
                if constraint.exact_subconstraint_count() > 1_000_000 {
                    return Err(Error::BudgetExceeded {
                        needed: constraint.exact_subconstraint_count(),
                        budget: 1_000_000,
                        unit: "exact sub-constraints",
                    });
                }
                let total: f64 = constraint
                    .exact_subconstraints()
                    .iter()
                    .map(|sub| binomial_shifted(n, sub.gap_sum(), b))
                    .sum();
                total * mu0
            }
        };
        return Ok(ExpectedUn {
            value,
            exact: true,
            error_order: None,
        });
    }
    let coeff = match mode {
        Mode::Bounded => mu_constrained(f, &constraint, model, opts)?.value,
        Mode::Exact => mu_exactly_constrained(f, &constraint, model, opts)?.value,
    };
    let lead = (n as f64).powi(b as i32) / factorial(b).to_f64().unwrap();
    Ok(ExpectedUn {
        value: lead * coeff,
        exact: false,
        error_order: Some(b.saturating_sub(1) as u32),
    })
}

fn binomial_f64(n: usize, k: usize) -> f64 {
    binomial_u128(n as u128, k as u128) as f64
}

fn binomial_shifted(n: usize, shift: usize, k: usize) -> f64 {
    if n < shift {
        0.0
    } else {
        binomial_f64(n - shift, k)
    }
}

/// One-variable projections `f_i(x) = E f(X^_1,...,x,...,X^_l) - mu`.
pub fn projections(
    f: &Kernel,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<ProjectionTable> {
    check_domains(f, model)?;
    match f.domain() {
        Domain::Finite(_) => finite::projections_finite(f, model, opts.state_budget),
        Domain::RealOrder => realorder::projections_polys(f),
    }
}

/// Projections of the window reduction of a constrained statistic; reduces
/// to `projections` when the constraint is fully unbounded.
pub fn reduced_projections(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<ProjectionTable> {
    check_domains(f, model)?;
    check_kernel_constraint(f, constraint)?;
    if constraint.is_unconstrained() {
        return projections(f, model, opts);
    }
    match f.domain() {
        Domain::Finite(_) => {
            finite::reduced_projections_finite(f, constraint, mode, model, opts.state_budget)
        }
        Domain::RealOrder => mc::reduced_projections_mc(f, constraint, mode, model, opts),
    }
}

/// Lag covariances of exact projection tables under the model.
pub fn gamma_array(
    proj: &ProjectionTable,
    model: &SequenceModel,
    m_eff: usize,
    opts: &MomentOptions,
) -> Result<GammaArray> {
    match proj {
        ProjectionTable::Finite { .. } => {
            finite::gamma_finite(proj, model, m_eff, opts.state_budget)
        }
        ProjectionTable::Polynomial { polys, .. } => {
            if m_eff != 0 {
                return Err(Error::InvalidInput(
                    "polynomial projections imply an independent model (m_eff = 0)".into(),
                ));
            }
            Ok(realorder::gamma_polys(polys))
        }
        ProjectionTable::McPoints { .. } => Err(Error::InvalidInput(
            "MC projections carry no exact law; use sigma2, which estimates \
             the covariances directly"
                .into(),
        )),
    }
}

/// Variance of the limiting process of the partial-path statistic at time
/// `t`: `t^{2b-1} sigma^2`.
pub fn var_z(t: f64, sigma2: f64, b: usize) -> f64 {
    assert!(t >= 0.0);
    t.powi(2 * b as i32 - 1) * sigma2
}

fn check_kernel_constraint(f: &Kernel, constraint: &Constraint) -> Result<()> {
    if f.arity() != constraint.ell() {
        return Err(Error::ArityMismatch {
            arity: f.arity(),
            got: constraint.ell(),
        });
    }
    Ok(())
}

/// Full asymptotic-variance computation: projections, lag covariances,
/// Beta weights, degeneracy verdict, and every intermediate.
pub fn sigma2(
    f: &Kernel,
    target: Target<'_>,
    model: &SequenceModel,
    opts: &MomentOptions,
) -> Result<MomentReport> {
    check_domains(f, model)?;
    let ell = f.arity();
    let (constraint, mode) = target.constraint_mode(ell);
    check_kernel_constraint(f, &constraint)?;
    let b = constraint.block_count();
    let gap_sum = constraint.gap_sum();
    let window = gap_sum + 1;
    let m_eff = model.dependence() + gap_sum;

    let mu0 = mu(f, model, opts)?.value;
    let mu_exact = mu_exactly_constrained(f, &constraint, model, opts)?;
    let mu_bound = mu_constrained(f, &constraint, model, opts)?;

    // Projections and covariances, exact where the state space allows.
    let (proj, gamma, sigma2_se) = if constraint.is_unconstrained() {
        let proj = projections(f, model, opts)?;
        let gamma = gamma_array(&proj, model, m_eff, opts)?;
        (proj, gamma, None)
    } else {
        match f.domain() {
            Domain::Finite(_) => {
                match finite::reduced_projections_finite(
                    f,
                    &constraint,
                    mode,
                    model,
                    opts.state_budget,
                ) {
                    Ok(proj) => {
                        let gamma = gamma_array(&proj, model, m_eff, opts)?;
                        (proj, gamma, None)
                    }
                    Err(Error::BudgetExceeded { .. }) => {
                        let (proj, gamma, se) =
                            mc::constrained_gamma_mc(f, &constraint, mode, model, opts)?;
                        (proj, gamma, Some(se))
                    }
                    Err(e) => return Err(e),
                }
            }
            Domain::RealOrder => {
                let (proj, gamma, se) =
                    mc::constrained_gamma_mc(f, &constraint, mode, model, opts)?;
                (proj, gamma, Some(se))
            }
        }
    };

    let slots = gamma.slots;
    debug_assert_eq!(slots, b);
    let beta = beta_matrix_f64(slots);
    let b_mat = gamma.b_matrix();
    let mut total = 0.0;
    for i in 0..slots {
        for j in 0..slots {
            total += beta[i][j] * b_mat[i * slots + j];
        }
    }
    let sigma2 = if total < 0.0 {
        if total >= -opts.negative_tolerance {
            0.0
        } else if sigma2_se.is_some_and(|se| total >= -4.0 * se) {
            // MC noise can push a degenerate variance slightly negative.
            0.0
        } else {
            return Err(Error::NegativeVariance(total));
        }
    } else {
        total
    };

    let b_max = b_mat.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let b_se = gamma.b_matrix_se();
    let b_se_max = b_se
        .as_ref()
        .map(|se| se.iter().fold(0.0f64, |a, &v| a.max(v)));
    let psd_min = linalg::min_symmetric_eigenvalue(&symmetrized(&b_mat, slots), slots);
    let centering = proj.centering_error();
    let verdict = verdict_from(b_max, b_se_max, gamma.exact, opts.degeneracy_tolerance);

    Ok(MomentReport {
        mu: mu0,
        mu_exact_constrained: mu_exact,
        mu_constrained: mu_bound,
        sigma2,
        sigma2_se,
        slots,
        m_eff,
        window,
        block_count: b,
        beta,
        b_matrix: chunk(&b_mat, slots),
        b_matrix_max_abs: b_max,
        b_matrix_se_max: b_se_max,
        psd_min_eigenvalue: psd_min,
        centering_error: centering,
        gamma,
        projections: proj,
        verdict,
        exact: sigma2_se.is_none(),
    })
}

fn symmetrized(b: &[f64], n: usize) -> Vec<f64> {
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            s[i * n + j] = 0.5 * (b[i * n + j] + b[j * n + i]);
        }
    }
    s
}

fn chunk(b: &[f64], n: usize) -> Vec<Vec<f64>> {
    b.chunks(n).map(|row| row.to_vec()).collect()
}

fn verdict_from(b_max: f64, b_se_max: Option<f64>, exact: bool, tol: f64) -> Verdict {
    if exact {
        if b_max <= tol {
            Verdict::Degenerate
        } else {
            Verdict::NonDegenerate
        }
    } else {
        let se = b_se_max.unwrap_or(f64::INFINITY);
        if b_max > 3.0 * se {
            Verdict::NonDegenerate
        } else {
            Verdict::Inconclusive
        }
    }
}

/// Re-apply the degeneracy rule to a report with a caller tolerance.
pub fn degeneracy_test(report: &MomentReport, tol: f64) -> Verdict {
    verdict_from(
        report.b_matrix_max_abs,
        report.b_matrix_se_max,
        report.exact,
        tol,
    )
}

#[cfg(test)]
mod tests;
