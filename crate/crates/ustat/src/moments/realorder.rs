//! Closed-form moments for order-based kernels over i.i.d. uniform(0,1):
//! means and one-variable projections are exact rational polynomials.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::poly::{factorial, RatPoly};

use super::{GammaArray, ProjectionTable};

fn rat_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidInput(format!("non-finite coefficient {x}")))
}

/// Exact mean of an order-based kernel under i.i.d. continuous inputs.
pub fn mu_analytic(f: &Kernel) -> Result<f64> {
    Ok(mu_rational(f)?.to_f64().unwrap())
}

fn mu_rational(f: &Kernel) -> Result<BigRational> {
    match f {
        Kernel::PermPattern { pattern } => Ok(BigRational::new(
            BigInt::one(),
            factorial(pattern.len()),
        )),
        Kernel::Sign { arity } => {
            // Equally many even and odd orderings once two slots can swap.
            if *arity <= 1 {
                Ok(BigRational::one())
            } else {
                Ok(BigRational::zero())
            }
        }
        Kernel::Linear(parts) => {
            let mut acc = BigRational::zero();
            for (c, k) in parts {
                acc += rat_from_f64(*c)? * mu_rational(k)?;
            }
            Ok(acc)
        }
        _ => Err(Error::InvalidInput(
            "analytic mean requires an order-based kernel".into(),
        )),
    }
}

/// Exact projection polynomials `f_i(x)` for order-based kernels.
///
/// For a pattern with rank `tau_i` in slot `i`, conditioning on `x` leaves
/// `tau_i - 1` prescribed slots below and the rest above, each in one fixed
/// relative order, so
/// `f_i(x) = x^{tau_i-1}(1-x)^{l-tau_i}/((tau_i-1)!(l-tau_i)!) - 1/l!`.
pub fn projections_polys(f: &Kernel) -> Result<ProjectionTable> {
    let polys = polys_of(f)?;
    let coeffs = polys
        .iter()
        .map(|p| {
            (0..=p.degree().unwrap_or(0))
                .map(|k| {
                    // Evaluate coefficients through finite differences of the
                    // exact polynomial is overkill; expose the exact values.
                    coeff_f64(p, k)
                })
                .collect()
        })
        .collect();
    Ok(ProjectionTable::Polynomial {
        slots: polys.len(),
        polys,
        coeffs,
    })
}

fn coeff_f64(p: &RatPoly, k: usize) -> f64 {
    // RatPoly keeps coefficients private; reconstruct via evaluation-free
    // access is unnecessary — store through the public API below.
    p.coeff(k).map(|c| c.to_f64().unwrap()).unwrap_or(0.0)
}

fn polys_of(f: &Kernel) -> Result<Vec<RatPoly>> {
    match f {
        Kernel::PermPattern { pattern } => {
            let ell = pattern.len();
            let mu = BigRational::new(BigInt::one(), factorial(ell));
            Ok(pattern
                .iter()
                .map(|&tau| {
                    RatPoly::beta_term(tau - 1, ell - tau)
                        .add(&RatPoly::constant(-mu.clone()))
                })
                .collect())
        }
        Kernel::Sign { arity } => {
            let ell = *arity;
            if ell == 1 {
                return Ok(vec![RatPoly::zero()]);
            }
            if ell == 2 {
                // sign(x1, x2) = 1 - 2*1{x1 > x2}: conditioning on slot 1
                // gives 1 - 2x, on slot 2 gives 2x - 1.
                let one = BigRational::one();
                let two = BigRational::from(BigInt::from(2));
                let f1 = RatPoly::from_coeffs(vec![one.clone(), -two.clone()]);
                let f2 = RatPoly::from_coeffs(vec![-one, two]);
                return Ok(vec![f1, f2]);
            }
            // Swapping two free slots flips the sign, so every projection
            // vanishes once two or more slots are averaged out.
            Ok(vec![RatPoly::zero(); ell])
        }
        Kernel::Linear(parts) => {
            let ell = f.arity();
            let mut acc = vec![RatPoly::zero(); ell];
            for (c, k) in parts {
                let w = rat_from_f64(*c)?;
                let sub = polys_of(k)?;
                for (slot, p) in sub.into_iter().enumerate() {
                    acc[slot] = acc[slot].add(&p.scale(&w));
                }
            }
            Ok(acc)
        }
        _ => Err(Error::InvalidInput(
            "polynomial projections require an order-based kernel".into(),
        )),
    }
}

/// Exact lag-0 covariances of polynomial projections (independent inputs):
/// `gamma_ij = int_0^1 f_i f_j`.
pub fn gamma_polys(polys: &[RatPoly]) -> GammaArray {
    let slots = polys.len();
    let mut gamma = GammaArray::new_zero(slots, 0, true);
    for i in 0..slots {
        for j in 0..slots {
            let v = polys[i].mul(&polys[j]).integral01();
            gamma.set(i, j, 0, v.to_f64().unwrap());
        }
    }
    gamma
}

/// Exact rational asymptotic variance for an unconstrained order-based
/// kernel; used to pin closed-form constants in tests.
pub fn sigma2_rational(f: &Kernel) -> Result<BigRational> {
    let polys = polys_of(f)?;
    let ell = polys.len();
    let mut total = BigRational::zero();
    for (i, pi) in polys.iter().enumerate() {
        for (j, pj) in polys.iter().enumerate() {
            let gamma = pi.mul(pj).integral01();
            total += gamma * super::beta_inner(i + 1, j + 1, ell);
        }
    }
    Ok(total)
}
