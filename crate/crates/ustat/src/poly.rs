//! Exact univariate polynomials with rational coefficients, used for
//! closed-form projections of order-based kernels and for Beta integrals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn big_rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn factorial(n: usize) -> BigInt {
    let mut acc = BigInt::one();
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    acc
}

/// Polynomial with exact rational coefficients, `coeffs[k]` on `x^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatPoly {
    coeffs: Vec<BigRational>,
}

impl RatPoly {
    pub fn zero() -> Self {
        RatPoly { coeffs: Vec::new() }
    }

    pub fn constant(c: BigRational) -> Self {
        if c.is_zero() {
            Self::zero()
        } else {
            RatPoly { coeffs: vec![c] }
        }
    }

    pub fn from_coeffs(coeffs: Vec<BigRational>) -> Self {
        let mut p = RatPoly { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.is_zero() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn coeff(&self, k: usize) -> Option<&BigRational> {
        self.coeffs.get(k)
    }

    /// `x^a (1-x)^c / (a! c!)`, the building block of order-pattern
    /// projections.
    pub fn beta_term(a: usize, c: usize) -> Self {
        // Expand (1-x)^c with binomial coefficients.
        let mut coeffs = vec![BigRational::zero(); a + c + 1];
        let norm = BigRational::new(BigInt::one(), factorial(a) * factorial(c));
        let mut binom = BigInt::one();
        for k in 0..=c {
            if k > 0 {
                binom = &binom * BigInt::from(c - k + 1) / BigInt::from(k);
            }
            let sign = if k % 2 == 0 { 1 } else { -1 };
            coeffs[a + k] += &norm * BigRational::from(BigInt::from(sign) * &binom);
        }
        RatPoly::from_coeffs(coeffs)
    }

    pub fn add(&self, other: &RatPoly) -> RatPoly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = vec![BigRational::zero(); n];
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs[k] += c;
        }
        for (k, c) in other.coeffs.iter().enumerate() {
            coeffs[k] += c;
        }
        RatPoly::from_coeffs(coeffs)
    }

    pub fn scale(&self, c: &BigRational) -> RatPoly {
        RatPoly::from_coeffs(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn mul(&self, other: &RatPoly) -> RatPoly {
        if self.is_zero() || other.is_zero() {
            return RatPoly::zero();
        }
        let mut coeffs =
            vec![BigRational::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        RatPoly::from_coeffs(coeffs)
    }

    /// Exact integral over [0, 1].
    pub fn integral01(&self) -> BigRational {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / BigRational::from(BigInt::from(k + 1)))
            .sum()
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c.to_f64().unwrap_or(f64::NAN);
        }
        acc
    }

    /// Largest coefficient magnitude, as f64.
    pub fn max_coeff_abs(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.abs().to_f64().unwrap_or(f64::INFINITY))
            .fold(0.0, f64::max)
    }
}
