//! Orthogonal decomposition of finite-alphabet kernels over i.i.d. letters:
//! level projections, degeneracy order, exact finite-n variance growth, and
//! the worked degenerate limits (a product kernel on bits whose rescaled
//! limit is `(zeta^2 - 1)/2`, and a four-letter kernel whose limit law has
//! eigenvalues `1/((2N+1) pi)`).

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{self, EvalOptions};
use crate::kernel::{Domain, Kernel};
use crate::linalg;
use crate::model::{stream_rng, FiniteDist, SequenceModel};
use crate::seq::ObsSeq;

/// Orthonormal machinery for the function space on `alphabet^arity` under
/// the product law of `dist` (all letter probabilities must be positive).
#[derive(Debug, Clone)]
pub struct FunctionSpaceBasis {
    dist: FiniteDist,
    arity: usize,
    /// `w0[k][a]`: value of the k-th orthonormal mean-zero basis function at
    /// letter `a`; there are `A - 1` of them.
    w0: Vec<Vec<f64>>,
}

impl FunctionSpaceBasis {
    pub fn new(dist: &FiniteDist, arity: usize) -> Result<Self> {
        if dist.probs().iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidInput(
                "letter probabilities must be strictly positive".into(),
            ));
        }
        let a = dist.size();
        // Gram-Schmidt on {1_{x=s} - p(s)}, s != first letter, under
        // <h, k> = E h(xi) k(xi).
        let inner = |u: &[f64], v: &[f64]| -> f64 {
            u.iter()
                .zip(v)
                .zip(dist.probs())
                .map(|((x, y), p)| p * x * y)
                .sum()
        };
        let mut w0: Vec<Vec<f64>> = Vec::with_capacity(a - 1);
        for s in 1..a {
            let mut v: Vec<f64> = (0..a)
                .map(|x| if x == s { 1.0 } else { 0.0 } - dist.prob(s as u32))
                .collect();
            for u in &w0 {
                let c = inner(&v, u);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= c * ui;
                }
            }
            let norm = inner(&v, &v).sqrt();
            if norm < 1e-12 {
                return Err(Error::InvalidInput("degenerate letter distribution".into()));
            }
            for vi in &mut v {
                *vi /= norm;
            }
            w0.push(v);
        }
        Ok(FunctionSpaceBasis {
            dist: dist.clone(),
            arity,
            w0,
        })
    }

    pub fn alphabet_size(&self) -> usize {
        self.dist.size()
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Dimension of the level-`k` component: `C(l, k)(A-1)^k`.
    pub fn level_dimension(&self, k: usize) -> usize {
        let a1 = (self.dist.size() - 1) as u128;
        (eval::binomial_u128(self.arity as u128, k as u128) * a1.pow(k as u32)) as usize
    }

    fn table_len(&self) -> usize {
        self.dist.size().pow(self.arity as u32)
    }

    /// Dense value table of a kernel on this space.
    pub fn table_of(&self, f: &Kernel) -> Result<Vec<f64>> {
        let Domain::Finite(a) = f.domain() else {
            return Err(Error::InvalidInput("finite-alphabet kernel required".into()));
        };
        if a != self.dist.size() || f.arity() != self.arity {
            return Err(Error::AlphabetMismatch {
                expected: self.dist.size(),
                found: a,
            });
        }
        let len = self.table_len();
        let mut table = vec![0.0; len];
        let mut args = vec![0u32; self.arity];
        for (code, slot) in table.iter_mut().enumerate() {
            decode(code, a, &mut args);
            *slot = f.eval_sym(&args);
        }
        Ok(table)
    }

    /// Tensor coefficients of a kernel in the orthonormal product basis
    /// `{1, w0_1, ..., w0_{A-1}}^{tensor arity}`.
    pub fn analyze(&self, f: &Kernel) -> Result<Vec<f64>> {
        let table = self.table_of(f)?;
        Ok(self.analyze_table(table))
    }

    fn analyze_table(&self, mut data: Vec<f64>) -> Vec<f64> {
        let a = self.dist.size();
        // Analysis matrix row c, column x: p(x) * phi_c(x).
        let mut t = vec![0.0; a * a];
        for x in 0..a {
            t[x] = self.dist.prob(x as u32);
            for c in 1..a {
                t[c * a + x] = self.dist.prob(x as u32) * self.w0[c - 1][x];
            }
        }
        self.axis_transform(&mut data, &t);
        data
    }

    fn synthesize_table(&self, mut coef: Vec<f64>) -> Vec<f64> {
        let a = self.dist.size();
        // Synthesis matrix row x, column c: phi_c(x).
        let mut t = vec![0.0; a * a];
        for x in 0..a {
            t[x * a] = 1.0;
            for c in 1..a {
                t[x * a + c] = self.w0[c - 1][x];
            }
        }
        self.axis_transform(&mut coef, &t);
        coef
    }

    /// Apply the same `a x a` matrix along every tensor axis.
    fn axis_transform(&self, data: &mut [f64], matrix: &[f64]) {
        let a = self.dist.size();
        let len = data.len();
        let mut scratch = vec![0.0; len];
        for axis in 0..self.arity {
            let stride = a.pow((self.arity - 1 - axis) as u32);
            scratch.iter_mut().for_each(|v| *v = 0.0);
            for (code, &v) in data.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let digit = (code / stride) % a;
                let base = code - digit * stride;
                for out in 0..a {
                    scratch[base + out * stride] += matrix[out * a + digit] * v;
                }
            }
            data.copy_from_slice(&scratch);
        }
    }

    /// Orthogonal projection onto the component where exactly the slots in
    /// `subset` carry mean-zero factors.
    pub fn project_subset(&self, f: &Kernel, subset: &[usize]) -> Result<Vec<f64>> {
        let mut coef = self.analyze(f)?;
        let a = self.dist.size();
        let mask: u32 = subset.iter().fold(0, |m, &i| {
            assert!(i < self.arity);
            m | (1 << i)
        });
        for (code, v) in coef.iter_mut().enumerate() {
            if support_mask(code, a, self.arity) != mask {
                *v = 0.0;
            }
        }
        Ok(self.synthesize_table(coef))
    }

    /// Orthogonal projection onto the level-`k` component (sum over all
    /// `k`-subsets of slots).
    pub fn project_level(&self, f: &Kernel, k: usize) -> Result<Vec<f64>> {
        let mut coef = self.analyze(f)?;
        let a = self.dist.size();
        for (code, v) in coef.iter_mut().enumerate() {
            if support_mask(code, a, self.arity).count_ones() as usize != k {
                *v = 0.0;
            }
        }
        Ok(self.synthesize_table(coef))
    }

    /// Squared norms of the level components, `k = 0..=arity` (the Parseval
    /// pieces of `E f(Xi)^2`).
    pub fn level_norms2(&self, f: &Kernel) -> Result<Vec<f64>> {
        let coef = self.analyze(f)?;
        let a = self.dist.size();
        let mut norms = vec![0.0; self.arity + 1];
        for (code, &v) in coef.iter().enumerate() {
            let k = support_mask(code, a, self.arity).count_ones() as usize;
            norms[k] += v * v;
        }
        Ok(norms)
    }

    /// Squared norm of a table under the product law.
    pub fn norm2_table(&self, table: &[f64]) -> f64 {
        self.inner_table(table, table)
    }

    /// Inner product of two tables under the product law.
    pub fn inner_table(&self, s: &[f64], t: &[f64]) -> f64 {
        let a = self.dist.size();
        let mut args = vec![0u32; self.arity];
        s.iter()
            .zip(t)
            .enumerate()
            .map(|(code, (&u, &v))| {
                decode(code, a, &mut args);
                let p: f64 = args.iter().map(|&x| self.dist.prob(x)).product();
                p * u * v
            })
            .sum()
    }

    /// Smallest level `k >= 1` with a nonvanishing component of `f - mean`;
    /// `None` for (a.e.) constant kernels. Order 1 means the standard
    /// normalization is non-degenerate.
    pub fn degeneracy_order(&self, f: &Kernel, tol: f64) -> Result<Option<usize>> {
        let norms = self.level_norms2(f)?;
        for (k, &n2) in norms.iter().enumerate().skip(1) {
            if n2.sqrt() > tol {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }
}

fn decode(mut code: usize, a: usize, out: &mut [u32]) {
    for slot in (0..out.len()).rev() {
        out[slot] = (code % a) as u32;
        code /= a;
    }
}

/// Bitmask of slots whose coefficient digit is nonzero.
fn support_mask(mut code: usize, a: usize, arity: usize) -> u32 {
    let mut mask = 0u32;
    for slot in (0..arity).rev() {
        if code % a != 0 {
            mask |= 1 << slot;
        }
        code /= a;
    }
    mask
}

/// Exact `Var U_n(f)` over every realization, with the fitted log-log
/// growth exponent across the n-range.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceOrder {
    pub ns: Vec<usize>,
    pub variances: Vec<f64>,
    /// Least-squares slope of `ln Var` against `ln n`.
    pub slope: f64,
}

pub fn variance_order(
    f: &Kernel,
    dist: &FiniteDist,
    ns: &[usize],
    state_budget: u128,
) -> Result<VarianceOrder> {
    let model = SequenceModel::IidFinite { dist: dist.clone() };
    let opts = EvalOptions::default();
    let mut variances = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut e = 0.0;
        let mut e2 = 0.0;
        for (s, p) in model.enumerate_strings(n, state_budget)? {
            let xs = ObsSeq::from_symbols(s, dist.size())?;
            let u = eval::u_stat(f, &xs, &opts)?.as_f64();
            e += p * u;
            e2 += p * u * u;
        }
        variances.push((e2 - e * e).max(0.0));
    }
    let pts: Vec<(f64, f64)> = ns
        .iter()
        .zip(&variances)
        .filter(|(_, &v)| v > 0.0)
        .map(|(&n, &v)| ((n as f64).ln(), v.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    Ok(VarianceOrder {
        ns: ns.to_vec(),
        variances,
        slope,
    })
}

/// The correlation-product kernel on bits: value `xhat * yhat` with
/// `xhat = 2x - 1`; its statistic collapses to a square of the centered
/// letter sum.
pub fn product_bit_kernel() -> Kernel {
    Kernel::table(2, 2, vec![1.0, -1.0, -1.0, 1.0]).unwrap()
}

/// Closed-form identity for the product-bit statistic:
/// `U_n = ((sum xhat)^2 - n) / 2`, checked exactly.
pub fn product_bit_identity_check(bits: &[u32]) -> Result<bool> {
    let xs = ObsSeq::from_symbols(bits.to_vec(), 2)?;
    let f = product_bit_kernel();
    let u = eval::u_stat(&f, &xs, &EvalOptions::default())?
        .to_big()
        .expect("integer kernel");
    let t: i64 = bits.iter().map(|&b| 2 * b as i64 - 1).sum();
    let n = bits.len() as i64;
    let closed = (t * t - n) / 2;
    Ok(u == num_bigint::BigInt::from(closed))
}

/// The four-letter difference-product kernel whose degenerate limit has a
/// full spectrum: `f(x, y) = (1_a(x) - 1_b(x)) (1_c(y) - 1_d(y))` with
/// letters `a, b, c, d = 0, 1, 2, 3`.
pub fn four_letter_kernel() -> Kernel {
    let mut values = vec![0.0; 16];
    for (x, sx) in [(0usize, 1.0), (1, -1.0)] {
        for (y, sy) in [(2usize, 1.0), (3, -1.0)] {
            values[x * 4 + y] = sx * sy;
        }
    }
    Kernel::table(4, 2, values).unwrap()
}

/// Nystrom discretization of the limit integral operator of the four-letter
/// kernel on `{a,b,c,d} x [0,1]` (uniform letter weight 1/4, midpoint grid
/// in time), returning the `count` leading eigenvalues by magnitude.
///
/// Uses orthogonal iteration with a Rayleigh-Ritz finish on the matrix-free
/// symmetric discretization; the half-cell diagonal term keeps the
/// quadrature error at second order.
pub fn e4_operator_eigs(grid: usize, count: usize) -> Vec<f64> {
    assert!(grid >= 16);
    let a = 4usize;
    let f_table = {
        let f = four_letter_kernel();
        let mut t = vec![0.0; a * a];
        for x in 0..a {
            for y in 0..a {
                t[x * a + y] = f.eval_sym(&[x as u32, y as u32]);
            }
        }
        t
    };
    let dim = a * grid;
    let h = 1.0 / grid as f64;
    let apply = |v: &[f64], out: &mut [f64]| {
        let mut prefix = vec![0.0; a * (grid + 1)];
        for y in 0..a {
            for j in 0..grid {
                prefix[y * (grid + 1) + j + 1] = prefix[y * (grid + 1) + j] + v[y * grid + j];
            }
        }
        for x in 0..a {
            for i in 0..grid {
                let mut acc = 0.0;
                for y in 0..a {
                    let total = prefix[y * (grid + 1) + grid];
                    let below = prefix[y * (grid + 1) + i];
                    let above = total - prefix[y * (grid + 1) + i + 1];
                    let fxy = f_table[x * a + y];
                    let fyx = f_table[y * a + x];
                    // Cells strictly above the node weigh f(x, .), cells
                    // strictly below weigh f(., x), and the node's own cell
                    // splits in half between the two sides.
                    acc += fxy * (above + 0.5 * v[y * grid + i]);
                    acc += fyx * (below + 0.5 * v[y * grid + i]);
                }
                out[x * grid + i] = acc * h * 0.25;
            }
        }
    };
    let block = (count + 4).min(dim);
    let mut rng = stream_rng(0xE4, 0, 0);
    let mut basis: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            (0..dim)
                .map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0))
                .collect()
        })
        .collect();
    orthonormalize(&mut basis);
    let mut tmp = vec![0.0; dim];
    for _ in 0..300 {
        for b in basis.iter_mut() {
            apply(b, &mut tmp);
            b.copy_from_slice(&tmp);
        }
        orthonormalize(&mut basis);
    }
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(block);
    for b in &basis {
        apply(b, &mut tmp);
        images.push(tmp.clone());
    }
    let mut ritz = vec![0.0; block * block];
    for i in 0..block {
        for j in 0..block {
            ritz[i * block + j] = dot(&basis[i], &images[j]);
        }
    }
    let sym: Vec<f64> = (0..block * block)
        .map(|k| {
            let (i, j) = (k / block, k % block);
            0.5 * (ritz[i * block + j] + ritz[j * block + i])
        })
        .collect();
    let mut eigs = linalg::symmetric_eigenvalues(&sym, block);
    eigs.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    eigs.truncate(count);
    eigs
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn orthonormalize(basis: &mut [Vec<f64>]) {
    for i in 0..basis.len() {
        let (done, rest) = basis.split_at_mut(i);
        let v = &mut rest[0];
        for u in done.iter() {
            let c = dot(v, u);
            for (x, y) in v.iter_mut().zip(u) {
                *x -= c * y;
            }
        }
        let n = dot(v, v).sqrt();
        if n > 1e-300 {
            for x in v.iter_mut() {
                *x /= n;
            }
        }
    }
}

/// Distinct magnitudes among eigenvalues, decreasing, merging values closer
/// than `merge_tol`.
pub fn distinct_magnitudes(eigs: &[f64], merge_tol: f64) -> Vec<f64> {
    let mut mags: Vec<f64> = eigs.iter().map(|e| e.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<f64> = Vec::new();
    for m in mags {
        if out.last().is_none_or(|&last| last - m > merge_tol) {
            out.push(m);
        }
    }
    out
}

/// One Box-Muller pair of independent standard normals.
pub fn normal_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>(); // in (0, 1]
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Empirical vs analytic moment generating function of the four-letter
/// kernel's rescaled limit: a truncated series of weighted chi-square
/// differences against `1/sqrt(cos(s/2))`, valid for `|s| < pi`.
#[derive(Debug, Clone, Serialize)]
pub struct MgfCheck {
    pub s: f64,
    pub empirical: f64,
    pub se: f64,
    pub analytic: f64,
    pub truncation: usize,
}

pub fn e4_limit_mgf_check(replicates: usize, seed: u64, truncation: usize, s: f64) -> MgfCheck {
    assert!(s.abs() < std::f64::consts::PI);
    assert!(truncation >= 1);
    let mut values = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = stream_rng(seed, 0xE4F, rep as u64);
        let mut z = 0.0;
        for n in 0..truncation {
            let (g1, g2) = normal_pair(&mut rng);
            z += (g1 * g1 - g2 * g2) / (2 * n + 1) as f64;
        }
        z /= 2.0 * std::f64::consts::PI;
        values.push((s * z).exp());
    }
    let empirical = linalg::mean(&values);
    let se = (linalg::variance(&values) / replicates as f64).sqrt();
    MgfCheck {
        s,
        empirical,
        se,
        analytic: 1.0 / (s / 2.0).cos().sqrt(),
        truncation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn uniform(a: usize) -> FiniteDist {
        FiniteDist::uniform(a)
    }

    fn random_table(a: usize, ell: usize, rng: &mut impl Rng) -> Kernel {
        let values: Vec<f64> = (0..a.pow(ell as u32))
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        Kernel::table(a, ell, values).unwrap()
    }

    #[test]
    fn constant_kernel_projects_to_level_zero() {
        let basis = FunctionSpaceBasis::new(&uniform(2), 2).unwrap();
        let f = Kernel::table(2, 2, vec![0.3; 4]).unwrap();
        let p0 = basis.project_level(&f, 0).unwrap();
        for &v in &p0 {
            assert_abs_diff_eq!(v, 0.3, epsilon = 1e-14);
        }
        for k in 1..=2 {
            let pk = basis.project_level(&f, k).unwrap();
            assert!(pk.iter().all(|v| v.abs() < 1e-13));
        }
        assert_eq!(basis.degeneracy_order(&f, 1e-10).unwrap(), None);
    }

    #[test]
    fn level_zero_is_the_mean() {
        let mut rng = stream_rng(31, 0, 0);
        for (a, ell) in [(2usize, 2usize), (3, 2), (2, 3)] {
            let basis = FunctionSpaceBasis::new(&uniform(a), ell).unwrap();
            let f = random_table(a, ell, &mut rng);
            let p0 = basis.project_level(&f, 0).unwrap();
            let model = SequenceModel::IidFinite { dist: uniform(a) };
            let mu = crate::moments::mu(&f, &model, &crate::moments::MomentOptions::default())
                .unwrap()
                .value;
            for &v in &p0 {
                assert_abs_diff_eq!(v, mu, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn level_one_is_the_projection_sum() {
        let mut rng = stream_rng(32, 0, 0);
        let a = 3;
        let ell = 2;
        let dist = FiniteDist::new(vec![0.5, 0.3, 0.2]).unwrap();
        let basis = FunctionSpaceBasis::new(&dist, ell).unwrap();
        let model = SequenceModel::IidFinite { dist: dist.clone() };
        let f = random_table(a, ell, &mut rng);
        let p1 = basis.project_level(&f, 1).unwrap();
        let proj =
            crate::moments::projections(&f, &model, &crate::moments::MomentOptions::default())
                .unwrap();
        let mut args = vec![0u32; ell];
        for (code, &v) in p1.iter().enumerate() {
            decode(code, a, &mut args);
            let expect: f64 = (0..ell)
                .map(|i| proj.finite_value(i, args[i] as usize).unwrap())
                .sum();
            assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn completeness_orthogonality_parseval() {
        let mut rng = stream_rng(33, 0, 0);
        for (a, ell) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let basis = FunctionSpaceBasis::new(&uniform(a), ell).unwrap();
            for _ in 0..10 {
                let f = random_table(a, ell, &mut rng);
                let parts: Vec<Vec<f64>> = (0..=ell)
                    .map(|k| basis.project_level(&f, k).unwrap())
                    .collect();
                let table = basis.table_of(&f).unwrap();
                for code in 0..table.len() {
                    let total: f64 = parts.iter().map(|p| p[code]).sum();
                    assert_abs_diff_eq!(total, table[code], epsilon = 1e-10);
                }
                for k in 0..=ell {
                    for l in (k + 1)..=ell {
                        let ip = basis.inner_table(&parts[k], &parts[l]);
                        assert!(ip.abs() < 1e-10, "levels {k}, {l}: {ip}");
                    }
                }
                let total2: f64 = parts.iter().map(|p| basis.norm2_table(p)).sum();
                assert_abs_diff_eq!(total2, basis.norm2_table(&table), epsilon = 1e-10);
                let norms = basis.level_norms2(&f).unwrap();
                for k in 0..=ell {
                    assert_abs_diff_eq!(norms[k], basis.norm2_table(&parts[k]), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn projection_dimensions() {
        let mut rng = stream_rng(34, 0, 0);
        for (a, ell) in [(2usize, 2usize), (2, 3), (3, 2)] {
            let basis = FunctionSpaceBasis::new(&uniform(a), ell).unwrap();
            let total: usize = (0..=ell).map(|k| basis.level_dimension(k)).sum();
            assert_eq!(total, a.pow(ell as u32));
            for k in 0..=ell {
                let vectors: Vec<Vec<f64>> = (0..2 * a.pow(ell as u32))
                    .map(|_| {
                        basis
                            .project_level(&random_table(a, ell, &mut rng), k)
                            .unwrap()
                    })
                    .collect();
                assert_eq!(
                    linalg::rank_of(&vectors, 1e-9),
                    basis.level_dimension(k),
                    "A={a} l={ell} k={k}"
                );
            }
        }
    }

    #[test]
    fn subset_projection_refines_levels() {
        let mut rng = stream_rng(35, 0, 0);
        let basis = FunctionSpaceBasis::new(&uniform(2), 3).unwrap();
        let f = random_table(2, 3, &mut rng);
        let p1 = basis.project_level(&f, 1).unwrap();
        let sum: Vec<f64> = (0..3)
            .map(|i| basis.project_subset(&f, &[i]).unwrap())
            .fold(vec![0.0; 8], |acc, p| {
                acc.iter().zip(&p).map(|(x, y)| x + y).collect()
            });
        for (x, y) in p1.iter().zip(&sum) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert_eq!(basis.level_dimension(1), 3);
    }

    #[test]
    fn degeneracy_orders() {
        let basis2 = FunctionSpaceBasis::new(&uniform(2), 2).unwrap();
        let a = crate::kernel::Alphabet::binary();
        let w = Kernel::word_from_text("01", &a).unwrap();
        assert_eq!(basis2.degeneracy_order(&w, 1e-10).unwrap(), Some(1));
        assert_eq!(
            basis2
                .degeneracy_order(&product_bit_kernel(), 1e-10)
                .unwrap(),
            Some(2)
        );
        let basis4 = FunctionSpaceBasis::new(&uniform(4), 2).unwrap();
        assert_eq!(
            basis4
                .degeneracy_order(&four_letter_kernel(), 1e-10)
                .unwrap(),
            Some(2)
        );
        // A manufactured level-2 component of a random kernel.
        let mut rng = stream_rng(36, 0, 0);
        let f = random_table(2, 2, &mut rng);
        let p2 = basis2.project_level(&f, 2).unwrap();
        let k2 = Kernel::table(2, 2, p2).unwrap();
        assert_eq!(basis2.degeneracy_order(&k2, 1e-10).unwrap(), Some(2));
    }

    #[test]
    fn four_letter_kernel_lives_at_level_two() {
        let basis = FunctionSpaceBasis::new(&uniform(4), 2).unwrap();
        let f = four_letter_kernel();
        let norms = basis.level_norms2(&f).unwrap();
        assert!(norms[0].abs() < 1e-14);
        assert!(norms[1].abs() < 1e-14);
        assert!(norms[2] > 0.0);
        // The whole kernel is its own level-2 projection.
        let p2 = basis.project_level(&f, 2).unwrap();
        let table = basis.table_of(&f).unwrap();
        for (x, y) in p2.iter().zip(&table) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn degeneracy_order_agrees_with_moment_verdict() {
        let mut rng = stream_rng(37, 0, 0);
        let model = SequenceModel::iid_uniform_binary();
        let basis = FunctionSpaceBasis::new(&uniform(2), 2).unwrap();
        let mopts = crate::moments::MomentOptions::default();
        for i in 0..40 {
            let f = if i % 3 == 0 {
                // Force degenerate cases into the battery.
                let raw = random_table(2, 2, &mut rng);
                let mut high = basis.project_level(&raw, 2).unwrap();
                let p0 = basis.project_level(&raw, 0).unwrap();
                for (h, c) in high.iter_mut().zip(&p0) {
                    *h += c;
                }
                Kernel::table(2, 2, high).unwrap()
            } else {
                random_table(2, 2, &mut rng)
            };
            let report =
                crate::moments::sigma2(&f, crate::moments::Target::Unconstrained, &model, &mopts)
                    .unwrap();
            let by_levels = basis.degeneracy_order(&f, 1e-10).unwrap() != Some(1);
            let by_gamma = crate::moments::degeneracy_test(&report, 1e-10)
                == crate::moments::Verdict::Degenerate;
            assert_eq!(by_levels, by_gamma, "kernel {i}");
            assert_eq!(report.sigma2 <= 1e-10, by_gamma);
        }
    }

    #[test]
    fn variance_growth_exponents() {
        let ns: Vec<usize> = (8..=14).collect();
        // Degenerate product kernel: Var U_n = (n^2 - n)/2, slope near 2.
        let vo = variance_order(&product_bit_kernel(), &uniform(2), &ns, 1 << 24).unwrap();
        for (&n, &v) in vo.ns.iter().zip(&vo.variances) {
            let nf = n as f64;
            assert_abs_diff_eq!(v, (nf * nf - nf) / 2.0, epsilon = 1e-7);
        }
        assert!((vo.slope - 2.0).abs() < 0.15, "slope {}", vo.slope);

        // Non-degenerate word kernel: variance grows like n^3.
        let a = crate::kernel::Alphabet::binary();
        let w = Kernel::word_from_text("01", &a).unwrap();
        let vo = variance_order(&w, &uniform(2), &ns, 1 << 24).unwrap();
        assert!((vo.slope - 3.0).abs() < 0.35, "slope {}", vo.slope);

        // Constant kernel: variance identically zero.
        let c = Kernel::table(2, 2, vec![1.0; 4]).unwrap();
        let vo = variance_order(&c, &uniform(2), &[8, 10], 1 << 24).unwrap();
        assert!(vo.variances.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn product_bit_closed_form() {
        // Hand checks first: (1,1,-1) gives both sides -1; all ones gives
        // C(4,2) = 6.
        assert!(product_bit_identity_check(&[1, 1, 0]).unwrap());
        assert!(product_bit_identity_check(&[1, 1, 1, 1]).unwrap());
        let f = product_bit_kernel();
        let xs = ObsSeq::from_symbols(vec![1, 1, 0], 2).unwrap();
        let u = eval::u_stat(&f, &xs, &EvalOptions::default()).unwrap();
        assert_eq!(u, eval::Value::Int(-1));
        let xs = ObsSeq::from_symbols(vec![1, 1, 1, 1], 2).unwrap();
        let u = eval::u_stat(&f, &xs, &EvalOptions::default()).unwrap();
        assert_eq!(u, eval::Value::Int(6));
    }

    #[test]
    fn four_letter_operator_spectrum() {
        // Smoke-size grid here; the acceptance suite runs grid 2000.
        let eigs = e4_operator_eigs(400, 6);
        let pi = std::f64::consts::PI;
        let mags = distinct_magnitudes(&eigs, 1e-4);
        assert!((mags[0] - 1.0 / pi).abs() < 5e-3, "got {eigs:?}");
        assert!((mags[1] - 1.0 / (3.0 * pi)).abs() < 5e-3);
        assert!((mags[2] - 1.0 / (5.0 * pi)).abs() < 5e-3);
        // Eigenvalues come in +/- pairs of equal magnitude.
        assert!((eigs[0].abs() - eigs[1].abs()).abs() < 1e-6);
        assert!(eigs[0] * eigs[1] < 0.0);
    }

    #[test]
    fn mgf_check_at_zero_and_one() {
        let check = e4_limit_mgf_check(2000, 9, 100, 0.0);
        assert_eq!(check.empirical, 1.0);
        assert_eq!(check.analytic, 1.0);

        let check = e4_limit_mgf_check(20_000, 9, 200, 1.0);
        assert!(
            (check.empirical - check.analytic).abs() < 4.0 * check.se,
            "{check:?}"
        );
        // The limit is symmetric, so the MGF is even in s.
        let neg = e4_limit_mgf_check(20_000, 9, 200, -1.0);
        let se = (check.se * check.se + neg.se * neg.se).sqrt();
        assert!((check.empirical - neg.empirical).abs() < 4.0 * se);
    }
}
