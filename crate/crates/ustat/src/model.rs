//! Stationary sequence models: i.i.d. finite-alphabet, i.i.d. uniform(0,1),
//! and finite block factors over an i.i.d. base, together with exact joint
//! distributions of sliding windows for the moment engine.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seq::ObsSeq;

/// A probability distribution on symbols `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDist {
    probs: Vec<f64>,
}

impl FiniteDist {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p >= 0.0) || p > 1.0) {
            return Err(Error::InvalidInput("invalid probability vector".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(FiniteDist { probs })
    }

    pub fn uniform(size: usize) -> Self {
        FiniteDist {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, s: u32) -> f64 {
        self.probs[s as usize]
    }

    fn is_uniform_binary(&self) -> bool {
        self.probs.len() == 2 && self.probs[0] == 0.5 && self.probs[1] == 0.5
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as u32;
            }
        }
        (self.probs.len() - 1) as u32
    }
}

/// Joint distribution of a tuple of symbols, radix-coded with the first
/// coordinate most significant.
#[derive(Debug, Clone)]
pub struct JointDist {
    pub arity: usize,
    pub alphabet_size: usize,
    pub probs: Vec<f64>,
}

impl JointDist {
    pub fn decode(&self, mut code: usize, out: &mut [u32]) {
        for slot in (0..self.arity).rev() {
            out[slot] = (code % self.alphabet_size) as u32;
            code /= self.alphabet_size;
        }
    }

    /// Marginal distribution of the coordinates at `lags` (each < arity),
    /// in the given order.
    pub fn marginal_of_lags(&self, lags: &[usize]) -> JointDist {
        let a = self.alphabet_size;
        let k = lags.len();
        let mut probs = vec![0.0; a.pow(k as u32)];
        let mut tuple = vec![0u32; self.arity];
        for (code, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.decode(code, &mut tuple);
            let mut sub = 0usize;
            for &lag in lags {
                sub = sub * a + tuple[lag] as usize;
            }
            probs[sub] += p;
        }
        JointDist {
            arity: k,
            alphabet_size: a,
            probs,
        }
    }
}

/// Generator/descriptor of a stationary m-dependent sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceModel {
    /// Independent letters with the given distribution (m = 0).
    IidFinite { dist: FiniteDist },
    /// Independent uniform(0,1) reals (m = 0).
    IidUniform01,
    /// `X_i = map(xi_i, ..., xi_{i+window-1})` over an i.i.d. finite base;
    /// m = window - 1. `map` is radix-coded over base tuples and produces
    /// symbols in `0..out_size`.
    BlockFactor {
        base: FiniteDist,
        window: usize,
        map: Vec<u32>,
        out_size: usize,
    },
}

impl SequenceModel {
    pub fn iid_uniform_binary() -> Self {
        SequenceModel::IidFinite {
            dist: FiniteDist::uniform(2),
        }
    }

    pub fn block_factor(base: FiniteDist, window: usize, map: Vec<u32>, out_size: usize) -> Result<Self> {
        let states = (base.size() as u128)
            .checked_pow(window as u32)
            .ok_or_else(|| Error::InvalidInput("block factor window too large".into()))?;
        if window == 0 || states != map.len() as u128 {
            return Err(Error::InvalidInput(format!(
                "block factor map needs base^window = {states} entries, got {}",
                map.len()
            )));
        }
        if map.iter().any(|&s| s as usize >= out_size) {
            return Err(Error::InvalidInput("block factor map exceeds output alphabet".into()));
        }
        Ok(SequenceModel::BlockFactor {
            base,
            window,
            map,
            out_size,
        })
    }

    /// Dependence range: 0 for i.i.d., window - 1 for block factors.
    pub fn dependence(&self) -> usize {
        match self {
            SequenceModel::IidFinite { .. } | SequenceModel::IidUniform01 => 0,
            SequenceModel::BlockFactor { window, .. } => window - 1,
        }
    }

    pub fn is_finite(&self) -> bool {
        !matches!(self, SequenceModel::IidUniform01)
    }

    pub fn alphabet_size(&self) -> Option<usize> {
        match self {
            SequenceModel::IidFinite { dist } => Some(dist.size()),
            SequenceModel::BlockFactor { out_size, .. } => Some(*out_size),
            SequenceModel::IidUniform01 => None,
        }
    }

    /// Exact marginal law of one observation, for finite models.
    pub fn marginal(&self) -> Result<FiniteDist> {
        match self {
            SequenceModel::IidFinite { dist } => Ok(dist.clone()),
            SequenceModel::BlockFactor { .. } => {
                let joint = self.joint_window(1, u128::MAX)?;
                FiniteDist::new(joint.probs)
            }
            SequenceModel::IidUniform01 => Err(Error::InvalidInput(
                "no finite marginal for a real-valued model".into(),
            )),
        }
    }

    /// Exact joint law of `(X_1, ..., X_len)`, for finite models.
    ///
    /// For block factors this enumerates `base^(len + m)` states and is
    /// guarded by `state_budget`.
    pub fn joint_window(&self, len: usize, state_budget: u128) -> Result<JointDist> {
        match self {
            SequenceModel::IidFinite { dist } => {
                let a = dist.size();
                let states = (a as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
                if states > state_budget {
                    return Err(Error::BudgetExceeded {
                        needed: states,
                        budget: state_budget,
                        unit: "joint states",
                    });
                }
                let mut probs = vec![0.0; a.pow(len as u32)];
                let mut tuple = vec![0u32; len];
                for (code, slot) in probs.iter_mut().enumerate() {
                    let mut c = code;
                    for pos in (0..len).rev() {
                        tuple[pos] = (c % a) as u32;
                        c /= a;
                    }
                    *slot = tuple.iter().map(|&s| dist.prob(s)).product();
                }
                Ok(JointDist {
                    arity: len,
                    alphabet_size: a,
                    probs,
                })
            }
            SequenceModel::BlockFactor {
                base,
                window,
                map,
                out_size,
            } => {
                let base_a = base.size();
                let base_len = len + window - 1;
                let states = (base_a as u128)
                    .checked_pow(base_len as u32)
                    .unwrap_or(u128::MAX);
                if states > state_budget {
                    return Err(Error::BudgetExceeded {
                        needed: states,
                        budget: state_budget,
                        unit: "joint states",
                    });
                }
                let a = *out_size;
                let mut probs = vec![0.0; a.pow(len as u32)];
                let mut base_tuple = vec![0u32; base_len];
                let n_states = (base_a as u128).pow(base_len as u32) as usize;
                for code in 0..n_states {
                    let mut c = code;
                    for pos in (0..base_len).rev() {
                        base_tuple[pos] = (c % base_a) as u32;
                        c /= base_a;
                    }
                    let p: f64 = base_tuple.iter().map(|&s| base.prob(s)).product();
                    let mut out_code = 0usize;
                    for i in 0..len {
                        let mut w_code = 0usize;
                        for k in 0..*window {
                            w_code = w_code * base_a + base_tuple[i + k] as usize;
                        }
                        out_code = out_code * a + map[w_code] as usize;
                    }
                    probs[out_code] += p;
                }
                Ok(JointDist {
                    arity: len,
                    alphabet_size: a,
                    probs,
                })
            }
            SequenceModel::IidUniform01 => Err(Error::InvalidInput(
                "no finite joint law for a real-valued model".into(),
            )),
        }
    }

    /// Enumerate all length-`n` realizations with their probabilities.
    /// Intended for small exact oracles only.
    pub fn enumerate_strings(&self, n: usize, state_budget: u128) -> Result<Vec<(Vec<u32>, f64)>> {
        let joint = self.joint_window(n, state_budget)?;
        let mut out = Vec::with_capacity(joint.probs.len());
        for (code, &p) in joint.probs.iter().enumerate() {
            let mut tuple = vec![0u32; n];
            joint.decode(code, &mut tuple);
            out.push((tuple, p));
        }
        Ok(out)
    }

    /// Draw `n` observations; deterministic given the RNG state.
    pub fn generate_with<R: Rng>(&self, n: usize, rng: &mut R) -> ObsSeq {
        match self {
            SequenceModel::IidFinite { dist } => {
                let mut data = Vec::with_capacity(n);
                if dist.is_uniform_binary() {
                    // Fair bits straight from the generator words.
                    let mut remaining = n;
                    while remaining > 0 {
                        let mut word: u64 = rng.gen();
                        let take = remaining.min(64);
                        for _ in 0..take {
                            data.push((word & 1) as u32);
                            word >>= 1;
                        }
                        remaining -= take;
                    }
                } else {
                    for _ in 0..n {
                        data.push(dist.sample(rng));
                    }
                }
                ObsSeq::Symbols {
                    data,
                    alphabet_size: dist.size(),
                }
            }
            SequenceModel::IidUniform01 => {
                ObsSeq::Reals((0..n).map(|_| rng.gen::<f64>()).collect())
            }
            SequenceModel::BlockFactor {
                base,
                window,
                map,
                out_size,
            } => {
                if n == 0 {
                    return ObsSeq::Symbols {
                        data: Vec::new(),
                        alphabet_size: *out_size,
                    };
                }
                let base_a = base.size();
                let base_len = n + window - 1;
                let mut xi = Vec::with_capacity(base_len);
                if base.is_uniform_binary() {
                    let mut remaining = base_len;
                    while remaining > 0 {
                        let mut word: u64 = rng.gen();
                        let take = remaining.min(64);
                        for _ in 0..take {
                            xi.push((word & 1) as u32);
                            word >>= 1;
                        }
                        remaining -= take;
                    }
                } else {
                    for _ in 0..base_len {
                        xi.push(base.sample(rng));
                    }
                }
                let mut data = Vec::with_capacity(n);
                for i in 0..n {
                    let mut code = 0usize;
                    for k in 0..*window {
                        code = code * base_a + xi[i + k] as usize;
                    }
                    data.push(map[code]);
                }
                ObsSeq::Symbols {
                    data,
                    alphabet_size: *out_size,
                }
            }
        }
    }

    /// Draw `n` observations from the stream keyed by `(seed, stream,
    /// replicate)`; replicates are reproducible and order-independent.
    pub fn generate(&self, n: usize, seed: u64, stream: u64, replicate: u64) -> ObsSeq {
        let mut rng = stream_rng(seed, stream, replicate);
        self.generate_with(n, &mut rng)
    }
}

/// Counter-style RNG keyed by `(seed, stream, replicate)`.
pub fn stream_rng(seed: u64, stream: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 40) ^ replicate);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn xor_model() -> SequenceModel {
        // X_i = xi_i XOR xi_{i+1}, uniform binary base; 1-dependent.
        SequenceModel::block_factor(FiniteDist::uniform(2), 2, vec![0, 1, 1, 0], 2).unwrap()
    }

    #[test]
    fn generation_is_deterministic() {
        let model = SequenceModel::iid_uniform_binary();
        let a = model.generate(64, 7, 0, 3);
        let b = model.generate(64, 7, 0, 3);
        assert_eq!(a, b);
        let c = model.generate(64, 7, 0, 4);
        assert_ne!(a, c);
    }

    #[test]
    fn block_factor_lengths_and_dependence() {
        let model = xor_model();
        assert_eq!(model.dependence(), 1);
        let xs = model.generate(5, 1, 0, 0);
        assert_eq!(xs.len(), 5);
    }

    #[test]
    fn block_factor_marginal_matches_enumeration() {
        let model = xor_model();
        let marg = model.marginal().unwrap();
        // XOR of two fair bits is a fair bit.
        assert_abs_diff_eq!(marg.prob(0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(marg.prob(1), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn block_factor_empirical_marginal() {
        // Empirical marginal within 3 standard errors of the exact one.
        let model = xor_model();
        let reps = 100_000usize;
        let mut ones = 0usize;
        let xs = model.generate(reps, 42, 1, 0);
        for &s in xs.symbols().unwrap() {
            ones += s as usize;
        }
        let phat = ones as f64 / reps as f64;
        let se = (0.25f64 / reps as f64).sqrt();
        assert!((phat - 0.5).abs() < 3.0 * se, "phat = {phat}");
    }

    #[test]
    fn joint_window_is_a_distribution_with_xor_dependence() {
        let model = xor_model();
        let joint = model.joint_window(3, 1 << 20).unwrap();
        let total: f64 = joint.probs.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // Adjacent XOR outputs are pairwise independent for a fair base.
        let pair = joint.marginal_of_lags(&[0, 1]);
        for p in pair.probs {
            assert_abs_diff_eq!(p, 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn marginal_of_lags_orders_coordinates() {
        let model = SequenceModel::IidFinite {
            dist: FiniteDist::new(vec![0.75, 0.25]).unwrap(),
        };
        let joint = model.joint_window(3, 1 << 20).unwrap();
        let sub = joint.marginal_of_lags(&[2, 0]);
        assert_eq!(sub.arity, 2);
        // P(X_2 = 0, X_0 = 1) with X_1 marginalized out.
        assert_abs_diff_eq!(sub.probs[0b01], 0.75 * 0.25, epsilon = 1e-12);
    }

    #[test]
    fn uniform01_sequences_have_distinct_entries() {
        let model = SequenceModel::IidUniform01;
        let xs = model.generate(4096, 11, 0, 9);
        assert!(xs.check_distinct().is_ok());
    }
}
