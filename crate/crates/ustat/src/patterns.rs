//! Fast counters for gap-constrained word occurrences in strings and
//! pattern occurrences in permutations.
//!
//! The layered DP processes the text once and keeps, per kernel slot, the
//! number of partial matches that can still be extended within the gap
//! bounds; this is exact and O(n * ell) time for word kernels, and it
//! extends to any finite-alphabet kernel by expanding the kernel into a
//! weighted sum of word indicators.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::constraint::{Constraint, Gap};
use crate::error::{Error, Result};
use crate::eval::{self, EvalOptions};
use crate::kernel::{Alphabet, Domain, Kernel};
use crate::model::{FiniteDist, SequenceModel};
use crate::moments::{self, MomentOptions, MomentReport, Target, Verdict};

use crate::seq::ObsSeq;

pub use crate::constraint::Mode;

/// A word-counting problem: the pattern, its gap bounds, and the letter law
/// (all letter probabilities positive).
#[derive(Debug, Clone)]
pub struct WordSpec {
    pub word: Vec<u32>,
    pub constraint: Constraint,
    pub letters: FiniteDist,
}

impl WordSpec {
    pub fn new(word: Vec<u32>, constraint: Constraint, letters: FiniteDist) -> Result<Self> {
        if word.len() != constraint.ell() {
            return Err(Error::ArityMismatch {
                arity: word.len(),
                got: constraint.ell(),
            });
        }
        if letters.probs().iter().any(|&p| p <= 0.0) {
            return Err(Error::InvalidInput(
                "letter probabilities must be strictly positive".into(),
            ));
        }
        if let Some(&s) = word.iter().find(|&&s| s as usize >= letters.size()) {
            return Err(Error::AlphabetMismatch {
                expected: letters.size(),
                found: s as usize,
            });
        }
        Ok(WordSpec {
            word,
            constraint,
            letters,
        })
    }

    pub fn from_text(word: &str, alphabet: &Alphabet, constraint: Constraint) -> Result<Self> {
        WordSpec::new(
            alphabet.encode(word)?,
            constraint,
            FiniteDist::uniform(alphabet.size()),
        )
    }
}

/// A permutation-pattern counting problem.
#[derive(Debug, Clone)]
pub struct PermPatternSpec {
    pub pattern: Vec<usize>,
    pub constraint: Constraint,
}

/// Leading-order behavior of a counting statistic: its mean coefficient and
/// asymptotic variance, with the full moment report attached.
#[derive(Debug, Clone, Serialize)]
pub struct Asymptotics {
    pub mu_coeff: f64,
    pub sigma2: f64,
    pub sigma2_se: Option<f64>,
    pub block_count: usize,
    pub report: MomentReport,
}

/// Closed-form mean coefficient and asymptotic variance of a constrained
/// word count. The variance is strictly positive whenever the alphabet has
/// at least two letters.
pub fn word_asymptotics(spec: &WordSpec, opts: &MomentOptions) -> Result<Asymptotics> {
    let model = SequenceModel::IidFinite {
        dist: spec.letters.clone(),
    };
    let f = Kernel::Word {
        alphabet_size: spec.letters.size(),
        word: spec.word.clone(),
    };
    let mu_coeff = spec.constraint.exact_subconstraint_count() as f64
        * spec
            .word
            .iter()
            .map(|&w| spec.letters.prob(w))
            .product::<f64>();
    let report = moments::sigma2(
        &f,
        Target::Constrained(&spec.constraint, Mode::Bounded),
        &model,
        opts,
    )?;
    debug_assert!((report.mu_constrained.value - mu_coeff).abs() < 1e-12);
    if spec.letters.size() >= 2 && report.exact {
        assert!(
            report.verdict == Verdict::NonDegenerate && report.sigma2 > 0.0,
            "word counts over a non-trivial alphabet cannot be degenerate"
        );
    }
    Ok(Asymptotics {
        mu_coeff,
        sigma2: report.sigma2,
        sigma2_se: report.sigma2_se,
        block_count: spec.constraint.block_count(),
        report,
    })
}

/// Mean coefficient `prod d_j / l!` and asymptotic variance of a constrained
/// pattern count in a uniformly random permutation. Exact variance when
/// unconstrained; Monte-Carlo with a standard error otherwise.
pub fn perm_asymptotics(spec: &PermPatternSpec, opts: &MomentOptions) -> Result<Asymptotics> {
    let f = Kernel::perm_pattern(spec.pattern.clone())?;
    if spec.pattern.len() != spec.constraint.ell() {
        return Err(Error::ArityMismatch {
            arity: spec.pattern.len(),
            got: spec.constraint.ell(),
        });
    }
    let ell_fact = num_traits::ToPrimitive::to_f64(&crate::poly::factorial(spec.pattern.len()))
        .unwrap();
    let mu_coeff = spec.constraint.exact_subconstraint_count() as f64 / ell_fact;
    let report = moments::sigma2(
        &f,
        Target::Constrained(&spec.constraint, Mode::Bounded),
        &SequenceModel::IidUniform01,
        opts,
    )?;
    if spec.pattern.len() >= 2 && report.exact {
        assert!(
            report.verdict == Verdict::NonDegenerate && report.sigma2 > 0.0,
            "pattern counts of length >= 2 cannot be degenerate"
        );
    }
    Ok(Asymptotics {
        mu_coeff,
        sigma2: report.sigma2,
        sigma2_se: report.sigma2_se,
        block_count: spec.constraint.block_count(),
        report,
    })
}

/// Exact nonnegative counter arithmetic for the DP layers.
pub trait Count: Clone {
    fn zero() -> Self;
    fn one() -> Self;
    fn checked_add_assign(&mut self, other: &Self) -> bool;
    fn sub_assign_ref(&mut self, other: &Self);
    fn to_big(&self) -> BigInt;
}

impl Count for u128 {
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn checked_add_assign(&mut self, other: &Self) -> bool {
        match self.checked_add(*other) {
            Some(v) => {
                *self = v;
                true
            }
            None => false,
        }
    }
    fn sub_assign_ref(&mut self, other: &Self) {
        *self -= other;
    }
    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }
}

impl Count for BigInt {
    fn zero() -> Self {
        BigInt::from(0)
    }
    fn one() -> Self {
        BigInt::from(1)
    }
    fn checked_add_assign(&mut self, other: &Self) -> bool {
        *self += other;
        true
    }
    fn sub_assign_ref(&mut self, other: &Self) {
        *self -= other;
    }
    fn to_big(&self) -> BigInt {
        self.clone()
    }
}

/// Per-gap state: partial-match counts still extendable across this gap.
enum LayerState<T> {
    /// Unbounded gap: running total of all earlier layer values.
    Total(T),
    /// Bounded gap `<= d`: sliding window sum of the last `d` values.
    Window { buf: VecDeque<T>, cap: usize, sum: T },
    /// Exact gap `= d`: the value exactly `d` positions back.
    Lag { buf: VecDeque<T>, cap: usize },
}

impl<T: Count> LayerState<T> {
    fn new(gap: Gap, mode: Mode) -> Self {
        match (gap, mode) {
            (Gap::Unbounded, _) => LayerState::Total(T::zero()),
            (Gap::Finite(d), Mode::Bounded) => LayerState::Window {
                buf: VecDeque::with_capacity(d),
                cap: d,
                sum: T::zero(),
            },
            (Gap::Finite(d), Mode::Exact) => LayerState::Lag {
                buf: VecDeque::with_capacity(d),
                cap: d,
            },
        }
    }

    /// Weight of admissible predecessors for the position being pushed.
    fn weight(&self) -> T {
        match self {
            LayerState::Total(t) => t.clone(),
            LayerState::Window { sum, .. } => sum.clone(),
            LayerState::Lag { buf, cap } => {
                if buf.len() == *cap {
                    buf.front().cloned().unwrap_or_else(T::zero)
                } else {
                    T::zero()
                }
            }
        }
    }

    fn push(&mut self, value: T) -> Result<()> {
        match self {
            LayerState::Total(t) => {
                if !t.checked_add_assign(&value) {
                    return Err(Error::Overflow);
                }
            }
            LayerState::Window { buf, cap, sum } => {
                if !sum.checked_add_assign(&value) {
                    return Err(Error::Overflow);
                }
                buf.push_back(value);
                if buf.len() > *cap {
                    let old = buf.pop_front().expect("nonempty");
                    sum.sub_assign_ref(&old);
                }
            }
            LayerState::Lag { buf, cap } => {
                buf.push_back(value);
                if buf.len() > *cap {
                    buf.pop_front();
                }
            }
        }
        Ok(())
    }
}

/// Streaming count of (exactly-)constrained occurrences of one word.
pub struct WordCounter<T: Count = u128> {
    word: Vec<u32>,
    states: Vec<LayerState<T>>,
    total: T,
    new_values: Vec<T>,
}

impl<T: Count> WordCounter<T> {
    pub fn new(word: Vec<u32>, constraint: &Constraint, mode: Mode) -> Result<Self> {
        if word.len() != constraint.ell() {
            return Err(Error::ArityMismatch {
                arity: word.len(),
                got: constraint.ell(),
            });
        }
        let states = constraint
            .gaps()
            .iter()
            .map(|&g| LayerState::new(g, mode))
            .collect();
        Ok(WordCounter {
            new_values: vec![T::zero(); word.len()],
            word,
            states,
            total: T::zero(),
        })
    }

    /// Process the next text symbol.
    pub fn push(&mut self, sym: u32) -> Result<()> {
        let ell = self.word.len();
        for k in 0..ell {
            self.new_values[k] = if self.word[k] == sym {
                if k == 0 {
                    T::one()
                } else {
                    self.states[k - 1].weight()
                }
            } else {
                T::zero()
            };
        }
        let last = self.new_values[ell - 1].clone();
        if !self.total.checked_add_assign(&last) {
            return Err(Error::Overflow);
        }
        for k in 0..ell - 1 {
            let v = std::mem::replace(&mut self.new_values[k], T::zero());
            self.states[k].push(v)?;
        }
        Ok(())
    }

    /// Occurrences among the symbols pushed so far.
    pub fn total(&self) -> &T {
        &self.total
    }
}

/// Count (exactly-)constrained occurrences of `word` in `text`; equal to the
/// naive constrained evaluators with a word-indicator kernel. Escalates to
/// arbitrary precision automatically.
pub fn count_word_dp(
    word: &[u32],
    constraint: &Constraint,
    text: &[u32],
    mode: Mode,
) -> Result<BigInt> {
    match run_word_dp::<u128>(word, constraint, text, mode) {
        Ok(v) => Ok(BigInt::from(v)),
        Err(Error::Overflow) => Ok(run_word_dp::<BigInt>(word, constraint, text, mode)?),
        Err(e) => Err(e),
    }
}

fn run_word_dp<T: Count>(
    word: &[u32],
    constraint: &Constraint,
    text: &[u32],
    mode: Mode,
) -> Result<T> {
    let mut counter = WordCounter::<T>::new(word.to_vec(), constraint, mode)?;
    for &sym in text {
        counter.push(sym)?;
    }
    Ok(counter.total().clone())
}

/// Fenwick tree over ranks, for order-statistics counting.
pub struct Fenwick {
    tree: Vec<u64>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: vec![0; n + 1],
        }
    }

    fn add(&mut self, mut i: usize) {
        i += 1;
        while i < self.tree.len() {
            self.tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }

    /// Number of inserted ranks `<= i`.
    fn count_le(&self, mut i: usize) -> u64 {
        i += 1;
        let mut acc = 0;
        while i > 0 {
            acc += self.tree[i];
            i -= i & i.wrapping_neg();
        }
        acc
    }
}

/// Ranks of pairwise-distinct reals (0-based); fails on ties.
pub fn ranks(data: &[f64]) -> Result<Vec<usize>> {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.sort_unstable_by(|&a, &b| data[a].total_cmp(&data[b]));
    for w in idx.windows(2) {
        if data[w[0]] == data[w[1]] {
            let (a, b) = (w[0].min(w[1]), w[0].max(w[1]));
            return Err(Error::TieError(a, b));
        }
    }
    let mut rank = vec![0usize; data.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r;
    }
    Ok(rank)
}

/// Inversion count via a Fenwick tree over ranks.
pub fn count_inversions(data: &[f64]) -> Result<u128> {
    let rank = ranks(data)?;
    let mut fen = Fenwick::new(data.len());
    let mut acc: u128 = 0;
    for (i, &r) in rank.iter().enumerate() {
        let le = fen.count_le(r) as u128;
        acc += i as u128 - le;
        fen.add(r);
    }
    Ok(acc)
}

/// Count constrained occurrences of the order pattern `pattern` in a
/// sequence of pairwise-distinct reals (or a permutation).
///
/// Pairs get dedicated counters; anything longer falls back to guarded
/// naive enumeration.
pub fn count_perm_pattern(
    pattern: &[usize],
    constraint: &Constraint,
    xs: &ObsSeq,
    mode: Mode,
    opts: &EvalOptions,
) -> Result<BigInt> {
    let data = xs
        .reals()
        .ok_or_else(|| Error::InvalidInput("pattern counting needs real-valued input".into()))?;
    if pattern.len() != constraint.ell() {
        return Err(Error::ArityMismatch {
            arity: pattern.len(),
            got: constraint.ell(),
        });
    }
    let n = data.len();
    if pattern.len() == 1 {
        return Ok(BigInt::from(n));
    }
    if pattern.len() == 2 {
        if constraint.is_unconstrained() {
            xs.check_distinct()?;
            let inv = count_inversions(data)?;
            let all = eval::binomial_u128(n as u128, 2);
            return Ok(BigInt::from(if pattern == [2, 1] { inv } else { all - inv }));
        }
        if let Gap::Finite(d) = constraint.gaps()[0] {
            xs.check_distinct()?;
            let descending = pattern == [2, 1];
            let mut acc: u128 = 0;
            for j in 1..n {
                match mode {
                    Mode::Bounded => {
                        for i in j.saturating_sub(d)..j {
                            if (data[i] > data[j]) == descending {
                                acc += 1;
                            }
                        }
                    }
                    Mode::Exact => {
                        if j >= d && (data[j - d] > data[j]) == descending {
                            acc += 1;
                        }
                    }
                }
            }
            return Ok(BigInt::from(acc));
        }
    }
    let f = Kernel::perm_pattern(pattern.to_vec())?;
    let v = match mode {
        Mode::Bounded => eval::u_stat_constrained(&f, constraint, xs, opts)?,
        Mode::Exact => eval::u_stat_exactly_constrained(&f, constraint, xs, opts)?,
    };
    Ok(v.to_big().expect("indicator kernel counts are integers"))
}

/// Expand a finite-alphabet kernel into weighted word indicators; table
/// kernels contribute one word per nonzero entry.
fn expand_to_words(f: &Kernel, weight: f64, out: &mut Vec<(f64, Vec<u32>)>) -> Result<()> {
    match f {
        Kernel::Word { word, .. } => {
            out.push((weight, word.clone()));
            Ok(())
        }
        Kernel::Table {
            alphabet_size,
            arity,
            values,
        } => {
            let a = *alphabet_size;
            for (code, &v) in values.iter().enumerate() {
                if v != 0.0 {
                    let mut word = vec![0u32; *arity];
                    let mut c = code;
                    for slot in (0..*arity).rev() {
                        word[slot] = (c % a) as u32;
                        c /= a;
                    }
                    out.push((weight * v, word));
                }
            }
            Ok(())
        }
        Kernel::Linear(parts) => {
            for (c, k) in parts {
                expand_to_words(k, weight * c, out)?;
            }
            Ok(())
        }
        _ => Err(Error::InvalidInput(
            "only finite-alphabet kernels expand into words".into(),
        )),
    }
}

/// Streaming evaluator of `U_j(f; D)` over growing prefixes, choosing a fast
/// route per kernel family. Push observations, read `value()` anytime.
pub enum PrefixStat {
    Words {
        counters: Vec<(f64, WordCounter<u128>)>,
        integer: bool,
    },
    /// Order-pattern pairs: Fenwick inversions when unconstrained, a short
    /// comparison window under a gap bound.
    Pair {
        descending: bool,
        complement: bool,
        sign: bool,
        gap: Option<(usize, Mode)>,
        recent: VecDeque<f64>,
        fenwick: Option<Fenwick>,
        pushed: usize,
        inversions: u128,
        within_gap: u128,
    },
    /// Arity-1 pattern: the count is the prefix length.
    Singleton { pushed: usize },
}

impl PrefixStat {
    /// Plan a streaming evaluator; `n_hint` sizes the rank structure for
    /// real sequences (ranks passed to `push_ranked` must be `< n_hint`).
    pub fn plan(f: &Kernel, constraint: &Constraint, mode: Mode, n_hint: usize) -> Result<Self> {
        if f.arity() != constraint.ell() {
            return Err(Error::ArityMismatch {
                arity: f.arity(),
                got: constraint.ell(),
            });
        }
        match f.domain() {
            Domain::Finite(_) => {
                let mut words = Vec::new();
                expand_to_words(f, 1.0, &mut words)?;
                let integer = f.integer_valued();
                let counters = words
                    .into_iter()
                    .map(|(w, word)| Ok((w, WordCounter::new(word, constraint, mode)?)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(PrefixStat::Words { counters, integer })
            }
            Domain::RealOrder => match f {
                Kernel::PermPattern { pattern } if pattern.len() == 1 => {
                    Ok(PrefixStat::Singleton { pushed: 0 })
                }
                Kernel::PermPattern { pattern } if pattern.len() == 2 => {
                    let descending = pattern == &[2, 1];
                    match constraint.gaps()[0] {
                        Gap::Unbounded => Ok(PrefixStat::Pair {
                            descending: true,
                            complement: !descending,
                            sign: false,
                            gap: None,
                            recent: VecDeque::new(),
                            fenwick: Some(Fenwick::new(n_hint)),
                            pushed: 0,
                            inversions: 0,
                            within_gap: 0,
                        }),
                        Gap::Finite(d) => Ok(PrefixStat::Pair {
                            descending,
                            complement: false,
                            sign: false,
                            gap: Some((d, mode)),
                            recent: VecDeque::with_capacity(d),
                            fenwick: None,
                            pushed: 0,
                            inversions: 0,
                            within_gap: 0,
                        }),
                    }
                }
                Kernel::Sign { arity: 2 } if constraint.is_unconstrained() => {
                    Ok(PrefixStat::Pair {
                        descending: true,
                        complement: false,
                        sign: true,
                        gap: None,
                        recent: VecDeque::new(),
                        fenwick: Some(Fenwick::new(n_hint)),
                        pushed: 0,
                        inversions: 0,
                        within_gap: 0,
                    })
                }
                _ => Err(Error::InvalidInput(
                    "no streaming evaluator for this order kernel".into(),
                )),
            },
        }
    }

    /// Push the next symbol (finite-alphabet plans).
    pub fn push_sym(&mut self, sym: u32) -> Result<()> {
        match self {
            PrefixStat::Words { counters, .. } => {
                for (_, c) in counters.iter_mut() {
                    c.push(sym)?;
                }
                Ok(())
            }
            _ => Err(Error::InvalidInput("plan expects real observations".into())),
        }
    }

    /// Push the next observation with its global rank (real plans).
    pub fn push_ranked(&mut self, value: f64, rank: usize) -> Result<()> {
        match self {
            PrefixStat::Singleton { pushed } => {
                *pushed += 1;
                Ok(())
            }
            PrefixStat::Pair {
                descending,
                gap,
                recent,
                fenwick,
                pushed,
                inversions,
                within_gap,
                ..
            } => {
                match gap {
                    None => {
                        let fen = fenwick.as_mut().expect("fenwick sized at plan time");
                        let le = fen.count_le(rank) as u128;
                        *inversions += *pushed as u128 - le;
                        fen.add(rank);
                    }
                    Some((d, mode)) => {
                        match mode {
                            Mode::Bounded => {
                                for &prev in recent.iter() {
                                    if (prev > value) == *descending {
                                        *within_gap += 1;
                                    }
                                }
                            }
                            Mode::Exact => {
                                if recent.len() == *d {
                                    let prev = *recent.front().expect("nonempty");
                                    if (prev > value) == *descending {
                                        *within_gap += 1;
                                    }
                                }
                            }
                        }
                        recent.push_back(value);
                        if recent.len() > *d {
                            recent.pop_front();
                        }
                    }
                }
                *pushed += 1;
                Ok(())
            }
            PrefixStat::Words { .. } => {
                Err(Error::InvalidInput("plan expects symbol observations".into()))
            }
        }
    }

    /// Current value of the statistic over everything pushed so far.
    pub fn value(&self) -> f64 {
        match self {
            PrefixStat::Words { counters, .. } => counters
                .iter()
                .map(|(w, c)| w * (*c.total() as f64))
                .sum(),
            PrefixStat::Singleton { pushed } => *pushed as f64,
            PrefixStat::Pair {
                complement,
                sign,
                gap,
                pushed,
                inversions,
                within_gap,
                ..
            } => {
                if gap.is_some() {
                    *within_gap as f64
                } else {
                    let pairs = eval::binomial_u128(*pushed as u128, 2);
                    if *sign {
                        pairs as f64 - 2.0 * *inversions as f64
                    } else if *complement {
                        (pairs - *inversions) as f64
                    } else {
                        *inversions as f64
                    }
                }
            }
        }
    }

    /// Exact integer value for integer-weighted plans.
    pub fn value_big(&self) -> Option<BigInt> {
        match self {
            PrefixStat::Words { counters, integer } => {
                if !integer {
                    return None;
                }
                let mut acc = BigInt::from(0);
                for (w, c) in counters {
                    acc += BigInt::from(*w as i64) * BigInt::from(*c.total());
                }
                Some(acc)
            }
            PrefixStat::Singleton { pushed } => Some(BigInt::from(*pushed)),
            PrefixStat::Pair { .. } => self.value().to_i64().map(BigInt::from),
        }
    }
}

/// Evaluate `U_j(f; D)` at each checkpoint prefix length of one sequence,
/// using a streaming plan when one exists and guarded naive evaluation
/// otherwise.
pub fn u_stat_prefixes(
    f: &Kernel,
    constraint: &Constraint,
    mode: Mode,
    xs: &ObsSeq,
    checkpoints: &[usize],
    opts: &EvalOptions,
) -> Result<Vec<f64>> {
    debug_assert!(checkpoints.windows(2).all(|w| w[0] <= w[1]));
    let n = xs.len();
    if checkpoints.iter().any(|&c| c > n) {
        return Err(Error::InvalidInput("checkpoint beyond sequence end".into()));
    }
    match PrefixStat::plan(f, constraint, mode, n) {
        Ok(mut plan) => {
            let rank = match xs {
                ObsSeq::Reals(data) => Some(ranks(data)?),
                ObsSeq::Symbols { .. } => None,
            };
            let mut out = Vec::with_capacity(checkpoints.len());
            let mut next = 0usize;
            for i in 0..=n {
                while next < checkpoints.len() && checkpoints[next] == i {
                    out.push(plan.value());
                    next += 1;
                }
                if i == n {
                    break;
                }
                match xs {
                    ObsSeq::Symbols { data, .. } => plan.push_sym(data[i])?,
                    ObsSeq::Reals(data) => {
                        plan.push_ranked(data[i], rank.as_ref().expect("ranked")[i])?
                    }
                }
            }
            Ok(out)
        }
        Err(Error::InvalidInput(_)) => {
            let mut out = Vec::with_capacity(checkpoints.len());
            for &c in checkpoints {
                let prefix = match xs {
                    ObsSeq::Symbols {
                        data,
                        alphabet_size,
                    } => ObsSeq::Symbols {
                        data: data[..c].to_vec(),
                        alphabet_size: *alphabet_size,
                    },
                    ObsSeq::Reals(data) => ObsSeq::Reals(data[..c].to_vec()),
                };
                let v = match mode {
                    Mode::Bounded => eval::u_stat_constrained(f, constraint, &prefix, opts)?,
                    Mode::Exact => {
                        eval::u_stat_exactly_constrained(f, constraint, &prefix, opts)?
                    }
                };
                out.push(v.as_f64());
            }
            Ok(out)
        }
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Alphabet;
    use rand::Rng;

    fn enc(text: &str) -> Vec<u32> {
        Alphabet::binary().encode(text).unwrap()
    }

    #[test]
    fn dp_matches_examples() {
        let d = Constraint::parse("1,inf").unwrap();
        let c = count_word_dp(&enc("101"), &d, &enc("10101"), Mode::Bounded).unwrap();
        assert_eq!(c, BigInt::from(3));

        let d = Constraint::parse("inf").unwrap();
        let c = count_word_dp(&enc("01"), &d, &enc("0011"), Mode::Bounded).unwrap();
        assert_eq!(c, BigInt::from(4));

        let d = Constraint::parse("inf,inf").unwrap();
        let c = count_word_dp(&enc("011"), &d, &enc("01"), Mode::Bounded).unwrap();
        assert_eq!(c, BigInt::from(0));
    }

    #[test]
    fn dp_exact_mode() {
        let d = Constraint::parse("2").unwrap();
        let c = count_word_dp(&enc("11"), &d, &enc("1011"), Mode::Exact).unwrap();
        assert_eq!(c, BigInt::from(1));
    }

    #[test]
    fn dp_agrees_with_naive_on_random_cases() {
        let mut rng = crate::model::stream_rng(7, 99, 0);
        let a = Alphabet::binary();
        let opts = EvalOptions::default();
        for case in 0..400 {
            let n = rng.gen_range(0..40);
            let ell = rng.gen_range(1..=4usize);
            let word: Vec<u32> = (0..ell).map(|_| rng.gen_range(0..2)).collect();
            let text: Vec<u32> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let gaps: String = (0..ell - 1)
                .map(|_| match rng.gen_range(0..4) {
                    0 => "inf".to_string(),
                    g => g.to_string(),
                })
                .collect::<Vec<_>>()
                .join(",");
            let d = Constraint::parse(&gaps).unwrap();
            let xs = ObsSeq::from_symbols(text.clone(), 2).unwrap();
            let word_str: String =
                word.iter().map(|&s| a.symbols()[s as usize]).collect();
            let f = Kernel::word_from_text(&word_str, &a).unwrap();

            let dp = count_word_dp(&word, &d, &text, Mode::Bounded).unwrap();
            let naive = eval::u_stat_constrained(&f, &d, &xs, &opts).unwrap();
            assert_eq!(dp, naive.to_big().unwrap(), "case {case} bounded");

            let dp = count_word_dp(&word, &d, &text, Mode::Exact).unwrap();
            let naive = eval::u_stat_exactly_constrained(&f, &d, &xs, &opts).unwrap();
            assert_eq!(dp, naive.to_big().unwrap(), "case {case} exact");
        }
    }

    #[test]
    fn vincular_modes_agree() {
        let mut rng = crate::model::stream_rng(8, 99, 0);
        for _ in 0..100 {
            let n = rng.gen_range(0..50);
            let text: Vec<u32> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let word = enc("101");
            for gaps in ["1,1", "1,inf", "inf,1", "inf,inf"] {
                let d = Constraint::parse(gaps).unwrap();
                let b = count_word_dp(&word, &d, &text, Mode::Bounded).unwrap();
                let e = count_word_dp(&word, &d, &text, Mode::Exact).unwrap();
                assert_eq!(b, e, "gaps {gaps}");
            }
        }
    }

    #[test]
    fn word_sum_rule() {
        // Sum of all length-2 word counts equals C(n, 2).
        let text = enc("110100101100111");
        let n = text.len() as u128;
        let d = Constraint::unconstrained(2);
        let mut total = BigInt::from(0);
        for w0 in 0..2u32 {
            for w1 in 0..2u32 {
                total += count_word_dp(&[w0, w1], &d, &text, Mode::Bounded).unwrap();
            }
        }
        assert_eq!(total, BigInt::from(eval::binomial_u128(n, 2)));
    }

    #[test]
    fn inversion_counting() {
        let xs = ObsSeq::from_permutation(&[3, 1, 2]);
        let d = Constraint::unconstrained(2);
        let opts = EvalOptions::default();
        let c = count_perm_pattern(&[2, 1], &d, &xs, Mode::Bounded, &opts).unwrap();
        assert_eq!(c, BigInt::from(2));
        let c = count_perm_pattern(&[1, 2], &d, &xs, Mode::Bounded, &opts).unwrap();
        assert_eq!(c, BigInt::from(1));
    }

    #[test]
    fn adjacent_ascents() {
        let xs = ObsSeq::from_permutation(&[1, 3, 2]);
        let d = Constraint::parse("1").unwrap();
        let opts = EvalOptions::default();
        let c = count_perm_pattern(&[1, 2], &d, &xs, Mode::Bounded, &opts).unwrap();
        assert_eq!(c, BigInt::from(1));
    }

    #[test]
    fn singleton_pattern_counts_length() {
        let xs = ObsSeq::from_permutation(&[2, 1, 3]);
        let d = Constraint::unconstrained(1);
        let opts = EvalOptions::default();
        let c = count_perm_pattern(&[1], &d, &xs, Mode::Bounded, &opts).unwrap();
        assert_eq!(c, BigInt::from(3));
    }

    #[test]
    fn perm_counts_match_naive() {
        let mut rng = crate::model::stream_rng(11, 99, 0);
        let opts = EvalOptions::default();
        for _ in 0..60 {
            let n = rng.gen_range(2..30);
            let data: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let xs = ObsSeq::from_reals(data);
            for (pattern, gaps) in [
                (vec![2, 1], "inf".to_string()),
                (vec![1, 2], "inf".to_string()),
                (vec![2, 1], format!("{}", rng.gen_range(1..5))),
                (vec![1, 2], format!("{}", rng.gen_range(1..5))),
                (vec![1, 3, 2], "2,inf".to_string()),
            ] {
                let d = Constraint::parse(&gaps).unwrap();
                let f = Kernel::perm_pattern(pattern.clone()).unwrap();
                let fast =
                    count_perm_pattern(&pattern, &d, &xs, Mode::Bounded, &opts).unwrap();
                let naive = eval::u_stat_constrained(&f, &d, &xs, &opts).unwrap();
                assert_eq!(fast, naive.to_big().unwrap());

                let fast =
                    count_perm_pattern(&pattern, &d, &xs, Mode::Exact, &opts).unwrap();
                let naive = eval::u_stat_exactly_constrained(&f, &d, &xs, &opts).unwrap();
                assert_eq!(fast, naive.to_big().unwrap());
            }
        }
    }

    #[test]
    fn perm_sum_rule() {
        // Sum over all patterns of S_3 equals C(n, 3).
        let mut rng = crate::model::stream_rng(12, 99, 0);
        let data: Vec<f64> = (0..25).map(|_| rng.gen::<f64>()).collect();
        let xs = ObsSeq::from_reals(data);
        let d = Constraint::unconstrained(3);
        let opts = EvalOptions::default();
        let patterns = [
            [1, 2, 3],
            [1, 3, 2],
            [2, 1, 3],
            [2, 3, 1],
            [3, 1, 2],
            [3, 2, 1],
        ];
        let mut total = BigInt::from(0);
        for p in patterns {
            total += count_perm_pattern(&p, &d, &xs, Mode::Bounded, &opts).unwrap();
        }
        assert_eq!(total, BigInt::from(eval::binomial_u128(25, 3)));
    }

    #[test]
    fn prefix_counts_match_per_prefix_naive() {
        let mut rng = crate::model::stream_rng(13, 99, 0);
        let opts = EvalOptions::default();
        let a = Alphabet::binary();
        let text: Vec<u32> = (0..60).map(|_| rng.gen_range(0..2)).collect();
        let xs = ObsSeq::from_symbols(text, 2).unwrap();
        let f = Kernel::word_from_text("101", &a).unwrap();
        let d = Constraint::parse("2,inf").unwrap();
        let checkpoints = [0usize, 1, 13, 27, 60];
        let fast = u_stat_prefixes(&f, &d, Mode::Bounded, &xs, &checkpoints, &opts).unwrap();
        for (k, &c) in checkpoints.iter().enumerate() {
            let prefix = ObsSeq::from_symbols(xs.symbols().unwrap()[..c].to_vec(), 2).unwrap();
            let naive = eval::u_stat_constrained(&f, &d, &prefix, &opts).unwrap();
            assert_eq!(fast[k], naive.as_f64());
        }

        let data: Vec<f64> = (0..50).map(|_| rng.gen::<f64>()).collect();
        let xs = ObsSeq::from_reals(data);
        let f = Kernel::perm_pattern(vec![2, 1]).unwrap();
        let d = Constraint::unconstrained(2);
        let fast = u_stat_prefixes(&f, &d, Mode::Bounded, &xs, &[10, 50], &opts).unwrap();
        let naive10 = eval::u_stat(
            &f,
            &ObsSeq::from_reals(xs.reals().unwrap()[..10].to_vec()),
            &opts,
        )
        .unwrap();
        assert_eq!(fast[0], naive10.as_f64());
        let naive50 = eval::u_stat(&f, &xs, &opts).unwrap();
        assert_eq!(fast[1], naive50.as_f64());
    }

    #[test]
    fn prefix_streaming_handles_gap_patterns_and_sign() {
        let mut rng = crate::model::stream_rng(15, 99, 0);
        let opts = EvalOptions::default();
        let data: Vec<f64> = (0..40).map(|_| rng.gen::<f64>()).collect();
        let xs = ObsSeq::from_reals(data);
        for (f, d, mode) in [
            (
                Kernel::perm_pattern(vec![2, 1]).unwrap(),
                Constraint::parse("3").unwrap(),
                Mode::Bounded,
            ),
            (
                Kernel::perm_pattern(vec![1, 2]).unwrap(),
                Constraint::parse("2").unwrap(),
                Mode::Exact,
            ),
            (
                Kernel::Sign { arity: 2 },
                Constraint::unconstrained(2),
                Mode::Bounded,
            ),
        ] {
            let fast = u_stat_prefixes(&f, &d, mode, &xs, &[0, 17, 40], &opts).unwrap();
            for (k, &c) in [0usize, 17, 40].iter().enumerate() {
                let prefix = ObsSeq::from_reals(xs.reals().unwrap()[..c].to_vec());
                let naive = match mode {
                    Mode::Bounded => eval::u_stat_constrained(&f, &d, &prefix, &opts).unwrap(),
                    Mode::Exact => {
                        eval::u_stat_exactly_constrained(&f, &d, &prefix, &opts).unwrap()
                    }
                };
                assert_eq!(fast[k], naive.as_f64());
            }
        }
    }

    #[test]
    fn prefix_fallback_for_general_pattern() {
        let mut rng = crate::model::stream_rng(14, 99, 0);
        let data: Vec<f64> = (0..20).map(|_| rng.gen::<f64>()).collect();
        let xs = ObsSeq::from_reals(data);
        let f = Kernel::perm_pattern(vec![3, 1, 2]).unwrap();
        let d = Constraint::unconstrained(3);
        let opts = EvalOptions::default();
        let vals = u_stat_prefixes(&f, &d, Mode::Bounded, &xs, &[20], &opts).unwrap();
        let naive = eval::u_stat(&f, &xs, &opts).unwrap();
        assert_eq!(vals[0], naive.as_f64());
    }

    #[test]
    fn word_asymptotics_closed_forms() {
        let a = Alphabet::binary();
        let mo = MomentOptions::default();
        let spec =
            WordSpec::from_text("101", &a, Constraint::parse("1,inf").unwrap()).unwrap();
        let asym = word_asymptotics(&spec, &mo).unwrap();
        assert_eq!(asym.mu_coeff, 0.125);
        assert_eq!(asym.block_count, 2);
        assert!(asym.sigma2 > 0.0);

        let abc = Alphabet::new(vec!['a', 'b', 'c']).unwrap();
        let spec = WordSpec::from_text("abc", &abc, Constraint::unconstrained(3)).unwrap();
        let asym = word_asymptotics(&spec, &mo).unwrap();
        assert!((asym.mu_coeff - 1.0 / 27.0).abs() < 1e-15);

        // Single-letter alphabet: the count is deterministic.
        let one = Alphabet::new(vec!['a']).unwrap();
        let spec = WordSpec::from_text("aa", &one, Constraint::unconstrained(2)).unwrap();
        let asym = word_asymptotics(&spec, &mo).unwrap();
        assert_eq!(asym.sigma2, 0.0);
    }

    #[test]
    fn perm_asymptotics_closed_forms() {
        let mo = MomentOptions::default();
        for d_gap in [1usize, 4] {
            let spec = PermPatternSpec {
                pattern: vec![2, 1],
                constraint: Constraint::parse(&d_gap.to_string()).unwrap(),
            };
            let asym = perm_asymptotics(&spec, &mo).unwrap();
            assert!((asym.mu_coeff - d_gap as f64 / 2.0).abs() < 1e-15);
        }
        let spec = PermPatternSpec {
            pattern: vec![1, 2, 3],
            constraint: Constraint::unconstrained(3),
        };
        let asym = perm_asymptotics(&spec, &mo).unwrap();
        assert!((asym.mu_coeff - 1.0 / 6.0).abs() < 1e-15);

        let spec = PermPatternSpec {
            pattern: vec![2, 1],
            constraint: Constraint::unconstrained(2),
        };
        let asym = perm_asymptotics(&spec, &mo).unwrap();
        assert!((asym.sigma2 - 1.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn counts_obey_the_law_of_large_numbers() {
        // n^{-b} count approaches mu_D / b! at large n, within Monte-Carlo
        // error across replicates.
        let a = Alphabet::binary();
        let mo = MomentOptions::default();
        let spec = WordSpec::from_text("101", &a, Constraint::parse("1,inf").unwrap()).unwrap();
        let asym = word_asymptotics(&spec, &mo).unwrap();
        let model = SequenceModel::iid_uniform_binary();
        let n = 100_000usize;
        let reps = 64usize;
        let mut samples = Vec::with_capacity(reps);
        for rep in 0..reps {
            let xs = model.generate(n, 71, 5, rep as u64);
            let c = count_word_dp(
                &spec.word,
                &spec.constraint,
                xs.symbols().unwrap(),
                Mode::Bounded,
            )
            .unwrap();
            let c: f64 = c.to_string().parse().unwrap();
            samples.push(c / (n as f64).powi(2));
        }
        let mean = crate::linalg::mean(&samples);
        let se = (crate::linalg::variance(&samples) / reps as f64).sqrt();
        let target = asym.mu_coeff / 2.0;
        assert!(
            (mean - target).abs() < 3.0 * se + 2.0 / n as f64,
            "mean {mean} vs {target} (se {se})"
        );
    }

    #[test]
    fn table_kernel_expands_to_words() {
        // The degenerate three-letter example as a table kernel.
        let mut values = vec![0.0; 8];
        values[0b101] = 1.0;
        values[0b011] = -1.0;
        let f = Kernel::table(2, 3, values).unwrap();
        let d = Constraint::parse("1,inf").unwrap();
        let text: Vec<u32> = enc("110100101");
        let xs = ObsSeq::from_symbols(text, 2).unwrap();
        let opts = EvalOptions::default();
        let fast = u_stat_prefixes(&f, &d, Mode::Bounded, &xs, &[9], &opts).unwrap();
        let naive = eval::u_stat_constrained(&f, &d, &xs, &opts).unwrap();
        assert_eq!(fast[0], naive.as_f64());
    }
}
