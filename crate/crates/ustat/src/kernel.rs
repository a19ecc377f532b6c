use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite symbol alphabet; symbols are referred to by index elsewhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: Vec<char>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::InvalidInput("alphabet must be nonempty".into()));
        }
        let mut sorted = symbols.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != symbols.len() {
            return Err(Error::InvalidInput("alphabet has repeated symbols".into()));
        }
        Ok(Alphabet { symbols })
    }

    pub fn binary() -> Self {
        Alphabet {
            symbols: vec!['0', '1'],
        }
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index(&self, c: char) -> Option<u32> {
        self.symbols.iter().position(|&s| s == c).map(|i| i as u32)
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.chars()
            .map(|c| {
                self.index(c).ok_or_else(|| {
                    Error::InvalidInput(format!("symbol '{c}' not in alphabet"))
                })
            })
            .collect()
    }
}

/// Value domain a kernel reads its arguments from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Symbols `0..size`.
    Finite(usize),
    /// Reals compared only through their order; ties are rejected.
    RealOrder,
}

/// An arity-`ell` real-valued kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Kernel {
    /// Dense value table over `alphabet_size^arity` symbol tuples, row-major
    /// with the first argument as the most significant digit.
    Table {
        alphabet_size: usize,
        arity: usize,
        values: Vec<f64>,
    },
    /// 1 iff the arguments spell out `word`.
    Word { alphabet_size: usize, word: Vec<u32> },
    /// 1 iff the arguments realize the order pattern `pattern` (1-based ranks).
    PermPattern { pattern: Vec<usize> },
    /// Sign of the permutation induced by the argument order.
    Sign { arity: usize },
    /// Linear combination of kernels of equal arity and domain.
    Linear(Vec<(f64, Kernel)>),
}

/// JSON document for loading table kernels:
/// `{"alphabet": ["a","b"], "arity": 2, "values": [..]}` with
/// `values.len() == alphabet.len()^arity`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableKernelDoc {
    alphabet: Vec<char>,
    arity: usize,
    values: Vec<f64>,
}

impl Kernel {
    pub fn table(alphabet_size: usize, arity: usize, values: Vec<f64>) -> Result<Self> {
        let expect = (alphabet_size as u128).checked_pow(arity as u32);
        if expect != Some(values.len() as u128) {
            return Err(Error::InvalidInput(format!(
                "table kernel needs {alphabet_size}^{arity} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table kernel has non-finite entries".into()));
        }
        Ok(Kernel::Table {
            alphabet_size,
            arity,
            values,
        })
    }

    pub fn word_from_text(text: &str, alphabet: &Alphabet) -> Result<Self> {
        Ok(Kernel::Word {
            alphabet_size: alphabet.size(),
            word: alphabet.encode(text)?,
        })
    }

    /// Permutation pattern from its one-line notation, e.g. `[2,1]`.
    pub fn perm_pattern(pattern: Vec<usize>) -> Result<Self> {
        let ell = pattern.len();
        let mut seen = vec![false; ell + 1];
        for &p in &pattern {
            if p == 0 || p > ell || seen[p] {
                return Err(Error::InvalidInput(format!(
                    "{pattern:?} is not a permutation of 1..={ell}"
                )));
            }
            seen[p] = true;
        }
        Ok(Kernel::PermPattern { pattern })
    }

    /// Load a table kernel plus its alphabet from the JSON document format.
    pub fn table_from_json(doc: &str) -> Result<(Self, Alphabet)> {
        let doc: TableKernelDoc = serde_json::from_str(doc)
            .map_err(|e| Error::InvalidInput(format!("bad kernel document: {e}")))?;
        let alphabet = Alphabet::new(doc.alphabet)?;
        let kernel = Kernel::table(alphabet.size(), doc.arity, doc.values)?;
        Ok((kernel, alphabet))
    }

    pub fn arity(&self) -> usize {
        match self {
            Kernel::Table { arity, .. } => *arity,
            Kernel::Word { word, .. } => word.len(),
            Kernel::PermPattern { pattern } => pattern.len(),
            Kernel::Sign { arity } => *arity,
            Kernel::Linear(parts) => parts.first().map_or(0, |(_, k)| k.arity()),
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Kernel::Table { alphabet_size, .. } | Kernel::Word { alphabet_size, .. } => {
                Domain::Finite(*alphabet_size)
            }
            Kernel::PermPattern { .. } | Kernel::Sign { .. } => Domain::RealOrder,
            Kernel::Linear(parts) => parts.first().map_or(Domain::RealOrder, |(_, k)| k.domain()),
        }
    }

    /// Whether every value of the kernel is an integer, so counting can use
    /// an exact integer accumulator.
    pub fn integer_valued(&self) -> bool {
        match self {
            Kernel::Table { values, .. } => values.iter().all(|v| v.fract() == 0.0),
            Kernel::Word { .. } | Kernel::PermPattern { .. } | Kernel::Sign { .. } => true,
            Kernel::Linear(parts) => parts
                .iter()
                .all(|(c, k)| c.fract() == 0.0 && k.integer_valued()),
        }
    }

    /// Check that a `Linear` kernel is well-formed and all parts agree.
    pub fn validate(&self) -> Result<()> {
        if let Kernel::Linear(parts) = self {
            if parts.is_empty() {
                return Err(Error::InvalidInput("empty linear combination".into()));
            }
            let arity = parts[0].1.arity();
            let domain = parts[0].1.domain();
            for (_, k) in parts {
                k.validate()?;
                if k.arity() != arity || k.domain() != domain {
                    return Err(Error::InvalidInput(
                        "linear combination mixes arities or domains".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Evaluate on finite-alphabet symbols.
    pub fn eval_sym(&self, args: &[u32]) -> f64 {
        debug_assert_eq!(args.len(), self.arity());
        match self {
            Kernel::Table {
                alphabet_size,
                values,
                ..
            } => {
                let mut idx = 0usize;
                for &a in args {
                    idx = idx * alphabet_size + a as usize;
                }
                values[idx]
            }
            Kernel::Word { word, .. } => {
                if args.iter().zip(word).all(|(a, w)| a == w) {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Linear(parts) => parts.iter().map(|(c, k)| c * k.eval_sym(args)).sum(),
            Kernel::PermPattern { .. } | Kernel::Sign { .. } => {
                panic!("order kernel evaluated on symbols")
            }
        }
    }

    /// Evaluate on pairwise-distinct reals.
    pub fn eval_real(&self, args: &[f64]) -> f64 {
        debug_assert_eq!(args.len(), self.arity());
        match self {
            Kernel::PermPattern { pattern } => {
                for i in 0..args.len() {
                    for j in (i + 1)..args.len() {
                        if (args[i] < args[j]) != (pattern[i] < pattern[j]) {
                            return 0.0;
                        }
                    }
                }
                1.0
            }
            Kernel::Sign { .. } => {
                // Sign by counting order inversions.
                let mut inv = 0usize;
                for i in 0..args.len() {
                    for j in (i + 1)..args.len() {
                        if args[i] > args[j] {
                            inv += 1;
                        }
                    }
                }
                if inv % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Kernel::Linear(parts) => parts.iter().map(|(c, k)| c * k.eval_real(args)).sum(),
            Kernel::Table { .. } | Kernel::Word { .. } => {
                panic!("symbol kernel evaluated on reals")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_indicator_matches_definition() {
        let a = Alphabet::binary();
        let k = Kernel::word_from_text("01", &a).unwrap();
        assert_eq!(k.eval_sym(&[0, 1]), 1.0);
        assert_eq!(k.eval_sym(&[1, 1]), 0.0);
        assert_eq!(k.arity(), 2);
        assert!(k.integer_valued());
    }

    #[test]
    fn perm_pattern_indicator() {
        let k = Kernel::perm_pattern(vec![2, 1]).unwrap();
        assert_eq!(k.eval_real(&[0.9, 0.2]), 1.0);
        assert_eq!(k.eval_real(&[0.1, 0.2]), 0.0);
        let k = Kernel::perm_pattern(vec![1, 3, 2]).unwrap();
        assert_eq!(k.eval_real(&[0.1, 0.9, 0.5]), 1.0);
        assert_eq!(k.eval_real(&[0.5, 0.9, 0.1]), 0.0);
        assert!(Kernel::perm_pattern(vec![1, 3]).is_err());
    }

    #[test]
    fn sign_kernel() {
        let k = Kernel::Sign { arity: 3 };
        assert_eq!(k.eval_real(&[0.1, 0.2, 0.3]), 1.0);
        assert_eq!(k.eval_real(&[0.2, 0.1, 0.3]), -1.0);
    }

    #[test]
    fn table_kernel_json_round_trip() {
        let doc = r#"{"alphabet": ["0", "1"], "arity": 2, "values": [0.0, 0.0, 0.0, 1.0]}"#;
        let (k, a) = Kernel::table_from_json(doc).unwrap();
        assert_eq!(a.size(), 2);
        assert_eq!(k.eval_sym(&[1, 1]), 1.0);
        assert_eq!(k.eval_sym(&[0, 1]), 0.0);

        let bad = r#"{"alphabet": ["0", "1"], "arity": 2, "values": [1.0]}"#;
        assert!(Kernel::table_from_json(bad).is_err());
    }

    #[test]
    fn linear_combination_value() {
        let a = Alphabet::binary();
        let k = Kernel::Linear(vec![
            (1.0, Kernel::word_from_text("101", &a).unwrap()),
            (-1.0, Kernel::word_from_text("011", &a).unwrap()),
        ]);
        k.validate().unwrap();
        assert_eq!(k.eval_sym(&[1, 0, 1]), 1.0);
        assert_eq!(k.eval_sym(&[0, 1, 1]), -1.0);
        assert_eq!(k.eval_sym(&[1, 1, 0]), 0.0);
        assert!(k.integer_valued());
    }
}
