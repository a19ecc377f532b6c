use crate::error::{Error, Result};
use crate::kernel::{Alphabet, Domain, Kernel};

/// An immutable observation sequence; either finite-alphabet symbols or reals.
#[derive(Debug, Clone, PartialEq)]
pub enum ObsSeq {
    Symbols { data: Vec<u32>, alphabet_size: usize },
    Reals(Vec<f64>),
}

impl ObsSeq {
    pub fn from_text(text: &str, alphabet: &Alphabet) -> Result<Self> {
        Ok(ObsSeq::Symbols {
            data: alphabet.encode(text)?,
            alphabet_size: alphabet.size(),
        })
    }

    pub fn from_symbols(data: Vec<u32>, alphabet_size: usize) -> Result<Self> {
        if let Some(&s) = data.iter().find(|&&s| s as usize >= alphabet_size) {
            return Err(Error::AlphabetMismatch {
                expected: alphabet_size,
                found: s as usize,
            });
        }
        Ok(ObsSeq::Symbols {
            data,
            alphabet_size,
        })
    }

    pub fn from_reals(data: Vec<f64>) -> Self {
        ObsSeq::Reals(data)
    }

    /// A permutation in one-line notation, read as a real sequence.
    pub fn from_permutation(perm: &[usize]) -> Self {
        ObsSeq::Reals(perm.iter().map(|&v| v as f64).collect())
    }

    pub fn len(&self) -> usize {
        match self {
            ObsSeq::Symbols { data, .. } => data.len(),
            ObsSeq::Reals(data) => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn symbols(&self) -> Option<&[u32]> {
        match self {
            ObsSeq::Symbols { data, .. } => Some(data),
            ObsSeq::Reals(_) => None,
        }
    }

    pub fn reals(&self) -> Option<&[f64]> {
        match self {
            ObsSeq::Reals(data) => Some(data),
            ObsSeq::Symbols { .. } => None,
        }
    }

    /// Fail with the offending positions if two real entries tie.
    pub fn check_distinct(&self) -> Result<()> {
        if let ObsSeq::Reals(data) = self {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.sort_unstable_by(|&a, &b| data[a].total_cmp(&data[b]));
            for w in idx.windows(2) {
                if data[w[0]] == data[w[1]] {
                    let (mut a, mut b) = (w[0], w[1]);
                    if a > b {
                        std::mem::swap(&mut a, &mut b);
                    }
                    return Err(Error::TieError(a, b));
                }
            }
        }
        Ok(())
    }

    /// Check a kernel can be evaluated on this sequence.
    pub fn check_kernel(&self, f: &Kernel) -> Result<()> {
        f.validate()?;
        match (self, f.domain()) {
            (ObsSeq::Symbols { alphabet_size, .. }, Domain::Finite(a)) => {
                if *alphabet_size != a {
                    Err(Error::AlphabetMismatch {
                        expected: a,
                        found: *alphabet_size,
                    })
                } else {
                    Ok(())
                }
            }
            (ObsSeq::Reals(_), Domain::RealOrder) => self.check_distinct(),
            _ => Err(Error::InvalidInput(
                "kernel domain does not match the observation type".into(),
            )),
        }
    }
}
