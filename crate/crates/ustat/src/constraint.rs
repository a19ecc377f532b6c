use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Whether finite gap bounds are read as `<= d` or `= d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bounded,
    Exact,
}

/// One gap bound between consecutive kernel slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gap {
    /// `i_{j+1} - i_j <= d` (or `= d` under an exact constraint).
    Finite(usize),
    /// No bound on this gap.
    Unbounded,
}

impl Gap {
    pub fn is_finite(self) -> bool {
        matches!(self, Gap::Finite(_))
    }
}

/// A gap-bound vector for a kernel of arity `gaps.len() + 1`.
///
/// Every finite entry is at least 1; `Unbounded` entries split the slots
/// into independent blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    gaps: Vec<Gap>,
}

impl Constraint {
    pub fn new(gaps: Vec<Gap>) -> Result<Self> {
        if let Some(j) = gaps.iter().position(|g| matches!(g, Gap::Finite(0))) {
            return Err(Error::InvalidInput(format!(
                "gap bound at position {j} must be >= 1"
            )));
        }
        Ok(Constraint { gaps })
    }

    /// The fully unconstrained vector for arity `ell`.
    pub fn unconstrained(ell: usize) -> Self {
        assert!(ell >= 1);
        Constraint {
            gaps: vec![Gap::Unbounded; ell - 1],
        }
    }

    /// Parse entries like `1,inf,2`; `inf`, `∞` and `*` mean unbounded.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Constraint::new(Vec::new());
        }
        let gaps = s
            .split(',')
            .map(|tok| {
                let tok = tok.trim();
                if tok.eq_ignore_ascii_case("inf") || tok == "∞" || tok == "*" {
                    Ok(Gap::Unbounded)
                } else {
                    tok.parse::<usize>()
                        .map(Gap::Finite)
                        .map_err(|_| Error::InvalidInput(format!("bad gap entry '{tok}'")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Constraint::new(gaps)
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    /// Kernel arity this constraint applies to.
    pub fn ell(&self) -> usize {
        self.gaps.len() + 1
    }

    /// Number of blocks: 1 + number of unbounded gaps.
    pub fn block_count(&self) -> usize {
        1 + self.gaps.iter().filter(|g| !g.is_finite()).count()
    }

    /// Sum of the finite gap bounds; zero iff fully unconstrained.
    pub fn gap_sum(&self) -> usize {
        self.gaps
            .iter()
            .map(|g| match g {
                Gap::Finite(d) => *d,
                Gap::Unbounded => 0,
            })
            .sum()
    }

    pub fn is_unconstrained(&self) -> bool {
        self.gaps.iter().all(|g| !g.is_finite())
    }

    /// All gaps in {1, inf}: bounded and exact readings coincide.
    pub fn is_vincular(&self) -> bool {
        self.gaps
            .iter()
            .all(|g| matches!(g, Gap::Unbounded | Gap::Finite(1)))
    }

    /// Number of exact sub-constraints, i.e. the product of the finite bounds.
    pub fn exact_subconstraint_count(&self) -> u128 {
        self.gaps
            .iter()
            .map(|g| match g {
                Gap::Finite(d) => *d as u128,
                Gap::Unbounded => 1,
            })
            .product()
    }

    /// Every constraint with `1 <= d'_j <= d_j` on finite entries and
    /// `d'_j = inf` where `d_j = inf`.
    ///
    /// A bounded-gap U-statistic is the sum of the exactly-constrained ones
    /// over this list.
    pub fn exact_subconstraints(&self) -> Vec<Constraint> {
        let mut out = vec![Constraint { gaps: Vec::new() }];
        for g in &self.gaps {
            let choices: Vec<Gap> = match g {
                Gap::Unbounded => vec![Gap::Unbounded],
                Gap::Finite(d) => (1..=*d).map(Gap::Finite).collect(),
            };
            let mut next = Vec::with_capacity(out.len() * choices.len());
            for prefix in &out {
                for c in &choices {
                    let mut gaps = prefix.gaps.clone();
                    gaps.push(*c);
                    next.push(Constraint { gaps });
                }
            }
            out = next;
        }
        out
    }

    /// The constraint with bound `m` on the gaps in `positions` (0-based) and
    /// no bound elsewhere; used by the inclusion-exclusion identity for
    /// minimum-gap statistics.
    pub fn with_bound_at(ell: usize, positions: &[usize], m: usize) -> Self {
        let mut gaps = vec![Gap::Unbounded; ell - 1];
        for &j in positions {
            gaps[j] = Gap::Finite(m);
        }
        Constraint { gaps }
    }
}

impl std::fmt::Display for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self
            .gaps
            .iter()
            .map(|g| match g {
                Gap::Finite(d) => d.to_string(),
                Gap::Unbounded => "inf".to_string(),
            })
            .collect();
        write!(f, "({})", parts.join(","))
    }
}
