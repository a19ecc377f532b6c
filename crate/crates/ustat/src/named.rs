//! Pre-wired worked cases used by the CLI and the acceptance suite.

use crate::constraint::{Constraint, Mode};
use crate::error::{Error, Result};
use crate::kernel::{Alphabet, Kernel};
use crate::model::{FiniteDist, SequenceModel};
use crate::spectral;

/// A fully-specified statistic: kernel, constraint, reading mode, and model.
#[derive(Debug, Clone)]
pub struct NamedCase {
    pub name: &'static str,
    pub kernel: Kernel,
    pub constraint: Constraint,
    pub mode: Mode,
    pub model: SequenceModel,
}

/// The degenerate constrained difference of two word counts on fair bits.
pub fn degenerate_word_difference() -> NamedCase {
    let a = Alphabet::binary();
    NamedCase {
        name: "e0",
        kernel: Kernel::Linear(vec![
            (1.0, Kernel::word_from_text("101", &a).unwrap()),
            (-1.0, Kernel::word_from_text("011", &a).unwrap()),
        ]),
        constraint: Constraint::parse("1,inf").unwrap(),
        mode: Mode::Bounded,
        model: SequenceModel::iid_uniform_binary(),
    }
}

/// The product kernel on bits whose rescaled limit is `(zeta^2 - 1)/2`.
pub fn product_bits() -> NamedCase {
    NamedCase {
        name: "e21",
        kernel: spectral::product_bit_kernel(),
        constraint: Constraint::unconstrained(2),
        mode: Mode::Bounded,
        model: SequenceModel::iid_uniform_binary(),
    }
}

/// The four-letter difference-product kernel with an infinite-spectrum
/// degenerate limit.
pub fn four_letter_difference() -> NamedCase {
    NamedCase {
        name: "e4",
        kernel: spectral::four_letter_kernel(),
        constraint: Constraint::unconstrained(2),
        mode: Mode::Bounded,
        model: SequenceModel::IidFinite {
            dist: FiniteDist::uniform(4),
        },
    }
}

/// Inversions of a uniformly random permutation.
pub fn inversions() -> NamedCase {
    NamedCase {
        name: "inversions",
        kernel: Kernel::perm_pattern(vec![2, 1]).unwrap(),
        constraint: Constraint::unconstrained(2),
        mode: Mode::Bounded,
        model: SequenceModel::IidUniform01,
    }
}

/// The constrained word "101" with an adjacency bound on its first gap.
pub fn word_101() -> NamedCase {
    let a = Alphabet::binary();
    NamedCase {
        name: "word-101",
        kernel: Kernel::word_from_text("101", &a).unwrap(),
        constraint: Constraint::parse("1,inf").unwrap(),
        mode: Mode::Bounded,
        model: SequenceModel::iid_uniform_binary(),
    }
}

/// Look up a named case.
pub fn named_case(name: &str) -> Result<NamedCase> {
    match name {
        "e0" => Ok(degenerate_word_difference()),
        "e21" => Ok(product_bits()),
        "e4" => Ok(four_letter_difference()),
        "inversions" => Ok(inversions()),
        "word-101" => Ok(word_101()),
        _ => Err(Error::InvalidInput(format!(
            "unknown named case '{name}'; known: e0, e21, e4, inversions, word-101"
        ))),
    }
}
