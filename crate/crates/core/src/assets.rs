//! The shipped mini-language fixtures.

/// Grammar profile of the mini-language (start symbol `program`).
pub const GRAMMAR_PROFILE: &str = include_str!("../assets/minilang.grammar.json");

/// Seed declarations: the root context shared by the generator and the
/// reference checker.
pub const SEED: &str = include_str!("../assets/minilang.seed.json");
