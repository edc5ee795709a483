//! Grammar-based generative fuzzing with diversity-driven search and
//! differential compiler testing.
//!
//! The pipeline: an [`grammar::EnrichedGrammar`] and a
//! [`semantics::SemanticContext`] drive the [`generator`], which produces
//! [`ir::Block`]s. Blocks are evolved by the algorithms in [`evolution`] and
//! rendered programs are compiled by two compilers in [`difftest`].
//! [`refc`] is a reference checker for the shipped mini-language with
//! optional seeded defects, and [`campaign`] ties everything into runs.

pub mod assets;
pub mod campaign;
pub mod difftest;
pub mod evolution;
pub mod generator;
pub mod grammar;
pub mod ir;
pub mod refc;
pub mod semantics;

pub use evolution::{GaConfig, Individual};
pub use generator::{sample_block, SamplerConfig};
pub use grammar::{load_grammar, EnrichedGrammar};
pub use ir::{feature_vector, render, Block, FeatureVector, Fragment, Snippet};
pub use semantics::{extract_context, SemanticContext, TypeId};
