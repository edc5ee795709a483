use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::generator::{context_of, reserve_block_names, sample_block, GenError, SamplerConfig};
use crate::grammar::EnrichedGrammar;
use crate::ir::{
    append_snippets, extract_partition, remove_partition, self_sufficient_partition, Block, DeclKind, Partition,
    Snippet,
};
use crate::semantics::{merge_contexts, SemanticContext};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    Removal,
    AddContextFree,
    AddContextAware,
}

impl MutationKind {
    pub const ALL: [MutationKind; 3] = [
        MutationKind::Removal,
        MutationKind::AddContextFree,
        MutationKind::AddContextAware,
    ];
}

fn random_partition<R: Rng + ?Sized>(b: &Block, rng: &mut R) -> Partition {
    if b.is_empty() {
        Partition::default()
    } else {
        self_sufficient_partition(b, rng.gen_range(0..b.len()))
    }
}

/// Drops the self-sufficient partition around a uniformly chosen snippet.
pub fn mutate_removal<R: Rng + ?Sized>(b: &Block, rng: &mut R) -> Block {
    let p = random_partition(b, rng);
    remove_partition(b, &p)
}

/// Appends a fresh program sampled without knowledge of `b`, except that
/// every name `b` uses is reserved so the two cannot collide.
pub fn mutate_add_context_free<R: Rng>(
    b: &Block,
    g: &EnrichedGrammar,
    root: &SemanticContext,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Block, GenError> {
    let mut ctx = root.clone();
    reserve_block_names(&mut ctx, b);
    let extra = sample_block(g, &ctx, cfg, rng)?;
    Ok(append_snippets(b, extra.into_snippets())?)
}

/// Appends a program sampled in a context that also holds the top-level
/// declarations of `b`, so the new code may use them.
pub fn mutate_add_context_aware<R: Rng>(
    b: &Block,
    g: &EnrichedGrammar,
    root: &SemanticContext,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Block, GenError> {
    let ctx = merge_contexts(root, &context_of(b, root)).map_err(|e| GenError::Unsatisfiable(e.to_string()))?;
    let extra = sample_block(g, &ctx, cfg, rng)?;
    Ok(append_snippets(b, extra.into_snippets())?)
}

/// Applies a uniformly chosen mutation. A failed addition leaves the
/// block unchanged.
pub fn mutate<R: Rng>(
    b: &Block,
    g: &EnrichedGrammar,
    root: &SemanticContext,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> (MutationKind, Block) {
    let kind = MutationKind::ALL[rng.gen_range(0..MutationKind::ALL.len())];
    let out = match kind {
        MutationKind::Removal => Ok(mutate_removal(b, rng)),
        MutationKind::AddContextFree => mutate_add_context_free(b, g, root, cfg, rng),
        MutationKind::AddContextAware => mutate_add_context_aware(b, g, root, cfg, rng),
    };
    match out {
        Ok(block) => (kind, block),
        Err(e) => {
            log::debug!("{kind:?} mutation failed: {e}");
            (kind, b.clone())
        }
    }
}

/// Declarations of `incoming` that cannot coexist with `kept`: a property
/// or variable whose name is already taken, or a function whose name,
/// parameter types and return type all match an existing one. Functions
/// that differ only in return type are let through.
pub fn mate_conflicts(kept: &Block, incoming: &[Snippet]) -> BTreeSet<String> {
    let typed = kept.typed_signatures();
    let names = kept.names();
    let mut out = BTreeSet::new();
    for s in incoming {
        let clash = match s.lambda.kind {
            DeclKind::Opaque => false,
            DeclKind::Function => {
                typed.contains(&(s.name.clone(), s.lambda.clone()))
                    || kept
                        .snippets()
                        .iter()
                        .any(|k| k.name == s.name && k.lambda.kind != DeclKind::Function)
            }
            DeclKind::Property | DeclKind::Variable => names.contains(&s.name),
        };
        if clash {
            out.insert(s.name.clone());
        }
    }
    out
}

/// A random self-sufficient partition of each parent (empty for an empty
/// parent).
pub fn choose_partitions<R: Rng + ?Sized>(p1: &Block, p2: &Block, rng: &mut R) -> (Partition, Partition) {
    let x1 = random_partition(p1, rng);
    let x2 = random_partition(p2, rng);
    (x1, x2)
}

/// Names that would clash in either offspring if `x1` and `x2` were
/// swapped.
pub fn splice_conflicts(p1: &Block, p2: &Block, x1: &Partition, x2: &Partition) -> BTreeSet<String> {
    let mut out = mate_conflicts(&remove_partition(p1, x1), &extract_partition(p2, x2));
    out.extend(mate_conflicts(&remove_partition(p2, x2), &extract_partition(p1, x1)));
    out
}

/// `o1 = (p1 - x1) + x2` and `o2 = (p2 - x2) + x1`, each topologically
/// ordered.
pub fn recombine_at(p1: &Block, p2: &Block, x1: &Partition, x2: &Partition) -> (Block, Block) {
    let mut o1 = remove_partition(p1, x1).into_snippets();
    o1.extend(extract_partition(p2, x2));
    let mut o2 = remove_partition(p2, x2).into_snippets();
    o2.extend(extract_partition(p1, x1));
    (Block::assemble(o1), Block::assemble(o2))
}

/// Swaps one random self-sufficient partition between the parents.
pub fn recombine<R: Rng + ?Sized>(p1: &Block, p2: &Block, rng: &mut R) -> (Block, Block) {
    let (x1, x2) = choose_partitions(p1, p2, rng);
    recombine_at(p1, p2, &x1, &x2)
}
