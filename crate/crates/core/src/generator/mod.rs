//! Random sampling of valid programs from an enriched grammar.
//!
//! Plain grammar nodes expand structurally; hook nodes call the built-in
//! procedures in [`hooks`], which query and extend the semantic context so
//! every emitted line type-checks. The output of a traversal is packaged
//! into a [`Block`] according to each node's `emit` attribute.

mod expr;
mod hooks;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{Emit, EnrichedGrammar, GrammarNode, NodeKind};
use crate::ir::{Block, DeclKind, FeatureCounts, Fragment, IrError, Lambda, Snippet};
use crate::semantics::{ContextMark, SemanticContext, TypeId};

pub(crate) use expr::is_identifier;
pub use expr::{sample_expression, Expr};

/// Plain-node nesting beyond this means the grammar recurses without going
/// through a hook.
pub const PLAIN_DEPTH_CAP: usize = 256;

/// Attempts per hook invocation before the failure is passed up.
pub const HOOK_RETRIES: usize = 8;

pub const HOOK_IDS: [&str; 6] = [
    "val_declaration",
    "var_declaration",
    "function_declaration",
    "assignment",
    "call_statement",
    "return_statement",
];

pub fn builtin_hooks() -> BTreeSet<String> {
    HOOK_IDS.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("unsatisfiable context: {0}")]
    Unsatisfiable(String),
    #[error("plain-node depth cap {0} exceeded")]
    DepthCapExceeded(usize),
    #[error("no built-in hook named '{0}'")]
    UnknownHook(String),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ir(#[from] IrError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Probability of sampling a simple expression instead of an if/elvis.
    pub simplicity_bias: f64,
    pub max_expr_depth: usize,
    pub rng_seed: u64,
    /// Soft cap on lines per block: optional repetitions stop once reached.
    pub fragment_budget: usize,
    /// Functions nested this deep or deeper get no local functions.
    pub max_function_nesting: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            simplicity_bias: 0.5,
            max_expr_depth: 6,
            rng_seed: 0,
            fragment_budget: 200,
            max_function_nesting: 2,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if !(0.0..=1.0).contains(&self.simplicity_bias) {
            return Err(GenError::InvalidConfig(format!(
                "simplicity bias {} is outside [0, 1]",
                self.simplicity_bias
            )));
        }
        if self.max_expr_depth == 0 {
            return Err(GenError::InvalidConfig("max_expr_depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// The random stream for the `k`-th program of a run. Streams are
/// independent of how programs are distributed over workers.
pub fn program_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Output of a node before it is packaged into lines and snippets.
#[derive(Clone, Debug)]
pub(crate) enum Item {
    Token(Token),
    Line(Fragment),
    Snippet(Snippet),
    /// A top-level declaration made while producing the enclosing snippet.
    Declared(String, Lambda),
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Token {
    pub text: String,
    pub refs: BTreeSet<String>,
    pub decls: BTreeSet<String>,
    pub tags: FeatureCounts,
}

pub(crate) struct Sampler<'a, R: Rng> {
    grammar: &'a EnrichedGrammar,
    cfg: &'a SamplerConfig,
    pub(crate) ctx: SemanticContext,
    pub(crate) rng: &'a mut R,
    /// Return types of the functions being generated, innermost last.
    pub(crate) frames: Vec<TypeId>,
    fragments_emitted: usize,
    plain_depth: usize,
}

struct Checkpoint {
    ctx: ContextMark,
    frames: usize,
    fragments: usize,
}

impl<'a, R: Rng> Sampler<'a, R> {
    fn new(grammar: &'a EnrichedGrammar, cfg: &'a SamplerConfig, ctx: SemanticContext, rng: &'a mut R) -> Self {
        Sampler {
            grammar,
            cfg,
            ctx,
            rng,
            frames: Vec::new(),
            fragments_emitted: 0,
            plain_depth: 0,
        }
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            ctx: self.ctx.mark(),
            frames: self.frames.len(),
            fragments: self.fragments_emitted,
        }
    }

    fn restore(&mut self, cp: Checkpoint) {
        self.ctx.rollback(cp.ctx);
        self.frames.truncate(cp.frames);
        self.fragments_emitted = cp.fragments;
    }

    pub(crate) fn indent(&self) -> String {
        " ".repeat(4 * self.ctx.depth())
    }

    pub(crate) fn line(&mut self, fragment: Fragment) -> Item {
        self.fragments_emitted += 1;
        Item::Line(fragment)
    }

    pub(crate) fn expand(&mut self, id: &str) -> Result<Vec<Item>, GenError> {
        let node = self
            .grammar
            .node(id)
            .ok_or_else(|| GenError::Unsatisfiable(format!("unknown symbol '{id}'")))?;
        self.plain_depth += 1;
        if self.plain_depth > PLAIN_DEPTH_CAP {
            self.plain_depth -= 1;
            return Err(GenError::DepthCapExceeded(PLAIN_DEPTH_CAP));
        }
        let items = self.expand_node(node);
        self.plain_depth -= 1;
        let items = items?;
        Ok(match node.emit {
            Emit::Inline => items,
            Emit::Fragment => self.close_lines(items),
            Emit::Snippet => {
                let s = self.make_snippet(items);
                vec![Item::Snippet(s)]
            }
        })
    }

    fn expand_node(&mut self, node: &GrammarNode) -> Result<Vec<Item>, GenError> {
        match node.kind {
            NodeKind::Terminal => Ok(vec![Item::Token(Token {
                text: node.literal().to_string(),
                ..Token::default()
            })]),
            NodeKind::Sequence => {
                let mut out = Vec::new();
                for c in &node.children {
                    out.extend(self.expand(c)?);
                }
                Ok(out)
            }
            NodeKind::Alternation => self.expand_alternation(node),
            NodeKind::Repetition => {
                let count = self.rng.gen_range(node.min..=node.max);
                let mut out = Vec::new();
                for i in 0..count {
                    if i >= node.min && self.fragments_emitted >= self.cfg.fragment_budget {
                        break;
                    }
                    out.extend(self.expand(&node.children[0])?);
                }
                Ok(out)
            }
            NodeKind::Optional => {
                if self.rng.gen_bool(0.5) {
                    self.expand(&node.children[0])
                } else {
                    Ok(Vec::new())
                }
            }
            NodeKind::Hook => {
                let hook = node.hook_id.as_deref().expect("validated hook node");
                self.run_hook(hook, node)
            }
        }
    }

    /// Picks a child by weight; children that turn out unsatisfiable are
    /// dropped and the choice is repeated among the rest.
    fn expand_alternation(&mut self, node: &GrammarNode) -> Result<Vec<Item>, GenError> {
        let mut open: Vec<usize> = (0..node.children.len()).collect();
        let mut last = None;
        while !open.is_empty() {
            let weights: Vec<f64> = open
                .iter()
                .map(|&i| node.weights.get(i).copied().unwrap_or(1.0))
                .collect();
            let total: f64 = weights.iter().sum();
            let mut pick = self.rng.gen_range(0.0..total);
            let mut slot = open.len() - 1;
            for (k, w) in weights.iter().enumerate() {
                if pick < *w {
                    slot = k;
                    break;
                }
                pick -= w;
            }
            let child = open.remove(slot);
            let cp = self.checkpoint();
            match self.expand(&node.children[child]) {
                Ok(items) => return Ok(items),
                Err(GenError::Unsatisfiable(msg)) => {
                    self.restore(cp);
                    last = Some(msg);
                }
                Err(e) => return Err(e),
            }
        }
        Err(GenError::Unsatisfiable(format!(
            "no alternative of '{}' is satisfiable ({})",
            node.id,
            last.unwrap_or_default()
        )))
    }

    fn run_hook(&mut self, hook: &str, node: &GrammarNode) -> Result<Vec<Item>, GenError> {
        let mut last = String::new();
        for _ in 0..HOOK_RETRIES {
            let cp = self.checkpoint();
            let result = match hook {
                "val_declaration" => self.property_declaration(false),
                "var_declaration" => self.property_declaration(true),
                "function_declaration" => self.function_declaration(node),
                "assignment" => self.assignment(),
                "call_statement" => self.call_statement(),
                "return_statement" => self.return_statement(),
                other => return Err(GenError::UnknownHook(other.to_string())),
            };
            match result {
                Ok(items) => return Ok(items),
                Err(GenError::Unsatisfiable(msg)) => {
                    self.restore(cp);
                    last = msg;
                }
                Err(e) => return Err(e),
            }
        }
        Err(GenError::Unsatisfiable(format!("hook '{hook}': {last}")))
    }

    /// Joins loose tokens into lines indented for the current scope.
    pub(crate) fn close_lines(&mut self, items: Vec<Item>) -> Vec<Item> {
        let mut out = Vec::new();
        let mut pending: Vec<Token> = Vec::new();
        for item in items {
            match item {
                Item::Token(t) => pending.push(t),
                other => {
                    if !pending.is_empty() {
                        let line = self.join_tokens(std::mem::take(&mut pending));
                        out.push(line);
                    }
                    out.push(other);
                }
            }
        }
        if !pending.is_empty() {
            let line = self.join_tokens(pending);
            out.push(line);
        }
        out
    }

    fn join_tokens(&mut self, tokens: Vec<Token>) -> Item {
        let mut f = Fragment::new(self.indent());
        let mut first = true;
        for t in tokens {
            if !first {
                f.text.push(' ');
            }
            first = false;
            f.text.push_str(&t.text);
            f.referenced_names.extend(t.refs);
            f.declared_names.extend(t.decls);
            f.feature_tags.merge(&t.tags);
        }
        self.line(f)
    }

    fn make_snippet(&mut self, items: Vec<Item>) -> Snippet {
        let mut declared = None;
        let mut fragments = Vec::new();
        for item in self.close_lines(items) {
            match item {
                Item::Line(f) => fragments.push(f),
                Item::Snippet(s) => fragments.extend(s.fragments),
                Item::Declared(name, lambda) => {
                    declared.get_or_insert((name, lambda));
                }
                Item::Token(_) => unreachable!("tokens were closed into lines"),
            }
        }
        let (name, lambda) = declared.unwrap_or_else(|| (self.ctx.fresh_identifier("anon"), Lambda::opaque()));
        Snippet::new(name, lambda, fragments)
    }
}

/// Samples one program from `root_ctx` (which is cloned, never mutated).
pub fn sample_block<R: Rng>(
    g: &EnrichedGrammar,
    root_ctx: &SemanticContext,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<Block, GenError> {
    let mut s = Sampler::new(g, cfg, root_ctx.clone(), rng);
    let items = s.expand(g.start())?;
    let mut snippets = Vec::new();
    let mut loose = Vec::new();
    for item in items {
        match item {
            Item::Snippet(sn) => snippets.push(sn),
            other => loose.push(other),
        }
    }
    if loose.iter().any(|i| !matches!(i, Item::Declared(..))) {
        snippets.push(s.make_snippet(loose));
    }
    Ok(Block::new(snippets)?)
}

/// Structural expansion of a single node with no snippet packaging: the
/// text of every produced line and token joined by single spaces.
pub fn default_sample<R: Rng>(
    node: &GrammarNode,
    g: &EnrichedGrammar,
    ctx: &SemanticContext,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<String, GenError> {
    let mut s = Sampler::new(g, cfg, ctx.clone(), rng);
    let items = s.expand_node(node)?;
    let mut parts = Vec::new();
    for item in items {
        match item {
            Item::Token(t) => parts.push(t.text),
            Item::Line(f) => parts.push(f.text),
            Item::Snippet(sn) => parts.extend(sn.fragments.into_iter().map(|f| f.text)),
            Item::Declared(..) => {}
        }
    }
    Ok(parts.join(" "))
}

/// The declarations of a block as a merge overlay: its top-level callables
/// declared, and every name it uses reserved.
pub fn context_of(block: &Block, root_ctx: &SemanticContext) -> SemanticContext {
    use crate::semantics::{Callable, CallableKind};
    let mut ctx = SemanticContext::with_types_of(root_ctx);
    for s in block.snippets() {
        let kind = match s.lambda.kind {
            DeclKind::Function => CallableKind::Function,
            DeclKind::Property => CallableKind::Property,
            DeclKind::Variable => CallableKind::Variable,
            DeclKind::Opaque => continue,
        };
        let Some(returns) = s.lambda.returns.clone() else {
            continue;
        };
        // Duplicates only exist after recombination; the first one wins.
        let _ = ctx.declare(Callable::new(s.name.clone(), kind, s.lambda.params.clone(), returns));
    }
    reserve_block_names(&mut ctx, block);
    ctx
}

/// Reserves every name declared anywhere in `block`.
pub fn reserve_block_names(ctx: &mut SemanticContext, block: &Block) {
    for s in block.snippets() {
        ctx.reserve(s.name.clone());
        for f in &s.fragments {
            for n in &f.declared_names {
                ctx.reserve(n.clone());
            }
        }
    }
}

/// Endless stream of independently sampled programs.
pub struct RandomSearch<'a> {
    grammar: &'a EnrichedGrammar,
    root: &'a SemanticContext,
    cfg: SamplerConfig,
    next: u64,
}

impl<'a> RandomSearch<'a> {
    pub fn new(grammar: &'a EnrichedGrammar, root: &'a SemanticContext, cfg: SamplerConfig) -> Self {
        RandomSearch {
            grammar,
            root,
            cfg,
            next: 0,
        }
    }

    /// Samples the next program; the index identifies its random stream.
    pub fn next_block(&mut self) -> (u64, Result<Block, GenError>) {
        let k = self.next;
        self.next += 1;
        let mut rng = program_rng(self.cfg.rng_seed, k);
        (k, sample_block(self.grammar, self.root, &self.cfg, &mut rng))
    }
}

/// Samples until the budget runs out. Failed samples are logged and skipped.
pub fn run_random_search(
    g: &EnrichedGrammar,
    root_ctx: &SemanticContext,
    cfg: &SamplerConfig,
    budget: Duration,
) -> Vec<Block> {
    let start = Instant::now();
    let mut search = RandomSearch::new(g, root_ctx, cfg.clone());
    let mut archive = Vec::new();
    while start.elapsed() < budget {
        match search.next_block() {
            (_, Ok(b)) => archive.push(b),
            (k, Err(e)) => log::warn!("sample {k} failed: {e}"),
        }
    }
    archive
}
