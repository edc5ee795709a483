//! Hierarchical program encoding: a [`Block`] is an ordered list of
//! [`Snippet`]s (top-level declarations), each made of [`Fragment`]s (lines).
//!
//! Blocks are values. Every operation returns a new block; dependency lists
//! are recomputed whenever snippets are assembled into a block.

pub mod scan;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::semantics::{Signature, TypeId};

/// Appended to every rendered program so each file is a complete unit.
pub const FOOTER: &str = "fun main() {}\n";

pub const FEATURE_COUNT: usize = 6;
pub const VECTOR_LEN: usize = FEATURE_COUNT + 1;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum IrError {
    #[error("dependency cycle between snippets {0:?}")]
    Cycle(Vec<String>),
    #[error("conflicting signatures: {}", .0.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "))]
    Conflict(Vec<Signature>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feature {
    FunctionDeclaration,
    DeclarationStatement,
    AssignmentStatement,
    CallExpression,
    IfExpression,
    ElvisExpression,
}

impl Feature {
    pub const ALL: [Feature; FEATURE_COUNT] = [
        Feature::FunctionDeclaration,
        Feature::DeclarationStatement,
        Feature::AssignmentStatement,
        Feature::CallExpression,
        Feature::IfExpression,
        Feature::ElvisExpression,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::FunctionDeclaration => "function-declaration",
            Feature::DeclarationStatement => "declaration-statement",
            Feature::AssignmentStatement => "assignment-statement",
            Feature::CallExpression => "call-expression",
            Feature::IfExpression => "if-expression",
            Feature::ElvisExpression => "elvis-expression",
        }
    }
}

/// Multiset over the feature alphabet.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureCounts(pub [u32; FEATURE_COUNT]);

impl FeatureCounts {
    pub fn add(&mut self, f: Feature) {
        self.0[f.index()] += 1;
    }

    pub fn merge(&mut self, other: &FeatureCounts) {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
    }

    pub fn get(&self, f: Feature) -> u32 {
        self.0[f.index()]
    }
}

/// One line of program text with precomputed metadata.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fragment {
    pub text: String,
    pub referenced_names: BTreeSet<String>,
    pub declared_names: BTreeSet<String>,
    pub feature_tags: FeatureCounts,
}

impl Fragment {
    pub fn new(text: impl Into<String>) -> Self {
        Fragment {
            text: text.into(),
            referenced_names: BTreeSet::new(),
            declared_names: BTreeSet::new(),
            feature_tags: FeatureCounts::default(),
        }
    }

    /// Whether the stored references agree with a scan of the text.
    pub fn references_consistent(&self) -> bool {
        scan::referenced_identifiers(&self.text) == self.referenced_names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Function,
    Property,
    Variable,
    /// Top-level text that declares nothing callable.
    Opaque,
}

/// Signature metadata of a snippet's declaration.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Lambda {
    pub kind: DeclKind,
    pub params: Vec<TypeId>,
    pub returns: Option<TypeId>,
}

impl Lambda {
    pub fn opaque() -> Self {
        Lambda {
            kind: DeclKind::Opaque,
            params: Vec::new(),
            returns: None,
        }
    }
}

/// A top-level declaration ⟨N, Λ, D, F⟩.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Snippet {
    pub name: String,
    pub lambda: Lambda,
    pub deps: Vec<String>,
    pub fragments: Vec<Fragment>,
}

impl Snippet {
    pub fn new(name: impl Into<String>, lambda: Lambda, fragments: Vec<Fragment>) -> Self {
        Snippet {
            name: name.into(),
            lambda,
            deps: Vec::new(),
            fragments,
        }
    }

    /// Names referenced by the snippet and not declared inside it.
    pub fn external_references(&self) -> BTreeSet<String> {
        let declared: BTreeSet<&String> = self.fragments.iter().flat_map(|f| &f.declared_names).collect();
        self.fragments
            .iter()
            .flat_map(|f| &f.referenced_names)
            .filter(|n| **n != self.name && !declared.contains(n))
            .cloned()
            .collect()
    }

    pub fn signature(&self) -> Option<Signature> {
        (self.lambda.kind != DeclKind::Opaque).then(|| Signature {
            name: self.name.clone(),
            params: self.lambda.params.clone(),
        })
    }

    pub fn features(&self) -> FeatureCounts {
        let mut total = FeatureCounts::default();
        for f in &self.fragments {
            total.merge(&f.feature_tags);
        }
        total
    }

    pub fn render_into(&self, out: &mut String) {
        for f in &self.fragments {
            out.push_str(&f.text);
            out.push('\n');
        }
    }
}

/// Indices of a subset of a block's snippets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Partition(pub BTreeSet<usize>);

impl Partition {
    pub fn contains(&self, i: usize) -> bool {
        self.0.contains(&i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Block {
    snippets: Vec<Snippet>,
}

impl Block {
    pub fn empty() -> Self {
        Block::default()
    }

    /// Builds a block, rejecting duplicate (name, params) signatures and
    /// dependency cycles. The result is topologically ordered.
    pub fn new(snippets: Vec<Snippet>) -> Result<Block, IrError> {
        let conflicts = duplicate_signatures(&snippets);
        if !conflicts.is_empty() {
            return Err(IrError::Conflict(conflicts));
        }
        let mut b = Block { snippets };
        b.recompute_deps();
        topo_order(&b)
    }

    /// Builds a block without the conflict check. Snippets on a dependency
    /// cycle keep their relative order after everything else that can be
    /// placed first.
    pub fn assemble(snippets: Vec<Snippet>) -> Block {
        let mut b = Block { snippets };
        b.recompute_deps();
        let order = kahn(&b, true).expect("lenient ordering never fails");
        b.reordered(&order)
    }

    pub fn snippets(&self) -> &[Snippet] {
        &self.snippets
    }

    pub fn into_snippets(self) -> Vec<Snippet> {
        self.snippets
    }

    pub fn len(&self) -> usize {
        self.snippets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snippets.is_empty()
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.snippets.iter().map(|s| s.name.clone()).collect()
    }

    pub fn signatures(&self) -> BTreeSet<Signature> {
        self.snippets.iter().filter_map(Snippet::signature).collect()
    }

    /// (name, Λ) pairs, the identity used when choosing mates.
    pub fn typed_signatures(&self) -> BTreeSet<(String, Lambda)> {
        self.snippets
            .iter()
            .filter(|s| s.lambda.kind != DeclKind::Opaque)
            .map(|s| (s.name.clone(), s.lambda.clone()))
            .collect()
    }

    pub fn fragment_count(&self) -> usize {
        self.snippets.iter().map(|s| s.fragments.len()).sum()
    }

    /// Indices of the snippets that `i` depends on.
    pub fn dependency_indices(&self, i: usize) -> Vec<usize> {
        let by_name = self.name_index();
        let mut out: Vec<usize> = self.snippets[i]
            .deps
            .iter()
            .flat_map(|d| by_name.get(d.as_str()).into_iter().flatten().copied())
            .filter(|j| *j != i)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn name_index(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut by_name: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in self.snippets.iter().enumerate() {
            by_name.entry(s.name.as_str()).or_default().push(i);
        }
        by_name
    }

    fn recompute_deps(&mut self) {
        let names = self.names();
        for s in &mut self.snippets {
            s.deps = s
                .external_references()
                .into_iter()
                .filter(|n| names.contains(n) && *n != s.name)
                .collect();
        }
    }

    fn reordered(&self, order: &[usize]) -> Block {
        Block {
            snippets: order.iter().map(|&i| self.snippets[i].clone()).collect(),
        }
    }

    /// Whether every dependency precedes its dependents.
    pub fn is_topologically_ordered(&self) -> bool {
        (0..self.len()).all(|i| self.dependency_indices(i).iter().all(|&j| j < i))
    }
}

fn duplicate_signatures(snippets: &[Snippet]) -> Vec<Signature> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for sig in snippets.iter().filter_map(Snippet::signature) {
        if !seen.insert(sig.clone()) {
            dup.insert(sig);
        }
    }
    dup.into_iter().collect()
}

/// Stable Kahn ordering: repeatedly places the earliest snippet whose
/// dependencies are all placed.
fn kahn(b: &Block, lenient: bool) -> Result<Vec<usize>, IrError> {
    let n = b.len();
    let deps: Vec<Vec<usize>> = (0..n).map(|i| b.dependency_indices(i)).collect();
    let mut placed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let next = (0..n).find(|&i| !placed[i] && deps[i].iter().all(|&j| placed[j]));
        match next {
            Some(i) => {
                placed[i] = true;
                order.push(i);
            }
            None if lenient => {
                let i = (0..n).find(|&i| !placed[i]).expect("unplaced snippet exists");
                placed[i] = true;
                order.push(i);
            }
            None => {
                let stuck: Vec<usize> = (0..n).filter(|&i| !placed[i]).collect();
                return Err(IrError::Cycle(cycle_names(b, &deps, &stuck)));
            }
        }
    }
    Ok(order)
}

fn cycle_names(b: &Block, deps: &[Vec<usize>], stuck: &[usize]) -> Vec<String> {
    // Every stuck snippet has an unplaced dependency, so following them from
    // any stuck snippet must revisit one.
    let mut path = vec![stuck[0]];
    loop {
        let cur = *path.last().expect("non-empty path");
        let next = deps[cur]
            .iter()
            .copied()
            .find(|j| stuck.contains(j))
            .expect("stuck snippet has a stuck dependency");
        if let Some(pos) = path.iter().position(|&p| p == next) {
            return path[pos..].iter().map(|&i| b.snippets[i].name.clone()).collect();
        }
        path.push(next);
    }
}

/// Reorders so that every dependency precedes its dependents, keeping the
/// original relative order of independent snippets.
pub fn topo_order(b: &Block) -> Result<Block, IrError> {
    let order = kahn(b, false)?;
    Ok(b.reordered(&order))
}

/// The smallest set containing `seed` that is closed under both
/// dependencies and dependents.
pub fn self_sufficient_partition(b: &Block, seed: usize) -> Partition {
    let n = b.len();
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for j in b.dependency_indices(i) {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    let mut seen = BTreeSet::from([seed]);
    let mut queue = VecDeque::from([seed]);
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if seen.insert(j) {
                queue.push_back(j);
            }
        }
    }
    Partition(seen)
}

/// The snippets of `p`, in block order.
pub fn extract_partition(b: &Block, p: &Partition) -> Vec<Snippet> {
    p.0.iter().map(|&i| b.snippets[i].clone()).collect()
}

pub fn remove_partition(b: &Block, p: &Partition) -> Block {
    let kept = b
        .snippets
        .iter()
        .enumerate()
        .filter(|(i, _)| !p.contains(*i))
        .map(|(_, s)| s.clone())
        .collect();
    Block::assemble(kept)
}

/// Appends snippets, rejecting any (name, params) collision of a new
/// snippet with the block or with another new snippet. Collisions already
/// inside `b` are left alone.
pub fn append_snippets(b: &Block, snippets: Vec<Snippet>) -> Result<Block, IrError> {
    let existing = b.signatures();
    let mut conflicts = BTreeSet::new();
    let mut fresh = BTreeSet::new();
    for sig in snippets.iter().filter_map(Snippet::signature) {
        if existing.contains(&sig) || !fresh.insert(sig.clone()) {
            conflicts.insert(sig);
        }
    }
    if !conflicts.is_empty() {
        return Err(IrError::Conflict(conflicts.into_iter().collect()));
    }
    let mut all = b.snippets.clone();
    all.extend(snippets);
    Ok(Block::assemble(all))
}

pub fn render(b: &Block) -> String {
    let mut out = String::new();
    for s in &b.snippets {
        s.render_into(&mut out);
    }
    out.push_str(FOOTER);
    out
}

/// Size plus per-feature counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureVector(pub [u64; VECTOR_LEN]);

impl FeatureVector {
    pub fn size(&self) -> u64 {
        self.0[0]
    }

    pub fn count(&self, f: Feature) -> u64 {
        self.0[f.index() + 1]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }
}

impl fmt::Display for FeatureVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

pub fn feature_vector(b: &Block) -> FeatureVector {
    let mut v = [0u64; VECTOR_LEN];
    let mut size = FOOTER.chars().count();
    for s in &b.snippets {
        for f in &s.fragments {
            size += f.text.chars().count() + 1;
            for (slot, c) in v[1..].iter_mut().zip(f.feature_tags.0) {
                *slot += u64::from(c);
            }
        }
    }
    v[0] = size as u64;
    FeatureVector(v)
}
