//! The semantic interface: visible callables, the nominal type hierarchy and
//! scoped name tables.
//!
//! A [`SemanticContext`] answers the queries that keep sampled code valid
//! ("which callables can produce a value of type `T`?", "is this name free?")
//! and is mutated while a program is generated so later lines can reuse
//! earlier declarations. Sampling always works on a clone of the root
//! context; the root itself is treated as immutable after extraction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SemanticError {
    #[error("seed parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("type names must be non-empty")]
    EmptyTypeName,
    #[error("unknown type '{0}'")]
    UnknownType(String),
    #[error("type '{0}' declared twice")]
    DuplicateType(String),
    #[error("subtype cycle through {0:?}")]
    SubtypeCycle(Vec<String>),
    #[error("duplicate signature {0} in the same scope")]
    DuplicateSignature(Signature),
    #[error("'{0}' is already declared in this scope")]
    Redeclaration(String),
    #[error("type '{0}' has conflicting supertypes in the merged contexts")]
    TypeConflict(String),
}

/// Nominal type identifier.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TypeId(String);

impl TypeId {
    pub fn new(name: impl Into<String>) -> Result<Self, SemanticError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(SemanticError::EmptyTypeName);
        }
        Ok(TypeId(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for TypeId {
    type Error = SemanticError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        TypeId::new(value)
    }
}

impl From<TypeId> for String {
    fn from(value: TypeId) -> Self {
        value.0
    }
}

impl fmt::Display for TypeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallableKind {
    Function,
    Property,
    Constructor,
    Variable,
    Constant,
}

impl CallableKind {
    /// Functions and constructors are invoked with an argument list; every
    /// other kind is referenced by name alone.
    pub fn is_invocable(self) -> bool {
        matches!(self, CallableKind::Function | CallableKind::Constructor)
    }

    pub fn is_assignable(self) -> bool {
        self == CallableKind::Variable
    }
}

/// Anything that can be referenced or invoked: functions, properties,
/// constructors, variables and constants (including literal producers, whose
/// name is the literal text itself).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Callable {
    pub name: String,
    pub kind: CallableKind,
    #[serde(default)]
    pub params: Vec<TypeId>,
    pub returns: TypeId,
    #[serde(default)]
    pub scope_depth: usize,
}

impl Callable {
    pub fn new(name: impl Into<String>, kind: CallableKind, params: Vec<TypeId>, returns: TypeId) -> Self {
        Callable {
            name: name.into(),
            kind,
            params,
            returns,
            scope_depth: 0,
        }
    }

    pub fn signature(&self) -> Signature {
        Signature {
            name: self.name.clone(),
            params: self.params.clone(),
        }
    }
}

/// Overload identity: name plus parameter types. The return type is not part
/// of it, so `p(): Char` and `p(): Float` collide.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub name: String,
    pub params: Vec<TypeId>,
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

/// Pairs present in both sets.
pub fn signature_conflicts(a: &BTreeSet<Signature>, b: &BTreeSet<Signature>) -> BTreeSet<Signature> {
    a.intersection(b).cloned().collect()
}

/// Position in a context's declaration history.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ContextMark {
    callables: usize,
    depth: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SemanticContext {
    types: Vec<TypeId>,
    supertypes: BTreeMap<TypeId, BTreeSet<TypeId>>,
    callables: Vec<Callable>,
    names_in_scope: Vec<BTreeSet<String>>,
    reserved: BTreeSet<String>,
    counters: BTreeMap<String, usize>,
}

#[derive(Debug, Deserialize)]
struct SeedDocument {
    #[serde(default)]
    types: Vec<SeedType>,
    #[serde(default)]
    callables: Vec<SeedCallable>,
}

#[derive(Debug, Deserialize)]
struct SeedType {
    name: String,
    #[serde(default)]
    supertypes: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct SeedCallable {
    name: String,
    kind: CallableKind,
    #[serde(default)]
    params: Vec<String>,
    returns: String,
}

/// Builds a root context from a seed-declaration document (JSON with `types`
/// and `callables`).
pub fn extract_context(seed_text: &str) -> Result<SemanticContext, SemanticError> {
    let doc: SeedDocument = serde_json::from_str(seed_text).map_err(|e| SemanticError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut ctx = SemanticContext::new();
    for ty in &doc.types {
        let id = TypeId::new(ty.name.clone())?;
        if ctx.has_type(&id) {
            return Err(SemanticError::DuplicateType(ty.name.clone()));
        }
        ctx.types.push(id.clone());
        ctx.supertypes.insert(id, BTreeSet::new());
    }
    // Edges are attached after all names are known so declaration order in
    // the document does not matter.
    for ty in &doc.types {
        let id = TypeId::new(ty.name.clone())?;
        for sup in &ty.supertypes {
            let sup = ctx.require_type(sup)?;
            ctx.supertypes.get_mut(&id).expect("declared above").insert(sup);
        }
    }
    if let Some(cycle) = ctx.find_subtype_cycle() {
        return Err(SemanticError::SubtypeCycle(cycle));
    }
    for c in doc.callables {
        let params = c
            .params
            .iter()
            .map(|p| ctx.require_type(p))
            .collect::<Result<Vec<_>, _>>()?;
        let returns = ctx.require_type(&c.returns)?;
        ctx.declare(Callable::new(c.name, c.kind, params, returns))?;
    }
    Ok(ctx)
}

/// Deep, independent copy.
pub fn clone_context(ctx: &SemanticContext) -> SemanticContext {
    ctx.clone()
}

/// Union of two contexts. Overlay callables whose names already exist in
/// `base` are renamed with the first free `_k` suffix; every overload of a
/// renamed name moves together.
pub fn merge_contexts(base: &SemanticContext, overlay: &SemanticContext) -> Result<SemanticContext, SemanticError> {
    let mut merged = base.clone();
    for ty in &overlay.types {
        let sups = overlay.supertypes.get(ty).cloned().unwrap_or_default();
        match merged.supertypes.get(ty) {
            Some(existing) if *existing != sups => {
                return Err(SemanticError::TypeConflict(ty.to_string()));
            }
            Some(_) => {}
            None => {
                merged.types.push(ty.clone());
                merged.supertypes.insert(ty.clone(), sups);
            }
        }
    }
    for sups in merged.supertypes.values() {
        for s in sups {
            if !merged.supertypes.contains_key(s) {
                return Err(SemanticError::UnknownType(s.to_string()));
            }
        }
    }
    if let Some(cycle) = merged.find_subtype_cycle() {
        return Err(SemanticError::SubtypeCycle(cycle));
    }

    let mut renames: BTreeMap<String, String> = BTreeMap::new();
    for c in &overlay.callables {
        if renames.contains_key(&c.name) {
            continue;
        }
        let target = if base.name_in_use(&c.name) {
            let mut k = 1;
            loop {
                let candidate = format!("{}_{k}", c.name);
                if !base.name_in_use(&candidate) && !overlay.name_in_use(&candidate) {
                    break candidate;
                }
                k += 1;
            }
        } else {
            c.name.clone()
        };
        renames.insert(c.name.clone(), target);
    }

    let depth = merged.names_in_scope.len().max(overlay.names_in_scope.len());
    merged.names_in_scope.resize_with(depth, BTreeSet::new);
    for c in &overlay.callables {
        let mut c = c.clone();
        c.name = renames[&c.name].clone();
        merged.names_in_scope[c.scope_depth].insert(c.name.clone());
        merged.callables.push(c);
    }
    for (depth, names) in overlay.names_in_scope.iter().enumerate() {
        for n in names {
            let n = renames.get(n).unwrap_or(n);
            merged.names_in_scope[depth].insert(n.clone());
        }
    }
    merged.reserved.extend(overlay.reserved.iter().cloned());
    for (prefix, next) in &overlay.counters {
        let slot = merged.counters.entry(prefix.clone()).or_insert(0);
        *slot = (*slot).max(*next);
    }
    Ok(merged)
}

impl SemanticContext {
    pub fn new() -> Self {
        SemanticContext {
            names_in_scope: vec![BTreeSet::new()],
            ..Default::default()
        }
    }

    /// A context with the same types (and no callables), used to describe
    /// the declarations of a program fragment as a merge overlay.
    pub fn with_types_of(other: &SemanticContext) -> Self {
        SemanticContext {
            types: other.types.clone(),
            supertypes: other.supertypes.clone(),
            ..SemanticContext::new()
        }
    }

    pub fn types(&self) -> &[TypeId] {
        &self.types
    }

    pub fn callables(&self) -> &[Callable] {
        &self.callables
    }

    pub fn has_type(&self, t: &TypeId) -> bool {
        self.supertypes.contains_key(t)
    }

    pub fn type_named(&self, name: &str) -> Option<&TypeId> {
        self.types.iter().find(|t| t.as_str() == name)
    }

    fn require_type(&self, name: &str) -> Result<TypeId, SemanticError> {
        self.type_named(name)
            .cloned()
            .ok_or_else(|| SemanticError::UnknownType(name.to_string()))
    }

    pub fn direct_supertypes(&self, t: &TypeId) -> impl Iterator<Item = &TypeId> {
        self.supertypes.get(t).into_iter().flatten()
    }

    /// Declares a new type below the given (already declared) supertypes.
    pub fn declare_type(&mut self, t: TypeId, supertypes: &[TypeId]) -> Result<(), SemanticError> {
        if self.has_type(&t) {
            return Err(SemanticError::DuplicateType(t.to_string()));
        }
        for s in supertypes {
            if !self.has_type(s) && *s != t {
                return Err(SemanticError::UnknownType(s.to_string()));
            }
        }
        self.types.push(t.clone());
        self.supertypes.insert(t.clone(), supertypes.iter().cloned().collect());
        if let Some(cycle) = self.find_subtype_cycle() {
            self.types.pop();
            self.supertypes.remove(&t);
            return Err(SemanticError::SubtypeCycle(cycle));
        }
        Ok(())
    }

    /// Reflexive-transitive subtyping.
    pub fn is_subtype(&self, sub: &TypeId, sup: &TypeId) -> bool {
        if sub == sup {
            return true;
        }
        let mut stack = vec![sub];
        let mut seen: Vec<&TypeId> = Vec::new();
        while let Some(t) = stack.pop() {
            for s in self.direct_supertypes(t) {
                if s == sup {
                    return true;
                }
                if !seen.contains(&s) {
                    seen.push(s);
                    stack.push(s);
                }
            }
        }
        false
    }

    fn find_subtype_cycle(&self) -> Option<Vec<String>> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state: BTreeMap<&TypeId, u8> = BTreeMap::new();
        let mut path: Vec<&TypeId> = Vec::new();

        fn visit<'a>(
            ctx: &'a SemanticContext,
            t: &'a TypeId,
            state: &mut BTreeMap<&'a TypeId, u8>,
            path: &mut Vec<&'a TypeId>,
        ) -> Option<Vec<String>> {
            state.insert(t, 1);
            path.push(t);
            for s in ctx.direct_supertypes(t) {
                match state.get(s).copied().unwrap_or(0) {
                    1 => {
                        let start = path.iter().position(|p| *p == s).unwrap_or(0);
                        return Some(path[start..].iter().map(|p| p.to_string()).collect());
                    }
                    0 => {
                        if let Some(c) = visit(ctx, s, state, path) {
                            return Some(c);
                        }
                    }
                    _ => {}
                }
            }
            path.pop();
            state.insert(t, 2);
            None
        }

        for t in &self.types {
            if state.get(t).copied().unwrap_or(0) == 0 {
                if let Some(c) = visit(self, t, &mut state, &mut path) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Current scope depth; 0 is the root.
    pub fn depth(&self) -> usize {
        self.names_in_scope.len() - 1
    }

    pub fn push_scope(&mut self) {
        self.names_in_scope.push(BTreeSet::new());
    }

    /// Drops the innermost scope and every callable declared in it.
    pub fn pop_scope(&mut self) {
        if self.depth() == 0 {
            return;
        }
        let depth = self.depth();
        self.callables.retain(|c| c.scope_depth < depth);
        self.names_in_scope.pop();
    }

    fn name_in_use(&self, name: &str) -> bool {
        self.reserved.contains(name)
            || self.names_in_scope.iter().any(|s| s.contains(name))
            || self.callables.iter().any(|c| c.name == name)
    }

    /// A cheap snapshot for [`SemanticContext::rollback`].
    pub fn mark(&self) -> ContextMark {
        ContextMark {
            callables: self.callables.len(),
            depth: self.depth(),
        }
    }

    /// Undoes declarations and scopes made since `mark`. Names handed out
    /// in the meantime stay taken, which only keeps them from being reused.
    pub fn rollback(&mut self, mark: ContextMark) {
        while self.depth() > mark.depth {
            self.pop_scope();
        }
        self.callables.truncate(mark.callables);
    }

    /// Marks a name as taken without making anything callable under it.
    pub fn reserve(&mut self, name: impl Into<String>) {
        self.reserved.insert(name.into());
    }

    /// Returns `<prefix><k>` for the smallest counter value not yet used by
    /// any scope, callable or reservation. The name is reserved.
    pub fn fresh_identifier(&mut self, prefix: &str) -> String {
        let mut k = self.counters.get(prefix).copied().unwrap_or(0);
        loop {
            let candidate = format!("{prefix}{k}");
            k += 1;
            if !self.name_in_use(&candidate) {
                self.counters.insert(prefix.to_string(), k);
                self.reserved.insert(candidate.clone());
                return candidate;
            }
        }
    }

    /// Adds a callable to the innermost scope (its `scope_depth` is set to
    /// the current depth). Functions may not repeat a (name, params) pair in
    /// one scope; other kinds may not repeat a name.
    pub fn declare(&mut self, mut c: Callable) -> Result<(), SemanticError> {
        for t in c.params.iter().chain(std::iter::once(&c.returns)) {
            if !self.has_type(t) {
                return Err(SemanticError::UnknownType(t.to_string()));
            }
        }
        let depth = self.depth();
        c.scope_depth = depth;
        let same_scope = self
            .callables
            .iter()
            .filter(|o| o.scope_depth == depth && o.name == c.name);
        for other in same_scope {
            if c.kind.is_invocable() && other.kind.is_invocable() {
                if other.params == c.params {
                    return Err(SemanticError::DuplicateSignature(c.signature()));
                }
            } else if !c.kind.is_invocable() && !other.kind.is_invocable() {
                return Err(SemanticError::Redeclaration(c.name.clone()));
            }
        }
        self.names_in_scope[depth].insert(c.name.clone());
        self.callables.push(c);
        Ok(())
    }

    /// Callables whose return type is `t` (or a subtype of it when
    /// `allow_subtypes` is set), in declaration order.
    pub fn callables_returning(&self, t: &TypeId, allow_subtypes: bool) -> Result<Vec<&Callable>, SemanticError> {
        if !self.has_type(t) {
            return Err(SemanticError::UnknownType(t.to_string()));
        }
        Ok(self
            .callables
            .iter()
            .filter(|c| {
                if allow_subtypes {
                    self.is_subtype(&c.returns, t)
                } else {
                    c.returns == *t
                }
            })
            .collect())
    }

    /// Types for which at least one callable can produce a value (a producer
    /// of a subtype counts).
    pub fn sampleable_types(&self) -> Vec<TypeId> {
        self.types
            .iter()
            .filter(|t| self.callables.iter().any(|c| self.is_subtype(&c.returns, t)))
            .cloned()
            .collect()
    }

    pub fn assignables(&self) -> impl Iterator<Item = &Callable> {
        self.callables.iter().filter(|c| c.kind.is_assignable())
    }

    pub fn invocables(&self) -> impl Iterator<Item = &Callable> {
        self.callables.iter().filter(|c| c.kind.is_invocable())
    }

    /// Every (name, params) signature of invocable callables.
    pub fn signatures(&self) -> BTreeSet<Signature> {
        self.invocables().map(Callable::signature).collect()
    }
}
