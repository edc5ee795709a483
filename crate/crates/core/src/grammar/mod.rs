//! The enriched context-free grammar.
//!
//! A grammar is a graph of symbols. Plain nodes (terminals, sequences,
//! alternations, repetitions, optionals) expand structurally; hook nodes
//! hand control to a named sampling procedure that consults the semantic
//! context. Recursion is only allowed through hooks, which is what bounds
//! traversal depth.

mod profile;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use profile::{load_grammar, load_grammar_with_hooks, to_profile_text};

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("grammar profile parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("start symbol '{0}' is not declared")]
    MissingStart(String),
    #[error("node '{from}' references undeclared symbol '{missing}'")]
    DanglingReference { from: String, missing: String },
    #[error("hook '{0}' is not registered")]
    UnregisteredHook(String),
    #[error("node '{node}' is malformed: {reason}")]
    Malformed { node: String, reason: String },
    #[error("recursion through plain nodes only: {0:?}")]
    UnboundedRecursion(Vec<String>),
    #[error("cut point '{0}' is not in the grammar")]
    UnknownCutPoint(String),
    #[error("cut point '{0}' has no replacement hook")]
    MissingReplacement(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Terminal,
    Alternation,
    Sequence,
    Repetition,
    Optional,
    Hook,
}

/// How the output of a node is packaged for the code representation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Emit {
    /// Tokens flow into the parent unchanged.
    #[default]
    Inline,
    /// Loose tokens are closed into one line of code.
    Fragment,
    /// Everything produced becomes one top-level snippet.
    Snippet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrammarNode {
    pub id: String,
    pub kind: NodeKind,
    /// Ordered child symbol ids. For hooks these are the entry points the
    /// hook may expand.
    pub children: Vec<String>,
    /// Alternation weights, parallel to `children`. Empty means uniform.
    pub weights: Vec<f64>,
    pub min: usize,
    pub max: usize,
    pub hook_id: Option<String>,
    /// Literal of a terminal; defaults to the node id.
    pub text: Option<String>,
    pub emit: Emit,
}

impl GrammarNode {
    pub fn terminal(id: impl Into<String>, text: impl Into<String>) -> Self {
        GrammarNode {
            id: id.into(),
            kind: NodeKind::Terminal,
            children: Vec::new(),
            weights: Vec::new(),
            min: 0,
            max: 0,
            hook_id: None,
            text: Some(text.into()),
            emit: Emit::Inline,
        }
    }

    pub fn with_children(id: impl Into<String>, kind: NodeKind, children: &[&str]) -> Self {
        GrammarNode {
            id: id.into(),
            kind,
            children: children.iter().map(|c| c.to_string()).collect(),
            weights: Vec::new(),
            min: 0,
            max: 1,
            hook_id: None,
            text: None,
            emit: Emit::Inline,
        }
    }

    pub fn hook(id: impl Into<String>, hook: impl Into<String>) -> Self {
        GrammarNode {
            id: id.into(),
            kind: NodeKind::Hook,
            children: Vec::new(),
            weights: Vec::new(),
            min: 0,
            max: 0,
            hook_id: Some(hook.into()),
            text: None,
            emit: Emit::Inline,
        }
    }

    pub fn literal(&self) -> &str {
        self.text.as_deref().unwrap_or(&self.id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnrichedGrammar {
    nodes: BTreeMap<String, GrammarNode>,
    start: String,
    hook_registry: BTreeSet<String>,
}

impl EnrichedGrammar {
    /// Validates and assembles a grammar.
    pub fn new(
        start: impl Into<String>,
        nodes: impl IntoIterator<Item = GrammarNode>,
        hook_registry: BTreeSet<String>,
    ) -> Result<Self, GrammarError> {
        let g = EnrichedGrammar {
            nodes: nodes.into_iter().map(|n| (n.id.clone(), n)).collect(),
            start: start.into(),
            hook_registry,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn start(&self) -> &str {
        &self.start
    }

    pub fn node(&self, id: &str) -> Option<&GrammarNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GrammarNode> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> BTreeSet<String> {
        self.nodes.keys().cloned().collect()
    }

    pub fn hook_registry(&self) -> &BTreeSet<String> {
        &self.hook_registry
    }

    fn validate(&self) -> Result<(), GrammarError> {
        if !self.nodes.contains_key(&self.start) {
            return Err(GrammarError::MissingStart(self.start.clone()));
        }
        for node in self.nodes.values() {
            let malformed = |reason: &str| GrammarError::Malformed {
                node: node.id.clone(),
                reason: reason.to_string(),
            };
            for c in &node.children {
                if !self.nodes.contains_key(c) {
                    return Err(GrammarError::DanglingReference {
                        from: node.id.clone(),
                        missing: c.clone(),
                    });
                }
            }
            match node.kind {
                NodeKind::Terminal => {
                    if !node.children.is_empty() {
                        return Err(malformed("terminal nodes have no children"));
                    }
                }
                NodeKind::Hook => {
                    let hook = node
                        .hook_id
                        .as_ref()
                        .ok_or_else(|| malformed("hook node without hook id"))?;
                    if !self.hook_registry.contains(hook) {
                        return Err(GrammarError::UnregisteredHook(hook.clone()));
                    }
                }
                NodeKind::Alternation => {
                    if node.children.is_empty() {
                        return Err(malformed("alternation needs at least one child"));
                    }
                    if !node.weights.is_empty() {
                        if node.weights.len() != node.children.len() {
                            return Err(malformed("one weight per alternative"));
                        }
                        if node.weights.iter().any(|w| !w.is_finite() || *w < 0.0)
                            || node.weights.iter().sum::<f64>() <= 0.0
                        {
                            return Err(malformed("weights must be non-negative with a positive sum"));
                        }
                    }
                }
                NodeKind::Repetition => {
                    if node.children.len() != 1 {
                        return Err(malformed("repetition has exactly one child"));
                    }
                    if node.min > node.max {
                        return Err(malformed("repetition min exceeds max"));
                    }
                }
                NodeKind::Optional => {
                    if node.children.len() != 1 {
                        return Err(malformed("optional has exactly one child"));
                    }
                }
                NodeKind::Sequence => {}
            }
            if node.kind != NodeKind::Hook && node.hook_id.is_some() {
                return Err(malformed("only hook nodes carry a hook id"));
            }
        }
        if let Some(cycle) = self.plain_cycle() {
            return Err(GrammarError::UnboundedRecursion(cycle));
        }
        Ok(())
    }

    /// A cycle that does not pass through any hook node, if one exists.
    fn plain_cycle(&self) -> Option<Vec<String>> {
        let mut state: BTreeMap<&str, u8> = BTreeMap::new();
        let mut path: Vec<&str> = Vec::new();
        for id in self.nodes.keys() {
            if state.get(id.as_str()).copied().unwrap_or(0) == 0 {
                if let Some(c) = self.plain_cycle_from(id, &mut state, &mut path) {
                    return Some(c);
                }
            }
        }
        None
    }

    fn plain_cycle_from<'a>(
        &'a self,
        id: &'a str,
        state: &mut BTreeMap<&'a str, u8>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<String>> {
        state.insert(id, 1);
        path.push(id);
        let node = &self.nodes[id];
        if node.kind != NodeKind::Hook {
            for c in &node.children {
                match state.get(c.as_str()).copied().unwrap_or(0) {
                    1 => {
                        let start = path.iter().position(|p| *p == c).unwrap_or(0);
                        return Some(path[start..].iter().map(|s| s.to_string()).collect());
                    }
                    0 => {
                        if let Some(cycle) = self.plain_cycle_from(c, state, path) {
                            return Some(cycle);
                        }
                    }
                    _ => {}
                }
            }
        }
        path.pop();
        state.insert(id, 2);
        None
    }

    /// Node ids reachable from the start symbol (hook entry points count as
    /// edges).
    pub fn reachable(&self) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.start.clone()];
        while let Some(id) = stack.pop() {
            if !seen.insert(id.clone()) {
                continue;
            }
            for c in &self.nodes[&id].children {
                if !seen.contains(c) {
                    stack.push(c.clone());
                }
            }
        }
        seen
    }

    /// Copy without the nodes that cannot be reached from the start symbol.
    pub fn pruned(&self) -> EnrichedGrammar {
        let keep = self.reachable();
        EnrichedGrammar {
            nodes: self
                .nodes
                .iter()
                .filter(|(id, _)| keep.contains(*id))
                .map(|(id, n)| (id.clone(), n.clone()))
                .collect(),
            start: self.start.clone(),
            hook_registry: self.hook_registry.clone(),
        }
    }
}

/// Replaces each cut point with a hook node (children dropped). No symbol or
/// rule is added; descendants that become unreachable stay in the node map
/// until [`EnrichedGrammar::pruned`] is called.
pub fn truncate(
    g: &EnrichedGrammar,
    cut_points: &BTreeSet<String>,
    replacement_hooks: &BTreeMap<String, String>,
) -> Result<EnrichedGrammar, GrammarError> {
    let mut out = g.clone();
    for cut in cut_points {
        let hook = replacement_hooks
            .get(cut)
            .ok_or_else(|| GrammarError::MissingReplacement(cut.clone()))?;
        if !g.hook_registry.contains(hook) {
            return Err(GrammarError::UnregisteredHook(hook.clone()));
        }
        let node = out
            .nodes
            .get_mut(cut)
            .ok_or_else(|| GrammarError::UnknownCutPoint(cut.clone()))?;
        node.kind = NodeKind::Hook;
        node.hook_id = Some(hook.clone());
        node.children.clear();
        node.weights.clear();
        node.text = None;
    }
    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn registry(hooks: &[&str]) -> BTreeSet<String> {
        hooks.iter().map(|h| h.to_string()).collect()
    }

    fn expr_grammar() -> EnrichedGrammar {
        let mut alt = GrammarNode::with_children("expression", NodeKind::Alternation, &["literal", "paren"]);
        alt.weights = vec![1.0, 1.0];
        EnrichedGrammar::new(
            "stmt",
            vec![
                GrammarNode::with_children("stmt", NodeKind::Sequence, &["kw_val", "expression"]),
                GrammarNode::terminal("kw_val", "val"),
                alt,
                GrammarNode::terminal("literal", "1"),
                GrammarNode::with_children("paren", NodeKind::Sequence, &["open", "literal", "close"]),
                GrammarNode::terminal("open", "("),
                GrammarNode::terminal("close", ")"),
            ],
            registry(&["expr_hook"]),
        )
        .unwrap()
    }

    #[test]
    fn rejects_plain_recursion() {
        let err = EnrichedGrammar::new(
            "a",
            vec![
                GrammarNode::with_children("a", NodeKind::Sequence, &["b"]),
                GrammarNode::with_children("b", NodeKind::Optional, &["a"]),
            ],
            BTreeSet::new(),
        )
        .unwrap_err();
        assert!(matches!(err, GrammarError::UnboundedRecursion(_)));
    }

    #[test]
    fn recursion_through_hook_is_allowed() {
        let mut h = GrammarNode::hook("h", "rec");
        h.children = vec!["a".into()];
        EnrichedGrammar::new(
            "a",
            vec![GrammarNode::with_children("a", NodeKind::Sequence, &["h"]), h],
            registry(&["rec"]),
        )
        .unwrap();
    }

    #[test]
    fn empty_cut_set_is_identity() {
        let g = expr_grammar();
        assert_eq!(truncate(&g, &BTreeSet::new(), &BTreeMap::new()).unwrap(), g);
    }

    #[test]
    fn cut_turns_node_into_hook() {
        let g = expr_grammar();
        let cuts: BTreeSet<_> = ["expression".to_string()].into();
        let hooks: BTreeMap<_, _> = [("expression".to_string(), "expr_hook".to_string())].into();
        let t = truncate(&g, &cuts, &hooks).unwrap();
        let node = t.node("expression").unwrap();
        assert_eq!(node.kind, NodeKind::Hook);
        assert!(node.children.is_empty());
        assert!(t.node_ids().is_subset(&g.node_ids()));
        let reach = t.reachable();
        assert_eq!(
            reach,
            ["stmt", "kw_val", "expression"].iter().map(|s| s.to_string()).collect()
        );
        assert!(reach.len() <= g.reachable().len());
        assert_eq!(t.pruned().node_ids(), reach);
    }

    #[test]
    fn unknown_cut_point() {
        let g = expr_grammar();
        let cuts: BTreeSet<_> = ["nope".to_string()].into();
        let hooks: BTreeMap<_, _> = [("nope".to_string(), "expr_hook".to_string())].into();
        assert_eq!(
            truncate(&g, &cuts, &hooks),
            Err(GrammarError::UnknownCutPoint("nope".into()))
        );
    }

    #[test]
    fn unregistered_replacement_hook() {
        let g = expr_grammar();
        let cuts: BTreeSet<_> = ["expression".to_string()].into();
        let hooks: BTreeMap<_, _> = [("expression".to_string(), "other".to_string())].into();
        assert_eq!(
            truncate(&g, &cuts, &hooks),
            Err(GrammarError::UnregisteredHook("other".into()))
        );
    }
}
