use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{Emit, EnrichedGrammar, GrammarError, GrammarNode, NodeKind};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    start: String,
    nodes: BTreeMap<String, ProfileNode>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileNode {
    kind: ProfileKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    children: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hook: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emit: Option<ProfileEmit>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ProfileKind {
    Terminal,
    Alternation,
    Sequence,
    Repetition,
    Optional,
    Hook,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ProfileEmit {
    Inline,
    Fragment,
    Snippet,
}

/// Loads a grammar profile against the built-in hook registry.
pub fn load_grammar(profile_text: &str) -> Result<EnrichedGrammar, GrammarError> {
    load_grammar_with_hooks(profile_text, crate::generator::builtin_hooks())
}

pub fn load_grammar_with_hooks(
    profile_text: &str,
    hook_registry: BTreeSet<String>,
) -> Result<EnrichedGrammar, GrammarError> {
    let doc: ProfileDocument = serde_json::from_str(profile_text).map_err(|e| GrammarError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let nodes = doc.nodes.into_iter().map(|(id, n)| {
        let kind = match n.kind {
            ProfileKind::Terminal => NodeKind::Terminal,
            ProfileKind::Alternation => NodeKind::Alternation,
            ProfileKind::Sequence => NodeKind::Sequence,
            ProfileKind::Repetition => NodeKind::Repetition,
            ProfileKind::Optional => NodeKind::Optional,
            ProfileKind::Hook => NodeKind::Hook,
        };
        let emit = match n.emit {
            None | Some(ProfileEmit::Inline) => Emit::Inline,
            Some(ProfileEmit::Fragment) => Emit::Fragment,
            Some(ProfileEmit::Snippet) => Emit::Snippet,
        };
        let (min, max) = match kind {
            NodeKind::Repetition => (n.min.unwrap_or(0), n.max.unwrap_or(n.min.unwrap_or(0).max(1))),
            NodeKind::Optional => (0, 1),
            _ => (0, 0),
        };
        GrammarNode {
            id,
            kind,
            children: n.children,
            weights: n.weights.unwrap_or_default(),
            min,
            max,
            hook_id: n.hook,
            text: n.text,
            emit,
        }
    });
    EnrichedGrammar::new(doc.start, nodes, hook_registry)
}

/// Serializes a grammar back into the profile format.
pub fn to_profile_text(g: &EnrichedGrammar) -> String {
    let nodes = g
        .nodes()
        .map(|n| {
            let kind = match n.kind {
                NodeKind::Terminal => ProfileKind::Terminal,
                NodeKind::Alternation => ProfileKind::Alternation,
                NodeKind::Sequence => ProfileKind::Sequence,
                NodeKind::Repetition => ProfileKind::Repetition,
                NodeKind::Optional => ProfileKind::Optional,
                NodeKind::Hook => ProfileKind::Hook,
            };
            let emit = match n.emit {
                Emit::Inline => None,
                Emit::Fragment => Some(ProfileEmit::Fragment),
                Emit::Snippet => Some(ProfileEmit::Snippet),
            };
            let is_rep = n.kind == NodeKind::Repetition;
            (
                n.id.clone(),
                ProfileNode {
                    kind,
                    children: n.children.clone(),
                    weights: (!n.weights.is_empty()).then(|| n.weights.clone()),
                    min: is_rep.then_some(n.min),
                    max: is_rep.then_some(n.max),
                    hook: n.hook_id.clone(),
                    text: n.text.clone(),
                    emit,
                },
            )
        })
        .collect();
    let doc = ProfileDocument {
        description: None,
        start: g.start().to_string(),
        nodes,
    };
    serde_json::to_string_pretty(&doc).expect("profile serialization is infallible")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_terminal_profile() {
        let g = load_grammar(r#"{"start":"x","nodes":{"x":{"kind":"terminal"}}}"#).unwrap();
        assert_eq!(g.start(), "x");
        assert_eq!(g.node("x").unwrap().literal(), "x");
    }

    #[test]
    fn dangling_reference_is_named() {
        let err = load_grammar(r#"{"start":"s","nodes":{"s":{"kind":"sequence","children":["expr"]}}}"#).unwrap_err();
        assert_eq!(
            err,
            GrammarError::DanglingReference {
                from: "s".into(),
                missing: "expr".into()
            }
        );
    }

    #[test]
    fn unregistered_hook() {
        let err = load_grammar(r#"{"start":"s","nodes":{"s":{"kind":"hook","hook":"nope"}}}"#).unwrap_err();
        assert_eq!(err, GrammarError::UnregisteredHook("nope".into()));
    }

    #[test]
    fn parse_error_reports_position() {
        let err = load_grammar("{\n \"start\": }").unwrap_err();
        assert!(matches!(err, GrammarError::Parse { line: 2, .. }));
    }

    #[test]
    fn shipped_profile_round_trips() {
        let g = load_grammar(crate::assets::GRAMMAR_PROFILE).unwrap();
        assert_eq!(g.start(), "program");
        let hooks = g.nodes().filter(|n| n.kind == NodeKind::Hook).count();
        assert_eq!(hooks, 6);
        let again = load_grammar(&to_profile_text(&g)).unwrap();
        assert_eq!(again, g);
    }
}
