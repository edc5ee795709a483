use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{GenError, SamplerConfig};
use crate::ir::{Feature, FeatureCounts};
use crate::semantics::{CallableKind, SemanticContext, TypeId};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expr {
    /// Literal, property, variable or parameter reference.
    Atom(String),
    Call {
        callee: String,
        args: Vec<Expr>,
    },
    If {
        cond: Box<Expr>,
        then: Box<Expr>,
        els: Box<Expr>,
    },
    Elvis {
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
}

impl Expr {
    pub fn is_complex(&self) -> bool {
        matches!(self, Expr::If { .. } | Expr::Elvis { .. })
    }

    /// Identifiers the expression refers to (literals excluded).
    pub fn references(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_refs(&mut out);
        out
    }

    fn collect_refs(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Atom(name) => {
                if is_identifier(name) {
                    out.insert(name.clone());
                }
            }
            Expr::Call { callee, args } => {
                out.insert(callee.clone());
                args.iter().for_each(|a| a.collect_refs(out));
            }
            Expr::If { cond, then, els } => {
                cond.collect_refs(out);
                then.collect_refs(out);
                els.collect_refs(out);
            }
            Expr::Elvis { lhs, rhs } => {
                lhs.collect_refs(out);
                rhs.collect_refs(out);
            }
        }
    }

    pub fn features(&self) -> FeatureCounts {
        let mut out = FeatureCounts::default();
        self.collect_features(&mut out);
        out
    }

    fn collect_features(&self, out: &mut FeatureCounts) {
        match self {
            Expr::Atom(_) => {}
            Expr::Call { args, .. } => {
                out.add(Feature::CallExpression);
                args.iter().for_each(|a| a.collect_features(out));
            }
            Expr::If { cond, then, els } => {
                out.add(Feature::IfExpression);
                cond.collect_features(out);
                then.collect_features(out);
                els.collect_features(out);
            }
            Expr::Elvis { lhs, rhs } => {
                out.add(Feature::ElvisExpression);
                lhs.collect_features(out);
                rhs.collect_features(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Atom(name) => f.write_str(name),
            Expr::Call { callee, args } => {
                write!(f, "{callee}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Expr::If { cond, then, els } => write!(f, "(if ({cond}) {then} else {els})"),
            Expr::Elvis { lhs, rhs } => write!(f, "({lhs} ?: {rhs})"),
        }
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && s != "true"
        && s != "false"
}

/// Samples an expression of type `target`. With probability `p_b` (and
/// always at depth 0) the result is simple: a reference or a call whose
/// arguments are sampled one level down. Otherwise it is an if- or
/// elvis-expression.
pub fn sample_expression<R: Rng + ?Sized>(
    target: &TypeId,
    ctx: &SemanticContext,
    cfg: &SamplerConfig,
    rng: &mut R,
    depth: usize,
) -> Result<Expr, GenError> {
    if depth == 0 || rng.gen_bool(cfg.simplicity_bias) {
        return sample_simple(target, ctx, cfg, rng, depth);
    }
    let branch = rng.gen_bool(0.5);
    let bool_ty = ctx
        .type_named("Bool")
        .filter(|b| branch && ctx.callables().iter().any(|c| ctx.is_subtype(&c.returns, b)))
        .cloned();
    if let Some(bool_ty) = bool_ty {
        let cond = sample_expression(&bool_ty, ctx, cfg, rng, depth - 1)?;
        let then = sample_expression(target, ctx, cfg, rng, depth - 1)?;
        let els = sample_expression(target, ctx, cfg, rng, depth - 1)?;
        Ok(Expr::If {
            cond: Box::new(cond),
            then: Box::new(then),
            els: Box::new(els),
        })
    } else {
        let lhs = sample_expression(target, ctx, cfg, rng, depth - 1)?;
        let rhs = sample_expression(target, ctx, cfg, rng, depth - 1)?;
        Ok(Expr::Elvis {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        })
    }
}

fn sample_simple<R: Rng + ?Sized>(
    target: &TypeId,
    ctx: &SemanticContext,
    cfg: &SamplerConfig,
    rng: &mut R,
    depth: usize,
) -> Result<Expr, GenError> {
    let candidates: Vec<_> = ctx
        .callables_returning(target, true)
        .map_err(|e| GenError::Unsatisfiable(e.to_string()))?
        .into_iter()
        .filter(|c| depth > 0 || c.params.is_empty())
        .collect();
    let chosen = candidates
        .choose(rng)
        .ok_or_else(|| GenError::Unsatisfiable(format!("no producer of type {target}")))?;
    if !chosen.kind.is_invocable() {
        return Ok(Expr::Atom(chosen.name.clone()));
    }
    let callee = chosen.name.clone();
    let params = chosen.params.clone();
    debug_assert!(matches!(
        chosen.kind,
        CallableKind::Function | CallableKind::Constructor
    ));
    let next = depth.saturating_sub(1);
    let args = params
        .iter()
        .map(|p| sample_expression(p, ctx, cfg, rng, next))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Expr::Call { callee, args })
}
