//! Built-in hook procedures for the shipped mini-language.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{sample_expression, GenError, Item, Sampler, Token};
use crate::grammar::GrammarNode;
use crate::ir::{DeclKind, Feature, Fragment, Lambda};
use crate::semantics::{Callable, CallableKind, TypeId};

impl<R: Rng> Sampler<'_, R> {
    fn random_type(&mut self) -> Result<TypeId, GenError> {
        let types = self.ctx.sampleable_types();
        types
            .choose(self.rng)
            .cloned()
            .ok_or_else(|| GenError::Unsatisfiable("no sampleable type".into()))
    }

    fn expression(&mut self, target: &TypeId) -> Result<super::Expr, GenError> {
        let depth = self.cfg.max_expr_depth;
        sample_expression(target, &self.ctx, self.cfg, self.rng, depth)
    }

    /// `val v: T = e` or `var v: T = e`.
    pub(super) fn property_declaration(&mut self, mutable: bool) -> Result<Vec<Item>, GenError> {
        let name = self.ctx.fresh_identifier("v");
        let ty = self.random_type()?;
        let e = self.expression(&ty)?;
        let (keyword, kind, decl_kind) = if mutable {
            ("var", CallableKind::Variable, DeclKind::Variable)
        } else {
            ("val", CallableKind::Property, DeclKind::Property)
        };
        self.ctx
            .declare(Callable::new(name.clone(), kind, vec![], ty.clone()))
            .map_err(|e| GenError::Unsatisfiable(e.to_string()))?;
        let mut tags = e.features();
        tags.add(Feature::DeclarationStatement);
        let mut out = vec![Item::Token(Token {
            text: format!("{keyword} {name}: {ty} = {e}"),
            refs: e.references(),
            decls: BTreeSet::from([name.clone()]),
            tags,
        })];
        if self.ctx.depth() == 0 {
            out.push(Item::Declared(
                name,
                Lambda {
                    kind: decl_kind,
                    params: vec![],
                    returns: Some(ty),
                },
            ));
        }
        Ok(out)
    }

    /// A function with 0-2 parameters whose body is one of the hook node's
    /// children: the first while local functions are still allowed at this
    /// nesting level, the last otherwise.
    pub(super) fn function_declaration(&mut self, node: &GrammarNode) -> Result<Vec<Item>, GenError> {
        let level = self.ctx.depth();
        let name = self.ctx.fresh_identifier("f");
        let arity = [0usize, 1, 2]
            .choose_weighted(self.rng, |&a| [2, 2, 1][a])
            .copied()
            .expect("static weights");
        let mut params = Vec::with_capacity(arity);
        for _ in 0..arity {
            let p = self.ctx.fresh_identifier("p");
            let ty = self.random_type()?;
            params.push((p, ty));
        }
        let returns = self.random_type()?;

        let indent = self.indent();
        let param_list: Vec<String> = params.iter().map(|(p, t)| format!("{p}: {t}")).collect();
        let mut header = Fragment::new(format!("{indent}fun {name}({}): {returns} {{", param_list.join(", ")));
        header.declared_names.insert(name.clone());
        header.declared_names.extend(params.iter().map(|(p, _)| p.clone()));
        header.feature_tags.add(Feature::FunctionDeclaration);
        let mut out = vec![self.line(header)];

        self.ctx.push_scope();
        for (p, t) in &params {
            self.ctx
                .declare(Callable::new(p.clone(), CallableKind::Property, vec![], t.clone()))
                .map_err(|e| GenError::Unsatisfiable(e.to_string()))?;
        }
        self.frames.push(returns.clone());
        let body = if node.children.is_empty() {
            self.return_statement()?
        } else {
            let nested_ok = level + 1 < self.cfg.max_function_nesting;
            let child = if nested_ok {
                node.children.first()
            } else {
                node.children.last()
            };
            let child = child.expect("non-empty").clone();
            self.expand(&child)?
        };
        out.extend(self.close_lines(body));
        self.frames.pop();
        self.ctx.pop_scope();

        let param_types: Vec<TypeId> = params.iter().map(|(_, t)| t.clone()).collect();
        self.ctx
            .declare(Callable::new(
                name.clone(),
                CallableKind::Function,
                param_types.clone(),
                returns.clone(),
            ))
            .map_err(|e| GenError::Unsatisfiable(e.to_string()))?;
        let closing = Fragment::new(format!("{indent}}}"));
        out.push(self.line(closing));
        if level == 0 {
            out.push(Item::Declared(
                name,
                Lambda {
                    kind: DeclKind::Function,
                    params: param_types,
                    returns: Some(returns),
                },
            ));
        }
        Ok(out)
    }

    /// `v = e` for a visible `var`.
    pub(super) fn assignment(&mut self) -> Result<Vec<Item>, GenError> {
        let targets: Vec<(String, TypeId)> = self
            .ctx
            .assignables()
            .map(|c| (c.name.clone(), c.returns.clone()))
            .collect();
        let (name, ty) = targets
            .choose(self.rng)
            .cloned()
            .ok_or_else(|| GenError::Unsatisfiable("no assignable variable in scope".into()))?;
        let e = self.expression(&ty)?;
        let mut refs = e.references();
        refs.insert(name.clone());
        let mut tags = e.features();
        tags.add(Feature::AssignmentStatement);
        Ok(vec![Item::Token(Token {
            text: format!("{name} = {e}"),
            refs,
            decls: BTreeSet::new(),
            tags,
        })])
    }

    /// A call to any visible function or constructor, result discarded.
    pub(super) fn call_statement(&mut self) -> Result<Vec<Item>, GenError> {
        let callees: Vec<(String, Vec<TypeId>)> = self
            .ctx
            .invocables()
            .map(|c| (c.name.clone(), c.params.clone()))
            .collect();
        let (callee, params) = callees
            .choose(self.rng)
            .cloned()
            .ok_or_else(|| GenError::Unsatisfiable("no invocable callable in scope".into()))?;
        let depth = self.cfg.max_expr_depth;
        let mut args = Vec::with_capacity(params.len());
        for p in &params {
            args.push(sample_expression(p, &self.ctx, self.cfg, self.rng, depth - 1)?);
        }
        let e = super::Expr::Call { callee, args };
        Ok(vec![Item::Token(Token {
            text: e.to_string(),
            refs: e.references(),
            decls: BTreeSet::new(),
            tags: e.features(),
        })])
    }

    /// `return e` for the innermost function being generated.
    pub(super) fn return_statement(&mut self) -> Result<Vec<Item>, GenError> {
        let ty = self
            .frames
            .last()
            .cloned()
            .ok_or_else(|| GenError::Unsatisfiable("return outside a function".into()))?;
        let e = self.expression(&ty)?;
        Ok(vec![Item::Token(Token {
            text: format!("return {e}"),
            refs: e.references(),
            decls: BTreeSet::new(),
            tags: e.features(),
        })])
    }
}
