use std::collections::BTreeMap;

use super::parser::{Decl, Expr, ExprKind, FunDecl, PropDecl, Stmt};
use super::{BugProfile, Diagnostic, Prelude};

#[derive(Clone, Debug)]
pub(super) struct FunSig {
    pub name: String,
    pub params: Vec<String>,
    pub returns: String,
    pub constructor: bool,
}

#[derive(Clone, Debug)]
pub(super) struct Var {
    pub ty: String,
    pub mutable: bool,
}

#[derive(Clone, Debug, Default)]
pub(super) struct Scope {
    pub funs: Vec<FunSig>,
    pub vars: BTreeMap<String, Var>,
}

pub(super) struct Checker<'a> {
    prelude: &'a Prelude,
    profile: BugProfile,
    scopes: Vec<Scope>,
    /// Declared return types of the enclosing functions.
    returns: Vec<String>,
    pub diags: Vec<Diagnostic>,
}

struct Typed {
    ty: String,
    constructor: bool,
}

const UNIT: &str = "Unit";

impl<'a> Checker<'a> {
    pub fn new(prelude: &'a Prelude, profile: BugProfile) -> Self {
        Checker {
            prelude,
            profile,
            scopes: vec![prelude.scope.clone()],
            returns: Vec::new(),
            diags: Vec::new(),
        }
    }

    fn error(&mut self, code: &str, message: String, line: usize) {
        self.diags.push(Diagnostic::new(code, message, line));
    }

    fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sub == sup {
            return true;
        }
        match (self.prelude.types.type_named(sub), self.prelude.types.type_named(sup)) {
            (Some(a), Some(b)) => self.prelude.types.is_subtype(a, b),
            _ => false,
        }
    }

    fn join(&self, a: &str, b: &str) -> Option<String> {
        if self.is_subtype(a, b) {
            return Some(b.to_string());
        }
        if self.is_subtype(b, a) {
            return Some(a.to_string());
        }
        let ctx = &self.prelude.types;
        let mut frontier = vec![ctx.type_named(a)?.clone()];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for t in &frontier {
                for s in ctx.direct_supertypes(t) {
                    if self.is_subtype(b, s.as_str()) {
                        return Some(s.to_string());
                    }
                    next.push(s.clone());
                }
            }
            frontier = next;
        }
        None
    }

    fn known_type(&mut self, name: &str, line: usize) -> bool {
        if self.prelude.types.type_named(name).is_some() {
            true
        } else {
            self.error("UNKNOWN_TYPE", format!("unresolved type '{name}'"), line);
            false
        }
    }

    fn declare_fun(&mut self, sig: FunSig, line: usize) {
        let scope = self.scopes.last_mut().expect("scope stack is never empty");
        if let Some(prev) = scope.funs.iter().find(|f| f.name == sig.name && f.params == sig.params) {
            if self.profile.d1() {
                return;
            }
            let message = format!(
                "conflicting overloads: 'fun {}({}): {}', 'fun {}({}): {}'",
                prev.name,
                prev.params.join(", "),
                prev.returns,
                sig.name,
                sig.params.join(", "),
                sig.returns
            );
            self.error("CONFLICTING_OVERLOADS", message, line);
            return;
        }
        scope.funs.push(sig);
    }

    fn declare_var(&mut self, name: &str, var: Var, line: usize) {
        let scope = self.scopes.last_mut().expect("scope stack is never empty");
        if scope.vars.contains_key(name) {
            self.error("REDECLARATION", format!("conflicting declarations: '{name}'"), line);
            return;
        }
        scope.vars.insert(name.to_string(), var);
    }

    fn signature_of(&mut self, f: &FunDecl) -> Option<FunSig> {
        let mut ok = true;
        for (_, t) in &f.params {
            ok &= self.known_type(t, f.line);
        }
        let returns = f.returns.clone().unwrap_or_else(|| UNIT.to_string());
        ok &= self.known_type(&returns, f.line);
        ok.then(|| FunSig {
            name: f.name.clone(),
            params: f.params.iter().map(|(_, t)| t.clone()).collect(),
            returns,
            constructor: false,
        })
    }

    pub fn check_file(&mut self, decls: &[Decl]) {
        self.scopes.push(Scope::default());
        for d in decls {
            match d {
                Decl::Fun(f) => {
                    if let Some(sig) = self.signature_of(f) {
                        self.declare_fun(sig, f.line);
                    }
                }
                Decl::Prop(p) => {
                    if let Some(ty) = &p.ty {
                        if self.known_type(ty, p.line) {
                            self.declare_var(
                                &p.name,
                                Var {
                                    ty: ty.clone(),
                                    mutable: p.mutable,
                                },
                                p.line,
                            );
                        }
                    }
                }
            }
        }
        for d in decls {
            match d {
                Decl::Fun(f) => self.check_fun_body(f),
                Decl::Prop(p) => {
                    if p.ty.is_some() {
                        self.check_initializer(p);
                    } else {
                        self.local_prop(p);
                    }
                }
            }
        }
    }

    fn check_initializer(&mut self, p: &PropDecl) -> Option<String> {
        match &p.ty {
            Some(ty) => {
                if self.prelude.types.type_named(ty).is_some() {
                    self.check(&p.init, ty);
                } else {
                    self.infer(&p.init);
                }
                Some(ty.clone())
            }
            None => self.infer(&p.init).map(|t| t.ty),
        }
    }

    fn local_prop(&mut self, p: &PropDecl) {
        if let Some(ty) = &p.ty {
            if !self.known_type(ty, p.line) {
                self.infer(&p.init);
                return;
            }
        }
        if let Some(ty) = self.check_initializer(p) {
            self.declare_var(&p.name, Var { ty, mutable: p.mutable }, p.line);
        }
    }

    fn check_fun_body(&mut self, f: &FunDecl) {
        let returns = f.returns.clone().unwrap_or_else(|| UNIT.to_string());
        self.scopes.push(Scope::default());
        for (name, ty) in &f.params {
            if self.prelude.types.type_named(ty).is_some() {
                self.declare_var(
                    name,
                    Var {
                        ty: ty.clone(),
                        mutable: false,
                    },
                    f.line,
                );
            }
        }
        self.returns.push(returns.clone());
        for s in &f.body {
            self.stmt(s);
        }
        self.returns.pop();
        self.scopes.pop();
        let has_return = f.body.iter().any(|s| matches!(s, Stmt::Return(..)));
        if returns != UNIT && !has_return {
            self.error(
                "MISSING_RETURN",
                format!(
                    "a 'return' expression required in a function with a block body ('{}')",
                    f.name
                ),
                f.line,
            );
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Decl(Decl::Prop(p)) => self.local_prop(p),
            Stmt::Decl(Decl::Fun(f)) => {
                if let Some(sig) = self.signature_of(f) {
                    self.declare_fun(sig, f.line);
                }
                self.check_fun_body(f);
            }
            Stmt::Return(e, line) => match self.returns.last().cloned() {
                Some(ty) if ty != UNIT => self.check(e, &ty),
                Some(_) => {
                    self.infer(e);
                }
                None => self.error("SYNTAX", "'return' is not allowed here".into(), *line),
            },
            Stmt::Assign(name, e, line) => {
                let target = self.lookup_var(name).cloned();
                match target {
                    None => {
                        self.error("UNRESOLVED_REFERENCE", format!("unresolved reference '{name}'"), *line);
                        self.infer(e);
                    }
                    Some(v) => {
                        if !v.mutable {
                            self.error(
                                "VAL_REASSIGNMENT",
                                format!("'val' cannot be reassigned: '{name}'"),
                                *line,
                            );
                        }
                        self.check(e, &v.ty);
                    }
                }
            }
            Stmt::Expr(e) => {
                self.infer(e);
            }
        }
    }

    fn lookup_var(&self, name: &str) -> Option<&Var> {
        self.scopes.iter().rev().find_map(|s| s.vars.get(name))
    }

    fn check(&mut self, e: &Expr, expected: &str) {
        if let Some(t) = self.infer(e) {
            if !self.is_subtype(&t.ty, expected) {
                self.error(
                    "TYPE_MISMATCH",
                    format!(
                        "type mismatch: inferred type is '{}' but '{}' was expected",
                        t.ty, expected
                    ),
                    e.line,
                );
            }
        }
    }

    fn infer(&mut self, e: &Expr) -> Option<Typed> {
        let plain = |ty: &str| {
            Some(Typed {
                ty: ty.to_string(),
                constructor: false,
            })
        };
        match &e.kind {
            ExprKind::Int => plain("Int"),
            ExprKind::Float => plain("Float"),
            ExprKind::Char => plain("Char"),
            ExprKind::Str => plain("String"),
            ExprKind::Bool => plain("Bool"),
            ExprKind::Name(name) => match self.lookup_var(name) {
                Some(v) => plain(&v.ty.clone()),
                None => {
                    self.error("UNRESOLVED_REFERENCE", format!("unresolved reference '{name}'"), e.line);
                    None
                }
            },
            ExprKind::Call(name, args) => self.call(name, args, e.line),
            ExprKind::If(c, t, f) => {
                self.check(c, "Bool");
                let t = self.infer(t);
                let f = self.infer(f);
                let (t, f) = (t?, f?);
                self.join_or_report(&t.ty, &f.ty, e.line)
            }
            ExprKind::Elvis(l, r) => {
                let l = self.infer(l);
                let r = self.infer(r);
                let (l, r) = (l?, r?);
                if self.profile.d2() && l.constructor && r.constructor && l.ty == r.ty {
                    self.error(
                        "OVERLOAD_RESOLUTION_AMBIGUITY",
                        format!("overload resolution ambiguity between candidates of '{}'", l.ty),
                        e.line,
                    );
                    return None;
                }
                self.join_or_report(&l.ty, &r.ty, e.line)
            }
        }
    }

    fn join_or_report(&mut self, a: &str, b: &str, line: usize) -> Option<Typed> {
        match self.join(a, b) {
            Some(ty) => Some(Typed { ty, constructor: false }),
            None => {
                self.error("TYPE_MISMATCH", format!("incompatible types '{a}' and '{b}'"), line);
                None
            }
        }
    }

    /// Resolves a call scope by scope, innermost first. Within a scope the
    /// most specific applicable candidate wins.
    fn call(&mut self, name: &str, args: &[Expr], line: usize) -> Option<Typed> {
        let mut arg_types = Vec::with_capacity(args.len());
        for a in args {
            arg_types.push(self.infer(a));
        }
        let arg_types: Vec<String> = arg_types.into_iter().map(|t| t.map(|t| t.ty)).collect::<Option<_>>()?;

        let mut seen_name = false;
        for scope in self.scopes.iter().rev() {
            let named: Vec<&FunSig> = scope.funs.iter().filter(|f| f.name == name).collect();
            seen_name |= !named.is_empty();
            let applicable: Vec<&FunSig> = named
                .into_iter()
                .filter(|f| {
                    f.params.len() == arg_types.len()
                        && f.params.iter().zip(&arg_types).all(|(p, a)| self.is_subtype(a, p))
                })
                .collect();
            if applicable.is_empty() {
                continue;
            }
            let most_specific: Vec<&FunSig> = applicable
                .iter()
                .copied()
                .filter(|f| {
                    applicable
                        .iter()
                        .all(|g| f.params.iter().zip(&g.params).all(|(a, b)| self.is_subtype(a, b)))
                })
                .collect();
            if most_specific.len() == 1 {
                let f = most_specific[0];
                return Some(Typed {
                    ty: f.returns.clone(),
                    constructor: f.constructor,
                });
            }
            let message = format!("overload resolution ambiguity for '{name}'");
            self.error("OVERLOAD_RESOLUTION_AMBIGUITY", message, line);
            return None;
        }
        if seen_name {
            self.error(
                "NONE_APPLICABLE",
                format!("none of the candidates of '{name}' accepts ({})", arg_types.join(", ")),
                line,
            );
        } else {
            self.error("UNRESOLVED_REFERENCE", format!("unresolved reference '{name}'"), line);
        }
        None
    }
}
