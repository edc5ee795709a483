//! Reference checker for the shipped mini-language.
//!
//! `refc` performs a full lexical, syntactic, scoping and type check. Its
//! [`BugProfile`] can switch on three seeded defects:
//!
//! * `D1`: functions repeating a (name, parameter types) pair in one scope
//!   are silently accepted and calls bind to the first one (false negative).
//! * `D2`: an elvis-expression whose operands are both constructor calls of
//!   the same type is rejected as an overload resolution ambiguity (false
//!   positive).
//! * `D3`: inputs of 10,000 characters or more abort with an
//!   out-of-memory report.

mod checker;
mod lexer;
mod parser;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::semantics::{extract_context, CallableKind, SemanticContext, SemanticError, TypeId};
use checker::{Checker, FunSig, Scope, Var};

pub use lexer::{lex, Tok, Token};
pub use parser::{parse, Decl, Expr, ExprKind, FunDecl, PropDecl, Stmt};

/// Input length at which the `D3` defect fires.
pub const OOM_THRESHOLD_CHARS: usize = 10_000;

pub const EXIT_ACCEPT: i32 = 0;
pub const EXIT_REJECT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_OOM: i32 = 42;

pub const OOM_MESSAGE: &str =
    "Exception in thread \"main\" java.lang.OutOfMemoryError: Java heap space (refc simulated)";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BugProfile {
    #[default]
    None,
    D1,
    D2,
    D3,
    All,
}

impl BugProfile {
    pub fn d1(self) -> bool {
        matches!(self, BugProfile::D1 | BugProfile::All)
    }

    pub fn d2(self) -> bool {
        matches!(self, BugProfile::D2 | BugProfile::All)
    }

    pub fn d3(self) -> bool {
        matches!(self, BugProfile::D3 | BugProfile::All)
    }
}

impl FromStr for BugProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "ok" => Ok(BugProfile::None),
            "d1" => Ok(BugProfile::D1),
            "d2" => Ok(BugProfile::D2),
            "d3" => Ok(BugProfile::D3),
            "all" => Ok(BugProfile::All),
            _ => Err(format!("unknown bug profile '{s}' (expected none, D1, D2, D3 or all)")),
        }
    }
}

impl fmt::Display for BugProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BugProfile::None => "none",
            BugProfile::D1 => "D1",
            BugProfile::D2 => "D2",
            BugProfile::D3 => "D3",
            BugProfile::All => "all",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
    pub line: usize,
}

impl Diagnostic {
    pub fn new(code: &str, message: String, line: usize) -> Self {
        Diagnostic {
            code: code.to_string(),
            message,
            line,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ERROR {}: {} @ line {}", self.code, self.message, self.line)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub accepted: bool,
    pub diagnostics: Vec<Diagnostic>,
    /// Set when the simulated out-of-memory defect fired.
    pub out_of_memory: bool,
}

/// Built-in declarations visible to every program: the types and the
/// identifier-named callables of a seed context.
#[derive(Clone, Debug)]
pub struct Prelude {
    types: SemanticContext,
    scope: Scope,
}

impl Prelude {
    pub fn from_context(ctx: &SemanticContext) -> Self {
        let mut types = SemanticContext::with_types_of(ctx);
        let unit = TypeId::new("Unit").expect("non-empty");
        if !types.has_type(&unit) {
            let sups: Vec<TypeId> = types.type_named("Any").cloned().into_iter().collect();
            types
                .declare_type(unit, &sups)
                .expect("Unit is new and Any is declared");
        }
        let mut scope = Scope::default();
        for c in ctx.callables() {
            if !crate::generator::is_identifier(&c.name) {
                continue;
            }
            match c.kind {
                CallableKind::Function | CallableKind::Constructor => scope.funs.push(FunSig {
                    name: c.name.clone(),
                    params: c.params.iter().map(|p| p.to_string()).collect(),
                    returns: c.returns.to_string(),
                    constructor: c.kind == CallableKind::Constructor,
                }),
                CallableKind::Property | CallableKind::Constant | CallableKind::Variable => {
                    scope.vars.insert(
                        c.name.clone(),
                        Var {
                            ty: c.returns.to_string(),
                            mutable: c.kind == CallableKind::Variable,
                        },
                    );
                }
            }
        }
        Prelude { types, scope }
    }

    pub fn from_seed(seed_text: &str) -> Result<Self, SemanticError> {
        Ok(Prelude::from_context(&extract_context(seed_text)?))
    }

    /// The prelude of the shipped seed.
    pub fn shipped() -> &'static Prelude {
        static SHIPPED: OnceLock<Prelude> = OnceLock::new();
        SHIPPED.get_or_init(|| Prelude::from_seed(crate::assets::SEED).expect("shipped seed is valid"))
    }
}

pub fn check_program(source: &str, profile: BugProfile) -> CheckVerdict {
    check_program_with(source, profile, Prelude::shipped())
}

pub fn check_program_with(source: &str, profile: BugProfile, prelude: &Prelude) -> CheckVerdict {
    if profile.d3() && source.chars().count() >= OOM_THRESHOLD_CHARS {
        return CheckVerdict {
            accepted: false,
            diagnostics: vec![Diagnostic::new("OutOfMemoryError", "Java heap space".into(), 1)],
            out_of_memory: true,
        };
    }
    let decls = match lex(source).and_then(|t| parse(&t)) {
        Ok(d) => d,
        Err(d) => {
            return CheckVerdict {
                accepted: false,
                diagnostics: vec![d],
                out_of_memory: false,
            }
        }
    };
    let mut checker = Checker::new(prelude, profile);
    checker.check_file(&decls);
    CheckVerdict {
        accepted: checker.diags.is_empty(),
        diagnostics: checker.diags,
        out_of_memory: false,
    }
}

/// Checks a file and reports like the command-line tool: diagnostics on
/// `err`, one per line, and the process exit code as result.
pub fn run_file(path: &Path, profile: BugProfile, seed: Option<&Path>, err: &mut dyn Write) -> i32 {
    let prelude_owned;
    let prelude = match seed {
        None => Prelude::shipped(),
        Some(p) => match std::fs::read_to_string(p)
            .map_err(|e| e.to_string())
            .and_then(|t| Prelude::from_seed(&t).map_err(|e| e.to_string()))
        {
            Ok(pr) => {
                prelude_owned = pr;
                &prelude_owned
            }
            Err(e) => {
                let _ = writeln!(err, "refc: cannot load seed {}: {e}", p.display());
                return EXIT_CONFIG;
            }
        },
    };
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "refc: cannot read {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    let verdict = check_program_with(&source, profile, prelude);
    if verdict.out_of_memory {
        let _ = writeln!(err, "{OOM_MESSAGE}");
        return EXIT_OOM;
    }
    for d in &verdict.diagnostics {
        let _ = writeln!(err, "{d}");
    }
    if verdict.accepted {
        EXIT_ACCEPT
    } else {
        EXIT_REJECT
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FOOTER: &str = "fun main() {}\n";

    fn codes(src: &str, profile: BugProfile) -> Vec<String> {
        check_program(src, profile)
            .diagnostics
            .into_iter()
            .map(|d| d.code)
            .collect()
    }

    #[test]
    fn empty_program_is_accepted() {
        assert!(check_program(FOOTER, BugProfile::None).accepted);
        assert!(check_program(FOOTER, BugProfile::All).accepted);
    }

    #[test]
    fn conflicting_overloads_seeded_defect() {
        let src = "fun f0(): Int {\n    fun p(): Char {\n        return 'c'\n    }\n    fun p(): Float {\n        return 2.5f\n    }\n    return 1\n}\nfun main() {}\n";
        assert_eq!(codes(src, BugProfile::None), ["CONFLICTING_OVERLOADS"]);
        assert!(check_program(src, BugProfile::D1).accepted);
        let top = "fun f0(): Int {\n    return 1\n}\nfun f0(): Char {\n    return 'c'\n}\nfun main() {}\n";
        assert_eq!(codes(top, BugProfile::None), ["CONFLICTING_OVERLOADS"]);
        assert!(check_program(top, BugProfile::D1).accepted);
    }

    #[test]
    fn elvis_over_constructors_seeded_defect() {
        let src = "val v0: String = (String('c') ?: String('x'))\nfun main() {}\n";
        assert!(check_program(src, BugProfile::None).accepted);
        assert_eq!(codes(src, BugProfile::D2), ["OVERLOAD_RESOLUTION_AMBIGUITY"]);
        let mixed = "val v0: Any = (String('c') ?: Float(1))\nfun main() {}\n";
        assert!(check_program(mixed, BugProfile::D2).accepted);
    }

    #[test]
    fn large_inputs_trip_the_oom_defect() {
        let mut src = String::new();
        let mut k = 0;
        while src.len() < 12_000 {
            src.push_str(&format!("val v{k}: Int = max(1, 42)\n"));
            k += 1;
        }
        src.push_str(FOOTER);
        assert!(check_program(&src, BugProfile::None).accepted);
        let v = check_program(&src, BugProfile::D3);
        assert!(v.out_of_memory && !v.accepted);
    }

    #[test]
    fn typing_rules() {
        let ok = "var v0: Any = 1\nfun f0(p0: Int): Int {\n    v0 = 'c'\n    val v1: Int = (if (true) p0 else code('c'))\n    return max(v1, length(\"hi\"))\n}\nval v2: Float = (PI ?: Float(f0(3)))\nfun main() {}\n";
        assert_eq!(codes(ok, BugProfile::None), Vec::<String>::new());
        let cases = [
            ("val v0: Int = 'c'\n", "TYPE_MISMATCH"),
            ("val v0: Int = v9\n", "UNRESOLVED_REFERENCE"),
            ("val v0: Int = 1\nfun f() {\n    v0 = 2\n}\n", "VAL_REASSIGNMENT"),
            ("fun f(): Int {\n    val x: Int = 1\n}\n", "MISSING_RETURN"),
            ("val v0: Int = 1\nval v0: Char = 'c'\n", "REDECLARATION"),
            ("val v0: Int = max(1)\n", "NONE_APPLICABLE"),
            ("val v0: Nope = 1\n", "UNKNOWN_TYPE"),
            ("val v0: Int = (if (1) 2 else 3)\n", "TYPE_MISMATCH"),
            ("fun f(): Int {\n    return 'c'\n}\n", "TYPE_MISMATCH"),
            ("val = 1\n", "SYNTAX"),
        ];
        for (src, code) in cases {
            assert_eq!(codes(src, BugProfile::None), [code], "{src}");
        }
    }

    #[test]
    fn locals_are_sequential_and_scoped() {
        let use_before = "fun f(): Int {\n    val a: Int = b\n    val b: Int = 1\n    return a\n}\n";
        assert_eq!(codes(use_before, BugProfile::None), ["UNRESOLVED_REFERENCE"]);
        let escaped =
            "fun f(): Int {\n    fun g(): Int {\n        return 1\n    }\n    return g()\n}\nval v: Int = g()\n";
        assert_eq!(codes(escaped, BugProfile::None), ["UNRESOLVED_REFERENCE"]);
        let forward_top = "val v: Int = f()\nfun f(): Int {\n    return 1\n}\n";
        assert!(check_program(forward_top, BugProfile::None).accepted);
    }

    #[test]
    fn profile_names_parse() {
        assert_eq!("D1".parse::<BugProfile>().unwrap(), BugProfile::D1);
        assert_eq!("all".parse::<BugProfile>().unwrap(), BugProfile::All);
        assert!("d4".parse::<BugProfile>().is_err());
    }
}
