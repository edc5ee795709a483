use super::lexer::{Tok, Token};
use super::Diagnostic;

pub const KEYWORDS: &[&str] = &["fun", "val", "var", "return", "if", "else", "true", "false"];

#[derive(Clone, Debug, PartialEq)]
pub struct FunDecl {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub returns: Option<String>,
    pub body: Vec<Stmt>,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PropDecl {
    pub mutable: bool,
    pub name: String,
    pub ty: Option<String>,
    pub init: Expr,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decl {
    Fun(FunDecl),
    Prop(PropDecl),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Decl(Decl),
    Return(Expr, usize),
    Assign(String, Expr, usize),
    Expr(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Int,
    Float,
    Char,
    Str,
    Bool,
    Name(String),
    Call(String, Vec<Expr>),
    If(Box<Expr>, Box<Expr>, Box<Expr>),
    Elvis(Box<Expr>, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub line: usize,
}

pub fn parse(tokens: &[Token]) -> Result<Vec<Decl>, Diagnostic> {
    let mut p = Parser { toks: tokens, pos: 0 };
    let mut decls = Vec::new();
    loop {
        p.skip_separators();
        if p.peek() == &Tok::Eof {
            return Ok(decls);
        }
        decls.push(p.decl()?);
        p.end_of_statement()?;
    }
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &'a Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &'a Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    fn bump(&mut self) -> &'a Tok {
        let t = &self.toks[self.pos].tok;
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, Diagnostic> {
        Err(Diagnostic::new("SYNTAX", msg.into(), self.line()))
    }

    fn describe(t: &Tok) -> String {
        match t {
            Tok::Ident(s) | Tok::Int(s) | Tok::Float(s) | Tok::Char(s) | Tok::Str(s) => format!("'{s}'"),
            Tok::Newline => "end of line".into(),
            Tok::Eof => "end of file".into(),
            other => format!("{other:?}"),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), Diagnostic> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expecting {want:?}, found {}", Self::describe(self.peek())))
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    fn end_of_statement(&mut self) -> Result<(), Diagnostic> {
        match self.peek() {
            Tok::Newline | Tok::Semi | Tok::Eof | Tok::RBrace => Ok(()),
            other => self.error(format!("unexpected {} after statement", Self::describe(other))),
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self) -> Result<String, Diagnostic> {
        match self.peek() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expecting an identifier, found {}", Self::describe(other))),
        }
    }

    fn decl(&mut self) -> Result<Decl, Diagnostic> {
        if self.is_keyword("fun") {
            Ok(Decl::Fun(self.fun_decl()?))
        } else if self.is_keyword("val") || self.is_keyword("var") {
            Ok(Decl::Prop(self.prop_decl()?))
        } else {
            self.error(format!(
                "expecting a top-level declaration, found {}",
                Self::describe(self.peek())
            ))
        }
    }

    fn fun_decl(&mut self) -> Result<FunDecl, Diagnostic> {
        let line = self.line();
        self.bump();
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                let p = self.ident()?;
                self.expect(Tok::Colon)?;
                let t = self.ident()?;
                params.push((p, t));
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        let returns = if *self.peek() == Tok::Colon {
            self.bump();
            Some(self.ident()?)
        } else {
            None
        };
        self.expect(Tok::LBrace)?;
        let mut body = Vec::new();
        loop {
            self.skip_separators();
            if *self.peek() == Tok::RBrace {
                self.bump();
                break;
            }
            if *self.peek() == Tok::Eof {
                return self.error("unclosed function body");
            }
            body.push(self.stmt()?);
            self.end_of_statement()?;
        }
        Ok(FunDecl {
            name,
            params,
            returns,
            body,
            line,
        })
    }

    fn prop_decl(&mut self) -> Result<PropDecl, Diagnostic> {
        let line = self.line();
        let mutable = self.is_keyword("var");
        self.bump();
        let name = self.ident()?;
        let ty = if *self.peek() == Tok::Colon {
            self.bump();
            Some(self.ident()?)
        } else {
            None
        };
        self.expect(Tok::Assign)?;
        let init = self.expr()?;
        Ok(PropDecl {
            mutable,
            name,
            ty,
            init,
            line,
        })
    }

    fn stmt(&mut self) -> Result<Stmt, Diagnostic> {
        if self.is_keyword("fun") || self.is_keyword("val") || self.is_keyword("var") {
            return Ok(Stmt::Decl(self.decl()?));
        }
        if self.is_keyword("return") {
            let line = self.line();
            self.bump();
            return Ok(Stmt::Return(self.expr()?, line));
        }
        if let (Tok::Ident(name), Tok::Assign) = (self.peek(), self.peek_at(1)) {
            if !KEYWORDS.contains(&name.as_str()) {
                let line = self.line();
                let name = name.clone();
                self.bump();
                self.bump();
                return Ok(Stmt::Assign(name, self.expr()?, line));
            }
        }
        Ok(Stmt::Expr(self.expr()?))
    }

    fn expr(&mut self) -> Result<Expr, Diagnostic> {
        let lhs = self.primary()?;
        if *self.peek() == Tok::Elvis {
            let line = self.line();
            self.bump();
            let rhs = self.expr()?;
            return Ok(Expr {
                kind: ExprKind::Elvis(Box::new(lhs), Box::new(rhs)),
                line,
            });
        }
        Ok(lhs)
    }

    fn primary(&mut self) -> Result<Expr, Diagnostic> {
        let line = self.line();
        let kind = match self.peek() {
            Tok::Int(_) => ExprKind::Int,
            Tok::Float(_) => ExprKind::Float,
            Tok::Char(_) => ExprKind::Char,
            Tok::Str(_) => ExprKind::Str,
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                return Ok(e);
            }
            Tok::Ident(s) if s == "true" || s == "false" => ExprKind::Bool,
            Tok::Ident(s) if s == "if" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let c = self.expr()?;
                self.expect(Tok::RParen)?;
                let t = self.expr()?;
                if !self.is_keyword("else") {
                    return self.error("'if' must have both main and 'else' branches if used as an expression");
                }
                self.bump();
                let e = self.expr()?;
                return Ok(Expr {
                    kind: ExprKind::If(Box::new(c), Box::new(t), Box::new(e)),
                    line,
                });
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if *self.peek() != Tok::LParen {
                    return Ok(Expr {
                        kind: ExprKind::Name(name),
                        line,
                    });
                }
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    loop {
                        args.push(self.expr()?);
                        if *self.peek() == Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                return Ok(Expr {
                    kind: ExprKind::Call(name, args),
                    line,
                });
            }
            other => return self.error(format!("expecting an expression, found {}", Self::describe(other))),
        };
        self.bump();
        Ok(Expr { kind, line })
    }
}
