//! Recursive-descent parser producing [`CompilationUnit`] values.
//!
//! The parser works on the token stream from [`crate::lexer`], so it can
//! parse either raw text or an already-lexed stream (used when edited token
//! sequences are re-checked without a canonical text layout).

use crate::ast::*;
use crate::lexer::{lex, LexError, Token, TokenKind};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{path}:{line}:{col}: {message}")]
pub struct SyntaxError {
    pub path: String,
    pub line: u32,
    pub col: u32,
    pub message: String,
}

impl SyntaxError {
    fn from_lex(err: LexError, path: &str) -> SyntaxError {
        let (line, col) = match err {
            LexError::UnterminatedString { line, col }
            | LexError::UnterminatedComment { line, col }
            | LexError::UnexpectedChar { line, col, .. } => (line, col),
        };
        SyntaxError {
            path: path.to_string(),
            line,
            col,
            message: err.to_string(),
        }
    }
}

pub fn parse(text: &str, path: &str) -> Result<CompilationUnit, SyntaxError> {
    let tokens = lex(text).map_err(|e| SyntaxError::from_lex(e, path))?;
    parse_tokens(&tokens, path)
}

pub fn parse_tokens(tokens: &[Token], path: &str) -> Result<CompilationUnit, SyntaxError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        path,
    };
    p.unit()
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    path: &'a str,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1)
    }

    fn err_at_current(&self, message: impl Into<String>) -> SyntaxError {
        let (line, col) = match self.peek() {
            Some(t) => (t.line, t.col),
            None => match self.tokens.last() {
                Some(t) => (t.line, t.col + t.text.chars().count() as u32),
                None => (1, 1),
            },
        };
        SyntaxError {
            path: self.path.to_string(),
            line,
            col,
            message: message.into(),
        }
    }

    fn expect_text(&mut self, text: &str) -> Result<usize, SyntaxError> {
        match self.peek() {
            Some(t) if t.text == text => {
                let idx = t.index;
                self.pos += 1;
                Ok(idx)
            }
            Some(t) => Err(self.err_at_current(format!("expected `{}`, found `{}`", text, t.text))),
            None => Err(self.err_at_current(format!("expected `{}`, found end of input", text))),
        }
    }

    fn at_text(&self, text: &str) -> bool {
        self.peek().is_some_and(|t| t.text == text)
    }

    fn eat_text(&mut self, text: &str) -> bool {
        if self.at_text(text) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<(String, usize), SyntaxError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Ident => {
                let out = (t.text.clone(), t.index);
                self.pos += 1;
                Ok(out)
            }
            Some(t) => Err(self.err_at_current(format!("expected {}, found `{}`", what, t.text))),
            None => Err(self.err_at_current(format!("expected {}, found end of input", what))),
        }
    }

    fn unit(&mut self) -> Result<CompilationUnit, SyntaxError> {
        let start = self.pos;
        self.expect_text("package")?;
        let mut package_name = self.expect_ident("package name")?.0;
        while self.eat_text(".") {
            package_name.push('.');
            package_name.push_str(&self.expect_ident("package name segment")?.0);
        }
        self.expect_text(";")?;
        let mut classes = Vec::new();
        while self.peek().is_some() {
            classes.push(self.class_decl()?);
        }
        Ok(CompilationUnit {
            path: self.path.to_string(),
            package_name,
            classes,
            span: Span::new(start, self.pos),
        })
    }

    fn class_decl(&mut self) -> Result<ClassDecl, SyntaxError> {
        let start = self.pos;
        self.expect_text("class")?;
        let (name, _) = self.expect_ident("class name")?;
        self.expect_text("{")?;
        let mut fields = Vec::new();
        let mut methods = Vec::new();
        while !self.at_text("}") {
            if self.peek().is_none() {
                return Err(self.err_at_current("expected `}` to close class body"));
            }
            let member_start = self.pos;
            let ret = self.return_type()?;
            let (mname, _) = self.expect_ident("member name")?;
            if self.at_text("(") {
                methods.push(self.method_rest(mname, ret, member_start)?);
            } else {
                // Field: `Type name;` — fields must precede methods so the
                // canonical renderer keeps member order lossless.
                let ty = match ret {
                    Some(ty) => ty,
                    None => return Err(self.err_at_current("field cannot have type `void`")),
                };
                if !methods.is_empty() {
                    return Err(self.err_at_current("field declarations must precede methods"));
                }
                self.expect_text(";")?;
                fields.push(FieldDecl {
                    ty,
                    name: mname,
                    span: Span::new(member_start, self.pos),
                });
            }
        }
        self.expect_text("}")?;
        Ok(ClassDecl {
            name,
            fields,
            methods,
            span: Span::new(start, self.pos),
        })
    }

    /// `void` or a type name. Returns `None` for void.
    fn return_type(&mut self) -> Result<Option<TypeName>, SyntaxError> {
        if self.eat_text("void") {
            return Ok(None);
        }
        Ok(Some(self.type_name()?))
    }

    fn type_name(&mut self) -> Result<TypeName, SyntaxError> {
        match self.peek() {
            Some(t) if t.text == "int" => {
                self.pos += 1;
                Ok(TypeName::Int)
            }
            Some(t) if t.text == "boolean" => {
                self.pos += 1;
                Ok(TypeName::Boolean)
            }
            Some(t) if t.kind == TokenKind::Ident => {
                let ty = TypeName::parse(&t.text);
                self.pos += 1;
                Ok(ty)
            }
            Some(t) => Err(self.err_at_current(format!("expected type, found `{}`", t.text))),
            None => Err(self.err_at_current("expected type, found end of input")),
        }
    }

    fn method_rest(
        &mut self,
        name: String,
        return_type: Option<TypeName>,
        start: usize,
    ) -> Result<MethodDecl, SyntaxError> {
        self.expect_text("(")?;
        let mut params = Vec::new();
        if !self.at_text(")") {
            loop {
                let pstart = self.pos;
                let ty = self.type_name()?;
                let (pname, _) = self.expect_ident("parameter name")?;
                params.push(Param {
                    ty,
                    name: pname,
                    span: Span::new(pstart, self.pos),
                });
                if !self.eat_text(",") {
                    break;
                }
            }
        }
        self.expect_text(")")?;
        let body = self.block()?;
        Ok(MethodDecl {
            name,
            params,
            return_type,
            body,
            span: Span::new(start, self.pos),
        })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect_text("{")?;
        let mut stmts = Vec::new();
        while !self.at_text("}") {
            if self.peek().is_none() {
                return Err(self.err_at_current("expected `}` to close block"));
            }
            stmts.push(self.stmt()?);
        }
        self.expect_text("}")?;
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.pos;
        match self.peek().map(|t| t.text.as_str()) {
            Some("if") => self.if_stmt(),
            Some("while") => {
                self.pos += 1;
                self.expect_text("(")?;
                let cond = self.expr()?;
                self.expect_text(")")?;
                let body = self.block()?;
                Ok(Stmt::While {
                    cond,
                    body,
                    span: Span::new(start, self.pos),
                })
            }
            Some("return") => {
                self.pos += 1;
                let value = if self.at_text(";") { None } else { Some(self.expr()?) };
                self.expect_text(";")?;
                Ok(Stmt::Return {
                    value,
                    span: Span::new(start, self.pos),
                })
            }
            Some("assert") => {
                self.pos += 1;
                let cond = self.expr()?;
                self.expect_text(";")?;
                Ok(Stmt::Assert {
                    cond,
                    span: Span::new(start, self.pos),
                })
            }
            Some("int") | Some("boolean") => self.var_decl(),
            _ => {
                // `Ident Ident` starts a declaration with a class/String type;
                // anything else is an assignment or expression statement.
                let is_decl = self.peek().is_some_and(|t| t.kind == TokenKind::Ident)
                    && self.peek2().is_some_and(|t| t.kind == TokenKind::Ident);
                if is_decl {
                    self.var_decl()
                } else {
                    let expr = self.expr()?;
                    if self.at_text("=") {
                        match expr {
                            Expr::Name(..) | Expr::FieldAccess { .. } => {}
                            _ => {
                                return Err(
                                    self.err_at_current("invalid assignment target before `=`")
                                )
                            }
                        }
                        self.pos += 1;
                        let value = self.expr()?;
                        self.expect_text(";")?;
                        Ok(Stmt::Assign {
                            target: expr,
                            value,
                            span: Span::new(start, self.pos),
                        })
                    } else {
                        self.expect_text(";")?;
                        Ok(Stmt::ExprStmt {
                            expr,
                            span: Span::new(start, self.pos),
                        })
                    }
                }
            }
        }
    }

    fn var_decl(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.pos;
        let ty = self.type_name()?;
        let (name, _) = self.expect_ident("variable name")?;
        let init = if self.eat_text("=") { Some(self.expr()?) } else { None };
        self.expect_text(";")?;
        Ok(Stmt::VarDecl {
            ty,
            name,
            init,
            span: Span::new(start, self.pos),
        })
    }

    fn if_stmt(&mut self) -> Result<Stmt, SyntaxError> {
        let start = self.pos;
        self.expect_text("if")?;
        self.expect_text("(")?;
        let cond = self.expr()?;
        self.expect_text(")")?;
        let then_branch = self.block()?;
        let else_branch = if self.eat_text("else") {
            if self.at_text("if") {
                Some(ElseBranch::If(Box::new(self.if_stmt()?)))
            } else {
                Some(ElseBranch::Block(self.block()?))
            }
        } else {
            None
        };
        Ok(Stmt::If {
            cond,
            then_branch,
            else_branch,
            span: Span::new(start, self.pos),
        })
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary_expr(0)
    }

    fn binary_expr(&mut self, min_level: u8) -> Result<Expr, SyntaxError> {
        let start = self.pos;
        let mut lhs = self.unary_expr()?;
        loop {
            let Some(op) = self.peek().and_then(|t| bin_op(&t.text)) else {
                break;
            };
            let level = bin_level(op);
            if level < min_level {
                break;
            }
            self.pos += 1;
            let rhs = self.binary_expr(level + 1)?;
            lhs = Expr::Binary {
                op,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                span: Span::new(start, self.pos),
            };
        }
        Ok(lhs)
    }

    fn unary_expr(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.pos;
        let op = match self.peek().map(|t| t.text.as_str()) {
            Some("!") => Some(UnOp::Not),
            Some("-") => Some(UnOp::Neg),
            _ => None,
        };
        if let Some(op) = op {
            self.pos += 1;
            let operand = self.unary_expr()?;
            return Ok(Expr::Unary {
                op,
                operand: Box::new(operand),
                span: Span::new(start, self.pos),
            });
        }
        self.postfix_expr()
    }

    fn postfix_expr(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.pos;
        let mut expr = self.primary_expr()?;
        while self.eat_text(".") {
            let (name, _) = self.expect_ident("member name after `.`")?;
            if self.at_text("(") {
                let args = self.call_args()?;
                expr = Expr::Call {
                    recv: Some(Box::new(expr)),
                    name,
                    args,
                    span: Span::new(start, self.pos),
                };
            } else {
                expr = Expr::FieldAccess {
                    recv: Box::new(expr),
                    field: name,
                    span: Span::new(start, self.pos),
                };
            }
        }
        Ok(expr)
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect_text("(")?;
        let mut args = Vec::new();
        if !self.at_text(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_text(",") {
                    break;
                }
            }
        }
        self.expect_text(")")?;
        Ok(args)
    }

    fn primary_expr(&mut self) -> Result<Expr, SyntaxError> {
        let start = self.pos;
        let Some(tok) = self.peek() else {
            return Err(self.err_at_current("expected expression, found end of input"));
        };
        match tok.kind {
            TokenKind::IntLit => {
                let value: i64 = tok
                    .text
                    .parse()
                    .map_err(|_| self.err_at_current("integer literal out of range"))?;
                self.pos += 1;
                Ok(Expr::IntLit(value, Span::new(start, self.pos)))
            }
            TokenKind::StrLit => {
                let raw = tok.text[1..tok.text.len() - 1].to_string();
                self.pos += 1;
                Ok(Expr::StrLit(raw, Span::new(start, self.pos)))
            }
            TokenKind::Keyword => match tok.text.as_str() {
                "true" => {
                    self.pos += 1;
                    Ok(Expr::BoolLit(true, Span::new(start, self.pos)))
                }
                "false" => {
                    self.pos += 1;
                    Ok(Expr::BoolLit(false, Span::new(start, self.pos)))
                }
                "null" => {
                    self.pos += 1;
                    Ok(Expr::NullLit(Span::new(start, self.pos)))
                }
                other => Err(self.err_at_current(format!(
                    "expected expression, found keyword `{other}`"
                ))),
            },
            TokenKind::Ident => {
                let name = tok.text.clone();
                self.pos += 1;
                if self.at_text("(") {
                    let args = self.call_args()?;
                    Ok(Expr::Call {
                        recv: None,
                        name,
                        args,
                        span: Span::new(start, self.pos),
                    })
                } else {
                    Ok(Expr::Name(name, Span::new(start, self.pos)))
                }
            }
            TokenKind::Punct => {
                if tok.text == "(" {
                    self.pos += 1;
                    let inner = self.expr()?;
                    self.expect_text(")")?;
                    Ok(Expr::Paren(Box::new(inner), Span::new(start, self.pos)))
                } else {
                    Err(self.err_at_current(format!(
                        "expected expression, found `{}`",
                        tok.text
                    )))
                }
            }
        }
    }
}

fn bin_op(text: &str) -> Option<BinOp> {
    Some(match text {
        "||" => BinOp::Or,
        "&&" => BinOp::And,
        "==" => BinOp::Eq,
        "!=" => BinOp::Ne,
        "<" => BinOp::Lt,
        "<=" => BinOp::Le,
        ">" => BinOp::Gt,
        ">=" => BinOp::Ge,
        "+" => BinOp::Add,
        "-" => BinOp::Sub,
        "*" => BinOp::Mul,
        "/" => BinOp::Div,
        "%" => BinOp::Mod,
        _ => return None,
    })
}

fn bin_level(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 0,
        BinOp::And => 1,
        BinOp::Eq | BinOp::Ne => 2,
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul | BinOp::Div | BinOp::Mod => 5,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_program() {
        let unit = parse("package p; class A { }", "a.ml4j").unwrap();
        assert_eq!(unit.package_name, "p");
        assert_eq!(unit.classes.len(), 1);
        assert_eq!(unit.classes[0].name, "A");
        assert!(unit.classes[0].fields.is_empty());
        assert!(unit.classes[0].methods.is_empty());
    }

    #[test]
    fn method_with_param_and_return() {
        let unit = parse("package p; class A { int f(int x){ return x; } }", "a.ml4j").unwrap();
        let m = &unit.classes[0].methods[0];
        assert_eq!(m.name, "f");
        assert_eq!(m.params.len(), 1);
        assert_eq!(m.body.len(), 1);
        // Token spans, hand-checked against the lexed stream:
        // 0:package 1:p 2:; 3:class 4:A 5:{ 6:int 7:f 8:( 9:int 10:x 11:)
        // 12:{ 13:return 14:x 15:; 16:} 17:}
        assert_eq!(m.span, Span::new(6, 17));
        let Stmt::Return { value: Some(v), span } = &m.body[0] else {
            panic!("expected return");
        };
        assert_eq!(*span, Span::new(13, 16));
        assert_eq!(v.span(), Span::new(14, 15));
        assert_eq!(m.params[0].span, Span::new(9, 11));
    }

    #[test]
    fn malformed_class_reports_position() {
        let err = parse("class {", "bad.ml4j").unwrap_err();
        assert_eq!(err.path, "bad.ml4j");
        // `class` appears where `package` is required.
        assert_eq!((err.line, err.col), (1, 1));

        let err = parse("package p; class {", "bad.ml4j").unwrap_err();
        assert_eq!((err.line, err.col), (1, 18));
        assert!(err.message.contains("class name"));
    }

    #[test]
    fn precedence_binds_mul_over_add() {
        let unit = parse(
            "package p; class A { int f(){ return 1 + 2 * 3; } }",
            "a.ml4j",
        )
        .unwrap();
        let Stmt::Return { value: Some(Expr::Binary { op, rhs, .. }), .. } =
            &unit.classes[0].methods[0].body[0]
        else {
            panic!("expected return of binary expr");
        };
        assert_eq!(*op, BinOp::Add);
        assert!(matches!(**rhs, Expr::Binary { op: BinOp::Mul, .. }));
    }

    #[test]
    fn parens_are_preserved_as_nodes() {
        let unit = parse(
            "package p; class A { int f(){ return (1 + 2) * 3; } }",
            "a.ml4j",
        )
        .unwrap();
        let Stmt::Return { value: Some(Expr::Binary { lhs, .. }), .. } =
            &unit.classes[0].methods[0].body[0]
        else {
            panic!();
        };
        assert!(matches!(**lhs, Expr::Paren(..)));
    }

    #[test]
    fn else_if_chain() {
        let src = "package p; class A { int f(int x){ if (x > 1) { return 2; } else if (x > 0) { return 1; } else { return 0; } } }";
        let unit = parse(src, "a.ml4j").unwrap();
        let Stmt::If { else_branch: Some(ElseBranch::If(nested)), .. } =
            &unit.classes[0].methods[0].body[0]
        else {
            panic!("expected else-if");
        };
        assert!(matches!(
            **nested,
            Stmt::If { else_branch: Some(ElseBranch::Block(_)), .. }
        ));
    }

    #[test]
    fn field_after_method_is_rejected() {
        let err = parse(
            "package p; class A { void m(){} int f; }",
            "a.ml4j",
        )
        .unwrap_err();
        assert!(err.message.contains("precede"));
    }

    #[test]
    fn assignment_target_must_be_a_place() {
        let err = parse("package p; class A { void m(){ f() = 1; } }", "a.ml4j").unwrap_err();
        assert!(err.message.contains("assignment target"));
    }
}
