//! Tokenizer and precedence-climbing parser.
//!
//! Precedence, tightest first: `^` (right associative), unary `-`,
//! `*` `/`, `+` `-` (left associative). Functions: `sqrt`, `log` (alias
//! `ln`), `exp`.

use super::{BinaryOp, Expr, ExprError, ExprKind, Span, UnaryOp};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

fn tokenize(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = src[i..].chars().next().unwrap();
        let start = i;
        if c.is_whitespace() {
            i += c.len_utf8();
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' | '−' => Some(Tok::Minus),
            '*' | '×' => Some(Tok::Star),
            '/' | '÷' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            i += c.len_utf8();
            out.push(Token { tok, span: Span { start, end: i } });
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &src[start..i];
            let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                position: start,
                message: format!("malformed number '{text}'"),
            })?;
            if !value.is_finite() {
                return Err(ExprError::Syntax { position: start, message: format!("number '{text}' out of range") });
            }
            out.push(Token { tok: Tok::Num(value), span: Span { start, end: i } });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(src[start..i].to_string()), span: Span { start, end: i } });
            continue;
        }
        return Err(ExprError::Syntax { position: start, message: format!("unexpected character '{c}'") });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    src_len: usize,
    names: &'a [String],
    depth: usize,
}

/// Parses `src`, resolving identifiers against `names`.
pub(super) fn parse(src: &str, names: &[String]) -> Result<Expr, ExprError> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(ExprError::Empty);
    }
    let mut p = Parser { tokens, pos: 0, src_len: src.len(), names, depth: 0 };
    let expr = p.additive()?;
    if let Some(t) = p.peek() {
        return Err(ExprError::Syntax {
            position: t.span.start,
            message: match t.tok {
                Tok::RParen => "unbalanced ')'".to_string(),
                _ => "unexpected token after complete expression".to_string(),
            },
        });
    }
    Ok(expr)
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eof_error(&self, what: &str) -> ExprError {
        ExprError::Syntax { position: self.src_len, message: format!("unexpected end of input, expected {what}") }
    }

    fn enter(&mut self) -> Result<(), ExprError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            let position = self.peek().map(|t| t.span.start).unwrap_or(self.src_len);
            return Err(ExprError::Syntax { position, message: "expression nested too deeply".into() });
        }
        Ok(())
    }

    fn additive(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.multiplicative()?;
        while let Some(op) = self.peek().and_then(|t| match t.tok {
            Tok::Plus => Some(BinaryOp::Add),
            Tok::Minus => Some(BinaryOp::Sub),
            _ => None,
        }) {
            self.pos += 1;
            let rhs = self.multiplicative()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek().and_then(|t| match t.tok {
            Tok::Star => Some(BinaryOp::Mul),
            Tok::Slash => Some(BinaryOp::Div),
            _ => None,
        }) {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        self.enter()?;
        let result = if matches!(self.peek(), Some(Token { tok: Tok::Minus, .. })) {
            let start = self.next().unwrap().span.start;
            let operand = self.unary()?;
            let span = Span { start, end: operand.span.end };
            Ok(Expr { kind: ExprKind::Unary(UnaryOp::Neg, Box::new(operand)), span })
        } else {
            self.power()
        };
        self.depth -= 1;
        result
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if matches!(self.peek(), Some(Token { tok: Tok::Caret, .. })) {
            self.pos += 1;
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn expect_rparen(&mut self, open: Span) -> Result<Span, ExprError> {
        match self.next() {
            Some(Token { tok: Tok::RParen, span }) => Ok(span),
            Some(t) => Err(ExprError::Syntax {
                position: t.span.start,
                message: format!("expected ')' to close '(' at position {}", open.start),
            }),
            None => Err(ExprError::Syntax {
                position: self.src_len,
                message: format!("unbalanced '(' at position {}", open.start),
            }),
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let Some(t) = self.next() else {
            return Err(self.eof_error("a number, parameter, function or '('"));
        };
        match t.tok {
            Tok::Num(v) => Ok(Expr { kind: ExprKind::Const(v), span: t.span }),
            Tok::LParen => {
                self.enter()?;
                let inner = self.additive()?;
                self.depth -= 1;
                let close = self.expect_rparen(t.span)?;
                Ok(Expr { kind: inner.kind, span: Span { start: t.span.start, end: close.end } })
            }
            Tok::Ident(name) => {
                let func = match name.as_str() {
                    "sqrt" => Some(UnaryOp::Sqrt),
                    "log" | "ln" => Some(UnaryOp::Log),
                    "exp" => Some(UnaryOp::Exp),
                    _ => None,
                };
                let is_call = matches!(self.peek(), Some(Token { tok: Tok::LParen, .. }));
                match (func, is_call) {
                    (Some(op), true) => {
                        let open = self.next().unwrap().span;
                        self.enter()?;
                        let arg = self.additive()?;
                        self.depth -= 1;
                        let close = self.expect_rparen(open)?;
                        Ok(Expr {
                            kind: ExprKind::Unary(op, Box::new(arg)),
                            span: Span { start: t.span.start, end: close.end },
                        })
                    }
                    (None, true) => Err(ExprError::Syntax {
                        position: t.span.start,
                        message: format!("unknown function '{name}' (available: sqrt, log, ln, exp)"),
                    }),
                    _ => match self.names.iter().position(|n| *n == name) {
                        Some(index) => Ok(Expr { kind: ExprKind::Param { name, index }, span: t.span }),
                        None => Err(ExprError::UnknownIdentifier {
                            name,
                            position: t.span.start,
                            valid: self.names.to_vec(),
                        }),
                    },
                }
            }
            _ => Err(ExprError::Syntax {
                position: t.span.start,
                message: "expected a number, parameter, function or '('".into(),
            }),
        }
    }
}
