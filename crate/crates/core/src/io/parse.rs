//! Infix surface syntax for expressions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | name | '#' digits | '$' digits
//!          | ('exp' | 'log') '(' sum ')' | ('min' | 'max') '(' sum ',' sum ')'
//!          | '(' sum ')'
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right. A minus
//! directly before a number literal folds into a negative constant unless the
//! literal is raised to a power. Names are plain identifiers or backticked
//! text; they resolve to a link slot, then a sum-variable slot, then a
//! parameter. `#k` and `$k` address slots directly.

use thiserror::Error;

use crate::expr::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("`{0}` names both a linked stock and a sum variable")]
    AmbiguousName(String),
}

/// Names visible to an expression: the source stock of each incoming link
/// and each incoming sum-variable link, in slot order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExprContext {
    pub links: Vec<String>,
    pub sum_vars: Vec<String>,
}

impl ExprContext {
    pub fn new(links: Vec<String>, sum_vars: Vec<String>) -> Self {
        ExprContext { links, sum_vars }
    }

    fn resolve(&self, name: &str) -> Result<Expr, ParseError> {
        let link = self.links.iter().position(|n| n == name);
        let sum = self.sum_vars.iter().position(|n| n == name);
        match (link, sum) {
            (Some(_), Some(_)) => Err(ParseError::AmbiguousName(name.to_string())),
            (Some(k), None) => Ok(Expr::Link(k)),
            (None, Some(k)) => Ok(Expr::SumVar(k)),
            (None, None) => Ok(Expr::Param(name.to_string())),
        }
    }

    /// Text for link slot `k`: the stock name when it identifies the slot
    /// unambiguously, `#k` otherwise.
    pub fn link_text(&self, k: usize) -> String {
        match self.links.get(k) {
            Some(n) if self.links.iter().position(|x| x == n) == Some(k) && !self.sum_vars.contains(n) => {
                crate::expr::quote_ident(n)
            }
            _ => format!("#{k}"),
        }
    }

    pub fn sum_var_text(&self, k: usize) -> String {
        match self.sum_vars.get(k) {
            Some(n) if self.sum_vars.iter().position(|x| x == n) == Some(k) && !self.links.contains(n) => {
                crate::expr::quote_ident(n)
            }
            _ => format!("${k}"),
        }
    }

    pub fn render(&self, e: &Expr) -> String {
        e.to_infix(&|k| self.link_text(k), &|k| self.sum_var_text(k))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    /// Identifier that may be a function name.
    Word(String),
    LinkSlot(usize),
    SumSlot(usize),
    Op(char),
}

struct Lexer {
    toks: Vec<(Tok, usize)>,
    end: usize,
}

fn syntax(column: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax { column, message: message.into() }
}

fn lex(text: &str) -> Result<Lexer, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        if c.is_whitespace() {
            i += 1;
        } else if "+-*/^(),".contains(c) {
            toks.push((Tok::Op(c), col));
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| syntax(col, format!("malformed number `{s}`")))?;
            toks.push((Tok::Num(v), col));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let tok = match s.as_str() {
                "inf" => Tok::Num(f64::INFINITY),
                "NaN" => Tok::Num(f64::NAN),
                _ => Tok::Word(s),
            };
            toks.push((tok, col));
        } else if c == '`' {
            let start = i + 1;
            let close = chars[start..]
                .iter()
                .position(|&d| d == '`')
                .ok_or_else(|| syntax(col, "unterminated backtick name"))?;
            let s: String = chars[start..start + close].iter().collect();
            if s.is_empty() {
                return Err(syntax(col, "empty name"));
            }
            toks.push((Tok::Name(s), col));
            i = start + close + 1;
        } else if c == '#' || c == '$' {
            let start = i + 1;
            i = start;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i == start {
                return Err(syntax(col, format!("expected a slot number after `{c}`")));
            }
            let s: String = chars[start..i].iter().collect();
            let k = s.parse::<usize>().map_err(|_| syntax(col, "slot number too large"))?;
            toks.push((if c == '#' { Tok::LinkSlot(k) } else { Tok::SumSlot(k) }, col));
        } else {
            return Err(syntax(col, format!("unexpected character `{c}`")));
        }
    }
    Ok(Lexer { toks, end: chars.len() + 1 })
}

struct Parser<'a> {
    lx: Lexer,
    pos: usize,
    ctx: &'a ExprContext,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.lx.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.lx.toks.get(self.pos + k).map(|t| &t.0)
    }

    fn column(&self) -> usize {
        self.lx.toks.get(self.pos).map_or(self.lx.end, |t| t.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{c}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Op(c)) => format!("`{c}`"),
            Some(_) => "an operand".to_string(),
        };
        syntax(self.column(), format!("expected {wanted}, found {found}"))
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat('+') {
                BinaryOp::Add
            } else if self.eat('-') {
                BinaryOp::Sub
            } else {
                return Ok(lhs);
            };
            lhs = Expr::binary(op, lhs, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                BinaryOp::Mul
            } else if self.eat('/') {
                BinaryOp::Div
            } else {
                return Ok(lhs);
            };
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Tok::Op('-')) {
            if let Some(&Tok::Num(v)) = self.peek_at(1) {
                if self.peek_at(2) != Some(&Tok::Op('^')) {
                    self.pos += 2;
                    return Ok(Expr::Const(-v));
                }
            }
            self.pos += 1;
            return Ok(Expr::unary(UnaryOp::Neg, self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat('^') {
            Ok(Expr::binary(BinaryOp::Pow, base, self.unary()?))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected("an operand"));
        };
        match tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Tok::LinkSlot(k) => {
                self.pos += 1;
                Ok(Expr::Link(k))
            }
            Tok::SumSlot(k) => {
                self.pos += 1;
                Ok(Expr::SumVar(k))
            }
            Tok::Name(n) => {
                self.pos += 1;
                self.ctx.resolve(&n)
            }
            Tok::Word(w) => {
                self.pos += 1;
                if self.peek() == Some(&Tok::Op('(')) {
                    let unary = match w.as_str() {
                        "exp" => Some(UnaryOp::Exp),
                        "log" => Some(UnaryOp::Log),
                        _ => None,
                    };
                    let binary = match w.as_str() {
                        "min" => Some(BinaryOp::Min),
                        "max" => Some(BinaryOp::Max),
                        _ => None,
                    };
                    if let Some(op) = unary {
                        self.pos += 1;
                        let e = self.sum()?;
                        self.expect(')')?;
                        return Ok(Expr::unary(op, e));
                    }
                    if let Some(op) = binary {
                        self.pos += 1;
                        let l = self.sum()?;
                        self.expect(',')?;
                        let r = self.sum()?;
                        self.expect(')')?;
                        return Ok(Expr::binary(op, l, r));
                    }
                    self.pos -= 1;
                    return Err(syntax(self.column(), format!("unknown function `{w}`")));
                }
                self.ctx.resolve(&w)
            }
            Tok::Op('(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Op(_) => Err(self.unexpected("an operand")),
        }
    }
}

/// Parses infix text, binding names through `ctx`.
pub fn parse_expression(text: &str, ctx: &ExprContext) -> Result<Expr, ParseError> {
    let lx = lex(text)?;
    let mut p = Parser { lx, pos: 0, ctx };
    let e = p.sum()?;
    if p.peek().is_some() {
        return Err(p.unexpected("an operator"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;

    fn sir_ctx() -> ExprContext {
        ExprContext::new(vec!["S".into(), "I".into()], vec!["N".into()])
    }

    fn eval(text: &str) -> f64 {
        parse_expression(text, &ExprContext::default())
            .unwrap()
            .eval(&[], &[], &Params::new())
            .unwrap()
    }

    #[test]
    fn binds_names_by_slot() {
        let e = parse_expression("beta * S * I / N", &sir_ctx()).unwrap();
        let want = Expr::param("beta").mul(Expr::link(0)).mul(Expr::link(1)).div(Expr::sum_var(0));
        assert_eq!(e, want);
    }

    #[test]
    fn power_is_right_associative() {
        assert_eq!(eval("2^3^2"), 512.0);
    }

    #[test]
    fn precedence() {
        assert_eq!(eval("1 + 2 * 3"), 7.0);
        assert_eq!(eval("-2^2"), -4.0);
        assert_eq!(eval("2^-1"), 0.5);
        assert_eq!(eval("10 - 4 - 3"), 3.0);
        assert_eq!(eval("16 / 4 / 2"), 2.0);
        assert_eq!(eval("max(1, min(5, 3))"), 3.0);
        assert_eq!(eval("exp(0) + log(1)"), 1.0);
        assert_eq!(eval("(-2)^2"), 4.0);
    }

    #[test]
    fn unclosed_paren_column() {
        let err = parse_expression("S * (I", &sir_ctx()).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { column: 7, .. }), "{err}");
    }

    #[test]
    fn other_syntax_errors() {
        for (text, column) in [("1 +", 4), ("* 2", 1), ("a b", 3), ("foo(1)", 1), ("1 ? 2", 3), ("`x", 1)] {
            match parse_expression(text, &ExprContext::default()) {
                Err(ParseError::Syntax { column: c, .. }) => assert_eq!(c, column, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn ambiguous_name() {
        let ctx = ExprContext::new(vec!["N".into()], vec!["N".into()]);
        assert_eq!(parse_expression("N", &ctx), Err(ParseError::AmbiguousName("N".into())));
        assert_eq!(parse_expression("#0 / $0", &ctx).unwrap(), Expr::link(0).div(Expr::sum_var(0)));
    }

    #[test]
    fn backticked_names() {
        let ctx = ExprContext::new(vec!["Total Population".into()], vec![]);
        let e = parse_expression("`Total Population` * `r v`", &ctx).unwrap();
        assert_eq!(e, Expr::link(0).mul(Expr::param("r v")));
    }

    #[test]
    fn duplicate_link_sources_render_as_slots() {
        let ctx = ExprContext::new(vec!["S".into(), "S".into()], vec![]);
        let e = Expr::link(0).mul(Expr::link(1));
        let text = ctx.render(&e);
        assert_eq!(text, "S * #1");
        assert_eq!(parse_expression(&text, &ctx).unwrap(), e);
    }

    #[test]
    fn round_trips_awkward_constants() {
        let cases = [
            Expr::Const(-2.0).pow(Expr::Const(-1.0)),
            Expr::unary(UnaryOp::Neg, Expr::Const(2.0)),
            Expr::unary(UnaryOp::Neg, Expr::Const(-2.0)),
            Expr::Const(-0.0),
            Expr::Const(1e-300).mul(Expr::Const(f64::INFINITY)),
            Expr::Const(0.1).sub(Expr::Const(0.2).sub(Expr::Const(0.3))),
            Expr::Const(2.0).pow(Expr::Const(3.0)).pow(Expr::Const(2.0)),
            Expr::unary(UnaryOp::Neg, Expr::Const(2.0).pow(Expr::Const(2.0))),
            Expr::unary(UnaryOp::Neg, Expr::unary(UnaryOp::Neg, Expr::param("x"))),
        ];
        for e in cases {
            let text = e.to_string();
            let back = parse_expression(&text, &ExprContext::default()).unwrap();
            assert!(back.bit_eq(&e), "{text}: {back:?} vs {e:?}");
        }
    }
}
