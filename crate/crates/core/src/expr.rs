//! Closed arithmetic expressions used as flow and auxiliary functions.
//!
//! An expression never names a stock directly. It refers to its arguments by
//! slot: `Link(k)` is the value carried by the `k`-th link targeting the flow
//! (or variable) the expression is attached to, counted in link-table order,
//! and `SumVar(k)` is the `k`-th sum-variable link into an auxiliary variable.
//! Anything else is a named parameter bound by the scenario at evaluation time.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

/// Parameter table, keyed by name.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Param(String),
    Link(usize),
    SumVar(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("log of non-positive value {0}")]
    DomainError(f64),
    #[error("{kind} slot {slot} out of range (arity {arity})")]
    SlotOutOfRange {
        kind: SlotKind,
        slot: usize,
        arity: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Link,
    SumVariable,
}

impl fmt::Display for SlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotKind::Link => f.write_str("link"),
            SlotKind::SumVariable => f.write_str("sum-variable"),
        }
    }
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expr::Param(name.into())
    }

    pub fn link(slot: usize) -> Self {
        Expr::Link(slot)
    }

    pub fn sum_var(slot: usize) -> Self {
        Expr::SumVar(slot)
    }

    pub fn unary(op: UnaryOp, child: Expr) -> Self {
        Expr::Unary(op, Box::new(child))
    }

    pub fn binary(op: BinaryOp, left: Expr, right: Expr) -> Self {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Add, self, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Div, self, rhs)
    }

    pub fn pow(self, rhs: Expr) -> Self {
        Expr::binary(BinaryOp::Pow, self, rhs)
    }

    /// Evaluates with IEEE double semantics, except that an exact zero
    /// denominator and the log of a non-positive number are errors.
    pub fn eval(&self, links: &[f64], sum_vars: &[f64], params: &Params) -> Result<f64, EvalError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Param(name) => params
                .get(name)
                .copied()
                .ok_or_else(|| EvalError::UnknownParameter(name.clone())),
            Expr::Link(k) => links.get(*k).copied().ok_or(EvalError::SlotOutOfRange {
                kind: SlotKind::Link,
                slot: *k,
                arity: links.len(),
            }),
            Expr::SumVar(k) => sum_vars.get(*k).copied().ok_or(EvalError::SlotOutOfRange {
                kind: SlotKind::SumVariable,
                slot: *k,
                arity: sum_vars.len(),
            }),
            Expr::Unary(op, child) => {
                let x = child.eval(links, sum_vars, params)?;
                match op {
                    UnaryOp::Neg => Ok(-x),
                    UnaryOp::Exp => Ok(x.exp()),
                    UnaryOp::Log if x > 0.0 => Ok(x.ln()),
                    UnaryOp::Log => Err(EvalError::DomainError(x)),
                }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval(links, sum_vars, params)?;
                let b = r.eval(links, sum_vars, params)?;
                match op {
                    BinaryOp::Add => Ok(a + b),
                    BinaryOp::Sub => Ok(a - b),
                    BinaryOp::Mul => Ok(a * b),
                    BinaryOp::Div if b == 0.0 => Err(EvalError::DivisionByZero),
                    BinaryOp::Div => Ok(a / b),
                    BinaryOp::Pow => Ok(a.powf(b)),
                    BinaryOp::Min => Ok(a.min(b)),
                    BinaryOp::Max => Ok(a.max(b)),
                }
            }
        }
    }

    /// Largest link slot referenced plus one (0 if none).
    pub fn link_arity(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if let Expr::Link(k) = e {
                n = n.max(k + 1);
            }
        });
        n
    }

    /// Largest sum-variable slot referenced plus one (0 if none).
    pub fn sum_var_arity(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if let Expr::SumVar(k) = e {
                n = n.max(k + 1);
            }
        });
        n
    }

    /// Parameter names referenced, in first-occurrence order without repeats.
    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        });
        out
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Unary(_, c) => c.visit(f),
            Expr::Binary(_, l, r) => {
                l.visit(f);
                r.visit(f);
            }
            _ => {}
        }
    }

    /// Rewrites every link slot through `map`. Sum-variable slots are kept.
    pub fn map_links(&self, map: &impl Fn(usize) -> usize) -> Expr {
        match self {
            Expr::Link(k) => Expr::Link(map(*k)),
            Expr::Unary(op, c) => Expr::unary(*op, c.map_links(map)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.map_links(map), r.map_links(map)),
            other => other.clone(),
        }
    }

    pub fn map_sum_vars(&self, map: &impl Fn(usize) -> usize) -> Expr {
        match self {
            Expr::SumVar(k) => Expr::SumVar(map(*k)),
            Expr::Unary(op, c) => Expr::unary(*op, c.map_sum_vars(map)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.map_sum_vars(map), r.map_sum_vars(map)),
            other => other.clone(),
        }
    }

    /// Bit-level structural equality (distinguishes `0.0` from `-0.0`, equates NaNs).
    pub fn bit_eq(&self, other: &Expr) -> bool {
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.to_bits() == b.to_bits(),
            (Expr::Param(a), Expr::Param(b)) => a == b,
            (Expr::Link(a), Expr::Link(b)) => a == b,
            (Expr::SumVar(a), Expr::SumVar(b)) => a == b,
            (Expr::Unary(o1, c1), Expr::Unary(o2, c2)) => o1 == o2 && c1.bit_eq(c2),
            (Expr::Binary(o1, l1, r1), Expr::Binary(o2, l2, r2)) => {
                o1 == o2 && l1.bit_eq(l2) && r1.bit_eq(r2)
            }
            _ => false,
        }
    }

    /// Renders the expression as infix text, naming slots through the
    /// supplied closures. Output parses back to the same tree.
    pub fn to_infix(
        &self,
        link_name: &dyn Fn(usize) -> String,
        sum_var_name: &dyn Fn(usize) -> String,
    ) -> String {
        let mut out = String::new();
        self.write_infix(&mut out, 0, link_name, sum_var_name);
        out
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => 1,
            Expr::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => 2,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Binary(BinaryOp::Pow, ..) => 4,
            Expr::Const(c) if c.is_sign_negative() => 0,
            _ => 5,
        }
    }

    fn write_infix(
        &self,
        out: &mut String,
        min_prec: u8,
        link_name: &dyn Fn(usize) -> String,
        sum_var_name: &dyn Fn(usize) -> String,
    ) {
        let prec = self.precedence();
        let paren = prec < min_prec;
        if paren {
            out.push('(');
        }
        match self {
            Expr::Const(c) => out.push_str(&format_number(*c)),
            Expr::Param(p) => out.push_str(&quote_ident(p)),
            Expr::Link(k) => out.push_str(&link_name(*k)),
            Expr::SumVar(k) => out.push_str(&sum_var_name(*k)),
            Expr::Unary(UnaryOp::Neg, c) => {
                out.push('-');
                // `-<number>` would be read back as a negative literal
                let child_min = if matches!(**c, Expr::Const(_)) { 6 } else { 3 };
                c.write_infix(out, child_min, link_name, sum_var_name);
            }
            Expr::Unary(op, c) => {
                out.push_str(if *op == UnaryOp::Exp { "exp(" } else { "log(" });
                c.write_infix(out, 0, link_name, sum_var_name);
                out.push(')');
            }
            Expr::Binary(op @ (BinaryOp::Min | BinaryOp::Max), l, r) => {
                out.push_str(if *op == BinaryOp::Min { "min(" } else { "max(" });
                l.write_infix(out, 0, link_name, sum_var_name);
                out.push_str(", ");
                r.write_infix(out, 0, link_name, sum_var_name);
                out.push(')');
            }
            Expr::Binary(op, l, r) => {
                let (sym, lmin, rmin) = match op {
                    BinaryOp::Add => (" + ", 1, 2),
                    BinaryOp::Sub => (" - ", 1, 2),
                    BinaryOp::Mul => (" * ", 2, 3),
                    BinaryOp::Div => (" / ", 2, 3),
                    BinaryOp::Pow => ("^", 5, 3),
                    BinaryOp::Min | BinaryOp::Max => unreachable!(),
                };
                l.write_infix(out, lmin, link_name, sum_var_name);
                out.push_str(sym);
                r.write_infix(out, rmin, link_name, sum_var_name);
            }
        }
        if paren {
            out.push(')');
        }
    }
}

/// Shortest text that parses back to the same `f64` bits.
pub(crate) fn format_number(c: f64) -> String {
    format!("{c:?}")
}

pub(crate) fn is_plain_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "exp" | "log" | "min" | "max" | "inf" | "NaN")
}

/// Identifiers that are not plain `[A-Za-z_][A-Za-z0-9_]*` are written in backticks.
pub fn quote_ident(s: &str) -> String {
    if is_plain_ident(s) {
        s.to_string()
    } else {
        format!("`{s}`")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let text = self.to_infix(&|k| format!("#{k}"), &|k| format!("${k}"));
        f.write_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn constant() {
        assert_eq!(Expr::Const(3.0).eval(&[], &[], &Params::new()), Ok(3.0));
    }

    #[test]
    fn mass_action_term() {
        let e = Expr::param("beta")
            .mul(Expr::link(0))
            .mul(Expr::link(1))
            .div(Expr::param("N"));
        let p = params(&[("beta", 0.5), ("N", 1000.0)]);
        assert_eq!(e.eval(&[100.0, 10.0], &[], &p), Ok(0.5));
    }

    #[test]
    fn division_by_zero() {
        let e = Expr::Const(1.0).div(Expr::Const(0.0));
        assert_eq!(e.eval(&[], &[], &Params::new()), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn log_domain() {
        let e = Expr::unary(UnaryOp::Log, Expr::Const(0.0));
        assert_eq!(e.eval(&[], &[], &Params::new()), Err(EvalError::DomainError(0.0)));
        let e = Expr::unary(UnaryOp::Log, Expr::Const(-2.0));
        assert!(matches!(e.eval(&[], &[], &Params::new()), Err(EvalError::DomainError(_))));
    }

    #[test]
    fn unknown_param() {
        let e = Expr::param("gamma");
        assert_eq!(
            e.eval(&[], &[], &Params::new()),
            Err(EvalError::UnknownParameter("gamma".into()))
        );
    }

    #[test]
    fn slot_out_of_range() {
        assert!(matches!(
            Expr::link(2).eval(&[1.0, 2.0], &[], &Params::new()),
            Err(EvalError::SlotOutOfRange { slot: 2, arity: 2, .. })
        ));
    }

    #[test]
    fn arities() {
        let e = Expr::link(0).mul(Expr::link(3)).add(Expr::sum_var(1));
        assert_eq!(e.link_arity(), 4);
        assert_eq!(e.sum_var_arity(), 2);
        assert_eq!(Expr::Const(1.0).link_arity(), 0);
    }

    #[test]
    fn params_listed_once() {
        let e = Expr::param("a").mul(Expr::param("b")).add(Expr::param("a"));
        assert_eq!(e.params(), vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn display_uses_slot_syntax() {
        let e = Expr::param("beta").mul(Expr::link(0)).div(Expr::sum_var(0));
        assert_eq!(e.to_string(), "beta * #0 / $0");
        let e = Expr::unary(UnaryOp::Neg, Expr::Const(2.0)).pow(Expr::Const(-1.0));
        assert_eq!(e.to_string(), "(-(2.0))^(-1.0)");
    }
}
