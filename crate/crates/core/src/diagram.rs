//! Primitive and decorated stock-flow diagrams.
//!
//! A primitive diagram is a finite instance of the schema
//! `flow --up,down--> stock <--src-- link --tgt--> flow`, stored as dense
//! tables. A [`StockFlowDiagram`] adds one [`Expr`] per flow whose link slots
//! range over the links targeting that flow, in link-table order.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::expr::Expr;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub usize);

        impl $name {
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(StockId);
id_type!(FlowId);
id_type!(LinkId);
id_type!(VariableId);
id_type!(SumVariableId);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stock {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    pub name: String,
    pub up: StockId,
    pub down: StockId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub src: StockId,
    pub tgt: FlowId,
}

/// One structural problem found in a diagram.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("duplicate {sort} name `{name}`")]
    DuplicateName { sort: &'static str, name: String },
    #[error("{field} of {owner} refers to unknown {sort} `{target}`")]
    UnknownReference {
        /// Offending field, e.g. `flows[1].down`.
        field: String,
        owner: String,
        sort: &'static str,
        target: String,
    },
    #[error("expression of {owner} uses {kind} slot {slot} but only {arity} are available")]
    ArityMismatch {
        owner: String,
        kind: &'static str,
        slot: usize,
        arity: usize,
    },
    #[error("flow `{flow}` has no flow function")]
    MissingFlowFunction { flow: String },
    #[error("flow `{flow}` has more than one upstream stock")]
    DuplicateUpstream { flow: String },
    #[error("flow `{flow}` has more than one downstream stock")]
    DuplicateDownstream { flow: String },
    #[error("flow `{flow}` has neither an upstream nor a downstream stock")]
    DanglingFlow { flow: String },
    #[error("flow `{flow}` has no rate variable")]
    MissingRateVariable { flow: String },
    #[error("{sort} `{name}` has a non-finite constant in its expression")]
    NonFiniteConstant { sort: &'static str, name: String },
}

/// A non-empty list of violations, returned by the checked constructors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    pub violations: Vec<Violation>,
}

impl ValidationError {
    pub fn first(&self) -> &Violation {
        &self.violations[0]
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

pub(crate) fn into_result<T>(value: T, violations: Vec<Violation>) -> Result<T, ValidationError> {
    if violations.is_empty() {
        Ok(value)
    } else {
        Err(ValidationError { violations })
    }
}

/// Interns names of one sort, reporting duplicates.
pub(crate) struct NameTable<'a> {
    sort: &'static str,
    index: HashMap<&'a str, usize>,
}

impl<'a> NameTable<'a> {
    pub(crate) fn new(
        sort: &'static str,
        names: impl IntoIterator<Item = &'a str>,
        violations: &mut Vec<Violation>,
    ) -> Self {
        let mut index = HashMap::new();
        for (i, n) in names.into_iter().enumerate() {
            if index.insert(n, i).is_some() {
                violations.push(Violation::DuplicateName {
                    sort,
                    name: n.to_string(),
                });
            }
        }
        NameTable { sort, index }
    }

    pub(crate) fn resolve(
        &self,
        name: &str,
        field: impl Into<String>,
        owner: impl Into<String>,
        violations: &mut Vec<Violation>,
    ) -> Option<usize> {
        let found = self.index.get(name).copied();
        if found.is_none() {
            violations.push(Violation::UnknownReference {
                field: field.into(),
                owner: owner.into(),
                sort: self.sort,
                target: name.to_string(),
            });
        }
        found
    }
}

pub(crate) fn check_unique_names<'a>(
    sort: &'static str,
    names: impl IntoIterator<Item = &'a str>,
    violations: &mut Vec<Violation>,
) {
    NameTable::new(sort, names, violations);
}

pub(crate) fn check_finite(expr: &Expr, sort: &'static str, name: &str, violations: &mut Vec<Violation>) {
    let mut bad = false;
    expr.visit(&mut |e| {
        if let Expr::Const(c) = e {
            bad |= !c.is_finite();
        }
    });
    if bad {
        violations.push(Violation::NonFiniteConstant {
            sort,
            name: name.to_string(),
        });
    }
}

/// Stocks, flows and links with no flow functions attached.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrimitiveStockFlow {
    pub stocks: Vec<Stock>,
    pub flows: Vec<Flow>,
    pub links: Vec<Link>,
}

impl PrimitiveStockFlow {
    /// Builds a diagram from names; ids are assigned in input order.
    pub fn build(
        stocks: &[&str],
        flows: &[(&str, &str, &str)],
        links: &[(&str, &str)],
    ) -> Result<Self, ValidationError> {
        let mut v = Vec::new();
        let stock_names = NameTable::new("stock", stocks.iter().copied(), &mut v);
        let flow_names = NameTable::new("flow", flows.iter().map(|f| f.0), &mut v);
        let mut out = PrimitiveStockFlow {
            stocks: stocks.iter().map(|s| Stock { name: s.to_string() }).collect(),
            ..Default::default()
        };
        for (i, (name, up, down)) in flows.iter().enumerate() {
            let u = stock_names.resolve(up, format!("flows[{i}].up"), *name, &mut v);
            let d = stock_names.resolve(down, format!("flows[{i}].down"), *name, &mut v);
            if let (Some(u), Some(d)) = (u, d) {
                out.flows.push(Flow {
                    name: name.to_string(),
                    up: StockId(u),
                    down: StockId(d),
                });
            }
        }
        for (i, (src, tgt)) in links.iter().enumerate() {
            let owner = format!("link {src}->{tgt}");
            let s = stock_names.resolve(src, format!("links[{i}].src"), owner.clone(), &mut v);
            let t = flow_names.resolve(tgt, format!("links[{i}].tgt"), owner, &mut v);
            if let (Some(s), Some(t)) = (s, t) {
                out.links.push(Link {
                    src: StockId(s),
                    tgt: FlowId(t),
                });
            }
        }
        into_result(out, v)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        check_unique_names("stock", self.stocks.iter().map(|s| s.name.as_str()), &mut v);
        check_unique_names("flow", self.flows.iter().map(|f| f.name.as_str()), &mut v);
        let ns = self.stocks.len();
        for (i, f) in self.flows.iter().enumerate() {
            for (field, id) in [("up", f.up), ("down", f.down)] {
                if id.0 >= ns {
                    v.push(Violation::UnknownReference {
                        field: format!("flows[{i}].{field}"),
                        owner: f.name.clone(),
                        sort: "stock",
                        target: id.to_string(),
                    });
                }
            }
        }
        for (i, l) in self.links.iter().enumerate() {
            if l.src.0 >= ns {
                v.push(Violation::UnknownReference {
                    field: format!("links[{i}].src"),
                    owner: format!("link {i}"),
                    sort: "stock",
                    target: l.src.to_string(),
                });
            }
            if l.tgt.0 >= self.flows.len() {
                v.push(Violation::UnknownReference {
                    field: format!("links[{i}].tgt"),
                    owner: format!("link {i}"),
                    sort: "flow",
                    target: l.tgt.to_string(),
                });
            }
        }
        v
    }

    /// Links targeting `flow`, in link-table order. Position in this list is
    /// the expression slot.
    pub fn links_into(&self, flow: FlowId) -> Vec<LinkId> {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| l.tgt == flow)
            .map(|(i, _)| LinkId(i))
            .collect()
    }

    pub fn arity(&self, flow: FlowId) -> usize {
        self.links.iter().filter(|l| l.tgt == flow).count()
    }

    pub fn stock_by_name(&self, name: &str) -> Option<StockId> {
        self.stocks.iter().position(|s| s.name == name).map(StockId)
    }

    pub fn flow_by_name(&self, name: &str) -> Option<FlowId> {
        self.flows.iter().position(|f| f.name == name).map(FlowId)
    }
}

/// A primitive diagram with one flow function per flow.
#[derive(Debug, Clone, PartialEq)]
pub struct StockFlowDiagram {
    pub primitive: PrimitiveStockFlow,
    /// Indexed by [`FlowId`].
    pub flow_fn: Vec<Expr>,
}

impl StockFlowDiagram {
    pub fn new(primitive: PrimitiveStockFlow, flow_fn: Vec<Expr>) -> Result<Self, ValidationError> {
        let d = StockFlowDiagram { primitive, flow_fn };
        let v = d.validate();
        into_result(d, v)
    }

    /// Attaches flow functions given by flow name.
    pub fn build(
        primitive: PrimitiveStockFlow,
        functions: impl IntoIterator<Item = (String, Expr)>,
    ) -> Result<Self, ValidationError> {
        let mut v = Vec::new();
        let mut slots: Vec<Option<Expr>> = vec![None; primitive.flows.len()];
        let flow_names = NameTable::new(
            "flow",
            primitive.flows.iter().map(|f| f.name.as_str()),
            &mut Vec::new(),
        );
        for (name, expr) in functions {
            if let Some(i) = flow_names.resolve(&name, "flow_fn", name.clone(), &mut v) {
                slots[i] = Some(expr);
            }
        }
        for (i, s) in slots.iter().enumerate() {
            if s.is_none() {
                v.push(Violation::MissingFlowFunction {
                    flow: primitive.flows[i].name.clone(),
                });
            }
        }
        if !v.is_empty() {
            return Err(ValidationError { violations: v });
        }
        let flow_fn = slots.into_iter().map(|s| s.unwrap_or(Expr::Const(0.0))).collect();
        StockFlowDiagram::new(primitive, flow_fn)
    }

    pub fn stocks(&self) -> &[Stock] {
        &self.primitive.stocks
    }

    pub fn flows(&self) -> &[Flow] {
        &self.primitive.flows
    }

    pub fn links(&self) -> &[Link] {
        &self.primitive.links
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = self.primitive.validate();
        for (i, f) in self.primitive.flows.iter().enumerate() {
            let Some(expr) = self.flow_fn.get(i) else {
                v.push(Violation::MissingFlowFunction { flow: f.name.clone() });
                continue;
            };
            let arity = self.primitive.arity(FlowId(i));
            let used = expr.link_arity();
            if used > arity {
                v.push(Violation::ArityMismatch {
                    owner: format!("flow `{}`", f.name),
                    kind: "link",
                    slot: used - 1,
                    arity,
                });
            }
            let sv = expr.sum_var_arity();
            if sv > 0 {
                v.push(Violation::ArityMismatch {
                    owner: format!("flow `{}`", f.name),
                    kind: "sum-variable",
                    slot: sv - 1,
                    arity: 0,
                });
            }
            check_finite(expr, "flow", &f.name, &mut v);
        }
        v
    }

    /// Parameter names referenced by any flow function, sorted.
    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = self.flow_fn.iter().flat_map(|e| e.params()).collect();
        out.sort();
        out.dedup();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sir_primitive() -> PrimitiveStockFlow {
        PrimitiveStockFlow::build(
            &["S", "I", "R"],
            &[("inf", "S", "I"), ("rec", "I", "R")],
            &[("S", "inf"), ("I", "inf"), ("I", "rec")],
        )
        .unwrap()
    }

    #[test]
    fn build_sir_primitive() {
        let p = sir_primitive();
        assert_eq!(p.stocks.len(), 3);
        assert_eq!(p.flows.len(), 2);
        assert_eq!(p.links.len(), 3);
        assert_eq!(p.flows[1].up, StockId(1));
        assert_eq!(p.links_into(FlowId(0)), vec![LinkId(0), LinkId(1)]);
        assert!(p.validate().is_empty());
    }

    #[test]
    fn single_stock() {
        let p = PrimitiveStockFlow::build(&["X"], &[], &[]).unwrap();
        assert_eq!(p.stocks.len(), 1);
    }

    #[test]
    fn unknown_reference_names_field() {
        let err = PrimitiveStockFlow::build(&["S"], &[("f", "S", "Q")], &[]).unwrap_err();
        match err.first() {
            Violation::UnknownReference { field, target, .. } => {
                assert_eq!(field, "flows[0].down");
                assert_eq!(target, "Q");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_name() {
        let err = PrimitiveStockFlow::build(&["S", "S"], &[], &[]).unwrap_err();
        assert!(matches!(err.first(), Violation::DuplicateName { sort: "stock", .. }));
    }

    #[test]
    fn sir_with_flow_functions() {
        let inf = Expr::param("beta").mul(Expr::link(0)).mul(Expr::link(1)).div(Expr::param("N"));
        let rec = Expr::link(0).div(Expr::param("t_r"));
        let d = StockFlowDiagram::build(
            sir_primitive(),
            [("inf".to_string(), inf), ("rec".to_string(), rec)],
        )
        .unwrap();
        assert_eq!(d.params(), vec!["N", "beta", "t_r"]);
    }

    #[test]
    fn constant_rate_flow() {
        let p = PrimitiveStockFlow::build(&["A", "B"], &[("f", "A", "B")], &[]).unwrap();
        assert!(StockFlowDiagram::new(p, vec![Expr::Const(5.0)]).is_ok());
    }

    #[test]
    fn arity_mismatch() {
        let err = StockFlowDiagram::new(
            sir_primitive(),
            vec![Expr::link(2), Expr::link(0)],
        )
        .unwrap_err();
        assert!(matches!(
            err.first(),
            Violation::ArityMismatch { slot: 2, arity: 2, .. }
        ));
    }

    #[test]
    fn missing_flow_function() {
        let err = StockFlowDiagram::build(sir_primitive(), [("inf".to_string(), Expr::Const(1.0))])
            .unwrap_err();
        assert_eq!(
            err.violations,
            vec![Violation::MissingFlowFunction { flow: "rec".into() }]
        );
    }

    #[test]
    fn validate_reports_dangling_link_target() {
        let mut p = sir_primitive();
        p.links[2].tgt = FlowId(7);
        let v = p.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(&v[0], Violation::UnknownReference { sort: "flow", .. }));
    }

    #[test]
    fn sum_var_ref_rejected_in_simple_diagram() {
        let p = PrimitiveStockFlow::build(&["A"], &[("f", "A", "A")], &[]).unwrap();
        let err = StockFlowDiagram::new(p, vec![Expr::sum_var(0)]).unwrap_err();
        assert!(matches!(err.first(), Violation::ArityMismatch { kind: "sum-variable", .. }));
    }
}
