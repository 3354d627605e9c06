//! Full-fledged stock-flow diagrams: auxiliary variables, sum variables and
//! partial flows.
//!
//! An inflow record `(stock, flow)` makes `stock` the upstream stock of
//! `flow`; an outflow record `(flow, stock)` makes `stock` its downstream
//! stock. Each flow takes its rate from exactly one auxiliary variable
//! (`fv`). Auxiliary variables depend on stocks through variable links and
//! on sum variables through sum-variable links; their expressions use
//! `Link(k)` / `SumVar(k)` for the `k`-th such link in table order.

use crate::diagram::{
    check_finite, check_unique_names, into_result, NameTable, Stock, StockId, SumVariableId,
    ValidationError, VariableId, Violation, FlowId,
};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Named {
    pub name: String,
}

impl Named {
    pub fn new(name: impl Into<String>) -> Self {
        Named { name: name.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inflow {
    pub stock: StockId,
    pub flow: FlowId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Outflow {
    pub flow: FlowId,
    pub stock: StockId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariableLink {
    pub src: StockId,
    pub tgt: VariableId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SumVariableLink {
    pub src: SumVariableId,
    pub tgt: VariableId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SumLink {
    pub src: StockId,
    pub tgt: SumVariableId,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FullStockFlow {
    pub stocks: Vec<Stock>,
    pub flows: Vec<Named>,
    pub variables: Vec<Named>,
    pub sum_variables: Vec<Named>,
    pub inflows: Vec<Inflow>,
    pub outflows: Vec<Outflow>,
    /// Rate variable of each flow, indexed by [`FlowId`].
    pub fv: Vec<VariableId>,
    pub variable_links: Vec<VariableLink>,
    pub sum_variable_links: Vec<SumVariableLink>,
    pub sum_links: Vec<SumLink>,
    /// Indexed by [`VariableId`].
    pub aux_fn: Vec<Expr>,
}

impl FullStockFlow {
    pub fn builder() -> FullBuilder {
        FullBuilder::default()
    }

    pub fn upstream(&self, flow: FlowId) -> Option<StockId> {
        self.inflows.iter().find(|i| i.flow == flow).map(|i| i.stock)
    }

    pub fn downstream(&self, flow: FlowId) -> Option<StockId> {
        self.outflows.iter().find(|o| o.flow == flow).map(|o| o.stock)
    }

    /// Stocks feeding variable `v`, in variable-link order (slot order).
    pub fn link_sources(&self, v: VariableId) -> Vec<StockId> {
        self.variable_links
            .iter()
            .filter(|l| l.tgt == v)
            .map(|l| l.src)
            .collect()
    }

    /// Sum variables feeding variable `v`, in slot order.
    pub fn sum_var_sources(&self, v: VariableId) -> Vec<SumVariableId> {
        self.sum_variable_links
            .iter()
            .filter(|l| l.tgt == v)
            .map(|l| l.src)
            .collect()
    }

    /// Stocks summed by sum variable `s`, in sum-link order.
    pub fn summands(&self, s: SumVariableId) -> Vec<StockId> {
        self.sum_links
            .iter()
            .filter(|l| l.tgt == s)
            .map(|l| l.src)
            .collect()
    }

    pub fn is_partial(&self, flow: FlowId) -> bool {
        self.upstream(flow).is_none() || self.downstream(flow).is_none()
    }

    pub fn has_partial_flows(&self) -> bool {
        (0..self.flows.len()).any(|f| self.is_partial(FlowId(f)))
    }

    pub fn stock_by_name(&self, name: &str) -> Option<StockId> {
        self.stocks.iter().position(|s| s.name == name).map(StockId)
    }

    pub fn variable_by_name(&self, name: &str) -> Option<VariableId> {
        self.variables.iter().position(|s| s.name == name).map(VariableId)
    }

    pub fn sum_variable_by_name(&self, name: &str) -> Option<SumVariableId> {
        self.sum_variables.iter().position(|s| s.name == name).map(SumVariableId)
    }

    pub fn params(&self) -> Vec<String> {
        let mut out: Vec<String> = self.aux_fn.iter().flat_map(|e| e.params()).collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        check_unique_names("stock", self.stocks.iter().map(|s| s.name.as_str()), &mut v);
        check_unique_names("flow", self.flows.iter().map(|s| s.name.as_str()), &mut v);
        check_unique_names("variable", self.variables.iter().map(|s| s.name.as_str()), &mut v);
        check_unique_names(
            "sum variable",
            self.sum_variables.iter().map(|s| s.name.as_str()),
            &mut v,
        );
        let (ns, nf, nv, nsv) = (
            self.stocks.len(),
            self.flows.len(),
            self.variables.len(),
            self.sum_variables.len(),
        );
        let mut bad_ref = |field: String, sort: &'static str, id: usize, bound: usize| {
            if id >= bound {
                v.push(Violation::UnknownReference {
                    owner: field.clone(),
                    field,
                    sort,
                    target: id.to_string(),
                });
            }
        };
        for (i, r) in self.inflows.iter().enumerate() {
            bad_ref(format!("inflows[{i}].stock"), "stock", r.stock.0, ns);
            bad_ref(format!("inflows[{i}].flow"), "flow", r.flow.0, nf);
        }
        for (i, r) in self.outflows.iter().enumerate() {
            bad_ref(format!("outflows[{i}].flow"), "flow", r.flow.0, nf);
            bad_ref(format!("outflows[{i}].stock"), "stock", r.stock.0, ns);
        }
        for (i, r) in self.variable_links.iter().enumerate() {
            bad_ref(format!("variable_links[{i}].src"), "stock", r.src.0, ns);
            bad_ref(format!("variable_links[{i}].tgt"), "variable", r.tgt.0, nv);
        }
        for (i, r) in self.sum_variable_links.iter().enumerate() {
            bad_ref(format!("sum_variable_links[{i}].src"), "sum variable", r.src.0, nsv);
            bad_ref(format!("sum_variable_links[{i}].tgt"), "variable", r.tgt.0, nv);
        }
        for (i, r) in self.sum_links.iter().enumerate() {
            bad_ref(format!("sum_links[{i}].src"), "stock", r.src.0, ns);
            bad_ref(format!("sum_links[{i}].tgt"), "sum variable", r.tgt.0, nsv);
        }
        for (i, var) in self.fv.iter().enumerate().take(nf) {
            bad_ref(format!("flows[{i}].variable"), "variable", var.0, nv);
        }
        for f in self.flows.iter().skip(self.fv.len()) {
            v.push(Violation::MissingRateVariable { flow: f.name.clone() });
        }

        for (f, flow) in self.flows.iter().enumerate() {
            let ups = self.inflows.iter().filter(|r| r.flow.0 == f).count();
            let downs = self.outflows.iter().filter(|r| r.flow.0 == f).count();
            if ups > 1 {
                v.push(Violation::DuplicateUpstream { flow: flow.name.clone() });
            }
            if downs > 1 {
                v.push(Violation::DuplicateDownstream { flow: flow.name.clone() });
            }
            if ups == 0 && downs == 0 {
                v.push(Violation::DanglingFlow { flow: flow.name.clone() });
            }
        }

        for (i, var) in self.variables.iter().enumerate() {
            let Some(expr) = self.aux_fn.get(i) else {
                v.push(Violation::ArityMismatch {
                    owner: format!("variable `{}`", var.name),
                    kind: "missing expression",
                    slot: 0,
                    arity: 0,
                });
                continue;
            };
            let links = self.variable_links.iter().filter(|l| l.tgt.0 == i).count();
            let sums = self.sum_variable_links.iter().filter(|l| l.tgt.0 == i).count();
            let (ul, us) = (expr.link_arity(), expr.sum_var_arity());
            if ul > links {
                v.push(Violation::ArityMismatch {
                    owner: format!("variable `{}`", var.name),
                    kind: "link",
                    slot: ul - 1,
                    arity: links,
                });
            }
            if us > sums {
                v.push(Violation::ArityMismatch {
                    owner: format!("variable `{}`", var.name),
                    kind: "sum-variable",
                    slot: us - 1,
                    arity: sums,
                });
            }
            check_finite(expr, "variable", &var.name, &mut v);
        }
        v
    }
}

/// Name-based constructor for [`FullStockFlow`]. Records keep insertion order.
#[derive(Debug, Clone, Default)]
pub struct FullBuilder {
    stocks: Vec<String>,
    flows: Vec<(String, String)>,
    variables: Vec<(String, Expr)>,
    sum_variables: Vec<String>,
    inflows: Vec<(String, String)>,
    outflows: Vec<(String, String)>,
    variable_links: Vec<(String, String)>,
    sum_variable_links: Vec<(String, String)>,
    sum_links: Vec<(String, String)>,
}

impl FullBuilder {
    pub fn stock(mut self, name: &str) -> Self {
        self.stocks.push(name.into());
        self
    }

    pub fn stocks<'a>(mut self, names: impl IntoIterator<Item = &'a str>) -> Self {
        self.stocks.extend(names.into_iter().map(String::from));
        self
    }

    /// Declares a flow whose rate is the auxiliary variable `variable`.
    pub fn flow(mut self, name: &str, variable: &str) -> Self {
        self.flows.push((name.into(), variable.into()));
        self
    }

    /// Declares a flow together with its inflow/outflow records.
    pub fn flow_between(self, name: &str, up: Option<&str>, down: Option<&str>, variable: &str) -> Self {
        let mut b = self.flow(name, variable);
        if let Some(u) = up {
            b = b.inflow(u, name);
        }
        if let Some(d) = down {
            b = b.outflow(name, d);
        }
        b
    }

    pub fn variable(mut self, name: &str, expr: Expr) -> Self {
        self.variables.push((name.into(), expr));
        self
    }

    pub fn sum_variable(mut self, name: &str) -> Self {
        self.sum_variables.push(name.into());
        self
    }

    /// `stock` is the upstream stock of `flow`.
    pub fn inflow(mut self, stock: &str, flow: &str) -> Self {
        self.inflows.push((stock.into(), flow.into()));
        self
    }

    /// `stock` is the downstream stock of `flow`.
    pub fn outflow(mut self, flow: &str, stock: &str) -> Self {
        self.outflows.push((flow.into(), stock.into()));
        self
    }

    pub fn variable_link(mut self, stock: &str, variable: &str) -> Self {
        self.variable_links.push((stock.into(), variable.into()));
        self
    }

    pub fn sum_variable_link(mut self, sum_variable: &str, variable: &str) -> Self {
        self.sum_variable_links.push((sum_variable.into(), variable.into()));
        self
    }

    pub fn sum_link(mut self, stock: &str, sum_variable: &str) -> Self {
        self.sum_links.push((stock.into(), sum_variable.into()));
        self
    }

    pub fn build(self) -> Result<FullStockFlow, ValidationError> {
        let mut v = Vec::new();
        let stocks = NameTable::new("stock", self.stocks.iter().map(String::as_str), &mut v);
        let flows = NameTable::new("flow", self.flows.iter().map(|f| f.0.as_str()), &mut v);
        let vars = NameTable::new("variable", self.variables.iter().map(|f| f.0.as_str()), &mut v);
        let sums = NameTable::new(
            "sum variable",
            self.sum_variables.iter().map(String::as_str),
            &mut v,
        );

        let mut d = FullStockFlow {
            stocks: self.stocks.iter().map(|n| Stock { name: n.clone() }).collect(),
            flows: self.flows.iter().map(|f| Named::new(&f.0)).collect(),
            variables: self.variables.iter().map(|f| Named::new(&f.0)).collect(),
            sum_variables: self.sum_variables.iter().map(Named::new).collect(),
            aux_fn: self.variables.iter().map(|f| f.1.clone()).collect(),
            ..Default::default()
        };
        let mut unresolved = false;
        for (i, (name, var)) in self.flows.iter().enumerate() {
            match vars.resolve(var, format!("flows[{i}].variable"), name.clone(), &mut v) {
                Some(id) => d.fv.push(VariableId(id)),
                None => {
                    unresolved = true;
                    d.fv.push(VariableId(0));
                }
            }
        }
        for (i, (s, f)) in self.inflows.iter().enumerate() {
            let a = stocks.resolve(s, format!("inflows[{i}].stock"), f.clone(), &mut v);
            let b = flows.resolve(f, format!("inflows[{i}].flow"), f.clone(), &mut v);
            if let (Some(a), Some(b)) = (a, b) {
                d.inflows.push(Inflow { stock: StockId(a), flow: FlowId(b) });
            }
        }
        for (i, (f, s)) in self.outflows.iter().enumerate() {
            let a = flows.resolve(f, format!("outflows[{i}].flow"), f.clone(), &mut v);
            let b = stocks.resolve(s, format!("outflows[{i}].stock"), f.clone(), &mut v);
            if let (Some(a), Some(b)) = (a, b) {
                d.outflows.push(Outflow { flow: FlowId(a), stock: StockId(b) });
            }
        }
        for (i, (s, t)) in self.variable_links.iter().enumerate() {
            let a = stocks.resolve(s, format!("variable_links[{i}].src"), t.clone(), &mut v);
            let b = vars.resolve(t, format!("variable_links[{i}].tgt"), t.clone(), &mut v);
            if let (Some(a), Some(b)) = (a, b) {
                d.variable_links.push(VariableLink { src: StockId(a), tgt: VariableId(b) });
            }
        }
        for (i, (s, t)) in self.sum_variable_links.iter().enumerate() {
            let a = sums.resolve(s, format!("sum_variable_links[{i}].src"), t.clone(), &mut v);
            let b = vars.resolve(t, format!("sum_variable_links[{i}].tgt"), t.clone(), &mut v);
            if let (Some(a), Some(b)) = (a, b) {
                d.sum_variable_links.push(SumVariableLink {
                    src: SumVariableId(a),
                    tgt: VariableId(b),
                });
            }
        }
        for (i, (s, t)) in self.sum_links.iter().enumerate() {
            let a = stocks.resolve(s, format!("sum_links[{i}].src"), t.clone(), &mut v);
            let b = sums.resolve(t, format!("sum_links[{i}].tgt"), t.clone(), &mut v);
            if let (Some(a), Some(b)) = (a, b) {
                d.sum_links.push(SumLink { src: StockId(a), tgt: SumVariableId(b) });
            }
        }
        if v.is_empty() && !unresolved {
            v = d.validate();
        }
        into_result(d, v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;

    fn sir_like() -> FullBuilder {
        FullStockFlow::builder()
            .stocks(["S", "I", "R"])
            .sum_variable("N")
            .sum_link("S", "N")
            .sum_link("I", "N")
            .sum_link("R", "N")
            .variable(
                "v_inf",
                Expr::param("beta").mul(Expr::link(0)).mul(Expr::link(1)).div(Expr::sum_var(0)),
            )
            .variable_link("S", "v_inf")
            .variable_link("I", "v_inf")
            .sum_variable_link("N", "v_inf")
            .variable("v_rec", Expr::link(0).div(Expr::param("t_r")))
            .variable_link("I", "v_rec")
            .flow_between("inf", Some("S"), Some("I"), "v_inf")
            .flow_between("rec", Some("I"), Some("R"), "v_rec")
    }

    #[test]
    fn builds_sir_with_sum_variable() {
        let d = sir_like().build().unwrap();
        assert_eq!(d.stocks.len(), 3);
        assert_eq!(d.summands(SumVariableId(0)).len(), 3);
        assert_eq!(d.upstream(FlowId(1)), Some(StockId(1)));
        assert_eq!(d.downstream(FlowId(1)), Some(StockId(2)));
        assert!(!d.has_partial_flows());
    }

    #[test]
    fn birth_flow_is_partial() {
        let d = sir_like()
            .variable("v_birth", Expr::Const(3.0))
            .flow_between("birth", None, Some("S"), "v_birth")
            .build()
            .unwrap();
        assert!(d.is_partial(FlowId(2)));
        assert_eq!(d.upstream(FlowId(2)), None);
    }

    #[test]
    fn duplicate_upstream() {
        let err = sir_like().inflow("R", "inf").build().unwrap_err();
        assert_eq!(
            err.violations,
            vec![Violation::DuplicateUpstream { flow: "inf".into() }]
        );
    }

    #[test]
    fn duplicate_downstream() {
        let err = sir_like().outflow("rec", "S").build().unwrap_err();
        assert!(matches!(err.first(), Violation::DuplicateDownstream { .. }));
    }

    #[test]
    fn dangling_flow() {
        let err = sir_like().flow("ghost", "v_rec").build().unwrap_err();
        assert!(matches!(err.first(), Violation::DanglingFlow { .. }));
    }

    #[test]
    fn aux_arity() {
        let err = sir_like()
            .variable("bad", Expr::link(0).add(Expr::sum_var(0)))
            .variable_link("S", "bad")
            .build()
            .unwrap_err();
        assert!(matches!(
            err.first(),
            Violation::ArityMismatch { kind: "sum-variable", .. }
        ));
    }

    #[test]
    fn validate_reports_non_injective_inflow() {
        let mut d = sir_like().build().unwrap();
        d.inflows.push(Inflow { stock: StockId(2), flow: FlowId(0) });
        let v = d.validate();
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::DuplicateUpstream { .. }));
    }
}
