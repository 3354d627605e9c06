//! Vector-field semantics of stock-flow diagrams.
//!
//! The rate of change of a stock is the sum of the rates of the flows whose
//! downstream stock it is, minus the sum of the rates of the flows whose
//! upstream stock it is. A flow's rate is its expression evaluated on the
//! values of the stocks at the sources of the links into it, in link order.
//!
//! Full-fledged diagrams are evaluated in a fixed order: sum variables, then
//! auxiliary variables, then flow rates (`fv`), then stock derivatives.
//! Partial flows contribute only on the side they touch.
//!
//! Fields stay parameterised: the same [`DynamicalSystem`] serves every
//! scenario, and parameters are supplied per evaluation.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::diagram::{FlowId, StockFlowDiagram, VariableId};
use crate::expr::{quote_ident, EvalError, Expr, Params};
use crate::full::FullStockFlow;
use crate::open::{ComposeError, Diagram, OpenDiagram, Uwd};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticsError {
    #[error("evaluating {context}: {source}")]
    Eval { context: String, source: EvalError },
    #[error("state has {got} entries, system has {expected} stocks")]
    StateLength { expected: usize, got: usize },
    #[error("stock map has {got} entries, system has {expected} stocks")]
    MapLength { expected: usize, got: usize },
    #[error("stock map sends a stock to {index}, outside the {len} target stocks")]
    MapOutOfRange { index: usize, len: usize },
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

type CustomField = dyn Fn(&[f64], &Params, &mut [f64]) -> Result<(), EvalError> + Send + Sync;

#[derive(Clone)]
enum Field {
    Simple(Arc<CompiledSimple>),
    Full(Arc<CompiledFull>),
    /// Sum of component fields, each transported along its stock map.
    Glued(Vec<(Vec<usize>, DynamicalSystem)>),
    Custom(Arc<CustomField>),
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::Simple(_) => f.write_str("Simple"),
            Field::Full(_) => f.write_str("Full"),
            Field::Glued(parts) => f.debug_list().entries(parts.iter().map(|(m, s)| (m, &s.field))).finish(),
            Field::Custom(_) => f.write_str("Custom"),
        }
    }
}

struct CompiledFlow {
    name: String,
    up: Option<usize>,
    down: Option<usize>,
    sources: Vec<usize>,
    expr: Expr,
}

struct CompiledSimple {
    flows: Vec<CompiledFlow>,
}

struct CompiledVariable {
    name: String,
    link_sources: Vec<usize>,
    sum_sources: Vec<usize>,
    expr: Expr,
}

struct CompiledFull {
    summands: Vec<Vec<usize>>,
    variables: Vec<CompiledVariable>,
    /// (rate variable, upstream, downstream) per flow
    flows: Vec<(usize, Option<usize>, Option<usize>)>,
}

/// A vector field on a named set of stocks.
#[derive(Debug, Clone)]
pub struct DynamicalSystem {
    stocks: Vec<String>,
    params: Vec<String>,
    field: Field,
}

impl DynamicalSystem {
    /// A system given by a closure `(state, params, out)`.
    pub fn from_fn(
        stocks: Vec<String>,
        f: impl Fn(&[f64], &Params, &mut [f64]) -> Result<(), EvalError> + Send + Sync + 'static,
    ) -> Self {
        DynamicalSystem {
            stocks,
            params: Vec::new(),
            field: Field::Custom(Arc::new(f)),
        }
    }

    /// The zero field on the given stocks.
    pub fn zero(stocks: Vec<String>) -> Self {
        DynamicalSystem::from_fn(stocks, |_, _, out| {
            out.fill(0.0);
            Ok(())
        })
    }

    pub fn stocks(&self) -> &[String] {
        &self.stocks
    }

    pub fn dim(&self) -> usize {
        self.stocks.len()
    }

    /// Parameters referenced by the field's expressions, sorted.
    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn eval(&self, state: &[f64], params: &Params) -> Result<Vec<f64>, SemanticsError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(state, params, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, state: &[f64], params: &Params, out: &mut [f64]) -> Result<(), SemanticsError> {
        if state.len() != self.dim() {
            return Err(SemanticsError::StateLength { expected: self.dim(), got: state.len() });
        }
        if out.len() != self.dim() {
            return Err(SemanticsError::StateLength { expected: self.dim(), got: out.len() });
        }
        match &self.field {
            Field::Simple(c) => eval_simple(c, state, params, out),
            Field::Full(c) => eval_full(c, state, params, out),
            Field::Glued(parts) => {
                out.fill(0.0);
                let mut local_x = Vec::new();
                let mut local_v = Vec::new();
                for (map, sys) in parts {
                    local_x.clear();
                    local_x.extend(map.iter().map(|&t| state[t]));
                    local_v.clear();
                    local_v.resize(map.len(), 0.0);
                    sys.eval_into(&local_x, params, &mut local_v)?;
                    for (i, &t) in map.iter().enumerate() {
                        out[t] += local_v[i];
                    }
                }
                Ok(())
            }
            Field::Custom(f) => f(state, params, out).map_err(|source| SemanticsError::Eval {
                context: "custom field".into(),
                source,
            }),
        }
    }
}

fn eval_simple(c: &CompiledSimple, x: &[f64], params: &Params, out: &mut [f64]) -> Result<(), SemanticsError> {
    out.fill(0.0);
    let mut args = Vec::new();
    for f in &c.flows {
        args.clear();
        args.extend(f.sources.iter().map(|&s| x[s]));
        let rate = f.expr.eval(&args, &[], params).map_err(|source| SemanticsError::Eval {
            context: format!("flow `{}`", f.name),
            source,
        })?;
        if let Some(d) = f.down {
            out[d] += rate;
        }
        if let Some(u) = f.up {
            out[u] -= rate;
        }
    }
    Ok(())
}

fn eval_full(c: &CompiledFull, x: &[f64], params: &Params, out: &mut [f64]) -> Result<(), SemanticsError> {
    let sums: Vec<f64> = c
        .summands
        .iter()
        .map(|stocks| stocks.iter().fold(0.0, |acc, &s| acc + x[s]))
        .collect();
    let mut values = Vec::with_capacity(c.variables.len());
    let (mut links, mut svs) = (Vec::new(), Vec::new());
    for v in &c.variables {
        links.clear();
        links.extend(v.link_sources.iter().map(|&s| x[s]));
        svs.clear();
        svs.extend(v.sum_sources.iter().map(|&s| sums[s]));
        let value = v.expr.eval(&links, &svs, params).map_err(|source| SemanticsError::Eval {
            context: format!("variable `{}`", v.name),
            source,
        })?;
        values.push(value);
    }
    out.fill(0.0);
    for &(var, up, down) in &c.flows {
        let rate = values[var];
        if let Some(d) = down {
            out[d] += rate;
        }
        if let Some(u) = up {
            out[u] -= rate;
        }
    }
    Ok(())
}

/// Compiles a simple stock-flow diagram into its vector field.
pub fn vector_field(d: &StockFlowDiagram) -> DynamicalSystem {
    let p = &d.primitive;
    let flows = p
        .flows
        .iter()
        .enumerate()
        .map(|(i, f)| CompiledFlow {
            name: f.name.clone(),
            up: Some(f.up.0),
            down: Some(f.down.0),
            sources: p.links_into(FlowId(i)).iter().map(|l| p.links[l.0].src.0).collect(),
            expr: d.flow_fn[i].clone(),
        })
        .collect();
    DynamicalSystem {
        stocks: p.stocks.iter().map(|s| s.name.clone()).collect(),
        params: d.params(),
        field: Field::Simple(Arc::new(CompiledSimple { flows })),
    }
}

/// Compiles a full-fledged diagram into its vector field.
pub fn vector_field_full(d: &FullStockFlow) -> DynamicalSystem {
    let compiled = CompiledFull {
        summands: (0..d.sum_variables.len())
            .map(|s| d.summands(crate::diagram::SumVariableId(s)).iter().map(|x| x.0).collect())
            .collect(),
        variables: d
            .variables
            .iter()
            .enumerate()
            .map(|(i, v)| CompiledVariable {
                name: v.name.clone(),
                link_sources: d.link_sources(VariableId(i)).iter().map(|s| s.0).collect(),
                sum_sources: d.sum_var_sources(VariableId(i)).iter().map(|s| s.0).collect(),
                expr: d.aux_fn[i].clone(),
            })
            .collect(),
        flows: (0..d.flows.len())
            .map(|f| {
                let f = FlowId(f);
                (d.fv[f.0].0, d.upstream(f).map(|s| s.0), d.downstream(f).map(|s| s.0))
            })
            .collect(),
    };
    DynamicalSystem {
        stocks: d.stocks.iter().map(|s| s.name.clone()).collect(),
        params: d.params(),
        field: Field::Full(Arc::new(compiled)),
    }
}

pub fn diagram_vector_field(d: &Diagram) -> DynamicalSystem {
    match d {
        Diagram::Simple(d) => vector_field(d),
        Diagram::Full(d) => vector_field_full(d),
    }
}

/// Transports `v` along `map: S -> S'`: `x' ↦ map_*(v(map^* x'))`, where
/// `map^*` reads each source stock from its image and `map_*` sums over fibres.
pub fn pushforward_system(
    map: &[usize],
    target_stocks: Vec<String>,
    v: &DynamicalSystem,
) -> Result<DynamicalSystem, SemanticsError> {
    if map.len() != v.dim() {
        return Err(SemanticsError::MapLength { expected: v.dim(), got: map.len() });
    }
    if let Some(&index) = map.iter().find(|&&t| t >= target_stocks.len()) {
        return Err(SemanticsError::MapOutOfRange { index, len: target_stocks.len() });
    }
    Ok(DynamicalSystem {
        stocks: target_stocks,
        params: v.params.clone(),
        field: Field::Glued(vec![(map.to_vec(), v.clone())]),
    })
}

/// Sums a vector over the fibres of `map`.
pub fn pushforward_vector(map: &[usize], target_len: usize, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; target_len];
    for (i, &t) in map.iter().enumerate() {
        out[t] += x[i];
    }
    out
}

/// Reads a vector on the target back along `map`.
pub fn pullback_vector(map: &[usize], x: &[f64]) -> Vec<f64> {
    map.iter().map(|&t| x[t]).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemLeg {
    pub foot: Vec<String>,
    pub stock_map: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct OpenDynamicalSystem {
    pub system: DynamicalSystem,
    pub legs: Vec<SystemLeg>,
}

/// Semantics of an open diagram: the inner field with the stock parts of its legs.
pub fn open_vector_field(od: &OpenDiagram) -> OpenDynamicalSystem {
    OpenDynamicalSystem {
        system: diagram_vector_field(&od.inner),
        legs: od
            .legs
            .iter()
            .map(|l| SystemLeg {
                foot: l.foot.stocks().to_vec(),
                stock_map: l.stock_map.iter().map(|s| s.0).collect(),
            })
            .collect(),
    }
}

/// Glues two open systems along a leg each (feet matched by name).
pub fn compose_open_systems(
    a: &OpenDynamicalSystem,
    a_leg: usize,
    b: &OpenDynamicalSystem,
    b_leg: usize,
) -> Result<OpenDynamicalSystem, SemanticsError> {
    for (leg, s) in [(a_leg, a), (b_leg, b)] {
        if leg >= s.legs.len() {
            return Err(ComposeError::LegOutOfRange { leg, count: s.legs.len() }.into());
        }
    }
    let pattern = crate::open::pair_pattern(a.legs.len(), Some(a_leg), b.legs.len(), Some(b_leg));
    glue_systems(&pattern, &[a, b], &["a".to_string(), "b".to_string()], true)
}

/// Composes open systems along a wiring pattern, mirroring [`crate::open::oapply`].
pub fn oapply_systems(
    pattern: &Uwd,
    fillers: &BTreeMap<String, OpenDynamicalSystem>,
) -> Result<OpenDynamicalSystem, SemanticsError> {
    pattern.validate()?;
    let mut comps = Vec::new();
    for bx in &pattern.boxes {
        let f = fillers
            .get(&bx.name)
            .ok_or_else(|| ComposeError::MissingFiller(bx.name.clone()))?;
        if f.legs.len() != bx.ports.len() {
            return Err(ComposeError::PortCountMismatch {
                name: bx.name.clone(),
                ports: bx.ports.len(),
                legs: f.legs.len(),
            }
            .into());
        }
        comps.push(f);
    }
    let labels: Vec<String> = pattern.boxes.iter().map(|b| b.name.clone()).collect();
    glue_systems(pattern, &comps, &labels, false)
}

fn glue_systems(
    pattern: &Uwd,
    comps: &[&OpenDynamicalSystem],
    labels: &[String],
    pair_errors: bool,
) -> Result<OpenDynamicalSystem, SemanticsError> {
    let mut offsets = Vec::with_capacity(comps.len());
    let mut total = 0;
    for c in comps {
        offsets.push(total);
        total += c.system.dim();
    }
    let mut uf = UnionFind::new(total);
    let mismatch = |j: usize, detail: String| -> SemanticsError {
        if pair_errors {
            ComposeError::FootMismatch(detail).into()
        } else {
            ComposeError::JunctionFootMismatch { junction: pattern.junctions[j].clone(), detail }.into()
        }
    };
    for j in 0..pattern.junctions.len() {
        let ports = pattern.ports_on(j);
        let Some(&(b0, p0)) = ports.first() else { continue };
        let reference = &comps[b0].legs[p0];
        for &(b, p) in &ports[1..] {
            let leg = &comps[b].legs[p];
            if leg.foot.len() != reference.foot.len() {
                return Err(mismatch(j, "foot sizes differ".into()));
            }
            for (i, name) in reference.foot.iter().enumerate() {
                let k = leg
                    .foot
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| mismatch(j, format!("foot stock `{name}` has no counterpart")))?;
                uf.union(offsets[b0] + reference.stock_map[i], offsets[b] + leg.stock_map[k]);
            }
        }
    }
    let reps = uf.representatives();
    let mut dense = vec![usize::MAX; total];
    let mut n = 0;
    for x in 0..total {
        if reps[x] == x {
            dense[x] = n;
            n += 1;
        }
    }
    let quotient: Vec<usize> = (0..total).map(|x| dense[reps[x]]).collect();

    let mut groups: Vec<Vec<(usize, &str)>> = vec![Vec::new(); n];
    for (c, comp) in comps.iter().enumerate() {
        for (i, name) in comp.system.stocks().iter().enumerate() {
            groups[quotient[offsets[c] + i]].push((c, name.as_str()));
        }
    }
    let mut names: Vec<String> = groups
        .iter()
        .map(|g| {
            let mut distinct: Vec<&str> = Vec::new();
            for (_, n) in g {
                if !distinct.contains(n) {
                    distinct.push(n);
                }
            }
            distinct.join("≡")
        })
        .collect();
    let merged: Vec<bool> = groups.iter().map(|g| g.len() > 1).collect();
    let label: Vec<&str> = groups.iter().map(|g| labels[g[0].0].as_str()).collect();
    crate::open::dedupe_names(&mut names, &merged, &label, false)
        .map_err(|n| ComposeError::NameCollision(format!("stock `{n}`")))?;

    let mut params: Vec<String> = comps.iter().flat_map(|c| c.system.params.iter().cloned()).collect();
    params.sort();
    params.dedup();
    let parts = comps
        .iter()
        .enumerate()
        .map(|(c, comp)| {
            let map = (0..comp.system.dim()).map(|i| quotient[offsets[c] + i]).collect();
            (map, comp.system.clone())
        })
        .collect();
    let system = DynamicalSystem { stocks: names, params, field: Field::Glued(parts) };

    let mut legs = Vec::with_capacity(pattern.outer_ports.len());
    for &j in &pattern.outer_ports {
        let Some(&(b0, p0)) = pattern.ports_on(j).first() else {
            return Err(ComposeError::EmptyJunction(pattern.junctions[j].clone()).into());
        };
        let src = &comps[b0].legs[p0];
        legs.push(SystemLeg {
            foot: src.foot.clone(),
            stock_map: src.stock_map.iter().map(|&s| quotient[offsets[b0] + s]).collect(),
        });
    }
    Ok(OpenDynamicalSystem { system, legs })
}

/// One `d<stock>/dt = ...` line per stock, in stock order. Full-fledged
/// diagrams are followed by the definitions of their variables.
pub fn equations(d: &Diagram) -> String {
    let mut out = String::new();
    match d {
        Diagram::Simple(d) => {
            let p = &d.primitive;
            let rendered: Vec<(String, bool)> = (0..p.flows.len())
                .map(|f| {
                    let links = p.links_into(FlowId(f));
                    let name = |k: usize| {
                        links
                            .get(k)
                            .map(|l| quote_ident(&p.stocks[p.links[l.0].src.0].name))
                            .unwrap_or_else(|| format!("#{k}"))
                    };
                    let e = &d.flow_fn[f];
                    (e.to_infix(&name, &|k| format!("${k}")), is_sum(e))
                })
                .collect();
            for (s, stock) in p.stocks.iter().enumerate() {
                let ins = p.flows.iter().enumerate().filter(|(_, f)| f.down.0 == s).map(|(i, _)| &rendered[i]);
                let outs = p.flows.iter().enumerate().filter(|(_, f)| f.up.0 == s).map(|(i, _)| &rendered[i]);
                out.push_str(&format!("d{}/dt = {}\n", stock.name, signed_sum(ins, outs)));
            }
        }
        Diagram::Full(d) => {
            let var = |f: usize| (quote_ident(&d.variables[d.fv[f].0].name), false);
            for (s, stock) in d.stocks.iter().enumerate() {
                let ins: Vec<_> = (0..d.flows.len())
                    .filter(|&f| d.downstream(FlowId(f)).map(|x| x.0) == Some(s))
                    .map(var)
                    .collect();
                let outs: Vec<_> = (0..d.flows.len())
                    .filter(|&f| d.upstream(FlowId(f)).map(|x| x.0) == Some(s))
                    .map(var)
                    .collect();
                out.push_str(&format!("d{}/dt = {}\n", stock.name, signed_sum(ins.iter(), outs.iter())));
            }
            for (s, sv) in d.sum_variables.iter().enumerate() {
                let terms: Vec<String> = d
                    .summands(crate::diagram::SumVariableId(s))
                    .iter()
                    .map(|x| quote_ident(&d.stocks[x.0].name))
                    .collect();
                let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
                out.push_str(&format!("  {} = {}\n", sv.name, rhs));
            }
            for (v, variable) in d.variables.iter().enumerate() {
                let stocks = d.link_sources(VariableId(v));
                let sums = d.sum_var_sources(VariableId(v));
                let text = d.aux_fn[v].to_infix(
                    &|k| stocks.get(k).map(|s| quote_ident(&d.stocks[s.0].name)).unwrap_or_default(),
                    &|k| sums.get(k).map(|s| quote_ident(&d.sum_variables[s.0].name)).unwrap_or_default(),
                );
                out.push_str(&format!("  {} = {}\n", variable.name, text));
            }
        }
    }
    out
}

fn is_sum(e: &Expr) -> bool {
    matches!(e, Expr::Binary(crate::expr::BinaryOp::Add | crate::expr::BinaryOp::Sub, ..))
}

fn signed_sum<'a>(
    ins: impl Iterator<Item = &'a (String, bool)>,
    outs: impl Iterator<Item = &'a (String, bool)>,
) -> String {
    let mut s = String::new();
    for (text, _) in ins {
        if !s.is_empty() {
            s.push_str(" + ");
        }
        s.push_str(text);
    }
    for (text, sum) in outs {
        s.push_str(if s.is_empty() { "-" } else { " - " });
        if *sum {
            s.push('(');
            s.push_str(text);
            s.push(')');
        } else {
            s.push_str(text);
        }
    }
    if s.is_empty() {
        s.push('0');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::PrimitiveStockFlow;

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn sir() -> StockFlowDiagram {
        let p = PrimitiveStockFlow::build(
            &["S", "I", "R"],
            &[("inf", "S", "I"), ("rec", "I", "R")],
            &[("S", "inf"), ("I", "inf"), ("I", "rec")],
        )
        .unwrap();
        StockFlowDiagram::new(
            p,
            vec![
                Expr::param("beta").mul(Expr::link(0)).mul(Expr::link(1)).div(Expr::param("N")),
                Expr::link(0).div(Expr::param("t_r")),
            ],
        )
        .unwrap()
    }

    #[test]
    fn self_loop_cancels() {
        let p = PrimitiveStockFlow::build(&["X"], &[("f", "X", "X")], &[("X", "f")]).unwrap();
        let d = StockFlowDiagram::new(p, vec![Expr::link(0).mul(Expr::Const(3.0))]).unwrap();
        assert_eq!(vector_field(&d).eval(&[2.0], &Params::new()).unwrap(), vec![0.0]);
    }

    #[test]
    fn transfer() {
        let p = PrimitiveStockFlow::build(&["A", "B"], &[("f", "A", "B")], &[("A", "f")]).unwrap();
        let d = StockFlowDiagram::new(p, vec![Expr::Const(2.0).mul(Expr::link(0))]).unwrap();
        assert_eq!(vector_field(&d).eval(&[3.0, 0.0], &Params::new()).unwrap(), vec![-6.0, 6.0]);
    }

    #[test]
    fn sir_field_matches_hand_coded() {
        let v = vector_field(&sir());
        let p = params(&[("beta", 0.3), ("N", 1000.0), ("t_r", 5.0)]);
        let got = v.eval(&[990.0, 10.0, 0.0], &p).unwrap();
        // hand-coded right-hand side
        let (s, i) = (990.0, 10.0);
        let inf = 0.3 * s * i / 1000.0;
        let rec = i / 5.0;
        let want = [-inf, inf - rec, rec];
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-12);
        }
        assert!((got[0] + 2.97).abs() < 1e-12);
        assert!((got[1] - 0.97).abs() < 1e-12);
        assert!((got[2] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn pure_source() {
        let d = FullStockFlow::builder()
            .stock("X")
            .variable("c", Expr::Const(4.5))
            .flow_between("birth", None, Some("X"), "c")
            .build()
            .unwrap();
        let v = vector_field_full(&d);
        assert_eq!(v.eval(&[17.0], &Params::new()).unwrap(), vec![4.5]);
    }

    #[test]
    fn sum_variable_feeds_variable() {
        let d = FullStockFlow::builder()
            .stocks(["S", "I", "R"])
            .sum_variable("N")
            .sum_link("S", "N")
            .sum_link("I", "N")
            .sum_link("R", "N")
            .variable("n", Expr::sum_var(0))
            .sum_variable_link("N", "n")
            .flow_between("probe", Some("S"), None, "n")
            .build()
            .unwrap();
        let got = vector_field_full(&d).eval(&[990.0, 10.0, 0.0], &Params::new()).unwrap();
        assert_eq!(got, vec![-1000.0, 0.0, 0.0]);
    }

    #[test]
    fn pushforward_merges_constant_fields() {
        let v = DynamicalSystem::from_fn(vec!["a".into(), "b".into()], |_, _, out| {
            out[0] = 1.5;
            out[1] = 2.25;
            Ok(())
        });
        let w = pushforward_system(&[0, 0], vec!["ab".into()], &v).unwrap();
        assert_eq!(w.eval(&[7.0], &Params::new()).unwrap(), vec![3.75]);
    }

    #[test]
    fn pushforward_identity() {
        let v = vector_field(&sir());
        let w = pushforward_system(&[0, 1, 2], v.stocks().to_vec(), &v).unwrap();
        let p = params(&[("beta", 0.3), ("N", 1000.0), ("t_r", 5.0)]);
        let x = [400.0, 30.0, 70.0];
        assert_eq!(v.eval(&x, &p).unwrap(), w.eval(&x, &p).unwrap());
    }

    #[test]
    fn error_carries_flow_context() {
        let v = vector_field(&sir());
        let err = v.eval(&[1.0, 1.0, 1.0], &Params::new()).unwrap_err();
        match err {
            SemanticsError::Eval { context, source } => {
                assert_eq!(context, "flow `inf`");
                assert!(matches!(source, EvalError::UnknownParameter(_)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn equations_listing() {
        let text = equations(&Diagram::Simple(sir()));
        assert_eq!(
            text,
            "dS/dt = -beta * S * I / N\ndI/dt = beta * S * I / N - I / t_r\ndR/dt = I / t_r\n"
        );
    }

    #[test]
    fn glued_along_empty_foot_is_blockwise() {
        let od = OpenDiagram::make(sir(), vec![crate::open::FootSpec::stocks(Vec::<&str>::new())]).unwrap();
        let s = open_vector_field(&od);
        let g = compose_open_systems(&s, 0, &s, 0).unwrap();
        assert_eq!(g.system.dim(), 6);
        let p = params(&[("beta", 0.3), ("N", 1000.0), ("t_r", 5.0)]);
        let x = [990.0, 10.0, 0.0, 500.0, 20.0, 30.0];
        let got = g.system.eval(&x, &p).unwrap();
        let v = vector_field(&sir());
        let mut want = v.eval(&x[..3], &p).unwrap();
        want.extend(v.eval(&x[3..], &p).unwrap());
        assert_eq!(got, want);
    }
}
