//! Versioned JSON documents.
//!
//! Every document is an object with `kind` and `version` next to the
//! kind-specific fields. Elements are referred to by name; expressions are
//! infix strings resolved against the links into their flow or variable.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::diagram::{
    FlowId, LinkId, PrimitiveStockFlow, StockFlowDiagram, StockId, SumVariableId, VariableId,
};
use crate::expr::Expr;
use crate::full::FullStockFlow;
use crate::integrate::{Method, Scenario};
use crate::morphism::{DiagramMorphism, SortCounts};
use crate::open::{Diagram, Foot, FootSpec, OpenDiagram, Uwd};

use super::parse::{parse_expression, ExprContext};
use super::IoError;

pub const FORMAT_VERSION: u64 = 1;

/// Any file the library reads or writes.
#[derive(Debug, Clone, PartialEq)]
pub enum Document {
    Primitive(PrimitiveStockFlow),
    StockFlow(StockFlowDiagram),
    Full(FullStockFlow),
    Open(OpenDiagram),
    Uwd(Uwd),
    Morphism(MorphismSpec),
    Scenario(Scenario),
}

impl Document {
    pub fn kind(&self) -> &'static str {
        match self {
            Document::Primitive(_) => "primitive",
            Document::StockFlow(_) => "stockflow",
            Document::Full(_) => "full",
            Document::Open(_) => "open",
            Document::Uwd(_) => "uwd",
            Document::Morphism(_) => "morphism",
            Document::Scenario(_) => "scenario",
        }
    }

    /// Any diagram kind, viewed as an open diagram (closed if it has no legs).
    pub fn into_open(self) -> Result<OpenDiagram, IoError> {
        match self {
            Document::StockFlow(d) => Ok(OpenDiagram::closed(d)),
            Document::Full(d) => Ok(OpenDiagram::closed(d)),
            Document::Open(d) => Ok(d),
            other => Err(IoError::WrongKind {
                expected: "stockflow, full or open",
                found: other.kind().into(),
            }),
        }
    }
}

impl From<Diagram> for Document {
    fn from(d: Diagram) -> Self {
        match d {
            Diagram::Simple(d) => Document::StockFlow(d),
            Diagram::Full(d) => Document::Full(d),
        }
    }
}

// ---- serde bodies ----------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowDoc {
    name: String,
    up: String,
    down: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    function: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    src: String,
    tgt: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimitiveDoc {
    stocks: Vec<String>,
    flows: Vec<FlowDoc>,
    links: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimpleFlowDoc {
    name: String,
    up: String,
    down: String,
    function: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StockFlowDoc {
    stocks: Vec<String>,
    flows: Vec<SimpleFlowDoc>,
    links: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NamedFlowDoc {
    name: String,
    variable: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariableDoc {
    name: String,
    function: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InflowDoc {
    stock: String,
    flow: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutflowDoc {
    flow: String,
    stock: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FullDoc {
    stocks: Vec<String>,
    #[serde(default)]
    sum_variables: Vec<String>,
    variables: Vec<VariableDoc>,
    flows: Vec<NamedFlowDoc>,
    #[serde(default)]
    inflows: Vec<InflowDoc>,
    #[serde(default)]
    outflows: Vec<OutflowDoc>,
    #[serde(default)]
    variable_links: Vec<EdgeDoc>,
    #[serde(default)]
    sum_variable_links: Vec<EdgeDoc>,
    #[serde(default)]
    sum_links: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FootEntry {
    Same(String),
    Mapped { foot: String, to: String },
}

impl FootEntry {
    fn split(&self) -> (&str, &str) {
        match self {
            FootEntry::Same(n) => (n, n),
            FootEntry::Mapped { foot, to } => (foot, to),
        }
    }

    fn new(foot: &str, to: &str) -> Self {
        if foot == to {
            FootEntry::Same(foot.into())
        } else {
            FootEntry::Mapped { foot: foot.into(), to: to.into() }
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FootSumLinkDoc {
    stock: String,
    sum_variable: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LegDoc {
    stocks: Vec<FootEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sum_variables: Option<Vec<FootEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sum_links: Option<Vec<FootSumLinkDoc>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OpenDoc {
    diagram: Value,
    legs: Vec<LegDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxDoc {
    name: String,
    ports: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UwdDoc {
    junctions: Vec<String>,
    boxes: Vec<BoxDoc>,
    outer_ports: Vec<String>,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum MethodDoc {
    Euler,
    Rk4,
}

fn default_save_every() -> usize {
    1
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    initial: BTreeMap<String, f64>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    t0: f64,
    t1: f64,
    dt: f64,
    #[serde(default = "default_method")]
    method: MethodDoc,
    #[serde(default = "default_save_every")]
    save_every: usize,
}

fn default_method() -> MethodDoc {
    MethodDoc::Rk4
}

/// A link named by its endpoints. `index` picks among parallel links with
/// the same endpoints, in link order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkRef {
    pub src: String,
    pub tgt: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub index: usize,
}

fn is_zero(x: &usize) -> bool {
    *x == 0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkAssignment {
    pub from: LinkRef,
    pub to: LinkRef,
}

/// A diagram morphism stated by names, to be resolved against a domain and
/// a codomain diagram. Links left out are inferred when their image is the
/// only link with the right endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismSpec {
    pub stocks: BTreeMap<String, String>,
    pub flows: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub links: Vec<LinkAssignment>,
}

fn link_ref(p: &PrimitiveStockFlow, l: LinkId) -> LinkRef {
    let link = p.links[l.0];
    let index = p.links[..l.0].iter().filter(|x| x.src == link.src && x.tgt == link.tgt).count();
    LinkRef {
        src: p.stocks[link.src.0].name.clone(),
        tgt: p.flows[link.tgt.0].name.clone(),
        index,
    }
}

fn find_link(p: &PrimitiveStockFlow, r: &LinkRef) -> Option<LinkId> {
    let s = p.stock_by_name(&r.src)?;
    let f = p.flow_by_name(&r.tgt)?;
    p.links
        .iter()
        .enumerate()
        .filter(|(_, l)| l.src == s && l.tgt == f)
        .nth(r.index)
        .map(|(i, _)| LinkId(i))
}

impl MorphismSpec {
    /// Describes `alpha` by names, listing every link.
    pub fn describe(alpha: &DiagramMorphism, from: &PrimitiveStockFlow, to: &PrimitiveStockFlow) -> Self {
        MorphismSpec {
            stocks: from
                .stocks
                .iter()
                .zip(&alpha.stock_map)
                .map(|(s, t)| (s.name.clone(), to.stocks[t.0].name.clone()))
                .collect(),
            flows: from
                .flows
                .iter()
                .zip(&alpha.flow_map)
                .map(|(f, t)| (f.name.clone(), to.flows[t.0].name.clone()))
                .collect(),
            links: (0..from.links.len())
                .map(|l| LinkAssignment {
                    from: link_ref(from, LinkId(l)),
                    to: link_ref(to, alpha.link_map[l]),
                })
                .collect(),
        }
    }

    pub fn resolve(&self, from: &PrimitiveStockFlow, to: &PrimitiveStockFlow) -> Result<DiagramMorphism, IoError> {
        let err = |m: String| IoError::Morphism(m);
        let map_names = |map: &BTreeMap<String, String>,
                         sort: &str,
                         src: Vec<&str>,
                         dst: Vec<&str>|
         -> Result<Vec<usize>, IoError> {
            if let Some(k) = map.keys().find(|k| !src.contains(&k.as_str())) {
                return Err(err(format!("unknown domain {sort} `{k}`")));
            }
            src.iter()
                .map(|n| {
                    let t = map.get(*n).ok_or_else(|| err(format!("{sort} `{n}` is not mapped")))?;
                    dst.iter()
                        .position(|d| d == t)
                        .ok_or_else(|| err(format!("unknown codomain {sort} `{t}`")))
                })
                .collect()
        };
        let stock_map = map_names(
            &self.stocks,
            "stock",
            from.stocks.iter().map(|s| s.name.as_str()).collect(),
            to.stocks.iter().map(|s| s.name.as_str()).collect(),
        )?;
        let flow_map = map_names(
            &self.flows,
            "flow",
            from.flows.iter().map(|s| s.name.as_str()).collect(),
            to.flows.iter().map(|s| s.name.as_str()).collect(),
        )?;
        let mut link_map: Vec<Option<LinkId>> = vec![None; from.links.len()];
        for a in &self.links {
            let l = find_link(from, &a.from)
                .ok_or_else(|| err(format!("no domain link {} -> {} #{}", a.from.src, a.from.tgt, a.from.index)))?;
            let t = find_link(to, &a.to)
                .ok_or_else(|| err(format!("no codomain link {} -> {} #{}", a.to.src, a.to.tgt, a.to.index)))?;
            link_map[l.0] = Some(t);
        }
        for (l, slot) in link_map.iter_mut().enumerate() {
            if slot.is_some() {
                continue;
            }
            let link = from.links[l];
            let (s, f) = (stock_map[link.src.0], flow_map[link.tgt.0]);
            let candidates: Vec<usize> = to
                .links
                .iter()
                .enumerate()
                .filter(|(_, x)| x.src.0 == s && x.tgt.0 == f)
                .map(|(i, _)| i)
                .collect();
            match candidates.as_slice() {
                [only] => *slot = Some(LinkId(*only)),
                [] => {
                    return Err(err(format!(
                        "link {} -> {} has no image with matching endpoints",
                        from.stocks[link.src.0].name, from.flows[link.tgt.0].name
                    )))
                }
                _ => {
                    return Err(err(format!(
                        "link {} -> {} has several candidate images; list it explicitly",
                        from.stocks[link.src.0].name, from.flows[link.tgt.0].name
                    )))
                }
            }
        }
        Ok(DiagramMorphism {
            stock_map: stock_map.into_iter().map(StockId).collect(),
            flow_map: flow_map.into_iter().map(FlowId).collect(),
            link_map: link_map.into_iter().map(|l| l.expect("filled above")).collect(),
            codomain: SortCounts::of(to),
        })
    }
}

// ---- reading ---------------------------------------------------------------

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{key}")),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    out
}

fn body<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T, IoError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let mut path = format!("{prefix}{}", pointer(e.path()));
        let message = e.inner().to_string();
        if let Some(field) = message.strip_prefix("missing field `").and_then(|r| r.split('`').next()) {
            path.push('/');
            path.push_str(field);
        }
        IoError::SchemaViolation { path, message }
    })
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::SchemaViolation { path: path.into(), message: message.into() }
}

fn parse_at(text: &str, ctx: &ExprContext, path: String) -> Result<Expr, IoError> {
    parse_expression(text, ctx).map_err(|source| IoError::Expression { path, source })
}

/// Parses a document from JSON text.
pub fn from_json_str(text: &str) -> Result<Document, IoError> {
    let value: Value = serde_json::from_str(text).map_err(|e| IoError::Json(e.to_string()))?;
    from_value(value, "")
}

fn from_value(value: Value, prefix: &str) -> Result<Document, IoError> {
    let Value::Object(mut obj) = value else {
        return Err(schema(prefix, "expected an object"));
    };
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => return Err(schema(format!("{prefix}/kind"), "expected a string")),
        None => return Err(schema(format!("{prefix}/kind"), "missing field `kind`")),
    };
    match obj.remove("version") {
        Some(Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION) => {}
        Some(Value::Number(n)) => return Err(IoError::VersionMismatch { found: n.to_string() }),
        Some(_) => return Err(schema(format!("{prefix}/version"), "expected an integer")),
        None => return Err(schema(format!("{prefix}/version"), "missing field `version`")),
    }
    let value = Value::Object(obj);
    match kind.as_str() {
        "primitive" => Ok(Document::Primitive(read_primitive(body(value, prefix)?)?)),
        "stockflow" => Ok(Document::StockFlow(read_stockflow(body(value, prefix)?, prefix)?)),
        "full" => Ok(Document::Full(read_full(body(value, prefix)?, prefix)?)),
        "open" => Ok(Document::Open(read_open(body(value, prefix)?, prefix)?)),
        "uwd" => Ok(Document::Uwd(read_uwd(body(value, prefix)?)?)),
        "morphism" => Ok(Document::Morphism(body(value, prefix)?)),
        "scenario" => Ok(Document::Scenario(read_scenario(body(value, prefix)?))),
        other => Err(IoError::UnknownKind(other.to_string())),
    }
}

fn edge_pairs(edges: &[EdgeDoc]) -> Vec<(&str, &str)> {
    edges.iter().map(|e| (e.src.as_str(), e.tgt.as_str())).collect()
}

fn build_primitive(stocks: &[String], flows: &[(&str, &str, &str)], links: &[EdgeDoc]) -> Result<PrimitiveStockFlow, IoError> {
    let stocks: Vec<&str> = stocks.iter().map(String::as_str).collect();
    Ok(PrimitiveStockFlow::build(&stocks, flows, &edge_pairs(links))?)
}

fn read_primitive(doc: PrimitiveDoc) -> Result<PrimitiveStockFlow, IoError> {
    if let Some(i) = doc.flows.iter().position(|f| f.function.is_some()) {
        return Err(schema(format!("/flows/{i}/function"), "primitive diagrams carry no flow functions"));
    }
    let flows: Vec<_> = doc.flows.iter().map(|f| (f.name.as_str(), f.up.as_str(), f.down.as_str())).collect();
    build_primitive(&doc.stocks, &flows, &doc.links)
}

fn simple_contexts(p: &PrimitiveStockFlow) -> Vec<ExprContext> {
    (0..p.flows.len())
        .map(|f| {
            let links = p
                .links_into(FlowId(f))
                .iter()
                .map(|l| p.stocks[p.links[l.0].src.0].name.clone())
                .collect();
            ExprContext::new(links, Vec::new())
        })
        .collect()
}

fn read_stockflow(doc: StockFlowDoc, prefix: &str) -> Result<StockFlowDiagram, IoError> {
    let flows: Vec<_> = doc.flows.iter().map(|f| (f.name.as_str(), f.up.as_str(), f.down.as_str())).collect();
    let p = build_primitive(&doc.stocks, &flows, &doc.links)?;
    let ctxs = simple_contexts(&p);
    let fns = doc
        .flows
        .iter()
        .enumerate()
        .map(|(i, f)| parse_at(&f.function, &ctxs[i], format!("{prefix}/flows/{i}/function")))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(StockFlowDiagram::new(p, fns)?)
}

fn read_full(doc: FullDoc, prefix: &str) -> Result<FullStockFlow, IoError> {
    let mut b = FullStockFlow::builder().stocks(doc.stocks.iter().map(String::as_str));
    for s in &doc.sum_variables {
        b = b.sum_variable(s);
    }
    for (i, v) in doc.variables.iter().enumerate() {
        let ctx = ExprContext::new(
            doc.variable_links.iter().filter(|l| l.tgt == v.name).map(|l| l.src.clone()).collect(),
            doc.sum_variable_links.iter().filter(|l| l.tgt == v.name).map(|l| l.src.clone()).collect(),
        );
        let e = parse_at(&v.function, &ctx, format!("{prefix}/variables/{i}/function"))?;
        b = b.variable(&v.name, e);
    }
    for f in &doc.flows {
        b = b.flow(&f.name, &f.variable);
    }
    for r in &doc.inflows {
        b = b.inflow(&r.stock, &r.flow);
    }
    for r in &doc.outflows {
        b = b.outflow(&r.flow, &r.stock);
    }
    for l in &doc.variable_links {
        b = b.variable_link(&l.src, &l.tgt);
    }
    for l in &doc.sum_variable_links {
        b = b.sum_variable_link(&l.src, &l.tgt);
    }
    for l in &doc.sum_links {
        b = b.sum_link(&l.src, &l.tgt);
    }
    Ok(b.build()?)
}

fn read_open(doc: OpenDoc, prefix: &str) -> Result<OpenDiagram, IoError> {
    let inner_prefix = format!("{prefix}/diagram");
    let inner: Diagram = match from_value(doc.diagram, &inner_prefix)? {
        Document::StockFlow(d) => d.into(),
        Document::Full(d) => d.into(),
        other => {
            return Err(schema(inner_prefix, format!("expected a stockflow or full diagram, found {}", other.kind())))
        }
    };
    let mut specs = Vec::with_capacity(doc.legs.len());
    for (k, leg) in doc.legs.iter().enumerate() {
        let (foot_stocks, stock_targets): (Vec<String>, Vec<String>) =
            leg.stocks.iter().map(|e| e.split()).map(|(a, b)| (a.to_string(), b.to_string())).unzip();
        let full = leg.sum_variables.is_some() || leg.sum_links.is_some();
        if !full {
            specs.push(FootSpec {
                foot: Foot::Simple { elements: foot_stocks },
                stock_targets,
                sum_variable_targets: Vec::new(),
            });
            continue;
        }
        let (foot_sums, sum_targets): (Vec<String>, Vec<String>) = leg
            .sum_variables
            .iter()
            .flatten()
            .map(|e| e.split())
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .unzip();
        let mut sum_links = Vec::new();
        for (i, l) in leg.sum_links.iter().flatten().enumerate() {
            let path = format!("{prefix}/legs/{k}/sum_links/{i}");
            let s = foot_stocks
                .iter()
                .position(|n| *n == l.stock)
                .ok_or_else(|| schema(format!("{path}/stock"), format!("`{}` is not a foot stock", l.stock)))?;
            let v = foot_sums.iter().position(|n| *n == l.sum_variable).ok_or_else(|| {
                schema(format!("{path}/sum_variable"), format!("`{}` is not a foot sum variable", l.sum_variable))
            })?;
            sum_links.push((s, v));
        }
        specs.push(FootSpec {
            foot: Foot::Full { stocks: foot_stocks, sum_variables: foot_sums, sum_links },
            stock_targets,
            sum_variable_targets: sum_targets,
        });
    }
    Ok(OpenDiagram::make(inner, specs)?)
}

fn read_uwd(doc: UwdDoc) -> Result<Uwd, IoError> {
    let junctions: Vec<&str> = doc.junctions.iter().map(String::as_str).collect();
    let ports: Vec<Vec<&str>> = doc.boxes.iter().map(|b| b.ports.iter().map(String::as_str).collect()).collect();
    let boxes: Vec<(&str, &[&str])> = doc.boxes.iter().zip(&ports).map(|(b, p)| (b.name.as_str(), p.as_slice())).collect();
    let outer: Vec<&str> = doc.outer_ports.iter().map(String::as_str).collect();
    Ok(Uwd::build(&junctions, &boxes, &outer)?)
}

fn read_scenario(doc: ScenarioDoc) -> Scenario {
    Scenario {
        initial: doc.initial,
        params: doc.params,
        t0: doc.t0,
        t1: doc.t1,
        dt: doc.dt,
        method: match doc.method {
            MethodDoc::Euler => Method::Euler,
            MethodDoc::Rk4 => Method::Rk4,
        },
        save_every: doc.save_every,
    }
}

// ---- writing ---------------------------------------------------------------

/// Renders `e` and checks that the text reads back to the same tree.
fn render_checked(e: &Expr, ctx: &ExprContext, owner: &str) -> Result<String, IoError> {
    let text = ctx.render(e);
    match parse_expression(&text, ctx) {
        Ok(back) if back.bit_eq(e) => Ok(text),
        _ => Err(IoError::Unrepresentable { owner: owner.to_string(), text }),
    }
}

fn edges<'a>(pairs: impl Iterator<Item = (&'a str, &'a str)>) -> Vec<EdgeDoc> {
    pairs.map(|(s, t)| EdgeDoc { src: s.into(), tgt: t.into() }).collect()
}

fn write_primitive(p: &PrimitiveStockFlow) -> PrimitiveDoc {
    PrimitiveDoc {
        stocks: p.stocks.iter().map(|s| s.name.clone()).collect(),
        flows: p
            .flows
            .iter()
            .map(|f| FlowDoc {
                name: f.name.clone(),
                up: p.stocks[f.up.0].name.clone(),
                down: p.stocks[f.down.0].name.clone(),
                function: None,
            })
            .collect(),
        links: edges(p.links.iter().map(|l| (p.stocks[l.src.0].name.as_str(), p.flows[l.tgt.0].name.as_str()))),
    }
}

fn write_stockflow(d: &StockFlowDiagram) -> Result<StockFlowDoc, IoError> {
    let p = &d.primitive;
    let ctxs = simple_contexts(p);
    let base = write_primitive(p);
    let flows = base
        .flows
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            Ok(SimpleFlowDoc {
                function: render_checked(&d.flow_fn[i], &ctxs[i], &format!("flow `{}`", f.name))?,
                name: f.name,
                up: f.up,
                down: f.down,
            })
        })
        .collect::<Result<_, IoError>>()?;
    Ok(StockFlowDoc { stocks: base.stocks, flows, links: base.links })
}

fn write_full(d: &FullStockFlow) -> Result<FullDoc, IoError> {
    let stock = |s: StockId| d.stocks[s.0].name.as_str();
    let flow = |f: FlowId| d.flows[f.0].name.as_str();
    let var = |v: VariableId| d.variables[v.0].name.as_str();
    let sum = |s: SumVariableId| d.sum_variables[s.0].name.as_str();
    let variables = d
        .variables
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let ctx = ExprContext::new(
                d.link_sources(VariableId(i)).into_iter().map(|s| stock(s).to_string()).collect(),
                d.sum_var_sources(VariableId(i)).into_iter().map(|s| sum(s).to_string()).collect(),
            );
            Ok(VariableDoc {
                name: v.name.clone(),
                function: render_checked(&d.aux_fn[i], &ctx, &format!("variable `{}`", v.name))?,
            })
        })
        .collect::<Result<_, IoError>>()?;
    Ok(FullDoc {
        stocks: d.stocks.iter().map(|s| s.name.clone()).collect(),
        sum_variables: d.sum_variables.iter().map(|s| s.name.clone()).collect(),
        variables,
        flows: d
            .flows
            .iter()
            .zip(&d.fv)
            .map(|(f, v)| NamedFlowDoc { name: f.name.clone(), variable: var(*v).into() })
            .collect(),
        inflows: d.inflows.iter().map(|r| InflowDoc { stock: stock(r.stock).into(), flow: flow(r.flow).into() }).collect(),
        outflows: d
            .outflows
            .iter()
            .map(|r| OutflowDoc { flow: flow(r.flow).into(), stock: stock(r.stock).into() })
            .collect(),
        variable_links: edges(d.variable_links.iter().map(|l| (stock(l.src), var(l.tgt)))),
        sum_variable_links: edges(d.sum_variable_links.iter().map(|l| (sum(l.src), var(l.tgt)))),
        sum_links: edges(d.sum_links.iter().map(|l| (stock(l.src), sum(l.tgt)))),
    })
}

fn write_open(od: &OpenDiagram) -> Result<OpenDoc, IoError> {
    let diagram = to_value(&Document::from(od.inner.clone()))?;
    let stock_names = od.inner.stock_names();
    let sum_names = od.inner.sum_variable_names();
    let legs = od
        .legs
        .iter()
        .map(|leg| {
            let stocks = leg
                .foot
                .stocks()
                .iter()
                .zip(&leg.stock_map)
                .map(|(f, s)| FootEntry::new(f, stock_names[s.0]))
                .collect();
            match &leg.foot {
                Foot::Simple { .. } => LegDoc { stocks, sum_variables: None, sum_links: None },
                Foot::Full { stocks: fs, sum_variables, sum_links } => LegDoc {
                    stocks,
                    sum_variables: Some(
                        sum_variables
                            .iter()
                            .zip(&leg.sum_variable_map)
                            .map(|(f, s)| FootEntry::new(f, sum_names[s.0]))
                            .collect(),
                    ),
                    sum_links: Some(
                        sum_links
                            .iter()
                            .map(|&(s, v)| FootSumLinkDoc {
                                stock: fs[s].clone(),
                                sum_variable: sum_variables[v].clone(),
                            })
                            .collect(),
                    ),
                },
            }
        })
        .collect();
    Ok(OpenDoc { diagram, legs })
}

fn write_uwd(u: &Uwd) -> UwdDoc {
    let j = |k: &usize| u.junctions[*k].clone();
    UwdDoc {
        junctions: u.junctions.clone(),
        boxes: u
            .boxes
            .iter()
            .map(|b| BoxDoc { name: b.name.clone(), ports: b.ports.iter().map(j).collect() })
            .collect(),
        outer_ports: u.outer_ports.iter().map(j).collect(),
    }
}

fn write_scenario(s: &Scenario) -> ScenarioDoc {
    ScenarioDoc {
        initial: s.initial.clone(),
        params: s.params.clone(),
        t0: s.t0,
        t1: s.t1,
        dt: s.dt,
        method: match s.method {
            Method::Euler => MethodDoc::Euler,
            Method::Rk4 => MethodDoc::Rk4,
        },
        save_every: s.save_every,
    }
}

fn tagged(kind: &str, body: impl Serialize) -> Result<Value, IoError> {
    let Value::Object(fields) = serde_json::to_value(body).map_err(|e| IoError::Json(e.to_string()))? else {
        unreachable!("document bodies are structs")
    };
    let mut obj = Map::new();
    obj.insert("kind".into(), Value::String(kind.into()));
    obj.insert("version".into(), Value::from(FORMAT_VERSION));
    obj.extend(fields);
    Ok(Value::Object(obj))
}

/// The JSON value of a document.
pub fn to_value(doc: &Document) -> Result<Value, IoError> {
    let kind = doc.kind();
    match doc {
        Document::Primitive(p) => tagged(kind, write_primitive(p)),
        Document::StockFlow(d) => tagged(kind, write_stockflow(d)?),
        Document::Full(d) => tagged(kind, write_full(d)?),
        Document::Open(d) => tagged(kind, write_open(d)?),
        Document::Uwd(u) => tagged(kind, write_uwd(u)),
        Document::Morphism(m) => tagged(kind, m),
        Document::Scenario(s) => {
            let bad = [s.t0, s.t1, s.dt].into_iter().chain(s.initial.values().copied()).chain(s.params.values().copied());
            if bad.into_iter().any(|x| !x.is_finite()) {
                return Err(IoError::Unrepresentable {
                    owner: "scenario".into(),
                    text: "non-finite number".into(),
                });
            }
            tagged(kind, write_scenario(s))
        }
    }
}

/// Pretty-printed JSON text with a trailing newline.
pub fn to_json_string(doc: &Document) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(&to_value(doc)?).map_err(|e| IoError::Json(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn load(path: impl AsRef<Path>) -> Result<Document, IoError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.display().to_string(), source })?;
    from_json_str(&text)
}

pub fn save(doc: &Document, path: impl AsRef<Path>) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = to_json_string(doc)?;
    std::fs::write(path, text).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::open::tests::sir;

    fn round_trip(doc: Document) {
        let text = to_json_string(&doc).unwrap();
        let back = from_json_str(&text).unwrap();
        assert_eq!(back, doc, "{text}");
        assert_eq!(to_json_string(&back).unwrap(), text);
    }

    #[test]
    fn stockflow_round_trip() {
        round_trip(Document::StockFlow(sir()));
        round_trip(Document::Primitive(sir().primitive));
    }

    #[test]
    fn stockflow_layout() {
        let text = to_json_string(&Document::StockFlow(sir())).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["kind"], "stockflow");
        assert_eq!(v["version"], 1);
        assert_eq!(v["flows"][0]["function"], "beta * S * I / N");
        assert!(text.starts_with("{\n  \"kind\": \"stockflow\",\n  \"version\": 1,"));
    }

    #[test]
    fn missing_flow_function() {
        let mut v = to_value(&Document::StockFlow(sir())).unwrap();
        v["flows"][1].as_object_mut().unwrap().remove("function");
        let err = from_json_str(&v.to_string()).unwrap_err();
        match err {
            IoError::SchemaViolation { path, .. } => assert_eq!(path, "/flows/1/function"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn version_two_rejected() {
        let mut v = to_value(&Document::StockFlow(sir())).unwrap();
        v["version"] = Value::from(2);
        assert!(matches!(from_json_str(&v.to_string()), Err(IoError::VersionMismatch { .. })));
    }

    #[test]
    fn unknown_field_rejected() {
        let mut v = to_value(&Document::StockFlow(sir())).unwrap();
        v["flows"][0]["colour"] = Value::from("red");
        match from_json_str(&v.to_string()).unwrap_err() {
            IoError::SchemaViolation { path, message } => {
                assert_eq!(path, "/flows/0/colour");
                assert!(message.contains("colour"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_expression_has_path() {
        let mut v = to_value(&Document::StockFlow(sir())).unwrap();
        v["flows"][0]["function"] = Value::from("S * (I");
        match from_json_str(&v.to_string()).unwrap_err() {
            IoError::Expression { path, .. } => assert_eq!(path, "/flows/0/function"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn open_round_trip_with_mapped_foot() {
        let od = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S"]), FootSpec::mapped(&[("x", "R"), ("y", "I")])]).unwrap();
        round_trip(Document::Open(od));
    }

    #[test]
    fn open_bad_inner_path() {
        let od = OpenDiagram::make(sir(), vec![]).unwrap();
        let mut v = to_value(&Document::Open(od)).unwrap();
        v["diagram"]["flows"][1].as_object_mut().unwrap().remove("function");
        match from_json_str(&v.to_string()).unwrap_err() {
            IoError::SchemaViolation { path, .. } => assert_eq!(path, "/diagram/flows/1/function"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn uwd_and_scenario_round_trip() {
        let u = Uwd::build(&["S", "E"], &[("a", &["S", "E"]), ("b", &["E"])], &["S"]).unwrap();
        round_trip(Document::Uwd(u));
        let s = Scenario {
            initial: BTreeMap::from([("S".into(), 990.0), ("I".into(), 10.0)]),
            params: BTreeMap::from([("beta".into(), 0.1)]),
            t0: 0.5,
            t1: 10.0,
            dt: 0.1,
            method: Method::Euler,
            save_every: 4,
        };
        round_trip(Document::Scenario(s));
    }

    #[test]
    fn morphism_spec_resolves_and_infers_links() {
        let d = sir();
        let id = DiagramMorphism::identity(&d.primitive);
        let mut spec = MorphismSpec::describe(&id, &d.primitive, &d.primitive);
        assert_eq!(spec.resolve(&d.primitive, &d.primitive).unwrap(), id);
        spec.links.clear();
        assert_eq!(spec.resolve(&d.primitive, &d.primitive).unwrap(), id);
        round_trip(Document::Morphism(spec));
    }

    #[test]
    fn unrepresentable_expression() {
        // a parameter sharing its name with a linked stock cannot be written
        let mut d = sir();
        d.flow_fn[1] = Expr::link(0).div(Expr::param("I"));
        assert!(matches!(
            to_json_string(&Document::StockFlow(d)),
            Err(IoError::Unrepresentable { .. })
        ));
    }
}
