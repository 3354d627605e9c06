//! Seeded generators of small diagrams, open diagrams and partitions, for
//! property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::diagram::{Flow, FlowId, Link, PrimitiveStockFlow, Stock, StockFlowDiagram, StockId};
use crate::expr::{BinaryOp, Expr, Params};
use crate::full::{FullStockFlow, Inflow, Named, Outflow, SumLink, SumVariableLink, VariableLink};
use crate::diagram::{SumVariableId, VariableId};
use crate::open::{FootSpec, OpenDiagram};

/// Parameter names used by generated expressions, with values for evaluating them.
pub fn random_params() -> Params {
    [("k0", 0.5), ("k1", 1.25), ("k2", -0.75)]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
}

/// A random expression over `links` link slots and `sums` sum-variable
/// slots, built from `+`, `-`, `*`, `min`, `max`, constants and `k0..k2`.
/// It never divides, so it is defined everywhere.
pub fn random_expr<R: Rng + ?Sized>(rng: &mut R, links: usize, sums: usize, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        let choices = 2 + links + sums;
        let pick = rng.random_range(0..choices);
        return if pick == 0 {
            Expr::Const((rng.random_range(-20..=20) as f64) / 4.0)
        } else if pick == 1 {
            Expr::param(format!("k{}", rng.random_range(0..3)))
        } else if pick < 2 + links {
            Expr::Link(pick - 2)
        } else {
            Expr::SumVar(pick - 2 - links)
        };
    }
    let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Min, BinaryOp::Max][rng.random_range(0..5)];
    Expr::binary(op, random_expr(rng, links, sums, depth - 1), random_expr(rng, links, sums, depth - 1))
}

/// A random valid simple diagram with 1 to `max_stocks` stocks named
/// `<prefix>0`, `<prefix>1`, ...
pub fn random_diagram<R: Rng + ?Sized>(rng: &mut R, max_stocks: usize, prefix: &str) -> StockFlowDiagram {
    let n = rng.random_range(1..=max_stocks.max(1));
    let stocks: Vec<Stock> = (0..n).map(|i| Stock { name: format!("{prefix}{i}") }).collect();
    let nf = rng.random_range(0..=n + 1);
    let flows: Vec<Flow> = (0..nf)
        .map(|i| Flow {
            name: format!("{prefix}f{i}"),
            up: StockId(rng.random_range(0..n)),
            down: StockId(rng.random_range(0..n)),
        })
        .collect();
    let mut links = Vec::new();
    for f in 0..nf {
        for _ in 0..rng.random_range(0..=2) {
            links.push(Link { src: StockId(rng.random_range(0..n)), tgt: FlowId(f) });
        }
    }
    links.shuffle(rng);
    let primitive = PrimitiveStockFlow { stocks, flows, links };
    let flow_fn = (0..nf)
        .map(|f| {
            let arity = primitive.arity(FlowId(f));
            random_expr(rng, arity, 0, 3)
        })
        .collect();
    StockFlowDiagram::new(primitive, flow_fn).expect("generated diagram is valid")
}

/// A random valid full-fledged diagram, possibly with partial flows.
pub fn random_full<R: Rng + ?Sized>(rng: &mut R, max_stocks: usize, prefix: &str) -> FullStockFlow {
    let n = rng.random_range(1..=max_stocks.max(1));
    let nsv = rng.random_range(0..=2);
    let nv = rng.random_range(1..=n + 1);
    let nf = rng.random_range(0..=n + 1);
    let mut d = FullStockFlow {
        stocks: (0..n).map(|i| Stock { name: format!("{prefix}{i}") }).collect(),
        sum_variables: (0..nsv).map(|i| Named::new(format!("{prefix}N{i}"))).collect(),
        variables: (0..nv).map(|i| Named::new(format!("{prefix}v{i}"))).collect(),
        flows: (0..nf).map(|i| Named::new(format!("{prefix}f{i}"))).collect(),
        ..Default::default()
    };
    for s in 0..nsv {
        for st in 0..n {
            if rng.random_bool(0.6) {
                d.sum_links.push(SumLink { src: StockId(st), tgt: SumVariableId(s) });
            }
        }
    }
    for v in 0..nv {
        for _ in 0..rng.random_range(0..=2) {
            d.variable_links.push(VariableLink { src: StockId(rng.random_range(0..n)), tgt: VariableId(v) });
        }
        if nsv > 0 && rng.random_bool(0.5) {
            d.sum_variable_links
                .push(SumVariableLink { src: SumVariableId(rng.random_range(0..nsv)), tgt: VariableId(v) });
        }
    }
    for f in 0..nf {
        d.fv.push(VariableId(rng.random_range(0..nv)));
        let side = rng.random_range(0..4);
        if side != 1 {
            d.inflows.push(Inflow { stock: StockId(rng.random_range(0..n)), flow: FlowId(f) });
        }
        if side != 2 {
            d.outflows.push(Outflow { flow: FlowId(f), stock: StockId(rng.random_range(0..n)) });
        }
    }
    d.aux_fn = (0..nv)
        .map(|v| {
            let links = d.link_sources(VariableId(v)).len();
            let sums = d.sum_var_sources(VariableId(v)).len();
            random_expr(rng, links, sums, 3)
        })
        .collect();
    let violations = d.validate();
    assert!(violations.is_empty(), "generated diagram is invalid: {violations:?}");
    d
}

/// `k` distinct stock indices out of `n`, in random order.
fn pick<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    all.truncate(k);
    all
}

/// A leg whose foot elements `<foot>0..` hit the given stocks.
fn leg(d: &StockFlowDiagram, foot: &str, stocks: &[usize]) -> FootSpec {
    let names: Vec<(String, String)> = stocks
        .iter()
        .enumerate()
        .map(|(i, &s)| (format!("{foot}{i}"), d.stocks()[s].name.clone()))
        .collect();
    let pairs: Vec<(&str, &str)> = names.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    FootSpec::mapped(&pairs)
}

/// Two open diagrams, each with a single leg over the same foot of up to
/// `min(|A|, |B|)` elements. Stocks are named `a*` and `b*`.
pub fn random_open_pair<R: Rng + ?Sized>(rng: &mut R, max_stocks: usize) -> (OpenDiagram, OpenDiagram) {
    let a = random_diagram(rng, max_stocks, "a");
    let b = random_diagram(rng, max_stocks, "b");
    let k = rng.random_range(0..=a.stocks().len().min(b.stocks().len()));
    let la = leg(&a, "x", &pick(rng, a.stocks().len(), k));
    let lb = leg(&b, "x", &pick(rng, b.stocks().len(), k));
    (
        OpenDiagram::make(a, vec![la]).expect("leg resolves"),
        OpenDiagram::make(b, vec![lb]).expect("leg resolves"),
    )
}

/// A composable chain `A --x-- B --y-- C`: A has one leg, B two (the first
/// matching A's, the second matching C's), C one.
pub fn random_open_triple<R: Rng + ?Sized>(rng: &mut R, max_stocks: usize) -> [OpenDiagram; 3] {
    let a = random_diagram(rng, max_stocks, "a");
    let b = random_diagram(rng, max_stocks, "b");
    let c = random_diagram(rng, max_stocks, "c");
    let (na, nb, nc) = (a.stocks().len(), b.stocks().len(), c.stocks().len());
    let kx = rng.random_range(0..=na.min(nb));
    let ky = rng.random_range(0..=nb.min(nc));
    let (ax, bx) = (pick(rng, na, kx), pick(rng, nb, kx));
    let (by, cy) = (pick(rng, nb, ky), pick(rng, nc, ky));
    [
        OpenDiagram::make(a.clone(), vec![leg(&a, "x", &ax)]).expect("leg resolves"),
        OpenDiagram::make(b.clone(), vec![leg(&b, "x", &bx), leg(&b, "y", &by)]).expect("legs resolve"),
        OpenDiagram::make(c.clone(), vec![leg(&c, "y", &cy)]).expect("leg resolves"),
    ]
}

/// A random diagram with stock-only legs, each over a random subset of stocks.
pub fn random_open<R: Rng + ?Sized>(rng: &mut R, max_stocks: usize, legs: usize, prefix: &str) -> OpenDiagram {
    let d = random_diagram(rng, max_stocks, prefix);
    let n = d.stocks().len();
    let specs = (0..legs)
        .map(|i| {
            let k = rng.random_range(0..=n);
            leg(&d, &format!("{prefix}{i}_"), &pick(rng, n, k))
        })
        .collect();
    OpenDiagram::make(d, specs).expect("legs resolve")
}

/// Well-formed partitions of stocks, flows and links for [`crate::morphism::lump`]:
/// flows share a class only if their endpoints do, links only if their
/// source stocks and target flows do.
pub fn random_partition<R: Rng + ?Sized>(rng: &mut R, d: &StockFlowDiagram) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let p = &d.primitive;
    let n = p.stocks.len();
    let classes = rng.random_range(1..=n.max(1));
    let stocks: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let mut flows = vec![0; p.flows.len()];
    let mut next = 0;
    let mut seen: Vec<((usize, usize), usize)> = Vec::new();
    for (i, f) in p.flows.iter().enumerate() {
        let key = (stocks[f.up.0], stocks[f.down.0]);
        match seen.iter().find(|(k, _)| *k == key) {
            Some(&(_, class)) if rng.random_bool(0.6) => flows[i] = class,
            _ => {
                flows[i] = next;
                seen.push((key, next));
                next += 1;
            }
        }
    }
    let mut links = vec![0; p.links.len()];
    let mut next = 0;
    let mut seen: Vec<((usize, usize), usize)> = Vec::new();
    for (i, l) in p.links.iter().enumerate() {
        let key = (stocks[l.src.0], flows[l.tgt.0]);
        match seen.iter().find(|(k, _)| *k == key) {
            Some(&(_, class)) if rng.random_bool(0.6) => links[i] = class,
            _ => {
                links[i] = next;
                seen.push((key, next));
                next += 1;
            }
        }
    }
    (stocks, flows, links)
}

/// A random state with entries uniform in `[0, scale]`.
pub fn random_state<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.0..=scale)).collect()
}
