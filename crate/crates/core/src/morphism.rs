//! Morphisms of stock-flow diagrams.
//!
//! A morphism is a triple of functions on stocks, flows and links that
//! commutes with `up`, `down`, `src` and `tgt`, and whose target flow
//! functions are the sums of the source flow functions lying over them, with
//! arguments pulled back along the link map. The flow equation is checked
//! numerically at seeded random argument vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::diagram::{Flow, FlowId, Link, LinkId, PrimitiveStockFlow, Stock, StockFlowDiagram, StockId};
use crate::expr::{EvalError, Expr, Params};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SortCounts {
    pub stocks: usize,
    pub flows: usize,
    pub links: usize,
}

impl SortCounts {
    pub fn of(d: &PrimitiveStockFlow) -> Self {
        SortCounts {
            stocks: d.stocks.len(),
            flows: d.flows.len(),
            links: d.links.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagramMorphism {
    pub stock_map: Vec<StockId>,
    pub flow_map: Vec<FlowId>,
    pub link_map: Vec<LinkId>,
    /// Sizes of the target diagram.
    pub codomain: SortCounts,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MorphismError {
    #[error("codomain of the first morphism {0:?} is not the domain of the second {1:?}")]
    DomainMismatch(SortCounts, SortCounts),
    #[error("ill-formed {sort} partition: {first} and {second} share a class but their `{hom}` images do not")]
    IllFormedPartition {
        sort: &'static str,
        first: String,
        second: String,
        hom: &'static str,
    },
    #[error("{sort} partition has {got} entries, diagram has {expected}")]
    PartitionLength {
        sort: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("morphism is not natural: {0}")]
    NotNatural(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl DiagramMorphism {
    pub fn identity(d: &PrimitiveStockFlow) -> Self {
        DiagramMorphism {
            stock_map: (0..d.stocks.len()).map(StockId).collect(),
            flow_map: (0..d.flows.len()).map(FlowId).collect(),
            link_map: (0..d.links.len()).map(LinkId).collect(),
            codomain: SortCounts::of(d),
        }
    }

    pub fn domain(&self) -> SortCounts {
        SortCounts {
            stocks: self.stock_map.len(),
            flows: self.flow_map.len(),
            links: self.link_map.len(),
        }
    }
}

/// One failing naturality square instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SquareFailure {
    /// `up`, `down`, `src`, `tgt`, or `total` for an out-of-range map entry.
    pub square: &'static str,
    pub sort: &'static str,
    pub element: usize,
}

/// Lists every failing square; empty means `alpha` is natural `from -> to`.
pub fn check_naturality(
    alpha: &DiagramMorphism,
    from: &PrimitiveStockFlow,
    to: &PrimitiveStockFlow,
) -> Vec<SquareFailure> {
    let mut out = Vec::new();
    let fail = |out: &mut Vec<SquareFailure>, square, sort, element| {
        out.push(SquareFailure { square, sort, element })
    };
    let domain_ok = alpha.stock_map.len() == from.stocks.len()
        && alpha.flow_map.len() == from.flows.len()
        && alpha.link_map.len() == from.links.len();
    if !domain_ok {
        fail(&mut out, "total", "morphism", 0);
        return out;
    }
    for (i, s) in alpha.stock_map.iter().enumerate() {
        if s.0 >= to.stocks.len() {
            fail(&mut out, "total", "stock", i);
        }
    }
    for (i, f) in alpha.flow_map.iter().enumerate() {
        if f.0 >= to.flows.len() {
            fail(&mut out, "total", "flow", i);
        }
    }
    for (i, l) in alpha.link_map.iter().enumerate() {
        if l.0 >= to.links.len() {
            fail(&mut out, "total", "link", i);
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (i, f) in from.flows.iter().enumerate() {
        let g = &to.flows[alpha.flow_map[i].0];
        if g.up != alpha.stock_map[f.up.0] {
            fail(&mut out, "up", "flow", i);
        }
        if g.down != alpha.stock_map[f.down.0] {
            fail(&mut out, "down", "flow", i);
        }
    }
    for (i, l) in from.links.iter().enumerate() {
        let m = &to.links[alpha.link_map[i].0];
        if m.src != alpha.stock_map[l.src.0] {
            fail(&mut out, "src", "link", i);
        }
        if m.tgt != alpha.flow_map[l.tgt.0] {
            fail(&mut out, "tgt", "link", i);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowCheck {
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for FlowCheck {
    fn default() -> Self {
        FlowCheck {
            samples: 100,
            seed: 7,
            tol: 1e-12,
        }
    }
}

/// Upper end of the sampling box for link values; each coordinate is uniform in `[0, SAMPLE_MAX]`.
pub const SAMPLE_MAX: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowDiscrepancy {
    pub flow: FlowId,
    pub name: String,
    pub max: f64,
    pub min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowEquationReport {
    pub flows: Vec<FlowDiscrepancy>,
    pub tol: f64,
}

impl FlowEquationReport {
    pub fn passed(&self) -> bool {
        self.flows.iter().all(|f| f.max <= self.tol)
    }

    pub fn max_discrepancy(&self) -> f64 {
        self.flows.iter().map(|f| f.max).fold(0.0, f64::max)
    }
}

/// For each target flow `g`, position in `g`'s link list of the image of each
/// of source flow `f`'s links.
fn slot_map(
    alpha: &DiagramMorphism,
    from: &PrimitiveStockFlow,
    to: &PrimitiveStockFlow,
    f: FlowId,
) -> Result<Vec<usize>, MorphismError> {
    let g = alpha.flow_map[f.0];
    let target_links = to.links_into(g);
    from.links_into(f)
        .into_iter()
        .map(|l| {
            let image = alpha.link_map[l.0];
            target_links.iter().position(|&m| m == image).ok_or_else(|| {
                MorphismError::NotNatural(format!(
                    "link {} of flow `{}` is not sent to a link of `{}`",
                    l.0, from.flows[f.0].name, to.flows[g.0].name
                ))
            })
        })
        .collect()
}

/// Compares each target flow function with the pulled-back sum of the source
/// flow functions over it at `check.samples` random argument vectors.
pub fn check_flow_equation(
    alpha: &DiagramMorphism,
    from: &StockFlowDiagram,
    to: &StockFlowDiagram,
    params: &Params,
    check: &FlowCheck,
) -> Result<FlowEquationReport, MorphismError> {
    let failures = check_naturality(alpha, &from.primitive, &to.primitive);
    if let Some(f) = failures.first() {
        return Err(MorphismError::NotNatural(format!("{} square fails at {} {}", f.square, f.sort, f.element)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(check.seed);
    let mut flows = Vec::with_capacity(to.flows().len());
    for (g, gflow) in to.flows().iter().enumerate() {
        let g = FlowId(g);
        let arity = to.primitive.arity(g);
        let fibre: Vec<(FlowId, Vec<usize>)> = (0..from.flows().len())
            .map(FlowId)
            .filter(|f| alpha.flow_map[f.0] == g)
            .map(|f| Ok((f, slot_map(alpha, &from.primitive, &to.primitive, f)?)))
            .collect::<Result<_, MorphismError>>()?;
        let (mut max, mut min) = (0.0f64, f64::INFINITY);
        let mut args = vec![0.0; arity];
        let mut pulled = Vec::new();
        for _ in 0..check.samples {
            for a in args.iter_mut() {
                *a = rng.random_range(0.0..=SAMPLE_MAX);
            }
            let psi = to.flow_fn[g.0].eval(&args, &[], params)?;
            let mut sum = 0.0;
            for (f, slots) in &fibre {
                pulled.clear();
                pulled.extend(slots.iter().map(|&s| args[s]));
                sum += from.flow_fn[f.0].eval(&pulled, &[], params)?;
            }
            let d = (psi - sum).abs();
            let d = if d.is_nan() { f64::INFINITY } else { d };
            max = max.max(d);
            min = min.min(d);
        }
        if check.samples == 0 {
            min = 0.0;
        }
        flows.push(FlowDiscrepancy {
            flow: g,
            name: gflow.name.clone(),
            max,
            min,
        });
    }
    Ok(FlowEquationReport { flows, tol: check.tol })
}

/// `beta ∘ alpha`.
pub fn compose_morphisms(alpha: &DiagramMorphism, beta: &DiagramMorphism) -> Result<DiagramMorphism, MorphismError> {
    if alpha.codomain != beta.domain() {
        return Err(MorphismError::DomainMismatch(alpha.codomain, beta.domain()));
    }
    Ok(DiagramMorphism {
        stock_map: alpha.stock_map.iter().map(|s| beta.stock_map[s.0]).collect(),
        flow_map: alpha.flow_map.iter().map(|f| beta.flow_map[f.0]).collect(),
        link_map: alpha.link_map.iter().map(|l| beta.link_map[l.0]).collect(),
        codomain: beta.codomain,
    })
}

/// Dense class index per element: classes ordered by their smallest member.
fn classes(labels: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut index = std::collections::HashMap::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let map = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let c = *index.entry(*l).or_insert_with(|| {
                members.push(Vec::new());
                members.len() - 1
            });
            members[c].push(i);
            c
        })
        .collect();
    (map, members)
}

fn join_names<'a>(names: impl Iterator<Item = &'a str>) -> String {
    let mut out: Vec<&str> = Vec::new();
    for n in names {
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out.join("≡")
}

/// Quotients `src` by the given partitions (arbitrary class labels per
/// element) and returns the lumped diagram with the quotient morphism. Each
/// lumped flow's function is the sum of its members' functions with link
/// slots rewritten to the lumped links.
pub fn lump(
    src: &StockFlowDiagram,
    stock_partition: &[usize],
    flow_partition: &[usize],
    link_partition: &[usize],
) -> Result<(StockFlowDiagram, DiagramMorphism), MorphismError> {
    let p = &src.primitive;
    for (sort, got, expected) in [
        ("stock", stock_partition.len(), p.stocks.len()),
        ("flow", flow_partition.len(), p.flows.len()),
        ("link", link_partition.len(), p.links.len()),
    ] {
        if got != expected {
            return Err(MorphismError::PartitionLength { sort, got, expected });
        }
    }
    let (smap, sclasses) = classes(stock_partition);
    let (fmap, fclasses) = classes(flow_partition);
    let (lmap, lclasses) = classes(link_partition);

    let mut flows = Vec::with_capacity(fclasses.len());
    for members in &fclasses {
        let rep = &p.flows[members[0]];
        for &m in &members[1..] {
            let f = &p.flows[m];
            for (hom, a, b) in [("up", rep.up, f.up), ("down", rep.down, f.down)] {
                if smap[a.0] != smap[b.0] {
                    return Err(MorphismError::IllFormedPartition {
                        sort: "flow",
                        first: rep.name.clone(),
                        second: f.name.clone(),
                        hom,
                    });
                }
            }
        }
        flows.push(Flow {
            name: join_names(members.iter().map(|&m| p.flows[m].name.as_str())),
            up: StockId(smap[rep.up.0]),
            down: StockId(smap[rep.down.0]),
        });
    }
    let mut links = Vec::with_capacity(lclasses.len());
    for members in &lclasses {
        let rep = p.links[members[0]];
        for &m in &members[1..] {
            let l = p.links[m];
            let describe = |i: usize| format!("link {i}");
            if smap[rep.src.0] != smap[l.src.0] {
                return Err(MorphismError::IllFormedPartition {
                    sort: "link",
                    first: describe(members[0]),
                    second: describe(m),
                    hom: "src",
                });
            }
            if fmap[rep.tgt.0] != fmap[l.tgt.0] {
                return Err(MorphismError::IllFormedPartition {
                    sort: "link",
                    first: describe(members[0]),
                    second: describe(m),
                    hom: "tgt",
                });
            }
        }
        links.push(Link {
            src: StockId(smap[rep.src.0]),
            tgt: FlowId(fmap[rep.tgt.0]),
        });
    }
    let stocks = sclasses
        .iter()
        .map(|members| Stock {
            name: join_names(members.iter().map(|&m| p.stocks[m].name.as_str())),
        })
        .collect();
    let primitive = PrimitiveStockFlow { stocks, flows, links };
    let alpha = DiagramMorphism {
        stock_map: smap.into_iter().map(StockId).collect(),
        flow_map: fmap.iter().copied().map(FlowId).collect(),
        link_map: lmap.into_iter().map(LinkId).collect(),
        codomain: SortCounts::of(&primitive),
    };

    let mut flow_fn = Vec::with_capacity(fclasses.len());
    for members in &fclasses {
        let mut total: Option<Expr> = None;
        for &f in members {
            let slots = slot_map(&alpha, p, &primitive, FlowId(f))?;
            let term = src.flow_fn[f].map_links(&|k| slots[k]);
            total = Some(match total {
                None => term,
                Some(acc) => acc.add(term),
            });
        }
        flow_fn.push(total.expect("classes are non-empty"));
    }
    let lumped = StockFlowDiagram { primitive, flow_fn };
    Ok((lumped, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Left diagram of the lumping example: S, I, R, D with flows i, r, d.
    fn sird() -> StockFlowDiagram {
        let p = PrimitiveStockFlow::build(
            &["S", "I", "R", "D"],
            &[("i", "S", "I"), ("r", "I", "R"), ("d", "I", "D")],
            &[("S", "i"), ("I", "i"), ("I", "r"), ("I", "d")],
        )
        .unwrap();
        StockFlowDiagram::new(
            p,
            vec![
                Expr::Const(0.3).mul(Expr::link(0)).mul(Expr::link(1)).div(Expr::Const(1000.0)),
                Expr::link(0).div(Expr::Const(5.0)),
                Expr::Const(0.01).mul(Expr::link(0)),
            ],
        )
        .unwrap()
    }

    fn fig2_partitions() -> ([usize; 4], [usize; 3], [usize; 4]) {
        ([0, 1, 2, 2], [0, 1, 1], [0, 1, 2, 2])
    }

    #[test]
    fn lump_fig2() {
        let (s, f, l) = fig2_partitions();
        let (g, alpha) = lump(&sird(), &s, &f, &l).unwrap();
        assert_eq!(g.stocks().len(), 3);
        assert_eq!(g.flows().len(), 2);
        assert_eq!(g.links().len(), 3);
        assert_eq!(g.stocks()[2].name, "R≡D");
        assert_eq!(g.flow_fn[1], Expr::link(0).div(Expr::Const(5.0)).add(Expr::Const(0.01).mul(Expr::link(0))));
        assert!(check_naturality(&alpha, &sird().primitive, &g.primitive).is_empty());
        let r = check_flow_equation(&alpha, &sird(), &g, &Params::new(), &FlowCheck::default()).unwrap();
        assert!(r.passed());
        assert_eq!(r.max_discrepancy(), 0.0);
    }

    #[test]
    fn perturbation_detected_at_every_sample() {
        let (s, f, l) = fig2_partitions();
        let (mut g, alpha) = lump(&sird(), &s, &f, &l).unwrap();
        g.flow_fn[1] = g.flow_fn[1].clone().add(Expr::Const(1.0));
        let r = check_flow_equation(&alpha, &sird(), &g, &Params::new(), &FlowCheck::default()).unwrap();
        assert!(!r.passed());
        // (a + b) + 1 - (a + b) differs from 1 only by rounding
        assert!((r.flows[1].max - 1.0).abs() < 1e-12);
        assert!((r.flows[1].min - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrete_partition_is_identity() {
        let d = sird();
        let (g, alpha) = lump(&d, &[0, 1, 2, 3], &[0, 1, 2], &[0, 1, 2, 3]).unwrap();
        assert_eq!(g, d);
        assert_eq!(alpha, DiagramMorphism::identity(&d.primitive));
    }

    #[test]
    fn ill_formed_partition() {
        // merging S with I while keeping R, D apart: i and r share a class
        // but their upstream stocks S~I and I are fine, downstream I and R are not
        let err = lump(&sird(), &[0, 0, 1, 2], &[0, 0, 1], &[0, 1, 2, 3]).unwrap_err();
        assert!(matches!(err, MorphismError::IllFormedPartition { sort: "flow", hom: "down", .. }));
    }

    #[test]
    fn identity_laws() {
        let d = sird();
        let (s, f, l) = fig2_partitions();
        let (g, alpha) = lump(&d, &s, &f, &l).unwrap();
        let left = compose_morphisms(&DiagramMorphism::identity(&d.primitive), &alpha).unwrap();
        let right = compose_morphisms(&alpha, &DiagramMorphism::identity(&g.primitive)).unwrap();
        assert_eq!(left, alpha);
        assert_eq!(right, alpha);
    }

    #[test]
    fn domain_mismatch() {
        let d = sird();
        let id = DiagramMorphism::identity(&d.primitive);
        let (s, f, l) = fig2_partitions();
        let (_, alpha) = lump(&d, &s, &f, &l).unwrap();
        assert!(matches!(compose_morphisms(&alpha, &id), Err(MorphismError::DomainMismatch(..))));
    }

    #[test]
    fn scrambled_links_not_natural() {
        let (s, f, l) = fig2_partitions();
        let (g, mut alpha) = lump(&sird(), &s, &f, &l).unwrap();
        alpha.link_map.swap(0, 2);
        assert!(!check_naturality(&alpha, &sird().primitive, &g.primitive).is_empty());
    }

    #[test]
    fn composite_with_link_automorphism() {
        // swap the two links into `i` (S->i, I->i are not parallel, so use a
        // diagram with two parallel links into one flow)
        let p = PrimitiveStockFlow::build(
            &["A", "B", "C"],
            &[("f", "A", "B"), ("g", "A", "C")],
            &[("A", "f"), ("A", "f"), ("A", "g")],
        )
        .unwrap();
        let d = StockFlowDiagram::new(
            p,
            vec![Expr::link(0).mul(Expr::Const(2.0)).add(Expr::link(1)), Expr::link(0)],
        )
        .unwrap();
        let mut swap = DiagramMorphism::identity(&d.primitive);
        swap.link_map.swap(0, 1);
        let mut swapped = d.clone();
        swapped.flow_fn[0] = Expr::link(1).mul(Expr::Const(2.0)).add(Expr::link(0));
        assert!(check_naturality(&swap, &d.primitive, &swapped.primitive).is_empty());
        let (q, alpha) = lump(&swapped, &[0, 1, 1], &[0, 0], &[0, 0, 1]).unwrap();
        let composite = compose_morphisms(&swap, &alpha).unwrap();
        assert!(check_naturality(&composite, &d.primitive, &q.primitive).is_empty());
        let r = check_flow_equation(&composite, &d, &q, &Params::new(), &FlowCheck::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }
}
