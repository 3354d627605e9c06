//! Open diagrams as structured multicospans, and their composition.
//!
//! An [`OpenDiagram`] is a diagram with an ordered list of legs. Each leg maps
//! a foot (a finite set of stocks, or for full-fledged diagrams a small
//! instance of stocks, sum variables and sum links) into the diagram.
//! Composition glues along feet that meet at a junction: disjoint union on
//! every sort, then a union-find quotient on the foot sorts only.

mod glue;
mod iso;
mod uwd;

use std::collections::HashSet;

use thiserror::Error;

use crate::acset::{Acset, FULL, SIMPLE};
use crate::diagram::{StockFlowDiagram, StockId, SumVariableId, ValidationError, Violation};
use crate::full::FullStockFlow;

pub use glue::{compose_pair, compose_pair_with, disjoint_union, oapply, oapply_with, ComposeOptions, Composition, Merge};
pub use iso::{iso_check, iso_check_with_limit, OpenIso, DEFAULT_ISO_LIMIT};
pub use uwd::{Uwd, UwdBox};
pub(crate) use glue::{dedupe_names, pair_pattern};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error("leg {leg}: unknown {sort} `{name}`")]
    UnknownReference {
        leg: usize,
        sort: &'static str,
        name: String,
    },
    #[error("leg {leg}: {detail}")]
    InconsistentFoot { leg: usize, detail: String },
    #[error("feet do not match: {0}")]
    FootMismatch(String),
    #[error("name collision: {0}")]
    NameCollision(String),
    #[error("box `{name}` has {ports} ports but its filler has {legs} legs")]
    PortCountMismatch {
        name: String,
        ports: usize,
        legs: usize,
    },
    #[error("junction `{junction}`: {detail}")]
    JunctionFootMismatch { junction: String, detail: String },
    #[error("no filler for box `{0}`")]
    MissingFiller(String),
    #[error("unknown junction `{0}`")]
    UnknownJunction(String),
    #[error("outer junction `{0}` has no ports, so its foot is undetermined")]
    EmptyJunction(String),
    #[error("duplicate {0}")]
    DuplicateName(String),
    #[error("leg index {leg} out of range ({count} legs)")]
    LegOutOfRange { leg: usize, count: usize },
    #[error("cannot combine simple and full-fledged diagrams")]
    KindMismatch,
    #[error("instance too large for isomorphism search: {stocks} stocks (limit {limit})")]
    SizeLimitExceeded { stocks: usize, limit: usize },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Either flavour of stock-flow diagram.
#[derive(Debug, Clone, PartialEq)]
pub enum Diagram {
    Simple(StockFlowDiagram),
    Full(FullStockFlow),
}

impl Diagram {
    pub fn stock_names(&self) -> Vec<&str> {
        match self {
            Diagram::Simple(d) => d.stocks().iter().map(|s| s.name.as_str()).collect(),
            Diagram::Full(d) => d.stocks.iter().map(|s| s.name.as_str()).collect(),
        }
    }

    pub fn stock_count(&self) -> usize {
        match self {
            Diagram::Simple(d) => d.stocks().len(),
            Diagram::Full(d) => d.stocks.len(),
        }
    }

    pub fn flow_count(&self) -> usize {
        match self {
            Diagram::Simple(d) => d.flows().len(),
            Diagram::Full(d) => d.flows.len(),
        }
    }

    pub fn sum_variable_names(&self) -> Vec<&str> {
        match self {
            Diagram::Simple(_) => Vec::new(),
            Diagram::Full(d) => d.sum_variables.iter().map(|s| s.name.as_str()).collect(),
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Diagram::Full(_))
    }

    pub fn validate(&self) -> Vec<Violation> {
        match self {
            Diagram::Simple(d) => d.validate(),
            Diagram::Full(d) => d.validate(),
        }
    }

    pub fn params(&self) -> Vec<String> {
        match self {
            Diagram::Simple(d) => d.params(),
            Diagram::Full(d) => d.params(),
        }
    }

    /// True if every flow has both an upstream and a downstream stock.
    pub fn is_closed(&self) -> bool {
        match self {
            Diagram::Simple(_) => true,
            Diagram::Full(d) => !d.has_partial_flows(),
        }
    }

    pub(crate) fn to_acset(&self) -> Acset {
        match self {
            Diagram::Simple(d) => Acset::from(d),
            Diagram::Full(d) => Acset::from(d),
        }
    }

    pub(crate) fn from_acset(a: &Acset) -> Self {
        if a.is_full() {
            Diagram::Full(a.to_full())
        } else {
            Diagram::Simple(a.to_simple())
        }
    }

    pub(crate) fn schema(&self) -> &'static crate::acset::Schema {
        match self {
            Diagram::Simple(_) => &SIMPLE,
            Diagram::Full(_) => &FULL,
        }
    }
}

impl From<StockFlowDiagram> for Diagram {
    fn from(d: StockFlowDiagram) -> Self {
        Diagram::Simple(d)
    }
}

impl From<FullStockFlow> for Diagram {
    fn from(d: FullStockFlow) -> Self {
        Diagram::Full(d)
    }
}

/// An interface object. Element names are the default key for gluing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Foot {
    Simple {
        elements: Vec<String>,
    },
    Full {
        stocks: Vec<String>,
        sum_variables: Vec<String>,
        /// (stock index, sum-variable index) within this foot.
        sum_links: Vec<(usize, usize)>,
    },
}

impl Foot {
    pub fn simple<S: Into<String>>(elements: impl IntoIterator<Item = S>) -> Self {
        Foot::Simple {
            elements: elements.into_iter().map(Into::into).collect(),
        }
    }

    pub fn stocks(&self) -> &[String] {
        match self {
            Foot::Simple { elements } => elements,
            Foot::Full { stocks, .. } => stocks,
        }
    }

    pub fn sum_variables(&self) -> &[String] {
        match self {
            Foot::Simple { .. } => &[],
            Foot::Full { sum_variables, .. } => sum_variables,
        }
    }

    pub fn sum_links(&self) -> &[(usize, usize)] {
        match self {
            Foot::Simple { .. } => &[],
            Foot::Full { sum_links, .. } => sum_links,
        }
    }

    pub fn is_full(&self) -> bool {
        matches!(self, Foot::Full { .. })
    }

    /// Element counts per foot sort: stocks, sum variables, sum links.
    pub fn shape(&self) -> [usize; 3] {
        [self.stocks().len(), self.sum_variables().len(), self.sum_links().len()]
    }

    fn validate(&self, leg: usize) -> Result<(), ComposeError> {
        let mut seen = HashSet::new();
        for s in self.stocks() {
            if !seen.insert(s) {
                return Err(ComposeError::DuplicateName(format!("foot stock `{s}` in leg {leg}")));
            }
        }
        let mut seen = HashSet::new();
        for s in self.sum_variables() {
            if !seen.insert(s) {
                return Err(ComposeError::DuplicateName(format!(
                    "foot sum variable `{s}` in leg {leg}"
                )));
            }
        }
        let (ns, nv) = (self.stocks().len(), self.sum_variables().len());
        if let Some((s, v)) = self.sum_links().iter().find(|(s, v)| *s >= ns || *v >= nv) {
            return Err(ComposeError::InconsistentFoot {
                leg,
                detail: format!("foot sum link ({s}, {v}) has a missing endpoint"),
            });
        }
        Ok(())
    }
}

/// A foot together with its map into the diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Leg {
    pub foot: Foot,
    pub stock_map: Vec<StockId>,
    pub sum_variable_map: Vec<SumVariableId>,
    /// Index into the diagram's sum-link table for each foot sum link.
    pub sum_link_map: Vec<usize>,
}

impl Leg {
    /// Leg maps per foot sort, as plain indices.
    pub(crate) fn maps(&self) -> [Vec<usize>; 3] {
        [
            self.stock_map.iter().map(|s| s.0).collect(),
            self.sum_variable_map.iter().map(|s| s.0).collect(),
            self.sum_link_map.clone(),
        ]
    }
}

/// Name-based description of a leg, resolved by [`OpenDiagram::make`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FootSpec {
    pub foot: Foot,
    /// Diagram stock name for each foot stock.
    pub stock_targets: Vec<String>,
    /// Diagram sum-variable name for each foot sum variable.
    pub sum_variable_targets: Vec<String>,
}

impl FootSpec {
    /// A simple foot whose elements are named after the stocks they hit.
    pub fn stocks<S: AsRef<str>>(names: impl IntoIterator<Item = S>) -> Self {
        let names: Vec<String> = names.into_iter().map(|s| s.as_ref().to_string()).collect();
        FootSpec {
            foot: Foot::Simple { elements: names.clone() },
            stock_targets: names,
            sum_variable_targets: Vec::new(),
        }
    }

    /// A full foot named after its targets, with the given sum links
    /// (stock name, sum-variable name).
    pub fn full(stocks: &[&str], sum_variables: &[&str], sum_links: &[(&str, &str)]) -> Self {
        let pos = |list: &[&str], n: &str| list.iter().position(|x| *x == n).unwrap_or(usize::MAX);
        FootSpec {
            foot: Foot::Full {
                stocks: stocks.iter().map(|s| s.to_string()).collect(),
                sum_variables: sum_variables.iter().map(|s| s.to_string()).collect(),
                sum_links: sum_links
                    .iter()
                    .map(|(s, v)| (pos(stocks, s), pos(sum_variables, v)))
                    .collect(),
            },
            stock_targets: stocks.iter().map(|s| s.to_string()).collect(),
            sum_variable_targets: sum_variables.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Explicit foot-element to stock mapping for a simple foot.
    pub fn mapped(pairs: &[(&str, &str)]) -> Self {
        FootSpec {
            foot: Foot::simple(pairs.iter().map(|p| p.0)),
            stock_targets: pairs.iter().map(|p| p.1.to_string()).collect(),
            sum_variable_targets: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpenDiagram {
    pub inner: Diagram,
    pub legs: Vec<Leg>,
}

impl OpenDiagram {
    /// Checks leg maps against the inner diagram.
    pub fn new(inner: Diagram, legs: Vec<Leg>) -> Result<Self, ComposeError> {
        let d = OpenDiagram { inner, legs };
        d.validate()?;
        Ok(d)
    }

    /// A diagram with no legs.
    pub fn closed(inner: impl Into<Diagram>) -> Self {
        OpenDiagram {
            inner: inner.into(),
            legs: Vec::new(),
        }
    }

    /// Resolves name-based feet against `inner`.
    pub fn make(inner: impl Into<Diagram>, feet: Vec<FootSpec>) -> Result<Self, ComposeError> {
        let inner = inner.into();
        let stock_names = inner.stock_names();
        let sum_names = inner.sum_variable_names();
        let mut legs = Vec::with_capacity(feet.len());
        for (k, spec) in feet.into_iter().enumerate() {
            if spec.foot.is_full() && !inner.is_full() {
                return Err(ComposeError::InconsistentFoot {
                    leg: k,
                    detail: "full foot on a simple diagram".into(),
                });
            }
            if spec.stock_targets.len() != spec.foot.stocks().len()
                || spec.sum_variable_targets.len() != spec.foot.sum_variables().len()
            {
                return Err(ComposeError::InconsistentFoot {
                    leg: k,
                    detail: "map length differs from foot size".into(),
                });
            }
            let stock_map = spec
                .stock_targets
                .iter()
                .map(|n| {
                    stock_names.iter().position(|s| s == n).map(StockId).ok_or_else(|| {
                        ComposeError::UnknownReference { leg: k, sort: "stock", name: n.clone() }
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let sum_variable_map = spec
                .sum_variable_targets
                .iter()
                .map(|n| {
                    sum_names.iter().position(|s| s == n).map(SumVariableId).ok_or_else(|| {
                        ComposeError::UnknownReference {
                            leg: k,
                            sort: "sum variable",
                            name: n.clone(),
                        }
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let sum_link_map = match &inner {
                Diagram::Full(d) => resolve_sum_links(d, &spec.foot, &stock_map, &sum_variable_map, k)?,
                Diagram::Simple(_) => Vec::new(),
            };
            legs.push(Leg {
                foot: spec.foot,
                stock_map,
                sum_variable_map,
                sum_link_map,
            });
        }
        OpenDiagram::new(inner, legs)
    }

    pub fn validate(&self) -> Result<(), ComposeError> {
        let v = self.inner.validate();
        if !v.is_empty() {
            return Err(ValidationError { violations: v }.into());
        }
        let acset = self.inner.to_acset();
        let schema = acset.schema;
        for (k, leg) in self.legs.iter().enumerate() {
            leg.foot.validate(k)?;
            if leg.foot.is_full() && !self.inner.is_full() {
                return Err(ComposeError::InconsistentFoot {
                    leg: k,
                    detail: "full foot on a simple diagram".into(),
                });
            }
            let maps = leg.maps();
            let shape = leg.foot.shape();
            for (fo, map) in maps.iter().enumerate() {
                if map.len() != shape[fo] {
                    return Err(ComposeError::InconsistentFoot {
                        leg: k,
                        detail: "map length differs from foot size".into(),
                    });
                }
                if map.is_empty() {
                    continue;
                }
                let Some(&obj) = schema.foot_objects.get(fo) else {
                    return Err(ComposeError::InconsistentFoot {
                        leg: k,
                        detail: "diagram has no sum variables to map into".into(),
                    });
                };
                if let Some(&bad) = map.iter().find(|&&x| x >= acset.parts[obj]) {
                    return Err(ComposeError::UnknownReference {
                        leg: k,
                        sort: schema.objects[obj],
                        name: bad.to_string(),
                    });
                }
            }
            // sum-link endpoints must commute with the leg
            if let Diagram::Full(d) = &self.inner {
                for (i, &(s, v)) in leg.foot.sum_links().iter().enumerate() {
                    let link = d.sum_links[leg.sum_link_map[i]];
                    if link.src != leg.stock_map[s] || link.tgt != leg.sum_variable_map[v] {
                        return Err(ComposeError::InconsistentFoot {
                            leg: k,
                            detail: format!("foot sum link {i} is not sent to a sum link with matching endpoints"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Identity open diagram on a set of stock names: no flows, one leg per
    /// requested copy, each the identity foot.
    pub fn identity(stocks: &[&str], legs: usize) -> Self {
        let p = crate::diagram::PrimitiveStockFlow::build(stocks, &[], &[])
            .expect("distinct stock names");
        let d = StockFlowDiagram::new(p, Vec::new()).expect("no flows");
        let specs = (0..legs).map(|_| FootSpec::stocks(stocks.iter().copied())).collect();
        OpenDiagram::make(d, specs).expect("identity legs resolve")
    }

    pub fn stock_count(&self) -> usize {
        self.inner.stock_count()
    }
}

fn resolve_sum_links(
    d: &FullStockFlow,
    foot: &Foot,
    stock_map: &[StockId],
    sum_map: &[SumVariableId],
    leg: usize,
) -> Result<Vec<usize>, ComposeError> {
    let mut used = vec![false; d.sum_links.len()];
    let mut out = Vec::new();
    for &(s, v) in foot.sum_links() {
        let (Some(&ts), Some(&tv)) = (stock_map.get(s), sum_map.get(v)) else {
            return Err(ComposeError::InconsistentFoot {
                leg,
                detail: format!("foot sum link ({s}, {v}) has a missing endpoint"),
            });
        };
        let pos = d
            .sum_links
            .iter()
            .enumerate()
            .find(|(i, l)| !used[*i] && l.src == ts && l.tgt == tv)
            .or_else(|| d.sum_links.iter().enumerate().find(|(_, l)| l.src == ts && l.tgt == tv))
            .map(|(i, _)| i)
            .ok_or_else(|| ComposeError::InconsistentFoot {
                leg,
                detail: format!(
                    "no sum link from `{}` to `{}` in the diagram",
                    d.stocks[ts.0].name, d.sum_variables[tv.0].name
                ),
            })?;
        used[pos] = true;
        out.push(pos);
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::diagram::PrimitiveStockFlow;
    use crate::expr::Expr;

    pub(crate) fn sir() -> StockFlowDiagram {
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
    fn two_legged_sir() {
        let od = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S"]), FootSpec::stocks(["R"])]).unwrap();
        assert_eq!(od.legs.len(), 2);
        assert_eq!(od.legs[1].stock_map, vec![StockId(2)]);
    }

    #[test]
    fn unknown_stock_in_foot() {
        let err = OpenDiagram::make(sir(), vec![FootSpec::stocks(["Q"])]).unwrap_err();
        assert!(matches!(err, ComposeError::UnknownReference { leg: 0, .. }));
    }

    #[test]
    fn full_foot_must_commute() {
        let d = FullStockFlow::builder()
            .stocks(["A", "B"])
            .sum_variable("N")
            .sum_link("A", "N")
            .variable("v", Expr::Const(1.0))
            .flow_between("f", Some("A"), Some("B"), "v")
            .build()
            .unwrap();
        assert!(OpenDiagram::make(d.clone(), vec![FootSpec::full(&["A"], &["N"], &[("A", "N")])]).is_ok());
        let err = OpenDiagram::make(d, vec![FootSpec::full(&["B"], &["N"], &[("B", "N")])]).unwrap_err();
        assert!(matches!(err, ComposeError::InconsistentFoot { .. }));
    }
}
