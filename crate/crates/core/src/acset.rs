//! Schema-generic view of diagrams as finite categorical-database instances.
//!
//! Both diagram flavours are converted to an [`Acset`]: a cardinality per
//! object, a function table per generating morphism, optional names, and one
//! expression per element of the attribute object. Gluing (coproduct then
//! quotient) and isomorphism search are written once against this view.

use crate::diagram::{
    Flow, FlowId, Link, PrimitiveStockFlow, Stock, StockFlowDiagram, StockId, SumVariableId,
    VariableId,
};
use crate::expr::Expr;
use crate::full::{FullStockFlow, Inflow, Named, Outflow, SumLink, SumVariableLink, VariableLink};

#[derive(Debug)]
pub(crate) struct Schema {
    pub objects: &'static [&'static str],
    /// (name, domain, codomain)
    pub homs: &'static [(&'static str, usize, usize)],
    pub named: &'static [usize],
    pub attr_object: usize,
    /// Hom whose fibres over the attribute object give `Link` slot order.
    pub link_arg: usize,
    /// Hom whose fibres give `SumVar` slot order.
    pub sum_arg: Option<usize>,
    /// Objects a foot can map into: stocks, sum variables, sum links.
    pub foot_objects: &'static [usize],
    /// Assignment order for isomorphism search: codomains before domains.
    pub search_order: &'static [usize],
}

pub(crate) static SIMPLE: Schema = Schema {
    objects: &["stock", "flow", "link"],
    homs: &[("up", 1, 0), ("down", 1, 0), ("src", 2, 0), ("tgt", 2, 1)],
    named: &[0, 1],
    attr_object: 1,
    link_arg: 3,
    sum_arg: None,
    foot_objects: &[0],
    search_order: &[0, 1, 2],
};

pub(crate) static FULL: Schema = Schema {
    objects: &[
        "stock",
        "flow",
        "variable",
        "sum variable",
        "inflow",
        "outflow",
        "variable link",
        "sum variable link",
        "sum link",
    ],
    homs: &[
        ("is", 4, 0),
        ("if", 4, 1),
        ("os", 5, 0),
        ("of", 5, 1),
        ("fv", 1, 2),
        ("lsrc", 6, 0),
        ("lv", 6, 2),
        ("slsrc", 7, 3),
        ("slv", 7, 2),
        ("sumsrc", 8, 0),
        ("sumtgt", 8, 3),
    ],
    named: &[0, 1, 2, 3],
    attr_object: 2,
    link_arg: 6,
    sum_arg: Some(8),
    foot_objects: &[0, 3, 8],
    search_order: &[0, 3, 2, 1, 4, 5, 6, 7, 8],
};

#[derive(Debug, Clone)]
pub(crate) struct Acset {
    pub schema: &'static Schema,
    pub parts: Vec<usize>,
    pub homs: Vec<Vec<usize>>,
    /// Per object; empty for unnamed objects.
    pub names: Vec<Vec<String>>,
    pub attrs: Vec<Expr>,
}

impl Acset {
    pub fn empty(schema: &'static Schema) -> Self {
        Acset {
            schema,
            parts: vec![0; schema.objects.len()],
            homs: vec![Vec::new(); schema.homs.len()],
            names: vec![Vec::new(); schema.objects.len()],
            attrs: Vec::new(),
        }
    }

    pub fn is_full(&self) -> bool {
        std::ptr::eq(self.schema, &FULL)
    }

    /// Elements of the hom's domain lying over `target`, in table order.
    pub fn fibre(&self, hom: usize, target: usize) -> Vec<usize> {
        self.homs[hom]
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == target)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn in_degree(&self, hom: usize) -> Vec<usize> {
        let cod = self.schema.homs[hom].2;
        let mut d = vec![0; self.parts[cod]];
        for &t in &self.homs[hom] {
            d[t] += 1;
        }
        d
    }

    /// Disjoint union. Returns the offset of each summand in each object.
    pub fn coproduct(schema: &'static Schema, summands: &[&Acset]) -> (Acset, Vec<Vec<usize>>) {
        let mut out = Acset::empty(schema);
        let mut offsets = Vec::with_capacity(summands.len());
        for s in summands {
            debug_assert!(std::ptr::eq(s.schema, schema));
            offsets.push(out.parts.clone());
            for (h, &(_, _, cod)) in schema.homs.iter().enumerate() {
                let shift = out.parts[cod];
                out.homs[h].extend(s.homs[h].iter().map(|&x| x + shift));
            }
            for o in 0..schema.objects.len() {
                out.parts[o] += s.parts[o];
                out.names[o].extend(s.names[o].iter().cloned());
            }
            out.attrs.extend(s.attrs.iter().cloned());
        }
        (out, offsets)
    }

    /// Quotients by the given representative map per object
    /// (`rep[o][x]` = smallest element of x's class). Elements are
    /// re-densified in representative order. Returns the new instance and the
    /// old-to-new map per object, or the name of a hom that fails to descend.
    pub fn quotient(&self, rep: &[Vec<usize>]) -> Result<(Acset, Vec<Vec<usize>>), &'static str> {
        let schema = self.schema;
        let mut maps = Vec::with_capacity(self.parts.len());
        let mut new_parts = Vec::with_capacity(self.parts.len());
        for (o, &n) in self.parts.iter().enumerate() {
            let mut map = vec![usize::MAX; n];
            let mut next = 0;
            for x in 0..n {
                let r = rep[o][x];
                if r == x {
                    map[x] = next;
                    next += 1;
                }
            }
            for x in 0..n {
                map[x] = map[rep[o][x]];
            }
            maps.push(map);
            new_parts.push(next);
        }
        let mut out = Acset::empty(schema);
        out.parts = new_parts;
        for (h, &(name, dom, cod)) in schema.homs.iter().enumerate() {
            let mut table = vec![usize::MAX; out.parts[dom]];
            for x in 0..self.parts[dom] {
                let image = maps[cod][self.homs[h][x]];
                let slot = &mut table[maps[dom][x]];
                if *slot == usize::MAX {
                    *slot = image;
                } else if *slot != image {
                    return Err(name);
                }
            }
            out.homs[h] = table;
        }
        for &o in schema.named {
            let mut groups: Vec<Vec<&str>> = vec![Vec::new(); out.parts[o]];
            for x in 0..self.parts[o] {
                let g = &mut groups[maps[o][x]];
                let n = self.names[o][x].as_str();
                if !g.contains(&n) {
                    g.push(n);
                }
            }
            out.names[o] = groups.into_iter().map(|g| g.join("≡")).collect();
        }
        let a = schema.attr_object;
        let mut attrs: Vec<Option<Expr>> = vec![None; out.parts[a]];
        for x in 0..self.parts[a] {
            let slot = &mut attrs[maps[a][x]];
            if slot.is_none() {
                *slot = Some(self.attrs[x].clone());
            }
        }
        out.attrs = attrs.into_iter().map(|e| e.unwrap_or(Expr::Const(0.0))).collect();
        Ok((out, maps))
    }
}

impl From<&StockFlowDiagram> for Acset {
    fn from(d: &StockFlowDiagram) -> Self {
        let p = &d.primitive;
        Acset {
            schema: &SIMPLE,
            parts: vec![p.stocks.len(), p.flows.len(), p.links.len()],
            homs: vec![
                p.flows.iter().map(|f| f.up.0).collect(),
                p.flows.iter().map(|f| f.down.0).collect(),
                p.links.iter().map(|l| l.src.0).collect(),
                p.links.iter().map(|l| l.tgt.0).collect(),
            ],
            names: vec![
                p.stocks.iter().map(|s| s.name.clone()).collect(),
                p.flows.iter().map(|f| f.name.clone()).collect(),
                Vec::new(),
            ],
            attrs: d.flow_fn.clone(),
        }
    }
}

impl From<&FullStockFlow> for Acset {
    fn from(d: &FullStockFlow) -> Self {
        Acset {
            schema: &FULL,
            parts: vec![
                d.stocks.len(),
                d.flows.len(),
                d.variables.len(),
                d.sum_variables.len(),
                d.inflows.len(),
                d.outflows.len(),
                d.variable_links.len(),
                d.sum_variable_links.len(),
                d.sum_links.len(),
            ],
            homs: vec![
                d.inflows.iter().map(|r| r.stock.0).collect(),
                d.inflows.iter().map(|r| r.flow.0).collect(),
                d.outflows.iter().map(|r| r.stock.0).collect(),
                d.outflows.iter().map(|r| r.flow.0).collect(),
                d.fv.iter().map(|v| v.0).collect(),
                d.variable_links.iter().map(|r| r.src.0).collect(),
                d.variable_links.iter().map(|r| r.tgt.0).collect(),
                d.sum_variable_links.iter().map(|r| r.src.0).collect(),
                d.sum_variable_links.iter().map(|r| r.tgt.0).collect(),
                d.sum_links.iter().map(|r| r.src.0).collect(),
                d.sum_links.iter().map(|r| r.tgt.0).collect(),
            ],
            names: vec![
                d.stocks.iter().map(|s| s.name.clone()).collect(),
                d.flows.iter().map(|s| s.name.clone()).collect(),
                d.variables.iter().map(|s| s.name.clone()).collect(),
                d.sum_variables.iter().map(|s| s.name.clone()).collect(),
                Vec::new(),
                Vec::new(),
                Vec::new(),
                Vec::new(),
                Vec::new(),
            ],
            attrs: d.aux_fn.clone(),
        }
    }
}

impl Acset {
    pub fn to_simple(&self) -> StockFlowDiagram {
        debug_assert!(std::ptr::eq(self.schema, &SIMPLE));
        StockFlowDiagram {
            primitive: PrimitiveStockFlow {
                stocks: self.names[0].iter().map(|n| Stock { name: n.clone() }).collect(),
                flows: (0..self.parts[1])
                    .map(|f| Flow {
                        name: self.names[1][f].clone(),
                        up: StockId(self.homs[0][f]),
                        down: StockId(self.homs[1][f]),
                    })
                    .collect(),
                links: (0..self.parts[2])
                    .map(|l| Link {
                        src: StockId(self.homs[2][l]),
                        tgt: FlowId(self.homs[3][l]),
                    })
                    .collect(),
            },
            flow_fn: self.attrs.clone(),
        }
    }

    pub fn to_full(&self) -> FullStockFlow {
        debug_assert!(std::ptr::eq(self.schema, &FULL));
        let h = &self.homs;
        let named = |o: usize| self.names[o].iter().map(Named::new).collect::<Vec<_>>();
        FullStockFlow {
            stocks: self.names[0].iter().map(|n| Stock { name: n.clone() }).collect(),
            flows: named(1),
            variables: named(2),
            sum_variables: named(3),
            inflows: (0..self.parts[4])
                .map(|i| Inflow { stock: StockId(h[0][i]), flow: FlowId(h[1][i]) })
                .collect(),
            outflows: (0..self.parts[5])
                .map(|i| Outflow { stock: StockId(h[2][i]), flow: FlowId(h[3][i]) })
                .collect(),
            fv: h[4].iter().map(|&v| VariableId(v)).collect(),
            variable_links: (0..self.parts[6])
                .map(|i| VariableLink { src: StockId(h[5][i]), tgt: VariableId(h[6][i]) })
                .collect(),
            sum_variable_links: (0..self.parts[7])
                .map(|i| SumVariableLink {
                    src: SumVariableId(h[7][i]),
                    tgt: VariableId(h[8][i]),
                })
                .collect(),
            sum_links: (0..self.parts[8])
                .map(|i| SumLink { src: StockId(h[9][i]), tgt: SumVariableId(h[10][i]) })
                .collect(),
            aux_fn: self.attrs.clone(),
        }
    }
}

/// Replaces every slot by 0 so expressions can be compared up to slot order.
pub(crate) fn shape(e: &Expr) -> Expr {
    e.map_links(&|_| 0).map_sum_vars(&|_| 0)
}

/// Searches for an isomorphism `a -> b`, with some elements pinned in
/// advance (`fixed[o]` lists `(a_elem, b_elem)`). Returns the map per object.
pub(crate) fn find_iso(a: &Acset, b: &Acset, fixed: &[Vec<(usize, usize)>]) -> Option<Vec<Vec<usize>>> {
    if !std::ptr::eq(a.schema, b.schema) || a.parts != b.parts {
        return None;
    }
    let schema = a.schema;
    let nobj = schema.objects.len();
    let mut pinned: Vec<Vec<Option<usize>>> = a.parts.iter().map(|&n| vec![None; n]).collect();
    for (o, pairs) in fixed.iter().enumerate() {
        for &(x, y) in pairs {
            match pinned[o][x] {
                Some(prev) if prev != y => return None,
                _ => pinned[o][x] = Some(y),
            }
        }
    }
    for (o, pins) in pinned.iter().enumerate() {
        let mut seen = vec![false; a.parts[o]];
        for y in pins.iter().flatten() {
            if std::mem::replace(&mut seen[*y], true) {
                return None;
            }
        }
    }

    // Per-element signatures: preimage counts along every hom into the object.
    let signature = |c: &Acset, o: usize| -> Vec<Vec<usize>> {
        let mut sig = vec![Vec::new(); c.parts[o]];
        for (h, &(_, _, cod)) in schema.homs.iter().enumerate() {
            if cod == o {
                for (x, d) in c.in_degree(h).into_iter().enumerate() {
                    sig[x].push(d);
                }
            }
        }
        sig
    };
    let sig_a: Vec<_> = (0..nobj).map(|o| signature(a, o)).collect();
    let sig_b: Vec<_> = (0..nobj).map(|o| signature(b, o)).collect();
    let shapes_a: Vec<Expr> = a.attrs.iter().map(shape).collect();
    let shapes_b: Vec<Expr> = b.attrs.iter().map(shape).collect();

    let order: Vec<(usize, usize)> = schema
        .search_order
        .iter()
        .flat_map(|&o| (0..a.parts[o]).map(move |x| (o, x)))
        .collect();

    struct Search<'s> {
        a: &'s Acset,
        b: &'s Acset,
        order: Vec<(usize, usize)>,
        pinned: Vec<Vec<Option<usize>>>,
        map: Vec<Vec<usize>>,
        used: Vec<Vec<bool>>,
        sig_a: Vec<Vec<Vec<usize>>>,
        sig_b: Vec<Vec<Vec<usize>>>,
        shapes_a: Vec<Expr>,
        shapes_b: Vec<Expr>,
    }

    impl Search<'_> {
        fn consistent(&self, o: usize, x: usize, y: usize) -> bool {
            if self.sig_a[o][x] != self.sig_b[o][y] {
                return false;
            }
            let schema = self.a.schema;
            if o == schema.attr_object && !self.shapes_a[x].bit_eq(&self.shapes_b[y]) {
                return false;
            }
            for (h, &(_, dom, cod)) in schema.homs.iter().enumerate() {
                if dom == o {
                    let ax = self.a.homs[h][x];
                    let mapped = self.map[cod][ax];
                    if mapped != usize::MAX && mapped != self.b.homs[h][y] {
                        return false;
                    }
                }
            }
            true
        }

        fn attrs_match(&self) -> bool {
            let schema = self.a.schema;
            let ao = schema.attr_object;
            for x in 0..self.a.parts[ao] {
                let y = self.map[ao][x];
                let remap = |hom: usize| -> Vec<usize> {
                    let bf = self.b.fibre(hom, y);
                    let dom = schema.homs[hom].1;
                    self.a
                        .fibre(hom, x)
                        .into_iter()
                        .map(|l| {
                            let target = self.map[dom][l];
                            bf.iter().position(|&m| m == target).unwrap_or(usize::MAX)
                        })
                        .collect()
                };
                let links = remap(schema.link_arg);
                let mut e = self.a.attrs[x].map_links(&|k| links.get(k).copied().unwrap_or(k));
                if let Some(sh) = schema.sum_arg {
                    let sums = remap(sh);
                    e = e.map_sum_vars(&|k| sums.get(k).copied().unwrap_or(k));
                }
                if !e.bit_eq(&self.b.attrs[y]) {
                    return false;
                }
            }
            true
        }

        fn run(&mut self, depth: usize) -> bool {
            if depth == self.order.len() {
                return self.attrs_match();
            }
            let (o, x) = self.order[depth];
            let candidates: Vec<usize> = match self.pinned[o][x] {
                Some(y) => vec![y],
                None => (0..self.b.parts[o]).collect(),
            };
            for y in candidates {
                if self.used[o][y] || !self.consistent(o, x, y) {
                    continue;
                }
                // a pinned target may only be taken by its own source
                if self.pinned[o][x].is_none() && self.pinned[o].contains(&Some(y)) {
                    continue;
                }
                self.map[o][x] = y;
                self.used[o][y] = true;
                if self.run(depth + 1) {
                    return true;
                }
                self.map[o][x] = usize::MAX;
                self.used[o][y] = false;
            }
            false
        }
    }

    let mut s = Search {
        a,
        b,
        order,
        pinned,
        map: a.parts.iter().map(|&n| vec![usize::MAX; n]).collect(),
        used: a.parts.iter().map(|&n| vec![false; n]).collect(),
        sig_a,
        sig_b,
        shapes_a,
        shapes_b,
    };
    if s.run(0) {
        Some(s.map)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::PrimitiveStockFlow;

    fn sir() -> StockFlowDiagram {
        let p = PrimitiveStockFlow::build(
            &["S", "I", "R"],
            &[("inf", "S", "I"), ("rec", "I", "R")],
            &[("S", "inf"), ("I", "inf"), ("I", "rec")],
        )
        .unwrap();
        StockFlowDiagram::new(
            p,
            vec![Expr::link(0).mul(Expr::link(1)), Expr::link(0).div(Expr::param("t"))],
        )
        .unwrap()
    }

    #[test]
    fn simple_round_trip() {
        let d = sir();
        assert_eq!(Acset::from(&d).to_simple(), d);
    }

    #[test]
    fn self_iso_is_identity_when_pinned() {
        let a = Acset::from(&sir());
        let fixed = vec![vec![(0, 0), (1, 1), (2, 2)], vec![], vec![]];
        let m = find_iso(&a, &a, &fixed).unwrap();
        assert_eq!(m[0], vec![0, 1, 2]);
        assert_eq!(m[2], vec![0, 1, 2]);
    }

    #[test]
    fn link_order_permutation_reindexes_slots() {
        let d = sir();
        let mut e = d.clone();
        // swap the two links into `inf`; the expression must swap slots
        e.primitive.links.swap(0, 1);
        e.flow_fn[0] = Expr::link(1).mul(Expr::link(0));
        assert!(find_iso(&Acset::from(&d), &Acset::from(&e), &[vec![], vec![], vec![]]).is_some());
        // without the slot swap the product is no longer the same tree
        e.flow_fn[0] = Expr::link(0).mul(Expr::link(1));
        let fixed = vec![vec![(0, 0), (1, 1), (2, 2)], vec![], vec![]];
        assert!(find_iso(&Acset::from(&d), &Acset::from(&e), &fixed).is_none());
    }

    #[test]
    fn quotient_merges_and_joins_names() {
        let a = Acset::from(&sir());
        let (sum, _) = Acset::coproduct(&SIMPLE, &[&a, &a]);
        let mut rep: Vec<Vec<usize>> = sum.parts.iter().map(|&n| (0..n).collect()).collect();
        rep[0][3] = 0; // S ~ S'
        let (q, maps) = sum.quotient(&rep).unwrap();
        assert_eq!(q.parts, vec![5, 4, 6]);
        assert_eq!(maps[0], vec![0, 1, 2, 0, 3, 4]);
        assert_eq!(q.names[0][0], "S");
        assert_eq!(q.homs[2][3], 0);
    }
}
