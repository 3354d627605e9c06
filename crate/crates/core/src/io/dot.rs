//! Graphviz export.
//!
//! Stocks are boxes, each flow is a valve node with a bold edge in from its
//! upstream stock and out to its downstream stock, and links are blue edges.
//! Auxiliary and sum variables of full diagrams are ellipses.

use std::fmt::Write;

use crate::diagram::StockFlowDiagram;
use crate::full::FullStockFlow;
use crate::open::Diagram;

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' | '\\' => {
                out.push('\\');
                out.push(c);
            }
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

const LINK: &str = "[color=blue, style=dashed]";
const PIPE: &str = "[style=bold, arrowhead=normal]";

fn header() -> String {
    "digraph stockflow {\n".to_string()
}

pub fn export_dot(d: &Diagram) -> String {
    match d {
        Diagram::Simple(d) => export_simple(d),
        Diagram::Full(d) => export_full(d),
    }
}

fn export_simple(d: &StockFlowDiagram) -> String {
    let p = &d.primitive;
    if p.stocks.is_empty() && p.flows.is_empty() {
        return "digraph stockflow {\n}\n".into();
    }
    let mut out = header();
    out.push_str("  rankdir=LR;\n");
    for (i, s) in p.stocks.iter().enumerate() {
        let _ = writeln!(out, "  s{i} [shape=box, label={}];", quote(&s.name));
    }
    for (i, f) in p.flows.iter().enumerate() {
        let _ = writeln!(out, "  f{i} [shape=circle, width=0.25, label=\"\", xlabel={}];", quote(&f.name));
    }
    for (i, f) in p.flows.iter().enumerate() {
        let _ = writeln!(out, "  s{} -> f{i} {PIPE};", f.up.0);
        let _ = writeln!(out, "  f{i} -> s{} {PIPE};", f.down.0);
    }
    for l in &p.links {
        let _ = writeln!(out, "  s{} -> f{} {LINK};", l.src.0, l.tgt.0);
    }
    out.push_str("}\n");
    out
}

fn export_full(d: &FullStockFlow) -> String {
    if d.stocks.is_empty() && d.flows.is_empty() && d.variables.is_empty() && d.sum_variables.is_empty() {
        return "digraph stockflow {\n}\n".into();
    }
    let mut out = header();
    out.push_str("  rankdir=LR;\n");
    for (i, s) in d.stocks.iter().enumerate() {
        let _ = writeln!(out, "  s{i} [shape=box, label={}];", quote(&s.name));
    }
    for (i, f) in d.flows.iter().enumerate() {
        let _ = writeln!(out, "  f{i} [shape=circle, width=0.25, label=\"\", xlabel={}];", quote(&f.name));
    }
    for (i, v) in d.variables.iter().enumerate() {
        let _ = writeln!(out, "  v{i} [shape=ellipse, label={}];", quote(&v.name));
    }
    for (i, v) in d.sum_variables.iter().enumerate() {
        let _ = writeln!(out, "  sv{i} [shape=ellipse, peripheries=2, label={}];", quote(&v.name));
    }
    // partial flows get an invisible cloud on their open side
    for f in 0..d.flows.len() {
        let id = crate::diagram::FlowId(f);
        match d.upstream(id) {
            Some(s) => {
                let _ = writeln!(out, "  s{} -> f{f} {PIPE};", s.0);
            }
            None => {
                let _ = writeln!(out, "  src{f} [shape=none, label=\"\"];\n  src{f} -> f{f} {PIPE};");
            }
        }
        match d.downstream(id) {
            Some(s) => {
                let _ = writeln!(out, "  f{f} -> s{} {PIPE};", s.0);
            }
            None => {
                let _ = writeln!(out, "  sink{f} [shape=none, label=\"\"];\n  f{f} -> sink{f} {PIPE};");
            }
        }
    }
    for (f, v) in d.fv.iter().enumerate() {
        let _ = writeln!(out, "  v{} -> f{f} {LINK};", v.0);
    }
    for l in &d.variable_links {
        let _ = writeln!(out, "  s{} -> v{} {LINK};", l.src.0, l.tgt.0);
    }
    for l in &d.sum_variable_links {
        let _ = writeln!(out, "  sv{} -> v{} {LINK};", l.src.0, l.tgt.0);
    }
    for l in &d.sum_links {
        let _ = writeln!(out, "  s{} -> sv{} {LINK};", l.src.0, l.tgt.0);
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::PrimitiveStockFlow;
    use crate::expr::Expr;
    use crate::open::tests::sir;

    #[test]
    fn sir_counts() {
        let d = sir();
        let dot = export_dot(&Diagram::Simple(d.clone()));
        assert_eq!(dot.matches("shape=box").count(), d.stocks().len());
        assert_eq!(dot.matches("shape=circle").count(), d.flows().len());
        assert_eq!(dot.matches("color=blue").count(), d.links().len());
        assert_eq!(dot, export_dot(&Diagram::Simple(d)));
    }

    #[test]
    fn empty_diagram() {
        let p = PrimitiveStockFlow::default();
        let d = StockFlowDiagram::new(p, vec![]).unwrap();
        assert_eq!(export_dot(&Diagram::Simple(d)), "digraph stockflow {\n}\n");
    }

    #[test]
    fn sum_variable_is_ellipse() {
        let d = FullStockFlow::builder()
            .stocks(["S", "I"])
            .sum_variable("Total Population")
            .sum_link("S", "Total Population")
            .sum_link("I", "Total Population")
            .variable("inf", Expr::sum_var(0))
            .sum_variable_link("Total Population", "inf")
            .flow_between("i", Some("S"), Some("I"), "inf")
            .build()
            .unwrap();
        let dot = export_dot(&Diagram::Full(d));
        assert!(dot.contains("shape=ellipse, peripheries=2, label=\"Total Population\""), "{dot}");
    }

    #[test]
    fn quotes_are_escaped() {
        assert_eq!(quote("a\"b\\c"), "\"a\\\"b\\\\c\"");
    }
}
