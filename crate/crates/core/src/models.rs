//! Built-in model library.
//!
//! # COVID-19 composite
//!
//! Three simple open diagrams glued along shared stocks:
//!
//! * `seirh` — stocks S, E, I, R, HICU, HNICU; legs {S}, {E}, {I}, {R}.
//! * `vaccination` — stocks S, E, I, VP, VF; legs {S}, {E}, {I}.
//! * `asymptomatic` — stocks E, R, IA; legs {E}, {R}.
//!
//! Flow functions, one term of the composite equations each:
//!
//! | component    | flow        | from → to      | rate                        |
//! |--------------|-------------|----------------|-----------------------------|
//! | seirh        | `inf`       | S → E          | β·S·I/N                     |
//! | seirh        | `inc`       | E → I          | r_i·E                       |
//! | seirh        | `rec`       | I → R          | (1 − f_H)·I/t_r             |
//! | seirh        | `hicu`      | I → HICU       | f_H·f_ICU·I/t_r             |
//! | seirh        | `hnicu`     | I → HNICU      | f_H·(1 − f_ICU)·I/t_r       |
//! | seirh        | `icu_out`   | HICU → HNICU   | HICU/t_ICU                  |
//! | seirh        | `discharge` | HNICU → R      | HNICU/t_H                   |
//! | seirh        | `wane`      | R → S          | R/t_w                       |
//! | vaccination  | `vacc_s`    | S → VP         | r_v·S                       |
//! | vaccination  | `vacc_p`    | VP → VF        | r_v·VP                      |
//! | vaccination  | `wane_f`    | VF → VP        | VF/t_w                      |
//! | vaccination  | `wane_p`    | VP → S         | VP/t_w                      |
//! | vaccination  | `inf_p`     | VP → E         | β·(1 − e_p)·I·VP/N          |
//! | vaccination  | `inf_f`     | VF → E         | β·(1 − e_f)·I·VF/N          |
//! | asymptomatic | `inc_a`     | E → IA         | r_ia·E                      |
//! | asymptomatic | `rec_a`     | IA → R         | IA/t_r                      |
//!
//! The vaccination component needs I for its infection terms, so I is part
//! of its interface. `N` is a parameter. Parameter values in the reference
//! scenarios are chosen for this library (population 10^6) and are not taken
//! from any published calibration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::diagram::{PrimitiveStockFlow, StockFlowDiagram};
use crate::expr::{Expr, Params};
use crate::full::FullStockFlow;
use crate::integrate::{Method, Scenario};
use crate::io::{save, Document, IoError, MorphismSpec};
use crate::morphism::{DiagramMorphism, SortCounts};
use crate::diagram::{FlowId, LinkId, StockId};
use crate::open::{oapply, FootSpec, OpenDiagram, Uwd};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("unknown model `{0}`")]
    UnknownModel(String),
}

fn p(name: &str) -> Expr {
    Expr::param(name)
}

fn c(x: f64) -> Expr {
    Expr::Const(x)
}

fn l(k: usize) -> Expr {
    Expr::link(k)
}

fn simple(stocks: &[&str], flows: &[(&str, &str, &str)], links: &[(&str, &str)], fns: Vec<(&str, Expr)>) -> StockFlowDiagram {
    let prim = PrimitiveStockFlow::build(stocks, flows, links).expect("catalog primitive is valid");
    StockFlowDiagram::build(prim, fns.into_iter().map(|(n, e)| (n.to_string(), e))).expect("catalog diagram is valid")
}

/// The SIR model with waning immunity, as a full-fledged diagram with a
/// `Total Population` sum variable. Variables depend only on stocks and sum
/// variables, so `Force of Infection` and `Infection` are written out in
/// terms of them rather than in terms of each other.
pub fn sir() -> FullStockFlow {
    FullStockFlow::builder()
        .stocks(["Susceptible", "Infective", "Recovered"])
        .sum_variable("Total Population")
        .sum_link("Susceptible", "Total Population")
        .sum_link("Infective", "Total Population")
        .sum_link("Recovered", "Total Population")
        .variable("Fractional Prevalence", l(0).div(Expr::sum_var(0)))
        .variable_link("Infective", "Fractional Prevalence")
        .sum_variable_link("Total Population", "Fractional Prevalence")
        .variable("Force of Infection", p("beta").mul(l(0)).div(Expr::sum_var(0)))
        .variable_link("Infective", "Force of Infection")
        .sum_variable_link("Total Population", "Force of Infection")
        .variable("Infection Rate", p("beta").mul(l(0)).mul(l(1)).div(Expr::sum_var(0)))
        .variable_link("Susceptible", "Infection Rate")
        .variable_link("Infective", "Infection Rate")
        .sum_variable_link("Total Population", "Infection Rate")
        .variable("Recovery Rate", l(0).div(p("t_r")))
        .variable_link("Infective", "Recovery Rate")
        .variable("Waning Rate", l(0).div(p("t_w")))
        .variable_link("Recovered", "Waning Rate")
        .flow_between("Infection", Some("Susceptible"), Some("Infective"), "Infection Rate")
        .flow_between("Recovery", Some("Infective"), Some("Recovered"), "Recovery Rate")
        .flow_between("Waning of Immunity", Some("Recovered"), Some("Susceptible"), "Waning Rate")
        .build()
        .expect("catalog diagram is valid")
}

/// The same SIR model as a simple diagram; the total population is the sum
/// of the three linked stocks.
pub fn sir_simple() -> StockFlowDiagram {
    simple(
        &["S", "I", "R"],
        &[("inf", "S", "I"), ("rec", "I", "R"), ("wane", "R", "S")],
        &[("S", "inf"), ("I", "inf"), ("R", "inf"), ("I", "rec"), ("R", "wane")],
        vec![
            ("inf", p("beta").mul(l(0)).mul(l(1)).div(l(0).add(l(1)).add(l(2)))),
            ("rec", l(0).div(p("t_r"))),
            ("wane", l(0).div(p("t_w"))),
        ],
    )
}

fn sird_recovery() -> Expr {
    c(1.0).sub(p("f_d")).mul(l(0)).div(p("t_r"))
}

fn sird_death() -> Expr {
    p("f_d").mul(l(0)).div(p("t_r"))
}

/// SIRD, its lumped SIE form, and the morphism sending R, D to E and r, d to e.
pub fn sird_and_lumped() -> (StockFlowDiagram, StockFlowDiagram, DiagramMorphism) {
    let infection = p("beta").mul(l(0)).mul(l(1)).div(p("N"));
    let sird = simple(
        &["S", "I", "R", "D"],
        &[("i", "S", "I"), ("r", "I", "R"), ("d", "I", "D")],
        &[("S", "i"), ("I", "i"), ("I", "r"), ("I", "d")],
        vec![("i", infection.clone()), ("r", sird_recovery()), ("d", sird_death())],
    );
    let lumped = simple(
        &["S", "I", "E"],
        &[("i", "S", "I"), ("e", "I", "E")],
        &[("S", "i"), ("I", "i"), ("I", "e")],
        vec![("i", infection), ("e", sird_recovery().add(sird_death()))],
    );
    let alpha = DiagramMorphism {
        stock_map: [0, 1, 2, 2].map(StockId).to_vec(),
        flow_map: [0, 1, 1].map(FlowId).to_vec(),
        link_map: [0, 1, 2, 2].map(LinkId).to_vec(),
        codomain: SortCounts::of(&lumped.primitive),
    };
    (sird, lumped, alpha)
}

fn covid_seirh() -> StockFlowDiagram {
    simple(
        &["S", "E", "I", "R", "HICU", "HNICU"],
        &[
            ("inf", "S", "E"),
            ("inc", "E", "I"),
            ("rec", "I", "R"),
            ("hicu", "I", "HICU"),
            ("hnicu", "I", "HNICU"),
            ("icu_out", "HICU", "HNICU"),
            ("discharge", "HNICU", "R"),
            ("wane", "R", "S"),
        ],
        &[
            ("S", "inf"),
            ("I", "inf"),
            ("E", "inc"),
            ("I", "rec"),
            ("I", "hicu"),
            ("I", "hnicu"),
            ("HICU", "icu_out"),
            ("HNICU", "discharge"),
            ("R", "wane"),
        ],
        vec![
            ("inf", p("beta").mul(l(0)).mul(l(1)).div(p("N"))),
            ("inc", p("r_i").mul(l(0))),
            ("rec", c(1.0).sub(p("f_H")).mul(l(0)).div(p("t_r"))),
            ("hicu", p("f_H").mul(p("f_ICU")).mul(l(0)).div(p("t_r"))),
            ("hnicu", p("f_H").mul(c(1.0).sub(p("f_ICU"))).mul(l(0)).div(p("t_r"))),
            ("icu_out", l(0).div(p("t_ICU"))),
            ("discharge", l(0).div(p("t_H"))),
            ("wane", l(0).div(p("t_w"))),
        ],
    )
}

fn covid_vaccination() -> StockFlowDiagram {
    simple(
        &["S", "E", "I", "VP", "VF"],
        &[
            ("vacc_s", "S", "VP"),
            ("vacc_p", "VP", "VF"),
            ("wane_f", "VF", "VP"),
            ("wane_p", "VP", "S"),
            ("inf_p", "VP", "E"),
            ("inf_f", "VF", "E"),
        ],
        &[
            ("S", "vacc_s"),
            ("VP", "vacc_p"),
            ("VF", "wane_f"),
            ("VP", "wane_p"),
            ("I", "inf_p"),
            ("VP", "inf_p"),
            ("I", "inf_f"),
            ("VF", "inf_f"),
        ],
        vec![
            ("vacc_s", p("r_v").mul(l(0))),
            ("vacc_p", p("r_v").mul(l(0))),
            ("wane_f", l(0).div(p("t_w"))),
            ("wane_p", l(0).div(p("t_w"))),
            ("inf_p", p("beta").mul(c(1.0).sub(p("e_p"))).mul(l(0)).mul(l(1)).div(p("N"))),
            ("inf_f", p("beta").mul(c(1.0).sub(p("e_f"))).mul(l(0)).mul(l(1)).div(p("N"))),
        ],
    )
}

fn covid_asymptomatic() -> StockFlowDiagram {
    simple(
        &["E", "R", "IA"],
        &[("inc_a", "E", "IA"), ("rec_a", "IA", "R")],
        &[("E", "inc_a"), ("IA", "rec_a")],
        vec![("inc_a", p("r_ia").mul(l(0))), ("rec_a", l(0).div(p("t_r")))],
    )
}

fn singleton_legs(names: &[&str]) -> Vec<FootSpec> {
    names.iter().map(|n| FootSpec::stocks([*n])).collect()
}

/// The three COVID components with one leg per shared stock.
pub fn covid_components() -> (OpenDiagram, OpenDiagram, OpenDiagram) {
    let a = OpenDiagram::make(covid_seirh(), singleton_legs(&["S", "E", "I", "R"])).expect("legs resolve");
    let b = OpenDiagram::make(covid_vaccination(), singleton_legs(&["S", "E", "I"])).expect("legs resolve");
    let c = OpenDiagram::make(covid_asymptomatic(), singleton_legs(&["E", "R"])).expect("legs resolve");
    (a, b, c)
}

/// The same components with one leg per neighbour, for pairwise gluing:
/// `seirh` has legs {S, E, I} and {E, R}; `vaccination` has {S, E, I};
/// `asymptomatic` has {E, R}.
pub fn covid_components_pairwise() -> (OpenDiagram, OpenDiagram, OpenDiagram) {
    let a = OpenDiagram::make(covid_seirh(), vec![FootSpec::stocks(["S", "E", "I"]), FootSpec::stocks(["E", "R"])])
        .expect("legs resolve");
    let b = OpenDiagram::make(covid_vaccination(), vec![FootSpec::stocks(["S", "E", "I"])]).expect("legs resolve");
    let c = OpenDiagram::make(covid_asymptomatic(), vec![FootSpec::stocks(["E", "R"])]).expect("legs resolve");
    (a, b, c)
}

/// Junctions S, E, I, R; boxes `seirh`, `vaccination`, `asymptomatic`.
pub fn covid_pattern() -> Uwd {
    Uwd::build(
        &["S", "E", "I", "R"],
        &[
            ("seirh", &["S", "E", "I", "R"]),
            ("vaccination", &["S", "E", "I"]),
            ("asymptomatic", &["E", "R"]),
        ],
        &["S", "E", "I", "R"],
    )
    .expect("pattern is valid")
}

pub fn covid_fillers() -> BTreeMap<String, OpenDiagram> {
    let (a, b, c) = covid_components();
    BTreeMap::from([
        ("seirh".to_string(), a),
        ("vaccination".to_string(), b),
        ("asymptomatic".to_string(), c),
    ])
}

/// Stocks S, E, I, R, HICU, HNICU, VP, VF, IA, with legs {S}, {E}, {I}, {R}.
pub fn covid_composite() -> OpenDiagram {
    oapply(&covid_pattern(), &covid_fillers()).expect("components fit the pattern")
}

fn params(pairs: &[(&str, f64)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn initial(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn sir_scenario(names: [&str; 3]) -> Scenario {
    Scenario {
        method: Method::Rk4,
        ..Scenario::new(
            initial(&[(names[0], 999_000.0), (names[1], 1_000.0), (names[2], 0.0)]),
            params(&[("beta", 0.3), ("t_r", 10.0), ("t_w", 180.0)]),
            200.0,
            0.1,
        )
    }
}

fn sird_scenario(lumped: bool) -> Scenario {
    let last = if lumped {
        vec![("E", 0.0)]
    } else {
        vec![("R", 0.0), ("D", 0.0)]
    };
    let mut init = vec![("S", 999_000.0), ("I", 1_000.0)];
    init.extend(last);
    Scenario::new(
        initial(&init),
        params(&[("beta", 0.3), ("N", 1e6), ("t_r", 10.0), ("f_d", 0.01)]),
        200.0,
        0.1,
    )
}

fn covid_params() -> Params {
    params(&[
        ("beta", 0.3),
        ("N", 1e6),
        ("r_v", 0.005),
        ("e_p", 0.6),
        ("e_f", 0.9),
        ("r_i", 0.14),
        ("r_ia", 0.06),
        ("t_r", 7.0),
        ("t_w", 180.0),
        ("t_H", 10.0),
        ("t_ICU", 14.0),
        ("f_H", 0.05),
        ("f_ICU", 0.2),
    ])
}

fn covid_scenario() -> Scenario {
    Scenario::new(
        initial(&[
            ("S", 998_000.0),
            ("E", 1_000.0),
            ("I", 500.0),
            ("R", 0.0),
            ("HICU", 0.0),
            ("HNICU", 0.0),
            ("VP", 0.0),
            ("VF", 0.0),
            ("IA", 500.0),
        ]),
        covid_params(),
        365.0,
        0.1,
    )
}

/// Restricts a scenario to the given stocks (missing ones start at zero).
fn restrict(sc: &Scenario, stocks: &[&str]) -> Scenario {
    Scenario {
        initial: stocks
            .iter()
            .map(|s| (s.to_string(), sc.initial.get(*s).copied().unwrap_or(0.0)))
            .collect(),
        ..sc.clone()
    }
}

/// A catalog entry: a named document and, for diagrams, a reference scenario.
pub struct CatalogEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub build: fn() -> Document,
    pub scenario: Option<fn() -> Scenario>,
}

impl CatalogEntry {
    pub fn document(&self) -> Document {
        (self.build)()
    }
}

pub fn catalog() -> Vec<CatalogEntry> {
    vec![
        CatalogEntry {
            name: "sir",
            description: "SIR with waning immunity, full-fledged, with sum variable Total Population",
            build: || Document::Full(sir()),
            scenario: Some(|| sir_scenario(["Susceptible", "Infective", "Recovered"])),
        },
        CatalogEntry {
            name: "sir_simple",
            description: "SIR with waning immunity as a simple diagram",
            build: || Document::StockFlow(sir_simple()),
            scenario: Some(|| sir_scenario(["S", "I", "R"])),
        },
        CatalogEntry {
            name: "sird",
            description: "SIRD with infection, recovery and death flows",
            build: || Document::StockFlow(sird_and_lumped().0),
            scenario: Some(|| sird_scenario(false)),
        },
        CatalogEntry {
            name: "sird_lumped",
            description: "SIRD with recovered and deceased lumped into E",
            build: || Document::StockFlow(sird_and_lumped().1),
            scenario: Some(|| sird_scenario(true)),
        },
        CatalogEntry {
            name: "sird_lumping",
            description: "morphism from sird to sird_lumped sending R, D to E and r, d to e",
            build: || {
                let (a, b, alpha) = sird_and_lumped();
                Document::Morphism(MorphismSpec::describe(&alpha, &a.primitive, &b.primitive))
            },
            scenario: None,
        },
        CatalogEntry {
            name: "covid_seirh",
            description: "COVID component A (SEIRH); legs {S}, {E}, {I}, {R}",
            build: || Document::Open(covid_components().0),
            scenario: Some(|| restrict(&covid_scenario(), &["S", "E", "I", "R", "HICU", "HNICU"])),
        },
        CatalogEntry {
            name: "covid_vaccination",
            description: "COVID component B (vaccination); legs {S}, {E}, {I}",
            build: || Document::Open(covid_components().1),
            scenario: Some(|| restrict(&covid_scenario(), &["S", "E", "I", "VP", "VF"])),
        },
        CatalogEntry {
            name: "covid_asymptomatic",
            description: "COVID component C (asymptomatic infection); legs {E}, {R}",
            build: || Document::Open(covid_components().2),
            scenario: Some(|| restrict(&covid_scenario(), &["E", "R", "IA"])),
        },
        CatalogEntry {
            name: "covid_pattern",
            description: "wiring pattern gluing the three COVID components along S, E, I, R",
            build: || Document::Uwd(covid_pattern()),
            scenario: None,
        },
        CatalogEntry {
            name: "covid_composite",
            description: "the composite COVID model (nine stocks); legs {S}, {E}, {I}, {R}",
            build: || Document::Open(covid_composite()),
            scenario: Some(covid_scenario),
        },
    ]
}

pub fn model(name: &str) -> Result<Document, ModelError> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .map(|e| e.document())
        .ok_or_else(|| ModelError::UnknownModel(name.to_string()))
}

pub fn reference_scenario(name: &str) -> Result<Scenario, ModelError> {
    catalog()
        .into_iter()
        .find(|e| e.name == name)
        .and_then(|e| e.scenario)
        .map(|f| f())
        .ok_or_else(|| ModelError::UnknownModel(name.to_string()))
}

/// Writes `<name>.json` for every entry and `<name>.scenario.json` for
/// every reference scenario into `dir`.
pub fn export_catalog(dir: &Path) -> Result<Vec<PathBuf>, IoError> {
    std::fs::create_dir_all(dir).map_err(|source| IoError::Io { path: dir.display().to_string(), source })?;
    let mut written = Vec::new();
    for e in catalog() {
        let path = dir.join(format!("{}.json", e.name));
        save(&e.document(), &path)?;
        written.push(path);
        if let Some(sc) = e.scenario {
            let path = dir.join(format!("{}.scenario.json", e.name));
            save(&Document::Scenario(sc()), &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::morphism::{check_flow_equation, check_naturality, FlowCheck};

    #[test]
    fn sir_shape() {
        let d = sir();
        assert_eq!((d.stocks.len(), d.flows.len(), d.sum_variables.len()), (3, 3, 1));
        assert_eq!(d.sum_variables[0].name, "Total Population");
        assert!(!d.has_partial_flows());
        assert!(d.validate().is_empty());
    }

    #[test]
    fn sird_morphism_is_valid() {
        let (a, b, alpha) = sird_and_lumped();
        assert!(check_naturality(&alpha, &a.primitive, &b.primitive).is_empty());
        let p = params(&[("beta", 0.3), ("N", 1e6), ("t_r", 10.0), ("f_d", 0.01)]);
        let r = check_flow_equation(&alpha, &a, &b, &p, &FlowCheck::default()).unwrap();
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn composite_stocks_in_canonical_order() {
        let d = covid_composite();
        assert_eq!(
            d.inner.stock_names(),
            vec!["S", "E", "I", "R", "HICU", "HNICU", "VP", "VF", "IA"]
        );
        assert_eq!(d.inner.flow_count(), 16);
        assert_eq!(d.legs.len(), 4);
    }

    #[test]
    fn scenarios_bind_all_params() {
        for e in catalog() {
            let Some(sc) = e.scenario else { continue };
            let sc = sc();
            let od = e.document().into_open().unwrap();
            for p in od.inner.params() {
                assert!(sc.params.contains_key(&p), "{}: {p}", e.name);
            }
            for s in od.inner.stock_names() {
                assert!(sc.initial.contains_key(s), "{}: {s}", e.name);
            }
        }
    }

    #[test]
    fn unknown_model() {
        assert_eq!(reference_scenario("nope"), Err(ModelError::UnknownModel("nope".into())));
        assert!(model("covid_pattern").is_ok());
    }
}
