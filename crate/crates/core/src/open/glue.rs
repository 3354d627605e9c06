//! Colimits of open diagrams directed by a wiring pattern.

use std::collections::{BTreeMap, HashMap};

use crate::acset::{Acset, SIMPLE};
use crate::union_find::UnionFind;

use super::{ComposeError, Diagram, Foot, Leg, OpenDiagram, Uwd, UwdBox};

#[derive(Debug, Clone)]
pub struct ComposeOptions {
    /// Fail on name clashes instead of suffixing with the component label.
    pub strict_names: bool,
    /// For `compose_pair`: index in `b`'s foot of each of `a`'s foot stocks.
    /// Defaults to matching by name.
    pub correspondence: Option<Vec<usize>>,
    /// Component labels used for suffixing in `compose_pair`/`disjoint_union`.
    pub labels: [String; 2],
}

impl Default for ComposeOptions {
    fn default() -> Self {
        ComposeOptions {
            strict_names: false,
            correspondence: None,
            labels: ["a".into(), "b".into()],
        }
    }
}

/// One element of the result that several source elements were glued into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merge {
    pub sort: &'static str,
    pub name: String,
    /// `(component label, source name)` pairs.
    pub sources: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Composition {
    pub diagram: OpenDiagram,
    pub merges: Vec<Merge>,
    /// `(old name, new name)` for elements renamed to avoid clashes.
    pub renamed: Vec<(String, String)>,
}

/// Suffixes clashing unmerged names with their component label. Merged
/// elements keep their name. Returns the renames, or the first name that
/// still clashes (always, in strict mode).
pub(crate) fn dedupe_names(
    names: &mut [String],
    merged: &[bool],
    label: &[&str],
    strict: bool,
) -> Result<Vec<(String, String)>, String> {
    let mut count: HashMap<String, usize> = HashMap::new();
    for n in names.iter() {
        *count.entry(n.clone()).or_default() += 1;
    }
    let clashing: Vec<usize> = (0..names.len()).filter(|&i| count[&names[i]] > 1).collect();
    if clashing.is_empty() {
        return Ok(Vec::new());
    }
    if strict {
        return Err(names[clashing[0]].clone());
    }
    let mut renamed = Vec::new();
    for i in clashing {
        if merged[i] {
            continue;
        }
        let new = format!("{}@{}", names[i], label[i]);
        renamed.push((names[i].clone(), new.clone()));
        names[i] = new;
    }
    let mut seen = std::collections::HashSet::new();
    for n in names.iter() {
        if !seen.insert(n.as_str()) {
            return Err(n.clone());
        }
    }
    Ok(renamed)
}

/// Glues `a`'s leg `a_leg` to `b`'s leg `b_leg`. Remaining legs of `a` come
/// first, then those of `b`.
pub fn compose_pair(
    a: &OpenDiagram,
    a_leg: usize,
    b: &OpenDiagram,
    b_leg: usize,
) -> Result<OpenDiagram, ComposeError> {
    compose_pair_with(a, a_leg, b, b_leg, &ComposeOptions::default()).map(|c| c.diagram)
}

pub fn compose_pair_with(
    a: &OpenDiagram,
    a_leg: usize,
    b: &OpenDiagram,
    b_leg: usize,
    opts: &ComposeOptions,
) -> Result<Composition, ComposeError> {
    for (leg, d) in [(a_leg, a), (b_leg, b)] {
        if leg >= d.legs.len() {
            return Err(ComposeError::LegOutOfRange { leg, count: d.legs.len() });
        }
    }
    let pattern = pair_pattern(a.legs.len(), Some(a_leg), b.legs.len(), Some(b_leg));
    let explicit = opts.correspondence.as_ref().map(|c| {
        let mut m: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        m.insert((1, b_leg), c.clone());
        m
    });
    let ports = junction_ports(&pattern, &[a, b], explicit.as_ref(), true)?;
    glue(&pattern, &[a, b], &opts.labels, ports, opts.strict_names)
}

/// Coproduct of two open diagrams; legs are concatenated.
pub fn disjoint_union(a: &OpenDiagram, b: &OpenDiagram) -> Result<OpenDiagram, ComposeError> {
    let pattern = pair_pattern(a.legs.len(), None, b.legs.len(), None);
    let opts = ComposeOptions::default();
    let ports = junction_ports(&pattern, &[a, b], None, true)?;
    glue(&pattern, &[a, b], &opts.labels, ports, false).map(|c| c.diagram)
}

/// Composes fillers along the pattern. Leg `k` of a box's filler plugs into
/// port `k`; feet meeting at a junction are matched by element name.
pub fn oapply(pattern: &Uwd, fillers: &BTreeMap<String, OpenDiagram>) -> Result<OpenDiagram, ComposeError> {
    oapply_with(pattern, fillers, false).map(|c| c.diagram)
}

pub fn oapply_with(
    pattern: &Uwd,
    fillers: &BTreeMap<String, OpenDiagram>,
    strict_names: bool,
) -> Result<Composition, ComposeError> {
    pattern.validate()?;
    let mut components = Vec::with_capacity(pattern.boxes.len());
    for bx in &pattern.boxes {
        let f = fillers
            .get(&bx.name)
            .ok_or_else(|| ComposeError::MissingFiller(bx.name.clone()))?;
        if f.legs.len() != bx.ports.len() {
            return Err(ComposeError::PortCountMismatch {
                name: bx.name.clone(),
                ports: bx.ports.len(),
                legs: f.legs.len(),
            });
        }
        components.push(f);
    }
    let labels: Vec<String> = pattern.boxes.iter().map(|b| b.name.clone()).collect();
    let ports = junction_ports(pattern, &components, None, false)?;
    glue(pattern, &components, &labels, ports, strict_names)
}

/// The two-box pattern behind `compose_pair` and `disjoint_union`.
pub(crate) fn pair_pattern(na: usize, a_leg: Option<usize>, nb: usize, b_leg: Option<usize>) -> Uwd {
    let mut junctions = Vec::new();
    let mut a_ports = Vec::new();
    let mut outer = Vec::new();
    let mut shared = None;
    for k in 0..na {
        let j = junctions.len();
        junctions.push(format!("a{k}"));
        a_ports.push(j);
        if Some(k) == a_leg {
            shared = Some(j);
        } else {
            outer.push(j);
        }
    }
    let mut b_ports = Vec::new();
    for k in 0..nb {
        if Some(k) == b_leg {
            b_ports.push(shared.expect("a leg chosen"));
        } else {
            let j = junctions.len();
            junctions.push(format!("b{k}"));
            b_ports.push(j);
            outer.push(j);
        }
    }
    Uwd {
        junctions,
        boxes: vec![
            UwdBox { name: "a".into(), ports: a_ports },
            UwdBox { name: "b".into(), ports: b_ports },
        ],
        outer_ports: outer,
    }
}

/// A port on a junction with the correspondence from the junction's reference
/// foot (its first port) to this port's foot, per foot sort.
struct PortMatch {
    component: usize,
    leg: usize,
    corr: [Vec<usize>; 3],
}

fn junction_ports(
    pattern: &Uwd,
    components: &[&OpenDiagram],
    explicit: Option<&HashMap<(usize, usize), Vec<usize>>>,
    pair_errors: bool,
) -> Result<Vec<Vec<PortMatch>>, ComposeError> {
    let mut out = Vec::with_capacity(pattern.junctions.len());
    for (j, jname) in pattern.junctions.iter().enumerate() {
        let ports = pattern.ports_on(j);
        let mut matches = Vec::with_capacity(ports.len());
        let Some(&(b0, p0)) = ports.first() else {
            out.push(matches);
            continue;
        };
        let reference = &components[b0].legs[p0].foot;
        for &(b, p) in &ports {
            let leg_p = &components[b].legs[p];
            let given = explicit.and_then(|m| m.get(&(b, p)));
            let corr = match_feet(reference, &leg_p.foot, given).map_err(|detail| {
                if pair_errors {
                    ComposeError::FootMismatch(detail)
                } else {
                    ComposeError::JunctionFootMismatch { junction: jname.clone(), detail }
                }
            })?;
            matches.push(PortMatch { component: b, leg: p, corr });
        }
        out.push(matches);
    }
    Ok(out)
}

/// Correspondence from `reference`'s elements to `other`'s, by name unless
/// an explicit stock correspondence is given. Requires an exact shape match.
fn match_feet(reference: &Foot, other: &Foot, explicit: Option<&Vec<usize>>) -> Result<[Vec<usize>; 3], String> {
    if reference.is_full() != other.is_full() {
        return Err("one foot is full-fledged and the other is not".into());
    }
    if reference.shape() != other.shape() {
        return Err(format!(
            "foot shapes differ: {:?} vs {:?}",
            reference.shape(),
            other.shape()
        ));
    }
    let by_name = |a: &[String], b: &[String], what: &str| -> Result<Vec<usize>, String> {
        a.iter()
            .map(|n| {
                b.iter()
                    .position(|m| m == n)
                    .ok_or_else(|| format!("{what} `{n}` has no counterpart"))
            })
            .collect()
    };
    let stocks = match explicit {
        Some(c) => {
            let n = other.stocks().len();
            let mut seen = vec![false; n];
            if c.len() != n || c.iter().any(|&i| i >= n || std::mem::replace(&mut seen[i], true)) {
                return Err("explicit correspondence is not a bijection".into());
            }
            c.clone()
        }
        None => by_name(reference.stocks(), other.stocks(), "foot stock")?,
    };
    let sums = by_name(reference.sum_variables(), other.sum_variables(), "foot sum variable")?;
    let mut used = vec![false; other.sum_links().len()];
    let mut links = Vec::with_capacity(used.len());
    for &(s, v) in reference.sum_links() {
        let want = (stocks[s], sums[v]);
        let pos = other
            .sum_links()
            .iter()
            .enumerate()
            .position(|(i, l)| !used[i] && *l == want)
            .ok_or_else(|| "sum links do not correspond".to_string())?;
        used[pos] = true;
        links.push(pos);
    }
    Ok([stocks, sums, links])
}

fn glue(
    pattern: &Uwd,
    components: &[&OpenDiagram],
    labels: &[String],
    ports: Vec<Vec<PortMatch>>,
    strict: bool,
) -> Result<Composition, ComposeError> {
    let schema = match components.first() {
        Some(c) => c.inner.schema(),
        None => &SIMPLE,
    };
    if components.iter().any(|c| !std::ptr::eq(c.inner.schema(), schema)) {
        return Err(ComposeError::KindMismatch);
    }
    let acsets: Vec<Acset> = components.iter().map(|c| c.inner.to_acset()).collect();
    let refs: Vec<&Acset> = acsets.iter().collect();
    let (sum, offsets) = Acset::coproduct(schema, &refs);

    let mut ufs: Vec<UnionFind> = sum.parts.iter().map(|&n| UnionFind::new(n)).collect();
    for matches in &ports {
        let Some(first) = matches.first() else { continue };
        let ref_maps = components[first.component].legs[first.leg].maps();
        for m in &matches[1..] {
            let maps = components[m.component].legs[m.leg].maps();
            for (fo, &obj) in schema.foot_objects.iter().enumerate() {
                for (i, &x) in ref_maps[fo].iter().enumerate() {
                    let y = maps[fo][m.corr[fo][i]];
                    ufs[obj].union(offsets[first.component][obj] + x, offsets[m.component][obj] + y);
                }
            }
        }
    }
    let reps: Vec<Vec<usize>> = ufs.iter_mut().map(|u| u.representatives()).collect();
    let (mut glued, maps) = sum.quotient(&reps).map_err(|hom| ComposeError::JunctionFootMismatch {
        junction: "*".into(),
        detail: format!("identification does not respect `{hom}`"),
    })?;

    // source component of every element of the coproduct
    let owner = |obj: usize, x: usize| -> usize {
        (0..components.len())
            .rev()
            .find(|&c| offsets[c][obj] <= x)
            .unwrap_or(0)
    };

    let mut merges = Vec::new();
    for &obj in schema.foot_objects {
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (x, &image) in maps[obj].iter().enumerate() {
            groups.entry(image).or_default().push(x);
        }
        for (new, members) in groups {
            if members.len() > 1 {
                let named = !sum.names[obj].is_empty();
                merges.push(Merge {
                    sort: schema.objects[obj],
                    name: if named { glued.names[obj][new].clone() } else { format!("#{new}") },
                    sources: members
                        .iter()
                        .map(|&x| {
                            let n = if named { sum.names[obj][x].clone() } else { format!("#{x}") };
                            (labels[owner(obj, x)].clone(), n)
                        })
                        .collect(),
                });
            }
        }
    }

    let mut renamed = Vec::new();
    for &obj in schema.named {
        let mut first_source = vec![usize::MAX; glued.parts[obj]];
        let mut sources = vec![0usize; glued.parts[obj]];
        for (x, &n) in maps[obj].iter().enumerate() {
            sources[n] += 1;
            if first_source[n] == usize::MAX {
                first_source[n] = x;
            }
        }
        let merged: Vec<bool> = sources.iter().map(|&s| s > 1).collect();
        let label: Vec<&str> = first_source
            .iter()
            .map(|&x| labels[owner(obj, x)].as_str())
            .collect();
        let r = dedupe_names(&mut glued.names[obj], &merged, &label, strict)
            .map_err(|n| ComposeError::NameCollision(format!("{} `{n}`", schema.objects[obj])))?;
        renamed.extend(r);
    }

    let mut legs = Vec::with_capacity(pattern.outer_ports.len());
    for &j in &pattern.outer_ports {
        let Some(first) = ports[j].first() else {
            return Err(ComposeError::EmptyJunction(pattern.junctions[j].clone()));
        };
        let src = &components[first.component].legs[first.leg];
        let c = first.component;
        let lift = |fo: usize, xs: &[usize]| -> Vec<usize> {
            let obj = schema.foot_objects[fo];
            xs.iter().map(|&x| maps[obj][offsets[c][obj] + x]).collect()
        };
        let m = src.maps();
        let mut leg = Leg {
            foot: src.foot.clone(),
            stock_map: lift(0, &m[0]).into_iter().map(crate::diagram::StockId).collect(),
            sum_variable_map: Vec::new(),
            sum_link_map: Vec::new(),
        };
        if schema.foot_objects.len() > 1 {
            leg.sum_variable_map = lift(1, &m[1]).into_iter().map(crate::diagram::SumVariableId).collect();
            leg.sum_link_map = lift(2, &m[2]);
        }
        legs.push(leg);
    }

    let diagram = OpenDiagram {
        inner: Diagram::from_acset(&glued),
        legs,
    };
    Ok(Composition {
        diagram,
        merges,
        renamed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::open::tests::sir;
    use crate::open::FootSpec;

    #[test]
    fn empty_foot_gives_disjoint_union() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(Vec::<&str>::new())]).unwrap();
        let c = compose_pair(&a, 0, &a, 0).unwrap();
        assert_eq!(c.stock_count(), 6);
        assert_eq!(c.inner.flow_count(), 4);
        assert!(c.legs.is_empty());
    }

    #[test]
    fn one_element_foot_drops_one_stock() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["R"])]).unwrap();
        let b = OpenDiagram::make(sir(), vec![FootSpec::stocks(["R"])]).unwrap();
        let c = compose_pair_with(&a, 0, &b, 0, &ComposeOptions::default()).unwrap();
        assert_eq!(c.diagram.stock_count(), 5);
        assert_eq!(c.merges.len(), 1);
        assert_eq!(c.merges[0].name, "R");
        let names = c.diagram.inner.stock_names();
        assert_eq!(names, vec!["S@a", "I@a", "R", "S@b", "I@b"]);
    }

    #[test]
    fn strict_mode_rejects_clashes() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["R"])]).unwrap();
        let opts = ComposeOptions { strict_names: true, ..Default::default() };
        assert!(matches!(
            compose_pair_with(&a, 0, &a, 0, &opts),
            Err(ComposeError::NameCollision(_))
        ));
    }

    #[test]
    fn mismatched_feet() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S"])]).unwrap();
        let b = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S", "I"])]).unwrap();
        assert!(matches!(compose_pair(&a, 0, &b, 0), Err(ComposeError::FootMismatch(_))));
    }

    #[test]
    fn explicit_correspondence_overrides_names() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::mapped(&[("x", "R")])]).unwrap();
        let b = OpenDiagram::make(sir(), vec![FootSpec::mapped(&[("y", "S")])]).unwrap();
        assert!(compose_pair(&a, 0, &b, 0).is_err());
        let opts = ComposeOptions { correspondence: Some(vec![0]), ..Default::default() };
        let c = compose_pair_with(&a, 0, &b, 0, &opts).unwrap();
        assert_eq!(c.diagram.stock_count(), 5);
        assert!(c.diagram.inner.stock_names().contains(&"R≡S"));
    }

    #[test]
    fn port_count_checked() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S"])]).unwrap();
        let u = Uwd::build(&["j"], &[("a", &["j", "j"])], &[]).unwrap();
        let fillers = BTreeMap::from([("a".to_string(), a)]);
        assert!(matches!(oapply(&u, &fillers), Err(ComposeError::PortCountMismatch { .. })));
    }

    #[test]
    fn self_gluing_within_one_box() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::mapped(&[("x", "S")]), FootSpec::mapped(&[("x", "R")])]).unwrap();
        let u = Uwd::build(&["j"], &[("a", &["j", "j"])], &["j"]).unwrap();
        let fillers = BTreeMap::from([("a".to_string(), a)]);
        let c = oapply(&u, &fillers).unwrap();
        assert_eq!(c.stock_count(), 2);
        assert_eq!(c.inner.stock_names(), vec!["S≡R", "I"]);
    }

    #[test]
    fn junction_shape_mismatch() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S"])]).unwrap();
        let b = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S", "I"])]).unwrap();
        let u = Uwd::build(&["j"], &[("a", &["j"]), ("b", &["j"])], &[]).unwrap();
        let fillers = BTreeMap::from([("a".to_string(), a), ("b".to_string(), b)]);
        assert!(matches!(oapply(&u, &fillers), Err(ComposeError::JunctionFootMismatch { .. })));
    }
}
