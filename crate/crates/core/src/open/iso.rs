//! Brute-force isomorphism search between small open diagrams.

use crate::acset::find_iso;
use crate::diagram::{FlowId, StockId};

use super::{ComposeError, OpenDiagram};

pub const DEFAULT_ISO_LIMIT: usize = 12;

/// Element bijections of an isomorphism, one per schema object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenIso {
    pub components: Vec<(&'static str, Vec<usize>)>,
}

impl OpenIso {
    pub fn stock_map(&self) -> Vec<StockId> {
        self.components[0].1.iter().map(|&x| StockId(x)).collect()
    }

    pub fn flow_map(&self) -> Vec<FlowId> {
        self.components[1].1.iter().map(|&x| FlowId(x)).collect()
    }
}

/// Finds an isomorphism `a -> b` compatible with the legs (leg `k` of `a`
/// composed with the isomorphism equals leg `k` of `b`), under which every
/// flow/auxiliary expression of `a`, with slots re-indexed, is identical to
/// its image's. Names are ignored.
pub fn iso_check(a: &OpenDiagram, b: &OpenDiagram) -> Result<Option<OpenIso>, ComposeError> {
    iso_check_with_limit(a, b, DEFAULT_ISO_LIMIT)
}

pub fn iso_check_with_limit(
    a: &OpenDiagram,
    b: &OpenDiagram,
    limit: usize,
) -> Result<Option<OpenIso>, ComposeError> {
    for d in [a, b] {
        if d.stock_count() > limit {
            return Err(ComposeError::SizeLimitExceeded {
                stocks: d.stock_count(),
                limit,
            });
        }
    }
    if a.inner.is_full() != b.inner.is_full() || a.legs.len() != b.legs.len() {
        return Ok(None);
    }
    let schema = a.inner.schema();
    let mut fixed = vec![Vec::new(); schema.objects.len()];
    for (la, lb) in a.legs.iter().zip(&b.legs) {
        if la.foot.is_full() != lb.foot.is_full() || la.foot.shape() != lb.foot.shape() {
            return Ok(None);
        }
        if la.foot.sum_links() != lb.foot.sum_links() {
            return Ok(None);
        }
        let (ma, mb) = (la.maps(), lb.maps());
        for (fo, &obj) in schema.foot_objects.iter().enumerate() {
            fixed[obj].extend(ma[fo].iter().copied().zip(mb[fo].iter().copied()));
        }
    }
    let (xa, xb) = (a.inner.to_acset(), b.inner.to_acset());
    Ok(find_iso(&xa, &xb, &fixed).map(|maps| OpenIso {
        components: schema.objects.iter().copied().zip(maps).collect(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagram::{Link, StockId};
    use crate::open::tests::sir;
    use crate::open::{compose_pair, FootSpec};

    #[test]
    fn self_iso_is_identity() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S"])]).unwrap();
        let iso = iso_check(&a, &a).unwrap().unwrap();
        assert_eq!(iso.stock_map(), vec![StockId(0), StockId(1), StockId(2)]);
    }

    #[test]
    fn finds_stock_permutation() {
        let a = OpenDiagram::make(sir(), vec![]).unwrap();
        // same diagram with stocks listed as R, S, I
        let mut d = sir();
        let perm = [1, 2, 0]; // old index -> new index
        d.primitive.stocks = vec!["R", "S", "I"]
            .into_iter()
            .map(|n| crate::diagram::Stock { name: n.into() })
            .collect();
        for f in &mut d.primitive.flows {
            f.up = StockId(perm[f.up.0]);
            f.down = StockId(perm[f.down.0]);
        }
        for l in &mut d.primitive.links {
            l.src = StockId(perm[l.src.0]);
        }
        let b = OpenDiagram::make(d, vec![]).unwrap();
        let iso = iso_check(&a, &b).unwrap().unwrap();
        assert_eq!(iso.stock_map(), vec![StockId(1), StockId(2), StockId(0)]);
    }

    #[test]
    fn extra_link_breaks_iso() {
        let a = OpenDiagram::make(sir(), vec![]).unwrap();
        let mut d = sir();
        d.primitive.links.push(Link { src: StockId(0), tgt: crate::diagram::FlowId(1) });
        let b = OpenDiagram::make(d, vec![]).unwrap();
        assert!(iso_check(&a, &b).unwrap().is_none());
    }

    #[test]
    fn legs_must_agree() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["S"])]).unwrap();
        let b = OpenDiagram::make(sir(), vec![FootSpec::stocks(["R"])]).unwrap();
        assert!(iso_check(&a, &b).unwrap().is_none());
    }

    #[test]
    fn size_limit() {
        let a = OpenDiagram::make(sir(), vec![FootSpec::stocks(["R"])]).unwrap();
        let big = compose_pair(&a, 0, &a, 0).unwrap();
        let r = iso_check_with_limit(&big, &big, 4);
        assert!(matches!(r, Err(ComposeError::SizeLimitExceeded { .. })));
    }
}
