//! Undirected wiring diagrams: boxes with ordered ports, junctions, and an
//! ordered list of outer ports.

use std::collections::HashSet;

use super::ComposeError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UwdBox {
    pub name: String,
    /// Junction of each port, in port order.
    pub ports: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Uwd {
    pub junctions: Vec<String>,
    pub boxes: Vec<UwdBox>,
    pub outer_ports: Vec<usize>,
}

impl Uwd {
    /// Builds a pattern from junction names. `boxes` lists each box with the
    /// junction attached to each of its ports.
    pub fn build(
        junctions: &[&str],
        boxes: &[(&str, &[&str])],
        outer_ports: &[&str],
    ) -> Result<Self, ComposeError> {
        let find = |j: &str| {
            junctions
                .iter()
                .position(|n| *n == j)
                .ok_or_else(|| ComposeError::UnknownJunction(j.to_string()))
        };
        let uwd = Uwd {
            junctions: junctions.iter().map(|s| s.to_string()).collect(),
            boxes: boxes
                .iter()
                .map(|(name, ports)| {
                    Ok(UwdBox {
                        name: name.to_string(),
                        ports: ports.iter().map(|p| find(p)).collect::<Result<_, _>>()?,
                    })
                })
                .collect::<Result<_, ComposeError>>()?,
            outer_ports: outer_ports.iter().map(|p| find(p)).collect::<Result<_, _>>()?,
        };
        uwd.validate()?;
        Ok(uwd)
    }

    pub fn validate(&self) -> Result<(), ComposeError> {
        let mut seen = HashSet::new();
        for j in &self.junctions {
            if !seen.insert(j.as_str()) {
                return Err(ComposeError::DuplicateName(format!("junction `{j}`")));
            }
        }
        let mut seen = HashSet::new();
        for b in &self.boxes {
            if !seen.insert(b.name.as_str()) {
                return Err(ComposeError::DuplicateName(format!("box `{}`", b.name)));
            }
            if let Some(&p) = b.ports.iter().find(|&&p| p >= self.junctions.len()) {
                return Err(ComposeError::UnknownJunction(p.to_string()));
            }
        }
        if let Some(&p) = self.outer_ports.iter().find(|&&p| p >= self.junctions.len()) {
            return Err(ComposeError::UnknownJunction(p.to_string()));
        }
        Ok(())
    }

    /// (box index, port index) pairs attached to junction `j`, box-major.
    pub fn ports_on(&self, j: usize) -> Vec<(usize, usize)> {
        self.boxes
            .iter()
            .enumerate()
            .flat_map(|(b, bx)| {
                bx.ports
                    .iter()
                    .enumerate()
                    .filter(move |(_, &pj)| pj == j)
                    .map(move |(p, _)| (b, p))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covid_pattern() {
        let u = Uwd::build(
            &["S", "E", "I", "R"],
            &[
                ("seirh", &["S", "E", "I", "R"]),
                ("vaccination", &["S", "E", "I"]),
                ("asymptomatic", &["E", "R"]),
            ],
            &["S", "E", "I", "R"],
        )
        .unwrap();
        assert_eq!(u.ports_on(1), vec![(0, 1), (1, 1), (2, 0)]);
        assert_eq!(u.ports_on(3), vec![(0, 3), (2, 1)]);
    }

    #[test]
    fn unknown_junction() {
        assert!(matches!(
            Uwd::build(&["x"], &[("a", &["y"])], &[]),
            Err(ComposeError::UnknownJunction(_))
        ));
    }
}
