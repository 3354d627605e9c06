//! File formats: JSON documents, infix expressions, CSV trajectories and
//! Graphviz DOT.

mod dot;
mod json;
mod parse;

use std::io::Write;

use thiserror::Error;

use crate::diagram::ValidationError;
use crate::integrate::Trajectory;
use crate::open::ComposeError;

pub use dot::export_dot;
pub use json::{
    from_json_str, load, save, to_json_string, to_value, Document, LinkAssignment, LinkRef, MorphismSpec,
    FORMAT_VERSION,
};
pub use parse::{parse_expression, ExprContext, ParseError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("unsupported format version {found} (expected {FORMAT_VERSION})")]
    VersionMismatch { found: String },
    #[error("unknown document kind `{0}`")]
    UnknownKind(String),
    #[error("expected a {expected} document, found `{found}`")]
    WrongKind { expected: &'static str, found: String },
    #[error("expression at {path}: {source}")]
    Expression { path: String, source: ParseError },
    #[error("{owner}: expression `{text}` does not read back identically")]
    Unrepresentable { owner: String, text: String },
    #[error("morphism: {0}")]
    Morphism(String),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Writes a trajectory as CSV: a `t` column then one column per state
/// entry, every value with 17 significant digits.
pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(traj.columns.iter().cloned());
    w.write_record(&header)?;
    for (t, row) in traj.times.iter().zip(&traj.states) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(format!("{t:.16e}"));
        rec.extend(row.iter().map(|x| format!("{x:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| IoError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let traj = Trajectory {
            columns: vec!["S".into(), "I".into()],
            times: vec![0.0, 0.5],
            states: vec![vec![990.0, 10.0], vec![0.1, 1.0 / 3.0]],
        };
        let mut buf = Vec::new();
        write_csv(&traj, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,S,I");
        assert_eq!(lines[1], "0.0000000000000000e0,9.9000000000000000e2,1.0000000000000000e1");
        let third: f64 = lines[2].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(third, 1.0 / 3.0);
    }
}
