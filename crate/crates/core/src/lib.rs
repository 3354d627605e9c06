//! Stock-flow diagrams as categorical-database instances, composed along
//! shared stocks and compiled to ordinary differential equations.
//!
//! * [`diagram`], [`full`]: simple and full-fledged diagrams.
//! * [`morphism`]: morphisms, the flow equation and lumping.
//! * [`open`]: open diagrams, pairwise and pattern-directed gluing.
//! * [`semantics`]: vector fields and their pushforwards.
//! * [`integrate`]: fixed-step Euler and RK4.
//! * [`io`]: JSON, CSV, DOT and the expression syntax.
//! * [`models`]: the built-in model library.

pub mod acset;
pub mod diagram;
pub mod expr;
pub mod full;
pub mod integrate;
pub mod io;
pub mod models;
pub mod morphism;
pub mod open;
pub mod random;
pub mod semantics;
mod union_find;

pub use diagram::{PrimitiveStockFlow, StockFlowDiagram, ValidationError, Violation};
pub use expr::{Expr, Params};
pub use full::FullStockFlow;
pub use integrate::{simulate, Method, Scenario, Trajectory};
pub use open::{compose_pair, oapply, Diagram, OpenDiagram, Uwd};
pub use semantics::{vector_field, vector_field_full, DynamicalSystem};
