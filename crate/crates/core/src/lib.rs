//! Symbolic worst-case bound analysis for difference constraint programs.

pub mod abstractor;
pub mod dcp;
pub mod engine;
pub mod expr;
pub mod local_bounds;
pub mod oracle;
pub mod reset_graph;
pub mod syntax;

pub use abstractor::{
    abstract_program, parse_program, AbstractOptions, Abstraction, ConcreteProgram, LinExpr, Norm,
};
pub use dcp::{
    parse_dcp, Atom, Constraint, Dcp, DcpError, DcpParts, TransId, Transition, Violation,
};
pub use engine::{analyze, AnalysisError, AnalysisMode, AnalysisOptions, BoundEngine, Report};
pub use expr::{build, evaluate, normalize, BoundExpr, ExprError, Op, Valuation};
pub use local_bounds::{local_bound_map, simple_cycles, CycleOverflow, LocalBound, LocalBoundMap};
pub use oracle::{check_soundness, explore, RunStats, Verdict, VerdictKind};
pub use reset_graph::{ResetGraph, ResetPath, ResetPathOverflow};
pub use syntax::{Diagnostic, ParseError};
