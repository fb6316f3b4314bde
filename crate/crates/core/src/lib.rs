//! The synchronous π-calculus Sπ: syntax, typing, the intra-instant labelled
//! transition system, end-of-instant evaluation, a multi-instant interpreter
//! and bounded bisimulation checkers.

pub mod ast;
pub mod surface;
pub mod typecheck;
pub mod lts;
pub mod eoi;
pub mod interpreter;
pub mod equivalence;
pub mod random;
