//! A small clause-based prover whose hints are terms simplified along with
//! the goal.
//!
//! The pipeline is: [`sexpr`] reads surface syntax, [`term`] translates it,
//! [`rewrite`] simplifies clauses, [`hints`] drives the proof and applies
//! hints, [`termhint`] turns simplified hint terms back into hints, and
//! [`cli`] runs event files.

pub mod cli;
pub mod hints;
pub mod rewrite;
pub mod sexpr;
pub mod term;
pub mod termhint;
pub mod world;

pub use hints::{Hint, Limits, ProofOutcome, ProofResult};
pub use rewrite::Clause;
pub use sexpr::SExpr;
pub use term::Term;
pub use world::World;
