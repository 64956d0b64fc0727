//! Invariant mining, synthesis and verification for Solidity contracts.
//!
//! The pipeline: [`corpus`] builds a deduplicated set of source files and
//! mines their `require` predicates; [`abstraction`] shrinks a contract around
//! one function to fit a token budget; [`fim`] turns that into
//! fill-in-the-middle samples; [`synth`] asks a completion backend for missing
//! predicates and injects them; [`compile`], [`equiv`] and [`eval`] check the
//! result.

pub mod abstraction;
pub mod ast;
pub mod compile;
pub mod corpus;
pub mod equiv;
pub mod eval;
pub mod fim;
pub mod lexer;
pub mod span;
pub mod synth;
