//! Translation validation for hierarchical state-machine charts and the
//! sequential code generated from them.

pub mod chart;
pub mod expr;
pub mod harness;
pub mod ir;
pub mod lexer;
pub mod lower;
pub mod refine;
pub mod retrieve;
pub mod sem;
