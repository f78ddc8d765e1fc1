//! Refinement type checking for MiniSol contracts, with CHC-based inference of
//! contract invariants that rule out arithmetic overflow.

use std::sync::LazyLock;

use num_bigint::BigUint;

pub mod ast;
pub mod diag;
pub mod fold;
pub mod infer;
pub mod interp;
pub mod lexer;
pub mod logic;
pub mod parser;
pub mod pipeline;
pub mod printer;
pub mod solver;
pub mod sorts;
pub mod templates;
pub mod typecheck;
pub mod validate;

/// Largest uint value, 2^256 - 1.
pub static MAX_INT: LazyLock<BigUint> = LazyLock::new(|| (BigUint::from(1u8) << 256u32) - 1u8);

pub use ast::{BaseType, BinOp, Contract, SourceLoc, StructTable, Term};
pub use parser::{parse_contract, parse_term, ParseError};
