//! Logical encoding of typing obligations: formulas, validity scripts and
//! Horn systems in SMT-LIB 2.

pub mod encode;
pub mod formula;
pub mod horn;
pub mod sexp;

pub use encode::{leaf_layout, pred_slots, to_validity_script, Decls, EncodeError, Encoder, Slot};
pub use formula::{Cmp, Formula, Sort};
pub use horn::{obligation_clause, prepare, HornClause, HornError, HornSystem};
pub use sexp::Sexp;
