//! Reference interpreter used as the ground-truth oracle for verdicts and
//! aggregate refinements.

pub mod aggregate;
pub mod exec;
pub mod value;

pub use aggregate::{const_sum, eval_term, sum_chain, TermVal};
pub use exec::{AbortCause, EventKind, ExecEvent, ExecOutcome, Interpreter, NoObserver, Observer, Store};
pub use value::{havoc_val, zero_val, MapVal, Value};
