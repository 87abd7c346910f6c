//! Closed-form message counts, timing and correctness formulas, figure grids,
//! and reconciliation of closed forms against simulated traces.

pub mod counts;
pub mod dbc;
pub mod figures;
pub mod reconcile;
pub mod timing;

use thiserror::Error;

pub use counts::{msg_count, CountFormulaInput, Setting, Which};
pub use dbc::{dbc, dbc_ap, dbc_avg};
pub use figures::{emit_figure_data, Figure};
pub use reconcile::{closed_form, reconcile, ClosedForm, ReconcileReport};
pub use timing::{time_bound, TimeParams, TofTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("missing field {0}")]
    MissingField(&'static str),
    #[error("missing time of flight between {0} and {1}")]
    MissingToF(usize, usize),
    #[error("lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("unknown figure {0:?}, expected one of 6a, 6b, 6c, 6d")]
    UnknownFigure(String),
}
