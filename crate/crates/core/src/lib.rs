//! Classical optical fields with prescribed photon statistics, coherence
//! estimators, multi-photon absorption rates and a simulated fluorescence
//! experiment comparing thermal and coherent excitation.

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod config;
pub mod correlation;
pub mod error;
pub mod experiments;
pub mod instruments;
pub mod numeric;
pub mod plot;
pub mod report;
pub mod seeding;
pub mod source;
pub mod tpa;
pub mod trace;

pub use error::{Error, Result};
pub use trace::FieldTrace;
