//! Convolutional sparse coding: the periodic convolutional dictionary, local
//! sparsity measures and recovery bounds, greedy and convex pursuit, and
//! synthetic signal generation.

pub mod bp;
pub mod conv;
pub mod error;
pub mod format;
pub mod metrics;
pub mod omp;
pub mod pursuit;
pub mod signal;

pub use bp::{
    bp_admm_local, bp_global_reference, bp_ist_local, kkt_certificate, BpConfig, Penalty,
    ThresholdMode,
};
pub use conv::{ConvOperator, LocalDictionary, SparseCode, StripeDictionary};
pub use error::{CscError, Result};
pub use metrics::{BoundReport, SupportSet};
pub use omp::{omp, OmpConfig, OmpStop};
pub use pursuit::{IterationRecord, PursuitResult};
