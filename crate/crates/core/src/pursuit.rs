//! Output types shared by the greedy and convex solvers.

use crate::error::{CscError, Result};
use crate::metrics::SupportSet;

// std's clock panics in the browser
#[cfg(not(target_arch = "wasm32"))]
pub(crate) use std::time::Instant;
#[cfg(target_arch = "wasm32")]
pub(crate) use web_time::Instant;

/// One row of a solver trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub primal_res: f64,
    pub dual_res: f64,
    /// Seconds since the solver started.
    pub wall_time: f64,
}

pub const TRACE_CSV_HEADER: &str = "iter,objective,primal_res,dual_res,wall_time";

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        use crate::format::fmt_f64;
        format!(
            "{},{},{},{},{}",
            self.iter,
            fmt_f64(self.objective),
            fmt_f64(self.primal_res),
            fmt_f64(self.dual_res),
            fmt_f64(self.wall_time)
        )
    }
}

#[derive(Debug, Clone)]
pub struct PursuitResult {
    pub code: Vec<f64>,
    pub support: SupportSet,
    /// Residual l2 norms; entry 0 is `||Y||`, entry `k` follows iteration `k`.
    pub residual_norms: Vec<f64>,
    pub iterations: usize,
    pub wall_time: f64,
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    /// Global estimates captured at the requested iterations.
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// OMP only: selections skipped because the atom was already chosen.
    pub reselect_skips: usize,
}

impl PursuitResult {
    /// Turns an unconverged result into `NoConvergence`.
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(CscError::NoConvergence {
                iterations: self.iterations,
            })
        }
    }
}
