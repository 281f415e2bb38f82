//! Single-signal solves and dictionary generation for the command line.

use std::path::PathBuf;

use csc_core::bp::{
    bp_admm_local, bp_global_reference, bp_ist_local, BpConfig, Penalty, ThresholdMode,
};
use csc_core::conv::{ConvOperator, LocalDictionary};
use csc_core::format::{read_dictionary, read_vec, write_dictionary, write_vec};
use csc_core::omp::{omp, OmpConfig};
use csc_core::pursuit::{PursuitResult, TRACE_CSV_HEADER};
use csc_core::signal::{dct_local_dictionary, low_coherence_dictionary, regenerate_experiment_dictionary};

use crate::error::{read_text, write_text, BenchError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Omp,
    Ista,
    Admm,
    IstLocal,
}

impl Solver {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "omp" => Solver::Omp,
            "ista" => Solver::Ista,
            "admm" => Solver::Admm,
            "ist-local" => Solver::IstLocal,
            _ => return Err(BenchError::PlanInvalid(format!("unknown solver {s:?}"))),
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveRequest {
    pub solver: Solver,
    pub lambda: Option<f64>,
    /// Decay factor of the penalty schedule; `lambda` becomes its start.
    pub lambda_schedule: Option<f64>,
    pub lambda_floor: f64,
    pub rho: f64,
    pub rho_per_lambda: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
    pub mode: ThresholdMode,
    pub sparsity: Option<usize>,
    pub residual: Option<f64>,
    pub input: PathBuf,
    pub dictionary: PathBuf,
    pub output: PathBuf,
    pub trace: Option<PathBuf>,
}

impl SolveRequest {
    pub fn bp_config(&self) -> Result<BpConfig> {
        let penalty = match (self.lambda_schedule, self.lambda) {
            (Some(decay), initial) => Penalty::Schedule {
                initial,
                decay,
                floor: self.lambda_floor,
            },
            (None, Some(l)) => Penalty::Fixed(l),
            (None, None) => {
                return Err(BenchError::PlanInvalid(
                    "convex solvers need --lambda or --lambda-schedule".into(),
                ))
            }
        };
        Ok(BpConfig {
            penalty,
            max_iterations: self.max_iterations,
            tol: self.tol,
            rho: self.rho,
            rho_per_lambda: self.rho_per_lambda,
            mode: self.mode,
            record_trace: self.trace.is_some(),
            ..BpConfig::default()
        })
    }

    pub fn omp_config(&self) -> Result<OmpConfig> {
        match (self.sparsity, self.residual) {
            (Some(k), None) => Ok(OmpConfig::fixed(k)),
            (None, Some(eps)) => Ok(OmpConfig::residual(eps, self.max_iterations)),
            _ => Err(BenchError::PlanInvalid(
                "omp needs exactly one of --sparsity or --residual".into(),
            )),
        }
    }
}

/// Loads the inputs, runs the solver and writes the code (and trace, if requested).
pub fn run_solve(req: &SolveRequest) -> Result<PursuitResult> {
    let dict = read_dictionary(&read_text(&req.dictionary)?)?;
    let y = read_vec(&read_text(&req.input)?)?;
    let op = ConvOperator::new(dict, y.len())?;
    let res = solve(&op, &y, req)?;
    write_text(&req.output, &write_vec(&res.code))?;
    if let Some(path) = &req.trace {
        let mut text = String::from(TRACE_CSV_HEADER);
        text.push('\n');
        for r in &res.trace {
            text.push_str(&r.csv_row());
            text.push('\n');
        }
        write_text(path, &text)?;
    }
    Ok(res)
}

pub fn solve(op: &ConvOperator, y: &[f64], req: &SolveRequest) -> Result<PursuitResult> {
    Ok(match req.solver {
        Solver::Omp => omp(op, y, &req.omp_config()?)?,
        Solver::Ista => bp_global_reference(op, y, &req.bp_config()?)?,
        Solver::IstLocal => bp_ist_local(op, y, &req.bp_config()?)?,
        Solver::Admm => bp_admm_local(op, y, &req.bp_config()?)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictionaryRequest {
    /// The bundled experiment dictionary, regenerated from its seed.
    Experiment,
    Dct { n: usize, m: usize },
    LowCoherence {
        n: usize,
        m: usize,
        signal_len: usize,
        target_mu: f64,
        seed: u64,
        max_steps: usize,
    },
}

/// Builds a dictionary and its file text.
pub fn generate_dictionary(req: &DictionaryRequest) -> Result<(LocalDictionary, String)> {
    let dict = match *req {
        DictionaryRequest::Experiment => regenerate_experiment_dictionary()?.dictionary,
        DictionaryRequest::Dct { n, m } => dct_local_dictionary(n, m)?,
        DictionaryRequest::LowCoherence {
            n,
            m,
            signal_len,
            target_mu,
            seed,
            max_steps,
        } => low_coherence_dictionary(n, m, signal_len, target_mu, seed, max_steps)?.dictionary,
    };
    let text = write_dictionary(&dict);
    Ok((dict, text))
}
