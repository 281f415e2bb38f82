//! Browser demo: draw a sparse convolutional signal, then recover its code
//! with OMP or local ADMM and compare against the planted one.

use csc_core::bp::{bp_admm_local, BpConfig, Penalty};
use csc_core::conv::ConvOperator;
use csc_core::metrics::{l0_inf_norm, l0_norm, omp_hypothesis};
use csc_core::omp::{omp, OmpConfig};
use csc_core::signal::{
    dct_local_dictionary, experiment_dictionary, generate_instance, Amplitude, Cardinality, Instance, NoiseModel,
    SignalSpec,
};
use wasm_bindgen::prelude::*;

const ZERO_TOL: f64 = 1e-8;

#[wasm_bindgen]
pub struct Scene {
    op: ConvOperator,
    mu: f64,
    instance: Option<Instance>,
    last: Option<Recovery>,
}

#[derive(Clone)]
struct Recovery {
    code: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

#[wasm_bindgen]
impl Scene {
    /// `kind` is "experiment" (n=64, m=2 low-coherence atoms) or "dct".
    #[wasm_bindgen(constructor)]
    pub fn new(kind: &str, n: usize, m: usize, signal_len: usize) -> Result<Scene, String> {
        let local = match kind {
            "experiment" => experiment_dictionary(),
            "dct" => dct_local_dictionary(n, m).map_err(err)?,
            other => return Err(format!("unknown dictionary kind {other:?}")),
        };
        let op = ConvOperator::new(local, signal_len).map_err(err)?;
        let mu = op.mutual_coherence();
        Ok(Scene {
            op,
            mu,
            instance: None,
            last: None,
        })
    }

    #[wasm_bindgen(getter)]
    pub fn coherence(&self) -> f64 {
        self.mu
    }

    /// Largest l0,inf for which OMP is guaranteed in the noiseless case.
    #[wasm_bindgen(getter, js_name = ompLimit)]
    pub fn omp_limit(&self) -> f64 {
        0.5 * (1.0 + 1.0 / self.mu)
    }

    #[wasm_bindgen(getter, js_name = signalLen)]
    pub fn signal_len(&self) -> usize {
        self.op.signal_len()
    }

    #[wasm_bindgen(getter)]
    pub fn atoms(&self) -> usize {
        self.op.m()
    }

    /// Draws a new signal and returns the observed samples.
    pub fn generate(&mut self, seed: u64, cardinality: usize, amplitude: f64, noise: f64) -> Result<Vec<f64>, String> {
        let spec = SignalSpec {
            seed,
            stream: 0,
            cardinality: Cardinality::Exact(cardinality),
            amplitude: Amplitude::Uniform { a: amplitude },
            noise: NoiseModel::GlobalNorm(noise),
        };
        let inst = generate_instance(&self.op, &spec).map_err(err)?;
        let observed = inst.observed.clone();
        self.instance = Some(inst);
        self.last = None;
        Ok(observed)
    }

    pub fn truth(&self) -> Vec<f64> {
        self.instance.as_ref().map(|i| i.gamma.clone()).unwrap_or_default()
    }

    /// l0,inf of the planted code.
    #[wasm_bindgen(getter, js_name = truthDensity)]
    pub fn truth_density(&self) -> usize {
        self.instance.as_ref().map_or(0, |i| i.l0_inf)
    }

    /// Runs OMP for as many steps as the planted code has nonzeros.
    #[wasm_bindgen(js_name = solveOmp)]
    pub fn solve_omp(&mut self) -> Result<Vec<f64>, String> {
        let inst = self.instance.as_ref().ok_or("generate a signal first")?;
        let res = omp(&self.op, &inst.observed, &OmpConfig::fixed(inst.l0)).map_err(err)?;
        Ok(self.keep(res.code, res.iterations, true))
    }

    /// Local ADMM with a fixed penalty.
    #[wasm_bindgen(js_name = solveAdmm)]
    pub fn solve_admm(&mut self, lambda: f64, rho: f64, max_iterations: usize) -> Result<Vec<f64>, String> {
        let inst = self.instance.as_ref().ok_or("generate a signal first")?;
        let cfg = BpConfig {
            penalty: Penalty::Fixed(lambda),
            rho,
            max_iterations,
            tol: 1e-6,
            ..BpConfig::default()
        };
        let res = bp_admm_local(&self.op, &inst.observed, &cfg).map_err(err)?;
        Ok(self.keep(res.code, res.iterations, res.converged))
    }

    /// One line describing the last recovery.
    pub fn report(&self) -> String {
        let (Some(inst), Some(rec)) = (&self.instance, &self.last) else {
            return String::new();
        };
        let dist: f64 = inst.gamma.iter().zip(&rec.code).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let found = l0_norm(&rec.code, ZERO_TOL);
        let local = l0_inf_norm(&self.op, &rec.code, ZERO_TOL).unwrap_or(0);
        let guaranteed = inst
            .gamma_min_abs
            .is_some_and(|g| omp_hypothesis(self.mu, inst.l0_inf, inst.eps_local, g));
        format!(
            "{} iterations{}; distance {:.3e}; {} nonzeros (l0,inf {}) vs {} planted (l0,inf {}); eps_L {:.3e}; OMP guarantee for this draw {}",
            rec.iterations,
            if rec.converged { "" } else { " (cap reached)" },
            dist,
            found,
            local,
            inst.l0,
            inst.l0_inf,
            inst.eps_local,
            if guaranteed { "holds" } else { "does not hold" },
        )
    }
}

impl Scene {
    fn keep(&mut self, code: Vec<f64>, iterations: usize, converged: bool) -> Vec<f64> {
        self.last = Some(Recovery {
            code: code.clone(),
            iterations,
            converged,
        });
        code
    }
}
