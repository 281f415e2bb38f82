//! Basis pursuit denoising, `min 0.5 ||Y - D G||^2 + lambda ||G||_1`.
//!
//! Three solvers share one configuration:
//!
//! * [`bp_global_reference`]: proximal gradient on the global problem.
//! * [`bp_admm_local`]: bi-level consensus ADMM over stripes and centres.
//! * [`bp_ist_local`]: iterative soft thresholding expressed with patch
//!   residuals and the local dictionary only. With identical settings it
//!   produces the same iterates as the global reference.
//!
//! The `L0` mode swaps soft for hard thresholding. It carries no convergence
//! guarantee.


use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::conv::{norm2, ConvOperator, StripeDictionary};
use crate::error::{CscError, Result};
use crate::metrics::SupportSet;
use crate::pursuit::{Instant, IterationRecord, PursuitResult};

/// Magnitude below which a returned coefficient is reported as zero.
pub const SUPPORT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Fixed(f64),
    /// `lambda_t = max(initial * decay^(t-1), floor)`. A missing `initial`
    /// means `0.1 * ||D^T Y||_inf`.
    Schedule {
        initial: Option<f64>,
        decay: f64,
        floor: f64,
    },
}

impl Penalty {
    /// Penalty in force at 1-based iteration `t` when solving for `y`.
    pub fn value_at(&self, op: &ConvOperator, y: &[f64], t: usize) -> f64 {
        LambdaSchedule::new(*self, op, y).at(t.max(1))
    }

    pub fn default_schedule() -> Self {
        Penalty::Schedule {
            initial: None,
            decay: 0.99,
            floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    L1,
    L0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpConfig {
    pub penalty: Penalty,
    pub max_iterations: usize,
    /// Relative change of the code between iterations.
    pub tol: f64,
    /// Multiplier on `sigma_max(D)^2` for the gradient step constant.
    pub step_safety: f64,
    pub power_tol: f64,
    /// ADMM step size.
    pub rho: f64,
    /// When set, the ADMM step follows the penalty: `rho_t = ratio * lambda_t`
    /// (falling back to `rho` while `lambda_t` is zero).
    pub rho_per_lambda: Option<f64>,
    pub mode: ThresholdMode,
    pub record_trace: bool,
    /// Iterations at which the global estimate is copied into the result.
    pub snapshot_at: Vec<usize>,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            penalty: Penalty::Fixed(0.1),
            max_iterations: 100_000,
            tol: 1e-8,
            step_safety: 1.01,
            power_tol: 1e-6,
            rho: 1.0,
            rho_per_lambda: None,
            mode: ThresholdMode::L1,
            record_trace: false,
            snapshot_at: Vec::new(),
        }
    }
}

impl BpConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            penalty: Penalty::Fixed(lambda),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CscError::SpecInvalid(m));
        match self.penalty {
            Penalty::Fixed(l) if !(l >= 0.0 && l.is_finite()) => return bad(format!("lambda must be >= 0, got {l}")),
            Penalty::Schedule { initial, decay, floor } => {
                if !(decay > 0.0 && decay < 1.0) {
                    return bad(format!("schedule decay must be in (0,1), got {decay}"));
                }
                if !(floor >= 0.0) || initial.is_some_and(|l| !(l >= 0.0)) {
                    return bad("schedule values must be >= 0".into());
                }
            }
            _ => {}
        }
        if !(self.tol > 0.0) {
            return bad(format!("tolerance must be positive, got {}", self.tol));
        }
        if !(self.step_safety > 1.0) {
            return bad(format!("step safety must exceed 1, got {}", self.step_safety));
        }
        if !(self.rho > 0.0) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if self.rho_per_lambda.is_some_and(|r| !(r > 0.0 && r.is_finite())) {
            return bad("rho ratio must be positive".into());
        }
        if self.max_iterations == 0 {
            return bad("iteration cap must be >= 1".into());
        }
        Ok(())
    }
}

/// Resolved per-iteration penalty.
struct LambdaSchedule {
    penalty: Penalty,
    start: f64,
}

impl LambdaSchedule {
    fn new(penalty: Penalty, op: &ConvOperator, y: &[f64]) -> Self {
        let start = match penalty {
            Penalty::Fixed(l) => l,
            Penalty::Schedule { initial: Some(l), .. } => l,
            Penalty::Schedule { initial: None, .. } => {
                let corr = op.adjoint(y).expect("signal length checked");
                0.1 * corr.iter().fold(0.0f64, |a, c| a.max(c.abs()))
            }
        };
        Self { penalty, start }
    }

    /// Penalty at 1-based iteration `t`.
    fn at(&self, t: usize) -> f64 {
        match self.penalty {
            Penalty::Fixed(l) => l,
            Penalty::Schedule { decay, floor, .. } => {
                (self.start * decay.powi((t - 1).min(i32::MAX as usize) as i32)).max(floor)
            }
        }
    }

    fn settled(&self, t: usize) -> bool {
        match self.penalty {
            Penalty::Fixed(_) => true,
            Penalty::Schedule { floor, .. } => self.at(t) <= floor,
        }
    }
}

/// `sign(v) * max(|v| - t, 0)`, componentwise.
pub fn soft_threshold(v: &[f64], t: f64) -> Vec<f64> {
    v.iter().map(|&x| soft(x, t)).collect()
}

#[inline]
fn soft(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Keeps entries with `|v| > t`.
pub fn hard_threshold(v: &[f64], t: f64) -> Vec<f64> {
    v.iter().map(|&x| hard(x, t)).collect()
}

#[inline]
fn hard(x: f64, t: f64) -> f64 {
    if x.abs() > t {
        x
    } else {
        0.0
    }
}

/// Proximal map of `(lambda/step) * penalty` for the configured mode.
#[inline]
fn shrink(mode: ThresholdMode, x: f64, lambda_over_step: f64) -> f64 {
    match mode {
        ThresholdMode::L1 => soft(x, lambda_over_step),
        ThresholdMode::L0 => hard(x, (2.0 * lambda_over_step).sqrt()),
    }
}

fn penalty_value(mode: ThresholdMode, code: &[f64]) -> f64 {
    match mode {
        ThresholdMode::L1 => code.iter().map(|v| v.abs()).sum(),
        ThresholdMode::L0 => code.iter().filter(|v| **v != 0.0).count() as f64,
    }
}

/// `0.5 ||Y - D code||^2 + lambda ||code||_1`.
pub fn bp_objective(op: &ConvOperator, y: &[f64], code: &[f64], lambda: f64) -> Result<f64> {
    let fit = op.apply(code)?;
    let r2: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(0.5 * r2 + lambda * penalty_value(ThresholdMode::L1, code))
}

/// Gradient step constant `c = step_safety * sigma_max(D)^2`.
pub fn step_constant(op: &ConvOperator, cfg: &BpConfig) -> Result<f64> {
    let s = op.largest_singular_value(cfg.power_tol)?.into_result()?;
    Ok(cfg.step_safety * s * s)
}

fn check_inputs(op: &ConvOperator, y: &[f64], cfg: &BpConfig) -> Result<()> {
    cfg.validate()?;
    if y.len() != op.signal_len() {
        return Err(CscError::DimensionMismatch {
            expected: op.signal_len(),
            got: y.len(),
        });
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(CscError::SpecInvalid(format!("non-finite signal entry at {pos}")));
    }
    Ok(())
}

fn relative_change(prev: &[f64], next: &[f64]) -> (f64, f64) {
    let diff = prev
        .iter()
        .zip(next)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = norm2(next);
    let rel = if scale > 0.0 {
        diff / scale
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    (diff, rel)
}

fn finish(
    op: &ConvOperator,
    code: Vec<f64>,
    residual_norms: Vec<f64>,
    iterations: usize,
    start: Instant,
    converged: bool,
    trace: Vec<IterationRecord>,
    snapshots: Vec<(usize, Vec<f64>)>,
) -> Result<PursuitResult> {
    Ok(PursuitResult {
        support: SupportSet::of_code(op, &code, SUPPORT_TOL)?,
        code,
        residual_norms,
        iterations,
        wall_time: start.elapsed().as_secs_f64(),
        converged,
        trace,
        snapshots,
        reselect_skips: 0,
    })
}

/// Proximal gradient on the global objective with step `1/c`.
pub fn bp_global_reference(op: &ConvOperator, y: &[f64], cfg: &BpConfig) -> Result<PursuitResult> {
    check_inputs(op, y, cfg)?;
    let c = step_constant(op, cfg)?;
    bp_global_reference_with_step(op, y, cfg, c)
}

/// [`bp_global_reference`] with a caller-supplied step constant `c`.
pub fn bp_global_reference_with_step(
    op: &ConvOperator,
    y: &[f64],
    cfg: &BpConfig,
    c: f64,
) -> Result<PursuitResult> {
    check_inputs(op, y, cfg)?;
    let start = Instant::now();
    let schedule = LambdaSchedule::new(cfg.penalty, op, y);
    let mut code = vec![0.0; op.code_len()];
    let mut next = vec![0.0; op.code_len()];
    let mut grad = vec![0.0; op.code_len()];
    let mut fit = vec![0.0; op.signal_len()];
    let mut residual = y.to_vec();
    let mut residual_norms = vec![norm2(&residual)];
    let mut trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iterations {
        let lambda = schedule.at(t);
        op.adjoint_into(&residual, &mut grad);
        for ((nx, g), x) in next.iter_mut().zip(&grad).zip(&code) {
            *nx = shrink(cfg.mode, x + g / c, lambda / c);
        }
        op.apply_into(&next, &mut fit);
        for ((r, yv), f) in residual.iter_mut().zip(y).zip(&fit) {
            *r = yv - f;
        }
        let rn = norm2(&residual);
        residual_norms.push(rn);
        let (diff, rel) = relative_change(&code, &next);
        std::mem::swap(&mut code, &mut next);
        iterations = t;
        if cfg.record_trace {
            trace.push(IterationRecord {
                iter: t,
                objective: 0.5 * rn * rn + lambda * penalty_value(cfg.mode, &code),
                primal_res: rel,
                dual_res: c * diff,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        if cfg.snapshot_at.contains(&t) {
            snapshots.push((t, code.clone()));
        }
        if rel <= cfg.tol && schedule.settled(t) {
            converged = true;
            break;
        }
    }
    finish(op, code, residual_norms, iterations, start, converged, trace, snapshots)
}

/// Patch-local iterative soft thresholding.
///
/// Every update touches only `D_L`, the per-patch codes `alpha_i` and the
/// per-patch residuals `r_i = R_i (Y - X_hat)`.
pub fn bp_ist_local(op: &ConvOperator, y: &[f64], cfg: &BpConfig) -> Result<PursuitResult> {
    check_inputs(op, y, cfg)?;
    let c = step_constant(op, cfg)?;
    bp_ist_local_with_step(op, y, cfg, c)
}

/// [`bp_ist_local`] with a caller-supplied step constant `c`.
pub fn bp_ist_local_with_step(
    op: &ConvOperator,
    y: &[f64],
    cfg: &BpConfig,
    c: f64,
) -> Result<PursuitResult> {
    check_inputs(op, y, cfg)?;
    let start = Instant::now();
    let (n, m, len) = (op.n(), op.m(), op.signal_len());
    let local = op.local();
    let schedule = LambdaSchedule::new(cfg.penalty, op, y);

    let mut alpha = vec![0.0; len * m];
    let mut prev = vec![0.0; len * m];
    let mut patches: Vec<f64> = (0..len).flat_map(|i| (0..n).map(move |r| (i, r))).map(|(i, r)| y[(i + r) % len]).collect();
    let mut x_hat = vec![0.0; len];
    let mut corr = vec![0.0; m];
    let mut piece = vec![0.0; n];
    let mut residual_norms = vec![norm2(y)];
    let mut trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iterations {
        let lambda = schedule.at(t);
        prev.copy_from_slice(&alpha);
        // local coding
        for i in 0..len {
            local.correlate_patch(&patches[i * n..(i + 1) * n], &mut corr);
            for (a, g) in alpha[i * m..(i + 1) * m].iter_mut().zip(&corr) {
                *a = shrink(cfg.mode, *a + g / c, lambda / c);
            }
        }
        // patch aggregation: X_hat = sum_i R_i^T D_L alpha_i
        x_hat.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..len {
            let a = &alpha[i * m..(i + 1) * m];
            if a.iter().all(|v| *v == 0.0) {
                continue;
            }
            for (r, p) in piece.iter_mut().enumerate() {
                *p = (0..m).map(|j| local.get(r, j) * a[j]).sum();
            }
            for (r, p) in piece.iter().enumerate() {
                x_hat[(i + r) % len] += p;
            }
        }
        // residual refresh
        let global_residual: Vec<f64> = y.iter().zip(&x_hat).map(|(a, b)| a - b).collect();
        for i in 0..len {
            for r in 0..n {
                patches[i * n + r] = global_residual[(i + r) % len];
            }
        }
        let rn = norm2(&global_residual);
        residual_norms.push(rn);
        let (diff, rel) = relative_change(&prev, &alpha);
        iterations = t;
        if cfg.record_trace {
            trace.push(IterationRecord {
                iter: t,
                objective: 0.5 * rn * rn + lambda * penalty_value(cfg.mode, &alpha),
                primal_res: rel,
                dual_res: c * diff,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        if cfg.snapshot_at.contains(&t) {
            snapshots.push((t, alpha.clone()));
        }
        if rel <= cfg.tol && schedule.settled(t) {
            converged = true;
            break;
        }
    }
    finish(op, alpha, residual_norms, iterations, start, converged, trace, snapshots)
}

/// Per-stripe state of the consensus ADMM. Column `i` of each matrix belongs
/// to stripe (or centre) `i`.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub stripes: DMatrix<f64>,
    pub centers: DMatrix<f64>,
    pub center_duals: DMatrix<f64>,
    pub stripe_duals: DMatrix<f64>,
    pub global: Vec<f64>,
    pub rho: f64,
    z: StripeSystem,
}

/// Solver for `Z = rho Q^T Q + (1/n) Omega^T Omega + rho I`.
///
/// `Z` is diagonal plus a rank-`n` term, so the Woodbury identity reduces each
/// solve to products with `Omega` and one `n x n` Cholesky factor computed once.
#[derive(Debug, Clone)]
struct StripeSystem {
    /// Inverse of the diagonal part.
    diag_inv: DVector<f64>,
    /// `Omega D0^{-1}`, `n x (2n-1)m`.
    scaled_omega: DMatrix<f64>,
    scaled_omega_t: DMatrix<f64>,
    /// Cholesky factor of `n I + Omega D0^{-1} Omega^T`.
    capacitance: Cholesky<f64, Dyn>,
}

impl StripeSystem {
    fn new(omega: &DMatrix<f64>, n: usize, m: usize, rho: f64) -> Result<Self> {
        let l = omega.ncols();
        let diag_inv = DVector::from_fn(l, |k, _| {
            if (n - 1) * m <= k && k < n * m {
                1.0 / (2.0 * rho)
            } else {
                1.0 / rho
            }
        });
        let mut scaled_omega = omega.clone();
        for (k, mut col) in scaled_omega.column_iter_mut().enumerate() {
            col *= diag_inv[k];
        }
        let mut cap = &scaled_omega * omega.transpose();
        for k in 0..n {
            cap[(k, k)] += n as f64;
        }
        let capacitance = cap
            .cholesky()
            .ok_or_else(|| CscError::RankDeficient("stripe projection matrix is not SPD".into()))?;
        Ok(Self {
            diag_inv,
            scaled_omega_t: scaled_omega.transpose(),
            scaled_omega,
            capacitance,
        })
    }

    /// Overwrites every column of `rhs` with `Z^{-1}` applied to it.
    fn solve_columns(&self, rhs: &mut DMatrix<f64>) {
        let mut small = &self.scaled_omega * &*rhs;
        self.capacitance.solve_mut(&mut small);
        for mut col in rhs.column_iter_mut() {
            col.component_mul_assign(&self.diag_inv);
        }
        rhs.gemm(-1.0, &self.scaled_omega_t, &small, 1.0);
    }
}

impl AdmmState {
    pub fn new(op: &ConvOperator, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(CscError::SpecInvalid(format!("rho must be positive, got {rho}")));
        }
        let (n, m, len, l) = (op.n(), op.m(), op.signal_len(), op.stripe_len());
        let omega = StripeDictionary::build(op.local());
        Ok(Self {
            stripes: DMatrix::zeros(l, len),
            centers: DMatrix::zeros(m, len),
            center_duals: DMatrix::zeros(m, len),
            stripe_duals: DMatrix::zeros(l, len),
            global: vec![0.0; len * m],
            rho,
            z: StripeSystem::new(omega.matrix(), n, m, rho)?,
        })
    }

    /// Switches the step to `rho`, rescaling the scaled duals to match.
    pub fn rescale(&mut self, op: &ConvOperator, rho: f64) -> Result<()> {
        if !(rho > 0.0) {
            return Err(CscError::SpecInvalid(format!("rho must be positive, got {rho}")));
        }
        let f = self.rho / rho;
        self.center_duals *= f;
        self.stripe_duals *= f;
        let omega = StripeDictionary::build(op.local());
        self.z = StripeSystem::new(omega.matrix(), op.n(), op.m(), rho)?;
        self.rho = rho;
        Ok(())
    }

    /// `Z^{-1} b`.
    pub fn z_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut v = DMatrix::from_column_slice(b.len(), 1, b);
        self.z.solve_columns(&mut v);
        v.as_slice().to_vec()
    }

    /// Centres assembled into a global code (block `i` is `alpha_i`).
    pub fn center_code(&self) -> Vec<f64> {
        self.centers.as_slice().to_vec()
    }

    /// `max_i ||Q gamma_i - alpha_i||` and `max_i ||S_i G - gamma_i||`.
    pub fn primal_residuals(&self, op: &ConvOperator) -> (f64, f64) {
        let (n, m) = (op.n(), op.m());
        let mut r_center = 0.0f64;
        let mut r_stripe = 0.0f64;
        let mut s = vec![0.0; op.stripe_len()];
        for i in 0..op.signal_len() {
            let g = self.stripes.column(i);
            let a = self.centers.column(i);
            let rc: f64 = (0..m).map(|j| (g[(n - 1) * m + j] - a[j]).powi(2)).sum();
            op.extract_stripe_into(&self.global, i, &mut s);
            let rs: f64 = s.iter().zip(g.iter()).map(|(x, y)| (x - y).powi(2)).sum();
            r_center = r_center.max(rc.sqrt());
            r_stripe = r_stripe.max(rs.sqrt());
        }
        (r_center, r_stripe)
    }
}

/// Bi-level consensus ADMM.
///
/// The returned code assembles the centre variables `alpha_i`, which are
/// exactly sparse; snapshots hold the averaged global variable.
pub fn bp_admm_local(op: &ConvOperator, y: &[f64], cfg: &BpConfig) -> Result<PursuitResult> {
    Ok(bp_admm_local_state(op, y, cfg)?.0)
}

/// [`bp_admm_local`] returning the final ADMM state as well.
pub fn bp_admm_local_state(
    op: &ConvOperator,
    y: &[f64],
    cfg: &BpConfig,
) -> Result<(PursuitResult, AdmmState)> {
    check_inputs(op, y, cfg)?;
    let start = Instant::now();
    let (n, m, len, l) = (op.n(), op.m(), op.signal_len(), op.stripe_len());
    let schedule = LambdaSchedule::new(cfg.penalty, op, y);
    let step_at = |lambda: f64| match cfg.rho_per_lambda {
        Some(ratio) if lambda > 0.0 => ratio * lambda,
        _ => cfg.rho,
    };
    let mut rho = step_at(schedule.at(1));
    let mut st = AdmmState::new(op, rho)?;
    let omega = StripeDictionary::build(op.local());

    // (1/n) Omega^T R_i Y for every i
    let patch_matrix = DMatrix::from_fn(n, len, |r, i| y[(i + r) % len]);
    let data_term = omega.matrix().transpose() * patch_matrix / n as f64;

    let center = (n - 1) * m..n * m;
    let cover = (2 * n - 1) as f64;
    let mut rhs = DMatrix::zeros(l, len);
    let mut stripe_buf = vec![0.0; l];
    let mut accum = vec![0.0; len * m];
    let mut prev_global = vec![0.0; len * m];
    let mut fit = vec![0.0; len];
    let mut residual_norms = vec![norm2(y)];
    let mut trace = Vec::new();
    let mut snapshots = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for t in 1..=cfg.max_iterations {
        let lambda = schedule.at(t);
        let step = step_at(lambda);
        if step != rho {
            st.rescale(op, step)?;
            rho = step;
        }
        // local thresholding
        let thr = lambda / rho;
        for i in 0..len {
            let g = &st.stripes.as_slice()[i * l + center.start..i * l + center.end];
            let u = &st.center_duals.as_slice()[i * m..(i + 1) * m];
            for ((a, gv), uv) in st.centers.as_mut_slice()[i * m..(i + 1) * m].iter_mut().zip(g).zip(u) {
                *a = shrink(cfg.mode, gv + uv, thr);
            }
        }
        // stripe projection
        {
            let rhs = rhs.as_mut_slice();
            let (data, du) = (data_term.as_slice(), st.stripe_duals.as_slice());
            let (centers, cdu) = (st.centers.as_slice(), st.center_duals.as_slice());
            for i in 0..len {
                let col = &mut rhs[i * l..(i + 1) * l];
                op.extract_stripe_into(&st.global, i, col);
                for ((r, d), u) in col.iter_mut().zip(&data[i * l..(i + 1) * l]).zip(&du[i * l..(i + 1) * l]) {
                    *r = d + rho * (*r + u);
                }
                for (j, k) in center.clone().enumerate() {
                    col[k] += rho * (centers[i * m + j] - cdu[i * m + j]);
                }
            }
        }
        st.z.solve_columns(&mut rhs);
        std::mem::swap(&mut st.stripes, &mut rhs);
        // global update: average over the 2n-1 stripes covering each block
        prev_global.copy_from_slice(&st.global);
        accum.iter_mut().for_each(|v| *v = 0.0);
        {
            let (g, du) = (st.stripes.as_slice(), st.stripe_duals.as_slice());
            for i in 0..len {
                for ((b, gv), uv) in stripe_buf.iter_mut().zip(&g[i * l..(i + 1) * l]).zip(&du[i * l..(i + 1) * l]) {
                    *b = gv - uv;
                }
                op.scatter_stripe_add_unchecked(&stripe_buf, i, &mut accum);
            }
        }
        for (g, a) in st.global.iter_mut().zip(&accum) {
            *g = a / cover;
        }
        // dual updates
        let mut r_center = 0.0f64;
        let mut r_stripe = 0.0f64;
        {
            let g = st.stripes.as_slice();
            let (centers, cdu) = (st.centers.as_slice(), st.center_duals.as_mut_slice());
            for i in 0..len {
                let mut rc = 0.0;
                for (j, k) in center.clone().enumerate() {
                    let d = g[i * l + k] - centers[i * m + j];
                    cdu[i * m + j] += d;
                    rc += d * d;
                }
                r_center = r_center.max(rc);
            }
            let du = st.stripe_duals.as_mut_slice();
            for i in 0..len {
                op.extract_stripe_into(&st.global, i, &mut stripe_buf);
                let mut rs = 0.0;
                for ((u, sv), gv) in du[i * l..(i + 1) * l].iter_mut().zip(&stripe_buf).zip(&g[i * l..(i + 1) * l]) {
                    let d = sv - gv;
                    *u += d;
                    rs += d * d;
                }
                r_stripe = r_stripe.max(rs);
            }
        }
        let (r_center, r_stripe) = (r_center.sqrt(), r_stripe.sqrt());

        let primal = r_center.max(r_stripe);
        let (diff, rel) = relative_change(&prev_global, &st.global);
        let code = st.centers.as_slice();
        op.apply_into(code, &mut fit);
        let rn = y
            .iter()
            .zip(&fit)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        residual_norms.push(rn);
        iterations = t;
        if cfg.record_trace {
            trace.push(IterationRecord {
                iter: t,
                objective: 0.5 * rn * rn + lambda * penalty_value(cfg.mode, code),
                primal_res: primal,
                dual_res: rho * cover.sqrt() * diff,
                wall_time: start.elapsed().as_secs_f64(),
            });
        }
        if cfg.snapshot_at.contains(&t) {
            snapshots.push((t, st.global.clone()));
        }
        if primal < cfg.tol && rel <= cfg.tol && schedule.settled(t) {
            converged = true;
            break;
        }
    }
    let result = finish(
        op,
        st.center_code(),
        residual_norms,
        iterations,
        start,
        converged,
        trace,
        snapshots,
    )?;
    Ok((result, st))
}

/// Subgradient optimality data for a candidate BP minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub lambda: f64,
    /// `||D^T (Y - D code)||_inf`.
    pub max_correlation: f64,
    /// `max_{j in supp} |d_j^T (Y - D code) - lambda sign(code_j)|`.
    pub max_support_deviation: f64,
    pub support_size: usize,
}

impl KktReport {
    /// Both conditions at relative tolerance `rel_tol` of `lambda`.
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.max_correlation <= self.lambda * (1.0 + rel_tol)
            && self.max_support_deviation <= self.lambda * rel_tol
    }
}

pub fn kkt_certificate(
    op: &ConvOperator,
    y: &[f64],
    code: &[f64],
    lambda: f64,
    zero_tol: f64,
) -> Result<KktReport> {
    let fit = op.apply(code)?;
    if y.len() != fit.len() {
        return Err(CscError::DimensionMismatch {
            expected: fit.len(),
            got: y.len(),
        });
    }
    let residual: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let corr = op.adjoint(&residual)?;
    let max_correlation = corr.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut max_support_deviation = 0.0f64;
    let mut support_size = 0;
    for (c, x) in corr.iter().zip(code) {
        if x.abs() > zero_tol {
            support_size += 1;
            max_support_deviation = max_support_deviation.max((c - lambda * x.signum()).abs());
        }
    }
    Ok(KktReport {
        lambda,
        max_correlation,
        max_support_deviation,
        support_size,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conv::LocalDictionary;

    fn op() -> ConvOperator {
        let d = LocalDictionary::normalize(3, 2, &[1.0, 2.0, 3.0, -1.0, 0.5, 2.0]).unwrap().0;
        ConvOperator::new(d, 8).unwrap()
    }

    fn signal() -> Vec<f64> {
        (0..8).map(|t| ((t * 7 % 5) as f64 - 2.0) * 0.4 + 0.1).collect()
    }

    #[test]
    fn soft_threshold_values() {
        assert_eq!(soft_threshold(&[3.0, -1.0, 0.5], 0.0), vec![3.0, -1.0, 0.5]);
        assert_eq!(soft_threshold(&[3.0, -1.0, 0.5], 1.0), vec![2.0, 0.0, 0.0]);
        assert_eq!(soft_threshold(&[-3.0], 1.0), vec![-2.0]);
        assert_eq!(hard_threshold(&[3.0, -1.0, 0.5], 0.9), vec![3.0, -1.0, 0.0]);
    }

    #[test]
    fn soft_threshold_minimizes_prox_objective_on_grid() {
        for &v in &[-2.3, -0.4, 0.0, 0.7, 1.9] {
            for &t in &[0.0, 0.5, 1.0] {
                let x = soft_threshold(&[v], t)[0];
                let f = |z: f64| 0.5 * (z - v).powi(2) + t * z.abs();
                let grid_best = (-4000..=4000)
                    .map(|k| k as f64 * 1e-3)
                    .map(f)
                    .fold(f64::INFINITY, f64::min);
                assert!(f(x) <= grid_best + 1e-12, "v={v} t={t}");
            }
        }
    }

    #[test]
    fn large_lambda_gives_zero() {
        let op = op();
        let y = signal();
        let corr = op.adjoint(&y).unwrap();
        let lmax = corr.iter().fold(0.0f64, |a, c| a.max(c.abs()));
        let r = bp_global_reference(&op, &y, &BpConfig::with_lambda(lmax * 1.0001)).unwrap();
        assert!(r.code.iter().all(|v| *v == 0.0));
        assert!(r.converged);
    }

    #[test]
    fn zero_signal_converges_in_one_iteration() {
        let op = op();
        let cfg = BpConfig::with_lambda(0.1);
        for r in [
            bp_global_reference(&op, &[0.0; 8], &cfg).unwrap(),
            bp_ist_local(&op, &[0.0; 8], &cfg).unwrap(),
        ] {
            assert_eq!(r.iterations, 1);
            assert!(r.code.iter().all(|v| *v == 0.0));
        }
        let r = bp_admm_local(&op, &[0.0; 8], &cfg).unwrap();
        assert!(r.converged);
        assert!(r.code.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ist_first_iteration_is_scaled_threshold_of_correlation() {
        let op = op();
        let y = signal();
        let cfg = BpConfig {
            max_iterations: 1,
            ..BpConfig::with_lambda(0.05)
        };
        let c = step_constant(&op, &cfg).unwrap();
        let r = bp_ist_local(&op, &y, &cfg).unwrap();
        let corr: Vec<f64> = op.adjoint(&y).unwrap().iter().map(|v| v / c).collect();
        let expected = soft_threshold(&corr, 0.05 / c);
        for (a, b) in r.code.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_satisfies_kkt() {
        let op = op();
        let y = signal();
        let r = bp_global_reference(&op, &y, &BpConfig::with_lambda(0.1)).unwrap();
        assert!(r.converged);
        let k = kkt_certificate(&op, &y, &r.code, 0.1, SUPPORT_TOL).unwrap();
        assert!(k.max_correlation <= 0.1 + 1e-6, "{k:?}");
        assert!(k.max_support_deviation <= 1e-6, "{k:?}");
    }

    #[test]
    fn config_validation() {
        let op = op();
        let y = signal();
        let mut cfg = BpConfig::with_lambda(-1.0);
        assert!(bp_global_reference(&op, &y, &cfg).is_err());
        cfg.penalty = Penalty::Fixed(0.1);
        cfg.rho = 0.0;
        assert!(bp_admm_local(&op, &y, &cfg).is_err());
        cfg.rho = 1.0;
        cfg.step_safety = 1.0;
        assert!(bp_ist_local(&op, &y, &cfg).is_err());
        cfg.step_safety = 1.01;
        cfg.penalty = Penalty::Schedule { initial: None, decay: 1.5, floor: 0.0 };
        assert!(bp_global_reference(&op, &y, &cfg).is_err());
        assert!(bp_global_reference(&op, &y[..7], &BpConfig::default()).is_err());
    }

    #[test]
    fn schedule_decays_to_floor() {
        let op = op();
        let y = signal();
        let s = LambdaSchedule::new(
            Penalty::Schedule { initial: Some(1.0), decay: 0.5, floor: 0.1 },
            &op,
            &y,
        );
        assert_eq!(s.at(1), 1.0);
        assert_eq!(s.at(2), 0.5);
        assert_eq!(s.at(10), 0.1);
        assert!(!s.settled(2) && s.settled(5));
    }

    #[test]
    fn admm_stripe_solve_inverts_z() {
        let op = op();
        let st = AdmmState::new(&op, 0.7).unwrap();
        let l = op.stripe_len();
        let omega = StripeDictionary::build(op.local());
        let mut z = omega.matrix().transpose() * omega.matrix() / 3.0;
        for k in 0..l {
            z[(k, k)] += 0.7;
        }
        for k in 4..6 {
            z[(k, k)] += 0.7;
        }
        let b: Vec<f64> = (0..l).map(|k| (k as f64 * 0.37).sin()).collect();
        let x = DVector::from_vec(st.z_solve(&b));
        let back = &z * x;
        for (a, e) in back.iter().zip(&b) {
            assert!((a - e).abs() < 1e-12);
        }
    }
}
