//! Orthogonal Matching Pursuit over the implicit convolutional dictionary.
//!
//! The least-squares refit keeps an incrementally updated Cholesky factor of
//! the restricted Gram, assembled from overlapping-atom inner products, so no
//! global matrix is formed.


use crate::conv::{norm2, ConvOperator};
use crate::error::{CscError, Result};
use crate::metrics::SupportSet;
use crate::pursuit::{Instant, PursuitResult};

/// Pivot floor (squared) below which the restricted Gram counts as singular.
pub const GRAM_PIVOT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OmpStop {
    /// Run exactly `k` iterations.
    FixedIterations(usize),
    /// Stop once `||r||_2 <= eps`.
    ResidualThreshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpConfig {
    pub stop: OmpStop,
    pub max_iterations: usize,
}

impl OmpConfig {
    pub fn fixed(k: usize) -> Self {
        Self {
            stop: OmpStop::FixedIterations(k),
            max_iterations: k.max(1),
        }
    }

    pub fn residual(eps: f64, max_iterations: usize) -> Self {
        Self {
            stop: OmpStop::ResidualThreshold(eps),
            max_iterations,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(CscError::SpecInvalid("OMP iteration cap must be >= 1".into()));
        }
        match self.stop {
            OmpStop::FixedIterations(k) if k > self.max_iterations => Err(CscError::SpecInvalid(
                format!("fixed iteration count {k} exceeds cap {}", self.max_iterations),
            )),
            OmpStop::ResidualThreshold(eps) if !(eps >= 0.0) => Err(CscError::SpecInvalid(
                format!("residual threshold must be >= 0, got {eps}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Lower-triangular factor grown one row at a time.
struct GrowingCholesky {
    rows: Vec<Vec<f64>>,
}

impl GrowingCholesky {
    fn new() -> Self {
        Self { rows: Vec::new() }
    }

    /// Appends a column with off-diagonal entries `g` and diagonal `diag`.
    fn push(&mut self, g: &[f64], diag: f64) -> Result<()> {
        let w = self.forward(g);
        let pivot = diag - w.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > GRAM_PIVOT_FLOOR) {
            return Err(CscError::RankDeficient(format!(
                "pivot {pivot:e} at support size {}",
                self.rows.len() + 1
            )));
        }
        let mut row = w;
        row.push(pivot.sqrt());
        self.rows.push(row);
        Ok(())
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let mut y = Vec::with_capacity(b.len());
        for (i, row) in self.rows.iter().enumerate() {
            let s: f64 = row[..i].iter().zip(&y).map(|(l, v)| l * v).sum();
            y.push((b[i] - s) / row[i]);
        }
        y
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.forward(b);
        let k = x.len();
        for i in (0..k).rev() {
            let mut s = x[i];
            for j in i + 1..k {
                s -= self.rows[j][i] * x[j];
            }
            x[i] = s / self.rows[i][i];
        }
        x
    }
}

pub fn omp(op: &ConvOperator, y: &[f64], cfg: &OmpConfig) -> Result<PursuitResult> {
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
    let start = Instant::now();
    let proj_y = op.adjoint(y)?;
    let mut residual = y.to_vec();
    let mut corr = vec![0.0; op.code_len()];
    let mut selected: Vec<usize> = Vec::new();
    let mut in_support = vec![false; op.code_len()];
    let mut rhs: Vec<f64> = Vec::new();
    let mut coeffs: Vec<f64> = Vec::new();
    let mut chol = GrowingCholesky::new();
    let mut residual_norms = vec![norm2(&residual)];
    let mut reselect_skips = 0;
    let mut converged = false;

    loop {
        let rn = *residual_norms.last().unwrap();
        let done = match cfg.stop {
            OmpStop::FixedIterations(k) => selected.len() >= k,
            OmpStop::ResidualThreshold(eps) => rn <= eps,
        };
        if done || rn == 0.0 {
            converged = done || matches!(cfg.stop, OmpStop::FixedIterations(_));
            break;
        }
        if selected.len() >= cfg.max_iterations {
            break;
        }

        op.adjoint_into(&residual, &mut corr);
        let mut best: Option<(usize, f64)> = None;
        let mut best_any = 0.0f64;
        let mut best_any_selected = false;
        for (j, c) in corr.iter().enumerate() {
            let a = c.abs();
            if a > best_any {
                best_any = a;
                best_any_selected = in_support[j];
            }
            if !in_support[j] && best.is_none_or(|(_, b)| a > b) {
                best = Some((j, a));
            }
        }
        if best_any_selected {
            reselect_skips += 1;
        }
        let Some((atom, magnitude)) = best else { break };
        if magnitude == 0.0 {
            break;
        }

        let g: Vec<f64> = selected.iter().map(|&t| op.atom_inner(t, atom)).collect();
        chol.push(&g, op.atom_inner(atom, atom))?;
        selected.push(atom);
        in_support[atom] = true;
        rhs.push(proj_y[atom]);
        coeffs = chol.solve(&rhs);

        residual.copy_from_slice(y);
        let mut unit = vec![0.0; op.code_len()];
        for (&t, &x) in selected.iter().zip(&coeffs) {
            unit[t] = x;
        }
        let fit = op.apply(&unit)?;
        for (r, f) in residual.iter_mut().zip(&fit) {
            *r -= f;
        }
        residual_norms.push(norm2(&residual));
    }

    let mut code = vec![0.0; op.code_len()];
    for (&t, &x) in selected.iter().zip(&coeffs) {
        code[t] = x;
    }
    Ok(PursuitResult {
        support: SupportSet::new(op, selected.clone())?,
        code,
        iterations: selected.len(),
        residual_norms,
        wall_time: start.elapsed().as_secs_f64(),
        converged,
        trace: Vec::new(),
        snapshots: Vec::new(),
        reselect_skips,
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

    #[test]
    fn single_atom_is_recovered() {
        let op = op();
        let y = op.atom_column(9);
        let r = omp(&op, &y, &OmpConfig::fixed(1)).unwrap();
        assert_eq!(r.support.indices(), &[9]);
        assert!((r.code[9] - 1.0).abs() < 1e-12);
        assert!(r.residual_norms.last().unwrap().abs() < 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn zero_signal_stops_immediately() {
        let op = op();
        let r = omp(&op, &[0.0; 8], &OmpConfig::residual(0.0, 16)).unwrap();
        assert_eq!(r.iterations, 0);
        assert!(r.support.is_empty());
        assert!(r.converged);
    }

    #[test]
    fn residual_rule_cap_is_flagged() {
        let op = op();
        let y: Vec<f64> = (0..8).map(|t| (t as f64).sin() + 0.3).collect();
        let r = omp(&op, &y, &OmpConfig::residual(0.0, 1)).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(!r.converged);
        assert!(matches!(r.into_converged(), Err(CscError::NoConvergence { .. })));
    }

    #[test]
    fn config_validation() {
        let op = op();
        let y = vec![1.0; 8];
        assert!(omp(&op, &y, &OmpConfig { stop: OmpStop::FixedIterations(3), max_iterations: 2 }).is_err());
        assert!(omp(&op, &y, &OmpConfig::residual(-1.0, 5)).is_err());
        assert!(omp(&op, &[1.0; 7], &OmpConfig::fixed(1)).is_err());
        assert!(omp(&op, &[f64::NAN; 8], &OmpConfig::fixed(1)).is_err());
    }

    #[test]
    fn duplicated_filters_are_rank_deficient() {
        let d = LocalDictionary::normalize(2, 2, &[1.0, 1.0, 1.0, 1.0]).unwrap().0;
        let op = ConvOperator::new(d, 4).unwrap();
        let y = vec![1.0, 2.0, -1.0, 0.5];
        assert!(matches!(
            omp(&op, &y, &OmpConfig::fixed(4)),
            Err(CscError::RankDeficient(_))
        ));
    }

    #[test]
    fn growing_cholesky_solves_spd_system() {
        let mut c = GrowingCholesky::new();
        c.push(&[], 4.0).unwrap();
        c.push(&[2.0], 3.0).unwrap();
        // [[4,2],[2,3]] x = [2, 1] -> x = [0.5, 0]
        let x = c.solve(&[2.0, 1.0]);
        assert!((x[0] - 0.5).abs() < 1e-15 && x[1].abs() < 1e-15);
    }
}
