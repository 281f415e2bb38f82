//! Sparsity measures and theorem predicates for the convolutional model.
//!
//! Hypothesis checks return plain booleans and bounds come back as `Option`,
//! absent whenever the corresponding hypothesis fails. That lets a caller
//! tabulate populations on both sides of a threshold without error handling.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::conv::{norm2, ConvOperator};
use crate::error::{CscError, Result};
use crate::format::fmt_f64;

/// Default magnitude below which a coefficient counts as zero.
pub const ZERO_TOL: f64 = 1e-10;

/// Enumeration guard for [`srip_exact`].
pub const MAX_ENUMERATED_SUPPORTS: usize = 10_000_000;

/// Largest support accepted by [`erc_constant`].
pub const MAX_ERC_SUPPORT: usize = 4096;

/// A sorted set of atom indices of one convolutional model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    indices: Vec<usize>,
    n: usize,
    m: usize,
    len: usize,
}

impl SupportSet {
    /// Sorts and deduplicates `indices`; fails if any index is out of range.
    pub fn new(op: &ConvOperator, mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last >= op.code_len() {
                return Err(CscError::IndexOutOfRange {
                    index: last,
                    len: op.code_len(),
                });
            }
        }
        Ok(Self {
            indices,
            n: op.n(),
            m: op.m(),
            len: op.signal_len(),
        })
    }

    /// Support of a code, counting entries with `|v| > tol`.
    pub fn of_code(op: &ConvOperator, code: &[f64], tol: f64) -> Result<Self> {
        if code.len() != op.code_len() {
            return Err(CscError::DimensionMismatch {
                expected: op.code_len(),
                got: code.len(),
            });
        }
        Self::new(op, crate::conv::support_of(code, tol))
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn is_subset_of(&self, other: &SupportSet) -> bool {
        self.indices.iter().all(|i| other.contains(*i))
    }

    /// l0,inf of the support.
    pub fn l0_inf(&self) -> usize {
        let mut counts = vec![0usize; self.len];
        for &i in &self.indices {
            counts[i / self.m] += 1;
        }
        max_stripe_count(&counts, self.n)
    }
}

/// Largest sum of `counts` over any cyclic window of `2n-1` shifts.
fn max_stripe_count(counts: &[usize], n: usize) -> usize {
    let len = counts.len();
    let width = 2 * n - 1;
    let at = |s: isize| counts[s.rem_euclid(len as isize) as usize];
    let lo = -(n as isize - 1);
    let mut window: usize = (0..width as isize).map(|k| at(lo + k)).sum();
    let mut best = window;
    for i in 1..len as isize {
        window += at(i + n as isize - 1);
        window -= at(i - n as isize);
        best = best.max(window);
    }
    best
}

/// Number of entries with `|v| > tol`.
pub fn l0_norm(code: &[f64], tol: f64) -> usize {
    code.iter().filter(|v| v.abs() > tol).count()
}

/// Maximum l0 count over all stripes of the code.
pub fn l0_inf_norm(op: &ConvOperator, code: &[f64], tol: f64) -> Result<usize> {
    if code.len() != op.code_len() {
        return Err(CscError::DimensionMismatch {
            expected: op.code_len(),
            got: code.len(),
        });
    }
    let counts: Vec<usize> = code
        .chunks(op.m())
        .map(|block| l0_norm(block, tol))
        .collect();
    Ok(max_stripe_count(&counts, op.n()))
}

pub fn support_l0_inf(support: &SupportSet) -> usize {
    support.l0_inf()
}

/// Coherence bound on the stripe RIP constant: `(k-1) mu`.
pub fn srip_bound(mu: f64, k: usize) -> f64 {
    k.saturating_sub(1) as f64 * mu
}

/// Walks every support whose l0,inf is exactly `k`, calling `visit` on each.
///
/// Fails with `TooLarge` once more than `limit` supports have been produced.
pub fn enumerate_supports(
    op: &ConvOperator,
    k: usize,
    limit: usize,
    mut visit: impl FnMut(&[usize]),
) -> Result<usize> {
    let mut walker = SupportWalker {
        op,
        k,
        limit,
        stripe_counts: vec![0; op.signal_len()],
        chosen: Vec::new(),
        produced: 0,
        maximal_only: false,
    };
    walker.walk(0, &mut visit)?;
    Ok(walker.produced)
}

struct SupportWalker<'a> {
    op: &'a ConvOperator,
    k: usize,
    limit: usize,
    stripe_counts: Vec<usize>,
    chosen: Vec<usize>,
    produced: usize,
    maximal_only: bool,
}

impl SupportWalker<'_> {
    fn stripes_of(&self, atom: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.op.n();
        let len = self.op.signal_len();
        let s = atom / self.op.m();
        (0..2 * n - 1).map(move |t| (s + t + len * n - (n - 1)) % len)
    }

    fn can_add(&self, atom: usize) -> bool {
        self.stripes_of(atom).all(|i| self.stripe_counts[i] < self.k)
    }

    fn adjust(&mut self, atom: usize, add: bool) {
        let stripes: Vec<usize> = self.stripes_of(atom).collect();
        for i in stripes {
            if add {
                self.stripe_counts[i] += 1;
            } else {
                self.stripe_counts[i] -= 1;
            }
        }
    }

    fn walk(&mut self, next: usize, visit: &mut impl FnMut(&[usize])) -> Result<()> {
        if next == self.op.code_len() {
            let reaches_k = self.stripe_counts.contains(&self.k);
            let maximal = !self.maximal_only
                || (0..self.op.code_len())
                    .all(|a| self.chosen.binary_search(&a).is_ok() || !self.can_add(a));
            if reaches_k && maximal {
                self.produced += 1;
                if self.produced > self.limit {
                    return Err(CscError::TooLarge(format!(
                        "more than {} supports with l0,inf = {}",
                        self.limit, self.k
                    )));
                }
                visit(&self.chosen);
            }
            return Ok(());
        }
        if self.can_add(next) {
            self.adjust(next, true);
            self.chosen.push(next);
            self.walk(next + 1, visit)?;
            self.chosen.pop();
            self.adjust(next, false);
        }
        self.walk(next + 1, visit)
    }
}

/// Restricted Gram `D_T^T D_T`, built from overlapping atom pairs.
pub fn restricted_gram(op: &ConvOperator, support: &[usize]) -> DMatrix<f64> {
    let k = support.len();
    DMatrix::from_fn(k, k, |r, c| op.atom_inner(support[r], support[c]))
}

/// Exact stripe RIP constant by exhaustive enumeration.
///
/// By eigenvalue interlacing only supports that cannot be extended without
/// exceeding l0,inf = k need their Gram spectrum evaluated.
pub fn srip_exact(op: &ConvOperator, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(CscError::SpecInvalid("k must be at least 1".into()));
    }
    let mut walker = SupportWalker {
        op,
        k,
        limit: MAX_ENUMERATED_SUPPORTS,
        stripe_counts: vec![0; op.signal_len()],
        chosen: Vec::new(),
        produced: 0,
        maximal_only: true,
    };
    let mut delta = 0.0f64;
    walker.walk(0, &mut |support: &[usize]| {
        let eig = SymmetricEigen::new(restricted_gram(op, support)).eigenvalues;
        for &l in eig.iter() {
            delta = delta.max((1.0 - l).abs());
        }
    })?;
    Ok(delta)
}

/// `4 eps^2 / (1 - (2k-1) mu)`, present only when `k < (1 + 1/mu) / 2`.
pub fn stability_bound_p0inf(eps: f64, mu: f64, k: usize) -> Option<f64> {
    if !erc_coherence_condition(mu, k) {
        return None;
    }
    let denom = 1.0 - (2.0 * k as f64 - 1.0) * mu;
    (denom > 0.0).then(|| 4.0 * eps * eps / denom)
}

/// The tighter form `4 eps^2 / (1 - delta_2k)`.
pub fn stability_bound_p0inf_srip(eps: f64, delta_2k: f64) -> Option<f64> {
    (delta_2k < 1.0).then(|| 4.0 * eps * eps / (1.0 - delta_2k))
}

/// OMP success condition:
/// `k < (1 + 1/mu)/2 - (1/mu) * eps_local / gamma_min_abs`.
pub fn omp_hypothesis(mu: f64, k: usize, eps_local: f64, gamma_min_abs: f64) -> bool {
    if mu == 0.0 {
        return eps_local == 0.0 || gamma_min_abs > 0.0 && eps_local / gamma_min_abs < 0.5;
    }
    (k as f64) < 0.5 * (1.0 + 1.0 / mu) - eps_local / (mu * gamma_min_abs)
}

/// Same condition solved for the noise-to-signal ratio:
/// `eps_local / gamma_min_abs < (mu/2)(1 + 1/mu) - mu k`.
pub fn omp_phase_threshold(mu: f64, k: usize) -> f64 {
    0.5 * mu * (1.0 + 1.0 / mu) - mu * k as f64
}

/// Squared-distance bound `eps^2 / (1 - mu (k-1))` for the OMP estimate.
pub fn omp_error_bound(eps: f64, mu: f64, k: usize) -> Option<f64> {
    let denom = 1.0 - mu * k.saturating_sub(1) as f64;
    (denom > 0.0).then(|| eps * eps / denom)
}

/// Exact recovery constant `1 - max_{i not in T} ||D_T^+ d_i||_1`.
///
/// Only atoms overlapping the support are visited; the rest have
/// `D_T^T d_i = 0`. The empty support yields 1.
pub fn erc_constant(op: &ConvOperator, support: &SupportSet) -> Result<f64> {
    let t = support.indices();
    if t.is_empty() {
        return Ok(1.0);
    }
    if t.len() > MAX_ERC_SUPPORT {
        return Err(CscError::TooLarge(format!(
            "support of size {} exceeds {}",
            t.len(),
            MAX_ERC_SUPPORT
        )));
    }
    let gram = restricted_gram(op, t);
    let min_eig = SymmetricEigen::new(gram.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    // singular values of D_T are square roots of the Gram spectrum
    if !(min_eig > 1e-20) {
        return Err(CscError::RankDeficient(format!(
            "smallest Gram eigenvalue {min_eig:e}"
        )));
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| CscError::RankDeficient("Cholesky factorization failed".into()))?;
    let mut candidates: Vec<usize> = t.iter().flat_map(|&a| op.overlapping_atoms(a)).collect();
    candidates.sort_unstable();
    candidates.dedup();
    let mut worst = 0.0f64;
    for i in candidates {
        if support.contains(i) {
            continue;
        }
        let rhs = DVector::from_iterator(t.len(), t.iter().map(|&a| op.atom_inner(a, i)));
        let coeffs = chol.solve(&rhs);
        worst = worst.max(coeffs.iter().map(|c| c.abs()).sum());
    }
    Ok(1.0 - worst)
}

/// `k < (1 + 1/mu) / 2`, the coherence condition under which the ERC holds.
pub fn erc_coherence_condition(mu: f64, k: usize) -> bool {
    if mu == 0.0 {
        return true;
    }
    (k as f64) < 0.5 * (1.0 + 1.0 / mu)
}

/// Coherence bound `k mu / (1 - (k-1) mu)` on `max ||D_T^+ d_i||_1`.
pub fn erc_coherence_bound(mu: f64, k: usize) -> Option<f64> {
    let denom = 1.0 - k.saturating_sub(1) as f64 * mu;
    (denom > 0.0).then(|| k as f64 * mu / denom)
}

/// `k < (1 + 1/mu) / 3`, the hypothesis of the BP stability guarantee.
pub fn bp_hypothesis(mu: f64, k: usize) -> bool {
    if mu == 0.0 {
        return true;
    }
    (k as f64) < (1.0 + 1.0 / mu) / 3.0
}

/// `(15/2) eps_local`, the l_inf error bound of the BP solution.
pub fn bp_linf_bound(eps_local: f64) -> f64 {
    7.5 * eps_local
}

/// Indices whose magnitude exceeds `(15/2) eps_local`; BP must recover them.
pub fn bp_guaranteed_entries(code: &[f64], eps_local: f64) -> Vec<usize> {
    let t = bp_linf_bound(eps_local);
    crate::conv::support_of(code, t)
}

/// Least-squares code restricted to `support`: the minimizer of
/// `||y - D code||_2` with zeros off the support.
pub fn support_least_squares(op: &ConvOperator, y: &[f64], support: &SupportSet) -> Result<Vec<f64>> {
    if y.len() != op.signal_len() {
        return Err(CscError::DimensionMismatch {
            expected: op.signal_len(),
            got: y.len(),
        });
    }
    let t = support.indices();
    let mut code = vec![0.0; op.code_len()];
    if t.is_empty() {
        return Ok(code);
    }
    let corr = op.adjoint(y)?;
    let rhs = DVector::from_iterator(t.len(), t.iter().map(|&a| corr[a]));
    let chol = restricted_gram(op, t)
        .cholesky()
        .ok_or_else(|| CscError::RankDeficient("restricted Gram is singular".into()))?;
    for (&a, v) in t.iter().zip(chol.solve(&rhs).iter()) {
        code[a] = *v;
    }
    Ok(code)
}

/// Largest l2 norm over all `n`-sample periodic patches of `noise`.
pub fn local_noise_level(noise: &[f64], n: usize) -> Result<f64> {
    let len = noise.len();
    if n == 0 || n > len {
        return Err(CscError::SpecInvalid(format!(
            "patch length {n} must be in 1..={len}"
        )));
    }
    let mut best = 0.0f64;
    for i in 0..len {
        let e: f64 = (0..n).map(|r| noise[(i + r) % len].powi(2)).sum();
        best = best.max(e);
    }
    Ok(best.sqrt())
}

/// Eigenvalue enclosure `(1 - (k-1) mu, 1 + (k-1) mu)` of any restricted Gram
/// whose support has l0,inf = k.
pub fn gram_eigen_bounds(mu: f64, k: usize) -> (f64, f64) {
    let d = srip_bound(mu, k);
    (1.0 - d, 1.0 + d)
}

/// Hypothesis outcome and bound for one theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremRecord {
    pub hypothesis_holds: bool,
    pub bound_value: Option<f64>,
}

impl TheoremRecord {
    fn gated(holds: bool, bound: Option<f64>) -> Self {
        let bound_value = if holds { bound } else { None };
        Self {
            hypothesis_holds: holds && bound_value.is_some(),
            bound_value,
        }
    }
}

/// Evaluated hypotheses and bounds for a (dictionary, code, noise) triple.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub signal_len: usize,
    pub n: usize,
    pub m: usize,
    pub l0: usize,
    pub l0_inf: usize,
    pub mu: f64,
    pub eps_global: f64,
    pub eps_local: f64,
    pub gamma_min_abs: Option<f64>,
    /// Stable recovery of OMP; the bound is on the squared l2 error.
    pub omp: TheoremRecord,
    /// Stable recovery of BP with `lambda = 4 eps_local`; the bound is on the l_inf error.
    pub bp: TheoremRecord,
    /// Stability of the l0,inf-constrained problem; squared l2 bound.
    pub p0inf: TheoremRecord,
}

pub const BOUND_REPORT_COLUMNS: [&str; 14] = [
    "N",
    "n",
    "m",
    "l0",
    "l0_inf",
    "mu",
    "eps",
    "eps_L",
    "gamma_min",
    "omp_hyp",
    "omp_bound",
    "bp_hyp",
    "bp_linf_bound",
    "p0inf_bound",
];

impl BoundReport {
    pub fn evaluate(op: &ConvOperator, mu: f64, code: &[f64], noise: &[f64], tol: f64) -> Result<Self> {
        let l0 = l0_norm(code, tol);
        let l0_inf = l0_inf_norm(op, code, tol)?;
        if noise.len() != op.signal_len() {
            return Err(CscError::DimensionMismatch {
                expected: op.signal_len(),
                got: noise.len(),
            });
        }
        let eps_global = norm2(noise);
        let eps_local = local_noise_level(noise, op.n())?;
        let gamma_min_abs = code
            .iter()
            .map(|v| v.abs())
            .filter(|v| *v > tol)
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
        let omp_holds = gamma_min_abs
            .map(|g| omp_hypothesis(mu, l0_inf, eps_local, g))
            .unwrap_or(false);
        let bp_holds = bp_hypothesis(mu, l0_inf);
        let p0_bound = stability_bound_p0inf(eps_global, mu, l0_inf);
        Ok(Self {
            signal_len: op.signal_len(),
            n: op.n(),
            m: op.m(),
            l0,
            l0_inf,
            mu,
            eps_global,
            eps_local,
            gamma_min_abs,
            omp: TheoremRecord::gated(omp_holds, omp_error_bound(eps_global, mu, l0_inf)),
            bp: TheoremRecord::gated(bp_holds, Some(bp_linf_bound(eps_local))),
            p0inf: TheoremRecord::gated(p0_bound.is_some(), p0_bound),
        })
    }

    pub fn csv_header() -> String {
        BOUND_REPORT_COLUMNS.join(",")
    }

    /// One CSV row; absent values are empty fields.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        [
            self.signal_len.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.l0.to_string(),
            self.l0_inf.to_string(),
            fmt_f64(self.mu),
            fmt_f64(self.eps_global),
            fmt_f64(self.eps_local),
            opt(self.gamma_min_abs),
            (self.omp.hypothesis_holds as u8).to_string(),
            opt(self.omp.bound_value),
            (self.bp.hypothesis_holds as u8).to_string(),
            opt(self.bp.bound_value),
            opt(self.p0inf.bound_value),
        ]
        .join(",")
    }

    /// Flat `key=value` block, one pair per line, keys as in the CSV header.
    pub fn to_key_values(&self) -> String {
        BOUND_REPORT_COLUMNS
            .iter()
            .zip(self.csv_row().split(','))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}
