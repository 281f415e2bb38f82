//! Convolutional dictionary model.
//!
//! The global dictionary `D` (N x Nm) is never stored. It is represented by the
//! local filters plus the signal length, and applied through sliding
//! correlations under a periodic boundary. Coefficients are laid out
//! position-major: the `m` coefficients of shift `i` occupy `i*m .. (i+1)*m`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CscError, Result};

/// Column norms below this are treated as zero atoms.
pub const ZERO_ATOM_NORM: f64 = 1e-14;

/// Upper bound on the number of entries a materialized dictionary may hold.
pub const MATERIALIZE_MAX_ENTRIES: usize = 1 << 26;

/// The `n x m` matrix of local filters, each with unit l2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDictionary {
    n: usize,
    m: usize,
    // column-major: atom j is atoms[j*n .. (j+1)*n]
    atoms: Vec<f64>,
}

impl LocalDictionary {
    /// Normalizes the columns of a raw column-major `n x m` matrix.
    ///
    /// Returns the dictionary together with the original column norms.
    pub fn normalize(n: usize, m: usize, raw: &[f64]) -> Result<(Self, Vec<f64>)> {
        if n == 0 || m == 0 {
            return Err(CscError::SpecInvalid(format!(
                "local dictionary needs n >= 1 and m >= 1 (got n={n}, m={m})"
            )));
        }
        if raw.len() != n * m {
            return Err(CscError::DimensionMismatch {
                expected: n * m,
                got: raw.len(),
            });
        }
        if let Some(pos) = raw.iter().position(|v| !v.is_finite()) {
            return Err(CscError::SpecInvalid(format!(
                "non-finite entry at position {pos}"
            )));
        }
        let mut atoms = raw.to_vec();
        let mut factors = Vec::with_capacity(m);
        for (j, col) in atoms.chunks_mut(n).enumerate() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < ZERO_ATOM_NORM {
                return Err(CscError::ZeroAtom { index: j, norm });
            }
            // already-unit columns are kept bit-for-bit so normalization is idempotent
            if (norm - 1.0).abs() > 4.0 * f64::EPSILON {
                col.iter_mut().for_each(|v| *v /= norm);
            }
            factors.push(norm);
        }
        Ok((Self { n, m, atoms }, factors))
    }

    /// Builds from row-major data (`n` rows of `m` values), as stored on disk.
    pub fn from_rows(n: usize, m: usize, rows: &[f64]) -> Result<(Self, Vec<f64>)> {
        if rows.len() != n * m {
            return Err(CscError::DimensionMismatch {
                expected: n * m,
                got: rows.len(),
            });
        }
        let mut cols = vec![0.0; n * m];
        for r in 0..n {
            for j in 0..m {
                cols[j * n + r] = rows[r * m + j];
            }
        }
        Self::normalize(n, m, &cols)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.n..(j + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, row: usize, atom: usize) -> f64 {
        self.atoms[atom * self.n + row]
    }

    /// Column-major storage, atom by atom.
    pub fn as_column_major(&self) -> &[f64] {
        &self.atoms
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.m, &self.atoms)
    }

    /// `D_L^T p` for a patch `p` of length `n`.
    pub fn correlate_patch(&self, patch: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self
                .atom(j)
                .iter()
                .zip(patch)
                .map(|(a, p)| a * p)
                .sum();
        }
    }
}

/// Implicit periodic convolutional dictionary of shape `N x Nm`.
#[derive(Debug, Clone)]
pub struct ConvOperator {
    local: LocalDictionary,
    len: usize,
    // inner products between atom (s, j) and atom (s + d mod N, k), indexed
    // [(d * m + j) * m + k]; zero when the two atoms do not overlap
    cross: Vec<f64>,
}

impl ConvOperator {
    pub fn new(local: LocalDictionary, signal_len: usize) -> Result<Self> {
        if signal_len < local.n() {
            return Err(CscError::SpecInvalid(format!(
                "signal length {signal_len} shorter than patch length {}",
                local.n()
            )));
        }
        let cross = atom_cross_table(&local, signal_len);
        Ok(Self {
            local,
            len: signal_len,
            cross,
        })
    }

    pub fn local(&self) -> &LocalDictionary {
        &self.local
    }

    /// Patch length `n`.
    pub fn n(&self) -> usize {
        self.local.n
    }

    /// Number of filters `m`.
    pub fn m(&self) -> usize {
        self.local.m
    }

    /// Signal length `N`.
    pub fn signal_len(&self) -> usize {
        self.len
    }

    /// Number of atoms `N * m`.
    pub fn code_len(&self) -> usize {
        self.len * self.local.m
    }

    /// Stripe length `(2n - 1) m`.
    pub fn stripe_len(&self) -> usize {
        (2 * self.local.n - 1) * self.local.m
    }

    fn check_code(&self, code: &[f64]) -> Result<()> {
        if code.len() != self.code_len() {
            return Err(CscError::DimensionMismatch {
                expected: self.code_len(),
                got: code.len(),
            });
        }
        Ok(())
    }

    fn check_signal(&self, signal: &[f64]) -> Result<()> {
        if signal.len() != self.len {
            return Err(CscError::DimensionMismatch {
                expected: self.len,
                got: signal.len(),
            });
        }
        Ok(())
    }

    /// `X = D * code`.
    pub fn apply(&self, code: &[f64]) -> Result<Vec<f64>> {
        self.check_code(code)?;
        let mut out = vec![0.0; self.len];
        self.apply_into(code, &mut out);
        Ok(out)
    }

    /// Unchecked `out = D * code`. Zero coefficients are skipped.
    pub fn apply_into(&self, code: &[f64], out: &mut [f64]) {
        let (n, m, len) = (self.local.n, self.local.m, self.len);
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..len {
            let block = &code[i * m..(i + 1) * m];
            for (j, &g) in block.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let atom = self.local.atom(j);
                if i + n <= len {
                    for (o, a) in out[i..i + n].iter_mut().zip(atom) {
                        *o += g * a;
                    }
                } else {
                    for (r, a) in atom.iter().enumerate() {
                        out[(i + r) % len] += g * a;
                    }
                }
            }
        }
    }

    /// `D^T * signal`.
    pub fn adjoint(&self, signal: &[f64]) -> Result<Vec<f64>> {
        self.check_signal(signal)?;
        let mut out = vec![0.0; self.code_len()];
        self.adjoint_into(signal, &mut out);
        Ok(out)
    }

    /// Unchecked `out = D^T * signal`; block `i` equals `D_L^T R_i signal`.
    pub fn adjoint_into(&self, signal: &[f64], out: &mut [f64]) {
        let (n, m, len) = (self.local.n, self.local.m, self.len);
        let mut patch = vec![0.0; n];
        for i in 0..len {
            let p: &[f64] = if i + n <= len {
                &signal[i..i + n]
            } else {
                for (r, v) in patch.iter_mut().enumerate() {
                    *v = signal[(i + r) % len];
                }
                &patch
            };
            self.local.correlate_patch(p, &mut out[i * m..(i + 1) * m]);
        }
    }

    /// `R_i X`: the `n` entries starting at `i`, wrapping modulo `N`.
    pub fn extract_patch(&self, signal: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_signal(signal)?;
        if i >= self.len {
            return Err(CscError::IndexOutOfRange {
                index: i,
                len: self.len,
            });
        }
        Ok((0..self.n()).map(|r| signal[(i + r) % self.len]).collect())
    }

    /// `out += R_i^T patch`.
    pub fn scatter_patch_add(&self, patch: &[f64], i: usize, out: &mut [f64]) -> Result<()> {
        self.check_signal(out)?;
        if patch.len() != self.n() {
            return Err(CscError::DimensionMismatch {
                expected: self.n(),
                got: patch.len(),
            });
        }
        if i >= self.len {
            return Err(CscError::IndexOutOfRange {
                index: i,
                len: self.len,
            });
        }
        for (r, p) in patch.iter().enumerate() {
            out[(i + r) % self.len] += p;
        }
        Ok(())
    }

    /// Shift position of block `s` (0-based, `s < 2n-1`) of stripe `i`.
    #[inline]
    pub fn stripe_block_shift(&self, i: usize, s: usize) -> usize {
        let n = self.local.n;
        (i + s + self.len * n - (n - 1)) % self.len
    }

    /// `S_i code`: the blocks at shifts `i-n+1 ..= i+n-1` (mod N), concatenated.
    pub fn extract_stripe(&self, code: &[f64], i: usize) -> Result<Vec<f64>> {
        self.check_code(code)?;
        if i >= self.len {
            return Err(CscError::IndexOutOfRange {
                index: i,
                len: self.len,
            });
        }
        let mut out = vec![0.0; self.stripe_len()];
        self.extract_stripe_into(code, i, &mut out);
        Ok(out)
    }

    pub(crate) fn extract_stripe_into(&self, code: &[f64], i: usize, out: &mut [f64]) {
        let m = self.local.m;
        for s in 0..2 * self.local.n - 1 {
            let b = self.stripe_block_shift(i, s);
            out[s * m..(s + 1) * m].copy_from_slice(&code[b * m..(b + 1) * m]);
        }
    }

    /// `out += S_i^T stripe`.
    pub fn scatter_stripe_add(&self, stripe: &[f64], i: usize, out: &mut [f64]) -> Result<()> {
        self.check_code(out)?;
        if stripe.len() != self.stripe_len() {
            return Err(CscError::DimensionMismatch {
                expected: self.stripe_len(),
                got: stripe.len(),
            });
        }
        if i >= self.len {
            return Err(CscError::IndexOutOfRange {
                index: i,
                len: self.len,
            });
        }
        self.scatter_stripe_add_unchecked(stripe, i, out);
        Ok(())
    }

    pub(crate) fn scatter_stripe_add_unchecked(&self, stripe: &[f64], i: usize, out: &mut [f64]) {
        let m = self.local.m;
        for s in 0..2 * self.local.n - 1 {
            let b = self.stripe_block_shift(i, s);
            for (o, v) in out[b * m..(b + 1) * m].iter_mut().zip(&stripe[s * m..(s + 1) * m]) {
                *o += v;
            }
        }
    }

    /// Inner product of atom `a` with atom `b` (linear indices `shift*m + filter`).
    #[inline]
    pub fn atom_inner(&self, a: usize, b: usize) -> f64 {
        let m = self.local.m;
        let (sa, ja) = (a / m, a % m);
        let (sb, jb) = (b / m, b % m);
        let d = (sb + self.len - sa) % self.len;
        self.cross[(d * m + ja) * m + jb]
    }

    /// Whether atoms `a` and `b` share at least one sample position.
    #[inline]
    pub fn atoms_overlap(&self, a: usize, b: usize) -> bool {
        let m = self.local.m;
        let d = (b / m + self.len - a / m) % self.len;
        d < self.local.n || d + self.local.n > self.len
    }

    /// Linear indices of every atom overlapping `atom` (itself included).
    pub fn overlapping_atoms(&self, atom: usize) -> Vec<usize> {
        let (n, m, len) = (self.local.n, self.local.m, self.len);
        let s = atom / m;
        let mut shifts: Vec<usize> = (0..2 * n - 1)
            .map(|k| (s + k + len * n - (n - 1)) % len)
            .collect();
        shifts.sort_unstable();
        shifts.dedup();
        shifts
            .into_iter()
            .flat_map(|sh| (0..m).map(move |j| sh * m + j))
            .collect()
    }

    /// Column `atom` of `D`, as a dense length-N vector.
    pub fn atom_column(&self, atom: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.code_len()];
        e[atom] = 1.0;
        let mut out = vec![0.0; self.len];
        self.apply_into(&e, &mut out);
        out
    }

    /// Explicit `N x Nm` matrix; column `i*m + j` is atom `j` at shift `i`.
    pub fn materialize(&self) -> Result<DMatrix<f64>> {
        let entries = self.len.saturating_mul(self.code_len());
        if entries > MATERIALIZE_MAX_ENTRIES {
            return Err(CscError::TooLarge(format!(
                "materializing {} x {} exceeds {} entries",
                self.len,
                self.code_len(),
                MATERIALIZE_MAX_ENTRIES
            )));
        }
        let (n, m, len) = (self.local.n, self.local.m, self.len);
        let mut d = DMatrix::zeros(len, self.code_len());
        for i in 0..len {
            for j in 0..m {
                for r in 0..n {
                    d[((i + r) % len, i * m + j)] += self.local.get(r, j);
                }
            }
        }
        Ok(d)
    }

    /// Global mutual coherence, from overlapping atom pairs only.
    pub fn mutual_coherence(&self) -> f64 {
        let m = self.local.m;
        let mut mu = 0.0f64;
        for d in 0..self.len {
            for j in 0..m {
                for k in 0..m {
                    if d == 0 && j == k {
                        continue;
                    }
                    mu = mu.max(self.cross[(d * m + j) * m + k].abs());
                }
            }
        }
        mu
    }

    /// Power iteration on `D D^T` until the relative change of the eigenvalue
    /// estimate drops below `tol` (at most 1000 iterations).
    pub fn largest_singular_value(&self, tol: f64) -> Result<SingularValueEstimate> {
        if !(tol > 0.0) {
            return Err(CscError::SpecInvalid(format!("tolerance must be positive, got {tol}")));
        }
        const CAP: usize = 1000;
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut v: Vec<f64> = (0..self.len).map(|_| rng.random_range(0.5..1.5)).collect();
        normalize_in_place(&mut v);
        let mut code = vec![0.0; self.code_len()];
        let mut w = vec![0.0; self.len];
        let mut prev = 0.0;
        for it in 1..=CAP {
            self.adjoint_into(&v, &mut code);
            self.apply_into(&code, &mut w);
            let eig = norm2(&w);
            if eig == 0.0 {
                return Ok(SingularValueEstimate {
                    value: 0.0,
                    iterations: it,
                    converged: true,
                });
            }
            w.iter_mut().for_each(|x| *x /= eig);
            std::mem::swap(&mut v, &mut w);
            if it > 1 && (eig - prev).abs() < tol * eig {
                return Ok(SingularValueEstimate {
                    value: eig.sqrt(),
                    iterations: it,
                    converged: true,
                });
            }
            prev = eig;
        }
        Ok(SingularValueEstimate {
            value: prev.sqrt(),
            iterations: CAP,
            converged: false,
        })
    }
}

/// Result of the power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularValueEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SingularValueEstimate {
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(CscError::NoConvergence {
                iterations: self.iterations,
            })
        }
    }
}

fn atom_cross_table(local: &LocalDictionary, len: usize) -> Vec<f64> {
    let (n, m) = (local.n, local.m);
    let mut table = vec![0.0; len * m * m];
    for d in 0..len {
        if !(d < n || d + n > len) {
            continue;
        }
        for j in 0..m {
            let aj = local.atom(j);
            for k in 0..m {
                let ak = local.atom(k);
                let mut acc = 0.0;
                for (r, a) in aj.iter().enumerate() {
                    let idx = (r + len - d) % len;
                    if idx < n {
                        acc += a * ak[idx];
                    }
                }
                table[(d * m + j) * m + k] = acc;
            }
        }
    }
    table
}

/// The `n x (2n-1)m` matrix mapping a stripe to its patch.
#[derive(Debug, Clone, PartialEq)]
pub struct StripeDictionary {
    omega: DMatrix<f64>,
}

impl StripeDictionary {
    /// Column `s*m + j` holds atom `j` as seen from a patch window when the
    /// atom starts `s - (n-1)` samples after the window start.
    pub fn build(local: &LocalDictionary) -> Self {
        let (n, m) = (local.n, local.m);
        let mut omega = DMatrix::zeros(n, (2 * n - 1) * m);
        for s in 0..2 * n - 1 {
            for j in 0..m {
                for r in 0..n {
                    // atom row = r - offset = r + (n-1) - s
                    let row = r + n - 1;
                    if row >= s && row - s < n {
                        omega[(r, s * m + j)] = local.get(row - s, j);
                    }
                }
            }
        }
        Self { omega }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn apply(&self, stripe: &[f64]) -> Result<Vec<f64>> {
        if stripe.len() != self.omega.ncols() {
            return Err(CscError::DimensionMismatch {
                expected: self.omega.ncols(),
                got: stripe.len(),
            });
        }
        let v = nalgebra::DVectorView::from_slice(stripe, stripe.len());
        Ok((&self.omega * v).as_slice().to_vec())
    }
}

/// `Q`: the centre `m`-block (block `n-1`) of a stripe.
pub fn extract_center(stripe: &[f64], n: usize, m: usize) -> Result<Vec<f64>> {
    if n == 0 || m == 0 || stripe.len() != (2 * n - 1) * m {
        return Err(CscError::DimensionMismatch {
            expected: (2 * n.max(1) - 1) * m,
            got: stripe.len(),
        });
    }
    Ok(stripe[(n - 1) * m..n * m].to_vec())
}

/// A global coefficient vector with position-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    values: Vec<f64>,
    m: usize,
}

impl SparseCode {
    pub fn zeros(op: &ConvOperator) -> Self {
        Self {
            values: vec![0.0; op.code_len()],
            m: op.m(),
        }
    }

    pub fn new(op: &ConvOperator, values: Vec<f64>) -> Result<Self> {
        op.check_code(&values)?;
        Ok(Self { values, m: op.m() })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `P_i code`: the `m` coefficients at shift `i`.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    /// Indices with `|value| > tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        support_of(&self.values, tol)
    }
}

impl std::ops::Deref for SparseCode {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

pub fn support_of(values: &[f64], tol: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > tol)
        .map(|(i, _)| i)
        .collect()
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize_in_place(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn local(n: usize, m: usize, cols: &[f64]) -> LocalDictionary {
        LocalDictionary::normalize(n, m, cols).unwrap().0
    }

    #[test]
    fn normalize_identity_is_unchanged() {
        let (d, f) = LocalDictionary::normalize(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(d.as_column_major(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(f, vec![1.0, 1.0]);
    }

    #[test]
    fn normalize_three_four_five() {
        let (d, f) = LocalDictionary::normalize(2, 1, &[3.0, 4.0]).unwrap();
        assert!((d.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((d.get(1, 0) - 0.8).abs() < 1e-15);
        assert_eq!(f, vec![5.0]);
    }

    #[test]
    fn normalize_rejects_zero_atom() {
        let err = LocalDictionary::normalize(2, 2, &[1.0, 0.0, 0.0, 1e-15]).unwrap_err();
        assert!(matches!(err, CscError::ZeroAtom { index: 1, .. }));
        assert!(LocalDictionary::normalize(2, 1, &[f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn materialize_unit_atom_is_identity() {
        let op = ConvOperator::new(local(1, 1, &[1.0]), 3).unwrap();
        assert_eq!(op.materialize().unwrap(), DMatrix::identity(3, 3));
    }

    #[test]
    fn materialize_wraps_last_column() {
        let (a, b) = (0.6, 0.8);
        let op = ConvOperator::new(local(2, 1, &[a, b]), 3).unwrap();
        let d = op.materialize().unwrap();
        let expected = DMatrix::from_column_slice(3, 3, &[a, b, 0.0, 0.0, a, b, b, 0.0, a]);
        assert!((d - expected).abs().max() < 1e-15);
    }

    #[test]
    fn extract_patch_wraps() {
        let op = ConvOperator::new(local(2, 1, &[1.0, 1.0]), 4).unwrap();
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(op.extract_patch(&x, 3).unwrap(), vec![4.0, 1.0]);
        assert_eq!(op.extract_patch(&x, 0).unwrap(), vec![1.0, 2.0]);
        assert!(matches!(
            op.extract_patch(&x, 4),
            Err(CscError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn stripe_of_unit_patch_is_single_block() {
        let op = ConvOperator::new(local(1, 2, &[1.0, 1.0]), 5).unwrap();
        let code: Vec<f64> = (0..10).map(|v| v as f64).collect();
        assert_eq!(op.extract_stripe(&code, 3).unwrap(), vec![6.0, 7.0]);
    }

    #[test]
    fn stripe_of_all_ones() {
        let op = ConvOperator::new(local(3, 2, &[1.0; 6]), 8).unwrap();
        let code = vec![1.0; 16];
        for i in 0..8 {
            assert_eq!(op.extract_stripe(&code, i).unwrap(), vec![1.0; 10]);
        }
    }

    #[test]
    fn center_extraction() {
        assert_eq!(extract_center(&[4.0, 5.0], 1, 2).unwrap(), vec![4.0, 5.0]);
        assert_eq!(extract_center(&[1.0, 2.0, 3.0], 2, 1).unwrap(), vec![2.0]);
        assert!(extract_center(&[1.0, 2.0], 2, 1).is_err());
    }

    #[test]
    fn omega_for_two_tap_atom() {
        let (a, b) = (0.6, 0.8);
        let omega = StripeDictionary::build(&local(2, 1, &[a, b]));
        let expected = DMatrix::from_row_slice(2, 3, &[b, a, 0.0, 0.0, b, a]);
        assert_eq!(omega.matrix(), &expected);
    }

    #[test]
    fn omega_single_sample_equals_local() {
        let l = local(1, 3, &[1.0, -1.0, 2.0]);
        assert_eq!(StripeDictionary::build(&l).matrix(), &l.to_matrix());
    }

    #[test]
    fn apply_zero_and_unit_coefficient() {
        let op = ConvOperator::new(local(3, 2, &[1.0, 2.0, 3.0, -1.0, 0.5, 2.0]), 5).unwrap();
        assert_eq!(op.apply(&[0.0; 10]).unwrap(), vec![0.0; 5]);
        let mut code = vec![0.0; 10];
        code[4 * 2 + 1] = 1.0;
        let x = op.apply(&code).unwrap();
        let atom = op.local().atom(1);
        assert_eq!(x, vec![atom[1], atom[2], 0.0, 0.0, atom[0]]);
        assert!(matches!(
            op.apply(&[0.0; 9]),
            Err(CscError::DimensionMismatch { expected: 10, got: 9 })
        ));
    }

    #[test]
    fn adjoint_of_placed_atom_hits_one() {
        let op = ConvOperator::new(local(3, 2, &[1.0, 2.0, 3.0, -1.0, 0.5, 2.0]), 8).unwrap();
        let v = op.atom_column(3 * 2 + 1);
        let back = op.adjoint(&v).unwrap();
        assert!((back[7] - 1.0).abs() < 1e-15);
        assert_eq!(op.adjoint(&[0.0; 8]).unwrap(), vec![0.0; 16]);
    }

    #[test]
    fn coherence_of_orthonormal_dictionaries_is_zero() {
        let op = ConvOperator::new(local(1, 1, &[1.0]), 1).unwrap();
        assert_eq!(op.mutual_coherence(), 0.0);
        // D = identity
        let op = ConvOperator::new(local(1, 1, &[-2.0]), 7).unwrap();
        assert_eq!(op.mutual_coherence(), 0.0);
    }

    #[test]
    fn singular_value_of_unit_atom() {
        let op = ConvOperator::new(local(1, 1, &[1.0]), 6).unwrap();
        let s = op.largest_singular_value(1e-10).unwrap();
        assert!(s.converged);
        assert!((s.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_value_of_repeated_full_width_atom() {
        // n = N and m copies of the same atom: D D^T is circulant with a
        // top eigenvalue of m * n when the atom is constant.
        let (n, m) = (4, 3);
        let op = ConvOperator::new(local(n, m, &[1.0; 12]), n).unwrap();
        let s = op.largest_singular_value(1e-12).unwrap();
        assert!((s.value - ((m * n) as f64).sqrt()).abs() < 1e-9, "{}", s.value);
        assert!(op.largest_singular_value(0.0).is_err());
    }

    #[test]
    fn overlapping_atoms_cover_stripe() {
        let op = ConvOperator::new(local(3, 2, &[1.0; 6]), 8).unwrap();
        let ov = op.overlapping_atoms(0);
        assert_eq!(ov.len(), 10);
        for b in 0..16 {
            assert_eq!(ov.contains(&b), op.atoms_overlap(0, b));
        }
    }
}
