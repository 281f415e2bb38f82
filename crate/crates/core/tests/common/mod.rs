#![allow(dead_code)]

use csc_core::conv::{ConvOperator, LocalDictionary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_op(rng: &mut ChaCha8Rng, n: usize, m: usize, len: usize) -> ConvOperator {
    let raw = gaussian_vec(rng, n * m);
    ConvOperator::new(LocalDictionary::normalize(n, m, &raw).unwrap().0, len).unwrap()
}

/// Row-major dense `D`, built by placing every shifted atom explicitly.
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Dense {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * x[c]).sum())
            .collect()
    }

    pub fn mul_t(&self, v: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c) * v[r]).sum())
            .collect()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

pub fn dense_dictionary(op: &ConvOperator) -> Dense {
    let (n, m, len) = (op.n(), op.m(), op.signal_len());
    let mut data = vec![0.0; len * len * m];
    for shift in 0..len {
        for j in 0..m {
            let col = shift * m + j;
            for t in 0..n {
                data[((shift + t) % len) * len * m + col] += op.local().get(t, j);
            }
        }
    }
    Dense { rows: len, cols: len * m, data }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix (row-major `k x k`).
pub fn jacobi_eigenvalues(mut a: Vec<f64>, k: usize) -> Vec<f64> {
    for _sweep in 0..100 {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * k + j].powi(2))
            .sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = a[p * k + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q * k + q] - a[p * k + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let arp = a[r * k + p];
                    let arq = a[r * k + q];
                    a[r * k + p] = c * arp - s * arq;
                    a[r * k + q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let apr = a[p * k + r];
                    let aqr = a[q * k + r];
                    a[p * k + r] = c * apr - s * aqr;
                    a[q * k + r] = s * apr + c * aqr;
                }
            }
        }
    }
    (0..k).map(|i| a[i * k + i]).collect()
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>, k: usize) -> Vec<f64> {
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&x, &y| a[x * k + col].abs().total_cmp(&a[y * k + col].abs()))
            .unwrap();
        if piv != col {
            for c in 0..k {
                a.swap(piv * k + c, col * k + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..k {
            let f = a[r * k + col] / a[col * k + col];
            for c in col..k {
                a[r * k + c] -= f * a[col * k + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r * k + c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r * k + r];
    }
    x
}

/// Dense Gram of the given columns, row-major.
pub fn gram(d: &Dense, cols: &[usize]) -> Vec<f64> {
    let columns: Vec<Vec<f64>> = cols.iter().map(|&c| d.column(c)).collect();
    let k = cols.len();
    let mut g = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            g[i * k + j] = dot(&columns[i], &columns[j]);
        }
    }
    g
}

/// Brute-force l0,inf: count nonzeros in every window of 2n-1 shifts.
pub fn brute_l0_inf(op: &ConvOperator, code: &[f64], tol: f64) -> usize {
    let (n, m, len) = (op.n(), op.m(), op.signal_len());
    (0..len)
        .map(|i| {
            let mut count = 0;
            for s in 0..2 * n - 1 {
                let shift = (i + s + len * n - (n - 1)) % len;
                count += (0..m).filter(|j| code[shift * m + j].abs() > tol).count();
            }
            count
        })
        .max()
        .unwrap_or(0)
}

/// Size grid with `N * m <= 256`.
pub fn small_sizes() -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for n in 1..=5 {
        for m in 1..=3 {
            for len in [n, n + 1, 2 * n + 1, 8, 16, 32, 64] {
                if len >= n && len * m <= 256 {
                    out.push((n, m, len));
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}
