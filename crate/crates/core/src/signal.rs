//! Synthetic signals, noise, and dictionaries for experiments.
//!
//! Random streams come from ChaCha20 (`rand_chacha` 0.9). A stream is keyed by
//! `(seed, stream)`: the 64-bit seed is expanded into the 256-bit key with
//! `SeedableRng::seed_from_u64`, and `stream` selects the ChaCha stream id.
//! Trial `t` of an experiment uses stream `t`, so any row can be regenerated
//! in isolation.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::conv::{norm2, ConvOperator, LocalDictionary};
use crate::error::{CscError, Result};
use crate::format::{fmt_f64, read_dictionary, KeyValues};
use crate::metrics::{l0_inf_norm, l0_norm, local_noise_level};

/// Pinned low-coherence dictionary (n=64, m=2) used by the OMP/BP experiments.
pub const EXPERIMENT_DICTIONARY: &str = include_str!("../assets/coherent_n64_m2.convdict");

/// Generator settings that produced [`EXPERIMENT_DICTIONARY`].
pub const EXPERIMENT_DICTIONARY_SEED: u64 = 640;
pub const EXPERIMENT_DICTIONARY_TARGET_MU: f64 = 0.09;
pub const EXPERIMENT_DICTIONARY_MAX_STEPS: usize = 20_000;

pub fn experiment_dictionary() -> LocalDictionary {
    read_dictionary(EXPERIMENT_DICTIONARY).expect("bundled dictionary asset is valid")
}

/// Reruns the coherence search that produced [`EXPERIMENT_DICTIONARY`].
pub fn regenerate_experiment_dictionary() -> Result<CoherenceSearch> {
    low_coherence_dictionary(
        64,
        2,
        640,
        EXPERIMENT_DICTIONARY_TARGET_MU,
        EXPERIMENT_DICTIONARY_SEED,
        EXPERIMENT_DICTIONARY_MAX_STEPS,
    )
}

/// The ChaCha20 stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cardinality {
    Exact(usize),
    /// Drawn uniformly from `min..=max`.
    Range { min: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    /// Uniform on `[-a, a]`.
    Uniform { a: f64 },
    /// Uniform magnitude on `[lo, hi]` with a random sign.
    Band { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// Standard normal entries rescaled to exactly this l2 norm.
    GlobalNorm(f64),
    /// i.i.d. normal entries with this standard deviation.
    GaussianSigma(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSpec {
    pub seed: u64,
    pub stream: u64,
    pub cardinality: Cardinality,
    pub amplitude: Amplitude,
    pub noise: NoiseModel,
}

impl SignalSpec {
    pub fn validate(&self, op: &ConvOperator) -> Result<()> {
        let cap = op.code_len();
        match self.cardinality {
            Cardinality::Exact(k) if k > cap => {
                return Err(CscError::SpecInvalid(format!("cardinality {k} exceeds N*m = {cap}")))
            }
            Cardinality::Range { min, max } if min > max || max > cap => {
                return Err(CscError::SpecInvalid(format!(
                    "cardinality range {min}..={max} invalid for N*m = {cap}"
                )))
            }
            _ => {}
        }
        match self.amplitude {
            Amplitude::Uniform { a } if !(a > 0.0 && a.is_finite()) => {
                return Err(CscError::SpecInvalid(format!("amplitude a must be positive, got {a}")))
            }
            Amplitude::Band { lo, hi } if !(hi > lo && lo > 0.0 && hi.is_finite()) => {
                return Err(CscError::SpecInvalid(format!(
                    "amplitude band needs hi > lo > 0, got [{lo}, {hi}]"
                )))
            }
            _ => {}
        }
        let v = match self.noise {
            NoiseModel::GlobalNorm(v) | NoiseModel::GaussianSigma(v) => v,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(CscError::SpecInvalid(format!("noise level must be >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("seed", self.seed).set("stream", self.stream);
        kv.set(
            "cardinality",
            match self.cardinality {
                Cardinality::Exact(k) => k.to_string(),
                Cardinality::Range { min, max } => format!("{min}..{max}"),
            },
        );
        kv.set(
            "amplitude",
            match self.amplitude {
                Amplitude::Uniform { a } => format!("uniform:{}", fmt_f64(a)),
                Amplitude::Band { lo, hi } => format!("band:{}:{}", fmt_f64(lo), fmt_f64(hi)),
            },
        );
        kv.set(
            "noise",
            match self.noise {
                NoiseModel::GlobalNorm(v) => format!("norm:{}", fmt_f64(v)),
                NoiseModel::GaussianSigma(v) => format!("sigma:{}", fmt_f64(v)),
            },
        );
        kv
    }

    pub fn from_key_values(kv: &KeyValues) -> Result<Self> {
        let bad = |k: &str, v: &str| CscError::SpecInvalid(format!("bad `{k}` value `{v}`"));
        let req = |k: &str| {
            kv.get(k)
                .ok_or_else(|| CscError::SpecInvalid(format!("missing key `{k}`")))
        };
        let num = |k: &str, v: &str| v.parse::<f64>().map_err(|_| bad(k, v));
        let seed = req("seed")?.parse().map_err(|_| bad("seed", req("seed").unwrap()))?;
        let stream = kv.parse_opt("stream")?.unwrap_or(0);
        let c = req("cardinality")?;
        let cardinality = match c.split_once("..") {
            Some((lo, hi)) => Cardinality::Range {
                min: lo.trim().parse().map_err(|_| bad("cardinality", c))?,
                max: hi.trim().parse().map_err(|_| bad("cardinality", c))?,
            },
            None => Cardinality::Exact(c.parse().map_err(|_| bad("cardinality", c))?),
        };
        let a = req("amplitude")?;
        let parts: Vec<&str> = a.split(':').collect();
        let amplitude = match parts.as_slice() {
            ["uniform", v] => Amplitude::Uniform { a: num("amplitude", v)? },
            ["band", lo, hi] => Amplitude::Band {
                lo: num("amplitude", lo)?,
                hi: num("amplitude", hi)?,
            },
            _ => return Err(bad("amplitude", a)),
        };
        let nz = req("noise")?;
        let noise = match nz.split_once(':') {
            Some(("norm", v)) => NoiseModel::GlobalNorm(num("noise", v)?),
            Some(("sigma", v)) => NoiseModel::GaussianSigma(num("noise", v)?),
            _ => return Err(bad("noise", nz)),
        };
        Ok(Self {
            seed,
            stream,
            cardinality,
            amplitude,
            noise,
        })
    }
}

/// One synthetic problem `Y = D Gamma + E` and its derived scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub gamma: Vec<f64>,
    pub clean: Vec<f64>,
    pub noise: Vec<f64>,
    pub observed: Vec<f64>,
    pub eps: f64,
    pub eps_local: f64,
    pub gamma_min_abs: Option<f64>,
    pub l0: usize,
    pub l0_inf: usize,
}

pub fn generate_instance(op: &ConvOperator, spec: &SignalSpec) -> Result<Instance> {
    spec.validate(op)?;
    let mut rng = stream_rng(spec.seed, spec.stream);
    let k = match spec.cardinality {
        Cardinality::Exact(k) => k,
        Cardinality::Range { min, max } => rng.random_range(min..=max),
    };
    let mut support = index::sample(&mut rng, op.code_len(), k).into_vec();
    support.sort_unstable();

    let mut gamma = vec![0.0; op.code_len()];
    for &i in &support {
        gamma[i] = match spec.amplitude {
            Amplitude::Uniform { a } => loop {
                let v = rng.random_range(-a..=a);
                if v != 0.0 {
                    break v;
                }
            },
            Amplitude::Band { lo, hi } => {
                let mag = rng.random_range(lo..=hi);
                if rng.random_bool(0.5) {
                    mag
                } else {
                    -mag
                }
            }
        };
    }

    let len = op.signal_len();
    let mut noise: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    match spec.noise {
        NoiseModel::GlobalNorm(target) => {
            let norm = norm2(&noise);
            let scale = if norm > 0.0 { target / norm } else { 0.0 };
            noise.iter_mut().for_each(|v| *v *= scale);
        }
        NoiseModel::GaussianSigma(sigma) => noise.iter_mut().for_each(|v| *v *= sigma),
    }

    let clean = op.apply(&gamma)?;
    let observed: Vec<f64> = clean.iter().zip(&noise).map(|(x, e)| x + e).collect();
    let gamma_min_abs = support
        .iter()
        .map(|&i| gamma[i].abs())
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));
    Ok(Instance {
        eps: norm2(&noise),
        eps_local: local_noise_level(&noise, op.n())?,
        gamma_min_abs,
        l0: l0_norm(&gamma, 0.0),
        l0_inf: l0_inf_norm(op, &gamma, 0.0)?,
        gamma,
        clean,
        noise,
        observed,
    })
}

/// The first `m` type-II DCT basis vectors of length `n`, unit-normalized.
pub fn dct_local_dictionary(n: usize, m: usize) -> Result<LocalDictionary> {
    if m == 0 || n == 0 || m > n {
        return Err(CscError::SpecInvalid(format!(
            "DCT dictionary needs 1 <= m <= n (got n={n}, m={m})"
        )));
    }
    let mut cols = Vec::with_capacity(n * m);
    for k in 0..m {
        for t in 0..n {
            cols.push((std::f64::consts::PI * (t as f64 + 0.5) * k as f64 / n as f64).cos());
        }
    }
    Ok(LocalDictionary::normalize(n, m, &cols)?.0)
}

/// Outcome of [`low_coherence_dictionary`].
#[derive(Debug, Clone)]
pub struct CoherenceSearch {
    pub dictionary: LocalDictionary,
    pub mu: f64,
    pub steps: usize,
}

/// Gaussian atoms driven down in mutual coherence by projected descent.
///
/// Minimizes the sum of `|c|^p` over all nontrivial shifted correlations `c`,
/// renormalizing atoms after every step, and stops at the first iterate whose
/// coherence (for signal length `signal_len`) is at most `target_mu`.
pub fn low_coherence_dictionary(
    n: usize,
    m: usize,
    signal_len: usize,
    target_mu: f64,
    seed: u64,
    max_steps: usize,
) -> Result<CoherenceSearch> {
    if n == 0 || m == 0 || signal_len < n {
        return Err(CscError::SpecInvalid(format!(
            "invalid dimensions n={n}, m={m}, N={signal_len}"
        )));
    }
    let mut rng = stream_rng(seed, 0);
    let raw: Vec<f64> = (0..n * m).map(|_| rng.sample(StandardNormal)).collect();
    let mut atoms = LocalDictionary::normalize(n, m, &raw)?.0.as_column_major().to_vec();

    let offsets: Vec<usize> = (0..signal_len)
        .filter(|&d| d < n || d + n > signal_len)
        .collect();
    let coherence = |atoms: &[f64]| {
        let d = LocalDictionary::normalize(n, m, atoms).unwrap().0;
        ConvOperator::new(d, signal_len).unwrap().mutual_coherence()
    };

    let step = 0.02;
    let mut power = 8.0f64;
    let mut grad = vec![0.0; n * m];
    for it in 0..=max_steps {
        let mu = coherence(&atoms);
        if mu <= target_mu {
            let dictionary = LocalDictionary::normalize(n, m, &atoms)?.0;
            return Ok(CoherenceSearch {
                dictionary,
                mu,
                steps: it,
            });
        }
        if it > 0 && it % 2000 == 0 {
            power = (power * 2.0).min(64.0);
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for &d in &offsets {
            for j in 0..m {
                for k in 0..m {
                    if d == 0 && j == k {
                        continue;
                    }
                    let mut c = 0.0;
                    for r in 0..n {
                        let idx = (r + signal_len - d) % signal_len;
                        if idx < n {
                            c += atoms[j * n + r] * atoms[k * n + idx];
                        }
                    }
                    let w = power * c.signum() * c.abs().powf(power - 1.0);
                    for r in 0..n {
                        let idx = (r + signal_len - d) % signal_len;
                        if idx < n {
                            grad[j * n + r] += w * atoms[k * n + idx];
                            grad[k * n + idx] += w * atoms[j * n + r];
                        }
                    }
                }
            }
        }
        let gmax = grad.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        if gmax == 0.0 {
            break;
        }
        for (a, g) in atoms.iter_mut().zip(&grad) {
            *a -= step * g / gmax;
        }
        for col in atoms.chunks_mut(n) {
            let norm = norm2(col);
            col.iter_mut().for_each(|v| *v /= norm);
        }
    }
    Err(CscError::NoConvergence {
        iterations: max_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_op() -> ConvOperator {
        let d = LocalDictionary::normalize(3, 2, &[1.0, 2.0, 3.0, -1.0, 0.5, 2.0]).unwrap().0;
        ConvOperator::new(d, 8).unwrap()
    }

    fn spec(card: Cardinality, noise: NoiseModel) -> SignalSpec {
        SignalSpec {
            seed: 7,
            stream: 0,
            cardinality: card,
            amplitude: Amplitude::Uniform { a: 1.0 },
            noise,
        }
    }

    #[test]
    fn empty_code_gives_pure_noise() {
        let op = small_op();
        let inst = generate_instance(&op, &spec(Cardinality::Exact(0), NoiseModel::GlobalNorm(0.5))).unwrap();
        assert_eq!(inst.observed, inst.noise);
        assert_eq!(inst.gamma_min_abs, None);
        assert_eq!((inst.l0, inst.l0_inf), (0, 0));
    }

    #[test]
    fn global_norm_is_exact() {
        let op = small_op();
        let inst = generate_instance(&op, &spec(Cardinality::Exact(3), NoiseModel::GlobalNorm(0.1))).unwrap();
        assert!((inst.eps - 0.1).abs() < 1e-15);
        assert!(inst.eps_local <= inst.eps);
        assert_eq!(inst.l0, 3);
    }

    #[test]
    fn band_amplitudes_stay_in_band() {
        let d = dct_local_dictionary(25, 5).unwrap();
        let op = ConvOperator::new(d, 300).unwrap();
        let s = SignalSpec {
            seed: 1,
            stream: 0,
            cardinality: Cardinality::Exact(50),
            amplitude: Amplitude::Band { lo: 1.0, hi: 2.0 },
            noise: NoiseModel::GaussianSigma(0.0),
        };
        let inst = generate_instance(&op, &s).unwrap();
        assert_eq!(l0_norm(&inst.gamma, 0.0), 50);
        for v in inst.gamma.iter().filter(|v| **v != 0.0) {
            assert!((1.0..=2.0).contains(&v.abs()));
        }
        assert_eq!(inst.eps, 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let op = small_op();
        let mut s = spec(Cardinality::Exact(17), NoiseModel::GlobalNorm(0.1));
        assert!(generate_instance(&op, &s).is_err());
        s.cardinality = Cardinality::Range { min: 5, max: 2 };
        assert!(generate_instance(&op, &s).is_err());
        s.cardinality = Cardinality::Exact(2);
        s.amplitude = Amplitude::Band { lo: 2.0, hi: 1.0 };
        assert!(generate_instance(&op, &s).is_err());
        s.amplitude = Amplitude::Uniform { a: 0.0 };
        assert!(generate_instance(&op, &s).is_err());
        s.amplitude = Amplitude::Uniform { a: 1.0 };
        s.noise = NoiseModel::GaussianSigma(-1.0);
        assert!(matches!(generate_instance(&op, &s), Err(CscError::SpecInvalid(_))));
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let op = small_op();
        let s = spec(Cardinality::Range { min: 1, max: 6 }, NoiseModel::GlobalNorm(0.3));
        let a = generate_instance(&op, &s).unwrap();
        let b = generate_instance(&op, &s).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(&op, &SignalSpec { stream: 1, ..s }).unwrap();
        assert_ne!(a.noise, c.noise);
    }

    #[test]
    fn spec_key_values_round_trip() {
        let s = SignalSpec {
            seed: 99,
            stream: 4,
            cardinality: Cardinality::Range { min: 1, max: 500 },
            amplitude: Amplitude::Band { lo: 1.0, hi: 2.0 },
            noise: NoiseModel::GaussianSigma(0.02),
        };
        let kv = s.to_key_values();
        assert_eq!(kv.get("cardinality"), Some("1..500"));
        assert_eq!(SignalSpec::from_key_values(&kv).unwrap(), s);
        let mut broken = kv.clone();
        broken.set("noise", "laplace:1");
        assert!(SignalSpec::from_key_values(&broken).is_err());
    }

    #[test]
    fn dct_cases() {
        let d = dct_local_dictionary(9, 1).unwrap();
        for v in d.atom(0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let d = dct_local_dictionary(25, 5).unwrap();
        let g = d.to_matrix().transpose() * d.to_matrix();
        assert!((g - nalgebra::DMatrix::identity(5, 5)).abs().max() < 1e-12);
        assert!(dct_local_dictionary(4, 5).is_err());
    }

    #[test]
    fn low_coherence_search_reaches_target() {
        let r = low_coherence_dictionary(16, 2, 64, 0.25, 3, 20_000).unwrap();
        let op = ConvOperator::new(r.dictionary, 64).unwrap();
        assert!((op.mutual_coherence() - r.mu).abs() < 1e-12);
        assert!(r.mu <= 0.25);
    }
}
