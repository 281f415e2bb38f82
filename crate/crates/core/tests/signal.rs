mod common;

use csc_core::conv::ConvOperator;
use csc_core::format::write_dictionary;
use csc_core::signal::{
    dct_local_dictionary, experiment_dictionary, generate_instance, regenerate_experiment_dictionary, stream_rng,
    Amplitude, Cardinality, NoiseModel, SignalSpec, EXPERIMENT_DICTIONARY,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn spec(seed: u64, stream: u64, k: usize, amplitude: Amplitude, noise: NoiseModel) -> SignalSpec {
    SignalSpec {
        seed,
        stream,
        cardinality: Cardinality::Exact(k),
        amplitude,
        noise,
    }
}

fn dct_op() -> ConvOperator {
    ConvOperator::new(dct_local_dictionary(25, 5).unwrap(), 300).unwrap()
}

#[test]
fn chacha20_matches_zero_key_keystream() {
    // first keystream block for an all-zero key and nonce
    let mut rng = ChaCha20Rng::from_seed([0; 32]);
    let mut out = [0u8; 32];
    rng.fill_bytes(&mut out);
    let expected: [u8; 32] = [
        0x76, 0xb8, 0xe0, 0xad, 0xa0, 0xf1, 0x3d, 0x90, 0x40, 0x5d, 0x6a, 0xe5, 0x53, 0x86, 0xbd, 0x28, 0xbd, 0xd2,
        0x19, 0xb8, 0xa0, 0x8d, 0xed, 0x1a, 0xa8, 0x36, 0xef, 0xcc, 0x8b, 0x77, 0x0d, 0xc7,
    ];
    assert_eq!(out, expected);
}

fn head(seed: u64, stream: u64) -> Vec<u64> {
    let mut r = stream_rng(seed, stream);
    (0..4).map(|_| r.next_u64()).collect()
}

#[test]
fn streams_are_distinct_and_repeatable() {
    assert_eq!(head(7, 0), head(7, 0));
    assert_ne!(head(7, 0), head(7, 1));
    assert_ne!(head(7, 0), head(8, 0));
}

#[test]
fn dct_atoms_are_orthonormal() {
    let d = dct_local_dictionary(25, 5).unwrap();
    for a in 0..5 {
        for b in 0..5 {
            let g: f64 = d.atom(a).iter().zip(d.atom(b)).map(|(x, y)| x * y).sum();
            let want = if a == b { 1.0 } else { 0.0 };
            assert!((g - want).abs() < 1e-12, "gram[{a},{b}] = {g}");
        }
    }
}

#[test]
fn band_amplitudes_have_magnitudes_in_band() {
    let op = dct_op();
    for stream in 0..20 {
        let inst = generate_instance(
            &op,
            &spec(2, stream, 50, Amplitude::Band { lo: 1.0, hi: 2.0 }, NoiseModel::GaussianSigma(0.0)),
        )
        .unwrap();
        let nz: Vec<f64> = inst.gamma.iter().copied().filter(|v| *v != 0.0).collect();
        assert_eq!(nz.len(), 50);
        assert!(nz.iter().all(|v| (1.0..=2.0).contains(&v.abs())));
        assert!(nz.iter().any(|v| *v < 0.0) && nz.iter().any(|v| *v > 0.0));
        assert!(inst.noise.iter().all(|v| *v == 0.0));
    }
}

#[test]
fn support_positions_are_uniform() {
    // chi-square over 16 equal bins of the code index; 37.697 is the 0.999
    // quantile with 15 degrees of freedom
    let op = ConvOperator::new(dct_local_dictionary(8, 2).unwrap(), 64).unwrap();
    let bins = 16;
    let width = op.code_len() / bins;
    let mut counts = vec![0usize; bins];
    let mut total = 0;
    for stream in 0..2000 {
        let inst = generate_instance(
            &op,
            &spec(5, stream, 6, Amplitude::Uniform { a: 1.0 }, NoiseModel::GlobalNorm(0.0)),
        )
        .unwrap();
        for (i, v) in inst.gamma.iter().enumerate() {
            if *v != 0.0 {
                counts[i / width] += 1;
                total += 1;
            }
        }
    }
    assert!(total >= 10_000);
    let expected = total as f64 / bins as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 37.697, "chi2 = {chi2}, counts = {counts:?}");
}

#[test]
fn global_norm_noise_and_local_level() {
    let op = dct_op();
    for stream in 0..50 {
        let inst = generate_instance(
            &op,
            &spec(3, stream, 30, Amplitude::Uniform { a: 1.0 }, NoiseModel::GlobalNorm(0.1)),
        )
        .unwrap();
        assert!((inst.eps - 0.1).abs() < 1e-12);
        assert!(inst.eps_local <= inst.eps + 1e-15);
        assert!(inst.eps_local > 0.0);
        let recon: Vec<f64> = inst.clean.iter().zip(&inst.noise).map(|(a, b)| a + b).collect();
        assert_eq!(recon, inst.observed);
    }
}

#[test]
fn generation_is_deterministic_per_stream() {
    let op = dct_op();
    let s = spec(11, 4, 40, Amplitude::Band { lo: 1.0, hi: 2.0 }, NoiseModel::GaussianSigma(0.05));
    let a = generate_instance(&op, &s).unwrap();
    let b = generate_instance(&op, &s).unwrap();
    assert_eq!(a, b);
    let c = generate_instance(&op, &SignalSpec { stream: 5, ..s }).unwrap();
    assert_ne!(a.gamma, c.gamma);
}

#[test]
fn bundled_dictionary_regenerates_bitwise() {
    let found = regenerate_experiment_dictionary().unwrap();
    assert_eq!(write_dictionary(&found.dictionary), EXPERIMENT_DICTIONARY);
    let op = ConvOperator::new(experiment_dictionary(), 640).unwrap();
    let mu = op.mutual_coherence();
    assert!((0.085..=0.095).contains(&mu), "mu = {mu}");
    assert_eq!(mu, found.mu);
}
