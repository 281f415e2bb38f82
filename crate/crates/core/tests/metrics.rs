mod common;

use common::*;
use csc_core::conv::{ConvOperator, LocalDictionary};
use csc_core::metrics::*;
use csc_core::signal::{
    generate_instance, low_coherence_dictionary, Amplitude, Cardinality, NoiseModel, SignalSpec,
};
use proptest::prelude::*;
use rand::Rng;

fn sparse_code(r: &mut impl Rng, len: usize, density: f64) -> Vec<f64> {
    (0..len)
        .map(|_| if r.random_bool(density) { r.random_range(-2.0..2.0) } else { 0.0 })
        .collect()
}

#[test]
fn l0_inf_matches_stripe_enumeration() {
    let mut r = rng(20);
    for (n, m, len) in small_sizes() {
        let op = random_op(&mut r, n, m, len);
        for density in [0.0, 0.05, 0.2, 0.6] {
            let code = sparse_code(&mut r, len * m, density);
            let expected = brute_l0_inf(&op, &code, 0.0);
            assert_eq!(l0_inf_norm(&op, &code, 0.0).unwrap(), expected, "{n} {m} {len}");
            let support = SupportSet::of_code(&op, &code, 0.0).unwrap();
            assert_eq!(support_l0_inf(&support), expected);
        }
    }
}

#[test]
fn l0_inf_single_entry_is_one() {
    let mut r = rng(21);
    let op = random_op(&mut r, 3, 2, 8);
    for idx in 0..16 {
        let mut code = vec![0.0; 16];
        code[idx] = -0.5;
        assert_eq!(l0_inf_norm(&op, &code, 0.0).unwrap(), 1);
    }
}

#[test]
fn srip_exact_matches_jacobi_oracle_n3_m2_n6() {
    let mut r = rng(22);
    let op = random_op(&mut r, 3, 2, 6);
    let d = dense_dictionary(&op);
    for k in 1..=3 {
        let mut oracle = 0.0f64;
        let mut count = 0;
        enumerate_supports(&op, k, 1_000_000, |s| {
            count += 1;
            let eig = jacobi_eigenvalues(gram(&d, s), s.len());
            for l in eig {
                oracle = oracle.max((1.0 - l).abs());
            }
        })
        .unwrap();
        assert!(count > 0);
        let exact = srip_exact(&op, k).unwrap();
        assert!((exact - oracle).abs() <= 1e-10, "k={k}: {exact} vs {oracle}");
        assert!(exact <= srip_bound(op.mutual_coherence(), k) + 1e-12);
    }
    assert!(srip_exact(&op, 1).unwrap() < 1e-12);
}

#[test]
fn srip_zero_for_disjoint_orthogonal_atoms() {
    // n = 1: every atom sits on its own sample
    let d = LocalDictionary::normalize(1, 1, &[2.0]).unwrap().0;
    let op = ConvOperator::new(d, 6).unwrap();
    assert!(srip_exact(&op, 1).unwrap() < 1e-15);
}

#[test]
fn srip_enumeration_refuses_large_instances() {
    let mut r = rng(23);
    let op = random_op(&mut r, 4, 4, 64);
    assert!(matches!(
        enumerate_supports(&op, 3, 1000, |_| {}),
        Err(csc_core::CscError::TooLarge(_))
    ));
}

#[test]
fn enumerated_supports_have_requested_l0_inf() {
    let mut r = rng(24);
    let op = random_op(&mut r, 2, 2, 6);
    let mut seen = std::collections::BTreeSet::new();
    enumerate_supports(&op, 2, 1_000_000, |s| {
        let mut code = vec![0.0; 12];
        s.iter().for_each(|&i| code[i] = 1.0);
        assert_eq!(brute_l0_inf(&op, &code, 0.0), 2);
        assert!(seen.insert(s.to_vec()));
    })
    .unwrap();
    // oracle: every subset of the 12 atoms with stripe maximum exactly 2
    let mut expected = 0;
    for mask in 0u32..1 << 12 {
        let code: Vec<f64> = (0..12).map(|i| ((mask >> i) & 1) as f64).collect();
        if brute_l0_inf(&op, &code, 0.0) == 2 {
            expected += 1;
        }
    }
    assert_eq!(seen.len(), expected);
}

fn erc_oracle(op: &ConvOperator, support: &[usize]) -> f64 {
    let d = dense_dictionary(op);
    let k = support.len();
    let g = gram(&d, support);
    let cols: Vec<Vec<f64>> = support.iter().map(|&c| d.column(c)).collect();
    let mut worst = 0.0f64;
    for i in 0..op.code_len() {
        if support.contains(&i) {
            continue;
        }
        let di = d.column(i);
        let rhs: Vec<f64> = cols.iter().map(|c| dot(c, &di)).collect();
        let x = solve(g.clone(), rhs, k);
        worst = worst.max(x.iter().map(|v| v.abs()).sum());
    }
    1.0 - worst
}

#[test]
fn erc_matches_dense_pseudoinverse() {
    let search = low_coherence_dictionary(8, 2, 32, 0.25, 3, 5_000).unwrap();
    let op = ConvOperator::new(search.dictionary, 32).unwrap();
    let mut r = rng(25);
    for _ in 0..40 {
        let code = sparse_code(&mut r, 64, 0.04);
        let support = SupportSet::of_code(&op, &code, 0.0).unwrap();
        let theta = erc_constant(&op, &support).unwrap();
        let oracle = if support.is_empty() { 1.0 } else { erc_oracle(&op, support.indices()) };
        assert!((theta - oracle).abs() <= 1e-10, "{theta} vs {oracle}");
        let mu = op.mutual_coherence();
        let k = support.l0_inf();
        if erc_coherence_condition(mu, k) {
            assert!(theta > 0.0);
            assert!(1.0 - theta <= erc_coherence_bound(mu, k).unwrap() + 1e-12);
        }
    }
}

#[test]
fn erc_rank_deficient_support() {
    let d = LocalDictionary::normalize(2, 2, &[1.0, 0.0, 1.0, 0.0]).unwrap().0;
    let op = ConvOperator::new(d, 4).unwrap();
    let s = SupportSet::new(&op, vec![0, 1]).unwrap();
    assert!(matches!(erc_constant(&op, &s), Err(csc_core::CscError::RankDeficient(_))));
}

#[test]
fn restricted_gram_eigenvalues_within_coherence_enclosure() {
    let mut r = rng(26);
    let mut checked = 0;
    for (n, m, len) in [(3, 2, 6), (2, 2, 8), (3, 1, 9)] {
        let op = random_op(&mut r, n, m, len);
        let mu = op.mutual_coherence();
        let d = dense_dictionary(&op);
        for k in 1..=3 {
            let (lo, hi) = gram_eigen_bounds(mu, k);
            let _ = enumerate_supports(&op, k, 20_000, |s| {
                checked += 1;
                for l in jacobi_eigenvalues(gram(&d, s), s.len()) {
                    assert!(l >= lo - 1e-12 && l <= hi + 1e-12);
                }
            });
        }
    }
    assert!(checked > 1000);
}

#[test]
fn local_noise_level_properties() {
    let mut r = rng(27);
    for len in [1, 5, 40] {
        let e = gaussian_vec(&mut r, len);
        let global = norm(&e);
        for n in 1..=len {
            let local = local_noise_level(&e, n).unwrap();
            assert!(local <= global + 1e-12);
        }
        assert!((local_noise_level(&e, len).unwrap() - global).abs() <= 1e-12);
    }
    assert!(local_noise_level(&[1.0], 2).is_err());
}

#[test]
fn atom_noise_correlation_bounded_by_local_level() {
    let mut r = rng(28);
    let op = random_op(&mut r, 6, 3, 30);
    for _ in 0..200 {
        let e = gaussian_vec(&mut r, 30);
        let eps_l = local_noise_level(&e, 6).unwrap();
        let corr = op.adjoint(&e).unwrap();
        assert!(corr.iter().all(|c| c.abs() <= eps_l * (1.0 + 1e-12)));
    }
}

#[test]
fn bound_report_invariants() {
    let mut r = rng(29);
    let op = random_op(&mut r, 4, 2, 20);
    let mu = op.mutual_coherence();
    for _ in 0..50 {
        let code = sparse_code(&mut r, 40, 0.1);
        let e: Vec<f64> = gaussian_vec(&mut r, 20).iter().map(|v| v * 0.01).collect();
        let rep = BoundReport::evaluate(&op, mu, &code, &e, 0.0).unwrap();
        assert!(rep.eps_local <= rep.eps_global + 1e-15);
        assert!(rep.l0_inf <= rep.l0);
        for rec in [rep.omp, rep.bp, rep.p0inf] {
            assert_eq!(rec.bound_value.is_some(), rec.hypothesis_holds);
        }
        let row = rep.csv_row();
        assert_eq!(row.split(',').count(), BOUND_REPORT_COLUMNS.len());
    }
}

#[test]
fn support_least_squares_matches_normal_equations() {
    let mut r = rng(30);
    let op = random_op(&mut r, 5, 3, 30);
    let d = dense_dictionary(&op);
    for _ in 0..20 {
        let y = gaussian_vec(&mut r, 30);
        let mut idx: Vec<usize> = (0..90).filter(|_| r.random_bool(0.08)).collect();
        idx.dedup();
        let support = SupportSet::new(&op, idx.clone()).unwrap();
        let code = support_least_squares(&op, &y, &support).unwrap();
        if idx.is_empty() {
            assert!(code.iter().all(|v| *v == 0.0));
            continue;
        }
        let rhs: Vec<f64> = idx.iter().map(|&c| dot(&d.column(c), &y)).collect();
        let x = solve(gram(&d, &idx), rhs, idx.len());
        for (k, &c) in idx.iter().enumerate() {
            assert!((code[c] - x[k]).abs() <= 1e-9 * (1.0 + x[k].abs()));
        }
        assert!(l0_norm(&code, 0.0) <= idx.len());
    }
}

#[test]
fn oracle_residual_correlation_within_twice_local_noise() {
    let search = low_coherence_dictionary(8, 2, 48, 0.25, 3, 5_000).unwrap();
    let op = ConvOperator::new(search.dictionary, 48).unwrap();
    let mu = op.mutual_coherence();
    let mut checked = 0;
    for trial in 0..4000 {
        let spec = SignalSpec {
            seed: 31,
            stream: trial,
            cardinality: Cardinality::Range { min: 1, max: 4 },
            amplitude: Amplitude::Uniform { a: 1.0 },
            noise: NoiseModel::GlobalNorm(0.05),
        };
        let inst = generate_instance(&op, &spec).unwrap();
        if !bp_hypothesis(mu, inst.l0_inf) {
            continue;
        }
        checked += 1;
        let support = SupportSet::of_code(&op, &inst.gamma, 0.0).unwrap();
        let ls = support_least_squares(&op, &inst.observed, &support).unwrap();
        let fit = op.apply(&ls).unwrap();
        let resid: Vec<f64> = inst.observed.iter().zip(&fit).map(|(a, b)| a - b).collect();
        let corr = op.adjoint(&resid).unwrap();
        let worst = corr.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst <= 2.0 * inst.eps_local * (1.0 + 1e-12), "trial {trial}");
    }
    assert!(checked >= 1000, "{checked}");
}

proptest! {
    #[test]
    fn l0_inf_is_subadditive_and_below_l0(seed in 0u64..500) {
        let mut r = rng(seed);
        let op = random_op(&mut r, 3, 2, 10);
        let a = sparse_code(&mut r, 20, 0.2);
        let b = sparse_code(&mut r, 20, 0.2);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let la = l0_inf_norm(&op, &a, 0.0).unwrap();
        let lb = l0_inf_norm(&op, &b, 0.0).unwrap();
        prop_assert!(l0_inf_norm(&op, &sum, 0.0).unwrap() <= la + lb);
        prop_assert!(la <= l0_norm(&a, 0.0));
    }

    #[test]
    fn srip_bound_monotone(mu in 0.0f64..1.0, k in 1usize..20) {
        prop_assert!(srip_bound(mu, k) <= srip_bound(mu, k + 1));
        prop_assert!(stability_bound_p0inf(0.1, mu, k).is_none_or(|b| b >= 0.04 - 1e-15));
    }
}
