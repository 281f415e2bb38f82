use csc_wasm_demo::Scene;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[test]
fn omp_recovers_a_sparse_noiseless_code() {
    let mut scene = Scene::new("experiment", 0, 0, 640).unwrap();
    assert!(scene.coherence() < 0.095);
    assert_eq!(scene.atoms(), 2);
    let y = scene.generate(3, 4, 1.0, 0.0).unwrap();
    assert_eq!(y.len(), 640);
    let truth = scene.truth();
    assert!(scene.truth_density() as f64 <= 4.0);
    let code = scene.solve_omp().unwrap();
    assert!(distance(&code, &truth) < 1e-9);
    assert!(scene.report().contains("OMP guarantee for this draw holds"), "{}", scene.report());
}

#[test]
fn admm_moves_toward_the_planted_code() {
    let mut scene = Scene::new("dct", 25, 5, 100).unwrap();
    scene.generate(2, 6, 1.0, 0.0).unwrap();
    let truth = scene.truth();
    let start = distance(&vec![0.0; truth.len()], &truth);
    let code = scene.solve_admm(0.01, 0.05, 2000).unwrap();
    assert_eq!(code.len(), 500);
    assert!(distance(&code, &truth) < 0.5 * start);
    assert!(scene.report().contains("iterations"));
}

#[test]
fn bad_requests_are_errors() {
    assert!(Scene::new("random", 4, 2, 16).is_err());
    assert!(Scene::new("dct", 25, 5, 10).is_err());
    let mut scene = Scene::new("dct", 8, 2, 32).unwrap();
    assert!(scene.solve_omp().is_err());
    assert!(scene.generate(1, 1000, 1.0, 0.0).is_err());
    assert_eq!(scene.report(), "");
}
