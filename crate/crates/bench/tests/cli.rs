use std::process::Command;

use csc_core::format::{read_vec, write_vec};
use csc_core::signal::{dct_local_dictionary, generate_instance, Amplitude, Cardinality, NoiseModel, SignalSpec};
use csc_core::ConvOperator;

fn csc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_csc"))
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(csc().output().unwrap().status.code(), Some(2));
    assert_eq!(csc().arg("frobnicate").output().unwrap().status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.plan");
    assert_eq!(csc().arg("run").arg(&missing).output().unwrap().status.code(), Some(2));
    assert_eq!(csc().arg("verify").arg(tmp.path()).output().unwrap().status.code(), Some(2));
    let bad = tmp.path().join("bad.plan");
    std::fs::write(&bad, "name=fig2-omp-distance\ncolour=blue\n").unwrap();
    assert_eq!(csc().arg("run").arg(&bad).output().unwrap().status.code(), Some(2));
}

#[test]
fn run_then_verify_and_detect_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = tmp.path().join("omp.plan");
    std::fs::write(&plan, "name=fig3a-omp-phase\ntrials=8\ncardinality=1..10\noutput=out\n").unwrap();
    let run = csc().arg("run").arg(&plan).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    let out = tmp.path().join("out");
    assert!(out.join("results.csv").exists(), "{stdout}");
    assert!(out.join("plot.txt").exists() && out.join("render_plot.py").exists());

    let verify = csc().arg("verify").arg(&out).output().unwrap();
    let text = String::from_utf8_lossy(&verify.stdout).to_string();
    assert!(text.contains("PASS [-] results digest"), "{text}");

    let results = out.join("results.csv");
    let body = std::fs::read_to_string(&results).unwrap();
    let mut lines: Vec<String> = body.lines().map(String::from).collect();
    lines[1] = lines[1].replacen(",ok,", ",error: injected,", 1);
    std::fs::write(&results, lines.join("\n") + "\n").unwrap();
    let verify = csc().arg("verify").arg(&out).output().unwrap();
    assert_eq!(verify.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&verify.stdout).contains("row 1 (trial 0, seed_offset 0)"));
}

#[test]
fn solve_writes_code_and_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let dict_path = tmp.path().join("d.dict");
    let y_path = tmp.path().join("y.vec");
    let gen = csc()
        .args(["gen-dict", "--kind", "dct", "--n", "8", "--m", "2", "--out"])
        .arg(&dict_path)
        .output()
        .unwrap();
    assert!(gen.status.success());

    let op = ConvOperator::new(dct_local_dictionary(8, 2).unwrap(), 48).unwrap();
    let spec = SignalSpec {
        seed: 9,
        stream: 0,
        cardinality: Cardinality::Exact(3),
        amplitude: Amplitude::Band { lo: 1.0, hi: 2.0 },
        noise: NoiseModel::GaussianSigma(0.01),
    };
    let inst = generate_instance(&op, &spec).unwrap();
    std::fs::write(&y_path, write_vec(&inst.observed)).unwrap();

    for solver in ["ista", "ist-local", "admm"] {
        let out = tmp.path().join(format!("{solver}.vec"));
        let trace = tmp.path().join(format!("{solver}.csv"));
        let st = csc()
            .args(["solve", "--solver", solver, "--lambda", "0.05", "--tol", "1e-10", "--in"])
            .arg(&y_path)
            .arg("--dict")
            .arg(&dict_path)
            .arg("--out")
            .arg(&out)
            .arg("--trace")
            .arg(&trace)
            .output()
            .unwrap();
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
        let code = read_vec(&std::fs::read_to_string(&out).unwrap()).unwrap();
        assert_eq!(code.len(), 96);
        let trace = std::fs::read_to_string(&trace).unwrap();
        assert!(trace.starts_with("iter,objective,primal_res,dual_res,wall_time\n"));
        assert!(trace.lines().count() > 2);
    }

    let out = tmp.path().join("omp.vec");
    let st = csc()
        .args(["solve", "--solver", "omp", "--sparsity", "3", "--in"])
        .arg(&y_path)
        .arg("--dict")
        .arg(&dict_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(st.status.success());
    let code = read_vec(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(code.iter().filter(|v| **v != 0.0).count(), 3);

    let st = csc()
        .args(["solve", "--solver", "admm", "--in"])
        .arg(&y_path)
        .arg("--dict")
        .arg(&dict_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(2));
}

#[test]
fn gen_dict_experiment_matches_bundled_asset() {
    let out = csc().arg("gen-dict").output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), csc_core::signal::EXPERIMENT_DICTIONARY);
}
