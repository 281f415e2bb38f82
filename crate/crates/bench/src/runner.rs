//! Experiment execution and artifact writing.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use csc_core::bp::{
    bp_admm_local, bp_global_reference_with_step, bp_ist_local_with_step, kkt_certificate, step_constant, BpConfig,
    Penalty, SUPPORT_TOL,
};
use csc_core::conv::ConvOperator;
use csc_core::format::{fmt_f64, KeyValues};
use csc_core::metrics::{
    bp_hypothesis, erc_coherence_condition, omp_error_bound, omp_hypothesis, omp_phase_threshold, SupportSet,
};
use csc_core::omp::{omp, OmpConfig};
use csc_core::pursuit::PursuitResult;
use csc_core::signal::{generate_instance, Amplitude, Instance, NoiseModel, SignalSpec};

use crate::error::{write_text, BenchError, Result};
use crate::plan::{fmt_amplitude, ExperimentPlan, LambdaRule, OmpStopRule, PlanKind};
use crate::plot;
use crate::table::Table;

type Row = Vec<String>;

pub const RESULTS_FILE: &str = "results.csv";
pub const METADATA_FILE: &str = "metadata.txt";
pub const PLOT_FILE: &str = "plot.txt";
pub const RENDER_SCRIPT: &str = "render_plot.py";
pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const TIMELINE_FILE: &str = "timeline.csv";

/// Relative KKT tolerance used to flag certified solutions.
pub const KKT_REL_TOL: f64 = 1e-4;

pub const OMP_COLUMNS: [&str; 20] = [
    "trial",
    "l0",
    "l0_inf",
    "gamma_min",
    "eps_L",
    "distance_l2",
    "success",
    "seed_offset",
    "amplitude",
    "eps",
    "ratio",
    "phase_threshold",
    "coherence_part",
    "omp_hyp",
    "iterations",
    "distance_sq",
    "omp_bound",
    "bound_ok",
    "status",
    "wall_time",
];

pub const BP_COLUMNS: [&str; 23] = [
    "trial",
    "l0",
    "l0_inf",
    "gamma_min",
    "eps_L",
    "distance_l2",
    "success",
    "seed_offset",
    "amplitude",
    "eps",
    "ratio",
    "lambda",
    "bp_hyp",
    "iterations",
    "converged",
    "kkt_corr_rel",
    "kkt_dev_rel",
    "linf_dist",
    "linf_ratio",
    "support_subset",
    "support_complete",
    "status",
    "wall_time",
];

pub const EVOLUTION_COLUMNS: [&str; 12] = [
    "trial",
    "seed_offset",
    "l0",
    "l0_inf",
    "iterations",
    "converged",
    "final_lambda",
    "distance_l2",
    "global_distance_l2",
    "support_exact",
    "status",
    "wall_time",
];

pub const CONVERGENCE_COLUMNS: [&str; 17] = [
    "trial",
    "seed_offset",
    "sigma",
    "lambda",
    "solver",
    "iterations",
    "converged",
    "objective",
    "distance_l2",
    "rel_to_reference",
    "rel_to_ist_local",
    "rel_to_admm",
    "kkt_corr_rel",
    "kkt_dev_rel",
    "kkt_ok",
    "status",
    "wall_time",
];

/// Everything one run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub plan: ExperimentPlan,
    pub results: Table,
    /// Secondary tables by file name.
    pub extras: Vec<(&'static str, Table)>,
    pub metadata: KeyValues,
}

impl RunOutput {
    pub fn failures(&self) -> usize {
        let Some(c) = self.results.column("status") else {
            return 0;
        };
        self.results.rows.iter().filter(|r| r[c] != "ok").count()
    }
}

fn flag(b: bool) -> String {
    (b as u8).to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn sanitize(msg: &str) -> String {
    msg.replace([',', '\n'], ";")
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn error_row(columns: &[&str], trial: usize, seed_offset: u64, msg: &str) -> Vec<String> {
    columns
        .iter()
        .map(|c| match *c {
            "trial" => trial.to_string(),
            "seed_offset" => seed_offset.to_string(),
            "status" => format!("error: {}", sanitize(msg)),
            _ => String::new(),
        })
        .collect()
}

/// Runs `job(0..count)` on `workers` threads. A single collector stores the
/// outputs by index, so the order never depends on completion order.
pub fn run_pool<T: Send>(count: usize, workers: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = match workers {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        w => w,
    }
    .min(count.max(1));
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, job) = (&next, &job);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= count {
                    break;
                }
                if tx.send((i, job(i))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for (i, v) in rx {
            slots[i] = Some(v);
        }
    });
    slots
        .into_iter()
        .map(|v| v.expect("every index is produced once"))
        .collect()
}

struct Context {
    op: ConvOperator,
    mu: f64,
    step: Option<f64>,
}

impl Context {
    fn step(&self) -> f64 {
        self.step.expect("step constant computed for BP plans")
    }
}

fn spec_for(plan: &ExperimentPlan, trial: usize, noise: NoiseModel) -> SignalSpec {
    SignalSpec {
        seed: plan.seed,
        stream: trial as u64,
        cardinality: plan.cardinality,
        amplitude: amplitude_for(plan, trial),
        noise,
    }
}

fn amplitude_for(plan: &ExperimentPlan, trial: usize) -> Amplitude {
    plan.amplitudes[trial % plan.amplitudes.len()]
}

fn true_support(op: &ConvOperator, inst: &Instance) -> Result<SupportSet> {
    Ok(SupportSet::of_code(op, &inst.gamma, 0.0)?)
}

fn omp_row(plan: &ExperimentPlan, ctx: &Context, trial: usize) -> Result<Vec<String>> {
    let start = Instant::now();
    let inst = generate_instance(&ctx.op, &spec_for(plan, trial, plan.noises[0]))?;
    let cfg = match plan.omp_stop {
        OmpStopRule::Sparsity => OmpConfig::fixed(inst.l0),
        OmpStopRule::Residual => OmpConfig::residual(inst.eps, ctx.op.signal_len().min(ctx.op.code_len())),
    };
    let res = omp(&ctx.op, &inst.observed, &cfg)?;
    let truth = true_support(&ctx.op, &inst)?;
    let gmin = inst.gamma_min_abs;
    let dist = distance(&res.code, &inst.gamma);
    let bound = omp_error_bound(inst.eps, ctx.mu, inst.l0_inf);
    let success = res.support == truth;
    Ok(vec![
        trial.to_string(),
        inst.l0.to_string(),
        inst.l0_inf.to_string(),
        opt(gmin),
        fmt_f64(inst.eps_local),
        fmt_f64(dist),
        flag(success),
        trial.to_string(),
        fmt_amplitude(amplitude_for(plan, trial)),
        fmt_f64(inst.eps),
        opt(gmin.map(|g| inst.eps_local / g)),
        fmt_f64(omp_phase_threshold(ctx.mu, inst.l0_inf)),
        flag(erc_coherence_condition(ctx.mu, inst.l0_inf)),
        flag(gmin.is_some_and(|g| omp_hypothesis(ctx.mu, inst.l0_inf, inst.eps_local, g))),
        res.iterations.to_string(),
        fmt_f64(dist * dist),
        opt(bound),
        flag(bound.is_some_and(|b| dist * dist <= b)),
        "ok".into(),
        fmt_f64(start.elapsed().as_secs_f64()),
    ])
}

fn lambda_for(plan: &ExperimentPlan, op: &ConvOperator, inst: &Instance, noise: NoiseModel) -> Result<Penalty> {
    Ok(match plan.lambda {
        LambdaRule::LocalNoise(f) => Penalty::Fixed(f * inst.eps_local),
        LambdaRule::Fixed(l) => Penalty::Fixed(l),
        LambdaRule::Universal => match noise {
            NoiseModel::GaussianSigma(s) => Penalty::Fixed(s * (2.0 * (op.code_len() as f64).ln()).sqrt()),
            NoiseModel::GlobalNorm(_) => {
                return Err(BenchError::PlanInvalid("universal penalty needs gaussian-sigma noise".into()))
            }
        },
        LambdaRule::Schedule { initial, decay, floor } => Penalty::Schedule { initial, decay, floor },
    })
}

fn solver_config(plan: &ExperimentPlan, penalty: Penalty) -> BpConfig {
    BpConfig {
        penalty,
        max_iterations: plan.max_iterations,
        tol: plan.tol,
        rho: plan.rho,
        rho_per_lambda: plan.rho_per_lambda,
        ..BpConfig::default()
    }
}

fn fixed_lambda(p: Penalty) -> Option<f64> {
    match p {
        Penalty::Fixed(l) => Some(l),
        Penalty::Schedule { .. } => None,
    }
}

/// `(max corr / lambda, max support deviation / lambda)`.
fn kkt_relative(op: &ConvOperator, y: &[f64], code: &[f64], lambda: f64) -> Result<(f64, f64)> {
    let k = kkt_certificate(op, y, code, lambda, SUPPORT_TOL)?;
    if lambda > 0.0 {
        Ok((k.max_correlation / lambda, k.max_support_deviation / lambda))
    } else {
        Ok((k.max_correlation, k.max_support_deviation))
    }
}

fn bp_row(plan: &ExperimentPlan, ctx: &Context, trial: usize) -> Result<Vec<String>> {
    let start = Instant::now();
    let noise = plan.noises[0];
    let inst = generate_instance(&ctx.op, &spec_for(plan, trial, noise))?;
    let penalty = lambda_for(plan, &ctx.op, &inst, noise)?;
    let lambda = fixed_lambda(penalty)
        .ok_or_else(|| BenchError::PlanInvalid("batch BP experiments need a fixed penalty".into()))?;
    let res = bp_global_reference_with_step(&ctx.op, &inst.observed, &solver_config(plan, penalty), ctx.step())?;
    let truth = true_support(&ctx.op, &inst)?;
    let (corr, dev) = kkt_relative(&ctx.op, &inst.observed, &res.code, lambda)?;
    let gmin = inst.gamma_min_abs;
    let subset = res.support.is_subset_of(&truth);
    let complete = truth.is_subset_of(&res.support);
    let inf = linf(&res.code, &inst.gamma);
    Ok(vec![
        trial.to_string(),
        inst.l0.to_string(),
        inst.l0_inf.to_string(),
        opt(gmin),
        fmt_f64(inst.eps_local),
        fmt_f64(distance(&res.code, &inst.gamma)),
        flag(subset && complete),
        trial.to_string(),
        fmt_amplitude(amplitude_for(plan, trial)),
        fmt_f64(inst.eps),
        opt(gmin.map(|g| inst.eps_local / g)),
        fmt_f64(lambda),
        flag(bp_hypothesis(ctx.mu, inst.l0_inf)),
        res.iterations.to_string(),
        flag(res.converged),
        fmt_f64(corr),
        fmt_f64(dev),
        fmt_f64(inf),
        fmt_f64(if inst.eps_local > 0.0 { inf / inst.eps_local } else { f64::INFINITY }),
        flag(subset),
        flag(complete),
        "ok".into(),
        fmt_f64(start.elapsed().as_secs_f64()),
    ])
}

fn batch(plan: &ExperimentPlan, ctx: &Context, columns: &[&str], row: fn(&ExperimentPlan, &Context, usize) -> Result<Vec<String>>) -> Table {
    let rows = run_pool(plan.trials, plan.workers, |t| {
        row(plan, ctx, t).unwrap_or_else(|e| error_row(columns, t, t as u64, &e.to_string()))
    });
    let mut table = Table::new(columns);
    rows.into_iter().for_each(|r| table.push(r));
    table
}

fn strided(plan: &ExperimentPlan) -> Vec<usize> {
    let mut its: Vec<usize> = (1..=plan.max_iterations)
        .filter(|t| t % plan.timeline_every == 0 || *t == 1)
        .collect();
    its.extend(plan.snapshots.iter().copied());
    its.sort_unstable();
    its.dedup();
    its
}

fn evolution(plan: &ExperimentPlan, ctx: &Context) -> (Table, Table, Table) {
    let outcomes = run_pool(plan.trials, plan.workers, |trial| -> Result<(Row, Vec<Row>, Vec<Row>)> {
        let start = Instant::now();
        let noise = plan.noises[0];
        let inst = generate_instance(&ctx.op, &spec_for(plan, trial, noise))?;
        let penalty = lambda_for(plan, &ctx.op, &inst, noise)?;
        let cfg = BpConfig {
            record_trace: true,
            snapshot_at: plan.snapshots.clone(),
            ..solver_config(plan, penalty)
        };
        let res = bp_admm_local(&ctx.op, &inst.observed, &cfg)?;
        let truth = true_support(&ctx.op, &inst)?;
        let final_lambda = penalty.value_at(&ctx.op, &inst.observed, res.iterations);
        let row = vec![
            trial.to_string(),
            trial.to_string(),
            inst.l0.to_string(),
            inst.l0_inf.to_string(),
            res.iterations.to_string(),
            flag(res.converged),
            fmt_f64(final_lambda),
            fmt_f64(distance(&res.code, &inst.gamma)),
            opt(res.snapshots.last().filter(|s| s.0 == res.iterations).map(|s| distance(&s.1, &inst.gamma))),
            flag(res.support == truth),
            "ok".into(),
            fmt_f64(start.elapsed().as_secs_f64()),
        ];
        let mut snaps = Vec::new();
        let labelled = res
            .snapshots
            .iter()
            .map(|(it, c)| (it.to_string(), c.as_slice()))
            .chain(std::iter::once(("final".to_string(), res.code.as_slice())));
        for (label, code) in labelled {
            for (i, (e, g)) in code.iter().zip(&inst.gamma).enumerate() {
                snaps.push(vec![trial.to_string(), label.clone(), i.to_string(), fmt_f64(*e), fmt_f64(*g)]);
            }
        }
        let trace = res
            .trace
            .iter()
            .filter(|r| r.iter % plan.timeline_every == 0 || r.iter == 1 || r.iter == res.iterations)
            .map(|r| {
                let mut v = vec![trial.to_string()];
                v.extend(r.csv_row().split(',').map(String::from));
                v
            })
            .collect();
        Ok((row, snaps, trace))
    });
    let mut results = Table::new(&EVOLUTION_COLUMNS);
    let mut snapshots = Table::new(&["trial", "iteration", "index", "estimate", "truth"]);
    let mut trace = Table::new(&["trial", "iter", "objective", "primal_res", "dual_res", "wall_time"]);
    for (trial, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((row, snaps, tr)) => {
                results.push(row);
                snaps.into_iter().for_each(|r| snapshots.push(r));
                tr.into_iter().for_each(|r| trace.push(r));
            }
            Err(e) => results.push(error_row(&EVOLUTION_COLUMNS, trial, trial as u64, &e.to_string())),
        }
    }
    (results, snapshots, trace)
}

fn convergence(plan: &ExperimentPlan, ctx: &Context) -> (Table, Table) {
    let jobs: Vec<(usize, usize)> = (0..plan.trials)
        .flat_map(|t| (0..plan.noises.len()).map(move |s| (t, s)))
        .collect();
    let outcomes = run_pool(jobs.len(), plan.workers, |j| -> Result<(Vec<Row>, Vec<Row>)> {
        let (trial, si) = jobs[j];
        let noise = plan.noises[si];
        let sigma = match noise {
            NoiseModel::GaussianSigma(s) | NoiseModel::GlobalNorm(s) => s,
        };
        let inst = generate_instance(&ctx.op, &spec_for(plan, trial, noise))?;
        let penalty = lambda_for(plan, &ctx.op, &inst, noise)?;
        let lambda = fixed_lambda(penalty)
            .ok_or_else(|| BenchError::PlanInvalid("convergence-time runs need a fixed penalty".into()))?;
        let cfg = BpConfig {
            record_trace: true,
            snapshot_at: strided(plan),
            ..solver_config(plan, penalty)
        };
        let y = &inst.observed;
        let runs: [(&str, Result<PursuitResult>); 3] = [
            ("reference", bp_global_reference_with_step(&ctx.op, y, &cfg, ctx.step()).map_err(Into::into)),
            ("ist-local", bp_ist_local_with_step(&ctx.op, y, &cfg, ctx.step()).map_err(Into::into)),
            ("admm", bp_admm_local(&ctx.op, y, &cfg).map_err(Into::into)),
        ];
        let codes: Vec<Option<Vec<f64>>> = runs.iter().map(|(_, r)| r.as_ref().ok().map(|r| r.code.clone())).collect();
        let relative = |code: &[f64], other: &Option<Vec<f64>>| {
            other.as_ref().map(|o| {
                let scale = o.iter().map(|v| v * v).sum::<f64>().sqrt();
                distance(code, o) / scale.max(f64::MIN_POSITIVE)
            })
        };
        let mut rows = Vec::new();
        let mut timeline = Vec::new();
        for (name, run) in runs {
            let head = [trial.to_string(), trial.to_string(), sigma.to_string(), fmt_f64(lambda), name.to_string()];
            let res = match run {
                Ok(r) => r,
                Err(e) => {
                    let mut row = head.to_vec();
                    row.extend(std::iter::repeat_n(String::new(), CONVERGENCE_COLUMNS.len() - 7));
                    row.push(format!("error: {}", sanitize(&e.to_string())));
                    row.push(String::new());
                    rows.push(row);
                    continue;
                }
            };
            let (corr, dev) = kkt_relative(&ctx.op, y, &res.code, lambda)?;
            let objective = csc_core::bp::bp_objective(&ctx.op, y, &res.code, lambda)?;
            let mut row = head.to_vec();
            row.extend([
                res.iterations.to_string(),
                flag(res.converged),
                fmt_f64(objective),
                fmt_f64(distance(&res.code, &inst.gamma)),
            ]);
            row.extend(codes.iter().map(|o| opt(relative(&res.code, o))));
            row.extend([
                fmt_f64(corr),
                fmt_f64(dev),
                flag(corr <= 1.0 + KKT_REL_TOL && dev <= KKT_REL_TOL),
                "ok".into(),
                fmt_f64(res.wall_time),
            ]);
            rows.push(row);
            for (it, code) in &res.snapshots {
                let t = res.trace.get(it - 1).map_or(f64::NAN, |r| r.wall_time);
                timeline.push(vec![
                    trial.to_string(),
                    sigma.to_string(),
                    name.to_string(),
                    it.to_string(),
                    fmt_f64(t),
                    fmt_f64(distance(code, &inst.gamma)),
                ]);
            }
        }
        Ok((rows, timeline))
    });
    let mut results = Table::new(&CONVERGENCE_COLUMNS);
    let mut timeline = Table::new(&["trial", "sigma", "solver", "iter", "wall_time", "distance_l2"]);
    for (j, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((rows, tl)) => {
                rows.into_iter().for_each(|r| results.push(r));
                tl.into_iter().for_each(|r| timeline.push(r));
            }
            Err(e) => {
                let trial = jobs[j].0;
                results.push(error_row(&CONVERGENCE_COLUMNS, trial, trial as u64, &e.to_string()));
            }
        }
    }
    (results, timeline)
}

/// Runs a plan in memory.
pub fn execute(plan: &ExperimentPlan) -> Result<RunOutput> {
    plan.validate()?;
    let start = Instant::now();
    let op = plan.operator()?;
    spec_for(plan, 0, plan.noises[0]).validate(&op)?;
    let mu = op.mutual_coherence();
    let step = match plan.kind {
        k if k.is_omp() => None,
        _ => Some(step_constant(&op, &solver_config(plan, Penalty::Fixed(0.0)))?),
    };
    let ctx = Context { op, mu, step };
    let mut extras = Vec::new();
    let results = match plan.kind {
        k if k.is_omp() => batch(plan, &ctx, &OMP_COLUMNS, omp_row),
        k if k.is_bp_batch() => batch(plan, &ctx, &BP_COLUMNS, bp_row),
        PlanKind::AdmmEvolution => {
            let (r, s, t) = evolution(plan, &ctx);
            extras.push((SNAPSHOTS_FILE, s));
            extras.push((TRACE_FILE, t));
            r
        }
        _ => {
            let (r, t) = convergence(plan, &ctx);
            extras.push((TIMELINE_FILE, t));
            r
        }
    };
    let mut metadata = plan.to_key_values();
    metadata
        .set("run.version", env!("CARGO_PKG_VERSION"))
        .set("run.mu", fmt_f64(ctx.mu))
        .set("run.n", ctx.op.n())
        .set("run.m", ctx.op.m())
        .set("run.cardinality_law", "uniform over the integer range")
        .set("run.trial_seed", "stream = trial index, key = seed")
        .set("run.results_sha256", results.digest())
        .set("run.rows", results.rows.len())
        .set("run.wall_time", fmt_f64(start.elapsed().as_secs_f64()));
    if let Some(c) = ctx.step {
        metadata.set("run.step_constant", fmt_f64(c));
    }
    let out = RunOutput {
        plan: plan.clone(),
        results,
        extras,
        metadata,
    };
    let mut out = out;
    out.metadata.set("run.trials_failed", out.failures());
    Ok(out)
}

/// Writes the artifact set of `out` into `dir`.
pub fn write_artifacts(out: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| BenchError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    out.results.write(&dir.join(RESULTS_FILE))?;
    for (name, table) in &out.extras {
        table.write(&dir.join(name))?;
    }
    write_text(&dir.join(METADATA_FILE), &out.metadata.render())?;
    write_text(&dir.join(PLOT_FILE), &plot::describe(&out.plan, &out.metadata).render())?;
    write_text(&dir.join(RENDER_SCRIPT), plot::RENDER_SCRIPT)?;
    Ok(())
}

/// Runs a plan and writes its artifacts to `dir` (the plan's output by default).
pub fn run_experiment(plan: &ExperimentPlan, dir: Option<&Path>) -> Result<(RunOutput, PathBuf)> {
    let out = execute(plan)?;
    let dir = dir.map_or_else(|| plan.output.clone(), Path::to_path_buf);
    write_artifacts(&out, &dir)?;
    Ok((out, dir))
}
