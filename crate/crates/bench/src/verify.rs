//! Checks a run directory against the theorem-level claims its experiment
//! illustrates. Each check recomputes its predicate from the raw columns
//! rather than trusting the flag columns written by the runner.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use csc_core::format::KeyValues;

use crate::error::{read_text, BenchError, Result};
use crate::plan::PlanKind;
use crate::runner::{KKT_REL_TOL, METADATA_FILE, RESULTS_FILE};
use crate::table::{RowView, Table};

/// Distance threshold for exact recovery in the noiseless solver run.
pub const EXACT_RECOVERY_TOL: f64 = 1e-4;
/// Pairwise relative agreement required between the three BP solvers.
pub const SOLVER_AGREEMENT_TOL: f64 = 1e-4;
/// l0,inf level up to which the BP guarantees are asserted.
pub const BP_L0_INF_LIMIT: usize = 4;
/// l0,inf level beyond which OMP failures must appear.
pub const OMP_FAILURE_L0_INF: usize = 40;
/// Minimum failure fraction in that region.
pub const OMP_FAILURE_FRACTION: f64 = 0.01;

const MAX_CITED: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    /// Acceptance criterion number, or `-` for bookkeeping checks.
    pub criterion: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub kind: PlanKind,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{} [{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.criterion,
                c.name,
                c.detail
            );
            for v in c.violations.iter().take(MAX_CITED) {
                let _ = writeln!(out, "    {v}");
            }
            if c.violations.len() > MAX_CITED {
                let _ = writeln!(out, "    ... and {} more", c.violations.len() - MAX_CITED);
            }
        }
        let _ = writeln!(
            out,
            "{}: {} of {} checks passed",
            self.kind,
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        );
        out
    }
}

fn cite(r: &RowView, msg: String) -> String {
    format!(
        "row {} (trial {}, seed_offset {}): {msg}",
        r.index + 1,
        r.str("trial").unwrap_or("?"),
        r.str("seed_offset").unwrap_or("?")
    )
}

/// Accumulates one check over rows.
struct Tally {
    criterion: &'static str,
    name: &'static str,
    considered: usize,
    violations: Vec<String>,
}

impl Tally {
    fn new(criterion: &'static str, name: &'static str) -> Self {
        Self {
            criterion,
            name,
            considered: 0,
            violations: Vec::new(),
        }
    }

    fn finish(self, what: &str) -> Check {
        let passed = self.violations.is_empty() && self.considered > 0;
        let detail = if self.considered == 0 {
            format!("no rows {what}")
        } else {
            format!("{} rows {what}, {} violations", self.considered, self.violations.len())
        };
        Check {
            criterion: self.criterion,
            name: self.name,
            passed,
            detail,
            violations: self.violations,
        }
    }
}

fn malformed(dir: &Path, msg: String) -> BenchError {
    BenchError::Malformed {
        path: dir.join(RESULTS_FILE),
        msg,
    }
}

fn need_f64(r: &RowView, col: &str, dir: &Path) -> Result<f64> {
    r.f64(col)
        .ok_or_else(|| malformed(dir, format!("row {} lacks numeric `{col}`", r.index + 1)))
}

fn need_usize(r: &RowView, col: &str, dir: &Path) -> Result<usize> {
    r.usize(col)
        .ok_or_else(|| malformed(dir, format!("row {} lacks integer `{col}`", r.index + 1)))
}

fn need_flag(r: &RowView, col: &str, dir: &Path) -> Result<bool> {
    r.flag(col)
        .ok_or_else(|| malformed(dir, format!("row {} lacks 0/1 `{col}`", r.index + 1)))
}

fn ok_rows(table: &Table) -> impl Iterator<Item = RowView<'_>> {
    table.views().filter(|r| r.str("status") == Some("ok"))
}

fn status_check(table: &Table) -> Check {
    let violations: Vec<String> = table
        .views()
        .filter(|r| r.str("status") != Some("ok"))
        .map(|r| cite(&r, r.str("status").unwrap_or("missing status").to_string()))
        .collect();
    Check {
        criterion: "-",
        name: "all trials completed",
        passed: violations.is_empty(),
        detail: format!("{} rows, {} failed", table.rows.len(), violations.len()),
        violations,
    }
}

fn digest_check(table: &Table, meta: &KeyValues) -> Check {
    let actual = table.digest();
    let recorded = meta.get("run.results_sha256").unwrap_or("");
    Check {
        criterion: "-",
        name: "results digest matches metadata",
        passed: actual == recorded,
        detail: format!("sha256 {actual}"),
        violations: if actual == recorded {
            Vec::new()
        } else {
            vec![format!("metadata records `{recorded}`")]
        },
    }
}

fn omp_distance(table: &Table, mu: f64, dir: &Path) -> Result<Check> {
    let mut t = Tally::new("3", "OMP squared distance within eps^2/(1 - mu(k-1))");
    let limit = 0.5 * (1.0 + 1.0 / mu);
    for r in ok_rows(table) {
        let k = need_usize(&r, "l0_inf", dir)?;
        if (k as f64) >= limit {
            continue;
        }
        t.considered += 1;
        let eps = need_f64(&r, "eps", dir)?;
        let d = need_f64(&r, "distance_l2", dir)?;
        let bound = eps * eps / (1.0 - mu * (k as f64 - 1.0).max(0.0));
        if !(d * d <= bound * (1.0 + 1e-12)) {
            t.violations.push(cite(&r, format!("distance^2 {:.6e} > bound {:.6e} at l0_inf {k}", d * d, bound)));
        }
    }
    Ok(t.finish("with l0_inf < (1 + 1/mu)/2"))
}

fn omp_phase(table: &Table, mu: f64, dir: &Path) -> Result<Vec<Check>> {
    let mut below = Tally::new("4", "OMP recovers the support below the phase line");
    let mut region = 0usize;
    let mut region_fail = 0usize;
    for r in ok_rows(table) {
        let k = need_usize(&r, "l0_inf", dir)?;
        let ratio = need_f64(&r, "ratio", dir)?;
        let success = need_flag(&r, "success", dir)?;
        let line = 0.5 * mu * (1.0 + 1.0 / mu) - mu * k as f64;
        if ratio < line {
            below.considered += 1;
            if !success {
                below.violations.push(cite(&r, format!("support missed with ratio {ratio:.4e} < line {line:.4e}")));
            }
        } else if k > OMP_FAILURE_L0_INF {
            region += 1;
            region_fail += (!success) as usize;
        }
    }
    let frac = if region > 0 { region_fail as f64 / region as f64 } else { 0.0 };
    let failure = Check {
        criterion: "4",
        name: "OMP failure region beyond l0_inf 40",
        passed: region > 0 && frac >= OMP_FAILURE_FRACTION,
        detail: format!(
            "{region_fail} of {region} trials above the line with l0_inf > {OMP_FAILURE_L0_INF} failed ({:.1}%)",
            100.0 * frac
        ),
        violations: Vec::new(),
    };
    Ok(vec![below.finish("strictly below the line"), failure])
}

fn bp_guarantees(table: &Table, dir: &Path) -> Result<Check> {
    let mut t = Tally::new("5", "BP support, l_inf and recovery guarantees");
    for r in ok_rows(table) {
        let k = need_usize(&r, "l0_inf", dir)?;
        if k > BP_L0_INF_LIMIT {
            continue;
        }
        t.considered += 1;
        let eps_l = need_f64(&r, "eps_L", dir)?;
        let inf = need_f64(&r, "linf_dist", dir)?;
        if !need_flag(&r, "converged", dir)? {
            t.violations.push(cite(&r, format!("stopped at the iteration cap ({})", r.str("iterations").unwrap_or("?"))));
        }
        if !need_flag(&r, "support_subset", dir)? {
            t.violations.push(cite(&r, "BP support leaves the true support".into()));
        }
        if !(inf < 7.5 * eps_l) {
            t.violations.push(cite(&r, format!("l_inf error / eps_L = {:.4} >= 7.5", inf / eps_l)));
        }
        if let Some(ratio) = r.f64("ratio") {
            if ratio < 2.0 / 15.0 && !need_flag(&r, "support_complete", dir)? {
                t.violations.push(cite(&r, format!("support incomplete with ratio {ratio:.4e} < 2/15")));
            }
        }
    }
    Ok(t.finish(&format!("with l0_inf <= {BP_L0_INF_LIMIT}")))
}

fn kkt(table: &Table, dir: &Path) -> Result<Check> {
    let mut t = Tally::new("7", "KKT certificate of converged BP solutions");
    for r in ok_rows(table) {
        if !need_flag(&r, "converged", dir)? {
            continue;
        }
        t.considered += 1;
        let corr = need_f64(&r, "kkt_corr_rel", dir)?;
        let dev = need_f64(&r, "kkt_dev_rel", dir)?;
        if !(corr <= 1.0 + KKT_REL_TOL && dev <= KKT_REL_TOL) {
            t.violations.push(cite(&r, format!("||D^T r||_inf / lambda = {corr:.8}, support deviation / lambda = {dev:.3e}")));
        }
    }
    Ok(t.finish("converged"))
}

fn exact_recovery(table: &Table, dir: &Path) -> Result<Check> {
    let mut t = Tally::new("6a", "noiseless ADMM recovers the code");
    for r in ok_rows(table) {
        t.considered += 1;
        let d = need_f64(&r, "distance_l2", dir)?;
        if !(d < EXACT_RECOVERY_TOL) {
            t.violations.push(cite(&r, format!("distance {d:.4e} >= {EXACT_RECOVERY_TOL:e}")));
        }
    }
    Ok(t.finish("checked"))
}

fn agreement(table: &Table, dir: &Path) -> Result<Check> {
    let mut t = Tally::new("6b", "reference, ist-local and admm agree");
    let mut groups: BTreeMap<(String, String), Vec<RowView>> = BTreeMap::new();
    for r in table.views() {
        let key = (r.str("trial").unwrap_or("").to_string(), r.str("sigma").unwrap_or("").to_string());
        groups.entry(key).or_default().push(r);
    }
    for ((trial, sigma), rows) in groups {
        t.considered += 1;
        for r in &rows {
            if r.str("status") != Some("ok") || !need_flag(r, "converged", dir)? {
                t.violations.push(cite(r, format!("{} did not converge", r.str("solver").unwrap_or("?"))));
            }
        }
        for col in ["rel_to_reference", "rel_to_ist_local", "rel_to_admm"] {
            for r in &rows {
                match r.f64(col) {
                    Some(v) if v <= SOLVER_AGREEMENT_TOL => {}
                    v => t.violations.push(cite(
                        r,
                        format!(
                            "sigma {sigma}, trial {trial}: {} {col} = {}",
                            r.str("solver").unwrap_or("?"),
                            v.map_or("missing".into(), |x| format!("{x:.3e}"))
                        ),
                    )),
                }
            }
        }
    }
    Ok(t.finish("(trial, sigma) groups"))
}

/// Verifies the run in `dir`.
pub fn verify_dir(dir: &Path) -> Result<VerifyReport> {
    let meta_path = dir.join(METADATA_FILE);
    let meta = KeyValues::parse(&read_text(&meta_path)?)?;
    let kind: PlanKind = meta
        .get("name")
        .ok_or_else(|| BenchError::Malformed {
            path: meta_path.clone(),
            msg: "missing `name`".into(),
        })?
        .parse()?;
    let results_path = dir.join(RESULTS_FILE);
    let table = Table::read(&results_path)?;
    if table.rows.is_empty() {
        return Err(BenchError::MissingArtifact(results_path));
    }
    let mu: f64 = meta
        .parse_opt("run.mu")?
        .ok_or_else(|| BenchError::Malformed {
            path: meta_path,
            msg: "missing `run.mu`".into(),
        })?;

    let mut checks = vec![status_check(&table), digest_check(&table, &meta)];
    match kind {
        PlanKind::OmpDistance => checks.push(omp_distance(&table, mu, dir)?),
        PlanKind::OmpPhase => checks.extend(omp_phase(&table, mu, dir)?),
        PlanKind::BpPhase | PlanKind::BpLinf => {
            checks.push(bp_guarantees(&table, dir)?);
            checks.push(kkt(&table, dir)?);
        }
        PlanKind::AdmmEvolution => checks.push(exact_recovery(&table, dir)?),
        PlanKind::ConvergenceTime => {
            checks.push(agreement(&table, dir)?);
            checks.push(kkt(&table, dir)?);
        }
    }
    Ok(VerifyReport { kind, checks })
}
