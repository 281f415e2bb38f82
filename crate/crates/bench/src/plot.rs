//! Declarative plot descriptions.
//!
//! A description is a `key=value` file. `panels=<k>` is followed by
//! `panel.<i>.<field>` entries:
//!
//! | field | meaning |
//! |---|---|
//! | `title` | panel title |
//! | `source` | CSV file in the run directory |
//! | `filter` | optional `column=value`; other rows are skipped |
//! | `x`, `y` | column names |
//! | `x_label`, `y_label` | axis labels |
//! | `x_scale`, `y_scale` | `linear` or `log` |
//! | `kind` | `scatter`, `line` or `stem` |
//! | `group` | optional column whose values split the points into series |
//! | `curves` | columns drawn as lines against `x` |
//! | `overlay` | column drawn as a second stem series |
//! | `hlines`, `vlines` | `value:label` pairs separated by `;` |
//!
//! [`RENDER_SCRIPT`] draws a description with matplotlib.

use csc_core::format::KeyValues;

use crate::plan::{ExperimentPlan, PlanKind};
use crate::runner::{RESULTS_FILE, SNAPSHOTS_FILE, TIMELINE_FILE};

pub const RENDER_SCRIPT: &str = include_str!("../assets/render_plot.py");

#[derive(Debug, Clone, Default)]
struct Panel {
    fields: Vec<(&'static str, String)>,
}

impl Panel {
    fn new(title: &str, source: &str, x: (&str, &str, &str), y: (&str, &str, &str), kind: &str) -> Self {
        let mut p = Panel::default();
        p.set("title", title)
            .set("source", source)
            .set("x", x.0)
            .set("x_label", x.1)
            .set("x_scale", x.2)
            .set("y", y.0)
            .set("y_label", y.1)
            .set("y_scale", y.2)
            .set("kind", kind);
        p
    }

    fn set(&mut self, key: &'static str, value: impl ToString) -> &mut Self {
        self.fields.push((key, value.to_string()));
        self
    }
}

fn render(panels: Vec<Panel>) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.set("panels", panels.len());
    for (i, p) in panels.into_iter().enumerate() {
        for (k, v) in p.fields {
            kv.set(format!("panel.{i}.{k}"), v);
        }
    }
    kv
}

/// Description for the artifacts of `plan`; `mu` is read from the run metadata.
pub fn describe(plan: &ExperimentPlan, metadata: &KeyValues) -> KeyValues {
    let mu: f64 = metadata.get("run.mu").and_then(|v| v.parse().ok()).unwrap_or(f64::NAN);
    let l0inf = ("l0_inf", "l0,inf norm of the true code", "linear");
    let ratio = ("ratio", "eps_L / |Gamma_min|", "log");
    let panels = match plan.kind {
        PlanKind::OmpDistance => {
            let mut p = Panel::new(
                "OMP: squared distance to the true code",
                RESULTS_FILE,
                l0inf,
                ("distance_sq", "||Gamma_OMP - Gamma||_2^2", "log"),
                "scatter",
            );
            p.set("curves", "omp_bound")
                .set("vlines", format!("{}:coherence limit", 0.5 * (1.0 + 1.0 / mu)));
            vec![p]
        }
        PlanKind::OmpPhase => {
            let mut p = Panel::new("OMP: support recovery", RESULTS_FILE, l0inf, ratio, "scatter");
            p.set("group", "success").set("curves", "phase_threshold");
            vec![p]
        }
        PlanKind::BpPhase => {
            let mut p = Panel::new("BP: support recovery", RESULTS_FILE, l0inf, ratio, "scatter");
            p.set("group", "success")
                .set("hlines", format!("{}:2/15", 2.0 / 15.0))
                .set("vlines", format!("{}:(1+1/mu)/3", (1.0 + 1.0 / mu) / 3.0));
            vec![p]
        }
        PlanKind::BpLinf => {
            let mut p = Panel::new(
                "BP: l_inf error relative to eps_L",
                RESULTS_FILE,
                l0inf,
                ("linf_ratio", "||Gamma_BP - Gamma||_inf / eps_L", "linear"),
                "scatter",
            );
            p.set("hlines", "7.5:15/2")
                .set("vlines", format!("{}:(1+1/mu)/3", (1.0 + 1.0 / mu) / 3.0));
            vec![p]
        }
        PlanKind::AdmmEvolution => plan
            .snapshots
            .iter()
            .map(|s| s.to_string())
            .chain(std::iter::once("final".to_string()))
            .map(|label| {
                let mut p = Panel::new(
                    &format!("ADMM estimate at iteration {label}"),
                    SNAPSHOTS_FILE,
                    ("index", "code index", "linear"),
                    ("estimate", "coefficient", "linear"),
                    "stem",
                );
                p.set("filter", format!("iteration={label}")).set("overlay", "truth");
                p
            })
            .collect(),
        PlanKind::ConvergenceTime => plan
            .noises
            .iter()
            .map(|n| {
                let sigma = crate::plan::fmt_noise(*n);
                let value = sigma.split_once(':').map_or("", |s| s.1).to_string();
                let mut p = Panel::new(
                    &format!("Distance to the true code, {sigma}"),
                    TIMELINE_FILE,
                    ("wall_time", "seconds", "linear"),
                    ("distance_l2", "||Gamma_hat - Gamma||_2", "log"),
                    "line",
                );
                p.set("filter", format!("sigma={value}")).set("group", "solver");
                p
            })
            .collect(),
    };
    render(panels)
}
