//! Experiment plans: `key=value` files naming one of the six experiments,
//! with every other key optional and defaulted per experiment.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csc_core::conv::{ConvOperator, LocalDictionary};
use csc_core::format::{read_dictionary, KeyValues};
use csc_core::signal::{dct_local_dictionary, experiment_dictionary, Amplitude, Cardinality, NoiseModel};

use crate::error::{read_text, BenchError, Result};

/// Metadata keys with this prefix describe a run rather than its plan.
pub const RUN_PREFIX: &str = "run.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanKind {
    OmpDistance,
    OmpPhase,
    BpPhase,
    BpLinf,
    AdmmEvolution,
    ConvergenceTime,
}

impl PlanKind {
    pub const ALL: [PlanKind; 6] = [
        PlanKind::OmpDistance,
        PlanKind::OmpPhase,
        PlanKind::BpPhase,
        PlanKind::BpLinf,
        PlanKind::AdmmEvolution,
        PlanKind::ConvergenceTime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlanKind::OmpDistance => "fig2-omp-distance",
            PlanKind::OmpPhase => "fig3a-omp-phase",
            PlanKind::BpPhase => "fig3b-bp-phase",
            PlanKind::BpLinf => "fig4-bp-linf",
            PlanKind::AdmmEvolution => "fig5-admm-evolution",
            PlanKind::ConvergenceTime => "fig6-convergence-time",
        }
    }

    pub fn is_omp(self) -> bool {
        matches!(self, PlanKind::OmpDistance | PlanKind::OmpPhase)
    }

    pub fn is_bp_batch(self) -> bool {
        matches!(self, PlanKind::BpPhase | PlanKind::BpLinf)
    }
}

impl FromStr for PlanKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        PlanKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| BenchError::PlanInvalid(format!("unknown experiment `{s}`")))
    }
}

impl fmt::Display for PlanKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictionarySource {
    /// The bundled low-coherence n=64, m=2 dictionary.
    Experiment,
    Dct { n: usize, m: usize },
    File(PathBuf),
}

impl DictionarySource {
    pub fn load(&self) -> Result<LocalDictionary> {
        Ok(match self {
            DictionarySource::Experiment => experiment_dictionary(),
            DictionarySource::Dct { n, m } => dct_local_dictionary(*n, *m)?,
            DictionarySource::File(p) => read_dictionary(&read_text(p)?)?,
        })
    }
}

impl fmt::Display for DictionarySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DictionarySource::Experiment => f.write_str("experiment"),
            DictionarySource::Dct { n, m } => write!(f, "dct:{n}x{m}"),
            DictionarySource::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OmpStopRule {
    /// Exactly `||Gamma||_0` iterations.
    Sparsity,
    /// Until the residual norm drops to the noise norm.
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `factor * eps_L` of the realized noise.
    LocalNoise(f64),
    /// `sigma * sqrt(2 ln(N m))` for Gaussian noise of deviation `sigma`.
    Universal,
    Fixed(f64),
    /// Decaying penalty `max(initial * decay^(t-1), floor)`; a missing
    /// initial value means `0.1 ||D^T Y||_inf`.
    Schedule {
        initial: Option<f64>,
        decay: f64,
        floor: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: PlanKind,
    pub seed: u64,
    pub trials: usize,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub dictionary: DictionarySource,
    pub signal_len: usize,
    pub cardinality: Cardinality,
    /// Trial `t` uses entry `t mod len`.
    pub amplitudes: Vec<Amplitude>,
    /// One realization per entry (several only for the convergence-time plan).
    pub noises: Vec<NoiseModel>,
    pub omp_stop: OmpStopRule,
    pub lambda: LambdaRule,
    pub tol: f64,
    pub max_iterations: usize,
    pub rho: f64,
    pub rho_per_lambda: Option<f64>,
    /// Iterations whose estimates are written out.
    pub snapshots: Vec<usize>,
    /// Stride of the distance-versus-time samples.
    pub timeline_every: usize,
    pub output: PathBuf,
}

const KEYS: [&str; 19] = [
    "name",
    "seed",
    "trials",
    "workers",
    "dictionary",
    "signal_len",
    "cardinality",
    "amplitudes",
    "noise",
    "omp_stop",
    "lambda",
    "tol",
    "max_iters",
    "rho",
    "rho_per_lambda",
    "snapshots",
    "timeline_every",
    "output",
    "lambda_floor",
];

impl ExperimentPlan {
    /// Desk-scale defaults for `kind`.
    pub fn defaults(kind: PlanKind) -> Self {
        let batch = Self {
            kind,
            seed: 1,
            trials: 500,
            workers: 0,
            dictionary: DictionarySource::Experiment,
            signal_len: 640,
            cardinality: Cardinality::Range { min: 1, max: 500 },
            amplitudes: [0.1, 0.3, 1.0, 3.0, 10.0].map(|a| Amplitude::Uniform { a }).to_vec(),
            noises: vec![NoiseModel::GlobalNorm(0.1)],
            omp_stop: OmpStopRule::Sparsity,
            lambda: LambdaRule::LocalNoise(4.0),
            tol: 1e-10,
            max_iterations: 50_000,
            rho: 1.0,
            rho_per_lambda: None,
            snapshots: Vec::new(),
            timeline_every: 1,
            output: PathBuf::from("results").join(kind.name()),
        };
        let solver = Self {
            trials: 1,
            dictionary: DictionarySource::Dct { n: 25, m: 5 },
            signal_len: 300,
            cardinality: Cardinality::Exact(50),
            amplitudes: vec![Amplitude::Band { lo: 1.0, hi: 2.0 }],
            ..batch.clone()
        };
        match kind {
            PlanKind::OmpDistance | PlanKind::OmpPhase | PlanKind::BpPhase | PlanKind::BpLinf => batch,
            PlanKind::AdmmEvolution => Self {
                seed: 2,
                noises: vec![NoiseModel::GaussianSigma(0.0)],
                lambda: LambdaRule::Schedule {
                    initial: None,
                    decay: 0.99,
                    floor: 1e-8,
                },
                max_iterations: 100_000,
                rho_per_lambda: Some(1.0),
                snapshots: vec![20, 200, 1000],
                ..solver
            },
            PlanKind::ConvergenceTime => Self {
                seed: 2,
                noises: [0.02, 0.04, 0.06].map(NoiseModel::GaussianSigma).to_vec(),
                lambda: LambdaRule::Universal,
                max_iterations: 200_000,
                rho_per_lambda: Some(1.0),
                timeline_every: 25,
                ..solver
            },
        }
    }

    /// Parses a plan; relative `file:` dictionaries and outputs resolve
    /// against `base`.
    pub fn from_key_values(kv: &KeyValues, base: Option<&Path>) -> Result<Self> {
        let kind: PlanKind = kv
            .get("name")
            .ok_or_else(|| BenchError::PlanInvalid("missing `name`".into()))?
            .parse()?;
        for key in kv.keys() {
            if !KEYS.contains(&key) && !key.starts_with(RUN_PREFIX) {
                return Err(BenchError::PlanInvalid(format!("unknown key `{key}`")));
            }
        }
        let mut plan = Self::defaults(kind);
        let resolve = |p: &str| match base {
            Some(b) if Path::new(p).is_relative() => b.join(p),
            _ => PathBuf::from(p),
        };
        if let Some(v) = num(kv, "seed")? {
            plan.seed = v;
        }
        if let Some(v) = num(kv, "trials")? {
            plan.trials = v;
        }
        if let Some(v) = num(kv, "workers")? {
            plan.workers = v;
        }
        if let Some(v) = kv.get("dictionary") {
            plan.dictionary = parse_dictionary(v, &resolve)?;
        }
        if let Some(v) = num(kv, "signal_len")? {
            plan.signal_len = v;
        }
        if let Some(v) = kv.get("cardinality") {
            plan.cardinality = parse_cardinality(v)?;
        }
        if let Some(v) = kv.get("amplitudes") {
            plan.amplitudes = list(v, parse_amplitude)?;
        }
        if let Some(v) = kv.get("noise") {
            plan.noises = list(v, parse_noise)?;
        }
        if let Some(v) = kv.get("omp_stop") {
            plan.omp_stop = match v {
                "sparsity" => OmpStopRule::Sparsity,
                "residual" => OmpStopRule::Residual,
                _ => return Err(bad("omp_stop", v)),
            };
        }
        if let Some(v) = kv.get("lambda") {
            plan.lambda = parse_lambda(v)?;
        }
        if let Some(v) = num(kv, "lambda_floor")? {
            match &mut plan.lambda {
                LambdaRule::Schedule { floor, .. } => *floor = v,
                _ => return Err(BenchError::PlanInvalid("`lambda_floor` needs a schedule".into())),
            }
        }
        if let Some(v) = num(kv, "tol")? {
            plan.tol = v;
        }
        if let Some(v) = num(kv, "max_iters")? {
            plan.max_iterations = v;
        }
        if let Some(v) = num(kv, "rho")? {
            plan.rho = v;
        }
        if let Some(v) = kv.get("rho_per_lambda") {
            plan.rho_per_lambda = match v {
                "off" => None,
                _ => Some(v.parse().map_err(|_| bad("rho_per_lambda", v))?),
            };
        }
        if let Some(v) = kv.get("snapshots") {
            plan.snapshots = if v.is_empty() {
                Vec::new()
            } else {
                list(v, |s| s.parse().map_err(|_| bad("snapshots", s)))?
            };
        }
        if let Some(v) = num(kv, "timeline_every")? {
            plan.timeline_every = v;
        }
        if let Some(v) = kv.get("output") {
            plan.output = resolve(v);
        }
        plan.validate()?;
        Ok(plan)
    }

    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?, base)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, &[])
    }

    /// Loads a plan file with `key=value` overrides applied on top.
    pub fn load_with(path: &Path, overrides: &[(String, String)]) -> Result<Self> {
        let mut kv = KeyValues::parse(&read_text(path)?)?;
        for (k, v) in overrides {
            kv.set(k.as_str(), v);
        }
        Self::from_key_values(&kv, path.parent())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(BenchError::PlanInvalid(m.to_string()));
        if self.trials == 0 {
            return fail("trials must be >= 1");
        }
        if self.amplitudes.is_empty() || self.noises.is_empty() {
            return fail("amplitudes and noise need at least one entry");
        }
        if !(self.tol > 0.0) || self.max_iterations == 0 || self.timeline_every == 0 {
            return fail("tol, max_iters and timeline_every must be positive");
        }
        if !(self.rho > 0.0) || self.rho_per_lambda.is_some_and(|r| !(r > 0.0)) {
            return fail("rho and rho_per_lambda must be positive");
        }
        if self.kind != PlanKind::ConvergenceTime && self.noises.len() != 1 {
            return fail("only the convergence-time plan takes several noise levels");
        }
        if self.kind == PlanKind::ConvergenceTime
            && self.lambda == LambdaRule::Universal
            && self.noises.iter().any(|n| !matches!(n, NoiseModel::GaussianSigma(_)))
        {
            return fail("the universal penalty needs gaussian-sigma noise");
        }
        match self.lambda {
            LambdaRule::Schedule { decay, floor, .. } if !(decay > 0.0 && decay < 1.0 && floor >= 0.0) => {
                return fail("schedule needs decay in (0,1) and floor >= 0")
            }
            LambdaRule::LocalNoise(f) | LambdaRule::Fixed(f) if !(f >= 0.0) => {
                return fail("penalty values must be >= 0")
            }
            _ => {}
        }
        Ok(())
    }

    pub fn operator(&self) -> Result<ConvOperator> {
        Ok(ConvOperator::new(self.dictionary.load()?, self.signal_len)?)
    }

    /// Plan keys in parseable form.
    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.set("name", self.kind.name())
            .set("seed", self.seed)
            .set("trials", self.trials)
            .set("workers", self.workers)
            .set("dictionary", &self.dictionary)
            .set("signal_len", self.signal_len)
            .set("cardinality", fmt_cardinality(self.cardinality))
            .set("amplitudes", join(self.amplitudes.iter().map(|a| fmt_amplitude(*a))))
            .set("noise", join(self.noises.iter().map(|n| fmt_noise(*n))))
            .set(
                "omp_stop",
                match self.omp_stop {
                    OmpStopRule::Sparsity => "sparsity",
                    OmpStopRule::Residual => "residual",
                },
            )
            .set("lambda", fmt_lambda(self.lambda))
            .set("tol", self.tol)
            .set("max_iters", self.max_iterations)
            .set("rho", self.rho)
            .set(
                "rho_per_lambda",
                self.rho_per_lambda.map_or("off".to_string(), |r| r.to_string()),
            )
            .set("snapshots", join(self.snapshots.iter().map(|s| s.to_string())))
            .set("timeline_every", self.timeline_every)
            .set("output", self.output.display());
        if let LambdaRule::Schedule { floor, .. } = self.lambda {
            kv.set("lambda_floor", floor);
        }
        kv
    }
}

fn bad(key: &str, v: &str) -> BenchError {
    BenchError::PlanInvalid(format!("bad value for `{key}`: `{v}`"))
}

fn num<T: FromStr>(kv: &KeyValues, key: &str) -> Result<Option<T>> {
    kv.get(key)
        .map(|v| v.parse().map_err(|_| bad(key, v)))
        .transpose()
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|s| f(s.trim())).collect()
}

fn join(items: impl Iterator<Item = String>) -> String {
    items.collect::<Vec<_>>().join(",")
}

fn float(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| bad(key, v))
}

fn parse_dictionary(v: &str, resolve: &dyn Fn(&str) -> PathBuf) -> Result<DictionarySource> {
    if v == "experiment" {
        return Ok(DictionarySource::Experiment);
    }
    if let Some(p) = v.strip_prefix("file:") {
        return Ok(DictionarySource::File(resolve(p)));
    }
    let dims = v.strip_prefix("dct:").ok_or_else(|| bad("dictionary", v))?;
    let (n, m) = dims.split_once('x').ok_or_else(|| bad("dictionary", v))?;
    Ok(DictionarySource::Dct {
        n: n.parse().map_err(|_| bad("dictionary", v))?,
        m: m.parse().map_err(|_| bad("dictionary", v))?,
    })
}

pub fn parse_cardinality(v: &str) -> Result<Cardinality> {
    match v.split_once("..") {
        Some((a, b)) => Ok(Cardinality::Range {
            min: a.parse().map_err(|_| bad("cardinality", v))?,
            max: b.parse().map_err(|_| bad("cardinality", v))?,
        }),
        None => Ok(Cardinality::Exact(v.parse().map_err(|_| bad("cardinality", v))?)),
    }
}

fn fmt_cardinality(c: Cardinality) -> String {
    match c {
        Cardinality::Exact(k) => k.to_string(),
        Cardinality::Range { min, max } => format!("{min}..{max}"),
    }
}

pub fn parse_amplitude(v: &str) -> Result<Amplitude> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["uniform", a] => Ok(Amplitude::Uniform { a: float("amplitudes", a)? }),
        ["band", lo, hi] => Ok(Amplitude::Band {
            lo: float("amplitudes", lo)?,
            hi: float("amplitudes", hi)?,
        }),
        _ => Err(bad("amplitudes", v)),
    }
}

pub fn fmt_amplitude(a: Amplitude) -> String {
    match a {
        Amplitude::Uniform { a } => format!("uniform:{a}"),
        Amplitude::Band { lo, hi } => format!("band:{lo}:{hi}"),
    }
}

pub fn parse_noise(v: &str) -> Result<NoiseModel> {
    match v.split_once(':') {
        Some(("norm", x)) => Ok(NoiseModel::GlobalNorm(float("noise", x)?)),
        Some(("sigma", x)) => Ok(NoiseModel::GaussianSigma(float("noise", x)?)),
        _ => Err(bad("noise", v)),
    }
}

pub fn fmt_noise(n: NoiseModel) -> String {
    match n {
        NoiseModel::GlobalNorm(x) => format!("norm:{x}"),
        NoiseModel::GaussianSigma(x) => format!("sigma:{x}"),
    }
}

fn parse_lambda(v: &str) -> Result<LambdaRule> {
    if v == "universal" {
        return Ok(LambdaRule::Universal);
    }
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["local", f] => Ok(LambdaRule::LocalNoise(float("lambda", f)?)),
        ["fixed", x] => Ok(LambdaRule::Fixed(float("lambda", x)?)),
        ["schedule", decay] => Ok(LambdaRule::Schedule {
            initial: None,
            decay: float("lambda", decay)?,
            floor: 1e-8,
        }),
        ["schedule", decay, initial] => Ok(LambdaRule::Schedule {
            initial: Some(float("lambda", initial)?),
            decay: float("lambda", decay)?,
            floor: 1e-8,
        }),
        _ => Err(bad("lambda", v)),
    }
}

fn fmt_lambda(l: LambdaRule) -> String {
    match l {
        LambdaRule::LocalNoise(f) => format!("local:{f}"),
        LambdaRule::Universal => "universal".into(),
        LambdaRule::Fixed(x) => format!("fixed:{x}"),
        LambdaRule::Schedule { initial, decay, .. } => match initial {
            Some(i) => format!("schedule:{decay}:{i}"),
            None => format!("schedule:{decay}"),
        },
    }
}
