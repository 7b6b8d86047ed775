//! Fully resolved runs. A job carries everything its outputs depend on, so
//! a manifest that stores the job can replay it exactly.

use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cesaro_core::convergence::{
    bound_domination_check, run_l1_experiment, run_lp_experiment, trend_test, SeriesMode,
};
use cesaro_core::cui::{cui_report, verify_criterion_equivalence};
use cesaro_core::moments::pow2_schedule;
use cesaro_core::oracle::run_oracle_suite;
use cesaro_core::poussin::{phi_csv, phi_grid, poussin_round_trip};
use cesaro_core::{DistributionSpec, Error, ExperimentConfig, MomentSource, MultiIndex};

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verification(String),
    Domain(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Verification(_) => 1,
            Failure::Usage(_) | Failure::Io(_) => 2,
            Failure::Domain(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "{m}"),
            Failure::Verification(m) => write!(f, "verification failed: {m}"),
            Failure::Domain(m) => write!(f, "{m}"),
            Failure::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } => Failure::Usage(e.to_string()),
            Error::Domain(_) | Error::HorizonTooSmall(_) | Error::Unsupported(_) => Failure::Domain(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuiJob {
    pub spec: DistributionSpec,
    pub p: f64,
    pub a_grid: Vec<f64>,
    pub horizon: MultiIndex,
    pub reps: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoussinJob {
    pub spec: DistributionSpec,
    pub p: f64,
    pub j_max: usize,
    pub eps: Vec<f64>,
    pub horizon: MultiIndex,
    pub reps: usize,
    pub seed: u64,
    pub level_cap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeJob {
    pub mode: SeriesMode,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleJob {
    pub trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub inject_fault: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Job {
    CheckCui(CuiJob),
    Poussin(PoussinJob),
    Converge(ConvergeJob),
    OracleCheck(OracleJob),
}

/// Files to write, lines to print, and an optional verification failure
/// raised after the files are written.
#[derive(Default)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
    pub summary: Vec<String>,
    pub failure: Option<Failure>,
}

fn pretty(v: &impl Serialize) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

impl Job {
    pub fn name(&self) -> &'static str {
        match self {
            Job::CheckCui(_) => "check-cui",
            Job::Poussin(_) => "poussin",
            Job::Converge(_) => "converge",
            Job::OracleCheck(_) => "oracle-check",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Job::CheckCui(j) => j.seed,
            Job::Poussin(j) => j.seed,
            Job::Converge(j) => j.config.seed,
            Job::OracleCheck(j) => j.seed,
        }
    }

    pub fn run(&self) -> Result<Outputs, Failure> {
        match self {
            Job::CheckCui(j) => check_cui(j),
            Job::Poussin(j) => poussin(j),
            Job::Converge(j) => converge(j),
            Job::OracleCheck(j) => oracle(j),
        }
    }
}

fn check_cui(j: &CuiJob) -> Result<Outputs, Failure> {
    let src = MomentSource::new(&j.spec, &j.horizon, &pow2_schedule(&j.horizon), j.reps, j.seed)?;
    let report = cui_report(&src, j.p, &j.a_grid)?;
    let mut out = Outputs::default();
    out.summary.push(format!(
        "{} p={} horizon={} mode={:?}: K = {}",
        report.family, j.p, report.horizon, report.mode, report.mean_sup
    ));
    if report.low_reps_warning {
        out.summary.push(format!("warning: only {} replications", report.reps));
    }
    out.files.push(("cui.csv".into(), report.to_csv()));
    out.files.push(("cui.json".into(), pretty(&report)?));
    if !j.eps.is_empty() {
        let eq = verify_criterion_equivalence(&src, j.p, &j.eps, &j.a_grid)?;
        out.summary.push(format!("criterion equivalence: certified={} pass={}", eq.certified, eq.pass));
        out.files.push(("equivalence.json".into(), pretty(&eq)?));
    }
    Ok(out)
}

fn poussin(j: &PoussinJob) -> Result<Outputs, Failure> {
    let src = MomentSource::new(&j.spec, &j.horizon, &pow2_schedule(&j.horizon), j.reps, j.seed)?;
    let rt = poussin_round_trip(&src, j.p, j.j_max, &j.eps, j.level_cap)?;
    let mut out = Outputs::default();
    out.summary.push(format!("thresholds N_j = {:?}", rt.thresholds));
    out.summary.push(format!(
        "phi moment sup = {} (stderr {}), round trip pass = {}",
        rt.moment.value, rt.moment.stderr, rt.pass
    ));
    if let Some(m) = &rt.forward_error {
        out.summary.push(format!("forward check: {m}"));
    }
    let mut thresholds = String::from("j,N_j\n");
    for (k, n) in rt.thresholds.iter().enumerate() {
        thresholds.push_str(&format!("{},{n}\n", k + 1));
    }
    out.files.push(("thresholds.csv".into(), thresholds));
    out.files.push(("phi.csv".into(), phi_csv(&rt.phi, &phi_grid(&rt.phi, 512))?));
    out.files.push(("phi.json".into(), format!("{}\n", serde_json::to_string(&rt.phi)?)));
    let mut report = serde_json::to_value(&rt)?;
    if let Value::Object(m) = &mut report {
        m.remove("phi");
        m.insert("n_max".into(), json!(rt.phi.n_max()));
    }
    out.files.push(("poussin.json".into(), pretty(&report)?));
    Ok(out)
}

fn converge(j: &ConvergeJob) -> Result<Outputs, Failure> {
    let series = match j.mode {
        SeriesMode::Lp => run_lp_experiment(&j.config)?,
        SeriesMode::L1 => run_l1_experiment(&j.config)?,
    };
    let trend = (series.points.len() >= 4).then(|| trend_test(&series)).transpose()?;
    let domination = j
        .config
        .bound_params
        .is_some()
        .then(|| bound_domination_check(&j.config, &series))
        .transpose()?;
    let mut out = Outputs::default();
    let last = series.points.last().expect("nonempty schedule");
    out.summary.push(format!(
        "{} {:?}: moment at |n|={} is {} (stderr {})",
        series.family, j.mode, last.size, last.moment, last.stderr
    ));
    if let Some(t) = &trend {
        out.summary.push(format!("trend test pass = {} (slope {})", t.pass, t.slope));
    }
    if let Some(d) = &domination {
        out.summary.push(format!("bound domination pass = {}", d.pass));
    }
    out.files.push(("series.csv".into(), series.to_csv()));
    out.files.push((
        "series.json".into(),
        pretty(&json!({ "series": series, "trend": trend, "domination": domination }))?,
    ));
    Ok(out)
}

fn oracle(j: &OracleJob) -> Result<Outputs, Failure> {
    let o = run_oracle_suite(j.trials, j.seed, j.inject_fault)?;
    let mut out = Outputs::default();
    out.summary.push(format!(
        "{} comparisons, max relative error {}",
        o.comparisons, o.max_rel_err
    ));
    out.files.push(("oracle.json".into(), pretty(&o)?));
    if let Some(c) = &o.counterexample {
        out.failure = Some(Failure::Verification(format!(
            "oracle mismatch: {}",
            serde_json::to_string(c)?
        )));
    }
    Ok(out)
}
