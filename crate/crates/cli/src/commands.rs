use serde::Serialize;

use glsl_core::functionals::{report, FunctionalReport};
use glsl_core::functions::{l2_norm_sq, normalize};
use glsl_core::logconcavity::{certify, default_probes, preservation_test, tstar_test, LogConcavityCertificate};
use glsl_core::measure::build_grid;
use glsl_core::ou_flow::flow_curve;
use glsl_core::search::{epsilon_expansion, minimize};
use glsl_core::stability::ConstantsTable;
use glsl_core::suite::{entry_checks, run_suite, CorpusEntry, SuiteOptions, SuiteSummary};
use glsl_core::{Error, FunctionSpec, GaussianMeasureSpec, QuadratureGrid, TestFunction};

use crate::config::{NamedProblem, ProblemSpec, RunConfig, Subcommand, DEFAULT_FLOW_TIMES, EXPANSION_EPS};
use crate::output;

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config() || matches!(e, Error::NotNormalized { .. } | Error::ZeroNorm) {
            Failure::Config(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

/// Rendered artifacts of one run.
pub struct Artifacts {
    pub primary: String,
    /// Extra files, written only when `--out` is given.
    pub extra: Vec<(String, String)>,
    pub passed: bool,
    pub summary: Option<String>,
}

impl Artifacts {
    fn ok(primary: String) -> Self {
        Artifacts { primary, extra: Vec::new(), passed: true, summary: None }
    }
}

pub fn run(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    cfg.validate().map_err(Failure::Config)?;
    match cfg.subcommand {
        Subcommand::Report => cmd_report(cfg),
        Subcommand::Verify => cmd_verify(cfg),
        Subcommand::Flow => cmd_flow(cfg),
        Subcommand::Constants => Ok(Artifacts::ok(output::json(cfg, &ConstantsOut::default()))),
        Subcommand::Logcc => cmd_logcc(cfg),
        Subcommand::Search => cmd_search(cfg),
    }
}

fn spec(cfg: &RunConfig) -> Result<FunctionSpec, Failure> {
    let mut s = cfg.family.clone().ok_or_else(|| Failure::Config("--family is required".into()))?;
    if let Some(d) = cfg.d {
        s.d = d;
    }
    Ok(s)
}

fn grid(d: usize, order: usize) -> Result<QuadratureGrid, Failure> {
    Ok(build_grid(GaussianMeasureSpec::new(d)?, order)?)
}

/// Normalized function, its grid and the original squared norm.
fn function(cfg: &RunConfig) -> Result<(TestFunction, QuadratureGrid, f64), Failure> {
    let s = spec(cfg)?;
    let g = grid(s.d, cfg.grid_order)?;
    let raw = TestFunction::new(s)?;
    let norm_sq = l2_norm_sq(&raw, &g)?;
    Ok((normalize(&raw, &g)?, g, norm_sq))
}

#[derive(Serialize)]
struct ReportOut {
    spec: FunctionSpec,
    /// `||u||_2^2` before normalization.
    input_norm_sq: f64,
    report: FunctionalReport,
}

fn cmd_report(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let (u, g, input_norm_sq) = function(cfg)?;
    let r = report(&u, &g)?;
    if !(r.deficit.is_finite() && r.entropy.is_finite() && r.fisher.is_finite()) {
        return Err(Failure::Numerical(format!("non-finite functionals: {r:?}")));
    }
    let out = ReportOut { spec: u.spec().clone(), input_norm_sq, report: r };
    Ok(Artifacts::ok(output::json(cfg, &out)))
}

fn cmd_verify(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let summary = match &cfg.family {
        None => run_suite(&SuiteOptions { grid_order: cfg.grid_order, dim: cfg.d, tol: cfg.tol, flows: cfg.flows })?,
        Some(_) => {
            let e = CorpusEntry { name: "custom".into(), spec: spec(cfg)?, log_concave: None };
            let mut records = entry_checks(&e, cfg.grid_order, cfg.flows)?;
            if let Some(t) = cfg.tol {
                records = records.into_iter().map(|r| r.with_tolerance(t)).collect();
            }
            let count = |s| records.iter().filter(|r| r.status == s).count();
            use glsl_core::stability::Status;
            SuiteSummary { passed: count(Status::Pass), failed: count(Status::Fail), skipped: count(Status::Skipped), records }
        }
    };
    let line = format!("verify: {} passed, {} failed, {} skipped", summary.passed, summary.failed, summary.skipped);
    Ok(Artifacts { primary: output::json(cfg, &summary), extra: Vec::new(), passed: summary.all_pass(), summary: Some(line) })
}

fn cmd_flow(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let (u, g, _) = function(cfg)?;
    let times = if cfg.times.is_empty() { DEFAULT_FLOW_TIMES.to_vec() } else { cfg.times.clone() };
    let curve = flow_curve(&u, &times, &g)?;
    let line = format!("flow: entropy monotone {}, fisher monotone {}", curve.entropy_monotone, curve.fisher_monotone);
    let csv = format!("{}{}", output::csv_preamble(cfg), curve.to_csv());
    Ok(Artifacts { primary: csv, extra: vec![("json".into(), output::json(cfg, &curve))], passed: true, summary: Some(line) })
}

#[derive(Serialize)]
struct ConstantsOut {
    c_star_exact: &'static str,
    #[serde(flatten)]
    table: ConstantsTable,
}

impl Default for ConstantsOut {
    fn default() -> Self {
        ConstantsOut { c_star_exact: "1+1/1728", table: ConstantsTable::default() }
    }
}

#[derive(Serialize)]
struct LogccOut {
    certificate: LogConcavityCertificate,
    /// Certificates along the flow at the requested times.
    along_flow: Vec<(f64, LogConcavityCertificate)>,
    /// Certificate at `t⋆(R)` for compactly supported data.
    at_t_star: Option<(f64, LogConcavityCertificate)>,
}

fn cmd_logcc(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    let (u, g, _) = function(cfg)?;
    let d = u.spec().d;
    let certificate = certify(&u, &g, default_probes(d))?;
    let along_flow = if certificate.is_certified() && !cfg.times.is_empty() {
        cfg.times.iter().copied().zip(preservation_test(&u, &cfg.times, &g)?).collect()
    } else {
        Vec::new()
    };
    let at_t_star = match u.spec().family {
        glsl_core::functions::Family::Bump { .. } => Some(tstar_test(&u, &g)?),
        _ => None,
    };
    let line = format!("logcc: {:?}, min eigenvalue {:.6e}", certificate.verdict, certificate.min_eigenvalue);
    let out = LogccOut { certificate, along_flow, at_t_star };
    Ok(Artifacts { primary: output::json(cfg, &out), extra: Vec::new(), passed: true, summary: Some(line) })
}

fn cmd_search(cfg: &RunConfig) -> Result<Artifacts, Failure> {
    match cfg.problem.as_ref().ok_or_else(|| Failure::Config("--problem is required".into()))? {
        ProblemSpec::Named(NamedProblem::Expansion) => {
            let d = cfg.d.unwrap_or(1);
            let fit = epsilon_expansion(d, &EXPANSION_EPS, &grid(d, cfg.grid_order)?)?;
            let line = format!("expansion: order {:.4}, c4 {:.4}", fit.order, fit.c4);
            Ok(Artifacts { primary: output::json(cfg, &fit), extra: Vec::new(), passed: true, summary: Some(line) })
        }
        ProblemSpec::Search(p) => {
            let r = minimize(p, cfg.budget, cfg.seed)?;
            let line = format!("search: best {:.6e} at {:?} after {} evaluations", r.best_value, r.best_params, r.evaluations);
            let trace = format!("{}{}", output::csv_preamble(cfg), r.trace_csv());
            Ok(Artifacts { primary: output::json(cfg, &r), extra: vec![("trace.csv".into(), trace)], passed: true, summary: Some(line) })
        }
    }
}
