//! Penalized Nelder–Mead searches over parametric families and the
//! small-ε fit of the deficit of `1 + εx`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{evaluate, report, FunctionalReport};
use crate::functions::{normalize, HermiteTerm, TestFunction};
use crate::logconcavity::{certify, default_probes};
use crate::measure::{build_grid, GaussianMeasureSpec, QuadratureGrid};
use crate::par;
use crate::stability::{psi, BoundName, C_STAR, ROUNDING_FLOOR};

/// Smallest accepted evaluation budget.
pub const MIN_BUDGET: usize = 50;

/// Default penalty weight, multiplied by the objective scale.
pub const DEFAULT_PENALTY: f64 = 1e3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum SearchFamily {
    /// Parameters `a ∈ ℝ^d` of `w_{a,1}`.
    Tilt,
    /// `[sigma2]`.
    Gaussian,
    /// `[eps]`, direction `e_1`.
    Affine,
    /// `[c1, c2, c3]` of `1 + c1 He_1 + c2 He_2 + c3 He_3` in `d = 1`.
    Hermite3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "bound", rename_all = "snake_case")]
pub enum Objective {
    Deficit,
    RatioQ,
    StabMargin(BoundName),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default)]
    pub centering: bool,
    #[serde(default)]
    pub second_moment_cap: bool,
    #[serde(default)]
    pub log_concavity: bool,
}

fn default_order() -> usize {
    64
}

fn default_restarts() -> usize {
    3
}

fn default_penalty() -> f64 {
    DEFAULT_PENALTY
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchProblem {
    #[serde(flatten)]
    pub family: SearchFamily,
    pub d: usize,
    /// `[lo, hi]` per parameter.
    pub bounds: Vec<[f64; 2]>,
    pub objective: Objective,
    #[serde(default)]
    pub constraints: ConstraintSet,
    #[serde(default = "default_penalty")]
    pub penalty_weight: f64,
    #[serde(default = "default_order")]
    pub grid_order: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
}

impl SearchProblem {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn dim_params(&self) -> usize {
        match self.family {
            SearchFamily::Tilt => self.d,
            SearchFamily::Gaussian | SearchFamily::Affine => 1,
            SearchFamily::Hermite3 => 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.family == SearchFamily::Hermite3 && self.d != 1 {
            return Err(Error::InvalidParameter("hermite3 is one-dimensional".into()));
        }
        if self.bounds.len() != self.dim_params() {
            return Err(Error::InvalidParameter(format!(
                "{} bounds given, family needs {}",
                self.bounds.len(),
                self.dim_params()
            )));
        }
        if self.bounds.iter().any(|b| !(b[0].is_finite() && b[1].is_finite() && b[0] <= b[1])) {
            return Err(Error::InvalidParameter("empty or non-finite parameter box".into()));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("penalty weight {} must be >= 0", self.penalty_weight)));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParameter("restarts must be >= 1".into()));
        }
        if let Objective::StabMargin(b) = self.objective {
            if !matches!(b, BoundName::Stabsq1 | BoundName::Stabsq2 | BoundName::Thm1) {
                return Err(Error::InvalidParameter(format!("stab_margin supports stabsq1, stabsq2, thm1; got {b:?}")));
            }
        }
        Ok(())
    }

    /// The unnormalized family member at `p`.
    pub fn build(&self, p: &[f64]) -> Result<TestFunction> {
        match self.family {
            SearchFamily::Tilt => TestFunction::tilt(p, 1.0),
            SearchFamily::Gaussian => TestFunction::gaussian(self.d, p[0]),
            SearchFamily::Affine => {
                let mut nu = vec![0.0; self.d];
                nu[0] = 1.0;
                TestFunction::affine_along(p[0], &nu)
            }
            SearchFamily::Hermite3 => {
                let mut terms = vec![HermiteTerm { index: vec![0], coef: 1.0 }];
                terms.extend(p.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(k, &coef)| HermiteTerm { index: vec![k + 1], coef }));
                TestFunction::hermite(1, terms)
            }
        }
    }
}

/// One objective evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    /// Sum of squared constraint violations, before weighting.
    pub violation: f64,
    /// `deficit + 2 * quadrature_error >= 0`, `None` if the candidate was
    /// not constructible.
    pub lsi_holds: Option<bool>,
}

impl Evaluation {
    fn invalid() -> Self {
        Evaluation { objective: f64::INFINITY, violation: 0.0, lsi_holds: None }
    }
}

fn box_violation(p: &[f64], bounds: &[[f64; 2]]) -> f64 {
    p.iter()
        .zip(bounds)
        .map(|(x, b)| {
            let v = (b[0] - x).max(x - b[1]).max(0.0);
            v * v
        })
        .sum()
}

fn stab_margin(bound: BoundName, r: &FunctionalReport) -> f64 {
    let d = r.dim as f64;
    match bound {
        BoundName::Stabsq1 => r.deficit - r.entropy * r.entropy / (2.0 * d),
        BoundName::Stabsq2 => r.deficit - psi(r.fisher, r.dim),
        _ => r.fisher - 0.5 * C_STAR * r.entropy,
    }
}

/// Evaluates the unpenalized objective and the constraint violation at `p`.
pub fn evaluate_candidate(problem: &SearchProblem, grid: &QuadratureGrid, p: &[f64]) -> Evaluation {
    let Ok(u) = problem.build(p) else {
        return Evaluation::invalid();
    };
    let Ok(u) = normalize(&u, grid) else {
        return Evaluation::invalid();
    };
    let Ok(r) = report(&u, grid) else {
        return Evaluation::invalid();
    };
    let mut violation = box_violation(p, &problem.bounds);
    if problem.constraints.centering {
        violation += r.first_moment.iter().map(|m| m * m).sum::<f64>();
    }
    if problem.constraints.second_moment_cap {
        violation += r.second_moment_gap.max(0.0).powi(2);
    }
    let needs_cert = problem.constraints.log_concavity || problem.objective == Objective::StabMargin(BoundName::Thm1);
    if needs_cert {
        match certify(&u, grid, default_probes(problem.d)) {
            Ok(c) if c.is_certified() => {}
            Ok(c) => violation += c.min_eigenvalue.min(0.0).powi(2).max(1e-6),
            Err(_) => return Evaluation::invalid(),
        }
    }
    let objective = match problem.objective {
        Objective::Deficit => r.deficit,
        Objective::RatioQ => {
            if r.entropy > 1e-12 {
                r.fisher / r.entropy
            } else {
                f64::INFINITY
            }
        }
        Objective::StabMargin(b) => stab_margin(b, &r),
    };
    Evaluation { objective, violation, lsi_holds: Some(r.deficit >= -(2.0 * r.quadrature_error + ROUNDING_FLOOR)) }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub restart: usize,
    pub params: Vec<f64>,
    pub objective: f64,
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_params: Vec<f64>,
    /// Penalized objective at `best_params`.
    pub best_value: f64,
    pub best_objective: f64,
    pub best_penalty: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub seed: u64,
    /// Evaluated candidates on which the log-Sobolev inequality failed
    /// beyond quadrature error.
    pub lsi_violations: usize,
    pub trace: Vec<TraceRow>,
}

impl SearchResult {
    /// `iteration,restart,p0,..,objective,penalty`.
    pub fn trace_csv(&self) -> String {
        let np = self.best_params.len();
        let mut s = String::from("iteration,restart");
        for i in 0..np {
            s.push_str(&format!(",p{i}"));
        }
        s.push_str(",objective,penalty\n");
        for r in &self.trace {
            s.push_str(&format!("{},{}", r.iteration, r.restart));
            for p in &r.params {
                s.push_str(&format!(",{}", fmt17(*p)));
            }
            s.push_str(&format!(",{},{}\n", fmt17(r.objective), fmt17(r.penalty)));
        }
        s
    }
}

/// 17 significant digits, `.` as decimal separator.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Options for [`nelder_mead`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexOptions {
    pub max_evals: usize,
    /// Initial edge length relative to the box width.
    pub step: f64,
    pub ftol: f64,
    pub xtol: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { max_evals: 400, step: 0.1, ftol: 1e-12, xtol: 1e-9 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Nelder–Mead from `x0` with initial edges `scale[i] * options.step`.
///
/// `f` is called on batches of points (the initial simplex and shrink
/// steps) so that callers can evaluate them in parallel.
pub fn nelder_mead(
    mut f: impl FnMut(&[Vec<f64>]) -> Vec<f64>,
    x0: &[f64],
    scale: &[f64],
    options: SimplexOptions,
) -> SimplexResult {
    let n = x0.len();
    let mut pts = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += options.step * scale[i].max(1e-12);
        pts.push(p);
    }
    let mut vals = f(&pts);
    let mut evals = n + 1;
    let mut simplex: Vec<(Vec<f64>, f64)> = pts.into_iter().zip(vals.drain(..)).collect();
    let mut converged = false;
    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    while evals < options.max_evals {
        sort(&mut simplex);
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let size = simplex[1..]
            .iter()
            .map(|(p, _)| p.iter().zip(&simplex[0].0).zip(scale).map(|((a, b), s)| (a - b).abs() / s.max(1e-12)).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        let fspread = if worst.is_finite() { worst - best } else { f64::INFINITY };
        if fspread <= options.ftol * (1.0 + best.abs()) && size <= options.xtol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|(p, _)| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = f(std::slice::from_ref(&xr))[0];
        evals += 1;
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(std::slice::from_ref(&xe))[0];
            evals += 1;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < simplex[n].1 {
            let x = along(0.5);
            let v = f(std::slice::from_ref(&x))[0];
            (x, v)
        } else {
            let x = along(-0.5);
            let v = f(std::slice::from_ref(&x))[0];
            (x, v)
        };
        evals += 1;
        if fc < fr.min(simplex[n].1) {
            simplex[n] = (xc, fc);
            continue;
        }
        let b = simplex[0].0.clone();
        let shrunk: Vec<Vec<f64>> = simplex[1..].iter().map(|(p, _)| p.iter().zip(&b).map(|(x, y)| y + 0.5 * (x - y)).collect()).collect();
        let v = f(&shrunk);
        evals += n;
        for (slot, (p, fv)) in simplex[1..].iter_mut().zip(shrunk.into_iter().zip(v)) {
            *slot = (p, fv);
        }
    }
    sort(&mut simplex);
    let (x, fx) = simplex.swap_remove(0);
    SimplexResult { x, f: fx, evals, converged }
}

/// Restarted, penalized Nelder–Mead over the problem's parameter box.
///
/// Restart 0 starts at the box centre, later restarts at seeded uniform
/// points. The penalty weight doubles with each restart.
pub fn minimize(problem: &SearchProblem, budget: usize, seed: u64) -> Result<SearchResult> {
    problem.validate()?;
    if budget < MIN_BUDGET {
        return Err(Error::InvalidParameter(format!("budget {budget} below {MIN_BUDGET}")));
    }
    let grid = build_grid(GaussianMeasureSpec::new(problem.d)?, problem.grid_order)?;
    let np = problem.dim_params();
    let width: Vec<f64> = problem.bounds.iter().map(|b| (b[1] - b[0]).max(1e-6)).collect();
    let centre: Vec<f64> = problem.bounds.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
    let scale = evaluate_candidate(problem, &grid, &centre).objective.abs();
    let scale = if scale.is_finite() { scale.max(1.0) } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_restart = (budget / problem.restarts).max(np + 2);

    let mut trace = Vec::new();
    let mut lsi_violations = 0;
    let mut best: Option<(Vec<f64>, f64, f64, f64, bool)> = None;
    let mut used = 0;
    for restart in 0..problem.restarts {
        if used >= budget {
            break;
        }
        let weight = problem.penalty_weight * scale * f64::powi(2.0, restart as i32);
        let x0: Vec<f64> = if restart == 0 {
            centre.clone()
        } else {
            problem.bounds.iter().map(|b| if b[1] > b[0] { rng.gen_range(b[0]..b[1]) } else { b[0] }).collect()
        };
        let mut rows: Vec<(TraceRow, bool)> = Vec::new();
        let batch = |pts: &[Vec<f64>], rows: &mut Vec<(TraceRow, bool)>| -> Vec<f64> {
            let evs = par::map_indexed(pts.len(), |i| evaluate_candidate(problem, &grid, &pts[i]));
            pts.iter()
                .zip(evs)
                .map(|(p, e)| {
                    let penalty = weight * e.violation;
                    let row = TraceRow { iteration: 0, restart, params: p.clone(), objective: e.objective, penalty };
                    rows.push((row, e.lsi_holds == Some(false)));
                    e.objective + penalty
                })
                .collect()
        };
        let opts = SimplexOptions { max_evals: per_restart.min(budget - used), ..Default::default() };
        let res = nelder_mead(|pts| batch(pts, &mut rows), &x0, &width, opts);
        used += res.evals;
        for (mut r, violated) in rows {
            lsi_violations += usize::from(violated);
            r.iteration = trace.len();
            trace.push(r);
        }
        let e = evaluate_candidate(problem, &grid, &res.x);
        let penalty = weight * e.violation;
        if best.as_ref().is_none_or(|b| res.f < b.1) {
            best = Some((res.x, res.f, e.objective, penalty, res.converged));
        }
    }
    let (best_params, best_value, best_objective, best_penalty, converged) = best.expect("at least one restart");
    Ok(SearchResult {
        best_params,
        best_value,
        best_objective,
        best_penalty,
        converged,
        evaluations: used,
        seed,
        lsi_violations,
        trace,
    })
}

/// Minimum of the objective over the feasible points of a regular grid
/// with `per_axis` points per parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScan {
    pub points: usize,
    pub feasible: usize,
    pub min_objective: f64,
    pub argmin: Vec<f64>,
    pub lsi_violations: usize,
}

pub fn grid_scan(problem: &SearchProblem, per_axis: usize) -> Result<GridScan> {
    problem.validate()?;
    if per_axis < 2 {
        return Err(Error::InvalidParameter("grid scan needs >= 2 points per axis".into()));
    }
    let grid = build_grid(GaussianMeasureSpec::new(problem.d)?, problem.grid_order)?;
    let np = problem.dim_params();
    let total = per_axis.pow(np as u32);
    let point = |mut k: usize| -> Vec<f64> {
        problem
            .bounds
            .iter()
            .map(|b| {
                let i = k % per_axis;
                k /= per_axis;
                b[0] + (b[1] - b[0]) * i as f64 / (per_axis - 1) as f64
            })
            .collect()
    };
    let evs = par::map_indexed(total, |k| evaluate_candidate(problem, &grid, &point(k)));
    let mut out = GridScan { points: total, feasible: 0, min_objective: f64::INFINITY, argmin: Vec::new(), lsi_violations: 0 };
    for (k, e) in evs.iter().enumerate() {
        if e.lsi_holds == Some(false) {
            out.lsi_violations += 1;
        }
        if e.lsi_holds.is_none() || e.violation > 0.0 {
            continue;
        }
        out.feasible += 1;
        if e.objective < out.min_objective {
            out.min_objective = e.objective;
            out.argmin = point(k);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub dim: usize,
    pub epsilons: Vec<f64>,
    pub deficits: Vec<f64>,
    pub errors: Vec<f64>,
    /// Points left out of the fit, with the reason.
    pub excluded: Vec<(f64, String)>,
    pub order: f64,
    pub c4: f64,
    /// Largest `|fit / deficit - 1|` over the fitted points.
    pub max_relative_residual: f64,
}

/// Least-squares fit of `log deficit = log c4 + order log ε` for the
/// normalized `1 + ε x_1` in dimension `d`.
pub fn epsilon_expansion(d: usize, eps_list: &[f64], grid: &QuadratureGrid) -> Result<ExpansionFit> {
    if eps_list.len() < 4 {
        return Err(Error::InvalidParameter(format!("{} epsilons given, need >= 4", eps_list.len())));
    }
    if let Some(e) = eps_list.iter().find(|e| !(**e >= 1e-3 && **e <= 1e-1)) {
        return Err(Error::InvalidParameter(format!("ε = {e} outside [1e-3, 1e-1]")));
    }
    if grid.dim() != d {
        return Err(Error::InvalidParameter(format!("grid dimension {} differs from d = {d}", grid.dim())));
    }
    let mut nu = vec![0.0; d];
    nu[0] = 1.0;
    let mut fit = ExpansionFit {
        dim: d,
        epsilons: Vec::new(),
        deficits: Vec::new(),
        errors: Vec::new(),
        excluded: Vec::new(),
        order: f64::NAN,
        c4: f64::NAN,
        max_relative_residual: f64::NAN,
    };
    for &eps in eps_list {
        let u = normalize(&TestFunction::affine_along(eps, &nu)?, grid)?;
        let r = evaluate(&u, grid)?;
        let noise = 2.0 * r.quadrature_error + 1e-15 * r.fisher.abs();
        if !(r.deficit > 10.0 * noise) {
            fit.excluded.push((eps, format!("deficit {:.3e} within quadrature noise {noise:.3e}", r.deficit)));
            continue;
        }
        fit.epsilons.push(eps);
        fit.deficits.push(r.deficit);
        fit.errors.push(r.quadrature_error);
    }
    let n = fit.epsilons.len();
    if n < 2 {
        return Err(Error::Precondition(format!("only {n} usable points for the fit")));
    }
    let xs: Vec<f64> = fit.epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = fit.deficits.iter().map(|v| v.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n as f64, ys.iter().sum::<f64>() / n as f64);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    fit.order = sxy / sxx;
    fit.c4 = (my - fit.order * mx).exp();
    fit.max_relative_residual = fit
        .epsilons
        .iter()
        .zip(&fit.deficits)
        .map(|(e, v)| (fit.c4 * e.powf(fit.order) / v - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_self_test() {
        let target = [0.3, -1.2, 2.0];
        let f = |pts: &[Vec<f64>]| -> Vec<f64> {
            pts.iter().map(|p| p.iter().zip(&target).enumerate().map(|(i, (x, t))| (i + 1) as f64 * (x - t).powi(2)).sum()).collect()
        };
        let r = nelder_mead(f, &[0.0; 3], &[4.0; 3], SimplexOptions { max_evals: 2000, ..Default::default() });
        assert!(r.converged);
        for (x, t) in r.x.iter().zip(&target) {
            assert!((x - t).abs() < 1e-4, "{:?}", r.x);
        }
    }

    #[test]
    fn tilt_valley_is_flat() {
        let p = SearchProblem {
            family: SearchFamily::Tilt,
            d: 1,
            bounds: vec![[-1.0, 1.0]],
            objective: Objective::Deficit,
            constraints: ConstraintSet::default(),
            penalty_weight: DEFAULT_PENALTY,
            grid_order: 48,
            restarts: 2,
        };
        let r = minimize(&p, 60, 7).unwrap();
        assert!(r.best_objective.abs() < 1e-10);
        assert!(r.trace.iter().all(|t| t.objective.abs() < 1e-9));
        assert_eq!(r.lsi_violations, 0);
        let again = minimize(&p, 60, 7).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn ratio_q_on_gaussians() {
        let p = SearchProblem {
            family: SearchFamily::Gaussian,
            d: 1,
            bounds: vec![[0.3, 0.99]],
            objective: Objective::RatioQ,
            constraints: ConstraintSet::default(),
            penalty_weight: DEFAULT_PENALTY,
            grid_order: 64,
            restarts: 2,
        };
        let r = minimize(&p, 120, 1).unwrap();
        // Q(σ^2) = (σ^2 - 1)^2 / (2σ^2 (σ^2 - 1 - log σ^2)), decreasing to 1.
        let s = r.best_params[0];
        let exact = (s - 1.0).powi(2) / (2.0 * s * (s - 1.0 - s.ln()));
        assert!((r.best_objective - exact).abs() < 1e-9);
        assert!(s > 0.97 && r.best_objective > 0.5);
    }

    #[test]
    fn problem_json() {
        let s = r#"{"family":"hermite3","d":1,"bounds":[[-0.2,0.2],[-0.2,0.2],[-0.1,0.1]],
            "objective":{"kind":"stab_margin","bound":"stabsq1"},"constraints":{"second_moment_cap":true}}"#;
        let p = SearchProblem::from_json(s).unwrap();
        assert_eq!(p.objective, Objective::StabMargin(BoundName::Stabsq1));
        assert_eq!(p.grid_order, 64);
        assert!(p.constraints.second_moment_cap && !p.constraints.centering);
        let back = SearchProblem::from_json(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn expansion_d1() {
        let g = build_grid(GaussianMeasureSpec::new(1).unwrap(), 64).unwrap();
        let f = epsilon_expansion(1, &[0.003, 0.01, 0.03, 0.1], &g).unwrap();
        assert!((f.order - 4.0).abs() < 0.05 && (f.c4 - 0.5).abs() < 0.02, "{f:?}");
    }

    #[test]
    fn small_budget_rejected() {
        let p = SearchProblem::from_json(r#"{"family":"affine","d":1,"bounds":[[0.01,0.1]],"objective":{"kind":"deficit"}}"#).unwrap();
        assert!(minimize(&p, 10, 0).is_err());
    }
}
