//! Ornstein–Uhlenbeck evolution of `h = u^2` by the Mehler formula
//!
//! ```text
//! h(t, x) = ∫ h0(e^{-t} x + sqrt(1 - e^{-2t}) y) dγ(y)
//! ```
//!
//! with gradient and Hessian obtained by differentiating under the integral
//! sign. Smooth initial data use an inner Gauss–Hermite rule in `y`. For
//! compactly supported data the integral is rewritten over the support,
//! `h(t, x) = ∫_{|z| < R} h0(z) K_s(z - e^{-t} x) dz` with `K_s` the centred
//! normal density of variance `s^2 = 1 - e^{-2t}`, and evaluated with a
//! ball-adapted Gauss–Legendre rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functionals::{evaluate, IdentityCheck};
use crate::functions::{Field, Jet};
use crate::linalg::frobenius_sq;
use crate::measure::{GridKind, Point, QuadratureGrid, MAX_DIM, MAX_ORDER};

/// Accepted inner-rule error, relative to the largest probed value of `h`.
pub const INNER_TOL: f64 = 1e-9;

/// Upper bound on the number of inner nodes per evaluation point.
pub const MAX_INNER_NODES: usize = 1 << 17;

/// Entropy below which `Q = 𝓘 / 𝓔` is not formed.
pub const ENTROPY_FLOOR: f64 = 1e-10;

/// Default time step of the finite-difference checks.
pub const DEFAULT_DT: f64 = 1e-3;

/// `h(t, ·)` for a fixed initial datum and time.
#[derive(Clone, Debug)]
pub struct Evolved<F> {
    base: F,
    t: f64,
    m: f64,
    s: f64,
    inner: Option<QuadratureGrid>,
    inner_estimate: f64,
}

fn inner_grid(dim: usize, order: usize, support: Option<f64>) -> Result<QuadratureGrid> {
    let spec = crate::measure::GaussianMeasureSpec::new(dim)?;
    match support {
        Some(r) => QuadratureGrid::ball(spec, order, r),
        None => QuadratureGrid::gauss_hermite(spec, order),
    }
}

fn inner_nodes(dim: usize, order: usize, support: Option<f64>) -> usize {
    match (support, dim) {
        (None, _) => order.pow(dim as u32),
        (Some(_), 1) => order,
        (Some(_), 2) => 2 * order * order,
        (Some(_), _) => 2 * order * order * order,
    }
}

impl<F: Field> Evolved<F> {
    /// Evolves `base` to time `t`. The inner order starts at `inner_order`
    /// and is doubled while the embedded estimate exceeds [`INNER_TOL`].
    pub fn new(mut base: F, t: f64, inner_order: usize) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidParameter(format!("time {t} must be finite and >= 0")));
        }
        let m = (-t).exp();
        let s = (-(-2.0 * t).exp_m1()).sqrt();
        if t == 0.0 {
            return Ok(Evolved { base, t, m, s, inner: None, inner_estimate: 0.0 });
        }
        let dim = base.dim();
        let support = base.support_radius();
        let mut order = inner_order.max(2);
        loop {
            if inner_nodes(dim, order, support) > MAX_INNER_NODES {
                return Err(Error::Capacity(format!(
                    "inner Mehler rule of order {order} in dimension {dim} exceeds {MAX_INNER_NODES} nodes"
                )));
            }
            let grid = inner_grid(dim, order, support)?;
            let mut ev = Evolved { base, t, m, s, inner: Some(grid), inner_estimate: 0.0 };
            let est = ev.probe_inner_error();
            ev.inner_estimate = est;
            if est <= INNER_TOL {
                return Ok(ev);
            }
            let next = 2 * order;
            if next > MAX_ORDER || inner_nodes(dim, next, support) > MAX_INNER_NODES {
                return Err(Error::InnerRuleNotConverged { t, order, estimate: est });
            }
            base = ev.base;
            order = next;
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn base(&self) -> &F {
        &self.base
    }

    /// Order of the inner rule actually used (0 at `t = 0`).
    pub fn inner_order(&self) -> usize {
        self.inner.as_ref().map_or(0, |g| g.order())
    }

    /// Relative inner-rule error estimate found at construction.
    pub fn inner_estimate(&self) -> f64 {
        self.inner_estimate
    }

    fn probe_points(&self) -> Vec<Point> {
        let dim = self.base.dim();
        let mut pts = vec![[0.0; MAX_DIM]];
        for r in [0.7, 1.5, 2.5, 3.5] {
            for i in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut p = [0.0; MAX_DIM];
                    p[i] = sign * r;
                    pts.push(p);
                }
            }
            let mut p = [0.0; MAX_DIM];
            for c in p.iter_mut().take(dim) {
                *c = r / (dim as f64).sqrt();
            }
            pts.push(p);
        }
        pts
    }

    fn probe_inner_error(&self) -> f64 {
        let grid = self.inner.as_ref().expect("inner rule");
        let coarse = grid.embedded();
        let dim = self.base.dim();
        let mut scale: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for p in self.probe_points() {
            let a = self.density_with(grid, &p);
            let b = self.density_with(coarse, &p);
            scale = scale.max(a.value.abs());
            let mut diff = (a.value - b.value).abs();
            for i in 0..dim {
                diff = diff.max((a.grad[i] - b.grad[i]).abs() / (1.0 + p[i].abs()));
            }
            worst = worst.max(diff);
        }
        if !worst.is_finite() {
            return f64::INFINITY;
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    fn density_with(&self, grid: &QuadratureGrid, x: &Point) -> Jet {
        let dim = self.base.dim();
        let (m, s) = (self.m, self.s);
        let mut mx = [0.0; MAX_DIM];
        for i in 0..dim {
            mx[i] = m * x[i];
        }
        let mut acc = Jet::default();
        match grid.kind() {
            GridKind::GaussHermite => {
                for (y, w) in grid.nodes().iter().zip(grid.weights()) {
                    let mut z = [0.0; MAX_DIM];
                    for i in 0..dim {
                        z[i] = mx[i] + s * y[i];
                    }
                    acc.add_scaled(&self.base.density(&z), *w);
                }
            }
            GridKind::Ball { .. } => {
                let leb = grid.lebesgue_weights().expect("ball rule has Lebesgue weights");
                let s2 = s * s;
                let norm = (2.0 * std::f64::consts::PI * s2).powf(-(dim as f64) / 2.0);
                for (z, w) in grid.nodes().iter().zip(leb) {
                    let mut r2 = 0.0;
                    for i in 0..dim {
                        let d = z[i] - mx[i];
                        r2 += d * d;
                    }
                    let k = norm * (-0.5 * r2 / s2).exp();
                    if k == 0.0 {
                        continue;
                    }
                    acc.add_scaled(&self.base.density(z), w * k);
                }
            }
        }
        for i in 0..dim {
            acc.grad[i] *= m;
            for j in 0..dim {
                acc.hess[i][j] *= m * m;
            }
        }
        acc
    }
}

impl<F: Field> Field for Evolved<F> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn jet(&self, x: &Point) -> Jet {
        self.density(x).sqrt(self.dim())
    }

    fn density(&self, x: &Point) -> Jet {
        match &self.inner {
            None => self.base.density(x),
            Some(g) => self.density_with(g, x),
        }
    }

    fn support_radius(&self) -> Option<f64> {
        if self.t == 0.0 {
            self.base.support_radius()
        } else {
            None
        }
    }
}

/// Diagnostics of one evolved state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub t: f64,
    pub entropy: f64,
    pub fisher: f64,
    pub deficit: f64,
    /// `𝓘 / 𝓔`, absent when the entropy is below [`ENTROPY_FLOOR`].
    pub q: Option<f64>,
    pub moment1: Vec<f64>,
    pub moment1_norm: f64,
    pub moment2_gap: f64,
    pub mass: f64,
    pub quadrature_error: f64,
    pub inner_order: usize,
}

/// An evolved density with its diagnostics.
#[derive(Clone, Debug)]
pub struct FlowState<F> {
    pub field: Evolved<F>,
    pub diagnostics: FlowDiagnostics,
}

/// Diagnostics of any density field on the given outer grid.
pub fn diagnose<G: Field + ?Sized>(h: &G, t: f64, inner_order: usize, grid: &QuadratureGrid) -> Result<FlowDiagnostics> {
    let r = evaluate(h, grid)?;
    let mass = r.l2_norm * r.l2_norm;
    let m1 = r.first_moment.clone();
    Ok(FlowDiagnostics {
        t,
        entropy: r.entropy,
        fisher: r.fisher,
        deficit: r.deficit,
        q: (r.entropy > ENTROPY_FLOOR).then(|| r.fisher / r.entropy),
        moment1_norm: m1.iter().map(|v| v * v).sum::<f64>().sqrt(),
        moment1: m1,
        moment2_gap: r.second_moment_gap,
        mass,
        quadrature_error: r.quadrature_error,
        inner_order,
    })
}

/// `h(t, ·)` for `h0 = u0^2`, with diagnostics on `grid`. The inner rule
/// starts at the order of `grid`.
pub fn evolve<F: Field>(u0: F, t: f64, grid: &QuadratureGrid) -> Result<FlowState<F>> {
    let field = Evolved::new(u0, t, grid.order())?;
    let diagnostics = diagnose(&field, t, field.inner_order(), grid)?;
    Ok(FlowState { field, diagnostics })
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::InvalidParameter("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("times must be sorted".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowCurve {
    pub states: Vec<FlowDiagnostics>,
    pub entropy_monotone: bool,
    pub fisher_monotone: bool,
}

pub const CSV_HEADER: &str = "t,entropy,fisher,deficit,Q,moment1_norm,moment2_gap";

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

impl FlowCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.states {
            let q = s.q.map_or_else(|| "nan".to_string(), fmt17);
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt17(s.t),
                fmt17(s.entropy),
                fmt17(s.fisher),
                fmt17(s.deficit),
                q,
                fmt17(s.moment1_norm),
                fmt17(s.moment2_gap)
            ));
        }
        out
    }
}

/// Diagnostics at each time, plus monotonicity of `𝓔` and `𝓘` within the
/// error estimates.
pub fn flow_curve<F: Field + Clone>(u0: &F, times: &[f64], grid: &QuadratureGrid) -> Result<FlowCurve> {
    check_times(times)?;
    let states = crate::par::map_indexed(times.len(), |i| evolve(u0.clone(), times[i], grid).map(|s| s.diagnostics));
    let states = states.into_iter().collect::<Result<Vec<_>>>()?;
    let mut entropy_monotone = true;
    let mut fisher_monotone = true;
    for w in states.windows(2) {
        let tol_e = 2.0 * (w[0].quadrature_error + w[1].quadrature_error) + 1e-13;
        if w[1].entropy > w[0].entropy + tol_e {
            entropy_monotone = false;
        }
        if w[1].fisher > w[0].fisher + tol_e {
            fisher_monotone = false;
        }
    }
    Ok(FlowCurve { states, entropy_monotone, fisher_monotone })
}

/// Time derivative of `f` at `t`: centred differences at `dt` and `dt/2`
/// combined by Richardson extrapolation. At `t < dt` a one-sided
/// second-order stencil is used.
pub fn time_derivative(f: impl Fn(f64) -> Result<f64>, t: f64, dt: f64) -> Result<f64> {
    let diff = |h: f64| -> Result<f64> {
        if t >= h {
            Ok((f(t + h)? - f(t - h)?) / (2.0 * h))
        } else {
            Ok((-3.0 * f(t)? + 4.0 * f(t + h)? - f(t + 2.0 * h)?) / (2.0 * h))
        }
    };
    let d1 = diff(dt)?;
    let d2 = diff(0.5 * dt)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

fn evolved_diag<F: Field + Clone>(u0: &F, t: f64, grid: &QuadratureGrid) -> Result<FlowDiagnostics> {
    Ok(evolve(u0.clone(), t, grid)?.diagnostics)
}

/// `d𝓔/dt` by finite differences against `-4𝓘(t)`.
pub fn entropy_production_check<F: Field + Clone>(u0: &F, t: f64, dt: f64, grid: &QuadratureGrid) -> Result<IdentityCheck> {
    check_dt(dt)?;
    let here = evolved_diag(u0, t, grid)?;
    let lhs = time_derivative(|s| Ok(evolved_diag(u0, s, grid)?.entropy), t, dt)?;
    Ok(IdentityCheck { lhs, rhs: -4.0 * here.fisher, error: 4.0 * here.quadrature_error + dt * dt })
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(Error::InvalidParameter(format!("dt = {dt} must lie in (0, 1e-2]")));
    }
    Ok(())
}

/// `∫ ||Hess v - ∇v ⊗ ∇v / v||^2 dγ` for `v = sqrt(h)`, computed as
/// `∫ (h / 4) ||Hess log h||^2 dγ` on `{h > 0}`.
pub fn carre_du_champ_remainder<G: Field + ?Sized>(h: &G, grid: &QuadratureGrid) -> Result<(f64, f64)> {
    let g = grid.for_support(h.support_radius())?;
    let dim = h.dim();
    let (v, e) = g.integrate_estimate(|x| {
        let j = h.density(x);
        if !(j.value > f64::MIN_POSITIVE) {
            return [0.0];
        }
        // (h/4) ||Hess log h||^2 = ||Hess h - ∇h ⊗ ∇h / h||^2 / (4h), which
        // stays finite for subnormal h.
        let mut m = j.hess;
        for a in 0..dim {
            for b in 0..dim {
                m[a][b] -= j.grad[a] * j.grad[b] / j.value;
            }
        }
        [frobenius_sq(&m, dim) / (4.0 * j.value)]
    })?;
    Ok((v[0], e[0]))
}

/// `d𝓘/dt + 2𝓘` by finite differences against
/// `-2 ∫ ||Hess v - ∇v ⊗ ∇v / v||^2 dγ`.
pub fn cdc_check<F: Field + Clone>(u0: &F, t: f64, dt: f64, grid: &QuadratureGrid) -> Result<IdentityCheck> {
    check_dt(dt)?;
    let state = evolve(u0.clone(), t, grid)?;
    let di = time_derivative(|s| Ok(evolved_diag(u0, s, grid)?.fisher), t, dt)?;
    let (rem, rem_err) = carre_du_champ_remainder(&state.field, grid)?;
    Ok(IdentityCheck {
        lhs: di + 2.0 * state.diagnostics.fisher,
        rhs: -2.0 * rem,
        error: 2.0 * rem_err + 2.0 * state.diagnostics.quadrature_error + dt * dt,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QOdeSample {
    pub t: f64,
    pub q: f64,
    pub dq_dt: f64,
    /// `2Q(2Q - 1)`.
    pub bound: f64,
}

impl QOdeSample {
    pub fn margin(&self) -> f64 {
        self.bound - self.dq_dt
    }
}

/// `dQ/dt` against `2Q(2Q - 1)` at each time. The curve stops at the first
/// time where the entropy falls below [`ENTROPY_FLOOR`].
pub fn q_ode_check<F: Field + Clone>(u0: &F, times: &[f64], grid: &QuadratureGrid) -> Result<Vec<QOdeSample>> {
    check_times(times)?;
    let q_at = |s: f64| -> Result<f64> {
        let d = evolved_diag(u0, s, grid)?;
        d.q.ok_or_else(|| Error::Precondition(format!("entropy below {ENTROPY_FLOOR:e} at t = {s}")))
    };
    let mut out = Vec::new();
    for &t in times {
        let d = evolved_diag(u0, t, grid)?;
        let Some(q) = d.q else { break };
        let dq = match time_derivative(q_at, t, DEFAULT_DT) {
            Ok(v) => v,
            Err(Error::Precondition(_)) => break,
            Err(e) => return Err(e),
        };
        out.push(QOdeSample { t, q, dq_dt: dq, bound: 2.0 * q * (2.0 * q - 1.0) });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{normalize, TestFunction};
    use crate::measure::{build_grid, GaussianMeasureSpec};

    fn grid(d: usize, n: usize) -> QuadratureGrid {
        build_grid(GaussianMeasureSpec::new(d).unwrap(), n).unwrap()
    }

    #[test]
    fn constant_is_stationary() {
        let g = grid(2, 16);
        let s = evolve(TestFunction::constant(2, 1.0).unwrap(), 0.8, &g).unwrap();
        let j = s.field.density(&[0.3, -1.2, 0.0]);
        assert!((j.value - 1.0).abs() < 1e-14);
        assert!(j.grad_sq(2) < 1e-28);
        assert!(s.diagnostics.entropy.abs() < 1e-14 && s.diagnostics.fisher < 1e-28);
    }

    #[test]
    fn time_zero_is_identity() {
        let g = grid(1, 32);
        let u = TestFunction::bump(1, 2.0).unwrap();
        let e = Evolved::new(u.clone(), 0.0, 32).unwrap();
        let x = [0.37, 0.0, 0.0];
        assert_eq!(e.density(&x), u.density(&x));
        assert_eq!(e.support_radius(), Some(2.0));
        let _ = g;
    }

    #[test]
    fn gaussian_profile_flows_in_closed_form() {
        // h0 γ = N(μ, σ^2) evolves to N(m μ, m^2 σ^2 + s^2).
        let g = grid(1, 48);
        let (s2, mu, t) = (0.5f64, 0.3f64, 0.4f64);
        let u = TestFunction::gaussian_shifted(s2, &[mu]).unwrap();
        let ev = Evolved::new(u, t, 48).unwrap();
        let m = (-t).exp();
        let var = m * m * s2 + 1.0 - m * m;
        let exact = TestFunction::gaussian_shifted(var, &[m * mu]).unwrap();
        for x in [-2.0, -0.5, 0.0, 0.8, 2.5] {
            let p = [x, 0.0, 0.0];
            let a = ev.density(&p);
            let b = exact.density(&p);
            assert!((a.value - b.value).abs() < 1e-12 * b.value.max(1.0));
            assert!((a.grad[0] - b.grad[0]).abs() < 1e-11);
            assert!((a.hess[0][0] - b.hess[0][0]).abs() < 1e-10);
        }
        let _ = g;
    }

    #[test]
    fn bump_ball_inner_rule_matches_hermite_inner_rule() {
        // Away from the support edge both inner rules must agree.
        let u = TestFunction::bump(1, 2.0).unwrap();
        let ball = Evolved::new(u.clone(), 0.7, 64).unwrap();
        let m = (-0.7f64).exp();
        let s = (1.0 - m * m).sqrt();
        // Direct trapezoid over y of h0(m x + s y) γ(y).
        for x in [0.0, 0.9, 2.1] {
            let n = 200_000;
            let (lo, hi) = ((-2.0 - m * x) / s, (2.0 - m * x) / s);
            let dy = (hi - lo) / n as f64;
            let mut sum = 0.0;
            for i in 0..=n {
                let y = lo + i as f64 * dy;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let z = m * x + s * y;
                sum += w * u.density(&[z, 0.0, 0.0]).value * (-0.5 * y * y).exp();
            }
            sum *= dy / (2.0 * std::f64::consts::PI).sqrt();
            let v = ball.density(&[x, 0.0, 0.0]).value;
            assert!((v - sum).abs() < 1e-9, "x = {x}: {v} vs {sum}");
        }
    }

    #[test]
    fn moment_laws_for_affine() {
        let g = grid(1, 48);
        let u = normalize(&TestFunction::affine(1, 0.2).unwrap(), &g).unwrap();
        let s0 = evolve(u.clone(), 0.0, &g).unwrap().diagnostics;
        for t in [0.1, 0.5, 1.0, 2.0] {
            let st = evolve(u.clone(), t, &g).unwrap().diagnostics;
            assert!((st.moment1[0] - (-t).exp() * s0.moment1[0]).abs() < 1e-12);
            assert!((st.moment2_gap - (-2.0 * t).exp() * s0.moment2_gap).abs() < 1e-12);
            assert!((st.mass - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup_property() {
        let u = normalize(&TestFunction::hermite_1d(&[1.0, 0.2, 0.1]).unwrap(), &grid(1, 48)).unwrap();
        let a = Evolved::new(Evolved::new(u.clone(), 0.3, 40).unwrap(), 0.5, 40).unwrap();
        let b = Evolved::new(u, 0.8, 40).unwrap();
        for x in [-1.5, 0.0, 0.7, 2.2] {
            let p = [x, 0.0, 0.0];
            assert!((a.density(&p).value - b.density(&p).value).abs() < 1e-12);
        }
    }

    #[test]
    fn tilt_stays_on_manifold() {
        let g = grid(1, 48);
        let w = normalize(&TestFunction::tilt(&[0.6], 1.0).unwrap(), &g).unwrap();
        let c = flow_curve(&w, &[0.0, 0.3, 1.0], &g).unwrap();
        for s in &c.states {
            assert!(s.deficit.abs() < 1e-10, "{s:?}");
        }
        assert!(c.entropy_monotone && c.fisher_monotone);
        let csv = c.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn entropy_production_for_gaussian_profile() {
        let g = grid(1, 48);
        let u = TestFunction::gaussian(1, 0.5).unwrap();
        let c = entropy_production_check(&u, 0.2, 1e-3, &g).unwrap();
        assert!(c.discrepancy() < 1e-5, "{c:?}");
    }

    #[test]
    fn cdc_for_tilt_and_gaussian() {
        let g = grid(1, 48);
        let w = normalize(&TestFunction::tilt(&[0.5], 1.0).unwrap(), &g).unwrap();
        let c = cdc_check(&w, 0.3, 1e-3, &g).unwrap();
        assert!(c.rhs.abs() < 1e-12 && c.lhs.abs() < 1e-6, "{c:?}");
        let u = TestFunction::gaussian(1, 0.6).unwrap();
        let c = cdc_check(&u, 0.3, 1e-3, &g).unwrap();
        assert!(c.discrepancy() < 1e-4, "{c:?}");
    }

    #[test]
    fn rejects_bad_times() {
        let g = grid(1, 8);
        let u = TestFunction::constant(1, 1.0).unwrap();
        assert!(evolve(u.clone(), -1.0, &g).is_err());
        assert!(flow_curve(&u, &[0.5, 0.1], &g).is_err());
    }
}
