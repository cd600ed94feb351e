//! Entropy, Fisher information, deficit and related integrals.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ensure_normalized, Field, Jet};
use crate::linalg::frobenius_sq;
use crate::measure::{build_grid, gauss_legendre_1d, norm_sq, GaussianMeasureSpec, Point, QuadratureGrid, Rule1d, MAX_DIM};
use crate::par;

/// Nodes with `h < PRESSURE_THRESHOLD * max h` are dropped from pressure
/// integrals.
pub const PRESSURE_THRESHOLD: f64 = 1e-12;

/// Tolerance on `||u||_2^2 - 1` accepted by functionals that require it.
pub const NORM_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalReport {
    pub dim: usize,
    pub entropy: f64,
    pub fisher: f64,
    pub deficit: f64,
    pub l2_norm: f64,
    pub first_moment: Vec<f64>,
    pub second_moment: f64,
    pub second_moment_gap: f64,
    /// Error estimate of the deficit.
    pub quadrature_error: f64,
    pub entropy_error: f64,
    pub fisher_error: f64,
}

fn xlogx(h: f64) -> f64 {
    if h > 0.0 {
        h * h.ln()
    } else {
        0.0
    }
}

/// `|∇u|^2 = |∇h|^2 / (4h)`, extended by zero where `h` vanishes.
pub(crate) fn fisher_density(j: &Jet, dim: usize) -> f64 {
    if j.value > 0.0 {
        j.grad_sq(dim) / (4.0 * j.value)
    } else {
        0.0
    }
}

/// Functionals of `u` without checking the normalization.
pub fn evaluate<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<FunctionalReport> {
    let g = grid.for_support(u.support_radius())?;
    let dim = u.dim();
    let (v, e) = g.integrate_estimate(|x| {
        let j = u.density(x);
        let h = j.value;
        [h, xlogx(h), fisher_density(&j, dim), x[0] * h, x[1] * h, x[2] * h, norm_sq(x, dim) * h]
    })?;
    let second_moment = v[6];
    Ok(FunctionalReport {
        dim,
        entropy: v[1],
        fisher: v[2],
        deficit: v[2] - 0.5 * v[1],
        l2_norm: v[0].max(0.0).sqrt(),
        first_moment: v[3..3 + dim].to_vec(),
        second_moment,
        second_moment_gap: second_moment - dim as f64 * v[0],
        quadrature_error: e[2] + 0.5 * e[1],
        entropy_error: e[1],
        fisher_error: e[2],
    })
}

/// Entropy, Fisher information and deficit of a normalized `u`.
pub fn report<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<FunctionalReport> {
    let r = evaluate(u, grid)?;
    let n = r.l2_norm * r.l2_norm;
    if (n - 1.0).abs() > NORM_TOL {
        return Err(Error::NotNormalized { norm_sq: n });
    }
    Ok(r)
}

/// A value together with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Half-width of the interval integrated along each line in [`l1_deviation`].
pub const LINE_HALF_WIDTH: f64 = 16.0;

/// Cells per line; each is split at the sign changes of `h - 1`.
pub const LINE_CELLS: usize = 128;

fn legendre_pair() -> &'static (Rule1d, Rule1d) {
    static RULES: OnceLock<(Rule1d, Rule1d)> = OnceLock::new();
    RULES.get_or_init(|| (gauss_legendre_1d(8).expect("order 8"), gauss_legendre_1d(5).expect("order 5")))
}

fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, fa: f64) -> f64 {
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// `∫ |h - 1| φ(t) dt` along the line `(t, y_2, ..., y_d)`, with the
/// panel-pair error.
fn line_deviation<F: Field + ?Sized>(u: &F, y: &Point) -> [f64; 2] {
    let at = |t: f64| {
        let mut x = *y;
        x[0] = t;
        u.density(&x).value - 1.0
    };
    let dt = 2.0 * LINE_HALF_WIDTH / LINE_CELLS as f64;
    let mut edges = vec![-LINE_HALF_WIDTH];
    let mut prev = at(-LINE_HALF_WIDTH);
    for k in 1..=LINE_CELLS {
        let b = -LINE_HALF_WIDTH + k as f64 * dt;
        let gb = at(b);
        if (prev < 0.0 && gb > 0.0) || (prev > 0.0 && gb < 0.0) {
            edges.push(bisect(&at, b - dt, b, prev));
        }
        edges.push(b);
        prev = gb;
    }
    if let Some(r) = u.support_radius() {
        let rest = r * r - norm_sq(y, u.dim());
        if rest > 0.0 {
            edges.extend([-rest.sqrt(), rest.sqrt()]);
            edges.sort_by(f64::total_cmp);
        }
    }
    let (hi, lo) = legendre_pair();
    let panel = |rule: &Rule1d, a: f64, b: f64| {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(z, w)| {
            let t = c + r * z;
            w * at(t).abs() * (-0.5 * t * t).exp()
        }).sum();
        r * s / (2.0 * std::f64::consts::PI).sqrt()
    };
    let (mut value, mut error) = (0.0, 0.0);
    for w in edges.windows(2) {
        if w[1] > w[0] {
            let fine = panel(hi, w[0], w[1]);
            value += fine;
            error += (fine - panel(lo, w[0], w[1])).abs();
        }
    }
    [value, error]
}

/// `|| |u|^2 - 1 ||_1 = ∫ |h - 1| dγ`. The integrand has a kink on
/// `{h = 1}` where tensor Gauss–Hermite rules converge slowly, so the `x_1`
/// direction is integrated by Gauss–Legendre panels split at the roots of
/// `h - 1`; the other directions use a Gauss–Hermite rule of the grid's
/// order. The error adds the panel-pair differences and the embedded outer
/// rule differences.
pub fn l1_deviation<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<Estimate> {
    let dim = u.dim();
    if grid.dim() != dim {
        return Err(Error::InvalidParameter(format!("grid dimension {} differs from d = {dim}", grid.dim())));
    }
    if dim == 1 {
        let [value, error] = line_deviation(u, &[0.0; MAX_DIM]);
        return Ok(Estimate { value, error });
    }
    let lift = |p: &Point| {
        let mut x = [0.0; MAX_DIM];
        x[1..dim].copy_from_slice(&p[..dim - 1]);
        x
    };
    let outer = build_grid(GaussianMeasureSpec::new(dim - 1)?, grid.order())?;
    let (v, e) = outer.integrate_estimate(|p| line_deviation(u, &lift(p)))?;
    Ok(Estimate { value: v[0], error: v[1] + e[0] })
}

/// `𝓔[u] - ¼ || |u|^2 - 1 ||_1^2`.
pub fn ckp_gap<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<Estimate> {
    ensure_normalized(u, grid, NORM_TOL)?;
    let g = grid.for_support(u.support_radius())?;
    let (v, e) = g.integrate_estimate(|x| [xlogx(u.density(x).value)])?;
    let l1 = l1_deviation(u, grid)?;
    Ok(Estimate { value: v[0] - 0.25 * l1.value * l1.value, error: e[0] + 0.5 * l1.value * l1.error })
}

/// Both sides of an identity with the combined error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub error: f64,
}

impl IdentityCheck {
    pub fn discrepancy(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }

    pub fn relative_discrepancy(&self) -> f64 {
        self.discrepancy() / self.lhs.abs().max(self.rhs.abs()).max(1e-300)
    }
}

fn ou_generator(j: &Jet, x: &Point, dim: usize) -> f64 {
    j.laplacian(dim) - (0..dim).map(|i| x[i] * j.grad[i]).sum::<f64>()
}

/// `∫ (Lv)^2 dγ` against `∫ ||Hess v||^2 dγ + ∫ |∇v|^2 dγ`.
pub fn identity_check_id1<F: Field + ?Sized>(v: &F, grid: &QuadratureGrid) -> Result<IdentityCheck> {
    let g = grid.for_support(v.support_radius())?;
    let dim = v.dim();
    let (s, e) = g.integrate_estimate(|x| {
        let j = v.jet(x);
        let lv = ou_generator(&j, x, dim);
        [lv * lv, frobenius_sq(&j.hess, dim), j.grad_sq(dim)]
    })?;
    Ok(IdentityCheck { lhs: s[0], rhs: s[1] + s[2], error: e[0] + e[1] + e[2] })
}

/// `∫ Lv |∇v|^2 / v dγ` against
/// `-2 ∫ Hess v : (∇v ⊗ ∇v) / v dγ + ∫ |∇v|^4 / v^2 dγ`, on `{v > 0}`.
///
/// The integration by parts needs `v > 0` on the support; a `v` that
/// vanishes at a quadrature node is refused.
pub fn identity_check_id2<F: Field + ?Sized>(v: &F, grid: &QuadratureGrid) -> Result<IdentityCheck> {
    let g = grid.for_support(v.support_radius())?;
    let dim = v.dim();
    if let Some(x) = g.nodes().iter().find(|x| !(v.jet(x).value > 0.0)) {
        return Err(Error::Precondition(format!("v vanishes or changes sign near {:?}", &x[..dim])));
    }
    let (s, e) = g.integrate_estimate(|x| {
        let j = v.jet(x);
        if !(j.value > 0.0) {
            return [0.0; 3];
        }
        let g2 = j.grad_sq(dim);
        let mut hgg = 0.0;
        for a in 0..dim {
            for b in 0..dim {
                hgg += j.hess[a][b] * j.grad[a] * j.grad[b];
            }
        }
        [ou_generator(&j, x, dim) * g2 / j.value, hgg / j.value, g2 * g2 / (j.value * j.value)]
    })?;
    Ok(IdentityCheck { lhs: s[0], rhs: -2.0 * s[1] + s[2], error: e[0] + 2.0 * e[1] + e[2] })
}

/// Pressure `P = -log h` and its derivatives from the jet of `h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PressureJet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: crate::linalg::Mat,
}

impl PressureJet {
    pub fn from_density(h: &Jet, dim: usize) -> Option<Self> {
        if !(h.value > 0.0) {
            return None;
        }
        let mut p = PressureJet { value: -h.value.ln(), grad: [0.0; MAX_DIM], hess: [[0.0; MAX_DIM]; MAX_DIM] };
        let lh = h.log_hessian(dim);
        for a in 0..dim {
            p.grad[a] = -h.grad[a] / h.value;
            for b in 0..dim {
                p.hess[a][b] = -lh[a][b];
            }
        }
        Some(p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PressureIntegrals {
    /// `∫ |∇P|^2 h dγ`, equal to `4𝓘`.
    pub fisher4: f64,
    /// `∫ ΔP h dγ`.
    pub laplacian_p: f64,
    /// `∫ ||Hess P||^2 h dγ`.
    pub hess_p2: f64,
    pub fisher4_error: f64,
    pub laplacian_p_error: f64,
    pub hess_p2_error: f64,
    pub second_moment_gap: f64,
    /// False when `∫ |x|^2 h dγ > d`: the chain below is then not claimed.
    pub moment_constraint: bool,
    /// `fisher4 <= laplacian_p <= sqrt(d hess_p2)` up to the error estimates;
    /// `None` when the moment constraint fails.
    pub chain_holds: Option<bool>,
    /// Nodes where `(ΔP)^2 > d ||Hess P||^2` beyond rounding.
    pub pointwise_violations: usize,
    pub support_nodes: usize,
}

/// Pressure-variable integrals over the effective support of `h = u^2`.
pub fn pressure_integrals<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<PressureIntegrals> {
    ensure_normalized(u, grid, NORM_TOL)?;
    let g = grid.for_support(u.support_radius())?;
    let dim = u.dim();
    let dens: Vec<Jet> = par::map_indexed(g.len(), |i| u.density(&g.nodes()[i]));
    let hmax = dens.iter().map(|j| j.value).fold(0.0, f64::max);
    let cut = PRESSURE_THRESHOLD * hmax;

    let integrand = |j: &Jet| -> [f64; 3] {
        if !(j.value >= cut && j.value > 0.0) {
            return [0.0; 3];
        }
        let p = PressureJet::from_density(j, dim).expect("positive density");
        let h = j.value;
        let gp2: f64 = p.grad[..dim].iter().map(|v| v * v).sum();
        let lap: f64 = (0..dim).map(|a| p.hess[a][a]).sum();
        [gp2 * h, lap * h, frobenius_sq(&p.hess, dim) * h]
    };
    let fine = par::sum_indexed(g.len(), |i| {
        let v = integrand(&dens[i]);
        let w = g.weights()[i];
        [w * v[0], w * v[1], w * v[2]]
    });
    let mut err = [0.0f64; 3];
    for c in g.companions() {
        let coarse = c.integrate_vec(|x| integrand(&u.density(x)))?;
        for k in 0..3 {
            err[k] = err[k].max((fine[k] - coarse[k]).abs());
        }
    }
    if fine.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIntegrand { index: 0, point: [0.0; MAX_DIM], value: f64::NAN });
    }

    let mut violations = 0;
    let mut support_nodes = 0;
    for j in &dens {
        if !(j.value >= cut && j.value > 0.0) {
            continue;
        }
        support_nodes += 1;
        let p = PressureJet::from_density(j, dim).expect("positive density");
        let lap: f64 = (0..dim).map(|a| p.hess[a][a]).sum();
        let h2 = frobenius_sq(&p.hess, dim);
        if lap * lap > dim as f64 * h2 * (1.0 + 1e-12) + 1e-300 {
            violations += 1;
        }
    }

    let gap = crate::functions::second_moment_gap(u, grid)?;
    let moment_constraint = gap <= 0.0;
    let chain_holds = moment_constraint.then(|| {
        let upper = (dim as f64 * fine[2]).sqrt();
        let upper_err = if fine[2] > 0.0 { 0.5 * dim as f64 * err[2] / upper.max(1e-300) } else { 0.0 };
        let tol1 = 2.0 * (err[0] + err[1]) + 1e-12;
        let tol2 = 2.0 * (err[1] + upper_err) + 1e-12;
        fine[0] <= fine[1] + tol1 && fine[1] <= upper + tol2
    });
    Ok(PressureIntegrals {
        fisher4: fine[0],
        laplacian_p: fine[1],
        hess_p2: fine[2],
        fisher4_error: err[0],
        laplacian_p_error: err[1],
        hess_p2_error: err[2],
        second_moment_gap: gap,
        moment_constraint,
        chain_holds,
        pointwise_violations: violations,
        support_nodes,
    })
}

/// `∫ |∇u - ∇w_{a,c}|^2 dγ`, the homogeneous `H^1` distance to one point of
/// the optimizer manifold.
pub fn manifold_distance_sq<F: Field + ?Sized>(u: &F, a: &[f64], c: f64, grid: &QuadratureGrid) -> Result<Estimate> {
    let dim = u.dim();
    if a.len() != dim {
        return Err(Error::InvalidParameter(format!("a has {} components, expected {dim}", a.len())));
    }
    let (v, e) = grid.integrate_estimate(|x| {
        let j = u.jet(x);
        let ax: f64 = (0..dim).map(|i| a[i] * x[i]).sum();
        let w = c * (-ax).exp();
        let mut s = 0.0;
        for i in 0..dim {
            let diff = j.grad[i] + a[i] * w;
            s += diff * diff;
        }
        [s]
    })?;
    Ok(Estimate { value: v[0], error: e[0] })
}
