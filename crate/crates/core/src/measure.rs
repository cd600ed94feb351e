//! The Gaussian measure `dγ` and the quadrature rules used for every
//! integral in the crate.
//!
//! Gauss–Hermite nodes and weights come from the Golub–Welsch eigenproblem
//! for the probabilists' Hermite Jacobi matrix, polished by Newton steps on
//! the orthonormal three-term recurrence. Weights are normalized for `dγ`,
//! so `Σ w_i = 1`.
//!
//! Compactly supported integrands converge only algebraically under a
//! Gauss–Hermite rule because of the kink at the support boundary. For those
//! the crate uses a ball rule: Gauss–Legendre in the radius (and polar
//! angle in 3-D) with a trapezoidal azimuth, weighted by `γ`.

use std::borrow::Cow;
use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::tridiagonal_eigen;
use crate::par;

pub const MAX_DIM: usize = 3;
pub const MAX_ORDER: usize = 256;

/// A point of `R^d`, zero-padded to [`MAX_DIM`] coordinates.
pub type Point = [f64; MAX_DIM];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaussianMeasureSpec {
    dim: usize,
}

impl GaussianMeasureSpec {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if dim > MAX_DIM {
            return Err(Error::Capacity(format!(
                "dimension {dim} exceeds the supported maximum {MAX_DIM}"
            )));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `γ(x) = (2π)^{-d/2} exp(-|x|^2 / 2)`.
    pub fn density(&self, x: &Point) -> f64 {
        gaussian_density(x, self.dim)
    }
}

pub(crate) fn gaussian_density(x: &Point, dim: usize) -> f64 {
    let r2: f64 = x[..dim].iter().map(|v| v * v).sum();
    (2.0 * PI).powf(-(dim as f64) / 2.0) * (-0.5 * r2).exp()
}

pub(crate) fn norm_sq(x: &Point, dim: usize) -> f64 {
    x[..dim].iter().map(|v| v * v).sum()
}

/// One-dimensional Gauss rule.
#[derive(Clone, Debug)]
pub struct Rule1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss rule for a measure given by its Jacobi coefficients `(a_k, b_k)`,
/// with `b_k` the off-diagonal coupling `k - 1` and `k` (`k >= 1`) and
/// `mu0` the total mass.
fn golub_welsch(n: usize, a: impl Fn(usize) -> f64, b: impl Fn(usize) -> f64, mu0: f64) -> Result<Rule1d> {
    let diag: Vec<f64> = (0..n).map(&a).collect();
    let off: Vec<f64> = (1..n).map(&b).collect();
    let (mut nodes, first) = tridiagonal_eigen(&diag, &off)?;
    let mut weights: Vec<f64> = first.iter().map(|z| mu0 * z * z).collect();

    // Newton polish on p_n and Christoffel weights 1 / Σ_{k<n} p_k(x)^2.
    for (x, w) in nodes.iter_mut().zip(weights.iter_mut()) {
        for _ in 0..3 {
            let (pn, dpn, _) = orthonormal_eval(n, *x, &a, &b, mu0);
            if dpn == 0.0 || !dpn.is_finite() {
                break;
            }
            let step = pn / dpn;
            *x -= step;
            if step.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, _, christoffel) = orthonormal_eval(n, *x, &a, &b, mu0);
        if christoffel.is_finite() && christoffel > 0.0 {
            *w = 1.0 / christoffel;
        }
    }
    Ok(Rule1d { nodes, weights })
}

/// Makes a rule for an even weight exactly symmetric about the origin.
fn symmetrize(mut r: Rule1d) -> Rule1d {
    let n = r.nodes.len();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (r.nodes[j] - r.nodes[i]);
        let w = 0.5 * (r.weights[i] + r.weights[j]);
        r.nodes[i] = -x;
        r.nodes[j] = x;
        r.weights[i] = w;
        r.weights[j] = w;
    }
    if n % 2 == 1 {
        r.nodes[n / 2] = 0.0;
    }
    r
}

/// Returns `(p_n(x), p_n'(x), Σ_{k<n} p_k(x)^2)` for the orthonormal family.
fn orthonormal_eval(
    n: usize,
    x: f64,
    a: &impl Fn(usize) -> f64,
    b: &impl Fn(usize) -> f64,
    mu0: f64,
) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut p = 1.0 / mu0.sqrt();
    let mut dp_prev = 0.0;
    let mut dp = 0.0;
    let mut sum = 0.0;
    for k in 0..n {
        sum += p * p;
        let bk1 = b(k + 1);
        let bk = if k == 0 { 0.0 } else { b(k) };
        let p_next = ((x - a(k)) * p - bk * p_prev) / bk1;
        let dp_next = (p + (x - a(k)) * dp - bk * dp_prev) / bk1;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp, sum)
}

/// Gauss–Hermite rule for the one-dimensional standard Gaussian.
pub fn gauss_hermite_1d(order: usize) -> Result<Rule1d> {
    golub_welsch(order, |_| 0.0, |k| (k as f64).sqrt(), 1.0).map(symmetrize)
}

/// Gauss–Legendre rule on `[-1, 1]` with unit weight.
pub fn gauss_legendre_1d(order: usize) -> Result<Rule1d> {
    golub_welsch(
        order,
        |_| 0.0,
        |k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        },
        2.0,
    )
    .map(symmetrize)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridKind {
    GaussHermite,
    Ball { radius: f64 },
}

/// Nodes and weights for integration against `dγ`.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    dim: usize,
    order: usize,
    kind: GridKind,
    nodes: Vec<Point>,
    weights: Vec<f64>,
    /// Weights against Lebesgue measure (ball rules only).
    lebesgue: Option<Vec<f64>>,
    coarse: OnceLock<Box<QuadratureGrid>>,
    half: OnceLock<Box<QuadratureGrid>>,
}

fn check_order(order: usize) -> Result<()> {
    if order == 0 {
        return Err(Error::InvalidParameter("quadrature order must be positive".into()));
    }
    if order > MAX_ORDER {
        return Err(Error::Capacity(format!(
            "quadrature order {order} exceeds the memory guard {MAX_ORDER}"
        )));
    }
    Ok(())
}

/// Tensor Gauss–Hermite grid for `dγ` on `R^d`.
pub fn build_grid(spec: GaussianMeasureSpec, order: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::gauss_hermite(spec, order)
}

/// `Σ w_i f(x_i)`.
pub fn integrate(grid: &QuadratureGrid, f: impl Fn(&Point) -> f64 + Sync + Send) -> Result<f64> {
    grid.integrate(f)
}

impl QuadratureGrid {
    pub fn gauss_hermite(spec: GaussianMeasureSpec, order: usize) -> Result<Self> {
        check_order(order)?;
        let rule = gauss_hermite_1d(order)?;
        let dim = spec.dim();
        let total: f64 = rule.weights.iter().sum();
        let w1: Vec<f64> = rule.weights.iter().map(|w| w / total).collect();
        let count = order.pow(dim as u32);
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for flat in 0..count {
            let mut rem = flat;
            let mut p = [0.0; MAX_DIM];
            let mut w = 1.0;
            for coord in p.iter_mut().take(dim) {
                let i = rem % order;
                rem /= order;
                *coord = rule.nodes[i];
                w *= w1[i];
            }
            nodes.push(p);
            weights.push(w);
        }
        Ok(Self {
            dim,
            order,
            kind: GridKind::GaussHermite,
            nodes,
            weights,
            lebesgue: None,
            coarse: OnceLock::new(),
            half: OnceLock::new(),
        })
    }

    /// Rule for `∫_{|x| < radius} f dγ`. The radial rule has `order` nodes;
    /// azimuths use `2 * order` equispaced nodes.
    pub fn ball(spec: GaussianMeasureSpec, order: usize, radius: f64) -> Result<Self> {
        check_order(order)?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidParameter(format!("ball radius {radius} must be positive")));
        }
        let dim = spec.dim();
        let gl = gauss_legendre_1d(order)?;
        let mut nodes = Vec::new();
        let mut leb = Vec::new();
        match dim {
            1 => {
                for (xi, wi) in gl.nodes.iter().zip(&gl.weights) {
                    nodes.push([radius * xi, 0.0, 0.0]);
                    leb.push(radius * wi);
                }
            }
            2 => {
                let n_phi = 2 * order;
                let dphi = 2.0 * PI / n_phi as f64;
                for (xi, wi) in gl.nodes.iter().zip(&gl.weights) {
                    let r = 0.5 * radius * (1.0 + xi);
                    let wr = 0.5 * radius * wi * r;
                    for j in 0..n_phi {
                        let phi = (j as f64 + 0.5) * dphi;
                        nodes.push([r * phi.cos(), r * phi.sin(), 0.0]);
                        leb.push(wr * dphi);
                    }
                }
            }
            _ => {
                let n_phi = 2 * order;
                let dphi = 2.0 * PI / n_phi as f64;
                for (xi, wi) in gl.nodes.iter().zip(&gl.weights) {
                    let r = 0.5 * radius * (1.0 + xi);
                    let wr = 0.5 * radius * wi * r * r;
                    for (ct, wt) in gl.nodes.iter().zip(&gl.weights) {
                        let st = (1.0 - ct * ct).max(0.0).sqrt();
                        for j in 0..n_phi {
                            let phi = (j as f64 + 0.5) * dphi;
                            nodes.push([r * st * phi.cos(), r * st * phi.sin(), r * ct]);
                            leb.push(wr * wt * dphi);
                        }
                    }
                }
            }
        }
        let weights = nodes
            .iter()
            .zip(&leb)
            .map(|(x, w)| w * gaussian_density(x, dim))
            .collect();
        Ok(Self {
            dim,
            order,
            kind: GridKind::Ball { radius },
            nodes,
            weights,
            lebesgue: Some(leb),
            coarse: OnceLock::new(),
            half: OnceLock::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn spec(&self) -> GaussianMeasureSpec {
        GaussianMeasureSpec { dim: self.dim }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn lebesgue_weights(&self) -> Option<&[f64]> {
        self.lebesgue.as_deref()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `γ`-mass not covered by the rule (zero for Gauss–Hermite grids).
    pub fn outside_mass(&self) -> f64 {
        match self.kind {
            GridKind::GaussHermite => 0.0,
            GridKind::Ball { .. } => 1.0 - self.weights.iter().sum::<f64>(),
        }
    }

    fn with_order(&self, order: usize) -> QuadratureGrid {
        let g = match self.kind {
            GridKind::GaussHermite => Self::gauss_hermite(self.spec(), order),
            GridKind::Ball { radius } => Self::ball(self.spec(), order, radius),
        };
        g.expect("companion order is within range")
    }

    /// The lower-order companion of order `⌈3n/4⌉`.
    pub fn embedded(&self) -> &QuadratureGrid {
        self.coarse.get_or_init(|| Box::new(self.with_order((3 * self.order).div_ceil(4).max(1))))
    }

    /// Both companions, of orders `⌈3n/4⌉` and `⌈n/2⌉`. Rules converge with
    /// oscillating sign on non-smooth integrands, so one companion can agree
    /// with the fine rule by accident; error estimates use the larger of the
    /// two differences.
    pub fn companions(&self) -> [&QuadratureGrid; 2] {
        let half = self.half.get_or_init(|| Box::new(self.with_order(self.order.div_ceil(2).max(1))));
        [self.embedded(), half]
    }

    /// Same order, adapted to a compact support of the given radius.
    pub fn for_support(&self, support: Option<f64>) -> Result<Cow<'_, QuadratureGrid>> {
        match (support, self.kind) {
            (Some(r), GridKind::GaussHermite) => Ok(Cow::Owned(Self::ball(self.spec(), self.order, r)?)),
            _ => Ok(Cow::Borrowed(self)),
        }
    }

    pub fn integrate(&self, f: impl Fn(&Point) -> f64 + Sync + Send) -> Result<f64> {
        Ok(self.integrate_vec(|x| [f(x)])?[0])
    }

    /// Componentwise `Σ w_i f(x_i)` for vector-valued integrands.
    pub fn integrate_vec<const N: usize>(
        &self,
        f: impl Fn(&Point) -> [f64; N] + Sync + Send,
    ) -> Result<[f64; N]> {
        let sum = par::sum_indexed(self.nodes.len(), |i| {
            let v = f(&self.nodes[i]);
            let w = self.weights[i];
            let mut out = [0.0; N];
            for k in 0..N {
                out[k] = w * v[k];
            }
            out
        });
        if sum.iter().all(|v| v.is_finite()) {
            return Ok(sum);
        }
        for (i, x) in self.nodes.iter().enumerate() {
            if let Some(&value) = f(x).iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFiniteIntegrand { index: i, point: *x, value });
            }
        }
        // Finite per-node values overflowed in the sum.
        Err(Error::NonFiniteIntegrand { index: self.nodes.len(), point: [0.0; MAX_DIM], value: f64::INFINITY })
    }

    /// Integral on this grid plus `max(|I_n - I_{⌈3n/4⌉}|, |I_n - I_{⌈n/2⌉}|)`
    /// per component.
    pub fn integrate_estimate<const N: usize>(
        &self,
        f: impl Fn(&Point) -> [f64; N] + Sync + Send,
    ) -> Result<([f64; N], [f64; N])> {
        let fine = self.integrate_vec(&f)?;
        let mut err = [0.0f64; N];
        for c in self.companions() {
            let coarse = c.integrate_vec(&f)?;
            for k in 0..N {
                err[k] = err[k].max((fine[k] - coarse[k]).abs());
            }
        }
        Ok((fine, err))
    }
}
