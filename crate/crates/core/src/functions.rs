//! Test functions `u` on `R^d` with analytic value, gradient and Hessian.
//!
//! A [`Field`] is anything that can be evaluated to second order at a
//! point. [`TestFunction`] covers the built-in parametric families; the
//! evolved states of [`crate::ou_flow`] implement the same trait.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::measure::{norm_sq, Point, QuadratureGrid, MAX_DIM};

/// Radius of the ball (or half-width of the box, for Hermite expansions)
/// on which families that can vanish must stay strictly positive.
pub const ADMISSION_HULL: f64 = 3.0;

/// Maximal total degree of a Hermite expansion.
pub const MAX_HERMITE_DEGREE: usize = 12;

/// Value, gradient and Hessian at one point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: [f64; MAX_DIM],
    pub hess: Mat,
}

impl Jet {
    pub fn constant(value: f64) -> Self {
        Jet { value, ..Default::default() }
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.value *= k;
        for i in 0..MAX_DIM {
            self.grad[i] *= k;
            for j in 0..MAX_DIM {
                self.hess[i][j] *= k;
            }
        }
        self
    }

    pub fn add_scaled(&mut self, other: &Jet, w: f64) {
        self.value += w * other.value;
        for i in 0..MAX_DIM {
            self.grad[i] += w * other.grad[i];
            for j in 0..MAX_DIM {
                self.hess[i][j] += w * other.hess[i][j];
            }
        }
    }

    pub fn grad_sq(&self, dim: usize) -> f64 {
        self.grad[..dim].iter().map(|g| g * g).sum()
    }

    pub fn laplacian(&self, dim: usize) -> f64 {
        (0..dim).map(|i| self.hess[i][i]).sum()
    }

    /// Jet of `h = u^2` from the jet of `u`.
    pub fn square(&self, dim: usize) -> Jet {
        let u = self.value;
        let mut out = Jet { value: u * u, ..Default::default() };
        for i in 0..dim {
            out.grad[i] = 2.0 * u * self.grad[i];
            for j in 0..dim {
                out.hess[i][j] = 2.0 * (self.grad[i] * self.grad[j] + u * self.hess[i][j]);
            }
        }
        out
    }

    /// Jet of `v = sqrt(h)` from the jet of `h`; zero where `h <= 0`.
    pub fn sqrt(&self, dim: usize) -> Jet {
        let h = self.value;
        if !(h > 0.0) {
            return Jet::default();
        }
        let v = h.sqrt();
        let mut out = Jet { value: v, ..Default::default() };
        let inv2v = 0.5 / v;
        let inv4v3 = 0.25 / (v * h);
        for i in 0..dim {
            out.grad[i] = self.grad[i] * inv2v;
            for j in 0..dim {
                out.hess[i][j] = self.hess[i][j] * inv2v - self.grad[i] * self.grad[j] * inv4v3;
            }
        }
        out
    }

    /// `Hess log h = Hess h / h - ∇h ⊗ ∇h / h^2` for a density jet.
    pub fn log_hessian(&self, dim: usize) -> Mat {
        let h = self.value;
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for i in 0..dim {
            for j in 0..dim {
                m[i][j] = self.hess[i][j] / h - self.grad[i] * self.grad[j] / (h * h);
            }
        }
        m
    }
}

/// A real function on `R^d` evaluable to second order.
pub trait Field: Send + Sync {
    fn dim(&self) -> usize;

    /// Jet of the amplitude `u`.
    fn jet(&self, x: &Point) -> Jet;

    /// Jet of the density `h = u^2` relative to `γ`.
    fn density(&self, x: &Point) -> Jet {
        self.jet(x).square(self.dim())
    }

    /// Radius of a centred ball containing the support, if compact.
    fn support_radius(&self) -> Option<f64> {
        None
    }
}

impl<F: Field + ?Sized> Field for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn jet(&self, x: &Point) -> Jet {
        (**self).jet(x)
    }
    fn density(&self, x: &Point) -> Jet {
        (**self).density(x)
    }
    fn support_radius(&self) -> Option<f64> {
        (**self).support_radius()
    }
}

impl<F: Field + ?Sized> Field for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn jet(&self, x: &Point) -> Jet {
        (**self).jet(x)
    }
    fn density(&self, x: &Point) -> Jet {
        (**self).density(x)
    }
    fn support_radius(&self) -> Option<f64> {
        (**self).support_radius()
    }
}

/// One term `coef * Π_i He_{index_i}(x_i)` of a Hermite expansion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteTerm {
    pub index: Vec<usize>,
    pub coef: f64,
}

fn one() -> f64 {
    1.0
}

/// Built-in families. Serialized as `{"family": ..., "params": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum Family {
    /// `u ≡ c`.
    Constant {
        #[serde(default = "one")]
        c: f64,
    },
    /// `w_{a,c}(x) = c exp(-a·x)`, the equality cases.
    Tilt {
        a: Vec<f64>,
        #[serde(default = "one")]
        c: f64,
    },
    /// `1 + eps x·nu` with `|nu| = 1`.
    Affine {
        eps: f64,
        #[serde(default)]
        nu: Vec<f64>,
    },
    /// `u^2 γ` is the normal law `N(shift, sigma2 I)`.
    Gaussian {
        sigma2: f64,
        #[serde(default)]
        shift: Vec<f64>,
    },
    /// `(1 - |x|^2 / R^2)_+^2`.
    Bump { radius: f64 },
    /// Truncated expansion in probabilists' Hermite polynomials.
    Hermite { terms: Vec<HermiteTerm> },
    /// `1 + amplitude (g(x - s e_1) + g(x + s e_1))` with Gaussian bumps
    /// `g(y) = exp(-|y|^2 / (2 width^2))`.
    Bimodal {
        amplitude: f64,
        separation: f64,
        width: f64,
    },
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::Constant { .. } => "constant",
            Family::Tilt { .. } => "tilt",
            Family::Affine { .. } => "affine",
            Family::Gaussian { .. } => "gaussian",
            Family::Bump { .. } => "bump",
            Family::Hermite { .. } => "hermite",
            Family::Bimodal { .. } => "bimodal",
        }
    }
}

/// JSON description of a test function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionSpec {
    #[serde(flatten)]
    pub family: Family,
    pub d: usize,
    #[serde(default = "one")]
    pub scale: f64,
}

impl FunctionSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("function description serializes")
    }
}

/// Precomputed evaluation data.
#[derive(Clone, Debug)]
enum Kernel {
    Constant,
    Tilt { a: Point, c: f64 },
    Affine { eps: f64, nu: Point },
    Gaussian { mu: Point, inv4s2: f64, hess_g: f64, amp: f64 },
    Bump { inv_r2: f64 },
    Hermite { terms: Vec<([usize; MAX_DIM], f64)>, max_deg: usize },
    Bimodal { amplitude: f64, centre: f64, inv_w2: f64 },
}

/// A validated member of one of the built-in families, times `scale`.
#[derive(Clone, Debug)]
pub struct TestFunction {
    spec: FunctionSpec,
    kernel: Kernel,
}

fn vec_to_point(v: &[f64], dim: usize, what: &str) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::InvalidParameter(format!(
            "{what} has {} components, expected d = {dim}",
            v.len()
        )));
    }
    let mut p = [0.0; MAX_DIM];
    p[..dim].copy_from_slice(v);
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!("{what} is not finite")));
    }
    Ok(p)
}

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{what} = {v} must be positive and finite")))
    }
}

/// Probabilists' Hermite polynomials `He_0..=He_n` and their derivatives.
fn hermite_table(x: f64, n: usize, he: &mut [f64; MAX_HERMITE_DEGREE + 1], dhe: &mut [f64; MAX_HERMITE_DEGREE + 1]) {
    he[0] = 1.0;
    dhe[0] = 0.0;
    if n >= 1 {
        he[1] = x;
        dhe[1] = 1.0;
    }
    for k in 1..n {
        he[k + 1] = x * he[k] - k as f64 * he[k - 1];
        dhe[k + 1] = (k + 1) as f64 * he[k];
    }
}

impl TestFunction {
    pub fn new(spec: FunctionSpec) -> Result<Self> {
        let dim = spec.d;
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Capacity(format!("dimension {dim} outside 1..={MAX_DIM}")));
        }
        positive(spec.scale, "scale")?;
        let kernel = match &spec.family {
            Family::Constant { c } => {
                positive(*c, "c")?;
                Kernel::Constant
            }
            Family::Tilt { a, c } => {
                positive(*c, "c")?;
                Kernel::Tilt { a: vec_to_point(a, dim, "a")?, c: *c }
            }
            Family::Affine { eps, nu } => {
                let nu = if nu.is_empty() {
                    let mut e = [0.0; MAX_DIM];
                    e[0] = 1.0;
                    e
                } else {
                    vec_to_point(nu, dim, "nu")?
                };
                let n = norm_sq(&nu, dim).sqrt();
                if (n - 1.0).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!("nu must be a unit vector, |nu| = {n}")));
                }
                if !eps.is_finite() || eps.abs() * ADMISSION_HULL >= 1.0 {
                    return Err(Error::NotPositive(format!(
                        "1 + eps x·nu vanishes inside |x| <= {ADMISSION_HULL} for eps = {eps}"
                    )));
                }
                Kernel::Affine { eps: *eps, nu }
            }
            Family::Gaussian { sigma2, shift } => {
                positive(*sigma2, "sigma2")?;
                if *sigma2 > 2.0 {
                    return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} exceeds 2")));
                }
                let mu = if shift.is_empty() { [0.0; MAX_DIM] } else { vec_to_point(shift, dim, "shift")? };
                Kernel::Gaussian {
                    mu,
                    inv4s2: 0.25 / sigma2,
                    hess_g: 0.5 - 0.5 / sigma2,
                    amp: sigma2.powf(-(dim as f64) / 4.0),
                }
            }
            Family::Bump { radius } => {
                positive(*radius, "radius")?;
                Kernel::Bump { inv_r2: 1.0 / (radius * radius) }
            }
            Family::Hermite { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidParameter("hermite expansion has no terms".into()));
                }
                let mut packed = Vec::with_capacity(terms.len());
                let mut max_deg = 0;
                for t in terms {
                    if t.index.len() != dim {
                        return Err(Error::InvalidParameter(format!(
                            "hermite multi-index {:?} does not have d = {dim} entries",
                            t.index
                        )));
                    }
                    let total: usize = t.index.iter().sum();
                    if total > MAX_HERMITE_DEGREE {
                        return Err(Error::InvalidParameter(format!(
                            "hermite total degree {total} exceeds {MAX_HERMITE_DEGREE}"
                        )));
                    }
                    if !t.coef.is_finite() {
                        return Err(Error::InvalidParameter("hermite coefficient is not finite".into()));
                    }
                    let mut idx = [0; MAX_DIM];
                    idx[..dim].copy_from_slice(&t.index);
                    max_deg = max_deg.max(*t.index.iter().max().unwrap_or(&0));
                    packed.push((idx, t.coef));
                }
                Kernel::Hermite { terms: packed, max_deg }
            }
            Family::Bimodal { amplitude, separation, width } => {
                if !(amplitude.is_finite() && *amplitude >= 0.0) {
                    return Err(Error::InvalidParameter("bimodal amplitude must be >= 0".into()));
                }
                positive(*width, "width")?;
                if !separation.is_finite() {
                    return Err(Error::InvalidParameter("separation is not finite".into()));
                }
                Kernel::Bimodal { amplitude: *amplitude, centre: *separation, inv_w2: 1.0 / (width * width) }
            }
        };
        let f = TestFunction { spec, kernel };
        if matches!(f.kernel, Kernel::Hermite { .. }) {
            f.check_positive_on_box()?;
        }
        Ok(f)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::new(FunctionSpec::from_json(s)?)
    }

    pub fn spec(&self) -> &FunctionSpec {
        &self.spec
    }

    pub fn family(&self) -> &Family {
        &self.spec.family
    }

    pub fn scale(&self) -> f64 {
        self.spec.scale
    }

    fn check_positive_on_box(&self) -> Result<()> {
        let dim = self.spec.d;
        let per_axis: usize = match dim {
            1 => 241,
            2 => 81,
            _ => 31,
        };
        let step = 2.0 * ADMISSION_HULL / (per_axis - 1) as f64;
        let total = per_axis.pow(dim as u32);
        for flat in 0..total {
            let mut rem = flat;
            let mut x = [0.0; MAX_DIM];
            for c in x.iter_mut().take(dim) {
                *c = -ADMISSION_HULL + step * (rem % per_axis) as f64;
                rem /= per_axis;
            }
            let v = self.jet(&x).value;
            if !(v > 0.0) {
                return Err(Error::NotPositive(format!("u({:?}) = {v}", &x[..dim])));
            }
        }
        Ok(())
    }

    /// `k * u`, folding the factor into `c` where the family has one.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let mut spec = self.spec.clone();
        match &mut spec.family {
            Family::Constant { c } | Family::Tilt { c, .. } => *c *= k * spec.scale,
            _ => {
                spec.scale *= k;
                return Self::new(spec);
            }
        }
        spec.scale = 1.0;
        Self::new(spec)
    }

    // Convenience constructors.

    pub fn constant(d: usize, c: f64) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Constant { c }, d, scale: 1.0 })
    }

    pub fn tilt(a: &[f64], c: f64) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Tilt { a: a.to_vec(), c }, d: a.len(), scale: 1.0 })
    }

    pub fn affine(d: usize, eps: f64) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Affine { eps, nu: Vec::new() }, d, scale: 1.0 })
    }

    pub fn affine_along(eps: f64, nu: &[f64]) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Affine { eps, nu: nu.to_vec() }, d: nu.len(), scale: 1.0 })
    }

    pub fn gaussian(d: usize, sigma2: f64) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Gaussian { sigma2, shift: Vec::new() }, d, scale: 1.0 })
    }

    pub fn gaussian_shifted(sigma2: f64, shift: &[f64]) -> Result<Self> {
        Self::new(FunctionSpec {
            family: Family::Gaussian { sigma2, shift: shift.to_vec() },
            d: shift.len(),
            scale: 1.0,
        })
    }

    pub fn bump(d: usize, radius: f64) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Bump { radius }, d, scale: 1.0 })
    }

    /// One-dimensional expansion `Σ_k coefs[k] He_k(x)`.
    pub fn hermite_1d(coefs: &[f64]) -> Result<Self> {
        let terms = coefs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(k, &coef)| HermiteTerm { index: vec![k], coef })
            .collect();
        Self::new(FunctionSpec { family: Family::Hermite { terms }, d: 1, scale: 1.0 })
    }

    pub fn hermite(d: usize, terms: Vec<HermiteTerm>) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Hermite { terms }, d, scale: 1.0 })
    }

    pub fn bimodal(d: usize, amplitude: f64, separation: f64, width: f64) -> Result<Self> {
        Self::new(FunctionSpec { family: Family::Bimodal { amplitude, separation, width }, d, scale: 1.0 })
    }

    fn raw_jet(&self, x: &Point) -> Jet {
        let dim = self.spec.d;
        let mut j = Jet::default();
        match &self.kernel {
            Kernel::Constant => {
                if let Family::Constant { c } = self.spec.family {
                    j.value = c;
                }
            }
            Kernel::Tilt { a, c } => {
                let ax: f64 = (0..dim).map(|i| a[i] * x[i]).sum();
                let u = c * (-ax).exp();
                j.value = u;
                for i in 0..dim {
                    j.grad[i] = -a[i] * u;
                    for k in 0..dim {
                        j.hess[i][k] = a[i] * a[k] * u;
                    }
                }
            }
            Kernel::Affine { eps, nu } => {
                let nx: f64 = (0..dim).map(|i| nu[i] * x[i]).sum();
                j.value = 1.0 + eps * nx;
                for i in 0..dim {
                    j.grad[i] = eps * nu[i];
                }
            }
            Kernel::Gaussian { mu, inv4s2, hess_g, amp } => {
                let mut g = 0.0;
                let mut dg = [0.0; MAX_DIM];
                for i in 0..dim {
                    let y = x[i] - mu[i];
                    g += -y * y * inv4s2 + 0.25 * x[i] * x[i];
                    dg[i] = -2.0 * y * inv4s2 + 0.5 * x[i];
                }
                let u = amp * g.exp();
                j.value = u;
                for i in 0..dim {
                    j.grad[i] = u * dg[i];
                    for k in 0..dim {
                        let diag = if i == k { *hess_g } else { 0.0 };
                        j.hess[i][k] = u * (dg[i] * dg[k] + diag);
                    }
                }
            }
            Kernel::Bump { inv_r2 } => {
                let q = 1.0 - norm_sq(x, dim) * inv_r2;
                if q > 0.0 {
                    j.value = q * q;
                    for i in 0..dim {
                        let dqi = -2.0 * x[i] * inv_r2;
                        j.grad[i] = 2.0 * q * dqi;
                        for k in 0..dim {
                            let dqk = -2.0 * x[k] * inv_r2;
                            let hq = if i == k { -2.0 * inv_r2 } else { 0.0 };
                            j.hess[i][k] = 2.0 * (dqi * dqk + q * hq);
                        }
                    }
                }
            }
            Kernel::Hermite { terms, max_deg } => {
                let mut he = [[0.0; MAX_HERMITE_DEGREE + 1]; MAX_DIM];
                let mut dhe = [[0.0; MAX_HERMITE_DEGREE + 1]; MAX_DIM];
                for i in 0..dim {
                    hermite_table(x[i], *max_deg, &mut he[i], &mut dhe[i]);
                }
                // Second derivative: He_k'' = k (k - 1) He_{k-2}.
                let d2 = |i: usize, k: usize| -> f64 {
                    if k >= 2 {
                        (k * (k - 1)) as f64 * he[i][k - 2]
                    } else {
                        0.0
                    }
                };
                for (idx, coef) in terms {
                    let mut val = *coef;
                    for i in 0..dim {
                        val *= he[i][idx[i]];
                    }
                    j.value += val;
                    for i in 0..dim {
                        let mut g = *coef;
                        for k in 0..dim {
                            g *= if k == i { dhe[k][idx[k]] } else { he[k][idx[k]] };
                        }
                        j.grad[i] += g;
                        for l in 0..dim {
                            let mut h = *coef;
                            for k in 0..dim {
                                h *= if k == i && k == l {
                                    d2(k, idx[k])
                                } else if k == i || k == l {
                                    dhe[k][idx[k]]
                                } else {
                                    he[k][idx[k]]
                                };
                            }
                            j.hess[i][l] += h;
                        }
                    }
                }
            }
            Kernel::Bimodal { amplitude, centre, inv_w2 } => {
                j.value = 1.0;
                for sign in [1.0, -1.0] {
                    let mut y = *x;
                    y[0] -= sign * centre;
                    let g = amplitude * (-0.5 * norm_sq(&y, dim) * inv_w2).exp();
                    j.value += g;
                    for i in 0..dim {
                        j.grad[i] -= y[i] * inv_w2 * g;
                        for k in 0..dim {
                            let diag = if i == k { *inv_w2 } else { 0.0 };
                            j.hess[i][k] += g * (y[i] * y[k] * inv_w2 * inv_w2 - diag);
                        }
                    }
                }
            }
        }
        j
    }
}

impl Field for TestFunction {
    fn dim(&self) -> usize {
        self.spec.d
    }

    fn jet(&self, x: &Point) -> Jet {
        let j = self.raw_jet(x);
        if self.spec.scale == 1.0 {
            j
        } else {
            j.scaled(self.spec.scale)
        }
    }

    fn support_radius(&self) -> Option<f64> {
        match self.spec.family {
            Family::Bump { radius } => Some(radius),
            _ => None,
        }
    }
}

/// `∫ |u|^2 dγ`, on a rule adapted to the support of `u`.
pub fn l2_norm_sq<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<f64> {
    let g = grid.for_support(u.support_radius())?;
    g.integrate(|x| u.density(x).value)
}

/// Fails unless `|∫ u^2 dγ - 1| <= tol`.
pub fn ensure_normalized<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid, tol: f64) -> Result<()> {
    let n = l2_norm_sq(u, grid)?;
    if (n - 1.0).abs() > tol {
        return Err(Error::NotNormalized { norm_sq: n });
    }
    Ok(())
}

/// `u / ||u||_2`.
pub fn normalize(u: &TestFunction, grid: &QuadratureGrid) -> Result<TestFunction> {
    let n = l2_norm_sq(u, grid)?;
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::ZeroNorm);
    }
    u.scaled(1.0 / n.sqrt())
}

/// `∫ x |u|^2 dγ`.
pub fn first_moment<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<Point> {
    let g = grid.for_support(u.support_radius())?;
    let dim = u.dim();
    g.integrate_vec(|x| {
        let h = u.density(x).value;
        let mut out = [0.0; MAX_DIM];
        for i in 0..dim {
            out[i] = x[i] * h;
        }
        out
    })
}

/// `A = ∫ |u|^2 (|x|^2 - d) dγ`.
pub fn second_moment_gap<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid) -> Result<f64> {
    let g = grid.for_support(u.support_radius())?;
    let d = u.dim() as f64;
    g.integrate(|x| u.density(x).value * (norm_sq(x, u.dim()) - d))
}

#[derive(Clone, Debug)]
pub struct Centering {
    pub function: TestFunction,
    /// First moment of `|u|^2 γ` before recentring.
    pub shift: Vec<f64>,
    pub recentred: bool,
    /// First moment after recentring (the measured one if not recentred).
    pub residual: Vec<f64>,
}

/// Recentres `|u|^2 γ` at the origin when the family allows it exactly.
pub fn center_mass(u: &TestFunction, grid: &QuadratureGrid) -> Result<Centering> {
    ensure_normalized(u, grid, 1e-8)?;
    let dim = u.dim();
    let m = first_moment(u, grid)?;
    let shift = m[..dim].to_vec();
    let mag = norm_sq(&m, dim).sqrt();
    if mag < 1e-8 {
        return Ok(Centering { function: u.clone(), shift: shift.clone(), recentred: true, residual: shift });
    }
    let candidate = match &u.spec.family {
        Family::Gaussian { sigma2, .. } => {
            let mut spec = u.spec.clone();
            spec.family = Family::Gaussian { sigma2: *sigma2, shift: vec![0.0; dim] };
            Some(TestFunction::new(spec)?)
        }
        Family::Tilt { .. } => Some(TestFunction::constant(dim, 1.0)?),
        _ => None,
    };
    match candidate {
        Some(f) => {
            let f = normalize(&f, grid)?;
            let r = first_moment(&f, grid)?;
            Ok(Centering { function: f, shift, recentred: true, residual: r[..dim].to_vec() })
        }
        None => Ok(Centering { function: u.clone(), shift: shift.clone(), recentred: false, residual: shift }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_grid, GaussianMeasureSpec};

    fn grid(d: usize, n: usize) -> QuadratureGrid {
        build_grid(GaussianMeasureSpec::new(d).unwrap(), n).unwrap()
    }

    #[test]
    fn json_roundtrip_and_shape() {
        let s = r#"{"family":"tilt","params":{"a":[0.7],"c":1},"d":1}"#;
        let spec = FunctionSpec::from_json(s).unwrap();
        assert_eq!(spec.family, Family::Tilt { a: vec![0.7], c: 1.0 });
        assert_eq!(FunctionSpec::from_json(&spec.to_json()).unwrap(), spec);
        let h = r#"{"family":"hermite","params":{"terms":[{"index":[0],"coef":1},{"index":[2],"coef":0.2}]},"d":1}"#;
        assert!(TestFunction::from_json(h).is_ok());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TestFunction::tilt(&[0.1, 0.2], -1.0).is_err());
        assert!(matches!(TestFunction::affine(1, 0.4), Err(Error::NotPositive(_))));
        assert!(matches!(TestFunction::hermite_1d(&[0.0, 1.0]), Err(Error::NotPositive(_))));
        assert!(matches!(TestFunction::bump(4, 1.0), Err(Error::Capacity(_))));
        let deg13 = HermiteTerm { index: vec![13], coef: 1e-9 };
        assert!(TestFunction::hermite(1, vec![HermiteTerm { index: vec![0], coef: 1.0 }, deg13]).is_err());
    }

    #[test]
    fn normalize_examples() {
        let g = grid(1, 64);
        let u = normalize(&TestFunction::constant(1, 3.0).unwrap(), &g).unwrap();
        assert!((u.jet(&[0.4, 0.0, 0.0]).value - 1.0).abs() < 1e-12);

        let w = normalize(&TestFunction::tilt(&[1.0], 1.0).unwrap(), &g).unwrap();
        match w.family() {
            Family::Tilt { c, .. } => assert!((c - (-1.0f64).exp()).abs() < 1e-12),
            f => panic!("{f:?}"),
        }

        let eps = 0.1;
        let a = normalize(&TestFunction::affine(1, eps).unwrap(), &g).unwrap();
        assert!((a.scale() - (1.0f64 + eps * eps).powf(-0.5)).abs() < 1e-13);
        let again = normalize(&a, &g).unwrap();
        assert!((again.scale() - a.scale()).abs() < 1e-12);
    }

    #[test]
    fn second_moment_gap_examples() {
        let g = grid(1, 64);
        assert!(second_moment_gap(&TestFunction::constant(1, 1.0).unwrap(), &g).unwrap().abs() < 1e-13);
        let s = TestFunction::gaussian(1, 0.5).unwrap();
        assert!((second_moment_gap(&s, &g).unwrap() + 0.5).abs() < 1e-12);
        let eps: f64 = 0.1;
        let a = normalize(&TestFunction::affine(1, eps).unwrap(), &g).unwrap();
        let exact = 2.0 * eps * eps / (1.0 + eps * eps);
        assert!((second_moment_gap(&a, &g).unwrap() - exact).abs() < 1e-13);
    }

    #[test]
    fn centering() {
        let g = grid(1, 64);
        let bump = normalize(&TestFunction::bump(1, 2.0).unwrap(), &g).unwrap();
        let c = center_mass(&bump, &g).unwrap();
        assert!(c.recentred && c.shift[0].abs() < 1e-12);

        let shifted = TestFunction::gaussian_shifted(0.6, &[0.3]).unwrap();
        let c = center_mass(&shifted, &g).unwrap();
        assert!((c.shift[0] - 0.3).abs() < 1e-12);
        assert!(c.recentred && c.residual[0].abs() < 1e-8);

        let h = normalize(&TestFunction::hermite_1d(&[1.0, 0.2]).unwrap(), &g).unwrap();
        let c = center_mass(&h, &g).unwrap();
        assert!(!c.recentred && c.shift[0].abs() > 0.1);
    }

    fn fd_check(u: &TestFunction, x: &Point) {
        let d = u.dim();
        let j = u.jet(x);
        let step = 1e-5;
        for i in 0..d {
            let mut xp = *x;
            let mut xm = *x;
            xp[i] += step;
            xm[i] -= step;
            let jp = u.jet(&xp);
            let jm = u.jet(&xm);
            let fd = (jp.value - jm.value) / (2.0 * step);
            let scale = j.grad[i].abs().max(j.value.abs()).max(1e-3);
            assert!((fd - j.grad[i]).abs() <= 1e-6 * scale, "{:?} grad {i}: {fd} vs {}", u.family(), j.grad[i]);
            for k in 0..d {
                let fd = (jp.grad[k] - jm.grad[k]) / (2.0 * step);
                let scale = j.hess[i][k].abs().max(j.value.abs()).max(1e-3);
                assert!((fd - j.hess[i][k]).abs() <= 1e-5 * scale, "{:?} hess {i}{k}: {fd} vs {}", u.family(), j.hess[i][k]);
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn analytic_derivatives_match_differences(
            a in -1.5f64..1.5, b in -1.5f64..1.5,
            s2 in 0.2f64..1.0,
            eps in -0.3f64..0.3,
            x0 in -2.0f64..2.0, x1 in -2.0f64..2.0,
            c2 in 0.0f64..0.3,
        ) {
            let x = [x0, x1, 0.0];
            let fams = [
                TestFunction::tilt(&[a, b], 1.3).unwrap(),
                TestFunction::affine_along(eps, &[0.6, 0.8]).unwrap(),
                TestFunction::gaussian_shifted(s2, &[0.3 * a, -0.2]).unwrap(),
                TestFunction::bimodal(2, 2.0, 1.5, 0.7).unwrap(),
                TestFunction::hermite(2, vec![
                    HermiteTerm { index: vec![0, 0], coef: 1.0 },
                    HermiteTerm { index: vec![2, 0], coef: c2 },
                    HermiteTerm { index: vec![1, 1], coef: 0.05 },
                    HermiteTerm { index: vec![0, 2], coef: 0.1 },
                ]).unwrap(),
            ];
            for u in &fams {
                fd_check(u, &x);
            }
            // Bump: avoid the C^1 boundary.
            let bump = TestFunction::bump(2, 3.0).unwrap();
            if norm_sq(&x, 2) < 8.5 {
                fd_check(&bump, &x);
            }
        }
    }
}
