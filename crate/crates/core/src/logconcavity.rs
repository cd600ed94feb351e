//! Probe-based log-concavity certificates for `h γ`.
//!
//! At each probe point the Hessian of `-log(h γ) = -log h + |x|^2 / 2 + c`
//! is `I - Hess log h`; its smallest eigenvalue is compared with a tolerance
//! scaled by the local Hessian size. A finite probe set gives numerical
//! evidence only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::Field;
use crate::linalg::{frobenius_sq, symmetric_eigenvalues};
use crate::measure::{Point, QuadratureGrid, MAX_DIM};
use crate::ou_flow::Evolved;
use crate::par;
use crate::stability::t_star;

/// Probes lie in `[-HULL, HULL]^d`.
pub const HULL: f64 = 6.0;

/// Probes with `h < SUPPORT_THRESHOLD * max h` are ignored.
pub const SUPPORT_THRESHOLD: f64 = 1e-10;

/// Pairs tested for midpoint concavity of `log h - |x|^2 / 2`.
pub const MIDPOINT_PAIRS: usize = 1024;

/// Relative tolerance of the midpoint test.
pub const MIDPOINT_TOL: f64 = 1e-8;

/// Base eigenvalue tolerance, scaled by `max(1, ||Hess log h||)`.
pub const EIGEN_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogConcavityCertificate {
    pub dim: usize,
    /// Probes evaluated (grid nodes in the hull plus quasi-random points).
    pub probe_count: usize,
    /// Probes above the support threshold.
    pub support_probes: usize,
    /// Smallest eigenvalue of `Hess(-log(h γ))` over the support probes.
    pub min_eigenvalue: f64,
    /// Tolerance at the worst probe.
    pub tolerance: f64,
    pub worst_probe: Vec<f64>,
    pub threshold: f64,
    /// Pairs of support probes in the midpoint-concavity test.
    pub midpoint_pairs: usize,
    /// Smallest relative `ℓ(mid) - (ℓ(a) + ℓ(b)) / 2` over those pairs.
    pub midpoint_gap: f64,
    pub verdict: Verdict,
}

impl LogConcavityCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points in `[-HULL, HULL]^d`, skipping the first few.
pub fn halton_probes(dim: usize, count: usize) -> Vec<Point> {
    const BASES: [usize; MAX_DIM] = [2, 3, 5];
    (0..count)
        .map(|k| {
            let mut p = [0.0; MAX_DIM];
            for (i, c) in p.iter_mut().enumerate().take(dim) {
                *c = HULL * (2.0 * radical_inverse(k + 17, BASES[i]) - 1.0);
            }
            p
        })
        .collect()
}

fn probe_set(dim: usize, grid: &QuadratureGrid, probes: usize) -> Vec<Point> {
    let mut pts: Vec<Point> = grid
        .nodes()
        .iter()
        .filter(|x| x[..dim].iter().all(|c| c.abs() <= HULL))
        .copied()
        .collect();
    pts.extend(halton_probes(dim, probes));
    pts
}

/// Default probe count `512 d`.
pub fn default_probes(dim: usize) -> usize {
    512 * dim
}

/// Certifies (or refutes) log-concavity of `h γ` with `h = u^2`.
pub fn certify<F: Field + ?Sized>(u: &F, grid: &QuadratureGrid, probes: usize) -> Result<LogConcavityCertificate> {
    let dim = u.dim();
    if grid.dim() != dim {
        return Err(Error::InvalidParameter(format!("grid dimension {} differs from d = {dim}", grid.dim())));
    }
    let pts = probe_set(dim, grid, probes);
    let jets = par::map_indexed(pts.len(), |i| u.density(&pts[i]));
    let hmax = jets.iter().map(|j| j.value).fold(0.0, f64::max);
    let threshold = SUPPORT_THRESHOLD * hmax;

    let mut support = 0;
    let mut worst = (f64::INFINITY, 0.0, [0.0; MAX_DIM]);
    let mut refuted = false;
    let mut marginal = false;
    for (p, j) in pts.iter().zip(&jets) {
        if !(j.value > 0.0 && j.value >= threshold) {
            continue;
        }
        support += 1;
        let lh = j.log_hessian(dim);
        let mut m = [[0.0; MAX_DIM]; MAX_DIM];
        for a in 0..dim {
            for b in 0..dim {
                m[a][b] = -lh[a][b] + if a == b { 1.0 } else { 0.0 };
            }
        }
        let ev = symmetric_eigenvalues(&m, dim)[0];
        let tol = EIGEN_TOL * frobenius_sq(&lh, dim).sqrt().max(1.0);
        if !ev.is_finite() {
            marginal = true;
            continue;
        }
        if ev < -10.0 * tol {
            refuted = true;
        } else if ev < -tol {
            marginal = true;
        }
        if ev < worst.0 {
            worst = (ev, tol, *p);
        }
    }
    let (midpoint_pairs, midpoint_gap) = midpoint_test(u, &pts, &jets, threshold);
    if midpoint_gap < -MIDPOINT_TOL {
        refuted = true;
    }
    let verdict = if support == 0 {
        Verdict::Inconclusive
    } else if refuted {
        Verdict::Refuted
    } else if marginal {
        Verdict::Inconclusive
    } else {
        Verdict::Certified
    };
    Ok(LogConcavityCertificate {
        dim,
        probe_count: pts.len(),
        support_probes: support,
        min_eigenvalue: worst.0,
        tolerance: worst.1,
        worst_probe: worst.2[..dim].to_vec(),
        threshold,
        midpoint_pairs,
        midpoint_gap,
        verdict,
    })
}

/// `ℓ(x) = log h(x) - |x|^2 / 2` must be midpoint concave. The local test
/// cannot see zeros of `h` between support probes; this one can.
fn midpoint_test<F: Field + ?Sized>(u: &F, pts: &[Point], jets: &[crate::functions::Jet], threshold: f64) -> (usize, f64) {
    let dim = u.dim();
    let ell = |x: &Point, h: f64| h.ln() - 0.5 * crate::measure::norm_sq(x, dim);
    let support: Vec<usize> = (0..pts.len()).filter(|&i| jets[i].value > 0.0 && jets[i].value >= threshold).collect();
    let n = support.len();
    if n < 2 {
        return (0, f64::INFINITY);
    }
    let pairs: Vec<(usize, usize)> = (0..n.min(MIDPOINT_PAIRS))
        .map(|k| (support[k * 7919 % n], support[(k * 104_729 + 1) % n]))
        .filter(|(a, b)| a != b)
        .collect();
    let gaps = par::map_indexed(pairs.len(), |k| {
        let (a, b) = pairs[k];
        let mut mid = [0.0; MAX_DIM];
        for i in 0..dim {
            mid[i] = 0.5 * (pts[a][i] + pts[b][i]);
        }
        let (la, lb) = (ell(&pts[a], jets[a].value), ell(&pts[b], jets[b].value));
        let hm = u.density(&mid).value;
        if !(hm > 0.0) {
            return f64::NEG_INFINITY;
        }
        let lm = ell(&mid, hm);
        (lm - 0.5 * (la + lb)) / (1.0 + lm.abs().max(la.abs()).max(lb.abs()))
    });
    (pairs.len(), gaps.into_iter().fold(f64::INFINITY, f64::min))
}

/// Certificates of `h(t) γ` along the flow. The initial datum must be
/// certified.
pub fn preservation_test<F: Field + Clone>(u0: &F, times: &[f64], grid: &QuadratureGrid) -> Result<Vec<LogConcavityCertificate>> {
    let probes = default_probes(u0.dim());
    let c0 = certify(u0, grid, probes)?;
    if !c0.is_certified() {
        return Err(Error::Precondition(format!("initial datum is not certified log-concave ({:?})", c0.verdict)));
    }
    times
        .iter()
        .map(|&t| {
            let e = Evolved::new(u0.clone(), t, grid.order())?;
            certify(&e, grid, probes)
        })
        .collect()
}

/// Evolves a compactly supported datum to `t⋆(R) = log sqrt(R^2 + 1)` and
/// certifies the result.
pub fn tstar_test<F: Field + Clone>(u0: &F, grid: &QuadratureGrid) -> Result<(f64, LogConcavityCertificate)> {
    let r = u0
        .support_radius()
        .ok_or_else(|| Error::Precondition("t⋆ test needs a compactly supported datum".into()))?;
    let ts = t_star(r);
    let e = Evolved::new(u0.clone(), ts, grid.order())?;
    Ok((ts, certify(&e, grid, default_probes(u0.dim()))?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::TestFunction;
    use crate::measure::{build_grid, GaussianMeasureSpec};

    fn grid(d: usize, n: usize) -> QuadratureGrid {
        build_grid(GaussianMeasureSpec::new(d).unwrap(), n).unwrap()
    }

    #[test]
    fn halton_is_deterministic_and_inside_hull() {
        let a = halton_probes(3, 100);
        assert_eq!(a, halton_probes(3, 100));
        assert!(a.iter().all(|p| p.iter().all(|c| c.abs() <= HULL)));
        assert!((radical_inverse(1, 2) - 0.5).abs() < 1e-16);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn constant_and_gaussian_certified() {
        let g = grid(2, 16);
        let c = certify(&TestFunction::constant(2, 1.0).unwrap(), &g, 256).unwrap();
        assert!(c.is_certified());
        assert!((c.min_eigenvalue - 1.0).abs() < 1e-12);
        let c = certify(&TestFunction::gaussian(2, 0.5).unwrap(), &g, 256).unwrap();
        assert!(c.is_certified());
        assert!((c.min_eigenvalue - 2.0).abs() < 1e-9, "{c:?}");
    }

    #[test]
    fn bimodal_refuted() {
        let g = grid(1, 32);
        let u = TestFunction::bimodal(1, 8.0, 2.5, 0.4).unwrap();
        let c = certify(&u, &g, 512).unwrap();
        assert_eq!(c.verdict, Verdict::Refuted);
        assert!(c.min_eigenvalue < -1.0);
    }

    #[test]
    fn bump_certified_on_support() {
        // q^4 with q = 1 - x^2/R^2: -log h is convex on the open support.
        let g = grid(1, 32);
        let c = certify(&TestFunction::bump(1, 2.0).unwrap(), &g, 512).unwrap();
        assert!(c.is_certified(), "{c:?}");
    }

    #[test]
    fn interior_zero_refuted() {
        // h = (1.1 - 0.1 x^2)^2 vanishes at |x| = sqrt(11).
        let g = grid(1, 64);
        let u = TestFunction::hermite_1d(&[1.0, 0.0, -0.1]).unwrap();
        let c = certify(&u, &g, 512).unwrap();
        assert_eq!(c.verdict, Verdict::Refuted, "{c:?}");
        assert!(c.midpoint_gap < 0.0);
    }

    #[test]
    fn tstar_for_small_radius() {
        let g = grid(1, 48);
        let (ts, c) = tstar_test(&TestFunction::bump(1, 1.0).unwrap(), &g).unwrap();
        assert!((ts - 2f64.sqrt().ln()).abs() < 1e-15);
        assert!(c.is_certified(), "{c:?}");
    }
}
