//! Closed forms and brute-force integration checked against the library.

use glsl_core::functionals::{ckp_gap, l1_deviation, report};
use glsl_core::functions::{l2_norm_sq, normalize, Field, TestFunction};
use glsl_core::measure::{build_grid, GaussianMeasureSpec, QuadratureGrid};
use glsl_core::ou_flow::{evolve, Evolved};
use glsl_core::stability::{c_of_r, phi, phi_inv, psi, t_star, tau, C_STAR};

fn grid(d: usize, n: usize) -> QuadratureGrid {
    build_grid(GaussianMeasureSpec::new(d).unwrap(), n).unwrap()
}

/// Composite Simpson rule on `[a, b]`.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const N: usize = 40_000;
    let h = (b - a) / N as f64;
    let mut s = f(a) + f(b);
    for i in 1..N {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `∫ f dγ` in one dimension, truncated to `[-14, 14]`.
fn simpson_gamma(f: impl Fn(f64) -> f64) -> f64 {
    simpson(|x| f(x) * (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(), -14.0, 14.0)
}

fn xlogx(h: f64) -> f64 {
    if h > 0.0 {
        h * h.ln()
    } else {
        0.0
    }
}

#[test]
fn gauss_hermite_moments() {
    let g = grid(1, 24);
    let double_factorial = [1.0, 1.0, 3.0, 15.0, 105.0, 945.0, 10395.0];
    for (k, want) in double_factorial.iter().enumerate() {
        let got = g.integrate(|x| x[0].powi(2 * k as i32)).unwrap();
        assert!((got - want).abs() <= 1e-12 * want, "E x^{} = {got}", 2 * k);
    }
    let g3 = grid(3, 32);
    let a = [0.3, -0.5, 0.8];
    let got = g3.integrate(|x| (a[0] * x[0] + a[1] * x[1] + a[2] * x[2]).exp()).unwrap();
    let want = (0.5 * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2])).exp();
    assert!((got / want - 1.0).abs() < 1e-13);
}

/// `u^2 γ = N(0, σ² I)`: `𝓔 = d/2 (σ² - 1 - log σ²)`, `𝓘 = d/4 (σ² - 1)² / σ²`.
#[test]
fn gaussian_family_closed_form() {
    for d in 1..=3 {
        let g = grid(d, if d == 3 { 48 } else { 64 });
        for s2 in [0.3, 0.6, 1.0, 1.4, 1.9] {
            let u = normalize(&TestFunction::gaussian(d, s2).unwrap(), &g).unwrap();
            let r = report(&u, &g).unwrap();
            let e = 0.5 * d as f64 * (s2 - 1.0 - s2.ln());
            let i = 0.25 * d as f64 * (s2 - 1.0).powi(2) / s2;
            // Exact to rounding where resolved; otherwise inside the error estimate.
            let tol = 1e-10 + 2.0 * r.quadrature_error;
            assert!((r.entropy - e).abs() < 1e-10 + 2.0 * r.entropy_error, "d = {d}, σ² = {s2}: {} vs {e}", r.entropy);
            assert!((r.fisher - i).abs() < 1e-10 + 2.0 * r.fisher_error, "d = {d}, σ² = {s2}: {} vs {i}", r.fisher);
            assert!((r.deficit - (i - 0.5 * e)).abs() < tol);
            assert!((r.second_moment - d as f64 * s2).abs() < 1e-10);
        }
    }
}

#[test]
fn affine_entropy_against_simpson() {
    let g = grid(1, 64);
    assert!(TestFunction::affine(1, 0.5).is_err(), "zero at x = -2 lies inside the admission hull");
    for eps in [0.01, 0.05, 0.2, 0.3] {
        let u = normalize(&TestFunction::affine(1, eps).unwrap(), &g).unwrap();
        let r = report(&u, &g).unwrap();
        let n = 1.0 + eps * eps;
        let e = simpson_gamma(|x| xlogx((1.0 + eps * x).powi(2) / n));
        // The zero of h at x = -1/ε makes h log h non-smooth; the estimate
        // must still cover the error.
        assert!((r.entropy - e).abs() < 1e-11 + r.entropy_error, "ε = {eps}: {} vs {e} ({:e})", r.entropy, r.entropy_error);
        assert!((r.fisher - eps * eps / n).abs() < 1e-14);
    }
}

#[test]
fn bump_functionals_against_simpson() {
    let g = grid(1, 64);
    for radius in [1.0, 2.0, 4.0] {
        let raw = TestFunction::bump(1, radius).unwrap();
        let q = |x: f64| (1.0 - x * x / (radius * radius)).max(0.0);
        let m = simpson_gamma(|x| q(x).powi(4));
        assert!((l2_norm_sq(&raw, &g).unwrap() / m - 1.0).abs() < 1e-8);
        let u = normalize(&raw, &g).unwrap();
        let r = report(&u, &g).unwrap();
        let e = simpson_gamma(|x| xlogx(q(x).powi(4) / m));
        // |u'|^2 for u = q^2 / sqrt(m): (4 x q / R^2)^2 / m.
        let i = simpson_gamma(|x| (4.0 * x * q(x) / (radius * radius)).powi(2) / m);
        assert!((r.entropy - e).abs() < 1e-7, "R = {radius}: {} vs {e}", r.entropy);
        assert!((r.fisher - i).abs() < 1e-7 * i, "R = {radius}: {} vs {i}", r.fisher);
    }
}

/// `∫|h - 1| dγ` by brute force (split at the crossings `h = 1`) versus the
/// CKP gap `𝓔 - (∫|h-1|)^2 / 4`.
#[test]
fn ckp_gap_against_simpson() {
    let g = grid(1, 64);
    for s2 in [0.5, 1.5] {
        let u = normalize(&TestFunction::gaussian(1, s2).unwrap(), &g).unwrap();
        let h = |x: f64| (-(x * x) / (2.0 * s2) + 0.5 * x * x).exp() / s2.sqrt();
        // (h - 1) changes sign at |x| = xc; ∫(h - 1) dγ = 0 gives
        // ∫|h - 1| = 2 |∫_{|x| < xc} (h - 1) dγ| = 2 |P(|X| < xc / σ) - P(|Z| < xc)|.
        let xc = (s2.ln() / (1.0 - 1.0 / s2)).sqrt();
        let inner = |c: f64| simpson(|x| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt(), -c, c);
        let l1 = 2.0 * (inner(xc / s2.sqrt()) - inner(xc)).abs();
        let l1_direct = simpson_gamma(|x| (h(x) - 1.0).abs());
        assert!((l1 - l1_direct).abs() < 1e-5, "{l1} vs {l1_direct}");
        let want = 0.5 * (s2 - 1.0 - s2.ln()) - 0.25 * l1 * l1;
        let l1_lib = l1_deviation(&u, &g).unwrap();
        assert!((l1_lib.value - l1).abs() < 1e-6 && l1_lib.error < 1e-8, "{l1_lib:?} vs {l1}");
        let gap = ckp_gap(&u, &g).unwrap();
        assert!((gap.value - want).abs() < 1e-6, "{gap:?} vs {want}");
    }
}

/// The flow maps `N(0, σ²)` to `N(0, 1 + (σ² - 1) e^{-2t})`.
#[test]
fn mehler_flow_of_gaussian() {
    for d in 1..=2 {
        let g = grid(d, if d == 1 { 96 } else { 32 });
        for s2 in [0.4, 1.6] {
            let u = normalize(&TestFunction::gaussian(d, s2).unwrap(), &g).unwrap();
            for t in [0.1f64, 0.5, 1.5] {
                let st = (1.0 + (s2 - 1.0) * (-2.0 * t).exp()).max(0.0);
                let s = evolve(u.clone(), t, &g).unwrap().diagnostics;
                let e = 0.5 * d as f64 * (st - 1.0 - st.ln());
                let i = 0.25 * d as f64 * (st - 1.0).powi(2) / st;
                assert!((s.entropy - e).abs() < 1e-9, "d = {d}, σ² = {s2}, t = {t}: {} vs {e}", s.entropy);
                assert!((s.fisher - i).abs() < 1e-9);
            }
        }
    }
}

/// `h0 = (1 + b x)^2 = (1 + b²) + 2b He_1 + b² He_2` and `P_t He_k = e^{-kt} He_k`.
#[test]
fn mehler_flow_on_hermite_polynomials() {
    let b = 0.3;
    let u = TestFunction::hermite_1d(&[1.0, b]).unwrap();
    for t in [0.05f64, 0.3, 1.0, 3.0] {
        let e = Evolved::new(u.clone(), t, 48).unwrap();
        for x in [-3.0, -1.0, 0.0, 0.5, 2.5] {
            let want = 1.0 + b * b + 2.0 * b * (-t).exp() * x + b * b * (-2.0 * t).exp() * (x * x - 1.0);
            let j = e.density(&[x, 0.0, 0.0]);
            assert!((j.value - want).abs() < 1e-12, "t = {t}, x = {x}: {} vs {want}", j.value);
            let slope = 2.0 * b * (-t).exp() + 2.0 * b * b * (-2.0 * t).exp() * x;
            assert!((j.grad[0] - slope).abs() < 1e-12);
        }
    }
}

/// Tilts stay tilts: `h_t = exp(-2 a_t·x - 2|a_t|^2)` with `a_t = e^{-t} a`.
#[test]
fn tilt_stays_on_the_manifold() {
    let g = grid(2, 32);
    let u = normalize(&TestFunction::tilt(&[0.6, -0.4], 1.0).unwrap(), &g).unwrap();
    for t in [0.2f64, 1.0] {
        let s = evolve(u.clone(), t, &g).unwrap();
        assert!(s.diagnostics.deficit.abs() < 1e-10);
        let a: Vec<f64> = [0.6, -0.4].iter().map(|v| v * (-t).exp()).collect();
        let x = [0.7, -1.1, 0.0];
        let want = (-2.0 * (a[0] * x[0] + a[1] * x[1]) - 2.0 * (a[0] * a[0] + a[1] * a[1])).exp();
        assert!((s.field.density(&x).value / want - 1.0).abs() < 1e-12);
        let a2 = a[0] * a[0] + a[1] * a[1];
        assert!((s.diagnostics.entropy - 2.0 * a2).abs() < 1e-10);
    }
}

#[test]
fn constants_by_hand() {
    assert_eq!(C_STAR, 1729.0 / 1728.0);
    for (r, ts) in [(1.0, 0.5 * 2f64.ln()), (2.0, 0.5 * 5f64.ln()), (3.0, 0.5 * 10f64.ln())] {
        assert!((t_star(r) - ts).abs() < 1e-15);
        assert!((tau(ts) - 0.5 * r * r).abs() < 1e-13);
    }
    assert!((c_of_r(0.0) - C_STAR).abs() < 1e-16);
    assert!((c_of_r(2.0) - (1.0 + (1.0 / 1728.0) / (1.0 + 4.0 * C_STAR))).abs() < 1e-16);
    // d = 2: ψ(s) = s - log(1 + 2s)/2, φ(s) = (e^s - 1)/2.
    assert!((psi(1.5, 2) - (1.5 - 0.5 * 4f64.ln())).abs() < 1e-15);
    assert!((phi(1.0, 2) - 0.5 * (1f64.exp() - 1.0)).abs() < 1e-15);
    assert!((phi_inv(0.5 * (1f64.exp() - 1.0), 2) - 1.0).abs() < 1e-14);
}
