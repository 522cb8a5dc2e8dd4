//! Independent numerical oracles for the integration suites.
//!
//! Everything here is deliberately implemented with different methods
//! than the library: elliptic integrals by adaptive Simpson quadrature
//! instead of Carlson symmetric forms, and the membrane system by pure
//! nested bisection on the quadrature ratios.

#![allow(dead_code)]

/// Adaptive Simpson quadrature to an absolute tolerance.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth > 50 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, flm, 0.5 * tol, depth + 1)
                + recurse(f, m, fm, b, fb, right, frm, 0.5 * tol, depth + 1)
        }
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, fm, tol, 0)
}

/// Incomplete elliptic integral of the first kind, parameter form
/// `F(phi | m)`, by quadrature.
pub fn ellip_f_quad(phi: f64, m: f64) -> f64 {
    adaptive_simpson(
        &|t: f64| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt(),
        0.0,
        phi,
        1e-11,
    )
}

/// Incomplete elliptic integral of the second kind `E(phi | m)` by
/// quadrature.
pub fn ellip_e_quad(phi: f64, m: f64) -> f64 {
    adaptive_simpson(
        &|t: f64| (1.0 - m * t.sin().powi(2)).sqrt(),
        0.0,
        phi,
        1e-11,
    )
}

/// Zero-force contraction ratio by quadrature: at `m = 1/2` solve the
/// first membrane equation for `phi`, then `gamma = 2 (1 - E/F)`.
pub fn zero_force_gamma_quad(l_over_r: f64) -> f64 {
    let m = 0.5;
    let phi = bisect(
        |phi| ellip_f_quad(phi, m) / (m.sqrt() * phi.cos()) - l_over_r,
        1e-9,
        std::f64::consts::FRAC_PI_2 - 1e-12,
    );
    2.0 * (1.0 - ellip_e_quad(phi, m) / ellip_f_quad(phi, m))
}

/// Root of a continuous increasing-through-zero function by bisection.
fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let (flo, fhi) = (f(lo), f(hi));
    assert!(
        flo <= 0.0 && fhi >= 0.0,
        "bisect: no bracket ({flo}, {fhi})"
    );
    for _ in 0..45 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Membrane system solved by nested bisection on quadrature ratios.
///
/// Inner loop: for a trial `m`, `F(phi|m)/(sqrt(m) cos(phi))` increases
/// from 0 to infinity in `phi`, so bisection pins `phi(m)`. Outer loop:
/// `E(phi(m)|m)/(sqrt(m) cos(phi(m)))` decreases in `m`, so bisection
/// pins `m` from the second equation.
pub fn membrane_oracle(l_over_r: f64, gamma: f64) -> (f64, f64) {
    let phi_of_m = |m: f64| {
        bisect(
            |phi| ellip_f_quad(phi, m) / (m.sqrt() * phi.cos()) - l_over_r,
            1e-12,
            std::f64::consts::FRAC_PI_2 - 1e-12,
        )
    };
    let target = l_over_r * (1.0 - 0.5 * gamma);
    // decreasing in m: negate to feed the increasing-root bisection.
    // The solution for gamma below the zero-force ratio lies in
    // (0, 1/2], which also keeps the quadrature integrand bounded.
    let m = bisect(
        |m| {
            let phi = phi_of_m(m);
            -(ellip_e_quad(phi, m) / (m.sqrt() * phi.cos()) - target)
        },
        1e-9,
        0.5 + 1e-6,
    );
    (m, phi_of_m(m))
}

/// Random enclosure view-factor matrix with exact reciprocity and unit
/// row sums, by symmetric Sinkhorn scaling of a random positive matrix.
pub fn random_enclosure(
    n: usize,
    areas: &[f64],
    raw: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    // symmetrize the raw positives into exchange areas s_ij = s_ji
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            s[i][j] = 0.5 * (raw[i][j] + raw[j][i]);
        }
    }
    // scale s -> diag(d) s diag(d) so row sums match the areas
    let mut d = vec![1.0; n];
    for _ in 0..5000 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            let row: f64 = (0..n).map(|j| d[i] * s[i][j] * d[j]).sum();
            worst = worst.max((row - areas[i]).abs());
            d[i] *= (areas[i] / row).sqrt();
        }
        if worst < 1e-14 {
            break;
        }
    }
    let mut f = vec![vec![0.0; n]; n];
    for i in 0..n {
        let row: f64 = (0..n).map(|j| d[i] * s[i][j] * d[j]).sum();
        for j in 0..n {
            // renormalize the row exactly so row sums are 1 in f
            f[i][j] = d[i] * s[i][j] * d[j] / row;
        }
    }
    f
}
