//! Mechanics of a single sPAM pouch chain.
//!
//! The inflated pouch membrane takes the shape of an elliptic-integral
//! profile parameterized by `(m, phi_r)`. For a contraction ratio `gamma`
//! the pair solves
//!
//! ```text
//! F(phi_r | m) / (sqrt(m) cos(phi_r)) = l/r
//! E(phi_r | m) / (sqrt(m) cos(phi_r)) = (l/r)(1 - gamma/2)
//! ```
//!
//! and the axial force is `pi P_g r^2 (1 - 2m) / (2 m cos^2(phi_r))`,
//! valid under the zero-parallel-force condition
//! `2r / cos(phi_r) < 2w / pi`.

use crate::elliptic::{ellip_e, ellip_f, EllipticError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this contraction the flat-pouch limit is numerically singular
/// (m -> 0, phi_r -> 0); force queries clamp gamma here.
pub const GAMMA_FLOOR: f64 = 1e-4;

/// Relative residual tolerance for the membrane system.
pub const MEMBRANE_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PpamError {
    #[error("invalid actuator geometry: {0}")]
    InvalidGeometry(String),
    #[error("contraction ratio {gamma} outside (0, {gamma_zf}) for this geometry")]
    GammaOutOfRange { gamma: f64, gamma_zf: f64 },
    #[error("membrane solver did not converge (l/r = {l_over_r}, gamma = {gamma})")]
    NoConvergence { l_over_r: f64, gamma: f64 },
    #[error(
        "zero-parallel-force condition violated: 2r/cos(phi_r) = {lhs:.6e} >= 2w/pi = {rhs:.6e}; \
         requires layflat width >= {required_min_width:.6e} m"
    )]
    ConditionViolated {
        lhs: f64,
        rhs: f64,
        required_min_width: f64,
    },
    #[error("target force {target} N exceeds attainable maximum {max_force} N at this pressure")]
    UnreachableForce { target: f64, max_force: f64 },
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
}

/// Geometry of one pouch: fiber length `l`, constriction radius `r`,
/// lay-flat width `w`. The ratio `l/r` governs the membrane system.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorGeometry {
    /// Pouch fiber length, m.
    pub fiber_length: f64,
    /// Tie-off constriction radius, m.
    pub constriction_radius: f64,
    /// Lay-flat tubing width, m.
    pub layflat_width: f64,
    /// Pouches per sPAM chain.
    pub pouches_per_spam: u32,
}

impl ActuatorGeometry {
    pub fn validate(&self) -> Result<(), PpamError> {
        if self.fiber_length <= 0.0 || self.constriction_radius <= 0.0 || self.layflat_width <= 0.0
        {
            return Err(PpamError::InvalidGeometry(
                "fiber_length, constriction_radius, layflat_width must be positive".into(),
            ));
        }
        if self.l_over_r() <= std::f64::consts::FRAC_PI_2 {
            return Err(PpamError::InvalidGeometry(format!(
                "l/r = {} must exceed pi/2 for the membrane system to be solvable",
                self.l_over_r()
            )));
        }
        if self.pouches_per_spam < 1 {
            return Err(PpamError::InvalidGeometry(
                "pouches_per_spam must be >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn l_over_r(&self) -> f64 {
        self.fiber_length / self.constriction_radius
    }
}

/// Solution of the membrane system: elliptic parameter `m` in (0,1) and
/// amplitude angle `phi_r` in (0, pi/2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MembraneSolution {
    pub m: f64,
    pub phi_r: f64,
}

fn ratio_f(phi: f64, m: f64) -> Result<f64, EllipticError> {
    Ok(ellip_f(phi, m)? / (m.sqrt() * phi.cos()))
}

fn ratio_e(phi: f64, m: f64) -> Result<f64, EllipticError> {
    Ok(ellip_e(phi, m)? / (m.sqrt() * phi.cos()))
}

const PHI_LO: f64 = 1e-12;
const PHI_HI: f64 = std::f64::consts::FRAC_PI_2 - 1e-11;
const M_LO: f64 = 1e-12;
const M_HI: f64 = 1.0 - 1e-11;

/// Solve the first membrane equation for phi at fixed m by bisection.
/// The ratio F/(sqrt(m) cos phi) increases monotonically from 0 to
/// infinity on (0, pi/2).
fn phi_for_m(m: f64, l_over_r: f64) -> Result<f64, PpamError> {
    let mut lo = PHI_LO;
    let mut hi = PHI_HI;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ratio_f(mid, m)? < l_over_r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn residuals(m: f64, phi: f64, l_over_r: f64, gamma: f64) -> Result<(f64, f64), EllipticError> {
    Ok((
        ratio_f(phi, m)? - l_over_r,
        ratio_e(phi, m)? - l_over_r * (1.0 - 0.5 * gamma),
    ))
}

/// Solve the membrane system for `(m, phi_r)` at a given `l/r` and
/// contraction ratio.
///
/// Damped Newton with a numerical Jacobian from the initial guess
/// `(0.25, pi/4)`; falls back to nested bisection (outer on m via the
/// second equation, inner on phi via the first) if Newton stalls.
pub fn solve_membrane(l_over_r: f64, gamma: f64) -> Result<MembraneSolution, PpamError> {
    let gamma_zf = zero_force_gamma(l_over_r)?;
    if !(0.0 < gamma && gamma < gamma_zf) {
        return Err(PpamError::GammaOutOfRange { gamma, gamma_zf });
    }
    let tol = MEMBRANE_TOL * l_over_r.max(1.0);
    if let Some(sol) = newton_membrane(l_over_r, gamma, tol)? {
        return Ok(sol);
    }
    bisect_membrane(l_over_r, gamma, tol)
}

fn newton_membrane(
    l_over_r: f64,
    gamma: f64,
    tol: f64,
) -> Result<Option<MembraneSolution>, PpamError> {
    let mut m: f64 = 0.25;
    let mut phi = std::f64::consts::FRAC_PI_4;
    let (mut r1, mut r2) = residuals(m, phi, l_over_r, gamma)?;
    for _ in 0..100 {
        if r1.abs() < tol && r2.abs() < tol {
            return Ok(Some(MembraneSolution { m, phi_r: phi }));
        }
        let hm = 1e-7 * m.max(1e-3);
        let hp = 1e-7;
        let (a1, a2) = residuals((m + hm).min(M_HI), phi, l_over_r, gamma)?;
        let (b1, b2) = residuals((m - hm).max(M_LO), phi, l_over_r, gamma)?;
        let (c1, c2) = residuals(m, (phi + hp).min(PHI_HI), l_over_r, gamma)?;
        let (d1, d2) = residuals(m, (phi - hp).max(PHI_LO), l_over_r, gamma)?;
        let j11 = (a1 - b1) / (2.0 * hm);
        let j21 = (a2 - b2) / (2.0 * hm);
        let j12 = (c1 - d1) / (2.0 * hp);
        let j22 = (c2 - d2) / (2.0 * hp);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-30 || !det.is_finite() {
            return Ok(None);
        }
        let dm = -(r1 * j22 - r2 * j12) / det;
        let dphi = -(j11 * r2 - j21 * r1) / det;

        // Backtrack until the residual norm shrinks.
        let norm0 = r1.hypot(r2);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let m_new = (m + step * dm).clamp(M_LO, M_HI);
            let phi_new = (phi + step * dphi).clamp(PHI_LO, PHI_HI);
            let (n1, n2) = residuals(m_new, phi_new, l_over_r, gamma)?;
            if n1.hypot(n2) < norm0 {
                m = m_new;
                phi = phi_new;
                r1 = n1;
                r2 = n2;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Nested-bisection fallback: for each trial m, the first equation fixes
/// phi; the second-equation ratio E/(sqrt(m) cos phi) then decreases
/// monotonically in m from l/r toward the target.
fn bisect_membrane(l_over_r: f64, gamma: f64, tol: f64) -> Result<MembraneSolution, PpamError> {
    let target = l_over_r * (1.0 - 0.5 * gamma);
    let mut lo = M_LO;
    let mut hi = M_HI;
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let phi = phi_for_m(mid, l_over_r)?;
        if ratio_e(phi, mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let m = 0.5 * (lo + hi);
    let phi = phi_for_m(m, l_over_r)?;
    let (r1, r2) = residuals(m, phi, l_over_r, gamma)?;
    if r1.abs() < tol * 100.0 && r2.abs() < tol * 100.0 {
        Ok(MembraneSolution { m, phi_r: phi })
    } else {
        Err(PpamError::NoConvergence { l_over_r, gamma })
    }
}

/// The pressure-independent contraction ratio at which the force
/// vanishes: m = 1/2 in the force law, with phi_r fixed by the first
/// membrane equation, giving `gamma_zf = 2 (1 - E(phi_r|1/2) / F(phi_r|1/2))`.
pub fn zero_force_gamma(l_over_r: f64) -> Result<f64, PpamError> {
    if l_over_r <= 0.0 || !l_over_r.is_finite() {
        return Err(PpamError::InvalidGeometry(format!(
            "l/r = {l_over_r} not solvable"
        )));
    }
    let phi = phi_for_m(0.5, l_over_r)?;
    let f = ellip_f(phi, 0.5)?;
    let e = ellip_e(phi, 0.5)?;
    Ok(2.0 * (1.0 - e / f))
}

/// Axial force produced by one pouch at gauge pressure `p_gauge` and
/// contraction `gamma`. Enforces the zero-parallel-force condition at the
/// solved phi_r.
pub fn force(p_gauge: f64, geom: &ActuatorGeometry, gamma: f64) -> Result<f64, PpamError> {
    geom.validate()?;
    let l_over_r = geom.l_over_r();
    let gamma_zf = zero_force_gamma(l_over_r)?;
    if !(0.0..=gamma_zf + 1e-12).contains(&gamma) {
        return Err(PpamError::GammaOutOfRange { gamma, gamma_zf });
    }
    if (gamma - gamma_zf).abs() <= 1e-12 {
        return Ok(0.0);
    }
    let g = gamma.max(GAMMA_FLOOR);
    let sol = solve_membrane(l_over_r, g)?;
    check_zero_parallel_force(geom, sol.phi_r)?;
    let r = geom.constriction_radius;
    let cos_phi = sol.phi_r.cos();
    Ok(std::f64::consts::PI * p_gauge * r * r * (1.0 - 2.0 * sol.m)
        / (2.0 * sol.m * cos_phi * cos_phi))
}

fn check_zero_parallel_force(geom: &ActuatorGeometry, phi_r: f64) -> Result<(), PpamError> {
    let lhs = 2.0 * geom.constriction_radius / phi_r.cos();
    let rhs = 2.0 * geom.layflat_width / std::f64::consts::PI;
    if lhs >= rhs {
        Err(PpamError::ConditionViolated {
            lhs,
            rhs,
            required_min_width: std::f64::consts::PI * geom.constriction_radius / phi_r.cos(),
        })
    } else {
        Ok(())
    }
}

/// Invert the force-contraction curve: find gamma with
/// `force(p_gauge, geom, gamma) = f_target` by bisection on the
/// monotone-decreasing force curve. Tolerance 1e-6 N.
pub fn gamma_from_force(
    f_target: f64,
    p_gauge: f64,
    geom: &ActuatorGeometry,
) -> Result<f64, PpamError> {
    geom.validate()?;
    let gamma_zf = zero_force_gamma(geom.l_over_r())?;
    if f_target <= 0.0 {
        return Ok(gamma_zf);
    }
    let f_max = force(p_gauge, geom, GAMMA_FLOOR)?;
    if f_target > f_max {
        return Err(PpamError::UnreachableForce {
            target: f_target,
            max_force: f_max,
        });
    }
    let mut lo = GAMMA_FLOOR;
    let mut hi = gamma_zf;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        let f_mid = force(p_gauge, geom, mid)?;
        if (f_mid - f_target).abs() < 1e-7 {
            return Ok(mid);
        }
        if f_mid > f_target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn geom() -> ActuatorGeometry {
        ActuatorGeometry {
            fiber_length: 0.04,
            constriction_radius: 0.004,
            layflat_width: 0.06,
            pouches_per_spam: 5,
        }
    }

    #[test]
    fn membrane_residuals_small() {
        let sol = solve_membrane(10.0, 0.2).unwrap();
        let (r1, r2) = residuals(sol.m, sol.phi_r, 10.0, 0.2).unwrap();
        assert!(r1.abs() < 1e-8 * 10.0, "r1 = {r1}");
        assert!(r2.abs() < 1e-8 * 10.0, "r2 = {r2}");
        // frozen from an independent high-precision nested-bisection run
        assert_relative_eq!(sol.m, 0.243859945938, max_relative = 1e-8);
        assert_relative_eq!(sol.phi_r, 1.29129694779, max_relative = 1e-8);
    }

    #[test]
    fn zero_force_gamma_matches_frozen_value() {
        // l/r = 10, frozen from high-precision evaluation
        assert_relative_eq!(zero_force_gamma(10.0).unwrap(), 0.454827524186, max_relative = 1e-9);
    }

    #[test]
    fn zero_force_gamma_asymptote() {
        // l/r -> inf: 2 (1 - E(1/2)/K(1/2))
        let g = zero_force_gamma(1e7).unwrap();
        assert_relative_eq!(g, 0.5430534189, epsilon = 1e-6);
    }

    #[test]
    fn force_is_zero_at_gamma_zf() {
        let g = geom();
        let gzf = zero_force_gamma(g.l_over_r()).unwrap();
        assert_eq!(force(17e3, &g, gzf).unwrap(), 0.0);
    }

    #[test]
    fn force_linear_in_pressure() {
        let g = geom();
        let f1 = force(10e3, &g, 0.2).unwrap();
        let f2 = force(20e3, &g, 0.2).unwrap();
        assert_relative_eq!(f2, 2.0 * f1, max_relative = 1e-12);
    }

    #[test]
    fn force_matches_frozen_oracle_case() {
        // P = 20 kPa, l/r = 10, r = 4 mm, gamma = 0.1; frozen from the
        // nested-bisection + force-law pipeline at high precision
        let g = geom();
        let f = force(20e3, &g, 0.1).unwrap();
        assert_relative_eq!(f, 23.4562279057, max_relative = 1e-6);
    }

    #[test]
    fn gamma_floor_clamps_small_contraction() {
        let g = geom();
        let f_floor = force(20e3, &g, GAMMA_FLOOR).unwrap();
        let f_below = force(20e3, &g, 1e-6).unwrap();
        assert_eq!(f_floor, f_below);
    }

    #[test]
    fn condition_violation_reports_min_width() {
        let narrow = ActuatorGeometry {
            layflat_width: 0.012,
            ..geom()
        };
        match force(20e3, &narrow, 0.1) {
            Err(PpamError::ConditionViolated {
                required_min_width, ..
            }) => assert!(required_min_width > narrow.layflat_width),
            other => panic!("expected condition violation, got {other:?}"),
        }
    }

    #[test]
    fn gamma_from_force_round_trip() {
        let g = geom();
        let f = force(20e3, &g, 0.15).unwrap();
        let gamma = gamma_from_force(f, 20e3, &g).unwrap();
        assert!((gamma - 0.15).abs() < 1e-6);
    }

    #[test]
    fn gamma_from_force_zero_target_is_gamma_zf() {
        let g = geom();
        let gzf = zero_force_gamma(g.l_over_r()).unwrap();
        assert_eq!(gamma_from_force(0.0, 20e3, &g).unwrap(), gzf);
    }

    #[test]
    fn unreachable_force_reports_maximum() {
        let g = geom();
        match gamma_from_force(5.0, 100.0, &g) {
            Err(PpamError::UnreachableForce { max_force, .. }) => {
                assert!(max_force < 5.0);
            }
            other => panic!("expected unreachable force, got {other:?}"),
        }
    }

    #[test]
    fn force_strictly_decreasing_in_gamma() {
        let g = geom();
        let gzf = zero_force_gamma(g.l_over_r()).unwrap();
        let mut prev = f64::INFINITY;
        for i in 1..50 {
            let gamma = gzf * i as f64 / 50.0;
            let f = force(15e3, &g, gamma).unwrap();
            assert!(f < prev, "not decreasing at gamma = {gamma}");
            prev = f;
        }
    }

    #[test]
    fn gamma_out_of_range_rejected() {
        assert!(matches!(
            solve_membrane(10.0, 0.6),
            Err(PpamError::GammaOutOfRange { .. })
        ));
        assert!(matches!(
            solve_membrane(10.0, 0.0),
            Err(PpamError::GammaOutOfRange { .. })
        ));
    }
}
