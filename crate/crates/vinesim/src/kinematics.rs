//! Trapezoidal-chain shape model: interface angles from contraction
//! ratios, side polylines, the spine force balance, and the thermometry
//! inverse.
//!
//! The robot is discretized into N trapezoids. Side 1 is the heat-source
//! side; an interface angle above pi/2 bends the chain toward side 1.
//! The recursion for the i-th interface is
//!
//! ```text
//! l0 (1 - gamma_{i,2}) + d/tan(theta_{i-1}) + d/tan(theta_i) = l0 (1 - gamma_{i,1})
//! ```
//!
//! initialized with theta_0 = pi/2.

use crate::geom::Vec2;
use crate::ppam::{self, ActuatorGeometry, PpamError};
use crate::thermo::{self, FluidState, ThermoError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("segment {index}: required offset |d/tan(theta)| = {offset:.4e} m exceeds segment length {limit:.4e} m (self-intersecting trapezoid)")]
    GeometricInfeasibility {
        index: usize,
        offset: f64,
        limit: f64,
    },
    #[error("invalid chain geometry: {0}")]
    InvalidGeometry(String),
    #[error("contraction {gamma} not reachable at any admissible temperature in [{lo}, {hi}] K")]
    UnreachableContraction { gamma: f64, lo: f64, hi: f64 },
    #[error(transparent)]
    Ppam(#[from] PpamError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
}

/// Pneumatic backbone configuration. The inflated cross-section is a
/// circle whose circumference is twice the lay-flat width, so
/// `A = pi (w / pi)^2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpineConfig {
    /// Spine gauge pressure, Pa.
    pub gauge_pressure: f64,
    /// Lay-flat width of the spine tube, m.
    pub layflat_width: f64,
}

impl SpineConfig {
    pub fn cross_section(&self) -> f64 {
        let r = self.layflat_width / std::f64::consts::PI;
        std::f64::consts::PI * r * r
    }

    /// Equilibrium force carried by each sPAM: `P_g A / 2`.
    pub fn spam_equilibrium_force(&self) -> f64 {
        0.5 * self.gauge_pressure * self.cross_section()
    }
}

/// Free segment length and sPAM spacing; theta_0 is fixed at pi/2.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainGeometry {
    /// Free length of one segment, m.
    pub l0: f64,
    /// Spacing between the two sPAM chains, m.
    pub d: f64,
}

impl ChainGeometry {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.l0 <= 0.0 || self.d <= 0.0 {
            return Err(KinematicsError::InvalidGeometry(
                "l0 and d must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-trapezoid state: side contractions, interface angle and side
/// temperatures. Side 1 is the heater side.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmentState {
    pub gamma_1: f64,
    pub gamma_2: f64,
    /// Interface angle theta_i, rad.
    pub theta: f64,
    pub temp_1: f64,
    pub temp_2: f64,
}

/// Solve the interface-angle recursion sequentially for each segment.
///
/// `gammas[i] = (gamma_1, gamma_2)` for segment i+1; returns theta_1..N.
/// gamma_1 > gamma_2 yields theta > pi/2 (bend toward side 1).
pub fn segment_angles(
    gammas: &[(f64, f64)],
    geom: &ChainGeometry,
) -> Result<Vec<f64>, KinematicsError> {
    geom.validate()?;
    let mut thetas = Vec::with_capacity(gammas.len());
    let mut c_prev = 0.0; // d / tan(theta_0) with theta_0 = pi/2
    for (i, &(g1, g2)) in gammas.iter().enumerate() {
        let c = geom.l0 * (g2 - g1) - c_prev;
        let limit = geom.l0 * (1.0 - g1.max(g2));
        if c.abs() >= limit {
            return Err(KinematicsError::GeometricInfeasibility {
                index: i + 1,
                offset: c.abs(),
                limit,
            });
        }
        let theta = if c == 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            let t = (geom.d / c).atan();
            if t < 0.0 {
                t + std::f64::consts::PI
            } else {
                t
            }
        };
        thetas.push(theta);
        c_prev = c;
    }
    Ok(thetas)
}

/// Constant-curvature variant: a single interface angle shared by every
/// segment, from the uniform relation `2 d / tan(theta) = l0 (gamma_2 - gamma_1)`
/// averaged over the chain. Offered for comparison with the raw
/// alternating solution; neither is asserted to match hardware.
pub fn segment_angles_constant_curvature(
    gammas: &[(f64, f64)],
    geom: &ChainGeometry,
) -> Result<Vec<f64>, KinematicsError> {
    geom.validate()?;
    if gammas.is_empty() {
        return Ok(vec![]);
    }
    let n = gammas.len() as f64;
    let mean_diff: f64 = gammas.iter().map(|&(g1, g2)| g2 - g1).sum::<f64>() / n;
    let c = 0.5 * geom.l0 * mean_diff;
    let theta = if c == 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        let t = (geom.d / c).atan();
        if t < 0.0 {
            t + std::f64::consts::PI
        } else {
            t
        }
    };
    Ok(vec![theta; gammas.len()])
}

/// Polylines of the two robot sides in the base frame.
///
/// The base of side 1 is the origin, side 2 starts offset by `d` along
/// +x, and growth starts along +y. Point i accumulates headings
/// `sum_{k<i} (pi - 2 theta_k)` with theta_0 = pi/2 contributing zero.
#[derive(Debug, Clone)]
pub struct ChainPose {
    pub side1: Vec<Vec2>,
    pub side2: Vec<Vec2>,
    /// Heading of the tip after the last segment, rad from +y.
    pub tip_heading: f64,
}

pub fn chain_pose(
    gammas: &[(f64, f64)],
    thetas: &[f64],
    geom: &ChainGeometry,
) -> Result<ChainPose, KinematicsError> {
    geom.validate()?;
    if gammas.len() != thetas.len() {
        return Err(KinematicsError::InvalidGeometry(
            "gammas and thetas length mismatch".into(),
        ));
    }
    let mut side1 = vec![Vec2::new(0.0, 0.0)];
    let mut side2 = vec![Vec2::new(geom.d, 0.0)];
    let mut heading: f64 = 0.0; // theta_0 = pi/2 makes the first increment zero
    for (i, &(g1, g2)) in gammas.iter().enumerate() {
        let l1 = geom.l0 * (1.0 - g1);
        let l2 = geom.l0 * (1.0 - g2);
        let (s, c) = (heading.sin(), heading.cos());
        let p1 = *side1.last().unwrap();
        let p2 = *side2.last().unwrap();
        side1.push(Vec2::new(p1.x + l1 * s, p1.y + l1 * c));
        side2.push(Vec2::new(p2.x + l2 * s, p2.y + l2 * c));
        // the increment for the next segment uses theta_i
        heading += std::f64::consts::PI - 2.0 * thetas[i];
    }
    // the tip heading sum runs over theta_0..theta_{N-1}; the last
    // interface angle positions nothing
    let tip_heading = match thetas.last() {
        Some(t) => heading - (std::f64::consts::PI - 2.0 * t),
        None => 0.0,
    };
    Ok(ChainPose {
        side1,
        side2,
        tip_heading,
    })
}

/// Infer the temperature a sPAM side must have seen from its observed
/// contraction at fixed spine pressure.
///
/// At equilibrium each sPAM carries `P_g A / 2`; the pouch force is
/// monotone increasing in temperature through the vapor pressure, so the
/// temperature is found by bisection over the fluid validity range.
/// Resolves to 0.05 K.
pub fn thermometry_inverse(
    gamma_obs: f64,
    spine: &SpineConfig,
    geom: &ActuatorGeometry,
    fluid: &FluidState,
) -> Result<f64, KinematicsError> {
    let f_req = spine.spam_equilibrium_force();
    let (lo, hi) = fluid.valid_range;
    let gamma_zf = ppam::zero_force_gamma(geom.l_over_r())?;
    if !(0.0 < gamma_obs && gamma_obs < gamma_zf) {
        return Err(KinematicsError::UnreachableContraction {
            gamma: gamma_obs,
            lo,
            hi,
        });
    }
    let force_at = |t: f64| -> Result<f64, KinematicsError> {
        let p_g = thermo::gauge_pressure(t, fluid, fluid.fill_volume)?;
        Ok(ppam::force(p_g, geom, gamma_obs)?)
    };
    let f_lo = force_at(lo)?;
    let f_hi = force_at(hi)?;
    if f_req < f_lo || f_req > f_hi {
        return Err(KinematicsError::UnreachableContraction {
            gamma: gamma_obs,
            lo,
            hi,
        });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > 1e-4 {
        let mid = 0.5 * (a + b);
        if force_at(mid)? < f_req {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}
