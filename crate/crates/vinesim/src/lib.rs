//! Quasistatic physics and characterization toolkit for thermotropic
//! vine robots.
//!
//! The robot is an everting pneumatic tube flanked by two chains of
//! heat-activated series pneumatic artificial muscles (sPAMs). A radiant
//! heat field vaporizes a low-boiling-point working fluid inside the
//! pouches; the heater-side chain contracts more than the shaded side and
//! the robot steers toward the source.
//!
//! Module map:
//! - [`elliptic`]: incomplete elliptic integrals (Carlson symmetric forms)
//! - [`ppam`]: pouch membrane shape and force-contraction mechanics
//! - [`thermo`]: vapor pressure, equilibrium temperatures, radiosity networks
//! - [`heatfield`]: planar flux field with polygonal occluders
//! - [`kinematics`]: trapezoidal chain shape model and thermometry inverse
//! - [`engine`]: the quasistatic growth-and-steer simulation loop
//! - [`calib`]: measurement tables, decay-curve fits, interpolation
//! - [`scene`]: scene-file parsing and validation
//! - [`svg`]: SVG emission and marching-squares contours
//! - [`output`]: CSV formatting and run manifests

pub mod calib;
pub mod elliptic;
pub mod engine;
pub mod geom;
pub mod heatfield;
pub mod kinematics;
pub mod output;
pub mod ppam;
pub mod scene;
pub mod svg;
pub mod thermo;

/// Stefan-Boltzmann constant, W/(m^2 K^4).
pub const SIGMA_SB: f64 = 5.670374419e-8;
/// Standard atmospheric pressure, Pa.
pub const P_ATM: f64 = 101325.0;
/// Ideal gas constant, J/(mol K).
pub const GAS_CONSTANT: f64 = 8.314462618;
