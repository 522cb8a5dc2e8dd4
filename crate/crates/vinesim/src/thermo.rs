//! Phase-change pressure model, equilibrium-temperature solvers, the
//! gray-diffuse radiosity network, a first-order transient lag, and the
//! plate-flux estimator.

use crate::{GAS_CONSTANT, P_ATM, SIGMA_SB};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThermoError {
    #[error("temperature {t} K outside vapor-model validity range [{lo}, {hi}] K")]
    TemperatureOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("fluid fails boiling-point calibration: P({t_ref} K) = {p} Pa, expected {expected} Pa within 0.1%")]
    CalibrationViolated { t_ref: f64, p: f64, expected: f64 },
    #[error("invalid fluid: {0}")]
    InvalidFluid(String),
    #[error("view-factor matrix violates {rule}: |error| = {magnitude:.3e} at ({i}, {j})")]
    ViewFactorViolation {
        rule: &'static str,
        magnitude: f64,
        i: usize,
        j: usize,
    },
    #[error("radiosity network invalid: {0}")]
    InvalidNetwork(String),
    #[error("solver did not converge: {0}")]
    NoConvergence(String),
    #[error("time step {dt} s too large for tau = {tau} s (need dt <= tau/10)")]
    TimeStepTooLarge { dt: f64, tau: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Vapor-pressure curve family. The boiling-point calibration
/// constraint, not the coefficient values, is normative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum VaporModel {
    /// `P = p_ref * exp(-(dh_vap/R) (1/T - 1/t_ref))`, anchored at the
    /// boiling point with a datasheet molar enthalpy of vaporization.
    ClausiusClapeyron {
        /// Anchor pressure, Pa.
        p_ref: f64,
        /// Anchor temperature, K.
        t_ref: f64,
        /// Molar enthalpy of vaporization, J/mol.
        dh_vap: f64,
    },
    /// `P = 10^(a - b / (c + T))` with T in K and P in Pa.
    Antoine { a: f64, b: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidState {
    pub vapor_model: VaporModel,
    /// Residual air, mol. Ideally zero.
    #[serde(default)]
    pub n_air: f64,
    /// Internal gas volume of one pouch, m^3.
    pub fill_volume: f64,
    /// Boiling point at 101325 Pa, K. Calibration constraint anchor.
    pub boiling_point_ref: f64,
    /// Vapor-model validity range, K.
    pub valid_range: (f64, f64),
}

impl FluidState {
    pub fn validate(&self) -> Result<(), ThermoError> {
        if self.n_air < 0.0 {
            return Err(ThermoError::InvalidFluid("n_air must be >= 0".into()));
        }
        if self.fill_volume <= 0.0 {
            return Err(ThermoError::InvalidFluid("fill_volume must be > 0".into()));
        }
        if self.valid_range.0 >= self.valid_range.1 {
            return Err(ThermoError::InvalidFluid("empty validity range".into()));
        }
        let p = vapor_pressure(self.boiling_point_ref, self)?;
        if (p - P_ATM).abs() > 1e-3 * P_ATM {
            return Err(ThermoError::CalibrationViolated {
                t_ref: self.boiling_point_ref,
                p,
                expected: P_ATM,
            });
        }
        Ok(())
    }
}

/// Saturation (vapor) pressure of the working fluid, Pa absolute.
pub fn vapor_pressure(t: f64, fluid: &FluidState) -> Result<f64, ThermoError> {
    let (lo, hi) = fluid.valid_range;
    if !(lo..=hi).contains(&t) {
        return Err(ThermoError::TemperatureOutOfRange { t, lo, hi });
    }
    Ok(match fluid.vapor_model {
        VaporModel::ClausiusClapeyron { p_ref, t_ref, dh_vap } => {
            p_ref * (-(dh_vap / GAS_CONSTANT) * (1.0 / t - 1.0 / t_ref)).exp()
        }
        VaporModel::Antoine { a, b, c } => 10f64.powf(a - b / (c + t)),
    })
}

/// Gauge pressure of a sealed pouch at temperature `t`:
/// `max(0, P_vap(T) + n_air R T / V - P_atm)`.
pub fn gauge_pressure(t: f64, fluid: &FluidState, volume: f64) -> Result<f64, ThermoError> {
    if volume <= 0.0 {
        return Err(ThermoError::InvalidArgument("volume must be > 0".into()));
    }
    let p_abs = vapor_pressure(t, fluid)? + fluid.n_air * GAS_CONSTANT * t / volume;
    Ok((p_abs - P_ATM).max(0.0))
}

/// Pouch volume at contraction `gamma`: linear interpolation between a
/// dead volume at gamma = 0 and a maximum inflated volume at gamma_max.
/// An explicit approximation used only when residual air matters.
pub fn volume_at_contraction(dead: f64, max: f64, gamma: f64, gamma_max: f64) -> f64 {
    dead + (max - dead) * (gamma / gamma_max).clamp(0.0, 1.0)
}

/// Lumped surface with combined conductive/convective losses.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalNode {
    /// Effective area, m^2.
    pub area: f64,
    /// Emissivity, (0, 1].
    pub emissivity: f64,
    /// Absorptivity, (0, 1].
    pub absorptivity: f64,
    /// Combined conductive/convective loss coefficient, W/(m^2 K).
    pub loss_coeff: f64,
    /// Heat capacity J/K, used only by the transient lag.
    #[serde(default)]
    pub heat_capacity: Option<f64>,
    /// Current temperature, K.
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquilibriumMode {
    /// alpha Q = h (T - Tinf)
    Linear,
    /// alpha Q = h (T - Tinf) + eps sigma (T^4 - Tinf^4)
    Reradiating,
}

/// Equilibrium temperature of a lumped node under absorbed flux
/// `q_abs` (W/m^2). Reradiating mode solves the quartic balance by
/// safeguarded Newton to |residual| < 1e-6 W/m^2.
pub fn equilibrium_temp(
    q_abs: f64,
    node: &ThermalNode,
    t_inf: f64,
    mode: EquilibriumMode,
) -> Result<f64, ThermoError> {
    if q_abs < 0.0 {
        return Err(ThermoError::InvalidArgument("q_abs must be >= 0".into()));
    }
    if node.loss_coeff <= 0.0 {
        return Err(ThermoError::InvalidArgument("loss_coeff must be > 0".into()));
    }
    let h = node.loss_coeff;
    let source = node.absorptivity * q_abs;
    match mode {
        EquilibriumMode::Linear => Ok(t_inf + source / h),
        EquilibriumMode::Reradiating => {
            let eps = node.emissivity;
            let resid = |t: f64| h * (t - t_inf) + eps * SIGMA_SB * (t.powi(4) - t_inf.powi(4)) - source;
            // bracket: residual is monotone increasing, zero at t_inf when source = 0
            let mut lo = t_inf;
            let mut hi = t_inf + source / h + 1.0;
            debug_assert!(resid(hi) >= 0.0);
            let mut t = 0.5 * (lo + hi);
            for _ in 0..200 {
                let r = resid(t);
                if r.abs() < 1e-6 {
                    return Ok(t);
                }
                if r > 0.0 {
                    hi = t;
                } else {
                    lo = t;
                }
                let dr = h + 4.0 * eps * SIGMA_SB * t.powi(3);
                let t_newton = t - r / dr;
                t = if t_newton > lo && t_newton < hi {
                    t_newton
                } else {
                    0.5 * (lo + hi)
                };
            }
            Err(ThermoError::NoConvergence("equilibrium_temp".into()))
        }
    }
}

/// Gray-diffuse enclosure with user-supplied view factors.
#[derive(Debug, Clone)]
pub struct RadiosityNetwork {
    pub nodes: Vec<ThermalNode>,
    /// view_factors[i][j] = F_ij
    pub view_factors: Vec<Vec<f64>>,
    pub environment_temp: f64,
}

/// Per-node boundary condition for the radiosity solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    /// Node held at a known temperature (e.g. the heater).
    FixedTemperature(f64),
    /// Node receives a known injected power (W); temperature is solved.
    FixedPower(f64),
}

/// Solved state of one node.
#[derive(Debug, Clone, Copy)]
pub struct NodeSolution {
    pub temperature: f64,
    pub radiosity: f64,
    /// Net radiative power into the node, W.
    pub net_radiative: f64,
    /// Convective/conductive loss to the environment, W.
    pub convective_loss: f64,
    /// Injected power: prescribed for FixedPower nodes, implied for
    /// FixedTemperature nodes.
    pub injected: f64,
}

const VF_TOL: f64 = 1e-9;

impl RadiosityNetwork {
    pub fn validate(&self) -> Result<(), ThermoError> {
        let n = self.nodes.len();
        if n == 0 {
            return Err(ThermoError::InvalidNetwork("no nodes".into()));
        }
        if self.view_factors.len() != n || self.view_factors.iter().any(|r| r.len() != n) {
            return Err(ThermoError::InvalidNetwork("view-factor matrix shape".into()));
        }
        for node in &self.nodes {
            if node.area <= 0.0
                || !(0.0..=1.0).contains(&node.emissivity)
                || node.emissivity == 0.0
                || node.temperature <= 0.0
            {
                return Err(ThermoError::InvalidNetwork(
                    "node areas positive, emissivity in (0,1], temperature > 0".into(),
                ));
            }
        }
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                let f = self.view_factors[i][j];
                if f < -VF_TOL {
                    return Err(ThermoError::ViewFactorViolation {
                        rule: "nonnegativity",
                        magnitude: f.abs(),
                        i,
                        j,
                    });
                }
                row += f;
                let rec = self.nodes[i].area * f - self.nodes[j].area * self.view_factors[j][i];
                if rec.abs() > VF_TOL {
                    return Err(ThermoError::ViewFactorViolation {
                        rule: "reciprocity",
                        magnitude: rec.abs(),
                        i,
                        j,
                    });
                }
            }
            if (row - 1.0).abs() > VF_TOL {
                return Err(ThermoError::ViewFactorViolation {
                    rule: "row-sum",
                    magnitude: (row - 1.0).abs(),
                    i,
                    j: 0,
                });
            }
        }
        Ok(())
    }

    /// Radiosities for given temperatures: solve the linear closure
    /// `J_i = eps_i sigma T_i^4 + (1 - eps_i) sum_j F_ij J_j`.
    fn radiosities(&self, temps: &[f64]) -> Result<Vec<f64>, ThermoError> {
        let n = self.nodes.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for i in 0..n {
            let eps = self.nodes[i].emissivity;
            for j in 0..n {
                a[(i, j)] = -(1.0 - eps) * self.view_factors[i][j];
            }
            a[(i, i)] += 1.0;
            b[i] = eps * SIGMA_SB * temps[i].powi(4);
        }
        a.lu()
            .solve(&b)
            .map(|j| j.iter().copied().collect())
            .ok_or_else(|| ThermoError::InvalidNetwork("singular radiosity closure".into()))
    }

    fn net_radiative(&self, i: usize, j_vec: &[f64]) -> f64 {
        let a = self.nodes[i].area;
        (0..self.nodes.len())
            .map(|j| a * self.view_factors[i][j] * (j_vec[j] - j_vec[i]))
            .sum()
    }
}

/// Solve the radiosity network for per-node temperature and radiosity.
///
/// Unknowns are the temperatures of FixedPower nodes; each evaluation
/// solves the linear radiosity closure exactly, and a damped Newton
/// iteration with finite-difference Jacobian drives the power balance
/// `h A (T - Tinf) = net radiative + injected` below 1e-6 W per node.
pub fn radiosity_solve(
    net: &RadiosityNetwork,
    boundary: &[Boundary],
) -> Result<Vec<NodeSolution>, ThermoError> {
    net.validate()?;
    let n = net.nodes.len();
    if boundary.len() != n {
        return Err(ThermoError::InvalidNetwork("boundary length mismatch".into()));
    }
    if !boundary.iter().any(|b| matches!(b, Boundary::FixedTemperature(_))) {
        return Err(ThermoError::InvalidNetwork(
            "at least one fixed-temperature node required".into(),
        ));
    }
    let free: Vec<usize> = (0..n)
        .filter(|&i| matches!(boundary[i], Boundary::FixedPower(_)))
        .collect();

    let assemble = |x: &[f64]| -> Vec<f64> {
        let mut temps = vec![0.0; n];
        for i in 0..n {
            temps[i] = match boundary[i] {
                Boundary::FixedTemperature(t) => t,
                Boundary::FixedPower(_) => 0.0,
            };
        }
        for (k, &i) in free.iter().enumerate() {
            temps[i] = x[k];
        }
        temps
    };
    let residual = |x: &[f64]| -> Result<Vec<f64>, ThermoError> {
        let temps = assemble(x);
        let j_vec = net.radiosities(&temps)?;
        free.iter()
            .map(|&i| {
                let node = &net.nodes[i];
                let inj = match boundary[i] {
                    Boundary::FixedPower(p) => p,
                    Boundary::FixedTemperature(_) => unreachable!(),
                };
                Ok(node.loss_coeff * node.area * (temps[i] - net.environment_temp)
                    - net.net_radiative(i, &j_vec)
                    - inj)
            })
            .collect()
    };

    let mut x: Vec<f64> = free.iter().map(|_| net.environment_temp).collect();
    if !free.is_empty() {
        let nf = free.len();
        let mut converged = false;
        for _ in 0..200 {
            let r = residual(&x)?;
            let norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if r.iter().all(|v| v.abs() < 1e-8) {
                converged = true;
                break;
            }
            let mut jac = DMatrix::<f64>::zeros(nf, nf);
            for k in 0..nf {
                let h = 1e-4 * x[k].abs().max(1.0);
                let mut xp = x.clone();
                xp[k] += h;
                let rp = residual(&xp)?;
                for row in 0..nf {
                    jac[(row, k)] = (rp[row] - r[row]) / h;
                }
            }
            let rhs = DVector::from_iterator(nf, r.iter().map(|v| -v));
            let step = jac
                .lu()
                .solve(&rhs)
                .ok_or_else(|| ThermoError::NoConvergence("singular radiosity Jacobian".into()))?;
            let mut damp = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let xt: Vec<f64> = x
                    .iter()
                    .zip(step.iter())
                    .map(|(xi, s)| (xi + damp * s).max(1.0))
                    .collect();
                let rt = residual(&xt)?;
                let nt = rt.iter().map(|v| v * v).sum::<f64>().sqrt();
                if nt < norm {
                    x = xt;
                    accepted = true;
                    break;
                }
                damp *= 0.5;
            }
            if !accepted {
                return Err(ThermoError::NoConvergence("radiosity Newton stalled".into()));
            }
        }
        if !converged {
            let r = residual(&x)?;
            if r.iter().any(|v| v.abs() >= 1e-6) {
                return Err(ThermoError::NoConvergence("radiosity balance".into()));
            }
        }
    }

    let temps = assemble(&x);
    let j_vec = net.radiosities(&temps)?;
    Ok((0..n)
        .map(|i| {
            let node = &net.nodes[i];
            let net_rad = net.net_radiative(i, &j_vec);
            let conv = node.loss_coeff * node.area * (temps[i] - net.environment_temp);
            let injected = match boundary[i] {
                Boundary::FixedPower(p) => p,
                Boundary::FixedTemperature(_) => conv - net_rad,
            };
            NodeSolution {
                temperature: temps[i],
                radiosity: j_vec[i],
                net_radiative: net_rad,
                convective_loss: conv,
                injected,
            }
        })
        .collect())
}

/// First-order thermal lag toward the instantaneous equilibrium
/// temperature, integrated by explicit Euler. Returns (time, T) samples
/// including t = 0.
pub fn transient_temp(
    node: &ThermalNode,
    q_abs: impl Fn(f64) -> f64,
    t_inf: f64,
    mode: EquilibriumMode,
    tau: f64,
    dt: f64,
    t_end: f64,
) -> Result<Vec<(f64, f64)>, ThermoError> {
    if tau <= 0.0 {
        return Err(ThermoError::InvalidArgument("tau must be > 0".into()));
    }
    if dt > tau / 10.0 {
        return Err(ThermoError::TimeStepTooLarge { dt, tau });
    }
    let mut t = node.temperature;
    let mut out = vec![(0.0, t)];
    let steps = (t_end / dt).round() as usize;
    for k in 0..steps {
        let time = k as f64 * dt;
        let t_eq = equilibrium_temp(q_abs(time), node, t_inf, mode)?;
        t += dt * (t_eq - t) / tau;
        out.push(((k + 1) as f64 * dt, t));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlateFluxVariant {
    /// The original characterization formula, kept verbatim:
    /// `sigma T_plate^4 - h (T_plate - T_amb)`.
    AsReported,
    /// Net-exchange form: `sigma (T_plate^4 - T_amb^4) + h (T_plate - T_amb)`.
    Physical,
}

/// Estimate incident flux from the equilibrium temperature of a small
/// black plate. Both sign conventions are offered; neither is silently
/// corrected.
pub fn plate_flux_estimate(t_plate: f64, t_amb: f64, h: f64, variant: PlateFluxVariant) -> f64 {
    match variant {
        PlateFluxVariant::AsReported => SIGMA_SB * t_plate.powi(4) - h * (t_plate - t_amb),
        PlateFluxVariant::Physical => {
            SIGMA_SB * (t_plate.powi(4) - t_amb.powi(4)) + h * (t_plate - t_amb)
        }
    }
}

/// Default working fluid: Novec 7000, boiling point 34 C at one
/// atmosphere. The Clausius-Clapeyron anchor uses the manufacturer
/// datasheet heat of vaporization (142 kJ/kg at 25 C, molar mass
/// 200 g/mol -> 28.4 kJ/mol).
pub fn default_fluid() -> FluidState {
    FluidState {
        vapor_model: VaporModel::ClausiusClapeyron {
            p_ref: P_ATM,
            t_ref: 307.15,
            dh_vap: 28400.0,
        },
        n_air: 0.0,
        fill_volume: 1.5e-6,
        boiling_point_ref: 307.15,
        valid_range: (250.0, 420.0),
    }
}
