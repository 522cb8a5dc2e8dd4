//! Quasistatic growth-and-steer simulation loop: sense the flux field,
//! equilibrate pouch temperatures and pressures, invert the force law
//! for contraction, re-solve the chain shape, then grow at the tip.
//!
//! One run is a sequential state machine; identical inputs produce
//! identical trajectories.

use crate::geom::{point_in_polygon, Vec2};
use crate::heatfield::{self, HeatFieldError, HeatScene};
use crate::kinematics::{self, ChainGeometry, KinematicsError, SpineConfig};
use crate::ppam::{self, ActuatorGeometry, PpamError};
use crate::thermo::{self, EquilibriumMode, FluidState, ThermalNode, ThermoError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("segment {segment}: {source}")]
    Actuation {
        segment: usize,
        #[source]
        source: Box<EngineError>,
    },
    #[error("segment count would exceed the configured maximum {max}")]
    MaxSegments { max: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    HeatField(#[from] HeatFieldError),
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Ppam(#[from] PpamError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// A run abort carries the trajectory accumulated so far.
#[derive(Debug, Error)]
#[error("simulation aborted at t = {time} s: {error}")]
pub struct RunAborted {
    pub time: f64,
    pub error: Box<EngineError>,
    pub partial: RobotTrajectory,
}

/// Lumped radiative/convective surface parameters shared by every pouch
/// side.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PouchThermal {
    pub absorptivity: f64,
    pub emissivity: f64,
    /// Combined loss coefficient, W/(m^2 K).
    pub loss_coeff: f64,
    pub mode: EquilibriumMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotConfig {
    pub spine: SpineConfig,
    pub actuator: ActuatorGeometry,
    pub fluid: FluidState,
    pub chain: ChainGeometry,
    pub thermal: PouchThermal,
    /// World position of the side-1 base rail.
    pub base_position: Vec2,
    /// Initial growth direction, rad from +y (positive toward +x).
    pub base_heading: f64,
    /// Tip extension speed, m/s.
    pub growth_rate: f64,
    /// Attenuation applied to the far-side (lower-raw-flux) sPAM,
    /// standing in for body self-shadowing and spine insulation.
    pub shading_factor: f64,
    /// First-order thermal lag, s; 0 means instantaneous equilibrium.
    pub thermal_tau: f64,
    pub initial_segments: usize,
    pub max_segments: usize,
}

impl RobotConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.actuator.validate()?;
        self.fluid.validate()?;
        self.chain.validate()?;
        if self.growth_rate < 0.0 {
            return Err(EngineError::InvalidConfig("growth_rate must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.shading_factor) {
            return Err(EngineError::InvalidConfig(
                "shading_factor must lie in [0, 1]".into(),
            ));
        }
        if self.thermal_tau < 0.0 {
            return Err(EngineError::InvalidConfig("thermal_tau must be >= 0".into()));
        }
        if self.initial_segments < 1 || self.initial_segments > self.max_segments {
            return Err(EngineError::InvalidConfig(
                "need 1 <= initial_segments <= max_segments".into(),
            ));
        }
        Ok(())
    }

    fn node(&self, temperature: f64) -> ThermalNode {
        ThermalNode {
            area: self.actuator.fiber_length * self.actuator.layflat_width,
            emissivity: self.thermal.emissivity,
            absorptivity: self.thermal.absorptivity,
            loss_coeff: self.thermal.loss_coeff,
            heat_capacity: None,
            temperature,
        }
    }
}

/// Per-segment thermal/strain state carried between steps.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmentThermalState {
    pub gamma_1: f64,
    pub gamma_2: f64,
    pub temp_1: f64,
    pub temp_2: f64,
    pub pressure_1: f64,
    pub pressure_2: f64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub time: f64,
    pub segments: Vec<SegmentThermalState>,
    /// Tip growth not yet long enough for a whole segment, m; in [0, l0).
    pub tip_extension_accumulator: f64,
    /// Cached world-frame polylines, one point per interface.
    pub side1: Vec<Vec2>,
    pub side2: Vec<Vec2>,
    /// World heading of the tip, rad from +y.
    pub tip_heading: f64,
    /// True while tip growth is paused by contact.
    pub in_contact: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySample {
    pub time: f64,
    pub side1: Vec<Vec2>,
    pub side2: Vec<Vec2>,
    pub tip_heading: f64,
    pub segments: Vec<SegmentThermalState>,
    /// Whether tip growth was paused by occluder contact at this step.
    pub in_contact: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RobotTrajectory {
    pub samples: Vec<TrajectorySample>,
}

fn world(cfg: &RobotConfig, p: Vec2) -> Vec2 {
    let (s, c) = (cfg.base_heading.sin(), cfg.base_heading.cos());
    Vec2::new(
        cfg.base_position.x + p.x * c + p.y * s,
        cfg.base_position.y - p.x * s + p.y * c,
    )
}

fn solve_pose(state: &mut SimState, cfg: &RobotConfig) -> Result<(), EngineError> {
    let gammas: Vec<(f64, f64)> = state.segments.iter().map(|s| (s.gamma_1, s.gamma_2)).collect();
    let thetas = kinematics::segment_angles(&gammas, &cfg.chain)?;
    let pose = kinematics::chain_pose(&gammas, &thetas, &cfg.chain)?;
    state.side1 = pose.side1.into_iter().map(|p| world(cfg, p)).collect();
    state.side2 = pose.side2.into_iter().map(|p| world(cfg, p)).collect();
    state.tip_heading = cfg.base_heading + pose.tip_heading;
    Ok(())
}

/// Initial state: `initial_segments` unactuated segments at ambient.
pub fn initial_state(scene: &HeatScene, cfg: &RobotConfig) -> Result<SimState, EngineError> {
    cfg.validate()?;
    scene.validate()?;
    let seg = SegmentThermalState {
        gamma_1: 0.0,
        gamma_2: 0.0,
        temp_1: scene.ambient_temp,
        temp_2: scene.ambient_temp,
        pressure_1: 0.0,
        pressure_2: 0.0,
    };
    let mut state = SimState {
        time: 0.0,
        segments: vec![seg; cfg.initial_segments],
        tip_extension_accumulator: 0.0,
        side1: vec![],
        side2: vec![],
        tip_heading: cfg.base_heading,
        in_contact: false,
    };
    solve_pose(&mut state, cfg)?;
    Ok(state)
}

/// Per-segment absorbed flux pair `(q1, q2)`, sampled at the side
/// midpoints. The side with the lower raw flux is the far side and is
/// attenuated by the shading factor; an exact tie shades neither.
pub fn sense(
    state: &SimState,
    scene: &HeatScene,
    cfg: &RobotConfig,
) -> Result<Vec<(f64, f64)>, EngineError> {
    let mut out = Vec::with_capacity(state.segments.len());
    for i in 0..state.segments.len() {
        let m1 = state.side1[i].midpoint(state.side1[i + 1]);
        let m2 = state.side2[i].midpoint(state.side2[i + 1]);
        let q1 = heatfield::flux_at(scene, m1)?;
        let q2 = heatfield::flux_at(scene, m2)?;
        if q1 < q2 {
            out.push((cfg.shading_factor * q1, q2));
        } else if q2 < q1 {
            out.push((q1, cfg.shading_factor * q2));
        } else {
            out.push((q1, q2));
        }
    }
    Ok(out)
}

fn side_actuation(
    q_abs: f64,
    temp_prev: f64,
    ambient: f64,
    dt: f64,
    cfg: &RobotConfig,
    f_required: f64,
) -> Result<(f64, f64, f64), EngineError> {
    let node = cfg.node(temp_prev);
    let t_eq = thermo::equilibrium_temp(q_abs, &node, ambient, cfg.thermal.mode)?;
    let t = if cfg.thermal_tau > 0.0 {
        temp_prev + dt * (t_eq - temp_prev) / cfg.thermal_tau
    } else {
        t_eq
    };
    let p_g = thermo::gauge_pressure(t, &cfg.fluid, cfg.fluid.fill_volume)?;
    let gamma = if p_g <= 0.0 {
        0.0
    } else {
        match ppam::gamma_from_force(f_required, p_g, &cfg.actuator) {
            Ok(g) => g,
            // capacity below the balance force: the side goes slack
            Err(PpamError::UnreachableForce { .. }) => 0.0,
            Err(e) => return Err(e.into()),
        }
    };
    Ok((t, p_g, gamma))
}

/// Update every segment's temperatures, pressures and contractions from
/// the sensed fluxes.
pub fn update_actuation(
    state: &mut SimState,
    fluxes: &[(f64, f64)],
    scene: &HeatScene,
    cfg: &RobotConfig,
    dt: f64,
) -> Result<(), EngineError> {
    let f_req = cfg.spine.spam_equilibrium_force();
    for (i, seg) in state.segments.iter_mut().enumerate() {
        let annotate = |source: EngineError| EngineError::Actuation {
            segment: i,
            source: Box::new(source),
        };
        let (t1, p1, g1) =
            side_actuation(fluxes[i].0, seg.temp_1, scene.ambient_temp, dt, cfg, f_req)
                .map_err(annotate)?;
        let (t2, p2, g2) =
            side_actuation(fluxes[i].1, seg.temp_2, scene.ambient_temp, dt, cfg, f_req)
                .map_err(annotate)?;
        *seg = SegmentThermalState {
            gamma_1: g1,
            gamma_2: g2,
            temp_1: t1,
            temp_2: t2,
            pressure_1: p1,
            pressure_2: p2,
        };
    }
    Ok(())
}

fn tip_direction(state: &SimState) -> Vec2 {
    Vec2::new(state.tip_heading.sin(), state.tip_heading.cos())
}

fn tip_point(state: &SimState) -> Vec2 {
    state.side1.last().unwrap().midpoint(*state.side2.last().unwrap())
}

/// Advance tip growth, spawning fresh unactuated segments when a full
/// segment length has accumulated. Growth pauses while the advanced tip
/// point would lie inside an occluder; steering continues regardless.
pub fn grow(
    state: &mut SimState,
    scene: &HeatScene,
    cfg: &RobotConfig,
    dt: f64,
) -> Result<(), EngineError> {
    let advance = cfg.growth_rate * dt;
    if advance == 0.0 {
        state.in_contact = false;
        return Ok(());
    }
    let probe = tip_point(state).add(
        tip_direction(state).scale(state.tip_extension_accumulator + advance),
    );
    state.in_contact = scene
        .occluders
        .iter()
        .any(|occ| point_in_polygon(probe, &occ.polygon));
    if state.in_contact {
        return Ok(());
    }
    state.tip_extension_accumulator += advance;
    while state.tip_extension_accumulator >= cfg.chain.l0 {
        if state.segments.len() >= cfg.max_segments {
            return Err(EngineError::MaxSegments {
                max: cfg.max_segments,
            });
        }
        state.segments.push(SegmentThermalState {
            gamma_1: 0.0,
            gamma_2: 0.0,
            temp_1: scene.ambient_temp,
            temp_2: scene.ambient_temp,
            pressure_1: 0.0,
            pressure_2: 0.0,
        });
        state.tip_extension_accumulator -= cfg.chain.l0;
    }
    Ok(())
}

fn sample(state: &SimState) -> TrajectorySample {
    TrajectorySample {
        time: state.time,
        side1: state.side1.clone(),
        side2: state.side2.clone(),
        tip_heading: state.tip_heading,
        segments: state.segments.clone(),
        in_contact: state.in_contact,
    }
}

/// Run the deterministic loop sense -> actuate -> re-solve -> grow ->
/// sample until `t_end`.
pub fn run(
    scene: &HeatScene,
    cfg: &RobotConfig,
    dt: f64,
    t_end: f64,
    sample_every: usize,
) -> Result<RobotTrajectory, RunAborted> {
    let mut trajectory = RobotTrajectory::default();
    let abort = |time: f64, error: EngineError, partial: RobotTrajectory| RunAborted {
        time,
        error: Box::new(error),
        partial,
    };
    if dt <= 0.0 || sample_every == 0 {
        return Err(abort(
            0.0,
            EngineError::InvalidConfig("dt > 0 and sample_every >= 1 required".into()),
            trajectory,
        ));
    }
    let mut state = match initial_state(scene, cfg) {
        Ok(s) => s,
        Err(e) => return Err(abort(0.0, e, trajectory)),
    };
    trajectory.samples.push(sample(&state));
    let steps = (t_end / dt).round() as usize;
    for k in 1..=steps {
        let result = (|| -> Result<(), EngineError> {
            let fluxes = sense(&state, scene, cfg)?;
            update_actuation(&mut state, &fluxes, scene, cfg, dt)?;
            solve_pose(&mut state, cfg)?;
            let n_before = state.segments.len();
            grow(&mut state, scene, cfg, dt)?;
            if state.segments.len() != n_before {
                solve_pose(&mut state, cfg)?;
            }
            Ok(())
        })();
        state.time = k as f64 * dt;
        if let Err(e) = result {
            return Err(abort(state.time, e, trajectory));
        }
        if k % sample_every == 0 {
            trajectory.samples.push(sample(&state));
        }
    }
    Ok(trajectory)
}

/// Signed bearing from the tip heading to the direction of a target
/// point, rad in (-pi, pi]. Zero means the tip points straight at it.
pub fn tip_bearing_error(s: &TrajectorySample, target: Vec2) -> f64 {
    let tip = s.side1.last().unwrap().midpoint(*s.side2.last().unwrap());
    let to_target = target.sub(tip);
    // headings measured from +y, positive toward +x
    let target_heading = to_target.x.atan2(to_target.y);
    let mut diff = target_heading - s.tip_heading;
    while diff > std::f64::consts::PI {
        diff -= 2.0 * std::f64::consts::PI;
    }
    while diff <= -std::f64::consts::PI {
        diff += 2.0 * std::f64::consts::PI;
    }
    diff
}

/// Mirror a scene about the vertical axis x = 0.
pub fn mirror_scene(scene: &HeatScene) -> HeatScene {
    let mut m = scene.clone();
    for h in &mut m.heaters {
        h.position.x = -h.position.x;
    }
    for occ in &mut m.occluders {
        for v in &mut occ.polygon {
            v.x = -v.x;
        }
        occ.polygon.reverse();
    }
    m
}

/// Mirror a robot config about x = 0. Side labels swap under mirroring,
/// so the mirrored side-1 rail starts where the original side-2 rail
/// base lands after reflection.
pub fn mirror_config(cfg: &RobotConfig) -> RobotConfig {
    let mut m = cfg.clone();
    let (s, c) = (cfg.base_heading.sin(), cfg.base_heading.cos());
    let side2_base = Vec2::new(
        cfg.base_position.x + cfg.chain.d * c,
        cfg.base_position.y - cfg.chain.d * s,
    );
    m.base_position = Vec2::new(-side2_base.x, side2_base.y);
    m.base_heading = -cfg.base_heading;
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatfield::{DecayModel, Heater, Occluder};
    use crate::ppam::GAMMA_FLOOR;
    use crate::thermo::default_fluid;
    use approx::assert_relative_eq;

    pub(crate) fn test_config() -> RobotConfig {
        RobotConfig {
            spine: SpineConfig {
                gauge_pressure: 12e3,
                layflat_width: 0.05,
            },
            actuator: ActuatorGeometry {
                fiber_length: 0.04,
                constriction_radius: 0.004,
                layflat_width: 0.06,
                pouches_per_spam: 5,
            },
            fluid: default_fluid(),
            chain: ChainGeometry { l0: 0.041, d: 0.05 },
            thermal: PouchThermal {
                absorptivity: 0.9,
                emissivity: 0.9,
                loss_coeff: 12.0,
                mode: EquilibriumMode::Linear,
            },
            base_position: Vec2::new(0.0, 0.0),
            base_heading: 0.0,
            growth_rate: 0.01,
            shading_factor: 0.2,
            thermal_tau: 0.0,
            initial_segments: 3,
            max_segments: 40,
        }
    }

    fn scene_with_heater(pos: Vec2) -> HeatScene {
        HeatScene {
            heaters: vec![Heater {
                position: pos,
                ref_flux: 800.0,
                ref_distance: 0.1,
                surface_temp: 600.0,
            }],
            occluders: vec![],
            ambient_temp: 293.15,
            decay_model: DecayModel::InverseSquare,
        }
    }

    #[test]
    fn cold_scene_grows_straight() {
        let mut scene = scene_with_heater(Vec2::new(0.025, 2.0));
        scene.heaters[0].ref_flux = 1e-6;
        let cfg = test_config();
        let traj = run(&scene, &cfg, 1.0, 30.0, 5).unwrap();
        let last = traj.samples.last().unwrap();
        for p in &last.side1 {
            assert_relative_eq!(p.x, 0.0, epsilon = 1e-12);
        }
        assert!(last.segments.iter().all(|s| s.gamma_1 == 0.0 && s.gamma_2 == 0.0));
    }

    #[test]
    fn determinism() {
        let scene = scene_with_heater(Vec2::new(0.4, 0.3));
        let cfg = test_config();
        let a = run(&scene, &cfg, 1.0, 40.0, 2).unwrap();
        let b = run(&scene, &cfg, 1.0, 40.0, 2).unwrap();
        assert_eq!(a.samples.len(), b.samples.len());
        for (sa, sb) in a.samples.iter().zip(&b.samples) {
            for (pa, pb) in sa.side1.iter().zip(&sb.side1) {
                assert_eq!(pa, pb);
            }
        }
    }

    #[test]
    fn offset_heater_heats_near_side_more() {
        // heater ahead and to the right (side-2 side)
        let scene = scene_with_heater(Vec2::new(0.5, 0.2));
        let cfg = test_config();
        let state = initial_state(&scene, &cfg).unwrap();
        let fluxes = sense(&state, &scene, &cfg).unwrap();
        for (q1, q2) in fluxes {
            assert!(q2 > q1);
        }
    }

    #[test]
    fn shading_unity_heater_dead_ahead_balances() {
        let mut cfg = test_config();
        cfg.shading_factor = 1.0;
        // heater on the spine centerline
        let scene = scene_with_heater(Vec2::new(0.025, 2.0));
        let state = initial_state(&scene, &cfg).unwrap();
        let fluxes = sense(&state, &scene, &cfg).unwrap();
        for (q1, q2) in fluxes {
            assert_relative_eq!(q1, q2, max_relative = 1e-12);
        }
    }

    #[test]
    fn growth_spawns_segments_and_conserves_extruded_length() {
        let mut scene = scene_with_heater(Vec2::new(0.025, 5.0));
        scene.heaters[0].ref_flux = 1e-6;
        let mut cfg = test_config();
        cfg.growth_rate = 0.041; // exactly one segment per 1 s step
        let traj = run(&scene, &cfg, 1.0, 10.0, 1).unwrap();
        assert_eq!(traj.samples.last().unwrap().segments.len(), 13);
    }

    #[test]
    fn zero_growth_keeps_segment_count() {
        let scene = scene_with_heater(Vec2::new(0.4, 0.2));
        let mut cfg = test_config();
        cfg.growth_rate = 0.0;
        let traj = run(&scene, &cfg, 1.0, 30.0, 5).unwrap();
        for s in &traj.samples {
            assert_eq!(s.segments.len(), cfg.initial_segments);
        }
    }

    #[test]
    fn max_segment_guard_aborts_with_partial() {
        let mut scene = scene_with_heater(Vec2::new(0.025, 5.0));
        scene.heaters[0].ref_flux = 1e-6;
        let mut cfg = test_config();
        cfg.growth_rate = 0.1;
        cfg.max_segments = 5;
        let err = run(&scene, &cfg, 1.0, 100.0, 1).unwrap_err();
        assert!(matches!(*err.error, EngineError::MaxSegments { max: 5 }));
        assert!(!err.partial.samples.is_empty());
    }

    #[test]
    fn wall_pauses_growth_and_releases_past_edge() {
        let mut scene = scene_with_heater(Vec2::new(0.6, 0.25));
        // wall straight ahead of the initial growth direction
        scene.occluders.push(Occluder {
            polygon: vec![
                Vec2::new(-0.2, 0.25),
                Vec2::new(0.12, 0.25),
                Vec2::new(0.12, 0.35),
                Vec2::new(-0.2, 0.35),
            ],
            transmissivity: 0.0,
        });
        let cfg = test_config();
        let walled = run(&scene, &cfg, 1.0, 120.0, 1).unwrap();
        let mut open_scene = scene.clone();
        open_scene.occluders.clear();
        let open = run(&open_scene, &cfg, 1.0, 120.0, 1).unwrap();
        let count = |t: &RobotTrajectory| t.samples.last().unwrap().segments.len();
        // contact throttles segment spawning relative to the open field,
        // but some growth still happens before (and after) the pause
        assert!(count(&walled) < count(&open));
        assert!(count(&walled) > cfg.initial_segments);
        assert!(walled.samples.iter().any(|s| s.in_contact));
    }

    #[test]
    fn mirror_equivariance_exact() {
        let mut scene = scene_with_heater(Vec2::new(0.45, 0.3));
        scene.occluders.push(Occluder {
            polygon: vec![
                Vec2::new(0.2, 0.05),
                Vec2::new(0.3, 0.05),
                Vec2::new(0.3, 0.15),
                Vec2::new(0.2, 0.15),
            ],
            transmissivity: 0.5,
        });
        let cfg = test_config();
        let fwd = run(&scene, &cfg, 1.0, 60.0, 3).unwrap();
        let mir = run(&mirror_scene(&scene), &mirror_config(&cfg), 1.0, 60.0, 3).unwrap();
        assert_eq!(fwd.samples.len(), mir.samples.len());
        for (a, b) in fwd.samples.iter().zip(&mir.samples) {
            for (p, q) in a.side1.iter().zip(&b.side2) {
                assert_relative_eq!(p.x, -q.x, epsilon = 1e-12);
                assert_relative_eq!(p.y, q.y, epsilon = 1e-12);
            }
            for (p, q) in a.side2.iter().zip(&b.side1) {
                assert_relative_eq!(p.x, -q.x, epsilon = 1e-12);
                assert_relative_eq!(p.y, q.y, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn quasistatic_force_balance_at_samples() {
        let scene = scene_with_heater(Vec2::new(0.35, 0.25));
        let cfg = test_config();
        let f_req = cfg.spine.spam_equilibrium_force();
        let traj = run(&scene, &cfg, 1.0, 30.0, 5).unwrap();
        for s in &traj.samples {
            for seg in &s.segments {
                for (gamma, p_g) in [(seg.gamma_1, seg.pressure_1), (seg.gamma_2, seg.pressure_2)]
                {
                    if gamma == 0.0 {
                        let cap = if p_g > 0.0 {
                            ppam::force(p_g, &cfg.actuator, GAMMA_FLOOR).unwrap()
                        } else {
                            0.0
                        };
                        assert!(cap < f_req + 1e-4);
                    } else {
                        let f = ppam::force(p_g, &cfg.actuator, gamma).unwrap();
                        assert!((f - f_req).abs() < 1e-4, "imbalance {}", f - f_req);
                    }
                }
            }
        }
    }

    #[test]
    fn body_fixity_with_frozen_contraction() {
        let mut scene = scene_with_heater(Vec2::new(0.025, 5.0));
        scene.heaters[0].ref_flux = 1e-9; // everything stays slack
        let cfg = test_config();
        let traj = run(&scene, &cfg, 1.0, 60.0, 1).unwrap();
        let first = &traj.samples[0];
        let last = traj.samples.last().unwrap();
        for (i, p) in first.side1.iter().enumerate() {
            assert_eq!(*p, last.side1[i]);
        }
    }
}
