//! Planar radiative flux field: point-source heaters, polygonal
//! occluders with transmissivity, visibility ray casting, point-flux
//! queries and isoflux grids.
//!
//! The world is 2-D, matching the foam-floor demonstrations. Occluders
//! attenuate but do not re-emit; enclosure effects belong to the
//! radiosity solver in `thermo`.

use crate::geom::{point_in_polygon, polygon_is_simple, segments_intersect, Vec2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeatFieldError {
    #[error("occluder {index} is degenerate (fewer than 3 vertices or self-intersecting)")]
    DegeneratePolygon { index: usize },
    #[error("transmissivity {0} outside [0, 1]")]
    BadTransmissivity(f64),
    #[error("query point within {0} m of a heater (singular distance)")]
    SingularDistance(f64),
    #[error("scene invalid: {0}")]
    InvalidScene(String),
    #[error("grid bounds degenerate: {0}")]
    DegenerateBounds(String),
    #[error("grid resolution must be at least 2x2, got {nx}x{ny}")]
    BadResolution { nx: usize, ny: usize },
}

const MIN_HEATER_DISTANCE: f64 = 1e-6;

/// A point radiant source calibrated by a reference flux at a reference
/// distance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Heater {
    pub position: Vec2,
    /// Flux at `ref_distance`, W/m^2.
    pub ref_flux: f64,
    /// Calibration distance, m.
    pub ref_distance: f64,
    /// Heater surface temperature for radiosity coupling, K.
    pub surface_temp: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occluder {
    pub polygon: Vec<Vec2>,
    /// Fraction of flux transmitted through this occluder (0 = opaque).
    pub transmissivity: f64,
}

/// Radial decay law of the flux field. Both families appear in the
/// source characterization; scenes must name one explicitly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DecayModel {
    InverseSquare,
    /// `amplitude * exp(-rate * d)`, fitted to measured flux-distance data.
    Exponential { amplitude: f64, rate: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatScene {
    pub heaters: Vec<Heater>,
    #[serde(default)]
    pub occluders: Vec<Occluder>,
    /// Ambient temperature, K.
    pub ambient_temp: f64,
    pub decay_model: DecayModel,
}

impl HeatScene {
    /// Validate scene invariants; degenerate polygons are rejected here,
    /// at load time, not per query.
    pub fn validate(&self) -> Result<(), HeatFieldError> {
        if self.heaters.is_empty() {
            return Err(HeatFieldError::InvalidScene("at least one heater".into()));
        }
        if self.ambient_temp <= 0.0 {
            return Err(HeatFieldError::InvalidScene(
                "ambient_temp must be positive".into(),
            ));
        }
        for h in &self.heaters {
            if h.ref_flux <= 0.0 || h.ref_distance <= 0.0 {
                return Err(HeatFieldError::InvalidScene(
                    "heater ref_flux and ref_distance must be positive".into(),
                ));
            }
        }
        for (i, occ) in self.occluders.iter().enumerate() {
            if !(0.0..=1.0).contains(&occ.transmissivity) {
                return Err(HeatFieldError::BadTransmissivity(occ.transmissivity));
            }
            if !polygon_is_simple(&occ.polygon) {
                return Err(HeatFieldError::DegeneratePolygon { index: i });
            }
        }
        Ok(())
    }
}

fn segment_hits_polygon(a: Vec2, b: Vec2, poly: &[Vec2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        if segments_intersect(a, b, poly[i], poly[(i + 1) % n]) {
            return true;
        }
    }
    point_in_polygon(a, poly) || point_in_polygon(b, poly)
}

/// Line-of-sight attenuation between a point and a heater: the product
/// of transmissivities over every occluder the sight segment passes
/// through; 1 if unobstructed. Symmetric in segment direction.
pub fn visibility(p: Vec2, heater: &Heater, occluders: &[Occluder]) -> f64 {
    let mut factor = 1.0;
    for occ in occluders {
        if segment_hits_polygon(p, heater.position, &occ.polygon) {
            factor *= occ.transmissivity;
        }
    }
    factor
}

fn decay(scene: &HeatScene, heater: &Heater, d: f64) -> f64 {
    match scene.decay_model {
        DecayModel::InverseSquare => {
            let q = heater.ref_distance / d;
            heater.ref_flux * q * q
        }
        DecayModel::Exponential { amplitude, rate } => amplitude * (-rate * d).exp(),
    }
}

/// Radiative flux at a point: sum over heaters of visibility times the
/// radial decay law.
pub fn flux_at(scene: &HeatScene, p: Vec2) -> Result<f64, HeatFieldError> {
    let mut total = 0.0;
    for h in &scene.heaters {
        let d = p.dist(h.position);
        if d < MIN_HEATER_DISTANCE {
            return Err(HeatFieldError::SingularDistance(d));
        }
        total += visibility(p, h, &scene.occluders) * decay(scene, h, d);
    }
    Ok(total)
}

/// Flux at a point weighted by the cosine of incidence against a surface
/// normal; negative-incidence contributions are clipped to zero.
pub fn flux_at_oriented(scene: &HeatScene, p: Vec2, normal: Vec2) -> Result<f64, HeatFieldError> {
    let n_norm = normal.norm();
    if n_norm == 0.0 {
        return Err(HeatFieldError::InvalidScene("zero surface normal".into()));
    }
    let mut total = 0.0;
    for h in &scene.heaters {
        let d = p.dist(h.position);
        if d < MIN_HEATER_DISTANCE {
            return Err(HeatFieldError::SingularDistance(d));
        }
        let cos_inc = (h.position.sub(p).dot(normal) / (d * n_norm)).max(0.0);
        total += cos_inc * visibility(p, h, &scene.occluders) * decay(scene, h, d);
    }
    Ok(total)
}

/// Axis-aligned rectangle for grid sampling.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

/// Row-major grid of flux samples at cell centers.
#[derive(Debug, Clone)]
pub struct FluxGrid {
    pub nx: usize,
    pub ny: usize,
    pub bounds: Bounds,
    /// values[row * nx + col], row 0 at bounds.min.y
    pub values: Vec<f64>,
}

impl FluxGrid {
    pub fn cell_center(&self, col: usize, row: usize) -> Vec2 {
        let dx = (self.bounds.max.x - self.bounds.min.x) / self.nx as f64;
        let dy = (self.bounds.max.y - self.bounds.min.y) / self.ny as f64;
        Vec2::new(
            self.bounds.min.x + (col as f64 + 0.5) * dx,
            self.bounds.min.y + (row as f64 + 0.5) * dy,
        )
    }

    pub fn at(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.nx + col]
    }
}

/// Sample the flux field on a regular grid. Deterministic row-major
/// evaluation order.
pub fn isoflux_grid(
    scene: &HeatScene,
    bounds: Bounds,
    nx: usize,
    ny: usize,
) -> Result<FluxGrid, HeatFieldError> {
    if nx < 2 || ny < 2 {
        return Err(HeatFieldError::BadResolution { nx, ny });
    }
    if bounds.max.x <= bounds.min.x || bounds.max.y <= bounds.min.y {
        return Err(HeatFieldError::DegenerateBounds(format!(
            "min {:?} max {:?}",
            bounds.min, bounds.max
        )));
    }
    let mut grid = FluxGrid {
        nx,
        ny,
        bounds,
        values: Vec::with_capacity(nx * ny),
    };
    for row in 0..ny {
        for col in 0..nx {
            let p = grid.cell_center(col, row);
            grid.values.push(flux_at(scene, p)?);
        }
    }
    Ok(grid)
}
