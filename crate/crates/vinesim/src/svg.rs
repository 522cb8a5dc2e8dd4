//! SVG 1.1 emission for polylines, scene overlays and isoflux contour
//! plots. Contours come from marching squares over the sampled flux
//! grid with linear edge interpolation.

use crate::geom::Vec2;
use crate::heatfield::FluxGrid;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SvgError {
    #[error("nothing to draw")]
    EmptyInput,
    #[error("non-finite coordinate in input")]
    NonFinite,
}

/// Minimal SVG document builder; world y is drawn upward.
pub struct SvgDocument {
    min: Vec2,
    max: Vec2,
    elements: Vec<String>,
}

impl SvgDocument {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        SvgDocument {
            min,
            max,
            elements: vec![],
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        // flip y so +y points up on screen
        (p.x - self.min.x, self.max.y - p.y)
    }

    pub fn polyline(&mut self, points: &[Vec2], stroke: &str, width: f64) -> Result<(), SvgError> {
        if points.is_empty() {
            return Err(SvgError::EmptyInput);
        }
        if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return Err(SvgError::NonFinite);
        }
        let pts: Vec<String> = points
            .iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.6},{y:.6}")
            })
            .collect();
        self.elements.push(format!(
            "<polyline fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\" points=\"{}\"/>",
            pts.join(" ")
        ));
        Ok(())
    }

    pub fn polygon(&mut self, points: &[Vec2], fill: &str, opacity: f64) -> Result<(), SvgError> {
        if points.len() < 3 {
            return Err(SvgError::EmptyInput);
        }
        let pts: Vec<String> = points
            .iter()
            .map(|&p| {
                let (x, y) = self.map(p);
                format!("{x:.6},{y:.6}")
            })
            .collect();
        self.elements.push(format!(
            "<polygon fill=\"{fill}\" fill-opacity=\"{opacity}\" points=\"{}\"/>",
            pts.join(" ")
        ));
        Ok(())
    }

    pub fn circle(&mut self, center: Vec2, r: f64, fill: &str) {
        let (x, y) = self.map(center);
        self.elements
            .push(format!("<circle cx=\"{x:.6}\" cy=\"{y:.6}\" r=\"{r}\" fill=\"{fill}\"/>"));
    }

    pub fn render(&self) -> String {
        let w = self.max.x - self.min.x;
        let h = self.max.y - self.min.y;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 {w:.6} {h:.6}\">\n"
        );
        for e in &self.elements {
            out.push_str(e);
            out.push('\n');
        }
        out.push_str("</svg>\n");
        out
    }
}

fn interp(p1: Vec2, v1: f64, p2: Vec2, v2: f64, level: f64) -> Vec2 {
    let t = (level - v1) / (v2 - v1);
    Vec2::new(p1.x + t * (p2.x - p1.x), p1.y + t * (p2.y - p1.y))
}

/// Extract contour polylines at `level` from a flux grid sampled at
/// cell centers. Segments are chained into polylines by shared
/// endpoints; a constant grid yields no contours.
pub fn marching_squares(grid: &FluxGrid, level: f64) -> Vec<Vec<Vec2>> {
    let mut segments: Vec<(Vec2, Vec2)> = Vec::new();
    for row in 0..grid.ny - 1 {
        for col in 0..grid.nx - 1 {
            let corners = [
                (grid.cell_center(col, row), grid.at(col, row)),
                (grid.cell_center(col + 1, row), grid.at(col + 1, row)),
                (grid.cell_center(col + 1, row + 1), grid.at(col + 1, row + 1)),
                (grid.cell_center(col, row + 1), grid.at(col, row + 1)),
            ];
            // edges in order: bottom, right, top, left
            let edges = [(0, 1), (1, 2), (2, 3), (3, 0)];
            let mut crossings = Vec::new();
            for &(a, b) in &edges {
                let (pa, va) = corners[a];
                let (pb, vb) = corners[b];
                if (va >= level) != (vb >= level) {
                    crossings.push(interp(pa, va, pb, vb, level));
                }
            }
            match crossings.len() {
                2 => segments.push((crossings[0], crossings[1])),
                4 => {
                    segments.push((crossings[0], crossings[1]));
                    segments.push((crossings[2], crossings[3]));
                }
                _ => {}
            }
        }
    }
    chain_segments(segments)
}

fn key(p: Vec2) -> (i64, i64) {
    ((p.x * 1e9).round() as i64, (p.y * 1e9).round() as i64)
}

fn chain_segments(segments: Vec<(Vec2, Vec2)>) -> Vec<Vec<Vec2>> {
    let mut adjacency: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        adjacency.entry(key(a)).or_default().push(i);
        adjacency.entry(key(b)).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (a, b) = segments[start];
        let mut line = vec![a, b];
        // extend forward then backward
        for dir in 0..2 {
            loop {
                let end = *line.last().unwrap();
                let next = adjacency
                    .get(&key(end))
                    .and_then(|ids| ids.iter().find(|&&i| !used[i]).copied());
                match next {
                    Some(i) => {
                        used[i] = true;
                        let (p, q) = segments[i];
                        line.push(if key(p) == key(end) { q } else { p });
                    }
                    None => break,
                }
            }
            if dir == 0 {
                line.reverse();
            }
        }
        polylines.push(line);
    }
    polylines
}

/// Render isoflux contours of a grid at the given levels.
pub fn contour_svg(grid: &FluxGrid, levels: &[f64]) -> Result<String, SvgError> {
    if levels.is_empty() {
        return Err(SvgError::EmptyInput);
    }
    let mut doc = SvgDocument::new(grid.bounds.min, grid.bounds.max);
    let palette = ["#d73027", "#fc8d59", "#fee090", "#91bfdb", "#4575b4", "#313695"];
    for (i, &level) in levels.iter().enumerate() {
        for line in marching_squares(grid, level) {
            doc.polyline(&line, palette[i % palette.len()], 0.002)?;
        }
    }
    Ok(doc.render())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heatfield::{Bounds, DecayModel, HeatScene, Heater};

    #[test]
    fn single_polyline_is_one_element() {
        let mut doc = SvgDocument::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        doc.polyline(
            &[Vec2::new(0.0, 0.0), Vec2::new(0.5, 0.5), Vec2::new(1.0, 0.2)],
            "black",
            0.01,
        )
        .unwrap();
        let svg = doc.render();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.starts_with("<svg xmlns"));
    }

    #[test]
    fn empty_polyline_rejected() {
        let mut doc = SvgDocument::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        assert!(matches!(doc.polyline(&[], "black", 0.01), Err(SvgError::EmptyInput)));
    }

    #[test]
    fn constant_grid_has_no_contours() {
        let grid = FluxGrid {
            nx: 8,
            ny: 8,
            bounds: Bounds {
                min: Vec2::new(0.0, 0.0),
                max: Vec2::new(1.0, 1.0),
            },
            values: vec![2.0; 64],
        };
        assert!(marching_squares(&grid, 5.0).is_empty());
        assert!(marching_squares(&grid, 2.0).is_empty());
    }

    #[test]
    fn inverse_square_contour_is_a_circle() {
        let scene = HeatScene {
            heaters: vec![Heater {
                position: Vec2::new(0.0, 0.0),
                ref_flux: 1000.0,
                ref_distance: 0.1,
                surface_temp: 600.0,
            }],
            occluders: vec![],
            ambient_temp: 293.15,
            decay_model: DecayModel::InverseSquare,
        };
        let bounds = Bounds {
            min: Vec2::new(-1.0, -1.0),
            max: Vec2::new(1.0, 1.0),
        };
        let grid = crate::heatfield::isoflux_grid(&scene, bounds, 200, 200).unwrap();
        let cell = 2.0 / 200.0;
        let level = 100.0;
        let expected_r = 0.1 * (1000.0f64 / level).sqrt();
        let lines = marching_squares(&grid, level);
        assert!(!lines.is_empty());
        let mut count = 0;
        for line in &lines {
            for p in line {
                assert!(
                    (p.norm() - expected_r).abs() < 0.5 * cell,
                    "vertex at radius {} vs {}",
                    p.norm(),
                    expected_r
                );
                count += 1;
            }
        }
        assert!(count > 50);
    }
}
