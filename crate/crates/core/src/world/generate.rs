use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{self, Point};
use super::{Bounds, Circle, ObstacleSet, Polygon};
use crate::error::{Error, Result};
use crate::rng::StreamKey;

const MAX_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleKind {
    Circle,
    ConcavePolygon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClutterSpec {
    pub bounds: Bounds,
    pub n_obstacles: usize,
    pub kind: ObstacleKind,
    /// Obstacle-free radius around every point in `keep_free`.
    pub min_clearance: f64,
    pub keep_free: Vec<Point>,
    /// Range of the outer obstacle radius, m.
    #[serde(default = "default_radius_range")]
    pub radius_range: [f64; 2],
    /// Minimum gap between the bounding circles of two obstacles, m.
    #[serde(default)]
    pub min_gap: f64,
    /// When set, pocket openings point at this location (within +-0.5 rad).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mouth_toward: Option<Point>,
}

fn default_radius_range() -> [f64; 2] {
    [1.0, 2.0]
}

/// Star polygon around `center` with one vertex pushed through the centre
/// to the far side, which opens a pocket between its two neighbours.
fn concave_star<R: Rng + ?Sized>(center: Point, radius: f64, mouth: Option<f64>, rng: &mut R) -> Vec<Point> {
    let k: usize = rng.random_range(6..=9);
    let gap = TAU / k as f64;
    let phase = rng.random_range(0.0..TAU);
    let mut angles: Vec<f64> = (0..k).map(|i| phase + gap * (i as f64 + rng.random_range(-0.2..0.2))).collect();
    let mut radii: Vec<f64> = (0..k).map(|_| radius * rng.random_range(0.75..1.0)).collect();
    let notch = rng.random_range(0..k);
    radii[notch] = -radius * rng.random_range(0.1..0.45);
    if let Some(dir) = mouth {
        // Rotate the whole star so the notch sits on `dir`.
        let turn = dir + rng.random_range(-0.5..0.5) - angles[notch];
        angles.iter_mut().for_each(|a| *a += turn);
    }
    (0..k)
        .map(|i| [center[0] + angles[i].cos() * radii[i], center[1] + angles[i].sin() * radii[i]])
        .collect()
}

/// Rejection-sampled clutter, deterministic in `seed`.
pub fn generate_cluttered(seed: u64, spec: &ClutterSpec) -> Result<ObstacleSet> {
    spec.bounds.validate()?;
    let [r_lo, r_hi] = spec.radius_range;
    if !(r_lo > 0.0 && r_hi >= r_lo) {
        return Err(Error::Config(format!("bad radius range {:?}", spec.radius_range)));
    }
    let mut rng = StreamKey::new(seed).named("clutter").rng();
    let mut out = ObstacleSet::default();
    let mut placed: Vec<(Point, f64)> = Vec::new();
    let mut attempts = 0;
    while out.len() < spec.n_obstacles {
        attempts += 1;
        if attempts > MAX_ATTEMPTS {
            return Err(Error::Infeasible(format!(
                "placed {} of {} obstacles after {MAX_ATTEMPTS} attempts",
                out.len(),
                spec.n_obstacles
            )));
        }
        let b = &spec.bounds;
        let center = [rng.random_range(b.x_min..b.x_max), rng.random_range(b.y_min..b.y_max)];
        let radius = if r_hi > r_lo { rng.random_range(r_lo..r_hi) } else { r_lo };
        let candidate = match spec.kind {
            ObstacleKind::Circle => ObstacleSet { circles: vec![Circle { center, radius }], polygons: vec![] },
            ObstacleKind::ConcavePolygon => {
                let mouth = spec.mouth_toward.map(|t| (t[1] - center[1]).atan2(t[0] - center[0]));
                let vertices = concave_star(center, radius, mouth, &mut rng);
                if !geometry::is_simple(&vertices) {
                    continue;
                }
                ObstacleSet { circles: vec![], polygons: vec![Polygon { vertices }] }
            }
        };
        let spaced = placed.iter().all(|(c, r): &(Point, f64)| {
            geometry::dist(*c, center) >= r + radius + spec.min_gap
        });
        if spaced && spec.keep_free.iter().all(|p| candidate.clearance(*p) >= spec.min_clearance) {
            placed.push((center, radius));
            out.circles.extend(candidate.circles);
            out.polygons.extend(candidate.polygons);
        }
    }
    Ok(out)
}
