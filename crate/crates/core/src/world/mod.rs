//! Obstacles, costmaps, footprint costing and generated clutter.

mod costmap;
mod generate;
pub mod geometry;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::vehicle::State;
pub use costmap::{
    footprint_cost, rasterize, rasterize_with, visible_costmap, Costmap, FootprintCost, Inflation, LETHAL,
};
pub use generate::{generate_cluttered, ClutterSpec, ObstacleKind};
use geometry::Point;

/// Axis-aligned world rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bounds {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Bounds { x_min, y_min, x_max, y_max }
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.y_min, self.x_max, self.y_max].iter().all(|v| v.is_finite());
        if !finite || !(self.x_max > self.x_min) || !(self.y_max > self.y_min) {
            return Err(invalid(format!("degenerate bounds {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Point,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    /// Counter-clockwise, possibly concave.
    pub vertices: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ObstacleSet {
    pub circles: Vec<Circle>,
    pub polygons: Vec<Polygon>,
}

impl ObstacleSet {
    pub fn is_empty(&self) -> bool {
        self.circles.is_empty() && self.polygons.is_empty()
    }

    pub fn len(&self) -> usize {
        self.circles.len() + self.polygons.len()
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.circles {
            if !(c.radius > 0.0) || !c.center.iter().all(|v| v.is_finite()) {
                return Err(invalid(format!("bad circle {c:?}")));
            }
        }
        for p in &self.polygons {
            if p.vertices.len() < 3 || !geometry::is_simple(&p.vertices) {
                return Err(invalid("polygons need >= 3 vertices and no self-intersections"));
            }
        }
        Ok(())
    }

    /// Distance from `p` to the nearest obstacle boundary; 0 inside an obstacle.
    pub fn clearance(&self, p: Point) -> f64 {
        let circles = self.circles.iter().map(|c| (geometry::dist(p, c.center) - c.radius).max(0.0));
        let polys = self.polygons.iter().map(|poly| {
            if geometry::point_in_polygon(p, &poly.vertices) {
                0.0
            } else {
                geometry::polygon_boundary_distance(p, &poly.vertices)
            }
        });
        circles.chain(polys).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Footprint {
    Disc { radius: f64 },
    /// Vertices in the body frame, origin at the reference point, +x forward.
    Polygon { vertices: Vec<Point> },
}

impl Default for Footprint {
    fn default() -> Self {
        Footprint::Disc { radius: 0.25 }
    }
}

impl Footprint {
    pub fn validate(&self) -> Result<()> {
        match self {
            Footprint::Disc { radius } if *radius > 0.0 => Ok(()),
            Footprint::Polygon { vertices } if vertices.len() >= 3 && geometry::is_simple(vertices) => Ok(()),
            other => Err(invalid(format!("bad footprint {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub range: f64,
}

impl SensorModel {
    pub fn new(range: f64) -> Result<Self> {
        if !(range > 0.0) {
            return Err(invalid(format!("sensor range must be > 0, got {range}")));
        }
        Ok(SensorModel { range })
    }
}

/// Closed-ball test on position only.
pub fn is_goal_reached(state: &State, goal: Point, tol: f64) -> bool {
    state.distance_to(goal) <= tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn goal_ball_is_closed() {
        let goal = [3.0, 4.0];
        assert!(is_goal_reached(&State::new(3.0, 4.0, 1.0), goal, 0.3));
        assert!(is_goal_reached(&State::new(0.0, 0.0, 0.0), goal, 5.0));
        assert!(!is_goal_reached(&State::new(0.0, 0.0, 0.0), goal, 5.0 - 1e-9));
    }

    #[test]
    fn footprint_serde_shape() {
        let fp: Footprint = serde_json::from_str(r#"{"kind":"disc","radius":0.3}"#).unwrap();
        assert_eq!(fp, Footprint::Disc { radius: 0.3 });
    }

    #[test]
    fn obstacle_validation() {
        let mut set = ObstacleSet::default();
        set.circles.push(Circle { center: [0.0, 0.0], radius: -1.0 });
        assert!(set.validate().is_err());
        let set = ObstacleSet {
            circles: vec![],
            polygons: vec![Polygon { vertices: vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]] }],
        };
        assert!(set.validate().is_err());
    }
}
