use serde::{Deserialize, Serialize};

use super::geometry::{self, Point};
use super::{Bounds, Footprint, ObstacleSet, SensorModel};
use crate::error::{invalid, Result};
use crate::vehicle::State;

pub const LETHAL: u8 = 255;
const INSCRIBED: f64 = 254.0;

/// Exponentially decaying cost band around obstacles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inflation {
    /// Band width, m.
    pub width: f64,
    /// Decay constant, 1/m.
    pub decay: f64,
}

impl Default for Inflation {
    fn default() -> Self {
        Inflation { width: 0.2, decay: 10.0 }
    }
}

/// Row-major grid; row 0 is the bottom edge (`y = origin[1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Costmap {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Point,
    cells: Vec<u8>,
}

impl Costmap {
    pub fn new(width: usize, height: usize, resolution: f64, origin: Point, cells: Vec<u8>) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(invalid(format!("resolution must be > 0, got {resolution}")));
        }
        if width * height != cells.len() {
            return Err(invalid(format!("{}x{} grid with {} cells", width, height, cells.len())));
        }
        Ok(Costmap { width, height, resolution, origin, cells })
    }

    pub fn empty(bounds: &Bounds, resolution: f64) -> Result<Self> {
        bounds.validate()?;
        if !(resolution > 0.0) {
            return Err(invalid(format!("resolution must be > 0, got {resolution}")));
        }
        let width = (bounds.width() / resolution).ceil() as usize;
        let height = (bounds.height() / resolution).ceil() as usize;
        Self::new(width, height, resolution, [bounds.x_min, bounds.y_min], vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::new(
            self.origin[0],
            self.origin[1],
            self.origin[0] + self.width as f64 * self.resolution,
            self.origin[1] + self.height as f64 * self.resolution,
        )
    }

    pub fn get(&self, ix: usize, iy: usize) -> u8 {
        self.cells[iy * self.width + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        [
            self.origin[0] + (ix as f64 + 0.5) * self.resolution,
            self.origin[1] + (iy as f64 + 0.5) * self.resolution,
        ]
    }

    /// Cell containing `p`, or `None` off the map.
    pub fn cell_of(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p[0] - self.origin[0]) / self.resolution;
        let fy = (p[1] - self.origin[1]) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn count_lethal(&self) -> usize {
        self.cells.iter().filter(|&&c| c == LETHAL).count()
    }

    // Inclusive cell index range covering [lo, hi] along one axis, clipped to the grid.
    fn span(&self, lo: f64, hi: f64, origin: f64, n: usize) -> Option<(usize, usize)> {
        let a = ((lo - origin) / self.resolution).floor();
        let b = ((hi - origin) / self.resolution).floor();
        if b < 0.0 || a >= n as f64 {
            return None;
        }
        Some((a.max(0.0) as usize, (b as usize).min(n - 1)))
    }

    /// Binary PGM (P5), top row first, free space white and lethal black.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        for iy in (0..self.height).rev() {
            let row = &self.cells[iy * self.width..(iy + 1) * self.width];
            out.extend(row.iter().map(|c| 255 - c));
        }
        out
    }
}

pub fn rasterize(obstacles: &ObstacleSet, bounds: &Bounds, resolution: f64) -> Result<Costmap> {
    rasterize_with(obstacles, bounds, resolution, &Inflation::default())
}

/// Lethal where a cell center lies inside an obstacle; `254 * exp(-decay * d)`
/// within the inflation band at distance `d`; zero elsewhere.
pub fn rasterize_with(
    obstacles: &ObstacleSet,
    bounds: &Bounds,
    resolution: f64,
    inflation: &Inflation,
) -> Result<Costmap> {
    obstacles.validate()?;
    let mut map = Costmap::empty(bounds, resolution)?;
    let band = inflation.width.max(0.0);
    let cost_at = |d: f64| -> u8 {
        if d <= 0.0 {
            LETHAL
        } else if d <= band {
            (INSCRIBED * (-inflation.decay * d).exp()).round().min(INSCRIBED) as u8
        } else {
            0
        }
    };

    let paint = |map: &mut Costmap, lo: Point, hi: Point, dist: &dyn Fn(Point) -> f64| {
        let (Some((x0, x1)), Some((y0, y1))) = (
            map.span(lo[0] - band, hi[0] + band, map.origin[0], map.width),
            map.span(lo[1] - band, hi[1] + band, map.origin[1], map.height),
        ) else {
            return;
        };
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                let c = cost_at(dist(map.cell_center(ix, iy)));
                let cell = &mut map.cells[iy * map.width + ix];
                *cell = (*cell).max(c);
            }
        }
    };

    for c in &obstacles.circles {
        let r = c.radius;
        paint(&mut map, [c.center[0] - r, c.center[1] - r], [c.center[0] + r, c.center[1] + r], &|p| {
            geometry::dist(p, c.center) - r
        });
    }
    for poly in &obstacles.polygons {
        let v = &poly.vertices;
        let lo = v.iter().fold([f64::INFINITY; 2], |a, p| [a[0].min(p[0]), a[1].min(p[1])]);
        let hi = v.iter().fold([f64::NEG_INFINITY; 2], |a, p| [a[0].max(p[0]), a[1].max(p[1])]);
        paint(&mut map, lo, hi, &|p| {
            if geometry::point_in_polygon(p, v) {
                0.0
            } else {
                geometry::polygon_boundary_distance(p, v)
            }
        });
    }
    Ok(map)
}

/// Range-limited copy of `full`: cells whose centers are beyond the sensor
/// range from `pose` read as free.
pub fn visible_costmap(full: &Costmap, pose: &State, sensor: &SensorModel) -> Costmap {
    let mut out = full.clone();
    let r2 = sensor.range * sensor.range;
    for iy in 0..full.height {
        for ix in 0..full.width {
            let c = full.cell_center(ix, iy);
            let (dx, dy) = (c[0] - pose.x, c[1] - pose.y);
            if dx * dx + dy * dy > r2 {
                out.cells[iy * full.width + ix] = 0;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FootprintCost {
    Collided,
    /// Highest cell cost under the footprint, in `[0, 1]`.
    Free(f64),
}

impl FootprintCost {
    pub fn is_collided(&self) -> bool {
        matches!(self, FootprintCost::Collided)
    }
}

/// Cost of `fp` placed at `state`. Leaving the map counts as a collision.
pub fn footprint_cost(map: &Costmap, state: &State, fp: &Footprint) -> FootprintCost {
    let b = map.bounds();
    let center = state.position();
    let mut worst = match map.cell_of(center) {
        Some((ix, iy)) => map.get(ix, iy),
        None => return FootprintCost::Collided,
    };
    match fp {
        Footprint::Disc { radius } => {
            let r = *radius;
            if center[0] - r < b.x_min || center[0] + r > b.x_max || center[1] - r < b.y_min || center[1] + r > b.y_max
            {
                return FootprintCost::Collided;
            }
            let (Some((x0, x1)), Some((y0, y1))) = (
                map.span(center[0] - r, center[0] + r, map.origin[0], map.width),
                map.span(center[1] - r, center[1] + r, map.origin[1], map.height),
            ) else {
                return FootprintCost::Collided;
            };
            let r2 = r * r;
            let inside = |ix: usize, iy: usize| {
                let c = map.cell_center(ix, iy);
                let (dx, dy) = (c[0] - center[0], c[1] - center[1]);
                dx * dx + dy * dy <= r2
            };
            // A disc meets each row in one contiguous run of cells.
            for iy in y0..=y1 {
                let Some(lo) = (x0..=x1).find(|&ix| inside(ix, iy)) else { continue };
                let hi = (lo..=x1).rev().find(|&ix| inside(ix, iy)).unwrap_or(lo);
                let row = &map.cells[iy * map.width + lo..=iy * map.width + hi];
                worst = worst.max(row.iter().copied().max().unwrap_or(0));
                if worst == LETHAL {
                    break;
                }
            }
        }
        Footprint::Polygon { vertices } => {
            let (sin, cos) = state.theta.sin_cos();
            let world: Vec<Point> = vertices
                .iter()
                .map(|v| [center[0] + cos * v[0] - sin * v[1], center[1] + sin * v[0] + cos * v[1]])
                .collect();
            if world.iter().any(|p| !b.contains(*p)) {
                return FootprintCost::Collided;
            }
            let lo = world.iter().fold([f64::INFINITY; 2], |a, p| [a[0].min(p[0]), a[1].min(p[1])]);
            let hi = world.iter().fold([f64::NEG_INFINITY; 2], |a, p| [a[0].max(p[0]), a[1].max(p[1])]);
            if let (Some((x0, x1)), Some((y0, y1))) = (
                map.span(lo[0], hi[0], map.origin[0], map.width),
                map.span(lo[1], hi[1], map.origin[1], map.height),
            ) {
                for iy in y0..=y1 {
                    for ix in x0..=x1 {
                        if geometry::point_in_polygon(map.cell_center(ix, iy), &world) {
                            worst = worst.max(map.get(ix, iy));
                        }
                    }
                }
            }
        }
    }
    if worst == LETHAL {
        FootprintCost::Collided
    } else {
        FootprintCost::Free(worst as f64 / INSCRIBED)
    }
}
