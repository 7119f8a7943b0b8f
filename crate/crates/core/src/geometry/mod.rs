//! Planar geometry of the localization space: points, the rectangular region,
//! training grids, Voronoi tessellations and fingerprint label maps.

mod grid;
mod labelmap;
mod voronoi;

pub use grid::{
    generate_hex_grid, generate_random_grid, generate_square_grid, grid_with_count, GridKind,
    TrainingGrid,
};
pub use labelmap::{
    cell_covering_radii, euclidean, geometric_label_map, max_covering_radius, modified_voronoi, raster_points,
    LabelMap,
    DEFAULT_RESOLUTION,
};
pub use voronoi::{covering_radius, polygon_area, voronoi_diagram, VoronoiDiagram};

use crate::error::{Error, Result};

/// A location in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn offset(&self, dx: f64, dy: f64) -> Point {
        Point::new(self.x + dx, self.y + dy)
    }

    /// Lexicographic comparison on (x, y).
    pub fn lex_cmp(&self, other: &Point) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then_with(|| self.y.total_cmp(&other.y))
    }
}

/// Axis-aligned rectangular localization space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub origin: Point,
    pub width: f64,
    pub height: f64,
}

impl Region {
    pub fn new(origin: Point, width: f64, height: f64) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::param("region origin must be finite"));
        }
        if !(width > 0.0 && width.is_finite()) || !(height > 0.0 && height.is_finite()) {
            return Err(Error::param(format!(
                "region sides must be positive, got {width} x {height}"
            )));
        }
        Ok(Self {
            origin,
            width,
            height,
        })
    }

    /// Region anchored at the origin.
    pub fn with_size(width: f64, height: f64) -> Result<Self> {
        Self::new(Point::default(), width, height)
    }

    pub fn min_x(&self) -> f64 {
        self.origin.x
    }

    pub fn min_y(&self) -> f64 {
        self.origin.y
    }

    pub fn max_x(&self) -> f64 {
        self.origin.x + self.width
    }

    pub fn max_y(&self) -> f64 {
        self.origin.y + self.height
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn center(&self) -> Point {
        self.origin.offset(self.width / 2.0, self.height / 2.0)
    }

    /// Closed-rectangle membership.
    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.min_x() && p.x <= self.max_x() && p.y >= self.min_y() && p.y <= self.max_y()
    }

    /// Corners in counter-clockwise order starting at the origin.
    pub fn corners(&self) -> [Point; 4] {
        [
            Point::new(self.min_x(), self.min_y()),
            Point::new(self.max_x(), self.min_y()),
            Point::new(self.max_x(), self.max_y()),
            Point::new(self.min_x(), self.max_y()),
        ]
    }

    /// Smallest region containing all `points`, padded by `margin` on every side.
    pub fn bounding(points: &[Point], margin: f64) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::input("cannot bound an empty point set"))?;
        let (mut lo, mut hi) = (*first, *first);
        for p in points {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        Region::new(
            lo.offset(-margin, -margin),
            hi.x - lo.x + 2.0 * margin,
            hi.y - lo.y + 2.0 * margin,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_rejects_degenerate_sides() {
        assert!(Region::with_size(0.0, 1.0).is_err());
        assert!(Region::with_size(1.0, -2.0).is_err());
        assert!(Region::with_size(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn region_contains_its_boundary() {
        let r = Region::with_size(2.0, 1.0).unwrap();
        assert!(r.contains(&Point::new(2.0, 1.0)));
        assert!(r.contains(&Point::new(0.0, 0.5)));
        assert!(!r.contains(&Point::new(2.0001, 0.5)));
        assert_eq!(r.center(), Point::new(1.0, 0.5));
    }

    #[test]
    fn bounding_box_pads_points() {
        let r = Region::bounding(&[Point::new(1.0, 2.0), Point::new(4.0, 3.0)], 1.0).unwrap();
        assert_eq!(r.origin, Point::new(0.0, 1.0));
        assert_eq!(r.width, 5.0);
        assert_eq!(r.height, 3.0);
    }
}
