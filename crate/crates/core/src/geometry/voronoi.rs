use super::{Point, Region};
use crate::error::{Error, Result};

/// Voronoi tessellation of a rectangular region, one convex cell per site.
#[derive(Debug, Clone)]
pub struct VoronoiDiagram {
    pub sites: Vec<Point>,
    /// Counter-clockwise cell polygons, parallel to `sites`.
    pub cells: Vec<Vec<Point>>,
    /// Distinct cell corners, including boundary intersections and region corners.
    pub vertices: Vec<Point>,
}

const MERGE_TOL: f64 = 1e-9;

/// Keeps the part of `poly` on `site`'s side of the bisector with `other`.
fn clip_by_bisector(poly: &[Point], site: &Point, other: &Point) -> Vec<Point> {
    // Half-plane n·p <= c with n = other - site, c = (|other|² - |site|²) / 2.
    let (nx, ny) = (other.x - site.x, other.y - site.y);
    let mid = Point::new((site.x + other.x) / 2.0, (site.y + other.y) / 2.0);
    let side = |p: &Point| nx * (p.x - mid.x) + ny * (p.y - mid.y);

    let mut out = Vec::with_capacity(poly.len() + 1);
    for (i, cur) in poly.iter().enumerate() {
        let next = &poly[(i + 1) % poly.len()];
        let (sc, sn) = (side(cur), side(next));
        if sc <= 0.0 {
            out.push(*cur);
        }
        if (sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0) {
            let t = sc / (sc - sn);
            out.push(Point::new(
                cur.x + t * (next.x - cur.x),
                cur.y + t * (next.y - cur.y),
            ));
        }
    }
    dedup_ring(out)
}

fn dedup_ring(mut poly: Vec<Point>) -> Vec<Point> {
    poly.dedup_by(|a, b| a.distance(b) <= MERGE_TOL);
    while poly.len() > 1 && poly[0].distance(poly.last().unwrap()) <= MERGE_TOL {
        poly.pop();
    }
    poly
}

/// Clipped Voronoi diagram by per-site half-plane intersection.
pub fn voronoi_diagram(sites: &[Point], region: &Region) -> Result<VoronoiDiagram> {
    if sites.is_empty() {
        return Err(Error::param("voronoi diagram needs at least one site"));
    }
    for (i, s) in sites.iter().enumerate() {
        if !s.is_finite() || !region.contains(s) {
            return Err(Error::param(format!("site {i} ({}, {}) lies outside the region", s.x, s.y)));
        }
        if sites[..i].iter().any(|t| t == s) {
            return Err(Error::param(format!("duplicate site ({}, {})", s.x, s.y)));
        }
    }

    let cells: Vec<Vec<Point>> = sites
        .iter()
        .enumerate()
        .map(|(i, site)| {
            let mut poly = region.corners().to_vec();
            // Nearest sites first so the polygon shrinks quickly.
            let mut others: Vec<&Point> = sites
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, p)| p)
                .collect();
            others.sort_by(|a, b| site.distance(a).total_cmp(&site.distance(b)));
            for other in others {
                if poly.len() < 3 {
                    break;
                }
                poly = clip_by_bisector(&poly, site, other);
            }
            poly
        })
        .collect();

    let mut vertices: Vec<Point> = Vec::new();
    for p in cells.iter().flatten() {
        if !vertices.iter().any(|v| v.distance(p) <= 1e-7) {
            vertices.push(*p);
        }
    }
    vertices.sort_by(Point::lex_cmp);

    Ok(VoronoiDiagram {
        sites: sites.to_vec(),
        cells,
        vertices,
    })
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (&poly[i], &poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum();
    twice.abs() / 2.0
}

/// Radius of the smallest ball around `center` that contains the convex polygon.
pub fn covering_radius(cell_polygon: &[Point], center: &Point) -> Result<f64> {
    if cell_polygon.is_empty() {
        return Err(Error::param("covering radius of an empty polygon"));
    }
    Ok(cell_polygon
        .iter()
        .map(|v| v.distance(center))
        .fold(0.0, f64::max))
}

impl VoronoiDiagram {
    /// Index of the site nearest to `p`, ties to the lowest index.
    pub fn nearest_site(&self, p: &Point) -> usize {
        nearest(&self.sites, p)
    }

    pub fn covering_radius(&self, site: usize) -> Result<f64> {
        covering_radius(&self.cells[site], &self.sites[site])
    }
}

pub(crate) fn nearest(sites: &[Point], p: &Point) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, s) in sites.iter().enumerate() {
        let d = s.distance(p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}
