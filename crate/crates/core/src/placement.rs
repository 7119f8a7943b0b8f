//! Choosing locations for additional anchors.
//!
//! The Voronoi-vertex method adds anchors one at a time at the vertex of the
//! clipped anchor Voronoi diagram farthest from every existing anchor, then
//! rebuilds the diagram. Region corners and boundary intersections count as
//! vertices, so the candidate set is never empty.

use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{voronoi_diagram, Point, Region};
use crate::propagation::Anchor;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMethod {
    VoronoiVertices,
    Random,
}

impl PlacementMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PlacementMethod::VoronoiVertices => "voronoi_vertices",
            PlacementMethod::Random => "random",
        }
    }
}

impl FromStr for PlacementMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "voronoi_vertices" | "voronoi" => Ok(PlacementMethod::VoronoiVertices),
            "random" => Ok(PlacementMethod::Random),
            other => Err(Error::param(format!("unknown placement method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementPlan {
    pub existing: Vec<Anchor>,
    /// New anchor locations in the order they were chosen.
    pub added: Vec<Point>,
    /// Distance from each added point to the nearest anchor present at its step.
    pub min_distances: Vec<f64>,
    pub method: PlacementMethod,
}

impl PlacementPlan {
    /// Existing anchors followed by the added ones at `tx_power_dbm`.
    pub fn all_anchors(&self, tx_power_dbm: f64) -> Result<Vec<Anchor>> {
        let mut out = self.existing.clone();
        for p in &self.added {
            out.push(Anchor::from_dbm(*p, tx_power_dbm)?);
        }
        Ok(out)
    }

    /// Writes `step,x,y,min_dist` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,x,y,min_dist")?;
        for (i, (p, d)) in self.added.iter().zip(&self.min_distances).enumerate() {
            writeln!(out, "{},{},{},{d}", i + 1, p.x, p.y)?;
        }
        Ok(())
    }
}

fn min_distance(p: &Point, anchors: &[Point]) -> f64 {
    anchors.iter().map(|a| a.distance(p)).fold(f64::INFINITY, f64::min)
}

/// Distances closer than this are treated as ties.
const TIE_TOLERANCE: f64 = 1e-9;

/// Vertices of the clipped Voronoi diagram of `anchors`, each with its
/// distance to the nearest anchor, farthest first. Near-equal distances are
/// ordered lexicographically by `(x, y)`. Vertices coinciding with an anchor
/// are left out.
pub fn voronoi_vertex_candidates(anchors: &[Point], region: &Region) -> Result<Vec<(Point, f64)>> {
    if anchors.is_empty() {
        return Err(Error::param("placement needs at least one existing anchor"));
    }
    let vd = voronoi_diagram(anchors, region)?;
    let mut out: Vec<(Point, f64)> = vd
        .vertices
        .iter()
        .map(|v| (*v, min_distance(v, anchors)))
        .filter(|&(_, d)| d > TIE_TOLERANCE)
        .collect();
    out.sort_by(|a, b| {
        let key = |d: f64| (d / TIE_TOLERANCE).round();
        key(b.1).total_cmp(&key(a.1)).then_with(|| a.0.lex_cmp(&b.0))
    });
    Ok(out)
}

/// Adds `count` anchors with `method`. The random method draws uniformly over
/// the region from a stream keyed by `seed`.
pub fn place_new_anchors(
    anchors: &[Anchor],
    region: &Region,
    count: usize,
    method: PlacementMethod,
    seed: u64,
) -> Result<PlacementPlan> {
    if count == 0 {
        return Err(Error::param("placement count must be at least 1"));
    }
    let mut current: Vec<Point> = anchors.iter().map(|a| a.location).collect();
    let mut added = Vec::with_capacity(count);
    let mut dists = Vec::with_capacity(count);
    match method {
        PlacementMethod::VoronoiVertices => {
            for _ in 0..count {
                let (p, d) = *voronoi_vertex_candidates(&current, region)?
                    .first()
                    .ok_or_else(|| Error::Inconsistent("no Voronoi vertex away from the anchors".into()))?;
                current.push(p);
                added.push(p);
                dists.push(d);
            }
        }
        PlacementMethod::Random => {
            let mut r = rng::stream(seed, &[rng::tag::PLACEMENT]);
            while added.len() < count {
                let p = Point::new(
                    region.min_x() + r.random::<f64>() * region.width,
                    region.min_y() + r.random::<f64>() * region.height,
                );
                let d = min_distance(&p, &current);
                if d > TIE_TOLERANCE {
                    current.push(p);
                    added.push(p);
                    dists.push(d);
                }
            }
        }
    }
    Ok(PlacementPlan {
        existing: anchors.to_vec(),
        added,
        min_distances: dists,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{level_field_approx, Scenario};
    use crate::geometry::raster_points;
    use crate::propagation::AnalyticChannelParams;

    fn anchor(x: f64, y: f64) -> Anchor {
        Anchor::from_dbm(Point::new(x, y), 20.0).unwrap()
    }

    /// Farthest raster point from `sites` and its distance.
    fn brute_farthest(sites: &[Point], region: &Region, res: f64) -> (Point, f64) {
        raster_points(region, res)
            .unwrap()
            .into_iter()
            .map(|p| (p, min_distance(&p, sites)))
            .fold((Point::default(), f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
    }

    #[test]
    fn central_anchor_favors_corners() {
        let r = Region::with_size(10.0, 6.0).unwrap();
        let c = voronoi_vertex_candidates(&[r.center()], &r).unwrap();
        assert_eq!(c.len(), 4);
        let top: Vec<Point> = c.iter().map(|x| x.0).collect();
        assert_eq!(top, vec![Point::new(0.0, 0.0), Point::new(0.0, 6.0), Point::new(10.0, 0.0), Point::new(10.0, 6.0)]);
        assert!(c.iter().all(|x| (x.1 - 34f64.sqrt()).abs() < 1e-12));
    }

    #[test]
    fn corner_anchors_favor_center() {
        let r = Region::with_size(8.0, 8.0).unwrap();
        let corners: Vec<Point> = r.corners().to_vec();
        let c = voronoi_vertex_candidates(&corners, &r).unwrap();
        assert!(c[0].0.distance(&Point::new(4.0, 4.0)) < 1e-9);
        let anchors: Vec<Anchor> = corners.iter().map(|p| anchor(p.x, p.y)).collect();
        let plan = place_new_anchors(&anchors, &r, 1, PlacementMethod::VoronoiVertices, 0).unwrap();
        assert!(plan.added[0].distance(&Point::new(4.0, 4.0)) < 1e-9);
        assert!((plan.min_distances[0] - 32f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn midline_pair_matches_raster_search() {
        let r = Region::with_size(12.0, 8.0).unwrap();
        let sites = [Point::new(3.0, 4.0), Point::new(9.0, 4.0)];
        let c = voronoi_vertex_candidates(&sites, &r).unwrap();
        let (_, bd) = brute_farthest(&sites, &r, 0.1);
        assert!((c[0].1 - bd).abs() <= 0.1, "{} vs {bd}", c[0].1);
        // The bisector x = 6 meets the boundary at (6, 0) and (6, 8): both
        // lie 5 m from the anchors, but the region corners are farther still.
        assert!(c.iter().any(|(p, d)| p.distance(&Point::new(6.0, 0.0)) < 1e-9 && (d - 5.0).abs() < 1e-9));
    }

    #[test]
    fn greedy_second_step_matches_two_step_raster_search() {
        let r = Region::with_size(10.0, 10.0).unwrap();
        let plan = place_new_anchors(&[anchor(5.0, 5.0)], &r, 2, PlacementMethod::VoronoiVertices, 0).unwrap();
        let mut sites = vec![Point::new(5.0, 5.0)];
        for (i, p) in plan.added.iter().enumerate() {
            let (_, bd) = brute_farthest(&sites, &r, 0.1);
            assert!((plan.min_distances[i] - bd).abs() <= 0.1, "step {i}: {} vs {bd}", plan.min_distances[i]);
            sites.push(*p);
        }
        // The second pick must move away from the first.
        assert!(plan.added[1].distance(&plan.added[0]) > 5.0);
    }

    #[test]
    fn each_added_point_is_the_current_top_candidate() {
        let r = Region::with_size(30.0, 18.0).unwrap();
        let anchors = vec![anchor(4.0, 3.0), anchor(20.0, 9.0), anchor(12.0, 15.0)];
        let plan = place_new_anchors(&anchors, &r, 5, PlacementMethod::VoronoiVertices, 0).unwrap();
        let mut sites: Vec<Point> = anchors.iter().map(|a| a.location).collect();
        for (p, d) in plan.added.iter().zip(&plan.min_distances) {
            let c = voronoi_vertex_candidates(&sites, &r).unwrap();
            assert_eq!(c[0].0, *p);
            assert!((min_distance(p, &sites) - d).abs() < 1e-12);
            assert!(c.iter().all(|x| x.1 <= *d + 1e-9));
            assert!(r.contains(p));
            sites.push(*p);
        }
    }

    #[test]
    fn random_method_is_seeded() {
        let r = Region::with_size(30.0, 18.0).unwrap();
        let a = [anchor(1.0, 1.0)];
        let p1 = place_new_anchors(&a, &r, 4, PlacementMethod::Random, 9).unwrap();
        let p2 = place_new_anchors(&a, &r, 4, PlacementMethod::Random, 9).unwrap();
        let p3 = place_new_anchors(&a, &r, 4, PlacementMethod::Random, 10).unwrap();
        assert_eq!(p1, p2);
        assert_ne!(p1.added, p3.added);
        assert!(p1.added.iter().all(|p| r.contains(p)));
        assert!(place_new_anchors(&a, &r, 0, PlacementMethod::Random, 9).is_err());
    }

    #[test]
    fn added_anchors_raise_the_level_field_everywhere() {
        let r = Region::with_size(30.0, 18.0).unwrap();
        let anchors = vec![anchor(5.0, 5.0), anchor(25.0, 12.0)];
        let plan = place_new_anchors(&anchors, &r, 3, PlacementMethod::VoronoiVertices, 0).unwrap();
        let params = AnalyticChannelParams::noisy(2.0, 0.0, 1.0).unwrap();
        let before = Scenario::new(anchors, params).unwrap();
        let after = Scenario::new(plan.all_anchors(20.0).unwrap(), params).unwrap();
        for u in raster_points(&r, 0.5).unwrap() {
            assert!(level_field_approx(&u, &after) >= level_field_approx(&u, &before));
        }
    }

    #[test]
    fn plan_csv_layout() {
        let r = Region::with_size(2.0, 2.0).unwrap();
        let plan = place_new_anchors(&[anchor(1.0, 1.0)], &r, 1, PlacementMethod::VoronoiVertices, 0).unwrap();
        let mut buf = Vec::new();
        plan.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,x,y,min_dist\n1,0,0,1.414"));
    }
}
