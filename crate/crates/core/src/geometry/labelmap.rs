use std::io::Write;

use rayon::prelude::*;

use super::{Point, Region, TrainingGrid};
use crate::error::{Error, Result};

pub const DEFAULT_RESOLUTION: f64 = 0.1;

/// Raster of training-point labels over a region, sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub region: Region,
    /// Requested raster pitch in meters.
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    /// Row-major labels, `labels[iy * nx + ix]`.
    pub labels: Vec<usize>,
}

fn raster_dims(region: &Region, resolution: f64) -> Result<(usize, usize)> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::param(format!("raster resolution must be positive, got {resolution}")));
    }
    let n = |side: f64| ((side / resolution) - 1e-9).ceil().max(1.0) as usize;
    Ok((n(region.width), n(region.height)))
}

impl LabelMap {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        raster_center(&self.region, self.nx, self.ny, ix, iy)
    }

    pub fn label(&self, ix: usize, iy: usize) -> usize {
        self.labels[iy * self.nx + ix]
    }

    /// Label of the raster cell containing `p` (clamped to the region).
    pub fn label_at(&self, p: &Point) -> usize {
        let fx = (p.x - self.region.min_x()) / self.region.width * self.nx as f64;
        let fy = (p.y - self.region.min_y()) / self.region.height * self.ny as f64;
        let ix = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let iy = (fy.floor().max(0.0) as usize).min(self.ny - 1);
        self.label(ix, iy)
    }

    /// Iterates `(ix, iy, center, label)` in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, Point, usize)> + '_ {
        (0..self.ny).flat_map(move |iy| {
            (0..self.nx).map(move |ix| (ix, iy, self.cell_center(ix, iy), self.label(ix, iy)))
        })
    }

    /// Writes `ix,iy,label` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "ix,iy,label")?;
        for (ix, iy, _, label) in self.cells() {
            writeln!(out, "{ix},{iy},{label}")?;
        }
        Ok(())
    }
}

pub(crate) fn raster_center(region: &Region, nx: usize, ny: usize, ix: usize, iy: usize) -> Point {
    let dx = region.width / nx as f64;
    let dy = region.height / ny as f64;
    Point::new(
        region.min_x() + (ix as f64 + 0.5) * dx,
        region.min_y() + (iy as f64 + 0.5) * dy,
    )
}

/// Raster centers of `region` at `resolution`, row-major.
pub fn raster_points(region: &Region, resolution: f64) -> Result<Vec<Point>> {
    let (nx, ny) = raster_dims(region, resolution)?;
    Ok((0..ny)
        .flat_map(|iy| (0..nx).map(move |ix| raster_center(region, nx, ny, ix, iy)))
        .collect())
}

/// Labels each raster center with the training point whose fingerprint is
/// nearest under `metric`; ties go to the lowest training index.
pub fn modified_voronoi<F, M>(
    grid: &TrainingGrid,
    fingerprint_fn: F,
    metric: M,
    resolution: f64,
) -> Result<LabelMap>
where
    F: Fn(&Point) -> Vec<f64> + Sync,
    M: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    if grid.is_empty() {
        return Err(Error::param("label map needs a non-empty training grid"));
    }
    let region = grid.region;
    let (nx, ny) = raster_dims(&region, resolution)?;
    let stored: Vec<Vec<f64>> = grid.points.iter().map(&fingerprint_fn).collect();

    let labels: Vec<usize> = (0..ny)
        .into_par_iter()
        .flat_map_iter(|iy| {
            let stored = &stored;
            let fingerprint_fn = &fingerprint_fn;
            let metric = &metric;
            (0..nx).map(move |ix| {
                let f = fingerprint_fn(&raster_center(&region, nx, ny, ix, iy));
                let mut best = (0, f64::INFINITY);
                for (i, s) in stored.iter().enumerate() {
                    let d = metric(&f, s);
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                best.0
            })
        })
        .collect();

    Ok(LabelMap {
        region,
        resolution,
        nx,
        ny,
        labels,
    })
}

/// Ordinary Voronoi labels: the identity embedding under the Euclidean metric.
pub fn geometric_label_map(grid: &TrainingGrid, resolution: f64) -> Result<LabelMap> {
    modified_voronoi(grid, |p| vec![p.x, p.y], euclidean, resolution)
}

/// Euclidean norm of `a - b`.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Per training point, the largest distance to a raster center carrying its label.
/// Points that own no raster cell get zero.
pub fn cell_covering_radii(grid: &TrainingGrid, labelmap: &LabelMap) -> Result<Vec<f64>> {
    let mut radii = vec![0.0f64; grid.len()];
    for (ix, iy, center, label) in labelmap.cells() {
        let v = grid.points.get(label).ok_or_else(|| {
            Error::Inconsistent(format!(
                "raster cell ({ix}, {iy}) carries label {label} but the grid has {} points",
                grid.len()
            ))
        })?;
        radii[label] = radii[label].max(center.distance(v));
    }
    Ok(radii)
}

/// Largest covering radius over all (modified) Voronoi cells.
pub fn max_covering_radius(grid: &TrainingGrid, labelmap: &LabelMap) -> Result<f64> {
    Ok(cell_covering_radii(grid, labelmap)?
        .into_iter()
        .fold(0.0, f64::max))
}
