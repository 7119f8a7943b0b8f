use std::io::Write;

use rand::Rng;

use super::{Point, Region};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridKind {
    Square,
    Hexagonal,
    Random,
    /// Locations read from a measurement trace.
    Surveyed,
}

impl GridKind {
    pub fn name(self) -> &'static str {
        match self {
            GridKind::Square => "square",
            GridKind::Hexagonal => "hex",
            GridKind::Random => "random",
            GridKind::Surveyed => "surveyed",
        }
    }
}

impl std::str::FromStr for GridKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "square" => Ok(GridKind::Square),
            "hex" | "hexagonal" => Ok(GridKind::Hexagonal),
            "random" => Ok(GridKind::Random),
            "surveyed" => Ok(GridKind::Surveyed),
            other => Err(Error::param(format!("unknown grid kind `{other}`"))),
        }
    }
}

/// The set of surveyed training locations.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingGrid {
    pub points: Vec<Point>,
    pub kind: GridKind,
    /// Lattice spacing in meters; zero for random and surveyed grids.
    pub spacing: f64,
    pub region: Region,
}

impl TrainingGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest distance between two distinct grid points, `None` for a single point.
    pub fn min_pairwise_distance(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let d = a.distance(b);
                best = Some(best.map_or(d, |m: f64| m.min(d)));
            }
        }
        best
    }

    /// Writes `index,x,y` rows with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,x,y")?;
        for (i, p) in self.points.iter().enumerate() {
            writeln!(out, "{i},{},{}", p.x, p.y)?;
        }
        Ok(())
    }
}

/// Start coordinate along one axis: half a cell in from the edge, or the
/// middle of the side when the cell is wider than the side.
fn axis_start(lo: f64, side: f64, cell: f64) -> f64 {
    lo + (cell / 2.0).min(side / 2.0)
}

fn axis_positions(start: f64, step: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..)
        .map(move |i| start + i as f64 * step)
        .take_while(move |&v| v < hi)
}

/// Axis-aligned lattice with spacing `cell`, offset `cell/2` from the origin edges.
pub fn generate_square_grid(region: &Region, cell: f64) -> Result<TrainingGrid> {
    if !(cell > 0.0 && cell.is_finite()) {
        return Err(Error::param(format!("square grid cell must be positive, got {cell}")));
    }
    let x0 = axis_start(region.min_x(), region.width, cell);
    let y0 = axis_start(region.min_y(), region.height, cell);
    let points = axis_positions(y0, cell, region.max_y())
        .flat_map(|y| axis_positions(x0, cell, region.max_x()).map(move |x| Point::new(x, y)))
        .collect();
    Ok(TrainingGrid {
        points,
        kind: GridKind::Square,
        spacing: cell,
        region: *region,
    })
}

/// Hexagonal lattice: rows `d·√3/2` apart, odd rows shifted by `d/2`.
pub fn generate_hex_grid(region: &Region, min_distance: f64) -> Result<TrainingGrid> {
    let d = min_distance;
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::param(format!("hex grid distance must be positive, got {d}")));
    }
    let row_step = d * 3f64.sqrt() / 2.0;
    let x0 = axis_start(region.min_x(), region.width, d);
    let y0 = axis_start(region.min_y(), region.height, d);
    let mut points = Vec::new();
    for (row, y) in axis_positions(y0, row_step, region.max_y()).enumerate() {
        let shift = if row % 2 == 1 { d / 2.0 } else { 0.0 };
        points.extend(axis_positions(x0 + shift, d, region.max_x()).map(|x| Point::new(x, y)));
    }
    Ok(TrainingGrid {
        points,
        kind: GridKind::Hexagonal,
        spacing: d,
        region: *region,
    })
}

/// `n` independent uniform points over the region.
pub fn generate_random_grid(region: &Region, n: usize, seed: u64) -> Result<TrainingGrid> {
    if n == 0 {
        return Err(Error::param("random grid needs at least one point"));
    }
    let mut rng = rng::stream(seed, &[rng::tag::GRID, n as u64]);
    let points = (0..n)
        .map(|_| {
            Point::new(
                region.min_x() + rng.random::<f64>() * region.width,
                region.min_y() + rng.random::<f64>() * region.height,
            )
        })
        .collect();
    Ok(TrainingGrid {
        points,
        kind: GridKind::Random,
        spacing: 0.0,
        region: *region,
    })
}

/// Grid of the given kind with (as nearly as possible) `n` points.
///
/// Lattice kinds scan the spacing downward from a coarse guess and keep the
/// first spacing that produces exactly `n` points, falling back to the
/// closest count seen.
pub fn grid_with_count(kind: GridKind, region: &Region, n: usize, seed: u64) -> Result<TrainingGrid> {
    if n == 0 {
        return Err(Error::param("grid point count must be positive"));
    }
    let build = |s: f64| match kind {
        GridKind::Square => generate_square_grid(region, s),
        GridKind::Hexagonal => generate_hex_grid(region, s),
        _ => unreachable!(),
    };
    match kind {
        GridKind::Random => generate_random_grid(region, n, seed),
        GridKind::Surveyed => Err(Error::param("surveyed grids come from traces")),
        GridKind::Square | GridKind::Hexagonal => {
            let nominal = (region.area() / n as f64).sqrt();
            let (hi, lo) = (nominal * 2.0, nominal * 0.4);
            const STEPS: usize = 4000;
            let mut best: Option<(usize, TrainingGrid)> = None;
            for i in 0..=STEPS {
                let s = hi - (hi - lo) * i as f64 / STEPS as f64;
                let g = build(s)?;
                let miss = g.len().abs_diff(n);
                if miss == 0 {
                    return Ok(g);
                }
                if best.as_ref().is_none_or(|(m, _)| miss < *m) {
                    best = Some((miss, g));
                }
            }
            Ok(best.expect("scan visits at least one spacing").1)
        }
    }
}
