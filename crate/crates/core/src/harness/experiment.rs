use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, GridSize, KlField};
use crate::divergence::{level_curve_value, level_field_approx, Scenario};
use crate::error::{Error, Result};
use crate::fingerprinting::{build_database, error_stats, localize, ErrorStats, TrainingDatabase};
use crate::geometry::{grid_with_count, raster_points, GridKind, Point, TrainingGrid};
use crate::geometry::{generate_hex_grid, generate_random_grid, generate_square_grid};
use crate::hypothesis::{estimate_error_exponent, theory_exponent, ExponentEstimate};
use crate::placement::place_new_anchors;
use crate::propagation::{Anchor, RssModel};
use crate::rng::{self, SimRng};

/// Surveyed anchors plus any added by the configured placement step.
pub fn anchors_for(cfg: &ExperimentConfig) -> Result<Vec<Anchor>> {
    if cfg.placement.count == 0 {
        return Ok(cfg.base_anchors.clone());
    }
    place_new_anchors(
        &cfg.base_anchors,
        &cfg.region,
        cfg.placement.count,
        cfg.placement.method,
        cfg.placement.seed,
    )?
    .all_anchors(cfg.tx_dbm)
}

pub fn training_grid(cfg: &ExperimentConfig) -> Result<TrainingGrid> {
    let seed = cfg.master_seed;
    match cfg.grid_size {
        GridSize::Points(n) => grid_with_count(cfg.grid_kind, &cfg.region, n, seed),
        GridSize::Spacing(s) => match cfg.grid_kind {
            GridKind::Square => generate_square_grid(&cfg.region, s),
            GridKind::Hexagonal => generate_hex_grid(&cfg.region, s),
            _ => {
                // A random layout has no spacing; use the square lattice's count.
                let n = generate_square_grid(&cfg.region, s)?.len();
                generate_random_grid(&cfg.region, n, seed)
            }
        },
    }
}

/// Uniform target over the region, optionally kept `wall_clearance` away from walls.
pub fn draw_target(cfg: &ExperimentConfig, rng: &mut SimRng) -> Point {
    let r = &cfg.region;
    loop {
        let p = Point::new(
            r.min_x() + rng.random::<f64>() * r.width,
            r.min_y() + rng.random::<f64>() * r.height,
        );
        let clear = match (&cfg.model, cfg.exclude_walls) {
            (RssModel::Cost231 { plan, .. }, true) => {
                plan.walls.iter().all(|w| w.distance_to(&p) >= cfg.wall_clearance)
            }
            _ => true,
        };
        if clear {
            return p;
        }
    }
}

/// Everything one experiment point needs, built once.
pub struct Prepared {
    pub anchors: Vec<Anchor>,
    pub db: TrainingDatabase,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let anchors = anchors_for(cfg)?;
    let grid = training_grid(cfg)?;
    if cfg.k > grid.len() {
        return Err(Error::config("knn.k", format!("k = {} exceeds the {} training points", cfg.k, grid.len())));
    }
    let db = build_database(&grid, &anchors, &cfg.model, cfg.m_training, cfg.master_seed)?;
    Ok(Prepared { anchors, db })
}

/// Target and localization error of each trial, in trial order.
///
/// Trial `t` draws from the stream `(seed, t)` only, so every sweep value
/// sees the same targets and a row never depends on its position in the
/// sweep.
pub fn run_trials(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Vec<(Point, f64)>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(cfg.master_seed, &[rng::tag::TRIAL, t as u64]);
            let target = draw_target(cfg, &mut r);
            localize(&prep.db, &prep.anchors, &cfg.model, &target, cfg.m_runtime, cfg.k, cfg.weighted, &mut r)
                .map(|res| (target, res.error))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: String,
    pub stats: ErrorStats,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

pub const RESULTS_HEADER: &str = "sweep_value,min,q25,median,q75,max,mean,trials";

pub fn write_stats_row<W: Write>(out: &mut W, label: &str, s: &ErrorStats) -> Result<()> {
    writeln!(
        out,
        "{label},{},{},{},{},{},{},{}",
        s.min, s.q25, s.median, s.q75, s.max, s.mean, s.count
    )?;
    Ok(())
}

impl ExperimentResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{RESULTS_HEADER}")?;
        for r in &self.rows {
            write_stats_row(&mut out, &r.sweep_value, &r.stats)?;
        }
        Ok(())
    }

    /// `sweep_value,trial,error` for every trial.
    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "sweep_value,trial,error")?;
        for r in &self.rows {
            for (t, e) in r.errors.iter().enumerate() {
                writeln!(out, "{},{t},{e}", r.sweep_value)?;
            }
        }
        Ok(())
    }

    pub fn row(&self, sweep_value: &str) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.sweep_value == sweep_value)
    }
}

/// Label of the single row of an experiment without a sweep.
pub const BASE_ROW: &str = "base";

/// Runs every sweep value (or the base configuration) and summarizes errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let points: Vec<(String, ExperimentConfig)> = match &cfg.sweep {
        None => vec![(BASE_ROW.to_string(), cfg.clone())],
        Some(s) => s
            .values
            .iter()
            .map(|v| cfg.with_override(&s.param, v).map(|c| (v.clone(), c)))
            .collect::<Result<_>>()?,
    };
    let mut rows = Vec::with_capacity(points.len());
    for (label, c) in points {
        let prep = prepare(&c)?;
        let errors: Vec<f64> = run_trials(&c, &prep)?.into_iter().map(|(_, e)| e).collect();
        rows.push(ResultRow {
            sweep_value: label,
            stats: error_stats(&errors)?,
            errors,
        });
    }
    Ok(ExperimentResult { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCell {
    pub location: Point,
    pub mean_error: f64,
}

/// Mean localization error at each raster center of `cfg.region`, with
/// `cfg.spatial_trials` runtime fingerprints per center.
pub fn run_spatial_map(cfg: &ExperimentConfig, resolution: f64) -> Result<Vec<SpatialCell>> {
    let prep = prepare(cfg)?;
    let points = raster_points(&cfg.region, resolution)?;
    points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut total = 0.0;
            for t in 0..cfg.spatial_trials {
                let mut r = rng::stream(cfg.master_seed, &[rng::tag::SPATIAL, i as u64, t as u64]);
                total += localize(&prep.db, &prep.anchors, &cfg.model, p, cfg.m_runtime, cfg.k, cfg.weighted, &mut r)?.error;
            }
            Ok(SpatialCell {
                location: *p,
                mean_error: total / cfg.spatial_trials as f64,
            })
        })
        .collect()
}

pub fn write_spatial_csv<W: Write>(cells: &[SpatialCell], mut out: W) -> Result<()> {
    writeln!(out, "x,y,mean_error")?;
    for c in cells {
        writeln!(out, "{},{},{}", c.location.x, c.location.y, c.mean_error)?;
    }
    Ok(())
}

/// Raster of `ℓ(u, e)` or `ℓ̃(u)` under the analytic channel parameters.
pub fn analyze_kl(cfg: &ExperimentConfig) -> Result<Vec<(Point, f64)>> {
    let scen = Scenario::new(anchors_for(cfg)?, cfg.analytic)?;
    let points = raster_points(&cfg.region, cfg.kl_resolution)?;
    points
        .par_iter()
        .map(|u| {
            let v = match cfg.kl_field {
                KlField::Approx => level_field_approx(u, &scen),
                KlField::Level => level_curve_value(u, cfg.kl_displacement, &scen)
                    .map_err(|e| Error::config("model.kind", e.to_string()))?,
            };
            Ok((*u, v))
        })
        .collect()
}

pub fn write_kl_csv<W: Write>(rows: &[(Point, f64)], mut out: W) -> Result<()> {
    writeln!(out, "x,y,value")?;
    for (p, v) in rows {
        writeln!(out, "{},{},{v}", p.x, p.y)?;
    }
    Ok(())
}

/// The exponent study plus the value the theory predicts.
pub fn run_exponent(cfg: &ExperimentConfig) -> Result<(ExponentEstimate, f64)> {
    let spec = cfg.exponent_spec()?;
    let est = estimate_error_exponent(
        &spec.p1,
        &spec.p2,
        spec.test,
        &spec.n_values,
        spec.trials,
        cfg.master_seed,
        spec.sampling,
    )?;
    let theory = theory_exponent(&spec.p1, &spec.p2, spec.test)?;
    Ok((est, theory))
}

pub fn write_exponent_csv<W: Write>(est: &ExponentEstimate, theory: f64, mut out: W) -> Result<()> {
    writeln!(out, "n,errors,trials,log_error")?;
    for ((n, e), l) in est.n_values.iter().zip(&est.errors).zip(&est.log_error) {
        writeln!(out, "{n},{e},{},{l}", est.trials)?;
    }
    writeln!(out, "slope,stderr,theory_value")?;
    writeln!(out, "{},{},{theory}", est.slope, est.slope_stderr)?;
    Ok(())
}
