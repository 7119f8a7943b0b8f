//! Mean-RSS fingerprints, the training database, and kNN matching.

use std::io::{Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{GridKind, Point, Region, TrainingGrid};
use crate::propagation::{Anchor, RssModel};
use crate::rng;

/// RSS assigned to an anchor that produced no samples, in dBm.
pub const MISSING_RSS_DBM: f64 = -100.0;

/// Guard added to fingerprint distances before inverting them for weights.
pub const WEIGHT_GUARD: f64 = 1e-6;

/// Default number of neighbors.
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Fingerprint {
    pub per_anchor_mean: Vec<f64>,
    /// Number of samples behind each mean; zero marks a floored anchor.
    pub per_anchor_count: Vec<usize>,
}

impl Fingerprint {
    pub fn len(&self) -> usize {
        self.per_anchor_mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_anchor_mean.is_empty()
    }

    /// True when every anchor was floored.
    pub fn all_missing(&self) -> bool {
        self.per_anchor_count.iter().all(|&c| c == 0)
    }
}

/// Averages each anchor's samples. Anchors with no samples get
/// [`MISSING_RSS_DBM`] and a zero count.
pub fn make_fingerprint(samples: &[Vec<f64>]) -> Result<Fingerprint> {
    if samples.iter().all(Vec::is_empty) {
        return Err(Error::input("every anchor is missing from the fingerprint samples"));
    }
    if samples.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::input("RSS samples must be finite"));
    }
    Ok(Fingerprint {
        per_anchor_mean: samples
            .iter()
            .map(|s| {
                if s.is_empty() {
                    MISSING_RSS_DBM
                } else {
                    s.iter().sum::<f64>() / s.len() as f64
                }
            })
            .collect(),
        per_anchor_count: samples.iter().map(Vec::len).collect(),
    })
}

/// Where a database came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DatabaseMeta {
    pub m_training: usize,
    pub master_seed: Option<u64>,
    pub model: Option<RssModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDatabase {
    pub grid: TrainingGrid,
    pub fingerprints: Vec<Fingerprint>,
    pub meta: DatabaseMeta,
}

/// `m` samples of every anchor at `u`.
pub fn measure<R: Rng + ?Sized>(
    u: &Point,
    anchors: &[Anchor],
    model: &RssModel,
    m: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    anchors
        .iter()
        .map(|a| (0..m).map(|_| model.sample(u, a, rng)).collect())
        .collect()
}

/// Surveys every training point with `m` samples per anchor. Point `i` uses
/// its own stream keyed by `(master_seed, i)`.
pub fn build_database(
    grid: &TrainingGrid,
    anchors: &[Anchor],
    model: &RssModel,
    m: usize,
    master_seed: u64,
) -> Result<TrainingDatabase> {
    if m == 0 {
        return Err(Error::param("training needs at least one sample per anchor"));
    }
    if anchors.is_empty() {
        return Err(Error::param("training needs at least one anchor"));
    }
    let fingerprints = grid
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = rng::stream(master_seed, &[rng::tag::TRAINING, i as u64]);
            make_fingerprint(&measure(p, anchors, model, m, &mut r))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingDatabase {
        grid: grid.clone(),
        fingerprints,
        meta: DatabaseMeta {
            m_training: m,
            master_seed: Some(master_seed),
            model: Some(model.clone()),
        },
    })
}

/// Euclidean distance between mean vectors.
pub fn fingerprint_distance(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!(
            "fingerprints have {} and {} anchors",
            a.len(),
            b.len()
        )));
    }
    Ok(a.per_anchor_mean
        .iter()
        .zip(&b.per_anchor_mean)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Averages the locations of the `k` stored fingerprints closest to `query`.
///
/// Weighted mode uses `1 / (d + 1e-6)` weights. Equal distances are ordered
/// by training index.
pub fn knn_estimate(db: &TrainingDatabase, query: &Fingerprint, k: usize, weighted: bool) -> Result<Point> {
    if k == 0 || k > db.fingerprints.len() {
        return Err(Error::param(format!(
            "k must lie in 1..={}, got {k}",
            db.fingerprints.len()
        )));
    }
    let mut scored: Vec<(f64, usize)> = db
        .fingerprints
        .iter()
        .enumerate()
        .map(|(i, f)| fingerprint_distance(query, f).map(|d| (d, i)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
    for &(d, i) in &scored[..k] {
        let w = if weighted { 1.0 / (d + WEIGHT_GUARD) } else { 1.0 };
        let p = db.grid.points[i];
        sx += w * p.x;
        sy += w * p.y;
        sw += w;
    }
    Ok(Point::new(sx / sw, sy / sw))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationResult {
    pub estimate: Point,
    pub true_location: Point,
    pub error: f64,
    pub k_used: usize,
}

/// Runtime phase: measure `m_runtime` times at `target`, fingerprint, match.
#[allow(clippy::too_many_arguments)]
pub fn localize<R: Rng + ?Sized>(
    db: &TrainingDatabase,
    anchors: &[Anchor],
    model: &RssModel,
    target: &Point,
    m_runtime: usize,
    k: usize,
    weighted: bool,
    rng: &mut R,
) -> Result<LocalizationResult> {
    if m_runtime == 0 {
        return Err(Error::param("runtime needs at least one sample per anchor"));
    }
    let query = make_fingerprint(&measure(target, anchors, model, m_runtime, rng))?;
    let estimate = knn_estimate(db, &query, k, weighted)?;
    Ok(LocalizationResult {
        estimate,
        true_location: *target,
        error: estimate.distance(target),
        k_used: k,
    })
}

/// Box-plot summary of localization errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
    pub mean: f64,
    pub count: usize,
}

/// Percentile of sorted data with linear interpolation between order statistics.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn error_stats(errors: &[f64]) -> Result<ErrorStats> {
    if errors.is_empty() {
        return Err(Error::input("error statistics of an empty list"));
    }
    let mut s = errors.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(ErrorStats {
        min: s[0],
        q25: percentile_sorted(&s, 0.25),
        median: percentile_sorted(&s, 0.5),
        q75: percentile_sorted(&s, 0.75),
        max: s[s.len() - 1],
        mean: s.iter().sum::<f64>() / s.len() as f64,
        count: s.len(),
    })
}

#[derive(Debug, Deserialize)]
struct DbRow {
    point_index: usize,
    x: f64,
    y: f64,
    ap_id: usize,
    mean_rss: f64,
    count: usize,
}

impl TrainingDatabase {
    pub fn n_anchors(&self) -> usize {
        self.fingerprints.first().map_or(0, Fingerprint::len)
    }

    /// Writes `point_index,x,y,ap_id,mean_rss,count` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "point_index,x,y,ap_id,mean_rss,count")?;
        for (i, (p, f)) in self.grid.points.iter().zip(&self.fingerprints).enumerate() {
            for (j, (m, c)) in f.per_anchor_mean.iter().zip(&f.per_anchor_count).enumerate() {
                writeln!(out, "{i},{},{},{j},{m},{c}", p.x, p.y)?;
            }
        }
        Ok(())
    }

    /// Reads a database written by [`TrainingDatabase::write_csv`]. Point and
    /// anchor indices must be dense from zero; absent entries are floored.
    /// The region is the bounding box of the points padded by one meter.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let mut rows = Vec::new();
        for row in rdr.deserialize::<DbRow>() {
            let row = row.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::parse(1, "database file has no rows"));
        }
        let n_points = rows.iter().map(|r| r.point_index).max().unwrap_or(0) + 1;
        let n_anchors = rows.iter().map(|r| r.ap_id).max().unwrap_or(0) + 1;
        let mut points: Vec<Option<Point>> = vec![None; n_points];
        let mut fps = vec![
            Fingerprint {
                per_anchor_mean: vec![MISSING_RSS_DBM; n_anchors],
                per_anchor_count: vec![0; n_anchors],
            };
            n_points
        ];
        let mut seen = vec![false; n_points * n_anchors];
        for r in &rows {
            let p = Point::new(r.x, r.y);
            match points[r.point_index] {
                Some(q) if q != p => {
                    return Err(Error::input(format!("point {} has two locations", r.point_index)));
                }
                _ => points[r.point_index] = Some(p),
            }
            let key = r.point_index * n_anchors + r.ap_id;
            if std::mem::replace(&mut seen[key], true) {
                return Err(Error::DuplicateKey(format!("point {} ap {}", r.point_index, r.ap_id)));
            }
            fps[r.point_index].per_anchor_mean[r.ap_id] = r.mean_rss;
            fps[r.point_index].per_anchor_count[r.ap_id] = r.count;
        }
        let points = points
            .into_iter()
            .enumerate()
            .map(|(i, p)| p.ok_or_else(|| Error::input(format!("point index {i} missing"))))
            .collect::<Result<Vec<_>>>()?;
        let region = Region::bounding(&points, 1.0)?;
        Ok(TrainingDatabase {
            grid: TrainingGrid {
                points,
                kind: GridKind::Surveyed,
                spacing: 0.0,
                region,
            },
            fingerprints: fps,
            meta: DatabaseMeta {
                m_training: rows.iter().map(|r| r.count).max().unwrap_or(0),
                master_seed: None,
                model: None,
            },
        })
    }
}
