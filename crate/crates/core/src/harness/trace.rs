//! Measurement traces: `loc_id,x,y,ap_id,rss_dbm,sample_idx` rows.
//!
//! An empty `rss_dbm` field records that the AP was not heard at that
//! location. It registers the location and the AP without adding a sample.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::config::ExperimentConfig;
use super::experiment::{draw_target, prepare, write_stats_row, RESULTS_HEADER};
use crate::error::{Error, Result};
use crate::fingerprinting::{
    error_stats, knn_estimate, make_fingerprint, measure, DatabaseMeta, ErrorStats, Fingerprint, TrainingDatabase,
    MISSING_RSS_DBM,
};
use crate::geometry::{GridKind, Point, Region, TrainingGrid};
use crate::rng;

/// Per AP, the `(sample_idx, rss)` pairs heard at one location.
type PerApSamples = Vec<Vec<(u64, f64)>>;

pub const TRACE_HEADER: &str = "loc_id,x,y,ap_id,rss_dbm,sample_idx";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub loc_id: String,
    pub x: f64,
    pub y: f64,
    pub ap_id: String,
    /// `None` when the AP was not heard.
    pub rss_dbm: Option<f64>,
    pub sample_idx: u64,
}

#[derive(Debug, Deserialize)]
struct Row {
    loc_id: String,
    x: f64,
    y: f64,
    ap_id: String,
    rss_dbm: Option<f64>,
    sample_idx: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

/// Fingerprint of one trace location over a fixed AP order.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceLocation {
    pub loc_id: String,
    pub location: Point,
    pub fingerprint: Fingerprint,
}

fn first_appearance<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    items
        .filter(|s| seen.insert(*s))
        .map(str::to_string)
        .collect()
}

impl Trace {
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let headers = rdr
            .headers()
            .map_err(|e| Error::parse(1, e.to_string()))?
            .clone();
        if headers.is_empty() {
            return Err(Error::parse(1, "empty trace file"));
        }
        let mut records = Vec::new();
        let mut keys = HashSet::new();
        let mut locs: HashMap<String, (f64, f64)> = HashMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let row: Row = rec
                .deserialize(Some(&headers))
                .map_err(|e| Error::parse(line, e.to_string()))?;
            if !(row.x.is_finite() && row.y.is_finite()) {
                return Err(Error::parse(line, "coordinates must be finite"));
            }
            if row.rss_dbm.is_some_and(|v| !v.is_finite()) {
                return Err(Error::parse(line, "rss_dbm must be finite"));
            }
            match locs.get(&row.loc_id) {
                Some(&(x, y)) if (x, y) != (row.x, row.y) => {
                    return Err(Error::parse(line, format!("location `{}` moved from ({x}, {y})", row.loc_id)));
                }
                Some(_) => {}
                None => {
                    locs.insert(row.loc_id.clone(), (row.x, row.y));
                }
            }
            if !keys.insert((row.loc_id.clone(), row.ap_id.clone(), row.sample_idx)) {
                return Err(Error::DuplicateKey(format!(
                    "line {line}: loc `{}` ap `{}` sample {}",
                    row.loc_id, row.ap_id, row.sample_idx
                )));
            }
            records.push(TraceRecord {
                loc_id: row.loc_id,
                x: row.x,
                y: row.y,
                ap_id: row.ap_id,
                rss_dbm: row.rss_dbm,
                sample_idx: row.sample_idx,
            });
        }
        if records.is_empty() {
            return Err(Error::parse(1, "trace has no records"));
        }
        Ok(Self { records })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for r in &self.records {
            let rss = r.rss_dbm.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{rss},{}", r.loc_id, r.x, r.y, r.ap_id, r.sample_idx)?;
        }
        Ok(())
    }

    /// AP identifiers in order of first appearance.
    pub fn ap_ids(&self) -> Vec<String> {
        first_appearance(self.records.iter().map(|r| r.ap_id.as_str()))
    }

    /// Per-location fingerprints over `aps`, locations in order of first
    /// appearance. Samples are averaged in `sample_idx` order; an AP with no
    /// samples at a location gets the floor value.
    pub fn locations(&self, aps: &[String]) -> Vec<TraceLocation> {
        let ap_index: HashMap<&str, usize> = aps.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
        let order = first_appearance(self.records.iter().map(|r| r.loc_id.as_str()));
        let mut samples: HashMap<&str, (Point, PerApSamples)> = HashMap::new();
        for r in &self.records {
            let entry = samples
                .entry(r.loc_id.as_str())
                .or_insert_with(|| (Point::new(r.x, r.y), vec![Vec::new(); aps.len()]));
            if let (Some(v), Some(&j)) = (r.rss_dbm, ap_index.get(r.ap_id.as_str())) {
                entry.1[j].push((r.sample_idx, v));
            }
        }
        order
            .into_iter()
            .map(|id| {
                let (location, mut per_ap) = samples.remove(id.as_str()).expect("every id has samples");
                let lists: Vec<Vec<f64>> = per_ap
                    .iter_mut()
                    .map(|s| {
                        s.sort_by_key(|&(i, _)| i);
                        s.iter().map(|&(_, v)| v).collect()
                    })
                    .collect();
                let fingerprint = make_fingerprint(&lists).unwrap_or_else(|_| Fingerprint {
                    per_anchor_mean: vec![MISSING_RSS_DBM; aps.len()],
                    per_anchor_count: vec![0; aps.len()],
                });
                TraceLocation {
                    loc_id: id,
                    location,
                    fingerprint,
                }
            })
            .collect()
    }

    /// Training database over `aps` with one training point per location.
    pub fn database(&self, aps: &[String]) -> Result<TrainingDatabase> {
        let locs = self.locations(aps);
        let points: Vec<Point> = locs.iter().map(|l| l.location).collect();
        let region = Region::bounding(&points, 1.0)?;
        let m = locs
            .iter()
            .flat_map(|l| l.fingerprint.per_anchor_count.iter().copied())
            .max()
            .unwrap_or(0);
        Ok(TrainingDatabase {
            grid: TrainingGrid {
                points,
                kind: GridKind::Surveyed,
                spacing: 0.0,
                region,
            },
            fingerprints: locs.into_iter().map(|l| l.fingerprint).collect(),
            meta: DatabaseMeta {
                m_training: m,
                master_seed: None,
                model: None,
            },
        })
    }
}

/// Reads a trace and builds its training grid and database. The AP order is
/// the order of first appearance, also returned.
pub fn ingest_trace(path: &Path) -> Result<(TrainingGrid, TrainingDatabase, Vec<String>)> {
    let trace = Trace::load(path)?;
    let aps = trace.ap_ids();
    let db = trace.database(&aps)?;
    Ok((db.grid.clone(), db, aps))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEstimate {
    pub loc_id: String,
    pub truth: Point,
    pub estimate: Point,
    pub error: f64,
    /// No AP of the training trace was heard at this location.
    pub all_unheard: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEvaluation {
    pub rows: Vec<TraceEstimate>,
    pub stats: ErrorStats,
    pub ap_ids: Vec<String>,
}

/// Localizes every location of `eval` against a database built from
/// `train`. Both use the union of their AP sets.
pub fn evaluate_on_trace(train: &Trace, eval: &Trace, k: usize, weighted: bool) -> Result<TraceEvaluation> {
    let train_aps = train.ap_ids();
    let mut aps = train_aps.clone();
    for a in eval.ap_ids() {
        if !aps.contains(&a) {
            aps.push(a);
        }
    }
    let db = train.database(&aps)?;
    let rows = eval
        .locations(&aps)
        .into_iter()
        .map(|loc| {
            let estimate = knn_estimate(&db, &loc.fingerprint, k, weighted)?;
            let all_unheard = loc.fingerprint.per_anchor_count[..train_aps.len()].iter().all(|&c| c == 0);
            Ok(TraceEstimate {
                error: estimate.distance(&loc.location),
                loc_id: loc.loc_id,
                truth: loc.location,
                estimate,
                all_unheard,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    Ok(TraceEvaluation {
        stats: error_stats(&errors)?,
        rows,
        ap_ids: aps,
    })
}

impl TraceEvaluation {
    /// Per-location rows, a blank line, then the summary in results layout.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "loc_id,x,y,est_x,est_y,error,all_unheard")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.loc_id, r.truth.x, r.truth.y, r.estimate.x, r.estimate.y, r.error, r.all_unheard
            )?;
        }
        writeln!(out)?;
        writeln!(out, "{RESULTS_HEADER}")?;
        write_stats_row(&mut out, "trace", &self.stats)
    }
}

/// The training survey and the runtime measurements of `run_experiment`
/// (no sweep) written out as traces. Training points are `v{i}`, trial
/// targets `t{i}`, APs `ap{j}`.
pub fn synthetic_traces(cfg: &ExperimentConfig) -> Result<(Trace, Trace)> {
    let prep = prepare(cfg)?;
    let mut train = Trace::default();
    for (i, p) in prep.db.grid.points.iter().enumerate() {
        let mut r = rng::stream(cfg.master_seed, &[rng::tag::TRAINING, i as u64]);
        push_samples(&mut train, &format!("v{i}"), p, measure(p, &prep.anchors, &cfg.model, cfg.m_training, &mut r));
    }
    let mut eval = Trace::default();
    for t in 0..cfg.trials {
        let mut r = rng::stream(cfg.master_seed, &[rng::tag::TRIAL, t as u64]);
        let target = draw_target(cfg, &mut r);
        let samples = measure(&target, &prep.anchors, &cfg.model, cfg.m_runtime, &mut r);
        push_samples(&mut eval, &format!("t{t}"), &target, samples);
    }
    Ok((train, eval))
}

fn push_samples(trace: &mut Trace, loc_id: &str, p: &Point, samples: Vec<Vec<f64>>) {
    for (j, list) in samples.into_iter().enumerate() {
        for (s, v) in list.into_iter().enumerate() {
            trace.records.push(TraceRecord {
                loc_id: loc_id.to_string(),
                x: p.x,
                y: p.y,
                ap_id: format!("ap{j}"),
                rss_dbm: Some(v),
                sample_idx: s as u64,
            });
        }
    }
}
