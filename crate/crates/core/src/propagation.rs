//! Received-signal-strength generation.
//!
//! Two unit regimes live here and are never mixed: the analytic models work
//! in linear milliwatts (`P_T / d^α + N`, optionally with Gaussian quantization
//! noise or exponential fading), while the COST-231 multi-wall model works in
//! dBm with Gaussian noise added in the dB domain.

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, Region};

/// Distance floor for the linear-power models, in meters.
pub const LINEAR_MIN_DISTANCE: f64 = 0.01;
/// Distance floor for the dB-domain model, in meters.
pub const DB_MIN_DISTANCE: f64 = 0.1;

/// An access point: location and transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub location: Point,
    /// Transmit power in milliwatts.
    pub tx_power_mw: f64,
}

impl Anchor {
    pub fn new(location: Point, tx_power_mw: f64) -> Result<Self> {
        if !location.is_finite() {
            return Err(Error::param("anchor location must be finite"));
        }
        if !(tx_power_mw > 0.0 && tx_power_mw.is_finite()) {
            return Err(Error::param(format!("anchor power must be positive, got {tx_power_mw} mW")));
        }
        Ok(Self {
            location,
            tx_power_mw,
        })
    }

    pub fn from_dbm(location: Point, tx_power_dbm: f64) -> Result<Self> {
        Self::new(location, 10f64.powf(tx_power_dbm / 10.0))
    }

    pub fn tx_power_dbm(&self) -> f64 {
        10.0 * self.tx_power_mw.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    /// Deterministic path loss plus Gaussian quantization noise.
    Noisy,
    /// Exponential (Rayleigh-power) fading on the path-loss term.
    Fading,
}

/// Parameters of the linear-power models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticChannelParams {
    pub alpha: f64,
    /// Additive noise power `N` in milliwatts.
    pub noise_floor: f64,
    /// Variance of the Gaussian quantization noise, mW².
    pub quant_noise_var: f64,
    pub model: ChannelModel,
}

impl AnalyticChannelParams {
    pub fn noisy(alpha: f64, noise_floor: f64, quant_noise_var: f64) -> Result<Self> {
        let p = Self {
            alpha,
            noise_floor,
            quant_noise_var,
            model: ChannelModel::Noisy,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn fading(alpha: f64, noise_floor: f64) -> Result<Self> {
        let p = Self {
            alpha,
            noise_floor,
            quant_noise_var: 0.0,
            model: ChannelModel::Fading,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("path-loss exponent must be positive, got {}", self.alpha)));
        }
        if !(self.noise_floor >= 0.0 && self.noise_floor.is_finite()) {
            return Err(Error::param("noise floor must be non-negative"));
        }
        if self.model == ChannelModel::Noisy && !(self.quant_noise_var > 0.0) {
            return Err(Error::param("noisy model needs a positive quantization noise variance"));
        }
        Ok(())
    }
}

/// COST-231 multi-wall parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost231Params {
    /// Path loss at 1 m, dB.
    pub lc: f64,
    pub gamma: f64,
    /// Attenuation per crossed wall, dB.
    pub wall_loss: f64,
    /// Standard deviation of the additive Gaussian noise, dB.
    pub sigma: f64,
}

impl Default for Cost231Params {
    fn default() -> Self {
        Self {
            lc: 53.73,
            gamma: 1.64,
            wall_loss: 4.51,
            sigma: 2.0,
        }
    }
}

impl Cost231Params {
    pub fn validate(&self) -> Result<()> {
        if ![self.lc, self.gamma, self.wall_loss, self.sigma]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::param("COST-231 parameters must be finite"));
        }
        if self.sigma < 0.0 {
            return Err(Error::param("COST-231 noise deviation must be non-negative"));
        }
        Ok(())
    }

    pub fn noiseless(self) -> Self {
        Self { sigma: 0.0, ..self }
    }
}

/// A wall segment with an optional per-wall attenuation, dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wall {
    pub a: Point,
    pub b: Point,
    pub attenuation_db: Option<f64>,
}

impl Wall {
    pub fn new(a: Point, b: Point) -> Result<Self> {
        Self::with_attenuation(a, b, None)
    }

    pub fn with_attenuation(a: Point, b: Point, attenuation_db: Option<f64>) -> Result<Self> {
        if !(a.distance(&b) > 0.0) {
            return Err(Error::param(format!(
                "wall ({}, {})-({}, {}) has zero length",
                a.x, a.y, b.x, b.y
            )));
        }
        Ok(Self {
            a,
            b,
            attenuation_db,
        })
    }

    /// Distance from `p` to the wall segment.
    pub fn distance_to(&self, p: &Point) -> f64 {
        let (dx, dy) = (self.b.x - self.a.x, self.b.y - self.a.y);
        let t = (((p.x - self.a.x) * dx + (p.y - self.a.y) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
        p.distance(&Point::new(self.a.x + t * dx, self.a.y + t * dy))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FloorPlan {
    pub walls: Vec<Wall>,
}

#[derive(Debug, Deserialize)]
struct WallRow {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
    #[serde(default)]
    att_db: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct AnchorRow {
    #[allow(dead_code)]
    id: String,
    x: f64,
    y: f64,
    txpower: f64,
}

fn csv_line(err: &csv::Error) -> u64 {
    err.position().map_or(0, |p| p.line())
}

impl FloorPlan {
    pub fn new(walls: Vec<Wall>) -> Self {
        Self { walls }
    }

    /// Reads `x1,y1,x2,y2[,att_db]` rows (header required).
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(input);
        let mut walls = Vec::new();
        for row in rdr.deserialize::<WallRow>() {
            let row = row.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
            walls.push(Wall::with_attenuation(
                Point::new(row.x1, row.y1),
                Point::new(row.x2, row.y2),
                row.att_db,
            )?);
        }
        Ok(Self { walls })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "x1,y1,x2,y2,att_db")?;
        for w in &self.walls {
            let att = w.attenuation_db.map(|a| a.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{att}", w.a.x, w.a.y, w.b.x, w.b.y)?;
        }
        Ok(())
    }

    /// Synthetic office: two corridors crossing the long side, rooms in the
    /// three bands between them, one door per room onto each corridor wall.
    /// Dimensions scale with the region (nominally 30 m x 18 m).
    pub fn synthetic_office(region: &Region) -> Self {
        let (w, h) = (region.width, region.height);
        let ox = region.min_x();
        let oy = region.min_y();
        let rooms = 5;
        let room_w = w / rooms as f64;
        let door = (room_w / 6.0).min(1.0);
        // Corridor walls (fractions of height), chosen to give 2 m corridors on 18 m.
        let corridor_ys = [5.0 / 18.0, 7.0 / 18.0, 11.0 / 18.0, 13.0 / 18.0].map(|f| oy + f * h);
        let mut walls = Vec::new();
        let push = |walls: &mut Vec<Wall>, a: Point, b: Point| {
            if let Ok(wall) = Wall::new(a, b) {
                walls.push(wall);
            }
        };
        for &y in &corridor_ys {
            for r in 0..rooms {
                let x0 = ox + r as f64 * room_w;
                let mid = x0 + room_w / 2.0;
                push(&mut walls, Point::new(x0, y), Point::new(mid - door / 2.0, y));
                push(&mut walls, Point::new(mid + door / 2.0, y), Point::new(x0 + room_w, y));
            }
        }
        let bands = [
            (oy, corridor_ys[0]),
            (corridor_ys[1], corridor_ys[2]),
            (corridor_ys[3], oy + h),
        ];
        for r in 1..rooms {
            let x = ox + r as f64 * room_w;
            for &(y0, y1) in &bands {
                push(&mut walls, Point::new(x, y0), Point::new(x, y1));
            }
        }
        Self { walls }
    }
}

/// Reads `id,x,y,txpower` rows; `txpower` is in dBm.
pub fn read_anchors_csv<R: Read>(input: R) -> Result<Vec<Anchor>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut anchors = Vec::new();
    for row in rdr.deserialize::<AnchorRow>() {
        let row = row.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        anchors.push(Anchor::from_dbm(Point::new(row.x, row.y), row.txpower)?);
    }
    if anchors.is_empty() {
        return Err(Error::parse(1, "anchors file has no rows"));
    }
    Ok(anchors)
}

pub fn write_anchors_csv<W: Write>(anchors: &[Anchor], mut out: W) -> Result<()> {
    writeln!(out, "id,x,y,txpower")?;
    for (i, a) in anchors.iter().enumerate() {
        writeln!(out, "{i},{},{},{}", a.location.x, a.location.y, a.tx_power_dbm())?;
    }
    Ok(())
}

/// Deterministic part of the linear-power model: `P_T / d^α + N`.
pub fn mean_rss_linear(u: &Point, anchor: &Anchor, params: &AnalyticChannelParams) -> f64 {
    path_gain(u, anchor, params.alpha) + params.noise_floor
}

/// `P_T / d^α` with the distance floor applied.
pub(crate) fn path_gain(u: &Point, anchor: &Anchor, alpha: f64) -> f64 {
    let d = anchor.location.distance(u).max(LINEAR_MIN_DISTANCE);
    anchor.tx_power_mw / d.powf(alpha)
}

/// One draw of the noisy model: mean plus Gaussian noise of variance `N_i`.
pub fn sample_rss_noisy<R: Rng + ?Sized>(
    u: &Point,
    anchor: &Anchor,
    params: &AnalyticChannelParams,
    rng: &mut R,
) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    mean_rss_linear(u, anchor, params) + params.quant_noise_var.sqrt() * z
}

/// One draw of the fading model: `H · P_T / d^α + N`, `H ~ Exp(1)`.
pub fn sample_rss_fading<R: Rng + ?Sized>(
    u: &Point,
    anchor: &Anchor,
    params: &AnalyticChannelParams,
    rng: &mut R,
) -> f64 {
    let h: f64 = rng.sample(Exp1);
    h * path_gain(u, anchor, params.alpha) + params.noise_floor
}

fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn on_segment(a: &Point, b: &Point, p: &Point) -> bool {
    p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
}

/// Closed-segment intersection test; touching counts.
pub(crate) fn segments_intersect(p1: &Point, p2: &Point, q1: &Point, q2: &Point) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

fn crossed_walls<'a>(u: &'a Point, w: &'a Point, plan: &'a FloorPlan) -> impl Iterator<Item = &'a Wall> {
    plan.walls
        .iter()
        .filter(move |wall| segments_intersect(u, w, &wall.a, &wall.b))
}

/// Number of walls met by the direct path `u`–`w`.
pub fn count_wall_intersections(u: &Point, w: &Point, plan: &FloorPlan) -> usize {
    crossed_walls(u, w, plan).count()
}

/// Total wall attenuation along `u`–`w`, dB.
pub fn wall_attenuation(u: &Point, w: &Point, plan: &FloorPlan, params: &Cost231Params) -> f64 {
    crossed_walls(u, w, plan)
        .map(|wall| wall.attenuation_db.unwrap_or(params.wall_loss))
        .sum()
}

/// Noiseless COST-231 multi-wall RSS in dBm.
pub fn cost231_mean(u: &Point, anchor: &Anchor, params: &Cost231Params, plan: &FloorPlan) -> f64 {
    let d = anchor.location.distance(u).max(DB_MIN_DISTANCE);
    let loss = params.lc + 10.0 * params.gamma * d.log10() + wall_attenuation(u, &anchor.location, plan, params);
    anchor.tx_power_dbm() - loss
}

/// COST-231 RSS in dBm; adds `N(0, σ)` noise when an rng is supplied.
pub fn cost231_rss<R: Rng + ?Sized>(
    u: &Point,
    anchor: &Anchor,
    params: &Cost231Params,
    plan: &FloorPlan,
    rng: Option<&mut R>,
) -> f64 {
    let mean = cost231_mean(u, anchor, params, plan);
    match rng {
        Some(rng) => {
            let z: f64 = rng.sample(StandardNormal);
            mean + params.sigma * z
        }
        None => mean,
    }
}

/// Any of the supported RSS generators.
#[derive(Debug, Clone, PartialEq)]
pub enum RssModel {
    Analytic(AnalyticChannelParams),
    Cost231 { params: Cost231Params, plan: FloorPlan },
}

impl RssModel {
    /// One RSS observation of `anchor` at `u`.
    pub fn sample<R: Rng + ?Sized>(&self, u: &Point, anchor: &Anchor, rng: &mut R) -> f64 {
        match self {
            RssModel::Analytic(p) => match p.model {
                ChannelModel::Noisy => sample_rss_noisy(u, anchor, p, rng),
                ChannelModel::Fading => sample_rss_fading(u, anchor, p, rng),
            },
            RssModel::Cost231 { params, plan } => {
                if params.sigma == 0.0 {
                    cost231_mean(u, anchor, params, plan)
                } else {
                    cost231_rss(u, anchor, params, plan, Some(rng))
                }
            }
        }
    }

    /// Expected (noise-free) observation.
    pub fn mean(&self, u: &Point, anchor: &Anchor) -> f64 {
        match self {
            RssModel::Analytic(p) => mean_rss_linear(u, anchor, p),
            RssModel::Cost231 { params, plan } => cost231_mean(u, anchor, params, plan),
        }
    }

    /// Noise-free fingerprint vector at `u`.
    pub fn mean_vector(&self, u: &Point, anchors: &[Anchor]) -> Vec<f64> {
        anchors.iter().map(|a| self.mean(u, a)).collect()
    }

    pub fn is_noiseless(&self) -> bool {
        matches!(self, RssModel::Cost231 { params, .. } if params.sigma == 0.0)
    }
}
