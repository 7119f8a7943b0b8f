//! Flat `key = value` configuration.
//!
//! One setting per line, `#` starts a comment, keys use dotted section
//! names (`cost231.gamma`). Every value is validated when the typed
//! [`ExperimentConfig`] is built, and errors name the offending key.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::divergence::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::geometry::{GridKind, Point, Region};
use crate::hypothesis::{ErrorTest, Sampling};
use crate::placement::PlacementMethod;
use crate::propagation::{
    read_anchors_csv, AnalyticChannelParams, Anchor, ChannelModel, Cost231Params, FloorPlan, RssModel,
};

/// Every key the simulator understands, with its default (empty when the
/// key has no default).
pub const KEYS: &[(&str, &str)] = &[
    ("region.origin_x", "0"),
    ("region.origin_y", "0"),
    ("region.width", "30"),
    ("region.height", "18"),
    ("anchors.file", ""),
    ("anchors.list", ""),
    ("anchors.tx_dbm", "20"),
    ("model.kind", "cost231"),
    ("cost231.lc", "53.73"),
    ("cost231.gamma", "1.64"),
    ("cost231.wall_loss", "4.51"),
    ("cost231.sigma", "2"),
    ("analytic.alpha", "2"),
    ("analytic.noise_floor", "0"),
    ("analytic.noise_var", "1e-6"),
    ("floorplan.file", ""),
    ("floorplan.default", "office"),
    ("grid.kind", "square"),
    ("grid.points", "40"),
    ("grid.spacing", ""),
    ("measure.training", "1"),
    ("measure.runtime", "1"),
    ("measure.both", ""),
    ("knn.k", "3"),
    ("knn.weighted", "false"),
    ("run.trials", "10000"),
    ("run.seed", "1"),
    ("run.exclude_walls", "false"),
    ("run.wall_clearance", "0.1"),
    ("sweep.param", ""),
    ("sweep.values", ""),
    ("placement.method", "voronoi_vertices"),
    ("placement.count", "0"),
    ("placement.seed", "1"),
    ("spatial.resolution", "0.5"),
    ("spatial.trials", "20"),
    ("kl.field", "approx"),
    ("kl.displacement", "0.1, 0"),
    ("kl.resolution", "0.5"),
    ("exponent.p1", "0.4, 0.6"),
    ("exponent.p2", "0.6, 0.4"),
    ("exponent.test", "typical"),
    ("exponent.epsilon", "0.02"),
    ("exponent.gamma", "0"),
    ("exponent.prior1", "0.5"),
    ("exponent.n", "50, 100, 150, 200, 250, 300"),
    ("exponent.trials", "100000"),
    ("exponent.sampling", "tilted"),
];

/// Anchor layout used when the config names none.
pub const DEFAULT_ANCHORS: [(f64, f64); 4] = [(4.0, 3.0), (26.0, 3.0), (4.0, 15.0), (26.0, 15.0)];

fn default_of(key: &str) -> Option<&'static str> {
    KEYS.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

/// Raw key/value pairs plus the directory relative paths resolve against.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
    base_dir: PathBuf,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut map = Self {
            values: BTreeMap::new(),
            base_dir: base_dir.into(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}", i + 1), "expected `key = value`"))?;
            let key = k.trim();
            if map.values.contains_key(key) {
                return Err(Error::config(key, format!("set twice (line {})", i + 1)));
            }
            map.set(key, v.trim())?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir)
    }

    /// Sets `key`, rejecting names the simulator does not know.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if default_of(key).is_none() {
            return Err(Error::config(key, "unknown key"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut m = self.clone();
        m.set(key, value)?;
        Ok(m)
    }

    /// Explicit value or the default; `None` when both are empty.
    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self
            .values
            .get(key)
            .map(String::as_str)
            .or_else(|| default_of(key))
            .expect("key is listed in KEYS");
        (!v.is_empty()).then_some(v)
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.get(key).is_some_and(|v| !v.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let v = self.raw(key).ok_or_else(|| Error::config(key, "missing value"))?;
        v.parse::<T>()
            .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}")))
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(_) => self.get(key).map(Some),
        }
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<T>()
                        .map_err(|e| Error::config(key, format!("cannot parse `{s}`: {e}")))
                })
                .collect(),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|p| self.base_dir.join(p))
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("must be positive, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Result<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(Error::config(key, "must be at least 1"))
    }
}

/// Re-labels a lower-level error with the config key that caused it.
fn in_field<T>(key: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { .. } => e,
        other => Error::config(key, other.to_string()),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridSize {
    Points(usize),
    Spacing(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSpec {
    pub method: PlacementMethod,
    pub count: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KlField {
    /// `ℓ(u, e)` for a fixed displacement.
    Level,
    /// `ℓ̃(u)`.
    Approx,
}

/// Settings of the exponent study.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentSpec {
    pub p1: DiscreteDistribution,
    pub p2: DiscreteDistribution,
    pub test: ErrorTest,
    pub n_values: Vec<usize>,
    pub trials: usize,
    pub sampling: Sampling,
}

/// Fully validated simulator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub region: Region,
    /// Surveyed anchors before any placement step.
    pub base_anchors: Vec<Anchor>,
    pub tx_dbm: f64,
    pub model: RssModel,
    pub analytic: AnalyticChannelParams,
    pub grid_kind: GridKind,
    pub grid_size: GridSize,
    pub m_training: usize,
    pub m_runtime: usize,
    pub k: usize,
    pub weighted: bool,
    pub trials: usize,
    pub master_seed: u64,
    pub exclude_walls: bool,
    pub wall_clearance: f64,
    pub sweep: Option<Sweep>,
    pub placement: PlacementSpec,
    pub spatial_resolution: f64,
    pub spatial_trials: usize,
    pub kl_field: KlField,
    pub kl_displacement: (f64, f64),
    pub kl_resolution: f64,
    pub source: ConfigMap,
}

fn parse_anchor_list(key: &str, text: &str, tx_dbm: f64) -> Result<Vec<Anchor>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let parts: Vec<f64> = item
                .split(':')
                .map(|p| p.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::config(key, format!("bad anchor `{item}`: {e}")))?;
            let (x, y, p) = match parts[..] {
                [x, y] => (x, y, tx_dbm),
                [x, y, p] => (x, y, p),
                _ => return Err(Error::config(key, format!("anchor `{item}` must be x:y or x:y:dbm"))),
            };
            in_field(key, Anchor::from_dbm(Point::new(x, y), p))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let region = in_field(
            "region.width",
            Region::new(
                Point::new(map.get("region.origin_x")?, map.get("region.origin_y")?),
                positive("region.width", map.get("region.width")?)?,
                positive("region.height", map.get("region.height")?)?,
            ),
        )?;

        let tx_dbm: f64 = map.get("anchors.tx_dbm")?;
        if !tx_dbm.is_finite() {
            return Err(Error::config("anchors.tx_dbm", "must be finite"));
        }
        let base_anchors = if let Some(path) = map.path("anchors.file") {
            if map.is_set("anchors.list") {
                return Err(Error::config("anchors.list", "conflicts with anchors.file"));
            }
            let f = fs::File::open(&path)
                .map_err(|e| Error::config("anchors.file", format!("{}: {e}", path.display())))?;
            read_anchors_csv(f).map_err(|e| match e {
                Error::Parse { .. } => e,
                other => Error::config("anchors.file", other.to_string()),
            })?
        } else if let Some(list) = map.raw("anchors.list") {
            parse_anchor_list("anchors.list", list, tx_dbm)?
        } else {
            let scale = (region.width / 30.0, region.height / 18.0);
            DEFAULT_ANCHORS
                .iter()
                .map(|&(x, y)| {
                    Anchor::from_dbm(
                        Point::new(region.min_x() + x * scale.0, region.min_y() + y * scale.1),
                        tx_dbm,
                    )
                })
                .collect::<Result<_>>()?
        };
        if base_anchors.is_empty() {
            return Err(Error::config("anchors.list", "no anchors"));
        }

        let cost = Cost231Params {
            lc: map.get("cost231.lc")?,
            gamma: map.get("cost231.gamma")?,
            wall_loss: map.get("cost231.wall_loss")?,
            sigma: map.get("cost231.sigma")?,
        };
        in_field("cost231", cost.validate())?;
        let alpha = positive("analytic.alpha", map.get("analytic.alpha")?)?;
        let noise_floor: f64 = map.get("analytic.noise_floor")?;
        let noise_var = positive("analytic.noise_var", map.get("analytic.noise_var")?)?;

        let kind: String = map.get("model.kind")?;
        let analytic = match kind.as_str() {
            "fading" => in_field("analytic", AnalyticChannelParams::fading(alpha, noise_floor))?,
            _ => in_field("analytic", AnalyticChannelParams::noisy(alpha, noise_floor, noise_var))?,
        };
        let model = match kind.as_str() {
            "cost231" => {
                let plan = if let Some(path) = map.path("floorplan.file") {
                    let f = fs::File::open(&path)
                        .map_err(|e| Error::config("floorplan.file", format!("{}: {e}", path.display())))?;
                    FloorPlan::read_csv(f)?
                } else {
                    match map.raw("floorplan.default") {
                        Some("office") => FloorPlan::synthetic_office(&region),
                        Some("none") | None => FloorPlan::default(),
                        Some(other) => {
                            return Err(Error::config("floorplan.default", format!("unknown plan `{other}` (office, none)")))
                        }
                    }
                };
                RssModel::Cost231 { params: cost, plan }
            }
            "noisy" | "fading" => RssModel::Analytic(analytic),
            other => {
                return Err(Error::config("model.kind", format!("unknown model `{other}` (cost231, noisy, fading)")))
            }
        };
        debug_assert!(matches!(analytic.model, ChannelModel::Noisy | ChannelModel::Fading));

        let grid_kind: GridKind = in_field("grid.kind", map.get::<String>("grid.kind")?.parse())?;
        let grid_size = match map.get_opt::<f64>("grid.spacing")? {
            Some(s) => GridSize::Spacing(positive("grid.spacing", s)?),
            None => GridSize::Points(at_least_one("grid.points", map.get("grid.points")?)?),
        };
        if grid_kind == GridKind::Surveyed {
            return Err(Error::config("grid.kind", "surveyed grids come from traces, not configs"));
        }

        let (m_training, m_runtime) = match map.get_opt::<usize>("measure.both")? {
            Some(m) => {
                let m = at_least_one("measure.both", m)?;
                (m, m)
            }
            None => (
                at_least_one("measure.training", map.get("measure.training")?)?,
                at_least_one("measure.runtime", map.get("measure.runtime")?)?,
            ),
        };

        let sweep = match map.raw("sweep.param") {
            None => {
                if map.is_set("sweep.values") {
                    return Err(Error::config("sweep.param", "sweep.values given without a parameter"));
                }
                None
            }
            Some(param) => {
                if default_of(param).is_none() || param.starts_with("sweep.") {
                    return Err(Error::config("sweep.param", format!("cannot sweep `{param}`")));
                }
                let values: Vec<String> = map.get_list("sweep.values")?;
                if values.is_empty() {
                    return Err(Error::config("sweep.values", "sweep needs at least one value"));
                }
                Some(Sweep {
                    param: param.to_string(),
                    values,
                })
            }
        };

        let method: PlacementMethod = in_field("placement.method", map.get::<String>("placement.method")?.parse())?;
        let kl_field = match map.get::<String>("kl.field")?.as_str() {
            "level" => KlField::Level,
            "approx" => KlField::Approx,
            other => return Err(Error::config("kl.field", format!("unknown field `{other}` (level, approx)"))),
        };
        let disp: Vec<f64> = map.get_list("kl.displacement")?;
        let kl_displacement = match disp[..] {
            [dx, dy] => (dx, dy),
            _ => return Err(Error::config("kl.displacement", "expected `dx, dy`")),
        };

        let cfg = Self {
            region,
            base_anchors,
            tx_dbm,
            model,
            analytic,
            grid_kind,
            grid_size,
            m_training,
            m_runtime,
            k: at_least_one("knn.k", map.get("knn.k")?)?,
            weighted: map.get("knn.weighted")?,
            trials: at_least_one("run.trials", map.get("run.trials")?)?,
            master_seed: map.get("run.seed")?,
            exclude_walls: map.get("run.exclude_walls")?,
            wall_clearance: map.get("run.wall_clearance")?,
            sweep,
            placement: PlacementSpec {
                method,
                count: map.get("placement.count")?,
                seed: map.get("placement.seed")?,
            },
            spatial_resolution: positive("spatial.resolution", map.get("spatial.resolution")?)?,
            spatial_trials: at_least_one("spatial.trials", map.get("spatial.trials")?)?,
            kl_field,
            kl_displacement,
            kl_resolution: positive("kl.resolution", map.get("kl.resolution")?)?,
            source: map.clone(),
        };
        if let Some(s) = &cfg.sweep {
            for v in &s.values {
                let m = map.with(&s.param, v)?.with("sweep.param", "")?.with("sweep.values", "")?;
                Self::from_map(&m).map_err(|e| Error::config("sweep.values", format!("value `{v}`: {e}")))?;
            }
        }
        Ok(cfg)
    }

    /// The configuration with `key` replaced by `value` and no sweep.
    pub fn with_override(&self, key: &str, value: &str) -> Result<Self> {
        let m = self
            .source
            .with(key, value)?
            .with("sweep.param", "")?
            .with("sweep.values", "")?;
        Self::from_map(&m)
    }

    pub fn exponent_spec(&self) -> Result<ExponentSpec> {
        let map = &self.source;
        let dist = |key: &str| -> Result<DiscreteDistribution> {
            in_field(key, DiscreteDistribution::new(map.get_list(key)?))
        };
        let p1 = dist("exponent.p1")?;
        let p2 = dist("exponent.p2")?;
        if p1.alphabet_size() != p2.alphabet_size() {
            return Err(Error::config("exponent.p2", "must have the same length as exponent.p1"));
        }
        let test = match map.get::<String>("exponent.test")?.as_str() {
            "typical" => ErrorTest::TypicalSet {
                epsilon: positive("exponent.epsilon", map.get("exponent.epsilon")?)?,
            },
            "np" => ErrorTest::NeymanPearson {
                gamma: map.get("exponent.gamma")?,
            },
            "map" => {
                let prior1: f64 = map.get("exponent.prior1")?;
                if !(prior1 > 0.0 && prior1 < 1.0) {
                    return Err(Error::config("exponent.prior1", "must lie in (0, 1)"));
                }
                ErrorTest::Map { prior1 }
            }
            other => return Err(Error::config("exponent.test", format!("unknown test `{other}` (typical, np, map)"))),
        };
        let sampling = match map.get::<String>("exponent.sampling")?.as_str() {
            "tilted" => Sampling::Tilted,
            "direct" => Sampling::Direct,
            other => return Err(Error::config("exponent.sampling", format!("unknown mode `{other}` (tilted, direct)"))),
        };
        let n_values: Vec<usize> = map.get_list("exponent.n")?;
        if n_values.len() < 5 || n_values.contains(&0) {
            return Err(Error::config("exponent.n", "need at least five positive sample sizes"));
        }
        let trials: usize = map.get("exponent.trials")?;
        if trials < 10_000 {
            return Err(Error::config("exponent.trials", "need at least 10000 trials"));
        }
        Ok(ExponentSpec {
            p1,
            p2,
            test,
            n_values,
            trials,
            sampling,
        })
    }
}
