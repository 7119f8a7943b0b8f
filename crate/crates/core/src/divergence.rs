//! Divergence metrics between location-conditioned RSS distributions.
//!
//! All quantities are in nats. The closed forms cover the two linear-power
//! models (Gaussian quantization noise and exponential fading); the discrete
//! routines (KL, total variation, Chernoff information, Sanov exponent) work
//! on finite alphabets.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::propagation::{path_gain, AnalyticChannelParams, Anchor, ChannelModel, LINEAR_MIN_DISTANCE};

const SUM_TOL: f64 = 1e-12;

/// Probability mass function over `{0, .., alphabet_size - 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::param("distribution needs a non-empty alphabet"));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::param("probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::param(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::param("weights must have a positive finite sum"));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// `[1 - θ, θ]`: symbol 1 has probability `θ`.
    pub fn bernoulli(theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::param(format!("Bernoulli parameter {theta} outside [0, 1]")));
        }
        Self::new(vec![1.0 - theta, theta])
    }

    pub fn point_mass(alphabet_size: usize, symbol: usize) -> Result<Self> {
        if symbol >= alphabet_size {
            return Err(Error::param("point mass symbol outside alphabet"));
        }
        let mut probs = vec![0.0; alphabet_size];
        probs[symbol] = 1.0;
        Self::new(probs)
    }

    pub fn alphabet_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, symbol: usize) -> f64 {
        self.probs[symbol]
    }

    /// Inverse-CDF draw of one symbol.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = self.probs.len() - 1;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // Rounding can leave `acc` a hair under 1; fall back to the last
        // symbol with positive mass.
        (0..=last).rev().find(|&i| self.probs[i] > 0.0).unwrap_or(last)
    }
}

fn same_alphabet(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.alphabet_size() != q.alphabet_size() {
        return Err(Error::domain(format!(
            "alphabet sizes differ: {} vs {}",
            p.alphabet_size(),
            q.alphabet_size()
        )));
    }
    Ok(())
}

/// The anchors and channel behind a closed-form divergence.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub anchors: Vec<Anchor>,
    pub params: AnalyticChannelParams,
}

impl Scenario {
    pub fn new(anchors: Vec<Anchor>, params: AnalyticChannelParams) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::param("scenario needs at least one anchor"));
        }
        params.validate()?;
        Ok(Self { anchors, params })
    }

    fn require(&self, model: ChannelModel) -> Result<()> {
        if self.params.model != model {
            return Err(Error::param(format!(
                "operation needs the {model:?} channel model, scenario uses {:?}",
                self.params.model
            )));
        }
        Ok(())
    }
}

fn clamped_distance(a: &Anchor, u: &Point) -> f64 {
    a.location.distance(u).max(LINEAR_MIN_DISTANCE)
}

/// KL divergence between the Gaussian-noise RSS vectors at `u1` and `u2`:
/// `Σ_j P_j² / (2 N) · (d_j(u1)^-α - d_j(u2)^-α)²`.
pub fn kl_gaussian_rss(u1: &Point, u2: &Point, scen: &Scenario) -> Result<f64> {
    scen.require(ChannelModel::Noisy)?;
    let p = &scen.params;
    Ok(scen
        .anchors
        .iter()
        .map(|a| {
            let diff = path_gain(u1, a, p.alpha) - path_gain(u2, a, p.alpha);
            diff * diff / (2.0 * p.quant_noise_var)
        })
        .sum())
}

/// Closed-form divergence for exponential fading:
/// `Σ_j ( α·ln(d_j(u2)/d_j(u1)) + (d_j(u1)/d_j(u2))^α - 1 )`.
///
/// With the observation at `u` exponential of mean `P_j / d_j(u)^α`, this is
/// the divergence of the law at `u2` from the law at `u1`; the additive noise
/// floor shifts both laws equally and drops out.
pub fn kl_fading_rss(u1: &Point, u2: &Point, scen: &Scenario) -> Result<f64> {
    scen.require(ChannelModel::Fading)?;
    let alpha = scen.params.alpha;
    Ok(scen
        .anchors
        .iter()
        .map(|a| {
            let (r1, r2) = (clamped_distance(a, u1), clamped_distance(a, u2));
            fading_term(r1, r2, alpha)
        })
        .sum())
}

fn fading_term(r1: f64, r2: f64, alpha: f64) -> f64 {
    let x = (r1 / r2).powf(alpha);
    -x.ln() + x - 1.0
}

/// `ℓ(u, e)`: Gaussian-model divergence between `u` and `u + e`.
pub fn level_curve_value(u: &Point, e: (f64, f64), scen: &Scenario) -> Result<f64> {
    kl_gaussian_rss(u, &u.offset(e.0, e.1), scen)
}

/// `ℓ̃(u) = Σ_j ‖u - w_j‖^-(2α+2)`.
pub fn level_field_approx(u: &Point, scen: &Scenario) -> f64 {
    let power = 2.0 * scen.params.alpha + 2.0;
    scen.anchors
        .iter()
        .map(|a| clamped_distance(a, u).powf(-power))
        .sum()
}

/// Largest separation of two points on `[0, D]` (anchor at the origin) whose
/// Gaussian-model divergence is at most `l`: `D^(α+1) / (α P_T) · √(2 N₁ L)`.
pub fn robustness_bound(l: f64, d: f64, alpha: f64, p_t: f64, n1: f64) -> f64 {
    d.powf(alpha + 1.0) / (alpha * p_t) * (2.0 * n1 * l).sqrt()
}

/// Upper bound on `kl_gaussian_rss` from the mean value theorem, using the
/// closest approach of the segment `u1`–`u2` to each anchor.
pub fn kl_gaussian_mean_value_bound(u1: &Point, u2: &Point, scen: &Scenario) -> Result<f64> {
    scen.require(ChannelModel::Noisy)?;
    let p = &scen.params;
    let sep2 = u1.distance(u2).powi(2);
    Ok(scen
        .anchors
        .iter()
        .map(|a| {
            let r_min = segment_distance(u1, u2, &a.location).max(LINEAR_MIN_DISTANCE);
            p.alpha * p.alpha * a.tx_power_mw * a.tx_power_mw / (2.0 * p.quant_noise_var) * sep2
                / r_min.powf(2.0 * p.alpha + 2.0)
        })
        .sum())
}

fn segment_distance(a: &Point, b: &Point, p: &Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a.distance(p);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Point::new(a.x + t * dx, a.y + t * dy))
}

/// Per-anchor fading divergence term alongside the comparison term
/// `½ r1^{2α} (r1^-α - r2^-α)²`, with `r1 <= r2` after swapping.
pub fn fading_noise_gap(u1: &Point, u2: &Point, anchor: &Anchor, alpha: f64) -> (f64, f64) {
    let (mut r1, mut r2) = (clamped_distance(anchor, u1), clamped_distance(anchor, u2));
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    let fading = fading_term(r1, r2, alpha);
    let diff = r1.powf(-alpha) - r2.powf(-alpha);
    (fading, 0.5 * r1.powf(2.0 * alpha) * diff * diff)
}

/// `Σ p ln(p / q)` with `0 ln 0 = 0`.
pub fn kl_discrete(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    same_alphabet(p, q)?;
    let mut total = 0.0;
    for (x, (&pp, &qq)) in p.probs.iter().zip(&q.probs).enumerate() {
        if pp == 0.0 {
            continue;
        }
        if qq == 0.0 {
            return Err(Error::domain(format!(
                "symbol {x} has mass {pp} under p but none under q"
            )));
        }
        total += pp * (pp / qq).ln();
    }
    Ok(total.max(0.0))
}

/// KL divergence that reports support violations as `+∞`.
pub(crate) fn kl_or_infinite(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pp, &qq) in p.iter().zip(q) {
        if pp == 0.0 {
            continue;
        }
        if qq == 0.0 {
            return f64::INFINITY;
        }
        total += pp * (pp / qq).ln();
    }
    total.max(0.0)
}

pub fn tv_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    same_alphabet(p, q)?;
    Ok(tv_raw(&p.probs, &q.probs))
}

fn tv_raw(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Value of the Chernoff information together with the minimizing exponent `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChernoffPoint {
    pub information: f64,
    pub t: f64,
}

/// `-ln min_{t∈[0,1]} Σ p^{1-t} q^t`; grid search in steps of 10⁻³, then
/// golden-section refinement to 10⁻⁸.
pub fn chernoff_information(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    Ok(chernoff_point(p, q)?.information)
}

pub fn chernoff_point(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<ChernoffPoint> {
    same_alphabet(p, q)?;
    let mut logs = Vec::with_capacity(p.alphabet_size());
    for (x, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        match (a > 0.0, b > 0.0) {
            (true, true) => logs.push((a.ln(), b.ln())),
            (false, false) => {}
            _ => {
                return Err(Error::domain(format!(
                    "symbol {x} lies in the support of only one distribution"
                )))
            }
        }
    }
    let objective = |t: f64| -> f64 {
        logs.iter()
            .map(|(lp, lq)| ((1.0 - t) * lp + t * lq).exp())
            .sum()
    };

    const GRID: usize = 1000;
    let (mut best_t, mut best_v) = (0.0, objective(0.0));
    for i in 1..=GRID {
        let t = i as f64 / GRID as f64;
        let v = objective(t);
        if v < best_v {
            best_t = t;
            best_v = v;
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = ((best_t - 1e-3).max(0.0), (best_t + 1e-3).min(1.0));
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while hi - lo > 1e-8 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = objective(d);
        }
    }
    let t = 0.5 * (lo + hi);
    let v = objective(t);
    let (t, v) = if v < best_v { (t, v) } else { (best_t, best_v) };
    Ok(ChernoffPoint {
        information: (-v.ln()).max(0.0),
        t,
    })
}

/// Largest alphabet accepted by [`sanov_exponent`].
pub const SANOV_MAX_ALPHABET: usize = 4;
const SANOV_GRID_STEPS: usize = 200;

/// `inf { D(q ‖ p) : TV(q, p) >= a }` over the simplex.
///
/// The infimum is attained on the sphere `TV = a`. A simplex grid of pitch
/// 0.005 seeds a pattern search that keeps iterates on that sphere. Returns
/// `+∞` when no distribution is `a`-far from `p`.
pub fn sanov_exponent(p: &DiscreteDistribution, a: f64) -> Result<f64> {
    let k = p.alphabet_size();
    if k > SANOV_MAX_ALPHABET {
        return Err(Error::UnsupportedSize {
            size: k,
            max: SANOV_MAX_ALPHABET,
        });
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::param(format!("TV radius must lie in (0, 1), got {a}")));
    }
    let p = p.probs();
    let feasible_tol = 1e-12;

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut counts = vec![0usize; k];
    visit_compositions(&mut counts, 0, SANOV_GRID_STEPS, &mut |c| {
        let q: Vec<f64> = c.iter().map(|&n| n as f64 / SANOV_GRID_STEPS as f64).collect();
        if tv_raw(&q, p) + feasible_tol < a {
            return;
        }
        let v = kl_or_infinite(&q, p);
        if v.is_finite() && best.as_ref().is_none_or(|(b, _)| v < *b) {
            best = Some((v, q));
        }
    });
    let Some((_, start)) = best else {
        return Ok(f64::INFINITY);
    };

    // Pull a point back onto the sphere along the ray from p.
    let project = |q: &[f64]| -> Vec<f64> {
        let tv = tv_raw(q, p);
        let lambda = a / tv;
        q.iter().zip(p).map(|(qi, pi)| pi + lambda * (qi - pi)).collect()
    };
    let in_simplex = |q: &[f64]| q.iter().all(|&v| v >= 0.0);

    let mut q = project(&start);
    if !in_simplex(&q) {
        q = start;
    }
    let mut val = kl_or_infinite(&q, p);
    let mut step = 1.0 / SANOV_GRID_STEPS as f64;
    while step > 1e-13 {
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let mut cand = q.clone();
                cand[i] += step;
                cand[j] -= step;
                if !in_simplex(&cand) || tv_raw(&cand, p) == 0.0 {
                    continue;
                }
                let proj = project(&cand);
                let cand = if in_simplex(&proj) { proj } else { cand };
                if tv_raw(&cand, p) + feasible_tol < a {
                    continue;
                }
                let v = kl_or_infinite(&cand, p);
                if v < val {
                    q = cand;
                    val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(val)
}

fn visit_compositions(counts: &mut [usize], idx: usize, remaining: usize, f: &mut impl FnMut(&[usize])) {
    if idx == counts.len() - 1 {
        counts[idx] = remaining;
        f(counts);
        return;
    }
    for c in 0..=remaining {
        counts[idx] = c;
        visit_compositions(counts, idx + 1, remaining - c, f);
    }
}
