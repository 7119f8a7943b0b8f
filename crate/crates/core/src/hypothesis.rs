//! Binary hypothesis tests between two locations and Monte Carlo estimation
//! of their error exponents.
//!
//! Three decision rules are provided: the typical-set test (decide the first
//! location when the normalized log-likelihood ratio is within `ε` of its
//! expectation), the Neyman-Pearson threshold test, and the MAP test. Error
//! probabilities are estimated either by direct simulation or by sampling an
//! exponentially tilted law `q_t ∝ p1^(1-t) p2^t` and reweighting, which
//! keeps errors of order `e^-60` measurable with 10⁵ trials.

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::divergence::{chernoff_information, kl_discrete, kl_fading_rss, kl_gaussian_rss, kl_or_infinite, DiscreteDistribution, Scenario};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::propagation::{mean_rss_linear, path_gain, ChannelModel};
use crate::rng;

/// Observed alphabet indices `X_1..X_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBatch {
    samples: Vec<usize>,
    alphabet_size: usize,
}

impl SampleBatch {
    pub fn new(samples: Vec<usize>, alphabet_size: usize) -> Result<Self> {
        if let Some(bad) = samples.iter().find(|&&s| s >= alphabet_size) {
            return Err(Error::param(format!("symbol {bad} outside alphabet of size {alphabet_size}")));
        }
        Ok(Self {
            samples,
            alphabet_size,
        })
    }

    /// `n` i.i.d. draws from `p`.
    pub fn draw<R: rand::Rng + ?Sized>(p: &DiscreteDistribution, n: usize, rng: &mut R) -> Self {
        Self {
            samples: (0..n).map(|_| p.sample(rng)).collect(),
            alphabet_size: p.alphabet_size(),
        }
    }

    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Normalized symbol counts.
pub fn empirical_distribution(batch: &SampleBatch, alphabet_size: usize) -> Result<DiscreteDistribution> {
    if batch.is_empty() {
        return Err(Error::param("empirical distribution of an empty batch"));
    }
    let mut counts = vec![0usize; alphabet_size];
    for &s in batch.samples() {
        *counts
            .get_mut(s)
            .ok_or_else(|| Error::param(format!("symbol {s} outside alphabet of size {alphabet_size}")))? += 1;
    }
    let n = batch.len() as f64;
    DiscreteDistribution::from_weights(&counts.iter().map(|&c| c as f64 / n).collect::<Vec<_>>())
}

fn check_alphabets(batch: &SampleBatch, p1: &DiscreteDistribution, p2: &DiscreteDistribution) -> Result<()> {
    if p1.alphabet_size() != p2.alphabet_size() || batch.alphabet_size > p1.alphabet_size() {
        return Err(Error::domain("batch and distributions use different alphabets"));
    }
    Ok(())
}

/// `T_n = (1/n) Σ ln(p1(x_i) / p2(x_i))`.
pub fn llr_statistic(batch: &SampleBatch, p1: &DiscreteDistribution, p2: &DiscreteDistribution) -> Result<f64> {
    check_alphabets(batch, p1, p2)?;
    if batch.is_empty() {
        return Err(Error::param("log-likelihood ratio of an empty batch"));
    }
    let mut total = 0.0;
    for &x in batch.samples() {
        let (a, b) = (p1.prob(x), p2.prob(x));
        if a == 0.0 || b == 0.0 {
            return Err(Error::domain(format!("observed symbol {x} has zero probability")));
        }
        total += (a / b).ln();
    }
    Ok(total / batch.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Location1,
    Location2,
}

/// Announces the first location iff `t_n > γ`; ties go to the second.
pub fn np_decide(t_n: f64, gamma: f64) -> Decision {
    if t_n > gamma {
        Decision::Location1
    } else {
        Decision::Location2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    Inside,
    Outside,
}

/// Membership of the batch in the typical set
/// `|(1/n) Σ ln(p2/p1) + D(p1 ‖ p2)| <= ε`.
pub fn typical_set_test(
    batch: &SampleBatch,
    p1: &DiscreteDistribution,
    p2: &DiscreteDistribution,
    epsilon: f64,
) -> Result<Membership> {
    if !(epsilon > 0.0) {
        return Err(Error::param("typical-set width must be positive"));
    }
    let d = kl_discrete(p1, p2)?;
    let t = llr_statistic(batch, p1, p2)?;
    Ok(if (-t + d).abs() <= epsilon {
        Membership::Inside
    } else {
        Membership::Outside
    })
}

/// Decision rule whose error exponent is estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorTest {
    /// Type-II error `P2(inside)` of the typical set of width `epsilon`.
    TypicalSet { epsilon: f64 },
    /// Type-II error `P2(T_n > γ)`.
    NeymanPearson { gamma: f64 },
    /// Bayes error of the MAP rule with prior `prior1` on the first location.
    Map { prior1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sampling {
    /// Plain simulation under the true laws.
    Direct,
    /// Exponentially tilted proposal with likelihood-ratio weights.
    #[default]
    Tilted,
}

/// Per-n error estimates and the fitted decay rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentEstimate {
    pub n_values: Vec<usize>,
    /// Number of simulated batches that fell in an error region.
    pub errors: Vec<u64>,
    pub trials: usize,
    /// Natural log of the estimated error probability; `-∞` when no error was seen.
    pub log_error: Vec<f64>,
    /// Least-squares slope of `-log_error` against `n` over the usable points.
    pub slope: f64,
    pub slope_stderr: f64,
    /// `n` values dropped because no error was observed.
    pub dropped: Vec<usize>,
}

/// Upper bound on `Pr(|Q(x) - P(x)| >= a)` for an empirical frequency of `n` draws.
pub fn hoeffding_bound(n: usize, a: f64) -> f64 {
    2.0 * (-2.0 * n as f64 * a * a).exp()
}

/// Exponent predicted by the theory for `test`.
pub fn theory_exponent(p1: &DiscreteDistribution, p2: &DiscreteDistribution, test: ErrorTest) -> Result<f64> {
    match test {
        ErrorTest::TypicalSet { .. } => kl_discrete(p1, p2),
        ErrorTest::Map { .. } => chernoff_information(p1, p2),
        ErrorTest::NeymanPearson { gamma } => {
            let table = LlrTable::new(p1, p2);
            let q = table.tilt_to(gamma);
            kl_discrete(&q, p2)
        }
    }
}

/// Per-symbol log-likelihoods shared by every trial.
struct LlrTable {
    log_p1: Vec<f64>,
    log_p2: Vec<f64>,
    p1: DiscreteDistribution,
    p2: DiscreteDistribution,
}

impl LlrTable {
    fn new(p1: &DiscreteDistribution, p2: &DiscreteDistribution) -> Self {
        Self {
            log_p1: p1.probs().iter().map(|p| p.ln()).collect(),
            log_p2: p2.probs().iter().map(|p| p.ln()).collect(),
            p1: p1.clone(),
            p2: p2.clone(),
        }
    }

    fn mutually_continuous(&self) -> bool {
        self.log_p1
            .iter()
            .zip(&self.log_p2)
            .all(|(a, b)| a.is_finite() == b.is_finite())
    }

    fn tilted(&self, t: f64) -> DiscreteDistribution {
        let w: Vec<f64> = self
            .log_p1
            .iter()
            .zip(&self.log_p2)
            .map(|(a, b)| {
                if a.is_finite() && b.is_finite() {
                    ((1.0 - t) * a + t * b).exp()
                } else {
                    0.0
                }
            })
            .collect();
        DiscreteDistribution::from_weights(&w).expect("tilted weights have positive mass")
    }

    fn mean_llr(&self, q: &DiscreteDistribution) -> f64 {
        q.probs()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(x, &p)| p * (self.log_p1[x] - self.log_p2[x]))
            .sum()
    }

    /// Tilted law whose mean normalized LLR equals `tau` (clamped to the
    /// achievable range).
    fn tilt_to(&self, tau: f64) -> DiscreteDistribution {
        if !self.mutually_continuous() {
            return self.p2.clone();
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        if self.mean_llr(&self.tilted(0.0)) <= tau {
            return self.tilted(0.0);
        }
        if self.mean_llr(&self.tilted(1.0)) >= tau {
            return self.tilted(1.0);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.mean_llr(&self.tilted(mid)) > tau {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.tilted(0.5 * (lo + hi))
    }
}

#[derive(Clone, Copy)]
struct TrialOutcome {
    /// Decided location 2 although the batch is scored against location 1.
    miss1: bool,
    /// Decided location 1 although the batch is scored against location 2.
    miss2: bool,
    log_w1: f64,
    log_w2: f64,
}

fn log_mean_exp(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return f64::NEG_INFINITY;
    }
    max + (v.iter().map(|x| (x - max).exp()).sum::<f64>()).ln() - (count as f64).ln()
}

/// Estimates the error probability of `test` at each `n` and fits the decay rate.
///
/// Every trial draws from its own stream keyed by `(master_seed, n, trial)`,
/// so results do not depend on the thread count.
pub fn estimate_error_exponent(
    p1: &DiscreteDistribution,
    p2: &DiscreteDistribution,
    test: ErrorTest,
    n_values: &[usize],
    trials: usize,
    master_seed: u64,
    sampling: Sampling,
) -> Result<ExponentEstimate> {
    if p1.alphabet_size() != p2.alphabet_size() {
        return Err(Error::domain("distributions use different alphabets"));
    }
    if trials < 10_000 {
        return Err(Error::param(format!("need at least 10000 trials, got {trials}")));
    }
    if n_values.len() < 5 || n_values.contains(&0) {
        return Err(Error::param("need at least five positive sample sizes"));
    }
    let table = LlrTable::new(p1, p2);
    let d12 = match test {
        ErrorTest::TypicalSet { epsilon } => {
            if !(epsilon > 0.0) {
                return Err(Error::param("typical-set width must be positive"));
            }
            kl_discrete(p1, p2)?
        }
        ErrorTest::Map { prior1 } if !(prior1 > 0.0 && prior1 < 1.0) => {
            return Err(Error::param("MAP prior must lie in (0, 1)"));
        }
        _ => 0.0,
    };
    let tilted = sampling == Sampling::Tilted && table.mutually_continuous();

    let mut errors = Vec::with_capacity(n_values.len());
    let mut log_error = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let nf = n as f64;
        // Decide location 1 iff the summed LLR lies in this set.
        let (threshold_low, threshold_high, tau) = match test {
            ErrorTest::TypicalSet { epsilon } => {
                (nf * (d12 - epsilon), nf * (d12 + epsilon), d12 - epsilon)
            }
            ErrorTest::NeymanPearson { gamma } => (nf * gamma, f64::INFINITY, gamma),
            ErrorTest::Map { prior1 } => {
                let g = ((1.0 - prior1) / prior1).ln();
                (g, f64::INFINITY, g / nf)
            }
        };
        let decide1 = |s: f64| match test {
            ErrorTest::TypicalSet { .. } => s >= threshold_low && s <= threshold_high,
            _ => s > threshold_low,
        };
        let scored_against = |truth: usize| matches!(test, ErrorTest::Map { .. }) || truth == 2;

        // Proposals: one shared tilted law, or the two true laws.
        let proposals: Vec<(usize, DiscreteDistribution)> = if tilted {
            vec![(0, table.tilt_to(tau))]
        } else {
            [1, 2]
                .into_iter()
                .filter(|&h| scored_against(h) && (h == 2 || matches!(test, ErrorTest::Map { .. })))
                .map(|h| (h, if h == 1 { table.p1.clone() } else { table.p2.clone() }))
                .collect()
        };

        let mut p_miss1 = f64::NEG_INFINITY;
        let mut p_miss2 = f64::NEG_INFINITY;
        let mut count = 0u64;
        for (h, q) in &proposals {
            let log_q: Vec<f64> = q.probs().iter().map(|p| p.ln()).collect();
            let outcomes: Vec<TrialOutcome> = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut r = rng::stream(master_seed, &[rng::tag::EXPONENT, n as u64, trial as u64, *h as u64]);
                    let (mut s, mut lw1, mut lw2) = (0.0, 0.0, 0.0);
                    for _ in 0..n {
                        let x = q.sample(&mut r);
                        s += table.log_p1[x] - table.log_p2[x];
                        lw1 += table.log_p1[x] - log_q[x];
                        lw2 += table.log_p2[x] - log_q[x];
                    }
                    let d1 = decide1(s);
                    TrialOutcome {
                        miss1: !d1,
                        miss2: d1,
                        log_w1: lw1,
                        log_w2: lw2,
                    }
                })
                .collect();

            match h {
                0 => {
                    p_miss1 = log_mean_exp(outcomes.iter().filter(|o| o.miss1).map(|o| o.log_w1), trials);
                    p_miss2 = log_mean_exp(outcomes.iter().filter(|o| o.miss2).map(|o| o.log_w2), trials);
                    count += outcomes
                        .iter()
                        .filter(|o| (o.miss1 && scored_against(1)) || (o.miss2 && scored_against(2)))
                        .count() as u64;
                }
                1 => {
                    let k = outcomes.iter().filter(|o| o.miss1).count();
                    count += k as u64;
                    p_miss1 = (k as f64 / trials as f64).ln();
                }
                _ => {
                    let k = outcomes.iter().filter(|o| o.miss2).count();
                    count += k as u64;
                    p_miss2 = (k as f64 / trials as f64).ln();
                }
            }
        }

        let le = match test {
            ErrorTest::Map { prior1 } => {
                let a = prior1.ln() + p_miss1;
                let b = (1.0 - prior1).ln() + p_miss2;
                let m = a.max(b);
                if m.is_finite() {
                    m + ((a - m).exp() + (b - m).exp()).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            _ => p_miss2,
        };
        errors.push(count);
        log_error.push(le);
    }

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut dropped = Vec::new();
    for (i, &n) in n_values.iter().enumerate() {
        if errors[i] == 0 || !log_error[i].is_finite() {
            dropped.push(n);
        } else {
            xs.push(n as f64);
            ys.push(-log_error[i]);
        }
    }
    if xs.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "only {} sample sizes produced errors; at least 5 are needed (dropped {dropped:?})",
            xs.len()
        )));
    }
    let (slope, slope_stderr) = least_squares_slope(&xs, &ys);
    Ok(ExponentEstimate {
        n_values: n_values.to_vec(),
        errors,
        trials,
        log_error,
        slope,
        slope_stderr,
        dropped,
    })
}

/// Ordinary least squares slope and its standard error.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if xs.len() > 2 {
        (ssr / (k - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, stderr)
}

/// `inf_{u ∈ region} D(P_u ‖ P_{u2})` over sampled region points.
pub fn region_kl(region_samples: &[Point], u2: &Point, scen: &Scenario) -> Result<f64> {
    if region_samples.is_empty() {
        return Err(Error::param("region needs at least one sample point"));
    }
    let mut best = f64::INFINITY;
    for u in region_samples {
        let v = match scen.params.model {
            ChannelModel::Noisy => kl_gaussian_rss(u, u2, scen)?,
            ChannelModel::Fading => kl_fading_rss(u, u2, scen)?,
        };
        best = best.min(v);
    }
    Ok(best)
}

/// Default number of quantization bins for continuous RSS.
pub const DEFAULT_BINS: usize = 64;

/// Uniform bins over `[lo, hi]`; the outer bins absorb the tails.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Quantizer {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::param("quantizer needs a finite range and at least one bin"));
        }
        let hi = if hi == lo { lo + 1e-9_f64.max(lo.abs() * 1e-9) } else { hi };
        Ok(Self { lo, hi, bins })
    }

    /// Bins spanning the observed dynamic range of `samples`.
    pub fn spanning(samples: &[f64], bins: usize) -> Result<Self> {
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self::new(lo, hi, bins)
    }

    fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn bin(&self, x: f64) -> usize {
        let k = ((x - self.lo) / self.width()).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }

    /// Interior bin edges (`bins - 1` of them).
    fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        (1..self.bins).map(move |k| self.lo + k as f64 * self.width())
    }

    /// Quantized pmf of a law with the given CDF.
    pub fn pmf_from_cdf(&self, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(self.bins);
        for e in self.edges() {
            let c = cdf(e).clamp(prev, 1.0);
            out.push(c - prev);
            prev = c;
        }
        out.push(1.0 - prev);
        out
    }

    pub fn empirical(&self, samples: &[f64]) -> Result<DiscreteDistribution> {
        let batch = SampleBatch::new(samples.iter().map(|&x| self.bin(x)).collect(), self.bins)?;
        empirical_distribution(&batch, self.bins)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionDecision {
    InRegion,
    OutOfRegion,
}

/// `δ_n = c · |X| · ln(n + 1) / n`.
pub fn critical_threshold(n: usize, alphabet_size: usize, c: f64) -> f64 {
    c * alphabet_size as f64 * ((n + 1) as f64).ln() / n as f64
}

/// Critical-region test on already-quantized data.
///
/// `empirical[j]` is the empirical pmf of anchor `j`; `region_models[u][j]`
/// the model pmf of anchor `j` at region point `u`. The statistic is
/// `min_u Σ_j D(Q_j ‖ P_{u,j})`; the batch is declared outside when it
/// reaches `δ_n` computed over the combined alphabet.
pub fn region_test_discrete(
    empirical: &[DiscreteDistribution],
    region_models: &[Vec<DiscreteDistribution>],
    n: usize,
    c: f64,
) -> Result<RegionDecision> {
    if region_models.is_empty() || n == 0 {
        return Err(Error::param("region test needs region models and a non-empty batch"));
    }
    let alphabet: usize = empirical.iter().map(|d| d.alphabet_size()).sum();
    let stat = region_models
        .iter()
        .map(|models| {
            empirical
                .iter()
                .zip(models)
                .map(|(q, p)| kl_or_infinite(q.probs(), p.probs()))
                .sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(if stat >= critical_threshold(n, alphabet, c) {
        RegionDecision::OutOfRegion
    } else {
        RegionDecision::InRegion
    })
}

/// Quantized model pmf of one anchor's RSS at `u`.
pub fn quantized_model(u: &Point, anchor_idx: usize, scen: &Scenario, q: &Quantizer) -> Vec<f64> {
    let a = &scen.anchors[anchor_idx];
    let p = &scen.params;
    match p.model {
        ChannelModel::Noisy => {
            let normal = Normal::new(mean_rss_linear(u, a, p), p.quant_noise_var.sqrt())
                .expect("validated noise variance");
            q.pmf_from_cdf(|x| normal.cdf(x))
        }
        ChannelModel::Fading => {
            let g = path_gain(u, a, p.alpha);
            let floor = p.noise_floor;
            q.pmf_from_cdf(|x| if x <= floor { 0.0 } else { 1.0 - (-(x - floor) / g).exp() })
        }
    }
}

/// Critical-region test on raw RSS: `batch[j]` holds the `n` observations of
/// anchor `j`. Each anchor is quantized into `bins` uniform bins over its
/// observed range.
pub fn region_test(
    batch: &[Vec<f64>],
    region_samples: &[Point],
    scen: &Scenario,
    bins: usize,
    c: f64,
) -> Result<RegionDecision> {
    if batch.len() != scen.anchors.len() {
        return Err(Error::input("batch needs one sample list per anchor"));
    }
    let n = batch.first().map_or(0, Vec::len);
    if n == 0 || batch.iter().any(|b| b.len() != n) {
        return Err(Error::input("every anchor needs the same non-zero number of samples"));
    }
    let quantizers: Vec<Quantizer> = batch
        .iter()
        .map(|b| Quantizer::spanning(b, bins))
        .collect::<Result<_>>()?;
    let empirical: Vec<DiscreteDistribution> = batch
        .iter()
        .zip(&quantizers)
        .map(|(b, q)| q.empirical(b))
        .collect::<Result<_>>()?;
    let models: Vec<Vec<DiscreteDistribution>> = region_samples
        .iter()
        .map(|u| {
            quantizers
                .iter()
                .enumerate()
                .map(|(j, q)| DiscreteDistribution::from_weights(&quantized_model(u, j, scen, q)))
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    region_test_discrete(&empirical, &models, n, c)
}
