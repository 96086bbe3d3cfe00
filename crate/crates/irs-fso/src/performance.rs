//! Turbulence, bit error rate, capacity and outage of the shared links.
//!
//! Receiver n sees its own source with SNR factor gamma_n and every other
//! active source m as interference with gamma_m. Each path fades
//! independently with a unit-mean Gamma-Gamma gain h_a.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_pieces, Tolerance};
use crate::special::{gamma_gamma_cdf, gamma_gamma_pdf, qfunc};

/// Gamma-Gamma turbulence parameters of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    pub alpha: f64,
    pub beta: f64,
}

impl FadingParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Domain { func: "FadingParams", detail: format!("need alpha, beta > 0, got {alpha}, {beta}") });
        }
        Ok(Self { alpha, beta })
    }

    /// Variance of the unit-mean gain.
    pub fn variance(&self) -> f64 {
        1.0 / self.alpha + 1.0 / self.beta + 1.0 / (self.alpha * self.beta)
    }
}

/// Gamma-Gamma sampler: product of two unit-mean Gamma draws.
#[derive(Debug, Clone, Copy)]
pub struct FadingSampler {
    large: Gamma<f64>,
    small: Gamma<f64>,
}

impl FadingSampler {
    pub fn new(p: FadingParams) -> Result<Self> {
        let g = |s: f64| Gamma::new(s, 1.0 / s).map_err(|e| Error::Domain { func: "FadingSampler", detail: e.to_string() });
        Ok(Self { large: g(p.alpha)?, small: g(p.beta)? })
    }

    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.large.sample(rng) * self.small.sample(rng)
    }
}

pub fn sample_fading<R: rand::Rng + ?Sized>(params: FadingParams, rng: &mut R) -> Result<f64> {
    Ok(FadingSampler::new(params)?.sample(rng))
}

/// Signal-to-noise factors seen by one receiver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfInputs {
    /// gamma_m = P_m / sigma^2 |h_irs h_p|^2 for every source m at this receiver.
    pub gamma: Vec<f64>,
    /// Index of the source this receiver decodes.
    pub desired: usize,
    /// Fading of every source's path to this receiver.
    pub fading: Vec<FadingParams>,
}

impl PerfInputs {
    pub fn new(gamma: Vec<f64>, desired: usize, fading: Vec<FadingParams>) -> Result<Self> {
        if gamma.is_empty() || desired >= gamma.len() || fading.len() != gamma.len() {
            return Err(Error::Domain {
                func: "PerfInputs",
                detail: format!("{} SNR factors, {} fading entries, desired index {desired}", gamma.len(), fading.len()),
            });
        }
        if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
            return Err(Error::Domain { func: "PerfInputs", detail: "SNR factors must be finite and nonnegative".into() });
        }
        Ok(Self { gamma, desired, fading })
    }

    fn interferers(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.gamma.len()).filter(move |&m| m != self.desired && self.gamma[m] > 0.0)
    }
}

/// gamma = P / sigma^2 |h_irs h_p|^2.
pub fn snr_factor(power: f64, noise: f64, h_irs: f64, h_p: f64) -> f64 {
    power / noise * (h_irs * h_p).powi(2)
}

/// OOK error probability for one fading realization, averaged over the
/// interfering symbols. The detector threshold is h_n sqrt(gamma_n) / 2.
pub fn instantaneous_ber(h_a: &[f64], perf: &PerfInputs) -> f64 {
    let n = perf.desired;
    let half = 0.5 * h_a[n] * perf.gamma[n].sqrt();
    let amps: Vec<f64> = (0..perf.gamma.len()).filter(|&m| m != n).map(|m| h_a[m] * perf.gamma[m].sqrt()).collect();
    let count = 1usize << amps.len();
    let mut acc = 0.0;
    for mask in 0..count {
        let i: f64 = amps.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, a)| a).sum();
        acc += qfunc(half - i) + qfunc(half + i);
    }
    acc / (2 * count) as f64
}

// ---------------------------------------------------------------------------
// Deterministic Monte Carlo

/// Trials per random stream.
pub const MC_BLOCK: usize = 16384;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Mean of `f` over `trials` draws. Block b uses ChaCha8 seeded with `seed`
/// on stream b, and block sums are added in block order, so the result does
/// not depend on the number of worker threads.
pub fn monte_carlo<F>(trials: usize, seed: u64, f: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    if trials < 2 {
        return Err(Error::Domain { func: "monte_carlo", detail: format!("need at least 2 trials, got {trials}") });
    }
    let blocks = trials.div_ceil(MC_BLOCK);
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let n = MC_BLOCK.min(trials - b * MC_BLOCK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let v = f(&mut rng);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let mean = s / n;
    let var = ((s2 - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok(McEstimate { mean, std_err: (var / n).sqrt(), trials })
}

fn samplers(perf: &PerfInputs) -> Result<Vec<FadingSampler>> {
    perf.fading.iter().map(|&p| FadingSampler::new(p)).collect()
}

/// Average BER by Monte Carlo. Each trial contributes the conditional error
/// probability of its fading draw, which has lower variance than counting
/// simulated bit errors and the same mean.
pub fn average_ber_mc(perf: &PerfInputs, trials: usize, seed: u64) -> Result<McEstimate> {
    let s = samplers(perf)?;
    monte_carlo(trials, seed, |rng| {
        let h: Vec<f64> = s.iter().map(|x| x.sample(rng)).collect();
        instantaneous_ber(&h, perf)
    })
}

/// Outage bound by Monte Carlo: fraction of draws whose SINR is below
/// `gamma_thr`.
pub fn outage_mc(perf: &PerfInputs, gamma_thr: f64, trials: usize, seed: u64) -> Result<McEstimate> {
    let s = samplers(perf)?;
    monte_carlo(trials, seed, |rng| {
        let h: Vec<f64> = s.iter().map(|x| x.sample(rng)).collect();
        f64::from(sinr(&h, perf) < gamma_thr)
    })
}

/// Upsilon_n = gamma_n h_n^2 / (sum_m gamma_m h_m^2 + 1).
pub fn sinr(h_a: &[f64], perf: &PerfInputs) -> f64 {
    let n = perf.desired;
    let interf: f64 = perf.interferers().map(|m| perf.gamma[m] * h_a[m] * h_a[m]).sum();
    perf.gamma[n] * h_a[n] * h_a[n] / (interf + 1.0)
}

// ---------------------------------------------------------------------------
// Quadrature over the fading densities

/// Largest number of paths the nested quadrature handles.
pub const QUAD_MAX_PATHS: usize = 3;

const EXPECT_TOL: Tolerance = Tolerance { abs: 1e-15, rel: 1e-9, max_depth: 60 };

fn pdf_or_zero(h: f64, p: FadingParams) -> f64 {
    if h > 0.0 && h.is_finite() {
        gamma_gamma_pdf(h, p.alpha, p.beta).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Point beyond which the density is below exp(-80) relative to its bulk.
fn tail_edge(p: FadingParams) -> f64 {
    let ab = p.alpha * p.beta;
    let mut edge = 1.0f64;
    while 2.0 * (ab * edge).sqrt() <= 80.0 + (p.alpha + p.beta) * edge.ln().max(0.0) {
        edge *= 2.0;
    }
    edge
}

/// E[f(h)] for Gamma-Gamma h. `breaks` marks where f changes quickly.
///
/// Below h = 1 the integral runs in u = h^m, m = min(alpha, beta, 1), which
/// removes the h^(m-1) growth of the density at the origin.
pub fn gg_expectation<F: Fn(f64) -> f64>(f: F, p: FadingParams, breaks: &[f64]) -> Result<f64> {
    let m = p.alpha.min(p.beta).min(1.0);
    let inv = 1.0 / m;
    let mut low: Vec<f64> = vec![0.0, 1.0];
    let mut e: f64 = 1e-12;
    while e < 1.0 {
        low.push(e.powf(m));
        e *= 10.0;
    }
    let top = tail_edge(p);
    let mut high: Vec<f64> = vec![1.0, top];
    let mut e: f64 = 2.0;
    while e < top {
        high.push(e);
        e *= 2.0;
    }
    for &b in breaks {
        if b > 0.0 && b < 1.0 {
            low.push(b.powf(m));
        } else if b > 1.0 && b < top {
            high.push(b);
        }
    }
    for v in [&mut low, &mut high] {
        v.sort_by(f64::total_cmp);
        v.dedup();
    }
    let lower = integrate_pieces(
        |u: f64| {
            if u <= 0.0 {
                return 0.0;
            }
            let h = u.powf(inv);
            f(h) * pdf_or_zero(h, p) * inv * h / u
        },
        &low,
        EXPECT_TOL,
    )?;
    let upper = integrate_pieces(|h: f64| f(h) * pdf_or_zero(h, p), &high, EXPECT_TOL)?;
    Ok(lower + upper)
}

/// Breakpoints around the transition of Q(a h - c) in h.
fn q_breaks(a: f64, c: f64) -> Vec<f64> {
    if a <= 0.0 {
        return Vec::new();
    }
    let mid = c / a;
    [-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0].iter().map(|d| mid + d / a).filter(|h| *h > 0.0).collect()
}

fn check_quad_size(perf: &PerfInputs) -> Result<Vec<usize>> {
    let interf: Vec<usize> = perf.interferers().collect();
    if interf.len() + 1 > QUAD_MAX_PATHS {
        return Err(Error::Unsupported(format!(
            "quadrature handles at most {QUAD_MAX_PATHS} paths, got {}",
            interf.len() + 1
        )));
    }
    Ok(interf)
}

/// Expectation over the interferers' fading by nested quadrature.
fn over_interferers<F: Fn(&[f64]) -> Result<f64>>(perf: &PerfInputs, interf: &[usize], h: &mut Vec<f64>, f: &F) -> Result<f64> {
    match interf.split_first() {
        None => f(h),
        Some((&m, rest)) => {
            let err = std::cell::RefCell::new(None);
            let v = gg_expectation(
                |x| {
                    let mut hh = h.clone();
                    hh[m] = x;
                    match over_interferers(perf, rest, &mut hh, f) {
                        Ok(v) => v,
                        Err(e) => {
                            err.borrow_mut().get_or_insert(e);
                            0.0
                        }
                    }
                },
                perf.fading[m],
                &[],
            )?;
            match err.into_inner() {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
    }
}

/// Average BER by nested quadrature over the fading densities.
pub fn average_ber_quad(perf: &PerfInputs) -> Result<f64> {
    let interf = check_quad_size(perf)?;
    let n = perf.desired;
    let a = 0.5 * perf.gamma[n].sqrt();
    let mut h = vec![0.0; perf.gamma.len()];
    over_interferers(perf, &interf, &mut h, &|h: &[f64]| {
        // Interfering amplitudes for every symbol pattern.
        let amps: Vec<f64> = interf.iter().map(|&m| h[m] * perf.gamma[m].sqrt()).collect();
        let count = 1usize << amps.len();
        let mut total = 0.0;
        for mask in 0..count {
            let c: f64 = amps.iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).map(|(_, a)| a).sum();
            let inner = gg_expectation(|x| qfunc(a * x - c) + qfunc(a * x + c), perf.fading[n], &q_breaks(a, c))?;
            total += inner;
        }
        // Zero-gain interferers still double the pattern count in the BER
        // expression; they contribute identical terms, so the weight is unchanged.
        Ok(total / (2 * count) as f64)
    })
}

/// Outage bound by quadrature: the desired-path CDF at the threshold set by
/// the interferers, averaged over their fading.
pub fn outage_quad(perf: &PerfInputs, gamma_thr: f64) -> Result<f64> {
    if gamma_thr <= 0.0 {
        return Ok(0.0);
    }
    let interf = check_quad_size(perf)?;
    let n = perf.desired;
    if perf.gamma[n] == 0.0 {
        return Ok(1.0);
    }
    let p = perf.fading[n];
    let mut h = vec![0.0; perf.gamma.len()];
    over_interferers(perf, &interf, &mut h, &|h: &[f64]| {
        let i: f64 = interf.iter().map(|&m| perf.gamma[m] * h[m] * h[m]).sum();
        gamma_gamma_cdf((gamma_thr * (i + 1.0) / perf.gamma[n]).sqrt(), p.alpha, p.beta)
    })
}

/// Outage bound without interference: F(sqrt(gamma_thr / gamma_n)).
pub fn outage_noise_limited(gamma_n: f64, gamma_thr: f64, fading: FadingParams) -> Result<f64> {
    if gamma_thr <= 0.0 {
        return Ok(0.0);
    }
    if gamma_n <= 0.0 {
        return Ok(1.0);
    }
    gamma_gamma_cdf((gamma_thr / gamma_n).sqrt(), fading.alpha, fading.beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Quad,
}

/// Average BER with either method; the Monte Carlo standard error is
/// returned alongside, zero for quadrature.
pub fn average_ber(perf: &PerfInputs, method: Method, trials: usize, seed: u64) -> Result<(f64, f64)> {
    match method {
        Method::Quad => Ok((average_ber_quad(perf)?, 0.0)),
        Method::Mc => average_ber_mc(perf, trials, seed).map(|e| (e.mean, e.std_err)),
    }
}

pub fn outage_upper_bound(perf: &PerfInputs, gamma_thr: f64, method: Method, trials: usize, seed: u64) -> Result<(f64, f64)> {
    match method {
        Method::Quad => Ok((outage_quad(perf, gamma_thr)?, 0.0)),
        Method::Mc => outage_mc(perf, gamma_thr, trials, seed).map(|e| (e.mean, e.std_err)),
    }
}

// ---------------------------------------------------------------------------
// Noise-limited series, capacity

/// Value of the noise-limited BER series and the size of the first omitted
/// term pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: f64,
    pub truncation: f64,
    pub terms: usize,
}

fn xi(i: usize, a: f64, b: f64) -> f64 {
    let i_f = i as f64;
    let s = (std::f64::consts::PI * (a - b)).sin();
    // 1/Gamma(i - a + b + 1) vanishes at the poles of Gamma.
    let g = gamma(i_f - a + b + 1.0);
    if !g.is_finite() {
        return 0.0;
    }
    let log = (i_f + b) * (2.0 * std::f64::consts::SQRT_2 * a * b).ln() + ln_gamma(0.5 * (i_f + b + 1.0))
        - ln_gamma(a)
        - ln_gamma(b)
        - ln_gamma(i_f + 1.0);
    std::f64::consts::PI.sqrt() * log.exp() / (2.0 * s * g * (i_f + b))
}

/// Average BER of an interference-free link as a power series in
/// 1/sqrt(gamma_n). Fails with a pole error when alpha - beta is an integer.
pub fn ber_noise_limited_series(gamma_n: f64, alpha: f64, beta: f64, terms: usize) -> Result<SeriesValue> {
    let d = alpha - beta;
    if (d - d.round()).abs() < 1e-9 {
        return Err(Error::Pole(d));
    }
    if !(gamma_n > 0.0) {
        return Err(Error::Domain { func: "ber_noise_limited_series", detail: format!("need gamma_n > 0, got {gamma_n}") });
    }
    // P_e(x) at x = gamma_n / 4, so (4x)^(-(i + b)/2) = gamma_n^(-(i + b)/2).
    let lg = gamma_n.ln();
    let pair = |i: usize| {
        let i_f = i as f64;
        xi(i, alpha, beta) * (-(i_f + beta) * 0.5 * lg).exp() + xi(i, beta, alpha) * (-(i_f + alpha) * 0.5 * lg).exp()
    };
    let mut value = 0.0;
    let mut last = f64::INFINITY;
    let mut used = 0;
    for i in 0..terms {
        let t = pair(i);
        value += t;
        used = i + 1;
        last = pair(i + 1).abs();
        if i > 4 && last <= 1e-16 * value.abs() {
            break;
        }
    }
    Ok(SeriesValue { value, truncation: last, terms: used })
}

/// C_low = W/2 ln(1 + Upsilon e / 2 pi), in nats per second.
pub fn capacity_lower_bound(upsilon: f64, bandwidth: f64) -> f64 {
    0.5 * bandwidth * (1.0 + upsilon * std::f64::consts::E / (2.0 * std::f64::consts::PI)).ln()
}

/// SINR below which the capacity bound falls short of `rate`.
pub fn gamma_threshold(rate: f64, bandwidth: f64) -> f64 {
    2.0 * std::f64::consts::PI / std::f64::consts::E * ((2.0 * rate / bandwidth).exp() - 1.0)
}
