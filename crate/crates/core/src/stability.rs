//! Quantities of the stability analysis and the per-cell sweep protocol.
//!
//! `ε(T)² = ∫₀^T ∮ (|∂ₜ²U|² + |∂ν∂ₜU|²) ds dt` measures boundary data,
//! `I₁(k)`, `I₂(k)` are the two terms of the same integral up to `k`, and
//! `I = I₁ + I₂`. Time integrals integrate the piecewise-linear interpolant
//! of the sampled surface integrand, so partial intervals are exact for it
//! and `I(a) + ∫_a^b = I(b)` holds up to rounding.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::forward::{BoundaryDataset, Channel};
use crate::geometry::{BallGrid, FrequencyGrid, WaveVectorGrid};
use crate::inversion::{reconstruct_field, select_band_limit, synthesize_f};
use crate::source::{SourceModel, TemporalProfile};
use crate::spectral::{temporal_fourier, TailPolicy};
use crate::{Error, Result};

/// Adds white Gaussian noise with standard deviation `σ_rel × RMS` to every
/// sample of every channel, where RMS is the surface-weighted root mean
/// square of that channel. Deterministic in `seed`.
pub fn add_noise(data: &BoundaryDataset, sigma_rel: f64, seed: u64) -> Result<BoundaryDataset> {
    if !(sigma_rel >= 0.0 && sigma_rel.is_finite()) {
        return Err(Error::Input(format!("noise level must be non-negative, got {sigma_rel}")));
    }
    if sigma_rel == 0.0 {
        return Ok(data.clone());
    }
    let mut out = data.clone();
    let samples = data.time().samples();
    let weights = data.sphere().weights();
    let area: f64 = weights.iter().sum();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for c in Channel::ALL {
        let values = out.channel_mut(c);
        let mut ms = 0.0;
        for (node, w) in weights.iter().enumerate() {
            ms += w * values[node * samples..(node + 1) * samples].iter().map(|v| v * v).sum::<f64>();
        }
        let std = sigma_rel * libm::sqrt(ms / (area * samples as f64));
        for v in values.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += std * z;
        }
    }
    let p = out.provenance_mut();
    p.noise_level = sigma_rel;
    p.seed = Some(seed);
    Ok(out)
}

/// `Σᵢ wᵢ X(xᵢ, t_j)²` for one channel at every time sample.
fn surface_integrand(data: &BoundaryDataset, c: Channel) -> Vec<f64> {
    let samples = data.time().samples();
    let mut s = alloc::vec![0.0; samples];
    for (node, w) in data.sphere().weights().iter().enumerate() {
        for (acc, v) in s.iter_mut().zip(data.series(c, node)) {
            *acc += w * v * v;
        }
    }
    s
}

/// `∫_a^b` of the piecewise-linear interpolant of `s` sampled at `j·dt`.
fn integrate_linear(s: &[f64], dt: f64, a: f64, b: f64) -> f64 {
    let last = s.len() - 1;
    let b = b.min(last as f64 * dt);
    if !(b > a) {
        return 0.0;
    }
    let at = |t: f64| {
        let j = ((t / dt) as usize).min(last - 1);
        let frac = (t / dt - j as f64).clamp(0.0, 1.0);
        s[j] + (s[j + 1] - s[j]) * frac
    };
    let first = ((a / dt) as usize).min(last - 1);
    let mut acc = 0.0;
    let mut j = first;
    while j < last && (j as f64) * dt < b {
        let lo = a.max(j as f64 * dt);
        let hi = b.min((j + 1) as f64 * dt);
        if hi > lo {
            let (fl, fh) =
                if lo == j as f64 * dt && hi == (j + 1) as f64 * dt { (s[j], s[j + 1]) } else { (at(lo), at(hi)) };
            acc += 0.5 * (hi - lo) * (fl + fh);
        }
        j += 1;
    }
    acc
}

fn check_window(data: &BoundaryDataset, t: f64) -> Result<()> {
    let horizon = data.time().horizon();
    if !(t >= 0.0) || t > horizon * (1.0 + 1e-12) {
        return Err(Error::Input(format!("time {t} lies outside the dataset window [0, {horizon}]")));
    }
    Ok(())
}

/// Data discrepancy `ε` of `data` over `(0, T)`.
pub fn epsilon_of(data: &BoundaryDataset, t: f64) -> Result<f64> {
    check_window(data, t)?;
    let dt = data.time().dt();
    let a = integrate_linear(&surface_integrand(data, Channel::SecondTimeDerivative), dt, 0.0, t);
    let b = integrate_linear(&surface_integrand(data, Channel::NormalTimeDerivative), dt, 0.0, t);
    Ok(libm::sqrt(a + b))
}

/// `I₁(k)`, `I₂(k)`, `I(k)`, `I(∞)` and `I(∞) − I(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIntegrals {
    pub i1: f64,
    pub i2: f64,
    pub total: f64,
    pub infinite: f64,
    pub tail: f64,
}

/// Time integrals of a clean exponential-profile dataset. Past the horizon
/// the integrand is exactly `S(T)e^{-2γ(t−T)}`, which extends `I(k)` to any
/// `k ≥ 0` and closes `I(∞)`.
pub fn tail_integrals(data: &BoundaryDataset, k: f64) -> Result<TailIntegrals> {
    let p = data.provenance();
    let rate = match p.profile.decay_rate().filter(|_| p.profile.is_causal()) {
        Some(r) => r,
        None => return Err(Error::Precondition("tail integrals need a causal exponential profile".into())),
    };
    let time = data.time();
    let saturation = data.sphere().radius() + p.support_radius;
    if time.horizon() < saturation {
        return Err(Error::Precondition(format!(
            "horizon {} ends before the field leaves the support at t = {saturation}",
            time.horizon()
        )));
    }
    if !(k >= 0.0) {
        return Err(Error::Input(format!("k must be non-negative, got {k}")));
    }
    let dt = time.dt();
    let horizon = time.horizon();
    let parts = [Channel::SecondTimeDerivative, Channel::NormalTimeDerivative].map(|c| {
        let s = surface_integrand(data, c);
        let last = s[s.len() - 1];
        let head = integrate_linear(&s, dt, 0.0, k);
        let (head, tail) = if k <= horizon {
            (head, integrate_linear(&s, dt, k, horizon) + last / (2.0 * rate))
        } else {
            let beyond = last * libm::exp(-2.0 * rate * (k - horizon)) / (2.0 * rate);
            (head + last / (2.0 * rate) - beyond, beyond)
        };
        (head, tail)
    });
    let (i1, i2) = (parts[0].0, parts[1].0);
    let tail = parts[0].1 + parts[1].1;
    Ok(TailIntegrals { i1, i2, total: i1 + i2, infinite: i1 + i2 + tail, tail })
}

/// Lower bound of the harmonic-measure exponent for `k > T`: `1/2` on
/// `(T, 2^{1/4}T]`, `(1/π)((k/T)⁴ − 1)^{-1/2}` beyond.
///
/// The two pieces do not meet: at `k = 2^{1/4}T` the value drops from
/// `1/2` to `1/π`.
pub fn mu(k: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) || !(k > t) {
        return Err(Error::Domain(format!("mu needs k > T > 0, got k = {k}, T = {t}")));
    }
    if k <= libm::pow(2.0, 0.25) * t {
        Ok(0.5)
    } else {
        let q = k / t;
        Ok(1.0 / (PI * libm::sqrt(q * q * q * q - 1.0)))
    }
}

/// Ratios `ρ(k) = I(k) / (M² e^{(2γ+p)k} (ε/M)^{2μ(k)})` on a clean dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationReport {
    pub epsilon: f64,
    pub ks: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
}

/// Evaluates `ρ(k)` for each `k > T` with `ε = ε(T)` and exponent
/// offset `p` (the growth rate is `2γ + p`). The discrepancy enters relative
/// to the a priori bound `M`, so `ρ` is invariant under `f → λf`. Zero data
/// give `ρ = 0` for any `M`.
pub fn continuation_bound_check(
    data: &BoundaryDataset,
    t: f64,
    m: f64,
    gamma: f64,
    offset: f64,
    ks: &[f64],
) -> Result<ContinuationReport> {
    let epsilon = epsilon_of(data, t)?;
    let mut ratios = Vec::with_capacity(ks.len());
    for &k in ks {
        let exponent = mu(k, t)?;
        let i = tail_integrals(data, k)?.total;
        let r = if i == 0.0 {
            0.0
        } else if !(m > 0.0) {
            return Err(Error::Input(format!("a priori bound M must be positive, got {m}")));
        } else {
            let denom = m * m * libm::exp((2.0 * gamma + offset) * k) * libm::pow(epsilon / m, 2.0 * exponent);
            i / denom
        };
        ratios.push(r);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    Ok(ContinuationReport { epsilon, ks: ks.to_vec(), ratios, max_ratio })
}

/// `ε² + M² / (T^{2/3} |ln ε|^{1/4})^α`.
pub fn bound_rhs(epsilon: f64, t: f64, m: f64, alpha: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Input(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(t > 0.0) {
        return Err(Error::Input(format!("T must be positive, got {t}")));
    }
    let scale = libm::pow(t, 2.0 / 3.0) * libm::pow(-libm::log(epsilon), 0.25);
    Ok(epsilon * epsilon + m * m / libm::pow(scale, alpha))
}

/// `‖f‖² / I(∞)` for a clean dataset of a source with norm `norm`.
pub fn energy_ratio(data: &BoundaryDataset, norm: f64) -> Result<f64> {
    let i = tail_integrals(data, 0.0)?.infinite;
    Ok(norm * norm / i)
}

/// `I₁(k) / (‖f‖² k e^{2γk})` on the real axis.
pub fn growth_ratio(data: &BoundaryDataset, k: f64, norm: f64, gamma: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::Input(format!("k must be positive, got {k}")));
    }
    let i1 = tail_integrals(data, k)?.i1;
    Ok(i1 / (norm * norm * k * libm::exp(2.0 * gamma * k)))
}

/// `C_fit = (I(∞) − I(T))·T^α`, and the largest `(I(∞) − I(k))·k^α / C_fit`
/// over `ks` (at most 1 when `I(∞) − I(k) ≤ C_fit/k^α` holds everywhere).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    pub c_fit: f64,
    pub worst: f64,
}

pub fn fit_tail(data: &BoundaryDataset, t: f64, alpha: f64, ks: &[f64]) -> Result<TailFit> {
    let c_fit = tail_integrals(data, t)?.tail * libm::pow(t, alpha);
    let mut worst = 0.0f64;
    for &k in ks {
        let v = tail_integrals(data, k)?.tail * libm::pow(k, alpha);
        worst = worst.max(if c_fit > 0.0 {
            v / c_fit
        } else if v > 0.0 {
            f64::INFINITY
        } else {
            0.0
        });
    }
    Ok(TailFit { c_fit, worst })
}

/// Spearman rank correlation with average ranks for ties. `NaN` when
/// either side is constant or the lengths differ.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return f64::NAN;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / libm::sqrt(sxx * syy)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = alloc::vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &o in &order[i..=j] {
            out[o] = rank;
        }
        i = j + 1;
    }
    out
}

/// Median of finite values; `NaN` if there are none.
pub fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.iter().cloned().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Parameters of a `T × σ × seed` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityConfig {
    /// `M = m_factor · ‖f‖`.
    pub m_factor: f64,
    pub alpha: f64,
    pub times: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Smallest `|ĝ|` that is divided by.
    pub threshold: f64,
    /// Upper cap on the band limit `K`.
    pub band_cap: f64,
    pub wave_resolution: usize,
    /// Frequency spacing of the per-cell transform.
    pub frequency_spacing: f64,
    /// `p` in the continuation growth rate `2γ + p`.
    pub continuation_offset: f64,
}

impl StabilityConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_factor", self.m_factor),
            ("alpha", self.alpha),
            ("threshold", self.threshold),
            ("band_cap", self.band_cap),
            ("frequency_spacing", self.frequency_spacing),
            ("continuation_offset", self.continuation_offset),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("stability.{name} must be positive, got {v}")));
            }
        }
        if self.times.is_empty() || self.noise_levels.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("stability sweep needs at least one T, noise level and seed".into()));
        }
        if self.times.iter().any(|t| !(*t > 0.0)) || self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("stability.times must be positive and strictly ascending".into()));
        }
        if self.noise_levels.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(Error::Config("stability.noise_levels must lie in (0, 1)".into()));
        }
        if self.wave_resolution < 2 {
            return Err(Error::Config("stability.wave_resolution must be at least 2".into()));
        }
        Ok(())
    }

    /// Cells in row-major `(T, σ, seed)` order.
    pub fn cells(&self) -> Vec<(f64, f64, u64)> {
        let mut out = Vec::new();
        for &t in &self.times {
            for &s in &self.noise_levels {
                for &seed in &self.seeds {
                    out.push((t, s, seed));
                }
            }
        }
        out
    }
}

/// One `(T, σ, seed)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub t: f64,
    pub sigma_rel: f64,
    pub seed: u64,
    pub epsilon: f64,
    pub s0: f64,
    pub band_limit: f64,
    pub e_rec: f64,
    pub bound_rhs: f64,
    /// `e_rec² / bound_rhs`.
    pub ratio: f64,
    pub runtime_s: f64,
    pub error: Option<String>,
}

impl ExperimentRecord {
    fn failed(t: f64, sigma_rel: f64, seed: u64, error: String) -> Self {
        Self {
            t,
            sigma_rel,
            seed,
            epsilon: f64::NAN,
            s0: f64::NAN,
            band_limit: f64::NAN,
            e_rec: f64::NAN,
            bound_rhs: f64::NAN,
            ratio: f64::NAN,
            runtime_s: 0.0,
            error: Some(error),
        }
    }
}

/// Runs one cell: truncate `clean` to `(0, T)`, add noise, measure `ε` of
/// the residual, reconstruct with `K = min(s₀, cap)` and score against
/// `model`. Failures are recorded in the row.
pub fn run_cell(
    clean: &BoundaryDataset,
    model: &SourceModel,
    profile: &TemporalProfile,
    ball: &BallGrid,
    config: &StabilityConfig,
    cell: (f64, f64, u64),
) -> ExperimentRecord {
    let (t, sigma, seed) = cell;
    match try_cell(clean, model, profile, ball, config, cell) {
        Ok(r) => r,
        Err(e) => ExperimentRecord::failed(t, sigma, seed, e.to_string()),
    }
}

fn try_cell(
    clean: &BoundaryDataset,
    model: &SourceModel,
    profile: &TemporalProfile,
    ball: &BallGrid,
    config: &StabilityConfig,
    (t, sigma, seed): (f64, f64, u64),
) -> Result<ExperimentRecord> {
    let steps =
        clean.time().step_at(t).ok_or_else(|| Error::Config(format!("T = {t} is not on the dataset time grid")))?;
    let window = clean.truncated(steps)?;
    let noisy = add_noise(&window, sigma, seed)?;
    let epsilon = epsilon_of(&noisy.difference(&window)?, t)?;
    let gamma = profile
        .decay_rate()
        .ok_or_else(|| Error::Config("the sweep band limit needs an exponential profile".into()))?;
    let s0 = if epsilon > 0.0 { select_band_limit(t, epsilon, gamma)? } else { f64::INFINITY };
    let band_limit = s0.min(config.band_cap);
    let grid = WaveVectorGrid::new(band_limit, config.wave_resolution)?;
    let freq = FrequencyGrid::covering(grid.max_norm(), config.frequency_spacing)?;
    let spec = temporal_fourier(&noisy, &freq, TailPolicy::Truncate)?;
    let field = reconstruct_field(&spec, grid, profile, config.threshold)?;
    let e_rec = synthesize_f(&field, ball, Some(model)).relative_error.unwrap_or(f64::NAN);
    let m = config.m_factor * model.l2_norm_exact();
    let rhs = if epsilon > 0.0 { bound_rhs(epsilon, t, m, config.alpha)? } else { 0.0 };
    Ok(ExperimentRecord {
        t,
        sigma_rel: sigma,
        seed,
        epsilon,
        s0,
        band_limit,
        e_rec,
        bound_rhs: rhs,
        ratio: e_rec * e_rec / rhs,
        runtime_s: 0.0,
        error: None,
    })
}

/// Outcome of fitting `C` on the even-indexed cells and checking the odd
/// ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub c_fit: f64,
    pub calibration: Vec<usize>,
    pub held_out: Vec<usize>,
    pub held_out_max: f64,
    /// Held-out cells with `ratio > c_fit`.
    pub violations: Vec<usize>,
    /// Cells left out for a failure or a non-finite ratio.
    pub skipped: Vec<usize>,
    pub passed: bool,
}

/// Fit-then-verify on records in row-major cell order.
pub fn fit_then_verify(records: &[ExperimentRecord]) -> Verdict {
    let mut calibration = Vec::new();
    let mut held_out = Vec::new();
    let mut skipped = Vec::new();
    for (i, r) in records.iter().enumerate() {
        if r.error.is_some() || !r.ratio.is_finite() {
            skipped.push(i);
        } else if i % 2 == 0 {
            calibration.push(i);
        } else {
            held_out.push(i);
        }
    }
    let c_fit = calibration.iter().map(|&i| records[i].ratio).fold(f64::NAN, f64::max);
    let held_out_max = held_out.iter().map(|&i| records[i].ratio).fold(f64::NAN, f64::max);
    let violations: Vec<usize> = held_out.iter().cloned().filter(|&i| !(records[i].ratio <= c_fit)).collect();
    let passed = !calibration.is_empty() && !held_out.is_empty() && violations.is_empty();
    Verdict { c_fit, calibration, held_out, held_out_max, violations, skipped, passed }
}
