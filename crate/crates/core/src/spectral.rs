//! One-sided temporal Fourier transform of boundary data.
//!
//! `u(x, w) = ∫₀^∞ U(x, t) e^{-iwt} dt` is computed by the trapezoid rule on
//! the dataset's time grid. For an exponential profile the field is exactly
//! `U(x, T) e^{-γ(t−T)}` once the front has left the support, and the
//! remainder `U(x, T) e^{-iwT}/(γ + iw)` is added analytically.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::forward::{BoundaryDataset, Channel};
use crate::geometry::{BallGrid, FrequencyGrid, SphereGrid};
use crate::par;
use crate::source::{SourceModel, TemporalProfile};
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// How the transform treats the signal beyond the last time sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailPolicy {
    /// Exponential profiles: analytic exponential remainder, after checking
    /// every node is in the decay regime. Other profiles: the signal must
    /// have died out (`< 1e-12` of the channel peak) at the horizon.
    Closed,
    /// Treat the signal as zero after the horizon (observation window).
    Truncate,
}

/// Relative tolerance for the data-driven exponential regime test.
const REGIME_TOLERANCE: f64 = 1e-8;

/// `u(x, w)` and `∂νu(x, w)` on sphere nodes × a frequency grid,
/// node-major: `u[node·len + m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    sphere: SphereGrid,
    freq: FrequencyGrid,
    u: Vec<Complex64>,
    dn_u: Vec<Complex64>,
}

impl SpectralData {
    pub fn new(sphere: SphereGrid, freq: FrequencyGrid, u: Vec<Complex64>, dn_u: Vec<Complex64>) -> Result<Self> {
        let n = sphere.len() * freq.len();
        if u.len() != n || dn_u.len() != n {
            return Err(Error::Input(format!(
                "spectral channels have {} and {} values, expected {n}",
                u.len(),
                dn_u.len()
            )));
        }
        Ok(Self { sphere, freq, u, dn_u })
    }

    pub fn zeros(sphere: SphereGrid, freq: FrequencyGrid) -> Self {
        let n = sphere.len() * freq.len();
        Self {
            sphere,
            freq,
            u: alloc::vec![Complex64::new(0.0, 0.0); n],
            dn_u: alloc::vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn sphere(&self) -> &SphereGrid {
        &self.sphere
    }

    pub fn frequencies(&self) -> &FrequencyGrid {
        &self.freq
    }

    pub fn u(&self) -> &[Complex64] {
        &self.u
    }

    pub fn dn_u(&self) -> &[Complex64] {
        &self.dn_u
    }

    pub fn u_mut(&mut self) -> &mut [Complex64] {
        &mut self.u
    }

    pub fn dn_u_mut(&mut self) -> &mut [Complex64] {
        &mut self.dn_u
    }

    pub fn u_at(&self, node: usize, m: usize) -> Complex64 {
        self.u[node * self.freq.len() + m]
    }

    pub fn dn_u_at(&self, node: usize, m: usize) -> Complex64 {
        self.dn_u[node * self.freq.len() + m]
    }
}

#[inline]
fn phasor(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

/// Tail rate to use for `data` under `policy`, after validating the regime.
fn tail_rate(data: &BoundaryDataset, channel: Channel, policy: TailPolicy) -> Result<Option<f64>> {
    if policy == TailPolicy::Truncate {
        return Ok(None);
    }
    let profile = data.provenance().profile;
    let time = data.time();
    let last = time.steps();
    match profile.decay_rate().filter(|_| profile.is_causal()) {
        Some(rate) => {
            let factor = libm::exp(-rate * time.dt());
            for node in 0..data.sphere().len() {
                let s = data.series(channel, node);
                let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if (s[last] - factor * s[last - 1]).abs() > REGIME_TOLERANCE * scale {
                    return Err(Error::Precondition(format!(
                        "channel {} at node {node} is not in the exponential decay regime at t = {}",
                        channel.name(),
                        time.horizon()
                    )));
                }
            }
            Ok(Some(rate))
        }
        None => {
            let peak = data.max_abs(channel);
            for node in 0..data.sphere().len() {
                if data.series(channel, node)[last].abs() > 1e-12 * peak {
                    return Err(Error::Precondition(format!(
                        "channel {} at node {node} has not decayed by t = {}",
                        channel.name(),
                        time.horizon()
                    )));
                }
            }
            Ok(None)
        }
    }
}

/// Trapezoid transform of one series at arbitrary frequencies, plus the
/// exponential remainder when `tail_rate` is given.
pub fn transform_series(series: &[f64], dt: f64, freqs: &[f64], tail_rate: Option<f64>) -> Vec<Complex64> {
    let last = series.len() - 1;
    let horizon = last as f64 * dt;
    freqs
        .iter()
        .map(|&w| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in series.iter().enumerate() {
                let c = if j == 0 || j == last { 0.5 } else { 1.0 };
                acc += phasor(-w * j as f64 * dt) * (c * v);
            }
            acc *= dt;
            if let Some(rate) = tail_rate {
                acc += phasor(-w * horizon) * series[last] / Complex64::new(rate, w);
            }
            acc
        })
        .collect()
}

/// Transforms one channel at every node, node-major output.
pub fn transform_channel(
    data: &BoundaryDataset,
    channel: Channel,
    freqs: &[f64],
    policy: TailPolicy,
) -> Result<Vec<Complex64>> {
    let rate = tail_rate(data, channel, policy)?;
    let time = data.time();
    let (dt, samples, last) = (time.dt(), time.samples(), time.steps());
    let nodes = data.sphere().len();
    let values = data.channel(channel);
    // Rows of e^{-iwt_j} with trapezoid weights folded in, one per frequency.
    let per_freq: Vec<Vec<Complex64>> = par::map_range(freqs.len(), |m| {
        let w = freqs[m];
        let mut cos_row = alloc::vec![0.0; samples];
        let mut sin_row = alloc::vec![0.0; samples];
        for j in 0..samples {
            let c = if j == 0 || j == last { 0.5 * dt } else { dt };
            let a = w * j as f64 * dt;
            cos_row[j] = c * libm::cos(a);
            sin_row[j] = -c * libm::sin(a);
        }
        let tail = rate.map(|r| phasor(-w * time.horizon()) / Complex64::new(r, w));
        (0..nodes)
            .map(|node| {
                let s = &values[node * samples..(node + 1) * samples];
                let (mut re, mut im) = (0.0, 0.0);
                for j in 0..samples {
                    re += s[j] * cos_row[j];
                    im += s[j] * sin_row[j];
                }
                let mut v = Complex64::new(re, im);
                if let Some(t) = tail {
                    v += t * s[last];
                }
                v
            })
            .collect()
    });
    let mut out = alloc::vec![Complex64::new(0.0, 0.0); nodes * freqs.len()];
    for (m, col) in per_freq.iter().enumerate() {
        for (node, v) in col.iter().enumerate() {
            out[node * freqs.len() + m] = *v;
        }
    }
    Ok(out)
}

/// `u(x, w)` from `U` and `∂νu(x, w)` from the `∂νU` channel.
pub fn temporal_fourier(data: &BoundaryDataset, freq: &FrequencyGrid, policy: TailPolicy) -> Result<SpectralData> {
    let ws = freq.values();
    let u = transform_channel(data, Channel::Potential, &ws, policy)?;
    let dn_u = transform_channel(data, Channel::NormalDerivative, &ws, policy)?;
    SpectralData::new(data.sphere().clone(), *freq, u, dn_u)
}

/// `ĝ(w) · 1/4π ∫ f(y) e^{-iw|x−y|}/|x−y| dy` by voxel quadrature.
///
/// For a causal profile the half-line transform of the retarded potential
/// factors this way: `∫₀^∞ g(t−r) e^{-iwt} dt = e^{-iwr} ĝ(w)`.
pub fn helmholtz_oracle(
    model: &SourceModel,
    profile: &TemporalProfile,
    x: &Vec3,
    w: f64,
    ball: &BallGrid,
) -> Result<Complex64> {
    check_outside(model, x)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for y in ball.points() {
        let r = vec3::norm(&vec3::sub(y, x));
        acc += phasor(-w * r) * (model.eval(y) / r);
    }
    Ok(acc * profile.fourier_transform(w) * (ball.voxel_volume() / (4.0 * PI)))
}

/// Normal derivative of [`helmholtz_oracle`] along `normal` at `x`.
pub fn helmholtz_normal_oracle(
    model: &SourceModel,
    profile: &TemporalProfile,
    x: &Vec3,
    normal: &Vec3,
    w: f64,
    ball: &BallGrid,
) -> Result<Complex64> {
    check_outside(model, x)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for y in ball.points() {
        let r = vec3::norm(&vec3::sub(y, x));
        let fn_ = vec3::dot(&model.jet(y).gradient, normal);
        acc += phasor(-w * r) * (fn_ / r);
    }
    Ok(acc * profile.fourier_transform(w) * (ball.voxel_volume() / (4.0 * PI)))
}

/// Both oracles at every node of `sphere` (outward normals) and every
/// frequency in `freqs`, node-major.
pub fn helmholtz_on_sphere(
    model: &SourceModel,
    profile: &TemporalProfile,
    sphere: &SphereGrid,
    freqs: &[f64],
    ball: &BallGrid,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    for x in sphere.nodes() {
        check_outside(model, x)?;
    }
    let nf = freqs.len();
    let scale: Vec<Complex64> =
        freqs.iter().map(|w| profile.fourier_transform(*w) * (ball.voxel_volume() / (4.0 * PI))).collect();
    let step = uniform_step(freqs);
    let jets: Vec<_> = ball.points().iter().map(|y| model.jet(y)).collect();
    let per_node: Vec<(Vec<Complex64>, Vec<Complex64>)> = par::map_range(sphere.len(), |node| {
        let x = &sphere.nodes()[node];
        let nu = &sphere.normals()[node];
        let mut u = alloc::vec![Complex64::new(0.0, 0.0); nf];
        let mut dn = alloc::vec![Complex64::new(0.0, 0.0); nf];
        for (y, jet) in ball.points().iter().zip(&jets) {
            let r = vec3::norm(&vec3::sub(y, x));
            let a = jet.value / r;
            let b = vec3::dot(&jet.gradient, nu) / r;
            let mut p = Complex64::new(0.0, 0.0);
            let inc = step.map(|d| phasor(-d * r));
            for m in 0..nf {
                p = match inc {
                    Some(inc) if m % 32 != 0 => p * inc,
                    _ => phasor(-freqs[m] * r),
                };
                u[m] += p * a;
                dn[m] += p * b;
            }
        }
        for m in 0..nf {
            u[m] *= scale[m];
            dn[m] *= scale[m];
        }
        (u, dn)
    });
    let mut u = Vec::with_capacity(sphere.len() * nf);
    let mut dn = Vec::with_capacity(sphere.len() * nf);
    for (a, b) in per_node {
        u.extend(a);
        dn.extend(b);
    }
    Ok((u, dn))
}

fn uniform_step(freqs: &[f64]) -> Option<f64> {
    if freqs.len() < 2 {
        return None;
    }
    let d = freqs[1] - freqs[0];
    let ok = freqs.windows(2).all(|p| ((p[1] - p[0]) - d).abs() <= 1e-12 * d.abs().max(1.0));
    ok.then_some(d)
}

fn check_outside(model: &SourceModel, x: &Vec3) -> Result<()> {
    let dist = vec3::norm(&vec3::sub(x, &model.support_center()));
    if dist <= model.support_radius() {
        return Err(Error::Precondition(format!(
            "evaluation point at distance {dist} lies inside the source support of radius {}",
            model.support_radius()
        )));
    }
    Ok(())
}

/// `∫₀^∞ X(t)² dt`: trapezoid on the samples plus `X(T)²/(2γ)` when the
/// signal continues as `e^{-γt}`.
pub fn time_energy(series: &[f64], dt: f64, tail_rate: Option<f64>) -> f64 {
    let last = series.len() - 1;
    let mut acc = 0.0;
    for (j, v) in series.iter().enumerate() {
        let c = if j == 0 || j == last { 0.5 } else { 1.0 };
        acc += c * v * v;
    }
    acc *= dt;
    if let Some(rate) = tail_rate {
        acc += series[last] * series[last] / (2.0 * rate);
    }
    acc
}

/// `(1/π) ∫₀^∞ P(w) dw` for a power spectrum sampled on `[0, w_max]` with
/// spacing `dw`. The remainder beyond `w_max` is taken as `P(w_max)·w_max`,
/// the integral of the `1/w²` decay left by a jump in the time signal.
pub fn frequency_energy(power: &[f64], dw: f64) -> f64 {
    let last = power.len() - 1;
    let mut acc = 0.0;
    for (m, p) in power.iter().enumerate() {
        let c = if m == 0 || m == last { 0.5 } else { 1.0 };
        acc += c * p;
    }
    acc *= dw;
    acc += power[last] * last as f64 * dw;
    acc / PI
}

/// `|a − b| / a`, with `0/0 = 0`.
pub fn relative_gap(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        if b == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b).abs() / a
    }
}

/// Time-side energy `∫₀^∞∮ (|∂ₜ²U|² + |∂ν∂ₜU|²) ds dt` of a dataset.
pub fn data_energy_time(data: &BoundaryDataset) -> f64 {
    let profile = data.provenance().profile;
    let rate = profile.decay_rate().filter(|_| profile.is_causal());
    let dt = data.time().dt();
    data.sphere()
        .weights()
        .iter()
        .enumerate()
        .map(|(node, w)| {
            w * (time_energy(data.series(Channel::SecondTimeDerivative, node), dt, rate)
                + time_energy(data.series(Channel::NormalTimeDerivative, node), dt, rate))
        })
        .sum()
}

/// Frequency-side energy `(1/π) ∫₀^∞∮ (|w²u|² + |w∂νu|²) ds dw`.
pub fn data_energy_frequency(spec: &SpectralData) -> f64 {
    let ws = spec.frequencies().values();
    let dw = spec.frequencies().spacing();
    spec.sphere()
        .weights()
        .iter()
        .enumerate()
        .map(|(node, wt)| {
            let power: Vec<f64> = ws
                .iter()
                .enumerate()
                .map(|(m, w)| {
                    let w2 = w * w;
                    w2 * w2 * spec.u_at(node, m).norm_sqr() + w2 * spec.dn_u_at(node, m).norm_sqr()
                })
                .collect();
            wt * frequency_energy(&power, dw)
        })
        .sum()
}

/// `|LHS − RHS| / LHS` between the time-side and frequency-side energies.
pub fn parseval_residual(data: &BoundaryDataset, spec: &SpectralData) -> f64 {
    relative_gap(data_energy_time(data), data_energy_frequency(spec))
}

/// Share of the frequency-side energy carried by `w ≥ from`.
pub fn band_energy_fraction(spec: &SpectralData, from: f64) -> f64 {
    let ws = spec.frequencies().values();
    let dw = spec.frequencies().spacing();
    let (mut hi, mut all) = (0.0, 0.0);
    for (node, wt) in spec.sphere().weights().iter().enumerate() {
        for (m, w) in ws.iter().enumerate() {
            let w2 = w * w;
            let p = wt * dw * (w2 * w2 * spec.u_at(node, m).norm_sqr() + w2 * spec.dn_u_at(node, m).norm_sqr());
            all += p;
            if *w >= from {
                hi += p;
            }
        }
    }
    if all == 0.0 {
        0.0
    } else {
        hi / all
    }
}

/// `‖a − b‖ / ‖b‖` in the surface-weighted `L²` sense for one frequency
/// column of two node-major arrays.
pub fn relative_surface_error(
    sphere: &SphereGrid,
    a: &[Complex64],
    b: &[Complex64],
    stride: usize,
    column: usize,
) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (node, w) in sphere.weights().iter().enumerate() {
        let i = node * stride + column;
        num += w * (a[i] - b[i]).norm_sqr();
        den += w * b[i].norm_sqr();
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        libm::sqrt(num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{forward_sweep, Provenance};
    use crate::geometry::TimeGrid;
    use crate::source::Blob;

    fn toy_sphere() -> SphereGrid {
        let r = 1.0 / libm::sqrt(4.0 * PI);
        SphereGrid::from_nodes(r, alloc::vec![[0.0, 0.0, r]], alloc::vec![1.0]).unwrap()
    }

    fn provenance(profile: TemporalProfile) -> Provenance {
        Provenance { source_fingerprint: "toy".into(), support_radius: 0.1, profile, noise_level: 0.0, seed: None }
    }

    #[test]
    fn exponential_series_transform() {
        let time = TimeGrid::new(20.0, 20_000).unwrap();
        let s: Vec<f64> = time.times().iter().map(|t| libm::exp(-t)).collect();
        let v = transform_series(&s, time.dt(), &[1.0], Some(1.0))[0];
        // The series jumps at t = 0, so the trapezoid carries O(dt²).
        assert!((v - Complex64::new(0.5, -0.5)).norm() < 1e-6, "{v}");
    }

    #[test]
    fn synthetic_single_node_transform_through_dataset() {
        let time = TimeGrid::new(30.0, 120_000).unwrap();
        let g = TemporalProfile::exponential(1.0).unwrap();
        let mut d = BoundaryDataset::zeros(toy_sphere(), time, provenance(g));
        for (v, t) in d.channel_mut(Channel::Potential).iter_mut().zip(time.times()) {
            *v = libm::exp(-t);
        }
        let u = transform_channel(&d, Channel::Potential, &[1.0], TailPolicy::Closed).unwrap()[0];
        assert!((u - Complex64::new(0.5, -0.5)).norm() < 1e-8, "{u}");
    }

    #[test]
    fn zero_dataset_gives_zero_spectra() {
        let time = TimeGrid::new(5.0, 50).unwrap();
        let d = BoundaryDataset::zeros(
            SphereGrid::new(1.0, 3).unwrap(),
            time,
            provenance(TemporalProfile::exponential(1.0).unwrap()),
        );
        let s = temporal_fourier(&d, &FrequencyGrid::new(4.0, 9).unwrap(), TailPolicy::Closed).unwrap();
        assert!(s.u().iter().chain(s.dn_u()).all(|v| v.norm() == 0.0));
        assert_eq!(parseval_residual(&d, &s), 0.0);
    }

    #[test]
    fn tail_regime_violation_names_node() {
        let time = TimeGrid::new(2.0, 20).unwrap();
        let mut d = BoundaryDataset::zeros(
            SphereGrid::new(1.0, 2).unwrap(),
            time,
            provenance(TemporalProfile::exponential(1.0).unwrap()),
        );
        let n = time.samples();
        d.channel_mut(Channel::Potential)[2 * n + n - 1] = 1.0;
        match transform_channel(&d, Channel::Potential, &[1.0], TailPolicy::Closed) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("node 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(transform_channel(&d, Channel::Potential, &[1.0], TailPolicy::Truncate).is_ok());
    }

    #[test]
    fn parseval_analytic_single_series() {
        // ∫₀^∞ e^{-2t} dt = 1/2 against (1/π)∫₀^∞ dw/(1+w²) = 1/2.
        let dt = 1e-3;
        let s: Vec<f64> = (0..=10_000).map(|j| libm::exp(-(j as f64) * dt)).collect();
        let lhs = time_energy(&s, dt, Some(1.0));
        let freq = FrequencyGrid::new(200.0, 4096).unwrap();
        let power: Vec<f64> = freq.values().iter().map(|w| 1.0 / (1.0 + w * w)).collect();
        let rhs = frequency_energy(&power, freq.spacing());
        assert!(relative_gap(lhs, rhs) <= 1e-6, "{lhs} vs {rhs}");
    }

    #[test]
    fn oracle_examples() {
        let m = SourceModel::new(alloc::vec![Blob::new([0.0; 3], 0.1, 1.0)], 0.5).unwrap();
        let g = TemporalProfile::exponential(1.0).unwrap();
        let ball = BallGrid::new(0.5, 40).unwrap();
        let x = [0.0, 0.0, 1.0];
        // Monopole limit at w = 0.
        let v = helmholtz_oracle(&m, &g, &x, 0.0, &ball).unwrap();
        let mass = m.fourier_transform(&[0.0; 3]).re;
        assert!((v.re - mass / (4.0 * PI)).abs() < 0.01 * v.re);
        // Conjugate symmetry.
        let a = helmholtz_oracle(&m, &g, &x, 3.0, &ball).unwrap();
        let b = helmholtz_oracle(&m, &g, &x, -3.0, &ball).unwrap();
        assert!((a - b.conj()).norm() < 1e-15);
        let empty = SourceModel::empty(0.5).unwrap();
        assert_eq!(helmholtz_oracle(&empty, &g, &x, 2.0, &ball).unwrap(), Complex64::new(0.0, 0.0));
        assert!(helmholtz_oracle(&m, &g, &[0.1, 0.0, 0.0], 1.0, &ball).is_err());
    }

    #[test]
    fn batched_oracle_matches_pointwise() {
        let m = SourceModel::new(alloc::vec![Blob::new([0.1, 0.0, 0.05], 0.15, 1.0)], 0.75).unwrap();
        let g = TemporalProfile::exponential(1.0).unwrap();
        let ball = BallGrid::new(0.75, 16).unwrap();
        let sphere = SphereGrid::new(1.0, 3).unwrap();
        let freqs: Vec<f64> = (0..40).map(|m| 0.5 + 0.3 * m as f64).collect();
        let (u, dn) = helmholtz_on_sphere(&m, &g, &sphere, &freqs, &ball).unwrap();
        for node in [0, 4] {
            for mi in [0, 31, 33, 39] {
                let x = sphere.nodes()[node];
                let e = helmholtz_oracle(&m, &g, &x, freqs[mi], &ball).unwrap();
                let en = helmholtz_normal_oracle(&m, &g, &x, &sphere.normals()[node], freqs[mi], &ball).unwrap();
                assert!((u[node * 40 + mi] - e).norm() < 1e-13 * e.norm().max(1e-6));
                assert!((dn[node * 40 + mi] - en).norm() < 1e-13 * en.norm().max(1e-6));
            }
        }
    }

    #[test]
    fn transform_of_forward_matches_oracle_small() {
        let m = SourceModel::new(alloc::vec![Blob::new([0.1, 0.0, 0.05], 0.2, 1.0)], 0.95).unwrap();
        let g = TemporalProfile::exponential(1.0).unwrap();
        let ball = BallGrid::new(0.95, 20).unwrap();
        let sphere = SphereGrid::new(1.2, 3).unwrap();
        let time = TimeGrid::new(24.0, 2400).unwrap();
        let d = forward_sweep(&m, &g, &sphere, &time, &ball).unwrap();
        let freqs = [0.5, 2.0, 5.0];
        let u = transform_channel(&d, Channel::Potential, &freqs, TailPolicy::Closed).unwrap();
        let (o, _) = helmholtz_on_sphere(&m, &g, &sphere, &freqs, &ball).unwrap();
        for c in 0..3 {
            let e = relative_surface_error(&sphere, &u, &o, 3, c);
            assert!(e < 0.01, "w = {}: {e}", freqs[c]);
        }
        // w = 0 is real.
        let s = temporal_fourier(&d, &FrequencyGrid::new(2.0, 3).unwrap(), TailPolicy::Closed).unwrap();
        for node in 0..sphere.len() {
            let v = s.u_at(node, 0);
            assert!(v.im.abs() <= 1e-10 * v.norm());
        }
    }
}
