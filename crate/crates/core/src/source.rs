//! Spatial sources and temporal profiles.
//!
//! The spatial source is a finite mixture of isotropic Gaussians so that its
//! Fourier transform, gradient, Hessian and `L²` norm are all available in
//! closed form. "Compact support" is the ball of radius `4σ` around each
//! centre; the Gaussian there has dropped to `e^{-8} ≈ 3.4·10⁻⁴` of its peak.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::geometry::{gauss_legendre, BallGrid};
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Number of widths from a blob centre taken as its effective support.
pub const SUPPORT_WIDTHS: f64 = 4.0;

/// One Gaussian term `a·exp(−|y−c|²/(2σ²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub center: Vec3,
    pub width: f64,
    pub amplitude: f64,
}

impl Blob {
    pub fn new(center: Vec3, width: f64, amplitude: f64) -> Self {
        Self { center, width, amplitude }
    }
}

/// Value, gradient and Hessian of `f` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: [Vec3; 3],
}

/// Gaussian-mixture source with effective support in a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    blobs: Vec<Blob>,
    support_center: Vec3,
    support_radius: f64,
}

impl SourceModel {
    /// Mixture supported in the ball of `support_radius` about the origin.
    pub fn new(blobs: Vec<Blob>, support_radius: f64) -> Result<Self> {
        Self::with_support(blobs, [0.0; 3], support_radius)
    }

    pub fn with_support(blobs: Vec<Blob>, support_center: Vec3, support_radius: f64) -> Result<Self> {
        if !(support_radius > 0.0 && support_radius.is_finite()) {
            return Err(Error::Config(alloc::format!("support radius must be positive, got {support_radius}")));
        }
        for (i, b) in blobs.iter().enumerate() {
            if !(b.width > 0.0 && b.width.is_finite()) || !b.amplitude.is_finite() {
                return Err(Error::Config(alloc::format!("blob {i}: width must be positive and amplitude finite")));
            }
            let reach = vec3::norm(&vec3::sub(&b.center, &support_center)) + SUPPORT_WIDTHS * b.width;
            if reach > support_radius * (1.0 + 1e-12) {
                return Err(Error::Config(alloc::format!(
                    "blob {i}: |c| + 4σ = {reach} exceeds the support radius {support_radius}"
                )));
            }
        }
        Ok(Self { blobs, support_center, support_radius })
    }

    pub fn empty(support_radius: f64) -> Result<Self> {
        Self::new(Vec::new(), support_radius)
    }

    pub fn blobs(&self) -> &[Blob] {
        &self.blobs
    }

    pub fn support_center(&self) -> Vec3 {
        self.support_center
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn is_empty(&self) -> bool {
        self.blobs.is_empty()
    }

    /// `f(y) = Σ aⱼ exp(−|y−cⱼ|²/(2σⱼ²))`.
    pub fn eval(&self, y: &Vec3) -> f64 {
        self.blobs
            .iter()
            .map(|b| {
                let d = vec3::sub(y, &b.center);
                b.amplitude * libm::exp(-vec3::dot(&d, &d) / (2.0 * b.width * b.width))
            })
            .sum()
    }

    /// Value, gradient and Hessian at `y`.
    pub fn jet(&self, y: &Vec3) -> Jet {
        let mut jet = Jet::default();
        for b in &self.blobs {
            let d = vec3::sub(y, &b.center);
            let s2 = b.width * b.width;
            let e = b.amplitude * libm::exp(-vec3::dot(&d, &d) / (2.0 * s2));
            jet.value += e;
            for a in 0..3 {
                jet.gradient[a] -= e * d[a] / s2;
                for c in 0..3 {
                    let delta = if a == c { 1.0 } else { 0.0 };
                    jet.hessian[a][c] += e * (d[a] * d[c] / (s2 * s2) - delta / s2);
                }
            }
        }
        jet
    }

    /// Closed-form `f̂(ξ) = ∫ f(y) e^{-iξ·y} dy
    ///   = Σ aⱼ (2π)^{3/2} σⱼ³ exp(−σⱼ²|ξ|²/2) exp(−iξ·cⱼ)`.
    pub fn fourier_transform(&self, xi: &Vec3) -> Complex64 {
        let k2 = vec3::dot(xi, xi);
        let mut acc = Complex64::new(0.0, 0.0);
        for b in &self.blobs {
            let s = b.width;
            let mag = b.amplitude * libm::pow(2.0 * PI, 1.5) * s * s * s * libm::exp(-0.5 * s * s * k2);
            let phase = -vec3::dot(xi, &b.center);
            acc += Complex64::new(mag * libm::cos(phase), mag * libm::sin(phase));
        }
        acc
    }

    /// Closed-form `‖f‖_{L²(ℝ³)}` from pairwise Gaussian overlaps.
    pub fn l2_norm_exact(&self) -> f64 {
        let mut sq = 0.0;
        for p in &self.blobs {
            for q in &self.blobs {
                let (sp, sq2) = (p.width * p.width, q.width * q.width);
                let d = vec3::sub(&p.center, &q.center);
                let s = sp + sq2;
                sq += p.amplitude
                    * q.amplitude
                    * libm::pow(2.0 * PI * sp * sq2 / s, 1.5)
                    * libm::exp(-vec3::dot(&d, &d) / (2.0 * s));
            }
        }
        libm::sqrt(sq.max(0.0))
    }

    /// `‖f‖` by voxel quadrature on `ball`.
    pub fn l2_norm(&self, ball: &BallGrid) -> f64 {
        let sq: f64 = ball
            .points()
            .iter()
            .map(|y| {
                let v = self.eval(y);
                v * v
            })
            .sum();
        libm::sqrt(sq * ball.voxel_volume())
    }

    /// Samples `f` at the ball's voxel centres.
    pub fn rasterize(&self, ball: &BallGrid) -> Vec<f64> {
        ball.points().iter().map(|y| self.eval(y)).collect()
    }

    /// Shifts every blob and the support ball by `d`.
    pub fn translated(&self, d: &Vec3) -> Self {
        Self {
            blobs: self.blobs.iter().map(|b| Blob { center: vec3::add(&b.center, d), ..*b }).collect(),
            support_center: vec3::add(&self.support_center, d),
            support_radius: self.support_radius,
        }
    }

    /// Multiplies every amplitude by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            blobs: self.blobs.iter().map(|b| Blob { amplitude: b.amplitude * factor, ..*b }).collect(),
            ..self.clone()
        }
    }

    /// Concatenated blob list; the support balls must coincide.
    pub fn superposed(&self, other: &SourceModel) -> Result<Self> {
        if self.support_center != other.support_center || self.support_radius != other.support_radius {
            return Err(Error::Input("superposed sources must share their support ball".into()));
        }
        let mut blobs = self.blobs.clone();
        blobs.extend_from_slice(&other.blobs);
        Ok(Self { blobs, ..self.clone() })
    }

    /// Short SHA-256 fingerprint of the exact parameter bits.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in self.support_center.iter().chain(core::iter::once(&self.support_radius)) {
            h.update(v.to_bits().to_le_bytes());
        }
        for b in &self.blobs {
            for v in b.center.iter().chain([b.width, b.amplitude].iter()) {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        let digest = h.finalize();
        let mut s = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            use core::fmt::Write;
            let _ = write!(s, "{byte:02x}");
        }
        s
    }
}

/// Shape of the temporal profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Waveform {
    /// `g(t) = e^{-γt}`.
    Exponential { rate: f64 },
    /// `g(t) = (1 − 2(π f_p (t−t₀))²) e^{−(π f_p (t−t₀))²}`.
    Ricker { peak_frequency: f64, delay: f64 },
}

/// Temporal factor `g` of the source, optionally truncated to `s ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalProfile {
    waveform: Waveform,
    causal: bool,
}

impl TemporalProfile {
    pub fn exponential(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(Error::Config(alloc::format!("decay rate must be positive, got {rate}")));
        }
        Ok(Self { waveform: Waveform::Exponential { rate }, causal: true })
    }

    pub fn ricker(peak_frequency: f64, delay: f64) -> Result<Self> {
        if !(peak_frequency > 0.0 && peak_frequency.is_finite()) || !(delay > 0.0 && delay.is_finite()) {
            return Err(Error::Config("Ricker peak frequency and delay must be positive".into()));
        }
        Ok(Self { waveform: Waveform::Ricker { peak_frequency, delay }, causal: true })
    }

    pub fn with_causal(mut self, causal: bool) -> Self {
        self.causal = causal;
        self
    }

    pub fn waveform(&self) -> Waveform {
        self.waveform
    }

    pub fn is_causal(&self) -> bool {
        self.causal
    }

    /// `γ` for the exponential profile.
    pub fn decay_rate(&self) -> Option<f64> {
        match self.waveform {
            Waveform::Exponential { rate } => Some(rate),
            Waveform::Ricker { .. } => None,
        }
    }

    /// `g(s)`, zero for `s < 0` when causal.
    pub fn eval(&self, s: f64) -> f64 {
        if self.causal && s < 0.0 {
            return 0.0;
        }
        match self.waveform {
            Waveform::Exponential { rate } => libm::exp(-rate * s),
            Waveform::Ricker { peak_frequency, delay } => {
                let q = sq(PI * peak_frequency * (s - delay));
                (1.0 - 2.0 * q) * libm::exp(-q)
            }
        }
    }

    /// Classical derivatives `(g′(s), g″(s))`; zero for `s < 0` when causal.
    /// The jump of a causal profile at `s = 0` is not represented.
    pub fn derivatives(&self, s: f64) -> (f64, f64) {
        if self.causal && s < 0.0 {
            return (0.0, 0.0);
        }
        match self.waveform {
            Waveform::Exponential { rate } => {
                let g = libm::exp(-rate * s);
                (-rate * g, rate * rate * g)
            }
            Waveform::Ricker { peak_frequency, delay } => {
                let a2 = sq(PI * peak_frequency);
                let tau = s - delay;
                let q = a2 * tau * tau;
                let e = libm::exp(-q);
                let d1 = 2.0 * a2 * tau * (2.0 * q - 3.0) * e;
                let d2 = 2.0 * a2 * (-4.0 * q * q + 12.0 * q - 3.0) * e;
                (d1, d2)
            }
        }
    }

    /// One-sided transform `ĝ(w) = ∫₀^∞ g(t) e^{-iwt} dt`.
    ///
    /// Exponential: `1/(γ + iw)`. Ricker: composite Gauss–Legendre over
    /// `[0, t₀ + 12/f_p]`, beyond which the wavelet is below `e^{-(12π)²}`.
    pub fn fourier_transform(&self, w: f64) -> Complex64 {
        match self.waveform {
            Waveform::Exponential { rate } => Complex64::new(1.0, 0.0) / Complex64::new(rate, w),
            Waveform::Ricker { peak_frequency, delay } => {
                let end = delay + 12.0 / peak_frequency;
                let panels = libm::ceil(end * (4.0 * peak_frequency + w.abs() / PI)) as usize + 8;
                let (x, wt) = gauss_legendre(20);
                let h = end / panels as f64;
                let mut acc = Complex64::new(0.0, 0.0);
                for p in 0..panels {
                    let a = p as f64 * h;
                    for (xi, wi) in x.iter().zip(&wt) {
                        let t = a + 0.5 * h * (xi + 1.0);
                        let v = self.eval(t) * wi * 0.5 * h;
                        acc += Complex64::new(v * libm::cos(w * t), -v * libm::sin(w * t));
                    }
                }
                acc
            }
        }
    }

    /// Frequencies where `ĝ` vanishes (for the untruncated waveform).
    pub fn spectral_zeros(&self) -> &'static [f64] {
        match self.waveform {
            Waveform::Exponential { .. } => &[],
            Waveform::Ricker { .. } => &[0.0],
        }
    }

    /// Lower bound `c₀` of `|ĝ|` on `[0, w_max]`, if the profile has one.
    pub fn spectral_floor(&self, w_max: f64) -> Option<f64> {
        match self.waveform {
            Waveform::Exponential { rate } => Some(1.0 / libm::sqrt(rate * rate + w_max * w_max)),
            Waveform::Ricker { .. } => None,
        }
    }
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn centered(sigma: f64) -> SourceModel {
        SourceModel::new(alloc::vec![Blob::new([0.0; 3], sigma, 1.0)], 1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        let empty = SourceModel::empty(1.0).unwrap();
        assert_eq!(empty.eval(&[0.1, 0.2, 0.3]), 0.0);
        let m = centered(0.1);
        assert_eq!(m.eval(&[0.0; 3]), 1.0);
        assert_relative_eq!(m.eval(&[0.1, 0.0, 0.0]), libm::exp(-0.5), max_relative = 1e-15);
        assert_relative_eq!(m.eval(&[0.1, 0.0, 0.0]), 0.6065, epsilon = 1e-4);
    }

    #[test]
    fn containment_is_enforced() {
        let b = Blob::new([0.3, 0.0, 0.0], 0.2, 1.0);
        assert!(SourceModel::new(alloc::vec![b], 1.0).is_err());
        assert!(SourceModel::new(alloc::vec![b], 1.1).is_ok());
        assert!(SourceModel::new(alloc::vec![Blob::new([0.0; 3], 0.0, 1.0)], 1.0).is_err());
    }

    #[test]
    fn fourier_at_zero_is_mass() {
        let m = centered(0.1);
        let v = m.fourier_transform(&[0.0; 3]);
        assert_relative_eq!(v.re, libm::pow(2.0 * PI, 1.5) * 1e-3, max_relative = 1e-14);
        assert_relative_eq!(v.re, 0.01575, epsilon = 1e-5);
        assert_eq!(SourceModel::empty(1.0).unwrap().fourier_transform(&[1.0, 2.0, 3.0]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn centered_blob_transform_is_real_positive() {
        let m = centered(0.2);
        for xi in [[1.0, 0.0, 0.0], [3.0, -2.0, 1.0], [0.0, 0.0, 9.0]] {
            let v = m.fourier_transform(&xi);
            assert!(v.re > 0.0);
            assert_eq!(v.im, 0.0);
        }
    }

    #[test]
    fn fourier_matches_volume_quadrature() {
        // Brute-force ∫ f e^{-iξ·y} dy on the ball grid.
        let m = SourceModel::new(
            alloc::vec![Blob::new([0.2, 0.0, 0.1], 0.25, 1.0), Blob::new([-0.3, 0.2, 0.0], 0.2, -0.5)],
            1.25,
        )
        .unwrap();
        let ball = BallGrid::new(1.25, 48).unwrap();
        let vals = m.rasterize(&ball);
        for xi in [[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, -4.0, 2.0], [0.0, 7.0, 6.0]] {
            let mut q = Complex64::new(0.0, 0.0);
            for (y, v) in ball.points().iter().zip(&vals) {
                let ph = -vec3::dot(&xi, y);
                q += Complex64::new(libm::cos(ph), libm::sin(ph)) * *v;
            }
            q *= ball.voxel_volume();
            let exact = m.fourier_transform(&xi);
            assert!((q - exact).norm() <= 5e-3 * exact.norm(), "{xi:?}: {q} vs {exact}");
        }
    }

    #[test]
    fn l2_norm_examples() {
        let ball = BallGrid::new(1.0, 64).unwrap();
        assert_eq!(SourceModel::empty(1.0).unwrap().l2_norm(&ball), 0.0);
        let m = centered(0.1);
        let exact = libm::pow(PI, 0.75) * libm::pow(0.1, 1.5);
        assert_relative_eq!(m.l2_norm_exact(), exact, max_relative = 1e-14);
        assert_relative_eq!(exact, 0.07462, epsilon = 1e-5);
        assert!((m.l2_norm(&ball) - exact).abs() < 0.01 * exact);

        let two = SourceModel::new(
            alloc::vec![Blob::new([-0.5, 0.0, 0.0], 0.1, 1.0), Blob::new([0.5, 0.0, 0.0], 0.1, 1.0)],
            1.0,
        )
        .unwrap();
        let q = two.l2_norm(&ball);
        assert!((q - libm::sqrt(2.0) * exact).abs() < 0.01 * q);
        assert!((two.l2_norm_exact() - libm::sqrt(2.0) * exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn jet_matches_finite_differences() {
        let m = SourceModel::new(
            alloc::vec![Blob::new([0.1, 0.2, -0.1], 0.18, 1.3), Blob::new([-0.2, 0.0, 0.1], 0.15, -0.7)],
            1.0,
        )
        .unwrap();
        let y = [0.05, 0.1, 0.02];
        let jet = m.jet(&y);
        let h = 1e-5;
        for a in 0..3 {
            let mut p = y;
            let mut q = y;
            p[a] += h;
            q[a] -= h;
            let fd = (m.eval(&p) - m.eval(&q)) / (2.0 * h);
            assert!((fd - jet.gradient[a]).abs() < 1e-6, "grad {a}");
            let gp = m.jet(&p).gradient;
            let gq = m.jet(&q).gradient;
            for c in 0..3 {
                let fd2 = (gp[c] - gq[c]) / (2.0 * h);
                assert!((fd2 - jet.hessian[a][c]).abs() < 1e-4, "hess {a}{c}");
            }
        }
    }

    #[test]
    fn profile_examples() {
        let e = TemporalProfile::exponential(1.0).unwrap();
        assert_eq!(e.eval(0.0), 1.0);
        assert_eq!(e.eval(-0.5), 0.0);
        assert_eq!(e.derivatives(0.0), (-1.0, 1.0));
        assert_eq!(e.derivatives(-0.1), (0.0, 0.0));
        assert_eq!(e.fourier_transform(0.0), Complex64::new(1.0, 0.0));
        let v = e.fourier_transform(1.0);
        assert_relative_eq!(v.re, 0.5, epsilon = 1e-15);
        assert_relative_eq!(v.im, -0.5, epsilon = 1e-15);
        let e2 = TemporalProfile::exponential(2.0).unwrap();
        assert_relative_eq!(e2.fourier_transform(0.0).re, 0.5);

        let r = TemporalProfile::ricker(1.0, 1.5).unwrap();
        assert_eq!(r.eval(1.5), 1.0);
        assert_eq!(r.derivatives(1.5).0, 0.0);
        assert!(TemporalProfile::exponential(0.0).is_err());
    }

    #[test]
    fn ricker_derivatives_match_finite_differences() {
        let r = TemporalProfile::ricker(0.8, 2.0).unwrap();
        let h = 1e-5;
        for s in [0.5, 1.7, 2.0, 2.4, 3.3] {
            let (d1, d2) = r.derivatives(s);
            let fd1 = (r.eval(s + h) - r.eval(s - h)) / (2.0 * h);
            let fd2 = (r.eval(s + h) - 2.0 * r.eval(s) + r.eval(s - h)) / (h * h);
            assert!((d1 - fd1).abs() < 1e-7, "{s}");
            assert!((d2 - fd2).abs() < 1e-3, "{s}");
        }
    }

    #[test]
    fn ricker_transform_matches_full_line_closed_form() {
        // With t₀ ≫ 1/f_p the half-line transform equals the full-line one:
        // (√π w²/(2a³)) e^{−w²/(4a²)} e^{−iwt₀}, a = π f_p.
        let (fp, t0) = (1.0, 6.0);
        let r = TemporalProfile::ricker(fp, t0).unwrap();
        let a = PI * fp;
        for w in [0.0, 1.0, 3.0, 6.5, 12.0] {
            let mag = libm::sqrt(PI) * w * w / (2.0 * a * a * a) * libm::exp(-w * w / (4.0 * a * a));
            let exact = Complex64::new(mag * libm::cos(w * t0), -mag * libm::sin(w * t0));
            let v = r.fourier_transform(w);
            assert!((v - exact).norm() < 1e-12, "{w}: {v} vs {exact}");
        }
        assert_eq!(r.spectral_zeros(), &[0.0]);
    }

    proptest! {
        #[test]
        fn exponential_is_multiplicative(s1 in 0.0..10.0f64, s2 in 0.0..10.0f64, rate in 0.1..3.0f64) {
            let g = TemporalProfile::exponential(rate).unwrap();
            let lhs = g.eval(s1 + s2);
            let rhs = g.eval(s1) * g.eval(s2);
            prop_assert!((lhs - rhs).abs() <= 1e-14 * lhs.max(1e-300) + 1e-300);
        }

        #[test]
        fn exponential_spectrum_magnitude(w in -50.0..50.0f64, rate in 0.1..3.0f64) {
            let g = TemporalProfile::exponential(rate).unwrap();
            let m = g.fourier_transform(w).norm();
            prop_assert!((m - 1.0 / libm::sqrt(rate * rate + w * w)).abs() < 1e-14);
            prop_assert!(m >= g.spectral_floor(w.abs()).unwrap() * (1.0 - 1e-14));
        }

        #[test]
        fn transform_is_hermitian(x in -10.0..10.0f64, y in -10.0..10.0f64, z in -10.0..10.0f64) {
            let m = SourceModel::new(
                alloc::vec![Blob::new([0.2, 0.0, 0.1], 0.18, 1.0), Blob::new([-0.1, 0.3, 0.0], 0.15, -0.4)],
                1.0,
            ).unwrap();
            let a = m.fourier_transform(&[x, y, z]);
            let b = m.fourier_transform(&[-x, -y, -z]);
            prop_assert!((a - b.conj()).norm() < 1e-15);
        }
    }
}
