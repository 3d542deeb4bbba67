//! Source recovery from boundary spectra.
//!
//! Multiplying the Helmholtz equation by `e^{-iξ·x}` with `|ξ| = w` and
//! integrating by parts over `B_R` gives
//!
//! `ĝ(w) f̂(ξ) = −∮ e^{-iξ·x} (∂νu(x, w) + i(ν·ξ) u(x, w)) ds(x)`,
//!
//! evaluated here on a Cartesian ξ lattice. `f` is then synthesized by the
//! band-limited inverse transform over that lattice.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::geometry::{BallGrid, WaveVectorGrid};
use crate::par;
use crate::source::{SourceModel, TemporalProfile};
use crate::spectral::SpectralData;
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn phasor(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

/// Node-independent weights `(a, b, m)` with `u(w) ≈ a·u_m + b·u_{m+1}`:
/// linear interpolation of `u·e^{iwR}`, which removes the bulk of the
/// oscillation in `w` for sources near the centre.
fn interpolation(spec: &SpectralData, w: f64) -> Result<(Complex64, Complex64, usize)> {
    let freq = spec.frequencies();
    if !(w >= 0.0) || w > freq.max() * (1.0 + 1e-12) {
        return Err(Error::Config(format!("|xi| = {w} exceeds the frequency grid maximum {}", freq.max())));
    }
    let dw = freq.spacing();
    let m = ((w / dw) as usize).min(freq.len() - 2);
    let frac = ((w - freq.value(m)) / dw).clamp(0.0, 1.0);
    let r = spec.sphere().radius();
    let a = phasor(-(w - freq.value(m)) * r) * (1.0 - frac);
    let b = phasor((freq.value(m + 1) - w) * r) * frac;
    Ok((a, b, m))
}

fn check_deconvolvable(profile: &TemporalProfile, w: f64, threshold: f64) -> Result<Complex64> {
    let g = profile.fourier_transform(w);
    if g.norm() < threshold {
        return Err(Error::Deconvolution { frequency: w, magnitude: g.norm(), threshold });
    }
    Ok(g)
}

/// `f̂(ξ)` from the boundary identity. `threshold` is the smallest `|ĝ(w)|`
/// that may be divided by.
pub fn reconstruct_fhat(
    spec: &SpectralData,
    xi: &Vec3,
    profile: &TemporalProfile,
    threshold: f64,
) -> Result<Complex64> {
    let w = vec3::norm(xi);
    let (a, b, m) = interpolation(spec, w)?;
    let g = check_deconvolvable(profile, w, threshold)?;
    let sphere = spec.sphere();
    let mut acc = ZERO;
    for node in 0..sphere.len() {
        let x = &sphere.nodes()[node];
        let nu = &sphere.normals()[node];
        let u = a * spec.u_at(node, m) + b * spec.u_at(node, m + 1);
        let dn = a * spec.dn_u_at(node, m) + b * spec.dn_u_at(node, m + 1);
        let k = Complex64::new(0.0, vec3::dot(nu, xi));
        acc += phasor(-vec3::dot(xi, x)) * (dn + k * u) * sphere.weights()[node];
    }
    Ok(-acc / g)
}

/// `f̂` on a wave-vector lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    grid: WaveVectorGrid,
    values: Vec<Complex64>,
    excluded: Vec<usize>,
    hermitian_residual: f64,
}

impl FourierField {
    /// Wraps samples and symmetrizes them. `excluded` lists lattice indices
    /// left out of synthesis.
    pub fn new(grid: WaveVectorGrid, values: Vec<Complex64>, excluded: Vec<usize>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Input(format!("{} field values for a lattice of {} points", values.len(), grid.len())));
        }
        let mut field = Self { grid, values, excluded, hermitian_residual: 0.0 };
        field.symmetrize();
        Ok(field)
    }

    /// Exact samples of the analytic transform of `model`.
    pub fn sample(model: &SourceModel, grid: WaveVectorGrid) -> Self {
        let values = (0..grid.len()).map(|i| model.fourier_transform(&grid.point(i))).collect();
        Self::new(grid, values, Vec::new()).expect("lattice-sized")
    }

    fn symmetrize(&mut self) {
        let (mut num, mut den) = (0.0, 0.0);
        let mut out = self.values.clone();
        for (i, v) in self.values.iter().enumerate() {
            let mirror = self.values[self.grid.mirror(i)].conj();
            num += (v - mirror).norm_sqr();
            den += v.norm_sqr();
            out[i] = (v + mirror) * 0.5;
        }
        self.hermitian_residual = if den > 0.0 { libm::sqrt(num / den) } else { 0.0 };
        self.values = out;
    }

    pub fn grid(&self) -> &WaveVectorGrid {
        &self.grid
    }

    pub fn band_limit(&self) -> f64 {
        self.grid.band_limit()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn excluded(&self) -> &[usize] {
        &self.excluded
    }

    /// `‖v − conj(v(−ξ))‖ / ‖v‖` before symmetrization.
    pub fn hermitian_residual(&self) -> f64 {
        self.hermitian_residual
    }

    /// Relative `ℓ²` distance to the analytic transform over lattice points
    /// with `|ξ| ≤ radius`.
    pub fn relative_error(&self, model: &SourceModel, radius: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, v) in self.values.iter().enumerate() {
            let xi = self.grid.point(i);
            if vec3::norm(&xi) <= radius {
                let e = model.fourier_transform(&xi);
                num += (v - e).norm_sqr();
                den += e.norm_sqr();
            }
        }
        relative(num, den)
    }

    /// Largest `|v − f̂|/|f̂|` over lattice points with `|ξ| ≤ radius`.
    pub fn max_pointwise_error(&self, model: &SourceModel, radius: f64) -> f64 {
        let mut worst = 0.0f64;
        for (i, v) in self.values.iter().enumerate() {
            let xi = self.grid.point(i);
            if vec3::norm(&xi) <= radius {
                let e = model.fourier_transform(&xi);
                worst = worst.max(relative((v - e).norm_sqr(), e.norm_sqr()));
            }
        }
        worst
    }
}

fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        libm::sqrt(num / den)
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// [`reconstruct_fhat`] at every point of `grid`, then Hermitian
/// symmetrization. Points where `|ĝ|` falls below `threshold` are set to
/// zero and listed in [`FourierField::excluded`].
pub fn reconstruct_field(
    spec: &SpectralData,
    grid: WaveVectorGrid,
    profile: &TemporalProfile,
    threshold: f64,
) -> Result<FourierField> {
    let w_max = spec.frequencies().max();
    if grid.max_norm() > w_max {
        return Err(Error::Config(format!(
            "wave-vector lattice reaches |xi| = {} beyond the frequency grid maximum {w_max}",
            grid.max_norm()
        )));
    }
    let sphere = spec.sphere();
    let axis = grid.axis();
    let n = axis.len();
    let nodes = sphere.len();
    // e^{-i ξ_a x_a} per node and axis: phase[(node·3 + a)·n + i].
    let mut phase = alloc::vec![ZERO; nodes * 3 * n];
    for (node, x) in sphere.nodes().iter().enumerate() {
        for a in 0..3 {
            for (i, v) in axis.iter().enumerate() {
                phase[(node * 3 + a) * n + i] = phasor(-v * x[a]);
            }
        }
    }
    let outcome: Vec<Result<Option<Complex64>>> = par::map_range(grid.len(), |index| {
        let xi = grid.point(index);
        let w = vec3::norm(&xi);
        let g = match check_deconvolvable(profile, w, threshold) {
            Ok(g) => g,
            Err(Error::Deconvolution { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let (a, b, m) = interpolation(spec, w)?;
        let (i, j, k) = (index / (n * n), (index / n) % n, index % n);
        let mut acc = ZERO;
        for node in 0..nodes {
            let nu = &sphere.normals()[node];
            let base = node * 3 * n;
            let p = phase[base + i] * phase[base + n + j] * phase[base + 2 * n + k];
            let u = a * spec.u_at(node, m) + b * spec.u_at(node, m + 1);
            let dn = a * spec.dn_u_at(node, m) + b * spec.dn_u_at(node, m + 1);
            let q = Complex64::new(0.0, vec3::dot(nu, &xi));
            acc += p * (dn + q * u) * sphere.weights()[node];
        }
        Ok(Some(-acc / g))
    });
    let mut values = Vec::with_capacity(grid.len());
    let mut excluded = Vec::new();
    for (index, v) in outcome.into_iter().enumerate() {
        match v? {
            Some(v) => values.push(v),
            None => {
                values.push(ZERO);
                excluded.push(index);
            }
        }
    }
    FourierField::new(grid, values, excluded)
}

/// Band-limited synthesis of `f` on voxels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub voxels: Vec<f64>,
    pub band_limit: f64,
    /// `‖Im f‖ / ‖Re f‖` of the discarded imaginary part.
    pub imaginary_ratio: f64,
    /// `‖f_rec − f‖ / ‖f‖` on the voxels, when a truth was supplied.
    pub relative_error: Option<f64>,
    pub excluded: usize,
}

/// `f(y) = (2π)^{-3} Σ_ξ f̂(ξ) e^{iξ·y} Δ³` on the voxels of `ball`, done as
/// three one-dimensional passes over the ball's enclosing cube.
pub fn synthesize_f(field: &FourierField, ball: &BallGrid, truth: Option<&SourceModel>) -> ReconstructionResult {
    let grid = field.grid();
    let xi_axis = grid.axis();
    let nx = xi_axis.len();
    let y_axis = ball.axis();
    let ny = y_axis.len();
    let c = ball.center();
    // e^{iξ_a y_a} with y_a = c_a + (lattice offset).
    let mut tables = Vec::with_capacity(3);
    for a in 0..3 {
        let t: Vec<Complex64> = (0..ny)
            .flat_map(|k| {
                let y = c[a] + y_axis[k];
                xi_axis.iter().map(move |x| phasor(x * y))
            })
            .collect();
        tables.push(t);
    }
    // Pass over ξ₃: A[i][j][l] -> B[i][j][k3].
    let v = field.values();
    let mut b1 = alloc::vec![ZERO; nx * nx * ny];
    for ij in 0..nx * nx {
        for k in 0..ny {
            let row = &tables[2][k * nx..(k + 1) * nx];
            let mut acc = ZERO;
            for l in 0..nx {
                acc += v[ij * nx + l] * row[l];
            }
            b1[ij * ny + k] = acc;
        }
    }
    // Pass over ξ₂: B[i][j][k3] -> C[i][k2][k3].
    let mut b2 = alloc::vec![ZERO; nx * ny * ny];
    for i in 0..nx {
        for k2 in 0..ny {
            let row = &tables[1][k2 * nx..(k2 + 1) * nx];
            for k3 in 0..ny {
                let mut acc = ZERO;
                for j in 0..nx {
                    acc += b1[(i * nx + j) * ny + k3] * row[j];
                }
                b2[(i * ny + k2) * ny + k3] = acc;
            }
        }
    }
    // Pass over ξ₁: C[i][k2][k3] -> D[k1][k2][k3].
    let scale = grid.cell_volume() / (8.0 * PI * PI * PI);
    let cube: Vec<Complex64> = par::map_range(ny, |k1| {
        let row = &tables[0][k1 * nx..(k1 + 1) * nx];
        let mut out = alloc::vec![ZERO; ny * ny];
        for (kk, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for i in 0..nx {
                acc += b2[i * ny * ny + kk] * row[i];
            }
            *o = acc * scale;
        }
        out
    })
    .into_iter()
    .flatten()
    .collect();
    let (mut re2, mut im2) = (0.0, 0.0);
    let voxels: Vec<f64> = ball
        .cube_index()
        .iter()
        .map(|&q| {
            let z = cube[q];
            re2 += z.re * z.re;
            im2 += z.im * z.im;
            z.re
        })
        .collect();
    let imaginary_ratio = relative(im2, re2);
    let relative_error = truth.map(|model| {
        let exact = model.rasterize(ball);
        let (mut num, mut den) = (0.0, 0.0);
        for (a, b) in voxels.iter().zip(&exact) {
            num += (a - b) * (a - b);
            den += b * b;
        }
        relative(num, den)
    });
    ReconstructionResult {
        voxels,
        band_limit: field.band_limit(),
        imaginary_ratio,
        relative_error,
        excluded: field.excluded().len(),
    }
}

/// Cutoff `s₀` for observation time `T` and data discrepancy `ε`.
///
/// With `c = ((2γ+3)π)^{1/3}`: if `2^{1/4}·c·T^{1/3} < |ln ε|^{1/4}` the
/// cutoff is `T^{2/3}|ln ε|^{1/4}/c`, otherwise `T`. For `ε ≥ e^{-1}` the
/// cutoff is `T`.
pub fn select_band_limit(t: f64, epsilon: f64, gamma: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Input(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    select_band_limit_log(t, libm::log(epsilon), gamma)
}

/// [`select_band_limit`] taking `ln ε`, for discrepancies below the
/// smallest positive `f64`.
pub fn select_band_limit_log(t: f64, log_epsilon: f64, gamma: f64) -> Result<f64> {
    if !(t > 0.0) || !(gamma > 0.0) {
        return Err(Error::Input(format!("band limit needs T > 0 and gamma > 0, got T = {t}, gamma = {gamma}")));
    }
    if !(log_epsilon < 0.0) {
        return Err(Error::Input(format!("ln epsilon must be negative, got {log_epsilon}")));
    }
    if log_epsilon >= -1.0 {
        return Ok(t);
    }
    let c = libm::cbrt((2.0 * gamma + 3.0) * PI);
    let l = libm::pow(-log_epsilon, 0.25);
    if libm::pow(2.0, 0.25) * c * libm::cbrt(t) < l {
        Ok(libm::pow(t, 2.0 / 3.0) * l / c)
    } else {
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::forward_sweep;
    use crate::geometry::{FrequencyGrid, SphereGrid, TimeGrid};
    use crate::source::Blob;
    use crate::spectral::{temporal_fourier, TailPolicy};
    use approx::assert_relative_eq;

    #[test]
    fn band_limit_examples() {
        let s = select_band_limit_log(1.0, -1e4, 1.0).unwrap();
        assert_relative_eq!(s, 10.0 / libm::cbrt(5.0 * PI), max_relative = 1e-12);
        assert_relative_eq!(s, 3.993, epsilon = 1e-3);
        assert_eq!(select_band_limit(8.0, libm::exp(-1.0), 1.0).unwrap(), 8.0);
        assert_eq!(select_band_limit(3.0, 1.0 - 1e-12, 1.0).unwrap(), 3.0);
        assert!(matches!(select_band_limit(3.0, 1.0, 1.0), Err(Error::Input(_))));
    }

    #[test]
    fn sampled_analytic_field_synthesizes_blob() {
        let model = SourceModel::new(alloc::vec![Blob::new([0.1, -0.05, 0.0], 0.2, 1.0)], 0.95).unwrap();
        let ball = BallGrid::new(1.0, 32).unwrap();
        let coarse =
            synthesize_f(&FourierField::sample(&model, WaveVectorGrid::new(12.0, 16).unwrap()), &ball, Some(&model));
        let fine =
            synthesize_f(&FourierField::sample(&model, WaveVectorGrid::new(24.0, 32).unwrap()), &ball, Some(&model));
        let e = fine.relative_error.unwrap();
        assert!(e <= 0.02, "{e}");
        assert!(e < coarse.relative_error.unwrap());
        assert!(fine.imaginary_ratio <= 1e-6, "{}", fine.imaginary_ratio);
    }

    #[test]
    fn zero_field_has_unit_error() {
        let model = SourceModel::new(alloc::vec![Blob::new([0.0; 3], 0.2, 1.0)], 0.9).unwrap();
        let grid = WaveVectorGrid::new(6.0, 8).unwrap();
        let field = FourierField::new(grid, alloc::vec![ZERO; grid.len()], Vec::new()).unwrap();
        let r = synthesize_f(&field, &BallGrid::new(1.0, 10).unwrap(), Some(&model));
        assert!(r.voxels.iter().all(|v| *v == 0.0));
        assert_eq!(r.relative_error, Some(1.0));
    }

    #[test]
    fn pipeline_recovers_blob_spectrum() {
        let model = SourceModel::new(alloc::vec![Blob::new([0.1, 0.0, 0.05], 0.25, 1.0)], 1.15).unwrap();
        let g = TemporalProfile::exponential(1.0).unwrap();
        let ball = BallGrid::new(1.15, 24).unwrap();
        let sphere = SphereGrid::new(1.3, 14).unwrap();
        let time = TimeGrid::new(25.6, 2048).unwrap();
        let data = forward_sweep(&model, &g, &sphere, &time, &ball).unwrap();
        let spec = temporal_fourier(&data, &FrequencyGrid::new(14.0, 360).unwrap(), TailPolicy::Closed).unwrap();
        let mass = reconstruct_fhat(&spec, &[0.0; 3], &g, 1e-6).unwrap();
        assert!((mass - model.fourier_transform(&[0.0; 3])).norm() < 0.01 * mass.norm(), "{mass}");
        let xi = [0.0, 0.0, 2.0];
        let v = reconstruct_fhat(&spec, &xi, &g, 1e-6).unwrap();
        let e = model.fourier_transform(&xi);
        assert!((v - e).norm() < 0.02 * e.norm(), "{v} vs {e}");
        // Zero spectra, linearity.
        let zero = SpectralData::zeros(sphere.clone(), *spec.frequencies());
        assert_eq!(reconstruct_fhat(&zero, &xi, &g, 1e-6).unwrap(), ZERO);
        let mut doubled = spec.clone();
        doubled.u_mut().iter_mut().for_each(|z| *z *= 2.0);
        doubled.dn_u_mut().iter_mut().for_each(|z| *z *= 2.0);
        let v2 = reconstruct_fhat(&doubled, &xi, &g, 1e-6).unwrap();
        assert!((v2 - v * 2.0).norm() <= 1e-12 * v.norm());
        // Field-level comparison and synthesis.
        let field = reconstruct_field(&spec, WaveVectorGrid::new(8.0, 16).unwrap(), &g, 1e-6).unwrap();
        assert!(field.relative_error(&model, f64::INFINITY) <= 0.02);
        let field_at_xi = reconstruct_fhat(&spec, &field.grid().point(100), &g, 1e-6).unwrap();
        let mirror = reconstruct_fhat(&spec, &field.grid().point(field.grid().mirror(100)), &g, 1e-6).unwrap();
        assert!((field.values()[100] - (field_at_xi + mirror.conj()) * 0.5).norm() < 1e-12);
    }

    #[test]
    fn lattice_beyond_band_is_rejected() {
        let sphere = SphereGrid::new(1.0, 2).unwrap();
        let spec = SpectralData::zeros(sphere, FrequencyGrid::new(10.0, 20).unwrap());
        let g = TemporalProfile::exponential(1.0).unwrap();
        let r = reconstruct_field(&spec, WaveVectorGrid::new(8.0, 8).unwrap(), &g, 1e-6);
        assert!(matches!(r, Err(Error::Config(_))));
        assert!(reconstruct_fhat(&spec, &[0.0, 0.0, 11.0], &g, 1e-6).is_err());
    }

    #[test]
    fn ricker_near_zero_is_excluded() {
        let sphere = SphereGrid::new(1.0, 2).unwrap();
        let spec = SpectralData::zeros(sphere, FrequencyGrid::new(20.0, 50).unwrap());
        let g = TemporalProfile::ricker(1.0, 1.5).unwrap();
        match reconstruct_fhat(&spec, &[0.0; 3], &g, 1e-3) {
            Err(Error::Deconvolution { frequency, .. }) => assert_eq!(frequency, 0.0),
            other => panic!("{other:?}"),
        }
        let field = reconstruct_field(&spec, WaveVectorGrid::new(8.0, 8).unwrap(), &g, 0.1).unwrap();
        // |g_hat| vanishes at w = 0, so the innermost shell is dropped.
        assert!(!field.excluded().is_empty());
    }
}
