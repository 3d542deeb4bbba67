//! Quadrature rules and sample grids.
//!
//! The measurement surface `∂B_R` uses a product rule: Gauss–Legendre in
//! `cos θ` with `order` points and the trapezoid rule in azimuth with
//! `2·order` points. The product integrates every spherical polynomial of
//! degree `≤ 2·order − 1` exactly.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Largest polar point count accepted by [`SphereGrid::new`].
pub const MAX_SPHERE_ORDER: usize = 256;

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = libm::cos(PI * (i as f64 + 0.75) / (nf + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature nodes on the sphere `|x| = R` centred at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    radius: f64,
    order: Option<usize>,
    nodes: Vec<Vec3>,
    normals: Vec<Vec3>,
    weights: Vec<f64>,
}

impl SphereGrid {
    /// Product Gauss–Legendre × trapezoid rule with `order` polar points.
    pub fn new(radius: f64, order: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
        }
        if order == 0 || order > MAX_SPHERE_ORDER {
            return Err(Error::Config(format!("unsupported sphere order {order} (supported: 1..={MAX_SPHERE_ORDER})")));
        }
        let (cos_theta, polar_w) = gauss_legendre(order);
        let n_phi = 2 * order;
        let dphi = 2.0 * PI / n_phi as f64;
        let mut nodes = Vec::with_capacity(order * n_phi);
        let mut normals = Vec::with_capacity(order * n_phi);
        let mut weights = Vec::with_capacity(order * n_phi);
        for (ct, wt) in cos_theta.iter().zip(&polar_w) {
            let st = libm::sqrt((1.0 - ct * ct).max(0.0));
            for k in 0..n_phi {
                let phi = dphi * k as f64;
                let n = [st * libm::cos(phi), st * libm::sin(phi), *ct];
                normals.push(n);
                nodes.push(vec3::scale(&n, radius));
                weights.push(radius * radius * wt * dphi);
            }
        }
        Ok(Self { radius, order: Some(order), nodes, normals, weights })
    }

    /// Builds a grid from explicit nodes and weights, checking the sphere
    /// invariants (nodes on `|x| = R`, positive weights summing to `4πR²`).
    /// Normals are derived as `x/|x|`.
    pub fn from_nodes(radius: f64, nodes: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("sphere radius must be positive, got {radius}")));
        }
        if nodes.len() != weights.len() || nodes.is_empty() {
            return Err(Error::Input(format!("{} nodes but {} weights", nodes.len(), weights.len())));
        }
        for (i, x) in nodes.iter().enumerate() {
            if (vec3::norm(x) - radius).abs() > 1e-12 * radius {
                return Err(Error::Input(format!("node {i} is not on the sphere of radius {radius}")));
            }
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Input("surface weights must be positive".into()));
        }
        let area = 4.0 * PI * radius * radius;
        let total: f64 = weights.iter().sum();
        if (total - area).abs() > 1e-10 * area {
            return Err(Error::Input(format!("weights sum to {total}, expected 4πR² = {area}")));
        }
        let normals = nodes.iter().map(|x| vec3::scale(x, 1.0 / vec3::norm(x))).collect();
        Ok(Self { radius, order: None, nodes, normals, weights })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Polar point count, `None` for grids built by [`SphereGrid::from_nodes`].
    pub fn order(&self) -> Option<usize> {
        self.order
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Highest spherical-polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> Option<usize> {
        self.order.map(|n| 2 * n - 1)
    }

    /// `Σ wᵢ·valuesᵢ`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::Input(format!("{} surface values for {} nodes", values.len(), self.len())));
        }
        Ok(self.weights.iter().zip(values).map(|(w, v)| w * v).sum())
    }
}

/// Voxel-centre quadrature of a ball. Each voxel centre strictly inside the
/// ball carries the full voxel volume; the staircase error is `O(h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallGrid {
    center: Vec3,
    radius: f64,
    resolution: usize,
    spacing: f64,
    points: Vec<Vec3>,
    /// Flat index `i·n² + j·n + k` of each point in the enclosing cube.
    cube_index: Vec<usize>,
}

impl BallGrid {
    pub fn new(radius: f64, resolution: usize) -> Result<Self> {
        Self::centered([0.0; 3], radius, resolution)
    }

    /// Ball of `radius` about `center`, cube side `2·radius` split into
    /// `resolution` voxels per axis.
    pub fn centered(center: Vec3, radius: f64, resolution: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
        }
        if resolution == 0 {
            return Err(Error::Config("ball resolution must be at least 1".into()));
        }
        let h = 2.0 * radius / resolution as f64;
        let axis: Vec<f64> = (0..resolution).map(|i| -radius + (i as f64 + 0.5) * h).collect();
        let mut points = Vec::new();
        let mut cube_index = Vec::new();
        let r2 = radius * radius;
        for (i, x) in axis.iter().enumerate() {
            for (j, y) in axis.iter().enumerate() {
                for (k, z) in axis.iter().enumerate() {
                    if x * x + y * y + z * z < r2 {
                        points.push([center[0] + x, center[1] + y, center[2] + z]);
                        cube_index.push((i * resolution + j) * resolution + k);
                    }
                }
            }
        }
        Ok(Self { center, radius, resolution, spacing: h, points, cube_index })
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn voxel_volume(&self) -> f64 {
        self.spacing * self.spacing * self.spacing
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Cube-lattice coordinate of the voxel centres along one axis
    /// (relative to the ball centre).
    pub fn axis(&self) -> Vec<f64> {
        (0..self.resolution).map(|i| -self.radius + (i as f64 + 0.5) * self.spacing).collect()
    }

    pub(crate) fn cube_index(&self) -> &[usize] {
        &self.cube_index
    }

    /// Relative bound on `|Σ volume − (4/3)πr³| / ((4/3)πr³)`: the boundary
    /// shell of half-diagonal thickness `√3·h/2` over the ball volume.
    pub fn volume_tolerance(&self) -> f64 {
        3.0 * (libm::sqrt(3.0) * 0.5 * self.spacing) / self.radius
    }

    /// `Σ valuesᵢ · h³`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::Input(format!("{} voxel values for {} voxels", values.len(), self.len())));
        }
        Ok(values.iter().sum::<f64>() * self.voxel_volume())
    }
}

/// Uniform samples `t_j = j·dt`, `j = 0..=steps`, on `[0, horizon]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!("time horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Config("time grid needs at least one step".into()));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn samples(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }

    /// Number of steps that exactly reach `t`, if `t` sits on the grid.
    pub fn step_at(&self, t: f64) -> Option<usize> {
        let s = t / self.dt();
        let j = libm::round(s);
        if j >= 0.0 && (s - j).abs() <= 1e-9 * s.max(1.0) && j as usize <= self.steps {
            Some(j as usize)
        } else {
            None
        }
    }

    /// The first `steps` steps of this grid, sharing `dt`.
    pub fn prefix(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.steps {
            return Err(Error::Input(format!("cannot keep {steps} of {} time steps", self.steps)));
        }
        Ok(Self { horizon: self.time(steps), steps })
    }
}

/// Uniform angular frequencies `w_m = m·w_max/(count−1)`, `m = 0..count`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    max: f64,
    count: usize,
}

impl FrequencyGrid {
    pub fn new(max: f64, count: usize) -> Result<Self> {
        if !(max > 0.0 && max.is_finite()) {
            return Err(Error::Config(format!("maximum frequency must be positive, got {max}")));
        }
        if count < 2 {
            return Err(Error::Config("frequency grid needs at least two samples".into()));
        }
        Ok(Self { max, count })
    }

    /// Grid with the given spacing whose last sample is the first at or
    /// beyond `reach`.
    pub fn covering(reach: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(reach > 0.0) {
            return Err(Error::Config("frequency spacing and reach must be positive".into()));
        }
        let intervals = libm::ceil(reach / spacing - 1e-9).max(1.0) as usize;
        Self::new(intervals as f64 * spacing, intervals + 1)
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.max / (self.count - 1) as f64
    }

    pub fn value(&self, m: usize) -> f64 {
        if m + 1 == self.count {
            self.max
        } else {
            m as f64 * self.spacing()
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count).map(|m| self.value(m)).collect()
    }
}

/// Cell-centred cubic lattice of wave vectors on `[-K, K]³`.
///
/// With `n` points per axis and spacing `Δ = 2K/n`, the axis values are
/// `(i − (n−1)/2)·Δ`; index `i` mirrors to `n−1−i`, so the lattice is
/// symmetric about the origin and `|ξ|∞ ≤ K − Δ/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveVectorGrid {
    band_limit: f64,
    resolution: usize,
}

impl WaveVectorGrid {
    pub fn new(band_limit: f64, resolution: usize) -> Result<Self> {
        if !(band_limit > 0.0 && band_limit.is_finite()) {
            return Err(Error::Config(format!("band limit must be positive, got {band_limit}")));
        }
        if resolution < 2 {
            return Err(Error::Config("wave-vector grid needs at least two points per axis".into()));
        }
        Ok(Self { band_limit, resolution })
    }

    pub fn band_limit(&self) -> f64 {
        self.band_limit
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution * self.resolution * self.resolution
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.band_limit / self.resolution as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        let c = (self.resolution as f64 - 1.0) * 0.5;
        let d = self.spacing();
        (0..self.resolution).map(|i| (i as f64 - c) * d).collect()
    }

    pub fn point(&self, index: usize) -> Vec3 {
        let n = self.resolution;
        let c = (n as f64 - 1.0) * 0.5;
        let d = self.spacing();
        let (i, j, k) = (index / (n * n), (index / n) % n, index % n);
        [(i as f64 - c) * d, (j as f64 - c) * d, (k as f64 - c) * d]
    }

    /// Index of `−ξ` for the point at `index`.
    pub fn mirror(&self, index: usize) -> usize {
        self.len() - 1 - index
    }

    /// Largest `|ξ|` on the lattice (a cube corner).
    pub fn max_norm(&self) -> f64 {
        let c = (self.resolution as f64 - 1.0) * 0.5 * self.spacing();
        libm::sqrt(3.0) * c
    }

    /// Cell volume `Δ³`.
    pub fn cell_volume(&self) -> f64 {
        let d = self.spacing();
        d * d * d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_rule_is_exact_for_low_degree() {
        let (x, w) = gauss_legendre(5);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, epsilon = 1e-14);
        // ∫ x⁸ = 2/9, degree 8 ≤ 2·5 − 1.
        let m8: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert_relative_eq!(m8, 2.0 / 9.0, epsilon = 1e-14);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
    }

    #[test]
    fn sphere_constant_and_monomials() {
        let g = SphereGrid::new(1.0, 12).unwrap();
        let ones = alloc::vec![1.0; g.len()];
        assert_relative_eq!(g.integrate(&ones).unwrap(), 4.0 * PI, max_relative = 1e-10);
        let z2: Vec<f64> = g.nodes().iter().map(|x| x[2] * x[2]).collect();
        assert_relative_eq!(g.integrate(&z2).unwrap(), 4.0 * PI / 3.0, max_relative = 1e-10);
        let x1: Vec<f64> = g.nodes().iter().map(|x| x[0]).collect();
        assert!(g.integrate(&x1).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sphere_surface_area_radius_two() {
        let g = SphereGrid::new(2.0, 8).unwrap();
        let ones = alloc::vec![1.0; g.len()];
        assert_relative_eq!(g.integrate(&ones).unwrap(), 16.0 * PI, max_relative = 1e-10);
        let zeros = alloc::vec![0.0; g.len()];
        assert_eq!(g.integrate(&zeros).unwrap(), 0.0);
        let x3: Vec<f64> = g.nodes().iter().map(|x| x[2]).collect();
        assert!(g.integrate(&x3).unwrap().abs() < 1e-12);
    }

    #[test]
    fn sphere_invariants() {
        let r = 1.7;
        let g = SphereGrid::new(r, 9).unwrap();
        for (x, n) in g.nodes().iter().zip(g.normals()) {
            assert!((vec3::norm(x) - r).abs() <= 1e-12 * r);
            for a in 0..3 {
                assert!((n[a] - x[a] / r).abs() < 1e-15);
            }
        }
        assert!(g.weights().iter().all(|w| *w > 0.0));
        assert_eq!(g.exact_degree(), Some(17));
    }

    #[test]
    fn sphere_exactness_degree_against_monomials() {
        // ∫_{S²} x^{2a} y^{2b} z^{2c} = 2 Γ(a+½)Γ(b+½)Γ(c+½)/Γ(a+b+c+3/2).
        let order = 6;
        let g = SphereGrid::new(1.0, order).unwrap();
        let exact = |a: i32, b: i32, c: i32| {
            2.0 * libm::tgamma(a as f64 + 0.5) * libm::tgamma(b as f64 + 0.5) * libm::tgamma(c as f64 + 0.5)
                / libm::tgamma((a + b + c) as f64 + 1.5)
        };
        for (a, b, c) in [(1, 1, 1), (2, 1, 2), (0, 3, 2), (5, 0, 0), (1, 2, 2)] {
            let v: Vec<f64> =
                g.nodes().iter().map(|x| x[0].powi(2 * a) * x[1].powi(2 * b) * x[2].powi(2 * c)).collect();
            assert_relative_eq!(g.integrate(&v).unwrap(), exact(a, b, c), max_relative = 1e-12);
        }
        // Degree 12 > 11 is no longer exact for z^12.
        let v: Vec<f64> = g.nodes().iter().map(|x| x[2].powi(12)).collect();
        assert!((g.integrate(&v).unwrap() - exact(0, 0, 6)).abs() > 1e-8);
    }

    #[test]
    fn sphere_rejects_bad_order() {
        assert!(matches!(SphereGrid::new(1.0, 0), Err(Error::Config(_))));
        assert!(matches!(SphereGrid::new(1.0, MAX_SPHERE_ORDER + 1), Err(Error::Config(_))));
        assert!(matches!(SphereGrid::new(-1.0, 4), Err(Error::Config(_))));
    }

    #[test]
    fn surface_integrate_length_mismatch() {
        let g = SphereGrid::new(1.0, 4).unwrap();
        assert!(matches!(g.integrate(&[1.0, 2.0]), Err(Error::Input(_))));
    }

    #[test]
    fn custom_single_node_sphere() {
        let r = 1.0 / libm::sqrt(4.0 * PI);
        let g = SphereGrid::from_nodes(r, alloc::vec![[0.0, 0.0, r]], alloc::vec![1.0]).unwrap();
        assert_eq!(g.normals()[0], [0.0, 0.0, 1.0]);
        assert!(SphereGrid::from_nodes(1.0, alloc::vec![[0.0, 0.0, 1.0]], alloc::vec![1.0]).is_err());
    }

    #[test]
    fn ball_volume_and_odd_moment() {
        let b = BallGrid::new(1.0, 64).unwrap();
        let ones = alloc::vec![1.0; b.len()];
        let v = b.integrate(&ones).unwrap();
        let exact = 4.0 * PI / 3.0;
        assert!((v - exact).abs() / exact < 0.01);
        assert!((v - exact).abs() / exact < b.volume_tolerance());
        let y1: Vec<f64> = b.points().iter().map(|p| p[0]).collect();
        assert!(b.integrate(&y1).unwrap().abs() < 1e-12);
        assert_eq!(b.integrate(&alloc::vec![0.0; b.len()]).unwrap(), 0.0);
        assert!(b.integrate(&[1.0]).is_err());
    }

    #[test]
    fn ball_refinement_reduces_volume_error() {
        let exact = 4.0 * PI / 3.0;
        let err = |n| {
            let b = BallGrid::new(1.0, n).unwrap();
            (b.len() as f64 * b.voxel_volume() - exact).abs()
        };
        let levels = [8, 16, 32, 64];
        let errs: Vec<f64> = levels.iter().map(|n| err(*n)).collect();
        assert!(errs.windows(2).all(|e| e[1] < e[0]), "{errs:?}");
    }

    #[test]
    fn ball_centres_inside() {
        let b = BallGrid::centered([0.3, -0.2, 0.1], 0.5, 20).unwrap();
        for p in b.points() {
            assert!(vec3::norm(&vec3::sub(p, &b.center())) < 0.5);
        }
    }

    #[test]
    fn time_and_frequency_grids() {
        let t = TimeGrid::new(25.6, 2048).unwrap();
        assert_relative_eq!(t.dt(), 0.0125);
        assert_eq!(t.step_at(2.0), Some(160));
        assert_eq!(t.step_at(2.003), None);
        let p = t.prefix(160).unwrap();
        assert_relative_eq!(p.horizon(), 2.0, epsilon = 1e-12);
        assert!(TimeGrid::new(0.0, 10).is_err());

        let f = FrequencyGrid::new(40.0, 1024).unwrap();
        assert_eq!(f.value(0), 0.0);
        assert_eq!(f.value(1023), 40.0);
        let c = FrequencyGrid::covering(20.8, f.spacing()).unwrap();
        assert!(c.max() >= 20.8 && c.max() < 20.8 + f.spacing());
        assert_relative_eq!(c.spacing(), f.spacing(), max_relative = 1e-12);
    }

    #[test]
    fn wave_vector_grid_symmetry() {
        let g = WaveVectorGrid::new(12.0, 32).unwrap();
        for idx in [0, 17, 1000, g.len() - 1] {
            let p = g.point(idx);
            let m = g.point(g.mirror(idx));
            for a in 0..3 {
                assert!((p[a] + m[a]).abs() < 1e-12);
                assert!(p[a].abs() <= 12.0);
            }
        }
        let axis = g.axis();
        assert_relative_eq!(axis[31], 12.0 - g.spacing() / 2.0, epsilon = 1e-12);
    }
}
