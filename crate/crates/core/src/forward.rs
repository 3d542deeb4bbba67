//! Retarded-potential forward model on the measurement sphere.
//!
//! `U(x, t) = (1/4π) ∫ f(y) g(t − |x−y|)/|x−y| dy` is evaluated by voxel
//! quadrature. Time and normal derivatives are not taken of the causal
//! profile (whose derivatives carry wavefront terms); they are moved onto the
//! smooth source instead. With `r = |y−x|`, `r̂ = (y−x)/r` and the moving
//! front `∂ₜ g(t−r) = −r̂·∇_y g(t−r)`, integration by parts gives
//!
//! ```text
//! U       = 1/4π ∫ g(t−r) f/r
//! ∂ₜU     = 1/4π ∫ g(t−r) (f_r/r + f/r²)
//! ∂ₜ²U    = 1/4π ∫ g(t−r) (f_rr/r + 2 f_r/r²)
//! ∂νU     = 1/4π ∫ g(t−r) f_ν/r
//! ∂ν∂ₜU   = 1/4π ∫ g(t−r) (f_νr/r + f_ν/r²)
//! ```
//!
//! where `f_r = r̂·∇f`, `f_rr = r̂ᵀ∇²f r̂`, `f_ν = ν·∇f` and `f_νr = r̂ᵀ∇²f ν`.
//! The normal derivative uses `∇ₓU = 1/4π ∫ ∇f(y) g(t−r)/r dy`, which follows
//! from writing the integral in the offset `y − x`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::geometry::{BallGrid, SphereGrid, TimeGrid};
use crate::par;
use crate::source::{Jet, SourceModel, TemporalProfile, Waveform};
use crate::vec3::{self, Vec3};
use crate::{Error, Result};

/// Boundary measurement channels, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channel {
    /// `U`
    Potential,
    /// `∂ₜU`
    TimeDerivative,
    /// `∂ₜ²U`
    SecondTimeDerivative,
    /// `∂ν∂ₜU`
    NormalTimeDerivative,
    /// `∂νU`
    NormalDerivative,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Potential,
        Channel::TimeDerivative,
        Channel::SecondTimeDerivative,
        Channel::NormalTimeDerivative,
        Channel::NormalDerivative,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Stable short name used in file headers.
    pub fn name(self) -> &'static str {
        match self {
            Channel::Potential => "U",
            Channel::TimeDerivative => "dtU",
            Channel::SecondTimeDerivative => "dt2U",
            Channel::NormalTimeDerivative => "dndtU",
            Channel::NormalDerivative => "dnU",
        }
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source_fingerprint: String,
    pub support_radius: f64,
    pub profile: TemporalProfile,
    pub noise_level: f64,
    pub seed: Option<u64>,
}

/// Sampled boundary channels, node-major: `channel[node·samples + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDataset {
    sphere: SphereGrid,
    time: TimeGrid,
    channels: [Vec<f64>; 5],
    provenance: Provenance,
}

impl BoundaryDataset {
    pub fn new(sphere: SphereGrid, time: TimeGrid, channels: [Vec<f64>; 5], provenance: Provenance) -> Result<Self> {
        let expected = sphere.len() * time.samples();
        for (c, v) in Channel::ALL.iter().zip(&channels) {
            if v.len() != expected {
                return Err(Error::Input(format!(
                    "channel {} has {} samples, expected {} nodes × {} times",
                    c.name(),
                    v.len(),
                    sphere.len(),
                    time.samples()
                )));
            }
        }
        Ok(Self { sphere, time, channels, provenance })
    }

    pub fn zeros(sphere: SphereGrid, time: TimeGrid, provenance: Provenance) -> Self {
        let n = sphere.len() * time.samples();
        let channels = core::array::from_fn(|_| alloc::vec![0.0; n]);
        Self { sphere, time, channels, provenance }
    }

    pub fn sphere(&self) -> &SphereGrid {
        &self.sphere
    }

    pub fn time(&self) -> &TimeGrid {
        &self.time
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn provenance_mut(&mut self) -> &mut Provenance {
        &mut self.provenance
    }

    pub fn channel(&self, c: Channel) -> &[f64] {
        &self.channels[c.index()]
    }

    pub fn channel_mut(&mut self, c: Channel) -> &mut [f64] {
        &mut self.channels[c.index()]
    }

    /// Time series of channel `c` at `node`.
    pub fn series(&self, c: Channel, node: usize) -> &[f64] {
        let n = self.time.samples();
        &self.channels[c.index()][node * n..(node + 1) * n]
    }

    /// Largest absolute sample of a channel.
    pub fn max_abs(&self, c: Channel) -> f64 {
        self.channel(c).iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// The first `steps` time steps of every channel.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        let time = self.time.prefix(steps)?;
        let (old, new) = (self.time.samples(), time.samples());
        let channels = core::array::from_fn(|k| {
            let src = &self.channels[k];
            let mut out = Vec::with_capacity(self.sphere.len() * new);
            for node in 0..self.sphere.len() {
                out.extend_from_slice(&src[node * old..node * old + new]);
            }
            out
        });
        Ok(Self { sphere: self.sphere.clone(), time, channels, provenance: self.provenance.clone() })
    }

    /// Sample-wise `self − other` (provenance kept from `self`).
    pub fn difference(&self, other: &BoundaryDataset) -> Result<Self> {
        if self.sphere.len() != other.sphere.len() || self.time != other.time {
            return Err(Error::Input("datasets live on different grids".into()));
        }
        let channels =
            core::array::from_fn(|k| self.channels[k].iter().zip(&other.channels[k]).map(|(a, b)| a - b).collect());
        Ok(Self { channels, ..self.clone() })
    }

    /// Multiplies every channel by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let channels = core::array::from_fn(|k| self.channels[k].iter().map(|v| v * factor).collect());
        Self { channels, ..self.clone() }
    }
}

/// The five integration kernels at one voxel, already multiplied by the
/// voxel volume and `1/4π`.
#[inline]
fn kernels(x: &Vec3, normal: &Vec3, y: &Vec3, jet: &Jet, weight: f64) -> (f64, [f64; 5]) {
    let d = vec3::sub(y, x);
    let r = vec3::norm(&d);
    let rh = vec3::scale(&d, 1.0 / r);
    let f = jet.value;
    let f_r = vec3::dot(&jet.gradient, &rh);
    let f_n = vec3::dot(&jet.gradient, normal);
    let h_r = [vec3::dot(&jet.hessian[0], &rh), vec3::dot(&jet.hessian[1], &rh), vec3::dot(&jet.hessian[2], &rh)];
    let f_rr = vec3::dot(&h_r, &rh);
    let f_nr = vec3::dot(&h_r, normal);
    let inv = 1.0 / r;
    let inv2 = inv * inv;
    (
        r,
        [
            weight * f * inv,
            weight * (f_r * inv + f * inv2),
            weight * (f_rr * inv + 2.0 * f_r * inv2),
            weight * (f_nr * inv + f_n * inv2),
            weight * f_n * inv,
        ],
    )
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

/// `U(x, t)` by direct voxel summation.
pub fn retarded_potential(
    model: &SourceModel,
    profile: &TemporalProfile,
    x: &Vec3,
    t: f64,
    ball: &BallGrid,
) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Input(format!("time must be non-negative, got {t}")));
    }
    check_outside(model, x)?;
    if model.is_empty() {
        return Ok(0.0);
    }
    let mut acc = 0.0;
    for y in ball.points() {
        let r = vec3::norm(&vec3::sub(y, x));
        let g = profile.eval(t - r);
        if g != 0.0 {
            acc += model.eval(y) * g / r;
        }
    }
    Ok(acc * ball.voxel_volume() / (4.0 * PI))
}

/// All five channels at every sphere node and time sample.
///
/// The exponential profile uses running sums over voxels sorted by distance
/// (`e^{-γt} Σ_{r≤t} e^{γr} φ`); other profiles are summed directly.
pub fn forward_sweep(
    model: &SourceModel,
    profile: &TemporalProfile,
    sphere: &SphereGrid,
    time: &TimeGrid,
    ball: &BallGrid,
) -> Result<BoundaryDataset> {
    let gap = sphere.radius() - vec3::norm(&model.support_center());
    if !(gap > model.support_radius()) {
        return Err(Error::Precondition(format!(
            "sphere radius {} must exceed the source support radius {}",
            sphere.radius(),
            model.support_radius()
        )));
    }
    let provenance = Provenance {
        source_fingerprint: model.fingerprint(),
        support_radius: model.support_radius(),
        profile: *profile,
        noise_level: 0.0,
        seed: None,
    };
    if model.is_empty() {
        return Ok(BoundaryDataset::zeros(sphere.clone(), *time, provenance));
    }
    let weight = ball.voxel_volume() / (4.0 * PI);
    let jets: Vec<Jet> = par::map_range(ball.len(), |i| model.jet(&ball.points()[i]));
    let per_node = par::map_range(sphere.len(), |node| {
        let x = &sphere.nodes()[node];
        let nu = &sphere.normals()[node];
        let mut entries: Vec<(f64, [f64; 5])> =
            ball.points().iter().zip(&jets).map(|(y, jet)| kernels(x, nu, y, jet, weight)).collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        match profile.waveform() {
            Waveform::Exponential { rate } => node_series_exponential(&entries, rate, profile.is_causal(), time),
            Waveform::Ricker { .. } => node_series_direct(&entries, profile, time),
        }
    });
    let samples = time.samples();
    let mut channels: [Vec<f64>; 5] = core::array::from_fn(|_| Vec::with_capacity(sphere.len() * samples));
    for series in per_node {
        for (k, s) in series.into_iter().enumerate() {
            channels[k].extend_from_slice(&s);
        }
    }
    BoundaryDataset::new(sphere.clone(), *time, channels, provenance)
}

fn node_series_exponential(entries: &[(f64, [f64; 5])], rate: f64, causal: bool, time: &TimeGrid) -> [Vec<f64>; 5] {
    let samples = time.samples();
    let mut out: [Vec<f64>; 5] = core::array::from_fn(|_| alloc::vec![0.0; samples]);
    let r0 = entries.first().map_or(0.0, |e| e.0);
    let mut acc = [0.0; 5];
    let mut next = 0;
    let absorb = |upto: f64, next: &mut usize, acc: &mut [f64; 5]| {
        while *next < entries.len() && entries[*next].0 <= upto {
            let (r, phi) = &entries[*next];
            let e = libm::exp(rate * (r - r0));
            for k in 0..5 {
                acc[k] += e * phi[k];
            }
            *next += 1;
        }
    };
    if !causal {
        absorb(f64::INFINITY, &mut next, &mut acc);
    }
    for j in 0..samples {
        let t = time.time(j);
        absorb(t, &mut next, &mut acc);
        if next == 0 {
            continue;
        }
        let s = libm::exp(-rate * (t - r0));
        for k in 0..5 {
            out[k][j] = acc[k] * s;
        }
    }
    out
}

fn node_series_direct(entries: &[(f64, [f64; 5])], profile: &TemporalProfile, time: &TimeGrid) -> [Vec<f64>; 5] {
    let samples = time.samples();
    let mut out: [Vec<f64>; 5] = core::array::from_fn(|_| alloc::vec![0.0; samples]);
    for j in 0..samples {
        let t = time.time(j);
        let active = if profile.is_causal() { entries.partition_point(|e| e.0 <= t) } else { entries.len() };
        let mut acc = [0.0; 5];
        for (r, phi) in &entries[..active] {
            let g = profile.eval(t - r);
            for k in 0..5 {
                acc[k] += g * phi[k];
            }
        }
        for k in 0..5 {
            out[k][j] = acc[k];
        }
    }
    out
}

/// Post-saturation exponential decay residual
/// `max |U(x, t+dt) − e^{-γ dt} U(x, t)| / max |U|` over `t ≥ R + R_s`.
pub fn exponential_decay_check(data: &BoundaryDataset, rate: f64) -> Result<f64> {
    if data.provenance().profile.decay_rate().is_none() {
        return Err(Error::Precondition("decay check needs an exponential temporal profile".into()));
    }
    let saturation = data.sphere().radius() + data.provenance().support_radius;
    let time = data.time();
    let first = libm::ceil(saturation / time.dt()) as usize;
    if first + 1 > time.steps() {
        return Err(Error::Precondition(format!(
            "time horizon {} does not extend past the saturation time {saturation}",
            time.horizon()
        )));
    }
    let peak = data.max_abs(Channel::Potential);
    if peak == 0.0 {
        return Ok(0.0);
    }
    let factor = libm::exp(-rate * time.dt());
    let mut worst = 0.0f64;
    for node in 0..data.sphere().len() {
        let s = data.series(Channel::Potential, node);
        for j in first..time.steps() {
            worst = worst.max((s[j + 1] - factor * s[j]).abs());
        }
    }
    Ok(worst / peak)
}

/// `∂ₜU` from the classical profile derivative alone,
/// `1/4π ∫ f g′(t−r)/r dy`, i.e. without the wavefront contribution.
/// Kept for comparison against [`forward_sweep`].
pub fn classical_time_derivative(
    model: &SourceModel,
    profile: &TemporalProfile,
    x: &Vec3,
    t: f64,
    ball: &BallGrid,
) -> Result<f64> {
    check_outside(model, x)?;
    let mut acc = 0.0;
    for y in ball.points() {
        let r = vec3::norm(&vec3::sub(y, x));
        acc += model.eval(y) * profile.derivatives(t - r).0 / r;
    }
    Ok(acc * ball.voxel_volume() / (4.0 * PI))
}
