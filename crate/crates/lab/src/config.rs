//! Run configuration (TOML). See `docs/config.md` for the schema.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wavesrc_core::geometry::{FrequencyGrid, TimeGrid, WaveVectorGrid};
use wavesrc_core::source::{Blob, SourceModel, TemporalProfile};
use wavesrc_core::stability::StabilityConfig;

use crate::error::{io_error, LabError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for forward-model noise; also offsets the sweep seeds.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub geometry: Geometry,
    #[serde(default)]
    pub source: Source,
    pub profile: Profile,
    pub time: Time,
    pub frequency: Frequency,
    pub wave: Wave,
    #[serde(default)]
    pub forward: Forward,
    #[serde(default)]
    pub inversion: Inversion,
    pub stability: Stability,
    #[serde(default)]
    pub checks: Checks,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    /// Measurement sphere radius `R`.
    pub radius: f64,
    /// Source support radius `R_s`.
    pub support_radius: f64,
    pub sphere_order: usize,
    pub ball_resolution: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Source {
    #[serde(default)]
    pub blobs: Vec<BlobSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub center: [f64; 3],
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Profile {
    Exponential {
        rate: f64,
        #[serde(default = "yes")]
        causal: bool,
    },
    Ricker {
        peak_frequency: f64,
        delay: f64,
        #[serde(default = "yes")]
        causal: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Time {
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Frequency {
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Wave {
    /// `K` for `invert`; the cap on `K` in sweeps.
    pub band_limit: f64,
    pub resolution: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Forward {
    /// Relative noise level added by `forward` (0 = clean).
    #[serde(default)]
    pub noise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inversion {
    /// Smallest `|ĝ(w)|` that is divided by.
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Observation window for `invert`; the full horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation_time: Option<f64>,
}

impl Default for Inversion {
    fn default() -> Self {
        Self { threshold: default_threshold(), observation_time: None }
    }
}

fn default_threshold() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stability {
    #[serde(default = "one")]
    pub m_factor: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    pub times: Vec<f64>,
    pub noise_levels: Vec<f64>,
    pub seeds: Vec<u64>,
    #[serde(default = "three")]
    pub continuation_offset: f64,
}

fn one() -> f64 {
    1.0
}

fn three() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checks {
    /// Number of frequencies for the transform-vs-oracle comparison.
    #[serde(default = "default_check_frequencies")]
    pub frequencies: usize,
    #[serde(default = "default_low")]
    pub low: f64,
    #[serde(default = "default_high")]
    pub high: f64,
    /// Window `T` for the tail-decay and continuation checks.
    #[serde(default = "default_window")]
    pub window: f64,
    /// Calibrated constant for the continuation ratio, once known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuation_limit: Option<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Self {
            frequencies: default_check_frequencies(),
            low: default_low(),
            high: default_high(),
            window: default_window(),
            continuation_limit: None,
        }
    }
}

fn default_check_frequencies() -> usize {
    16
}

fn default_low() -> f64 {
    0.5
}

fn default_high() -> f64 {
    12.0
}

fn default_window() -> f64 {
    4.0
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_error(path))?;
        Self::parse(&text)
    }

    /// Parses and validates.
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Cross-field consistency.
    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        if !(g.radius > 0.0) || !(g.support_radius > 0.0) {
            return Err(invalid("geometry.radius and geometry.support_radius must be positive"));
        }
        if g.support_radius >= g.radius {
            return Err(invalid(format!(
                "geometry.support_radius ({}) must be smaller than geometry.radius ({})",
                g.support_radius, g.radius
            )));
        }
        self.model().map_err(|e| invalid(format!("source.blobs: {e}")))?;
        self.temporal_profile().map_err(|e| invalid(format!("profile: {e}")))?;
        let time = self.time_grid().map_err(|e| invalid(format!("time: {e}")))?;
        let freq = self.frequency_grid().map_err(|e| invalid(format!("frequency: {e}")))?;
        let wave = self.wave_grid().map_err(|e| invalid(format!("wave: {e}")))?;
        if wave.max_norm() > freq.max() {
            return Err(invalid(format!(
                "wave.band_limit = {} gives lattice points up to |xi| = {:.4}, beyond frequency.max = {}",
                self.wave.band_limit,
                wave.max_norm(),
                freq.max()
            )));
        }
        self.stability_config().validate().map_err(|e| invalid(e.to_string()))?;
        let longest = self.stability.times.iter().cloned().fold(0.0, f64::max);
        let needed = longest + g.radius + g.support_radius;
        if time.horizon() < needed {
            return Err(invalid(format!(
                "time.horizon ({}) must be at least max(stability.times) + geometry.radius + geometry.support_radius = {needed}",
                time.horizon()
            )));
        }
        for t in &self.stability.times {
            if time.step_at(*t).is_none() {
                return Err(invalid(format!("stability.times entry {t} is not on the time grid (dt = {})", time.dt())));
            }
        }
        if let Some(t) = self.inversion.observation_time {
            if t > time.horizon() || time.step_at(t).is_none() {
                return Err(invalid(format!("inversion.observation_time {t} is not on the time grid")));
            }
        }
        if !(self.inversion.threshold > 0.0) {
            return Err(invalid("inversion.threshold must be positive"));
        }
        if !(self.forward.noise >= 0.0 && self.forward.noise < 1.0) {
            return Err(invalid("forward.noise must lie in [0, 1)"));
        }
        let c = &self.checks;
        if c.frequencies < 1 || !(c.low > 0.0 && c.high >= c.low && c.high <= freq.max()) {
            return Err(invalid("checks frequencies must satisfy 0 < low <= high <= frequency.max"));
        }
        if !(c.window > 0.0) || time.step_at(c.window).is_none() {
            return Err(invalid("checks.window must be a positive time on the time grid"));
        }
        Ok(())
    }

    pub fn model(&self) -> wavesrc_core::Result<SourceModel> {
        let blobs = self.source.blobs.iter().map(|b| Blob::new(b.center, b.width, b.amplitude)).collect();
        SourceModel::new(blobs, self.geometry.support_radius)
    }

    pub fn temporal_profile(&self) -> wavesrc_core::Result<TemporalProfile> {
        match self.profile {
            Profile::Exponential { rate, causal } => Ok(TemporalProfile::exponential(rate)?.with_causal(causal)),
            Profile::Ricker { peak_frequency, delay, causal } => {
                Ok(TemporalProfile::ricker(peak_frequency, delay)?.with_causal(causal))
            }
        }
    }

    pub fn time_grid(&self) -> wavesrc_core::Result<TimeGrid> {
        TimeGrid::new(self.time.horizon, self.time.steps)
    }

    pub fn frequency_grid(&self) -> wavesrc_core::Result<FrequencyGrid> {
        FrequencyGrid::new(self.frequency.max, self.frequency.count)
    }

    pub fn wave_grid(&self) -> wavesrc_core::Result<WaveVectorGrid> {
        WaveVectorGrid::new(self.wave.band_limit, self.wave.resolution)
    }

    pub fn stability_config(&self) -> StabilityConfig {
        let s = &self.stability;
        StabilityConfig {
            m_factor: s.m_factor,
            alpha: s.alpha,
            times: s.times.clone(),
            noise_levels: s.noise_levels.clone(),
            seeds: s.seeds.iter().map(|x| x.wrapping_add(self.seed)).collect(),
            threshold: self.inversion.threshold,
            band_cap: self.wave.band_limit,
            wave_resolution: self.wave.resolution,
            frequency_spacing: self.frequency.max / (self.frequency.count.max(2) - 1) as f64,
            continuation_offset: s.continuation_offset,
        }
    }
}

fn invalid(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
[geometry]
radius = 1.5
support_radius = 1.15
sphere_order = 4
ball_resolution = 12

[[source.blobs]]
center = [0.2, 0.0, 0.1]
width = 0.22
amplitude = 1.0

[profile]
kind = "exponential"
rate = 1.0

[time]
horizon = 12.8
steps = 512

[frequency]
max = 20.0
count = 256

[wave]
band_limit = 8.0
resolution = 8

[stability]
times = [2.0, 4.0]
noise_levels = [0.01]
seeds = [1]
"#;

    #[test]
    fn round_trip_is_identity() {
        let c = RunConfig::parse(SMALL).unwrap();
        let again = RunConfig::parse(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.checks.frequencies, 16);
        assert_eq!(c.inversion.threshold, 1e-6);
    }

    #[test]
    fn support_must_fit_inside_sphere() {
        let bad = SMALL.replace("support_radius = 1.15", "support_radius = 1.6");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("geometry.support_radius"), "{msg}");
    }

    #[test]
    fn lattice_must_fit_frequency_band() {
        let bad = SMALL.replace("band_limit = 8.0", "band_limit = 14.0");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("frequency.max"), "{msg}");
    }

    #[test]
    fn horizon_must_cover_sweep() {
        let bad = SMALL.replace("times = [2.0, 4.0]", "times = [2.0, 11.0]");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("time.horizon"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SMALL.replace("[time]", "[time]\nstep = 3");
        assert!(matches!(RunConfig::parse(&bad), Err(LabError::ConfigSyntax(_))));
    }

    #[test]
    fn blobs_must_be_contained() {
        let bad = SMALL.replace("width = 0.22", "width = 0.3");
        let msg = RunConfig::parse(&bad).unwrap_err().to_string();
        assert!(msg.contains("source.blobs"), "{msg}");
    }
}
