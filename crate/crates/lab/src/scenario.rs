use wavesrc_core::forward::{forward_sweep, BoundaryDataset};
use wavesrc_core::geometry::{BallGrid, FrequencyGrid, SphereGrid, TimeGrid, WaveVectorGrid};
use wavesrc_core::source::{SourceModel, TemporalProfile};
use wavesrc_core::stability::{add_noise, StabilityConfig};

use crate::config::RunConfig;
use crate::error::{LabError, Result};

/// Every grid and model a run config describes, built once.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: RunConfig,
    pub model: SourceModel,
    pub profile: TemporalProfile,
    pub sphere: SphereGrid,
    pub ball: BallGrid,
    pub time: TimeGrid,
    pub freq: FrequencyGrid,
    pub wave: WaveVectorGrid,
    pub stability: StabilityConfig,
}

impl Scenario {
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let g = &config.geometry;
        Ok(Self {
            model: config.model()?,
            profile: config.temporal_profile()?,
            sphere: SphereGrid::new(g.radius, g.sphere_order)?,
            ball: BallGrid::new(g.support_radius, g.ball_resolution)?,
            time: config.time_grid()?,
            freq: config.frequency_grid()?,
            wave: config.wave_grid()?,
            stability: config.stability_config(),
            config: config.clone(),
        })
    }

    /// Clean boundary data on the full horizon.
    pub fn clean_dataset(&self) -> Result<BoundaryDataset> {
        Ok(forward_sweep(&self.model, &self.profile, &self.sphere, &self.time, &self.ball)?)
    }

    /// Boundary data with the configured `forward.noise`, seeded by `seed`.
    pub fn dataset(&self) -> Result<BoundaryDataset> {
        let clean = self.clean_dataset()?;
        let noise = self.config.forward.noise;
        if noise > 0.0 {
            Ok(add_noise(&clean, noise, self.config.seed)?)
        } else {
            Ok(clean)
        }
    }

    /// Rejects a dataset whose grids, source or profile differ from the
    /// scenario's.
    pub fn ensure_matches(&self, data: &BoundaryDataset) -> Result<()> {
        let mismatch = |what: &str, have: String, want: String| {
            Err(LabError::Mismatch(format!("{what}: dataset has {have}, config gives {want}")))
        };
        let (ds, s) = (data.sphere(), &self.sphere);
        if ds.radius() != s.radius() {
            return mismatch("geometry.radius", ds.radius().to_string(), s.radius().to_string());
        }
        if ds != s {
            return mismatch(
                "sphere grid",
                format!("{} nodes (order {:?})", ds.len(), ds.order()),
                format!("{} nodes (order {:?})", s.len(), s.order()),
            );
        }
        if data.time() != &self.time {
            let (a, b) = (data.time(), &self.time);
            return mismatch(
                "time grid",
                format!("horizon {} with {} steps", a.horizon(), a.steps()),
                format!("horizon {} with {} steps", b.horizon(), b.steps()),
            );
        }
        let p = data.provenance();
        if p.support_radius != self.model.support_radius() {
            return mismatch(
                "geometry.support_radius",
                p.support_radius.to_string(),
                self.model.support_radius().to_string(),
            );
        }
        if p.source_fingerprint != self.model.fingerprint() {
            return mismatch("source fingerprint", p.source_fingerprint.clone(), self.model.fingerprint());
        }
        if p.profile != self.profile {
            return mismatch("profile", format!("{:?}", p.profile), format!("{:?}", self.profile));
        }
        Ok(())
    }
}
