//! The four subcommands. Each returns the lines it wants printed; `main`
//! only does the printing and the exit code.

use std::path::{Path, PathBuf};

use wavesrc_core::forward::{BoundaryDataset, Channel};
use wavesrc_core::geometry::BallGrid;
use wavesrc_core::inversion::{reconstruct_field, synthesize_f, ReconstructionResult};
use wavesrc_core::spectral::{temporal_fourier, TailPolicy};

use crate::checks::{run_checks, CheckReport};
use crate::config::RunConfig;
use crate::container::{export_dataset_csv, read_dataset, voxels_to_container, write_dataset};
use crate::error::{io_error, LabError, Result};
use crate::scenario::Scenario;
use crate::svg::trend_chart;
use crate::sweep::{run_sweep, summary, write_csv, SweepReport};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl Options {
    pub fn new(config: impl Into<PathBuf>) -> Self {
        Self { config: config.into(), ..Self::default() }
    }

    /// The config file with command-line overrides applied.
    pub fn load(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            c.output = out.clone();
        }
        if let Some(seed) = self.seed {
            c.seed = seed;
        }
        Ok(c)
    }
}

fn prepare_output(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(io_error(dir))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(io_error(path))
}

/// `∮∫ |X|² dt ds` per channel by the trapezoid rule.
pub fn channel_energies(data: &BoundaryDataset) -> [f64; 5] {
    let dt = data.time().dt();
    let last = data.time().steps();
    Channel::ALL.map(|c| {
        let mut acc = 0.0;
        for (node, w) in data.sphere().weights().iter().enumerate() {
            let s = data.series(c, node);
            let sum: f64 = s.iter().map(|v| v * v).sum::<f64>() - 0.5 * (s[0] * s[0] + s[last] * s[last]);
            acc += w * dt * sum;
        }
        acc
    })
}

pub struct ForwardOutput {
    pub dataset: BoundaryDataset,
    pub dataset_path: PathBuf,
    pub lines: Vec<String>,
}

/// Synthesises boundary data and writes `dataset.bin` and the resolved
/// `config.toml` (plus `dataset.csv` when `csv` is set).
pub fn forward(opts: &Options, csv: bool) -> Result<ForwardOutput> {
    let config = opts.load()?;
    let scenario = Scenario::from_config(&config)?;
    let dataset = scenario.dataset()?;
    let dir = &config.output;
    prepare_output(dir)?;
    let dataset_path = dir.join("dataset.bin");
    write_dataset(&dataset, &dataset_path)?;
    write_text(&dir.join("config.toml"), &config.to_toml())?;
    if csv {
        export_dataset_csv(&dataset, &dir.join("dataset.csv"))?;
    }
    let energies = channel_energies(&dataset);
    let summary: Vec<String> =
        Channel::ALL.iter().zip(energies).map(|(c, e)| format!("{}={e:.6e}", c.name())).collect();
    let lines = vec![
        format!(
            "wrote {} ({} nodes x {} samples, noise {})",
            dataset_path.display(),
            dataset.sphere().len(),
            dataset.time().samples(),
            dataset.provenance().noise_level
        ),
        format!("channel energies: {}", summary.join(" ")),
    ];
    Ok(ForwardOutput { dataset, dataset_path, lines })
}

pub struct InvertOutput {
    pub result: ReconstructionResult,
    pub hermitian_residual: f64,
    pub lines: Vec<String>,
}

pub const METRICS_HEADER: [&str; 8] = [
    "e_rec",
    "band_limit",
    "observation_time",
    "tail",
    "imaginary_ratio",
    "hermitian_residual",
    "excluded",
    "threshold",
];

/// Reconstructs `f` from a dataset and writes `reconstruction.bin`,
/// `metrics.csv` and the three midplane slices.
pub fn invert(opts: &Options, dataset: &Path) -> Result<InvertOutput> {
    let config = opts.load()?;
    let scenario = Scenario::from_config(&config)?;
    let data = read_dataset(dataset)?;
    scenario.ensure_matches(&data)?;
    let (data, policy, window) = match config.inversion.observation_time {
        Some(t) if t < data.time().horizon() => {
            let steps = data
                .time()
                .step_at(t)
                .ok_or_else(|| LabError::Config(format!("observation time {t} is off the grid")))?;
            (data.truncated(steps)?, TailPolicy::Truncate, t)
        }
        // Noise breaks the exponential regime the closed tail relies on.
        _ if data.provenance().noise_level > 0.0 => {
            let h = data.time().horizon();
            (data, TailPolicy::Truncate, h)
        }
        _ => {
            let h = data.time().horizon();
            (data, TailPolicy::Closed, h)
        }
    };
    let spec = temporal_fourier(&data, &scenario.freq, policy)?;
    let field = reconstruct_field(&spec, scenario.wave, &scenario.profile, config.inversion.threshold)?;
    let result = synthesize_f(&field, &scenario.ball, Some(&scenario.model));
    let e_rec = result.relative_error.unwrap_or(f64::NAN);

    let dir = &config.output;
    prepare_output(dir)?;
    let meta = [
        ("e_rec", e_rec.to_string()),
        ("band_limit", result.band_limit.to_string()),
        ("observation_time", window.to_string()),
        ("source_fingerprint", scenario.model.fingerprint()),
    ];
    voxels_to_container(&scenario.ball, &result.voxels, &meta).write(&dir.join("reconstruction.bin"))?;

    let metrics = dir.join("metrics.csv");
    let mut w = csv::Writer::from_path(&metrics)?;
    w.write_record(METRICS_HEADER)?;
    w.write_record([
        e_rec.to_string(),
        result.band_limit.to_string(),
        window.to_string(),
        tail_name(policy).to_string(),
        result.imaginary_ratio.to_string(),
        field.hermitian_residual().to_string(),
        result.excluded.to_string(),
        config.inversion.threshold.to_string(),
    ])?;
    w.flush().map_err(io_error(&metrics))?;

    let truth = scenario.model.rasterize(&scenario.ball);
    for (name, normal) in [("xy", 2), ("xz", 1), ("yz", 0)] {
        write_slice(&scenario.ball, &result.voxels, &truth, normal, &dir.join(format!("slice_{name}.csv")))?;
    }

    let lines = vec![
        format!("e_rec = {e_rec:.6e} with K = {} over (0, {window}), {} tail", result.band_limit, tail_name(policy)),
        format!(
            "imaginary ratio {:.3e}, hermitian residual {:.3e}, {} wave vectors excluded",
            result.imaginary_ratio,
            field.hermitian_residual(),
            result.excluded
        ),
        format!("wrote {}", dir.display()),
    ];
    Ok(InvertOutput { hermitian_residual: field.hermitian_residual(), result, lines })
}

fn tail_name(p: TailPolicy) -> &'static str {
    match p {
        TailPolicy::Closed => "closed",
        TailPolicy::Truncate => "truncated",
    }
}

/// Voxels on the axis plane nearest the ball centre, normal to `normal`.
fn write_slice(ball: &BallGrid, values: &[f64], truth: &[f64], normal: usize, path: &Path) -> Result<()> {
    let centre = ball.center()[normal];
    let plane =
        ball.axis().into_iter().min_by(|a, b| (a - centre).abs().total_cmp(&(b - centre).abs())).unwrap_or(centre);
    let axes: Vec<usize> = (0..3).filter(|&a| a != normal).collect();
    let names = ["x", "y", "z"];
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([names[axes[0]], names[axes[1]], "f_rec", "f_true"])?;
    for ((p, v), t) in ball.points().iter().zip(values).zip(truth) {
        if p[normal] == plane {
            w.write_record([p[axes[0]].to_string(), p[axes[1]].to_string(), v.to_string(), t.to_string()])?;
        }
    }
    w.flush().map_err(io_error(path))?;
    Ok(())
}

pub struct SweepOutput {
    pub report: SweepReport,
    pub lines: Vec<String>,
}

/// Runs the stability sweep and writes `sweep.csv` and `sweep.svg`.
/// Fails only when every cell failed.
pub fn sweep(opts: &Options) -> Result<SweepOutput> {
    let config = opts.load()?;
    let scenario = Scenario::from_config(&config)?;
    let clean = scenario.clean_dataset()?;
    let report = run_sweep(&scenario, &clean);
    let dir = &config.output;
    prepare_output(dir)?;
    write_csv(&report.records, &dir.join("sweep.csv"))?;
    write_text(&dir.join("sweep.svg"), &trend_chart(&report.trends))?;
    if report.all_failed() {
        let first = report.records.first().and_then(|r| r.error.clone()).unwrap_or_default();
        return Err(LabError::Config(format!("every sweep cell failed; first error: {first}")));
    }
    let mut lines = vec![format!("wrote {} cells to {}", report.records.len(), dir.join("sweep.csv").display())];
    lines.extend(summary(&report));
    Ok(SweepOutput { report, lines })
}

/// Runs the check suite on `dataset`, or on freshly synthesised clean data.
pub fn check(opts: &Options, dataset: Option<&Path>) -> Result<CheckReport> {
    let config = opts.load()?;
    let scenario = Scenario::from_config(&config)?;
    let data = match dataset {
        Some(p) => {
            let d = read_dataset(p)?;
            scenario.ensure_matches(&d)?;
            d
        }
        None => scenario.clean_dataset()?,
    };
    Ok(run_checks(&scenario, &data))
}
