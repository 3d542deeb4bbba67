use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use wavesrc_core::forward::BoundaryDataset;
use wavesrc_core::stability::{fit_then_verify, median, run_cell, spearman, ExperimentRecord, Verdict};

use crate::error::{io_error, Result};
use crate::scenario::Scenario;

pub const CSV_HEADER: [&str; 11] =
    ["T", "sigma_rel", "seed", "epsilon", "s0", "K", "e_rec", "bound_rhs", "ratio", "runtime_s", "error"];

/// Rank correlation between `T` and the median `e_rec` over seeds, for one
/// noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Trend {
    pub sigma_rel: f64,
    pub times: Vec<f64>,
    pub median_e_rec: Vec<f64>,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub records: Vec<ExperimentRecord>,
    pub trends: Vec<Trend>,
    pub verdict: Verdict,
}

impl SweepReport {
    pub fn all_failed(&self) -> bool {
        self.records.iter().all(|r| r.error.is_some())
    }
}

/// Runs every `(T, σ, seed)` cell of the scenario against `clean`, which
/// must span the full horizon. Cells run in parallel; records come back in
/// row-major cell order.
pub fn run_sweep(scenario: &Scenario, clean: &BoundaryDataset) -> SweepReport {
    let config = &scenario.stability;
    let records: Vec<ExperimentRecord> = config
        .cells()
        .into_par_iter()
        .map(|cell| {
            let start = Instant::now();
            let mut r = run_cell(clean, &scenario.model, &scenario.profile, &scenario.ball, config, cell);
            r.runtime_s = start.elapsed().as_secs_f64();
            r
        })
        .collect();
    let trends = trends(&records, &config.times, &config.noise_levels);
    let verdict = fit_then_verify(&records);
    SweepReport { records, trends, verdict }
}

pub fn trends(records: &[ExperimentRecord], times: &[f64], noise_levels: &[f64]) -> Vec<Trend> {
    noise_levels
        .iter()
        .map(|&sigma| {
            let median_e_rec: Vec<f64> = times
                .iter()
                .map(|&t| {
                    let v: Vec<f64> = records
                        .iter()
                        .filter(|r| r.t == t && r.sigma_rel == sigma && r.error.is_none())
                        .map(|r| r.e_rec)
                        .collect();
                    median(&v)
                })
                .collect();
            let (ts, es): (Vec<f64>, Vec<f64>) =
                times.iter().zip(&median_e_rec).filter(|(_, e)| e.is_finite()).map(|(t, e)| (*t, *e)).unzip();
            Trend { sigma_rel: sigma, times: times.to_vec(), spearman: spearman(&ts, &es), median_e_rec }
        })
        .collect()
}

fn num(v: f64) -> String {
    v.to_string()
}

pub fn record_row(r: &ExperimentRecord) -> [String; 11] {
    [
        num(r.t),
        num(r.sigma_rel),
        r.seed.to_string(),
        num(r.epsilon),
        num(r.s0),
        num(r.band_limit),
        num(r.e_rec),
        num(r.bound_rhs),
        num(r.ratio),
        format!("{:.6}", r.runtime_s),
        r.error.clone().unwrap_or_default(),
    ]
}

pub fn write_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(record_row(r))?;
    }
    w.flush().map_err(io_error(path))?;
    Ok(())
}

/// One line per trend plus the fit-then-verify verdict.
pub fn summary(report: &SweepReport) -> Vec<String> {
    let mut lines: Vec<String> = report
        .trends
        .iter()
        .map(|t| {
            let med: Vec<String> = t.median_e_rec.iter().map(|e| format!("{e:.4e}")).collect();
            format!(
                "sigma_rel {}: spearman(T, median e_rec) = {:.4}  medians [{}]",
                t.sigma_rel,
                t.spearman,
                med.join(", ")
            )
        })
        .collect();
    let v = &report.verdict;
    lines.push(format!(
        "fitted C = {:.6e} on {} calibration cells; held-out max ratio = {:.6e} over {} cells; {} skipped",
        v.c_fit,
        v.calibration.len(),
        v.held_out_max,
        v.held_out.len(),
        v.skipped.len()
    ));
    lines.push(format!(
        "verdict: {}{}",
        if v.passed { "PASS" } else { "FAIL" },
        if v.violations.is_empty() {
            String::new()
        } else {
            format!(" ({} held-out cells exceed C)", v.violations.len())
        }
    ));
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, sigma: f64, seed: u64, e: f64) -> ExperimentRecord {
        ExperimentRecord {
            t,
            sigma_rel: sigma,
            seed,
            epsilon: 0.1,
            s0: t,
            band_limit: t,
            e_rec: e,
            bound_rhs: 1.0,
            ratio: e * e,
            runtime_s: 0.0,
            error: None,
        }
    }

    #[test]
    fn trend_uses_median_over_seeds() {
        let records = vec![
            rec(1.0, 0.1, 0, 0.9),
            rec(1.0, 0.1, 1, 0.5),
            rec(1.0, 0.1, 2, 0.8),
            rec(2.0, 0.1, 0, 0.1),
            rec(2.0, 0.1, 1, 0.7),
            rec(2.0, 0.1, 2, 0.2),
        ];
        let t = trends(&records, &[1.0, 2.0], &[0.1]);
        assert_eq!(t[0].median_e_rec, vec![0.8, 0.2]);
        assert_eq!(t[0].spearman, -1.0);
    }

    #[test]
    fn failed_rows_carry_their_error() {
        let mut r = rec(1.0, 0.1, 0, f64::NAN);
        r.error = Some("boom".into());
        let row = record_row(&r);
        assert_eq!(row[6], "NaN");
        assert_eq!(row[10], "boom");
    }
}
