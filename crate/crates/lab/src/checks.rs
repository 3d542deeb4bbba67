//! Self-check suite run by `wavesrc check`.

use std::f64::consts::PI;
use std::fmt;

use wavesrc_core::forward::{exponential_decay_check, BoundaryDataset, Channel};
use wavesrc_core::spectral::{
    helmholtz_on_sphere, parseval_residual, relative_surface_error, temporal_fourier, transform_channel, TailPolicy,
};
use wavesrc_core::stability::{continuation_bound_check, fit_tail, mu, energy_ratio};
use wavesrc_core::Complex64;

use crate::scenario::Scenario;

pub const SPECTRAL_TOLERANCE: f64 = 1e-2;
pub const PARSEVAL_TOLERANCE: f64 = 1e-3;
pub const DECAY_TOLERANCE: f64 = 1e-10;
/// Points of the `k ∈ [T, 4T]` grid used by the tail-decay check.
pub const TAIL_GRID: usize = 64;
pub const CONTINUATION_FACTORS: [f64; 3] = [1.2, 2.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    /// Not applicable to this configuration.
    Skip,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skip => "SKIP",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: String,
    pub status: Status,
    pub note: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<22} value = {:<12.4e} tolerance {:<14} {}", self.name, self.value, self.tolerance, self.status)?;
        if !self.note.is_empty() {
            write!(f, "  ({})", self.note)?;
        }
        Ok(())
    }
}

fn bounded(name: &str, value: f64, limit: f64) -> CheckResult {
    CheckResult {
        name: name.into(),
        value,
        tolerance: format!("<= {limit:e}"),
        status: if value <= limit { Status::Pass } else { Status::Fail },
        note: String::new(),
    }
}

fn skipped(name: &str, note: impl Into<String>) -> CheckResult {
    CheckResult { name: name.into(), value: f64::NAN, tolerance: "-".into(), status: Status::Skip, note: note.into() }
}

fn failed(name: &str, note: impl Into<String>) -> CheckResult {
    CheckResult { name: name.into(), value: f64::NAN, tolerance: "-".into(), status: Status::Fail, note: note.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.name == name)
    }
}

/// `count` frequencies spread evenly over `[low, high]`.
pub fn check_frequencies(low: f64, high: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![low];
    }
    (0..count).map(|m| low + (high - low) * m as f64 / (count - 1) as f64).collect()
}

fn worst_column(scenario: &Scenario, a: &[Complex64], b: &[Complex64], nf: usize) -> f64 {
    (0..nf).map(|m| relative_surface_error(&scenario.sphere, a, b, nf, m)).fold(0.0, f64::max)
}

/// Runs every check against `data`, which must come from `scenario` with
/// no added noise.
pub fn run_checks(scenario: &Scenario, data: &BoundaryDataset) -> CheckReport {
    let c = &scenario.config.checks;
    let exponential = scenario.profile.decay_rate().filter(|_| scenario.profile.is_causal());
    let mut results = Vec::new();

    let freqs = check_frequencies(c.low, c.high, c.frequencies);
    let nf = freqs.len();
    if scenario.profile.is_causal() {
        match helmholtz_on_sphere(&scenario.model, &scenario.profile, &scenario.sphere, &freqs, &scenario.ball) {
            Ok((u_ref, dn_ref)) => {
                for (name, channel, reference) in
                    [("spectral-u", Channel::Potential, &u_ref), ("spectral-dnu", Channel::NormalDerivative, &dn_ref)]
                {
                    results.push(match transform_channel(data, channel, &freqs, TailPolicy::Closed) {
                        Ok(v) => bounded(name, worst_column(scenario, &v, reference, nf), SPECTRAL_TOLERANCE),
                        Err(e) => failed(name, e.to_string()),
                    });
                }
            }
            Err(e) => {
                results.push(failed("spectral-u", e.to_string()));
                results.push(failed("spectral-dnu", e.to_string()));
            }
        }
    } else {
        results.push(skipped("spectral-u", "oracle needs a causal profile"));
        results.push(skipped("spectral-dnu", "oracle needs a causal profile"));
    }

    results.push(match temporal_fourier(data, &scenario.freq, TailPolicy::Closed) {
        Ok(spec) => bounded("parseval", parseval_residual(data, &spec), PARSEVAL_TOLERANCE),
        Err(e) => failed("parseval", e.to_string()),
    });

    let Some(rate) = exponential else {
        for name in ["decay", "energy-ratio", "tail-decay", "continuation"] {
            results.push(skipped(name, "needs a causal exponential profile"));
        }
        results.push(mu_table());
        return CheckReport { results };
    };

    results.push(match exponential_decay_check(data, rate) {
        Ok(v) => bounded("decay", v, DECAY_TOLERANCE),
        Err(e) => failed("decay", e.to_string()),
    });

    let norm = scenario.model.l2_norm_exact();
    results.push(if norm == 0.0 {
        CheckResult {
            name: "energy-ratio".into(),
            value: 0.0,
            tolerance: "finite".into(),
            status: Status::Pass,
            note: "empty source".into(),
        }
    } else {
        match energy_ratio(data, norm) {
            Ok(v) => CheckResult {
                name: "energy-ratio".into(),
                value: v,
                tolerance: "finite".into(),
                status: if v.is_finite() && v > 0.0 { Status::Pass } else { Status::Fail },
                note: String::new(),
            },
            Err(e) => failed("energy-ratio", e.to_string()),
        }
    });

    let t = c.window;
    let ks: Vec<f64> = (0..TAIL_GRID).map(|j| t * (1.0 + 3.0 * j as f64 / (TAIL_GRID - 1) as f64)).collect();
    results.push(match fit_tail(data, t, scenario.stability.alpha, &ks) {
        Ok(fit) => {
            let mut r = bounded("tail-decay", fit.worst, 1.0 + 1e-12);
            r.note = format!("C_fit = {:.4e} at T = {t}", fit.c_fit);
            r
        }
        Err(e) => failed("tail-decay", e.to_string()),
    });

    let m = scenario.stability.m_factor * norm;
    let ks = CONTINUATION_FACTORS.map(|f| f * t);
    results.push(match continuation_bound_check(data, t, m, rate, scenario.stability.continuation_offset, &ks) {
        Ok(rep) => {
            let v = rep.max_ratio;
            match c.continuation_limit {
                Some(limit) => bounded("continuation", v, limit),
                None => CheckResult {
                    name: "continuation".into(),
                    value: v,
                    tolerance: "finite".into(),
                    status: if v.is_finite() { Status::Pass } else { Status::Fail },
                    note: String::new(),
                },
            }
        }
        Err(e) => failed("continuation", e.to_string()),
    });

    results.push(mu_table());
    CheckReport { results }
}

/// `μ(k, 1)` against closed forms at a few `k`.
pub fn mu_table() -> CheckResult {
    let expected = [
        (1.1, 0.5),
        (2f64.powf(0.25), 0.5),
        (2f64.sqrt(), 1.0 / (PI * 3f64.sqrt())),
        (2.0, 1.0 / (PI * 15f64.sqrt())),
        (4.0, 1.0 / (PI * 255f64.sqrt())),
    ];
    let mut worst = 0.0f64;
    let mut cells = Vec::new();
    for (k, want) in expected {
        let got = mu(k, 1.0).unwrap_or(f64::NAN);
        worst = worst.max(if got.is_nan() { f64::INFINITY } else { (got - want).abs() });
        cells.push(format!("{k:.4}:{got:.5}"));
    }
    let mut r = bounded("mu-table", worst, 1e-12);
    r.note = cells.join(" ");
    r
}
