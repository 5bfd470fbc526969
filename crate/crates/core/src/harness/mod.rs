//! Finite-sample experiments for the limit theorems and the acceptance
//! suites built from them.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::model::ModelParams;
use crate::sampler::effective_sample_size;

mod experiments;
pub mod suites;

pub use experiments::{
    clt_high_temperature, clt_low_temperature, lln_high_temperature, lln_low_temperature,
    phase_sweep, CltConfig, LlnConfig, SweepConfig, SweepPoint, SweepResult,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Below this many effective samples a statistical check is inconclusive.
pub const MIN_ESS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "PASS",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "INCONCLUSIVE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub tolerance: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub params: Vec<ModelParams>,
    pub seeds: Vec<u64>,
    pub estimates: BTreeMap<String, Estimate>,
    pub references: BTreeMap<String, f64>,
    pub verdicts: Vec<Check>,
    pub runtime_s: f64,
    pub config: serde_json::Value,
    pub version: String,
}

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>) -> Self {
        Self {
            experiment: experiment.into(),
            params: Vec::new(),
            seeds: Vec::new(),
            estimates: BTreeMap::new(),
            references: BTreeMap::new(),
            verdicts: Vec::new(),
            runtime_s: 0.0,
            config: serde_json::Value::Null,
            version: VERSION.to_string(),
        }
    }

    pub fn estimate(&mut self, name: impl Into<String>, value: f64, se: f64) {
        self.estimates.insert(name.into(), Estimate { value, se });
    }

    pub fn reference(&mut self, name: impl Into<String>, value: f64) {
        self.references.insert(name.into(), value);
    }

    pub fn check(
        &mut self,
        name: impl Into<String>,
        pass: bool,
        tolerance: impl Into<String>,
        detail: impl Into<String>,
    ) {
        self.push(
            name,
            if pass { Verdict::Pass } else { Verdict::Fail },
            tolerance,
            detail,
        );
    }

    /// A statistical check, inconclusive when `ess < MIN_ESS`.
    pub fn check_stat(
        &mut self,
        name: impl Into<String>,
        pass: bool,
        ess: f64,
        tolerance: impl Into<String>,
        detail: impl Into<String>,
    ) {
        let verdict = if ess < MIN_ESS {
            Verdict::Inconclusive
        } else if pass {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        self.push(name, verdict, tolerance, format!("{} (ESS {ess:.0})", detail.into()));
    }

    fn push(
        &mut self,
        name: impl Into<String>,
        verdict: Verdict,
        tolerance: impl Into<String>,
        detail: impl Into<String>,
    ) {
        self.verdicts.push(Check {
            name: name.into(),
            verdict,
            tolerance: tolerance.into(),
            detail: detail.into(),
        });
    }

    /// Folds another report's entries into this one under a name prefix.
    pub fn absorb(&mut self, prefix: &str, other: ExperimentReport) {
        self.params.extend(other.params);
        self.seeds.extend(other.seeds);
        for (k, v) in other.estimates {
            self.estimates.insert(format!("{prefix}.{k}"), v);
        }
        for (k, v) in other.references {
            self.references.insert(format!("{prefix}.{k}"), v);
        }
        for mut c in other.verdicts {
            c.name = format!("{prefix}.{}", c.name);
            self.verdicts.push(c);
        }
    }

    pub fn finish(&mut self, started: Instant) {
        self.runtime_s = started.elapsed().as_secs_f64();
    }

    /// Fail if any check failed, else inconclusive if any was, else pass.
    pub fn verdict(&self) -> Verdict {
        let any = |v| self.verdicts.iter().any(|c| c.verdict == v);
        if any(Verdict::Fail) {
            Verdict::Fail
        } else if any(Verdict::Inconclusive) || self.verdicts.is_empty() {
            Verdict::Inconclusive
        } else {
            Verdict::Pass
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict() == Verdict::Pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * nf)) / (1.0 + z2 / nf);
    let half = z / (1.0 + z2 / nf) * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// One-sample Kolmogorov–Smirnov test: `(D, p)` with Stephens' small-sample
/// correction of the asymptotic Kolmogorov tail.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let en = n.sqrt();
    (d, kolmogorov_tail((en + 0.12 + 0.11 / en) * d))
}

/// `P(K > lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pooled mean of independent chains with an ESS-adjusted standard error.
pub fn chain_mean(chains: &[Vec<f64>]) -> (Estimate, f64) {
    let n: usize = chains.iter().map(Vec::len).sum();
    let mean = chains.iter().flatten().sum::<f64>() / n as f64;
    let var = chains.iter().flatten().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let ess: f64 = chains
        .iter()
        .filter(|c| c.len() > 2)
        .map(|c| effective_sample_size(c))
        .sum();
    let ess = ess.max(1.0);
    (
        Estimate {
            value: mean,
            se: (var / ess).sqrt(),
        },
        ess,
    )
}

/// Runs `f` on a fresh report and fills in the runtime.
pub(crate) fn timed(
    f: impl FnOnce(&mut ExperimentReport) -> crate::Result<()>,
    name: &str,
) -> crate::Result<ExperimentReport> {
    let started = Instant::now();
    let mut report = ExperimentReport::new(name);
    f(&mut report)?;
    report.finish(started);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_covers_and_clamps() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.05);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn kolmogorov_tail_reference_points() {
        // classical critical values of the limiting distribution
        assert!((kolmogorov_tail(1.3581) - 0.05).abs() < 1e-3);
        assert!((kolmogorov_tail(1.6276) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn ks_accepts_uniform_grid_and_rejects_shift() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let (d, p) = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!(d < 1e-3 && p > 0.99);
        let (_, p) = ks_test(&xs, |x| (x - 0.1).clamp(0.0, 1.0));
        assert!(p < 1e-6);
    }

    #[test]
    fn overall_verdict() {
        let mut r = ExperimentReport::new("x");
        assert_eq!(r.verdict(), Verdict::Inconclusive);
        r.check("a", true, "", "");
        assert!(r.passed());
        r.check_stat("b", true, 10.0, "", "");
        assert_eq!(r.verdict(), Verdict::Inconclusive);
        r.check("c", false, "", "");
        assert_eq!(r.verdict(), Verdict::Fail);
        let back: ExperimentReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }
}
