//! Small-scale runs of the statistical experiments.

use blockspin::harness::{
    clt_high_temperature, clt_low_temperature, lln_high_temperature, phase_sweep, CltConfig,
    ExperimentReport, LlnConfig, SweepConfig, Verdict,
};
use blockspin::{Error, ModelParams};

fn small_clt() -> CltConfig {
    CltConfig {
        n_replicas: 4,
        samples_per_replica: 400,
        burn_in_sweeps: 20,
        thinning_sweeps: 2,
        min_ess: 200.0,
        ..CltConfig::high_temperature()
    }
}

#[test]
fn independent_blocks_are_uncorrelated() {
    let params = ModelParams::relaxed(0.4, 0.0, 2400, 4).unwrap();
    let report = clt_high_temperature(&params, &small_clt()).unwrap();
    let diag = report.estimates["cov_0_0"];
    assert!((diag.value - 1.0 / 0.6).abs() < 5.0 * diag.se, "{diag:?}");
    for key in ["cov_0_1", "cov_0_2", "cov_1_2"] {
        let e = report.estimates[key];
        assert!(e.value.abs() < 5.0 * e.se, "{key}: {e:?}");
    }
    assert_eq!(report.references["cov_0_1"], 0.0);
}

#[test]
fn reports_round_trip_and_carry_provenance() {
    let params = ModelParams::new(0.4, 0.1, 1600, 8).unwrap();
    let report = clt_high_temperature(&params, &small_clt()).unwrap();
    assert_eq!(report.params, vec![params]);
    assert_eq!(report.seeds, vec![7]);
    assert_eq!(report.version, env!("CARGO_PKG_VERSION"));
    assert!(report.runtime_s > 0.0);
    assert!(report.references.contains_key("kappa1"));
    let back: ExperimentReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back, report);
}

#[test]
fn wide_tail_window_is_never_hit() {
    let params = ModelParams::new(0.5, 0.2, 800, 8).unwrap();
    let cfg = LlnConfig {
        ladder: vec![80, 160, 320],
        eps: 1.5,
        n_replicas: 100,
        ..LlnConfig::high_temperature()
    };
    let report = lln_high_temperature(&params, &cfg).unwrap();
    let tails: Vec<f64> = report
        .estimates
        .iter()
        .filter(|(k, _)| k.starts_with("tail"))
        .map(|(_, e)| e.value)
        .collect();
    assert_eq!(tails.len(), 3);
    assert!(tails.iter().all(|t| *t == 0.0));
    // a constant zero tail is not strictly decreasing
    let strict = report.verdicts.iter().find(|c| c.name.contains("decreasing")).unwrap();
    assert_eq!(strict.verdict, Verdict::Fail);

    let few = LlnConfig { n_replicas: 50, ..cfg };
    let report = lln_high_temperature(&params, &few).unwrap();
    assert!(report.verdicts.iter().all(|c| c.verdict == Verdict::Inconclusive));
}

#[test]
fn empty_conditioning_ball_is_reported() {
    let params = ModelParams::new(0.8, 0.25, 2400, 4).unwrap();
    let err = clt_low_temperature(&params, 1e-6, &small_clt()).unwrap_err();
    assert!(matches!(err, Error::LowAcceptance { .. }), "{err}");
    let err = clt_high_temperature(&params, &small_clt()).unwrap_err();
    assert!(matches!(err, Error::Domain { .. }));
}

#[test]
fn sweep_separates_the_regimes() {
    let cfg = SweepConfig {
        betas: vec![0.3, 0.5, 1.0, 1.2],
        alphas: vec![0.1],
        n_spins: 1200,
        n_replicas: 2,
        ..SweepConfig::default()
    };
    let result = phase_sweep(&cfg).unwrap();
    assert_eq!(result.points.len(), 4);
    let m: Vec<f64> = result.points.iter().map(|p| p.abs_mean.value).collect();
    assert!(m[0] < 0.1 && m[1] < 0.1, "{m:?}");
    assert!(m[2] > 0.6 && m[3] > 0.75, "{m:?}");
    assert_eq!(phase_sweep(&cfg).unwrap().points, result.points);
}
