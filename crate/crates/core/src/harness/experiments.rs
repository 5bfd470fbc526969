use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{chain_mean, ks_test, normal_cdf, timed, wilson_interval, Estimate, ExperimentReport};
use crate::chain::{build_transfer_matrix, ChainSpec, TransferMatrix};
use crate::error::{Error, Result};
use crate::landscape::solve_m_star;
use crate::model::ModelParams;
use crate::sampler::{autocorrelation_time, ChainState, InitialState, SamplerConfig};
use crate::spectral::{sigma_limit_entry, sigma_star_entry, sigma_star_finite_entry, KappaConstants};

/// Largest alphabet for which exact transfer-matrix references are attached.
const EXACT_REFERENCE_MAX_BLOCK: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlnConfig {
    pub ladder: Vec<usize>,
    pub eps: f64,
    pub n_replicas: usize,
    pub burn_in_sweeps: usize,
    pub seed: u64,
    /// Bound on the tail estimate at the top of the ladder.
    pub ceiling: f64,
    /// Bound on the sign-disagreement estimate at the top of the ladder.
    pub sign_ceiling: f64,
}

impl LlnConfig {
    pub fn high_temperature() -> Self {
        Self {
            ladder: vec![800, 1600, 3200],
            eps: 0.2,
            n_replicas: 1000,
            burn_in_sweeps: 60,
            seed: 2024,
            ceiling: 0.05,
            sign_ceiling: 0.02,
        }
    }

    pub fn low_temperature() -> Self {
        Self {
            ladder: vec![600, 1200, 2400],
            eps: 0.15,
            ..Self::high_temperature()
        }
    }
}

/// Final state of each replica after burn-in, in replica order.
fn endpoints(
    params: &ModelParams,
    seed: u64,
    burn_in: usize,
    n_replicas: usize,
    init: impl Fn(u64) -> InitialState + Sync,
) -> Result<Vec<Vec<f64>>> {
    (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| {
            let cfg = SamplerConfig {
                seed,
                burn_in_sweeps: 0,
                thinning_sweeps: 1,
                n_samples: 1,
                init: init(r),
            };
            let mut st = ChainState::new(params, &cfg, r)?;
            st.sweeps(burn_in);
            Ok(st.values().to_vec())
        })
        .collect()
}

fn sup_abs(m: &[f64], center: f64) -> f64 {
    m.iter().map(|x| (x - center).abs()).fold(0.0, f64::max)
}

fn sign_disagreement(m: &[f64]) -> bool {
    let s = m.len();
    s > 1 && (0..s).any(|k| m[k] * m[(k + 1) % s] < 0.0)
}

fn exact_chain(params: &ModelParams) -> Option<TransferMatrix> {
    if params.block_size() > EXACT_REFERENCE_MAX_BLOCK {
        return None;
    }
    Some(build_transfer_matrix(&ChainSpec::from_params(params).ok()?))
}

fn proportion(report: &mut ExperimentReport, name: &str, hits: usize, n: usize) -> f64 {
    let p = hits as f64 / n as f64;
    report.estimate(name, p, (p * (1.0 - p) / n as f64).sqrt());
    p
}

fn wilson_text(hits: usize, n: usize) -> String {
    let (lo, hi) = wilson_interval(hits, n, 1.959_964);
    format!("{}/{} Wilson95 [{lo:.4}, {hi:.4}]", hits, n)
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

fn ladder_text(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" > ")
}

fn growth_note(params: &ModelParams, ladder: &[usize]) -> String {
    let s = params.n_blocks as f64;
    ladder
        .iter()
        .map(|&n| format!("s log N / N = {:.3} at N = {n}", s * (n as f64).ln() / n as f64))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Tail `P(sup_k |m_k| > eps)` along an `N`-ladder at fixed `s`, one
/// independent replica per sample started from fair spins.
pub fn lln_high_temperature(params: &ModelParams, cfg: &LlnConfig) -> Result<ExperimentReport> {
    if params.theta() > 1.0 {
        return Err(Error::Domain {
            what: "the high-temperature law of large numbers",
            condition: format!("beta + 2 alpha <= 1, got {}", params.theta()),
        });
    }
    timed(
        |report| {
            report.config = serde_json::to_value(cfg).unwrap();
            let mut tails = Vec::new();
            let mut last = (0, 0);
            for (rung, &n) in cfg.ladder.iter().enumerate() {
                let p = params.with_n_spins(n)?;
                let seed = cfg.seed.wrapping_add(rung as u64);
                let ends = endpoints(&p, seed, cfg.burn_in_sweeps, cfg.n_replicas, |_| {
                    InitialState::UniformRandom
                })?;
                report.params.push(p);
                report.seeds.push(seed);
                let hits = ends.iter().filter(|m| sup_abs(m, 0.0) > cfg.eps).count();
                tails.push(proportion(report, &format!("tail_N{n}"), hits, ends.len()));
                last = (hits, ends.len());
                if let Some(tm) = exact_chain(&p) {
                    let inside = tm.all_blocks_in(|a| a.abs() <= cfg.eps);
                    report.reference(format!("exact_tail_N{n}"), 1.0 - inside);
                }
            }
            let reps = cfg.n_replicas as f64;
            report.check_stat(
                "tail_strictly_decreasing",
                strictly_decreasing(&tails),
                reps,
                "strict decrease of point estimates along the ladder",
                ladder_text(&tails),
            );
            report.check_stat(
                "tail_below_ceiling_at_top",
                tails.last().is_some_and(|&t| t < cfg.ceiling),
                reps,
                format!("< {}", cfg.ceiling),
                format!("{}; {}", wilson_text(last.0, last.1), growth_note(params, &cfg.ladder)),
            );
            Ok(())
        },
        "lln_high_temperature",
    )
}


/// Distance to the nearer phase `+-m*` in sup norm along an `N`-ladder,
/// half of the replicas started in each phase; plus the probability of
/// neighbouring blocks with opposite signs and a phase-balance check from
/// fair starts at the top of the ladder.
pub fn lln_low_temperature(params: &ModelParams, cfg: &LlnConfig) -> Result<ExperimentReport> {
    let theta = params.theta();
    if !(theta > 1.0) {
        return Err(Error::Domain {
            what: "the low-temperature law of large numbers",
            condition: format!("beta + 2 alpha > 1, got {theta}"),
        });
    }
    let m_star = solve_m_star(theta);
    timed(
        |report| {
            report.config = serde_json::to_value(cfg).unwrap();
            report.reference("m_star", m_star);
            let phase_init = |r: u64| {
                if r % 2 == 0 {
                    InitialState::AllPlus
                } else {
                    InitialState::AllMinus
                }
            };
            let (mut tails, mut signs) = (Vec::new(), Vec::new());
            let (mut last_tail, mut last_sign) = ((0, 0), (0, 0));
            for (rung, &n) in cfg.ladder.iter().enumerate() {
                let p = params.with_n_spins(n)?;
                let seed = cfg.seed.wrapping_add(rung as u64);
                let ends = endpoints(&p, seed, cfg.burn_in_sweeps, cfg.n_replicas, phase_init)?;
                report.params.push(p);
                report.seeds.push(seed);
                let tail_hits = ends
                    .iter()
                    .filter(|m| sup_abs(m, m_star).min(sup_abs(m, -m_star)) > cfg.eps)
                    .count();
                let sign_hits = ends.iter().filter(|m| sign_disagreement(m)).count();
                tails.push(proportion(report, &format!("tail_N{n}"), tail_hits, ends.len()));
                signs.push(proportion(report, &format!("sign_N{n}"), sign_hits, ends.len()));
                last_tail = (tail_hits, ends.len());
                last_sign = (sign_hits, ends.len());
                if let Some(tm) = exact_chain(&p) {
                    let plus = tm.all_blocks_in(|a| (a - m_star).abs() <= cfg.eps);
                    let minus = tm.all_blocks_in(|a| (a + m_star).abs() <= cfg.eps);
                    report.reference(format!("exact_tail_N{n}"), 1.0 - plus - minus);
                    let agree = tm.constrained_probability(|a, b| a * b >= 0.0);
                    report.reference(format!("exact_sign_N{n}"), 1.0 - agree);
                }
            }
            let reps = cfg.n_replicas as f64;
            report.check_stat(
                "tail_strictly_decreasing",
                strictly_decreasing(&tails),
                reps,
                "strict decrease of point estimates along the ladder",
                ladder_text(&tails),
            );
            report.check_stat(
                "tail_below_ceiling_at_top",
                tails.last().is_some_and(|&t| t < cfg.ceiling),
                reps,
                format!("< {}", cfg.ceiling),
                wilson_text(last_tail.0, last_tail.1),
            );
            report.check_stat(
                "sign_disagreement_non_increasing",
                signs.windows(2).all(|w| w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0)),
                reps,
                "decrease along the ladder, ties only at zero",
                ladder_text(&signs),
            );
            report.check_stat(
                "sign_disagreement_below_ceiling_at_top",
                signs.last().is_some_and(|&t| t < cfg.sign_ceiling),
                reps,
                format!("< {}", cfg.sign_ceiling),
                wilson_text(last_sign.0, last_sign.1),
            );

            let Some(&top) = cfg.ladder.last() else {
                return Ok(());
            };
            let p = params.with_n_spins(top)?;
            let seed = cfg.seed.wrapping_add(cfg.ladder.len() as u64);
            let ends = endpoints(&p, seed, cfg.burn_in_sweeps, cfg.n_replicas, |_| {
                InitialState::UniformRandom
            })?;
            report.seeds.push(seed);
            let plus = ends.iter().filter(|m| m.iter().sum::<f64>() > 0.0).count();
            proportion(report, "plus_phase_fraction", plus, ends.len());
            let (lo, hi) = wilson_interval(plus, ends.len(), 2.575_829);
            report.check_stat(
                "phase_balance",
                lo <= 0.5 && 0.5 <= hi,
                reps,
                "Wilson 99% interval contains 1/2",
                format!("{plus}/{} in [{lo:.4}, {hi:.4}]", ends.len()),
            );
            Ok(())
        },
        "lln_low_temperature",
    )
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltConfig {
    /// Leading coordinates compared.
    pub d: usize,
    pub n_replicas: usize,
    pub samples_per_replica: usize,
    pub burn_in_sweeps: usize,
    pub thinning_sweeps: usize,
    pub seed: u64,
    /// Required effective samples per leading coordinate.
    pub min_ess: f64,
    /// Tolerance in standard errors.
    pub n_se: f64,
    /// Family-wise level of the marginal Kolmogorov–Smirnov tests.
    pub ks_level: f64,
}

impl CltConfig {
    pub fn high_temperature() -> Self {
        Self {
            d: 3,
            n_replicas: 8,
            samples_per_replica: 900,
            burn_in_sweeps: 40,
            thinning_sweeps: 3,
            seed: 7,
            min_ess: 5000.0,
            n_se: 4.0,
            ks_level: 0.01,
        }
    }

    pub fn low_temperature() -> Self {
        Self {
            seed: 11,
            ..Self::high_temperature()
        }
    }
}

/// Rescaled leading coordinates of every sample, grouped by replica.
type Series = Vec<Vec<Vec<f64>>>;

fn collect_rescaled(
    params: &ModelParams,
    cfg: &CltConfig,
    seed: u64,
    init: InitialState,
    center: f64,
    radius: Option<f64>,
) -> Result<(Series, usize, usize)> {
    let b = params.block_size() as f64;
    let sampler = SamplerConfig {
        seed,
        burn_in_sweeps: cfg.burn_in_sweeps,
        thinning_sweeps: cfg.thinning_sweeps,
        n_samples: cfg.samples_per_replica,
        init,
    };
    let per: Vec<(Vec<Vec<f64>>, usize)> = (0..cfg.n_replicas as u64)
        .into_par_iter()
        .map(|r| {
            let chain = crate::sampler::Chain::new(params, &sampler, r)?;
            let mut kept = Vec::with_capacity(cfg.samples_per_replica);
            let mut seen = 0;
            for sample in chain {
                seen += 1;
                let m = sample.m.values();
                if let Some(rad) = radius {
                    let dist2: f64 = m.iter().map(|x| (x - center).powi(2)).sum();
                    if dist2 > rad * rad {
                        continue;
                    }
                }
                kept.push(m[..cfg.d].iter().map(|x| b.sqrt() * (x - center)).collect());
            }
            Ok((kept, seen))
        })
        .collect::<Result<_>>()?;
    let seen = per.iter().map(|p| p.1).sum();
    let kept = per.iter().map(|p| p.0.len()).sum();
    Ok((per.into_iter().map(|p| p.0).collect(), kept, seen))
}

struct CovStats {
    mean: Vec<Estimate>,
    mean_ess: Vec<f64>,
    cov: Vec<Vec<(Estimate, f64)>>,
    tau: Vec<Vec<f64>>,
    ratio: (Estimate, f64),
}

fn coordinate(series: &Series, i: usize) -> Vec<Vec<f64>> {
    series.iter().map(|c| c.iter().map(|x| x[i]).collect()).collect()
}

fn covariance_stats(series: &Series, d: usize) -> CovStats {
    let mut mean = Vec::new();
    let mut mean_ess = Vec::new();
    let mut tau = Vec::new();
    for i in 0..d {
        let c = coordinate(series, i);
        let (e, ess) = chain_mean(&c);
        mean.push(e);
        mean_ess.push(ess);
        tau.push(c.iter().map(|x| autocorrelation_time(x)).collect());
    }
    let product = |i: usize, j: usize| -> Vec<Vec<f64>> {
        series
            .iter()
            .map(|c| {
                c.iter()
                    .map(|x| (x[i] - mean[i].value) * (x[j] - mean[j].value))
                    .collect()
            })
            .collect()
    };
    let cov: Vec<Vec<(Estimate, f64)>> = (0..d)
        .map(|i| (0..d).map(|j| chain_mean(&product(i, j))).collect())
        .collect();
    let ratio = if d >= 2 {
        let r = cov[0][1].0.value / cov[0][0].0.value;
        let (z01, z00) = (product(0, 1), product(0, 0));
        let influence: Vec<Vec<f64>> = z01
            .iter()
            .zip(&z00)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| (x - r * y) / cov[0][0].0.value)
                    .collect()
            })
            .collect();
        let (e, ess) = chain_mean(&influence);
        (Estimate { value: r, se: e.se }, ess)
    } else {
        (Estimate { value: f64::NAN, se: f64::NAN }, 0.0)
    };
    CovStats {
        mean,
        mean_ess,
        cov,
        tau,
        ratio,
    }
}

/// Coordinate `i` of every replica thinned to roughly independent draws.
fn thinned(series: &Series, i: usize, tau: &[f64]) -> Vec<f64> {
    series
        .iter()
        .zip(tau)
        .flat_map(|(c, &t)| {
            let stride = t.ceil().max(1.0) as usize;
            c.iter().step_by(stride).map(move |x| x[i])
        })
        .collect()
}

fn cov_checks(
    report: &mut ExperimentReport,
    prefix: &str,
    stats: &CovStats,
    series: &Series,
    reference: impl Fn(usize, usize) -> f64,
    cfg: &CltConfig,
) {
    let d = cfg.d;
    let min_ess = stats.cov.iter().enumerate().map(|(i, r)| r[i].1).fold(f64::INFINITY, f64::min);
    report.check(
        format!("{prefix}effective_samples"),
        min_ess >= cfg.min_ess,
        format!(">= {}", cfg.min_ess),
        format!("smallest diagonal ESS {min_ess:.0}"),
    );
    for i in 0..d {
        for j in i..d {
            let (est, ess) = stats.cov[i][j];
            let target = reference(i, j);
            report.estimate(format!("{prefix}cov_{i}_{j}"), est.value, est.se);
            report.reference(format!("{prefix}cov_{i}_{j}"), target);
            report.check_stat(
                format!("{prefix}cov_{i}_{j}"),
                (est.value - target).abs() <= cfg.n_se * est.se,
                ess,
                format!("|est - ref| <= {} SE", cfg.n_se),
                format!("{:.5} vs {target:.5}, SE {:.5}", est.value, est.se),
            );
        }
    }
    let bonferroni = cfg.ks_level / d as f64;
    for i in 0..d {
        let xs = thinned(series, i, &stats.tau[i]);
        let sd = reference(i, i).sqrt();
        let (dstat, p) = ks_test(&xs, |x| normal_cdf(x / sd));
        report.estimate(format!("{prefix}ks_p_{i}"), p, 0.0);
        report.check_stat(
            format!("{prefix}ks_{i}"),
            p > bonferroni,
            xs.len() as f64,
            format!("p > {bonferroni:.4} (Bonferroni {} / {d})", cfg.ks_level),
            format!("D = {dstat:.4}, p = {p:.4}, n = {}", xs.len()),
        );
    }
}

/// Empirical covariance of `sqrt(N/s) (m_1..m_d)` against the finite-`s`
/// closed form of `(I - A)^{-1}`, the ratio of the first two entries against
/// `kappa1`, and marginal normality.
pub fn clt_high_temperature(params: &ModelParams, cfg: &CltConfig) -> Result<ExperimentReport> {
    if !(params.theta() < 1.0) {
        return Err(Error::Domain {
            what: "the high-temperature central limit theorem",
            condition: format!("beta + 2 alpha < 1, got {}", params.theta()),
        });
    }
    if cfg.d == 0 || cfg.d > params.n_blocks {
        return Err(Error::DimensionMismatch {
            expected: params.n_blocks,
            actual: cfg.d,
        });
    }
    let inverse = params.spec().inverse_i_minus_a()?;
    let kappa1 = KappaConstants::compute(params).kappa1;
    timed(
        |report| {
            let (series, _, _) =
                collect_rescaled(params, cfg, cfg.seed, InitialState::UniformRandom, 0.0, None)?;
            report.params.push(*params);
            report.seeds.push(cfg.seed);
            report.config = serde_json::to_value(cfg).unwrap();
            for i in 0..cfg.d {
                for j in i..cfg.d {
                    if let Ok(v) = sigma_limit_entry(params, i, j) {
                        report.reference(format!("cov_limit_{i}_{j}"), v);
                    }
                }
            }
            let stats = covariance_stats(&series, cfg.d);
            cov_checks(report, "", &stats, &series, |i, j| inverse[(i, j)], cfg);
            if let (Some(k), true) = (kappa1, cfg.d >= 2) {
                let (r, ess) = stats.ratio;
                report.estimate("ratio_0_1", r.value, r.se);
                report.reference("kappa1", k);
                report.reference("ratio_0_1", inverse[(0, 1)] / inverse[(0, 0)]);
                report.check_stat(
                    "ratio_vs_kappa1",
                    (r.value - k).abs() <= cfg.n_se * r.se,
                    ess,
                    format!("|est - kappa1| <= {} SE", cfg.n_se),
                    format!("{:.5} vs {k:.5}, SE {:.5}", r.value, r.se),
                );
            }
            Ok(())
        },
        "clt_high_temperature",
    )
}

/// Phase-conditioned covariance of `sqrt(N/s)(m - (+-m*))` against the
/// finite-`s` form of `Sigma*`, for each phase, plus cross-phase agreement.
///
/// Samples are kept when `|m - (+-m*)|_2 <= delta sqrt(s)`.
pub fn clt_low_temperature(
    params: &ModelParams,
    delta: f64,
    cfg: &CltConfig,
) -> Result<ExperimentReport> {
    let theta = params.theta();
    if !(theta > 1.0) {
        return Err(Error::Domain {
            what: "the low-temperature central limit theorem",
            condition: format!("beta + 2 alpha > 1, got {theta}"),
        });
    }
    let m_star = solve_m_star(theta);
    if !(delta > 0.0 && delta < 2.0 * m_star) {
        return Err(Error::Domain {
            what: "the conditioning radius",
            condition: format!("0 < delta < 2 m* = {}, got {delta}", 2.0 * m_star),
        });
    }
    if cfg.d == 0 || cfg.d > params.n_blocks {
        return Err(Error::DimensionMismatch {
            expected: params.n_blocks,
            actual: cfg.d,
        });
    }
    let mut reference = vec![vec![0.0; cfg.d]; cfg.d];
    for (i, row) in reference.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = sigma_star_finite_entry(params, m_star, i, j)?;
        }
    }
    timed(
        |report| {
            let radius = delta * (params.n_blocks as f64).sqrt();
            let mut phases = Vec::new();
            for (k, (init, center)) in [(InitialState::AllPlus, m_star), (InitialState::AllMinus, -m_star)]
                .into_iter()
                .enumerate()
            {
                let seed = cfg.seed.wrapping_add(k as u64);
                let (series, kept, seen) = collect_rescaled(params, cfg, seed, init, center, Some(radius))?;
                let rate = kept as f64 / seen as f64;
                if rate < 1e-3 {
                    return Err(Error::LowAcceptance { rate, floor: 1e-3 });
                }
                phases.push((seed, series, rate));
            }
            report.params.push(*params);
            report.config = serde_json::to_value(cfg).unwrap();
            report.reference("m_star", m_star);
            report.reference("delta", delta);
            if let Some(k5) = KappaConstants::compute(params).kappa5 {
                report.reference("kappa5", k5);
            }
            for i in 0..cfg.d {
                for j in i..cfg.d {
                    if let Ok(v) = sigma_star_entry(params, m_star, i, j) {
                        report.reference(format!("cov_limit_{i}_{j}"), v);
                    }
                }
            }
            let mut all_stats = Vec::new();
            for ((seed, series, rate), name) in phases.iter().zip(["plus", "minus"]) {
                report.seeds.push(*seed);
                report.estimate(format!("{name}.acceptance_rate"), *rate, 0.0);
                let stats = covariance_stats(series, cfg.d);
                let prefix = format!("{name}.");
                cov_checks(report, &prefix, &stats, series, |i, j| reference[i][j], cfg);
                for i in 0..cfg.d {
                    let e = stats.mean[i];
                    report.estimate(format!("{prefix}mean_{i}"), e.value, e.se);
                    report.check_stat(
                        format!("{prefix}mean_{i}"),
                        e.value.abs() <= cfg.n_se * e.se,
                        stats.mean_ess[i],
                        format!("|mean| <= {} SE", cfg.n_se),
                        format!("{:.5}, SE {:.5}", e.value, e.se),
                    );
                }
                all_stats.push(stats);
            }
            let (p, m) = (&all_stats[0], &all_stats[1]);
            for i in 0..cfg.d {
                for j in i..cfg.d {
                    let (a, ea) = p.cov[i][j];
                    let (b, eb) = m.cov[i][j];
                    let se = (a.se * a.se + b.se * b.se).sqrt();
                    report.check_stat(
                        format!("phases_agree_cov_{i}_{j}"),
                        (a.value - b.value).abs() <= cfg.n_se * se,
                        ea.min(eb),
                        format!("|plus - minus| <= {} combined SE", cfg.n_se),
                        format!("{:.5} vs {:.5}", a.value, b.value),
                    );
                }
                let (a, b) = (p.mean[i], m.mean[i]);
                let se = (a.se * a.se + b.se * b.se).sqrt();
                report.check_stat(
                    format!("phases_mirror_mean_{i}"),
                    (a.value + b.value).abs() <= cfg.n_se * se,
                    p.mean_ess[i].min(m.mean_ess[i]),
                    format!("|plus + minus| <= {} combined SE", cfg.n_se),
                    format!("{:.5} vs {:.5}", a.value, b.value),
                );
            }
            Ok(())
        },
        "clt_low_temperature",
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub n_spins: usize,
    pub n_blocks: usize,
    pub n_replicas: usize,
    pub burn_in_sweeps: usize,
    pub samples_per_replica: usize,
    pub thinning_sweeps: usize,
    pub seed: u64,
    /// Level of `E|m_bar|` that marks the ridge.
    pub threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            betas: (0..=16).map(|i| 0.3 + 0.05 * i as f64).collect(),
            alphas: vec![0.05, 0.1, 0.15, 0.2, 0.25],
            n_spins: 2400,
            n_blocks: 4,
            n_replicas: 4,
            burn_in_sweeps: 100,
            samples_per_replica: 50,
            thinning_sweeps: 2,
            seed: 5,
            threshold: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub beta: f64,
    pub alpha: f64,
    pub theta: f64,
    /// `E|(1/s) sum_k m_k|`.
    pub abs_mean: Estimate,
    /// `E sup_k |m_k|`.
    pub sup_block: Estimate,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub report: ExperimentReport,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "beta,alpha,theta,abs_mean,abs_mean_se,sup_block,sup_block_se")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.beta, p.alpha, p.theta, p.abs_mean.value, p.abs_mean.se, p.sup_block.value,
                p.sup_block.se
            )?;
        }
        Ok(())
    }
}

/// `E|m_bar|` and `E sup_k |m_k|` over a `(beta, alpha)` grid, and the
/// location of the ridge where `E|m_bar|` first exceeds the threshold.
pub fn phase_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let mut grid = Vec::new();
    for &alpha in &cfg.alphas {
        for &beta in &cfg.betas {
            if beta > 2.0 * alpha && alpha > 0.0 {
                grid.push(ModelParams::new(beta, alpha, cfg.n_spins, cfg.n_blocks)?);
            }
        }
    }
    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|g| (0..cfg.n_replicas as u64).map(move |r| (g, r)))
        .collect();
    let runs: Vec<(Vec<f64>, Vec<f64>)> = jobs
        .par_iter()
        .map(|&(g, r)| {
            let sampler = SamplerConfig {
                seed: cfg.seed.wrapping_add(g as u64),
                burn_in_sweeps: cfg.burn_in_sweeps,
                thinning_sweeps: cfg.thinning_sweeps,
                n_samples: cfg.samples_per_replica,
                init: InitialState::UniformRandom,
            };
            let chain = crate::sampler::Chain::new(&grid[g], &sampler, r)?;
            Ok(chain
                .map(|x| {
                    let v = x.m.values();
                    let bar = v.iter().sum::<f64>() / v.len() as f64;
                    (bar.abs(), sup_abs(v, 0.0))
                })
                .unzip())
        })
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for (g, p) in grid.iter().enumerate() {
        let chunk = &runs[g * cfg.n_replicas..(g + 1) * cfg.n_replicas];
        let abs: Vec<Vec<f64>> = chunk.iter().map(|c| c.0.clone()).collect();
        let sup: Vec<Vec<f64>> = chunk.iter().map(|c| c.1.clone()).collect();
        points.push(SweepPoint {
            beta: p.beta,
            alpha: p.alpha,
            theta: p.theta(),
            abs_mean: chain_mean(&abs).0,
            sup_block: chain_mean(&sup).0,
        });
    }
    let report = timed(
        |report| {
            report.params = grid.clone();
            report.seeds = (0..grid.len() as u64).map(|g| cfg.seed.wrapping_add(g)).collect();
            report.config = serde_json::to_value(cfg).unwrap();
            for &alpha in &cfg.alphas {
                let row: Vec<&SweepPoint> = points.iter().filter(|p| p.alpha == alpha).collect();
                let crossing = row.windows(2).find(|w| {
                    w[0].abs_mean.value < cfg.threshold && w[1].abs_mean.value >= cfg.threshold
                });
                let straddles = row.first().is_some_and(|p| p.theta < 1.0)
                    && row.last().is_some_and(|p| p.theta > 1.0);
                if !straddles {
                    continue;
                }
                let name = format!("ridge_alpha_{alpha}");
                report.reference(&name, 1.0 - 2.0 * alpha);
                match crossing {
                    Some(w) => {
                        let (a, b) = (w[0], w[1]);
                        let t = (cfg.threshold - a.abs_mean.value)
                            / (b.abs_mean.value - a.abs_mean.value);
                        let beta_hat = a.beta + t * (b.beta - a.beta);
                        let step = b.beta - a.beta;
                        report.estimate(&name, beta_hat, step / 2.0);
                        report.check(
                            name,
                            (beta_hat - (1.0 - 2.0 * alpha)).abs() <= step,
                            "within one grid step of beta = 1 - 2 alpha",
                            format!("beta_hat = {beta_hat:.4}, step {step:.4}"),
                        );
                    }
                    None => report.check(
                        name,
                        false,
                        "within one grid step of beta = 1 - 2 alpha",
                        "no threshold crossing in this row",
                    ),
                }
            }
            Ok(())
        },
        "phase_sweep",
    )?;
    Ok(SweepResult { report, points })
}
