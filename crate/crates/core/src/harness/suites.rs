//! The seven acceptance criteria as runnable reports, grouped into suites.

use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    clt_high_temperature, clt_low_temperature, lln_high_temperature, lln_low_temperature,
    CltConfig, ExperimentReport, LlnConfig,
};
use crate::chain::{build_transfer_matrix, total_magnetization_stats, ChainSpec};
use crate::error::{Error, Result};
use crate::exact::{brute_force_law, encode, exact_law};
use crate::landscape::{
    fixed_point_iterate, fixed_point_map, grad_phi, hess_phi, log_cosh_deviation, phi,
    solve_m_star,
};
use crate::model::{hamiltonian_spins, BlockCounts, ModelParams};
use crate::sampler::{conditional_plus_probability, ChainState, InitialState, SamplerConfig};
use crate::spectral::{discrete_poisson_check, CirculantSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    ClosedForms,
    Oracle,
    Lln,
    Clt,
    Chain,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["closed-forms", "oracle", "lln", "clt", "chain", "all"];

    /// Acceptance criteria covered, by number.
    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::ClosedForms => &[1, 4],
            Suite::Oracle => &[2, 3],
            Suite::Lln => &[5],
            Suite::Clt => &[6],
            Suite::Chain => &[7],
            Suite::All => &[1, 2, 3, 4, 5, 6, 7],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "closed-forms" => Suite::ClosedForms,
            "oracle" => Suite::Oracle,
            "lln" => Suite::Lln,
            "clt" => Suite::Clt,
            "chain" => Suite::Chain,
            "all" => Suite::All,
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown suite {other:?}, expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

/// Tunable parts of the statistical criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub lln_high: LlnConfig,
    pub lln_low: LlnConfig,
    pub clt_high: CltConfig,
    pub clt_low: CltConfig,
    /// Spins of the low-temperature central-limit experiment.
    pub clt_low_n_spins: usize,
    pub tv_sweeps: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            lln_high: LlnConfig::high_temperature(),
            lln_low: LlnConfig::low_temperature(),
            clt_high: CltConfig::high_temperature(),
            clt_low: CltConfig::low_temperature(),
            clt_low_n_spins: 30_000,
            tv_sweeps: 1_000_000,
            seed: 1,
        }
    }
}

pub const TITLES: [&str; 7] = [
    "closed-form correctness",
    "oracle equivalence",
    "sampler exactness",
    "landscape",
    "law of large numbers",
    "central limit theorem",
    "fixed-block-size chain",
];

pub fn run_criterion(id: u8, cfg: &SuiteConfig) -> Result<ExperimentReport> {
    match id {
        1 => closed_forms(),
        2 => oracle(),
        3 => sampler_exactness(cfg),
        4 => landscape(cfg.seed),
        5 => lln(cfg),
        6 => clt(cfg),
        7 => chain(),
        _ => Err(Error::IndexOutOfRange {
            index: id as usize,
            size: 7,
        }),
    }
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<(u8, ExperimentReport)>> {
    suite
        .criteria()
        .iter()
        .map(|&id| Ok((id, run_criterion(id, cfg)?)))
        .collect()
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn runtime_check(report: &mut ExperimentReport, started: Instant, budget_s: f64) {
    let t = started.elapsed().as_secs_f64();
    report.check(
        "runtime",
        t < budget_s,
        format!("< {budget_s} s"),
        format!("{t:.1} s"),
    );
    report.runtime_s = t;
}

/// Sizes for the dense comparisons: every `s` up to 32, then a spread of
/// larger, odd and even, sizes up to 512.
pub fn closed_form_sizes() -> Vec<usize> {
    (2..=32).chain([48, 64, 100, 128, 256, 257, 512]).collect()
}

pub fn closed_forms() -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("closed_forms");
    let sizes = closed_form_sizes();
    let (mut eig_err, mut hess_err, mut inv_err) = (0.0f64, 0.0f64, 0.0f64);
    for &s in &sizes {
        for (beta, alpha) in [(0.8, 0.25), (0.4, 0.1)] {
            let spec = CirculantSpec::new(s, beta, alpha);
            let a = spec.dense();
            let dense = sorted(SymmetricEigen::new(a.clone()).eigenvalues.as_slice().to_vec());
            eig_err = eig_err.max(max_abs_diff(&dense, &sorted(spec.eigenvalues())));
            let h = &a - &a * &a;
            let dense_h = sorted(SymmetricEigen::new(h).eigenvalues.as_slice().to_vec());
            hess_err = hess_err.max(max_abs_diff(&dense_h, &sorted(spec.hessian_at_zero_eigenvalues())));
        }
        for (beta, alpha) in [(0.4, 0.1), (0.5, 0.2)] {
            let spec = CirculantSpec::new(s, beta, alpha);
            let lu = (DMatrix::identity(s, s) - spec.dense())
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::InvalidParams("I - A is singular".into()))?;
            inv_err = inv_err.max((spec.inverse_i_minus_a()? - lu).amax());
        }
    }
    let sizes_text = "s in 2..=32 and {48, 64, 100, 128, 256, 257, 512}";
    r.estimate("eigenvalue_max_abs_error", eig_err, 0.0);
    r.check("eigenvalues", eig_err < 1e-10, "< 1e-10", format!("{eig_err:.2e} over {sizes_text}"));
    r.estimate("inverse_max_abs_error", inv_err, 0.0);
    r.check("inverse", inv_err < 1e-9, "< 1e-9", format!("{inv_err:.2e} against LU"));
    r.estimate("hessian_max_abs_error", hess_err, 0.0);
    r.check("hessian_at_zero", hess_err < 1e-10, "< 1e-10", format!("{hess_err:.2e}"));

    let mut poisson = 0.0f64;
    let mut points = 0;
    for rr in [0.1, 0.3, 0.5, 0.7, 0.9] {
        for s in [4, 5, 8, 16, 32] {
            for m in 0..4 {
                let c = discrete_poisson_check(rr, s, m)?;
                poisson = poisson.max((c.lhs_re - c.rhs).abs()).max(c.lhs_im.abs());
                points += 1;
            }
        }
    }
    r.estimate("poisson_max_residual", poisson, 0.0);
    r.check("poisson", poisson < 1e-12, "< 1e-12", format!("{poisson:.2e} over {points} points"));
    runtime_check(&mut r, started, 10.0);
    Ok(r)
}

pub fn oracle() -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("oracle");
    for (n, s) in [(12, 3), (12, 4), (16, 4)] {
        let params = ModelParams::new(0.8, 0.25, n, s)?;
        r.params.push(params);
        let tv = brute_force_law(&params)?.total_variation(&exact_law(&params)?)?;
        r.estimate(format!("tv_N{n}_s{s}"), tv, 0.0);
        r.check(format!("tv_N{n}_s{s}"), tv < 1e-12, "< 1e-12", format!("{tv:.2e}"));
    }
    let mut worst = 0.0f64;
    for (beta, alpha) in [(0.8, 0.25), (0.4, 0.1)] {
        for s in 1..=6 {
            for b in 1..=4 {
                let params = ModelParams::new(beta, alpha, b * s, s)?;
                let log_trace = build_transfer_matrix(&ChainSpec::from_params(&params)?)
                    .log_partition_periodic();
                let log_z = exact_law(&params)?.log_z();
                worst = worst.max(((log_trace - log_z).exp() - 1.0).abs());
            }
        }
    }
    r.estimate("trace_max_rel_error", worst, 0.0);
    r.check(
        "transfer_trace",
        worst < 1e-10,
        "< 1e-10",
        format!("{worst:.2e} over s <= 6, B <= 4"),
    );
    runtime_check(&mut r, started, 120.0);
    Ok(r)
}

/// Largest `|pi(x) P(x, y) - pi(y) P(y, x)|` of the spin-level heat-bath
/// kernel, with `pi` from enumerating every configuration.
pub fn detailed_balance_residual(params: &ModelParams) -> Result<f64> {
    let n = params.n_spins;
    if n > 16 {
        return Err(Error::BudgetExceeded {
            states: 1u128 << n,
            budget: 1 << 16,
        });
    }
    let b = params.block_size();
    let spins = |x: usize| -> Vec<i8> { (0..n).map(|i| if x >> i & 1 == 1 { 1 } else { -1 }).collect() };
    let energies: Vec<f64> = (0..1usize << n)
        .map(|x| hamiltonian_spins(params, &spins(x)))
        .collect::<Result<_>>()?;
    let top = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = energies.iter().map(|e| (e - top).exp()).sum();
    let pi: Vec<f64> = energies.iter().map(|e| (e - top).exp() / z).collect();
    let flip = |x: usize, i: usize| -> Result<f64> {
        let sigma = spins(x);
        let m = BlockCounts::from_spins(params, &sigma)?.magnetization();
        let p_plus = conditional_plus_probability(params, m.values(), i / b, sigma[i]);
        let keep = if sigma[i] > 0 { p_plus } else { 1.0 - p_plus };
        Ok((1.0 - keep) / n as f64)
    };
    let mut worst = 0.0f64;
    for x in 0..1usize << n {
        for i in 0..n {
            let y = x ^ (1 << i);
            worst = worst.max((pi[x] * flip(x, i)? - pi[y] * flip(y, i)?).abs());
        }
    }
    Ok(worst)
}

/// Total variation between the empirical law of one long chain (every
/// sweep recorded) and the exact law.
pub fn empirical_tv(params: &ModelParams, sweeps: usize, seed: u64) -> Result<f64> {
    let law = exact_law(params)?;
    let b = params.block_size();
    let cfg = SamplerConfig {
        seed,
        burn_in_sweeps: 0,
        thinning_sweeps: 1,
        n_samples: 1,
        init: InitialState::UniformRandom,
    };
    let mut state = ChainState::new(params, &cfg, 0)?;
    state.sweeps(100);
    let mut hist = vec![0u64; law.len()];
    for _ in 0..sweeps {
        state.sweep();
        hist[encode(state.counts().plus_counts(), b) as usize] += 1;
    }
    Ok(0.5
        * (0..law.len())
            .map(|i| (hist[law.state_index(i) as usize] as f64 / sweeps as f64 - law.log_probs()[i].exp()).abs())
            .sum::<f64>())
}

pub fn sampler_exactness(cfg: &SuiteConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("sampler_exactness");
    let db = ModelParams::new(0.8, 0.25, 8, 2)?;
    let residual = detailed_balance_residual(&db)?;
    r.params.push(db);
    r.estimate("detailed_balance_residual", residual, 0.0);
    r.check(
        "detailed_balance",
        residual < 1e-12,
        "< 1e-12",
        format!("{residual:.2e} at N = 8, s = 2"),
    );
    let tvp = ModelParams::new(0.4, 0.1, 12, 3)?;
    let seed = cfg.seed;
    let tv = empirical_tv(&tvp, cfg.tv_sweeps, seed)?;
    r.params.push(tvp);
    r.seeds.push(seed);
    r.estimate("empirical_tv", tv, 0.0);
    r.check(
        "empirical_law",
        tv < 0.02,
        "TV < 0.02",
        format!("{tv:.4} after {} sweeps at N = 12, s = 3", cfg.tv_sweeps),
    );
    r.runtime_s = started.elapsed().as_secs_f64();
    Ok(r)
}

pub fn landscape(seed: u64) -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("landscape");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut grad_err, mut hess_err) = (0.0f64, 0.0f64);
    for (s, beta, alpha) in [(8, 0.8, 0.25), (5, 0.4, 0.1), (2, 0.6, 0.2), (1, 0.9, 0.05), (3, 1.2, 0.3)] {
        let spec = CirculantSpec::new(s, beta, alpha);
        for _ in 0..20 {
            let x: Vec<f64> = (0..s).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g = grad_phi(&spec, &x)?;
            let hm = hess_phi(&spec, &x)?;
            for k in 0..s {
                let shifted = |h: f64| {
                    let mut y = x.clone();
                    y[k] += h;
                    y
                };
                let hg = 1e-6;
                let fd = (phi(&spec, &shifted(hg))? - phi(&spec, &shifted(-hg))?) / (2.0 * hg);
                grad_err = grad_err.max((fd - g[k]).abs());
                let hh = 1e-5;
                let gp = grad_phi(&spec, &shifted(hh))?;
                let gm = grad_phi(&spec, &shifted(-hh))?;
                for l in 0..s {
                    hess_err = hess_err.max(((gp[l] - gm[l]) / (2.0 * hh) - hm[(l, k)]).abs());
                }
            }
        }
    }
    r.estimate("grad_fd_error", grad_err, 0.0);
    r.check("grad_phi", grad_err < 1e-6, "< 1e-6", format!("{grad_err:.2e}"));
    r.estimate("hess_fd_error", hess_err, 0.0);
    r.check("hess_phi", hess_err < 1e-5, "< 1e-5", format!("{hess_err:.2e}"));

    let high = CirculantSpec::new(8, 0.5, 0.2);
    let (mut worst_ratio, mut all_zero) = (0.0f64, true);
    for _ in 0..50 {
        let mut x: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..2000 {
            let next = fixed_point_map(&high, &x);
            let (a, b) = (norm(&next), norm(&x));
            if b > 1e-250 {
                worst_ratio = worst_ratio.max(a / b);
            }
            x = next;
            if a == 0.0 {
                break;
            }
        }
        all_zero &= norm(&x) < 1e-12;
    }
    r.estimate("contraction_ratio", worst_ratio, 0.0);
    r.check(
        "fixed_point_high_temperature",
        all_zero && worst_ratio <= 0.9 + 1e-9,
        "50 starts reach 0, ratio <= 0.9 + 1e-9",
        format!("worst ratio {worst_ratio:.12}, all converged {all_zero}"),
    );

    let low = ModelParams::new(0.8, 0.25, 600, 6)?;
    let m_star = solve_m_star(low.theta());
    let mut worst = 0.0f64;
    for start in 0..20 {
        let sign = if start % 2 == 0 { 1.0 } else { -1.0 };
        let x0: Vec<f64> = (0..6).map(|_| sign * rng.random_range(0.05..1.0)).collect();
        let out = fixed_point_iterate(&low.spec(), &x0, 10_000, 1e-15)?;
        worst = worst.max(out.x.iter().map(|v| (v.abs() - m_star).abs()).fold(0.0, f64::max));
        worst = worst.max(if out.x.iter().all(|v| v.signum() == sign) { 0.0 } else { 1.0 });
    }
    r.reference("m_star", m_star);
    r.estimate("fixed_point_low_error", worst, 0.0);
    r.check(
        "fixed_point_low_temperature",
        worst < 1e-12,
        "|x_k - (+-m*)| < 1e-12",
        format!("{worst:.2e} over 20 signed starts"),
    );

    let mut ok = true;
    for i in -100_000..=100_000 {
        let y = i as f64 * 1e-4;
        let g = log_cosh_deviation(y);
        ok &= g <= 0.0 && g >= -y.powi(4) / 12.0 - 1e-15;
    }
    r.check(
        "log_cosh_deviation",
        ok,
        "-y^4/12 <= G(y) <= 0 (1e-15 rounding slack)",
        "grid y in [-10, 10], step 1e-4",
    );
    r.runtime_s = started.elapsed().as_secs_f64();
    Ok(r)
}

pub fn lln(cfg: &SuiteConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("law_of_large_numbers");
    let high = ModelParams::new(0.5, 0.2, 800, 8)?;
    r.absorb("high", lln_high_temperature(&high, &cfg.lln_high)?);
    let low = ModelParams::new(0.8, 0.25, 600, 6)?;
    r.absorb("low", lln_low_temperature(&low, &cfg.lln_low)?);
    runtime_check(&mut r, started, 900.0);
    Ok(r)
}

pub fn clt(cfg: &SuiteConfig) -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("central_limit_theorem");
    let high = ModelParams::new(0.4, 0.1, 40_000, 8)?;
    r.absorb("high", clt_high_temperature(&high, &cfg.clt_high)?);
    let low = ModelParams::new(0.8, 0.25, cfg.clt_low_n_spins, 6)?;
    let delta = 0.5 * solve_m_star(low.theta());
    r.absorb("low", clt_low_temperature(&low, delta, &cfg.clt_low)?);
    runtime_check(&mut r, started, 1800.0);
    Ok(r)
}

/// Coefficient of determination of a least-squares line through `(x, y)`.
pub fn r_squared(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    (sxy * sxy / (sxx * syy), slope)
}

pub fn chain() -> Result<ExperimentReport> {
    let started = Instant::now();
    let mut r = ExperimentReport::new("fixed_block_size_chain");
    let cases = [(4usize, 0.8, 0.25), (8, 0.8, 0.25), (4, 0.4, 0.1), (6, 1.5, 0.5)];
    let mut worst_mean = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for &(b, beta, alpha) in &cases {
        for s in [3, 8, 64, 256] {
            let chain = ChainSpec::new(b, beta, alpha, s)?;
            worst_mean = worst_mean.max(total_magnetization_stats(&chain).mean.abs());
            min_gap = min_gap.min(1.0 - build_transfer_matrix(&chain).gap_ratio());
        }
    }
    r.estimate("max_abs_mean", worst_mean, 0.0);
    r.check("mean_zero", worst_mean < 1e-14, "< 1e-14", format!("{worst_mean:.2e}"));
    r.estimate("min_spectral_gap", min_gap, 0.0);
    r.check("simple_top_eigenvalue", min_gap > 0.0, "1 - |l2| / l1 > 0", format!("{min_gap:.4}"));

    let ladder = [8usize, 16, 32, 64, 128, 256];
    let mut bounded = true;
    let mut text = Vec::new();
    for &(b, beta, alpha) in &cases {
        let limit = build_transfer_matrix(&ChainSpec::new(b, beta, alpha, 8)?).variance_per_block_infinite();
        let vs: Vec<f64> = ladder
            .iter()
            .map(|&s| Ok(total_magnetization_stats(&ChainSpec::new(b, beta, alpha, s)?).variance_per_block))
            .collect::<Result<_>>()?;
        let top = *vs.last().unwrap();
        bounded &= vs.iter().all(|&v| v <= limit * (1.0 + 1e-9))
            && vs.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
        r.reference(format!("variance_limit_B{b}_beta{beta}_alpha{alpha}"), limit);
        r.estimate(format!("variance_s256_B{b}_beta{beta}_alpha{alpha}"), top, 0.0);
        text.push(format!("B={b}: {:.5}..{top:.5} (limit {limit:.5})", vs[0]));
    }
    r.check(
        "variance_bounded",
        bounded,
        "v(s) non-decreasing in s = 8..256 and <= v_inf (1 + 1e-9)",
        text.join("; "),
    );

    let mut worst_r2 = 1.0f64;
    for &(b, beta, alpha) in &cases {
        let tm = build_transfer_matrix(&ChainSpec::new(b, beta, alpha, 256)?);
        let profile = tm.two_point_profile();
        let xs: Vec<f64> = (1..=8).map(|d| d as f64).collect();
        let ys: Vec<f64> = (1..=8).map(|d| profile[d].ln()).collect();
        let (r2, slope) = r_squared(&xs, &ys);
        worst_r2 = worst_r2.min(r2);
        r.estimate(format!("decay_rate_B{b}_beta{beta}_alpha{alpha}"), slope.exp(), 0.0);
        r.reference(format!("decay_rate_B{b}_beta{beta}_alpha{alpha}"), tm.gap_ratio());
    }
    r.estimate("min_r_squared", worst_r2, 0.0);
    r.check(
        "geometric_decay",
        worst_r2 > 0.999,
        "R^2 > 0.999 on distances 1..8",
        format!("{worst_r2:.6}"),
    );
    r.runtime_s = started.elapsed().as_secs_f64();
    Ok(r)
}
