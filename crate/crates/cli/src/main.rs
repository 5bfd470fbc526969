//! `blockspin`: analyse, simulate, enumerate and verify the block spin model.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use blockspin::chain::{build_transfer_matrix, total_magnetization_stats, ChainSpec};
use blockspin::exact::{exact_law, exact_moments, state_count};
use blockspin::harness::suites::{run_suite, Suite, SuiteConfig, TITLES};
use blockspin::harness::{phase_sweep, SweepConfig};
use blockspin::landscape::{classify_minimizers, Regime};
use blockspin::sampler::{diagnostics, run_replicas, write_samples_binary, write_samples_csv, Sample, MIN_DIAGNOSTIC_SAMPLES};
use blockspin::spectral::{sigma_limit_entry, sigma_star_entry, sigma_star_finite_entry, KappaConstants};
use blockspin::ModelParams;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

mod config;
mod svg;

use config::{CommonArgs, Format, Layered, SamplerArgs};

#[derive(Parser)]
#[command(name = "blockspin", version, about = "Block mean-field Ising model toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form summary: regime, m*, spectra, decay rates, covariances.
    Analyze {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run heat-bath chains and write samples plus a trajectory heatmap.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Exact law by lattice enumeration, or by transfer matrix.
    Exact {
        #[command(flatten)]
        common: CommonArgs,
        /// Use the transfer matrix of the fixed-block-size chain.
        #[arg(long)]
        transfer: bool,
    },
    /// Run an acceptance suite; exits 0 iff every verdict passes.
    Verify {
        /// closed-forms, oracle, lln, clt, chain or all
        suite: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Order parameter over a (beta, alpha) grid.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long)]
        replicas: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Analyze { common } => analyze(Layered::new(common)?),
        Command::Simulate { common, sampler } => simulate(Layered::new(common)?, &sampler),
        Command::Exact { common, transfer } => exact(Layered::new(common)?, transfer),
        Command::Verify { suite, common } => verify(&suite, Layered::new(common)?),
        Command::Sweep {
            common,
            betas,
            alphas,
            replicas,
        } => sweep(Layered::new(common)?, betas, alphas, replicas),
    }
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            bail!("threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("writing {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn analysis(params: &ModelParams) -> Result<Value> {
    let spec = params.spec();
    let eig = spec.eigenvalues();
    let mut hess = spec.hessian_at_zero_eigenvalues();
    hess.sort_by(f64::total_cmp);
    let landscape = classify_minimizers(params)?;
    let kappa = KappaConstants::compute(params);
    let s = params.n_blocks;
    let lead = s.min(4);
    let mut sigma = Value::Null;
    let mut sigma_limit = Value::Null;
    match landscape.regime {
        Regime::High => {
            let finite: Vec<f64> = (0..lead)
                .map(|j| spec.inverse_i_minus_a_entry(0, j))
                .collect::<blockspin::Result<_>>()?;
            let limit: Vec<f64> = (0..lead)
                .map(|j| sigma_limit_entry(params, 0, j))
                .collect::<blockspin::Result<_>>()?;
            sigma = json!(finite);
            sigma_limit = json!(limit);
        }
        Regime::Low => {
            let m = landscape.m_star;
            let finite: Vec<f64> = (0..lead)
                .map(|j| sigma_star_finite_entry(params, m, 0, j))
                .collect::<blockspin::Result<_>>()?;
            let limit: Vec<f64> = (0..lead)
                .map(|j| sigma_star_entry(params, m, 0, j))
                .collect::<blockspin::Result<_>>()?;
            sigma = json!(finite);
            sigma_limit = json!(limit);
        }
        Regime::Critical => {}
    }
    Ok(json!({
        "regime": landscape.regime,
        "gap": landscape.gap,
        "m_star": landscape.m_star,
        "phi_at_min": landscape.phi_at_min,
        "minimizers_verified": landscape.is_verified(),
        "a_eigenvalue_range": [eig.iter().copied().fold(f64::INFINITY, f64::min), eig.iter().copied().fold(f64::NEG_INFINITY, f64::max)],
        "hessian_at_zero": hess,
        "kappa1": kappa.kappa1,
        "kappa5": kappa.kappa5,
        "sigma_row0": sigma,
        "sigma_row0_limit": sigma_limit,
    }))
}

fn analyze(layered: Layered) -> Result<bool> {
    let params = layered.model()?;
    let mut resolved = layered.resolved("analyze", Format::Csv, ".")?;
    resolved.model = Some(params);
    let summary = analysis(&params)?;
    if resolved.format == Format::Json {
        let out = json!({ "config": resolved.to_json(), "analysis": summary });
        println!("{}", serde_json::to_string_pretty(&out)?);
        return Ok(true);
    }
    let list = |v: &Value| match v.as_array() {
        Some(a) => a
            .iter()
            .map(|x| x.as_f64().map_or("-".into(), |f| format!("{f:.6}")))
            .collect::<Vec<_>>()
            .join(" "),
        None => "-".into(),
    };
    let opt = |v: &Value| v.as_f64().map_or("-".into(), |f| format!("{f:.6}"));
    println!("blockspin {}", resolved.version);
    println!(
        "beta = {}, alpha = {}, N = {}, s = {}",
        params.beta, params.alpha, params.n_spins, params.n_blocks
    );
    println!("regime: {} (beta + 2 alpha - 1 = {:e})", summary["regime"].as_str().unwrap_or("?"), params.theta() - 1.0);
    if summary["regime"] == "critical" {
        println!("warning: critical point, the Hessian at 0 is only semidefinite");
    }
    println!("m*: {}", opt(&summary["m_star"]));
    println!("eigenvalues of A: [{}]", list(&summary["a_eigenvalue_range"]));
    println!("Hessian at 0: {}", list(&summary["hessian_at_zero"]));
    println!("kappa1: {}  kappa5: {}", opt(&summary["kappa1"]), opt(&summary["kappa5"]));
    println!("Sigma row 0 (finite s): {}", list(&summary["sigma_row0"]));
    println!("Sigma row 0 (s -> inf): {}", list(&summary["sigma_row0_limit"]));
    Ok(true)
}

fn simulate(layered: Layered, sampler: &SamplerArgs) -> Result<bool> {
    let params = layered.model()?;
    let (config, replicas) = sampler.resolve(&layered)?;
    let mut resolved = layered.resolved("simulate", Format::Csv, "blockspin-out")?;
    resolved.model = Some(params);
    resolved.sampler = Some(config.clone());
    resolved.replicas = Some(replicas);
    init_threads(resolved.threads)?;
    let out = resolved.out.clone();
    create_out(&out)?;

    let runs = run_replicas(&params, &config, replicas)?;
    for (r, samples) in runs.iter().enumerate() {
        write_samples(&out, r, samples, resolved.format)?;
    }
    let rows: Vec<Vec<f64>> = (0..params.n_blocks)
        .map(|k| runs[0].iter().map(|x| x.m.values()[k]).collect())
        .collect();
    let title = format!(
        "block magnetizations, beta = {}, alpha = {}, N = {}, s = {}",
        params.beta, params.alpha, params.n_spins, params.n_blocks
    );
    let map = svg::Heatmap {
        title: &title,
        x_label: "sweep",
        y_label: "block",
        values: &svg::downsample(&rows, 600),
        row_labels: (1..=params.n_blocks).map(|k| k.to_string()).collect(),
        col_labels: (
            runs[0].first().map_or(0, |x| x.sweep).to_string(),
            runs[0].last().map_or(0, |x| x.sweep).to_string(),
        ),
    };
    fs::write(out.join("heatmap.svg"), map.render())
        .with_context(|| format!("writing {}", out.join("heatmap.svg").display()))?;

    let bar: Vec<Vec<f64>> = runs
        .iter()
        .map(|c| c.iter().map(|x| mean(x.m.values()).abs()).collect())
        .collect();
    let abs_mean = mean(&bar.concat());
    let diag = if config.n_samples >= MIN_DIAGNOSTIC_SAMPLES {
        serde_json::to_value(diagnostics(&runs)?)?
    } else {
        Value::Null
    };
    let summary = json!({
        "config": resolved.to_json(),
        "abs_mean_magnetization": abs_mean,
        "diagnostics": diag,
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!(
        "{} replica(s) x {} samples written to {}; E|m_bar| = {abs_mean:.4}",
        replicas,
        config.n_samples,
        out.display()
    );
    Ok(true)
}

fn write_samples(out: &Path, replica: usize, samples: &[Sample], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = create_file(&out.join(format!("samples_{replica}.csv")))?;
            write_samples_csv(&mut w, samples)?;
            w.flush()?;
        }
        Format::Bin => {
            let mut w = create_file(&out.join(format!("samples_{replica}.bin")))?;
            write_samples_binary(&mut w, samples)?;
            w.flush()?;
        }
        Format::Json => {
            write_json(&out.join(format!("samples_{replica}.json")), &serde_json::to_value(samples)?)?;
        }
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len().max(1) as f64
}

fn exact(layered: Layered, transfer: bool) -> Result<bool> {
    let params = layered.model()?;
    let mut resolved = layered.resolved("exact", Format::Csv, "blockspin-out")?;
    resolved.model = Some(params);
    if resolved.format == Format::Bin {
        bail!("exact writes csv or json");
    }
    let out = resolved.out.clone();
    create_out(&out)?;
    let csv = resolved.format == Format::Csv;
    let summary = if transfer {
        let spec = ChainSpec::from_params(&params)?;
        let tm = build_transfer_matrix(&spec);
        let stats = total_magnetization_stats(&spec);
        let profile = tm.two_point_profile();
        if csv {
            let mut w = create_file(&out.join("marginal.csv"))?;
            tm.write_marginal_csv(&mut w)?;
            w.flush()?;
            let mut w = create_file(&out.join("two_point.csv"))?;
            tm.write_two_point_csv(&mut w, params.n_blocks / 2)?;
            w.flush()?;
        }
        let eig: Vec<f64> = tm.eigenvalues().iter().take(4).copied().collect();
        json!({
            "config": resolved.to_json(),
            "method": "transfer",
            "log_partition_periodic": tm.log_partition_periodic(),
            "log_partition_free": tm.log_partition_free(),
            "leading_eigenvalues_scaled": eig,
            "log_scale": tm.log_scale(),
            "stats": stats,
            "alphabet": tm.alphabet(),
            "marginal": tm.marginal(),
            "two_point": profile,
        })
    } else {
        let law = exact_law(&params)?;
        let (mu, cov) = exact_moments(&law, params.n_blocks)?;
        if csv {
            let mut w = create_file(&out.join("law.csv"))?;
            law.write_csv(&mut w)?;
            w.flush()?;
        }
        let cov_rows: Vec<Vec<f64>> = (0..cov.nrows())
            .map(|i| cov.row(i).iter().copied().collect())
            .collect();
        let mut summary = json!({
            "config": resolved.to_json(),
            "method": "enumeration",
            "lattice_states": state_count(&params).to_string(),
            "log_z": law.log_z(),
            "mean": mu,
            "covariance": cov_rows,
        });
        if !csv {
            let m: Vec<Vec<f64>> = (0..law.len()).map(|i| law.magnetization(i).into_inner()).collect();
            summary["law"] = json!({ "m": m, "log_prob": law.log_probs() });
        }
        summary
    };
    write_json(&out.join("exact.json"), &summary)?;
    println!("exact results written to {}", out.display());
    Ok(true)
}

fn verify(suite: &str, layered: Layered) -> Result<bool> {
    let suite = Suite::from_str(suite)?;
    let mut cfg: SuiteConfig = layered.file.suite.clone().unwrap_or_default();
    if let Some(seed) = layered.common.seed {
        cfg.seed = seed;
    }
    let mut resolved = layered.resolved("verify", Format::Json, "blockspin-reports")?;
    resolved.suite = Some(cfg.clone());
    init_threads(resolved.threads)?;
    let out = resolved.out.clone();
    create_out(&out)?;
    write_json(&out.join("config.json"), &resolved.to_json())?;
    let mut all = true;
    for (id, report) in run_suite(suite, &cfg)? {
        println!(
            "criterion {id} ({}): {} [{:.1} s]",
            TITLES[id as usize - 1],
            report.verdict(),
            report.runtime_s
        );
        for c in report.verdicts.iter().filter(|c| c.verdict != blockspin::harness::Verdict::Pass) {
            println!("  {} {}: {} ({})", c.verdict, c.name, c.detail, c.tolerance);
        }
        all &= report.passed();
        let mut value = serde_json::to_value(&report)?;
        value["run_config"] = resolved.to_json();
        write_json(&out.join(format!("criterion_{id}.json")), &value)?;
    }
    Ok(all)
}

fn sweep(
    layered: Layered,
    betas: Option<Vec<f64>>,
    alphas: Option<Vec<f64>>,
    replicas: Option<usize>,
) -> Result<bool> {
    let mut cfg: SweepConfig = layered.file.sweep.clone().unwrap_or_default();
    if let Some(b) = betas {
        cfg.betas = b;
    }
    if let Some(a) = alphas {
        cfg.alphas = a;
    }
    if let Some(r) = replicas {
        cfg.n_replicas = r;
    }
    let c = &layered.common;
    if let Some(n) = c.n_spins.or(layered.file.model.n_spins) {
        cfg.n_spins = n;
    }
    if let Some(s) = c.n_blocks.or(layered.file.model.n_blocks) {
        cfg.n_blocks = s;
    }
    if let Some(seed) = c.seed.or(layered.file.sampler.seed) {
        cfg.seed = seed;
    }
    if cfg.n_replicas == 0 || cfg.samples_per_replica == 0 {
        bail!("a sweep needs at least one replica and one sample");
    }
    let mut resolved = layered.resolved("sweep", Format::Csv, "blockspin-out")?;
    resolved.sweep = Some(cfg.clone());
    init_threads(resolved.threads)?;
    let out = resolved.out.clone();
    create_out(&out)?;

    let result = phase_sweep(&cfg)?;
    let mut w = create_file(&out.join("sweep.csv"))?;
    result.write_csv(&mut w)?;
    w.flush()?;
    let mut report = serde_json::to_value(&result.report)?;
    report["run_config"] = resolved.to_json();
    write_json(&out.join("sweep.json"), &report)?;

    let mut alphas: Vec<f64> = result.points.iter().map(|p| p.alpha).collect();
    alphas.dedup();
    let betas: Vec<f64> = cfg.betas.clone();
    let rows: Vec<Vec<f64>> = alphas
        .iter()
        .map(|&a| {
            betas
                .iter()
                .map(|&b| {
                    result
                        .points
                        .iter()
                        .find(|p| p.alpha == a && p.beta == b)
                        .map_or(f64::NAN, |p| p.abs_mean.value)
                })
                .collect()
        })
        .collect();
    let map = svg::Heatmap {
        title: &format!("E|m_bar|, N = {}, s = {}", cfg.n_spins, cfg.n_blocks),
        x_label: "beta",
        y_label: "alpha",
        values: &rows,
        row_labels: alphas.iter().map(|a| format!("{a}")).collect(),
        col_labels: (
            betas.first().map_or(String::new(), |b| format!("{b}")),
            betas.last().map_or(String::new(), |b| format!("{b}")),
        ),
    };
    fs::write(out.join("sweep.svg"), map.render())
        .with_context(|| format!("writing {}", out.join("sweep.svg").display()))?;
    println!(
        "sweep: {} points, {}; results in {}",
        result.points.len(),
        result.report.verdict(),
        out.display()
    );
    Ok(result.report.passed())
}
