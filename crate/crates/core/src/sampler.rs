//! Single-spin heat bath on the block counts.
//!
//! Spins inside a block are exchangeable, so a uniformly drawn site of block
//! `k` is `+1` with probability `c_k / B`. The counts then form a Markov chain
//! of their own, and each update costs `O(1)`.
//!
//! Every chain owns a ChaCha8 stream selected by `(seed, replica)`, so a set
//! of replicas reproduces bit for bit whatever the thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{lattice_value, BlockCounts, MagnetizationVector, ModelParams};

pub const MIN_DIAGNOSTIC_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind", content = "values")]
pub enum InitialState {
    #[default]
    AllPlus,
    AllMinus,
    /// Independent fair spins.
    UniformRandom,
    /// Nearest lattice point of the given magnetization vector.
    FromVector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub seed: u64,
    pub burn_in_sweeps: usize,
    pub thinning_sweeps: usize,
    pub n_samples: usize,
    #[serde(default)]
    pub init: InitialState,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            burn_in_sweeps: 100,
            thinning_sweeps: 1,
            n_samples: 1000,
            init: InitialState::AllPlus,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParams("n_samples must be at least 1".into()));
        }
        if self.thinning_sweeps == 0 {
            return Err(Error::InvalidParams("thinning must be at least 1".into()));
        }
        Ok(())
    }
}

/// One emitted sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sweep: u64,
    pub m: MagnetizationVector,
}

/// Counts, the cached magnetizations and the generator of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    params: ModelParams,
    counts: BlockCounts,
    cached_m: Vec<f64>,
    rng: ChaCha8Rng,
    sweep_index: u64,
}

impl ChainState {
    pub fn new(params: &ModelParams, config: &SamplerConfig, replica: u64) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(replica);
        let b = params.block_size();
        let counts = match &config.init {
            InitialState::AllPlus => BlockCounts::all_plus(params),
            InitialState::AllMinus => BlockCounts::all_minus(params),
            InitialState::UniformRandom => {
                let plus = (0..params.n_blocks)
                    .map(|_| (0..b).filter(|_| rng.random::<bool>()).count())
                    .collect();
                BlockCounts::new(b, plus)?
            }
            InitialState::FromVector(v) => {
                if v.len() != params.n_blocks {
                    return Err(Error::DimensionMismatch {
                        expected: params.n_blocks,
                        actual: v.len(),
                    });
                }
                BlockCounts::from_magnetization(b, &nearest_lattice(b, v)?)?
            }
        };
        let cached_m = counts.magnetization().into_inner();
        Ok(Self {
            params: *params,
            counts,
            cached_m,
            rng,
            sweep_index: 0,
        })
    }

    pub fn counts(&self) -> &BlockCounts {
        &self.counts
    }

    pub fn magnetization(&self) -> MagnetizationVector {
        MagnetizationVector::new(self.cached_m.clone()).expect("cached values are in range")
    }

    pub fn values(&self) -> &[f64] {
        &self.cached_m
    }

    pub fn sweep_index(&self) -> u64 {
        self.sweep_index
    }

    /// `N` heat-bath updates at uniformly random sites.
    pub fn sweep(&mut self) {
        let s = self.params.n_blocks;
        for _ in 0..self.params.n_spins {
            let k = self.rng.random_range(0..s);
            let u: f64 = self.rng.random();
            single_site_update(&self.params, &mut self.counts, &mut self.cached_m, k, u);
        }
        self.sweep_index += 1;
        debug_assert_eq!(self.cached_m, self.counts.magnetization().into_inner());
    }

    pub fn sweeps(&mut self, n: usize) {
        for _ in 0..n {
            self.sweep();
        }
    }
}

fn nearest_lattice(b: usize, v: &[f64]) -> Result<MagnetizationVector> {
    let snapped = v
        .iter()
        .map(|&x| {
            if !(x.abs() <= 1.0) {
                return Err(Error::OutOfRange(x));
            }
            let plus = ((x + 1.0) * b as f64 / 2.0).round() as usize;
            Ok(lattice_value(b, plus.min(b)))
        })
        .collect::<Result<Vec<_>>>()?;
    MagnetizationVector::new(snapped)
}

/// Conditional probability that one spin of block `k` is `+1` given all
/// others, when that spin currently has value `spin`.
///
/// The local field is `h = A_kk r + sum_{l != k} A_kl m_l` with
/// `r = m_k - spin / B` the block magnetization without the spin.
pub fn conditional_plus_probability(params: &ModelParams, m: &[f64], k: usize, spin: i8) -> f64 {
    let s = params.n_blocks;
    let b = params.block_size() as f64;
    let r = m[k] - f64::from(spin) / b;
    let at = |l: usize| if l == k { r } else { m[l] };
    let h = params.beta * r + params.alpha * (at((k + s - 1) % s) + at((k + 1) % s));
    1.0 / (1.0 + (-2.0 * h).exp())
}

/// One heat-bath move inside block `k` driven by a single uniform `u`.
///
/// `u B` selects the site (`+1` iff its offset is below `c_k`); the
/// fractional part `v` keeps the spin iff `v < P(current value)`. Flipping
/// every spin and reflecting the site offset gives the mirrored move.
pub fn single_site_update(
    params: &ModelParams,
    counts: &mut BlockCounts,
    m: &mut [f64],
    k: usize,
    u: f64,
) {
    let b = counts.block_size();
    let scaled = u * b as f64;
    let offset = (scaled as usize).min(b - 1);
    let v = scaled - offset as f64;
    let plus = counts.plus_counts()[k];
    let spin: i8 = if offset < plus { 1 } else { -1 };
    let p_plus = conditional_plus_probability(params, m, k, spin);
    let p_keep = if spin > 0 { p_plus } else { 1.0 - p_plus };
    if v >= p_keep {
        let c = &mut counts.plus_counts_mut()[k];
        if spin > 0 {
            *c -= 1;
        } else {
            *c += 1;
        }
        assert!(*c <= b, "plus count left its range");
        m[k] = lattice_value(b, *c);
    }
}

/// A seeded chain: burn-in, then `n_samples` states `thinning_sweeps` apart.
pub struct Chain {
    state: ChainState,
    config: SamplerConfig,
    emitted: usize,
}

impl Chain {
    pub fn new(params: &ModelParams, config: &SamplerConfig, replica: u64) -> Result<Self> {
        let mut state = ChainState::new(params, config, replica)?;
        state.sweeps(config.burn_in_sweeps);
        Ok(Self {
            state,
            config: config.clone(),
            emitted: 0,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }
}

impl Iterator for Chain {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.emitted == self.config.n_samples {
            return None;
        }
        self.state.sweeps(self.config.thinning_sweeps);
        self.emitted += 1;
        Some(Sample {
            sweep: self.state.sweep_index,
            m: self.state.magnetization(),
        })
    }
}

pub fn run_chain(params: &ModelParams, config: &SamplerConfig) -> Result<Vec<Sample>> {
    Ok(Chain::new(params, config, 0)?.collect())
}

/// Independent replicas `0..n` in parallel; output order is by replica.
pub fn run_replicas(
    params: &ModelParams,
    config: &SamplerConfig,
    n_replicas: usize,
) -> Result<Vec<Vec<Sample>>> {
    (0..n_replicas as u64)
        .into_par_iter()
        .map(|r| Ok(Chain::new(params, config, r)?.collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Integrated autocorrelation time per coordinate, in samples.
    pub tau: Vec<f64>,
    pub ess: Vec<f64>,
    /// Split-chain potential scale reduction per coordinate.
    pub r_hat: Vec<f64>,
    /// Some coordinate never moved.
    pub degenerate: bool,
}

/// Initial-positive-sequence estimate of the integrated autocorrelation time.
///
/// A constant series returns `n`, so that `n / tau` is one effective sample.
pub fn autocorrelation_time(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let gamma = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };
    let g0 = gamma(0);
    if !(g0 > 0.0) {
        return n as f64;
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = gamma(lag) + gamma(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        lag += 2;
    }
    ((2.0 * sum - g0) / g0).clamp(1.0 / n as f64, n as f64)
}

pub fn effective_sample_size(x: &[f64]) -> f64 {
    x.len() as f64 / autocorrelation_time(x)
}

/// Gelman–Rubin statistic over the two halves of every chain.
pub fn split_r_hat(chains: &[&[f64]]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::new();
    for c in chains {
        let h = c.len() / 2;
        halves.push(&c[..h]);
        halves.push(&c[c.len() - h..]);
    }
    let n = halves.iter().map(|h| h.len()).min().unwrap_or(0) as f64;
    let m = halves.len() as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / h.len() as f64).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (h.len() as f64 - 1.0))
        .sum::<f64>()
        / m;
    if within == 0.0 {
        return if between == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * within + between / n) / within).sqrt()
}

/// Autocorrelation time, ESS and R-hat of every coordinate of one or more
/// chains.
pub fn diagnostics(chains: &[Vec<Sample>]) -> Result<Diagnostics> {
    let total: usize = chains.iter().map(Vec::len).sum();
    if total < MIN_DIAGNOSTIC_SAMPLES || chains.is_empty() {
        return Err(Error::TooFewSamples {
            needed: MIN_DIAGNOSTIC_SAMPLES,
            got: total,
        });
    }
    let s = chains[0][0].m.len();
    let mut tau = Vec::with_capacity(s);
    let mut ess = Vec::with_capacity(s);
    let mut r_hat = Vec::with_capacity(s);
    let mut degenerate = false;
    for k in 0..s {
        let series: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|x| x.m.values()[k]).collect())
            .collect();
        let e: f64 = series.iter().map(|x| effective_sample_size(x)).sum();
        let constant = series
            .iter()
            .all(|x| x.iter().all(|&v| v == x[0]));
        degenerate |= constant;
        ess.push(e);
        tau.push(total as f64 / e);
        let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
        r_hat.push(split_r_hat(&refs));
    }
    Ok(Diagnostics {
        tau,
        ess,
        r_hat,
        degenerate,
    })
}

/// CSV with header `sweep,m_1,...,m_s`.
pub fn write_samples_csv<W: Write>(mut w: W, samples: &[Sample]) -> std::io::Result<()> {
    let s = samples.first().map_or(0, |x| x.m.len());
    write!(w, "sweep")?;
    for k in 1..=s {
        write!(w, ",m_{k}")?;
    }
    writeln!(w)?;
    for x in samples {
        write!(w, "{}", x.sweep)?;
        for v in x.m.values() {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Row-major little-endian `f64` frame of the magnetizations, no header.
pub fn write_samples_binary<W: Write>(mut w: W, samples: &[Sample]) -> std::io::Result<()> {
    for x in samples {
        for v in x.m.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_is_fair() {
        let p = ModelParams::relaxed(0.0, 0.0, 12, 3).unwrap();
        let m = [0.5, -0.5, 1.0];
        for k in 0..3 {
            assert_eq!(conditional_plus_probability(&p, &m, k, 1), 0.5);
        }
    }

    #[test]
    fn update_commutes_with_global_flip() {
        let p = ModelParams::new(0.8, 0.25, 20, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..2000 {
            let plus: Vec<usize> = (0..4).map(|_| rng.random_range(0..=5)).collect();
            let mut c = BlockCounts::new(5, plus.clone()).unwrap();
            let mut flipped = BlockCounts::new(5, plus.iter().map(|c| 5 - c).collect()).unwrap();
            let mut m = c.magnetization().into_inner();
            let mut mf = flipped.magnetization().into_inner();
            let k = rng.random_range(0..4);
            let u: f64 = rng.random();
            single_site_update(&p, &mut c, &mut m, k, u);
            // offsets are ordered plus-first, so the mirrored site is reflected
            single_site_update(&p, &mut flipped, &mut mf, k, reflect(u, 5));
            let back: Vec<usize> = flipped.plus_counts().iter().map(|c| 5 - c).collect();
            assert_eq!(c.plus_counts(), &back[..]);
            assert!(m.iter().zip(&mf).all(|(a, b)| *a == -*b));
        }
    }

    /// Sends site offset `j` to `B - 1 - j` and keeps the fractional part.
    fn reflect(u: f64, b: usize) -> f64 {
        let scaled = u * b as f64;
        let j = scaled.floor();
        ((b as f64 - 1.0 - j) + (scaled - j)) / b as f64
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let p = ModelParams::new(0.5, 0.2, 60, 3).unwrap();
        let cfg = SamplerConfig {
            seed: 42,
            burn_in_sweeps: 5,
            thinning_sweeps: 2,
            n_samples: 50,
            init: InitialState::UniformRandom,
        };
        let a = run_chain(&p, &cfg).unwrap();
        let b = run_chain(&p, &cfg).unwrap();
        assert_eq!(a, b);
        let reps = run_replicas(&p, &cfg, 3).unwrap();
        assert_eq!(reps[0], a);
        assert_ne!(reps[1], a);
        assert_eq!(a.last().unwrap().sweep, 5 + 2 * 50);
    }

    #[test]
    fn counts_stay_in_range() {
        let p = ModelParams::new(2.0, 0.5, 8, 4).unwrap();
        let mut state = ChainState::new(&p, &SamplerConfig::default(), 0).unwrap();
        for _ in 0..200 {
            state.sweep();
            assert!(state.counts().plus_counts().iter().all(|&c| c <= 2));
        }
    }

    #[test]
    fn iid_noise_has_unit_tau() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x: Vec<f64> = (0..20_000).map(|_| rng.random::<f64>()).collect();
        let tau = autocorrelation_time(&x);
        assert!((tau - 1.0).abs() < 0.2, "tau = {tau}");
    }

    #[test]
    fn ar1_tau_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rho = 0.8;
        let mut x = vec![0.0; 200_000];
        for t in 1..x.len() {
            let e: f64 = rng.random::<f64>() - 0.5;
            x[t] = rho * x[t - 1] + e;
        }
        let tau = autocorrelation_time(&x);
        let exact = (1.0 + rho) / (1.0 - rho);
        assert!((tau / exact - 1.0).abs() < 0.1, "tau = {tau}");
    }

    #[test]
    fn constant_stream_is_degenerate() {
        let p = ModelParams::new(0.5, 0.2, 4, 2).unwrap();
        let frozen = vec![
            Sample {
                sweep: 0,
                m: MagnetizationVector::new(vec![0.5, 0.5]).unwrap()
            };
            200
        ];
        let d = diagnostics(&[frozen]).unwrap();
        assert!(d.degenerate);
        assert!((d.ess[0] - 1.0).abs() < 1e-12);
        let short = run_chain(&p, &SamplerConfig { n_samples: 10, ..Default::default() }).unwrap();
        assert!(matches!(diagnostics(&[short]), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn dumps_have_expected_shape() {
        let p = ModelParams::new(0.5, 0.2, 20, 2).unwrap();
        let cfg = SamplerConfig { n_samples: 3, ..Default::default() };
        let xs = run_chain(&p, &cfg).unwrap();
        let mut csv = Vec::new();
        write_samples_csv(&mut csv, &xs).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("sweep,m_1,m_2\n"));
        assert_eq!(text.lines().count(), 4);
        let mut bin = Vec::new();
        write_samples_binary(&mut bin, &xs).unwrap();
        assert_eq!(bin.len(), 3 * 2 * 8);
        assert_eq!(f64::from_le_bytes(bin[..8].try_into().unwrap()), xs[0].m.values()[0]);
    }
}
