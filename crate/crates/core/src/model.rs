//! Model parameters, the Hamiltonian in spin and block form, the
//! magnetization lattice and the a-priori binomial block weights.
//!
//! Blocks are indexed from `0` in this crate. Block `k` holds the spins
//! `k * B .. (k + 1) * B` where `B = N / s` is the block size, and the block
//! neighbours wrap around cyclically.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::spectral::CirculantSpec;

/// Which parameter cone is accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ParamMode {
    /// `beta > 2 alpha > 0`.
    #[default]
    Strict,
    /// `beta >= 0`, `alpha >= 0`; used for independent-block and zero-field checks.
    Relaxed,
}

/// The tuple `(beta, alpha, N, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub alpha: f64,
    pub n_spins: usize,
    pub n_blocks: usize,
    #[serde(default)]
    pub mode: ParamMode,
}

impl ModelParams {
    /// Parameters in the standing cone `beta > 2 alpha > 0`.
    pub fn new(beta: f64, alpha: f64, n_spins: usize, n_blocks: usize) -> Result<Self> {
        Self::with_mode(beta, alpha, n_spins, n_blocks, ParamMode::Strict)
    }

    /// Parameters with `alpha = 0` (and `beta = 0`) permitted.
    pub fn relaxed(beta: f64, alpha: f64, n_spins: usize, n_blocks: usize) -> Result<Self> {
        Self::with_mode(beta, alpha, n_spins, n_blocks, ParamMode::Relaxed)
    }

    pub fn with_mode(
        beta: f64,
        alpha: f64,
        n_spins: usize,
        n_blocks: usize,
        mode: ParamMode,
    ) -> Result<Self> {
        let params = Self {
            beta,
            alpha,
            n_spins,
            n_blocks,
            mode,
        };
        params.validate()?;
        Ok(params)
    }

    /// Re-checks the invariants, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || !self.alpha.is_finite() {
            return Err(Error::InvalidParams("beta and alpha must be finite".into()));
        }
        if self.n_blocks == 0 || self.n_spins == 0 {
            return Err(Error::InvalidParams(
                "n_spins and n_blocks must be positive".into(),
            ));
        }
        if self.n_spins % self.n_blocks != 0 {
            return Err(Error::InvalidParams(format!(
                "n_spins = {} is not divisible by n_blocks = {}",
                self.n_spins, self.n_blocks
            )));
        }
        match self.mode {
            ParamMode::Strict => {
                if !(self.beta > 2.0 * self.alpha && self.alpha > 0.0) {
                    return Err(Error::InvalidParams(format!(
                        "strict mode requires beta > 2 alpha > 0, got beta = {}, alpha = {}",
                        self.beta, self.alpha
                    )));
                }
            }
            ParamMode::Relaxed => {
                if self.beta < 0.0 || self.alpha < 0.0 {
                    return Err(Error::InvalidParams(
                        "relaxed mode requires beta >= 0 and alpha >= 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Spins per block, `N / s`.
    pub fn block_size(&self) -> usize {
        self.n_spins / self.n_blocks
    }

    /// Total inverse temperature `beta + 2 alpha`.
    pub fn theta(&self) -> f64 {
        self.beta + 2.0 * self.alpha
    }

    /// The interaction matrix of these parameters.
    pub fn spec(&self) -> CirculantSpec {
        CirculantSpec::new(self.n_blocks, self.beta, self.alpha)
    }

    /// Same coupling with a different number of spins.
    pub fn with_n_spins(&self, n_spins: usize) -> Result<Self> {
        Self::with_mode(self.beta, self.alpha, n_spins, self.n_blocks, self.mode)
    }
}

/// Block magnetizations `m_k`, one entry per block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MagnetizationVector {
    values: Vec<f64>,
}

impl MagnetizationVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = values.iter().find(|v| !(v.abs() <= 1.0)) {
            return Err(Error::OutOfRange(bad));
        }
        Ok(Self { values })
    }

    /// All coordinates equal to `value`.
    pub fn uniform(n_blocks: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n_blocks])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks that every entry lies on the lattice of the given block size.
    pub fn is_on_lattice(&self, block_size: usize) -> bool {
        self.values
            .iter()
            .all(|&v| lattice_index(block_size, v).is_ok())
    }

    pub fn negated(&self) -> Self {
        Self {
            values: self.values.iter().map(|v| -v).collect(),
        }
    }
}

/// Per-block counts of `+1` spins.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockCounts {
    block_size: usize,
    plus_counts: Vec<usize>,
}

impl BlockCounts {
    pub fn new(block_size: usize, plus_counts: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = plus_counts.iter().find(|&&c| c > block_size) {
            return Err(Error::InvalidParams(format!(
                "plus count {bad} exceeds block size {block_size}"
            )));
        }
        Ok(Self {
            block_size,
            plus_counts,
        })
    }

    pub fn all_plus(params: &ModelParams) -> Self {
        Self {
            block_size: params.block_size(),
            plus_counts: vec![params.block_size(); params.n_blocks],
        }
    }

    pub fn all_minus(params: &ModelParams) -> Self {
        Self {
            block_size: params.block_size(),
            plus_counts: vec![0; params.n_blocks],
        }
    }

    /// Counts of a spin configuration.
    pub fn from_spins(params: &ModelParams, sigma: &[i8]) -> Result<Self> {
        check_spins(params, sigma)?;
        let b = params.block_size();
        let plus_counts = sigma
            .chunks(b)
            .map(|block| block.iter().filter(|&&s| s > 0).count())
            .collect();
        Ok(Self {
            block_size: b,
            plus_counts,
        })
    }

    /// Nearest lattice counts for a magnetization vector.
    pub fn from_magnetization(block_size: usize, m: &MagnetizationVector) -> Result<Self> {
        let plus_counts = m
            .values()
            .iter()
            .map(|&v| lattice_index(block_size, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            block_size,
            plus_counts,
        })
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn plus_counts(&self) -> &[usize] {
        &self.plus_counts
    }

    pub(crate) fn plus_counts_mut(&mut self) -> &mut [usize] {
        &mut self.plus_counts
    }

    pub fn n_blocks(&self) -> usize {
        self.plus_counts.len()
    }

    /// `m_k = 2 c_k / B - 1`.
    pub fn magnetization(&self) -> MagnetizationVector {
        MagnetizationVector {
            values: self
                .plus_counts
                .iter()
                .map(|&c| lattice_value(self.block_size, c))
                .collect(),
        }
    }
}

/// Lattice value for `plus` spins up in a block of `block_size` spins.
///
/// Computed as `(2 plus - B) / B` so that `lattice_value(B, B - l)` is the
/// exact negation of `lattice_value(B, l)`.
#[inline]
pub fn lattice_value(block_size: usize, plus: usize) -> f64 {
    (2 * plus as i64 - block_size as i64) as f64 / block_size as f64
}

/// Inverse of [`lattice_value`]; fails for values off the lattice.
pub fn lattice_index(block_size: usize, value: f64) -> Result<usize> {
    let b = block_size as f64;
    let l = ((value + 1.0) * b / 2.0).round();
    if !(0.0..=b).contains(&l) || (lattice_value(block_size, l as usize) - value).abs() > 1e-9 {
        return Err(Error::OffLattice { value, block_size });
    }
    Ok(l as usize)
}

/// The admissible block magnetizations, increasing, `B + 1` points.
pub fn lattice_grid(params: &ModelParams) -> Vec<f64> {
    grid_for_block_size(params.block_size())
}

pub(crate) fn grid_for_block_size(block_size: usize) -> Vec<f64> {
    (0..=block_size)
        .map(|l| lattice_value(block_size, l))
        .collect()
}

fn check_spins(params: &ModelParams, sigma: &[i8]) -> Result<()> {
    if sigma.len() != params.n_spins {
        return Err(Error::DimensionMismatch {
            expected: params.n_spins,
            actual: sigma.len(),
        });
    }
    if let Some((index, &value)) = sigma.iter().enumerate().find(|(_, &s)| s != 1 && s != -1) {
        return Err(Error::NotASpin {
            index,
            value: value as i64,
        });
    }
    Ok(())
}

/// `H_N(sigma)` including the `i = j` terms of the within-block sum.
///
/// The neighbour sum runs over block `k - 1` and block `k + 1` separately,
/// so for two blocks the other block is counted twice and for one block the
/// block itself is, matching the interaction matrix conventions.
pub fn hamiltonian_spins(params: &ModelParams, sigma: &[i8]) -> Result<f64> {
    check_spins(params, sigma)?;
    let s = params.n_blocks;
    let sums: Vec<f64> = sigma
        .chunks(params.block_size())
        .map(|block| block.iter().map(|&x| x as f64).sum())
        .collect();
    let scale = s as f64 / params.n_spins as f64;
    let mut within = 0.0;
    let mut between = 0.0;
    for k in 0..s {
        let left = sums[(k + s - 1) % s];
        let right = sums[(k + 1) % s];
        within += sums[k] * sums[k];
        between += sums[k] * (left + right);
    }
    Ok(0.5 * scale * (params.beta * within + params.alpha * between))
}

/// `m_k = (s / N) sum_{i in S_k} sigma_i`.
pub fn block_magnetization(params: &ModelParams, sigma: &[i8]) -> Result<MagnetizationVector> {
    Ok(BlockCounts::from_spins(params, sigma)?.magnetization())
}

/// `(1/2) (N / s) m^T A m`.
pub fn hamiltonian_blocks(params: &ModelParams, m: &[f64]) -> Result<f64> {
    if m.len() != params.n_blocks {
        return Err(Error::DimensionMismatch {
            expected: params.n_blocks,
            actual: m.len(),
        });
    }
    let b = params.block_size() as f64;
    Ok(0.5 * b * params.spec().quadratic_form(m))
}

/// `log[2^{-B} binom(B, B (1 + m_k) / 2)]`.
pub fn log_prior_weight(params: &ModelParams, m_k: f64) -> Result<f64> {
    let b = params.block_size();
    let plus = lattice_index(b, m_k)?;
    Ok(log_binomial_weight(b, plus))
}

/// `log[2^{-B} binom(B, l)]` via log-gamma.
pub fn log_binomial_weight(block_size: usize, plus: usize) -> f64 {
    let b = block_size as f64;
    let l = plus as f64;
    ln_gamma(b + 1.0) - ln_gamma(l + 1.0) - ln_gamma(b - l + 1.0) - b * std::f64::consts::LN_2
}

/// Table of [`log_binomial_weight`] for `l = 0..=B`, mirrored so that entry
/// `l` and entry `B - l` are bit-identical.
pub fn log_prior_table(block_size: usize) -> Vec<f64> {
    let mut table = vec![0.0; block_size + 1];
    for l in 0..=block_size / 2 {
        let w = log_binomial_weight(block_size, l);
        table[l] = w;
        table[block_size - l] = w;
    }
    table
}
