//! Fixed block size: the block magnetizations form a cyclic nearest-neighbour
//! chain over the alphabet `{-1 + 2 l / B}` with binomial a-priori weights,
//! solved exactly by a symmetric transfer matrix.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{grid_for_block_size, log_binomial_weight, ModelParams};

/// Which a-priori block weight to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorWeights {
    /// `binom(B, l) / 2^B` for `l` plus spins: the count of configurations.
    #[default]
    Binomial,
    /// `binom(B + l - 1, l) / 2^B` for `l` minus spins, mirrored onto the
    /// negative half of the alphabet. Not a probability distribution; kept
    /// only for comparison.
    NegativeBinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub block_size: usize,
    pub beta: f64,
    pub alpha: f64,
    pub n_blocks: usize,
    #[serde(default)]
    pub weights: PriorWeights,
}

impl ChainSpec {
    pub fn new(block_size: usize, beta: f64, alpha: f64, n_blocks: usize) -> Result<Self> {
        if block_size == 0 || n_blocks == 0 {
            return Err(Error::InvalidParams(
                "block size and number of blocks must be positive".into(),
            ));
        }
        if !(beta.is_finite() && alpha.is_finite()) {
            return Err(Error::InvalidParams("beta and alpha must be finite".into()));
        }
        Ok(Self {
            block_size,
            beta,
            alpha,
            n_blocks,
            weights: PriorWeights::Binomial,
        })
    }

    pub fn from_params(params: &ModelParams) -> Result<Self> {
        Self::new(params.block_size(), params.beta, params.alpha, params.n_blocks)
    }

    pub fn with_weights(mut self, weights: PriorWeights) -> Self {
        self.weights = weights;
        self
    }

    pub fn with_n_blocks(mut self, n_blocks: usize) -> Self {
        self.n_blocks = n_blocks;
        self
    }

    pub fn alphabet(&self) -> Vec<f64> {
        grid_for_block_size(self.block_size)
    }

    /// Log a-priori weight of each letter, indexed by plus count.
    pub fn log_weights(&self) -> Vec<f64> {
        let b = self.block_size;
        match self.weights {
            PriorWeights::Binomial => (0..=b).map(|l| log_binomial_weight(b, l)).collect(),
            PriorWeights::NegativeBinomial => (0..=b)
                .map(|plus| {
                    let minus = (b - plus).min(plus);
                    let (n, k) = ((b + minus - 1) as f64, minus as f64);
                    use statrs::function::gamma::ln_gamma;
                    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
                        - b as f64 * std::f64::consts::LN_2
                })
                .collect(),
        }
    }
}

/// `T(m, m') = sqrt(rho(m)) exp{B alpha m m' + (B beta / 4)(m^2 + m'^2)} sqrt(rho(m'))`,
/// stored as `exp(-log_scale) T` together with its eigendecomposition.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    alphabet: Vec<f64>,
    entries: DMatrix<f64>,
    log_scale: f64,
    /// Eigenvalues in decreasing order and matching unit eigenvectors.
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    n_blocks: usize,
    log_weights: Vec<f64>,
    beta: f64,
    block_size: usize,
}

pub fn build_transfer_matrix(chain: &ChainSpec) -> TransferMatrix {
    let alphabet = chain.alphabet();
    let lw = chain.log_weights();
    let b = chain.block_size as f64;
    let n = alphabet.len();
    let log_entry = |i: usize, j: usize| {
        let (x, y) = (alphabet[i], alphabet[j]);
        0.5 * lw[i]
            + 0.5 * lw[j]
            + b * chain.alpha * x * y
            + 0.25 * b * chain.beta * (x * x + y * y)
    };
    let mut log_scale = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            log_scale = log_scale.max(log_entry(i, j));
        }
    }
    let entries = DMatrix::from_fn(n, n, |i, j| (log_entry(i, j) - log_scale).exp());
    let (eigenvalues, eigenvectors) = mirror_eigen(&entries);
    TransferMatrix {
        alphabet,
        entries,
        log_scale,
        eigenvalues,
        eigenvectors,
        n_blocks: chain.n_blocks,
        log_weights: lw,
        beta: chain.beta,
        block_size: chain.block_size,
    }
}

/// Eigenpairs of a matrix commuting with the reflection `i -> n - 1 - i`,
/// diagonalized separately on the even and odd subspaces so that every
/// eigenvector is exactly symmetric or antisymmetric. Sorted decreasing.
fn mirror_eigen(t: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = t.nrows();
    let half = n / 2;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let n_even = n - half;
    let even = DMatrix::from_fn(n, n_even, |i, c| {
        if c < half {
            if i == c || i == n - 1 - c {
                h
            } else {
                0.0
            }
        } else if i == half {
            1.0
        } else {
            0.0
        }
    });
    let odd = DMatrix::from_fn(n, half, |i, c| {
        if i == c {
            h
        } else if i == n - 1 - c {
            -h
        } else {
            0.0
        }
    });
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n);
    for (basis, sign) in [(&even, 1.0), (&odd, -1.0)] {
        if basis.ncols() == 0 {
            continue;
        }
        let reduced = basis.transpose() * t * basis;
        let reduced = (&reduced + reduced.transpose()) * 0.5;
        let eig = SymmetricEigen::new(reduced);
        for (k, &value) in eig.eigenvalues.iter().enumerate() {
            let w = eig.eigenvectors.column(k);
            let mut v = vec![0.0; n];
            for c in 0..half {
                v[c] = h * w[c];
                v[n - 1 - c] = sign * h * w[c];
            }
            if sign > 0.0 && n % 2 == 1 {
                v[half] = w[half];
            }
            pairs.push((value, v));
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let values = pairs.iter().map(|p| p.0).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| pairs[c].1[r]);
    (values, vectors)
}

impl TransferMatrix {
    /// `E[m_k]` summed in mirrored pairs, hence exactly zero.
    pub fn mean(&self) -> f64 {
        let p = self.marginal();
        let n = p.len();
        (0..n / 2)
            .map(|i| self.alphabet[i] * p[i] + self.alphabet[n - 1 - i] * p[n - 1 - i])
            .sum()
    }

    /// The matrix itself, `exp(log_scale)` times the stored entries.
    pub fn entries(&self) -> DMatrix<f64> {
        self.entries.map(|e| e * self.log_scale.exp())
    }

    pub fn scaled_entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn alphabet(&self) -> &[f64] {
        &self.alphabet
    }

    /// Eigenvalues of the scaled matrix, decreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `(lambda_j / lambda_1)^p`.
    fn ratio_pow(&self, j: usize, p: usize) -> f64 {
        (self.eigenvalues[j] / self.eigenvalues[0]).powi(p as i32)
    }

    /// `sum_j (lambda_j / lambda_1)^s`.
    fn trace_ratio(&self, s: usize) -> f64 {
        (0..self.eigenvalues.len()).map(|j| self.ratio_pow(j, s)).sum()
    }

    /// `log trace(T^s)`.
    pub fn log_partition_periodic(&self) -> f64 {
        let s = self.n_blocks;
        s as f64 * (self.log_scale + self.eigenvalues[0].ln()) + self.trace_ratio(s).ln()
    }

    /// `log Z` for an open chain of `s` blocks (no wrap-around bond).
    pub fn log_partition_free(&self) -> f64 {
        let s = self.n_blocks;
        let b = self.block_size as f64;
        let u = DVector::from_iterator(
            self.alphabet.len(),
            self.alphabet
                .iter()
                .zip(&self.log_weights)
                .map(|(&m, &w)| (0.5 * w + 0.25 * b * self.beta * m * m).exp()),
        );
        let mut v = u.clone();
        for _ in 1..s {
            v = &self.entries * v;
        }
        (s - 1) as f64 * self.log_scale + u.dot(&v).ln()
    }

    /// `P(m_k = a)` for every letter; the same for every `k`.
    pub fn marginal(&self) -> Vec<f64> {
        let s = self.n_blocks;
        let z = self.trace_ratio(s);
        (0..self.alphabet.len())
            .map(|a| {
                (0..self.eigenvalues.len())
                    .map(|j| self.ratio_pow(j, s) * self.eigenvectors[(a, j)].powi(2))
                    .sum::<f64>()
                    / z
            })
            .collect()
    }

    /// `<v_i, diag(m) v_j>`.
    fn coupling(&self, i: usize, j: usize) -> f64 {
        (0..self.alphabet.len())
            .map(|a| self.eigenvectors[(a, i)] * self.alphabet[a] * self.eigenvectors[(a, j)])
            .sum()
    }

    fn coupling_matrix(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.alphabet));
        self.eigenvectors.transpose() * d * &self.eigenvectors
    }

    /// `E[m_k m_{k+r}]` on the periodic chain.
    pub fn two_point(&self, r: usize) -> f64 {
        self.two_point_with(&self.coupling_matrix(), r % self.n_blocks)
    }

    /// `E[m_0 m_r]` for `r = 0..s`.
    pub fn two_point_profile(&self) -> Vec<f64> {
        let c = self.coupling_matrix();
        (0..self.n_blocks).map(|r| self.two_point_with(&c, r)).collect()
    }

    fn two_point_with(&self, c: &DMatrix<f64>, r: usize) -> f64 {
        let s = self.n_blocks;
        let n = self.eigenvalues.len();
        let left: Vec<f64> = (0..n).map(|i| self.ratio_pow(i, r)).collect();
        let right: Vec<f64> = (0..n).map(|j| self.ratio_pow(j, s - r)).collect();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += left[i] * right[j] * c[(i, j)].powi(2);
            }
        }
        acc / self.trace_ratio(s)
    }

    /// `lim_{s -> inf} E[m_0 m_r] = sum_{j >= 2} <v_1, D v_j>^2 (lambda_j / lambda_1)^r`.
    pub fn two_point_infinite(&self, r: usize) -> f64 {
        (1..self.eigenvalues.len())
            .map(|j| self.coupling(0, j).powi(2) * self.ratio_pow(j, r))
            .sum()
    }

    /// `sum_{r in Z} lim_s Cov(m_0, m_r)`, the per-block variance of the
    /// total magnetization on the infinite chain.
    pub fn variance_per_block_infinite(&self) -> f64 {
        (1..self.eigenvalues.len())
            .map(|j| {
                let rho = self.eigenvalues[j] / self.eigenvalues[0];
                self.coupling(0, j).powi(2) * (1.0 + rho) / (1.0 - rho)
            })
            .sum()
    }

    /// Second largest eigenvalue modulus relative to the top one.
    pub fn gap_ratio(&self) -> f64 {
        if self.eigenvalues.len() < 2 {
            return 0.0;
        }
        let l2 = self.eigenvalues[1..]
            .iter()
            .map(|l| l.abs())
            .fold(0.0, f64::max);
        l2 / self.eigenvalues[0]
    }

    /// Probability that every cyclically adjacent pair `(m_k, m_{k+1})`
    /// satisfies `allowed`, which must be symmetric in its arguments.
    pub fn constrained_probability(&self, allowed: impl Fn(f64, f64) -> bool) -> f64 {
        let n = self.alphabet.len();
        let masked = DMatrix::from_fn(n, n, |i, j| {
            if allowed(self.alphabet[i], self.alphabet[j]) {
                self.entries[(i, j)]
            } else {
                0.0
            }
        });
        let s = self.n_blocks as i32;
        let top = self.eigenvalues[0];
        let restricted: f64 = SymmetricEigen::new(masked)
            .eigenvalues
            .iter()
            .map(|mu| (mu / top).powi(s))
            .sum();
        (restricted / self.trace_ratio(self.n_blocks)).clamp(0.0, 1.0)
    }

    /// `P(m_k in letters for every k)`.
    pub fn all_blocks_in(&self, letters: impl Fn(f64) -> bool) -> f64 {
        self.constrained_probability(|a, b| letters(a) && letters(b))
    }

    pub fn write_marginal_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "m,probability")?;
        for (a, p) in self.alphabet.iter().zip(self.marginal()) {
            writeln!(w, "{a},{p}")?;
        }
        Ok(())
    }

    pub fn write_two_point_csv<W: Write>(&self, mut w: W, max_distance: usize) -> std::io::Result<()> {
        writeln!(w, "distance,two_point,two_point_infinite")?;
        let c = self.coupling_matrix();
        for r in 0..=max_distance {
            let finite = self.two_point_with(&c, r % self.n_blocks);
            writeln!(w, "{r},{finite},{}", self.two_point_infinite(r))?;
        }
        Ok(())
    }
}

pub fn chain_marginal(chain: &ChainSpec) -> Vec<f64> {
    build_transfer_matrix(chain).marginal()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalMagnetizationStats {
    /// `E[(1/s) sum_k m_k]`.
    pub mean: f64,
    /// `s Var((1/s) sum_k m_k)`.
    pub variance_per_block: f64,
    /// `1 / log(lambda_1 / |lambda_2|)`.
    pub correlation_length: f64,
    pub lambda_ratio: f64,
}

pub fn total_magnetization_stats(chain: &ChainSpec) -> TotalMagnetizationStats {
    let tm = build_transfer_matrix(chain);
    let mean = tm.mean();
    let s = chain.n_blocks;
    let variance_per_block = tm.two_point_profile().iter().sum::<f64>() - s as f64 * mean * mean;
    let ratio = tm.gap_ratio();
    TotalMagnetizationStats {
        mean,
        variance_per_block,
        correlation_length: 1.0 / (1.0 / ratio).ln(),
        lambda_ratio: ratio,
    }
}
