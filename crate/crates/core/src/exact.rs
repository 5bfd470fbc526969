//! Exact finite-size laws by enumeration of the magnetization lattice.
//!
//! A state is the vector of per-block plus counts `c_k in 0..=B`. States are
//! indexed in mixed radix, `index = sum_k c_k (B + 1)^k`, so block 0 is the
//! fastest digit and the global spin flip maps index `i` to `len - 1 - i`.
//!
//! The energy is accumulated in integers: with `j_k = 2 c_k - B`,
//! `H = (beta sum_k j_k^2 + 2 alpha sum_k j_k j_{k+1}) / (2 B)`, which keeps
//! mirrored states bit-identical.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::landscape::phi;
use crate::model::{hamiltonian_spins, lattice_value, log_prior_table, MagnetizationVector, ModelParams};

/// Streaming enumeration budget, in states.
pub const DEFAULT_BUDGET: u128 = 100_000_000;
/// Budget for laws that keep every state in memory.
pub const MATERIALIZE_BUDGET: u128 = 10_000_000;

/// Number of lattice states, `(B + 1)^s`.
pub fn state_count(params: &ModelParams) -> u128 {
    (params.block_size() as u128 + 1).saturating_pow(params.n_blocks as u32)
}

fn check_budget(params: &ModelParams, budget: u128) -> Result<usize> {
    let states = state_count(params);
    if states > budget {
        return Err(Error::BudgetExceeded { states, budget });
    }
    Ok(states as usize)
}

/// Odometer over plus counts with the integer energy sums kept up to date.
struct Odometer {
    block_size: usize,
    counts: Vec<usize>,
    spins: Vec<i64>,
    sum_sq: i64,
    sum_cross: i64,
}

impl Odometer {
    fn new(block_size: usize, counts: Vec<usize>) -> Self {
        let spins: Vec<i64> = counts
            .iter()
            .map(|&c| 2 * c as i64 - block_size as i64)
            .collect();
        let mut od = Self {
            block_size,
            counts,
            spins,
            sum_sq: 0,
            sum_cross: 0,
        };
        od.sum_sq = od.spins.iter().map(|j| j * j).sum();
        od.sum_cross = od.full_cross();
        od
    }

    fn full_cross(&self) -> i64 {
        let s = self.spins.len();
        (0..s).map(|k| self.spins[k] * self.spins[(k + 1) % s]).sum()
    }

    fn set(&mut self, k: usize, c: usize) {
        let s = self.spins.len();
        let old = self.spins[k];
        let new = 2 * c as i64 - self.block_size as i64;
        self.counts[k] = c;
        self.sum_sq += new * new - old * old;
        if s >= 3 {
            let nb = self.spins[(k + s - 1) % s] + self.spins[(k + 1) % s];
            self.sum_cross += (new - old) * nb;
            self.spins[k] = new;
        } else {
            self.spins[k] = new;
            self.sum_cross = self.full_cross();
        }
    }

    /// Advances the first `digits` blocks; returns false after the last state.
    fn advance(&mut self, digits: usize) -> bool {
        for k in 0..digits {
            if self.counts[k] < self.block_size {
                self.set(k, self.counts[k] + 1);
                return true;
            }
            self.set(k, 0);
        }
        false
    }

    fn log_weight(&self, beta: f64, alpha: f64, prior: &[f64]) -> f64 {
        let energy = (beta * self.sum_sq as f64 + 2.0 * alpha * self.sum_cross as f64)
            / (2.0 * self.block_size as f64);
        energy + self.counts.iter().map(|&c| prior[c]).sum::<f64>()
    }
}

/// Enumerates log-weights of all states with leading (slowest) digit `lead`,
/// in index order.
fn for_each_with_lead(params: &ModelParams, lead: usize, mut f: impl FnMut(f64)) {
    let s = params.n_blocks;
    let b = params.block_size();
    let prior = log_prior_table(b);
    let mut counts = vec![0; s];
    counts[s - 1] = lead;
    let mut od = Odometer::new(b, counts);
    loop {
        f(od.log_weight(params.beta, params.alpha, &prior));
        if !od.advance(s - 1) {
            break;
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    const EMPTY: Self = Self {
        max: f64::NEG_INFINITY,
        sum: 0.0,
    };

    fn push(&mut self, x: f64) {
        if x > self.max {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        } else {
            self.sum += (x - self.max).exp();
        }
    }

    fn merge(self, other: Self) -> Self {
        if self.max == f64::NEG_INFINITY {
            return other;
        }
        if other.max == f64::NEG_INFINITY {
            return self;
        }
        let max = self.max.max(other.max);
        Self {
            max,
            sum: self.sum * (self.max - max).exp() + other.sum * (other.max - max).exp(),
        }
    }

    fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// `log Z` by streaming enumeration, parallel over the leading block.
pub fn log_partition(params: &ModelParams, budget: u128) -> Result<f64> {
    check_budget(params, budget)?;
    let b = params.block_size();
    let acc = (0..=b)
        .into_par_iter()
        .map(|lead| {
            let mut acc = LogSumExp::EMPTY;
            for_each_with_lead(params, lead, |w| acc.push(w));
            acc
        })
        .reduce(|| LogSumExp::EMPTY, LogSumExp::merge);
    Ok(acc.value())
}

/// The exact law of the block magnetization vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    block_size: usize,
    n_blocks: usize,
    /// States kept, by mixed-radix index.
    indices: Vec<u64>,
    log_probs: Vec<f64>,
    log_z: f64,
}

/// Enumerates the full law within [`MATERIALIZE_BUDGET`].
pub fn exact_law(params: &ModelParams) -> Result<ExactLaw> {
    exact_law_with_budget(params, MATERIALIZE_BUDGET)
}

pub fn exact_law_with_budget(params: &ModelParams, budget: u128) -> Result<ExactLaw> {
    let states = check_budget(params, budget)?;
    let b = params.block_size();
    let chunks: Vec<Vec<f64>> = (0..=b)
        .into_par_iter()
        .map(|lead| {
            let mut out = Vec::with_capacity(states / (b + 1));
            for_each_with_lead(params, lead, |w| out.push(w));
            out
        })
        .collect();
    let mut log_weights = Vec::with_capacity(states);
    for c in chunks {
        log_weights.extend(c);
    }
    Ok(ExactLaw::from_log_weights(b, params.n_blocks, log_weights))
}

impl ExactLaw {
    fn from_log_weights(block_size: usize, n_blocks: usize, log_weights: Vec<f64>) -> Self {
        let mut acc = LogSumExp::EMPTY;
        log_weights.iter().for_each(|&w| acc.push(w));
        let log_z = acc.value();
        Self {
            block_size,
            n_blocks,
            indices: (0..log_weights.len() as u64).collect(),
            log_probs: log_weights.into_iter().map(|w| w - log_z).collect(),
            log_z,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn n_blocks(&self) -> usize {
        self.n_blocks
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    /// Log partition function, normalised against the symmetric Bernoulli
    /// reference measure (so `Z >= 1` when `A` is positive definite).
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.log_probs.iter().map(|l| l.exp())
    }

    /// Mixed-radix index of state `i`.
    pub fn state_index(&self, i: usize) -> u64 {
        self.indices[i]
    }

    pub fn counts(&self, i: usize) -> Vec<usize> {
        decode(self.indices[i], self.block_size, self.n_blocks)
    }

    pub fn magnetization(&self, i: usize) -> MagnetizationVector {
        let values = self
            .counts(i)
            .into_iter()
            .map(|c| lattice_value(self.block_size, c))
            .collect();
        MagnetizationVector::new(values).expect("lattice values lie in [-1, 1]")
    }

    fn magnetization_into(&self, i: usize, out: &mut [f64]) {
        let mut idx = self.indices[i];
        let radix = self.block_size as u64 + 1;
        for v in out.iter_mut() {
            *v = lattice_value(self.block_size, (idx % radix) as usize);
            idx /= radix;
        }
    }

    /// Probability of the state with the given mixed-radix index.
    pub fn probability_of_index(&self, index: u64) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(i) => self.log_probs[i].exp(),
            Err(_) => 0.0,
        }
    }

    /// Total variation distance to a law with the same lattice.
    pub fn total_variation(&self, other: &ExactLaw) -> Result<f64> {
        if self.block_size != other.block_size || self.n_blocks != other.n_blocks {
            return Err(Error::InvalidParams("laws live on different lattices".into()));
        }
        let mut tv = 0.0;
        let (mut i, mut j) = (0, 0);
        while i < self.len() || j < other.len() {
            let a = self.indices.get(i).copied().unwrap_or(u64::MAX);
            let b = other.indices.get(j).copied().unwrap_or(u64::MAX);
            if a == b {
                tv += (self.log_probs[i].exp() - other.log_probs[j].exp()).abs();
                i += 1;
                j += 1;
            } else if a < b {
                tv += self.log_probs[i].exp();
                i += 1;
            } else {
                tv += other.log_probs[j].exp();
                j += 1;
            }
        }
        Ok(0.5 * tv)
    }

    /// Law of block `k` over the lattice `0..=B` of plus counts.
    pub fn marginal(&self, k: usize) -> Vec<f64> {
        let radix = self.block_size as u64 + 1;
        let stride = radix.pow(k as u32);
        let mut out = vec![0.0; self.block_size + 1];
        for (idx, lp) in self.indices.iter().zip(&self.log_probs) {
            out[((idx / stride) % radix) as usize] += lp.exp();
        }
        out
    }

    /// Law of the total counts, i.e. of `sum_k c_k`, over `0..=N`.
    pub fn total_count_law(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.block_size * self.n_blocks + 1];
        for i in 0..self.len() {
            let total: usize = self.counts(i).iter().sum();
            out[total] += self.log_probs[i].exp();
        }
        out
    }

    /// Writes `m_1..m_s,log_prob` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (1..=self.n_blocks).map(|k| format!("m_{k}")).collect();
        writeln!(w, "{},log_prob", header.join(","))?;
        let mut m = vec![0.0; self.n_blocks];
        for i in 0..self.len() {
            self.magnetization_into(i, &mut m);
            for v in &m {
                write!(w, "{v},")?;
            }
            writeln!(w, "{}", self.log_probs[i])?;
        }
        Ok(())
    }
}

fn decode(mut index: u64, block_size: usize, n_blocks: usize) -> Vec<usize> {
    let radix = block_size as u64 + 1;
    (0..n_blocks)
        .map(|_| {
            let c = (index % radix) as usize;
            index /= radix;
            c
        })
        .collect()
}

/// Mixed-radix index of a count vector.
pub fn encode(counts: &[usize], block_size: usize) -> u64 {
    let radix = block_size as u64 + 1;
    counts.iter().rev().fold(0u64, |acc, &c| acc * radix + c as u64)
}

/// Mean and covariance of the first `d` coordinates of `m`.
pub fn exact_moments(law: &ExactLaw, d: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if d > law.n_blocks {
        return Err(Error::IndexOutOfRange {
            index: d,
            size: law.n_blocks,
        });
    }
    let mut mean = vec![0.0; d];
    let mut second = DMatrix::<f64>::zeros(d, d);
    let mut m = vec![0.0; law.n_blocks];
    for i in 0..law.len() {
        let p = law.log_probs[i].exp();
        law.magnetization_into(i, &mut m);
        for a in 0..d {
            mean[a] += p * m[a];
            for b in 0..d {
                second[(a, b)] += p * m[a] * m[b];
            }
        }
    }
    let cov = DMatrix::from_fn(d, d, |a, b| second[(a, b)] - mean[a] * mean[b]);
    Ok((mean, cov))
}

/// Restricts the law to the Euclidean ball `|m - center| <= radius`.
pub fn conditional_law(law: &ExactLaw, center: &[f64], radius: f64) -> Result<ExactLaw> {
    if center.len() != law.n_blocks {
        return Err(Error::DimensionMismatch {
            expected: law.n_blocks,
            actual: center.len(),
        });
    }
    if !(radius > 0.0) {
        return Err(Error::Domain {
            what: "conditioning",
            condition: format!("a positive radius, got {radius}"),
        });
    }
    let r2 = radius * radius;
    let mut m = vec![0.0; law.n_blocks];
    let mut indices = Vec::new();
    let mut log_probs = Vec::new();
    for i in 0..law.len() {
        law.magnetization_into(i, &mut m);
        let d2: f64 = m.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
        if d2 <= r2 {
            indices.push(law.indices[i]);
            log_probs.push(law.log_probs[i]);
        }
    }
    if indices.is_empty() {
        return Err(Error::EmptyConditioning);
    }
    let mut acc = LogSumExp::EMPTY;
    log_probs.iter().for_each(|&l| acc.push(l));
    let log_mass = acc.value();
    Ok(ExactLaw {
        block_size: law.block_size,
        n_blocks: law.n_blocks,
        indices,
        log_probs: log_probs.into_iter().map(|l| l - log_mass).collect(),
        log_z: law.log_z + log_mass,
    })
}

/// The law of `m` by brute force over all `2^N` spin configurations,
/// through [`hamiltonian_spins`]. Independent of the lattice kernel above.
pub fn brute_force_law(params: &ModelParams) -> Result<ExactLaw> {
    let n = params.n_spins;
    if n > 26 {
        return Err(Error::BudgetExceeded {
            states: 1u128 << n,
            budget: 1 << 26,
        });
    }
    let b = params.block_size();
    let radix = b + 1;
    let states = radix.pow(params.n_blocks as u32);
    let mut weight = vec![0.0f64; states];
    let mut sigma = vec![-1i8; n];
    let mut max_h = f64::NEG_INFINITY;
    let mut energies = Vec::with_capacity(1 << n);
    for code in 0u64..(1u64 << n) {
        for (i, s) in sigma.iter_mut().enumerate() {
            *s = if code >> i & 1 == 1 { 1 } else { -1 };
        }
        let h = hamiltonian_spins(params, &sigma)?;
        max_h = max_h.max(h);
        let counts: Vec<usize> = sigma
            .chunks(b)
            .map(|blk| blk.iter().filter(|&&x| x > 0).count())
            .collect();
        energies.push((encode(&counts, b) as usize, h));
    }
    for (idx, h) in energies {
        weight[idx] += (h - max_h).exp();
    }
    let total: f64 = weight.iter().sum();
    let log_z = max_h + total.ln() - n as f64 * std::f64::consts::LN_2;
    Ok(ExactLaw {
        block_size: b,
        n_blocks: params.n_blocks,
        indices: (0..states as u64).collect(),
        log_probs: weight.iter().map(|w| (w / total).ln()).collect(),
        log_z,
    })
}

/// How the normaliser of the Hubbard–Stratonovich density is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HsNormalization {
    /// Trapezoidal quadrature with `points` nodes per axis; `s <= 2` only.
    Quadrature { points: usize },
    /// Fix the normaliser by matching both sides at the origin and compare ratios.
    MatchAtOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsDensityCheck {
    pub lhs: f64,
    pub rhs: f64,
}

/// Density at each `x` of `sqrt(B) m + Z`, `Z ~ N(0, A^{-1})`, by exact
/// Gaussian mixture (`lhs`) and by `exp(-B phi(x / sqrt(B))) / z` (`rhs`).
pub fn hs_density_check(
    params: &ModelParams,
    points: &[Vec<f64>],
    normalization: HsNormalization,
) -> Result<Vec<HsDensityCheck>> {
    let spec = params.spec();
    if !spec.is_positive_definite() {
        return Err(Error::Domain {
            what: "the Hubbard–Stratonovich density",
            condition: "a positive definite interaction matrix".into(),
        });
    }
    let law = exact_law(params)?;
    let s = params.n_blocks;
    let sqrt_b = (params.block_size() as f64).sqrt();
    let log_det: f64 = spec.eigenvalues().iter().map(|l| l.ln()).sum();
    let log_norm = 0.5 * log_det - 0.5 * s as f64 * (2.0 * std::f64::consts::PI).ln();

    let centers: Vec<Vec<f64>> = (0..law.len())
        .map(|i| {
            law.magnetization(i)
                .values()
                .iter()
                .map(|v| v * sqrt_b)
                .collect()
        })
        .collect();
    let mixture = |x: &[f64]| -> Result<f64> {
        if x.len() != s {
            return Err(Error::DimensionMismatch {
                expected: s,
                actual: x.len(),
            });
        }
        let mut acc = LogSumExp::EMPTY;
        let mut diff = vec![0.0; s];
        for (c, lp) in centers.iter().zip(law.log_probs()) {
            for k in 0..s {
                diff[k] = x[k] - c[k];
            }
            acc.push(lp + log_norm - 0.5 * spec.quadratic_form(&diff));
        }
        Ok(acc.value().exp())
    };
    let b = params.block_size() as f64;
    let unnormalized = |x: &[f64]| -> Result<f64> {
        let y: Vec<f64> = x.iter().map(|v| v / sqrt_b).collect();
        Ok((-b * phi(&spec, &y)?).exp())
    };

    let z = match normalization {
        HsNormalization::Quadrature { points: n } => {
            if s > 2 {
                return Err(Error::Domain {
                    what: "quadrature normalisation",
                    condition: format!("at most two blocks, got {s}"),
                });
            }
            let half = sqrt_b + 14.0 / spec.min_eigenvalue().sqrt();
            let h = 2.0 * half / (n - 1) as f64;
            let node = |i: usize| -half + i as f64 * h;
            let mut total = 0.0;
            if s == 1 {
                for i in 0..n {
                    let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    total += w * unnormalized(&[node(i)])?;
                }
                total * h
            } else {
                for i in 0..n {
                    let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
                    for j in 0..n {
                        let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
                        total += wi * wj * unnormalized(&[node(i), node(j)])?;
                    }
                }
                total * h * h
            }
        }
        HsNormalization::MatchAtOrigin => unnormalized(&vec![0.0; s])? / mixture(&vec![0.0; s])?,
    };

    points
        .iter()
        .map(|x| {
            Ok(HsDensityCheck {
                lhs: mixture(x)?,
                rhs: unnormalized(x)? / z,
            })
        })
        .collect()
}
