//! The cyclic interaction matrix `A` and its closed forms: spectrum,
//! the lattice Green's function `(I - A)^{-1}`, the limiting covariances and
//! the discrete Poisson identity behind them.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::landscape::solve_m_star;
use crate::model::ModelParams;

/// Symmetric circulant with diagonal `diag` and cyclic neighbour coupling `off`.
///
/// For `size >= 3` the first row is `(diag, off, 0, .., 0, off)`. For
/// `size == 2` the two neighbour couplings land on the same entry, giving
/// `[[diag, 2 off], [2 off, diag]]`, and for `size == 1` the matrix is the
/// scalar `diag + 2 off`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirculantSpec {
    pub size: usize,
    pub diag: f64,
    pub off: f64,
}

impl CirculantSpec {
    pub fn new(size: usize, diag: f64, off: f64) -> Self {
        assert!(size >= 1, "circulant size must be positive");
        Self { size, diag, off }
    }

    /// The same pattern with both couplings multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self::new(self.size, self.diag * factor, self.off * factor)
    }

    /// `A x` from the first row, `O(s)`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let s = self.size;
        assert_eq!(x.len(), s, "dimension mismatch in circulant apply");
        (0..s)
            .map(|k| self.diag * x[k] + self.off * (x[(k + s - 1) % s] + x[(k + 1) % s]))
            .collect()
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let s = self.size;
        let mut diag = 0.0;
        let mut cross = 0.0;
        for k in 0..s {
            diag += x[k] * x[k];
            cross += x[k] * x[(k + 1) % s];
        }
        self.diag * diag + 2.0 * self.off * cross
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let s = self.size;
        let mut a = DMatrix::zeros(s, s);
        for k in 0..s {
            a[(k, k)] += self.diag;
            a[(k, (k + 1) % s)] += self.off;
            a[(k, (k + s - 1) % s)] += self.off;
        }
        a
    }

    /// `lambda_j = diag + 2 off cos(2 pi j / s)`, `j = 1..=s`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let s = self.size as f64;
        (1..=self.size)
            .map(|j| self.diag + 2.0 * self.off * (2.0 * PI * j as f64 / s).cos())
            .collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute eigenvalue; `diag + 2 |off|` for nonnegative `diag`.
    pub fn spectral_norm(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.min_eigenvalue() > 0.0
    }

    /// Spectrum of `A - A^2`, the Hessian of the free-energy function at 0.
    /// Note the constant `-2 alpha^2` coming from `cos^2 = (1 + cos 2t) / 2`.
    pub fn hessian_at_zero_eigenvalues(&self) -> Vec<f64> {
        let (b, a) = (self.diag, self.off);
        let s = self.size as f64;
        (1..=self.size)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / s;
                b - b * b - 2.0 * a * a + (2.0 * a - 4.0 * a * b) * t.cos()
                    - 2.0 * a * a * (2.0 * t).cos()
            })
            .collect()
    }

    /// Entry `(i, j)` (0-based) of `(I - A)^{-1}` in closed form.
    pub fn inverse_i_minus_a_entry(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        let g = GreenFunction::new(self.diag, self.off)?;
        Ok(g.finite_entry(self.size, i.abs_diff(j)))
    }

    /// The full `(I - A)^{-1}` assembled from the closed form.
    pub fn inverse_i_minus_a(&self) -> Result<DMatrix<f64>> {
        let g = GreenFunction::new(self.diag, self.off)?;
        let s = self.size;
        let row: Vec<f64> = (0..s).map(|d| g.finite_entry(s, d)).collect();
        Ok(DMatrix::from_fn(s, s, |i, j| row[i.abs_diff(j)]))
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.size {
            return Err(Error::IndexOutOfRange {
                index: i,
                size: self.size,
            });
        }
        Ok(())
    }
}

/// Closed form of `(I - M)^{-1}` for a cyclic `M` with couplings `(b, a)`.
///
/// With `D = (1 - b)^2 - 4 a^2` and `kappa = ((1 - b) - sqrt(D)) / (2 a)`,
/// the entries are `(kappa^d + kappa^{s - d}) / ((1 - kappa^s) sqrt(D))` with
/// `d = |i - j|`, and tend to `kappa^d / sqrt(D)` as `s` grows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenFunction {
    pub kappa: f64,
    pub sqrt_disc: f64,
}

impl GreenFunction {
    pub fn new(b: f64, a: f64) -> Result<Self> {
        if !(b + 2.0 * a.abs() < 1.0) {
            return Err(Error::Domain {
                what: "the closed-form inverse of I - A",
                condition: format!("diag + 2 |off| < 1, got {}", b + 2.0 * a.abs()),
            });
        }
        let sqrt_disc = ((1.0 - b).powi(2) - 4.0 * a * a).sqrt();
        // Minus branch of the quadratic, rationalised so that a = 0 gives 0.
        let kappa = 2.0 * a / ((1.0 - b) + sqrt_disc);
        Ok(Self { kappa, sqrt_disc })
    }

    pub fn finite_entry(&self, size: usize, distance: usize) -> f64 {
        let d = distance % size;
        let k = self.kappa;
        (k.powi(d as i32) + k.powi((size - d) as i32)) / ((1.0 - k.powi(size as i32)) * self.sqrt_disc)
    }

    pub fn limit_entry(&self, distance: usize) -> f64 {
        self.kappa.powi(distance as i32) / self.sqrt_disc
    }
}

/// Geometric decay rates of the two Green's functions and `m*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaConstants {
    /// Decay of `(I - A)^{-1}`; defined when `beta + 2 alpha < 1`.
    pub kappa1: Option<f64>,
    /// Decay of `(I - (1 - m*^2) A)^{-1}`; defined when `beta + 2 alpha > 1`.
    pub kappa5: Option<f64>,
    pub m_star: f64,
}

impl KappaConstants {
    pub fn compute(params: &ModelParams) -> Self {
        let m_star = solve_m_star(params.theta());
        let kappa1 = GreenFunction::new(params.beta, params.alpha)
            .ok()
            .map(|g| g.kappa);
        let kappa5 = if params.theta() > 1.0 {
            let q = 1.0 - m_star * m_star;
            GreenFunction::new(params.beta * q, params.alpha * q)
                .ok()
                .map(|g| g.kappa)
        } else {
            None
        };
        Self {
            kappa1,
            kappa5,
            m_star,
        }
    }
}

/// `lim_{s -> inf} (I - A)^{-1}_{ij} = kappa1^{|i-j|} / sqrt((1 - beta)^2 - 4 alpha^2)`.
pub fn sigma_limit_entry(params: &ModelParams, i: usize, j: usize) -> Result<f64> {
    Ok(GreenFunction::new(params.beta, params.alpha)?.limit_entry(i.abs_diff(j)))
}

fn phase_green(params: &ModelParams, m_star: f64) -> Result<(f64, GreenFunction)> {
    let theta = params.theta();
    if !(theta > 1.0) {
        return Err(Error::Domain {
            what: "the low-temperature covariance",
            condition: format!("beta + 2 alpha > 1, got {theta}"),
        });
    }
    if !(m_star.abs() < 1.0) {
        return Err(Error::Domain {
            what: "the low-temperature covariance",
            condition: format!("|m*| < 1, got {m_star}"),
        });
    }
    let q = 1.0 - m_star * m_star;
    let g = GreenFunction::new(params.beta * q, params.alpha * q).map_err(|_| Error::Domain {
        what: "the low-temperature covariance",
        condition: format!(
            "(1 - beta q)^2 > 4 alpha^2 q^2 with q = 1 - m*^2 = {q}"
        ),
    })?;
    Ok((q, g))
}

/// `Sigma*_{ij} = q kappa5^{|i-j|} / sqrt((1 - beta q)^2 - 4 alpha^2 q^2)`, `q = 1 - m*^2`.
pub fn sigma_star_entry(params: &ModelParams, m_star: f64, i: usize, j: usize) -> Result<f64> {
    let (q, g) = phase_green(params, m_star)?;
    Ok(q * g.limit_entry(i.abs_diff(j)))
}

/// Finite-`s` counterpart `q (I - q A)^{-1}_{ij}` of [`sigma_star_entry`].
pub fn sigma_star_finite_entry(
    params: &ModelParams,
    m_star: f64,
    i: usize,
    j: usize,
) -> Result<f64> {
    let (q, g) = phase_green(params, m_star)?;
    let s = params.n_blocks;
    if i >= s || j >= s {
        return Err(Error::IndexOutOfRange {
            index: i.max(j),
            size: s,
        });
    }
    Ok(q * g.finite_entry(s, i.abs_diff(j)))
}

/// Both sides of the discrete Poisson identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonCheck {
    pub lhs_re: f64,
    pub lhs_im: f64,
    pub rhs: f64,
}

/// `(1/s) sum_l e^{2 pi i l m / s} / (1 - 2 r cos(2 pi l / s) + r^2)` against
/// `(r^m + r^{s-m}) / ((1 - r^2)(1 - r^s))`.
pub fn discrete_poisson_check(r: f64, s: usize, m: usize) -> Result<PoissonCheck> {
    if !(r > 0.0 && r < 1.0) || m >= s {
        return Err(Error::Domain {
            what: "the discrete Poisson identity",
            condition: format!("0 < r < 1 and 0 <= m < s, got r = {r}, m = {m}, s = {s}"),
        });
    }
    let sf = s as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for l in 0..s {
        let t = 2.0 * PI * l as f64 / sf;
        let denom = 1.0 - 2.0 * r * t.cos() + r * r;
        let phase = t * m as f64;
        re += phase.cos() / denom;
        im += phase.sin() / denom;
    }
    let rhs = (r.powi(m as i32) + r.powi((s - m) as i32)) / ((1.0 - r * r) * (1.0 - r.powi(s as i32)));
    Ok(PoissonCheck {
        lhs_re: re / sf,
        lhs_im: im / sf,
        rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn sorted(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn eigenvalue_example() {
        let spec = CirculantSpec::new(4, 0.5, 0.2);
        let ev = spec.eigenvalues();
        for (got, want) in ev.iter().zip([0.5, 0.1, 0.5, 0.9]) {
            assert!((got - want).abs() < 1e-12);
        }
        let dense = sorted(SymmetricEigen::new(spec.dense()).eigenvalues.as_slice().to_vec());
        for (a, b) in sorted(ev).iter().zip(&dense) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn small_size_conventions() {
        let two = CirculantSpec::new(2, 0.5, 0.2).dense();
        assert_eq!(two[(0, 1)], 0.4);
        assert_eq!(two[(0, 0)], 0.5);
        let one = CirculantSpec::new(1, 0.5, 0.2).dense();
        assert!((one[(0, 0)] - 0.9).abs() < 1e-15);
        assert!((CirculantSpec::new(1, 0.5, 0.2).eigenvalues()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_coupling_and_minimum() {
        assert!(CirculantSpec::new(7, 0.3, 0.0)
            .eigenvalues()
            .iter()
            .all(|&l| l == 0.3));
        for s in [2, 4, 10, 64] {
            let spec = CirculantSpec::new(s, 0.8, 0.25);
            assert!((spec.min_eigenvalue() - 0.3).abs() < 1e-12);
            assert!((spec.spectral_norm() - 1.3).abs() < 1e-12);
        }
    }

    #[test]
    fn kappa1_and_diagonal() {
        let g = GreenFunction::new(0.4, 0.1).unwrap();
        let expected = (0.6 - 0.32f64.sqrt()) / 0.2;
        assert!((g.kappa - expected).abs() < 1e-14);
        assert!((g.kappa - 0.171_572_875_253_809_9).abs() < 1e-12);
        assert!((g.limit_entry(0) - 1.0 / 0.32f64.sqrt()).abs() < 1e-14);
        assert!((g.finite_entry(512, 0) - 1.767_766_952_966_368_8).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_lu() {
        for s in [1usize, 2, 3, 5, 8, 33] {
            let spec = CirculantSpec::new(s, 0.4, 0.1);
            let lu = (DMatrix::identity(s, s) - spec.dense()).try_inverse().unwrap();
            let closed = spec.inverse_i_minus_a().unwrap();
            assert!((lu - &closed).amax() < 1e-12, "s = {s}");
            for i in 0..s {
                for j in 0..s {
                    let e = spec.inverse_i_minus_a_entry(i, j).unwrap();
                    assert_eq!(e, spec.inverse_i_minus_a_entry(j, i).unwrap());
                    assert_eq!(e, closed[(0, (j + s - i) % s)]);
                }
            }
        }
    }

    #[test]
    fn independent_block_limit() {
        let spec = CirculantSpec::new(6, 0.4, 0.0);
        assert!((spec.inverse_i_minus_a_entry(2, 2).unwrap() - 1.0 / 0.6).abs() < 1e-14);
        assert_eq!(spec.inverse_i_minus_a_entry(1, 2).unwrap(), 0.0);
        let tiny = CirculantSpec::new(6, 0.4, 1e-9);
        assert!(tiny.inverse_i_minus_a_entry(0, 1).unwrap().abs() < 1e-8);
    }

    #[test]
    fn inverse_requires_high_temperature() {
        let spec = CirculantSpec::new(5, 0.8, 0.25);
        assert!(matches!(
            spec.inverse_i_minus_a_entry(0, 0),
            Err(Error::Domain { .. })
        ));
        assert!(spec.inverse_i_minus_a_entry(0, 5).is_err());
    }

    #[test]
    fn limit_converges_from_finite() {
        let p = ModelParams::new(0.4, 0.1, 64, 64).unwrap();
        let g = GreenFunction::new(0.4, 0.1).unwrap();
        for j in 0..6 {
            let lim = sigma_limit_entry(&p, 0, j).unwrap();
            if j > 0 {
                let prev = sigma_limit_entry(&p, 0, j - 1).unwrap();
                assert!((lim / prev - g.kappa).abs() < 1e-12);
            }
            for s in [16usize, 32, 64] {
                let finite = g.finite_entry(s, j);
                assert!((finite - lim).abs() <= 2.0 * g.kappa.powi((s / 2) as i32) / g.sqrt_disc);
            }
        }
        // Cauchy sequence of dense inverses
        let dense_diag = |s: usize| {
            let spec = CirculantSpec::new(s, 0.4, 0.1);
            (DMatrix::identity(s, s) - spec.dense()).try_inverse().unwrap()[(0, 0)]
        };
        let (a, b, c) = (dense_diag(64), dense_diag(128), dense_diag(256));
        assert!((a - b).abs() < 1e-12 && (b - c).abs() < 1e-12);
        assert!((c - sigma_limit_entry(&p, 3, 3).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn sigma_star_matches_dense() {
        let p = ModelParams::new(0.8, 0.25, 128 * 4, 128).unwrap();
        let m = solve_m_star(1.3);
        let q = 1.0 - m * m;
        let spec = p.spec();
        let dense = (DMatrix::identity(128, 128) - spec.dense() * q).try_inverse().unwrap() * q;
        for j in 0..8 {
            let lim = sigma_star_entry(&p, m, 0, j).unwrap();
            let fin = sigma_star_finite_entry(&p, m, 0, j).unwrap();
            assert!((lim - dense[(0, j)]).abs() < 1e-8);
            assert!((fin - dense[(0, j)]).abs() < 1e-12);
        }
        assert!(sigma_star_entry(&p, 0.999_999, 0, 0).unwrap() < 1e-5);
        let hot = ModelParams::new(0.4, 0.1, 8, 8).unwrap();
        assert!(sigma_star_entry(&hot, 0.5, 0, 0).is_err());
    }

    #[test]
    fn sigma_star_block_is_positive_definite() {
        let p = ModelParams::new(0.8, 0.25, 60, 6).unwrap();
        let m = solve_m_star(1.3);
        for d in 1..=10 {
            let mat = DMatrix::from_fn(d, d, |i, j| sigma_star_entry(&p, m, i, j).unwrap());
            assert!(mat.cholesky().is_some(), "d = {d}");
        }
    }

    #[test]
    fn poisson_identity() {
        let c = discrete_poisson_check(0.5, 4, 0).unwrap();
        assert!((c.lhs_re - c.rhs).abs() < 1e-12);
        assert!(c.lhs_im.abs() < 1e-12);
        assert!(discrete_poisson_check(1.0, 4, 0).is_err());
        assert!(discrete_poisson_check(0.5, 4, 4).is_err());
    }

    #[test]
    fn geometric_series_identity() {
        for (r, s, l) in [(0.3f64, 5usize, 2usize), (0.7, 8, 3), (0.5, 4, 0)] {
            let t = 2.0 * PI * l as f64 / s as f64;
            let mut re = 0.0;
            for k in -200i32..=200 {
                re += r.powi(k.abs()) * (t * k as f64).cos();
            }
            let closed = (1.0 - r * r) / (1.0 - 2.0 * r * t.cos() + r * r);
            assert!((re - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_at_zero_matches_dense() {
        for (b, a, s) in [(0.5, 0.2, 6usize), (0.8, 0.25, 7), (0.6, 0.2, 8), (0.3, 0.1, 3)] {
            let spec = CirculantSpec::new(s, b, a);
            let m = spec.dense();
            let h = &m - &m * &m;
            let dense = sorted(SymmetricEigen::new(h).eigenvalues.as_slice().to_vec());
            let closed = sorted(spec.hessian_at_zero_eigenvalues());
            for (x, y) in dense.iter().zip(&closed) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        assert!(CirculantSpec::new(9, 0.5, 0.2)
            .hessian_at_zero_eigenvalues()
            .iter()
            .all(|&l| l > 0.0));
        assert!(CirculantSpec::new(9, 0.8, 0.25)
            .hessian_at_zero_eigenvalues()
            .iter()
            .any(|&l| l <= 0.0));
        let crit = CirculantSpec::new(8, 0.6, 0.2).hessian_at_zero_eigenvalues();
        let min = crit.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(min.abs() < 1e-12);
    }

    #[test]
    fn fft_of_first_row_gives_spectrum() {
        use rustfft::{num_complex::Complex, FftPlanner};
        for s in [3usize, 4, 9, 16] {
            let spec = CirculantSpec::new(s, 0.7, 0.3);
            let dense = spec.dense();
            let mut row: Vec<Complex<f64>> =
                (0..s).map(|j| Complex::new(dense[(0, j)], 0.0)).collect();
            FftPlanner::new().plan_fft_forward(s).process(&mut row);
            let fft = sorted(row.iter().map(|c| c.re).collect());
            assert!(row.iter().all(|c| c.im.abs() < 1e-12));
            for (x, y) in fft.iter().zip(&sorted(spec.eigenvalues())) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn apply_matches_dense(x in prop::collection::vec(-2.0f64..2.0, 1..40), b in 0.1f64..2.0, frac in 0.01f64..0.99) {
                let spec = CirculantSpec::new(x.len(), b, frac * b / 2.0);
                let dense = spec.dense() * nalgebra::DVector::from_vec(x.clone());
                let fast = spec.apply(&x);
                for (u, v) in fast.iter().zip(dense.iter()) {
                    prop_assert!((u - v).abs() < 1e-12);
                }
                let q = spec.quadratic_form(&x);
                let direct: f64 = x.iter().zip(&fast).map(|(a, b)| a * b).sum();
                prop_assert!((q - direct).abs() < 1e-12);
            }
        }
    }
}
