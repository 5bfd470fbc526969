//! The Hubbard–Stratonovich free-energy landscape
//! `phi(x) = x^T A x / 2 - sum_k log cosh((A x)_k)`, its derivatives, the
//! fixed-point map `x -> tanh(A x)`, the scalar equation for `m*` and the
//! one-block rate function.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, ParamMode};
use crate::spectral::CirculantSpec;

/// Tolerance on `beta + 2 alpha - 1` below which the regime is critical.
pub const CRITICAL_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    High,
    Critical,
    Low,
}

impl Regime {
    pub fn of(theta: f64) -> Self {
        let gap = theta - 1.0;
        if gap.abs() <= CRITICAL_TOLERANCE {
            Regime::Critical
        } else if gap < 0.0 {
            Regime::High
        } else {
            Regime::Low
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Regime::High => "high",
            Regime::Critical => "critical",
            Regime::Low => "low",
        })
    }
}

/// `log cosh(y)` without overflow.
#[inline]
pub fn ln_cosh(y: f64) -> f64 {
    let a = y.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `G(y) = log cosh(y) - y^2 / 2`.
pub fn log_cosh_deviation(y: f64) -> f64 {
    ln_cosh(y) - 0.5 * y * y
}

fn check_dim(spec: &CirculantSpec, x: &[f64]) -> Result<()> {
    if x.len() != spec.size {
        return Err(Error::DimensionMismatch {
            expected: spec.size,
            actual: x.len(),
        });
    }
    Ok(())
}

pub fn phi(spec: &CirculantSpec, x: &[f64]) -> Result<f64> {
    check_dim(spec, x)?;
    let ax = spec.apply(x);
    let quad: f64 = x.iter().zip(&ax).map(|(a, b)| a * b).sum();
    Ok(0.5 * quad - ax.iter().map(|&y| ln_cosh(y)).sum::<f64>())
}

/// `A (x - tanh(A x))`.
pub fn grad_phi(spec: &CirculantSpec, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(spec, x)?;
    let ax = spec.apply(x);
    let residual: Vec<f64> = x.iter().zip(&ax).map(|(xi, yi)| xi - yi.tanh()).collect();
    Ok(spec.apply(&residual))
}

/// `A - A diag(sech^2((A x)_k)) A`.
pub fn hess_phi(spec: &CirculantSpec, x: &[f64]) -> Result<DMatrix<f64>> {
    check_dim(spec, x)?;
    let a = spec.dense();
    let ax = spec.apply(x);
    let sech2 = DVector::from_iterator(ax.len(), ax.iter().map(|y| 1.0 - y.tanh().powi(2)));
    let weighted = DMatrix::from_diagonal(&sech2);
    Ok(&a - &a * weighted * &a)
}

/// The map `h(x) = tanh(A x)` whose fixed points are the critical points of `phi`.
pub fn fixed_point_map(spec: &CirculantSpec, x: &[f64]) -> Vec<f64> {
    spec.apply(x).into_iter().map(f64::tanh).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointOutcome {
    pub x: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Iterates `x <- tanh(A x)` until the sup-norm step drops below `tol`.
///
/// Non-convergence after `max_iter` steps is reported in the outcome.
pub fn fixed_point_iterate(
    spec: &CirculantSpec,
    x0: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<FixedPointOutcome> {
    check_dim(spec, x0)?;
    let mut x = x0.to_vec();
    for it in 1..=max_iter {
        let next = fixed_point_map(spec, &x);
        let step = next
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if step < tol {
            return Ok(FixedPointOutcome {
                x,
                converged: true,
                iterations: it,
            });
        }
    }
    Ok(FixedPointOutcome {
        x,
        converged: false,
        iterations: max_iter,
    })
}

/// Largest root of `x = tanh(theta x)`: `0` for `theta <= 1`, otherwise by
/// bisection on a bracket `[eps, 1]` where `tanh(theta x) - x` changes sign.
pub fn solve_m_star(theta: f64) -> f64 {
    if !(theta > 1.0) {
        return 0.0;
    }
    let f = |x: f64| (theta * x).tanh() - x;
    // tanh(theta x) - x ~ x (theta - 1) - theta^3 x^3 / 3 near 0.
    let mut lo = (0.5 * (3.0 * (theta - 1.0)).sqrt() / theta.powf(1.5)).min(0.5);
    while f(lo) <= 0.0 && lo > f64::MIN_POSITIVE {
        lo *= 0.5;
    }
    let mut hi = 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Binary entropy `s(m)` with `s(+-1) = 0`.
pub fn entropy(m: f64) -> Result<f64> {
    if !(m.abs() <= 1.0) {
        return Err(Error::OutOfRange(m));
    }
    let xlogx = |p: f64| if p == 0.0 { 0.0 } else { p * p.ln() };
    Ok(-xlogx((1.0 + m) / 2.0) - xlogx((1.0 - m) / 2.0))
}

/// `F_theta(m) = theta m^2 / 2 - log 2 + s(m)`.
pub fn rate_function(theta: f64, m: f64) -> Result<f64> {
    Ok(0.5 * theta * m * m - std::f64::consts::LN_2 + entropy(m)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeResult {
    pub regime: Regime,
    /// `beta + 2 alpha - 1`.
    pub gap: f64,
    pub m_star: f64,
    pub minimizers: Vec<Vec<f64>>,
    pub phi_at_min: f64,
    /// Largest `|grad phi|` entry over the reported minimizers.
    pub grad_residual: f64,
    /// Smallest Hessian eigenvalue over the reported minimizers.
    pub hessian_min_eigenvalue: f64,
}

impl LandscapeResult {
    /// Stationarity to `1e-10` and a positive semidefinite Hessian.
    pub fn is_verified(&self) -> bool {
        self.grad_residual < 1e-10 && self.hessian_min_eigenvalue > -1e-10
    }
}

/// Locates the global minimizers of `phi` by temperature regime:
/// `{0}` when `beta + 2 alpha <= 1`, otherwise `{m* 1, -m* 1}`.
pub fn classify_minimizers(params: &ModelParams) -> Result<LandscapeResult> {
    if params.mode != ParamMode::Strict {
        return Err(Error::InvalidParams(
            "minimizers are only classified for beta > 2 alpha > 0".into(),
        ));
    }
    params.validate()?;
    let spec = params.spec();
    let s = params.n_blocks;
    let theta = params.theta();
    let regime = Regime::of(theta);
    let m_star = solve_m_star(theta);
    let minimizers = match regime {
        Regime::High | Regime::Critical => vec![vec![0.0; s]],
        Regime::Low => vec![vec![m_star; s], vec![-m_star; s]],
    };
    let mut grad_residual: f64 = 0.0;
    let mut hessian_min = f64::INFINITY;
    for x in &minimizers {
        let g = grad_phi(&spec, x)?;
        grad_residual = g.iter().fold(grad_residual, |acc, v| acc.max(v.abs()));
        let h = hess_phi(&spec, x)?;
        let min = SymmetricEigen::new(h).eigenvalues.min();
        hessian_min = hessian_min.min(min);
    }
    let phi_at_min = phi(&spec, &minimizers[0])?;
    Ok(LandscapeResult {
        regime,
        gap: theta - 1.0,
        m_star,
        minimizers,
        phi_at_min,
        grad_residual,
        hessian_min_eigenvalue: hessian_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from an independent bracketing root finder (scipy brentq, xtol 1e-15).
    const M_STAR_1_3: f64 = 0.752_057_636_655_626_9;

    fn spec(b: f64, a: f64, s: usize) -> CirculantSpec {
        CirculantSpec::new(s, b, a)
    }

    #[test]
    fn m_star_values() {
        assert_eq!(solve_m_star(0.9), 0.0);
        assert_eq!(solve_m_star(1.0), 0.0);
        let m = solve_m_star(1.3);
        assert!((m - M_STAR_1_3).abs() < 1e-13);
        assert!((m - (1.3 * m).tanh()).abs() < 1e-13);
        for theta in [1.0 + 1e-6, 1.01, 1.5, 3.0, 20.0] {
            let m = solve_m_star(theta);
            assert!(m > 0.0 && m < 1.0);
            assert!((m - (theta * m).tanh()).abs() < 1e-13, "theta = {theta}");
        }
    }

    #[test]
    fn phi_basics() {
        let sp = spec(0.8, 0.25, 5);
        assert_eq!(phi(&sp, &[0.0; 5]).unwrap(), 0.0);
        let x = [0.3, -0.2, 0.9, 0.1, -0.5];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(phi(&sp, &x).unwrap(), phi(&sp, &neg).unwrap());
        let m = M_STAR_1_3;
        let scalar = 5.0 * (1.3 / 2.0 * m * m - ln_cosh(1.3 * m));
        let at = phi(&sp, &[m; 5]).unwrap();
        assert!((at - scalar).abs() < 1e-12);
        assert!(at < 0.0);
        assert!(phi(&sp, &[0.0; 4]).is_err());
    }

    fn fd_grad(sp: &CirculantSpec, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut up = x.to_vec();
                let mut dn = x.to_vec();
                up[i] += h;
                dn[i] -= h;
                (phi(sp, &up).unwrap() - phi(sp, &dn).unwrap()) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_examples() {
        let sp = spec(0.8, 0.25, 6);
        assert!(grad_phi(&sp, &[0.0; 6]).unwrap().iter().all(|&g| g == 0.0));
        let g = grad_phi(&sp, &[M_STAR_1_3; 6]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-10));
        let x = [0.4, -0.1, 0.7, 0.2, -0.9, 0.05];
        let fd = fd_grad(&sp, &x, 1e-6);
        for (a, b) in grad_phi(&sp, &x).unwrap().iter().zip(&fd) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn hessian_at_special_points() {
        let sp = spec(0.8, 0.25, 6);
        let a = sp.dense();
        let h0 = hess_phi(&sp, &[0.0; 6]).unwrap();
        assert!((&h0 - (&a - &a * &a)).amax() < 1e-14);
        let m = M_STAR_1_3;
        let hm = hess_phi(&sp, &[m; 6]).unwrap();
        let expected = &a - &a * &a * (1.0 - m * m);
        assert!((hm - expected).amax() < 1e-12);
    }

    #[test]
    fn fixed_point_examples() {
        let hot = spec(0.5, 0.2, 8);
        let out = fixed_point_iterate(&hot, &[0.0; 8], 10, 1e-12).unwrap();
        assert!(out.converged && out.iterations == 1 && out.x == vec![0.0; 8]);

        let cold = spec(0.8, 0.25, 8);
        let out = fixed_point_iterate(&cold, &[1.0; 8], 100_000, 1e-12).unwrap();
        assert!(out.converged);
        assert!(out.x.iter().all(|v| (v - M_STAR_1_3).abs() < 1e-11));

        let crit = spec(0.6, 0.2, 4);
        let out = fixed_point_iterate(&crit, &[0.5; 4], 50, 1e-12).unwrap();
        assert!(!out.converged && out.iterations == 50);
    }

    #[test]
    fn rate_function_shape() {
        for theta in [0.3, 0.9, 1.0, 1.3, 2.0] {
            assert!(rate_function(theta, 0.0).unwrap().abs() < 1e-15);
        }
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        assert_eq!(entropy(-1.0).unwrap(), 0.0);
        assert!(rate_function(1.0, 1.2).is_err());

        let grid: Vec<f64> = (-20_000..=20_000).map(|i| i as f64 / 20_000.0).collect();
        let argmax = |theta: f64| {
            grid.iter()
                .cloned()
                .max_by(|a, b| {
                    rate_function(theta, *a)
                        .unwrap()
                        .partial_cmp(&rate_function(theta, *b).unwrap())
                        .unwrap()
                })
                .unwrap()
        };
        assert_eq!(argmax(0.8), 0.0);
        assert!((argmax(1.3).abs() - M_STAR_1_3).abs() < 1e-4);

        for m in [0.05, 0.1, 0.2] {
            let taylor = -std::f64::consts::LN_2 + entropy(m).unwrap() + m * m / 2.0 + m.powi(4) / 12.0;
            assert!((taylor + m.powi(6) / 30.0).abs() < m.powi(8));
        }
    }

    #[test]
    fn log_cosh_deviation_bounds() {
        assert_eq!(log_cosh_deviation(0.0), 0.0);
        for i in -10_000..=10_000 {
            let y = i as f64 / 1000.0;
            let g = log_cosh_deviation(y);
            assert!(g <= 0.0 && g >= -y.powi(4) / 12.0 - 1e-15, "y = {y}");
            assert_eq!(g, log_cosh_deviation(-y));
        }
        assert!((ln_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn classification() {
        let hot = classify_minimizers(&ModelParams::new(0.5, 0.2, 80, 8).unwrap()).unwrap();
        assert_eq!(hot.regime, Regime::High);
        assert_eq!(hot.minimizers, vec![vec![0.0; 8]]);
        assert!(hot.is_verified());

        let cold = classify_minimizers(&ModelParams::new(0.8, 0.25, 60, 6).unwrap()).unwrap();
        assert_eq!(cold.regime, Regime::Low);
        assert_eq!(cold.minimizers.len(), 2);
        assert!((cold.m_star - M_STAR_1_3).abs() < 1e-13);
        assert!(cold.is_verified());
        let fp = fixed_point_iterate(&CirculantSpec::new(6, 0.8, 0.25), &[0.3; 6], 100_000, 1e-12)
            .unwrap();
        assert!((fp.x[0] - cold.m_star).abs() < 1e-11);

        let crit = classify_minimizers(&ModelParams::new(0.6, 0.2, 80, 8).unwrap()).unwrap();
        assert_eq!(crit.regime, Regime::Critical);
        assert!(crit.hessian_min_eigenvalue.abs() < 1e-12);
        assert_eq!(crit.minimizers, vec![vec![0.0; 8]]);

        let relaxed = ModelParams::relaxed(0.5, 0.0, 8, 4).unwrap();
        assert!(classify_minimizers(&relaxed).is_err());
    }
}
