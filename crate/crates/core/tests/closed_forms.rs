//! Exact finite-N covariances approach the Green's-function closed forms.

use blockspin::chain::{build_transfer_matrix, ChainSpec};
use blockspin::exact::{brute_force_law, conditional_law, exact_law, exact_moments};
use blockspin::landscape::solve_m_star;
use blockspin::spectral::sigma_star_finite_entry;
use blockspin::ModelParams;

fn max_gap(params: &ModelParams, reference: impl Fn(usize, usize) -> f64, ball: Option<f64>) -> f64 {
    let law = exact_law(params).unwrap();
    let law = match ball {
        Some(m) => {
            let s = params.n_blocks as f64;
            conditional_law(&law, &vec![m; params.n_blocks], 0.5 * m * s.sqrt()).unwrap()
        }
        None => law,
    };
    let s = params.n_blocks;
    let (_, cov) = exact_moments(&law, s).unwrap();
    let b = params.block_size() as f64;
    let mut worst: f64 = 0.0;
    for i in 0..s {
        for j in 0..s {
            worst = worst.max((b * cov[(i, j)] - reference(i, j)).abs());
        }
    }
    worst
}

#[test]
fn high_temperature_covariance_converges_to_green_function() {
    for s in [2, 3] {
        let sizes: &[usize] = if s == 2 { &[25, 50, 100, 200] } else { &[10, 20, 40] };
        let gaps: Vec<f64> = sizes
            .iter()
            .map(|&b| {
                let params = ModelParams::new(0.4, 0.1, b * s, s).unwrap();
                let inv = params.spec().inverse_i_minus_a().unwrap();
                max_gap(&params, |i, j| inv[(i, j)], None)
            })
            .collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]), "s = {s}: {gaps:?}");
        // finite-size corrections shrink like 1 / B
        let ratio = gaps[gaps.len() - 2] / gaps[gaps.len() - 1];
        assert!(ratio > 1.6 && ratio < 2.4, "s = {s}: {gaps:?}");
    }
}

#[test]
fn phase_conditioned_covariance_converges_to_sigma_star() {
    let gaps: Vec<f64> = [50usize, 100, 200]
        .iter()
        .map(|&b| {
            let params = ModelParams::new(0.8, 0.25, 2 * b, 2).unwrap();
            let m = solve_m_star(params.theta());
            max_gap(
                &params,
                |i, j| sigma_star_finite_entry(&params, m, i, j).unwrap(),
                Some(m),
            )
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] < 0.05, "{gaps:?}");
}

#[test]
fn degenerate_block_counts_agree_with_brute_force() {
    for (n, s) in [(10, 1), (10, 2), (9, 3)] {
        let params = ModelParams::relaxed(0.7, 0.3, n, s).unwrap();
        let tv = exact_law(&params)
            .unwrap()
            .total_variation(&brute_force_law(&params).unwrap())
            .unwrap();
        assert!(tv < 1e-12, "N = {n}, s = {s}: {tv}");
    }
}

#[test]
fn transfer_marginal_matches_enumeration() {
    let params = ModelParams::new(0.9, 0.3, 20, 5).unwrap();
    let law = exact_law(&params).unwrap();
    let tm = build_transfer_matrix(&ChainSpec::from_params(&params).unwrap());
    let want = law.marginal(2);
    for (a, b) in tm.marginal().iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!((tm.log_partition_periodic() - law.log_z()).abs() < 1e-10 * law.log_z().abs());
}
