mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use shiftaudit_core::linalg::Matrix;
use shiftaudit_core::rng;
use shiftaudit_core::tsne::*;
use shiftaudit_core::Error;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn random_y(seed: u64, n: usize) -> Vec<[f64; 2]> {
    let mut r = rng::seeded(seed);
    (0..n).map(|_| [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)]).collect()
}

/// Rebuilds P from the reported bandwidths with nothing but the definition.
fn affinities_from_definition(x: &Matrix, sigmas: &[f64]) -> Vec<Vec<f64>> {
    let n = x.rows();
    let d2 = |i: usize, j: usize| -> f64 { x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b).powi(2)).sum() };
    let mut cond = vec![vec![0.0; n]; n];
    for i in 0..n {
        let w: Vec<f64> = (0..n)
            .map(|j| if i == j { 0.0 } else { (-d2(i, j) / (2.0 * sigmas[i] * sigmas[i])).exp() })
            .collect();
        let z: f64 = w.iter().sum();
        for j in 0..n {
            cond[i][j] = w[j] / z;
        }
    }
    let mut p = vec![vec![0.0; n]; n];
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i][j] = ((cond[i][j] + cond[j][i]) / (2.0 * n as f64)).max(1e-12);
                total += p[i][j];
            }
        }
    }
    for row in &mut p {
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    p
}

fn max_rel_grad_error(p: &Matrix, y: &[[f64; 2]]) -> f64 {
    let (_, grad) = kl_and_gradient(p, y).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..y.len() {
        for k in 0..2 {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[i][k] += h;
            ym[i][k] -= h;
            let fd = (kl_and_gradient(p, &yp).unwrap().0 - kl_and_gradient(p, &ym).unwrap().0) / (2.0 * h);
            worst = worst.max((grad[i][k] - fd).abs() / grad[i][k].abs());
        }
    }
    worst
}

#[test]
fn joint_affinities_match_definition() {
    let x = gaussian_rows(3, &[0.0; 6], &[1.0; 6], 20);
    let cfg = TsneConfig {
        perplexity: 5.0,
        ..TsneConfig::default()
    };
    let aff = joint_affinities(&x, &cfg).unwrap();
    let want = affinities_from_definition(&x, &aff.sigmas);
    for i in 0..20 {
        for j in 0..20 {
            assert!((aff.p[(i, j)] - want[i][j]).abs() <= 1e-12, "({i},{j})");
        }
    }
    assert!((aff.p.as_slice().iter().sum::<f64>() - 1.0).abs() <= 1e-10);
}

#[test]
fn square_is_symmetric() {
    let x = Matrix::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
    let cfg = TsneConfig {
        perplexity: 2.0,
        ..TsneConfig::default()
    };
    let p = joint_affinities(&x, &cfg).unwrap().p;
    let edges = [p[(0, 1)], p[(1, 2)], p[(2, 3)], p[(3, 0)]];
    let diagonals = [p[(0, 2)], p[(1, 3)]];
    for e in edges {
        assert!((e - edges[0]).abs() < 1e-14);
    }
    assert!((diagonals[0] - diagonals[1]).abs() < 1e-14);
    assert!(edges[0] > diagonals[0]);
}

#[test]
fn gradient_matches_finite_differences() {
    let x = gaussian_rows(7, &[0.0; 5], &[1.0; 5], 50);
    let p = joint_affinities(
        &x,
        &TsneConfig {
            perplexity: 10.0,
            ..TsneConfig::default()
        },
    )
    .unwrap()
    .p;
    assert!(max_rel_grad_error(&p, &random_y(8, 50)) < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn gradient_check_random_instances(seed in any::<u64>(), n in 6usize..=100) {
        let x = gaussian_rows(seed, &[0.0; 4], &[1.0; 4], n);
        let cfg = TsneConfig { perplexity: ((n - 1) as f64 / 3.0).max(1.5), ..TsneConfig::default() };
        let p = joint_affinities(&x, &cfg).unwrap().p;
        prop_assert!(max_rel_grad_error(&p, &random_y(seed ^ 1, n)) < 1e-4);
    }

    #[test]
    fn translation_invariance(seed in any::<u64>(), cx in -50.0f64..50.0, cy in -50.0f64..50.0) {
        let x = gaussian_rows(seed, &[0.0; 3], &[1.0; 3], 12);
        let p = joint_affinities(&x, &TsneConfig { perplexity: 4.0, ..TsneConfig::default() }).unwrap().p;
        let y = random_y(seed, 12);
        let moved: Vec<[f64; 2]> = y.iter().map(|c| [c[0] + cx, c[1] + cy]).collect();
        let (k1, g1) = kl_and_gradient(&p, &y).unwrap();
        let (k2, g2) = kl_and_gradient(&p, &moved).unwrap();
        prop_assert!((k1 - k2).abs() <= 1e-9 * k1.abs().max(1.0));
        for (a, b) in g1.iter().zip(&g2) {
            prop_assert!((a[0] - b[0]).abs() <= 1e-9 && (a[1] - b[1]).abs() <= 1e-9);
        }
    }
}

#[test]
fn calibration_on_every_row() {
    let x = gaussian_rows(12, &[0.0; 10], &[1.0; 10], 300);
    let cfg = TsneConfig::default();
    let aff = joint_affinities(&x, &cfg).unwrap();
    assert!(aff.unconverged_rows.is_empty());
    for p in &aff.achieved_perplexity {
        assert!((p - cfg.perplexity).abs() <= cfg.entropy_tol * cfg.perplexity);
    }
}

#[test]
fn two_clusters_separate_and_kl_descends() {
    let a = gaussian_rows(20, &[0.0; 8], &[1.0; 8], 100);
    let mut m = [0.0; 8];
    m[3] = 7.0;
    let b = gaussian_rows(21, &m, &[1.0; 8], 100);
    let mut data = a.as_slice().to_vec();
    data.extend_from_slice(b.as_slice());
    let x = Matrix::new(200, 8, data).unwrap();
    let proj = tsne_embed(&x, &ids(200), &TsneConfig { seed: 5, ..TsneConfig::default() }).unwrap();
    let labels: Vec<usize> = (0..200).map(|i| usize::from(i >= 100)).collect();
    assert!(silhouette(&proj.coords, &labels) > 0.5);
    assert!(proj.final_kl >= 0.0);
    assert_eq!(proj.ids, ids(200));
    for w in proj.kl_trace.windows(2) {
        assert!(w[1].1 <= w[0].1 + 1e-6);
    }
}

#[test]
fn embedding_is_deterministic() {
    let x = gaussian_rows(1, &[0.0; 4], &[1.0; 4], 40);
    let cfg = TsneConfig {
        perplexity: 8.0,
        iterations: 300,
        seed: 2,
        ..TsneConfig::default()
    };
    let a = tsne_embed(&x, &ids(40), &cfg).unwrap();
    let b = tsne_embed(&x, &ids(40), &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rejects_tiny_inputs_and_large_perplexity() {
    let x = gaussian_rows(1, &[0.0; 2], &[1.0; 2], 3);
    assert!(matches!(
        tsne_embed(&x, &ids(3), &TsneConfig::default()),
        Err(Error::TooFewSamples { .. })
    ));
    let x = gaussian_rows(1, &[0.0; 2], &[1.0; 2], 10);
    assert!(matches!(
        tsne_embed(&x, &ids(10), &TsneConfig { perplexity: 9.0, ..TsneConfig::default() }),
        Err(Error::InvalidArgument(_))
    ));
}
