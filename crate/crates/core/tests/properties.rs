use klnmf::baselines::{admm_x_update, mu_step, AdmmState};
use klnmf::fpa::{heuristic_step_sizes, normalize_factors};
use klnmf::kl::{certificate, kl_divergence, NdProblem};
use klnmf::prox::{project_simplex, prox_g};
use klnmf::random::{random_init, synth_matrix, RandomSeed};
use klnmf::spectral::spectral_norm;
use klnmf::DenseMatrix;
use proptest::prelude::*;

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_max_eigenvalue(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).fold(f64::NEG_INFINITY, f64::max)
}

fn gram(k: &DenseMatrix) -> Vec<Vec<f64>> {
    let q = k.cols();
    (0..q)
        .map(|i| (0..q).map(|j| (0..k.rows()).map(|r| k.get(r, i) * k.get(r, j)).sum()).collect())
        .collect()
}

fn positive(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    synth_matrix(rows, cols, 0.05, 1.0, RandomSeed(seed)).unwrap()
}

#[test]
fn spectral_norm_of_seeded_6x5_matches_jacobi() {
    let k = synth_matrix(6, 5, 0.0, 1.0, RandomSeed(7)).unwrap();
    let est = spectral_norm(&k, 1e-12, 100_000).unwrap();
    let oracle = jacobi_max_eigenvalue(gram(&k)).sqrt();
    assert!((est - oracle).abs() <= 1e-8, "{est} vs {oracle}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_norm_matches_jacobi(p in 1usize..9, q in 1usize..7, seed in any::<u64>()) {
        let k = positive(p, q, seed);
        let est = spectral_norm(&k, 1e-12, 100_000).unwrap();
        let oracle = jacobi_max_eigenvalue(gram(&k)).sqrt();
        prop_assert!((est - oracle).abs() <= 1e-8 * oracle.max(1.0), "{} vs {}", est, oracle);
    }

    #[test]
    fn weak_duality_on_random_pairs(p in 1usize..10, q in 1usize..6, seed in any::<u64>()) {
        let prob = NdProblem::new(positive(p, 1, seed), positive(p, q, seed ^ 1)).unwrap();
        let x = positive(q, 1, seed ^ 2);
        let y = positive(p, 1, seed ^ 3).scale(-3.0);
        let cert = certificate(&prob, &x, &y).unwrap();
        prop_assert!(cert.gap >= -1e-10 * cert.primal_value.abs().max(1.0), "gap {}", cert.gap);
    }

    #[test]
    fn prox_g_solves_each_coordinate(x in prop::collection::vec(-5.0f64..5.0, 1..8), tau in 0.01f64..3.0, seed in any::<u64>()) {
        let q = x.len();
        let cs = positive(1, q, seed).into_vec();
        let xm = DenseMatrix::column(&x).unwrap();
        let out = prox_g(&xm, &[tau], &cs).unwrap();
        for i in 0..q {
            // minimizer of (u - x)^2 / (2 tau) + c u over u >= 0 is where the derivative crosses zero
            let u = out.get(i, 0);
            prop_assert!(u >= 0.0);
            let slope_right = (u - x[i]) / tau + cs[i];
            prop_assert!(slope_right >= -1e-12);
            if u > 0.0 {
                prop_assert!(slope_right.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn simplex_projection_is_feasible_and_idempotent(v in prop::collection::vec(-3.0f64..3.0, 1..10)) {
        let u = project_simplex(&v).unwrap();
        prop_assert!((u.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert!(u.iter().all(|&e| e >= 0.0));
        let again = project_simplex(&u).unwrap();
        for (a, b) in u.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn kl_is_non_negative_and_zero_on_the_diagonal(n in 1usize..6, m in 1usize..6, seed in any::<u64>()) {
        let v = synth_matrix(n, m, 0.0, 10.0, RandomSeed(seed)).unwrap();
        let p = positive(n, m, seed ^ 9);
        prop_assert!(kl_divergence(&v, &p).unwrap() >= -1e-12);
        let vp = positive(n, m, seed ^ 5);
        prop_assert!(kl_divergence(&vp, &vp).unwrap().abs() <= 1e-12);
    }

    #[test]
    fn mu_never_increases_the_objective(n in 2usize..12, m in 2usize..12, r in 1usize..4, seed in any::<u64>()) {
        let v = synth_matrix(n, m, 0.0, 50.0, RandomSeed(seed)).unwrap();
        let (mut w, mut h) = random_init(n, m, r, 0.01, RandomSeed(seed ^ 4)).unwrap();
        let mut prev = kl_divergence(&v, &w.matmul(&h).unwrap()).unwrap();
        for _ in 0..30 {
            (w, h) = mu_step(&v, &w, &h).unwrap();
            let cur = kl_divergence(&v, &w.matmul(&h).unwrap()).unwrap();
            prop_assert!(cur <= prev * (1.0 + 1e-12), "{} -> {}", prev, cur);
            prev = cur;
        }
    }

    #[test]
    fn normalization_keeps_the_product(n in 1usize..8, m in 1usize..8, r in 1usize..4, seed in any::<u64>()) {
        let (w, h) = random_init(n, m, r, 0.01, RandomSeed(seed)).unwrap();
        let (w2, h2) = normalize_factors(&w, &h).unwrap();
        let before = w.matmul(&h).unwrap();
        let diff = w2.matmul(&h2).unwrap().sub(&before).unwrap().max_abs();
        prop_assert!(diff <= 1e-12 * before.max_abs());
        for s in w2.col_sums() {
            prop_assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalization_after_mu_keeps_the_objective(seed in any::<u64>()) {
        let v = synth_matrix(9, 7, 0.0, 100.0, RandomSeed(seed)).unwrap();
        let (w, h) = random_init(9, 7, 3, 0.01, RandomSeed(seed ^ 1)).unwrap();
        let (w, h) = mu_step(&v, &w, &h).unwrap();
        let (w2, h2) = normalize_factors(&w, &h).unwrap();
        let before = kl_divergence(&v, &w.matmul(&h).unwrap()).unwrap();
        let after = kl_divergence(&v, &w2.matmul(&h2).unwrap()).unwrap();
        prop_assert!((after - before).abs() <= 1e-10 * before.max(1.0));
    }

    #[test]
    fn step_sizes_satisfy_the_constraint(p in 1usize..8, q in 1usize..6, c in 0.01f64..100.0, seed in any::<u64>()) {
        let k = positive(p, q, seed);
        let prob = NdProblem::new(positive(p, 2, seed ^ 1).scale(c), k.clone()).unwrap();
        let norm = spectral_norm(&k, 1e-12, 100_000).unwrap();
        let steps = heuristic_step_sizes(&prob, norm).unwrap();
        for (s, t) in steps.sigma().iter().zip(steps.tau()) {
            prop_assert!((s * t * norm * norm - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn admm_x_update_solves_its_quadratic(rho in 0.05f64..20.0, seed in any::<u64>()) {
        let (w, h) = random_init(4, 5, 2, 0.01, RandomSeed(seed)).unwrap();
        let mut s = AdmmState::new(&w, &h, rho).unwrap();
        s.alpha_x = synth_matrix(4, 5, 0.0, 2.0, RandomSeed(seed ^ 1)).unwrap().map(|v| v - 1.0);
        let v = synth_matrix(4, 5, 0.0, 30.0, RandomSeed(seed ^ 2)).unwrap();
        let yz = s.y.matmul(&s.z).unwrap();
        let x = admm_x_update(&v, &yz, &s.alpha_x, rho).unwrap();
        for i in 0..4 {
            for j in 0..5 {
                let xi = x.get(i, j);
                let res = rho * xi * xi + (1.0 + s.alpha_x.get(i, j) - rho * yz.get(i, j)) * xi - v.get(i, j);
                prop_assert!(res.abs() <= 1e-9 * v.get(i, j).max(1.0));
            }
        }
    }
}
