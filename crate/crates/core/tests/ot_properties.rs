use escfr_core::geometry::pairwise_sqeuclidean;
use escfr_core::ot::{exact_transport, sinkhorn_plan, unbalanced_sinkhorn_plan, CostMatrix, SolverConfig};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(n: usize) -> Array1<f64> {
    Array1::from_elem(n, 1.0 / n as f64)
}

fn random_cost(rng: &mut ChaCha8Rng, n: usize, m: usize) -> CostMatrix<f64> {
    CostMatrix::new(Array2::from_shape_fn((n, m), |_| rng.random_range(0.0..2.0))).unwrap()
}

#[test]
fn entropic_cost_decreases_toward_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (n, m) = (rng.random_range(2..=6), rng.random_range(2..=6));
        let d = random_cost(&mut rng, n, m);
        let (a, b) = (uniform(n), uniform(m));
        let exact = exact_transport(a.view(), b.view(), &d).unwrap().cost;
        let mut prev = f64::INFINITY;
        for eps in [1.0, 0.3, 0.1, 0.03, 0.01] {
            let cfg = SolverConfig::balanced(eps).with_max_iters(50_000).with_tol(1e-9);
            let p = sinkhorn_plan(a.view(), b.view(), &d, &cfg).unwrap();
            let c = p.cost;
            // A plan off its marginals can undercut the optimum by at most max(D) times the violation.
            let slack = 2.0 * (p.row_violation(a.view()) + p.col_violation(b.view())) + 1e-12;
            assert!(c <= prev + 1e-7, "eps {eps}: {c} > {prev}");
            assert!(c >= exact - slack, "eps {eps}: {c} < exact {exact}");
            prev = c;
        }
    }
}

#[test]
fn large_kappa_recovers_balanced_plan() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let n = rng.random_range(2..=8);
        let m = rng.random_range(2..=8);
        let d = random_cost(&mut rng, n, m);
        let (a, b) = (uniform(n), uniform(m));
        let bal = sinkhorn_plan(a.view(), b.view(), &d, &SolverConfig::balanced(0.1).with_tol(1e-10).with_max_iters(10_000))
            .unwrap();
        let cfg = SolverConfig::unbalanced(0.1, 1e4).with_tol(1e-10).with_max_iters(100_000);
        let unb = unbalanced_sinkhorn_plan(a.view(), b.view(), &d, &cfg).unwrap();
        for (x, y) in bal.coupling.iter().zip(unb.coupling.iter()) {
            assert!((x - y).abs() <= 1e-3);
        }
    }
}

#[test]
fn vanishing_kappa_gives_gibbs_kernel() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let d = random_cost(&mut rng, 5, 4);
    let eps = 0.5;
    let p = unbalanced_sinkhorn_plan(
        uniform(5).view(),
        uniform(4).view(),
        &d,
        &SolverConfig::unbalanced(eps, 1e-12),
    )
    .unwrap();
    for (pi, c) in p.coupling.iter().zip(d.view().iter()) {
        assert!((pi - (-c / eps).exp()).abs() <= 1e-6);
    }
}

fn outlier_increase(rng: &mut ChaCha8Rng, n: usize, kappa: f64) -> f64 {
    let alpha = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
    let beta = Array2::from_shape_fn((n, 2), |_| rng.random::<f64>());
    let mut disturbed = Array2::zeros((n + 1, 2));
    disturbed.slice_mut(ndarray::s![..n, ..]).assign(&alpha);
    disturbed.row_mut(n).fill(rng.random_range(5.0..20.0));
    let cfg = SolverConfig::unbalanced(1e-3, kappa).with_max_iters(200_000).with_tol(1e-9);
    let base = pairwise_sqeuclidean(alpha.view(), beta.view()).unwrap();
    let with = pairwise_sqeuclidean(disturbed.view(), beta.view()).unwrap();
    let c0 = unbalanced_sinkhorn_plan(uniform(n).view(), uniform(n).view(), &base, &cfg).unwrap().cost;
    let c1 = unbalanced_sinkhorn_plan(uniform(n + 1).view(), uniform(n).view(), &with, &cfg).unwrap().cost;
    c1 - c0
}

#[test]
fn appended_outlier_moves_cost_by_a_bounded_amount() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for trial in 0..30 {
        let n = [4, 8][trial % 2];
        let kappa = [1.0, 2.0, 5.0][trial % 3];
        let inc = outlier_increase(&mut rng, n, kappa);
        assert!(inc <= 2.0 * kappa / (n as f64 + 1.0) + 0.05, "n {n} kappa {kappa}: {inc}");
    }
}

#[test]
fn transposed_problem_gives_transposed_plan() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for kappa in [None, Some(2.0)] {
        let d = random_cost(&mut rng, 5, 3);
        let (a, b) = (uniform(5), uniform(3));
        let cfg = match kappa {
            None => SolverConfig::balanced(0.2),
            Some(k) => SolverConfig::unbalanced(0.2, k),
        }
        .with_tol(1e-13)
        .with_max_iters(100_000);
        let p = unbalanced_sinkhorn_plan(a.view(), b.view(), &d, &cfg).unwrap();
        let q = unbalanced_sinkhorn_plan(b.view(), a.view(), &d.transposed(), &cfg).unwrap();
        for (x, y) in p.coupling.iter().zip(q.coupling.t().iter()) {
            assert!((x - y).abs() <= 1e-9);
        }
    }
}

#[test]
fn solvers_are_bit_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let d = random_cost(&mut rng, 7, 6);
    let cfg = SolverConfig::unbalanced(0.05, 3.0);
    let run = || unbalanced_sinkhorn_plan(uniform(7).view(), uniform(6).view(), &d, &cfg).unwrap();
    assert_eq!(run(), run());
}
