use etmg_core::qp::{kkt_residuals, solve_qp, QpMethod, QpProblem, QpSettings, QpStatus};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    m.transpose() * &m + DMatrix::identity(n, n) * 0.2
}

fn general_qp(seed: u64, n: usize, n_eq: usize, n_in: usize) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = spd(&mut rng, n);
    let g = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    // a known interior point keeps every instance feasible
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
    let a_eq = DMatrix::from_fn(n_eq, n, |_, _| rng.gen_range(-1.0..1.0));
    let b_eq = &a_eq * &x0;
    let a_in = DMatrix::from_fn(n_in, n, |_, _| rng.gen_range(-1.0..1.0));
    let r = &a_in * &x0;
    let lb =
        DVector::from_fn(n_in, |i, _| if i % 3 == 0 { f64::NEG_INFINITY } else { r[i] - rng.gen_range(0.05..0.5) });
    let ub = DVector::from_fn(n_in, |i, _| if i % 3 == 1 { f64::INFINITY } else { r[i] + rng.gen_range(0.05..0.5) });
    QpProblem::new(h, g, a_eq, b_eq, a_in, lb, ub).unwrap()
}

fn with_method(method: QpMethod) -> QpSettings {
    QpSettings { method, ..QpSettings::default() }
}

#[test]
fn two_variable_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let h = spd(&mut rng, 2);
        let g = DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0));
        let p = QpProblem::boxed(h, g, DVector::from_element(2, -1.0), DVector::from_element(2, 1.0)).unwrap();
        let s = solve_qp(&p, &QpSettings::default()).unwrap();
        let mut best = (f64::INFINITY, DVector::zeros(2));
        for i in 0..=2000 {
            for j in 0..=2000 {
                let x = DVector::from_vec(vec![-1.0 + i as f64 * 1e-3, -1.0 + j as f64 * 1e-3]);
                let f = p.objective(&x);
                if f < best.0 {
                    best = (f, x);
                }
            }
        }
        assert!((&s.x - &best.1).amax() <= 2e-3, "{} vs {}", s.x, best.1);
        assert!(s.objective <= best.0 + 1e-9);
    }
}

#[test]
fn perturbed_solution_breaks_kkt() {
    let p = general_qp(12, 10, 2, 8);
    let s = solve_qp(&p, &QpSettings::default()).unwrap();
    assert_eq!(s.status, QpStatus::Optimal);
    assert!(kkt_residuals(&p, &s).max() <= 1e-6);
    let mut bad = s.clone();
    bad.x[0] += 0.1;
    assert!(kkt_residuals(&p, &bad).max() > 1e-3);
}

#[test]
fn unconstrained_matches_linear_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 12;
    let h = spd(&mut rng, n);
    let g = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let inf = DVector::from_element(n, f64::INFINITY);
    let p = QpProblem::boxed(h.clone(), g.clone(), -&inf, inf).unwrap();
    let expected = h.lu().solve(&(-g)).unwrap();
    for method in [QpMethod::Admm, QpMethod::InteriorPoint] {
        let s = solve_qp(&p, &with_method(method)).unwrap();
        assert!((&s.x - &expected).amax() < 1e-7, "{method:?}");
    }
}

#[test]
fn infeasible_is_reported_by_both_methods() {
    let n = 2;
    let a_in = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
    let p = QpProblem::new(
        DMatrix::identity(n, n),
        DVector::zeros(n),
        DMatrix::zeros(0, n),
        DVector::zeros(0),
        a_in,
        DVector::from_vec(vec![2.0, f64::NEG_INFINITY]),
        DVector::from_vec(vec![f64::INFINITY, 1.0]),
    )
    .unwrap();
    for method in [QpMethod::Admm, QpMethod::InteriorPoint] {
        let s = solve_qp(&p, &with_method(method)).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible, "{method:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn methods_agree(seed in any::<u64>(), n in 2usize..20, n_eq in 0usize..3, n_in in 0usize..25) {
        let p = general_qp(seed, n, n_eq.min(n - 1), n_in);
        let a = solve_qp(&p, &with_method(QpMethod::Admm)).unwrap();
        let b = solve_qp(&p, &with_method(QpMethod::InteriorPoint)).unwrap();
        prop_assert_eq!(a.status, QpStatus::Optimal);
        prop_assert_eq!(b.status, QpStatus::Optimal);
        prop_assert!(kkt_residuals(&p, &a).max() <= 1e-6);
        prop_assert!(kkt_residuals(&p, &b).max() <= 1e-6);
        prop_assert!((&a.x - &b.x).amax() <= 1e-4);
    }

    #[test]
    fn cost_scaling_keeps_minimizer(seed in any::<u64>(), n in 2usize..15, scale in 0.01f64..100.0) {
        let p = general_qp(seed, n, 1, 10);
        let mut q = p.clone();
        q.h *= scale;
        q.g *= scale;
        let a = solve_qp(&p, &QpSettings::default()).unwrap();
        let b = solve_qp(&q, &QpSettings::default()).unwrap();
        prop_assert!((&a.x - &b.x).amax() <= 1e-4);
    }
}
