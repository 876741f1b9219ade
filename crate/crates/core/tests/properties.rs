use proptest::prelude::*;

use ddsde_core::sde::euler_maruyama;
use ddsde_core::solver::particle_solve;
use ddsde_core::{wasserstein, EmpiricalMeasure, LandauModel, LawCurve, LinearMeanField, Method, NoiseSpec, TimeGrid};

fn measure(dim: usize, n: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    prop::collection::vec(-3.0f64..3.0, n * dim).prop_map(move |pts| EmpiricalMeasure::new(dim, pts).unwrap())
}

fn triple() -> impl Strategy<Value = (EmpiricalMeasure, EmpiricalMeasure, EmpiricalMeasure)> {
    (1usize..=3, 1usize..=12).prop_flat_map(|(d, n)| (measure(d, n), measure(d, n), measure(d, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_distance_is_a_metric((a, b, c) in triple(), theta in prop::sample::select(vec![1.0, 2.0, 3.0])) {
        let w = |x: &EmpiricalMeasure, y: &EmpiricalMeasure| wasserstein(x, y, theta, Method::Exact).unwrap();
        prop_assert!(w(&a, &a).abs() < 1e-12);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() < 1e-10);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-10);
    }

    #[test]
    fn w1_below_w2((a, b, _) in triple()) {
        let w1 = wasserstein(&a, &b, 1.0, Method::Exact).unwrap();
        let w2 = wasserstein(&a, &b, 2.0, Method::Exact).unwrap();
        prop_assert!(w1 <= w2 + 1e-10);
    }

    #[test]
    fn translation_distance_is_the_shift(a in measure(2, 8), v in prop::collection::vec(-2.0f64..2.0, 2)) {
        let b = a.shifted(&v).unwrap();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((wasserstein(&a, &b, 2.0, Method::Exact).unwrap() - norm).abs() < 1e-9);
    }

    #[test]
    fn entropic_upper_bounds_exact((a, b, _) in triple()) {
        let exact = wasserstein(&a, &b, 2.0, Method::Exact).unwrap();
        let ent = wasserstein(&a, &b, 2.0, Method::Entropic { epsilon: Some(0.2) }).unwrap();
        prop_assert!(ent >= exact - 1e-9, "entropic {} below exact {}", ent, exact);
    }

    #[test]
    fn one_dimensional_sorting_matches_assignment(a in measure(1, 9), b in measure(1, 9)) {
        let auto = wasserstein(&a, &b, 2.0, Method::Auto).unwrap();
        let exact = wasserstein(&a, &b, 2.0, Method::Exact).unwrap();
        prop_assert!((auto - exact).abs() < 1e-10);
    }

    #[test]
    fn moments_are_nonnegative_and_scale(a in measure(2, 6), s in 0.1f64..3.0, p in 0.0f64..4.0) {
        let scaled = EmpiricalMeasure::new(2, a.as_flat().iter().map(|x| s * x).collect()).unwrap();
        prop_assert!(a.moment(p) >= 0.0);
        prop_assert!((scaled.moment(p) - s.powf(p) * a.moment(p)).abs() <= 1e-9 * (1.0 + scaled.moment(p)));
    }

    #[test]
    fn noise_cells_are_pure(seed in any::<u64>(), traj in 0u64..1_000_000, step in 0u64..1_000_000) {
        let noise = NoiseSpec::new(seed, 3);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        noise.fill_standard_normal(traj, step, &mut a);
        noise.fill_standard_normal(traj, step, &mut b);
        prop_assert_eq!(a, b);
        noise.fill_standard_normal(traj + 1, step, &mut b);
        prop_assert_ne!(a, b);
        noise.derive(1).fill_standard_normal(traj, step, &mut b);
        prop_assert_ne!(a, b);
    }

    #[test]
    fn restarting_mid_grid_reproduces_the_path(k in 1usize..40, seed in any::<u64>()) {
        let model = LinearMeanField::from_rows(0.7, 0.4, &[vec![1.0, 0.2], vec![0.0, 0.5]]).unwrap();
        let grid = TimeGrid::new(0.0, 0.4, 40).unwrap();
        let mu = EmpiricalMeasure::new(2, vec![0.3, -0.1, 1.0, 0.5, -0.4, 0.2]).unwrap();
        let law = LawCurve::constant(grid, mu.clone());
        let noise = NoiseSpec::new(seed, 2);
        let full = euler_maruyama(&model, &law, &mu, &grid, &noise).unwrap();
        let (head, tail) = grid.split_at(k);
        let first = euler_maruyama(&model, &law, &mu, &head, &noise).unwrap();
        let second = euler_maruyama(&model, &law.tail(k), &first.terminal(), &tail, &noise).unwrap();
        prop_assert_eq!(full.terminal().as_flat().to_vec(), second.terminal().as_flat().to_vec());
    }
}

#[test]
fn particle_system_is_thread_count_invariant() {
    let model = LandauModel::new(0.5, 0.5, 0.3).unwrap();
    let grid = TimeGrid::new(0.0, 0.2, 20).unwrap();
    let mu0 = EmpiricalMeasure::new(3, (0..90).map(|i| ((i * 37 % 17) as f64 - 8.0) / 5.0).collect()).unwrap();
    let noise = NoiseSpec::new(5, 3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| particle_solve(&model, &mu0, &grid, &noise, 30).unwrap().1.fingerprint())
    };
    assert_eq!(run(1), run(3));
}
