use proptest::prelude::*;
use ttbrwp::experiment::{preset, ExperimentConfig, PRESET_IDS};
use ttbrwp::grid::Scheme;
use ttbrwp::nalgebra::{DMatrix, DVector};
use ttbrwp::oracle::{mixing_time_bound, oracle_step, scalar_recursion, tv_gaussians_same_mean, DensityEstimate, GaussianState, GaussianTarget};
use ttbrwp::potentials::MeasurementSet;
use ttbrwp::samplers::{Method, ParticleEnsemble};

fn diag_target(diag: &[f64], mean: &[f64]) -> GaussianTarget {
    GaussianTarget { mean: DVector::from_column_slice(mean), cov: DMatrix::from_diagonal(&DVector::from_column_slice(diag)) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stationary_state_is_a_fixed_point(diag in prop::collection::vec(0.5f64..4.0, 1..=6), beta in 0.5f64..3.0, t in 0.01f64..0.1, h in 0.01f64..0.1) {
        let mean: Vec<f64> = diag.iter().map(|v| v - 1.0).collect();
        let target = diag_target(&diag, &mean);
        let fixed = target.stationary(beta);
        let next = oracle_step(&fixed, &target, t, h, beta, DensityEstimate::Corrected).unwrap();
        prop_assert!((&next.cov - &fixed.cov).norm() <= 1e-12 * fixed.cov.norm());
        prop_assert!((&next.mean - &fixed.mean).norm() <= 1e-12 * (1.0 + fixed.mean.norm()));
    }

    #[test]
    fn isotropic_oracle_agrees_with_scalar_recursion(d in 1usize..5, s2 in 0.3f64..3.0, m in -1.0f64..1.0, sigma in 0.6f64..2.0) {
        let (t, h, beta) = (0.05, 0.05, 1.0);
        let state = GaussianState::isotropic(d, m, s2);
        let next = oracle_step(&state, &GaussianTarget::isotropic(d, sigma, 0.0), t, h, beta, DensityEstimate::Corrected).unwrap();
        let (m1, s21) = scalar_recursion(m, s2, sigma * sigma, t, h, beta).unwrap();
        for k in 0..d {
            prop_assert!((next.cov[(k, k)] - s21).abs() <= 1e-12 * s21.max(1.0));
            prop_assert!((next.mean[k] - m1).abs() <= 1e-12);
        }
    }

    #[test]
    fn tv_formula_is_bounded_and_exact_for_scalar_multiples(diag in prop::collection::vec(0.2f64..3.0, 1..=4), scale in 0.5f64..2.0) {
        let a = DMatrix::from_diagonal(&DVector::from_column_slice(&diag));
        let b = &a * scale;
        prop_assert!(tv_gaussians_same_mean(&a, &a).unwrap().abs() < 1e-12);
        let tv = tv_gaussians_same_mean(&a, &b).unwrap();
        // every eigenvalue of A^-1 B - I equals scale - 1
        let expected = 1.5 * ((scale - 1.0).abs() * (diag.len() as f64).sqrt()).min(1.0);
        prop_assert!((tv - expected).abs() < 1e-12);
        prop_assert!((0.0..=1.5).contains(&tv));
    }

    #[test]
    fn mixing_time_grows_as_accuracy_tightens(eps in 1e-6f64..0.5, d in 1usize..20) {
        let loose = mixing_time_bound(eps * 2.0, d, 0.1, 1.0).unwrap();
        let tight = mixing_time_bound(eps, d, 0.1, 1.0).unwrap();
        prop_assert!(tight >= loose);
    }

    #[test]
    fn config_round_trips(
        id in prop::sample::select(PRESET_IDS.to_vec()),
        method in prop::sample::select(Method::ALL.to_vec()),
        particles in 2usize..5000,
        h in 1e-4f64..1.0,
        t in 1e-4f64..1.0,
        l in 1.0f64..30.0,
        ppu in 2usize..64,
        gl in any::<bool>(),
        tol in 1e-12f64..1e-2,
        literal in any::<bool>(),
        seed in any::<u64>(),
        mean in prop::collection::vec(-3.0f64..3.0, 0..4),
    ) {
        let mut cfg = preset(id).unwrap();
        cfg.method = method;
        cfg.particles = particles;
        cfg.h = h;
        cfg.prox_t = t;
        cfg.grid.half_width = l;
        cfg.grid.points_per_unit = ppu;
        cfg.grid.scheme = if gl { Scheme::GaussLegendre } else { Scheme::UniformTrapezoid };
        cfg.cross_tol = tol;
        cfg.algorithm_literal = literal;
        cfg.seed = seed;
        cfg.init_mean = mean;
        let text = cfg.write().unwrap();
        prop_assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);
    }

    #[test]
    fn ensemble_csv_round_trips(m in 1usize..40, d in 1usize..5, seed in any::<u64>(), mean in -5.0f64..5.0) {
        let ens = ParticleEnsemble::gaussian(m, &vec![mean; d], 2.0, seed);
        let mut buf = Vec::new();
        ens.write_csv(&mut buf).unwrap();
        let back = ParticleEnsemble::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.positions(), ens.positions());
        prop_assert_eq!(back.seed, ens.seed);
        prop_assert_eq!(back.iteration, ens.iteration);
    }

    #[test]
    fn measurement_csv_round_trips(n in 1usize..20, seed in any::<u64>(), noise in 0.0f64..1.0) {
        let design: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / 7.0, -(i as f64)]).collect();
        let clean: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let set = MeasurementSet::generate("probe", seed, noise, vec![("k".into(), "3".into())], design, clean);
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        let back = MeasurementSet::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, set);
    }
}

#[test]
fn measurement_regeneration_is_seed_deterministic() {
    let make = |seed| MeasurementSet::generate("probe", seed, 0.1, vec![], vec![vec![0.0]; 5], vec![1.0; 5]);
    assert_eq!(make(3).values, make(3).values);
    assert_ne!(make(3).values, make(4).values);
}
