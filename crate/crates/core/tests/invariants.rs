use nalgebra::SymmetricEigen;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walkman_core::graph::{generate, GraphFamily, GraphSpec};
use walkman_core::markov::{
    build_chain, mixing_time, spectral, verify_mixing, ChainKind, WalkSampler,
};
use walkman_core::metrics::h_beta_hessian;
use walkman_core::problems::{
    gen_least_squares, gen_logistic, ConsensusProblem, LeastSquaresData, Quadratic,
};
use walkman_core::walkman::{default_beta, InitMode, Variant, WalkmanState};
use walkman_core::{Matrix, Vector};

fn gilbert(n: usize, p: f64, seed: u64) -> Option<walkman_core::graph::Graph> {
    generate(&GraphSpec::new(GraphFamily::Gilbert { p }, n, seed)).ok()
}

fn vector(p: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-3.0..3.0f64, p).prop_map(Vector::from_vec)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generation_is_deterministic(n in 3usize..25, seed in any::<u64>()) {
        let spec = GraphSpec::new(GraphFamily::Geometric { side: 10.0, radius: 6.0 }, n, seed);
        if let Ok(a) = generate(&spec) {
            prop_assert_eq!(a, generate(&spec).unwrap());
        }
    }

    #[test]
    fn full_gilbert_is_complete(n in 2usize..20, seed in any::<u64>()) {
        let complete = generate(&GraphSpec::new(GraphFamily::Complete, n, 0)).unwrap();
        prop_assert_eq!(gilbert(n, 1.0, seed).unwrap(), complete);
    }

    #[test]
    fn chain_mixes_within_bound(n in 3usize..20, seed in any::<u64>(), lazy in any::<bool>(), delta in 0.1..0.9f64) {
        if let Some(g) = gilbert(n, 0.4, seed) {
            let mut chain = build_chain(&g, ChainKind::MaxDegree).unwrap();
            if lazy {
                chain = chain.lazy();
            }
            let tau = mixing_time(&chain, delta).unwrap();
            prop_assert!(verify_mixing(&chain, delta, tau));
        }
    }

    #[test]
    fn symmetric_chain_sigma_is_lambda2(n in 3usize..20, seed in any::<u64>()) {
        if let Some(g) = gilbert(n, 0.5, seed) {
            let s = spectral(&build_chain(&g, ChainKind::MaxDegree).unwrap());
            prop_assert!((s.sigma - s.lambda2.unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn token_tracks_average(seed in any::<u64>(), variant in prop_oneof![Just(Variant::Prox), Just(Variant::Gradient)]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = gen_logistic(8, 6, 3, 0.01, &mut rng).unwrap();
        let chain = build_chain(&generate(&GraphSpec::new(GraphFamily::Cycle, 8, 0)).unwrap(), ChainKind::Simple).unwrap();
        let sampler = WalkSampler::new(&chain);
        let beta = default_beta(&problem, variant);
        let mut st = WalkmanState::init(&problem, beta, variant, &InitMode::Zeros).unwrap();
        let mut cur = 0;
        for _ in 0..300 {
            st.step(cur, &problem).unwrap();
            cur = sampler.next(cur, &mut rng);
            prop_assert!(st.token_residual() <= 1e-9);
        }
    }

    #[test]
    fn prox_is_stationary(seed in any::<u64>(), v in vector(4), beta in 0.5..20.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ls = gen_least_squares(1, 5, 4, 0.1, &mut rng).unwrap();
        let lg = gen_logistic(1, 10, 4, 0.01, &mut rng).unwrap();
        for f in [ls.local(0), lg.local(0)] {
            let y = f.prox(&v, beta).unwrap();
            let r = f.grad(&y) + (&y - &v) * beta;
            prop_assert!(r.norm() <= 1e-8 * (1.0 + v.norm()), "residual {}", r.norm());
        }
    }

    #[test]
    fn logistic_gradient_matches_differences(seed in any::<u64>(), x in vector(5)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = gen_logistic(2, 10, 5, 0.01, &mut rng).unwrap();
        let f = problem.local(1);
        let h = 1e-6;
        let g = f.grad(&x);
        for j in 0..5 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fd = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() <= 1e-5 * g.norm().max(1.0));
        }
    }

    // The valid spectral bracket for the least-squares dual Hessian is (0, beta/n].
    #[test]
    fn dual_hessian_spectrum_in_bracket(seed in any::<u64>(), n in 2usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let problem = gen_least_squares(n, 3, 2, 0.1, &mut rng).unwrap();
        let beta = default_beta(&problem, Variant::Prox);
        let eig = SymmetricEigen::new(h_beta_hessian(&problem, beta).unwrap()).eigenvalues;
        for &e in eig.iter() {
            prop_assert!(e > 0.0 && e <= beta / n as f64 + 1e-9, "eigenvalue {e}");
        }
    }
}

#[test]
fn dual_hessian_counterexample() {
    let q = Quadratic::new(
        Matrix::from_element(1, 1, 1.0),
        Vector::from_element(1, 0.0),
    )
    .unwrap();
    let problem =
        ConsensusProblem::least_squares(LeastSquaresData::new(vec![q.clone(), q])).unwrap();
    let mut eig: Vec<f64> = SymmetricEigen::new(h_beta_hessian(&problem, 8.0).unwrap())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eig.sort_by(f64::total_cmp);
    assert!((eig[0] - 0.4375).abs() < 1e-12);
    assert!((eig[1] - 3.5).abs() < 1e-12);
}
