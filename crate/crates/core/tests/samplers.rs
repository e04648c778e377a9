use dualrec::distributions::RngStream;
use dualrec::{
    builtin_population, c_hat, estimate_mb, generate_dataset, resolve_phi_prior, run_ab_con,
    run_ab_flat, run_study, ChainConfig, DrsData, LambdaSource, NPrior, PUpdate, PhiKnowledge,
    PhiPriorPolicy, PointEstimator, StudyDesign, StudyMethod,
};
use proptest::prelude::*;

fn short(seed: u64) -> ChainConfig {
    ChainConfig {
        burn_in: 150,
        chains: 3,
        seed,
        ..ChainConfig::default()
    }
}

fn knowledge() -> impl Strategy<Value = PhiKnowledge> {
    prop_oneof![
        Just(PhiKnowledge::GreaterThanOne),
        Just(PhiKnowledge::LessThanOne),
        Just(PhiKnowledge::None),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ab_flat_states_stay_feasible(
        x11 in 1u64..120, x10 in 0u64..120, x01 in 0u64..120,
        k in knowledge(), seed in any::<u64>(), poisson in any::<bool>(),
    ) {
        let data = DrsData::new(x11, x10, x01).unwrap();
        let policy = PhiPriorPolicy::new(k);
        let (alpha, beta) = resolve_phi_prior(&policy, &data).unwrap();
        let prior = if poisson && x01 > 0 {
            NPrior::Poisson { lambda: LambdaSource::Fixed(2.0 * data.x0() as f64) }
        } else {
            NPrior::Jeffreys
        };
        let traces = match run_ab_flat(&data, &policy, prior, &short(seed)) {
            Ok(t) => t,
            // Persistent infeasibility is a reported outcome, not a bad state.
            Err(dualrec::Error::ChainFailure { .. }) => return Ok(()),
            Err(e) => panic!("unexpected error {e}"),
        };
        for t in &traces {
            prop_assert_eq!(t.len(), 300);
            for i in 0..t.len() {
                prop_assert!(t.n[i] >= data.x0());
                prop_assert!(t.p[i] > 0.0 && t.p[i] < 1.0);
                prop_assert!(t.phi[i] >= alpha && t.phi[i] <= beta);
                prop_assert!(alpha * t.p[i] < 1.0);
                prop_assert!(t.p1dot[i] > 0.0 && t.p1dot[i] < 1.0);
            }
        }
    }

    #[test]
    fn ab_con_states_stay_feasible(
        x11 in 1u64..120, x10 in 1u64..120, x01 in 1u64..120, seed in any::<u64>(),
    ) {
        let data = DrsData::new(x11, x10, x01).unwrap();
        let c = c_hat(&data).unwrap();
        let traces = match run_ab_con(&data, NPrior::Jeffreys, &short(seed)) {
            Ok(t) => t,
            Err(dualrec::Error::ChainFailure { .. }) => return Ok(()),
            Err(e) => panic!("unexpected error {e}"),
        };
        for t in &traces {
            for i in 0..t.len() {
                prop_assert!(t.n[i] >= data.x0());
                prop_assert!(t.phi[i] >= c && t.phi[i] <= t.phi_upper[i]);
                prop_assert!(t.p[i] > 0.0 && t.p[i] <= 1.0);
            }
        }
    }

    #[test]
    fn same_seed_same_chains(x11 in 1u64..60, x10 in 0u64..60, x01 in 0u64..60, seed in any::<u64>()) {
        let data = DrsData::new(x11, x10, x01).unwrap();
        let policy = PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne);
        let a = run_ab_flat(&data, &policy, NPrior::Jeffreys, &short(seed));
        let b = run_ab_flat(&data, &policy, NPrior::Jeffreys, &short(seed));
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
            (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
            _ => prop_assert!(false, "runs disagree on success"),
        }
    }
}

#[test]
fn chains_differ_between_seeds_and_between_chains() {
    let data = DrsData::new(181, 69, 144).unwrap();
    let policy = PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne);
    let a = run_ab_flat(&data, &policy, NPrior::Jeffreys, &short(1)).unwrap();
    let b = run_ab_flat(&data, &policy, NPrior::Jeffreys, &short(2)).unwrap();
    assert_ne!(a[0].n, b[0].n);
    assert_ne!(a[0].n, a[1].n);
}

#[test]
fn lloyd_update_keeps_p_consistent_with_n() {
    let data = DrsData::new(181, 69, 144).unwrap();
    let cfg = ChainConfig {
        p_update: PUpdate::Lloyd,
        ..short(3)
    };
    let policy = PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne);
    for t in run_ab_flat(&data, &policy, NPrior::Jeffreys, &cfg).unwrap() {
        for i in 1..t.len() {
            let expected = 144.0 / (t.n[i] - data.x1dot()) as f64;
            assert!((t.p[i] - expected).abs() < 1e-12);
        }
    }
}

#[test]
fn ab_con_poisson_prior_map_on_p7() {
    let spec = builtin_population("P7").unwrap();
    let method = StudyMethod::AbCon {
        n_prior: NPrior::Poisson {
            lambda: LambdaSource::MbEstimate,
        },
        chains: ChainConfig {
            burn_in: 7000,
            ..ChainConfig::default()
        },
    };
    let mut design = StudyDesign::new(spec, 50, method, 2024);
    design.estimator = PointEstimator::Map;
    let row = run_study(&design).unwrap();
    assert!(
        (483.0..=503.0).contains(&row.average),
        "average MAP {}",
        row.average
    );
}

#[test]
fn ab_flat_on_p3_recovers_population_size() {
    let spec = builtin_population("P3").unwrap();
    let method = StudyMethod::AbFlat {
        phi: PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne),
        n_prior: NPrior::Jeffreys,
        chains: ChainConfig::default(),
    };
    let row = run_study(&StudyDesign::new(spec, 50, method, 7)).unwrap();
    assert_eq!(row.failures, 0);
    assert!(
        (489.0..=509.0).contains(&row.average),
        "average {}",
        row.average
    );
}

#[test]
fn poisson_prior_mean_can_come_from_the_mb_estimate() {
    let spec = builtin_population("P1").unwrap();
    let data = generate_dataset(&spec, &mut RngStream::new(5, 0)).unwrap();
    let policy = PhiPriorPolicy::new(PhiKnowledge::GreaterThanOne);
    let prior = NPrior::Poisson {
        lambda: LambdaSource::MbEstimate,
    };
    let traces = run_ab_flat(&data, &policy, prior, &short(4)).unwrap();
    let mean = traces.iter().flat_map(|t| t.retained_n()).sum::<u64>() as f64
        / traces.iter().map(|t| t.retained_n().len()).sum::<usize>() as f64;
    let mb = estimate_mb(&data).unwrap();
    // The prior centres N on N̂_Mb, so the posterior cannot wander far from it.
    assert!((mean - mb).abs() < 0.5 * mb, "mean {mean}, M_b {mb}");
}
