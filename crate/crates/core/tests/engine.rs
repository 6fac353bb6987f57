use proptest::prelude::*;
use recloop::analysis::{bias_threshold, regret_bound, BoundParams};
use recloop::distributions::{NoiseSpec, PreferenceSpec};
use recloop::engine::{run_batch, run_episode, PreferencePrior, PreferenceSource, QualitySource, Retention, SimConfig};
use recloop::model::FeedbackChannel;
use recloop::scoring::ScoringAlgorithm;

fn scorer() -> impl Strategy<Value = ScoringAlgorithm> {
    prop_oneof![
        Just(ScoringAlgorithm::EmpiricalAverage),
        Just(ScoringAlgorithm::ClippedAverage),
        Just(ScoringAlgorithm::Ucb { sigma: 1.0 }),
        Just(ScoringAlgorithm::GaussianThompson { sigma: 1.0 }),
        Just(ScoringAlgorithm::Zero),
    ]
}

fn channel() -> impl Strategy<Value = FeedbackChannel> {
    prop_oneof![
        Just(FeedbackChannel::AbsoluteBiased),
        Just(FeedbackChannel::UnbiasedQuality),
        Just(FeedbackChannel::RelativeToExpectation),
    ]
}

fn prior() -> impl Strategy<Value = PreferencePrior> {
    prop_oneof![
        (2usize..20).prop_map(PreferencePrior::bernoulli_for),
        Just(PreferencePrior::normal_default()),
        Just(PreferencePrior::exponential_default()),
        Just(PreferencePrior::pareto_default()),
    ]
}

fn config(items: usize, prior: PreferencePrior, scorer: ScoringAlgorithm, channel: FeedbackChannel, seed: u64) -> SimConfig {
    SimConfig {
        qualities: QualitySource::unit_uniform(items),
        preferences: PreferenceSource::Prior { prior },
        noise: NoiseSpec::normal(1.0),
        channel,
        scorer,
        horizon: 200,
        seed,
        retention: Retention::Full,
        score_stride: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn regret_path_is_monotone_and_accounts_for_every_step(
        items in 2usize..12,
        prior in prior(),
        scorer in scorer(),
        channel in channel(),
        seed in any::<u64>(),
    ) {
        let result = run_episode(&config(items, prior, scorer, channel, seed)).unwrap();
        prop_assert_eq!(result.cumulative_regret.len(), 200);
        prop_assert!(result.cumulative_regret[0] >= 0.0);
        prop_assert!(result.cumulative_regret.windows(2).all(|w| w[1] >= w[0]));
        prop_assert_eq!(result.selection_counts.iter().sum::<u64>(), 200);
        prop_assert_eq!(result.records.len(), 200);
        let mut counts = vec![0u64; items];
        for r in &result.records {
            counts[r.chosen] += 1;
        }
        prop_assert_eq!(counts, result.selection_counts);
    }

    #[test]
    fn true_scores_have_no_regret(items in 2usize..12, prior in prior(), seed in any::<u64>()) {
        let oracle = ScoringAlgorithm::Oracle { q: Vec::new() };
        let result = run_episode(&config(items, prior, oracle, FeedbackChannel::AbsoluteBiased, seed)).unwrap();
        prop_assert_eq!(result.final_regret(), 0.0);
    }

    #[test]
    fn threshold_falls_with_p_and_k(k in 1usize..500, p in 0.001f64..0.5) {
        let t = bias_threshold(k, p).unwrap();
        prop_assert!(t > 0.0 && t < 1.0);
        prop_assert!(bias_threshold(k, p * 1.5).unwrap() <= t);
        prop_assert!(bias_threshold(k + 1, p).unwrap() <= t);
    }

    #[test]
    fn bound_grows_with_horizon(t in 1.0f64..1e6, extra in 0.0f64..1e6, delta in 0.01f64..1.0, c in 1e-4f64..1.0) {
        let mut params = BoundParams { delta_min: delta, sigma: 1.0, items: 5, horizon: t, c, alpha: 1.0 };
        let before = regret_bound(&params).unwrap();
        params.horizon = t + extra;
        prop_assert!(regret_bound(&params).unwrap() >= before);
    }
}

#[test]
fn batch_is_independent_of_thread_count() {
    let config = config(
        8,
        PreferencePrior::normal_default(),
        ScoringAlgorithm::GaussianThompson { sigma: 1.0 },
        FeedbackChannel::AbsoluteBiased,
        5,
    );
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_batch(&config, 12).unwrap())
    };
    let one = run(1);
    let many = run(4);
    assert_eq!(one.paths, many.paths);
    assert_eq!(one.selection_counts, many.selection_counts);
}

#[test]
fn shared_spec_matches_per_item_specs() {
    let spec = PreferenceSpec::Exponential { rate: 2.0 };
    let mut a = config(4, PreferencePrior::normal_default(), ScoringAlgorithm::EmpiricalAverage, FeedbackChannel::AbsoluteBiased, 3);
    a.qualities = QualitySource::Explicit { qualities: vec![0.1, 0.4, 0.2, 0.9] };
    a.preferences = PreferenceSource::Shared { spec };
    let mut b = a.clone();
    b.preferences = PreferenceSource::PerItem { specs: vec![spec; 4] };
    assert_eq!(run_episode(&a).unwrap().records, run_episode(&b).unwrap().records);
}
