//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};

use recloop::analysis::{
    bias_threshold, classify_growth, delta_min, exploration_constant, regret_bound, BoundParams, ExplorationSource,
    Growth, GrowthOptions,
};
use recloop::distributions::{NoiseSpec, PreferenceSpec};
use recloop::engine::{run_batch, run_episode, PreferencePrior, PreferenceSource, QualitySource, Retention, SimConfig};
use recloop::model::FeedbackChannel;
use recloop::personalization::{
    als_fit, ridge_fit, run_two_stage, AlsOptions, LowRankConfig, LowRankParams, Rating, Regime, RidgeConfig,
    TwoStageConfig, TwoStageResult,
};
use recloop::scoring::ScoringAlgorithm;
use recloop_cli::{execute, parse_config};

/// Fixed before any acceptance run was looked at.
const MASTER_SEED: u64 = 20180409;

const K: usize = 10;
const T: u64 = 5000;
const REPS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn sim(preferences: PreferenceSource, scorer: ScoringAlgorithm, channel: FeedbackChannel) -> SimConfig {
    SimConfig {
        qualities: QualitySource::unit_uniform(K),
        preferences,
        noise: NoiseSpec::normal(1.0),
        channel,
        scorer,
        horizon: T,
        seed: MASTER_SEED,
        retention: Retention::SummaryOnly,
        score_stride: None,
    }
}

fn biased(preferences: PreferenceSource) -> SimConfig {
    sim(preferences, ScoringAlgorithm::EmpiricalAverage, FeedbackChannel::AbsoluteBiased)
}

fn unbiased_normal() -> SimConfig {
    let spec = PreferenceSpec::Normal { mu: 0.0, sigma: 1.0 };
    sim(
        PreferenceSource::Shared { spec },
        ScoringAlgorithm::ClippedAverage,
        FeedbackChannel::UnbiasedQuality,
    )
}

fn bernoulli_p() -> f64 {
    2.0 * (K as f64).ln() / (3.0 * K as f64) * 0.5
}

/// Average per-step increase over the last quarter relative to the whole path.
fn late_rate_ratio(path: &[f64]) -> f64 {
    let n = path.len();
    let q = 3 * n / 4;
    let late = (path[n - 1] - path[q - 1]) / (n - q) as f64;
    let overall = path[n - 1] / n as f64;
    late / overall
}

fn criterion_1() -> Outcome {
    let priors = [
        PreferencePrior::bernoulli_for(K),
        PreferencePrior::normal_default(),
        PreferencePrior::exponential_default(),
        PreferencePrior::pareto_default(),
    ];
    let mut worst = 0.0f64;
    for prior in priors {
        for s in 0..10 {
            let config = SimConfig {
                horizon: 2000,
                seed: MASTER_SEED + s,
                ..sim(
                    PreferenceSource::Prior { prior },
                    ScoringAlgorithm::Oracle { q: Vec::new() },
                    FeedbackChannel::AbsoluteBiased,
                )
            };
            let r = run_episode(&config).expect("oracle episode");
            worst = r.cumulative_regret.iter().fold(worst, |m, v| m.max(v.abs()));
        }
    }
    outcome(worst == 0.0, format!("max |regret| over 4 families x 10 seeds = {worst}"))
}

struct BiasedRun {
    family: &'static str,
    class: Growth,
    slope: f64,
    final_mean: f64,
    late_ratio: f64,
}

fn biased_runs() -> Vec<BiasedRun> {
    let sources = [
        (
            "bernoulli",
            PreferenceSource::Shared {
                spec: PreferenceSpec::Bernoulli { p: bernoulli_p() },
            },
        ),
        ("normal", PreferenceSource::Prior { prior: PreferencePrior::normal_default() }),
        ("exponential", PreferenceSource::Prior { prior: PreferencePrior::exponential_default() }),
        ("pareto", PreferenceSource::Prior { prior: PreferencePrior::pareto_default() }),
    ];
    sources
        .into_iter()
        .map(|(family, source)| {
            let batch = run_batch(&biased(source), REPS).expect("biased batch");
            let fit = classify_growth(&batch.mean, &GrowthOptions::default()).expect("fit");
            BiasedRun {
                family,
                class: fit.classification,
                slope: fit.linear_slope,
                final_mean: batch.final_mean(),
                late_ratio: late_rate_ratio(&batch.mean),
            }
        })
        .collect()
}

fn criterion_2(runs: &[BiasedRun]) -> Outcome {
    let pass = runs
        .iter()
        .all(|r| r.class == Growth::Linear && r.slope > 0.0 && r.late_ratio > 0.5);
    let detail = runs
        .iter()
        .map(|r| format!("{} {:?} slope={:.4} late/overall={:.2}", r.family, r.class, r.slope, r.late_ratio))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn criterion_3(runs: &[BiasedRun]) -> Outcome {
    let batch = run_batch(&unbiased_normal(), REPS).expect("unbiased batch");
    let fit = classify_growth(&batch.mean, &GrowthOptions::default()).expect("fit");
    let reference = runs[0].final_mean;
    let ratio = batch.final_mean() / reference;
    outcome(
        fit.classification == Growth::Logarithmic && ratio < 0.25,
        format!(
            "{:?} (r2 linear {:.3}, log {:.3}); final {:.2} = {:.3} x bernoulli biased {:.2}",
            fit.classification,
            fit.linear_r2,
            fit.log_r2,
            batch.final_mean(),
            ratio,
            reference
        ),
    )
}

fn criterion_4() -> Outcome {
    let qualities = vec![0.2, 0.5, 0.8];
    let config = SimConfig {
        qualities: QualitySource::Explicit {
            qualities: qualities.clone(),
        },
        ..unbiased_normal()
    };
    let batch = run_batch(&config, REPS).expect("batch");
    let spec = PreferenceSpec::Normal { mu: 0.0, sigma: 1.0 };
    let c = exploration_constant(&ExplorationSource::General { spec }, 3).expect("C");
    let bound = regret_bound(&BoundParams {
        delta_min: delta_min(&qualities).expect("gap"),
        sigma: 1.0,
        items: 3,
        horizon: T as f64,
        c,
        alpha: 1.0,
    })
    .expect("bound");
    outcome(
        batch.final_mean() < bound,
        format!("mean regret {:.2} < bound {:.1} (C = {:.5})", batch.final_mean(), bound, c),
    )
}

fn criterion_5() -> Outcome {
    let t = bias_threshold(100, 0.02).expect("threshold");
    let mut min = (f64::INFINITY, 0);
    for k in 2..=10_000usize {
        let v = bias_threshold(k, (k as f64).ln() / (2.0 * k as f64)).expect("threshold");
        if v < min.0 {
            min = (v, k);
        }
    }
    outcome(
        (t - 0.8690).abs() <= 0.0005 && min.0 > 0.7,
        format!("threshold(100, 0.02) = {t:.5}; sweep min {:.4} at K = {}", min.0, min.1),
    )
}

fn regimes(config: &TwoStageConfig, seed: u64) -> [TwoStageResult; 4] {
    Regime::ALL.map(|r| run_two_stage(config, r, seed).expect("two-stage run"))
}

/// `(random - iterated) / (oracle - zero)` with the random run's benchmarks.
fn iterated_drop(rs: &[TwoStageResult; 4]) -> f64 {
    let [_, _, random, iterated] = rs;
    (random.test_mean_value - iterated.test_mean_value) / (random.oracle_benchmark - random.zero_benchmark)
}

fn criterion_6() -> (Outcome, f64) {
    let config = TwoStageConfig::Ridge(RidgeConfig::default());
    let mut pass = true;
    let mut lines = Vec::new();
    let mut drops = Vec::new();
    for s in 0..5 {
        let rs = regimes(&config, MASTER_SEED + s);
        let [oracle, _, random, iterated] = &rs;
        let gap = random.oracle_benchmark - random.zero_benchmark;
        let random_ok = random.test_mean_value > oracle.test_mean_value;
        let close = (random.oracle_benchmark - random.test_mean_value).abs() <= 0.1 * random.oracle_benchmark.abs();
        let oracle_lift = (oracle.test_mean_value - oracle.zero_benchmark) / gap;
        let iter_ok = iterated.test_mean_value < random.test_mean_value;
        pass &= random_ok && close && oracle_lift < 0.25 && iter_ok;
        drops.push(iterated_drop(&rs));
        lines.push(format!(
            "seed+{s}: oracle {:.3} unbiased {:.3} random {:.3} iterated {:.3} [bench {:.3}/{:.3}] lift {:.2}",
            rs[0].test_mean_value,
            rs[1].test_mean_value,
            random.test_mean_value,
            iterated.test_mean_value,
            random.oracle_benchmark,
            random.zero_benchmark,
            oracle_lift
        ));
    }
    let drop = drops.iter().sum::<f64>() / drops.len() as f64;
    (outcome(pass, lines.join("; ")), drop)
}

fn criterion_7(ridge_drop: f64) -> Outcome {
    let config = TwoStageConfig::LowRank(LowRankConfig {
        model: LowRankParams {
            n_users: 400,
            n_items: 100,
            q: 4,
            ratings_per_user: 40,
            ..LowRankParams::default()
        },
        ..LowRankConfig::default()
    });
    let mut pass = true;
    let mut lines = Vec::new();
    let mut drops = Vec::new();
    for s in 0..5 {
        let rs = regimes(&config, MASTER_SEED + s);
        let [oracle, unbiased, random, iterated] = &rs;
        let best = [oracle, unbiased, iterated].iter().all(|r| r.test_mean_value < random.test_mean_value);
        pass &= best;
        drops.push(iterated_drop(&rs));
        lines.push(format!(
            "seed+{s}: oracle {:.3} unbiased {:.3} random {:.3} iterated {:.3}",
            oracle.test_mean_value, unbiased.test_mean_value, random.test_mean_value, iterated.test_mean_value
        ));
    }
    let drop = drops.iter().sum::<f64>() / drops.len() as f64;
    pass &= drop > ridge_drop;
    lines.push(format!("iterated drop {drop:.3} vs ridge {ridge_drop:.3} (share of benchmark gap)"));
    outcome(pass, lines.join("; "))
}

/// Gaussian elimination with partial pivoting on `(XᵀX + λI) β = Xᵀy`.
fn normal_equation_oracle(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Vec<f64> {
    let d = x[0].len();
    let mut a = vec![vec![0.0; d + 1]; d];
    for (row, &target) in x.iter().zip(y) {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += row[i] * row[j];
            }
            a[i][d] += row[i] * target;
        }
    }
    for (i, r) in a.iter_mut().enumerate() {
        r[i] += lambda;
    }
    for col in 0..d {
        let piv = (col..d).max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs())).unwrap();
        a.swap(col, piv);
        for r in col + 1..d {
            let f = a[r][col] / a[col][col];
            for c in col..=d {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut beta = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|j| a[i][j] * beta[j]).sum();
        beta[i] = (a[i][d] - s) / a[i][i];
    }
    beta
}

fn criterion_8() -> Outcome {
    use recloop::personalization::ridge::RidgeFit;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(MASTER_SEED);
    let mut worst_rel = 0.0f64;
    for _ in 0..100 {
        let x: Vec<Vec<f64>> = (0..50).map(|_| (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let y: Vec<f64> = (0..50).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let lambda = 0.3;
        let design = nalgebra::DMatrix::from_fn(50, 5, |i, j| x[i][j]);
        let targets = nalgebra::DVector::from_column_slice(&y);
        let RidgeFit { coefficients, .. } = ridge_fit(&design, &targets, lambda, false).expect("ridge");
        let oracle = normal_equation_oracle(&x, &y, lambda);
        let num: f64 = coefficients.iter().zip(&oracle).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = oracle.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst_rel = worst_rel.max(num / den);
    }

    let mut monotone = true;
    for problem in 0..20u64 {
        let (nu, ni) = (20 + problem as usize, 15);
        let mut ratings = Vec::new();
        for u in 0..nu {
            for i in 0..ni {
                if rng.random::<f64>() < 0.4 {
                    ratings.push(Rating {
                        user: u,
                        item: i,
                        value: rng.random::<f64>() * 5.0,
                    });
                }
            }
        }
        let fit = als_fit(
            &ratings,
            nu,
            ni,
            &AlsOptions {
                rank: 1 + problem as usize % 4,
                lambda: 0.1,
                sweeps: 20,
                seed: problem,
            },
        )
        .expect("als");
        monotone &= fit
            .objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
    }

    let dense: Vec<Rating> = [[1.0, 2.0], [2.0, 4.0]]
        .iter()
        .enumerate()
        .flat_map(|(u, row)| row.iter().enumerate().map(move |(i, &value)| Rating { user: u, item: i, value }))
        .collect();
    let fit = als_fit(
        &dense,
        2,
        2,
        &AlsOptions {
            rank: 1,
            lambda: 1e-6,
            sweeps: 50,
            seed: MASTER_SEED,
        },
    )
    .expect("rank-1 fit");
    let rmse = fit.rmse(&dense);
    outcome(
        worst_rel <= 1e-8 && monotone && rmse <= 1e-3,
        format!("ridge worst relative error {worst_rel:.2e}; ALS monotone on 20 problems: {monotone}; rank-1 RMSE {rmse:.2e}"),
    )
}

fn criterion_9() -> Outcome {
    let docs = [
        "seed = 9\n[parameters]\nitems = 6\nhorizon = 400\nreplications = 4\nnoise_sigma = 1.0\n",
        "scenario = \"bias_threshold_sweep\"\nseed = 9\n[parameters]\nitems_max = 300\n",
        "scenario = \"bound_report\"\nseed = 9\n",
        "scenario = \"two_stage_ridge\"\nseed = 9\n[parameters]\nwrite_datasets = true\n[parameters.experiment]\nobservations = 600\n[parameters.experiment.model]\nn_items = 8\np_dim = 3\n",
        "scenario = \"two_stage_low_rank\"\nseed = 9\n[parameters]\nwrite_datasets = true\n[parameters.experiment]\nsweeps = 5\n[parameters.experiment.model]\nn_users = 40\nn_items = 20\nq = 2\nratings_per_user = 5\n",
        "scenario = \"custom\"\nseed = 9\n[parameters]\nreplications = 3\n[parameters.simulation]\nhorizon = 300\nchannel = \"absolute_biased\"\nscore_stride = 7\nqualities = { source = \"explicit\", qualities = [0.1, 0.5, 0.9] }\npreferences = { source = \"shared\", spec = { family = \"exponential\", rate = 2.0 } }\nscorer = { kind = \"gaussian_thompson\", sigma = 1.0 }\nretention = { mode = \"full\" }\nnoise = { family = { family = \"normal\", sigma = 1.0 }, sigma_known = 1.0 }\n",
    ];
    let mut files = 0;
    let mut mismatched = Vec::new();
    for doc in docs {
        let config = match parse_config(doc) {
            Ok(c) => c,
            Err(e) => return outcome(false, format!("config did not parse: {e:#}")),
        };
        let a = execute(&config).expect("first run");
        let b = execute(&config).expect("second run");
        if a.files.len() != b.files.len() {
            mismatched.push(format!("{:?}: file count", config.scenario.kind()));
        }
        for (x, y) in a.files.iter().zip(&b.files) {
            files += 1;
            if x != y {
                mismatched.push(x.name.clone());
            }
        }
    }
    outcome(
        mismatched.is_empty(),
        format!("{files} files across 6 scenario kinds; mismatches: {mismatched:?}"),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, started: Instant, o: Outcome| {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {n}: {verdict} ({:.1}s) {}", started.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    };

    let t = Instant::now();
    report(1, t, criterion_1());
    let t = Instant::now();
    let runs = biased_runs();
    report(2, t, criterion_2(&runs));
    let t = Instant::now();
    report(3, t, criterion_3(&runs));
    let t = Instant::now();
    report(4, t, criterion_4());
    let t = Instant::now();
    report(5, t, criterion_5());
    let t = Instant::now();
    let (six, ridge_drop) = criterion_6();
    report(6, t, six);
    let t = Instant::now();
    report(7, t, criterion_7(ridge_drop));
    let t = Instant::now();
    report(8, t, criterion_8());
    let t = Instant::now();
    report(9, t, criterion_9());

    if failed == 0 {
        println!("acceptance: all 9 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 9 criteria failed");
        ExitCode::FAILURE
    }
}
