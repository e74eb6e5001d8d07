//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use robust_svm::consistency::{
    empirical_k, generalization_bound, max_pairings_exact, pathological_demo, run_consistency_experiment,
    PairingMetric,
};
use robust_svm::kernel::{
    feature_distance, rbf_feature_radius, sample_space_sup, verify_smoothness_condition, KernelClassifier,
    KernelSpec,
};
use robust_svm::probabilistic::{
    bayes_regularizer, calibrate_chance, chance_bound_check, BudgetPrior, BuiltinDisturbance, DisturbanceModel,
};
use robust_svm::reduction::{box_robust_objective, conservatism_gap, robustify, BaseRegularizer};
use robust_svm::solver::{
    grid_oracle_refined, train_regularized, train_robust, ConvexObjective, NormRegularized, SolverConfig,
};
use robust_svm::synthetic::{derive_seed, gaussian_blobs, rng_from, GaussianMixture};
use robust_svm::uncertainty::{
    brute_force_worst_case, worst_case_loss_lower, worst_case_loss_upper, Aggregation, AtomicSet, BoxSet,
    SublinearSet, WorstCaseSet,
};
use robust_svm::{Dataset, LinearClassifier, NormSpec};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_dataset(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Dataset {
    let rows = (0..m).map(|_| (0..n).map(|_| normal(rng)).collect()).collect();
    let labels: Vec<f64> = (0..m).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    Dataset::from_rows(rows, &labels).unwrap()
}

fn random_norm(rng: &mut ChaCha8Rng) -> NormSpec {
    match rng.random_range(0..3) {
        0 => NormSpec::L1,
        1 => NormSpec::L2,
        _ => NormSpec::Linf,
    }
}

/// Random instances where the probed classifier strictly misclassifies a sample.
fn equivalence_instances(count: usize) -> Vec<(Dataset, LinearClassifier, SublinearSet)> {
    let mut rng = rng_from(2024);
    let mut out = Vec::new();
    while out.len() < count {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=6);
        let ds = random_dataset(&mut rng, m, n);
        let w: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let clf = LinearClassifier::new(w, normal(&mut rng) * 0.5).unwrap();
        let set = SublinearSet::new(
            AtomicSet::norm_ball(random_norm(&mut rng), rng.random_range(0.1..1.5)).unwrap(),
            Aggregation::SumBudget,
        );
        if worst_case_loss_upper(&clf, &ds, &set).unwrap().is_exact {
            out.push((ds, clf, set));
        }
    }
    out
}

fn criterion_1() -> Outcome {
    let mut worst_gap: f64 = 0.0;
    let mut worst_sandwich: f64 = 0.0;
    let instances = equivalence_instances(120);
    for (ds, clf, set) in &instances {
        let brute = brute_force_worst_case(clf, ds, WorstCaseSet::Sublinear(set), 200).unwrap();
        let closed = clf.empirical_hinge(ds).unwrap() + set.atomic.support(&clf.w).unwrap();
        worst_gap = worst_gap.max((brute - closed).abs());
        let lower = worst_case_loss_lower(clf, ds, set).unwrap();
        let upper = worst_case_loss_upper(clf, ds, set).unwrap().value;
        worst_sandwich = worst_sandwich.max((lower - upper).abs());
    }
    ensure!(worst_gap <= 1e-2, "brute-force gap {worst_gap:.3e} exceeds 1e-2");
    ensure!(worst_sandwich <= 1e-9, "lower/upper gap {worst_sandwich:.3e} exceeds 1e-9");
    Ok(format!(
        "{} instances, max |brute - closed| = {worst_gap:.2e}, max |lower - upper| = {worst_sandwich:.2e}",
        instances.len()
    ))
}

fn criterion_2() -> Outcome {
    let cfg = SolverConfig::default();
    let bounds = [(-6.0, 6.0), (-6.0, 6.0), (-6.0, 6.0)];
    let mut same: f64 = 0.0;
    let mut grid_gap: f64 = 0.0;
    let mut cases = 0;
    for seed in 0..8u64 {
        let m = 6 + (seed as usize % 4) * 2;
        let ds = gaussian_blobs(m, 2, 1.0, 1.0, seed).unwrap();
        for c in [0.5, 2.0] {
            let set = SublinearSet::new(AtomicSet::norm_ball(NormSpec::L2, c).unwrap(), Aggregation::SumBudget);
            let robust = train_robust(&ds, &set, &cfg).unwrap();
            let reg = train_regularized(&ds, &NormSpec::L2, c, &cfg).unwrap();
            let grid = grid_oracle_refined(&ds, &NormSpec::L2, c, &bounds, 61, 8).unwrap();
            same = same.max((robust.objective - reg.objective).abs());
            grid_gap = grid_gap
                .max((robust.objective - grid.objective).abs())
                .max((reg.objective - grid.objective).abs());
            cases += 1;
        }
    }
    ensure!(same <= 1e-9, "robust vs regularized objectives differ by {same:.3e}");
    ensure!(grid_gap <= 1e-3, "solver vs grid oracle gap {grid_gap:.3e} exceeds 1e-3");
    Ok(format!("{cases} problems, |robust - regularized| = {same:.2e}, max |solver - grid| = {grid_gap:.2e}"))
}

fn criterion_3() -> Outcome {
    let mut min_gap = f64::INFINITY;
    for (ds, clf, set) in equivalence_instances(120) {
        let bx = BoxSet::replicate(&set.atomic, ds.len());
        min_gap = min_gap.min(conservatism_gap(&clf, &ds, &set, &bx).unwrap());
    }
    ensure!(min_gap >= -1e-12, "negative conservatism gap {min_gap:.3e}");

    let base = gaussian_blobs(6, 2, 0.5, 1.0, 3).unwrap();
    let clf = LinearClassifier::new(vec![0.8, -0.4], 0.1).unwrap();
    let atomic = AtomicSet::norm_ball(NormSpec::L2, 0.3).unwrap();
    let set = SublinearSet::new(atomic.clone(), Aggregation::SumBudget);
    let mut gaps = Vec::new();
    for copies in 1..=6 {
        let ds = base.replicate(copies).unwrap();
        let bx = BoxSet::replicate(&atomic, ds.len());
        let sau = robustify(&ds, &set, BaseRegularizer::Zero).unwrap().objective(&clf).unwrap();
        gaps.push(box_robust_objective(&clf, &ds, &bx).unwrap() - sau);
    }
    ensure!(
        gaps.windows(2).all(|w| w[1] > w[0]),
        "box minus sublinear objective is not strictly increasing: {gaps:?}"
    );
    Ok(format!(
        "min gap {min_gap:.2e} over 120 instances; replicated gaps {:.3} .. {:.3} for m = 6 .. 36",
        gaps[0],
        gaps[gaps.len() - 1]
    ))
}

fn criterion_4() -> Outcome {
    let eta = 0.1;
    let n_draws = 100_000;
    let m = 5;
    let dm = DisturbanceModel::builtin(BuiltinDisturbance::UniformBudget { max_total: 1.0 }, NormSpec::L2, m, 2)
        .unwrap();
    let c_star = calibrate_chance(&dm, m, eta, n_draws, 11).unwrap();
    ensure!((c_star - 0.9).abs() <= 0.02, "c* = {c_star} is not within 0.02 of 0.9");

    let ds = gaussian_blobs(m, 2, 1.0, 1.0, 4).unwrap();
    let clf = train_regularized(&ds, &NormSpec::L2, c_star, &SolverConfig::default())
        .unwrap()
        .classifier;
    let coverage = chance_bound_check(&clf, &ds, &dm, c_star, n_draws, 12).unwrap();
    let sigma = (eta * (1.0 - eta) / n_draws as f64).sqrt();
    let floor = 1.0 - eta - 3.0 * sigma;
    ensure!(coverage >= floor && coverage <= 1.0, "coverage {coverage} below {floor}");
    Ok(format!("c* = {c_star:.4}, coverage {coverage:.4} (floor {floor:.4})"))
}

fn criterion_5() -> Outcome {
    let cases = [
        (BudgetPrior::PointMass { c: 0.7 }, 0.7),
        (
            BudgetPrior::Discrete {
                atoms: vec![(0.2, 0.5), (1.0, 0.25), (2.0, 0.25)],
            },
            0.2 * 0.5 + 1.0 * 0.25 + 2.0 * 0.25,
        ),
        (BudgetPrior::Uniform { lo: 0.4, hi: 1.0 }, 0.7),
    ];
    for (prior, expected) in &cases {
        let got = bayes_regularizer(prior).unwrap();
        ensure!((got - expected).abs() <= 1e-12, "{prior:?}: {got} vs {expected}");
    }
    let c_bar = bayes_regularizer(&BudgetPrior::PointMass { c: 0.7 }).unwrap();
    let ds = gaussian_blobs(12, 2, 1.0, 1.0, 8).unwrap();
    let cfg = SolverConfig::default();
    let a = train_regularized(&ds, &NormSpec::L2, c_bar, &cfg).unwrap();
    let b = train_regularized(&ds, &NormSpec::L2, 0.7, &cfg).unwrap();
    ensure!(format!("{a:?}") == format!("{b:?}"), "training at c-bar differs from training at 0.7");
    Ok("prior means exact; training at c-bar = 0.7 is bit-identical".into())
}

fn criterion_6() -> Outcome {
    let mut rng = rng_from(6);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let gamma = rng.random_range(0.05..3.0);
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let z: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let d2: f64 = x.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
        let fd = feature_distance(&KernelSpec::Gaussian { gamma }, &x, &z).unwrap();
        worst = worst.max((fd * fd - (2.0 - 2.0 * (-gamma * d2).exp())).abs());
    }
    ensure!(worst <= 1e-12, "RBF identity off by {worst:.3e}");

    let gamma = 0.6;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
        .map(|_| {
            let x: Vec<f64> = (0..2).map(|_| normal(&mut rng)).collect();
            let z = x.iter().map(|v| v + 0.3 * normal(&mut rng)).collect();
            (x, z)
        })
        .collect();
    let rbf = verify_smoothness_condition(
        &KernelSpec::Gaussian { gamma },
        &pairs,
        |t| 2.0 - 2.0 * (-gamma * t).exp(),
        10.0,
    )
    .unwrap();
    ensure!(rbf.passed(), "RBF smoothness check failed on {:?}", rbf.violations);
    let ind = verify_smoothness_condition(&KernelSpec::Indicator, &pairs, |t| 2.0 - 2.0 * (-gamma * t).exp(), 10.0)
        .unwrap();
    ensure!(!ind.passed(), "indicator kernel unexpectedly passed");
    Ok(format!(
        "max identity error {worst:.2e}; RBF passes, indicator fails on {}/{} pairs",
        ind.violations.len(),
        ind.checked
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = rng_from(7);
    let slack = 1e-12;
    let mut probes = 0;
    let mut strict_gap = f64::NAN;
    for trial in 0..40 {
        let n = 1 + trial % 2;
        let gamma = rng.random_range(0.2..2.0);
        let spec = KernelSpec::Gaussian { gamma };
        let anchors: Vec<Vec<f64>> = (0..rng.random_range(1..5))
            .map(|_| (0..n).map(|_| normal(&mut rng)).collect())
            .collect();
        let alphas = anchors.iter().map(|_| normal(&mut rng)).collect();
        let kc = KernelClassifier::new(alphas, 0.0, anchors, spec).unwrap();
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let c = rng.random_range(0.0..2.0);
        let r = sample_space_sup(&kc, &x, c, 80).unwrap();
        let bound = r.feature_ball_bound.unwrap();
        ensure!(r.value <= bound + slack, "sup {} exceeds bound {bound}", r.value);
        probes += 1;
    }
    // w = Φ(x): the sample-space supremum is f(0) = 1, strictly below the bound
    for x in [vec![0.4], vec![0.4, -1.1]] {
        let kc = KernelClassifier::new(vec![1.0], 0.0, vec![x.clone()], KernelSpec::Gaussian { gamma: 1.0 }).unwrap();
        let r = sample_space_sup(&kc, &x, 1.0, 80).unwrap();
        let bound = r.feature_ball_bound.unwrap();
        let expected = 1.0 + rbf_feature_radius(|t: f64| (-t * t).exp(), 1.0).unwrap();
        ensure!((bound - expected).abs() <= 1e-12, "bound {bound} vs {expected}");
        ensure!(r.value <= bound + slack, "w = Phi(x) probe exceeds bound");
        strict_gap = bound - r.value;
        ensure!(strict_gap > 1.0, "w = Phi(x) probe not strict: gap {strict_gap}");
        probes += 1;
    }
    Ok(format!("{probes} probes hold; w = Phi(x) strict by {strict_gap:.4}"))
}

fn criterion_8() -> Outcome {
    let c = 0.3;
    let cfg = SolverConfig::default();
    let mut worst_err = f64::NEG_INFINITY;
    let mut worst_hinge = f64::NEG_INFINITY;
    for draw in 0..100u64 {
        let train = gaussian_blobs(50, 2, 2.0, 1.0, derive_seed(8, 2 * draw)).unwrap();
        let test = gaussian_blobs(50, 2, 2.0, 1.0, derive_seed(8, 2 * draw + 1)).unwrap();
        let clf = train_regularized(&train, &NormSpec::L2, c * 50.0, &cfg).unwrap().classifier;
        let pairing = max_pairings_exact(&train, &test, c, &PairingMetric::SampleL2).unwrap();
        let r = generalization_bound(&clf, &train, &test, c, &pairing, empirical_k(&train, &test)).unwrap();
        worst_err = worst_err.max(r.test_error - r.error_bound);
        worst_hinge = worst_hinge.max(r.test_avg_hinge - r.hinge_bound);
    }
    ensure!(worst_err <= 1e-12, "test error exceeds its bound by {worst_err:.3e}");
    ensure!(worst_hinge <= 1e-12, "test hinge exceeds its bound by {worst_hinge:.3e}");
    Ok(format!(
        "100 draws; max (error - bound) = {worst_err:.3}, max (hinge - bound) = {worst_hinge:.3}"
    ))
}

fn criterion_9() -> Outcome {
    // class signal |E[y x]| = 0.5 sits between c(50) and c(800), so shrinking c(m) is what lets the fit switch on
    let gen = GaussianMixture {
        dim: 2,
        separation: 1.0,
        sigma: 1.0,
    };
    let report = run_consistency_experiment(
        &gen,
        &[50, 200, 800],
        |m| (m as f64).powf(-0.125).max(0.05),
        20,
        &SolverConfig::default(),
        9,
    )
    .unwrap();
    let s = &report.summaries;
    ensure!(
        s.windows(2).all(|w| w[1].median_gamma < w[0].median_gamma),
        "median gamma not strictly decreasing: {:?}",
        s.iter().map(|x| x.median_gamma).collect::<Vec<_>>()
    );
    ensure!(
        s.windows(2).all(|w| w[1].median_test_error <= w[0].median_test_error),
        "median test error increases: {:?}",
        s.iter().map(|x| x.median_test_error).collect::<Vec<_>>()
    );
    ensure!(report.bounds_hold, "a bound failed on some trial");
    Ok(s.iter()
        .map(|x| format!("m={} gamma={:.3} err={:.3}", x.m, x.median_gamma, x.median_test_error))
        .collect::<Vec<_>>()
        .join(", "))
}

fn criterion_10() -> Outcome {
    let gen = GaussianMixture {
        dim: 2,
        separation: 2.0,
        sigma: 1.0,
    };
    let report = pathological_demo(&gen, 200, 0.01, 10, &SolverConfig::default(), 10).unwrap();
    for t in &report.trials {
        ensure!(t.train_avg_hinge < 0.1, "trial {} training hinge {}", t.trial, t.train_avg_hinge);
        ensure!(
            (0.45..=0.55).contains(&t.test_error),
            "trial {} test error {}",
            t.trial,
            t.test_error
        );
    }
    Ok(format!(
        "10 trials, max training avg hinge {:.2e}, median test error {:.3}",
        report.max_train_avg_hinge, report.median_test_error
    ))
}

fn criterion_11() -> Outcome {
    let mut rng = rng_from(11);
    let mut worst = f64::NEG_INFINITY;
    let mut checks = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..10);
        let ds = random_dataset(&mut rng, m, n);
        let norm = random_norm(&mut rng);
        let c = rng.random_range(0.0..3.0);
        let obj = NormRegularized {
            dataset: &ds,
            norm: &norm,
            c,
        };
        let w: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let b = normal(&mut rng);
        let (gw, gb) = obj.subgradient(&w, b);
        let f = obj.value(&w, b);
        for _ in 0..5 {
            let z: Vec<f64> = (0..n).map(|_| 2.0 * normal(&mut rng)).collect();
            let zb = 2.0 * normal(&mut rng);
            let linear: f64 = gw.iter().zip(z.iter().zip(&w)).map(|(g, (a, b))| g * (a - b)).sum::<f64>()
                + gb * (zb - b);
            // f(z) ≥ f(w) + ⟨g, z − w⟩
            worst = worst.max(f + linear - obj.value(&z, zb));
            checks += 1;
        }
    }
    ensure!(worst <= 1e-9, "subgradient inequality violated by {worst:.3e}");

    let ds = gaussian_blobs(12, 3, 1.0, 1.0, 1).unwrap();
    let cfg = SolverConfig {
        seed: 77,
        ..SolverConfig::default()
    };
    let runs: Vec<String> = (0..3)
        .map(|_| format!("{:?}", train_regularized(&ds, &NormSpec::L1, 0.8, &cfg).unwrap()))
        .collect();
    ensure!(runs.iter().all(|r| r == &runs[0]), "repeated runs differ");
    Ok(format!("{checks} subgradient checks (max violation {worst:.2e}); 3 identical runs"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome, Duration); 11] = [
        ("robust worst case equals hinge plus support", criterion_1, Duration::from_secs(120)),
        ("robust and regularized training agree with the grid oracle", criterion_2, Duration::from_secs(120)),
        ("box uncertainty is more conservative and grows with m", criterion_3, Duration::MAX),
        ("chance calibration of the budget", criterion_4, Duration::from_secs(60)),
        ("Bayesian budget tuning", criterion_5, Duration::MAX),
        ("RBF feature-distance identity and smoothness certification", criterion_6, Duration::MAX),
        ("sample-space supremum below the feature-ball bound", criterion_7, Duration::MAX),
        ("finite-sample generalization bounds hold", criterion_8, Duration::from_secs(120)),
        ("pairing deficit and test error trend down with m", criterion_9, Duration::from_secs(300)),
        ("indicator kernel memorizes but does not generalize", criterion_10, Duration::MAX),
        ("subgradient inequalities and determinism", criterion_11, Duration::MAX),
    ];
    let mut failures = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *budget => Err(format!("{detail}; took {elapsed:.1?}, over budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2}: {name} ({detail}) [{elapsed:.1?}]", i + 1),
            Err(reason) => {
                failures += 1;
                println!("FAIL criterion {:>2}: {name} ({reason}) [{elapsed:.1?}]", i + 1);
            }
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
