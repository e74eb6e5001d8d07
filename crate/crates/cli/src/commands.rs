//! Subcommand implementations. Each one writes result records through a
//! [`Report`]; the header has already been written by the caller.

use std::fmt::Write as _;
use std::io::Write;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use robust_svm::consistency::{pathological_demo, run_consistency_experiment, PowerSchedule};
use robust_svm::kernel::{train_kernel_regularized, KernelSpec};
use robust_svm::libsvm::{load_dataset, load_dataset_with_dim, write_dataset};
use robust_svm::probabilistic::{
    bayes_regularizer, calibrate_chance, BudgetPrior, BuiltinDisturbance, DisturbanceModel,
};
use robust_svm::reduction::{box_robust_objective, conservatism_gap};
use robust_svm::solver::{train_regularized, SolverConfig, TrainResult};
use robust_svm::synthetic::{
    derive_seed, disturbance_budget, replicated_with_noise, rng_from, GaussianMixture, SampleGenerator,
    UniformNoise,
};
use robust_svm::uncertainty::{
    brute_force_worst_case, worst_case_loss_lower, worst_case_loss_upper, Aggregation, AtomicSet, BoxSet,
    SublinearSet, WorstCaseSet,
};
use robust_svm::{Dataset, LinearClassifier, NormSpec};

use crate::config::RunConfig;

pub const COMMANDS: &[(&str, &str)] = &[
    ("train", "fit c*||w|| + sum of hinge losses"),
    ("robust-eval", "worst-case losses of a classifier under norm-ball disturbances"),
    ("equivalence-check", "compare brute-force worst cases with the closed form on random instances"),
    ("calibrate", "choose c from a disturbance model or a budget prior, then optionally train"),
    ("kernel-train", "fit a kernel classifier with an RKHS-norm penalty"),
    ("consistency-exp", "pairing deficit, generalization bounds and test error across sample sizes"),
    ("pathological-demo", "train with the exact-equality kernel and measure test error"),
    ("generate", "write a synthetic dataset (and a disturbed copy) in libsvm format"),
];

/// JSON-lines sink.
pub struct Report<'a> {
    out: &'a mut dyn Write,
}

impl<'a> Report<'a> {
    pub fn new(out: &'a mut dyn Write) -> Self {
        Self { out }
    }

    pub fn emit(&mut self, record: Value) -> Result<()> {
        serde_json::to_writer(&mut *self.out, &record)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }
}

pub fn parse_norm(s: &str) -> Result<NormSpec> {
    Ok(match s {
        "l1" => NormSpec::L1,
        "l2" => NormSpec::L2,
        "linf" => NormSpec::Linf,
        other => bail!("unknown norm '{other}' (expected l1, l2 or linf)"),
    })
}

/// The norm whose balls induce `c·‖w‖` under `norm`.
fn disturbance_norm(norm: &NormSpec) -> NormSpec {
    match norm {
        NormSpec::L1 => NormSpec::Linf,
        NormSpec::Linf => NormSpec::L1,
        other => other.clone(),
    }
}

pub fn parse_kernel(s: &str) -> Result<KernelSpec> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let spec = match kind {
        "linear" => KernelSpec::Linear,
        "indicator" => KernelSpec::Indicator,
        "poly" => KernelSpec::Polynomial {
            degree: arg.parse().with_context(|| format!("polynomial degree in '{s}'"))?,
        },
        "rbf" => KernelSpec::Gaussian {
            gamma: arg.parse().with_context(|| format!("rbf gamma in '{s}'"))?,
        },
        other => bail!("unknown kernel '{other}' (expected linear, poly:D, rbf:GAMMA or indicator)"),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_prior(s: &str) -> Result<BudgetPrior> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let num = |t: &str| -> Result<f64> { t.trim().parse().with_context(|| format!("number '{t}' in prior '{s}'")) };
    let prior = match kind {
        "point-mass" => BudgetPrior::PointMass { c: num(rest)? },
        "uniform" => {
            let (lo, hi) = rest.split_once(':').context("uniform prior needs uniform:LO:HI")?;
            BudgetPrior::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            }
        }
        "discrete" => BudgetPrior::Discrete {
            atoms: rest
                .split(',')
                .map(|atom| {
                    let (c, p) = atom.split_once('@').context("discrete atoms are C@P")?;
                    Ok((num(c)?, num(p)?))
                })
                .collect::<Result<_>>()?,
        },
        other => bail!("unknown prior '{other}'"),
    };
    prior.validate()?;
    Ok(prior)
}

fn solver_config(cfg: &RunConfig) -> Result<SolverConfig> {
    let s = SolverConfig {
        max_iters: cfg.get("max-iters")?,
        initial_step: cfg.get("initial-step")?,
        tolerance: cfg.get("tolerance")?,
        averaging: cfg.get("averaging")?,
        seed: cfg.get("seed")?,
    };
    s.validate()?;
    Ok(s)
}

fn generator(cfg: &RunConfig) -> Result<Box<dyn SampleGenerator>> {
    let dim: usize = cfg.get("dim")?;
    Ok(match cfg.raw("generator") {
        "gaussian-blobs" | "replicated-with-noise" => Box::new(GaussianMixture {
            dim,
            separation: cfg.get("separation")?,
            sigma: cfg.get("sigma")?,
        }),
        "uniform-noise" => Box::new(UniformNoise { dim }),
        other => bail!("unknown generator '{other}'"),
    })
}

/// Training data from `data`, or `m` synthetic samples drawn from stream `stream`.
fn dataset(cfg: &RunConfig, path_key: &str, stream: u64, report: &mut Report) -> Result<Dataset> {
    if let Some(path) = cfg.path(path_key) {
        let loaded = load_dataset(path).with_context(|| format!("loading {path}"))?;
        if loaded.mapped_zero_labels {
            report.emit(json!({
                "record": "notice",
                "file": path,
                "mapped_zero_labels": loaded.mapped_zero_labels,
                "message": "labels 0 were read as -1",
            }))?;
        }
        return Ok(loaded.dataset);
    }
    let seed: u64 = cfg.get("seed")?;
    Ok(generator(cfg)?.draw(cfg.get("m")?, &mut rng_from(derive_seed(seed, stream)))?)
}

fn train_record(r: &TrainResult, ds: &Dataset, c: f64) -> Result<Value> {
    Ok(json!({
        "record": "train",
        "c": c,
        "m": ds.len(),
        "w": r.classifier.w,
        "b": r.classifier.b,
        "objective": r.objective,
        "iterations_used": r.iterations_used,
        "converged": r.converged,
        "separable": r.separable,
        "train_error": r.classifier.classification_error(ds)?,
        "train_avg_hinge": r.classifier.average_hinge(ds)?,
    }))
}

fn write_linear_model(path: &str, clf: &LinearClassifier) -> Result<()> {
    let mut text = String::from("w");
    for v in &clf.w {
        write!(text, " {v:?}")?;
    }
    writeln!(text, "\nb {:?}", clf.b)?;
    std::fs::write(path, text).with_context(|| format!("writing model {path}"))
}

fn fit(cfg: &RunConfig, ds: &Dataset, c: f64, report: &mut Report) -> Result<TrainResult> {
    let norm = parse_norm(cfg.raw("norm"))?;
    let r = train_regularized(ds, &norm, c, &solver_config(cfg)?)?;
    report.emit(train_record(&r, ds, c)?)?;
    if let Some(path) = cfg.path("model-out") {
        write_linear_model(path, &r.classifier)?;
    }
    Ok(r)
}

fn train(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let ds = dataset(cfg, "data", 0, report)?;
    fit(cfg, &ds, cfg.get("c")?, report)?;
    Ok(())
}

fn robust_eval(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let ds = dataset(cfg, "data", 0, report)?;
    let w: Vec<f64> = cfg.list("w")?;
    let clf = if w.is_empty() {
        fit(cfg, &ds, cfg.get("c")?, report)?.classifier
    } else {
        LinearClassifier::new(w, cfg.get("b")?)?
    };
    let norm = parse_norm(cfg.raw("norm"))?;
    let atomic = AtomicSet::norm_ball(disturbance_norm(&norm), cfg.get("radius")?)?;
    let set = SublinearSet::new(atomic.clone(), Aggregation::SumBudget);
    let bx = BoxSet::replicate(&atomic, ds.len());
    let upper = worst_case_loss_upper(&clf, &ds, &set)?;
    report.emit(json!({
        "record": "robust-eval",
        "w": clf.w,
        "b": clf.b,
        "empirical_hinge": clf.empirical_hinge(&ds)?,
        "support": atomic.support(&clf.w)?,
        "worst_case_lower": worst_case_loss_lower(&clf, &ds, &set)?,
        "worst_case_upper": upper.value,
        "upper_is_exact": upper.is_exact,
        "box_objective": box_robust_objective(&clf, &ds, &bx)?,
        "conservatism_gap": conservatism_gap(&clf, &ds, &set, &bx)?,
    }))
}

fn equivalence_check(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let instances: usize = cfg.get("instances")?;
    let m: usize = cfg.get("m")?;
    let dim: usize = cfg.get("dim")?;
    let resolution: usize = cfg.get("resolution")?;
    let slack: f64 = cfg.get("slack")?;
    let seed: u64 = cfg.get("seed")?;
    let norm = parse_norm(cfg.raw("norm"))?;
    let atomic = AtomicSet::norm_ball(disturbance_norm(&norm), cfg.get("radius")?)?;
    let set = SublinearSet::new(atomic, Aggregation::SumBudget);
    let gen = GaussianMixture {
        dim,
        separation: 0.0,
        sigma: 1.0,
    };
    let mut max_gap: f64 = 0.0;
    let mut max_sandwich: f64 = 0.0;
    for i in 0..instances {
        let mut rng = rng_from(derive_seed(seed, i as u64));
        // redraw until some sample is strictly misclassified
        let (ds, clf) = loop {
            let ds = gen.draw(m, &mut rng)?;
            let probe = gen.draw(1, &mut rng)?;
            let clf = LinearClassifier::new(probe.samples()[0].x.clone(), 0.0)?;
            if worst_case_loss_upper(&clf, &ds, &set)?.is_exact {
                break (ds, clf);
            }
        };
        let brute = brute_force_worst_case(&clf, &ds, WorstCaseSet::Sublinear(&set), resolution)?;
        let closed = clf.empirical_hinge(&ds)? + set.atomic.support(&clf.w)?;
        let lower = worst_case_loss_lower(&clf, &ds, &set)?;
        let upper = worst_case_loss_upper(&clf, &ds, &set)?.value;
        max_gap = max_gap.max((brute - closed).abs());
        max_sandwich = max_sandwich.max((lower - upper).abs());
        report.emit(json!({
            "record": "instance",
            "instance": i,
            "brute_force": brute,
            "closed_form": closed,
            "lower": lower,
            "upper": upper,
        }))?;
    }
    report.emit(json!({
        "record": "summary",
        "instances": instances,
        "max_abs_gap": max_gap,
        "max_lower_upper_gap": max_sandwich,
        "slack": slack,
        "passed": max_gap <= slack && max_sandwich <= 1e-9,
    }))
}

fn calibrate(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let do_train: bool = cfg.get("train")?;
    let ds = if do_train {
        Some(dataset(cfg, "data", 0, report)?)
    } else {
        None
    };
    let c = match cfg.raw("source") {
        "chance" => {
            let m = ds.as_ref().map_or(cfg.get("m"), |d| Ok(d.len()))?;
            let dim = ds.as_ref().map_or(cfg.get("dim"), |d| Ok(d.dim()))?;
            let scale: f64 = cfg.get("disturbance-scale")?;
            let law = match cfg.raw("disturbance") {
                "zero" => BuiltinDisturbance::Zero,
                "gaussian" => BuiltinDisturbance::Gaussian { sigma: scale },
                "uniform-ball" => BuiltinDisturbance::UniformInBall { radius: scale },
                "uniform-budget" => BuiltinDisturbance::UniformBudget { max_total: scale },
                other => bail!("unknown disturbance '{other}'"),
            };
            let norm = parse_norm(cfg.raw("norm"))?;
            let model = DisturbanceModel::builtin(law, disturbance_norm(&norm), m, dim)?;
            let eta: f64 = cfg.get("eta")?;
            let seed: u64 = cfg.get("seed")?;
            let c = calibrate_chance(&model, m, eta, cfg.get("draws")?, derive_seed(seed, 1))?;
            report.emit(json!({ "record": "calibration", "source": "chance", "eta": eta, "c": c }))?;
            c
        }
        "bayes" => {
            let prior = parse_prior(cfg.raw("prior"))?;
            let c = bayes_regularizer(&prior)?;
            report.emit(json!({ "record": "calibration", "source": "bayes", "prior": prior_json(&prior), "c": c }))?;
            c
        }
        other => bail!("unknown calibration source '{other}' (expected chance or bayes)"),
    };
    if let Some(ds) = ds {
        fit(cfg, &ds, c, report)?;
    }
    Ok(())
}

fn prior_json(p: &BudgetPrior) -> Value {
    match p {
        BudgetPrior::PointMass { c } => json!({ "kind": "point-mass", "c": c }),
        BudgetPrior::Uniform { lo, hi } => json!({ "kind": "uniform", "lo": lo, "hi": hi }),
        BudgetPrior::Discrete { atoms } => json!({ "kind": "discrete", "atoms": atoms }),
        BudgetPrior::Mixture { components } => json!({
            "kind": "mixture",
            "components": components.iter().map(|(p, w)| json!({ "weight": w, "prior": prior_json(p) })).collect::<Vec<_>>(),
        }),
    }
}

fn kernel_train(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let train = dataset(cfg, "data", 0, report)?;
    let test = match cfg.path("test-data") {
        Some(path) => load_dataset_with_dim(path, train.dim())?.dataset,
        None => dataset(cfg, "data", 1, report)?,
    };
    let spec = parse_kernel(cfg.raw("kernel"))?;
    let c: f64 = cfg.get("c")?;
    let r = train_kernel_regularized(&train, &spec, c, &solver_config(cfg)?)?;
    let kc = &r.classifier;
    report.emit(json!({
        "record": "kernel-train",
        "kernel": cfg.raw("kernel"),
        "c": c,
        "m": train.len(),
        "objective": r.objective,
        "rkhs_norm": kc.rkhs_norm()?,
        "b": kc.b,
        "iterations_used": r.iterations_used,
        "converged": r.converged,
        "train_error": kc.classification_error(&train)?,
        "train_avg_hinge": kc.average_hinge(&train)?,
        "test_error": kc.classification_error(&test)?,
    }))?;
    if let Some(path) = cfg.path("model-out") {
        let mut text = format!("kernel {}\nb {:?}\n", cfg.raw("kernel"), kc.b);
        for (a, x) in kc.alphas.iter().zip(&kc.anchors) {
            write!(text, "alpha {a:?}")?;
            for v in x {
                write!(text, " {v:?}")?;
            }
            text.push('\n');
        }
        std::fs::write(path, text).with_context(|| format!("writing model {path}"))?;
    }
    Ok(())
}

fn consistency_exp(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let schedule = PowerSchedule {
        scale: cfg.get("c-scale")?,
        exponent: cfg.get("c-exponent")?,
        floor: cfg.get("c-floor")?,
    };
    let gen = generator(cfg)?;
    let trend = run_consistency_experiment(
        gen.as_ref(),
        &cfg.list::<usize>("sizes")?,
        |m| schedule.c(m),
        cfg.get("trials")?,
        &solver_config(cfg)?,
        cfg.get("seed")?,
    )?;
    for t in &trend.trials {
        let mut v = serde_json::to_value(t)?;
        v["record"] = json!("trial");
        report.emit(v)?;
    }
    for s in &trend.summaries {
        let mut v = serde_json::to_value(s)?;
        v["record"] = json!("size-summary");
        report.emit(v)?;
    }
    report.emit(json!({
        "record": "trend",
        "gamma_nonincreasing": trend.gamma_nonincreasing,
        "bounds_hold": trend.bounds_hold,
    }))
}

fn pathological(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let gen = generator(cfg)?;
    let r = pathological_demo(
        gen.as_ref(),
        cfg.get("m")?,
        cfg.get("c")?,
        cfg.get("trials")?,
        &solver_config(cfg)?,
        cfg.get("seed")?,
    )?;
    for t in &r.trials {
        let mut v = serde_json::to_value(t)?;
        v["record"] = json!("trial");
        report.emit(v)?;
    }
    report.emit(json!({
        "record": "summary",
        "m": r.m,
        "c": r.c,
        "median_test_error": r.median_test_error,
        "max_train_avg_hinge": r.max_train_avg_hinge,
    }))
}

fn generate(cfg: &RunConfig, report: &mut Report) -> Result<()> {
    let seed: u64 = cfg.get("seed")?;
    let base = generator(cfg)?.draw(cfg.get("m")?, &mut rng_from(derive_seed(seed, 0)))?;
    let out = cfg.path("data-out").context("generate needs data-out")?;
    write_dataset(out, &base).with_context(|| format!("writing {out}"))?;
    let mut record = json!({
        "record": "generate",
        "generator": cfg.raw("generator"),
        "m": base.len(),
        "dim": base.dim(),
        "path": out,
    });
    if cfg.raw("generator") == "replicated-with-noise" {
        let copy = replicated_with_noise(&base, cfg.get("noise")?, derive_seed(seed, 1))?;
        let copy_out = cfg
            .path("copy-output")
            .context("replicated-with-noise needs copy-output")?;
        write_dataset(copy_out, &copy).with_context(|| format!("writing {copy_out}"))?;
        let norm = disturbance_norm(&parse_norm(cfg.raw("norm"))?);
        record["copy_path"] = json!(copy_out);
        record["disturbance_budget"] = json!(disturbance_budget(&base, &copy, &norm)?);
    }
    report.emit(record)
}

pub fn execute(command: &str, cfg: &RunConfig, report: &mut Report) -> Result<()> {
    match command {
        "train" => train(cfg, report),
        "robust-eval" => robust_eval(cfg, report),
        "equivalence-check" => equivalence_check(cfg, report),
        "calibrate" => calibrate(cfg, report),
        "kernel-train" => kernel_train(cfg, report),
        "consistency-exp" => consistency_exp(cfg, report),
        "pathological-demo" => pathological(cfg, report),
        "generate" => generate(cfg, report),
        other => bail!("unknown command '{other}'"),
    }
}
