//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::*;
use philaex::adversarial::{build_attack_set, AttackConfig, AttackSet};
use philaex::data::{train_test_split, Dataset, FeatureVector};
use philaex::evaluation::{good_explanation_curve, pcr_curve, EvalMode, Method};
use philaex::explainer::{select_core_features, select_positive_contributors};
use philaex::models::{
    evaluate_classifier, ForestParams, LogisticModel, LogisticParams, RandomForestModel, ScoreModel,
};
use philaex::ridge::ridge_fit;
use philaex::synth::{pdf_style, PdfStyleConfig};
use philaex::{explain, ExplainerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Bench {
    test: Dataset,
    forest: RandomForestModel,
    logistic: LogisticModel,
}

fn bench() -> &'static Bench {
    static B: OnceLock<Bench> = OnceLock::new();
    B.get_or_init(|| {
        let corpus = pdf_style(&PdfStyleConfig::default());
        let (train, test) = train_test_split(&corpus.dataset, 0.67, 0).unwrap();
        Bench {
            forest: RandomForestModel::train(&train, ForestParams::default()).unwrap(),
            logistic: LogisticModel::train(&train, LogisticParams::default()).unwrap(),
            test,
        }
    })
}

fn attack_set() -> &'static (AttackSet, Duration) {
    static A: OnceLock<(AttackSet, Duration)> = OnceLock::new();
    A.get_or_init(|| {
        let b = bench();
        let cfg = AttackConfig {
            attempts_per_seed: 1,
            ..AttackConfig::new((0..b.test.dim()).collect())
        };
        let t = Instant::now();
        let set = build_attack_set(&b.forest, &b.test, 60, &cfg).unwrap();
        (set, t.elapsed())
    })
}

type Outcome = (bool, String);

fn ridge_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut elapsed = Duration::ZERO;
    for _ in 0..100 {
        let cols = rng.gen_range(1..=10);
        let rows = rng.gen_range(cols + 2..=200);
        let x: Vec<f64> = (0..rows * cols).map(|_| f64::from(rng.gen_bool(0.5))).collect();
        let y: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.0..1.0)).collect();
        let t = Instant::now();
        let fit = ridge_fit(&x, rows, cols, &y, 1.0).unwrap();
        elapsed += t.elapsed();
        let (w, _) = ridge_oracle(&x, rows, cols, &y, 1.0);
        worst = worst.max(rel_err(&fit.weights, &w));
    }
    (
        worst <= 1e-8 && elapsed < Duration::from_secs(1),
        format!("max relative error {worst:.2e}, solver time {elapsed:.2?}"),
    )
}

fn selection_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = ExplainerConfig::default();
    let mut mismatches = 0;
    let cases = 300;
    for t in 0..cases {
        let m = rng.gen_range(1..=12);
        let x: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.6) { rng.gen_range(0.2..1.5) } else { 0.0 }).collect();
        let f: Box<dyn ScoreModel> = if t % 2 == 0 {
            Box::new(LogisticModel::new((0..m).map(|_| rng.gen_range(-3.0..3.0)).collect(), rng.gen_range(-2.0..2.0)))
        } else {
            Box::new(PairwiseModel {
                w: (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                pairs: (0..m).map(|_| (rng.gen_range(0..m), rng.gen_range(0..m), rng.gen_range(-3.0..3.0))).collect(),
                bias: rng.gen_range(-1.0..1.0),
            })
        };
        let fv = FeatureVector::from_dense(&x).unwrap();
        let core = select_core_features(&f, &fv, &cfg).unwrap();
        let got: Vec<(usize, f64)> = core.steps.iter().map(|s| (s.feature, s.gap)).collect();
        let ids = core.features();
        let pos = select_positive_contributors(&f, &fv, &ids, &cfg).unwrap().features();
        if got != brute_force_core(&f, &x, cfg.max_core_features)
            || pos != brute_force_positive(&f, &x, &ids, cfg.contribution_epsilon)
        {
            mismatches += 1;
        }
    }
    (mismatches == 0, format!("{mismatches} mismatches over {cases} models"))
}

fn determinism() -> Outcome {
    let b = bench();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = ExplainerConfig { seed: 17, ..Default::default() };
    let mut differ = 0;
    for _ in 0..50 {
        let s = &b.test.samples[rng.gen_range(0..b.test.len())];
        let a = explain(&b.forest, &s.features, &cfg).unwrap().with_sample_id(s.id).to_json();
        let c = explain(&b.forest, &s.features, &cfg).unwrap().with_sample_id(s.id).to_json();
        differ += usize::from(a != c);
    }
    (differ == 0, format!("{differ} of 50 reports differ between runs"))
}

fn planted_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut ours, mut random) = (0, 0);
    for t in 0..100u64 {
        let m = 40;
        let mut w: Vec<f64> = (0..m).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let p = rng.gen_range(0..m);
        let max_other = w.iter().map(|v: &f64| v.abs()).fold(0.0, f64::max);
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        w[p] = sign * 5.0 * max_other * rng.gen_range(1.0..1.5);
        let mut x = vec![0.0; m];
        x[p] = 1.0;
        let active = rng.gen_range(10..=20);
        while x.iter().filter(|&&v| v != 0.0).count() < active {
            x[rng.gen_range(0..m)] = 1.0;
        }
        // the bias puts the sample on the planted feature's side of the border
        let others: f64 = (0..m).filter(|&i| i != p).map(|i| w[i] * x[i]).sum();
        let f = LogisticModel::new(w.clone(), -w[p] / 2.0 - others);
        let x = FeatureVector::from_dense(&x).unwrap();
        let top = |r: philaex::AttributionReport| r.ranked().first().copied();
        ours += usize::from(top(explain(&f, &x, &ExplainerConfig::default()).unwrap()) == Some(p));
        random += usize::from(top(Method::Random { seed: 4 }.explain(&f, &x, t).unwrap()) == Some(p));
    }
    (
        ours >= 90 && random <= 20,
        format!("planted feature on top: philaex {ours}/100, random {random}/100"),
    )
}

fn attack_reproduction() -> Outcome {
    let (set, elapsed) = attack_set();
    let rate = set.success_rate();
    (
        set.samples.len() >= 50 && rate >= 0.8 && *elapsed < Duration::from_secs(300),
        format!(
            "{} evasive samples, success {:.1}% over {} attempts, {elapsed:.2?}",
            set.samples.len(),
            100.0 * rate,
            set.attempts
        ),
    )
}

fn fmt_curve(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(" ")
}

fn good_explanation_shape() -> Outcome {
    let b = bench();
    let (set, _) = attack_set();
    let ts: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let mut curves = Vec::new();
    for name in ["philaex", "random", "lime"] {
        let m = Method::parse(name, ExplainerConfig::default(), 6).unwrap();
        let reports: Vec<_> = set
            .samples
            .iter()
            .enumerate()
            .map(|(i, a)| m.explain(&b.forest, &a.sample(), i as u64).unwrap())
            .collect();
        let pairs: Vec<_> = set.samples.iter().zip(&reports).collect();
        curves.push(good_explanation_curve(&pairs, &ts, name).unwrap().values());
    }
    let monotone = curves.iter().all(|c| c.windows(2).all(|w| w[1] <= w[0]));
    let dominates = (0..=4).all(|i| curves[0][i] >= curves[1][i]);
    (
        monotone && dominates,
        format!(
            "philaex [{}], random [{}], lime [{}]",
            fmt_curve(&curves[0]),
            fmt_curve(&curves[1]),
            fmt_curve(&curves[2])
        ),
    )
}

fn fidelity_direction() -> Outcome {
    let b = bench();
    let data = Dataset {
        samples: b.test.samples.iter().step_by(4).cloned().collect(),
        vocabulary: b.test.vocabulary.clone(),
    };
    let ded_ks = [1, 5, 10, 20];
    let aug_ks = [1, 5, 10, 20, 30];
    let run = |name: &str, mode, ks: &[usize]| {
        let m = Method::parse(name, ExplainerConfig::default(), 7).unwrap();
        pcr_curve(&b.forest, &data, &m, mode, ks).unwrap().curve.values()
    };
    let (dp, dr) = (run("philaex", EvalMode::Deduction, &ded_ks), run("random", EvalMode::Deduction, &ded_ks));
    let (ap, ar) = (
        run("philaex", EvalMode::Augmentation, &aug_ks),
        run("random", EvalMode::Augmentation, &aug_ks),
    );
    let ok = dp.iter().zip(&dr).all(|(p, r)| p <= r) && ap.iter().zip(&ar).all(|(p, r)| p >= r);
    (
        ok,
        format!(
            "deduction k={ded_ks:?} philaex [{}] random [{}]; augmentation k={aug_ks:?} philaex [{}] random [{}]",
            fmt_curve(&dp),
            fmt_curve(&dr),
            fmt_curve(&ap),
            fmt_curve(&ar)
        ),
    )
}

fn timing() -> Outcome {
    let b = bench();
    let mut times: Vec<Duration> = b
        .test
        .samples
        .iter()
        .step_by(b.test.len() / 50)
        .take(50)
        .map(|s| {
            let t = Instant::now();
            explain(&b.forest, &s.features, &ExplainerConfig::default()).unwrap();
            t.elapsed()
        })
        .collect();
    times.sort();
    let median = times[times.len() / 2];
    (
        median <= Duration::from_secs(1),
        format!("median {median:.2?} over {} samples, max {:.2?}", times.len(), times[times.len() - 1]),
    )
}

fn model_accuracy() -> Outcome {
    let b = bench();
    let f = evaluate_classifier(&b.forest, &b.test).unwrap();
    let l = evaluate_classifier(&b.logistic, &b.test).unwrap();
    (
        f.accuracy >= 0.95 && l.accuracy >= 0.90,
        format!(
            "forest accuracy {:.4} (tpr {:.4}), logistic accuracy {:.4} (tpr {:.4})",
            f.accuracy, f.tpr, l.accuracy, l.tpr
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 ridge oracle equivalence", ridge_oracle_equivalence),
        ("2 selection oracle equivalence", selection_oracle_equivalence),
        ("3 determinism", determinism),
        ("4 planted-feature recovery", planted_recovery),
        ("5 attack protocol reproduction", attack_reproduction),
        ("6 good-explanation curve shape", good_explanation_shape),
        ("7 fidelity-test direction", fidelity_direction),
        ("8 timing sanity", timing),
        ("benchmark model accuracy", model_accuracy),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let (ok, detail) = catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|e| (false, format!("panicked: {:?}", e.downcast_ref::<String>().map(String::as_str).or(e.downcast_ref::<&str>().copied()))));
        failed += usize::from(!ok);
        println!("acceptance {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        println!("acceptance: {failed} criteria failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
