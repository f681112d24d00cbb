//! Acceptance suite. Runs without the test harness so the PASS/FAIL line of
//! every criterion reaches the terminal; exits non-zero if any criterion fails.

#[path = "../../core/tests/common/oracles.rs"]
mod oracles;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zsl::data::{decode_checkpoint, encode_checkpoint, generate_synthetic, Checkpoint, SynthConfig};
use zsl_core::training::{solve_semantic_subproblem, solve_visual_subproblem, TrainOptions};
use zsl_core::transductive::{default_pool, m_schedule};
use zsl_core::{
    check_gradients, embed_visual, evaluate, harmonic_mean, init_model, per_class_accuracy,
    predict, select_pseudo, train, train_with, transduce, Batch, Branch, Dataset, HyperParams,
    LabelSpace, Matrix, ModelParams, ParamId, Prediction, Setting, TrainSet,
};

/// Default hyperparameters with the documented loss weights.
fn default_hp() -> HyperParams {
    HyperParams {
        seed: 7,
        ..HyperParams::new(1.0, 1e-4)
    }
}

/// Narrower, faster configuration for the multi-run criteria.
fn benchmark_hp() -> HyperParams {
    HyperParams {
        lr: 1e-3,
        embed_dim: 256,
        epochs: 50,
        rounds: 10,
        m0: 40,
        batch_size: 64,
        seed: 7,
        ..HyperParams::new(1.0, 1.5e-2)
    }
}

fn benchmark() -> Dataset {
    generate_synthetic(&SynthConfig::default()).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

fn random_model(rng: &mut ChaCha8Rng, d_v: usize, d_s: usize, classes: usize, hp: &HyperParams) -> ModelParams {
    let mut p = init_model(d_v, d_s, classes, hp, rng.random()).unwrap();
    for id in [ParamId::VisualB, ParamId::SemanticB1, ParamId::SemanticB2, ParamId::ClassifierB] {
        let cols = p.param(id).cols();
        p.set_param(id, random_matrix(rng, 1, cols, 0.3)).unwrap();
    }
    p
}

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    let configs = 24;
    for _ in 0..configs {
        let n = rng.random_range(1..=8);
        let (d_v, d_s) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let classes = rng.random_range(2..=8);
        let hp = HyperParams {
            embed_dim: rng.random_range(1..=12),
            ..HyperParams::new(rng.random_range(0.0..2.0), rng.random_range(0.0..0.1))
        };
        let params = random_model(&mut rng, d_v, d_s, classes, &hp);
        let x = random_matrix(&mut rng, n, d_v, 1.0);
        let attributes = random_matrix(&mut rng, classes, d_s, 1.0);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
        let batch = Batch {
            x: &x,
            labels: &labels,
            attributes: &attributes,
        };
        for branch in [Branch::Visual, Branch::Semantic] {
            let r = check_gradients(&params, &batch, &hp, branch, 1e-6, 1e-6).map_err(|e| e.to_string())?;
            worst = worst.max(r.max_rel_error);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(
        worst < 1e-4 && secs < 10.0,
        format!("{configs} configs, max relative error {worst:.2e}, {secs:.2}s"),
    )
}

fn metric_exactness() -> Outcome {
    let h = harmonic_mean(0.714, 0.901);
    let ok = (h - 0.797).abs() <= 5e-4
        && harmonic_mean(0.0, 0.6) == 0.0
        && harmonic_mean(0.0, 0.0) == 0.0
        && harmonic_mean(0.42, 0.42) == 0.42;
    ensure(ok, format!("H(0.714, 0.901) = {h:.5}"))
}

fn schedule_exactness() -> Outcome {
    let got = m_schedule(40, 10);
    let want: Vec<usize> = (1..=10).map(|r| 40 * r).collect();
    ensure(got == want, format!("{got:?}"))
}

fn inductive_benchmark(ds: &Dataset) -> Outcome {
    let start = Instant::now();
    let (params, _) = train(ds, &default_hp(), None).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let m = evaluate(&params, ds, Setting::Conventional).map_err(|e| e.to_string())?;
    ensure(
        m.ts >= 0.80 && secs < 120.0,
        format!("conventional ts {:.3} in {secs:.1}s", m.ts),
    )
}

struct Transductive {
    inductive_ts: f64,
    inductive_h: f64,
    final_ts: f64,
    final_h: f64,
    first_precision: Option<f64>,
    secs: f64,
}

fn run_transductive(ds: &Dataset) -> Result<Transductive, String> {
    let start = Instant::now();
    let pool = default_pool(ds, Setting::Generalized);
    let run = transduce(ds, &benchmark_hp(), &pool, Setting::Generalized, None).map_err(|e| e.to_string())?;
    let last = run.rounds.last().ok_or("no rounds")?;
    Ok(Transductive {
        inductive_ts: run.inductive_metrics.ts,
        inductive_h: run.inductive_metrics.h.unwrap_or(0.0),
        final_ts: last.metrics.ts,
        final_h: last.metrics.h.unwrap_or(0.0),
        first_precision: run.rounds[0].precision,
        secs: start.elapsed().as_secs_f64(),
    })
}

fn transductive_improvement(t: &Transductive) -> Outcome {
    ensure(
        t.final_ts >= t.inductive_ts - 0.01 && t.final_h >= t.inductive_h - 0.01,
        format!(
            "ts {:.3} -> {:.3}, H {:.3} -> {:.3} ({:.0}s)",
            t.inductive_ts, t.final_ts, t.inductive_h, t.final_h, t.secs
        ),
    )
}

fn pseudo_precision(t: &Transductive) -> Outcome {
    match t.first_precision {
        Some(p) => ensure(p >= 0.70, format!("round-1 precision {p:.3}")),
        None => Err("round 1 selected no pseudo labels".into()),
    }
}

fn mean_embedding_norm(params: &ModelParams, ds: &Dataset) -> f64 {
    let x = ds.features().select_rows(&ds.splits().test_unseen).unwrap();
    let phi = embed_visual(params, &x).unwrap();
    (0..phi.rows())
        .map(|r| phi.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
        .sum::<f64>()
        / phi.rows() as f64
}

fn lambda_zero_collapse(ds: &Dataset) -> Outcome {
    let with = benchmark_hp();
    let without = HyperParams { lambda: 0.0, ..with.clone() };
    let (p1, _) = train(ds, &with, None).map_err(|e| e.to_string())?;
    let (p0, _) = train(ds, &without, None).map_err(|e| e.to_string())?;
    let (n1, n0) = (mean_embedding_norm(&p1, ds), mean_embedding_norm(&p0, ds));
    let ts0 = evaluate(&p0, ds, Setting::Conventional).map_err(|e| e.to_string())?.ts;
    let chance = 1.0 / ds.unseen().len() as f64;
    ensure(
        n0 < 0.1 * n1 || (ts0 - chance).abs() <= 0.1,
        format!("norm {n0:.3} vs {n1:.3}, lambda=0 ts {ts0:.3} (chance {chance:.2})"),
    )
}

fn freezing_and_determinism(ds: &Dataset) -> Outcome {
    let hp = HyperParams { epochs: 2, ..benchmark_hp() };
    let set = TrainSet::labeled(ds);
    let init = init_model(ds.visual_dim(), ds.semantic_dim(), ds.num_classes(), &hp, hp.seed)
        .map_err(|e| e.to_string())?;
    let snapshot = |p: &ModelParams, b: Branch| -> Vec<Matrix> {
        b.params().iter().map(|&id| p.param(id).clone()).collect()
    };

    let mut p = init.clone();
    solve_visual_subproblem(&mut p, ds, &set, &hp, 0).map_err(|e| e.to_string())?;
    let visual_frozen = snapshot(&p, Branch::Semantic) == snapshot(&init, Branch::Semantic);
    let before = p.clone();
    solve_semantic_subproblem(&mut p, ds, &set, &hp, 0).map_err(|e| e.to_string())?;
    let semantic_frozen = snapshot(&p, Branch::Visual) == snapshot(&before, Branch::Visual);

    let ckpt = |params: ModelParams, done| {
        encode_checkpoint(&Checkpoint {
            hp: hp.clone(),
            params,
            completed_iterations: done,
        })
    };
    let (a, _) = train(ds, &hp, None).map_err(|e| e.to_string())?;
    let (b, _) = train(ds, &hp, None).map_err(|e| e.to_string())?;
    let identical = ckpt(a.clone(), 2) == ckpt(b, 2);

    let one = HyperParams { epochs: 1, ..hp.clone() };
    let (mid, _) = train(ds, &one, None).map_err(|e| e.to_string())?;
    let restored = decode_checkpoint(&ckpt(mid, 1), "mid".as_ref()).map_err(|e| e.to_string())?;
    let opts = TrainOptions {
        start_iteration: restored.completed_iterations,
        clock: None,
    };
    let (resumed, _) = train_with(ds, &set, &hp, restored.params, opts).map_err(|e| e.to_string())?;
    let resume_exact = resumed == a;

    ensure(
        visual_frozen && semantic_frozen && identical && resume_exact,
        format!(
            "freezing {visual_frozen}/{semantic_frozen}, identical checkpoints {identical}, resume exact {resume_exact}"
        ),
    )
}

fn oracle_equivalences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let instances = 150;
    let (mut predict_ok, mut select_ok, mut tally_ok) = (0, 0, 0);
    for _ in 0..instances {
        // Nearest-neighbour prediction.
        let classes = rng.random_range(2..=7);
        let (d_v, d_s) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let hp = HyperParams {
            embed_dim: rng.random_range(1..=6),
            ..HyperParams::new(1.0, 0.0)
        };
        let params = random_model(&mut rng, d_v, d_s, classes, &hp);
        let attributes = random_matrix(&mut rng, classes, d_s, 2.0);
        let x = random_matrix(&mut rng, 1, d_v, 2.0);
        let mut candidates: Vec<usize> = (0..classes).filter(|_| rng.random_bool(0.7)).collect();
        if candidates.is_empty() {
            candidates.push(0);
        }
        let space = LabelSpace::from_candidates(Setting::Generalized, candidates.clone()).unwrap();
        let got = predict(&params, 0, x.row(0), &attributes, &space).unwrap();
        candidates.reverse();
        let (class, gap) = oracles::predict(&params, x.row(0), &attributes, &candidates);
        if got.class == class && (got.gap - gap).abs() <= 1e-9 * gap.max(1.0) {
            predict_ok += 1;
        }

        // Pseudo-label selection.
        let n = rng.random_range(0..30);
        let preds: Vec<Prediction> = (0..n)
            .map(|s| Prediction {
                sample: s,
                class: rng.random_range(0..5),
                gap: rng.random_range(0..6) as f64 * 0.5,
                distances: None,
            })
            .collect();
        let unseen = [2, 4];
        let m = rng.random_range(0..6);
        let sel = select_pseudo(&preds, &unseen, m, 1).unwrap();
        let triples: Vec<_> = preds.iter().map(|p| (p.sample, p.class, p.gap)).collect();
        let got: Vec<_> = sel.iter().map(|p| (p.sample, p.class, p.gap())).collect();
        if got == oracles::select(&triples, &unseen, m) {
            select_ok += 1;
        }

        // Per-class accuracy.
        let len = rng.random_range(0..40);
        let predicted: Vec<usize> = (0..len).map(|_| rng.random_range(0..5)).collect();
        let truth: Vec<usize> = (0..len).map(|_| rng.random_range(0..5)).collect();
        let acc = per_class_accuracy(&predicted, &truth, &[0, 1, 2, 3]).unwrap();
        let (rows, mean) = oracles::per_class(&predicted, &truth, &[0, 1, 2, 3]);
        let got: Vec<_> = acc.per_class.iter().map(|c| (c.class, c.correct, c.count)).collect();
        if got == rows && (acc.mean - mean).abs() < 1e-12 {
            tally_ok += 1;
        }
    }
    ensure(
        predict_ok == instances && select_ok == instances && tally_ok == instances,
        format!(
            "prediction {predict_ok}/{instances}, selection {select_ok}/{instances}, per-class {tally_ok}/{instances}"
        ),
    )
}

fn main() {
    let ds = benchmark();
    let mut failures = Vec::new();
    let mut report = |n: usize, name: &str, outcome: std::thread::Result<Outcome>| {
        let (ok, detail) = match outcome {
            Ok(Ok(d)) => (true, d),
            Ok(Err(d)) => (false, d),
            Err(_) => (false, "panicked".to_string()),
        };
        println!("{} [{n}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures.push(n);
        }
    };

    report(1, "gradient correctness", catch_unwind(gradient_correctness));
    report(2, "metric exactness", catch_unwind(metric_exactness));
    report(3, "schedule exactness", catch_unwind(schedule_exactness));
    report(4, "inductive synthetic benchmark", catch_unwind(|| inductive_benchmark(&ds)));
    match catch_unwind(AssertUnwindSafe(|| run_transductive(&ds))) {
        Ok(Ok(t)) => {
            report(5, "transductive improvement", Ok(transductive_improvement(&t)));
            report(6, "pseudo-label precision", Ok(pseudo_precision(&t)));
        }
        Ok(Err(e)) => {
            report(5, "transductive improvement", Ok(Err(e.clone())));
            report(6, "pseudo-label precision", Ok(Err(e)));
        }
        Err(p) => {
            report(5, "transductive improvement", Err(p));
            report(6, "pseudo-label precision", Ok(Err("panicked".into())));
        }
    }
    report(7, "lambda=0 collapse", catch_unwind(|| lambda_zero_collapse(&ds)));
    report(8, "freezing, determinism, resume", catch_unwind(|| freezing_and_determinism(&ds)));
    report(9, "oracle equivalences", catch_unwind(oracle_equivalences));

    if !failures.is_empty() {
        eprintln!("failed criteria: {failures:?}");
        std::process::exit(1);
    }
}
