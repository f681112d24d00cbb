//! Pseudo-label calibration.
//!
//! An inductive model is trained first. Each calibration round `r = 1..=R`
//! then predicts the whole test pool, keeps for every unseen class the `M_r`
//! predicted samples with the smallest visual-semantic gap (`M_r = M0 · r`),
//! and retrains on the labelled split plus that pseudo set, warm-starting from
//! the previous parameters with fresh Adam moments. The pseudo set is
//! re-selected from scratch every round rather than accumulated.

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, Metrics};
use crate::inference::{predict_indices, LabelSpace, Prediction, Setting};
use crate::model::{HyperParams, ModelParams};
use crate::training::{initial_params, train_with, TrainLog, TrainOptions, TrainSample, TrainSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoSample {
    /// Row of the dataset.
    pub sample: usize,
    /// Always an unseen class.
    pub class: usize,
    /// Negative visual-semantic gap; larger is more confident.
    pub confidence: f64,
    pub round: usize,
}

impl PseudoSample {
    pub fn gap(&self) -> f64 {
        -self.confidence
    }
}

/// Per-class top-`m` selection among samples predicted as unseen classes.
///
/// For each unseen class the samples predicted as that class are ordered by
/// ascending gap (ties: smaller sample index) and the first `min(m, count)`
/// kept. Output is grouped by ascending class.
pub fn select_pseudo(
    predictions: &[Prediction],
    unseen: &[usize],
    m: usize,
    round: usize,
) -> Result<Vec<PseudoSample>> {
    if unseen.is_empty() {
        return Err(Error::Config("pseudo-labelling needs at least one unseen class".into()));
    }
    let mut classes = unseen.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut candidates: Vec<&Prediction> = predictions
        .iter()
        .filter(|p| classes.binary_search(&p.class).is_ok())
        .collect();
    candidates.sort_by(|a, b| {
        a.class
            .cmp(&b.class)
            .then(a.gap.total_cmp(&b.gap))
            .then(a.sample.cmp(&b.sample))
    });
    let mut out = Vec::new();
    let mut current = None;
    let mut taken = 0;
    for p in candidates {
        if current != Some(p.class) {
            current = Some(p.class);
            taken = 0;
        }
        if taken < m {
            out.push(PseudoSample {
                sample: p.sample,
                class: p.class,
                confidence: -p.gap,
                round,
            });
            taken += 1;
        }
    }
    Ok(out)
}

/// Selection budget for the round after `r`: `M0 · (r + 1)`.
pub fn update_m(m0: usize, r: usize) -> usize {
    m0 * (r + 1)
}

/// Budget per calibration round, rounds `1..=rounds`: `M0, 2·M0, …`.
pub fn m_schedule(m0: usize, rounds: usize) -> Vec<usize> {
    let mut m = m0;
    let mut out = Vec::with_capacity(rounds);
    for r in 1..=rounds {
        out.push(m);
        m = update_m(m0, r);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    /// 1-based calibration round.
    pub round: usize,
    pub m: usize,
    pub pseudo_count: usize,
    /// Fraction of pseudo labels equal to the ground truth; `None` for an
    /// empty pseudo set.
    pub precision: Option<f64>,
    pub pseudo: Vec<PseudoSample>,
    pub train_log: TrainLog,
    /// Metrics of the model retrained in this round.
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransductiveRun {
    pub params: ModelParams,
    /// The inductive model's training log and metrics (round 0).
    pub inductive_log: TrainLog,
    pub inductive_metrics: Metrics,
    pub rounds: Vec<RoundReport>,
}

/// The pool the setting draws pseudo labels from: unseen test samples in the
/// conventional setting, all test samples in the generalized one.
pub fn default_pool(ds: &Dataset, setting: Setting) -> Vec<usize> {
    let s = ds.splits();
    match setting {
        Setting::Conventional => s.test_unseen.clone(),
        Setting::Generalized => {
            let mut pool: Vec<usize> = s.test_unseen.iter().chain(&s.test_seen).copied().collect();
            pool.sort_unstable();
            pool
        }
    }
}

/// Fraction of pseudo labels that match the dataset's labels.
pub fn pseudo_precision(ds: &Dataset, pseudo: &[PseudoSample]) -> Option<f64> {
    if pseudo.is_empty() {
        return None;
    }
    let hits = pseudo
        .iter()
        .filter(|p| ds.labels()[p.sample] == p.class)
        .count();
    Some(hits as f64 / pseudo.len() as f64)
}

fn check_pool(ds: &Dataset, pool: &[usize]) -> Result<()> {
    let mut train = ds.splits().train.clone();
    train.sort_unstable();
    for &i in pool {
        if i >= ds.num_samples() {
            return Err(Error::Index {
                what: "pool sample",
                index: i,
                bound: ds.num_samples(),
            });
        }
        if train.binary_search(&i).is_ok() {
            return Err(Error::Config(alloc::format!(
                "test pool sample {i} is also a labelled training sample"
            )));
        }
    }
    Ok(())
}

/// Inductive training followed by `hp.rounds` pseudo-label calibration rounds.
///
/// Ground-truth labels of the pool are read only to fill in
/// [`RoundReport::precision`] and the metrics.
pub fn transduce(
    ds: &Dataset,
    hp: &HyperParams,
    pool: &[usize],
    setting: Setting,
    clock: Option<&dyn Fn() -> f64>,
) -> Result<TransductiveRun> {
    check_pool(ds, pool)?;
    if ds.unseen().is_empty() {
        return Err(Error::Config("pseudo-labelling needs at least one unseen class".into()));
    }
    let opts = TrainOptions {
        start_iteration: 0,
        clock,
    };
    let labeled = TrainSet::labeled(ds);
    let init = initial_params(ds, hp, None)?;
    let (mut params, inductive_log) = train_with(ds, &labeled, hp, init, opts)?;
    let inductive_metrics = evaluate(&params, ds, setting)?;
    let space = LabelSpace::for_dataset(ds, setting)?;

    let mut rounds = Vec::with_capacity(hp.rounds);
    for (r, m) in m_schedule(hp.m0, hp.rounds).into_iter().enumerate() {
        let round = r + 1;
        let predictions = predict_indices(&params, ds, pool, &space)?;
        let pseudo = select_pseudo(&predictions, ds.unseen(), m, round)?;
        let mut samples = labeled.samples().to_vec();
        samples.extend(pseudo.iter().map(|p| TrainSample {
            index: p.sample,
            label: p.class,
            is_pseudo: true,
        }));
        let set = TrainSet::from_samples(ds, samples)?;
        let warm = initial_params(ds, hp, Some(params))?;
        let (next, train_log) = train_with(ds, &set, hp, warm, opts)?;
        params = next;
        let metrics = evaluate(&params, ds, setting)?;
        rounds.push(RoundReport {
            round,
            m,
            pseudo_count: pseudo.len(),
            precision: pseudo_precision(ds, &pseudo),
            pseudo,
            train_log,
            metrics,
        });
    }
    Ok(TransductiveRun {
        params,
        inductive_log,
        inductive_metrics,
        rounds,
    })
}
