//! Per-class accuracy, seen/unseen accuracies and their harmonic mean.

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inference::{predict_all, LabelSpace, Prediction, Setting, Split};
use crate::model::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassAccuracy {
    pub class: usize,
    pub correct: usize,
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerClassAccuracy {
    /// Classes with at least one sample, ascending by class ID.
    pub per_class: Vec<ClassAccuracy>,
    /// Classes of the requested set that had no samples.
    pub excluded: Vec<usize>,
    /// Unweighted mean over `per_class`; 0 when it is empty.
    pub mean: f64,
}

/// Top-1 accuracy per class and its unweighted mean.
///
/// Samples whose true label is outside `classes` are ignored. Classes without
/// samples are listed in `excluded` instead of being averaged in.
pub fn per_class_accuracy(
    predicted: &[usize],
    truth: &[usize],
    classes: &[usize],
) -> Result<PerClassAccuracy> {
    if predicted.len() != truth.len() {
        return Err(Error::shape(
            "per_class_accuracy",
            (predicted.len(), 1),
            (truth.len(), 1),
        ));
    }
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut tally = alloc::vec![(0usize, 0usize); sorted.len()];
    for (&p, &t) in predicted.iter().zip(truth) {
        if let Ok(k) = sorted.binary_search(&t) {
            tally[k].1 += 1;
            if p == t {
                tally[k].0 += 1;
            }
        }
    }
    let mut per_class = Vec::with_capacity(sorted.len());
    let mut excluded = Vec::new();
    for (&class, &(correct, count)) in sorted.iter().zip(&tally) {
        if count == 0 {
            excluded.push(class);
        } else {
            per_class.push(ClassAccuracy {
                class,
                correct,
                count,
                accuracy: correct as f64 / count as f64,
            });
        }
    }
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|c| c.accuracy).sum::<f64>() / per_class.len() as f64
    };
    Ok(PerClassAccuracy {
        per_class,
        excluded,
        mean,
    })
}

/// `2·ts·tr / (ts + tr)`, or 0 when both are 0.
pub fn harmonic_mean(ts: f64, tr: f64) -> f64 {
    if ts + tr > 0.0 {
        // Factored so equal arguments come back bit-exact.
        ts * (2.0 * tr / (ts + tr))
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub setting: Setting,
    /// Mean per-class accuracy over unseen classes.
    pub ts: f64,
    /// Mean per-class accuracy over seen classes (generalized only).
    pub tr: Option<f64>,
    /// Harmonic mean of `ts` and `tr` (generalized only).
    pub h: Option<f64>,
    pub unseen: PerClassAccuracy,
    pub seen: Option<PerClassAccuracy>,
}

/// Builds metrics from predictions already made in `setting`'s label space.
/// `seen_predictions` is ignored in the conventional setting.
pub fn metrics_from_predictions(
    ds: &Dataset,
    setting: Setting,
    unseen_predictions: &[Prediction],
    seen_predictions: &[Prediction],
) -> Result<Metrics> {
    let tally = |preds: &[Prediction], classes: &[usize]| {
        let predicted: Vec<usize> = preds.iter().map(|p| p.class).collect();
        let truth: Vec<usize> = preds.iter().map(|p| ds.labels()[p.sample]).collect();
        per_class_accuracy(&predicted, &truth, classes)
    };
    let unseen = tally(unseen_predictions, ds.unseen())?;
    let ts = unseen.mean;
    match setting {
        Setting::Conventional => Ok(Metrics {
            setting,
            ts,
            tr: None,
            h: None,
            unseen,
            seen: None,
        }),
        Setting::Generalized => {
            let seen = tally(seen_predictions, ds.seen())?;
            let tr = seen.mean;
            Ok(Metrics {
                setting,
                ts,
                tr: Some(tr),
                h: Some(harmonic_mean(ts, tr)),
                unseen,
                seen: Some(seen),
            })
        }
    }
}

/// Predicts the test splits the setting needs and scores them.
pub fn evaluate(params: &ModelParams, ds: &Dataset, setting: Setting) -> Result<Metrics> {
    let splits = ds.splits();
    if splits.test_unseen.is_empty() {
        return Err(Error::Config("evaluation needs a non-empty test_unseen split".into()));
    }
    if setting == Setting::Generalized && splits.test_seen.is_empty() {
        return Err(Error::Config(
            "generalized evaluation needs a non-empty test_seen split".into(),
        ));
    }
    let space = LabelSpace::for_dataset(ds, setting)?;
    let unseen = predict_all(params, ds, Split::TestUnseen, &space)?;
    let seen = match setting {
        Setting::Conventional => Vec::new(),
        Setting::Generalized => predict_all(params, ds, Split::TestSeen, &space)?,
    };
    metrics_from_predictions(ds, setting, &unseen, &seen)
}
