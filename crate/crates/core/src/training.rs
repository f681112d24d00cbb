//! Alternating minimisation.
//!
//! Each outer iteration runs one epoch of minibatch Adam on the visual
//! subproblem (visual branch and classifier, semantic branch fixed) and then
//! one epoch on the semantic subproblem (semantic branch, visual branch
//! fixed). Adam moments persist across iterations of one run.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    batch_loss, forward_loss, init_model, Batch, Branch, HyperParams, LossBreakdown, ModelParams,
};
use crate::numerics::Matrix;
use crate::rng::{derive_seed, stream};

/// One training example: a row of the dataset and the class it is trained
/// towards. Pseudo-labelled test samples carry `is_pseudo`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainSample {
    pub index: usize,
    pub label: usize,
    pub is_pseudo: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrainSet {
    samples: Vec<TrainSample>,
}

impl TrainSet {
    /// The labelled training split.
    pub fn labeled(ds: &Dataset) -> Self {
        Self {
            samples: ds
                .splits()
                .train
                .iter()
                .map(|&index| TrainSample {
                    index,
                    label: ds.labels()[index],
                    is_pseudo: false,
                })
                .collect(),
        }
    }

    /// Builds a set from explicit samples, checking indices and labels
    /// against `ds`.
    pub fn from_samples(ds: &Dataset, samples: Vec<TrainSample>) -> Result<Self> {
        for s in &samples {
            if s.index >= ds.num_samples() {
                return Err(Error::Index {
                    what: "sample",
                    index: s.index,
                    bound: ds.num_samples(),
                });
            }
            if s.label >= ds.num_classes() {
                return Err(Error::Index {
                    what: "class",
                    index: s.label,
                    bound: ds.num_classes(),
                });
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TrainSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pseudo_count(&self) -> usize {
        self.samples.iter().filter(|s| s.is_pseudo).count()
    }

    fn gather(&self, ds: &Dataset, order: &[usize]) -> Result<(Matrix, Vec<usize>)> {
        let rows: Vec<usize> = order.iter().map(|&k| self.samples[k].index).collect();
        let labels = order.iter().map(|&k| self.samples[k].label).collect();
        Ok((ds.features().select_rows(&rows)?, labels))
    }
}

/// Losses recorded for one outer iteration, each evaluated over the whole
/// training set after the corresponding epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    /// Zero-based outer iteration.
    pub iteration: usize,
    pub after_visual: LossBreakdown,
    pub after_semantic: LossBreakdown,
    /// Seconds since the run started, as reported by the caller's clock.
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub iterations: Vec<IterationLog>,
}

/// Knobs for [`train_with`].
#[derive(Clone, Copy, Default)]
pub struct TrainOptions<'a> {
    /// First outer iteration to run; non-zero when resuming a checkpoint.
    pub start_iteration: usize,
    /// Wall clock in seconds; absent in `no_std` builds.
    pub clock: Option<&'a dyn Fn() -> f64>,
}

impl core::fmt::Debug for TrainOptions<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("TrainOptions")
            .field("start_iteration", &self.start_iteration)
            .field("clock", &self.clock.is_some())
            .finish()
    }
}

/// Full objective over a training set, accumulated in fixed-size chunks.
pub fn objective(
    params: &ModelParams,
    ds: &Dataset,
    set: &TrainSet,
    hp: &HyperParams,
) -> Result<LossBreakdown> {
    if set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    const CHUNK: usize = 512;
    let order: Vec<usize> = (0..set.len()).collect();
    let (mut regression, mut classification) = (0.0, 0.0);
    for chunk in order.chunks(CHUNK) {
        let (x, labels) = set.gather(ds, chunk)?;
        let batch = Batch {
            x: &x,
            labels: &labels,
            attributes: ds.attributes(),
        };
        let loss = batch_loss(params, &batch, hp)?;
        let w = chunk.len() as f64;
        regression += loss.regression * w;
        classification += loss.classification * w;
    }
    let n = set.len() as f64;
    Ok(LossBreakdown::compose(
        regression / n,
        classification / n,
        params.l2(),
        hp,
    ))
}

fn epoch_order(len: usize, hp: &HyperParams, tag: u64, iteration: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hp.seed, tag, iteration as u64, 0));
    order.shuffle(&mut rng);
    order
}

fn solve_subproblem(
    params: &mut ModelParams,
    ds: &Dataset,
    set: &TrainSet,
    hp: &HyperParams,
    iteration: usize,
    branch: Branch,
) -> Result<LossBreakdown> {
    if set.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let (tag, phase) = match branch {
        Branch::Visual => (stream::VISUAL_SHUFFLE, "visual"),
        Branch::Semantic => (stream::SEMANTIC_SHUFFLE, "semantic"),
    };
    let order = epoch_order(set.len(), hp, tag, iteration);
    for chunk in order.chunks(hp.batch_size) {
        let (x, labels) = set.gather(ds, chunk)?;
        let batch = Batch {
            x: &x,
            labels: &labels,
            attributes: ds.attributes(),
        };
        let (loss, grads) = forward_loss(params, &batch, hp, branch)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { iteration, phase });
        }
        for (id, g) in grads.iter() {
            params.adam_update(id, g, hp.lr)?;
        }
    }
    let loss = objective(params, ds, set, hp)?;
    if !loss.is_finite() {
        return Err(Error::Divergence { iteration, phase });
    }
    Ok(loss)
}

/// One epoch on the visual subproblem. Only the visual branch and the
/// classifier change; the semantic branch is left bit-identical.
pub fn solve_visual_subproblem(
    params: &mut ModelParams,
    ds: &Dataset,
    set: &TrainSet,
    hp: &HyperParams,
    iteration: usize,
) -> Result<LossBreakdown> {
    solve_subproblem(params, ds, set, hp, iteration, Branch::Visual)
}

/// One epoch on the semantic subproblem (regression plus L2 on the semantic
/// branch). The visual branch and classifier are left bit-identical.
pub fn solve_semantic_subproblem(
    params: &mut ModelParams,
    ds: &Dataset,
    set: &TrainSet,
    hp: &HyperParams,
    iteration: usize,
) -> Result<LossBreakdown> {
    solve_subproblem(params, ds, set, hp, iteration, Branch::Semantic)
}

/// Runs outer iterations `opts.start_iteration..hp.epochs` on `set`,
/// continuing from `params` as given (including its Adam state).
pub fn train_with(
    ds: &Dataset,
    set: &TrainSet,
    hp: &HyperParams,
    mut params: ModelParams,
    opts: TrainOptions<'_>,
) -> Result<(ModelParams, TrainLog)> {
    hp.validate()?;
    check_compatible(&params, ds)?;
    let mut log = TrainLog::default();
    for iteration in opts.start_iteration..hp.epochs {
        let after_visual = solve_visual_subproblem(&mut params, ds, set, hp, iteration)?;
        let after_semantic = solve_semantic_subproblem(&mut params, ds, set, hp, iteration)?;
        log.iterations.push(IterationLog {
            iteration,
            after_visual,
            after_semantic,
            elapsed_secs: opts.clock.map_or(0.0, |c| c()),
        });
    }
    Ok((params, log))
}

/// Trains on the labelled split for `hp.epochs` outer iterations.
///
/// Starts from a fresh initialisation seeded by `hp.seed`, or from
/// `warm_start` with its Adam state reset.
pub fn train(
    ds: &Dataset,
    hp: &HyperParams,
    warm_start: Option<ModelParams>,
) -> Result<(ModelParams, TrainLog)> {
    let params = initial_params(ds, hp, warm_start)?;
    train_with(ds, &TrainSet::labeled(ds), hp, params, TrainOptions::default())
}

pub(crate) fn initial_params(
    ds: &Dataset,
    hp: &HyperParams,
    warm_start: Option<ModelParams>,
) -> Result<ModelParams> {
    hp.validate()?;
    match warm_start {
        Some(mut p) => {
            p.reset_adam();
            Ok(p)
        }
        None => init_model(
            ds.visual_dim(),
            ds.semantic_dim(),
            ds.num_classes(),
            hp,
            hp.seed,
        ),
    }
}

pub(crate) fn check_compatible(params: &ModelParams, ds: &Dataset) -> Result<()> {
    let have = (params.visual_dim(), params.semantic_dim(), params.num_classes());
    let want = (ds.visual_dim(), ds.semantic_dim(), ds.num_classes());
    if have != want {
        return Err(Error::Config(alloc::format!(
            "model dims (d_v, d_s, classes) = {have:?} do not match dataset {want:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Splits;
    use crate::model::ParamId;
    use alloc::vec;

    pub(crate) fn toy() -> Dataset {
        let features = Matrix::from_rows(&[
            [1.0, 0.1, 0.0],
            [0.9, 0.0, 0.2],
            [0.0, 1.0, 0.1],
            [0.1, 0.8, 0.0],
            [0.0, 0.1, 1.0],
            [0.2, 0.0, 0.9],
        ]);
        let attributes = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.7, 0.7]]);
        Dataset::new(
            features,
            vec![0, 0, 1, 1, 2, 2],
            attributes,
            vec![0, 1],
            vec![2],
            Splits {
                train: vec![0, 1, 2, 3],
                test_unseen: vec![4, 5],
                test_seen: vec![],
            },
        )
        .unwrap()
    }

    fn hp() -> HyperParams {
        HyperParams {
            embed_dim: 6,
            epochs: 3,
            batch_size: 3,
            lr: 1e-2,
            seed: 5,
            ..HyperParams::new(1.0, 1e-3)
        }
    }

    #[test]
    fn zero_epochs_returns_initial_params() {
        let ds = toy();
        let h = HyperParams { epochs: 0, ..hp() };
        let init = init_model(3, 2, 3, &h, h.seed).unwrap();
        let (p, log) = train(&ds, &h, None).unwrap();
        assert_eq!(p, init);
        assert!(log.iterations.is_empty());
    }

    #[test]
    fn log_has_one_entry_per_iteration() {
        let (_, log) = train(&toy(), &hp(), None).unwrap();
        assert_eq!(log.iterations.len(), 3);
        assert_eq!(log.iterations[2].iteration, 2);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let ds = toy();
        let h = HyperParams { lr: 0.0, ..hp() };
        let init = init_model(3, 2, 3, &h, h.seed).unwrap();
        let (p, _) = train(&ds, &h, None).unwrap();
        for id in ParamId::ALL {
            assert_eq!(p.param(id), init.param(id));
        }
    }

    #[test]
    fn warm_start_resets_adam() {
        let ds = toy();
        let (p, _) = train(&ds, &hp(), None).unwrap();
        assert!(p.adam(ParamId::VisualW).t > 0);
        let h = HyperParams { epochs: 0, ..hp() };
        let (q, _) = train(&ds, &h, Some(p.clone())).unwrap();
        assert_eq!(q.adam(ParamId::VisualW).t, 0);
        assert_eq!(q.param(ParamId::VisualW), p.param(ParamId::VisualW));
    }

    #[test]
    fn mismatched_warm_start_is_rejected() {
        let ds = toy();
        let other = init_model(4, 2, 3, &hp(), 0).unwrap();
        assert!(train(&ds, &hp(), Some(other)).is_err());
    }

    #[test]
    fn divergence_names_the_iteration() {
        let ds = toy();
        let h = HyperParams { lr: 1e300, lambda: 1e300, ..hp() };
        match train(&ds, &h, None) {
            Err(Error::Divergence { iteration, .. }) => assert_eq!(iteration, 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
