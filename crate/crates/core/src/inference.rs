//! Nearest class-embedding prediction.

use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::{embed_semantic, embed_visual, ModelParams};
use crate::numerics::{sq_dist, Matrix};

/// Conventional ZSL predicts among unseen classes only; generalized ZSL
/// among seen and unseen classes together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    Conventional,
    Generalized,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Conventional => "conventional",
            Setting::Generalized => "generalized",
        }
    }
}

/// The candidate classes of a prediction, kept sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    setting: Setting,
    candidates: Vec<usize>,
}

impl LabelSpace {
    pub fn for_dataset(ds: &Dataset, setting: Setting) -> Result<Self> {
        let candidates = match setting {
            Setting::Conventional => ds.unseen().to_vec(),
            Setting::Generalized => {
                let mut all: Vec<usize> = ds.seen().iter().chain(ds.unseen()).copied().collect();
                all.sort_unstable();
                all
            }
        };
        Self::from_candidates(setting, candidates)
    }

    /// Arbitrary candidate list (duplicates are dropped). Empty lists are a
    /// configuration error.
    pub fn from_candidates(setting: Setting, mut candidates: Vec<usize>) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Config("empty label space".into()));
        }
        candidates.sort_unstable();
        candidates.dedup();
        Ok(Self {
            setting,
            candidates,
        })
    }

    pub fn setting(&self) -> Setting {
        self.setting
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub sample: usize,
    pub class: usize,
    /// Squared distance to the winning class embedding.
    pub gap: f64,
    /// Squared distance to every candidate, in candidate order, when kept.
    pub distances: Option<Vec<f64>>,
}

/// Semantic embeddings of a label space's candidates, computed once and
/// reused for every query.
#[derive(Debug, Clone)]
pub struct ClassEmbeddings {
    classes: Vec<usize>,
    embeddings: Matrix,
}

impl ClassEmbeddings {
    pub fn new(params: &ModelParams, attributes: &Matrix, space: &LabelSpace) -> Result<Self> {
        let z = attributes.select_rows(space.candidates())?;
        Ok(Self {
            classes: space.candidates().to_vec(),
            embeddings: embed_semantic(params, &z)?,
        })
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn embeddings(&self) -> &Matrix {
        &self.embeddings
    }

    /// Assigns an already-embedded sample to its nearest class. Ties go to
    /// the smaller class ID.
    pub fn nearest(&self, sample: usize, embedded: &[f64], keep_distances: bool) -> Prediction {
        let mut best = (0, f64::INFINITY);
        let mut distances = keep_distances.then(|| Vec::with_capacity(self.classes.len()));
        for k in 0..self.classes.len() {
            let d = sq_dist(embedded, self.embeddings.row(k));
            if d < best.1 {
                best = (k, d);
            }
            if let Some(ds) = distances.as_mut() {
                ds.push(d);
            }
        }
        Prediction {
            sample,
            class: self.classes[best.0],
            gap: best.1,
            distances,
        }
    }
}

/// Predicts one feature row, keeping the full distance vector.
pub fn predict(
    params: &ModelParams,
    sample: usize,
    x: &[f64],
    attributes: &Matrix,
    space: &LabelSpace,
) -> Result<Prediction> {
    let classes = ClassEmbeddings::new(params, attributes, space)?;
    let row = Matrix::from_vec(1, x.len(), x.to_vec())?;
    let phi = embed_visual(params, &row)?;
    Ok(classes.nearest(sample, phi.row(0), true))
}

/// Predicts the listed dataset rows, in order. Distance vectors are dropped.
pub fn predict_indices(
    params: &ModelParams,
    ds: &Dataset,
    indices: &[usize],
    space: &LabelSpace,
) -> Result<Vec<Prediction>> {
    if indices.is_empty() {
        return Ok(Vec::new());
    }
    let classes = ClassEmbeddings::new(params, ds.attributes(), space)?;
    let mut out = Vec::with_capacity(indices.len());
    const CHUNK: usize = 512;
    for chunk in indices.chunks(CHUNK) {
        let phi = embed_visual(params, &ds.features().select_rows(chunk)?)?;
        for (r, &sample) in chunk.iter().enumerate() {
            out.push(classes.nearest(sample, phi.row(r), false));
        }
    }
    Ok(out)
}

/// Which test samples to predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    TestUnseen,
    TestSeen,
    /// Unseen test samples followed by seen test samples.
    TestAll,
}

impl Split {
    pub fn indices(self, ds: &Dataset) -> Vec<usize> {
        let s = ds.splits();
        match self {
            Split::TestUnseen => s.test_unseen.clone(),
            Split::TestSeen => s.test_seen.clone(),
            Split::TestAll => s.test_unseen.iter().chain(&s.test_seen).copied().collect(),
        }
    }
}

pub fn predict_all(
    params: &ModelParams,
    ds: &Dataset,
    split: Split,
    space: &LabelSpace,
) -> Result<Vec<Prediction>> {
    predict_indices(params, ds, &split.indices(ds), space)
}
