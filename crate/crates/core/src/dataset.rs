//! The validated in-memory dataset.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{DatasetError, Error, Result};
use crate::numerics::Matrix;

/// Sample indices of the three splits.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub test_unseen: Vec<usize>,
    pub test_seen: Vec<usize>,
}

/// Visual features, labels, the class-level attribute table, the seen/unseen
/// class partition and the splits. Every constructor checks all invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    attributes: Matrix,
    seen: Vec<usize>,
    unseen: Vec<usize>,
    splits: Splits,
}

impl Dataset {
    /// Validates and assembles a dataset. `seen` and `unseen` are stored
    /// sorted.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        attributes: Matrix,
        mut seen: Vec<usize>,
        mut unseen: Vec<usize>,
        splits: Splits,
    ) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(DatasetError::LabelCount {
                features: n,
                labels: labels.len(),
            }
            .into());
        }
        let classes = attributes.rows();
        for &class in labels.iter().chain(&seen).chain(&unseen) {
            if class >= classes {
                return Err(DatasetError::MissingAttributes { class, classes }.into());
            }
        }
        seen.sort_unstable();
        unseen.sort_unstable();
        for list in [&seen, &unseen] {
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                return Err(DatasetError::DuplicateClass { class: w[0] }.into());
            }
        }
        if let Some(&class) = seen.iter().find(|c| unseen.binary_search(c).is_ok()) {
            return Err(DatasetError::SeenUnseenOverlap { class }.into());
        }

        let mut used = vec![false; n];
        let checks: [(&'static str, &Vec<usize>, &Vec<usize>); 3] = [
            ("train", &splits.train, &seen),
            ("test_unseen", &splits.test_unseen, &unseen),
            ("test_seen", &splits.test_seen, &seen),
        ];
        for (split, indices, allowed) in checks {
            for &index in indices {
                if index >= n {
                    return Err(DatasetError::SplitIndex {
                        split,
                        index,
                        samples: n,
                    }
                    .into());
                }
                let class = labels[index];
                if allowed.binary_search(&class).is_err() {
                    return Err(DatasetError::SplitViolation {
                        split,
                        sample: index,
                        class,
                    }
                    .into());
                }
                if core::mem::replace(&mut used[index], true) {
                    return Err(DatasetError::SplitOverlap { sample: index }.into());
                }
            }
        }
        Ok(Self {
            features,
            labels,
            attributes,
            seen,
            unseen,
            splits,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn attributes(&self) -> &Matrix {
        &self.attributes
    }

    pub fn seen(&self) -> &[usize] {
        &self.seen
    }

    pub fn unseen(&self) -> &[usize] {
        &self.unseen
    }

    pub fn splits(&self) -> &Splits {
        &self.splits
    }

    pub fn num_samples(&self) -> usize {
        self.features.rows()
    }

    /// Number of rows in the attribute table, i.e. every class the model can
    /// ever predict or classify.
    pub fn num_classes(&self) -> usize {
        self.attributes.rows()
    }

    pub fn visual_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn semantic_dim(&self) -> usize {
        self.attributes.cols()
    }

    pub fn is_unseen(&self, class: usize) -> bool {
        self.unseen.binary_search(&class).is_ok()
    }

    pub fn is_seen(&self, class: usize) -> bool {
        self.seen.binary_search(&class).is_ok()
    }

    /// Standardises every feature dimension to zero mean and unit variance
    /// using statistics of the training split. Constant dimensions are only
    /// centred. Returns the per-dimension `(mean, std)` applied.
    pub fn standardize_features(&mut self) -> Result<Vec<(f64, f64)>> {
        let train = &self.splits.train;
        if train.is_empty() {
            return Err(Error::Config("standardisation needs a non-empty train split".into()));
        }
        let d = self.features.cols();
        let count = train.len() as f64;
        let mut stats = vec![(0.0, 0.0); d];
        for &i in train {
            for (s, v) in stats.iter_mut().zip(self.features.row(i)) {
                s.0 += v;
            }
        }
        for s in &mut stats {
            s.0 /= count;
        }
        for &i in train {
            for (s, v) in stats.iter_mut().zip(self.features.row(i)) {
                s.1 += (v - s.0) * (v - s.0);
            }
        }
        for s in &mut stats {
            let std = libm::sqrt(s.1 / count);
            s.1 = if std > 0.0 { std } else { 1.0 };
        }
        for r in 0..self.features.rows() {
            for (v, s) in self.features.row_mut(r).iter_mut().zip(&stats) {
                *v = (*v - s.0) / s.1;
            }
        }
        Ok(stats)
    }
}
