//! Run reports (JSON Lines) and delimited exports.
//!
//! Every line of a report is one record tagged by `kind`: the configuration
//! echo, one record per outer training iteration, one per calibration round,
//! and metrics. Key names are part of the file format and do not change.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use zsl_core::eval::PerClassAccuracy;
use zsl_core::{HyperParams, LossBreakdown, Metrics, Prediction, PseudoSample, RoundReport, TrainLog};

use crate::data::{io_err, DataError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParamsRecord {
    pub lambda: f64,
    pub eta: f64,
    pub lr: f64,
    pub embed_dim: usize,
    pub epochs: usize,
    pub rounds: usize,
    pub m0: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl From<&HyperParams> for HyperParamsRecord {
    fn from(hp: &HyperParams) -> Self {
        Self {
            lambda: hp.lambda,
            eta: hp.eta,
            lr: hp.lr,
            embed_dim: hp.embed_dim,
            epochs: hp.epochs,
            rounds: hp.rounds,
            m0: hp.m0,
            batch_size: hp.batch_size,
            seed: hp.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub regression: f64,
    pub classification: f64,
    pub l2: f64,
    pub total: f64,
}

impl From<&LossBreakdown> for LossRecord {
    fn from(l: &LossBreakdown) -> Self {
        Self {
            regression: l.regression,
            classification: l.classification,
            l2: l.l2,
            total: l.total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracyRecord {
    pub class: usize,
    pub correct: usize,
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub setting: String,
    pub ts: f64,
    pub tr: Option<f64>,
    #[serde(rename = "H")]
    pub h: Option<f64>,
    pub unseen_per_class: Vec<ClassAccuracyRecord>,
    pub seen_per_class: Option<Vec<ClassAccuracyRecord>>,
    /// Classes with no test samples, left out of the averages.
    pub excluded: Vec<usize>,
}

fn per_class(p: &PerClassAccuracy) -> Vec<ClassAccuracyRecord> {
    p.per_class
        .iter()
        .map(|c| ClassAccuracyRecord {
            class: c.class,
            correct: c.correct,
            count: c.count,
            accuracy: c.accuracy,
        })
        .collect()
}

impl From<&Metrics> for MetricsRecord {
    fn from(m: &Metrics) -> Self {
        let mut excluded = m.unseen.excluded.clone();
        if let Some(seen) = &m.seen {
            excluded.extend(&seen.excluded);
        }
        excluded.sort_unstable();
        Self {
            setting: m.setting.as_str().into(),
            ts: m.ts,
            tr: m.tr,
            h: m.h,
            unseen_per_class: per_class(&m.unseen),
            seen_per_class: m.seen.as_ref().map(per_class),
            excluded,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Record {
    Config {
        run_id: String,
        command: String,
        manifest: String,
        setting: Option<String>,
        hyperparams: HyperParamsRecord,
        /// Seconds since the Unix epoch when the run started.
        timestamp: u64,
    },
    Iteration {
        run_id: String,
        /// 0 for inductive training, `r` for calibration round `r`.
        round: usize,
        iteration: usize,
        after_visual: LossRecord,
        after_semantic: LossRecord,
        elapsed_secs: f64,
    },
    Round {
        run_id: String,
        round: usize,
        m: usize,
        pseudo_count: usize,
        precision: Option<f64>,
        metrics: MetricsRecord,
    },
    Metrics {
        run_id: String,
        round: usize,
        metrics: MetricsRecord,
    },
}

/// An in-memory report, written as JSON Lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub run_id: String,
    pub records: Vec<Record>,
}

impl Report {
    pub fn new(run_id: impl Into<String>) -> Self {
        Self {
            run_id: run_id.into(),
            records: Vec::new(),
        }
    }

    pub fn config(
        &mut self,
        command: &str,
        manifest: &Path,
        setting: Option<&str>,
        hp: &HyperParams,
        timestamp: u64,
    ) {
        self.records.push(Record::Config {
            run_id: self.run_id.clone(),
            command: command.into(),
            manifest: manifest.display().to_string(),
            setting: setting.map(Into::into),
            hyperparams: hp.into(),
            timestamp,
        });
    }

    pub fn train_log(&mut self, round: usize, log: &TrainLog) {
        for it in &log.iterations {
            self.records.push(Record::Iteration {
                run_id: self.run_id.clone(),
                round,
                iteration: it.iteration,
                after_visual: (&it.after_visual).into(),
                after_semantic: (&it.after_semantic).into(),
                elapsed_secs: it.elapsed_secs,
            });
        }
    }

    pub fn round(&mut self, r: &RoundReport) {
        self.records.push(Record::Round {
            run_id: self.run_id.clone(),
            round: r.round,
            m: r.m,
            pseudo_count: r.pseudo_count,
            precision: r.precision,
            metrics: (&r.metrics).into(),
        });
    }

    pub fn metrics(&mut self, round: usize, m: &Metrics) {
        self.records.push(Record::Metrics {
            run_id: self.run_id.clone(),
            round,
            metrics: m.into(),
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialise"));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        std::fs::write(path, self.to_jsonl()).map_err(io_err(path))
    }
}

/// Parses a JSON Lines report back into records.
pub fn read_report(path: &Path) -> Result<Vec<Record>, DataError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|source| DataError::Manifest {
                path: path.into(),
                source,
            })
        })
        .collect()
}

/// `sample_index,true_class,predicted_class,gap` per prediction.
pub fn write_predictions(
    path: &Path,
    predictions: &[Prediction],
    labels: &[usize],
) -> Result<(), DataError> {
    let mut out = String::from("sample_index,true_class,predicted_class,gap\n");
    for p in predictions {
        out.push_str(&format!("{},{},{},{}\n", p.sample, labels[p.sample], p.class, p.gap));
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Appends `sample_index,pseudo_class,gap,round` rows, writing the header when
/// the file is new.
pub fn append_pseudo(path: &Path, pseudo: &[PseudoSample]) -> Result<(), DataError> {
    let fresh = !path.exists();
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut out = String::new();
    if fresh {
        out.push_str("sample_index,pseudo_class,gap,round\n");
    }
    for p in pseudo {
        out.push_str(&format!("{},{},{},{}\n", p.sample, p.class, p.gap(), p.round));
    }
    f.write_all(out.as_bytes()).map_err(io_err(path))
}
