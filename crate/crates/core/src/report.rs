//! Run reports written by `fit` and `stream`.
//!
//! Reports are deterministic for a given invocation; wall-clock timings are
//! kept out of them unless explicitly requested and go to a separate file.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{clustering_accuracy, nmi, LabelVector};
use crate::offline::{ObjectiveTrace, SolverConfig};
use crate::online::{Mode, StreamConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunMode {
    Offline,
    Online,
    MiniBatch,
    FullBatch,
}

impl From<Mode> for RunMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Online => RunMode::Online,
            Mode::MiniBatch => RunMode::MiniBatch,
            Mode::FullBatch => RunMode::FullBatch,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ConfigEcho {
    Offline(SolverConfig),
    Stream(StreamConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tweet_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tweet_nmi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub user_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub user_nmi: Option<f64>,
}

impl Metrics {
    /// Scores whichever of the two entity kinds has ground truth. Truth is
    /// restricted to the predicted ids first.
    pub fn compute(
        tweets: &LabelVector,
        users: &LabelVector,
        tweet_truth: Option<&LabelVector>,
        user_truth: Option<&LabelVector>,
    ) -> Result<Self> {
        let mut m = Metrics::default();
        if let Some(t) = tweet_truth {
            let t = t.restrict_to(tweets);
            m.tweet_accuracy = Some(clustering_accuracy(tweets, &t)?);
            m.tweet_nmi = Some(nmi(tweets, &t)?);
        }
        if let Some(t) = user_truth {
            let t = t.restrict_to(users);
            m.user_accuracy = Some(clustering_accuracy(users, &t)?);
            m.user_nmi = Some(nmi(users, &t)?);
        }
        Ok(m)
    }

    pub fn is_empty(&self) -> bool {
        *self == Metrics::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimestampRecord {
    pub timestamp: u64,
    pub tweets: usize,
    pub users: usize,
    pub iterations: usize,
    pub converged: bool,
    pub objective: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
    #[serde(skip_serializing_if = "Metrics::is_empty", default)]
    pub metrics: Metrics,
}

impl TimestampRecord {
    pub fn new(timestamp: u64, tweets: usize, users: usize, trace: &ObjectiveTrace) -> Self {
        TimestampRecord {
            timestamp,
            tweets,
            users,
            iterations: trace.iterations,
            converged: trace.converged,
            objective: trace.values.clone(),
            wall_ms: None,
            metrics: Metrics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: RunMode,
    /// Input path exactly as given on the command line.
    pub data: String,
    pub config: ConfigEcho,
    pub records: Vec<TimestampRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub timestamp: u64,
    pub wall_ms: f64,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, to_json(value)?).map_err(|e| Error::io(path, e))
}

pub fn write_report(report: &RunReport, path: &Path) -> Result<()> {
    write_json(report, path)
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
