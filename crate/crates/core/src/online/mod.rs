//! Streaming tri-factorization with temporal regularization.
//!
//! Each timestamp brings a fresh batch of tweets and the users active in it.
//! Feature clusters are tied to a decayed aggregate of past feature clusters,
//! returning users to a decayed aggregate of their past rows. The mini-batch
//! and full-batch baselines live alongside in [`run_stream`].

mod step;
mod stream;
mod temporal;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::offline::{DataBundle, SolverConfig};

pub use step::{
    fit_online_step, init_online, online_kkt_residual, online_objective, online_sweep_with,
    online_update_hp, online_update_hu, online_update_sf, online_update_sp,
    online_update_su_evolving, online_update_su_new, prepare_step, OnlineStep, StepContext,
};
pub use stream::{concat_batches, run_stream, StepRecord};
pub use temporal::{
    aggregate_window, partition_users, Snapshot, TemporalState, UserPartition, WindowAggregate,
};

/// One timestamp's worth of data with its row → global id maps.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchData {
    pub timestamp: u64,
    pub bundle: DataBundle,
    pub user_ids: Vec<String>,
    pub tweet_ids: Vec<String>,
    pub feature_ids: Vec<String>,
}

impl BatchData {
    pub fn new(
        timestamp: u64,
        bundle: DataBundle,
        user_ids: Vec<String>,
        tweet_ids: Vec<String>,
        feature_ids: Vec<String>,
    ) -> Result<Self> {
        for (name, ids, want) in [
            ("user", &user_ids, bundle.m()),
            ("tweet", &tweet_ids, bundle.n()),
            ("feature", &feature_ids, bundle.l()),
        ] {
            if ids.len() != want {
                return Err(Error::Inconsistent(format!(
                    "batch {timestamp}: {} {name} ids for {want} rows",
                    ids.len()
                )));
            }
            let mut seen = BTreeSet::new();
            if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                return Err(Error::DuplicateId {
                    id: dup.clone(),
                    context: format!("{name} ids of batch {timestamp}"),
                });
            }
        }
        Ok(BatchData {
            timestamp,
            bundle,
            user_ids,
            tweet_ids,
            feature_ids,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Online,
    MiniBatch,
    FullBatch,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Online => "online",
            Mode::MiniBatch => "mini-batch",
            Mode::FullBatch => "full-batch",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub solver: SolverConfig,
    pub gamma: f64,
    pub tau: f64,
    pub window: usize,
    pub mode: Mode,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            solver: SolverConfig {
                alpha: 0.9,
                beta: 0.8,
                ..SolverConfig::default()
            },
            gamma: 0.2,
            tau: 0.9,
            window: 2,
            mode: Mode::Online,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.window < 2 {
            return Err(Error::Config(format!("window must be >= 2, got {}", self.window)));
        }
        Ok(())
    }
}
