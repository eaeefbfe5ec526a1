//! Window of past factors and the per-timestamp user split.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Factors kept from one past timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub timestamp: u64,
    pub sf: DenseMatrix,
    pub user_ids: Vec<String>,
    /// Rows aligned with `user_ids`.
    pub su: DenseMatrix,
    pub hp: DenseMatrix,
    pub hu: DenseMatrix,
}

impl Snapshot {
    fn row_of(&self, id: &str) -> Option<usize> {
        self.user_ids.iter().position(|u| u == id)
    }
}

/// The last `window − 1` snapshots, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalState {
    tau: f64,
    window: usize,
    buffer: VecDeque<Snapshot>,
}

impl TemporalState {
    pub fn new(tau: f64, window: usize) -> Result<Self> {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(Error::Config(format!("tau must lie in (0, 1], got {tau}")));
        }
        if window < 2 {
            return Err(Error::Config(format!("window must be >= 2, got {window}")));
        }
        Ok(TemporalState {
            tau,
            window,
            buffer: VecDeque::with_capacity(window - 1),
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn snapshots(&self) -> impl Iterator<Item = &Snapshot> {
        self.buffer.iter()
    }

    pub fn latest(&self) -> Option<&Snapshot> {
        self.buffer.back()
    }

    /// Users of the most recent timestamp, in their row order there.
    pub fn prev_registry(&self) -> &[String] {
        self.latest().map(|s| s.user_ids.as_slice()).unwrap_or(&[])
    }

    /// Row of `id` at the previous timestamp, `S_u(t−1)`.
    pub fn prev_row(&self, id: &str) -> Option<Array1<f64>> {
        let last = self.latest()?;
        last.row_of(id).map(|r| last.su.row(r).to_owned())
    }

    /// Appends a snapshot, evicting the oldest beyond `window − 1`.
    pub fn push(&mut self, snapshot: Snapshot) -> Result<()> {
        if let Some(last) = self.latest() {
            if snapshot.timestamp <= last.timestamp {
                return Err(Error::Inconsistent(format!(
                    "snapshot timestamp {} does not follow {}",
                    snapshot.timestamp, last.timestamp
                )));
            }
            if snapshot.sf.dim() != last.sf.dim() {
                return Err(Error::DimensionMismatch {
                    op: "temporal snapshot S_f",
                    left: last.sf.dim(),
                    right: snapshot.sf.dim(),
                });
            }
        }
        self.buffer.push_back(snapshot);
        while self.buffer.len() > self.window - 1 {
            self.buffer.pop_front();
        }
        Ok(())
    }
}

/// Decayed sums `S_fw = Σ τⁱ S_f(t−i)` and, per user, `S_uw = Σ τⁱ S_u(t−i)`
/// over the snapshots that contain the user.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowAggregate {
    pub sf: DenseMatrix,
    pub users: BTreeMap<String, Array1<f64>>,
}

/// `None` on an empty window (first timestamp).
pub fn aggregate_window(temporal: &TemporalState) -> Option<WindowAggregate> {
    let newest = temporal.latest()?;
    let mut sf = Array2::zeros(newest.sf.dim());
    let mut users: BTreeMap<String, Array1<f64>> = BTreeMap::new();
    let mut weight = 1.0;
    for snap in temporal.buffer.iter().rev() {
        weight *= temporal.tau;
        sf.scaled_add(weight, &snap.sf);
        for (id, row) in snap.user_ids.iter().zip(snap.su.rows()) {
            users
                .entry(id.clone())
                .and_modify(|acc| acc.scaled_add(weight, &row))
                .or_insert_with(|| &row * weight);
        }
    }
    Some(WindowAggregate { sf, users })
}

/// Split of users between the previous and current timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct UserPartition {
    pub disappeared: BTreeSet<String>,
    /// (global id, row at t−1, row at t)
    pub evolving: Vec<(String, usize, usize)>,
    /// (global id, row at t)
    pub new: Vec<(String, usize)>,
}

/// Set-difference split of `current` against `previous`; both are row-ordered
/// id lists.
pub fn partition_users(previous: &[String], current: &[String]) -> Result<UserPartition> {
    let index = |ids: &[String], what: &str| -> Result<BTreeMap<String, usize>> {
        let mut map = BTreeMap::new();
        for (row, id) in ids.iter().enumerate() {
            if map.insert(id.clone(), row).is_some() {
                return Err(Error::DuplicateId {
                    id: id.clone(),
                    context: what.to_string(),
                });
            }
        }
        Ok(map)
    };
    let prev = index(previous, "previous user registry")?;
    let cur = index(current, "current batch users")?;
    let mut out = UserPartition::default();
    for (row, id) in current.iter().enumerate() {
        match prev.get(id) {
            Some(&p) => out.evolving.push((id.clone(), p, row)),
            None => out.new.push((id.clone(), row)),
        }
    }
    out.disappeared = prev
        .keys()
        .filter(|id| !cur.contains_key(*id))
        .cloned()
        .collect();
    Ok(out)
}
