//! Cluster readout and the two external quality measures.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Class index per entity id. Ids are unique by construction.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabelVector {
    entries: BTreeMap<String, usize>,
}

impl LabelVector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fails on a repeated id.
    pub fn from_pairs<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let mut out = LabelVector::new();
        for (id, class) in pairs {
            out.insert(id.into(), class)?;
        }
        Ok(out)
    }

    /// Labels keyed by position: `"0"`, `"1"`, ...
    pub fn from_indexed(classes: &[usize]) -> Self {
        LabelVector {
            entries: classes
                .iter()
                .enumerate()
                .map(|(i, &c)| (i.to_string(), c))
                .collect(),
        }
    }

    pub fn insert(&mut self, id: String, class: usize) -> Result<()> {
        if self.entries.contains_key(&id) {
            return Err(Error::DuplicateId {
                id,
                context: "label vector".into(),
            });
        }
        self.entries.insert(id, class);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<usize> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by id.
    pub fn iter(&self) -> impl Iterator<Item = (&str, usize)> {
        self.entries.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Restricts to the ids present in `other`.
    pub fn restrict_to(&self, other: &LabelVector) -> LabelVector {
        LabelVector {
            entries: self
                .entries
                .iter()
                .filter(|(id, _)| other.entries.contains_key(*id))
                .map(|(id, &c)| (id.clone(), c))
                .collect(),
        }
    }
}

/// Hard assignment of every row of a cluster matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub classes: Vec<usize>,
    /// Winning entry divided by the row sum; 0 for an all-zero row.
    pub scores: Vec<f64>,
    /// Rows that were all zero and therefore defaulted to class 0.
    pub zero_rows: Vec<usize>,
}

impl Assignment {
    pub fn labels<S: AsRef<str>>(&self, ids: &[S]) -> Result<LabelVector> {
        if ids.len() != self.classes.len() {
            return Err(Error::Inconsistent(format!(
                "{} ids for {} assigned rows",
                ids.len(),
                self.classes.len()
            )));
        }
        LabelVector::from_pairs(ids.iter().map(|s| s.as_ref().to_string()).zip(self.classes.iter().copied()))
    }
}

/// Row-wise argmax; ties go to the lowest index.
pub fn assign_clusters(s: &DenseMatrix) -> Assignment {
    let mut out = Assignment {
        classes: Vec::with_capacity(s.nrows()),
        scores: Vec::with_capacity(s.nrows()),
        zero_rows: Vec::new(),
    };
    for (i, row) in s.rows().into_iter().enumerate() {
        let mut best = 0;
        for (j, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = j;
            }
        }
        let total: f64 = row.sum();
        if total > 0.0 {
            out.scores.push(row[best] / total);
        } else {
            log::warn!("row {i} of the cluster matrix is all zero; assigned to cluster 0");
            out.zero_rows.push(i);
            out.scores.push(0.0);
        }
        out.classes.push(best);
    }
    out
}

/// Joint counts over ids present in both vectors; errors unless the id sets match.
fn contingency(pred: &LabelVector, truth: &LabelVector) -> Result<BTreeMap<(usize, usize), usize>> {
    if pred.len() != truth.len() || pred.entries.keys().any(|k| !truth.entries.contains_key(k)) {
        let missing = pred
            .entries
            .keys()
            .find(|k| !truth.entries.contains_key(*k))
            .or_else(|| truth.entries.keys().find(|k| !pred.entries.contains_key(*k)));
        return Err(Error::LabelMismatch(format!(
            "{} predicted vs {} true labels; first unmatched id: {}",
            pred.len(),
            truth.len(),
            missing.map(String::as_str).unwrap_or("-")
        )));
    }
    if pred.is_empty() {
        return Err(Error::LabelMismatch("no labels to compare".into()));
    }
    let mut table = BTreeMap::new();
    for (id, &c) in &pred.entries {
        *table.entry((c, truth.entries[id])).or_insert(0) += 1;
    }
    Ok(table)
}

/// `(1/n) Σ_o max_g |o ∩ g|`, each output cluster voting for its majority class.
pub fn clustering_accuracy(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let mut best: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(c, _), &count) in &table {
        let slot = best.entry(c).or_insert(0);
        *slot = (*slot).max(count);
    }
    let hits: usize = best.values().sum();
    Ok((hits as f64 / pred.len() as f64).clamp(0.0, 1.0))
}

/// Summing in value order makes the result independent of label numbering.
fn sorted_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = terms.collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().sum()
}

/// `2·I(C;G) / (H(C) + H(G))` with natural logarithms; 0 when both entropies vanish.
pub fn nmi(pred: &LabelVector, truth: &LabelVector) -> Result<f64> {
    let table = contingency(pred, truth)?;
    let n = pred.len() as f64;
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&(c, g), &count) in &table {
        *rows.entry(c).or_insert(0) += count;
        *cols.entry(g).or_insert(0) += count;
    }
    let entropy = |counts: &BTreeMap<usize, usize>| -> f64 {
        sorted_sum(counts.values().map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        }))
    };
    let h_pred = entropy(&rows);
    let h_truth = entropy(&cols);
    if h_pred + h_truth <= 0.0 {
        return Ok(0.0);
    }
    let mi = sorted_sum(table.iter().map(|(&(c, g), &count)| {
        let joint = count as f64;
        (joint / n) * (n * joint / (rows[&c] as f64 * cols[&g] as f64)).ln()
    }));
    Ok((2.0 * mi / (h_pred + h_truth)).clamp(0.0, 1.0))
}
