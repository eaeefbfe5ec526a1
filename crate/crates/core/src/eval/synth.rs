//! Planted-partition streams with known classes.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::metrics::LabelVector;
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::offline::DataBundle;
use crate::online::BatchData;

/// Tokens drawn per tweet before noise.
pub const TOKENS_PER_TWEET: usize = 10;
/// Share of each block's features that appear in the lexicon.
pub const LEXICON_SHARE: f64 = 0.3;
/// Expected same-class neighbours per user at full separation.
const GRAPH_DEGREE: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    /// Tweets per timestamp.
    pub n: usize,
    /// Active users per timestamp.
    pub m: usize,
    pub l: usize,
    pub k: usize,
    pub separation: f64,
    pub noise: f64,
    pub timestamps: usize,
    pub churn: f64,
    pub drift: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 600,
            m: 150,
            l: 90,
            k: 3,
            separation: 0.9,
            noise: 0.05,
            timestamps: 1,
            churn: 0.0,
            drift: 0.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.l {
            return Err(Error::Config(format!(
                "need 1 <= k <= l, got k={} l={}",
                self.k, self.l
            )));
        }
        if self.n == 0 || self.m == 0 || self.timestamps == 0 {
            return Err(Error::Config("tweets, users and timestamps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.separation) {
            return Err(Error::Config(format!("separation must lie in [0, 1], got {}", self.separation)));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::Config(format!("noise must be >= 0, got {}", self.noise)));
        }
        for (name, v) in [("churn", self.churn), ("drift", self.drift)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Planted classes of one timestamp's tweets and users.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub timestamp: u64,
    pub tweets: LabelVector,
    pub users: LabelVector,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub batches: Vec<BatchData>,
    pub truth: Vec<Truth>,
    /// Planted class of every feature.
    pub feature_classes: Vec<usize>,
}

/// Block of feature `f` when `l` features are split into `k` blocks.
pub fn feature_block(f: usize, l: usize, k: usize) -> usize {
    f * k / l
}

pub fn user_id(i: usize) -> String {
    format!("u{i:06}")
}

pub fn tweet_id(i: usize) -> String {
    format!("p{i:06}")
}

pub fn feature_id(i: usize) -> String {
    format!("f{i:04}")
}

fn sample_count(m: usize, frac: f64) -> usize {
    ((m as f64) * frac).round() as usize
}

/// Generates `spec.timestamps` batches. Timestamps are `1..=T`.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let SynthSpec { n, m, l, k, .. } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let feature_classes: Vec<usize> = (0..l).map(|f| feature_block(f, l, k)).collect();
    let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (f, &c) in feature_classes.iter().enumerate() {
        blocks[c].push(f);
    }
    let mut sf0 = Array2::zeros((l, k));
    for (c, block) in blocks.iter().enumerate() {
        let mut chosen = block.clone();
        chosen.shuffle(&mut rng);
        let take = ((block.len() as f64 * LEXICON_SHARE).ceil() as usize).max(1);
        for &f in &chosen[..take] {
            sf0[(f, c)] = 1.0;
        }
    }
    let feature_ids: Vec<String> = (0..l).map(feature_id).collect();

    // Population: global user index -> class, balanced at the start.
    let mut classes: BTreeMap<usize, usize> = BTreeMap::new();
    let mut start: Vec<usize> = (0..m).map(|i| i % k).collect();
    start.shuffle(&mut rng);
    for (i, c) in start.into_iter().enumerate() {
        classes.insert(i, c);
    }
    let mut next_user = m;
    let mut next_tweet = 0;
    let noise = if spec.noise > 0.0 {
        Some(Poisson::new(spec.noise * TOKENS_PER_TWEET as f64).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };

    let mut batches = Vec::with_capacity(spec.timestamps);
    let mut truth = Vec::with_capacity(spec.timestamps);
    for t in 0..spec.timestamps {
        if t > 0 {
            let active: Vec<usize> = classes.keys().copied().collect();
            let leaving: Vec<usize> = active
                .choose_multiple(&mut rng, sample_count(m, spec.churn))
                .copied()
                .collect();
            for u in leaving {
                let c = classes.remove(&u).expect("active user");
                classes.insert(next_user, c);
                next_user += 1;
            }
            let active: Vec<usize> = classes.keys().copied().collect();
            let flipping: Vec<usize> = active
                .choose_multiple(&mut rng, sample_count(m, spec.drift))
                .copied()
                .collect();
            if k > 1 {
                for u in flipping {
                    let c = classes[&u];
                    classes.insert(u, (c + rng.random_range(1..k)) % k);
                }
            }
        }

        let mut users: Vec<usize> = classes.keys().copied().collect();
        users.shuffle(&mut rng);
        let user_class: Vec<usize> = users.iter().map(|u| classes[u]).collect();

        let authors: Vec<usize> = (0..n)
            .map(|i| if i < m { i } else { rng.random_range(0..m) })
            .collect();
        let mut xp: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, &a) in authors.iter().enumerate() {
            let own = &blocks[user_class[a]];
            for _ in 0..TOKENS_PER_TWEET {
                let f = if rng.random::<f64>() < spec.separation {
                    own[rng.random_range(0..own.len())]
                } else {
                    rng.random_range(0..l)
                };
                *xp.entry((i, f)).or_insert(0.0) += 1.0;
            }
            if let Some(p) = &noise {
                let extra = p.sample(&mut rng) as usize;
                for _ in 0..extra {
                    *xp.entry((i, rng.random_range(0..l))).or_insert(0.0) += 1.0;
                }
            }
        }
        let mut xu: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (&(i, f), &v) in &xp {
            *xu.entry((authors[i], f)).or_insert(0.0) += v;
        }
        let xr = authors.iter().enumerate().map(|(i, &a)| (a, i, 1.0));

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (row, &c) in user_class.iter().enumerate() {
            members[c].push(row);
        }
        let mut edges = BTreeSet::new();
        for group in &members {
            if group.len() < 2 {
                continue;
            }
            let p = spec.separation * (GRAPH_DEGREE / (group.len() - 1) as f64).min(1.0);
            for (a, &i) in group.iter().enumerate() {
                for &j in &group[a + 1..] {
                    if rng.random::<f64>() < p {
                        edges.insert((i, j));
                        edges.insert((j, i));
                    }
                }
            }
        }

        let bundle = DataBundle::new(
            SparseMatrix::from_triplets(n, l, xp.into_iter().map(|((i, j), v)| (i, j, v)))?,
            SparseMatrix::from_triplets(m, l, xu.into_iter().map(|((i, j), v)| (i, j, v)))?,
            SparseMatrix::from_triplets(m, n, xr)?,
            SparseMatrix::from_triplets(m, m, edges.into_iter().map(|(i, j)| (i, j, 1.0)))?,
            sf0.clone(),
        )?;
        let user_ids: Vec<String> = users.iter().map(|&u| user_id(u)).collect();
        let tweet_ids: Vec<String> = (next_tweet..next_tweet + n).map(tweet_id).collect();
        next_tweet += n;
        let timestamp = t as u64 + 1;
        truth.push(Truth {
            timestamp,
            tweets: LabelVector::from_pairs(
                tweet_ids.iter().cloned().zip(authors.iter().map(|&a| user_class[a])),
            )?,
            users: LabelVector::from_pairs(user_ids.iter().cloned().zip(user_class.iter().copied()))?,
        });
        batches.push(BatchData::new(timestamp, bundle, user_ids, tweet_ids, feature_ids.clone())?);
    }
    Ok(SynthData {
        batches,
        truth,
        feature_classes,
    })
}

/// Lexicon prior of a generated stream (shared by every batch).
pub fn lexicon(data: &SynthData) -> Option<&DenseMatrix> {
    data.batches.first().map(|b| b.bundle.sf0())
}
