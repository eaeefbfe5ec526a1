//! Text formats for matrices, id maps, labels, lexicons, manifests and
//! assignments.
//!
//! Sparse matrices use a coordinate format: an optional `%` comment line, a
//! `rows cols nnz` header, then one `i j v` line per entry (0-based).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::eval::{LabelVector, Truth};
use crate::linalg::{DenseMatrix, SparseMatrix};
use crate::offline::DataBundle;
use crate::online::BatchData;

pub const XP_FILE: &str = "X_p.coo";
pub const XU_FILE: &str = "X_u.coo";
pub const XR_FILE: &str = "X_r.coo";
pub const GU_FILE: &str = "G_u.coo";
pub const USERS_FILE: &str = "users.tsv";
pub const TWEETS_FILE: &str = "tweets.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const LEXICON_FILE: &str = "lexicon.tsv";
pub const TWEET_LABELS_FILE: &str = "tweet_labels.tsv";
pub const USER_LABELS_FILE: &str = "user_labels.tsv";
pub const MANIFEST_FILE: &str = "manifest.txt";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Non-blank lines with their 1-based numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, raw: Option<&str>, what: &str) -> Result<T> {
    let raw = raw.ok_or_else(|| parse_err(path, line, format!("missing {what}")))?;
    raw.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{raw}`")))
}

pub fn parse_sparse(text: &str, path: &Path) -> Result<SparseMatrix> {
    let mut it = lines(text).peekable();
    if let Some((_, l)) = it.peek() {
        if l.starts_with('%') {
            it.next();
        }
    }
    let (hl, header) = it
        .next()
        .ok_or_else(|| parse_err(path, 1, "missing `rows cols nnz` header"))?;
    let mut h = header.split_whitespace();
    let rows: usize = field(path, hl, h.next(), "row count")?;
    let cols: usize = field(path, hl, h.next(), "column count")?;
    let nnz: usize = field(path, hl, h.next(), "entry count")?;
    if h.next().is_some() {
        return Err(parse_err(path, hl, "header has more than three fields"));
    }
    let mut entries = Vec::with_capacity(nnz);
    for (ln, l) in it {
        let mut f = l.split_whitespace();
        let i: usize = field(path, ln, f.next(), "row index")?;
        let j: usize = field(path, ln, f.next(), "column index")?;
        let v: f64 = field(path, ln, f.next(), "value")?;
        if f.next().is_some() {
            return Err(parse_err(path, ln, "expected `i j v`"));
        }
        if i >= rows || j >= cols {
            return Err(parse_err(
                path,
                ln,
                format!("index ({i}, {j}) out of bounds for {rows}x{cols}"),
            ));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(parse_err(path, ln, format!("value {v} is not finite and non-negative")));
        }
        entries.push((i, j, v));
    }
    if entries.len() != nnz {
        return Err(parse_err(
            path,
            hl,
            format!("header declares {nnz} entries but {} were found", entries.len()),
        ));
    }
    SparseMatrix::from_triplets(rows, cols, entries)
}

pub fn load_sparse_matrix(path: &Path) -> Result<SparseMatrix> {
    parse_sparse(&read_text(path)?, path)
}

pub fn format_sparse(m: &SparseMatrix) -> String {
    let mut out = format!("{} {} {}\n", m.rows(), m.cols(), m.nnz());
    for (i, j, v) in m.iter() {
        writeln!(out, "{i} {j} {v}").expect("string write");
    }
    out
}

pub fn write_sparse_matrix(m: &SparseMatrix, path: &Path) -> Result<()> {
    write_text(path, &format_sparse(m))
}

/// `row\tid` lines; the rows must be exactly `0..len` in any order.
pub fn load_id_map(path: &Path) -> Result<Vec<String>> {
    let text = read_text(path)?;
    let mut rows: Vec<(usize, usize, String)> = Vec::new();
    for (ln, l) in lines(&text) {
        let mut f = l.split('\t');
        let row: usize = field(path, ln, f.next(), "row index")?;
        let id = f
            .next()
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| parse_err(path, ln, "missing id"))?;
        rows.push((row, ln, id.to_string()));
    }
    rows.sort();
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for (expect, (row, ln, id)) in rows.into_iter().enumerate() {
        if row != expect {
            return Err(parse_err(path, ln, format!("row indices must cover 0..n once; expected {expect}, got {row}")));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId {
                id,
                context: path.display().to_string(),
            });
        }
        out.push(id);
    }
    Ok(out)
}

pub fn write_id_map<S: AsRef<str>>(ids: &[S], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (row, id) in ids.iter().enumerate() {
        writeln!(out, "{row}\t{}", id.as_ref()).expect("string write");
    }
    write_text(path, &out)
}

/// `id\tclass` lines.
pub fn load_labels(path: &Path) -> Result<LabelVector> {
    let text = read_text(path)?;
    let mut out = LabelVector::new();
    for (ln, l) in lines(&text) {
        let mut f = l.split('\t');
        let id = f.next().unwrap_or("").trim();
        if id.is_empty() {
            return Err(parse_err(path, ln, "missing id"));
        }
        let class: usize = field(path, ln, f.next().map(str::trim), "class index")?;
        out.insert(id.to_string(), class).map_err(|_| Error::DuplicateId {
            id: id.to_string(),
            context: path.display().to_string(),
        })?;
    }
    Ok(out)
}

pub fn write_labels(labels: &LabelVector, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (id, class) in labels.iter() {
        writeln!(out, "{id}\t{class}").expect("string write");
    }
    write_text(path, &out)
}

/// `feature_id\tclass\tprob` lines into an `l × k` prior; features not
/// listed keep all-zero rows.
pub fn load_lexicon(path: &Path, feature_ids: &[String], k: usize) -> Result<DenseMatrix> {
    let text = read_text(path)?;
    let index: std::collections::BTreeMap<&str, usize> = feature_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut sf0 = Array2::zeros((feature_ids.len(), k));
    for (ln, l) in lines(&text) {
        let mut f = l.split('\t');
        let id = f.next().unwrap_or("").trim();
        let row = *index
            .get(id)
            .ok_or_else(|| parse_err(path, ln, format!("unknown feature `{id}`")))?;
        let class: usize = field(path, ln, f.next().map(str::trim), "class index")?;
        let prob: f64 = field(path, ln, f.next().map(str::trim), "probability")?;
        if class >= k {
            return Err(parse_err(path, ln, format!("class {class} out of range for k={k}")));
        }
        if !(0.0..=1.0).contains(&prob) {
            return Err(parse_err(path, ln, format!("probability {prob} outside [0, 1]")));
        }
        sf0[(row, class)] = prob;
    }
    Ok(sf0)
}

pub fn write_lexicon(sf0: &DenseMatrix, feature_ids: &[String], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (row, id) in feature_ids.iter().enumerate() {
        for (class, &p) in sf0.row(row).iter().enumerate() {
            if p != 0.0 {
                writeln!(out, "{id}\t{class}\t{p}").expect("string write");
            }
        }
    }
    write_text(path, &out)
}

/// A batch directory together with any ground truth found next to it.
#[derive(Debug, Clone)]
pub struct LoadedBatch {
    pub batch: BatchData,
    pub tweet_truth: Option<LabelVector>,
    pub user_truth: Option<LabelVector>,
}

fn check_dims(a: (&str, usize), b: (&str, usize), what: &str) -> Result<()> {
    if a.1 != b.1 {
        return Err(Error::Inconsistent(format!(
            "{what}: {} says {} but {} says {}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

fn optional_labels(dir: &Path, name: &str) -> Result<Option<LabelVector>> {
    let path = dir.join(name);
    if path.exists() {
        load_labels(&path).map(Some)
    } else {
        Ok(None)
    }
}

/// Loads one batch directory with `k` clusters.
pub fn load_batch(dir: &Path, timestamp: u64, k: usize) -> Result<LoadedBatch> {
    let xp = load_sparse_matrix(&dir.join(XP_FILE))?;
    let xu = load_sparse_matrix(&dir.join(XU_FILE))?;
    let xr = load_sparse_matrix(&dir.join(XR_FILE))?;
    let user_ids = load_id_map(&dir.join(USERS_FILE))?;
    let feature_ids = load_id_map(&dir.join(FEATURES_FILE))?;
    check_dims((XP_FILE, xp.cols()), (FEATURES_FILE, feature_ids.len()), "feature count")?;
    check_dims((XU_FILE, xu.cols()), (FEATURES_FILE, feature_ids.len()), "feature count")?;
    check_dims((XU_FILE, xu.rows()), (USERS_FILE, user_ids.len()), "user count")?;
    check_dims((XR_FILE, xr.rows()), (USERS_FILE, user_ids.len()), "user count")?;
    check_dims((XR_FILE, xr.cols()), (XP_FILE, xp.rows()), "tweet count")?;
    let gu_path = dir.join(GU_FILE);
    let gu = if gu_path.exists() {
        let g = load_sparse_matrix(&gu_path)?;
        check_dims((GU_FILE, g.rows()), (USERS_FILE, user_ids.len()), "user count")?;
        check_dims((GU_FILE, g.cols()), (USERS_FILE, user_ids.len()), "user count")?;
        g
    } else {
        log::warn!("{}: no {GU_FILE}; using an empty user graph", dir.display());
        SparseMatrix::zeros(user_ids.len(), user_ids.len())
    };
    let tweets_path = dir.join(TWEETS_FILE);
    let tweet_ids = if tweets_path.exists() {
        let ids = load_id_map(&tweets_path)?;
        check_dims((TWEETS_FILE, ids.len()), (XP_FILE, xp.rows()), "tweet count")?;
        ids
    } else {
        (0..xp.rows()).map(|i| i.to_string()).collect()
    };
    let lex_path = dir.join(LEXICON_FILE);
    let sf0 = if lex_path.exists() {
        load_lexicon(&lex_path, &feature_ids, k)?
    } else {
        log::warn!("{}: no {LEXICON_FILE}; the lexicon prior is empty", dir.display());
        Array2::zeros((feature_ids.len(), k))
    };
    let bundle = DataBundle::new(xp, xu, xr, gu, sf0)?;
    Ok(LoadedBatch {
        batch: BatchData::new(timestamp, bundle, user_ids, tweet_ids, feature_ids)?,
        tweet_truth: optional_labels(dir, TWEET_LABELS_FILE)?,
        user_truth: optional_labels(dir, USER_LABELS_FILE)?,
    })
}

/// Writes every file of a batch directory, creating it if needed.
pub fn write_batch(dir: &Path, batch: &BatchData, truth: Option<&Truth>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let b = &batch.bundle;
    write_sparse_matrix(b.xp(), &dir.join(XP_FILE))?;
    write_sparse_matrix(b.xu(), &dir.join(XU_FILE))?;
    write_sparse_matrix(b.xr(), &dir.join(XR_FILE))?;
    write_sparse_matrix(b.gu(), &dir.join(GU_FILE))?;
    write_id_map(&batch.user_ids, &dir.join(USERS_FILE))?;
    write_id_map(&batch.tweet_ids, &dir.join(TWEETS_FILE))?;
    write_id_map(&batch.feature_ids, &dir.join(FEATURES_FILE))?;
    write_lexicon(b.sf0(), &batch.feature_ids, &dir.join(LEXICON_FILE))?;
    if let Some(t) = truth {
        write_labels(&t.tweets, &dir.join(TWEET_LABELS_FILE))?;
        write_labels(&t.users, &dir.join(USER_LABELS_FILE))?;
    }
    Ok(())
}

/// `timestamp relative-dir` lines; `#` starts a comment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<(u64, PathBuf)>,
}

impl Manifest {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new(""));
        let mut entries: Vec<(u64, PathBuf)> = Vec::new();
        for (ln, l) in lines(text) {
            let l = l.split('#').next().unwrap_or("").trim();
            if l.is_empty() {
                continue;
            }
            let mut f = l.split_whitespace();
            let ts: u64 = field(path, ln, f.next(), "timestamp")?;
            let dir: String = field(path, ln, f.next(), "directory")?;
            if let Some(&(prev, _)) = entries.last() {
                if ts <= prev {
                    return Err(parse_err(path, ln, format!("timestamp {ts} does not follow {prev}")));
                }
            }
            entries.push((ts, base.join(dir)));
        }
        if entries.is_empty() {
            return Err(parse_err(path, 1, "manifest lists no batches"));
        }
        Ok(Manifest { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?, path)
    }
}

/// Writes a manifest whose directories are given relative to it.
pub fn write_manifest(entries: &[(u64, String)], path: &Path) -> Result<()> {
    let mut out = String::from("# timestamp directory\n");
    for (ts, dir) in entries {
        writeln!(out, "{ts} {dir}").expect("string write");
    }
    write_text(path, &out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EntityKind {
    Tweet,
    User,
}

impl EntityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Tweet => "tweet",
            EntityKind::User => "user",
        }
    }
}

impl std::str::FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tweet" => Ok(EntityKind::Tweet),
            "user" => Ok(EntityKind::User),
            other => Err(format!("unknown entity kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentRow {
    pub kind: EntityKind,
    pub id: String,
    pub cluster: usize,
    pub score: f64,
}

/// Rows sorted by kind (tweets first), then id.
pub fn write_assignments(rows: &[AssignmentRow], path: &Path) -> Result<()> {
    let mut sorted: Vec<&AssignmentRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (a.kind, &a.id).cmp(&(b.kind, &b.id)));
    let mut out = String::new();
    for r in sorted {
        writeln!(out, "{}\t{}\t{}\t{}", r.kind.as_str(), r.id, r.cluster, r.score).expect("string write");
    }
    write_text(path, &out)
}

pub fn load_assignments(path: &Path) -> Result<Vec<AssignmentRow>> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (ln, l) in lines(&text) {
        let f: Vec<&str> = l.split('\t').collect();
        if f.len() != 4 {
            return Err(parse_err(path, ln, "expected `kind\\tid\\tcluster\\tscore`"));
        }
        out.push(AssignmentRow {
            kind: f[0].parse().map_err(|e: String| parse_err(path, ln, e))?,
            id: f[1].to_string(),
            cluster: field(path, ln, Some(f[2]), "cluster")?,
            score: field(path, ln, Some(f[3]), "score")?,
        });
    }
    Ok(out)
}

/// Reads predictions either from an assignments file (filtered to `kind`) or
/// from a plain `id\tclass` labels file.
pub fn load_predictions(path: &Path, kind: EntityKind) -> Result<LabelVector> {
    let text = read_text(path)?;
    let four_columns = lines(&text).next().is_some_and(|(_, l)| l.split('\t').count() == 4);
    if !four_columns {
        return load_labels(path);
    }
    let rows = load_assignments(path)?;
    LabelVector::from_pairs(
        rows.into_iter()
            .filter(|r| r.kind == kind)
            .map(|r| (r.id, r.cluster)),
    )
}
