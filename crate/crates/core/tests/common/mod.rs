//! Naive dense reference implementations on `Vec<Vec<f64>>`, written straight
//! from the formulas and sharing no code with the library.

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tricluster::linalg::SparseMatrix;
use tricluster::offline::{DataBundle, FactorState};
use tricluster::online::BatchData;

pub type M = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> M {
    vec![vec![0.0; c]; r]
}

pub fn from_nd(a: &Array2<f64>) -> M {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn from_sparse(a: &SparseMatrix) -> M {
    let mut out = zeros(a.rows(), a.cols());
    for (i, j, v) in a.iter() {
        out[i][j] += v;
    }
    out
}

pub fn cols(a: &M) -> usize {
    a.first().map_or(0, |r| r.len())
}

pub fn mm(a: &M, b: &M) -> M {
    let (n, k, m) = (a.len(), b.len(), cols(b));
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i][p] * b[p][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn t(a: &M) -> M {
    let mut out = zeros(cols(a), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[j][i] = v;
        }
    }
    out
}

pub fn zip(a: &M, b: &M, f: impl Fn(f64, f64) -> f64) -> M {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect())
        .collect()
}

pub fn add(a: &M, b: &M) -> M {
    zip(a, b, |p, q| p + q)
}

pub fn sub(a: &M, b: &M) -> M {
    zip(a, b, |p, q| p - q)
}

pub fn scale(a: &M, s: f64) -> M {
    a.iter().map(|r| r.iter().map(|v| v * s).collect()).collect()
}

pub fn frob_sq(a: &M) -> f64 {
    a.iter().flatten().map(|v| v * v).sum()
}

pub fn mm3(a: &M, b: &M, c: &M) -> M {
    mm(&mm(a, b), c)
}

/// `‖A − B‖_F / max(‖B‖_F, tiny)`
pub fn rel_err(a: &M, b: &M) -> f64 {
    frob_sq(&sub(a, b)).sqrt() / frob_sq(b).sqrt().max(1e-300)
}

pub fn rel_err_nd(a: &Array2<f64>, b: &M) -> f64 {
    rel_err(&from_nd(a), b)
}

pub fn rel_scalar(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// `M ∘ √(numer / (denom + eps))`
pub fn mult_update(m: &M, numer: &M, denom: &M, eps: f64) -> M {
    let mut out = m.clone();
    for i in 0..m.len() {
        for j in 0..cols(m) {
            out[i][j] = m[i][j] * (numer[i][j] / (denom[i][j] + eps)).sqrt();
        }
    }
    out
}

/// `(Δ⁺, Δ⁻)` with `Δ⁺ = (|Δ|+Δ)/2`, `Δ⁻ = (|Δ|−Δ)/2`.
pub fn split(d: &M) -> (M, M) {
    (
        d.iter().map(|r| r.iter().map(|v| (v.abs() + v) / 2.0).collect()).collect(),
        d.iter().map(|r| r.iter().map(|v| (v.abs() - v) / 2.0).collect()).collect(),
    )
}

pub fn degree(g: &M) -> M {
    let mut d = zeros(g.len(), g.len());
    for i in 0..g.len() {
        d[i][i] = g[i].iter().sum();
    }
    d
}

pub fn laplacian(g: &M) -> M {
    sub(&degree(g), g)
}

pub fn trace(a: &M) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

/// `½ ΣΣ ‖S_i − S_j‖² G_ij`
pub fn pairwise_smoothness(s: &M, g: &M) -> f64 {
    let mut total = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            let d: f64 = s[i].iter().zip(&s[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            total += 0.5 * d * g[i][j];
        }
    }
    total
}

/// Dense copies of a bundle and state.
pub struct Naive {
    pub xp: M,
    pub xu: M,
    pub xr: M,
    pub g: M,
    pub sf0: M,
    pub sf: M,
    pub sp: M,
    pub su: M,
    pub hp: M,
    pub hu: M,
}

impl Naive {
    pub fn new(b: &DataBundle, s: &FactorState) -> Self {
        Naive {
            xp: from_sparse(b.xp()),
            xu: from_sparse(b.xu()),
            xr: from_sparse(b.xr()),
            g: from_sparse(b.gu()),
            sf0: from_nd(b.sf0()),
            sf: from_nd(&s.sf),
            sp: from_nd(&s.sp),
            su: from_nd(&s.su),
            hp: from_nd(&s.hp),
            hu: from_nd(&s.hu),
        }
    }

    pub fn objective(&self, alpha: f64, beta: f64) -> f64 {
        frob_sq(&sub(&self.xp, &mm3(&self.sp, &self.hp, &t(&self.sf))))
            + frob_sq(&sub(&self.xu, &mm3(&self.su, &self.hu, &t(&self.sf))))
            + frob_sq(&sub(&self.xr, &mm(&self.su, &t(&self.sp))))
            + alpha * frob_sq(&sub(&self.sf, &self.sf0))
            + beta * trace(&mm3(&t(&self.su), &laplacian(&self.g), &self.su))
    }

    /// Feature rule with `anchor` in the α-terms.
    pub fn sf_rule(&self, anchor: &M, alpha: f64, eps: f64) -> M {
        let (sf, su, sp, hu, hp) = (&self.sf, &self.su, &self.sp, &self.hu, &self.hp);
        let xu_t_su_hu = mm3(&t(&self.xu), su, hu);
        let xp_t_sp_hp = mm3(&t(&self.xp), sp, hp);
        let hu_g = mm(&mm3(&t(hu), &t(su), su), hu);
        let hp_g = mm(&mm3(&t(hp), &t(sp), sp), hp);
        let delta = sub(
            &sub(
                &add(&sub(&mm(&t(sf), &xu_t_su_hu), &hu_g), &mm(&t(sf), &xp_t_sp_hp)),
                &hp_g,
            ),
            &scale(&mm(&t(sf), &sub(sf, anchor)), alpha),
        );
        let (dp, dm) = split(&delta);
        let numer = add(&add(&add(&xu_t_su_hu, &xp_t_sp_hp), &scale(anchor, alpha)), &mm(sf, &dm));
        let denom = add(
            &add(&add(&mm(sf, &hu_g), &mm(sf, &hp_g)), &scale(sf, alpha)),
            &mm(sf, &dp),
        );
        mult_update(sf, &numer, &denom, eps)
    }

    pub fn sp_rule(&self, eps: f64) -> M {
        let (sf, su, sp, hp) = (&self.sf, &self.su, &self.sp, &self.hp);
        let a = mm3(&self.xp, sf, &t(hp));
        let b = mm(&t(&self.xr), su);
        let hsf = mm(&mm3(hp, &t(sf), sf), &t(hp));
        let sus = mm(&t(su), su);
        let delta = sub(&add(&sub(&mm(&t(sp), &a), &hsf), &mm(&t(sp), &b)), &sus);
        let (dp, dm) = split(&delta);
        let numer = add(&add(&a, &b), &mm(sp, &dm));
        let denom = add(&add(&mm(sp, &hsf), &mm(sp, &sus)), &mm(sp, &dp));
        mult_update(sp, &numer, &denom, eps)
    }

    /// User rule; the optional temporal part is
    /// `(γ, S_uw rows, S_u(t−1) rows, evolving rows)`.
    pub fn su_rule(&self, beta: f64, eps: f64, temporal: Option<(f64, &M, &M, &[usize])>) -> M {
        let (sf, su, sp, hu) = (&self.sf, &self.su, &self.sp, &self.hu);
        let a = mm3(&self.xu, sf, &t(hu));
        let b = mm(&self.xr, sp);
        let hsf = mm(&mm3(hu, &t(sf), sf), &t(hu));
        let sps = mm(&t(sp), sp);
        let lap = laplacian(&self.g);
        let mut delta = sub(
            &sub(&sub(&add(&mm(&t(su), &a), &mm(&t(su), &b)), &hsf), &sps),
            &scale(&mm3(&t(su), &lap, su), beta),
        );
        let mut numer = add(&add(&a, &b), &scale(&mm(&self.g, su), beta));
        let mut denom = add(
            &add(&mm(su, &hsf), &mm(su, &sps)),
            &scale(&mm(&degree(&self.g), su), beta),
        );
        if let Some((gamma, window, prev, rows)) = temporal {
            let se: M = rows.iter().map(|&r| su[r].clone()).collect();
            let pe: M = rows.iter().map(|&r| prev[r].clone()).collect();
            if !rows.is_empty() {
                delta = sub(&delta, &scale(&mm(&t(&se), &sub(&se, &pe)), gamma));
            }
            for &r in rows {
                for j in 0..cols(su) {
                    numer[r][j] += gamma * window[r][j];
                    denom[r][j] += gamma * su[r][j];
                }
            }
        }
        let (dp, dm) = split(&delta);
        mult_update(su, &add(&numer, &mm(su, &dm)), &add(&denom, &mm(su, &dp)), eps)
    }

    pub fn hp_rule(&self, eps: f64) -> M {
        let numer = mm3(&t(&self.sp), &self.xp, &self.sf);
        let denom = mm(&mm3(&t(&self.sp), &self.sp, &self.hp), &mm(&t(&self.sf), &self.sf));
        mult_update(&self.hp, &numer, &denom, eps)
    }

    pub fn hu_rule(&self, eps: f64) -> M {
        let numer = mm3(&t(&self.su), &self.xu, &self.sf);
        let denom = mm(&mm3(&t(&self.su), &self.su, &self.hu), &mm(&t(&self.sf), &self.sf));
        mult_update(&self.hu, &numer, &denom, eps)
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..rows {
        for j in 0..cols {
            if rng.random::<f64>() < density {
                t.push((i, j, rng.random_range(0.1..3.0)));
            }
        }
    }
    SparseMatrix::from_triplets(rows, cols, t).unwrap()
}

pub fn random_graph(rng: &mut ChaCha8Rng, m: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            if rng.random::<f64>() < density {
                let w = rng.random_range(0.1..1.0);
                t.push((i, j, w));
                t.push((j, i, w));
            }
        }
    }
    SparseMatrix::from_triplets(m, m, t).unwrap()
}

pub fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(0.05..1.5))
}

pub fn random_bundle(rng: &mut ChaCha8Rng, n: usize, m: usize, l: usize, k: usize) -> DataBundle {
    let xp = random_sparse(rng, n, l, 0.4);
    let xu = random_sparse(rng, m, l, 0.5);
    let xr = random_sparse(rng, m, n, 0.3);
    let gu = random_graph(rng, m, 0.4);
    let mut sf0 = Array2::zeros((l, k));
    for f in 0..l {
        if rng.random::<f64>() < 0.4 {
            sf0[(f, rng.random_range(0..k))] = rng.random_range(0.5..1.0);
        }
    }
    DataBundle::new(xp, xu, xr, gu, sf0).unwrap()
}

pub fn random_state(rng: &mut ChaCha8Rng, n: usize, m: usize, l: usize, k: usize) -> FactorState {
    FactorState {
        sf: random_dense(rng, l, k),
        sp: random_dense(rng, n, k),
        su: random_dense(rng, m, k),
        hp: random_dense(rng, k, k),
        hu: random_dense(rng, k, k),
    }
}

pub fn ids(prefix: &str, range: impl Iterator<Item = usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

pub fn batch(timestamp: u64, bundle: DataBundle, users: Vec<String>) -> BatchData {
    let (n, l) = (bundle.n(), bundle.l());
    BatchData::new(
        timestamp,
        bundle,
        users,
        ids(&format!("p{timestamp}_"), 0..n),
        ids("f", 0..l),
    )
    .unwrap()
}

/// Orthonormal scaled-indicator `rows × k` matrix: row `i` belongs to column
/// `i mod k`, each column normalized.
pub fn indicator(rows: usize, k: usize) -> Array2<f64> {
    let mut out = Array2::zeros((rows, k));
    for i in 0..rows {
        out[(i, i % k)] = 1.0;
    }
    for j in 0..k {
        let c = (0..rows).filter(|i| i % k == j).count() as f64;
        for i in 0..rows {
            out[(i, j)] /= c.sqrt();
        }
    }
    out
}

/// Dense non-negative matrix to sparse.
pub fn to_sparse(a: &Array2<f64>) -> SparseMatrix {
    SparseMatrix::from_dense(a.view()).unwrap()
}

/// A state whose three reconstructions are exact, with orthonormal cluster
/// factors, no graph and `S_f0 = S_f`.
pub fn zero_residual(n: usize, m: usize, l: usize, k: usize, rng: &mut ChaCha8Rng) -> (DataBundle, FactorState) {
    let sf = indicator(l, k);
    let sp = indicator(n, k);
    let su = indicator(m, k);
    let hp = random_dense(rng, k, k);
    let hu = random_dense(rng, k, k);
    let xp = sp.dot(&hp).dot(&sf.t());
    let xu = su.dot(&hu).dot(&sf.t());
    let xr = su.dot(&sp.t());
    let b = DataBundle::new(
        to_sparse(&xp),
        to_sparse(&xu),
        to_sparse(&xr),
        SparseMatrix::zeros(m, m),
        sf.clone(),
    )
    .unwrap();
    (b, FactorState { sf, sp, su, hp, hu })
}

/// Naive contingency-table accuracy and NMI over index-aligned labels.
pub fn naive_metrics(pred: &[usize], truth: &[usize]) -> (f64, f64) {
    let n = pred.len() as f64;
    let kc = pred.iter().max().map_or(0, |m| m + 1);
    let kg = truth.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0; kg]; kc];
    for (&c, &g) in pred.iter().zip(truth) {
        table[c][g] += 1.0;
    }
    let acc = table
        .iter()
        .map(|r| r.iter().cloned().fold(0.0, f64::max))
        .sum::<f64>()
        / n;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let colsum: Vec<f64> = (0..kg).map(|g| table.iter().map(|r| r[g]).sum()).collect();
    let h = |v: &[f64]| -> f64 {
        v.iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| -(c / n) * (c / n).ln())
            .sum()
    };
    let mut mi = 0.0;
    for c in 0..kc {
        for g in 0..kg {
            let nij = table[c][g];
            if nij > 0.0 {
                mi += nij / n * (n * nij / (rows[c] * colsum[g])).ln();
            }
        }
    }
    let denom = h(&rows) + h(&colsum);
    let nmi = if denom > 0.0 { 2.0 * mi / denom } else { 0.0 };
    (acc, nmi)
}
