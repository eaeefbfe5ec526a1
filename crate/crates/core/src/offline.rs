//! Batch tri-factorization of the feature–tweet–user graph.
//!
//! The objective is
//!
//! ```text
//! ‖X_p − S_p H_p S_fᵀ‖² + ‖X_u − S_u H_u S_fᵀ‖² + ‖X_r − S_u S_pᵀ‖²
//!     + α‖S_f − S_f0‖² + β·tr(S_uᵀ L_u S_u)
//! ```
//!
//! minimized by multiplicative updates of the form `M ← M ∘ √(numer/denom)`.
//! The three cluster matrices carry orthogonality constraints that are never
//! enforced directly; their Lagrange multipliers `Δ` appear in the rules as
//! `M·Δ⁻` (numerator) and `M·Δ⁺` (denominator).

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    frob_diff_sq, frob_residual_sq, gram, hadamard_sqrt_update, laplacian_parts, split_pos_neg,
    spmm, spmm_t, trace_quadratic, DenseMatrix, GraphLaplacian, SparseMatrix,
};

/// Lower bound of the uniform initialization range.
pub const INIT_LOW: f64 = 0.01;
/// Upper bound of the uniform initialization range.
pub const INIT_HIGH: f64 = 1.0;

/// One self-consistent snapshot of the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBundle {
    xp: SparseMatrix,
    xu: SparseMatrix,
    xr: SparseMatrix,
    gu: SparseMatrix,
    laplacian: GraphLaplacian,
    sf0: DenseMatrix,
}

impl DataBundle {
    /// * `xp` – tweet × feature (n×l)
    /// * `xu` – user × feature (m×l)
    /// * `xr` – user × tweet (m×n)
    /// * `gu` – user × user (m×m), symmetric
    /// * `sf0` – lexicon prior (l×k), entries in `[0, 1]`
    pub fn new(
        xp: SparseMatrix,
        xu: SparseMatrix,
        xr: SparseMatrix,
        gu: SparseMatrix,
        sf0: DenseMatrix,
    ) -> Result<Self> {
        let (n, l) = xp.shape();
        let m = xu.rows();
        let check = |name: &str, got: (usize, usize), want: (usize, usize)| {
            if got != want {
                Err(Error::Inconsistent(format!(
                    "{name} is {}x{} but X_p is {n}x{l} and X_u has {m} rows (expected {}x{})",
                    got.0, got.1, want.0, want.1
                )))
            } else {
                Ok(())
            }
        };
        check("X_u", xu.shape(), (m, l))?;
        check("X_r", xr.shape(), (m, n))?;
        check("G_u", gu.shape(), (m, m))?;
        check("S_f0", sf0.dim(), (l, sf0.ncols()))?;
        if let Some(((i, j), &v)) = sf0
            .indexed_iter()
            .find(|(_, &v)| !(0.0..=1.0).contains(&v))
        {
            return Err(Error::InvalidEntry {
                op: "S_f0 (must lie in [0, 1])",
                row: i,
                col: j,
                value: v,
            });
        }
        let laplacian = laplacian_parts(&gu)?;
        Ok(DataBundle {
            xp,
            xu,
            xr,
            gu,
            laplacian,
            sf0,
        })
    }

    pub fn n(&self) -> usize {
        self.xp.rows()
    }
    pub fn m(&self) -> usize {
        self.xu.rows()
    }
    pub fn l(&self) -> usize {
        self.xp.cols()
    }
    pub fn k(&self) -> usize {
        self.sf0.ncols()
    }
    pub fn xp(&self) -> &SparseMatrix {
        &self.xp
    }
    pub fn xu(&self) -> &SparseMatrix {
        &self.xu
    }
    pub fn xr(&self) -> &SparseMatrix {
        &self.xr
    }
    pub fn gu(&self) -> &SparseMatrix {
        &self.gu
    }
    pub fn laplacian(&self) -> &GraphLaplacian {
        &self.laplacian
    }
    pub fn sf0(&self) -> &DenseMatrix {
        &self.sf0
    }
}

/// The five non-negative factors.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorState {
    /// feature clusters, l×k
    pub sf: DenseMatrix,
    /// tweet clusters, n×k
    pub sp: DenseMatrix,
    /// user clusters, m×k
    pub su: DenseMatrix,
    /// tweet association, k×k
    pub hp: DenseMatrix,
    /// user association, k×k
    pub hu: DenseMatrix,
}

impl FactorState {
    pub fn min_entry(&self) -> f64 {
        [&self.sf, &self.sp, &self.su, &self.hp, &self.hu]
            .iter()
            .flat_map(|m| m.iter().copied())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Identifies one factor, in reports and update callbacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Factor {
    Sf,
    Sp,
    Su,
    Hp,
    Hu,
    /// Online mode only: the new-user rows of `S_u`.
    SuNew,
    /// Online mode only: the evolving-user rows of `S_u`.
    SuEvolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k: usize,
    pub max_iters: usize,
    pub tol: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.05,
            beta: 0.8,
            k: 3,
            max_iters: 200,
            tol: 1e-6,
            eps: 1e-12,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.alpha) || !unit.contains(&self.beta) {
            return Err(Error::Config(format!(
                "alpha and beta must lie in [0, 1], got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("need at least 2 clusters, got k={}", self.k)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::Config(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("eps must be > 0, got {}", self.eps)));
        }
        Ok(())
    }
}

/// Objective value after every sweep, starting with the initial state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveTrace {
    pub values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Relative objective change used as the stopping rule.
pub fn relative_change(prev: f64, cur: f64) -> f64 {
    (cur - prev).abs() / (1.0 + prev)
}

pub(crate) fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(INIT_LOW..INIT_HIGH))
}

/// Random factors in `(0.01, 1.0)`; feature rows covered by the lexicon are
/// blended half-and-half with the prior.
pub fn init_factors(bundle: &DataBundle, config: &SolverConfig) -> Result<FactorState> {
    config.validate()?;
    check_k(bundle, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    Ok(init_with_rng(bundle, config.k, &mut rng))
}

pub(crate) fn check_k(bundle: &DataBundle, config: &SolverConfig) -> Result<()> {
    if bundle.k() != config.k {
        return Err(Error::Inconsistent(format!(
            "lexicon prior has {} columns but k={}",
            bundle.k(),
            config.k
        )));
    }
    Ok(())
}

pub(crate) fn init_with_rng(bundle: &DataBundle, k: usize, rng: &mut ChaCha8Rng) -> FactorState {
    let su = uniform_matrix(rng, bundle.m(), k);
    let sp = uniform_matrix(rng, bundle.n(), k);
    let mut sf = uniform_matrix(rng, bundle.l(), k);
    let hu = uniform_matrix(rng, k, k);
    let hp = uniform_matrix(rng, k, k);
    blend_prior(&mut sf, bundle.sf0());
    FactorState { sf, sp, su, hp, hu }
}

pub(crate) fn blend_prior(sf: &mut DenseMatrix, prior: &DenseMatrix) {
    for (mut row, prior_row) in sf.rows_mut().into_iter().zip(prior.rows()) {
        if prior_row.iter().any(|&v| v != 0.0) {
            row.zip_mut_with(&prior_row, |r, &p| *r = 0.5 * p + 0.5 * *r);
        }
    }
}

/// Numerator/denominator pieces of one rule before the `Δ` split:
/// the rule is `M ∘ √((pos + M·Δ⁻) / (neg + M·Δ⁺))`.
pub(crate) struct RuleParts {
    pub pos: DenseMatrix,
    pub neg: DenseMatrix,
    pub delta: Option<DenseMatrix>,
}

pub(crate) struct RuleTerms {
    pub numer: DenseMatrix,
    pub denom: DenseMatrix,
}

impl RuleParts {
    pub fn assemble(self, current: &DenseMatrix) -> RuleTerms {
        match self.delta {
            None => RuleTerms {
                numer: self.pos,
                denom: self.neg,
            },
            Some(delta) => {
                let split = split_pos_neg(&delta);
                RuleTerms {
                    numer: self.pos + current.dot(&split.minus),
                    denom: self.neg + current.dot(&split.plus),
                }
            }
        }
    }
}

/// Pieces of the `S_f` rule with `target` as the α-anchor (`S_f0` offline,
/// the decayed window aggregate online).
pub(crate) fn sf_parts(
    s: &FactorState,
    xp: &SparseMatrix,
    xu: &SparseMatrix,
    target: &DenseMatrix,
    alpha: f64,
) -> Result<RuleParts> {
    let xu_su_hu = spmm_t(xu, &s.su.dot(&s.hu))?;
    let xp_sp_hp = spmm_t(xp, &s.sp.dot(&s.hp))?;
    let hu_gram = s.hu.t().dot(&gram(&s.su)).dot(&s.hu);
    let hp_gram = s.hp.t().dot(&gram(&s.sp)).dot(&s.hp);
    let sft = s.sf.t();
    let delta = sft.dot(&xu_su_hu) - &hu_gram + sft.dot(&xp_sp_hp)
        - &hp_gram
        - sft.dot(&(&s.sf - target)) * alpha;
    Ok(RuleParts {
        pos: xu_su_hu + xp_sp_hp + target * alpha,
        neg: s.sf.dot(&(hu_gram + hp_gram)) + &s.sf * alpha,
        delta: Some(delta),
    })
}

pub(crate) fn sp_parts(
    s: &FactorState,
    xp: &SparseMatrix,
    xr: &SparseMatrix,
) -> Result<RuleParts> {
    let xp_sf_hpt = spmm(xp, &s.sf.dot(&s.hp.t()))?;
    let xrt_su = spmm_t(xr, &s.su)?;
    let hp_sf_gram = s.hp.dot(&gram(&s.sf)).dot(&s.hp.t());
    let su_gram = gram(&s.su);
    let spt = s.sp.t();
    let delta = spt.dot(&xp_sf_hpt) - &hp_sf_gram + spt.dot(&xrt_su) - &su_gram;
    Ok(RuleParts {
        pos: xp_sf_hpt + xrt_su,
        neg: s.sp.dot(&(hp_sf_gram + su_gram)),
        delta: Some(delta),
    })
}

pub(crate) fn su_parts(
    s: &FactorState,
    xu: &SparseMatrix,
    xr: &SparseMatrix,
    lap: &GraphLaplacian,
    beta: f64,
) -> Result<RuleParts> {
    let xu_sf_hut = spmm(xu, &s.sf.dot(&s.hu.t()))?;
    let xr_sp = spmm(xr, &s.sp)?;
    let g_su = lap.adjacency_times(&s.su)?;
    let d_su = lap.degree_times(&s.su)?;
    let hu_sf_gram = s.hu.dot(&gram(&s.sf)).dot(&s.hu.t());
    let sp_gram = gram(&s.sp);
    let sut = s.su.t();
    let lap_quad = sut.dot(&d_su) - sut.dot(&g_su);
    let delta = sut.dot(&xu_sf_hut) + sut.dot(&xr_sp) - &hu_sf_gram - &sp_gram - lap_quad * beta;
    Ok(RuleParts {
        pos: xu_sf_hut + xr_sp + g_su * beta,
        neg: s.su.dot(&(hu_sf_gram + sp_gram)) + d_su * beta,
        delta: Some(delta),
    })
}

pub(crate) fn hp_parts(s: &FactorState, xp: &SparseMatrix) -> Result<RuleParts> {
    Ok(RuleParts {
        pos: s.sp.t().dot(&spmm(xp, &s.sf)?),
        neg: gram(&s.sp).dot(&s.hp).dot(&gram(&s.sf)),
        delta: None,
    })
}

pub(crate) fn hu_parts(s: &FactorState, xu: &SparseMatrix) -> Result<RuleParts> {
    Ok(RuleParts {
        pos: s.su.t().dot(&spmm(xu, &s.sf)?),
        neg: gram(&s.su).dot(&s.hu).dot(&gram(&s.sf)),
        delta: None,
    })
}

fn apply(current: &DenseMatrix, parts: RuleParts, eps: f64) -> Result<DenseMatrix> {
    let terms = parts.assemble(current);
    hadamard_sqrt_update(current, &terms.numer, &terms.denom, eps)
}

pub fn update_sf(s: &FactorState, b: &DataBundle, c: &SolverConfig) -> Result<DenseMatrix> {
    apply(&s.sf, sf_parts(s, &b.xp, &b.xu, &b.sf0, c.alpha)?, c.eps)
}

pub fn update_sp(s: &FactorState, b: &DataBundle, c: &SolverConfig) -> Result<DenseMatrix> {
    apply(&s.sp, sp_parts(s, &b.xp, &b.xr)?, c.eps)
}

pub fn update_su(s: &FactorState, b: &DataBundle, c: &SolverConfig) -> Result<DenseMatrix> {
    apply(&s.su, su_parts(s, &b.xu, &b.xr, &b.laplacian, c.beta)?, c.eps)
}

pub fn update_hp(s: &FactorState, b: &DataBundle, c: &SolverConfig) -> Result<DenseMatrix> {
    apply(&s.hp, hp_parts(s, &b.xp)?, c.eps)
}

pub fn update_hu(s: &FactorState, b: &DataBundle, c: &SolverConfig) -> Result<DenseMatrix> {
    apply(&s.hu, hu_parts(s, &b.xu)?, c.eps)
}

pub(crate) fn reconstruction_terms(
    s: &FactorState,
    xp: &SparseMatrix,
    xu: &SparseMatrix,
    xr: &SparseMatrix,
) -> Result<f64> {
    Ok(frob_residual_sq(xp, &s.sp, Some(&s.hp), &s.sf)?
        + frob_residual_sq(xu, &s.su, Some(&s.hu), &s.sf)?
        + frob_residual_sq(xr, &s.su, None, &s.sp)?)
}

/// Value of the batch objective.
pub fn objective(s: &FactorState, b: &DataBundle, c: &SolverConfig) -> Result<f64> {
    Ok(reconstruction_terms(s, &b.xp, &b.xu, &b.xr)?
        + c.alpha * frob_diff_sq(&s.sf, &b.sf0)?
        + c.beta * trace_quadratic(&s.su, &b.laplacian)?)
}

/// One pass of the rules in the order S_p, H_p, S_u, H_u, S_f, each using
/// the freshest value of the others. `observe` runs after every update.
pub fn sweep_with<F>(
    s: &mut FactorState,
    b: &DataBundle,
    c: &SolverConfig,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(Factor, &FactorState),
{
    s.sp = update_sp(s, b, c)?;
    observe(Factor::Sp, s);
    s.hp = update_hp(s, b, c)?;
    observe(Factor::Hp, s);
    s.su = update_su(s, b, c)?;
    observe(Factor::Su, s);
    s.hu = update_hu(s, b, c)?;
    observe(Factor::Hu, s);
    s.sf = update_sf(s, b, c)?;
    observe(Factor::Sf, s);
    Ok(())
}

pub fn sweep(s: &mut FactorState, b: &DataBundle, c: &SolverConfig) -> Result<()> {
    sweep_with(s, b, c, |_, _| {})
}

/// Runs sweeps from `state` until the relative objective change drops
/// below `tol` or `max_iters` sweeps have run.
pub(crate) fn iterate<S, J>(
    state: &mut FactorState,
    max_iters: usize,
    tol: f64,
    mut sweep: S,
    mut objective: J,
) -> Result<ObjectiveTrace>
where
    S: FnMut(&mut FactorState) -> Result<()>,
    J: FnMut(&FactorState) -> Result<f64>,
{
    let first = objective(state)?;
    if !first.is_finite() {
        return Err(Error::NonFinite {
            sweep: 0,
            value: first,
        });
    }
    let mut trace = ObjectiveTrace {
        values: vec![first],
        ..Default::default()
    };
    for it in 1..=max_iters {
        sweep(state)?;
        let value = objective(state)?;
        if !value.is_finite() {
            return Err(Error::NonFinite { sweep: it, value });
        }
        let prev = *trace.values.last().expect("trace starts non-empty");
        trace.values.push(value);
        trace.iterations = it;
        if relative_change(prev, value) < tol {
            trace.converged = true;
            break;
        }
    }
    Ok(trace)
}

/// Runs the batch algorithm from an explicit starting state.
pub fn fit_offline_from(
    mut state: FactorState,
    b: &DataBundle,
    c: &SolverConfig,
) -> Result<(FactorState, ObjectiveTrace)> {
    c.validate()?;
    check_k(b, c)?;
    let trace = iterate(
        &mut state,
        c.max_iters,
        c.tol,
        |s| sweep(s, b, c),
        |s| objective(s, b, c),
    )?;
    Ok((state, trace))
}

/// Seeded initialization followed by sweeps until convergence.
pub fn fit_offline(b: &DataBundle, c: &SolverConfig) -> Result<(FactorState, ObjectiveTrace)> {
    let state = init_factors(b, c)?;
    fit_offline_from(state, b, c)
}

pub(crate) fn kkt_accumulate(acc: &mut (f64, f64), current: &DenseMatrix, terms: &RuleTerms) {
    for ((&m, &n), &d) in current.iter().zip(&terms.numer).zip(&terms.denom) {
        acc.0 += ((d - n) * m).abs();
        acc.1 += (d + n) * m;
    }
}

/// Normalized stationarity gap `Σ|(denom − numer) ∘ M| / Σ (denom + numer) ∘ M`
/// over all five rules. The bracket is half the Lagrangian gradient, so this
/// is zero exactly at fixed points of the multiplicative rules.
pub fn kkt_residual(s: &FactorState, b: &DataBundle, c: &SolverConfig) -> Result<f64> {
    let mut acc = (0.0, 0.0);
    kkt_accumulate(&mut acc, &s.sf, &sf_parts(s, &b.xp, &b.xu, &b.sf0, c.alpha)?.assemble(&s.sf));
    kkt_accumulate(&mut acc, &s.sp, &sp_parts(s, &b.xp, &b.xr)?.assemble(&s.sp));
    kkt_accumulate(
        &mut acc,
        &s.su,
        &su_parts(s, &b.xu, &b.xr, &b.laplacian, c.beta)?.assemble(&s.su),
    );
    kkt_accumulate(&mut acc, &s.hp, &hp_parts(s, &b.xp)?.assemble(&s.hp));
    kkt_accumulate(&mut acc, &s.hu, &hu_parts(s, &b.xu)?.assemble(&s.hu));
    Ok(if acc.1 > 0.0 { acc.0 / acc.1 } else { 0.0 })
}
