//! One timestamp of the streaming algorithm.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::temporal::{aggregate_window, partition_users, Snapshot, TemporalState, UserPartition};
use super::{BatchData, StreamConfig};
use crate::error::{Error, Result};
use crate::linalg::{frob_diff_sq, hadamard_sqrt_update, trace_quadratic, DenseMatrix};
use crate::offline::{
    self, check_k, hp_parts, hu_parts, iterate, kkt_accumulate, reconstruction_terms, sf_parts,
    sp_parts, su_parts, uniform_matrix, Factor, FactorState, ObjectiveTrace, RuleParts,
};

/// Everything a timestamp's rules need besides the factors themselves,
/// computed once before the sweep loop.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub partition: UserPartition,
    /// α-anchor for `S_f`: the window aggregate, or the lexicon prior on a
    /// cold start.
    pub sf_anchor: DenseMatrix,
    /// Whether the γ-terms are active (window non-empty).
    pub temporal: bool,
    /// `S_uw` rows aligned with the batch's user rows; zero for new users.
    pub su_window: DenseMatrix,
    /// `S_u(t−1)` rows aligned with the batch's user rows; zero for new users.
    pub su_prev: DenseMatrix,
    /// Batch rows of evolving users.
    pub evolving_rows: Vec<usize>,
    /// Batch rows of new users.
    pub new_rows: Vec<usize>,
    /// Rows carried for users absent from this batch, set to their `S_uw`.
    pub disappeared: Vec<(String, Array1<f64>)>,
    /// `(H_p, H_u)` of the previous timestamp, used as the starting point.
    pub prev_h: Option<(DenseMatrix, DenseMatrix)>,
}

/// Aligns the window aggregates to the batch by global user id.
pub fn prepare_step(
    batch: &BatchData,
    temporal: &TemporalState,
    config: &StreamConfig,
) -> Result<StepContext> {
    let k = config.solver.k;
    let m = batch.bundle.m();
    let partition = partition_users(temporal.prev_registry(), &batch.user_ids)?;
    let mut su_window = Array2::zeros((m, k));
    let mut su_prev = Array2::zeros((m, k));
    let mut disappeared = Vec::new();
    let (sf_anchor, is_temporal) = match aggregate_window(temporal) {
        None => (batch.bundle.sf0().clone(), false),
        Some(agg) => {
            if agg.sf.dim() != (batch.bundle.l(), k) {
                return Err(Error::DimensionMismatch {
                    op: "window S_fw vs batch features",
                    left: agg.sf.dim(),
                    right: (batch.bundle.l(), k),
                });
            }
            let latest = temporal.latest().expect("aggregate implies a snapshot");
            for (id, prev_row, row) in &partition.evolving {
                let target = agg
                    .users
                    .get(id)
                    .ok_or_else(|| Error::Alignment(id.clone()))?;
                if target.len() != k || latest.user_ids.get(*prev_row) != Some(id) {
                    return Err(Error::Alignment(id.clone()));
                }
                su_window.row_mut(*row).assign(target);
                su_prev.row_mut(*row).assign(&latest.su.row(*prev_row));
            }
            for id in &partition.disappeared {
                let target = agg
                    .users
                    .get(id)
                    .ok_or_else(|| Error::Alignment(id.clone()))?;
                disappeared.push((id.clone(), target.clone()));
            }
            (agg.sf, true)
        }
    };
    let evolving_rows = partition.evolving.iter().map(|e| e.2).collect();
    let new_rows = partition.new.iter().map(|e| e.1).collect();
    Ok(StepContext {
        partition,
        sf_anchor,
        temporal: is_temporal,
        su_window,
        su_prev,
        evolving_rows,
        new_rows,
        disappeared,
        prev_h: temporal.latest().map(|l| (l.hp.clone(), l.hu.clone())),
    })
}

fn check_rows(state: &FactorState, ctx: &StepContext) -> Result<()> {
    if state.su.dim() != ctx.su_window.dim() {
        return Err(Error::DimensionMismatch {
            op: "online S_u vs window rows",
            left: state.su.dim(),
            right: ctx.su_window.dim(),
        });
    }
    Ok(())
}

/// Streaming objective: reconstruction over the batch, α-tie of `S_f` to its
/// anchor, graph smoothness, and the γ-tie of returning (and disappeared)
/// users to their window rows. Disappeared rows equal their target, so they
/// contribute nothing.
pub fn online_objective(
    state: &FactorState,
    batch: &BatchData,
    ctx: &StepContext,
    config: &StreamConfig,
) -> Result<f64> {
    check_rows(state, ctx)?;
    let b = &batch.bundle;
    let c = &config.solver;
    let mut value = reconstruction_terms(state, b.xp(), b.xu(), b.xr())?
        + c.alpha * frob_diff_sq(&state.sf, &ctx.sf_anchor)?
        + c.beta * trace_quadratic(&state.su, b.laplacian())?;
    if ctx.temporal {
        let drift: f64 = ctx
            .evolving_rows
            .iter()
            .map(|&r| {
                let d = &state.su.row(r) - &ctx.su_window.row(r);
                d.dot(&d)
            })
            .sum();
        value += config.gamma * drift;
    }
    Ok(value)
}

fn apply(current: &DenseMatrix, parts: RuleParts, eps: f64) -> Result<DenseMatrix> {
    let terms = parts.assemble(current);
    hadamard_sqrt_update(current, &terms.numer, &terms.denom, eps)
}

pub fn online_update_hu(s: &FactorState, batch: &BatchData, config: &StreamConfig) -> Result<DenseMatrix> {
    apply(&s.hu, hu_parts(s, batch.bundle.xu())?, config.solver.eps)
}

pub fn online_update_hp(s: &FactorState, batch: &BatchData, config: &StreamConfig) -> Result<DenseMatrix> {
    apply(&s.hp, hp_parts(s, batch.bundle.xp())?, config.solver.eps)
}

pub fn online_update_sp(s: &FactorState, batch: &BatchData, config: &StreamConfig) -> Result<DenseMatrix> {
    apply(&s.sp, sp_parts(s, batch.bundle.xp(), batch.bundle.xr())?, config.solver.eps)
}

/// `S_f` rule with the window aggregate as the α-anchor.
pub fn online_update_sf(
    s: &FactorState,
    batch: &BatchData,
    ctx: &StepContext,
    config: &StreamConfig,
) -> Result<DenseMatrix> {
    let b = &batch.bundle;
    let parts = sf_parts(s, b.xp(), b.xu(), &ctx.sf_anchor, config.solver.alpha)?;
    apply(&s.sf, parts, config.solver.eps)
}

fn new_user_parts(s: &FactorState, batch: &BatchData, config: &StreamConfig) -> Result<RuleParts> {
    let b = &batch.bundle;
    su_parts(s, b.xu(), b.xr(), b.laplacian(), config.solver.beta)
}

fn evolving_user_parts(
    s: &FactorState,
    batch: &BatchData,
    ctx: &StepContext,
    config: &StreamConfig,
) -> Result<RuleParts> {
    check_rows(s, ctx)?;
    let mut parts = new_user_parts(s, batch, config)?;
    let gamma = config.gamma;
    if !ctx.temporal || gamma == 0.0 {
        return Ok(parts);
    }
    let k = s.su.ncols();
    // γ·S_eᵀ(S_e − S_u(t−1)_e) over evolving rows only
    let mut correction = Array2::<f64>::zeros((k, k));
    for &r in &ctx.evolving_rows {
        let cur = s.su.row(r);
        let step = &cur - &ctx.su_prev.row(r);
        for p in 0..k {
            for q in 0..k {
                correction[[p, q]] += cur[p] * step[q];
            }
        }
    }
    if let Some(delta) = parts.delta.as_mut() {
        delta.scaled_add(-gamma, &correction);
    }
    for &r in &ctx.evolving_rows {
        parts.pos.row_mut(r).scaled_add(gamma, &ctx.su_window.row(r));
        parts.neg.row_mut(r).scaled_add(gamma, &s.su.row(r));
    }
    Ok(parts)
}

fn replace_rows(target: &DenseMatrix, source: &DenseMatrix, rows: &[usize]) -> DenseMatrix {
    let mut out = target.clone();
    for &r in rows {
        out.row_mut(r).assign(&source.row(r));
    }
    out
}

/// `S_u` rule without the γ-terms; only new-user rows change.
pub fn online_update_su_new(
    s: &FactorState,
    batch: &BatchData,
    ctx: &StepContext,
    config: &StreamConfig,
) -> Result<DenseMatrix> {
    check_rows(s, ctx)?;
    let full = apply(&s.su, new_user_parts(s, batch, config)?, config.solver.eps)?;
    Ok(replace_rows(&s.su, &full, &ctx.new_rows))
}

/// `S_u` rule with `γ·S_uw` added to the numerator, `γ·S_u` to the
/// denominator, and `−γ·S_uᵀ(S_u − S_u(t−1))` to `Δ`; only evolving-user rows
/// change.
pub fn online_update_su_evolving(
    s: &FactorState,
    batch: &BatchData,
    ctx: &StepContext,
    config: &StreamConfig,
) -> Result<DenseMatrix> {
    let full = apply(&s.su, evolving_user_parts(s, batch, ctx, config)?, config.solver.eps)?;
    Ok(replace_rows(&s.su, &full, &ctx.evolving_rows))
}

/// One warm-start sweep: S_f, S_p, H_p, H_u, new users, evolving users.
pub fn online_sweep_with<F>(
    s: &mut FactorState,
    batch: &BatchData,
    ctx: &StepContext,
    config: &StreamConfig,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(Factor, &FactorState),
{
    s.sf = online_update_sf(s, batch, ctx, config)?;
    observe(Factor::Sf, s);
    s.sp = online_update_sp(s, batch, config)?;
    observe(Factor::Sp, s);
    s.hp = online_update_hp(s, batch, config)?;
    observe(Factor::Hp, s);
    s.hu = online_update_hu(s, batch, config)?;
    observe(Factor::Hu, s);
    s.su = online_update_su_new(s, batch, ctx, config)?;
    observe(Factor::SuNew, s);
    s.su = online_update_su_evolving(s, batch, ctx, config)?;
    observe(Factor::SuEvolving, s);
    Ok(())
}

/// Stationarity gap of the streaming rules, normalized as in
/// [`offline::kkt_residual`].
pub fn online_kkt_residual(
    s: &FactorState,
    batch: &BatchData,
    ctx: &StepContext,
    config: &StreamConfig,
) -> Result<f64> {
    let b = &batch.bundle;
    let c = &config.solver;
    let mut acc = (0.0, 0.0);
    kkt_accumulate(&mut acc, &s.sf, &sf_parts(s, b.xp(), b.xu(), &ctx.sf_anchor, c.alpha)?.assemble(&s.sf));
    kkt_accumulate(&mut acc, &s.sp, &sp_parts(s, b.xp(), b.xr())?.assemble(&s.sp));
    kkt_accumulate(&mut acc, &s.hp, &hp_parts(s, b.xp())?.assemble(&s.hp));
    kkt_accumulate(&mut acc, &s.hu, &hu_parts(s, b.xu())?.assemble(&s.hu));
    kkt_accumulate(&mut acc, &s.su, &evolving_user_parts(s, batch, ctx, config)?.assemble(&s.su));
    Ok(if acc.1 > 0.0 { acc.0 / acc.1 } else { 0.0 })
}

/// Result of one timestamp.
#[derive(Debug, Clone)]
pub struct OnlineStep {
    pub state: FactorState,
    pub trace: ObjectiveTrace,
    pub partition: UserPartition,
    /// Rows reported for users absent from the batch (equal to their `S_uw`).
    pub disappeared: BTreeMap<String, Array1<f64>>,
}

/// Warm-start factors: `S_f = S_fw`, returning users from `S_uw`, everything
/// else drawn uniformly from `(0.01, 1)`.
pub fn init_online(batch: &BatchData, ctx: &StepContext, config: &StreamConfig) -> FactorState {
    let k = config.solver.k;
    let b = &batch.bundle;
    let mut rng = ChaCha8Rng::seed_from_u64(config.solver.seed);
    let mut su = uniform_matrix(&mut rng, b.m(), k);
    for &r in &ctx.evolving_rows {
        su.row_mut(r).assign(&ctx.su_window.row(r));
    }
    let sp = uniform_matrix(&mut rng, b.n(), k);
    let mut hu = uniform_matrix(&mut rng, k, k);
    let mut hp = uniform_matrix(&mut rng, k, k);
    // Carrying the associations over keeps cluster labels stable across steps.
    if let Some(last) = ctx.prev_h.as_ref() {
        hp.assign(&last.0);
        hu.assign(&last.1);
    }
    FactorState {
        sf: ctx.sf_anchor.clone(),
        sp,
        su,
        hp,
        hu,
    }
}

/// Solves one timestamp and pushes its factors into `temporal`.
///
/// With an empty window the step is exactly the batch algorithm on this
/// batch (same initialization, same sweep order).
pub fn fit_online_step(
    batch: &BatchData,
    temporal: &mut TemporalState,
    config: &StreamConfig,
) -> Result<OnlineStep> {
    config.validate()?;
    check_k(&batch.bundle, &config.solver)?;
    let ctx = prepare_step(batch, temporal, config)?;
    let (state, trace) = if ctx.temporal {
        let mut state = init_online(batch, &ctx, config);
        let trace = iterate(
            &mut state,
            config.solver.max_iters,
            config.solver.tol,
            |s| online_sweep_with(s, batch, &ctx, config, |_, _| {}),
            |s| online_objective(s, batch, &ctx, config),
        )?;
        (state, trace)
    } else {
        offline::fit_offline(&batch.bundle, &config.solver)?
    };
    temporal.push(Snapshot {
        timestamp: batch.timestamp,
        sf: state.sf.clone(),
        user_ids: batch.user_ids.clone(),
        su: state.su.clone(),
        hp: state.hp.clone(),
        hu: state.hu.clone(),
    })?;
    Ok(OnlineStep {
        state,
        trace,
        disappeared: ctx.disappeared.into_iter().collect(),
        partition: ctx.partition,
    })
}
