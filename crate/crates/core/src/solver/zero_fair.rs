//! Zero fairness (`alpha = 0`): sum-rate maximization.
//!
//! Every rate weight is one. The time block picks at most one UL user and
//! sets its power jointly with the split; the power block is shared with the
//! other schemes.

use super::driver::{solve_epoch, EpochOutcome, Mode, SplitRule};
use super::dual::{ConstraintHistory, PriceController};
use super::epoch::EpochProblem;
use crate::error::Result;
use crate::model::{ChannelSet, DualState, EpochAlloc, SystemConfig};

/// Epoch `i` priced by `duals` with unit weights.
pub fn zf_problem(cfg: &SystemConfig, ch: &ChannelSet, i: usize, duals: &DualState) -> Result<EpochProblem> {
    let k = ch.k();
    EpochProblem::new(cfg, ch, i, duals, vec![1.0; k], vec![1.0; k])
}

/// Time split and UL power for fixed DL and split powers: `(m, n, qbar)`.
pub fn zf_time_and_ul_power(
    q: &[f64],
    v: &[f64],
    duals: &DualState,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    zf_problem(cfg, ch, i, duals)?.zf_time_block(q, v)
}

/// DL and split powers for a fixed time split: `(q, v)`.
pub fn zf_dl_and_split_power(
    m: &[f64],
    n: &[f64],
    duals: &DualState,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (q, _, v) = zf_problem(cfg, ch, i, duals)?.power_block(m, n);
    Ok((q, v))
}

/// Solves epoch `i` with the duals held fixed.
pub fn zf_epoch(
    i: usize,
    duals: &DualState,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    warm: Option<&EpochAlloc>,
) -> Result<EpochOutcome> {
    let p = zf_problem(cfg, ch, i, duals)?;
    solve_epoch(&p, Mode::ZeroFair, warm, cfg, SplitRule::Optimal)
}

/// Power and energy multipliers for the next epoch.
pub fn zf_dual_update(duals: &mut DualState, hist: &ConstraintHistory, cfg: &SystemConfig) {
    let ones = vec![1.0; duals.nu.len()];
    PriceController::new(cfg, 1.0).update(duals, hist, &ones, cfg);
}
