use serde::{Deserialize, Serialize};

use super::rates::harvested_energy_all;
use super::{Allocation, ChannelSet, SystemConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constraint {
    /// A variable is negative or not finite.
    Sign,
    /// `sum_k (m_k + n_k) <= 1` per epoch.
    TimeBudget,
    /// `q_k <= p_max m_k`.
    PeakPower,
    /// `v_k <= q_k`.
    SplitPower,
    /// `(1/M) sum_i sum_k q_k(i) <= p_avg`.
    AveragePower,
    /// `sum_i qbar_k(i) <= sum_i harvested_k(i)` per user.
    EnergyBalance,
}

impl Constraint {
    /// Constraints that involve a single epoch.
    pub const PER_EPOCH: [Constraint; 4] = [
        Constraint::Sign,
        Constraint::TimeBudget,
        Constraint::PeakPower,
        Constraint::SplitPower,
    ];

    /// Constraints that couple epochs through long-run averages.
    pub const LONG_TERM: [Constraint; 2] = [Constraint::AveragePower, Constraint::EnergyBalance];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    /// One based; `None` for constraints over the whole horizon.
    pub epoch: Option<usize>,
    /// Zero based; `None` for constraints shared by all users.
    pub user: Option<usize>,
    /// Amount by which the left-hand side exceeds the bound.
    pub excess: f64,
}

/// Lists every constraint violated by more than `tol`.
pub fn check_feasibility(
    alloc: &Allocation,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    tol: f64,
) -> Result<Vec<Violation>> {
    let mut all = Constraint::PER_EPOCH.to_vec();
    all.extend(Constraint::LONG_TERM);
    check_constraints(alloc, ch, cfg, tol, &all)
}

/// Like [`check_feasibility`] restricted to the listed constraint families.
pub fn check_constraints(
    alloc: &Allocation,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    tol: f64,
    which: &[Constraint],
) -> Result<Vec<Violation>> {
    let (k, m) = (ch.k(), alloc.m());
    if m > ch.m() {
        return Err(Error::Shape(format!("{m} epochs allocated but {} channel epochs", ch.m())));
    }
    alloc.check_shape(k, m)?;
    let on = |c| which.contains(&c);
    let mut out = Vec::new();
    let mut push = |constraint, epoch: Option<usize>, user: Option<usize>, excess: f64| {
        if excess > tol || excess.is_nan() {
            out.push(Violation {
                constraint,
                epoch,
                user,
                excess,
            });
        }
    };

    for (t, e) in alloc.epochs.iter().enumerate() {
        let ep = Some(t + 1);
        for u in 0..k {
            if on(Constraint::Sign) {
                for x in [e.m[u], e.n[u], e.q[u], e.qbar[u], e.v[u]] {
                    if !x.is_finite() {
                        push(Constraint::Sign, ep, Some(u), f64::NAN);
                    } else {
                        push(Constraint::Sign, ep, Some(u), -x);
                    }
                }
            }
            if on(Constraint::PeakPower) {
                push(Constraint::PeakPower, ep, Some(u), e.q[u] - cfg.p_max * e.m[u]);
            }
            if on(Constraint::SplitPower) {
                push(Constraint::SplitPower, ep, Some(u), e.v[u] - e.q[u]);
            }
        }
        if on(Constraint::TimeBudget) {
            push(Constraint::TimeBudget, ep, None, e.time_used() - 1.0);
        }
    }

    if on(Constraint::AveragePower) && m > 0 {
        let avg = alloc.epochs.iter().map(|e| e.bs_energy()).sum::<f64>() / m as f64;
        push(Constraint::AveragePower, None, None, avg - cfg.p_avg);
    }
    if on(Constraint::EnergyBalance) {
        let harvest = harvested_energy_all(alloc, ch, cfg);
        for u in 0..k {
            let spent: f64 = alloc.epochs.iter().map(|e| e.qbar[u]).sum();
            let got: f64 = harvest.iter().map(|h| h[u]).sum();
            push(Constraint::EnergyBalance, None, Some(u), spent - got);
        }
    }
    Ok(out)
}
