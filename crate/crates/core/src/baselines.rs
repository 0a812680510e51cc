//! Reference schemes the optimized solvers are compared against.
//!
//! * ETEPES: equal time, equal power, equal splitting.
//! * ETEPOS: equal time and power, split power set for max-min fairness.
//! * OTOPES: the max-min solver with the split fixed at half the DL power.
//! * ST-DWET: harvest-then-transmit with no DL information and no energy
//!   recycled between users.

use std::f64::consts::LN_2;

use crate::error::Result;
use crate::model::{
    epoch_rates, perspective_rate, Allocation, ChannelSet, DualState, EpochAlloc, Fairness, SystemConfig,
};
use crate::solver::driver::{run_online, Mode, RunOutput, SplitRule};
use crate::solver::dual::RateTracker;

/// The equal DL power: the largest level meeting both the peak and the
/// average power budget.
pub fn equal_power(cfg: &SystemConfig) -> f64 {
    let k = cfg.k_users as f64;
    (cfg.p_max / (2.0 * k)).min(cfg.p_avg / k)
}

fn equal_epoch(cfg: &SystemConfig, k: usize, v_share: f64) -> EpochAlloc {
    let t = 1.0 / (2 * k) as f64;
    let q = equal_power(cfg);
    EpochAlloc {
        m: vec![t; k],
        n: vec![t; k],
        q: vec![q; k],
        qbar: vec![0.0; k],
        v: vec![v_share * q; k],
    }
}

/// Sets every UL power to the smallest per-user average of the energy
/// harvested from the BS, which meets every energy balance.
fn equalize_ul(epochs: &mut [EpochAlloc], ch: &ChannelSet, cfg: &SystemConfig) {
    let k = ch.k();
    let mut got = vec![0.0; k];
    for (t, e) in epochs.iter().enumerate() {
        let total: f64 = e.q.iter().sum();
        for (u, x) in got.iter_mut().enumerate() {
            *x += cfg.zeta * ch.g[t][u] * (total - e.v[u]);
        }
    }
    let level = got.iter().copied().fold(f64::INFINITY, f64::min).max(0.0) / epochs.len().max(1) as f64;
    for e in epochs.iter_mut() {
        e.qbar.iter_mut().for_each(|x| *x = level);
    }
}

/// Packs a fixed allocation as a run output with realized averages.
pub(crate) fn finish(epochs: Vec<EpochAlloc>, ch: &ChannelSet, cfg: &SystemConfig, duals: DualState) -> RunOutput {
    let mut tracker = RateTracker::new(ch.k(), cfg.rate_floor);
    for (t, e) in epochs.iter().enumerate() {
        let (r_dl, r_ul) = epoch_rates(e, &ch.g[t], cfg);
        tracker.update(&r_dl, &r_ul);
    }
    let m = epochs.len();
    RunOutput {
        alloc: Allocation { epochs },
        duals,
        tracker,
        mu_trace: Vec::new(),
        nu_trace: Vec::new(),
        inner_iterations: vec![0; m],
        converged_epochs: m,
    }
}

/// Equal time, equal power and `v = q / 2` in every epoch.
pub fn etepes(ch: &ChannelSet, cfg: &SystemConfig) -> Result<RunOutput> {
    cfg.validate()?;
    ch.validate()?;
    let k = ch.k();
    let mut epochs = vec![equal_epoch(cfg, k, 0.5); ch.m()];
    equalize_ul(&mut epochs, ch, cfg);
    Ok(finish(epochs, ch, cfg, DualState::new(k, 0.0, 0.0)))
}

/// Bisection steps for the ETEPOS levels.
const LEVEL_ITERS: usize = 200;

/// ETEPES time and power with split powers from the max-min closed form
/// `v = (psi1 m / (ln2 zeta nu) - N m) / g` at converged multipliers.
///
/// With the multipliers fixed, every user receives the same DL energy
/// `x_k = g v` in each epoch (clipped at `g q`). The ratio `psi1 / nu` of
/// each user is the one at which the restricted max-min problem settles:
/// the fairness value is bisected, each user gets the smallest `x_k` whose
/// average DL rate reaches it, and the value is feasible when the ETEPES
/// UL level paid for by the remaining harvest reaches it too.
pub fn etepos(ch: &ChannelSet, cfg: &SystemConfig) -> Result<RunOutput> {
    cfg.validate()?;
    ch.validate()?;
    let (k, m) = (ch.k(), ch.m());
    let base = equal_epoch(cfg, k, 0.0);
    let (t, q) = (base.m[0], base.q[0]);
    let noise = cfg.noise_floor();
    let mf = m as f64;
    let dl_rate = |u: usize, x: f64| -> f64 {
        (0..m).map(|i| perspective_rate(t, x.min(ch.g[i][u] * q), 1.0, noise)).sum::<f64>() / mf
    };
    let x_max: Vec<f64> = (0..k).map(|u| (0..m).map(|i| ch.g[i][u] * q).fold(0.0, f64::max)).collect();
    // smallest received energy reaching `theta`, if any
    let level = |u: usize, theta: f64| -> Option<f64> {
        if dl_rate(u, x_max[u]) < theta {
            return None;
        }
        let (mut lo, mut hi) = (0.0, x_max[u]);
        for _ in 0..LEVEL_ITERS {
            let mid = 0.5 * (lo + hi);
            if dl_rate(u, mid) >= theta {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    };
    let total_q = k as f64 * q;
    let ul_level = |x: &[f64]| -> f64 {
        (0..k)
            .map(|u| {
                (0..m)
                    .map(|i| cfg.zeta * ch.g[i][u] * (total_q - (x[u] / ch.g[i][u]).min(q)))
                    .sum::<f64>()
                    / mf
            })
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    };
    let feasible = |theta: f64| -> Option<Vec<f64>> {
        let x: Vec<f64> = (0..k).map(|u| level(u, theta)).collect::<Option<_>>()?;
        let qbar = ul_level(&x);
        let ok = (0..k).all(|u| {
            (0..m).map(|i| perspective_rate(t, qbar, ch.g[i][u], noise)).sum::<f64>() / mf >= theta
        });
        ok.then_some(x)
    };
    let mut best = vec![0.0; k];
    let mut lo = 0.0;
    let mut hi = (0..k).map(|u| dl_rate(u, x_max[u])).fold(f64::INFINITY, f64::min);
    if hi > 0.0 {
        for _ in 0..LEVEL_ITERS {
            let mid = 0.5 * (lo + hi);
            match feasible(mid) {
                Some(x) => {
                    lo = mid;
                    best = x;
                }
                None => hi = mid,
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
    }
    let mut epochs = vec![base; m];
    for (i, e) in epochs.iter_mut().enumerate() {
        for u in 0..k {
            e.v[u] = (best[u] / ch.g[i][u]).min(q);
        }
    }
    equalize_ul(&mut epochs, ch, cfg);
    // multipliers implied by the levels, with psi1 uniform
    let mut duals = DualState::new(k, 0.0, 0.0);
    for u in 0..k {
        let psi = duals.psi1[u];
        duals.nu[u] = psi / (LN_2 * cfg.zeta * (best[u] / t + noise));
    }
    Ok(finish(epochs, ch, cfg, duals))
}

/// The max-min solver with `v = q / 2` after every power step.
pub fn otopes(ch: &ChannelSet, cfg: &SystemConfig) -> Result<RunOutput> {
    let cfg = cfg.clone().with_fairness(Fairness::MaxMin);
    run_online(ch, &cfg, Mode::MaxMin, SplitRule::Half)
}

/// Sum-rate harvest-then-transmit: no DL information (`v = 0`) and no
/// energy recycled between users while solving.
///
/// Peer harvesting still happens physically, so the result is feasible
/// for the full model as well.
pub fn st_dwet(ch: &ChannelSet, cfg: &SystemConfig) -> Result<RunOutput> {
    let cfg = SystemConfig {
        zeta0: 0.0,
        ..cfg.clone().with_fairness(Fairness::Alpha(0.0))
    };
    run_online(ch, &cfg, Mode::ZeroFair, SplitRule::Off)
}
