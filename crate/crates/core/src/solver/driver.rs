//! Per-epoch block alternation and the online loop over epochs.

use serde::{Deserialize, Serialize};

use super::dual::{update_psi, ConstraintHistory, PriceController, RateTracker};
use super::epoch::EpochProblem;
use crate::error::{Error, Result};
use crate::model::{
    epoch_rates, harvested_energy_epoch, Allocation, ChannelSet, DualState, EpochAlloc, EpochDriver,
    Fairness, SystemConfig,
};

/// Which closed forms drive the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mode {
    ZeroFair,
    CommonFair(f64),
    MaxMin,
}

impl Mode {
    pub fn from_fairness(f: Fairness) -> Self {
        match f {
            Fairness::Alpha(a) if a == 0.0 => Mode::ZeroFair,
            Fairness::Alpha(a) => Mode::CommonFair(a),
            Fairness::MaxMin => Mode::MaxMin,
        }
    }
}

/// How the DL split power is set after each power step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitRule {
    Optimal,
    /// `v = q / 2`, used by the equal-splitting baselines.
    Half,
    /// `v = 0`: every DL signal is harvested and carries no information.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochOutcome {
    pub alloc: EpochAlloc,
    /// Priced objective after each inner iteration of the kept start.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn power_step(p: &EpochProblem, m: &[f64], n: &[f64], rule: SplitRule) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (q, qbar, mut v) = p.power_block(m, n);
    match rule {
        SplitRule::Optimal => {}
        SplitRule::Half => v.iter_mut().zip(&q).for_each(|(v, q)| *v = 0.5 * q),
        SplitRule::Off => v.iter_mut().for_each(|v| *v = 0.0),
    }
    (q, qbar, v)
}

/// Alternates the time and power blocks from the powers in `start` until the
/// priced objective settles.
pub fn alternate(
    p: &EpochProblem,
    mode: Mode,
    start: &EpochAlloc,
    cfg: &SystemConfig,
    rule: SplitRule,
) -> Result<EpochOutcome> {
    let mut cur = start.clone();
    let mut trace = Vec::new();
    let mut last = p.value(start);
    let mut converged = false;
    for _ in 0..cfg.max_inner_iter {
        let (m, n) = match mode {
            Mode::ZeroFair => {
                let (m, n, _) = p.zf_time_block(&cur.q, &cur.v)?;
                (m, n)
            }
            _ => p.time_block(&cur.q, &cur.qbar, &cur.v)?,
        };
        let (q, qbar, v) = power_step(p, &m, &n, rule);
        cur = EpochAlloc { m, n, q, qbar, v };
        let f = p.value(&cur);
        trace.push(f);
        let scale = f64::abs(last).max(f.abs()).max(f64::MIN_POSITIVE);
        if (f - last).abs() <= cfg.inner_tol * scale {
            converged = true;
            break;
        }
        last = f;
    }
    Ok(EpochOutcome {
        iterations: trace.len(),
        alloc: cur,
        trace,
        converged,
    })
}

/// Allocation giving the whole epoch to one slot, with matching powers.
fn single_slot(p: &EpochProblem, slot: usize, rule: SplitRule) -> EpochAlloc {
    let k = p.k();
    let mut m = vec![0.0; k];
    let mut n = vec![0.0; k];
    if slot < k {
        m[slot] = 1.0;
    } else {
        n[slot - k] = 1.0;
    }
    let (q, qbar, v) = power_step(p, &m, &n, rule);
    EpochAlloc { m, n, q, qbar, v }
}

/// Even split of the epoch over all `2K` slots, with matching powers.
pub fn even_start(p: &EpochProblem, rule: SplitRule) -> EpochAlloc {
    let k = p.k();
    let share = 1.0 / (2 * k) as f64;
    let (m, n) = (vec![share; k], vec![share; k]);
    let (q, qbar, v) = power_step(p, &m, &n, rule);
    EpochAlloc { m, n, q, qbar, v }
}

/// Solves one epoch's priced problem with the configured driver.
pub fn solve_epoch(
    p: &EpochProblem,
    mode: Mode,
    warm: Option<&EpochAlloc>,
    cfg: &SystemConfig,
    rule: SplitRule,
) -> Result<EpochOutcome> {
    let first = match warm {
        Some(w) => w.clone(),
        None => even_start(p, rule),
    };
    let mut best = alternate(p, mode, &first, cfg, rule)?;
    if cfg.driver == EpochDriver::MultiStart {
        for slot in 0..2 * p.k() {
            let out = alternate(p, mode, &single_slot(p, slot, rule), cfg, rule)?;
            if p.value(&out.alloc) > p.value(&best.alloc) {
                best = out;
            }
        }
    }
    Ok(best)
}

/// Everything produced by an online run over all epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub alloc: Allocation,
    pub duals: DualState,
    pub tracker: RateTracker,
    pub mu_trace: Vec<f64>,
    pub nu_trace: Vec<Vec<f64>>,
    pub inner_iterations: Vec<usize>,
    pub converged_epochs: usize,
}

/// Clips an epoch so the horizon stays feasible: BS power beyond what is
/// left of `M * p_avg` is scaled away, and no user spends more than it has
/// stored.
pub fn apply_budget_guards(e: &mut EpochAlloc, hist: &ConstraintHistory, cfg: &SystemConfig) {
    let left = (cfg.m_epochs as f64 * cfg.p_avg - hist.bs_energy).max(0.0);
    let used = e.bs_energy();
    if used > left {
        let scale = left / used;
        e.q.iter_mut().chain(e.v.iter_mut()).for_each(|x| *x *= scale);
    }
    for (u, qbar) in e.qbar.iter_mut().enumerate() {
        *qbar = qbar.min(hist.stored(u).max(0.0));
    }
}

/// Rate weights of epoch `i` for the given mode.
pub fn epoch_weights(
    mode: Mode,
    tracker: &RateTracker,
    duals: &DualState,
    req: Option<&[f64]>,
) -> (Vec<f64>, Vec<f64>) {
    let k = tracker.dl.len();
    match mode {
        Mode::ZeroFair => (vec![1.0; k], vec![1.0; k]),
        Mode::CommonFair(alpha) => tracker.alpha_weights(alpha),
        Mode::MaxMin => match req {
            None => (duals.psi1.clone(), duals.psi2.clone()),
            Some(r) => (
                (0..k).map(|u| duals.psi1[u] / r[u]).collect(),
                (0..k).map(|u| duals.psi2[u] / r[k + u]).collect(),
            ),
        },
    }
}

pub fn mean(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().sum::<f64>() + b.iter().sum::<f64>()) / (a.len() + b.len()) as f64
}

/// Runs the online scheme for `mode` over every epoch of `ch`.
pub fn run_online(ch: &ChannelSet, cfg: &SystemConfig, mode: Mode, rule: SplitRule) -> Result<RunOutput> {
    cfg.validate()?;
    ch.validate()?;
    let (k, m) = (ch.k(), ch.m());
    if k != cfg.k_users || m != cfg.m_epochs {
        return Err(Error::Shape(format!(
            "channels are {m} x {k} but the configuration asks for {} x {}",
            cfg.m_epochs, cfg.k_users
        )));
    }
    let req = cfg.rate_requirements.as_deref();
    let mut tracker = RateTracker::new(k, cfg.rate_floor);
    let (w0d, w0u) = epoch_weights(mode, &tracker, &DualState::new(k, 0.0, 1.0), req);
    let prices = PriceController::new(cfg, mean(&w0d, &w0u));
    let mut duals = DualState::new(k, 0.0, 1.0);
    let mut hist = ConstraintHistory::new(k);
    let mut epochs: Vec<EpochAlloc> = Vec::with_capacity(m);
    let mut out = RunOutput {
        alloc: Allocation::default(),
        duals: duals.clone(),
        tracker: tracker.clone(),
        mu_trace: Vec::with_capacity(m),
        nu_trace: Vec::with_capacity(m),
        inner_iterations: Vec::with_capacity(m),
        converged_epochs: 0,
    };
    for i in 1..=m {
        let (w_dl, w_ul) = epoch_weights(mode, &tracker, &duals, req);
        prices.update(&mut duals, &hist, &w_ul, cfg);
        let p = EpochProblem::new(cfg, ch, i, &duals, w_dl, w_ul)?;
        let mut solved = solve_epoch(&p, mode, epochs.last(), cfg, rule)?;
        apply_budget_guards(&mut solved.alloc, &hist, cfg);
        let t = i - 1;
        let prev = (t > 0).then(|| (ch.g_u2u[t - 1].as_slice(), epochs[t - 1].qbar.as_slice()));
        let harvested = harvested_energy_epoch(cfg, &ch.g[t], &ch.g_u2u[t], &solved.alloc, prev);
        hist.record(&solved.alloc, &harvested);
        let (r_dl, r_ul) = epoch_rates(&solved.alloc, &ch.g[t], cfg);
        tracker.update(&r_dl, &r_ul);
        if mode == Mode::MaxMin {
            // a collapse resets the multipliers to uniform, which is all we need
            let _ = update_psi(&mut duals, &tracker.dl, &tracker.ul, req, cfg, i);
        }
        out.mu_trace.push(duals.mu);
        out.nu_trace.push(duals.nu.clone());
        out.inner_iterations.push(solved.iterations);
        out.converged_epochs += usize::from(solved.converged);
        epochs.push(solved.alloc);
    }
    out.alloc = Allocation { epochs };
    out.duals = duals;
    out.tracker = tracker;
    Ok(out)
}
