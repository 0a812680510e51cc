//! Online multiplier updates and the running average-rate tracker.
//!
//! The raw gradients live on very different scales (watts for the power
//! budget, microjoules for harvested energy, bits for rates), so every step
//! is normalized by the natural size of its multiplier and constraint.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DualState, EpochAlloc, SystemConfig};

/// Bound on the log-offset of the power multiplier from its reference.
const MAX_EXP: f64 = 200.0;

/// Stand-in for an infinite energy price; keeps the priced objective finite.
const MAX_PRICE: f64 = 1e150;

/// Running sums needed by the dual gradients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintHistory {
    pub epochs: usize,
    /// `sum_t sum_k q_k(t)`.
    pub bs_energy: f64,
    /// `sum_t qbar_k(t)` per user.
    pub ul_energy: Vec<f64>,
    /// `sum_t harvested_k(t)` per user.
    pub harvested: Vec<f64>,
}

impl ConstraintHistory {
    pub fn new(k: usize) -> Self {
        Self {
            epochs: 0,
            bs_energy: 0.0,
            ul_energy: vec![0.0; k],
            harvested: vec![0.0; k],
        }
    }

    pub fn record(&mut self, e: &EpochAlloc, harvested: &[f64]) {
        self.epochs += 1;
        self.bs_energy += e.bs_energy();
        for (u, h) in harvested.iter().enumerate() {
            self.ul_energy[u] += e.qbar[u];
            self.harvested[u] += h;
        }
    }

    /// Energy user `u` has harvested but not spent.
    pub fn stored(&self, u: usize) -> f64 {
        self.harvested[u] - self.ul_energy[u]
    }

    pub fn avg_bs_power(&self) -> f64 {
        self.bs_energy / self.epochs.max(1) as f64
    }
}

/// Per-epoch price at which an unconstrained DL slot would transmit at
/// exactly `p_avg`, for rate weights of size `weight`.
pub fn reference_price(cfg: &SystemConfig, weight: f64) -> f64 {
    weight / (LN_2 * cfg.p_avg)
}

/// State of the power and energy multipliers between epochs.
///
/// The power multiplier is its reference `M * reference_price` scaled by
/// `exp(c D)`, where `D = sum_t (sum_k q_k(t) - p_avg) / p_avg` is the
/// cumulative excess in epochs' worth of the budget.
///
/// The energy multiplier of user `k` is `w_k / (ln 2 * s * B_k)` with `w_k`
/// its current UL weight, `B_k` the energy harvested but not yet spent and
/// `s` the configured store share. At that price a UL slot holding the whole
/// epoch spends at most `s B_k`, so the cumulative balance cannot go
/// negative by more than the energy the user recollects from its
/// neighbours. An empty store prices the UL out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceController {
    mu_ref: f64,
}

impl PriceController {
    /// `weight` is the typical rate weight of the scheme.
    pub fn new(cfg: &SystemConfig, weight: f64) -> Self {
        let mu_ref = cfg
            .mu_init
            .unwrap_or(cfg.m_epochs as f64 * reference_price(cfg, weight));
        Self { mu_ref }
    }

    /// Sets `mu` and `nu` from the recorded history and the UL weights of
    /// the coming epoch.
    pub fn update(&self, duals: &mut DualState, hist: &ConstraintHistory, w_ul: &[f64], cfg: &SystemConfig) {
        let excess = (hist.bs_energy - hist.epochs as f64 * cfg.p_avg) / cfg.p_avg;
        duals.mu = self.mu_ref * (cfg.steps.mu * excess).clamp(-MAX_EXP, MAX_EXP).exp();
        for (u, nu) in duals.nu.iter_mut().enumerate() {
            *nu = energy_price(hist.stored(u), w_ul[u], cfg);
        }
    }
}

/// Energy multiplier of a user holding `stored` joules with UL weight `w`.
pub fn energy_price(stored: f64, w: f64, cfg: &SystemConfig) -> f64 {
    let price = if stored > 0.0 {
        w / (LN_2 * cfg.store_share * stored)
    } else {
        f64::INFINITY
    };
    price.clamp(cfg.nu_floor, MAX_PRICE)
}

/// Euclidean projection of `x` onto the probability simplex.
pub fn project_simplex(x: &mut [f64]) {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            tau = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - tau).max(0.0));
}

/// Moves the max-min multipliers toward the links whose average rate is
/// lowest, then projects back onto the simplex with every entry at least
/// `psi_floor / 2K`.
///
/// `req` holds optional rate requirements dividing each rate.
pub fn update_psi(
    duals: &mut DualState,
    r_dl: &[f64],
    r_ul: &[f64],
    req: Option<&[f64]>,
    cfg: &SystemConfig,
    i: usize,
) -> Result<()> {
    let k = r_dl.len();
    let scaled = |x: usize| -> f64 {
        let r = if x < k { r_dl[x] } else { r_ul[x - k] };
        req.map_or(r, |q| r / q[x])
    };
    let rates: Vec<f64> = (0..2 * k).map(scaled).collect();
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = rates.iter().sum::<f64>() / (2 * k) as f64;
    if !(mean > 0.0) {
        return Ok(());
    }
    let lambda = cfg.steps.psi / ((2 * k) as f64 * mean * (i.max(1) as f64).sqrt());
    let mut psi: Vec<f64> = duals.psi1.iter().chain(&duals.psi2).copied().collect();
    for (x, p) in psi.iter_mut().enumerate() {
        *p += lambda * (min - rates[x]);
    }
    // project onto {psi >= eps, sum psi = 1}
    let eps = cfg.psi_floor / (2 * k) as f64;
    let room = 1.0 - (2 * k) as f64 * eps;
    psi.iter_mut().for_each(|p| *p = (*p - eps) / room);
    project_simplex(&mut psi);
    psi.iter_mut().for_each(|p| *p = *p * room + eps);
    if psi.iter().any(|p| !p.is_finite()) {
        let w = 1.0 / (2 * k) as f64;
        duals.psi1.iter_mut().chain(duals.psi2.iter_mut()).for_each(|x| *x = w);
        return Err(Error::Degenerate {
            epoch: i,
            reason: "max-min multipliers left the simplex; reset to uniform".into(),
        });
    }
    duals.psi1.copy_from_slice(&psi[..k]);
    duals.psi2.copy_from_slice(&psi[k..]);
    Ok(())
}

/// Running averages of the per-epoch DL and UL rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateTracker {
    pub dl: Vec<f64>,
    pub ul: Vec<f64>,
    /// Number of epochs folded in so far.
    pub epochs: usize,
    pub floor: f64,
}

impl RateTracker {
    pub fn new(k: usize, floor: f64) -> Self {
        Self {
            dl: vec![floor; k],
            ul: vec![floor; k],
            epochs: 0,
            floor,
        }
    }

    /// `R <- ((i-1)/i) R + r/i`, floored.
    pub fn update(&mut self, r_dl: &[f64], r_ul: &[f64]) {
        self.epochs += 1;
        let i = self.epochs as f64;
        let fold = |avg: &mut [f64], r: &[f64], floor: f64| {
            for (a, &x) in avg.iter_mut().zip(r) {
                *a = (((i - 1.0) * *a + x) / i).max(floor);
            }
        };
        fold(&mut self.dl, r_dl, self.floor);
        fold(&mut self.ul, r_ul, self.floor);
    }

    /// Weights `R^-alpha`, rescaled to mean one.
    pub fn alpha_weights(&self, alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let logs: Vec<f64> = self.dl.iter().chain(&self.ul).map(|r| -alpha * r.ln()).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let mean = raw.iter().sum::<f64>() / raw.len() as f64;
        let k = self.dl.len();
        let w: Vec<f64> = raw.iter().map(|x| x / mean).collect();
        (w[..k].to_vec(), w[k..].to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracker_averages() {
        let mut t = RateTracker::new(1, 1e-6);
        t.update(&[1.0], &[0.0]);
        assert_eq!(t.dl[0], 1.0);
        assert_eq!(t.ul[0], 1e-6);
        t.update(&[3.0], &[0.0]);
        assert!((t.dl[0] - 2.0).abs() < 1e-15);
        let mut c = RateTracker::new(2, 1e-6);
        for _ in 0..10 {
            c.update(&[0.7, 0.7], &[0.7, 0.7]);
        }
        assert!(c.dl.iter().chain(&c.ul).all(|&x| (x - 0.7).abs() < 1e-15));
    }

    #[test]
    fn alpha_weights_have_unit_mean_and_favour_small_rates() {
        let mut t = RateTracker::new(2, 1e-6);
        t.update(&[1.0, 2.0], &[4.0, 0.5]);
        let (wd, wu) = t.alpha_weights(2.0);
        let mean = (wd.iter().sum::<f64>() + wu.iter().sum::<f64>()) / 4.0;
        assert!((mean - 1.0).abs() < 1e-12);
        assert!((wd[0] / wd[1] - 4.0).abs() < 1e-12);
        assert!(wu[1] > wd[0]);
    }

    #[test]
    fn power_price_follows_cumulative_excess() {
        let cfg = SystemConfig::desk();
        let ctl = PriceController::new(&cfg, 1.0);
        let mu_ref = cfg.m_epochs as f64 * reference_price(&cfg, 1.0);
        let mut d = DualState::new(1, 0.0, 1.0);
        let mut hist = ConstraintHistory {
            epochs: 4,
            bs_energy: 4.0 * cfg.p_avg,
            ul_energy: vec![0.0],
            harvested: vec![0.0],
        };
        ctl.update(&mut d, &hist, &[1.0], &cfg);
        assert!((d.mu / mu_ref - 1.0).abs() < 1e-12);
        hist.bs_energy = 3.0 * cfg.p_avg;
        ctl.update(&mut d, &hist, &[1.0], &cfg);
        assert!((d.mu / mu_ref - (-cfg.steps.mu).exp()).abs() < 1e-12);
        let fixed = SystemConfig {
            mu_init: Some(3.0),
            ..cfg.clone()
        };
        hist.bs_energy = 4.0 * cfg.p_avg;
        PriceController::new(&fixed, 1.0).update(&mut d, &hist, &[1.0], &fixed);
        assert!((d.mu - 3.0).abs() < 1e-12);
    }

    #[test]
    fn energy_price_caps_the_burst_at_the_store() {
        let cfg = SystemConfig::desk();
        let nu = energy_price(2e-4, 0.7, &cfg);
        // a full-epoch UL slot spends w / (ln2 nu) - N / g < share * stored
        assert!((0.7 / (LN_2 * nu) - cfg.store_share * 2e-4).abs() < 1e-18);
        assert_eq!(energy_price(0.0, 0.7, &cfg), MAX_PRICE);
        assert_eq!(energy_price(-1.0, 0.7, &cfg), MAX_PRICE);
        assert_eq!(energy_price(1.0, 0.0, &cfg), cfg.nu_floor);
    }

    #[test]
    fn simplex_projection() {
        let mut x = vec![0.5, 0.5, 0.5];
        project_simplex(&mut x);
        assert!(x.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let mut x = vec![2.0, 0.0, -1.0];
        project_simplex(&mut x);
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
        let mut x = vec![0.6, 0.3, 0.0];
        project_simplex(&mut x);
        let want = [0.6 + 1.0 / 30.0, 0.3 + 1.0 / 30.0, 1.0 / 30.0];
        assert!(x.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
        let mut x = vec![0.9, 0.5, 0.0];
        project_simplex(&mut x);
        assert!((x[0] - 0.7).abs() < 1e-15 && (x[1] - 0.3).abs() < 1e-15 && x[2] == 0.0);
    }

    #[test]
    fn starved_link_recovers_from_zero() {
        let cfg = SystemConfig::desk();
        let mut d = DualState::new(2, 0.0, 1.0);
        d.psi1 = vec![0.0, 0.5];
        d.psi2 = vec![0.25, 0.25];
        update_psi(&mut d, &[0.1, 1.0], &[1.0, 1.0], None, &cfg, 1).unwrap();
        assert!(d.psi1[0] > 0.0);
    }

    #[test]
    fn psi_stays_on_simplex() {
        let cfg = SystemConfig::desk();
        let mut d = DualState::new(2, 0.0, 1.0);
        update_psi(&mut d, &[1.0, 1.0], &[1.0, 1.0], None, &cfg, 1).unwrap();
        assert!(d.psi1.iter().chain(&d.psi2).all(|&x| (x - 0.25).abs() < 1e-15));
        update_psi(&mut d, &[3.0, 1.0], &[1.0, 1.0], None, &cfg, 2).unwrap();
        let s: f64 = d.psi1.iter().chain(&d.psi2).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(d.psi1[0] < d.psi1[1]);
    }
}
