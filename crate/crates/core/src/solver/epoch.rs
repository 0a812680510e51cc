//! The priced single-epoch problem shared by every scheme.
//!
//! With the duals fixed, one epoch maximizes
//!
//! ```text
//! F = sum_k wD_k rDL_k + wU_k rUL_k + b_k q_k - a_k v_k - c_k qbar_k
//! ```
//!
//! over `(m, n, q, qbar, v)` subject to the full-time budget, the peak power
//! bound `q <= p_max m` and `v <= q`. The weights are 1 for zero fairness,
//! normalized `R^-alpha` for common fairness and `psi` for max-min. The price
//! coefficients are
//!
//! ```text
//! a_k = zeta nu_k g_k
//! b   = zeta sum_l nu_l g_l - mu / M
//! c_k = nu_k (1 - zeta0 sum_{l != k} g_kl)
//! ```

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{perspective_rate, ChannelSet, DualState, EpochAlloc, SystemConfig};
use crate::numerics::h_inv_lambert;

/// Relative width at which the price bisections stop.
const PRICE_WIDTH: f64 = 1e-14;
const PRICE_ITERS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochProblem {
    /// One-based epoch index, kept for error reports.
    pub epoch: usize,
    pub g: Vec<f64>,
    pub noise: f64,
    pub p_max: f64,
    pub w_dl: Vec<f64>,
    pub w_ul: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl EpochProblem {
    pub fn new(
        cfg: &SystemConfig,
        ch: &ChannelSet,
        epoch: usize,
        duals: &DualState,
        w_dl: Vec<f64>,
        w_ul: Vec<f64>,
    ) -> Result<Self> {
        if epoch == 0 || epoch > ch.m() {
            return Err(Error::Index {
                what: "epoch",
                index: epoch,
                len: ch.m(),
            });
        }
        let k = ch.k();
        if w_dl.len() != k || w_ul.len() != k || duals.nu.len() != k {
            return Err(Error::Shape(format!("weights and duals must have {k} entries")));
        }
        let g = ch.g[epoch - 1].clone();
        let u2u = &ch.g_u2u[epoch - 1];
        let credit: f64 = cfg.zeta * g.iter().zip(&duals.nu).map(|(g, nu)| g * nu).sum::<f64>();
        let price = duals.mu / cfg.m_epochs as f64;
        let mut a = Vec::with_capacity(k);
        let mut b = Vec::with_capacity(k);
        let mut c = Vec::with_capacity(k);
        for u in 0..k {
            let nu = duals.nu[u];
            let leak = 1.0 - cfg.zeta0 * u2u[u].iter().sum::<f64>();
            if !(leak > 0.0) {
                return Err(Error::Degenerate {
                    epoch,
                    reason: format!("user {u} recovers at least all of its UL energy from peers"),
                });
            }
            a.push(cfg.zeta * nu * g[u]);
            b.push(credit - price);
            c.push(nu * leak);
        }
        Ok(Self {
            epoch,
            g,
            noise: cfg.noise_floor(),
            p_max: cfg.p_max,
            w_dl,
            w_ul,
            a,
            b,
            c,
        })
    }

    pub fn k(&self) -> usize {
        self.g.len()
    }

    /// Weighted rate part of the objective.
    pub fn weighted_rate(&self, e: &EpochAlloc) -> f64 {
        (0..self.k())
            .map(|u| {
                self.w_dl[u] * perspective_rate(e.m[u], e.v[u], self.g[u], self.noise)
                    + self.w_ul[u] * perspective_rate(e.n[u], e.qbar[u], self.g[u], self.noise)
            })
            .sum()
    }

    /// The priced objective `F`.
    pub fn value(&self, e: &EpochAlloc) -> f64 {
        let prices: f64 = (0..self.k())
            .map(|u| self.b[u] * e.q[u] - self.a[u] * e.v[u] - self.c[u] * e.qbar[u])
            .sum();
        self.weighted_rate(e) + prices
    }

    /// `D_k`: the UL SNR-times-noise level a user would run at in its UL slot.
    pub fn ul_level(&self, u: usize) -> f64 {
        self.w_ul[u] * self.g[u] / (LN_2 * self.c[u]) - self.noise
    }

    /// Optimal time split for fixed power variables.
    ///
    /// Every flexible slot runs at the SNR where its weighted marginal rate
    /// equals a common price `phi`; the price is found by bisection so that
    /// the whole epoch is used.
    pub fn time_block(&self, q: &[f64], qbar: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let k = self.k();
        let floors: Vec<f64> = q.iter().map(|&x| (x / self.p_max).max(0.0)).collect();
        let floor_sum: f64 = floors.iter().sum();
        self.check_floors(floor_sum)?;
        // energy-to-noise products of the flexible slots
        let dl_e: Vec<f64> = (0..k)
            .map(|u| if self.w_dl[u] > 0.0 { self.g[u] * v[u].max(0.0) / self.noise } else { 0.0 })
            .collect();
        let ul_e: Vec<f64> = (0..k)
            .map(|u| if self.w_ul[u] > 0.0 { self.g[u] * qbar[u].max(0.0) / self.noise } else { 0.0 })
            .collect();
        if dl_e.iter().chain(&ul_e).all(|&x| x == 0.0) || floor_sum >= 1.0 {
            return Ok(self.fallback_split(q, &floors));
        }
        let split = |ln_phi: f64| -> (Vec<f64>, Vec<f64>) {
            let phi = ln_phi.exp();
            let m = (0..k)
                .map(|u| {
                    let x = if dl_e[u] > 0.0 { dl_e[u] / h_inv_lambert(phi / self.w_dl[u]) } else { 0.0 };
                    x.max(floors[u])
                })
                .collect();
            let n = (0..k)
                .map(|u| if ul_e[u] > 0.0 { ul_e[u] / h_inv_lambert(phi / self.w_ul[u]) } else { 0.0 })
                .collect();
            (m, n)
        };
        let total = |ln_phi: f64| {
            let (m, n) = split(ln_phi);
            m.iter().sum::<f64>() + n.iter().sum::<f64>()
        };
        let ln_phi = bisect_decreasing(total, 0.0)?;
        let (mut m, mut n) = split(ln_phi);
        normalize_flexible(&mut m, &mut n, &floors);
        Ok((m, n))
    }

    /// Optimal powers for a fixed time split.
    ///
    /// The DL power sits at the peak when its energy credit `b` is
    /// non-negative and collapses onto the split power otherwise, in which
    /// case the split power is priced at `a - b`.
    pub fn power_block(&self, m: &[f64], n: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let k = self.k();
        let mut q = vec![0.0; k];
        let mut qbar = vec![0.0; k];
        let mut v = vec![0.0; k];
        for u in 0..k {
            let (mu, nu) = (m[u].max(0.0), n[u].max(0.0));
            let cap = self.p_max * mu;
            let at_peak = self.b[u] >= 0.0;
            let cost = if at_peak { self.a[u] } else { self.a[u] - self.b[u] };
            v[u] = self.water_level(u, self.w_dl[u], cost, mu).clamp(0.0, cap);
            q[u] = if at_peak { cap } else { v[u] };
            qbar[u] = self.water_level(u, self.w_ul[u], self.c[u], nu).max(0.0);
        }
        (q, qbar, v)
    }

    /// Optimal split power of user `u` when its DL power is held fixed.
    pub fn split_power(&self, u: usize, m: f64, q: f64) -> f64 {
        self.water_level(u, self.w_dl[u], self.a[u], m).clamp(0.0, q.max(0.0))
    }

    /// Optimal UL power of user `u` for UL time `n`.
    pub fn ul_power(&self, u: usize, n: f64) -> f64 {
        self.water_level(u, self.w_ul[u], self.c[u], n).max(0.0)
    }

    /// `w t / (ln2 cost) - noise t / g`, the unclamped power-time optimum.
    fn water_level(&self, u: usize, w: f64, cost: f64, t: f64) -> f64 {
        if w <= 0.0 || t <= 0.0 {
            return 0.0;
        }
        w * t / (LN_2 * cost) - self.noise * t / self.g[u]
    }

    /// Zero-fairness time split with the UL power chosen jointly.
    ///
    /// Only the user with the largest UL level may transmit in the UL; it
    /// takes whatever time the DL slots leave once their SNR has dropped to
    /// that level.
    pub fn zf_time_block(&self, q: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let k = self.k();
        let floors: Vec<f64> = q.iter().map(|&x| (x / self.p_max).max(0.0)).collect();
        let floor_sum: f64 = floors.iter().sum();
        self.check_floors(floor_sum)?;
        let gv: Vec<f64> = (0..k).map(|u| self.g[u] * v[u].max(0.0)).collect();
        let mut w = 0;
        for u in 1..k {
            if self.ul_level(u) > self.ul_level(w) {
                w = u;
            }
        }
        let d_w = self.ul_level(w);
        let dl_time = |c: f64| -> Vec<f64> { (0..k).map(|u| (gv[u] / c).max(floors[u])).collect() };
        let gv_sum: f64 = gv.iter().sum();
        // the DL-only level C~ solving sum max(g v / C, q / p_max) = 1
        let c_tilde = if gv_sum == 0.0 || floor_sum >= 1.0 {
            0.0
        } else {
            let total = |ln_c: f64| dl_time(ln_c.exp()).iter().sum::<f64>();
            bisect_decreasing(total, gv_sum.ln())?.exp()
        };
        let mut n = vec![0.0; k];
        let mut qbar = vec![0.0; k];
        if c_tilde > d_w || d_w <= 0.0 || floor_sum >= 1.0 {
            if c_tilde == 0.0 {
                let (m, n) = self.fallback_split(q, &floors);
                return Ok((m, n, qbar));
            }
            let mut m = dl_time(c_tilde);
            normalize_flexible(&mut m, &mut n, &floors);
            return Ok((m, n, qbar));
        }
        let m = dl_time(d_w);
        let left = 1.0 - m.iter().sum::<f64>();
        n[w] = left.max(0.0);
        qbar[w] = n[w] * d_w / self.g[w];
        Ok((m, n, qbar))
    }

    fn check_floors(&self, floor_sum: f64) -> Result<()> {
        if floor_sum > 1.0 + 1e-9 {
            return Err(Error::Infeasible {
                epoch: self.epoch,
                reason: format!("DL power floors need {floor_sum} of the epoch"),
            });
        }
        Ok(())
    }

    /// Split used when no slot has a flexible time demand: floors first, the
    /// rest to the DL slot with the largest `g q`, or evenly when all are zero.
    fn fallback_split(&self, q: &[f64], floors: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.k();
        let floor_sum: f64 = floors.iter().sum();
        if floor_sum >= 1.0 {
            let m = floors.iter().map(|x| x / floor_sum).collect();
            return (m, vec![0.0; k]);
        }
        let mut best = None;
        for u in 0..k {
            let s = self.g[u] * q[u];
            if s > 0.0 && best.map_or(true, |(_, b)| s > b) {
                best = Some((u, s));
            }
        }
        match best {
            Some((u, _)) => {
                let mut m = floors.to_vec();
                m[u] += 1.0 - floor_sum;
                (m, vec![0.0; k])
            }
            None => {
                let share = 1.0 / (2 * k) as f64;
                (vec![share; k], vec![share; k])
            }
        }
    }
}

/// Root of a continuous decreasing `f(x) - 1` in `x`, expanding from `start`.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, start: f64) -> Result<f64> {
    let (mut lo, mut hi) = (start, start);
    let mut step = 1.0;
    let mut tries = 0;
    while f(hi) > 1.0 {
        hi += step;
        step *= 2.0;
        tries += 1;
        if tries > 64 {
            return Err(Error::Convergence { what: "time price bracket", iterations: tries });
        }
    }
    step = 1.0;
    tries = 0;
    while f(lo) < 1.0 {
        lo -= step;
        step *= 2.0;
        tries += 1;
        if tries > 64 {
            return Err(Error::Convergence { what: "time price bracket", iterations: tries });
        }
    }
    for _ in 0..PRICE_ITERS {
        if hi - lo <= PRICE_WIDTH * (1.0 + lo.abs().max(hi.abs())) {
            return Ok(0.5 * (lo + hi));
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence { what: "time price bisection", iterations: PRICE_ITERS })
}

/// Rescales the slots above their floors so the epoch is used exactly.
fn normalize_flexible(m: &mut [f64], n: &mut [f64], floors: &[f64]) {
    let mut fixed = 0.0;
    let mut flex = 0.0;
    for (x, &f) in m.iter().zip(floors) {
        if *x > f {
            flex += *x;
        } else {
            fixed += *x;
        }
    }
    flex += n.iter().sum::<f64>();
    if flex <= 0.0 {
        return;
    }
    let s = (1.0 - fixed) / flex;
    for (x, &f) in m.iter_mut().zip(floors) {
        if *x > f {
            *x = (*x * s).max(f);
        }
    }
    n.iter_mut().for_each(|x| *x *= s);
}
