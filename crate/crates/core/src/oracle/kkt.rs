//! First-order optimality check for one epoch's block problems.
//!
//! Each slot's rate term is differenced on its own with a step relative to
//! the slot's variables; differencing the whole objective loses every digit
//! on slots far shorter than the epoch. The price terms are linear and
//! enter through their coefficients.

use super::{flatten, ul_bound, Block, FIELDS};
use crate::model::{perspective_rate, EpochAlloc};
use crate::solver::EpochProblem;

const REL_STEP: f64 = 1e-4;
/// Relative slack under which a variable counts as sitting on a bound.
const ACTIVE: f64 = 1e-9;

/// Partials of `w * perspective_rate(t, p)` by central differences.
fn rate_partials(w: f64, t: f64, p: f64, g: f64, noise: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    let r = |t: f64, p: f64| w * perspective_rate(t, p, g, noise);
    let ht = REL_STEP * t;
    let dt = (r(t + ht, p) - r(t - ht, p)) / (2.0 * ht);
    // below this power the rate is linear to working precision
    let hp = REL_STEP * p.max(noise * t / g);
    let dp = if p > hp {
        (r(t, p + hp) - r(t, p - hp)) / (2.0 * hp)
    } else {
        (r(t, p + hp) - r(t, p)) / hp
    };
    (dt, dp)
}

/// Gradient of `F` in the flat layout.
fn gradient(p: &EpochProblem, x: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; x.len()];
    for u in 0..p.k() {
        let j = FIELDS * u;
        let (dm, dv) = rate_partials(p.w_dl[u], x[j], x[j + 4], p.g[u], p.noise);
        let (dn, dqb) = rate_partials(p.w_ul[u], x[j + 1], x[j + 3], p.g[u], p.noise);
        d[j] = dm;
        d[j + 1] = dn;
        d[j + 2] = p.b[u];
        d[j + 3] = dqb - p.c[u];
        d[j + 4] = dv - p.a[u];
    }
    d
}

fn slope(grad: &[f64], dir: &[(usize, f64)]) -> f64 {
    dir.iter().map(|&(j, c)| grad[j] * c).sum()
}

fn strictly_inside(x: f64, lo: f64, hi: f64) -> bool {
    let slack = ACTIVE * hi.abs().max(f64::MIN_POSITIVE);
    x > lo + slack && x < hi - slack
}

/// Stationarity residuals of user `u`'s interior power variables, each
/// scaled by the variable so it reads in units of `F`. A split power tied
/// to its DL power moves with it.
fn power_residual(p: &EpochProblem, x: &[f64], grad: &[f64], u: usize) -> f64 {
    let j = FIELDS * u;
    let (m, n, q, qbar, v) = (x[j], x[j + 1], x[j + 2], x[j + 3], x[j + 4]);
    let cap = p.p_max * m;
    let mut r: f64 = 0.0;
    if strictly_inside(q, 0.0, cap) {
        let tied = (q - v).abs() <= ACTIVE * q;
        let dq = if tied { slope(grad, &[(j + 2, 1.0), (j + 4, 1.0)]) } else { grad[j + 2] };
        r = r.max((dq * q).abs());
    }
    if strictly_inside(v, 0.0, q) {
        r = r.max((grad[j + 4] * v).abs());
    }
    if n > 0.0 && strictly_inside(qbar, 0.0, ul_bound(p, u) * n) {
        r = r.max((grad[j + 3] * qbar).abs());
    }
    r
}

/// Spread of the marginal values of the interior slots, which share one
/// price when the epoch is fully used and are zero otherwise. In the joint
/// block a DL slot at peak power moves its powers along with it, and a UL
/// slot keeps its energy per unit time.
fn time_residual(p: &EpochProblem, x: &[f64], grad: &[f64], joint: bool) -> f64 {
    let k = x.len() / FIELDS;
    let mut slopes = Vec::new();
    for u in 0..k {
        let j = FIELDS * u;
        let (m, n, q, qbar, v) = (x[j], x[j + 1], x[j + 2], x[j + 3], x[j + 4]);
        let floor = if joint { 0.0 } else { q / p.p_max };
        if strictly_inside(m, floor, 1.0) {
            let mut dir = vec![(j, 1.0)];
            if joint && (q - p.p_max * m).abs() <= ACTIVE * q {
                dir.push((j + 2, p.p_max));
                if (q - v).abs() <= ACTIVE * q {
                    dir.push((j + 4, p.p_max));
                }
            }
            slopes.push(slope(grad, &dir));
        }
        if strictly_inside(n, 0.0, 1.0) {
            let mut dir = vec![(j + 1, 1.0)];
            if joint {
                dir.push((j + 3, qbar / n));
            }
            slopes.push(slope(grad, &dir));
        }
    }
    if slopes.is_empty() {
        return 0.0;
    }
    let used: f64 = (0..k).map(|u| x[FIELDS * u] + x[FIELDS * u + 1]).sum();
    if used >= 1.0 - ACTIVE {
        let hi = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = slopes.iter().copied().fold(f64::INFINITY, f64::min);
        0.5 * (hi - lo)
    } else {
        slopes.iter().map(|d| d.abs()).fold(0.0, f64::max)
    }
}

/// Largest stationarity residual over the interior coordinates of `block`,
/// relative to `|F|`. Zero when every coordinate sits on a bound.
pub fn kkt_residual(p: &EpochProblem, e: &EpochAlloc, block: Block) -> f64 {
    let x = flatten(e);
    let grad = gradient(p, &x);
    let k = e.k();
    let powers = || (0..k).map(|u| power_residual(p, &x, &grad, u)).fold(0.0, f64::max);
    let raw = match block {
        Block::Time => time_residual(p, &x, &grad, false),
        Block::Power => powers(),
        Block::Joint => powers().max(time_residual(p, &x, &grad, true)),
    };
    if raw == 0.0 {
        0.0
    } else {
        raw / p.value(e).abs().max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelSet, DualState, SystemConfig};

    fn problem() -> EpochProblem {
        let cfg = SystemConfig {
            k_users: 2,
            m_epochs: 1,
            ..SystemConfig::default()
        };
        let ch = ChannelSet::static_bs(&[2e-6, 5e-7], 1);
        let mut d = DualState::new(2, 0.5, 2e4);
        d.nu = vec![2e4, 3e4];
        EpochProblem::new(&cfg, &ch, 1, &d, vec![1.0, 1.5], vec![0.8, 1.2]).unwrap()
    }

    fn block_optimum(p: &EpochProblem) -> EpochAlloc {
        let m = vec![0.3, 0.2];
        let n = vec![0.25, 0.25];
        let (q, qbar, v) = p.power_block(&m, &n);
        let (m, n) = p.time_block(&q, &qbar, &v).unwrap();
        EpochAlloc { m, n, q, qbar, v }
    }

    #[test]
    fn block_optima_have_small_residuals() {
        let p = problem();
        let m = vec![0.3, 0.2];
        let n = vec![0.25, 0.25];
        let (q, qbar, v) = p.power_block(&m, &n);
        let e = EpochAlloc { m, n, q, qbar, v };
        assert!(kkt_residual(&p, &e, Block::Power) < 1e-8);
        assert!(kkt_residual(&p, &block_optimum(&p), Block::Time) < 1e-8);
    }

    #[test]
    fn perturbing_an_interior_slot_raises_the_residual() {
        let p = problem();
        let e = block_optimum(&p);
        let base = kkt_residual(&p, &e, Block::Time);
        let mut split = e.clone();
        split.m[1] += 1e-2;
        assert!(kkt_residual(&p, &split, Block::Time) > base);
    }

    #[test]
    fn all_clamped_is_zero() {
        let p = problem();
        let mut e = EpochAlloc::zeros(2);
        e.m[0] = 1.0;
        e.q[0] = p.p_max;
        e.v[0] = p.p_max;
        assert_eq!(kkt_residual(&p, &e, Block::Power), 0.0);
        assert_eq!(kkt_residual(&p, &e, Block::Time), 0.0);
        assert_eq!(kkt_residual(&p, &EpochAlloc::zeros(2), Block::Joint), 0.0);
    }
}
