//! Brute-force references for tiny instances.
//!
//! Problems are posed as maximizing a black-box objective over a box cut by
//! linear inequalities. Neither solver uses any closed form of the fast
//! path: the grid search only evaluates the objective and the gradient
//! solver only differentiates it numerically.

mod gradient;
mod grid;
mod kkt;

use crate::error::{Error, Result};
use crate::model::{
    average_rates, harvested_energy_all, objective_value, Allocation, ChannelSet, EpochAlloc, Fairness, SystemConfig,
};
use crate::solver::EpochProblem;

pub use gradient::{projected_gradient_solve, PgOptions};
pub use grid::{grid_refine_solve, GridOptions};
pub use kkt::kkt_residual;

/// Slack allowed on the linear constraints when filtering grid points.
pub const FEAS_TOL: f64 = 1e-12;

/// `a . x <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    pub a: Vec<f64>,
    pub b: f64,
}

impl Halfspace {
    pub fn excess(&self, x: &[f64]) -> f64 {
        self.a.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() - self.b
    }
}

type Objective<'a> = Box<dyn Fn(&[f64]) -> f64 + Sync + 'a>;

/// Maximize `f` over `lo <= x <= hi` and every halfspace.
pub struct OracleProblem<'a> {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub rows: Vec<Halfspace>,
    f: Objective<'a>,
}

impl<'a> OracleProblem<'a> {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, rows: Vec<Halfspace>, f: impl Fn(&[f64]) -> f64 + Sync + 'a) -> Self {
        Self { lo, hi, rows, f: Box::new(f) }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    /// Largest violation of the box and the halfspaces.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let boxed = x
            .iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (lo, hi))| (lo - x).max(x - hi))
            .fold(0.0, f64::max);
        self.rows.iter().map(|r| r.excess(x)).fold(boxed, f64::max)
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        self.max_violation(x) <= tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: u64,
    /// Objective after each accepted step; empty for the grid search.
    pub trace: Vec<f64>,
}

/// Which variables of an epoch are free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// `m` and `n`, with the powers held.
    Time,
    /// `q`, `qbar` and `v`, with the time split held.
    Power,
    /// All five variables of every user.
    Joint,
}

const FIELDS: usize = 5;

/// Flat layout `[m, n, q, qbar, v]` per user.
pub fn flatten(e: &EpochAlloc) -> Vec<f64> {
    (0..e.k())
        .flat_map(|u| [e.m[u], e.n[u], e.q[u], e.qbar[u], e.v[u]])
        .collect()
}

pub fn unflatten(x: &[f64]) -> EpochAlloc {
    let k = x.len() / FIELDS;
    let col = |j: usize| (0..k).map(|u| x[FIELDS * u + j]).collect();
    EpochAlloc {
        m: col(0),
        n: col(1),
        q: col(2),
        qbar: col(3),
        v: col(4),
    }
}

/// A value of `qbar` beyond which the UL term of user `u` with `n = 1` is
/// negative, found by doubling. The term is concave and zero at the
/// origin, so its maximizer lies below the bound, and by homogeneity the
/// maximizer for UL time `n` lies below `n` times it.
pub(super) fn ul_bound(p: &EpochProblem, u: usize) -> f64 {
    let term = |x: f64| {
        let mut e = EpochAlloc::zeros(p.k());
        e.n[u] = 1.0;
        e.qbar[u] = x;
        p.value(&e)
    };
    let mut x = 1e-15;
    while term(x) >= 0.0 && x < 1e6 {
        x *= 2.0;
    }
    x
}

/// The priced epoch problem restricted to `block`, with the held variables
/// taken from `at`. Solutions map back through [`OracleProblem`] `x` via
/// [`embed`].
pub fn epoch_block<'a>(p: &'a EpochProblem, block: Block, at: &EpochAlloc) -> OracleProblem<'a> {
    let k = p.k();
    let base = flatten(at);
    let free = free_indices(k, block);
    let bounds: Vec<f64> = (0..k).map(|u| ul_bound(p, u)).collect();
    let mut lo = Vec::with_capacity(free.len());
    let mut hi = Vec::with_capacity(free.len());
    for &j in &free {
        let (u, f) = (j / FIELDS, j % FIELDS);
        let (l, h) = match (block, f) {
            (Block::Time, 0) => (at.q[u] / p.p_max, 1.0),
            (_, 0 | 1) => (0.0, 1.0),
            (Block::Power, 2 | 4) => (0.0, p.p_max * at.m[u]),
            (Block::Power, 3) => (0.0, bounds[u] * at.n[u]),
            (_, 3) => (0.0, bounds[u]),
            _ => (0.0, p.p_max),
        };
        lo.push(l);
        hi.push(h.max(l));
    }
    let pos = |j: usize| free.iter().position(|&x| x == j);
    let mut rows = Vec::new();
    let row = |pairs: &[(usize, f64)], b: f64| -> Option<Halfspace> {
        let mut a = vec![0.0; free.len()];
        let mut rhs = b;
        let mut any = false;
        for &(j, c) in pairs {
            match pos(j) {
                Some(i) => {
                    a[i] += c;
                    any = true;
                }
                None => rhs -= c * base[j],
            }
        }
        any.then_some(Halfspace { a, b: rhs })
    };
    let time: Vec<(usize, f64)> = (0..k).flat_map(|u| [(FIELDS * u, 1.0), (FIELDS * u + 1, 1.0)]).collect();
    rows.extend(row(&time, 1.0));
    for u in 0..k {
        let j = FIELDS * u;
        rows.extend(row(&[(j + 2, 1.0), (j, -p.p_max)], 0.0));
        rows.extend(row(&[(j + 4, 1.0), (j + 2, -1.0)], 0.0));
        if block == Block::Joint {
            rows.extend(row(&[(j + 3, 1.0), (j + 1, -bounds[u])], 0.0));
        }
    }
    let mut src = vec![None; base.len()];
    free.iter().enumerate().for_each(|(i, &j)| src[j] = Some(i));
    let f = move |x: &[f64]| {
        let at = |j: usize| src[j].map_or(base[j], |i| x[i]);
        let col = |f: usize| (0..k).map(|u| at(FIELDS * u + f)).collect();
        p.value(&EpochAlloc {
            m: col(0),
            n: col(1),
            q: col(2),
            qbar: col(3),
            v: col(4),
        })
    };
    OracleProblem::new(lo, hi, rows, f)
}

fn free_indices(k: usize, block: Block) -> Vec<usize> {
    let fields: &[usize] = match block {
        Block::Time => &[0, 1],
        Block::Power => &[2, 3, 4],
        Block::Joint => &[0, 1, 2, 3, 4],
    };
    (0..k).flat_map(|u| fields.iter().map(move |f| FIELDS * u + f)).collect()
}

/// Writes the free variables `x` of `block` into a copy of `at`.
pub fn embed(block: Block, at: &EpochAlloc, x: &[f64]) -> EpochAlloc {
    let mut full = flatten(at);
    for (i, j) in free_indices(at.k(), block).into_iter().enumerate() {
        full[j] = x[i];
    }
    unflatten(&full)
}

/// Bound on the total UL energy all users can store over the horizon.
/// Each epoch radiates at most `p_max` from the BS, and peers return at
/// most a fixed fraction of what is sent back to them.
fn storage_bound(ch: &ChannelSet, cfg: &SystemConfig) -> Option<f64> {
    let bs: f64 = ch.g.iter().map(|g| cfg.zeta * cfg.p_max * g.iter().sum::<f64>()).sum();
    let back = ch
        .g_u2u
        .iter()
        .flat_map(|mat| mat.iter().map(|row| row.iter().sum::<f64>()))
        .fold(0.0, f64::max);
    let keep = 1.0 - cfg.zeta0 * back;
    (keep > 0.0).then(|| bs / keep)
}

/// The full-horizon problem with every constraint, including the average
/// power budget and the per-user energy balance, for tiny `K` and `M`.
///
/// The objective is the configured fairness utility of the average rates;
/// points where it is undefined evaluate to `-inf`.
pub fn horizon<'a>(ch: &'a ChannelSet, cfg: &'a SystemConfig) -> Result<OracleProblem<'a>> {
    horizon_with(ch, cfg, move |a| objective_value(a, ch, cfg).unwrap_or(f64::NEG_INFINITY))
}

/// [`horizon`] with the objective replaced by `value`.
pub fn horizon_with<'a>(
    ch: &'a ChannelSet,
    cfg: &'a SystemConfig,
    value: impl Fn(&Allocation) -> f64 + Sync + 'a,
) -> Result<OracleProblem<'a>> {
    let (k, m) = (ch.k(), ch.m());
    if k == 0 || m == 0 || k > 4 || m > 4 || ch.g_u2u.len() != m {
        return Err(Error::Argument(format!("horizon oracle needs 1 <= K, M <= 4, got K = {k}, M = {m}")));
    }
    let per = FIELDS * k;
    let dim = per * m;
    let cap = storage_bound(ch, cfg)
        .ok_or_else(|| Error::Argument("user-to-user gains too large to bound the UL energy".into()))?;
    let mut lo = vec![0.0; dim];
    let mut hi = vec![0.0; dim];
    for t in 0..m {
        for u in 0..k {
            let j = per * t + FIELDS * u;
            hi[j] = 1.0;
            hi[j + 1] = 1.0;
            hi[j + 2] = cfg.p_max;
            hi[j + 3] = cap;
            hi[j + 4] = cfg.p_max;
        }
    }
    lo.iter_mut().zip(&hi).for_each(|(l, h)| *l = f64::min(*l, *h));
    let to_alloc = move |x: &[f64]| Allocation {
        epochs: (0..m).map(|t| unflatten(&x[per * t..per * (t + 1)])).collect(),
    };
    let mut rows = Vec::new();
    for t in 0..m {
        let mut a = vec![0.0; dim];
        for u in 0..k {
            let j = per * t + FIELDS * u;
            a[j] = 1.0;
            a[j + 1] = 1.0;
            let mut peak = vec![0.0; dim];
            peak[j + 2] = 1.0;
            peak[j] = -cfg.p_max;
            rows.push(Halfspace { a: peak, b: 0.0 });
            let mut split = vec![0.0; dim];
            split[j + 4] = 1.0;
            split[j + 2] = -1.0;
            rows.push(Halfspace { a: split, b: 0.0 });
        }
        rows.push(Halfspace { a, b: 1.0 });
    }
    let mut power = vec![0.0; dim];
    for t in 0..m {
        for u in 0..k {
            power[per * t + FIELDS * u + 2] = 1.0;
        }
    }
    rows.push(Halfspace { a: power, b: m as f64 * cfg.p_avg });
    // the harvest is linear in the allocation, so its coefficients are the
    // harvest of each unit vector
    let mut balance = vec![vec![0.0; dim]; k];
    let mut unit = vec![0.0; dim];
    for j in 0..dim {
        unit[j] = 1.0;
        let h = harvested_energy_all(&to_alloc(&unit), ch, cfg);
        for (u, row) in balance.iter_mut().enumerate() {
            row[j] -= h.iter().map(|e| e[u]).sum::<f64>();
        }
        unit[j] = 0.0;
    }
    for (u, mut a) in balance.into_iter().enumerate() {
        for t in 0..m {
            a[per * t + FIELDS * u + 3] += 1.0;
        }
        rows.push(Halfspace { a, b: 0.0 });
    }
    Ok(OracleProblem::new(lo, hi, rows, move |x: &[f64]| value(&to_alloc(x))))
}

/// Splits a horizon solution back into epochs.
pub fn horizon_allocation(x: &[f64], k: usize) -> Allocation {
    Allocation {
        epochs: x.chunks(FIELDS * k).map(unflatten).collect(),
    }
}

/// Best point of the full-horizon problem on a zoomed lattice.
pub fn oracle_grid(ch: &ChannelSet, cfg: &SystemConfig, opts: &GridOptions) -> Result<(Allocation, OracleSolution)> {
    let sol = grid_refine_solve(&horizon(ch, cfg)?, opts)?;
    Ok((horizon_allocation(&sol.x, ch.k()), sol))
}

/// Soft-min temperatures, in bits, for the max-min objective.
const SOFT_MIN_TEMPS: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-3, 1e-4];

/// `-tau log sum exp(-r / tau)`, within `tau ln(n)` below the minimum.
fn soft_min(rates: impl Iterator<Item = f64> + Clone, tau: f64) -> f64 {
    let lo = rates.clone().fold(f64::INFINITY, f64::min);
    lo - tau * rates.map(|r| (-(r - lo) / tau).exp()).sum::<f64>().ln()
}

/// The full-horizon problem solved by projected gradient ascent.
///
/// The max-min objective is not differentiable; it is replaced by a soft
/// minimum whose temperature is lowered stage by stage, each stage starting
/// from the last. The reported value is always the true objective.
pub fn oracle_pg(ch: &ChannelSet, cfg: &SystemConfig, opts: &PgOptions) -> Result<(Allocation, OracleSolution)> {
    let prob = horizon(ch, cfg)?;
    let mut x = interior_start(&prob, ch, cfg);
    let mut sol = match cfg.fairness {
        Fairness::Alpha(_) => projected_gradient_solve(&prob, Some(&x), opts)?,
        Fairness::MaxMin => {
            let mut evaluations = 0;
            let mut trace = Vec::new();
            for tau in SOFT_MIN_TEMPS {
                let smooth = horizon_with(ch, cfg, move |a| {
                    let (dl, ul) = average_rates(a, ch, cfg);
                    soft_min(dl.iter().chain(&ul).copied(), tau)
                })?;
                let stage = projected_gradient_solve(&smooth, Some(&x), opts)?;
                evaluations += stage.evaluations;
                trace.extend(stage.trace);
                x = stage.x;
            }
            OracleSolution {
                value: 0.0,
                x,
                evaluations,
                trace,
            }
        }
    };
    sol.value = prob.value(&sol.x);
    Ok((horizon_allocation(&sol.x, ch.k()), sol))
}

/// Even time split at the average power with half of each DL signal
/// split off, and a UL spend of half of what that harvests, so every
/// average rate is positive when the gains are.
fn interior_start(prob: &OracleProblem, ch: &ChannelSet, cfg: &SystemConfig) -> Vec<f64> {
    let (k, m) = (ch.k(), ch.m());
    let share = 1.0 / (2 * k) as f64;
    let q = (cfg.p_max * share).min(cfg.p_avg / k as f64);
    let mut a = Allocation::zeros(k, m);
    for e in &mut a.epochs {
        e.m = vec![share; k];
        e.n = vec![share; k];
        e.q = vec![q; k];
        e.v = vec![0.5 * q; k];
    }
    let got = harvested_energy_all(&a, ch, cfg);
    for (t, e) in a.epochs.iter_mut().enumerate() {
        e.qbar = got[t].iter().map(|h| 0.5 * h).collect();
    }
    let x: Vec<f64> = a.epochs.iter().flat_map(flatten).collect();
    x.iter().zip(prob.lo.iter().zip(&prob.hi)).map(|(x, (l, h))| x.clamp(*l, *h)).collect()
}
