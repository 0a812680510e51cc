//! Exhaustive lattice search with successive zooming.

use rayon::prelude::*;

use super::{OracleProblem, OracleSolution, FEAS_TOL};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Upper limit on lattice points per dimension.
    pub max_points: usize,
    /// Zoom passes after the first lattice.
    pub passes: usize,
    /// Total objective evaluations allowed.
    pub budget: u64,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            max_points: 25,
            passes: 3,
            budget: 10_000_000,
        }
    }
}

fn points_per_dim(d: usize, opts: &GridOptions) -> Result<usize> {
    let per_pass = opts.budget as f64 / (opts.passes + 1) as f64;
    let mut n = per_pass.powf(1.0 / d as f64).floor() as usize;
    n = n.min(opts.max_points);
    while n > 2 && (n as f64).powi(d as i32) > per_pass {
        n -= 1;
    }
    let needed = 2f64.powi(d as i32) * (opts.passes + 1) as f64;
    if n < 2 || needed > opts.budget as f64 {
        return Err(Error::Budget {
            budget: opts.budget,
            needed: needed.min(u64::MAX as f64) as u64,
        });
    }
    Ok(n)
}

/// Best feasible point of an `n^d` lattice over `[lo, hi]`. Ties go to the
/// lowest lattice index, so the result does not depend on thread count.
fn best_on_lattice(p: &OracleProblem, lo: &[f64], hi: &[f64], n: usize) -> Option<(Vec<f64>, f64)> {
    let d = lo.len();
    let total = n.pow(d as u32);
    let point = |mut idx: usize| -> Vec<f64> {
        (0..d)
            .map(|j| {
                let i = idx % n;
                idx /= n;
                lo[j] + (hi[j] - lo[j]) * i as f64 / (n - 1) as f64
            })
            .collect()
    };
    let best = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let x = point(idx);
            if !p.feasible(&x, FEAS_TOL) {
                return None;
            }
            let f = p.value(&x);
            (!f.is_nan()).then_some((idx, f))
        })
        .reduce_with(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })?;
    Some((point(best.0), best.1))
}

/// Maximizes `p` by a lattice search zoomed around the incumbent.
///
/// Each pass puts a lattice of up to `max_points` points per dimension over
/// the current box and shrinks the box to one cell either side of the best
/// feasible point.
pub fn grid_refine_solve(p: &OracleProblem, opts: &GridOptions) -> Result<OracleSolution> {
    let d = p.dim();
    if d == 0 {
        return Ok(OracleSolution {
            x: Vec::new(),
            value: p.value(&[]),
            evaluations: 1,
            trace: Vec::new(),
        });
    }
    let n = points_per_dim(d, opts)?;
    let mut lo = p.lo.clone();
    let mut hi = p.hi.clone();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0u64;
    for _ in 0..=opts.passes {
        evaluations += n.pow(d as u32) as u64;
        if let Some((x, f)) = best_on_lattice(p, &lo, &hi, n) {
            if best.as_ref().map_or(true, |b| f > b.1) {
                best = Some((x, f));
            }
        }
        let Some((x, _)) = &best else {
            return Err(Error::Argument("no feasible lattice point".into()));
        };
        for j in 0..d {
            let cell = (hi[j] - lo[j]) / (n - 1) as f64;
            lo[j] = (x[j] - cell).max(p.lo[j]);
            hi[j] = (x[j] + cell).min(p.hi[j]);
        }
    }
    let (x, value) = best.expect("set on the first pass");
    Ok(OracleSolution {
        x,
        value,
        evaluations,
        trace: Vec::new(),
    })
}
