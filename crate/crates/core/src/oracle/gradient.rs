//! Projected gradient ascent with finite-difference gradients.

use super::{Halfspace, OracleProblem, OracleSolution};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgOptions {
    /// Stop once the projected gradient step moves no coordinate by more
    /// than `tol * max(1, |f|)` in unit-box coordinates.
    pub tol: f64,
    pub max_iter: usize,
    /// Finite-difference step relative to each unit-box coordinate, floored
    /// at `1e-2` of the box.
    pub fd_step: f64,
}

impl Default for PgOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 20_000,
            fd_step: 1e-7,
        }
    }
}

const DYKSTRA_TOL: f64 = 1e-13;
const DYKSTRA_CYCLES: usize = 20_000;
const ARMIJO: f64 = 1e-4;

/// The problem mapped onto the unit box.
struct Scaled<'p, 'a> {
    p: &'p OracleProblem<'a>,
    width: Vec<f64>,
    rows: Vec<Halfspace>,
}

impl<'p, 'a> Scaled<'p, 'a> {
    fn new(p: &'p OracleProblem<'a>) -> Self {
        let width: Vec<f64> = p.lo.iter().zip(&p.hi).map(|(l, h)| h - l).collect();
        let rows = p
            .rows
            .iter()
            .map(|r| {
                let a: Vec<f64> = r.a.iter().zip(&width).map(|(a, w)| a * w).collect();
                let shift: f64 = r.a.iter().zip(&p.lo).map(|(a, l)| a * l).sum();
                Halfspace { a, b: r.b - shift }
            })
            .collect();
        Self { p, width, rows }
    }

    fn x(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.p.lo.iter().zip(&self.width))
            .map(|(z, (l, w))| l + w * z)
            .collect()
    }

    fn f(&self, z: &[f64]) -> f64 {
        self.p.value(&self.x(z))
    }

    /// Projection onto the unit box and every row.
    fn project(&self, y: &[f64]) -> Vec<f64> {
        let hi: Vec<f64> = self.width.iter().map(|w| if *w > 0.0 { 1.0 } else { 0.0 }).collect();
        dykstra(y, &hi, &self.rows)
    }

    /// Central differences, one-sided at the faces of the unit box.
    fn gradient(&self, z: &[f64], h: f64) -> Vec<f64> {
        let mut y = z.to_vec();
        (0..z.len())
            .map(|j| {
                if self.width[j] == 0.0 {
                    return 0.0;
                }
                let step = h * z[j].max(1e-2);
                let up = (z[j] + step).min(1.0);
                let dn = (z[j] - step).max(0.0);
                y[j] = up;
                let fu = self.f(&y);
                y[j] = dn;
                let fd = self.f(&y);
                y[j] = z[j];
                (fu - fd) / (up - dn)
            })
            .collect()
    }
}

/// Dykstra's alternating projection onto `[0, hi]` and every row.
fn dykstra(y: &[f64], hi: &[f64], rows: &[Halfspace]) -> Vec<f64> {
    let d = y.len();
    let mut x = y.to_vec();
    let mut inc = vec![vec![0.0; d]; rows.len() + 1];
    for _ in 0..DYKSTRA_CYCLES {
        let start = x.clone();
        let mut shift: f64 = 0.0;
        for (s, inc) in inc.iter_mut().enumerate() {
            let shifted: Vec<f64> = x.iter().zip(inc.iter()).map(|(x, i)| x + i).collect();
            let next = if s == 0 {
                shifted.iter().zip(hi).map(|(v, h)| v.clamp(0.0, *h)).collect()
            } else {
                project_halfspace(&rows[s - 1], &shifted)
            };
            for (i, (s, n)) in inc.iter_mut().zip(shifted.iter().zip(&next)) {
                shift = shift.max((*i - (s - n)).abs());
                *i = s - n;
            }
            x = next;
        }
        let moved = x.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved.max(shift) <= DYKSTRA_TOL {
            break;
        }
    }
    x
}

fn project_halfspace(r: &Halfspace, y: &[f64]) -> Vec<f64> {
    let excess = r.excess(y);
    let norm2: f64 = r.a.iter().map(|a| a * a).sum();
    if excess <= 0.0 || norm2 == 0.0 {
        return y.to_vec();
    }
    y.iter().zip(&r.a).map(|(y, a)| y - excess / norm2 * a).collect()
}

fn inf_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Maximizes `p` by projected gradient ascent with Barzilai-Borwein trial
/// steps and Armijo backtracking.
/// Starts from the projection of `x0`, or of the box centre when `None`.
/// The returned trace holds the objective after every accepted step and is
/// non-decreasing.
pub fn projected_gradient_solve(p: &OracleProblem, x0: Option<&[f64]>, opts: &PgOptions) -> Result<OracleSolution> {
    let s = Scaled::new(p);
    let d = p.dim();
    let z0: Vec<f64> = match x0 {
        Some(x) if x.len() == d => x
            .iter()
            .zip(p.lo.iter().zip(&s.width))
            .map(|(x, (l, w))| if *w > 0.0 { (x - l) / w } else { 0.0 })
            .collect(),
        Some(x) => return Err(Error::Shape(format!("start has {} entries, problem has {d}", x.len()))),
        None => vec![0.5; d],
    };
    let mut z = s.project(&z0);
    let mut f = s.f(&z);
    let mut evaluations = 1u64;
    if !f.is_finite() {
        return Err(Error::Argument("objective is not finite at the start".into()));
    }
    let mut trace = vec![f];
    let mut step: f64 = 1.0;
    let mut last: Option<(Vec<f64>, Vec<f64>)> = None;
    for _ in 0..opts.max_iter {
        let g = s.gradient(&z, opts.fd_step);
        evaluations += 2 * d as u64;
        let unit: Vec<f64> = z.iter().zip(&g).map(|(z, g)| z + g).collect();
        if inf_dist(&z, &s.project(&unit)) <= opts.tol * f.abs().max(1.0) {
            return Ok(OracleSolution {
                x: s.x(&z),
                value: f,
                evaluations,
                trace,
            });
        }
        // Barzilai-Borwein length from the last move, else grow the last one
        step = match &last {
            Some((z0, g0)) => {
                let sz: Vec<f64> = z.iter().zip(z0).map(|(a, b)| a - b).collect();
                let sy: f64 = sz.iter().zip(g.iter().zip(g0)).map(|(s, (a, b))| -s * (a - b)).sum();
                let ss: f64 = sz.iter().map(|s| s * s).sum();
                if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { (step * 4.0).min(1e12) }
            }
            None => step,
        };
        loop {
            let trial: Vec<f64> = z.iter().zip(&g).map(|(z, g)| z + step * g).collect();
            let next = s.project(&trial);
            let fn_ = s.f(&next);
            evaluations += 1;
            let gain: f64 = g.iter().zip(next.iter().zip(&z)).map(|(g, (n, z))| g * (n - z)).sum();
            if fn_.is_finite() && fn_ >= f + ARMIJO * gain && fn_ >= f {
                last = Some((std::mem::replace(&mut z, next), g));
                f = fn_;
                trace.push(f);
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                // no ascent direction survives rounding
                return Ok(OracleSolution {
                    x: s.x(&z),
                    value: f,
                    evaluations,
                    trace,
                });
            }
        }
    }
    Err(Error::Convergence {
        what: "projected gradient",
        iterations: opts.max_iter,
    })
}
