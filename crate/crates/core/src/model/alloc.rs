use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decision variables of one epoch, indexed by user.
///
/// `q`, `qbar` and `v` are power-time products (the epoch length is 1):
/// `q = m p`, `qbar = n pbar` and `v = m rho p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochAlloc {
    pub m: Vec<f64>,
    pub n: Vec<f64>,
    pub q: Vec<f64>,
    pub qbar: Vec<f64>,
    pub v: Vec<f64>,
}

impl EpochAlloc {
    pub fn zeros(k: usize) -> Self {
        Self {
            m: vec![0.0; k],
            n: vec![0.0; k],
            q: vec![0.0; k],
            qbar: vec![0.0; k],
            v: vec![0.0; k],
        }
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    pub fn time_used(&self) -> f64 {
        self.m.iter().sum::<f64>() + self.n.iter().sum::<f64>()
    }

    pub fn bs_energy(&self) -> f64 {
        self.q.iter().sum()
    }

    fn shape_ok(&self) -> bool {
        let k = self.k();
        [&self.n, &self.q, &self.qbar, &self.v]
            .iter()
            .all(|x| x.len() == k)
    }
}

/// A full run: one [`EpochAlloc`] per epoch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Allocation {
    pub epochs: Vec<EpochAlloc>,
}

impl Allocation {
    pub fn zeros(k: usize, m: usize) -> Self {
        Self {
            epochs: vec![EpochAlloc::zeros(k); m],
        }
    }

    pub fn m(&self) -> usize {
        self.epochs.len()
    }

    pub fn k(&self) -> usize {
        self.epochs.first().map_or(0, EpochAlloc::k)
    }

    pub fn check_shape(&self, k: usize, m: usize) -> Result<()> {
        if self.m() != m {
            return Err(Error::Shape(format!("{} epochs, expected {m}", self.m())));
        }
        for (i, e) in self.epochs.iter().enumerate() {
            if e.k() != k || !e.shape_ok() {
                return Err(Error::Shape(format!("epoch {} does not have {k} users", i + 1)));
            }
        }
        Ok(())
    }

    /// Elementwise convex combination `lambda * self + (1 - lambda) * other`.
    pub fn blend(&self, other: &Self, lambda: f64) -> Self {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter()
                .zip(b)
                .map(|(x, y)| lambda * x + (1.0 - lambda) * y)
                .collect()
        };
        Self {
            epochs: self
                .epochs
                .iter()
                .zip(&other.epochs)
                .map(|(a, b)| EpochAlloc {
                    m: mix(&a.m, &b.m),
                    n: mix(&a.n, &b.n),
                    q: mix(&a.q, &b.q),
                    qbar: mix(&a.qbar, &b.qbar),
                    v: mix(&a.v, &b.v),
                })
                .collect(),
        }
    }
}

/// Lagrange multipliers carried across epochs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    /// Average BS power budget.
    pub mu: f64,
    /// Per-user energy balance.
    pub nu: Vec<f64>,
    /// Max-min coupling of the DL rates.
    pub psi1: Vec<f64>,
    /// Max-min coupling of the UL rates.
    pub psi2: Vec<f64>,
}

impl DualState {
    /// Uniform start: `nu = nu0`, `mu = mu0`, `psi` spread evenly over `2K`.
    pub fn new(k: usize, mu0: f64, nu0: f64) -> Self {
        let w = 1.0 / (2 * k) as f64;
        Self {
            mu: mu0,
            nu: vec![nu0; k],
            psi1: vec![w; k],
            psi2: vec![w; k],
        }
    }
}

/// Original-variable view of an [`Allocation`].
///
/// Entries are `None` where the slot carries no transmission (zero time for
/// powers, zero DL energy for the splitting ratio).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginalAllocation {
    pub m: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub p: Vec<Vec<Option<f64>>>,
    pub pbar: Vec<Vec<Option<f64>>>,
    pub rho: Vec<Vec<Option<f64>>>,
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den > 0.0).then(|| num / den)
}

pub fn recover_original(alloc: &Allocation) -> OriginalAllocation {
    let per = |f: &dyn Fn(&EpochAlloc) -> Vec<Option<f64>>| -> Vec<Vec<Option<f64>>> {
        alloc.epochs.iter().map(f).collect()
    };
    let zip = |a: &[f64], b: &[f64]| -> Vec<Option<f64>> {
        a.iter().zip(b).map(|(&x, &y)| ratio(x, y)).collect()
    };
    OriginalAllocation {
        m: alloc.epochs.iter().map(|e| e.m.clone()).collect(),
        n: alloc.epochs.iter().map(|e| e.n.clone()).collect(),
        p: per(&|e| zip(&e.q, &e.m)),
        pbar: per(&|e| zip(&e.qbar, &e.n)),
        rho: per(&|e| zip(&e.v, &e.q)),
    }
}
