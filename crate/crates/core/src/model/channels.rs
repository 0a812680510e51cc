//! Channel gains between the BS and users, and between pairs of users.
//!
//! Gains follow `ref_gain * rho^2 * d^-chi` with Rayleigh fading (`rho^2`
//! exponential with unit mean) drawn independently per link and per epoch.
//! User positions are drawn once and held fixed for the whole run.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use super::SystemConfig;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,entity_a,entity_b,gain";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    /// `g[i][k]`, BS to user `k` in epoch `i` (zero based).
    pub g: Vec<Vec<f64>>,
    /// `g_u2u[i][l][k]`, symmetric with a zero diagonal.
    pub g_u2u: Vec<Vec<Vec<f64>>>,
}

/// Path-loss gain for a link of length `d`, before fading.
pub fn path_gain(cfg: &SystemConfig, d: f64) -> f64 {
    cfg.ref_gain * d.max(cfg.min_distance_m).powf(-cfg.path_loss_exp)
}

impl ChannelSet {
    pub fn k(&self) -> usize {
        self.g.first().map_or(0, Vec::len)
    }

    pub fn m(&self) -> usize {
        self.g.len()
    }

    /// Builds a set from explicit gains, checking shapes, symmetry and signs.
    pub fn new(g: Vec<Vec<f64>>, g_u2u: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let set = Self { g, g_u2u };
        set.validate()?;
        Ok(set)
    }

    /// Same BS gains in every epoch and no user-to-user coupling.
    pub fn static_bs(g: &[f64], m: usize) -> Self {
        let k = g.len();
        Self {
            g: vec![g.to_vec(); m],
            g_u2u: vec![vec![vec![0.0; k]; k]; m],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (m, k) = (self.m(), self.k());
        if m == 0 || k == 0 {
            return Err(Error::Shape("channel set has no epochs or no users".into()));
        }
        if self.g_u2u.len() != m {
            return Err(Error::Shape(format!(
                "{} BS gain rows but {} user-to-user slices",
                m,
                self.g_u2u.len()
            )));
        }
        for (i, (row, mat)) in self.g.iter().zip(&self.g_u2u).enumerate() {
            if row.len() != k || mat.len() != k || mat.iter().any(|r| r.len() != k) {
                return Err(Error::Shape(format!("epoch {} does not have {k} users", i + 1)));
            }
            if row.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(Error::Shape(format!("epoch {} has a non-positive BS gain", i + 1)));
            }
            for l in 0..k {
                if mat[l][l] != 0.0 {
                    return Err(Error::Shape(format!("epoch {} has a non-zero self gain", i + 1)));
                }
                for j in 0..l {
                    if mat[l][j] != mat[j][l] || !(mat[l][j] >= 0.0) {
                        return Err(Error::Shape(format!(
                            "epoch {} has an asymmetric or negative user gain",
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Restricts the set to its first `m` epochs.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            g: self.g[..m].to_vec(),
            g_u2u: self.g_u2u[..m].to_vec(),
        }
    }

    /// Writes one row per BS link `(0, k)` and per user pair `(l, k)` with
    /// `l < k`; users and epochs are numbered from 1.
    pub fn to_csv(&self) -> String {
        let k = self.k();
        let mut out = String::with_capacity(self.m() * k * (k + 1) * 16);
        out.push_str(CSV_HEADER);
        out.push('\n');
        for (i, (row, mat)) in self.g.iter().zip(&self.g_u2u).enumerate() {
            for (u, &gain) in row.iter().enumerate() {
                let _ = writeln!(out, "{},0,{},{:e}", i + 1, u + 1, gain);
            }
            for a in 0..k {
                for b in a + 1..k {
                    let _ = writeln!(out, "{},{},{},{:e}", i + 1, a + 1, b + 1, mat[a][b]);
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str, k: usize, m: usize) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            _ => return Err(Error::Shape(format!("missing header {CSV_HEADER:?}"))),
        }
        let mut g = vec![vec![f64::NAN; k]; m];
        let mut g_u2u = vec![vec![vec![0.0; k]; k]; m];
        for (lineno, line) in lines.enumerate() {
            let bad = || Error::Shape(format!("malformed channel row {}: {line:?}", lineno + 2));
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 4 {
                return Err(bad());
            }
            let epoch: usize = fields[0].parse().map_err(|_| bad())?;
            let a: usize = fields[1].parse().map_err(|_| bad())?;
            let b: usize = fields[2].parse().map_err(|_| bad())?;
            let gain: f64 = fields[3].parse().map_err(|_| bad())?;
            if epoch == 0 || epoch > m {
                return Err(Error::Index {
                    what: "epoch",
                    index: epoch,
                    len: m,
                });
            }
            if b == 0 || b > k || a > k || (a != 0 && a >= b) {
                return Err(bad());
            }
            let i = epoch - 1;
            if a == 0 {
                g[i][b - 1] = gain;
            } else {
                g_u2u[i][a - 1][b - 1] = gain;
                g_u2u[i][b - 1][a - 1] = gain;
            }
        }
        Self::new(g, g_u2u)
    }
}

/// Draws user positions and `M` epochs of fading from a seeded ChaCha stream.
pub fn generate_channels(cfg: &SystemConfig, side_m: f64, seed: u64) -> Result<ChannelSet> {
    if !(side_m > 0.0) {
        return Err(Error::Argument(format!("side_m must be positive, got {side_m}")));
    }
    let (k, m) = (cfg.k_users, cfg.m_epochs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pos: Vec<(f64, f64)> = (0..k)
        .map(|_| (rng.gen::<f64>() * side_m, rng.gen::<f64>() * side_m))
        .collect();
    let c = side_m / 2.0;
    let bs_loss: Vec<f64> = pos
        .iter()
        .map(|&(x, y)| path_gain(cfg, (x - c).hypot(y - c)))
        .collect();
    let mut pair_loss = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let d = (pos[a].0 - pos[b].0).hypot(pos[a].1 - pos[b].1);
            pair_loss[a][b] = path_gain(cfg, d);
            pair_loss[b][a] = pair_loss[a][b];
        }
    }

    let mut g = Vec::with_capacity(m);
    let mut g_u2u = Vec::with_capacity(m);
    for _ in 0..m {
        let row: Vec<f64> = bs_loss
            .iter()
            .map(|&l| l * rng.sample::<f64, _>(Exp1))
            .collect();
        let mut mat = vec![vec![0.0; k]; k];
        for a in 0..k {
            for b in a + 1..k {
                let x = pair_loss[a][b] * rng.sample::<f64, _>(Exp1);
                mat[a][b] = x;
                mat[b][a] = x;
            }
        }
        g.push(row);
        g_u2u.push(mat);
    }
    Ok(ChannelSet { g, g_u2u })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_distance_gains() {
        let cfg = SystemConfig::default();
        assert!((path_gain(&cfg, 1.0) - 1e-3).abs() < 1e-18);
        assert!((path_gain(&cfg, 10.0) - 1e-6).abs() < 1e-18);
        // closer than the reference distance is floored
        assert_eq!(path_gain(&cfg, 0.2), path_gain(&cfg, 1.0));
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        let cfg = SystemConfig::desk();
        let a = generate_channels(&cfg, 10.0, 7).unwrap();
        let b = generate_channels(&cfg, 10.0, 7).unwrap();
        let c = generate_channels(&cfg, 10.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!((a.m(), a.k()), (cfg.m_epochs, cfg.k_users));
        a.validate().unwrap();
    }

    #[test]
    fn csv_round_trip() {
        let cfg = SystemConfig {
            m_epochs: 5,
            ..SystemConfig::desk()
        };
        let set = generate_channels(&cfg, 10.0, 3).unwrap();
        let text = set.to_csv();
        assert!(text.starts_with(CSV_HEADER));
        let back = ChannelSet::from_csv(&text, cfg.k_users, cfg.m_epochs).unwrap();
        assert_eq!(set, back);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(generate_channels(&SystemConfig::desk(), 0.0, 1).is_err());
        let bad = ChannelSet::new(vec![vec![1e-3, 1e-3]], vec![vec![vec![0.0, 1e-4], vec![2e-4, 0.0]]]);
        assert!(bad.is_err());
    }
}
