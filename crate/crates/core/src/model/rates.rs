use super::{Allocation, ChannelSet, EpochAlloc, Fairness, OriginalAllocation, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::alpha_utility;

/// `t log2(1 + g p / (noise t))`, extended by 0 at `t = 0`.
#[inline]
pub fn perspective_rate(t: f64, p: f64, g: f64, noise: f64) -> f64 {
    if t <= 0.0 || p <= 0.0 {
        return 0.0;
    }
    t * ((p / t) * (g / noise)).ln_1p() / std::f64::consts::LN_2
}

pub fn dl_rate_bar(m: f64, v: f64, g: f64, cfg: &SystemConfig) -> f64 {
    perspective_rate(m, v, g, cfg.noise_floor())
}

pub fn ul_rate_bar(n: f64, qbar: f64, g: f64, cfg: &SystemConfig) -> f64 {
    perspective_rate(n, qbar, g, cfg.noise_floor())
}

/// Energy harvested by every user during one epoch.
///
/// `prev` carries the previous epoch's user-to-user gains and UL powers; the
/// first epoch passes `None`.
pub fn harvested_energy_epoch(
    cfg: &SystemConfig,
    g: &[f64],
    g_u2u: &[Vec<f64>],
    cur: &EpochAlloc,
    prev: Option<(&[Vec<f64>], &[f64])>,
) -> Vec<f64> {
    let k = g.len();
    let total_q: f64 = cur.q.iter().sum();
    (0..k)
        .map(|u| {
            let mut e = cfg.zeta * g[u] * (total_q - cur.v[u]);
            let mut peer = 0.0;
            for l in 0..u {
                peer += g_u2u[l][u] * cur.qbar[l];
            }
            if let Some((g_prev, qbar_prev)) = prev {
                for l in u + 1..k {
                    peer += g_prev[l][u] * qbar_prev[l];
                }
            }
            e += cfg.zeta0 * peer;
            e
        })
        .collect()
}

fn check_epoch(i: usize, m: usize) -> Result<()> {
    if i == 0 || i > m {
        return Err(Error::Index {
            what: "epoch",
            index: i,
            len: m,
        });
    }
    Ok(())
}

/// Harvested energy of user `k` (zero based) in epoch `i` (one based).
pub fn harvested_energy_bar(
    alloc: &Allocation,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
    k: usize,
) -> Result<f64> {
    check_epoch(i, alloc.m().min(ch.m()))?;
    if k >= ch.k() {
        return Err(Error::Index {
            what: "user",
            index: k,
            len: ch.k(),
        });
    }
    let t = i - 1;
    let prev = (t > 0).then(|| (ch.g_u2u[t - 1].as_slice(), alloc.epochs[t - 1].qbar.as_slice()));
    Ok(harvested_energy_epoch(cfg, &ch.g[t], &ch.g_u2u[t], &alloc.epochs[t], prev)[k])
}

/// The same quantity evaluated from original variables; inactive slots
/// contribute nothing.
pub fn harvested_energy_original(
    orig: &OriginalAllocation,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
    k: usize,
) -> Result<f64> {
    check_epoch(i, orig.m.len().min(ch.m()))?;
    let t = i - 1;
    let kk = ch.k();
    let dl = |l: usize| orig.m[t][l] * orig.p[t][l].unwrap_or(0.0);
    let ul = |s: usize, l: usize| orig.n[s][l] * orig.pbar[s][l].unwrap_or(0.0);
    let mut bs = 0.0;
    for l in (0..kk).filter(|&l| l != k) {
        bs += dl(l);
    }
    bs += dl(k) * (1.0 - orig.rho[t][k].unwrap_or(0.0));
    let mut peer = 0.0;
    for l in 0..k {
        peer += ch.g_u2u[t][l][k] * ul(t, l);
    }
    if t > 0 {
        for l in k + 1..kk {
            peer += ch.g_u2u[t - 1][l][k] * ul(t - 1, l);
        }
    }
    Ok(cfg.zeta * ch.g[t][k] * bs + cfg.zeta0 * peer)
}

/// Harvested energy of every user in every epoch, `[M][K]`.
pub fn harvested_energy_all(alloc: &Allocation, ch: &ChannelSet, cfg: &SystemConfig) -> Vec<Vec<f64>> {
    (0..alloc.m())
        .map(|t| {
            let prev = (t > 0).then(|| (ch.g_u2u[t - 1].as_slice(), alloc.epochs[t - 1].qbar.as_slice()));
            harvested_energy_epoch(cfg, &ch.g[t], &ch.g_u2u[t], &alloc.epochs[t], prev)
        })
        .collect()
}

/// Per-user DL and UL rates of one epoch.
pub fn epoch_rates(e: &EpochAlloc, g: &[f64], cfg: &SystemConfig) -> (Vec<f64>, Vec<f64>) {
    let noise = cfg.noise_floor();
    let dl = (0..e.k())
        .map(|u| perspective_rate(e.m[u], e.v[u], g[u], noise))
        .collect();
    let ul = (0..e.k())
        .map(|u| perspective_rate(e.n[u], e.qbar[u], g[u], noise))
        .collect();
    (dl, ul)
}

/// Time-averaged DL and UL rate of every user over the allocation's epochs.
pub fn average_rates(alloc: &Allocation, ch: &ChannelSet, cfg: &SystemConfig) -> (Vec<f64>, Vec<f64>) {
    let k = ch.k();
    let mut dl = vec![0.0; k];
    let mut ul = vec![0.0; k];
    for (e, g) in alloc.epochs.iter().zip(&ch.g) {
        let (d, u) = epoch_rates(e, g, cfg);
        for j in 0..k {
            dl[j] += d[j];
            ul[j] += u[j];
        }
    }
    let m = alloc.m().max(1) as f64;
    dl.iter_mut().chain(ul.iter_mut()).for_each(|x| *x /= m);
    (dl, ul)
}

/// Sum of alpha-fair utilities of the average rates; in max-min mode the
/// smallest average rate.
pub fn objective_value(alloc: &Allocation, ch: &ChannelSet, cfg: &SystemConfig) -> Result<f64> {
    let (dl, ul) = average_rates(alloc, ch, cfg);
    let rates = dl.iter().chain(&ul);
    match cfg.fairness {
        Fairness::MaxMin => Ok(rates.copied().fold(f64::INFINITY, f64::min)),
        Fairness::Alpha(a) => rates.map(|&r| alpha_utility(r, a)).sum(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_noise() -> SystemConfig {
        SystemConfig {
            sigma2: 1e-3,
            gamma: 1.0,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn rate_examples() {
        let cfg = unit_noise();
        assert!((dl_rate_bar(0.1, 0.01, 1e-3, &cfg) - 0.013_750_352_374_993_491).abs() < 1e-15);
        assert!((ul_rate_bar(0.2, 0.05, 1e-3, &cfg) - 0.064_385_618_977_472_47).abs() < 1e-15);
        assert_eq!(dl_rate_bar(0.0, 3.0, 1e-3, &cfg), 0.0);
        assert_eq!(ul_rate_bar(0.4, 0.0, 1e-3, &cfg), 0.0);
    }

    #[test]
    fn harvested_energy_example() {
        let cfg = SystemConfig {
            zeta: 0.5,
            zeta0: 0.5,
            ..SystemConfig::default()
        };
        let ch = ChannelSet::new(
            vec![vec![1e-3, 1e-3]],
            vec![vec![vec![0.0, 1e-4], vec![1e-4, 0.0]]],
        )
        .unwrap();
        let e = EpochAlloc {
            m: vec![0.2, 0.2],
            n: vec![0.1, 0.0],
            q: vec![1.0, 1.0],
            qbar: vec![0.1, 0.0],
            v: vec![0.0, 0.0],
        };
        let alloc = Allocation { epochs: vec![e] };
        let e2 = harvested_energy_bar(&alloc, &ch, &cfg, 1, 1).unwrap();
        assert!((e2 - 1.005e-3).abs() < 1e-18);
        assert!(harvested_energy_bar(&alloc, &ch, &cfg, 2, 1).is_err());
        assert!(harvested_energy_bar(&alloc, &ch, &cfg, 0, 1).is_err());
    }

    #[test]
    fn own_split_cancels_for_single_user() {
        let cfg = SystemConfig {
            zeta0: 0.0,
            ..SystemConfig::default()
        };
        let ch = ChannelSet::static_bs(&[1e-3], 1);
        let e = EpochAlloc {
            m: vec![0.5],
            n: vec![0.5],
            q: vec![2.0],
            qbar: vec![0.0],
            v: vec![2.0],
        };
        let alloc = Allocation { epochs: vec![e] };
        assert_eq!(harvested_energy_bar(&alloc, &ch, &cfg, 1, 0).unwrap(), 0.0);
    }

    #[test]
    fn objective_special_values() {
        let ch = ChannelSet::static_bs(&[1e-3], 1);
        // choose v so the DL rate is exactly 1 and the UL rate too
        let cfg = unit_noise();
        let e = EpochAlloc {
            m: vec![0.5],
            n: vec![0.5],
            q: vec![2.0],
            qbar: vec![1.5],
            v: vec![1.5],
        };
        let alloc = Allocation { epochs: vec![e] };
        let proportional = cfg.clone().with_fairness(Fairness::Alpha(1.0));
        assert!(objective_value(&alloc, &ch, &proportional).unwrap().abs() < 1e-15);
        let zero = cfg.with_fairness(Fairness::Alpha(0.0));
        assert!((objective_value(&alloc, &ch, &zero).unwrap() - 2.0).abs() < 1e-15);
    }
}
