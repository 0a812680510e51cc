//! Max-min fairness (`alpha = inf`).
//!
//! Rates are weighted by the multipliers `psi` of the max-min coupling
//! constraints, which live on the simplex over the `2K` links and move
//! toward whichever link is currently worst off.

use super::driver::{epoch_weights, solve_epoch, EpochOutcome, Mode, SplitRule};
use super::dual::{update_psi, ConstraintHistory, PriceController, RateTracker};
use super::epoch::EpochProblem;
use crate::error::Result;
use crate::model::{epoch_rates, ChannelSet, DualState, EpochAlloc, SystemConfig};

/// Epoch `i` priced by `duals` with weights `psi`, divided by the rate
/// requirements when configured.
pub fn mm_problem(cfg: &SystemConfig, ch: &ChannelSet, i: usize, duals: &DualState) -> Result<EpochProblem> {
    let tracker = RateTracker::new(ch.k(), cfg.rate_floor);
    let (w_dl, w_ul) = epoch_weights(Mode::MaxMin, &tracker, duals, cfg.rate_requirements.as_deref());
    EpochProblem::new(cfg, ch, i, duals, w_dl, w_ul)
}

/// Time split for fixed powers.
pub fn mm_time(
    q: &[f64],
    qbar: &[f64],
    v: &[f64],
    duals: &DualState,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    mm_problem(cfg, ch, i, duals)?.time_block(q, qbar, v)
}

/// Powers `(q, qbar, v)` for a fixed time split.
pub fn mm_power(
    m: &[f64],
    n: &[f64],
    duals: &DualState,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    Ok(mm_problem(cfg, ch, i, duals)?.power_block(m, n))
}

/// Moves `psi` toward the worst average rates, then sets the power and
/// energy prices for the next epoch.
///
/// A collapse of `psi` resets it to uniform and is reported as an error
/// after the prices have been updated.
pub fn mm_dual_update(
    duals: &mut DualState,
    tracker: &RateTracker,
    hist: &ConstraintHistory,
    prices: &PriceController,
    cfg: &SystemConfig,
    i: usize,
) -> Result<()> {
    let req = cfg.rate_requirements.as_deref();
    let psi = update_psi(duals, &tracker.dl, &tracker.ul, req, cfg, i);
    let tracker = RateTracker::new(tracker.dl.len(), cfg.rate_floor);
    let (_, w_ul) = epoch_weights(Mode::MaxMin, &tracker, duals, req);
    prices.update(duals, hist, &w_ul, cfg);
    psi
}

/// Solves epoch `i` with the duals held fixed and records its rates.
///
/// `rule` selects the optimal split or the equal-splitting variant.
pub fn mm_epoch(
    i: usize,
    duals: &DualState,
    tracker: &mut RateTracker,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    warm: Option<&EpochAlloc>,
    rule: SplitRule,
) -> Result<EpochOutcome> {
    let p = mm_problem(cfg, ch, i, duals)?;
    let out = solve_epoch(&p, Mode::MaxMin, warm, cfg, rule)?;
    let (r_dl, r_ul) = epoch_rates(&out.alloc, &ch.g[i - 1], cfg);
    tracker.update(&r_dl, &r_ul);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Fairness;
    use crate::solver::common_fair::cf_time;

    fn fixture(g: &[f64]) -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig {
            k_users: g.len(),
            m_epochs: 1,
            fairness: Fairness::MaxMin,
            ..SystemConfig::default()
        };
        (cfg, ChannelSet::static_bs(g, 1))
    }

    #[test]
    fn uniform_psi_and_symmetric_users_split_evenly() {
        let (cfg, ch) = fixture(&[3e-6; 2]);
        let d = DualState::new(2, 1.0, 1.0);
        let (m, n) = mm_time(&[0.1; 2], &[1e-6; 2], &[0.05; 2], &d, &ch, &cfg, 1).unwrap();
        assert!((m[0] - m[1]).abs() < 1e-9 && (n[0] - n[1]).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_without_floor_gets_no_time() {
        let (cfg, ch) = fixture(&[3e-6; 2]);
        let mut d = DualState::new(2, 1.0, 1.0);
        d.psi1 = vec![0.0, 0.4];
        d.psi2 = vec![0.3, 0.3];
        let (m, _) = mm_time(&[0.0, 0.1], &[1e-6; 2], &[0.0, 0.05], &d, &ch, &cfg, 1).unwrap();
        assert_eq!(m[0], 0.0);
    }

    #[test]
    fn time_block_matches_common_fairness_with_the_same_weights() {
        let (cfg, ch) = fixture(&[1e-6, 5e-6]);
        let mut d = DualState::new(2, 1.0, 1.0);
        d.psi1 = vec![0.4, 0.1];
        d.psi2 = vec![0.3, 0.2];
        // common-fairness weights R^-1 / mean equal psi when R = 1 / psi
        let mut t = RateTracker::new(2, 1e-12);
        t.update(&[2.5, 10.0], &[10.0 / 3.0, 5.0]);
        let cf_cfg = SystemConfig {
            fairness: Fairness::Alpha(1.0),
            ..cfg.clone()
        };
        let (q, qbar, v) = ([0.2, 0.3], [2e-6, 1e-6], [0.1, 0.2]);
        let (m1, n1) = mm_time(&q, &qbar, &v, &d, &ch, &cfg, 1).unwrap();
        let (m2, n2) = cf_time(&q, &qbar, &v, &t, &ch, &cf_cfg, 1).unwrap();
        for u in 0..2 {
            assert!((m1[u] - m2[u]).abs() < 1e-9 && (n1[u] - n2[u]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_dl_weight_means_no_split() {
        let (cfg, ch) = fixture(&[3e-6]);
        let mut d = DualState::new(1, 1.0, 1.0);
        d.psi1 = vec![0.0];
        d.psi2 = vec![1.0];
        let (_, _, v) = mm_power(&[0.5], &[0.5], &d, &ch, &cfg, 1).unwrap();
        assert_eq!(v, vec![0.0]);
    }

    #[test]
    fn ul_power_is_linear_in_the_ul_weight() {
        let (cfg, ch) = fixture(&[3e-6]);
        let mut d = DualState::new(1, 1.0, 1e4);
        let (_, a, _) = mm_power(&[0.5], &[0.5], &d, &ch, &cfg, 1).unwrap();
        d.psi2[0] *= 2.0;
        let (_, b, _) = mm_power(&[0.5], &[0.5], &d, &ch, &cfg, 1).unwrap();
        let noise = 0.5 * cfg.noise_floor() / 3e-6;
        assert!(((b[0] + noise) - 2.0 * (a[0] + noise)).abs() <= 1e-12 * b[0]);
    }

    #[test]
    fn dual_update_keeps_psi_for_equal_rates() {
        let (cfg, _) = fixture(&[3e-6, 3e-6]);
        let mut d = DualState::new(2, 1.0, 1.0);
        let mut t = RateTracker::new(2, cfg.rate_floor);
        t.update(&[1.0; 2], &[1.0; 2]);
        let hist = ConstraintHistory::new(2);
        let prices = PriceController::new(&cfg, 0.25);
        mm_dual_update(&mut d, &t, &hist, &prices, &cfg, 1).unwrap();
        assert!(d.psi1.iter().chain(&d.psi2).all(|&x| (x - 0.25).abs() < 1e-15));
        t.update(&[5.0, 1.0], &[1.0, 1.0]);
        mm_dual_update(&mut d, &t, &hist, &prices, &cfg, 2).unwrap();
        assert!(d.psi1[0] < d.psi1[1]);
        let s: f64 = d.psi1.iter().chain(&d.psi2).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_users_share_one_rate() {
        let (cfg, ch) = fixture(&[3e-6; 2]);
        let d = DualState::new(2, 1.0, 1e6);
        let mut t = RateTracker::new(2, cfg.rate_floor);
        let out = mm_epoch(1, &d, &mut t, &ch, &cfg, None, SplitRule::Optimal).unwrap();
        assert!((out.alloc.time_used() - 1.0).abs() < 1e-9);
        assert!((t.dl[0] - t.dl[1]).abs() <= 1e-6 * t.dl[0].max(t.dl[1]).max(1e-12));
    }
}
