//! Common fairness (`0 < alpha < inf`).
//!
//! Each rate is weighted by the alpha-fair marginal utility of its running
//! average, `R^-alpha`, rescaled to mean one.

use super::driver::{solve_epoch, EpochOutcome, Mode, SplitRule};
use super::dual::RateTracker;
use super::epoch::EpochProblem;
use crate::error::{Error, Result};
use crate::model::{epoch_rates, ChannelSet, DualState, EpochAlloc, Fairness, SystemConfig};

fn alpha_of(cfg: &SystemConfig) -> Result<f64> {
    match cfg.fairness {
        Fairness::Alpha(a) if a > 0.0 && a.is_finite() => Ok(a),
        other => Err(Error::Argument(format!(
            "common fairness needs a finite positive alpha, got {other:?}"
        ))),
    }
}

/// Epoch `i` priced by `duals` with weights from `tracker`.
pub fn cf_problem(
    cfg: &SystemConfig,
    ch: &ChannelSet,
    i: usize,
    duals: &DualState,
    tracker: &RateTracker,
) -> Result<EpochProblem> {
    let (w_dl, w_ul) = tracker.alpha_weights(alpha_of(cfg)?);
    EpochProblem::new(cfg, ch, i, duals, w_dl, w_ul)
}

/// Time split for fixed powers.
pub fn cf_time(
    q: &[f64],
    qbar: &[f64],
    v: &[f64],
    tracker: &RateTracker,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    // prices do not enter the time block
    let duals = DualState::new(ch.k(), 0.0, 1.0);
    cf_problem(cfg, ch, i, &duals, tracker)?.time_block(q, qbar, v)
}

/// Powers `(q, qbar, v)` for a fixed time split.
pub fn cf_power(
    m: &[f64],
    n: &[f64],
    tracker: &RateTracker,
    duals: &DualState,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    i: usize,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    Ok(cf_problem(cfg, ch, i, duals, tracker)?.power_block(m, n))
}

/// Folds one epoch's rates into the running averages.
pub fn cf_rate_update(tracker: &mut RateTracker, r_dl: &[f64], r_ul: &[f64]) {
    tracker.update(r_dl, r_ul);
}

/// Solves epoch `i` with the duals held fixed and records its rates.
pub fn cf_epoch(
    i: usize,
    duals: &DualState,
    tracker: &mut RateTracker,
    ch: &ChannelSet,
    cfg: &SystemConfig,
    warm: Option<&EpochAlloc>,
) -> Result<EpochOutcome> {
    let p = cf_problem(cfg, ch, i, duals, tracker)?;
    let out = solve_epoch(&p, Mode::CommonFair(alpha_of(cfg)?), warm, cfg, SplitRule::Optimal)?;
    let (r_dl, r_ul) = epoch_rates(&out.alloc, &ch.g[i - 1], cfg);
    cf_rate_update(tracker, &r_dl, &r_ul);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(g: &[f64], alpha: f64) -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig {
            k_users: g.len(),
            m_epochs: 1,
            fairness: Fairness::Alpha(alpha),
            ..SystemConfig::default()
        };
        (cfg, ChannelSet::static_bs(g, 1))
    }

    #[test]
    fn floors_alone_set_the_split() {
        let (cfg, ch) = fixture(&[1e-6, 2e-6], 1.0);
        let t = RateTracker::new(2, cfg.rate_floor);
        let q = [0.3 * cfg.p_max, 0.7 * cfg.p_max];
        let (m, n) = cf_time(&q, &[0.0; 2], &[0.0; 2], &t, &ch, &cfg, 1).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-12 && (m[1] - 0.7).abs() < 1e-12);
        assert_eq!(n, vec![0.0, 0.0]);
    }

    #[test]
    fn symmetric_users_split_evenly() {
        let (cfg, ch) = fixture(&[2e-6; 3], 2.0);
        let t = RateTracker::new(3, cfg.rate_floor);
        let (m, n) = cf_time(&[0.1; 3], &[1e-6; 3], &[0.05; 3], &t, &ch, &cfg, 1).unwrap();
        for u in 1..3 {
            assert!((m[u] - m[0]).abs() < 1e-9 && (n[u] - n[0]).abs() < 1e-9);
        }
        let total: f64 = m.iter().chain(&n).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_ul_time_means_no_ul_power() {
        let (cfg, ch) = fixture(&[1e-6, 2e-6], 1.0);
        let t = RateTracker::new(2, cfg.rate_floor);
        let d = DualState::new(2, 1.0, 1.0);
        let (_, qbar, _) = cf_power(&[0.5, 0.5], &[0.0, 0.0], &t, &d, &ch, &cfg, 1).unwrap();
        assert_eq!(qbar, vec![0.0, 0.0]);
    }

    #[test]
    fn ul_power_scales_with_ul_time() {
        let (cfg, ch) = fixture(&[1e-6], 1.0);
        let t = RateTracker::new(1, cfg.rate_floor);
        let d = DualState::new(1, 1.0, 10.0);
        let (_, a, _) = cf_power(&[0.5], &[0.2], &t, &d, &ch, &cfg, 1).unwrap();
        let (_, b, _) = cf_power(&[0.5], &[0.4], &t, &d, &ch, &cfg, 1).unwrap();
        assert!(a[0] > 0.0);
        assert!((b[0] - 2.0 * a[0]).abs() <= 1e-12 * b[0]);
    }

    #[test]
    fn rate_update_averages() {
        let mut t = RateTracker::new(1, 0.0);
        cf_rate_update(&mut t, &[1.0], &[0.0]);
        cf_rate_update(&mut t, &[3.0], &[0.0]);
        assert!((t.dl[0] - 2.0).abs() < 1e-15);
        let mut t = RateTracker::new(1, 0.0);
        for _ in 0..5 {
            cf_rate_update(&mut t, &[2.0], &[2.0]);
        }
        assert!((t.dl[0] - 2.0).abs() < 1e-15 && (t.ul[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_alpha_is_rejected() {
        let (cfg, ch) = fixture(&[1e-6], 0.0);
        let t = RateTracker::new(1, cfg.rate_floor);
        assert!(matches!(
            cf_time(&[0.0], &[0.0], &[0.0], &t, &ch, &cfg, 1),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn epoch_records_its_rates() {
        let (cfg, ch) = fixture(&[1e-6, 4e-6], 1.0);
        let mut t = RateTracker::new(2, cfg.rate_floor);
        let d = DualState::new(2, 1.0, 1e6);
        let out = cf_epoch(1, &d, &mut t, &ch, &cfg, None).unwrap();
        assert!((out.alloc.time_used() - 1.0).abs() < 1e-9);
        let (r_dl, _) = epoch_rates(&out.alloc, &ch.g[0], &cfg);
        assert_eq!(t.epochs, 1);
        assert!((t.dl[0] - r_dl[0].max(cfg.rate_floor)).abs() < 1e-12);
    }
}
