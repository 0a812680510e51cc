//! Rate aggregation, fairness measures and run reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::model::average_rates;
use crate::model::{objective_value, ChannelSet, SystemConfig};
use crate::solver::RunOutput;

/// Jain's index over the `2K` DL and UL average rates.
pub fn jain_index(dl: &[f64], ul: &[f64]) -> Result<f64> {
    let sum: f64 = dl.iter().chain(ul).sum();
    let sq: f64 = dl.iter().chain(ul).map(|x| x * x).sum();
    if !(sq > 0.0) {
        return Err(Error::Domain { what: "jain_index", value: 0.0 });
    }
    Ok(sum * sum / ((dl.len() + ul.len()) as f64 * sq))
}

/// Smallest of the `2K` average rates.
pub fn fairness_value(dl: &[f64], ul: &[f64]) -> f64 {
    dl.iter().chain(ul).copied().fold(f64::INFINITY, f64::min)
}

/// Summary of one run, as written by the command-line driver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: String,
    pub seed: u64,
    /// `inf` for max-min fairness.
    pub alpha: f64,
    pub p_max_w: f64,
    pub k_users: usize,
    pub m_epochs: usize,
    pub dl_rates: Vec<f64>,
    pub ul_rates: Vec<f64>,
    pub sum_rate: f64,
    /// `NaN` when every rate is zero.
    pub jain: f64,
    pub theta: f64,
    /// `-inf` when a zero rate meets `alpha >= 1`.
    pub objective: f64,
    pub mu_trace: Vec<f64>,
    pub nu_trace: Vec<Vec<f64>>,
    pub inner_iterations: Vec<usize>,
    pub converged_epochs: usize,
}

pub const CSV_HEADER: &str =
    "scheme,seed,alpha,p_max_w,k_users,m_epochs,sum_rate,jain,theta,objective,mu_final,converged_epochs";

/// Nine significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        format!("{x}")
    }
}

/// Recomputes every figure of merit from the allocation in `out`.
pub fn build_report(scheme: &str, seed: u64, out: &RunOutput, ch: &ChannelSet, cfg: &SystemConfig) -> RunReport {
    let (dl, ul) = average_rates(&out.alloc, ch, cfg);
    RunReport {
        scheme: scheme.to_string(),
        seed,
        alpha: cfg.fairness.alpha(),
        p_max_w: cfg.p_max,
        k_users: cfg.k_users,
        m_epochs: out.alloc.m(),
        sum_rate: dl.iter().chain(&ul).sum(),
        jain: jain_index(&dl, &ul).unwrap_or(f64::NAN),
        theta: fairness_value(&dl, &ul),
        objective: objective_value(&out.alloc, ch, cfg).unwrap_or(f64::NEG_INFINITY),
        mu_trace: out.mu_trace.clone(),
        nu_trace: out.nu_trace.clone(),
        inner_iterations: out.inner_iterations.clone(),
        converged_epochs: out.converged_epochs,
        dl_rates: dl,
        ul_rates: ul,
    }
}

impl RunReport {
    pub fn mu_final(&self) -> f64 {
        self.mu_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// One line matching [`CSV_HEADER`], without a newline.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme,
            self.seed,
            fmt_sig(self.alpha),
            fmt_sig(self.p_max_w),
            self.k_users,
            self.m_epochs,
            fmt_sig(self.sum_rate),
            fmt_sig(self.jain),
            fmt_sig(self.theta),
            fmt_sig(self.objective),
            fmt_sig(self.mu_final()),
            self.converged_epochs
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_channels, Fairness};
    use crate::solver::{run_online, Mode, SplitRule};

    #[test]
    fn jain_examples() {
        assert_eq!(jain_index(&[3.0, 3.0], &[3.0, 3.0]).unwrap(), 1.0);
        assert_eq!(jain_index(&[0.0, 2.0], &[0.0, 0.0]).unwrap(), 0.25);
        assert!((jain_index(&[2.0, 1.0], &[1.0, 0.0]).unwrap() - 16.0 / 24.0).abs() < 1e-15);
        assert!(jain_index(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn fairness_value_examples() {
        assert_eq!(fairness_value(&[1.5, 1.5], &[1.5, 1.5]), 1.5);
        assert_eq!(fairness_value(&[1.5, 0.0], &[2.0, 1.0]), 0.0);
        assert_eq!(fairness_value(&[4.0, 2.5], &[3.0, 2.75]), 2.5);
    }

    fn sample() -> (RunReport, RunOutput, ChannelSet, SystemConfig) {
        let cfg = SystemConfig {
            k_users: 2,
            m_epochs: 8,
            ..SystemConfig::default()
        }
        .with_fairness(Fairness::Alpha(1.0));
        let ch = generate_channels(&cfg, cfg.side_m, 3).unwrap();
        let out = run_online(&ch, &cfg, Mode::CommonFair(1.0), SplitRule::Optimal).unwrap();
        (build_report("cfpi", 3, &out, &ch, &cfg), out, ch, cfg)
    }

    #[test]
    fn report_recomputes_from_the_allocation() {
        let (r, out, ch, cfg) = sample();
        let (dl, ul) = average_rates(&out.alloc, &ch, &cfg);
        assert_eq!(r.sum_rate, dl.iter().chain(&ul).sum::<f64>());
        assert_eq!(r.sum_rate, r.dl_rates.iter().chain(&r.ul_rates).sum::<f64>());
        assert_eq!(r.objective, objective_value(&out.alloc, &ch, &cfg).unwrap());
        assert_eq!(r.mu_final(), out.duals.mu);
        assert_eq!(r.m_epochs, 8);
    }

    #[test]
    fn report_round_trips_through_json() {
        let (r, ..) = sample();
        let text = serde_json::to_string(&r).unwrap();
        assert_eq!(serde_json::from_str::<RunReport>(&text).unwrap(), r);
    }

    #[test]
    fn csv_row_matches_the_header() {
        let (r, ..) = sample();
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), CSV_HEADER.split(',').count());
        assert!(row.starts_with("cfpi,3,1.00000000e0,"));
        assert_eq!(fmt_sig(1.0 / 3.0), "3.33333333e-1");
        assert_eq!(fmt_sig(f64::INFINITY), "inf");
    }
}
