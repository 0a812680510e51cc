//! Scheme dispatch, sweeps and CSV output behind the `wpcn` binary.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{etepes, etepos, finish, otopes, st_dwet};
use crate::error::{Error, Result};
use crate::metrics::{build_report, fmt_sig, RunReport, CSV_HEADER};
use crate::model::{check_feasibility, generate_channels, ChannelSet, DualState, Fairness, SystemConfig};
use crate::oracle::{oracle_grid, oracle_pg, GridOptions, PgOptions};
use crate::solver::{run_online, Mode, RunOutput, SplitRule};

/// Slack allowed on every constraint before a row is written.
pub const FEASIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Zfpi,
    Cfpi,
    Mfpi,
    Etepes,
    Etepos,
    Otopes,
    Stdwet,
    OracleGrid,
    OraclePg,
}

impl Scheme {
    pub const ALL: [Scheme; 9] = [
        Scheme::Zfpi,
        Scheme::Cfpi,
        Scheme::Mfpi,
        Scheme::Etepes,
        Scheme::Etepos,
        Scheme::Otopes,
        Scheme::Stdwet,
        Scheme::OracleGrid,
        Scheme::OraclePg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Zfpi => "zfpi",
            Scheme::Cfpi => "cfpi",
            Scheme::Mfpi => "mfpi",
            Scheme::Etepes => "etepes",
            Scheme::Etepos => "etepos",
            Scheme::Otopes => "otopes",
            Scheme::Stdwet => "stdwet",
            Scheme::OracleGrid => "oracle-grid",
            Scheme::OraclePg => "oracle-pg",
        }
    }

    /// The fairness criterion the scheme optimizes, which its report is
    /// scored against. The common-fairness scheme and the oracles keep the
    /// configured one.
    pub fn fairness(self, configured: Fairness) -> Fairness {
        match self {
            Scheme::Zfpi | Scheme::Stdwet => Fairness::Alpha(0.0),
            Scheme::Mfpi | Scheme::Etepes | Scheme::Etepos | Scheme::Otopes => Fairness::MaxMin,
            Scheme::Cfpi | Scheme::OracleGrid | Scheme::OraclePg => configured,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown scheme `{s}`")))
    }
}

fn oracle_output(alloc: crate::model::Allocation, ch: &ChannelSet, cfg: &SystemConfig) -> RunOutput {
    finish(alloc.epochs, ch, cfg, DualState::new(ch.k(), 0.0, 0.0))
}

/// Runs `scheme` on `ch` and returns its output with the configuration its
/// report is scored under.
pub fn run_scheme(scheme: Scheme, ch: &ChannelSet, cfg: &SystemConfig) -> Result<(RunOutput, SystemConfig)> {
    let cfg = cfg.clone().with_fairness(scheme.fairness(cfg.fairness));
    let out = match scheme {
        Scheme::Zfpi => run_online(ch, &cfg, Mode::ZeroFair, SplitRule::Optimal)?,
        Scheme::Cfpi => match cfg.fairness {
            Fairness::Alpha(a) if a > 0.0 && a.is_finite() => {
                run_online(ch, &cfg, Mode::CommonFair(a), SplitRule::Optimal)?
            }
            other => {
                return Err(Error::Config(format!(
                    "cfpi needs a finite alpha > 0, got {other:?}"
                )))
            }
        },
        Scheme::Mfpi => run_online(ch, &cfg, Mode::MaxMin, SplitRule::Optimal)?,
        Scheme::Etepes => etepes(ch, &cfg)?,
        Scheme::Etepos => etepos(ch, &cfg)?,
        Scheme::Otopes => otopes(ch, &cfg)?,
        Scheme::Stdwet => st_dwet(ch, &cfg)?,
        Scheme::OracleGrid => oracle_output(oracle_grid(ch, &cfg, &GridOptions::default())?.0, ch, &cfg),
        Scheme::OraclePg => oracle_output(oracle_pg(ch, &cfg, &PgOptions::default())?.0, ch, &cfg),
    };
    Ok((out, cfg))
}

/// Seeded channels, one run, a feasibility check and the report.
pub fn run_report(scheme: Scheme, cfg: &SystemConfig, seed: u64) -> Result<RunReport> {
    cfg.validate()?;
    let ch = generate_channels(cfg, cfg.side_m, seed)?;
    let (out, scored) = run_scheme(scheme, &ch, cfg)?;
    let violations = check_feasibility(&out.alloc, &ch, &scored, FEASIBILITY_TOL)?;
    if let Some(v) = violations.first() {
        return Err(Error::Infeasible {
            epoch: v.epoch.unwrap_or(0),
            reason: format!(
                "{} violations, first {:?} for user {:?} by {:e}",
                violations.len(),
                v.constraint,
                v.user,
                v.excess
            ),
        });
    }
    Ok(build_report(scheme.name(), seed, &out, &ch, &scored))
}

/// Header and one row.
pub fn run_csv(scheme: Scheme, cfg: &SystemConfig, seed: u64) -> Result<String> {
    let r = run_report(scheme, cfg, seed)?;
    Ok(format!("{CSV_HEADER}\n{}\n", r.csv_row()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Alpha,
    PMax,
    K,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::PMax => "p_max",
            Axis::K => "K",
        }
    }

    /// `cfg` with the axis set to `value`; `inf` on the alpha axis means
    /// max-min fairness.
    pub fn apply(self, cfg: &SystemConfig, value: f64) -> Result<SystemConfig> {
        let mut c = cfg.clone();
        match self {
            Axis::Alpha if value == f64::INFINITY => c.fairness = Fairness::MaxMin,
            Axis::Alpha => c.fairness = Fairness::Alpha(value),
            Axis::PMax => c.p_max = value,
            Axis::K => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Argument(format!("K must be a positive integer, got {value}")));
                }
                c.k_users = value as usize;
                c.rate_requirements = None;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(Axis::Alpha),
            "p_max" => Ok(Axis::PMax),
            "K" | "k" => Ok(Axis::K),
            _ => Err(Error::Argument(format!("unknown sweep axis `{s}`"))),
        }
    }
}

pub const SWEEP_EXTRA: &str =
    "axis,value,sum_rate_mean,sum_rate_stderr,jain_mean,jain_stderr,theta_mean,theta_stderr";

/// Sample mean and standard error; the error is `NaN` below two samples.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One row per `(value, seed)` in that order, each followed by the mean
/// and standard error over the seeds of its value.
pub fn sweep_csv(scheme: Scheme, cfg: &SystemConfig, axis: Axis, values: &[f64], seeds: &[u64]) -> Result<String> {
    if values.is_empty() || seeds.is_empty() {
        return Err(Error::Argument("a sweep needs at least one value and one seed".into()));
    }
    let cfgs = values.iter().map(|&v| axis.apply(cfg, v)).collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, u64)> = (0..values.len()).flat_map(|i| seeds.iter().map(move |&s| (i, s))).collect();
    let reports = cells
        .par_iter()
        .map(|&(i, seed)| run_report(scheme, &cfgs[i], seed))
        .collect::<Result<Vec<_>>>()?;
    let mut text = format!("{CSV_HEADER},{SWEEP_EXTRA}\n");
    for (i, group) in reports.chunks(seeds.len()).enumerate() {
        let stat = |f: fn(&RunReport) -> f64| mean_stderr(&group.iter().map(f).collect::<Vec<_>>());
        let (sm, se) = stat(|r| r.sum_rate);
        let (jm, je) = stat(|r| r.jain);
        let (tm, te) = stat(|r| r.theta);
        let tail = [sm, se, jm, je, tm, te].map(fmt_sig).join(",");
        for r in group {
            text += &format!("{},{},{},{tail}\n", r.csv_row(), axis.name(), fmt_sig(values[i]));
        }
    }
    Ok(text)
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Infeasible { .. } => 2,
        Error::Convergence { .. } => 3,
        _ => 1,
    }
}

/// Checks `cfg` and lists its derived linear-scale quantities.
pub fn validate_report(cfg: &SystemConfig) -> Result<String> {
    cfg.validate()?;
    Ok(format!(
        "config ok\nK = {}\nM = {}\nsigma2 = {} W\ngamma = {}\nnoise floor = {} W\np_max = {} W\np_avg = {} W\nalpha = {}\n",
        cfg.k_users,
        cfg.m_epochs,
        fmt_sig(cfg.sigma2),
        fmt_sig(cfg.gamma),
        fmt_sig(cfg.noise_floor()),
        cfg.p_max,
        cfg.p_avg,
        cfg.fairness.alpha()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SystemConfig {
        SystemConfig {
            k_users: 2,
            m_epochs: 6,
            ..SystemConfig::default()
        }
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("zf".parse::<Scheme>().is_err());
    }

    #[test]
    fn runs_are_reproducible() {
        for s in [Scheme::Etepes, Scheme::Zfpi] {
            assert_eq!(run_csv(s, &small(), 4).unwrap(), run_csv(s, &small(), 4).unwrap());
        }
    }

    #[test]
    fn a_one_cell_sweep_reduces_to_a_run() {
        let cfg = small();
        let run = run_csv(Scheme::Etepes, &cfg, 2).unwrap();
        let sweep = sweep_csv(Scheme::Etepes, &cfg, Axis::PMax, &[cfg.p_max], &[2]).unwrap();
        let row = run.lines().nth(1).unwrap();
        assert!(sweep.lines().nth(1).unwrap().starts_with(&format!("{row},p_max,")));
    }

    #[test]
    fn sweep_rows_and_means() {
        let cfg = small();
        let seeds = [1, 2, 3];
        let text = sweep_csv(Scheme::Zfpi, &cfg, Axis::Alpha, &[0.0, 1.0], &seeds).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), 6);
        let sums: Vec<f64> = rows[..3].iter().map(|r| r[6].parse().unwrap()).collect();
        let mean: f64 = rows[0][14].parse().unwrap();
        assert!((mean - sums.iter().sum::<f64>() / 3.0).abs() <= 1e-8 * mean);
    }

    #[test]
    fn cfpi_rejects_alpha_zero() {
        let cfg = small().with_fairness(Fairness::Alpha(0.0));
        assert!(matches!(run_report(Scheme::Cfpi, &cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Infeasible { epoch: 1, reason: String::new() }), 2);
        assert_eq!(exit_code(&Error::Convergence { what: "x", iterations: 1 }), 3);
        assert_eq!(exit_code(&Error::Config(String::new())), 1);
    }

    #[test]
    fn validate_lists_linear_noise() {
        let text = validate_report(&SystemConfig::default()).unwrap();
        assert!(text.contains("noise floor"));
        let bad = SystemConfig {
            p_avg: 10.0,
            ..SystemConfig::default()
        };
        assert!(validate_report(&bad).is_err());
    }
}
