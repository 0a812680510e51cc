//! Network and solver parameters.
//!
//! Configuration files are flat JSON objects whose keys mirror the
//! [`SystemConfig`] field names. Logarithmic inputs are accepted through the
//! suffixed keys `sigma2_dbm` and `gamma_db`; they are converted to linear
//! scale when the file is loaded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tolerance;

/// Which member of the alpha-fair family is being optimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fairness {
    Alpha(f64),
    /// The `alpha = +inf` limit, solved as a max-min problem.
    MaxMin,
}

impl Fairness {
    pub fn alpha(&self) -> f64 {
        match self {
            Fairness::Alpha(a) => *a,
            Fairness::MaxMin => f64::INFINITY,
        }
    }
}

/// How each epoch's priced problem is driven to its block fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochDriver {
    /// Block alternation started from the previous epoch's powers.
    WarmStart,
    /// Block alternation started from every single-slot allocation and from
    /// an even split; the best fixed point is kept.
    MultiStart,
}

/// Coefficients of the dual updates, all dimensionless.
///
/// `mu` and `nu` are the log-price increments per epoch's worth of excess on
/// the power and energy constraints; `psi` is the `c` of the `c / sqrt(i)`
/// max-min schedule (see [`crate::solver::dual`]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    /// `lambda_0`, average BS power multiplier.
    pub mu: f64,
    /// `lambda_1..lambda_K`, energy balance multipliers.
    pub nu: f64,
    /// `lambda_{K+1}..lambda_{3K}`, max-min rate multipliers.
    pub psi: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            mu: 0.5,
            nu: 0.5,
            psi: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub k_users: usize,
    pub m_epochs: usize,
    /// Noise power in watts.
    pub sigma2: f64,
    /// System margin, linear.
    pub gamma: f64,
    /// Conversion efficiency of energy harvested from the BS.
    pub zeta: f64,
    /// Conversion efficiency of energy harvested from other users.
    pub zeta0: f64,
    pub p_max: f64,
    pub p_avg: f64,
    pub fairness: Fairness,
    /// Side of the square deployment area in meters; the BS sits at its center.
    pub side_m: f64,
    pub path_loss_exp: f64,
    /// Power gain at the reference distance of 1 m.
    pub ref_gain: f64,
    /// Distances are floored here before applying the path-loss law.
    pub min_distance_m: f64,
    pub steps: StepSizes,
    /// Relative change of the epoch objective that ends the inner alternation.
    pub inner_tol: f64,
    pub max_inner_iter: usize,
    /// Lower projection bound for the energy multipliers.
    pub nu_floor: f64,
    /// Lower bound applied to tracked average rates.
    pub rate_floor: f64,
    pub tol: Tolerance,
    /// Optional per-user rate requirements for the weighted max-min variant,
    /// `[DL..., UL...]`, length `2K`; all ones when absent.
    #[serde(default)]
    pub rate_requirements: Option<Vec<f64>>,
    pub driver: EpochDriver,
    /// Largest fraction of its stored energy a user spends in one full-epoch
    /// UL slot, in `(0, 1]`.
    pub store_share: f64,
    /// Lower bound on each max-min multiplier as a fraction of the uniform
    /// weight `1 / 2K`, in `[0, 1)`.
    pub psi_floor: f64,
    /// Average-power multiplier at zero cumulative excess; the reference
    /// price when absent.
    #[serde(default)]
    pub mu_init: Option<f64>,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) / 1000.0
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            k_users: 10,
            m_epochs: 1000,
            sigma2: dbm_to_watts(-104.0),
            gamma: db_to_linear(9.8),
            zeta: 0.5,
            zeta0: 0.5,
            p_max: 5.0,
            p_avg: 2.0,
            fairness: Fairness::Alpha(0.0),
            side_m: 10.0,
            path_loss_exp: 3.0,
            ref_gain: 1e-3,
            min_distance_m: 1.0,
            steps: StepSizes::default(),
            inner_tol: 1e-9,
            max_inner_iter: 200,
            nu_floor: 1e-12,
            rate_floor: 1e-6,
            tol: Tolerance::default(),
            rate_requirements: None,
            driver: EpochDriver::MultiStart,
            store_share: 0.5,
            psi_floor: 0.0,
            mu_init: None,
        }
    }
}

impl SystemConfig {
    /// Reduced profile used by tests and quick runs: `K = 4`, `M = 200`.
    pub fn desk() -> Self {
        Self {
            k_users: 4,
            m_epochs: 200,
            ..Self::default()
        }
    }

    /// `Gamma * sigma^2`, the effective noise floor in every rate expression.
    pub fn noise_floor(&self) -> f64 {
        self.gamma * self.sigma2
    }

    pub fn with_fairness(mut self, fairness: Fairness) -> Self {
        self.fairness = fairness;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.k_users == 0 {
            return fail("k_users must be positive".into());
        }
        if self.m_epochs == 0 {
            return fail("m_epochs must be positive".into());
        }
        if !(self.sigma2 > 0.0) {
            return fail(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if !(self.gamma >= 1.0) {
            return fail(format!("gamma must be at least 1 (linear), got {}", self.gamma));
        }
        if !(self.zeta > 0.0 && self.zeta <= 1.0) {
            return fail(format!("zeta must lie in (0, 1], got {}", self.zeta));
        }
        if !(0.0..=1.0).contains(&self.zeta0) {
            return fail(format!("zeta0 must lie in [0, 1], got {}", self.zeta0));
        }
        if !(self.p_avg > 0.0 && self.p_avg <= self.p_max) {
            return fail(format!(
                "need 0 < p_avg <= p_max, got p_avg = {} and p_max = {}",
                self.p_avg, self.p_max
            ));
        }
        if let Fairness::Alpha(a) = self.fairness {
            if !(a >= 0.0 && a.is_finite()) {
                return fail(format!("alpha must be finite and non-negative, got {a}"));
            }
        }
        if !(self.side_m > 0.0) || !(self.min_distance_m > 0.0) {
            return fail("side_m and min_distance_m must be positive".into());
        }
        if !(self.ref_gain > 0.0) || !(self.path_loss_exp >= 0.0) {
            return fail("ref_gain must be positive and path_loss_exp non-negative".into());
        }
        let s = self.steps;
        if ![s.mu, s.nu, s.psi].iter().all(|&x| x >= 0.0 && x.is_finite()) {
            return fail("step sizes must be finite and non-negative".into());
        }
        if !(self.inner_tol > 0.0) || self.max_inner_iter == 0 {
            return fail("inner_tol must be positive and max_inner_iter at least 1".into());
        }
        if !(self.nu_floor > 0.0) || !(self.rate_floor > 0.0) {
            return fail("nu_floor and rate_floor must be positive".into());
        }
        if self.mu_init.map_or(false, |x| !(x > 0.0 && x.is_finite())) {
            return fail("mu_init must be positive".into());
        }
        if !(self.store_share > 0.0 && self.store_share <= 1.0) {
            return fail(format!("store_share must lie in (0, 1], got {}", self.store_share));
        }
        if !(self.psi_floor >= 0.0 && self.psi_floor < 1.0) {
            return fail(format!("psi_floor must lie in [0, 1), got {}", self.psi_floor));
        }
        if let Some(req) = &self.rate_requirements {
            if req.len() != 2 * self.k_users || req.iter().any(|&x| !(x > 0.0)) {
                return fail("rate_requirements needs 2K positive entries".into());
            }
        }
        self.tol.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Parses a JSON configuration, filling unspecified keys from
    /// [`SystemConfig::default`].
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg = file.into_config()?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Accepts `"alpha": <number>`, or `"alpha": "inf"` / `"maxmin"` for max-min.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum AlphaSpec {
    Number(f64),
    Text(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    k_users: Option<usize>,
    m_epochs: Option<usize>,
    sigma2: Option<f64>,
    sigma2_dbm: Option<f64>,
    gamma: Option<f64>,
    gamma_db: Option<f64>,
    zeta: Option<f64>,
    zeta0: Option<f64>,
    p_max: Option<f64>,
    p_avg: Option<f64>,
    alpha: Option<AlphaSpec>,
    side_m: Option<f64>,
    path_loss_exp: Option<f64>,
    ref_gain: Option<f64>,
    min_distance_m: Option<f64>,
    step_mu: Option<f64>,
    step_nu: Option<f64>,
    step_psi: Option<f64>,
    inner_tol: Option<f64>,
    max_inner_iter: Option<usize>,
    nu_floor: Option<f64>,
    rate_floor: Option<f64>,
    abs_tol: Option<f64>,
    rel_tol: Option<f64>,
    max_iter: Option<usize>,
    rate_requirements: Option<Vec<f64>>,
    driver: Option<EpochDriver>,
    store_share: Option<f64>,
    psi_floor: Option<f64>,
    mu_init: Option<f64>,
}

impl ConfigFile {
    fn into_config(self) -> Result<SystemConfig> {
        let mut c = SystemConfig::default();
        if self.sigma2.is_some() && self.sigma2_dbm.is_some() {
            return Err(Error::Config("give either sigma2 or sigma2_dbm, not both".into()));
        }
        if self.gamma.is_some() && self.gamma_db.is_some() {
            return Err(Error::Config("give either gamma or gamma_db, not both".into()));
        }
        macro_rules! set {
            ($($field:ident),*) => { $( if let Some(v) = self.$field { c.$field = v; } )* };
        }
        set!(
            k_users,
            m_epochs,
            sigma2,
            gamma,
            zeta,
            zeta0,
            p_max,
            p_avg,
            side_m,
            path_loss_exp,
            ref_gain,
            min_distance_m,
            inner_tol,
            max_inner_iter,
            nu_floor,
            rate_floor,
            driver,
            store_share,
            psi_floor
        );
        if let Some(v) = self.sigma2_dbm {
            c.sigma2 = dbm_to_watts(v);
        }
        if let Some(v) = self.gamma_db {
            c.gamma = db_to_linear(v);
        }
        if let Some(a) = self.alpha {
            c.fairness = match a {
                AlphaSpec::Number(x) if x.is_infinite() => Fairness::MaxMin,
                AlphaSpec::Number(x) => Fairness::Alpha(x),
                AlphaSpec::Text(s) => match s.to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "maxmin" | "max-min" => Fairness::MaxMin,
                    other => other
                        .parse::<f64>()
                        .map(Fairness::Alpha)
                        .map_err(|_| Error::Config(format!("unrecognised alpha {other:?}")))?,
                },
            };
        }
        if let Some(v) = self.step_mu {
            c.steps.mu = v;
        }
        if let Some(v) = self.step_nu {
            c.steps.nu = v;
        }
        if let Some(v) = self.step_psi {
            c.steps.psi = v;
        }
        if let Some(v) = self.abs_tol {
            c.tol.abs_tol = v;
        }
        if let Some(v) = self.rel_tol {
            c.tol.rel_tol = v;
        }
        if let Some(v) = self.max_iter {
            c.tol.max_iter = v;
        }
        c.rate_requirements = self.rate_requirements;
        c.mu_init = self.mu_init;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn db_conversions() {
        assert_relative_eq!(dbm_to_watts(-104.0), 3.981_071_705_534_972e-14, max_relative = 1e-12);
        assert_relative_eq!(db_to_linear(9.8), 9.549_925_860_214_36, max_relative = 1e-12);
    }

    #[test]
    fn defaults_are_valid() {
        SystemConfig::default().validate().unwrap();
        SystemConfig::desk().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = SystemConfig {
            p_avg: 6.0,
            ..SystemConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SystemConfig {
            zeta: 0.0,
            ..SystemConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SystemConfig {
            gamma: 0.5,
            ..SystemConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn parses_db_keys_and_alpha_forms() {
        let c = SystemConfig::from_json_str(
            r#"{"k_users": 3, "sigma2_dbm": -104, "gamma_db": 9.8, "alpha": "inf"}"#,
        )
        .unwrap();
        assert_eq!(c.k_users, 3);
        assert_eq!(c.fairness, Fairness::MaxMin);
        assert_relative_eq!(c.sigma2, 3.981_071_705_534_972e-14, max_relative = 1e-12);
        let c = SystemConfig::from_json_str(r#"{"alpha": 2}"#).unwrap();
        assert_eq!(c.fairness, Fairness::Alpha(2.0));
        assert!(SystemConfig::from_json_str(r#"{"sigma2": 1e-14, "sigma2_dbm": -104}"#).is_err());
        assert!(SystemConfig::from_json_str(r#"{"bogus": 1}"#).is_err());
    }
}
