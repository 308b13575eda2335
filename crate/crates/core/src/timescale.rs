//! Timescale budget calculus for leaky integrators.
//!
//! An input seen `T*` ago survives in a leaky trace with time constant `tau`
//! with weight `exp(-T*/tau)`. Requiring that weight to stay at least `F`
//! yields the lower bound `tau >= -T* / ln F` (about `1.4427 T*` for `F = 1/2`).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Default forgetting factor.
pub const DEFAULT_FORGETTING: f64 = 0.5;

/// Residual weight `exp(-t_star/tau)` of an event `t_star` in the past.
pub fn forgetting_factor_of(tau_ms: f64, t_star_ms: f64) -> Result<f64> {
    if !(tau_ms > 0.0) || !(t_star_ms > 0.0) {
        return Err(domain(format!(
            "forgetting factor needs tau > 0 and T* > 0, got tau = {tau_ms}, T* = {t_star_ms}"
        )));
    }
    Ok((-t_star_ms / tau_ms).exp())
}

/// Smallest time constant that keeps a residual weight of at least `forgetting` after `t_star_ms`.
pub fn min_time_constant(t_star_ms: f64, forgetting: f64) -> Result<f64> {
    if !(t_star_ms > 0.0) {
        return Err(domain(format!("T* must be positive, got {t_star_ms}")));
    }
    if !(forgetting > 0.0 && forgetting < 1.0) {
        return Err(domain(format!(
            "forgetting factor must lie strictly inside (0, 1), got {forgetting}"
        )));
    }
    Ok(-t_star_ms / forgetting.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimescaleBudget {
    /// Slowest task-relevant timescale.
    pub t_star_ms: f64,
    pub forgetting_factor: f64,
    pub tau_pre_ms: f64,
    pub tau_m_ms: f64,
}

impl TimescaleBudget {
    pub fn new(t_star_ms: f64, forgetting_factor: f64, tau_pre_ms: f64, tau_m_ms: f64) -> Result<Self> {
        let budget = Self {
            t_star_ms,
            forgetting_factor,
            tau_pre_ms,
            tau_m_ms,
        };
        budget.validate()?;
        Ok(budget)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_star_ms", self.t_star_ms),
            ("tau_pre_ms", self.tau_pre_ms),
            ("tau_m_ms", self.tau_m_ms),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.forgetting_factor > 0.0 && self.forgetting_factor < 1.0) {
            return Err(domain(format!(
                "forgetting factor must lie strictly inside (0, 1), got {}",
                self.forgetting_factor
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Outcome for one leaky integrator of the budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintVerdict {
    /// `tau_pre` or `tau_m`.
    pub constraint: String,
    pub tau: f64,
    pub tau_min: f64,
    /// `tau - tau_min`; negative when the constraint fails.
    pub margin: f64,
    /// `tau / tau_min`.
    pub ratio: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub budget: TimescaleBudget,
    pub constraints: Vec<ConstraintVerdict>,
}

impl BudgetReport {
    pub fn all_pass(&self) -> bool {
        self.constraints.iter().all(|c| c.verdict == Verdict::Pass)
    }
}

/// Checks both the presynaptic-trace and membrane time constants against the budget.
pub fn check_budget(budget: &TimescaleBudget) -> Result<BudgetReport> {
    budget.validate()?;
    let tau_min = min_time_constant(budget.t_star_ms, budget.forgetting_factor)?;
    let judge = |name: &str, tau: f64| ConstraintVerdict {
        constraint: name.to_string(),
        tau,
        tau_min,
        margin: tau - tau_min,
        ratio: tau / tau_min,
        verdict: if tau >= tau_min { Verdict::Pass } else { Verdict::Fail },
    };
    Ok(BudgetReport {
        budget: *budget,
        constraints: vec![judge("tau_pre", budget.tau_pre_ms), judge("tau_m", budget.tau_m_ms)],
    })
}

const SECOND: f64 = 1e3;
const HOUR: f64 = 3600.0 * SECOND;
const YEAR: f64 = 365.25 * 24.0 * HOUR;

/// One row of the plasticity-timescale registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlasticityBand {
    pub name: String,
    pub timescale_low_ms: f64,
    pub timescale_high_ms: f64,
    /// Range as written in the source table.
    pub timescale_label: String,
    pub mechanism: String,
    pub candidate_device: String,
}

impl PlasticityBand {
    pub fn contains(&self, duration_ms: f64) -> bool {
        (self.timescale_low_ms..=self.timescale_high_ms).contains(&duration_ms)
    }
}

/// Registry of biological plasticity phenomena and their timescales.
///
/// Long-term plasticity appears twice (weight change and weight preservation).
/// Open-ended upper limits are pinned as "years" = 10 years and
/// "lifetime" = 100 years.
pub fn plasticity_bands() -> Vec<PlasticityBand> {
    let band = |name: &str, low: f64, high: f64, label: &str, mechanism: &str, device: &str| PlasticityBand {
        name: name.into(),
        timescale_low_ms: low,
        timescale_high_ms: high,
        timescale_label: label.into(),
        mechanism: mechanism.into(),
        candidate_device: device.into(),
    };
    vec![
        band("Short-term plasticity", 1.0, 10.0, "1 ms -- 10 ms", "STDP, SDSP", "capacitors"),
        band(
            "Long-term plasticity",
            10.0,
            500.0,
            "10 ms -- 500 ms for weight change",
            "LTP/LTD",
            "non-volatile memristive devices (for preserving the results of LTP)",
        ),
        band(
            "Long-term plasticity",
            HOUR,
            10.0 * YEAR,
            "1 h -- years for weight preservation",
            "LTP/LTD",
            "non-volatile memristive devices (for preserving the results of LTP)",
        ),
        band(
            "Intrinsic plasticity",
            0.5 * SECOND,
            10.0 * SECOND,
            "0.5 s -- 10 s",
            "threshold adaptation",
            "volatile ReRAM, TFT, ...",
        ),
        band(
            "Homeostatic plasticity",
            SECOND,
            HOUR,
            "1 s -- 1 h",
            "synaptic scaling",
            "volatile ReRAM, PCM drift, TFT, ...",
        ),
        band(
            "Structural plasticity",
            HOUR,
            100.0 * YEAR,
            "1 h -- lifetime",
            "architecture reorganisation",
            "reconfigurable / extendable architectures",
        ),
    ]
}

/// Every band whose closed range contains `duration_ms`.
pub fn band_lookup(duration_ms: f64) -> Vec<PlasticityBand> {
    plasticity_bands()
        .into_iter()
        .filter(|b| b.contains(duration_ms))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn forgetting_factor_values() {
        let tau = 37.0;
        let f = forgetting_factor_of(tau, tau * std::f64::consts::LN_2).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        // exp(-0.5) = 0.60653065971263342 (mpmath)
        assert!((forgetting_factor_of(20.0, 10.0).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
        let rl = forgetting_factor_of(20.0, 2000.0).unwrap();
        assert!((rl / 3.720_075_976_020_836e-44 - 1.0).abs() < 1e-12);
        assert!(rl < 0.5);
        assert!(forgetting_factor_of(0.0, 1.0).is_err());
        assert!(forgetting_factor_of(1.0, -1.0).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)] // literal oracle value, kept independent of std
    fn min_time_constant_values() {
        // 1/ln 2 = 1.4426950408889634 (mpmath)
        assert!((min_time_constant(1.0, 0.5).unwrap() - 1.442_695_040_888_963_4).abs() < 1e-15);
        assert!((min_time_constant(123.0, (-1.0f64).exp()).unwrap() - 123.0).abs() < 1e-12);
        // -100 / ln 0.9 = 949.1221581029903 (mpmath)
        assert!((min_time_constant(100.0, 0.9).unwrap() - 949.122_158_102_990_3).abs() < 1e-9);
        for bad in [0.0, 1.0, -0.2, 1.5] {
            assert!(min_time_constant(10.0, bad).is_err());
        }
    }

    #[test]
    fn budget_verdicts() {
        let phoneme = check_budget(&TimescaleBudget::new(10.0, 0.5, 20.0, 20.0).unwrap()).unwrap();
        assert!(phoneme.all_pass());
        let rl = check_budget(&TimescaleBudget::new(2000.0, 0.5, 20.0, 20.0).unwrap()).unwrap();
        assert!(rl.constraints.iter().all(|c| c.verdict == Verdict::Fail));
        let edge = check_budget(&TimescaleBudget::new(10.0, 0.5, 14.427, 14.427).unwrap()).unwrap();
        assert!(edge.all_pass());
        let tau_min = min_time_constant(10.0, 0.5).unwrap();
        let exact = check_budget(&TimescaleBudget::new(10.0, 0.5, tau_min, tau_min).unwrap()).unwrap();
        assert!(exact.all_pass());
        assert_eq!(exact.constraints[0].margin, 0.0);
    }

    #[test]
    fn verdict_json_shape() {
        let r = check_budget(&TimescaleBudget::new(10.0, 0.5, 20.0, 20.0).unwrap()).unwrap();
        let v = serde_json::to_value(&r.constraints[0]).unwrap();
        for key in ["constraint", "tau", "tau_min", "margin", "verdict"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["verdict"], "pass");
    }

    #[test]
    fn band_registry() {
        let bands = plasticity_bands();
        assert_eq!(bands.len(), 6);
        assert!(bands.iter().all(|b| b.timescale_low_ms < b.timescale_high_ms));
        let names = |d: f64| band_lookup(d).into_iter().map(|b| b.name).collect::<Vec<_>>();
        assert_eq!(names(5.0), vec!["Short-term plasticity"]);
        assert_eq!(names(1.8e6), vec!["Homeostatic plasticity"]);
        assert!(names(0.5).is_empty());
        assert_eq!(names(200.0), vec!["Long-term plasticity"]);
    }

    proptest! {
        #[test]
        fn check_is_dual_to_forgetting(tau in 0.1f64..1e4, t_star in 0.1f64..1e4, f in 0.01f64..0.99) {
            let b = TimescaleBudget::new(t_star, f, tau, tau).unwrap();
            let pass = check_budget(&b).unwrap().all_pass();
            prop_assert_eq!(pass, forgetting_factor_of(tau, t_star).unwrap() >= f);
        }

        #[test]
        fn bound_monotone_and_homogeneous(t_star in 0.1f64..1e4, f in 0.01f64..0.98, df in 0.001f64..0.01) {
            let base = min_time_constant(t_star, f).unwrap();
            prop_assert!(min_time_constant(t_star, f + df).unwrap() > base);
            let doubled = min_time_constant(2.0 * t_star, f).unwrap();
            prop_assert!((doubled - 2.0 * base).abs() <= 1e-12 * doubled);
        }

        #[test]
        fn verdict_monotone_in_tau(tau in 0.1f64..1e3, k in 1.0f64..10.0, t_star in 0.1f64..1e3) {
            let lo = check_budget(&TimescaleBudget::new(t_star, 0.5, tau, tau).unwrap()).unwrap();
            let hi = check_budget(&TimescaleBudget::new(t_star, 0.5, tau * k, tau * k).unwrap()).unwrap();
            if lo.all_pass() {
                prop_assert!(hi.all_pass());
            }
        }
    }
}
