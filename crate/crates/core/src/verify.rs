//! Oracle-versus-closed-form suite behind the `verify` command.

use serde::{Deserialize, Serialize};

use crate::behavior::{behavior_with, return_rule_at, trial_utility_at, ReturnRule};
use crate::error::{Error, Result};
use crate::model::{MarketParams, ReturnPolicy, Thresholds};
use crate::oracle::{grid_search_optimum, replay, simulate, Estimate, GameTree, SimConfig};
use crate::pricing::{optimize, quote_with};
use crate::render::fmt_num;

/// Agreement demanded between two exact computations.
const EXACT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub sim: SimConfig,
    /// Width of Monte Carlo acceptance bands, in standard errors.
    pub sigma: f64,
    /// A sampled check whose band is wider than this (scaled by `v1` for
    /// money) is reported inconclusive instead of pass or fail.
    pub ci_halfwidth_limit: f64,
    /// Added to β̄ on the closed-form side only. Zero outside fault drills.
    pub beta_bar_fault: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            sim: SimConfig::default(),
            sigma: 3.0,
            ci_halfwidth_limit: 0.01,
            beta_bar_fault: 0.0,
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        self.sim.validate()?;
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.ci_halfwidth_limit.is_finite() && self.ci_halfwidth_limit > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "ci_halfwidth_limit must be positive, got {}",
                self.ci_halfwidth_limit
            )));
        }
        if !self.beta_bar_fault.is_finite() {
            return Err(Error::InvalidConfig("beta_bar_fault must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub observed: f64,
    pub expected: f64,
    /// Allowed absolute deviation.
    pub tolerance: f64,
}

impl Check {
    fn exact(name: String, observed: f64, expected: f64, tolerance: f64) -> Self {
        let status = if (observed - expected).abs() <= tolerance {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Check { name, status, observed, expected, tolerance }
    }

    fn sampled(name: String, est: Estimate, expected: f64, sigma: f64, limit: f64) -> Self {
        let band = sigma * est.std_error;
        let status = if band > limit {
            CheckStatus::Inconclusive
        } else if est.covers(expected, sigma) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Check {
            name,
            status,
            observed: est.mean,
            expected,
            tolerance: band,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub market: MarketParams,
    pub config: VerifyConfig,
    pub probe_prices: Vec<f64>,
    pub checks: Vec<Check>,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    /// True iff no check failed. Inconclusive checks do not count against it.
    pub all_passed: bool,
}

/// Prices at which the closed form is replayed: the optimum, each positive
/// landmark, a point inside every behavior band, and one price above the
/// no-visit cutoff.
pub fn probe_prices(params: &MarketParams) -> Vec<f64> {
    let t = Thresholds::new(params);
    let mut out = vec![optimize(params).optimal_p1];
    let marks: Vec<f64> = t.landmarks().iter().map(|&(_, p)| p).collect();
    out.extend(marks.iter().copied());
    let mut sorted = marks;
    sorted.push(0.0);
    sorted.sort_by(f64::total_cmp);
    out.extend(sorted.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    out.push(t.p1_no_trial + 0.1 * params.v1());
    out.retain(|&p| p > 0.0);
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    out
}

pub fn verify(params: &MarketParams, config: &VerifyConfig) -> Result<VerificationReport> {
    config.validate()?;
    let policy = ReturnPolicy::CustomerPays;
    let v1 = params.v1();
    let faulty = Thresholds::new(params).with_beta_shift(config.beta_bar_fault);
    let probes = probe_prices(params);
    let limit = config.ci_halfwidth_limit;
    let money_tol = EXACT_TOL * v1.max(1.0);
    let mut checks = Vec::new();

    for &p1 in &probes {
        let at = fmt_num(p1);
        let closed = behavior_with(params, &faulty, p1);
        let quote = quote_with(params, &faulty, p1, policy);

        let exact = replay(params, p1, &config.sim, policy)?;
        checks.push(Check::exact(format!("replay_share_p1@{at}"), exact.share_p1, closed.share_buy_p1, EXACT_TOL));
        checks.push(Check::exact(format!("replay_return_mass@{at}"), exact.return_mass, closed.return_mass, EXACT_TOL));
        checks.push(Check::exact(format!("replay_profit@{at}"), exact.profit, quote.profit, money_tol));

        let mc = simulate(params, p1, &config.sim, policy)?;
        checks.push(Check::sampled(format!("mc_share_p1@{at}"), mc.est_share_p1, closed.share_buy_p1, config.sigma, limit));
        checks.push(Check::sampled(format!("mc_share_p2@{at}"), mc.est_share_p2, closed.share_buy_p2, config.sigma, limit));
        checks.push(Check::sampled(format!("mc_return_mass@{at}"), mc.est_return_mass, closed.return_mass, config.sigma, limit));
        checks.push(Check::sampled(format!("mc_profit@{at}"), mc.est_profit, quote.profit, config.sigma, limit * v1));

        if matches!(return_rule_at(&faulty, p1), ReturnRule::ThresholdReturn(_)) {
            let tree = GameTree::new(params, p1, policy);
            checks.push(Check::exact(
                format!("trial_utility_quadrature@{at}"),
                tree.trial_value(config.sim.quadrature_points),
                trial_utility_at(params, &faulty, p1),
                EXACT_TOL * v1.max(1.0),
            ));
        }
    }

    let solution = optimize(params);
    let grid = grid_search_optimum(params, &config.sim, policy)?;
    checks.push(Check::exact(
        "optimum_price".into(),
        grid.price,
        solution.optimal_p1,
        config.sim.price_grid_step * (1.0 + 1e-9),
    ));
    checks.push(Check::exact("optimum_profit".into(), grid.profit, solution.optimal_profit, 1e-6));

    let count = |s: CheckStatus| checks.iter().filter(|c| c.status == s).count();
    let (passed, failed, inconclusive) = (
        count(CheckStatus::Pass),
        count(CheckStatus::Fail),
        count(CheckStatus::Inconclusive),
    );
    Ok(VerificationReport {
        market: *params,
        config: *config,
        probe_prices: probes,
        passed,
        failed,
        inconclusive,
        all_passed: failed == 0,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> MarketParams {
        MarketParams::new(2.0, 1.0, 0.0, 0.25, 0.125).unwrap()
    }

    fn light() -> VerifyConfig {
        VerifyConfig {
            sim: SimConfig {
                n_customers: 200_000,
                price_grid_step: 1e-3,
                ..SimConfig::default()
            },
            ..VerifyConfig::default()
        }
    }

    #[test]
    fn probes_cover_every_band() {
        let p = probe_prices(&reference());
        assert!(p.iter().all(|&x| x > 0.0));
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        // threshold band, corner, no-trial band, no-visit band
        assert!(p.iter().any(|&x| x > 0.0 && x < 0.25));
        assert!(p.contains(&0.25));
        assert!(p.iter().any(|&x| x > 1.0));
    }

    #[test]
    fn reference_market_passes() {
        let report = verify(&reference(), &light()).unwrap();
        let bad: Vec<_> = report.checks.iter().filter(|c| c.status == CheckStatus::Fail).collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert!(report.all_passed);
        assert_eq!(report.passed + report.failed + report.inconclusive, report.checks.len());
        assert!(report.checks.iter().any(|c| c.name.starts_with("trial_utility_quadrature")));
    }

    #[test]
    fn beta_fault_breaks_profit() {
        let cfg = VerifyConfig { beta_bar_fault: 1e-3, ..light() };
        let report = verify(&reference(), &cfg).unwrap();
        assert!(!report.all_passed);
        assert!(report
            .checks
            .iter()
            .any(|c| c.name.starts_with("replay_profit") && c.status == CheckStatus::Fail));
    }

    #[test]
    fn tiny_sample_is_inconclusive_not_failed() {
        let cfg = VerifyConfig {
            sim: SimConfig { n_customers: 100, ..light().sim },
            ..light()
        };
        let report = verify(&reference(), &cfg).unwrap();
        assert!(report.inconclusive > 0);
        assert!(report.all_passed);
    }

    #[test]
    fn bad_config() {
        let cfg = VerifyConfig { sigma: 0.0, ..VerifyConfig::default() };
        assert!(matches!(verify(&reference(), &cfg), Err(Error::InvalidConfig(_))));
    }
}
