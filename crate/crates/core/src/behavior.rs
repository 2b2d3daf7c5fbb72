//! Customer decisions solved by backward induction.
//!
//! The game is played last-move-first: keep or return after observing the
//! tolerance β, then whether a misfit customer takes the trial, then whether
//! to visit the store at all. Indifferent customers visit, keep, and try.

use serde::{Deserialize, Serialize};

use crate::model::{CaseLabel, MarketParams, ReturnPolicy, Thresholds};

/// Slack granted to the visit comparison so that rounding at an exact
/// indifference point still resolves toward visiting.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Keep/return behavior of trial customers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "beta_bar")]
pub enum ReturnRule {
    AllKeep,
    AllReturn,
    /// Customers with tolerance below `beta_bar` return, the rest keep.
    ThresholdReturn(f64),
}

impl ReturnRule {
    /// Share of trial customers who end up returning.
    pub fn return_share(&self) -> f64 {
        match *self {
            ReturnRule::AllKeep => 0.0,
            ReturnRule::AllReturn => 1.0,
            ReturnRule::ThresholdReturn(b) => b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorProfile {
    pub visits: bool,
    pub tries_if_misfit: bool,
    pub return_rule: ReturnRule,
    pub share_buy_p1: f64,
    pub share_buy_p2: f64,
    /// Measure of customers who try Product 1 and send it back.
    pub return_mass: f64,
    /// Ex-ante expected utility of the chosen path.
    pub expected_utility: f64,
}

/// Keep/return decision at price `p1`.
pub fn third_choice(params: &MarketParams, p1: f64) -> ReturnRule {
    return_rule_at(&Thresholds::new(params), p1)
}

pub(crate) fn return_rule_at(t: &Thresholds, p1: f64) -> ReturnRule {
    let beta_bar = t.beta_bar(p1);
    if p1 <= t.p1_a || beta_bar <= 0.0 {
        ReturnRule::AllKeep
    } else if p1 >= t.p1_all_return || beta_bar >= 1.0 {
        ReturnRule::AllReturn
    } else {
        ReturnRule::ThresholdReturn(beta_bar)
    }
}

/// Expected utility of taking the trial, before β is revealed.
pub fn expected_trial_utility(params: &MarketParams, p1: f64) -> f64 {
    trial_utility_at(params, &Thresholds::new(params), p1)
}

pub(crate) fn trial_utility_at(params: &MarketParams, t: &Thresholds, p1: f64) -> f64 {
    let v1 = params.v1();
    let returned = params.outside_utility() - t.return_fraction() * v1;
    match return_rule_at(t, p1) {
        ReturnRule::AllKeep => 0.5 * v1 - p1,
        ReturnRule::AllReturn => returned,
        ReturnRule::ThresholdReturn(beta_bar) => {
            let beta_tilde = 0.5 * (1.0 + beta_bar);
            (1.0 - beta_bar) * (beta_tilde * v1 - p1) + beta_bar * returned
        }
    }
}

/// Whether a misfit customer takes the trial at price `p1`.
pub fn second_choice(params: &MarketParams, p1: f64) -> bool {
    tries_at(&Thresholds::new(params), p1)
}

pub(crate) fn tries_at(t: &Thresholds, p1: f64) -> bool {
    match t.case() {
        CaseLabel::CaseI => p1 <= t.p1_half,
        CaseLabel::CaseII => p1 <= t.p1_b,
    }
}

/// Whether customers visit the store, given the (already solved) trial
/// decision of a misfit customer.
pub fn first_choice(params: &MarketParams, p1: f64, tries_if_misfit: bool) -> bool {
    visits_at(params, &Thresholds::new(params), p1, tries_if_misfit)
}

pub(crate) fn visits_at(params: &MarketParams, t: &Thresholds, p1: f64, tries: bool) -> bool {
    let alpha = params.alpha();
    let outside = params.outside_utility();
    // v1 - p1 - (v2 - p2_bar) written against the landmark so the no-trial
    // boundary is an exact zero.
    let fit_gain = t.p1_no_trial - p1;
    let misfit_gain = if tries {
        trial_utility_at(params, t, p1) - outside
    } else {
        0.0
    };
    let gain = alpha * fit_gain + (1.0 - alpha) * misfit_gain;
    gain >= -TIE_TOLERANCE * params.v1().max(1.0)
}

/// Full backward-induction solution at price `p1`.
pub fn solve_behavior(params: &MarketParams, p1: f64) -> BehaviorProfile {
    behavior_with(params, &Thresholds::new(params), p1)
}

/// Behavior when customers face the return cost implied by `policy`.
pub fn solve_behavior_under(params: &MarketParams, p1: f64, policy: ReturnPolicy) -> BehaviorProfile {
    behavior_with(params, &Thresholds::for_policy(params, policy), p1)
}

pub(crate) fn behavior_with(params: &MarketParams, t: &Thresholds, p1: f64) -> BehaviorProfile {
    let alpha = params.alpha();
    let return_rule = return_rule_at(t, p1);
    let tries_if_misfit = tries_at(t, p1);
    let visits = visits_at(params, t, p1, tries_if_misfit);
    let outside = params.outside_utility();

    let (share_buy_p1, share_buy_p2, return_mass, expected_utility) = if !visits {
        (0.0, 1.0, 0.0, outside)
    } else if !tries_if_misfit {
        let eu = alpha * (params.v1() - p1) + (1.0 - alpha) * outside;
        (alpha, 1.0 - alpha, 0.0, eu)
    } else {
        let beta_c = t.beta_bar(p1).clamp(0.0, 1.0);
        let returned = (1.0 - alpha) * beta_c;
        let eu = alpha * (params.v1() - p1) + (1.0 - alpha) * trial_utility_at(params, t, p1);
        (1.0 - returned, returned, returned, eu)
    };

    BehaviorProfile {
        visits,
        tries_if_misfit,
        return_rule,
        share_buy_p1,
        share_buy_p2,
        return_mass,
        expected_utility,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::thresholds;

    fn market(v1: f64, v2: f64, p2: f64, alpha: f64, r: f64) -> MarketParams {
        MarketParams::new(v1, v2, p2, alpha, r).unwrap()
    }

    fn reference() -> MarketParams {
        market(2.0, 1.0, 0.0, 0.25, 0.125)
    }

    /// Midpoint quadrature of the realized trial payoff, keeping on ties.
    fn quadrature_trial_utility(p: &MarketParams, p1: f64, n: usize) -> f64 {
        let ret = p.v2() - p.p2_bar() - p.r() * p.v1();
        let h = 1.0 / n as f64;
        (0..n)
            .map(|i| {
                let beta = (i as f64 + 0.5) * h;
                let keep = beta * p.v1() - p1;
                if keep >= ret {
                    keep
                } else {
                    ret
                }
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn return_rule_regimes() {
        let p = reference();
        match third_choice(&p, 0.25) {
            ReturnRule::ThresholdReturn(b) => assert!((b - 0.5).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(third_choice(&p, -0.75), ReturnRule::AllKeep);
        assert_eq!(third_choice(&p, 1.25), ReturnRule::AllReturn);
    }

    #[test]
    fn threshold_is_payoff_indifference() {
        // Independent check: bisection on keep - return payoff.
        let p = reference();
        let p1 = 0.25;
        let diff = |b: f64| (b * p.v1() - p1) - (p.v2() - p.p2_bar() - p.r() * p.v1());
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if diff(mid) >= 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((hi - thresholds(&p).beta_bar(p1)).abs() < 1e-12);
    }

    #[test]
    fn trial_utility_matches_quadrature() {
        let p = reference();
        let at_b = expected_trial_utility(&p, 0.25);
        assert!((at_b - 1.0).abs() < 1e-12);
        assert!((quadrature_trial_utility(&p, 0.25, 1_000_000) - 1.0).abs() < 1e-9);

        // β̄ = 0.675 at p1 = 0.6; both routes give 0.855625.
        let mid = expected_trial_utility(&p, 0.6);
        let q = quadrature_trial_utility(&p, 0.6, 1_000_000);
        assert!((mid - q).abs() < 1e-9, "{mid} vs {q}");
        assert!((mid - 0.855625).abs() < 1e-12);

        let t = thresholds(&p);
        assert_eq!(expected_trial_utility(&p, t.p1_a), 0.5 * p.v1() - t.p1_a);
    }

    #[test]
    fn trial_decision_boundaries() {
        let case1 = market(3.0, 1.0, 0.0, 0.2, 0.6);
        assert!(second_choice(&case1, 0.5));
        assert!(!second_choice(&case1, 0.5 + 1e-9));

        let case2 = reference();
        assert!(!second_choice(&case2, 0.3));
        assert!(second_choice(&case2, 0.2));
        // Independent confirmation of the sign of Δ.
        assert!(quadrature_trial_utility(&case2, 0.3, 200_000) < case2.outside_utility());
        assert!(quadrature_trial_utility(&case2, 0.2, 200_000) > case2.outside_utility());
    }

    #[test]
    fn visit_decision() {
        let p = reference();
        assert!(first_choice(&p, 1.0, false));
        assert!(!first_choice(&p, 1.01, false));
        assert!(first_choice(&p, 0.2, true));
        // Direct evaluation of both branches at p1 = 0.2.
        let visit = 0.25 * (2.0 - 0.2) + 0.75 * quadrature_trial_utility(&p, 0.2, 200_000);
        assert!(visit > p.outside_utility());
    }

    #[test]
    fn composed_profiles() {
        let p = reference();
        let b = solve_behavior(&p, 0.25);
        assert!(b.visits && b.tries_if_misfit);
        assert!((b.share_buy_p1 - 0.625).abs() < 1e-12);
        assert!((b.share_buy_p2 - 0.375).abs() < 1e-12);
        assert!((b.return_mass - 0.375).abs() < 1e-12);

        let b = solve_behavior(&p, 1.0);
        assert!(b.visits && !b.tries_if_misfit);
        assert_eq!((b.share_buy_p1, b.share_buy_p2), (0.25, 0.75));
        assert_eq!(b.return_mass, 0.0);

        let b = solve_behavior(&p, 2.0);
        assert!(!b.visits);
        assert_eq!((b.share_buy_p1, b.share_buy_p2), (0.0, 1.0));
    }

    #[test]
    fn case_one_boundary_at_half_routes_through_case_one() {
        let p = market(3.0, 1.0, 0.0, 0.3, 0.5);
        let t = thresholds(&p);
        assert!((t.p1_half - t.p1_b).abs() < 1e-12);
        assert!(second_choice(&p, t.p1_half));
        let b = solve_behavior(&p, t.p1_half);
        assert_eq!(b.return_rule, ReturnRule::AllKeep);
        assert_eq!(b.share_buy_p1, 1.0);
    }

    #[test]
    fn covered_customers_always_try_below_no_trial() {
        let p = reference();
        let b = solve_behavior_under(&p, 1.0, ReturnPolicy::RetailerPays);
        assert!(b.visits && b.tries_if_misfit);
        assert_eq!(b.return_rule, ReturnRule::AllReturn);
        assert!((b.return_mass - 0.75).abs() < 1e-12);
        let b = solve_behavior_under(&p, 1.0 + 1e-9, ReturnPolicy::RetailerPays);
        assert!(!b.visits);
    }
}
