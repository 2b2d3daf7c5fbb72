//! Retailer profit and optimal pricing of Product 1.
//!
//! Profit is revenue: the retailer has no selling, store, salvage, or clerk
//! costs. Across prices the profit curve is piecewise: linear while every
//! misfit keeps (Π₁), a concave quadratic while some return (Π₄), linear
//! again once misfits stop trying (Π₃), and flat once nobody visits (Π̄₂).
//! The optimum therefore sits on a small set of landmark prices or at the
//! vertex of the quadratic, which is what the solvers enumerate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::behavior::{behavior_with, BehaviorProfile, ReturnRule};
use crate::error::{Error, Result};
use crate::model::{case_of, CaseLabel, MarketParams, ReturnPolicy, Thresholds};

/// Segment of the profit curve a price falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Everyone buys Product 1.
    Pi1,
    /// Nobody visits; everyone buys Product 2.
    #[serde(rename = "Pi2bar")]
    Pi2Bar,
    /// Fits buy Product 1, misfits buy Product 2 without trying.
    Pi3,
    /// Misfits try and some of them return.
    Pi4,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Pi1 => "Pi1",
            Regime::Pi2Bar => "Pi2bar",
            Regime::Pi3 => "Pi3",
            Regime::Pi4 => "Pi4",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Regime of an optimal price, with Π₄ split by corner/interior solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptimalRegime {
    Pi1,
    #[serde(rename = "Pi2bar")]
    Pi2Bar,
    Pi3,
    #[serde(rename = "Pi4C")]
    Pi4Corner,
    #[serde(rename = "Pi4I")]
    Pi4Interior,
}

impl OptimalRegime {
    pub const ALL: [OptimalRegime; 5] = [
        OptimalRegime::Pi1,
        OptimalRegime::Pi2Bar,
        OptimalRegime::Pi3,
        OptimalRegime::Pi4Corner,
        OptimalRegime::Pi4Interior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OptimalRegime::Pi1 => "Pi1",
            OptimalRegime::Pi2Bar => "Pi2bar",
            OptimalRegime::Pi3 => "Pi3",
            OptimalRegime::Pi4Corner => "Pi4C",
            OptimalRegime::Pi4Interior => "Pi4I",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.as_str() == s)
    }

    pub fn segment(self) -> Regime {
        match self {
            OptimalRegime::Pi1 => Regime::Pi1,
            OptimalRegime::Pi2Bar => Regime::Pi2Bar,
            OptimalRegime::Pi3 => Regime::Pi3,
            OptimalRegime::Pi4Corner | OptimalRegime::Pi4Interior => Regime::Pi4,
        }
    }
}

impl fmt::Display for OptimalRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitQuote {
    pub p1: f64,
    pub profit: f64,
    pub regime: Regime,
    pub component_p1_sales: f64,
    pub component_p2_sales: f64,
    pub return_cost_borne_by_retailer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingSolution {
    pub case: CaseLabel,
    pub policy: ReturnPolicy,
    pub optimal_p1: f64,
    pub optimal_profit: f64,
    pub regime: OptimalRegime,
    pub behavior: BehaviorProfile,
    /// Every feasible candidate evaluated, in ascending price order.
    pub candidates: Vec<ProfitQuote>,
    pub interior_maximizer_used: bool,
}

/// Profit at price `p1` under the given return policy.
pub fn profit_at(params: &MarketParams, p1: f64, policy: ReturnPolicy) -> ProfitQuote {
    quote_with(params, &Thresholds::for_policy(params, policy), p1, policy)
}

/// Quote priced off an explicit threshold set, so that a perturbed β̄ can be
/// pushed through the whole profit path.
pub fn quote_with(
    params: &MarketParams,
    t: &Thresholds,
    p1: f64,
    policy: ReturnPolicy,
) -> ProfitQuote {
    let b = behavior_with(params, t, p1);
    quote_from_behavior(params, &b, p1, policy)
}

fn quote_from_behavior(
    params: &MarketParams,
    b: &BehaviorProfile,
    p1: f64,
    policy: ReturnPolicy,
) -> ProfitQuote {
    let component_p1_sales = b.share_buy_p1 * p1;
    let component_p2_sales = b.share_buy_p2 * params.p2_bar();
    let return_cost_borne_by_retailer = if policy.is_covered() {
        b.return_mass * params.return_cost()
    } else {
        0.0
    };
    let regime = if !b.visits {
        Regime::Pi2Bar
    } else if !b.tries_if_misfit {
        Regime::Pi3
    } else if b.return_rule == ReturnRule::AllKeep {
        Regime::Pi1
    } else {
        Regime::Pi4
    };
    ProfitQuote {
        p1,
        profit: component_p1_sales + component_p2_sales - return_cost_borne_by_retailer,
        regime,
        component_p1_sales,
        component_p2_sales,
        return_cost_borne_by_retailer,
    }
}

/// Vertex of the Π₄ quadratic when customers face `t` and the retailer nets
/// `p2_bar` (or `p2_bar - r v1` under coverage) per returned unit.
fn pi4_vertex(params: &MarketParams, t: &Thresholds, policy: ReturnPolicy) -> f64 {
    let alpha = params.alpha();
    let v1 = params.v1();
    let p2 = params.p2_bar();
    let net_per_return = if policy.is_covered() {
        p2 - params.return_cost()
    } else {
        p2
    };
    let r_c = t.return_fraction();
    (alpha * v1 + (1.0 - alpha) * ((1.0 + r_c) * v1 - params.v2() + p2 + net_per_return))
        / (2.0 * (1.0 - alpha))
}

fn require_case(params: &MarketParams, expected: CaseLabel) -> Result<()> {
    let actual = case_of(params);
    if actual == expected {
        Ok(())
    } else {
        Err(Error::WrongCase { expected, actual })
    }
}

/// Unconstrained maximizer p₁* of Π₄ (low return cost only).
pub fn interior_maximizer(params: &MarketParams) -> Result<f64> {
    require_case(params, CaseLabel::CaseII)?;
    Ok(pi4_vertex(
        params,
        &Thresholds::new(params),
        ReturnPolicy::CustomerPays,
    ))
}

/// Δ₄ = p₁* − p₁ᴮ. Negative means the vertex of Π₄ lies inside its region.
pub fn interior_gap(params: &MarketParams) -> Result<f64> {
    let star = interior_maximizer(params)?;
    Ok(star - Thresholds::new(params).p1_b)
}

/// True when the Π₄ optimum is the interior vertex rather than the corner
/// at p₁ᴮ. An exact tie goes to the corner.
pub fn interior_vs_corner(params: &MarketParams) -> Result<bool> {
    Ok(interior_gap(params)? < 0.0)
}

/// Optimal price under a high return cost (`r >= 1/2`).
pub fn optimize_case1(params: &MarketParams) -> Result<PricingSolution> {
    require_case(params, CaseLabel::CaseI)?;
    Ok(optimize_under(params, ReturnPolicy::CustomerPays))
}

/// Optimal price under a low return cost (`r < 1/2`).
pub fn optimize_case2(params: &MarketParams) -> Result<PricingSolution> {
    require_case(params, CaseLabel::CaseII)?;
    Ok(optimize_under(params, ReturnPolicy::CustomerPays))
}

/// Optimal price with the customer paying for returns.
pub fn optimize(params: &MarketParams) -> PricingSolution {
    optimize_under(params, ReturnPolicy::CustomerPays)
}

/// Relative slack under which two candidate profits count as tied.
const PROFIT_TIE: f64 = 1e-12;

/// Optimal price for either return policy.
///
/// Candidates follow the case the customer faces: under coverage the
/// customer sees no return cost, so the low-cost candidate set applies and
/// the no-visit outcome is added since Π₄ net of covered returns can fall
/// below `p2_bar`. Ties go to the lower, trial-inducing price.
pub fn optimize_under(params: &MarketParams, policy: ReturnPolicy) -> PricingSolution {
    let t = Thresholds::for_policy(params, policy);
    let mut picks: Vec<(f64, OptimalRegime)> = Vec::with_capacity(4);
    let mut interior_maximizer_used = false;

    match t.case() {
        CaseLabel::CaseI => {
            picks.push((t.p1_half, OptimalRegime::Pi1));
            picks.push((t.p1_no_trial, OptimalRegime::Pi3));
        }
        CaseLabel::CaseII => {
            picks.push((t.p1_a, OptimalRegime::Pi1));
            let vertex = pi4_vertex(params, &t, policy);
            if vertex < t.p1_b {
                interior_maximizer_used = true;
                picks.push((vertex, OptimalRegime::Pi4Interior));
            } else {
                picks.push((t.p1_b, OptimalRegime::Pi4Corner));
            }
            if t.p1_no_trial > t.p1_b {
                picks.push((t.p1_no_trial, OptimalRegime::Pi3));
            }
        }
    }
    if policy.is_covered() {
        picks.push((t.p1_no_trial + params.v1(), OptimalRegime::Pi2Bar));
    }

    picks.retain(|(p, _)| *p > 0.0);
    picks.sort_by(|a, b| a.0.total_cmp(&b.0));

    let candidates: Vec<ProfitQuote> = picks
        .iter()
        .map(|&(p, _)| profit_at(params, p, policy))
        .collect();

    // p1_noTrial is always positive, so there is at least one candidate.
    let mut best = 0;
    for (i, q) in candidates.iter().enumerate().skip(1) {
        let incumbent = candidates[best].profit;
        if q.profit > incumbent + PROFIT_TIE * incumbent.abs().max(1.0) {
            best = i;
        }
    }

    let (optimal_p1, regime) = picks[best];
    PricingSolution {
        case: case_of(params),
        policy,
        optimal_p1,
        optimal_profit: candidates[best].profit,
        regime,
        behavior: behavior_with(params, &t, optimal_p1),
        candidates,
        interior_maximizer_used,
    }
}

/// Optimal outcomes with and without retailer-paid returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageComparison {
    pub profit_no_coverage: f64,
    pub profit_with_coverage: f64,
    pub recommend_coverage: bool,
    /// Optimal price without and with coverage.
    pub optimal_p1_each: (f64, f64),
    pub regime_each: (OptimalRegime, OptimalRegime),
    /// Covered-optimum revenue less a single flat `r v1`, the accounting
    /// that ignores the size of the returning population.
    pub flat_fee_profit_with_coverage: f64,
    /// Customer behavior at the two optima coincides.
    pub behavior_unchanged: bool,
    /// Behavior, price, and profit all coincide.
    pub neutral: bool,
}

pub fn compare_coverage(params: &MarketParams) -> CoverageComparison {
    let plain = optimize_under(params, ReturnPolicy::CustomerPays);
    let covered = optimize_under(params, ReturnPolicy::RetailerPays);

    let covered_quote = profit_at(params, covered.optimal_p1, ReturnPolicy::RetailerPays);
    let gross = covered_quote.component_p1_sales + covered_quote.component_p2_sales;
    let flat_fee_profit_with_coverage = if covered.behavior.return_mass > 0.0 {
        gross - params.return_cost()
    } else {
        gross
    };

    let behavior_unchanged = plain.behavior == covered.behavior;
    let neutral = behavior_unchanged
        && plain.optimal_p1 == covered.optimal_p1
        && (plain.optimal_profit - covered.optimal_profit).abs() <= PROFIT_TIE;

    CoverageComparison {
        profit_no_coverage: plain.optimal_profit,
        profit_with_coverage: covered.optimal_profit,
        recommend_coverage: covered.optimal_profit > plain.optimal_profit,
        optimal_p1_each: (plain.optimal_p1, covered.optimal_p1),
        regime_each: (plain.regime, covered.regime),
        flat_fee_profit_with_coverage,
        behavior_unchanged,
        neutral,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market(v1: f64, v2: f64, p2: f64, alpha: f64, r: f64) -> MarketParams {
        MarketParams::new(v1, v2, p2, alpha, r).unwrap()
    }

    fn reference() -> MarketParams {
        market(2.0, 1.0, 0.0, 0.25, 0.125)
    }

    /// Π₄ extended to all prices: γ p1 + (1 − γ) p2.
    fn pi4_extended(p: &MarketParams, p1: f64) -> f64 {
        let beta = (p1 - p.p2_bar() - p.r() * p.v1() + p.v2()) / p.v1();
        let gamma = p.alpha() + (1.0 - p.alpha()) * (1.0 - beta);
        gamma * p1 + (1.0 - gamma) * p.p2_bar()
    }

    fn grid_argmax(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        (0..=n)
            .map(|i| lo + (hi - lo) * i as f64 / n as f64)
            .map(|x| (x, f(x)))
            .fold((lo, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc })
            .0
    }

    #[test]
    fn quotes_at_reference_prices() {
        let p = reference();
        let q = profit_at(&p, 0.25, ReturnPolicy::CustomerPays);
        assert_eq!(q.regime, Regime::Pi4);
        assert!((q.profit - 0.15625).abs() < 1e-12);
        assert!((q.profit - pi4_extended(&p, 0.25)).abs() < 1e-12);

        let q = profit_at(&p, 1.0, ReturnPolicy::CustomerPays);
        assert_eq!(q.regime, Regime::Pi3);
        assert!((q.profit - 0.25).abs() < 1e-12);

        let q = profit_at(&p, 3.0, ReturnPolicy::CustomerPays);
        assert_eq!(q.regime, Regime::Pi2Bar);
        assert_eq!(q.profit, 0.0);
    }

    #[test]
    fn interior_maximizer_values() {
        let p = reference();
        let star = interior_maximizer(&p).unwrap();
        assert!((star - 0.958_333_333_333_333_4).abs() < 1e-12);
        let oracle = grid_argmax(|x| pi4_extended(&p, x), -2.0, 4.0, 6_000_000);
        assert!((star - oracle).abs() < 1e-6);

        let tiny = market(2.0, 1.0, 0.0, 1e-12, 0.125);
        assert!((interior_maximizer(&tiny).unwrap() - 0.625).abs() < 1e-9);

        let wide = market(10.0, 1.0, 0.0, 0.6, 0.4);
        let star = interior_maximizer(&wide).unwrap();
        assert!((star - 14.0).abs() < 1e-12);
        let oracle = grid_argmax(|x| pi4_extended(&wide, x), 0.0, 30.0, 3_000_000);
        assert!((star - oracle).abs() < 1e-5);

        let case1 = market(3.0, 1.0, 0.0, 0.2, 0.6);
        assert!(matches!(
            interior_maximizer(&case1),
            Err(Error::WrongCase { .. })
        ));
    }

    #[test]
    fn corner_versus_interior() {
        let p = reference();
        assert!(!interior_vs_corner(&p).unwrap());

        let small = market(10.0, 1.0, 0.0, 0.05, 0.01);
        let gap = interior_gap(&small).unwrap();
        let t = Thresholds::new(&small);
        assert_eq!(
            interior_vs_corner(&small).unwrap(),
            interior_maximizer(&small).unwrap() < t.p1_b
        );
        assert!(gap < 0.0);
        // Near the α, r → 0 limit the vertex is strictly inside.
        let limit = market(10.0, 1.0, 0.0, 1e-9, 1e-9);
        assert!(interior_gap(&limit).unwrap() < 0.0);
    }

    #[test]
    fn corner_tie_resolves_to_corner() {
        // Solve Δ₄(α) = 0 for α at v1=10, v2=1, p2=0, r=0.01 by bisection.
        let gap = |a: f64| interior_gap(&market(10.0, 1.0, 0.0, a, 0.01)).unwrap();
        let (mut lo, mut hi) = (1e-6, 0.999);
        assert!(gap(lo) < 0.0 && gap(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) < 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!(gap(hi).abs() < 1e-9);
        let p = market(10.0, 1.0, 0.0, hi, 0.01);
        assert!(!interior_vs_corner(&p).unwrap());
        let sol = optimize(&p);
        assert!(!sol.interior_maximizer_used);
    }

    #[test]
    fn case_one_optimum() {
        let sol = optimize_case1(&market(3.0, 1.0, 0.0, 0.2, 0.6)).unwrap();
        assert_eq!(sol.regime, OptimalRegime::Pi1);
        assert!((sol.optimal_p1 - 0.5).abs() < 1e-12);
        assert!((sol.optimal_profit - 0.5).abs() < 1e-12);
        assert_eq!(sol.candidates.len(), 2);
        assert!((sol.candidates[1].profit - 0.4).abs() < 1e-12);

        let sol = optimize_case1(&market(2.0, 1.0, 0.0, 0.2, 0.6)).unwrap();
        assert_eq!(sol.regime, OptimalRegime::Pi3);
        assert!((sol.optimal_p1 - 1.0).abs() < 1e-12);
        assert!((sol.optimal_profit - 0.2).abs() < 1e-12);
        assert_eq!(sol.candidates.len(), 1, "p1_half = 0 is infeasible");

        // (2 - 2α)/(1 - 2α) = 3 exactly at α = 1/4: tie goes to the trial price.
        let sol = optimize_case1(&market(3.0, 1.0, 0.0, 0.25, 0.6)).unwrap();
        assert_eq!(sol.regime, OptimalRegime::Pi1);
        assert!((sol.optimal_p1 - 0.5).abs() < 1e-12);

        assert!(optimize_case1(&reference()).is_err());
    }

    #[test]
    fn case_one_ignores_inequality_sign_flip_above_half() {
        // For α > 1/2 the ratio bound is negative, yet Π̄₃ still wins.
        let sol = optimize_case1(&market(3.0, 1.0, 0.0, 0.7, 0.6)).unwrap();
        assert_eq!(sol.regime, OptimalRegime::Pi3);
        assert!((sol.optimal_profit - 1.4).abs() < 1e-12);
    }

    #[test]
    fn case_two_optimum() {
        let sol = optimize_case2(&reference()).unwrap();
        assert_eq!(sol.regime, OptimalRegime::Pi3);
        assert!((sol.optimal_p1 - 1.0).abs() < 1e-12);
        assert!((sol.optimal_profit - 0.25).abs() < 1e-12);
        assert!(sol.candidates.iter().all(|q| q.p1 > 0.0));
        assert!(sol.candidates.iter().all(|q| q.regime != Regime::Pi1));
        let corner = sol
            .candidates
            .iter()
            .find(|q| q.regime == Regime::Pi4)
            .unwrap();
        assert!((corner.profit - 0.15625).abs() < 1e-12);

        let sol = optimize_case2(&market(10.0, 1.0, 0.0, 0.05, 0.05)).unwrap();
        assert!(matches!(
            sol.regime,
            OptimalRegime::Pi4Corner | OptimalRegime::Pi4Interior
        ));
    }

    #[test]
    fn coverage_reference_market() {
        let cmp = compare_coverage(&reference());
        assert!((cmp.profit_no_coverage - 0.25).abs() < 1e-12);
        assert!((cmp.optimal_p1_each.1 - 0.708_333_333_333_333_4).abs() < 1e-9);
        assert!((cmp.profit_with_coverage - 0.094_401_041_666_666_7).abs() < 1e-9);
        assert!(!cmp.recommend_coverage);

        // Grid oracle over the covered profit function.
        let covered = |x: f64| profit_at(&reference(), x, ReturnPolicy::RetailerPays).profit;
        let x = grid_argmax(covered, 1e-4, 3.0, 300_000);
        assert!((x - cmp.optimal_p1_each.1).abs() < 2e-5);
    }

    #[test]
    fn coverage_in_case_one_changes_behavior() {
        // Under coverage customers see no return cost and always try, so
        // the trial-and-keep price of the uncovered optimum is not reproduced.
        let cmp = compare_coverage(&market(3.0, 1.0, 0.0, 0.2, 0.6));
        assert!(!cmp.recommend_coverage);
        assert!((cmp.profit_no_coverage - 0.5).abs() < 1e-12);
        assert_eq!(cmp.profit_with_coverage, 0.0);
        assert_eq!(cmp.regime_each.1, OptimalRegime::Pi2Bar);
        assert!(!cmp.neutral);
    }

    #[test]
    fn coverage_vanishes_with_return_cost() {
        let p = market(2.0, 1.0, 0.3, 0.4, 1e-12);
        let cmp = compare_coverage(&p);
        assert!((cmp.profit_no_coverage - cmp.profit_with_coverage).abs() < 1e-9);
    }
}
