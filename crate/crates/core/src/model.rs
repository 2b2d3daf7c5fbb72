//! Market primitives and the price landmarks derived from them.
//!
//! Every quantity downstream is expressed in utility units: the price of a
//! product is paid out of the same scale as its innate value.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated market tuple, as read from flags or a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMarket {
    pub v1: f64,
    pub v2: f64,
    pub p2_bar: f64,
    pub alpha: f64,
    pub r: f64,
}

/// A validated market instance.
///
/// * `v1 > v2 > 0`
/// * `0 <= p2_bar <= v2`, so buying Product 2 online is always acceptable
/// * `0 < alpha < 1` (fit probability)
/// * `0 < r < 1` (return cost is `r * v1`)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarket", into = "RawMarket")]
pub struct MarketParams {
    v1: f64,
    v2: f64,
    p2_bar: f64,
    alpha: f64,
    r: f64,
}

impl MarketParams {
    pub fn new(v1: f64, v2: f64, p2_bar: f64, alpha: f64, r: f64) -> Result<Self> {
        validate(RawMarket {
            v1,
            v2,
            p2_bar,
            alpha,
            r,
        })
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn v2(&self) -> f64 {
        self.v2
    }

    pub fn p2_bar(&self) -> f64 {
        self.p2_bar
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Utility of skipping the store and buying Product 2 online.
    pub fn outside_utility(&self) -> f64 {
        self.v2 - self.p2_bar
    }

    /// Return cost `r * v1` paid by whoever bears it.
    pub fn return_cost(&self) -> f64 {
        self.r * self.v1
    }

    pub fn raw(&self) -> RawMarket {
        RawMarket {
            v1: self.v1,
            v2: self.v2,
            p2_bar: self.p2_bar,
            alpha: self.alpha,
            r: self.r,
        }
    }
}

impl TryFrom<RawMarket> for MarketParams {
    type Error = Error;

    fn try_from(raw: RawMarket) -> Result<Self> {
        validate(raw)
    }
}

impl From<MarketParams> for RawMarket {
    fn from(p: MarketParams) -> Self {
        p.raw()
    }
}

fn finite(field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            field,
            value,
            bound: "must be finite",
        })
    }
}

fn open_unit(field: &'static str, value: f64) -> Result<()> {
    finite(field, value)?;
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            field,
            value,
            bound: "must lie in the open interval (0, 1)",
        })
    }
}

/// Checks the product values and the outside price on their own.
///
/// Used by sweeps where `alpha` and `r` vary over a grid.
pub fn validate_products(v1: f64, v2: f64, p2_bar: f64) -> Result<()> {
    finite("v1", v1)?;
    finite("v2", v2)?;
    finite("p2_bar", p2_bar)?;
    if v2 <= 0.0 {
        return Err(Error::OutOfRange {
            field: "v2",
            value: v2,
            bound: "must be positive",
        });
    }
    if v1 <= v2 {
        return Err(Error::OrderingViolation { v1, v2 });
    }
    if p2_bar < 0.0 || p2_bar > v2 {
        return Err(Error::OutOfRange {
            field: "p2_bar",
            value: p2_bar,
            bound: "must satisfy 0 <= p2_bar <= v2",
        });
    }
    Ok(())
}

pub fn validate(raw: RawMarket) -> Result<MarketParams> {
    validate_products(raw.v1, raw.v2, raw.p2_bar)?;
    open_unit("alpha", raw.alpha)?;
    open_unit("r", raw.r)?;
    Ok(MarketParams {
        v1: raw.v1,
        v2: raw.v2,
        p2_bar: raw.p2_bar,
        alpha: raw.alpha,
        r: raw.r,
    })
}

/// High (`r >= 1/2`) versus low (`r < 1/2`) return cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CaseLabel {
    CaseI,
    CaseII,
}

impl CaseLabel {
    pub fn for_return_fraction(r: f64) -> Self {
        if r >= 0.5 {
            CaseLabel::CaseI
        } else {
            CaseLabel::CaseII
        }
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseLabel::CaseI => f.write_str("Case I (r >= 1/2)"),
            CaseLabel::CaseII => f.write_str("Case II (r < 1/2)"),
        }
    }
}

pub fn case_of(params: &MarketParams) -> CaseLabel {
    CaseLabel::for_return_fraction(params.r)
}

/// Who pays the return cost when a tried product comes back.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnPolicy {
    #[default]
    CustomerPays,
    /// The retailer covers `r * v1` per returned unit; customers face no return cost.
    RetailerPays,
}

impl ReturnPolicy {
    pub fn from_coverage(coverage: bool) -> Self {
        if coverage {
            ReturnPolicy::RetailerPays
        } else {
            ReturnPolicy::CustomerPays
        }
    }

    pub fn is_covered(self) -> bool {
        self == ReturnPolicy::RetailerPays
    }

    /// Return-cost fraction as perceived by the customer.
    pub fn customer_return_fraction(self, params: &MarketParams) -> f64 {
        match self {
            ReturnPolicy::CustomerPays => params.r,
            ReturnPolicy::RetailerPays => 0.0,
        }
    }
}

/// Price landmarks at which customer behavior changes, plus the return
/// threshold evaluator.
///
/// Landmarks are reported even when negative; the pricing layer filters
/// infeasible ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    v1: f64,
    /// Return-cost fraction the customer faces.
    r: f64,
    /// `r v1 - v2 + p2_bar`: at or below, every trial customer keeps.
    pub p1_a: f64,
    /// `(1 + r - sqrt(2r)) v1 - v2 + p2_bar`: trial indifference when `r < 1/2`.
    pub p1_b: f64,
    /// `v1/2 - v2 + p2_bar`: trial indifference when `r >= 1/2`.
    pub p1_half: f64,
    /// `v1 - v2 + p2_bar`: visit indifference without trial.
    pub p1_no_trial: f64,
    /// `(1 + r) v1 - v2 + p2_bar`: at or above, every trial customer returns.
    pub p1_all_return: f64,
    #[serde(skip)]
    beta_shift: f64,
}

impl Thresholds {
    pub fn new(params: &MarketParams) -> Self {
        Self::with_return_fraction(params, params.r)
    }

    /// Landmarks as seen by customers under the given return policy.
    pub fn for_policy(params: &MarketParams, policy: ReturnPolicy) -> Self {
        Self::with_return_fraction(params, policy.customer_return_fraction(params))
    }

    fn with_return_fraction(params: &MarketParams, r: f64) -> Self {
        let MarketParams { v1, v2, p2_bar, .. } = *params;
        Thresholds {
            v1,
            r,
            p1_a: r * v1 - v2 + p2_bar,
            p1_b: (1.0 + r - (2.0 * r).sqrt()) * v1 - v2 + p2_bar,
            p1_half: 0.5 * v1 - v2 + p2_bar,
            p1_no_trial: v1 - v2 + p2_bar,
            p1_all_return: (1.0 + r) * v1 - v2 + p2_bar,
            beta_shift: 0.0,
        }
    }

    /// Offsets every β̄ evaluation by `shift`. Diagnostic hook for checking
    /// that the verification suite notices a corrupted threshold.
    pub fn with_beta_shift(mut self, shift: f64) -> Self {
        self.beta_shift = shift;
        self
    }

    /// Return threshold β̄ at price `p1`: trial customers with tolerance
    /// below it return the product. Affine in `p1` with slope `1 / v1`.
    pub fn beta_bar(&self, p1: f64) -> f64 {
        (p1 - self.p1_a) / self.v1 + self.beta_shift
    }

    /// Mean tolerance of the customers who keep, `(1 + β̄) / 2`.
    pub fn beta_tilde(&self, p1: f64) -> f64 {
        0.5 * (1.0 + self.beta_bar(p1))
    }

    pub fn return_fraction(&self) -> f64 {
        self.r
    }

    pub fn case(&self) -> CaseLabel {
        CaseLabel::for_return_fraction(self.r)
    }

    /// All five landmarks with their names, in declaration order.
    pub fn landmarks(&self) -> [(&'static str, f64); 5] {
        [
            ("p1_A", self.p1_a),
            ("p1_B", self.p1_b),
            ("p1_half", self.p1_half),
            ("p1_noTrial", self.p1_no_trial),
            ("p1_allReturn", self.p1_all_return),
        ]
    }
}

pub fn thresholds(params: &MarketParams) -> Thresholds {
    Thresholds::new(params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_market(alpha: f64, r: f64) -> MarketParams {
        MarketParams::new(2.0, 1.0, 0.0, alpha, r).unwrap()
    }

    #[test]
    fn accepts_reference_market() {
        assert!(MarketParams::new(2.0, 1.0, 0.0, 0.25, 0.125).is_ok());
    }

    #[test]
    fn rejects_equal_values() {
        let err = MarketParams::new(1.0, 1.0, 0.0, 0.25, 0.125).unwrap_err();
        assert!(matches!(err, Error::OrderingViolation { .. }));
        assert_eq!(err.to_string(), "v1 must exceed v2 (v1 = 1, v2 = 1)");
    }

    #[test]
    fn rejects_closed_bounds() {
        let err = MarketParams::new(2.0, 1.0, 0.0, 1.0, 0.125).unwrap_err();
        assert_eq!(err.field(), Some("alpha"));
        let err = MarketParams::new(2.0, 1.0, 0.0, 0.5, 0.0).unwrap_err();
        assert_eq!(err.field(), Some("r"));
        let err = MarketParams::new(2.0, 1.0, 1.5, 0.5, 0.3).unwrap_err();
        assert_eq!(err.field(), Some("p2_bar"));
        let err = MarketParams::new(2.0, 0.0, 0.0, 0.5, 0.3).unwrap_err();
        assert_eq!(err.field(), Some("v2"));
        let err = MarketParams::new(f64::NAN, 1.0, 0.0, 0.5, 0.3).unwrap_err();
        assert_eq!(err.field(), Some("v1"));
    }

    #[test]
    fn deserializing_validates() {
        let ok: MarketParams =
            serde_json::from_str(r#"{"v1":2,"v2":1,"p2_bar":0,"alpha":0.25,"r":0.125}"#).unwrap();
        assert_eq!(ok.alpha(), 0.25);
        let bad = serde_json::from_str::<MarketParams>(
            r#"{"v1":2,"v2":1,"p2_bar":0,"alpha":0.25,"r":1.5}"#,
        );
        assert!(bad.is_err());
    }

    #[test]
    fn case_boundary_is_closed_at_half() {
        assert_eq!(case_of(&base_market(0.3, 0.5)), CaseLabel::CaseI);
        assert_eq!(case_of(&base_market(0.3, 0.125)), CaseLabel::CaseII);
        assert_eq!(case_of(&base_market(0.3, 0.499999)), CaseLabel::CaseII);
    }

    #[test]
    fn reference_landmarks() {
        let t = thresholds(&base_market(0.25, 0.125));
        assert!((t.p1_a - -0.75).abs() < 1e-12);
        assert!((t.p1_b - 0.25).abs() < 1e-12);
        assert!((t.p1_no_trial - 1.0).abs() < 1e-12);
        assert!((t.p1_all_return - 1.25).abs() < 1e-12);
        assert_eq!(t.beta_bar(t.p1_a), 0.0);
        assert!((t.beta_bar(t.p1_b) - 0.5).abs() < 1e-12);
        assert!((t.beta_bar(t.p1_b) - (1.0 - 0.25f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn covered_landmarks_collapse() {
        let p = base_market(0.25, 0.125);
        let t = Thresholds::for_policy(&p, ReturnPolicy::RetailerPays);
        assert_eq!(t.return_fraction(), 0.0);
        assert_eq!(t.case(), CaseLabel::CaseII);
        assert_eq!(t.p1_b, t.p1_no_trial);
        assert_eq!(t.p1_all_return, t.p1_no_trial);
    }
}
