//! Parameter sweeps: optimal-regime maps over two-parameter planes and
//! profit-versus-price curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_products, CaseLabel, MarketParams, Thresholds};
use crate::pricing::{interior_maximizer, optimize, profit_at, OptimalRegime, Regime};
use crate::ReturnPolicy;

/// Margin kept from the open ends of `(0, 1)` for α and r axes.
pub const UNIT_MARGIN: f64 = 1e-3;

/// Requested range and resolution of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        GridSpec { lo, hi, steps }
    }

    /// `[UNIT_MARGIN, 1 - UNIT_MARGIN]` at the given resolution.
    pub fn unit(steps: usize) -> Self {
        GridSpec::new(UNIT_MARGIN, 1.0 - UNIT_MARGIN, steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl Axis {
    fn checked(name: &str, spec: GridSpec) -> Result<Self> {
        if spec.steps == 0 {
            return Err(Error::InvalidGrid(format!("{name}: steps must be positive")));
        }
        if !(spec.lo.is_finite() && spec.hi.is_finite()) || spec.lo > spec.hi {
            return Err(Error::InvalidGrid(format!(
                "{name}: need finite lo <= hi, got [{}, {}]",
                spec.lo, spec.hi
            )));
        }
        Ok(Axis {
            name: name.to_string(),
            lo: spec.lo,
            hi: spec.hi,
            steps: spec.steps,
        })
    }

    /// Axis over an open-unit parameter, clamped into the safe interior.
    fn unit(name: &str, spec: GridSpec) -> Result<Self> {
        if !(spec.lo < 1.0 && spec.hi > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "{name}: range [{}, {}] misses (0, 1)",
                spec.lo, spec.hi
            )));
        }
        let clamped = GridSpec {
            lo: spec.lo.clamp(UNIT_MARGIN, 1.0 - UNIT_MARGIN),
            hi: spec.hi.clamp(UNIT_MARGIN, 1.0 - UNIT_MARGIN),
            steps: spec.steps,
        };
        Self::checked(name, clamped)
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.steps == 1 {
            self.lo
        } else if i + 1 == self.steps {
            self.hi
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.steps - 1) as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.steps).map(|i| self.value(i)).collect()
    }

    /// Distance between neighbouring grid values.
    pub fn spacing(&self) -> f64 {
        if self.steps < 2 {
            0.0
        } else {
            (self.hi - self.lo) / (self.steps - 1) as f64
        }
    }
}

/// Market parameters held fixed across a map; `None` where the axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedParams {
    pub v1: Option<f64>,
    pub v2: f64,
    pub p2_bar: f64,
    pub alpha: Option<f64>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub x: f64,
    pub y: f64,
    pub regime: OptimalRegime,
    pub optimal_p1: f64,
    pub optimal_profit: f64,
}

/// Optimal regime over a 2-D grid, stored row-major with `x` fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMap {
    pub axis_x: Axis,
    pub axis_y: Axis,
    pub fixed: FixedParams,
    pub cells: Vec<RegionCell>,
}

impl RegionMap {
    pub fn cell(&self, ix: usize, iy: usize) -> &RegionCell {
        &self.cells[iy * self.axis_x.steps + ix]
    }

    pub fn count(&self, regime: OptimalRegime) -> usize {
        self.cells.iter().filter(|c| c.regime == regime).count()
    }

    /// Market parameters at a cell.
    pub fn params_at(&self, ix: usize, iy: usize) -> Result<MarketParams> {
        let c = self.cell(ix, iy);
        let f = &self.fixed;
        let pick = |name: &str, fixed: Option<f64>, x: f64, y: f64| {
            fixed.unwrap_or(if self.axis_x.name == name {
                x
            } else {
                y
            })
        };
        let (v1, alpha, r) = if self.axis_y.name == "v1_over_v2" {
            (c.y * f.v2, pick("alpha", f.alpha, c.x, c.y), f.r.unwrap_or(0.5))
        } else {
            (
                f.v1.unwrap_or(0.0),
                pick("alpha", f.alpha, c.x, c.y),
                pick("r", f.r, c.x, c.y),
            )
        };
        MarketParams::new(v1, f.v2, f.p2_bar, alpha, r)
    }
}

fn build_map(
    axis_x: Axis,
    axis_y: Axis,
    fixed: FixedParams,
    params_at: impl Fn(f64, f64) -> Result<MarketParams> + Sync,
) -> Result<RegionMap> {
    let nx = axis_x.steps;
    let n = nx * axis_y.steps;
    let cells = (0..n)
        .into_par_iter()
        .map(|k| {
            let (x, y) = (axis_x.value(k % nx), axis_y.value(k / nx));
            let sol = optimize(&params_at(x, y)?);
            Ok(RegionCell {
                x,
                y,
                regime: sol.regime,
                optimal_p1: sol.optimal_p1,
                optimal_profit: sol.optimal_profit,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegionMap {
        axis_x,
        axis_y,
        fixed,
        cells,
    })
}

/// Optimal regime over the (α, r) plane for fixed product values.
pub fn sweep_alpha_r(
    v1: f64,
    v2: f64,
    p2_bar: f64,
    alpha: GridSpec,
    r: GridSpec,
) -> Result<RegionMap> {
    validate_products(v1, v2, p2_bar)?;
    let axis_x = Axis::unit("alpha", alpha)?;
    let axis_y = Axis::unit("r", r)?;
    let fixed = FixedParams {
        v1: Some(v1),
        v2,
        p2_bar,
        alpha: None,
        r: None,
    };
    build_map(axis_x, axis_y, fixed, |a, r| {
        MarketParams::new(v1, v2, p2_bar, a, r)
    })
}

/// Optimal regime over the (α, v1/v2) plane at a high return cost.
pub fn sweep_alpha_valueratio(
    p2_bar: f64,
    v2: f64,
    r: f64,
    alpha: GridSpec,
    ratio: GridSpec,
) -> Result<RegionMap> {
    if !(0.5..1.0).contains(&r) {
        return Err(Error::WrongCase {
            expected: CaseLabel::CaseI,
            actual: CaseLabel::for_return_fraction(r),
        });
    }
    if ratio.lo <= 1.0 {
        return Err(Error::InvalidGrid(format!(
            "v1_over_v2 must stay above 1, got lower bound {}",
            ratio.lo
        )));
    }
    validate_products(ratio.lo * v2, v2, p2_bar)?;
    let axis_x = Axis::unit("alpha", alpha)?;
    let axis_y = Axis::checked("v1_over_v2", ratio)?;
    let fixed = FixedParams {
        v1: None,
        v2,
        p2_bar,
        alpha: None,
        r: Some(r),
    };
    build_map(axis_x, axis_y, fixed, |a, k| {
        MarketParams::new(k * v2, v2, p2_bar, a, r)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveSample {
    pub p1: f64,
    pub profit: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub name: String,
    pub p1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfitCurve {
    pub params: MarketParams,
    pub policy: ReturnPolicy,
    pub samples: Vec<CurveSample>,
    /// Prices where the profit regime can change, plus p1* when Π₄ has one.
    pub landmarks: Vec<Landmark>,
}

/// Landmarks that bound regimes for the case of `params`.
pub fn curve_landmarks(params: &MarketParams) -> Vec<Landmark> {
    let t = Thresholds::new(params);
    let mut out = Vec::with_capacity(4);
    let mut push = |name: &str, p1: f64| {
        out.push(Landmark {
            name: name.to_string(),
            p1,
        })
    };
    match t.case() {
        CaseLabel::CaseI => {
            push("p1_half", t.p1_half);
            push("p1_noTrial", t.p1_no_trial);
        }
        CaseLabel::CaseII => {
            push("p1_A", t.p1_a);
            push("p1_B", t.p1_b);
            push("p1_noTrial", t.p1_no_trial);
            if let Ok(star) = interior_maximizer(params) {
                push("p1_star", star);
            }
        }
    }
    out
}

/// Default price window: zero up to a quarter of `v1` past the last landmark.
pub fn default_curve_range(params: &MarketParams) -> (f64, f64) {
    let t = Thresholds::new(params);
    (0.0, t.p1_no_trial + 0.25 * params.v1())
}

/// Profit sampled at `samples` evenly spaced prices over `[lo, hi]`, with
/// every landmark in the window added as an exact sample point.
pub fn profit_curve(params: &MarketParams, lo: f64, hi: f64, samples: usize) -> Result<ProfitCurve> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidGrid(format!("need lo < hi, got [{lo}, {hi}]")));
    }
    if samples < 2 {
        return Err(Error::InvalidGrid("a curve needs at least 2 samples".into()));
    }
    let landmarks: Vec<Landmark> = curve_landmarks(params)
        .into_iter()
        .filter(|l| l.p1 >= lo && l.p1 <= hi)
        .collect();
    let mut prices: Vec<f64> = (0..samples)
        .map(|i| {
            if i + 1 == samples {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (samples - 1) as f64
            }
        })
        .chain(landmarks.iter().map(|l| l.p1))
        .collect();
    prices.sort_by(f64::total_cmp);
    prices.dedup();
    let policy = ReturnPolicy::CustomerPays;
    let samples = prices
        .into_iter()
        .map(|p1| {
            let q = profit_at(params, p1, policy);
            CurveSample {
                p1,
                profit: q.profit,
                regime: q.regime,
            }
        })
        .collect();
    Ok(ProfitCurve {
        params: *params,
        policy,
        samples,
        landmarks,
    })
}
