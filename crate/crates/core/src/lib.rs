//! Pricing engine for a retailer that sells a new product in store with a
//! trial-and-return option, next to a familiar substitute sold online.
//!
//! Customers decide whether to visit, whether to try a misfit product, and
//! whether to return it after learning their tolerance. The engine solves
//! those choices by backward induction, prices the new product to maximize
//! retailer profit, and cross-checks every closed form against a simulated
//! replay of the game.

pub mod behavior;
pub mod error;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod render;
pub mod sweep;
pub mod verify;

pub use behavior::{solve_behavior, BehaviorProfile, ReturnRule};
pub use error::{Error, Result};
pub use model::{case_of, thresholds, CaseLabel, MarketParams, RawMarket, ReturnPolicy, Thresholds};
pub use oracle::{grid_search_optimum, simulate, SimConfig, SimResult};
pub use pricing::{
    compare_coverage, optimize, profit_at, CoverageComparison, OptimalRegime, PricingSolution,
    ProfitQuote, Regime,
};
pub use render::{render, Format, Render};
pub use sweep::{profit_curve, sweep_alpha_r, sweep_alpha_valueratio, GridSpec, ProfitCurve, RegionMap};
pub use verify::{verify, CheckStatus, VerificationReport, VerifyConfig};
