//! Independent replay of the customer game.
//!
//! Nothing here calls into the closed-form behavior or threshold code. The
//! decision tree is rebuilt from raw payoffs: lookaheads over the unknown
//! tolerance β are taken by quadrature, each synthetic customer is then
//! resolved by direct utility comparisons. The price grid search is the
//! one exception: it scans the analytic profit function to check that the
//! candidate enumeration of the solvers misses nothing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MarketParams, ReturnPolicy, Thresholds};
use crate::pricing::profit_at;

/// Customers simulated per random stream.
const CHUNK: u64 = 1 << 14;

/// Slack on lookahead comparisons; covers quadrature rounding at exact
/// indifference points.
const ORACLE_TIE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_customers: u64,
    pub seed: u64,
    /// Spacing of the price grid, in price units.
    pub price_grid_step: f64,
    /// Panels used for expected-utility quadrature over β.
    pub quadrature_points: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_customers: 1_000_000,
            seed: 42,
            price_grid_step: 1e-4,
            quadrature_points: 10_000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_customers < 1 {
            return Err(Error::InvalidConfig("n_customers must be at least 1".into()));
        }
        if !(self.price_grid_step.is_finite() && self.price_grid_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "price_grid_step must be positive, got {}",
                self.price_grid_step
            )));
        }
        if self.quadrature_points < 100 {
            return Err(Error::InvalidConfig(format!(
                "quadrature_points must be at least 100, got {}",
                self.quadrature_points
            )));
        }
        Ok(())
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    /// A zero-variance estimate demands agreement to rounding.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        let half_width = (k * self.std_error).max(1e-12 * value.abs().max(1.0));
        (self.mean - value).abs() <= half_width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub est_share_p1: Estimate,
    pub est_share_p2: Estimate,
    pub est_return_mass: Estimate,
    pub est_profit: Estimate,
    pub n: u64,
    pub seed: u64,
}

/// Exact expectation of the replayed game, without sampling noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplayOutcome {
    pub visits: bool,
    pub tries_if_misfit: bool,
    /// Expected utility of trying, by quadrature.
    pub trial_value: f64,
    /// Measure of tolerances for which a trial customer keeps.
    pub keep_measure: f64,
    pub share_p1: f64,
    pub share_p2: f64,
    pub return_mass: f64,
    pub profit: f64,
}

/// The game tree at one price, with payoffs built from raw primitives.
#[derive(Debug, Clone, Copy)]
pub struct GameTree {
    v1: f64,
    p1: f64,
    p2_bar: f64,
    alpha: f64,
    outside: f64,
    /// Utility after returning: Product 2 bought, return cost paid.
    returned: f64,
    retailer_cost_per_return: f64,
}

impl GameTree {
    pub fn new(params: &MarketParams, p1: f64, policy: ReturnPolicy) -> Self {
        let outside = params.v2() - params.p2_bar();
        let (customer_cost, retailer_cost) = match policy {
            ReturnPolicy::CustomerPays => (params.r() * params.v1(), 0.0),
            ReturnPolicy::RetailerPays => (0.0, params.r() * params.v1()),
        };
        GameTree {
            v1: params.v1(),
            p1,
            p2_bar: params.p2_bar(),
            alpha: params.alpha(),
            outside,
            returned: outside - customer_cost,
            retailer_cost_per_return: retailer_cost,
        }
    }

    fn keep_payoff(&self, beta: f64) -> f64 {
        beta * self.v1 - self.p1
    }

    /// Keep/return at tolerance `beta`; indifferent customers keep.
    pub fn keeps(&self, beta: f64) -> bool {
        self.keep_payoff(beta) >= self.returned
    }

    fn branch_payoff(&self, beta: f64, keep: bool) -> f64 {
        if keep {
            self.keep_payoff(beta)
        } else {
            self.returned
        }
    }

    /// Composite Simpson over `[0, 1]` of `g(β, keep(β))`. A panel whose
    /// endpoints disagree on keep/return is split at the switch point,
    /// located by bisection, and each side integrates its own branch.
    fn integrate(&self, panels: usize, g: impl Fn(f64, bool) -> f64) -> f64 {
        let h = 1.0 / panels as f64;
        let simpson = |lo: f64, hi: f64, keep: bool| {
            (hi - lo) / 6.0 * (g(lo, keep) + 4.0 * g(0.5 * (lo + hi), keep) + g(hi, keep))
        };
        let mut total = 0.0;
        for i in 0..panels {
            let a = i as f64 * h;
            let b = if i + 1 == panels { 1.0 } else { (i + 1) as f64 * h };
            let (ka, kb) = (self.keeps(a), self.keeps(b));
            if ka == kb {
                total += simpson(a, b, ka);
            } else {
                let (mut lo, mut hi) = (a, b);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if self.keeps(mid) == ka {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                total += simpson(a, hi, ka) + simpson(hi, b, kb);
            }
        }
        total
    }

    /// Expected utility of taking the trial, before β is known.
    pub fn trial_value(&self, panels: usize) -> f64 {
        self.integrate(panels, |beta, keep| self.branch_payoff(beta, keep))
    }

    pub fn keep_measure(&self, panels: usize) -> f64 {
        self.integrate(panels, |_, keep| if keep { 1.0 } else { 0.0 })
    }

    fn tie(&self) -> f64 {
        ORACLE_TIE * self.v1.max(1.0)
    }

    /// Try and visit decisions from the quadrature lookaheads.
    pub fn decisions(&self, panels: usize) -> (bool, bool, f64) {
        let trial_value = self.trial_value(panels);
        let tries = trial_value >= self.outside - self.tie();
        let misfit_value = if tries { trial_value } else { self.outside };
        let visit_value = self.alpha * (self.v1 - self.p1) + (1.0 - self.alpha) * misfit_value;
        let visits = visit_value >= self.outside - self.tie();
        (visits, tries, trial_value)
    }

    pub fn expected_outcome(&self, panels: usize) -> ReplayOutcome {
        let (visits, tries, trial_value) = self.decisions(panels);
        let keep_measure = self.keep_measure(panels);
        let (share_p1, return_mass) = match (visits, tries) {
            (false, _) => (0.0, 0.0),
            (true, false) => (self.alpha, 0.0),
            (true, true) => (
                self.alpha + (1.0 - self.alpha) * keep_measure,
                (1.0 - self.alpha) * (1.0 - keep_measure),
            ),
        };
        let share_p2 = 1.0 - share_p1;
        ReplayOutcome {
            visits,
            tries_if_misfit: tries,
            trial_value,
            keep_measure,
            share_p1,
            share_p2,
            return_mass,
            profit: share_p1 * self.p1 + share_p2 * self.p2_bar
                - return_mass * self.retailer_cost_per_return,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Tally {
    bought_p1: u64,
    bought_p2: u64,
    returned: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;

    fn add(self, o: Tally) -> Tally {
        Tally {
            bought_p1: self.bought_p1 + o.bought_p1,
            bought_p2: self.bought_p2 + o.bought_p2,
            returned: self.returned + o.returned,
        }
    }
}

/// Mean and standard error of a variable taking finitely many values.
fn estimate(n: u64, outcomes: &[(u64, f64)]) -> Estimate {
    let nf = n as f64;
    let mean = outcomes.iter().map(|&(c, x)| c as f64 * x).sum::<f64>() / nf;
    if n < 2 {
        return Estimate {
            mean,
            std_error: 0.0,
        };
    }
    let ss = outcomes
        .iter()
        .map(|&(c, x)| c as f64 * (x - mean) * (x - mean))
        .sum::<f64>();
    Estimate {
        mean,
        std_error: (ss / (nf - 1.0)).sqrt() / nf.sqrt(),
    }
}

/// Monte Carlo replay of `n_customers` customers at price `p1`.
///
/// Customer `i` draws from ChaCha8 stream `i / CHUNK` of `seed`, so the
/// result does not depend on thread count or scheduling.
pub fn simulate(
    params: &MarketParams,
    p1: f64,
    config: &SimConfig,
    policy: ReturnPolicy,
) -> Result<SimResult> {
    config.validate()?;
    if !p1.is_finite() {
        return Err(Error::InvalidConfig(format!("price must be finite, got {p1}")));
    }
    let tree = GameTree::new(params, p1, policy);
    let (visits, tries, _) = tree.decisions(config.quadrature_points);
    let n = config.n_customers;
    let chunks = n.div_ceil(CHUNK);

    let tally = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let start = chunk * CHUNK;
            let len = CHUNK.min(n - start);
            if !visits {
                return Tally {
                    bought_p2: len,
                    ..Tally::default()
                };
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(chunk);
            let mut t = Tally::default();
            for _ in 0..len {
                let fit = rng.random::<f64>() < tree.alpha;
                if fit {
                    t.bought_p1 += 1;
                } else if tries {
                    let beta: f64 = rng.random();
                    if tree.keeps(beta) {
                        t.bought_p1 += 1;
                    } else {
                        t.returned += 1;
                    }
                } else {
                    t.bought_p2 += 1;
                }
            }
            t
        })
        .reduce(Tally::default, |a, b| a + b);

    let p2_buyers = tally.bought_p2 + tally.returned;
    let stay = n - tally.returned;
    Ok(SimResult {
        est_share_p1: estimate(n, &[(tally.bought_p1, 1.0), (p2_buyers, 0.0)]),
        est_share_p2: estimate(n, &[(p2_buyers, 1.0), (tally.bought_p1, 0.0)]),
        est_return_mass: estimate(n, &[(tally.returned, 1.0), (stay, 0.0)]),
        est_profit: estimate(
            n,
            &[
                (tally.bought_p1, p1),
                (tally.bought_p2, tree.p2_bar),
                (tally.returned, tree.p2_bar - tree.retailer_cost_per_return),
            ],
        ),
        n,
        seed: config.seed,
    })
}

/// Exact expected outcome of the replayed game at `p1`.
pub fn replay(
    params: &MarketParams,
    p1: f64,
    config: &SimConfig,
    policy: ReturnPolicy,
) -> Result<ReplayOutcome> {
    config.validate()?;
    Ok(GameTree::new(params, p1, policy).expected_outcome(config.quadrature_points))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptimum {
    pub price: f64,
    pub profit: f64,
    /// Number of prices evaluated.
    pub evaluated: usize,
}

/// Brute-force argmax of the analytic profit over a price grid.
///
/// The grid covers `(0, p1_allReturn + v1]` at `price_grid_step` and always
/// includes every positive landmark exactly, since profit jumps at them and
/// the optimum may sit on one. Ties go to the lower price.
pub fn grid_search_optimum(
    params: &MarketParams,
    config: &SimConfig,
    policy: ReturnPolicy,
) -> Result<GridOptimum> {
    config.validate()?;
    let plain = Thresholds::new(params);
    let faced = Thresholds::for_policy(params, policy);
    let hi = plain.p1_all_return.max(faced.p1_all_return) + params.v1();
    let steps = (hi / config.price_grid_step).floor() as u64;

    let mut prices: Vec<f64> = (1..=steps)
        .map(|k| k as f64 * config.price_grid_step)
        .collect();
    prices.extend(
        plain
            .landmarks()
            .into_iter()
            .chain(faced.landmarks())
            .map(|(_, p)| p)
            .filter(|&p| p > 0.0 && p <= hi),
    );
    prices.push(hi);
    prices.sort_by(f64::total_cmp);
    prices.dedup();

    let profits: Vec<f64> = prices
        .par_iter()
        .map(|&p| profit_at(params, p, policy).profit)
        .collect();

    let mut best = 0;
    for (i, &v) in profits.iter().enumerate() {
        if v > profits[best] {
            best = i;
        }
    }
    Ok(GridOptimum {
        price: prices[best],
        profit: profits[best],
        evaluated: prices.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference() -> MarketParams {
        MarketParams::new(2.0, 1.0, 0.0, 0.25, 0.125).unwrap()
    }

    #[test]
    fn config_validation() {
        let bad = SimConfig {
            n_customers: 0,
            ..SimConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let bad = SimConfig {
            quadrature_points: 99,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimConfig {
            price_grid_step: 0.0,
            ..SimConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn quadrature_is_exact_for_piecewise_linear_payoff() {
        let tree = GameTree::new(&reference(), 0.6, ReturnPolicy::CustomerPays);
        assert!((tree.trial_value(100) - 0.855625).abs() < 1e-13);
        assert!((tree.keep_measure(100) - 0.325).abs() < 1e-13);
    }

    #[test]
    fn simulated_shares_at_trial_price() {
        let cfg = SimConfig::default();
        let res = simulate(&reference(), 0.25, &cfg, ReturnPolicy::CustomerPays).unwrap();
        assert!(res.est_share_p1.covers(0.625, 3.0), "{res:?}");
        assert!(res.est_profit.covers(0.15625, 3.0), "{res:?}");
        assert!((res.est_share_p1.mean + res.est_share_p2.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_visit_is_deterministic() {
        let cfg = SimConfig {
            n_customers: 50_000,
            ..SimConfig::default()
        };
        let res = simulate(&reference(), 2.0, &cfg, ReturnPolicy::CustomerPays).unwrap();
        assert_eq!(res.est_share_p2.mean, 1.0);
        assert_eq!(res.est_share_p2.std_error, 0.0);
        assert_eq!(res.est_profit.std_error, 0.0);
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let cfg = SimConfig {
            n_customers: 100_000,
            ..SimConfig::default()
        };
        let a = simulate(&reference(), 0.4, &cfg, ReturnPolicy::CustomerPays).unwrap();
        let b = simulate(&reference(), 0.4, &cfg, ReturnPolicy::CustomerPays).unwrap();
        assert_eq!(a, b);
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate(&reference(), 0.4, &cfg, ReturnPolicy::CustomerPays).unwrap());
        assert_eq!(a, single);
    }

    #[test]
    fn grid_search_reference_optima() {
        let cfg = SimConfig {
            price_grid_step: 2e-4,
            ..SimConfig::default()
        };
        let g = grid_search_optimum(&reference(), &cfg, ReturnPolicy::CustomerPays).unwrap();
        assert!((g.price - 1.0).abs() < 1e-12);
        assert!((g.profit - 0.25).abs() < 1e-12);

        let case1 = MarketParams::new(3.0, 1.0, 0.0, 0.2, 0.6).unwrap();
        let cfg = SimConfig {
            price_grid_step: 3e-4,
            ..SimConfig::default()
        };
        let g = grid_search_optimum(&case1, &cfg, ReturnPolicy::CustomerPays).unwrap();
        assert!((g.price - 0.5).abs() < 1e-12);
        assert!((g.profit - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_still_hits_landmarks() {
        let cfg = SimConfig {
            price_grid_step: 100.0,
            ..SimConfig::default()
        };
        let g = grid_search_optimum(&reference(), &cfg, ReturnPolicy::CustomerPays).unwrap();
        assert_eq!(g.price, 1.0);
        assert!((g.profit - 0.25).abs() < 1e-12);
    }
}
