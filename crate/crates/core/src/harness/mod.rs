//! Scenario generation and experiments comparing placement/delivery schemes.

mod scenario;
mod sweep;

pub use scenario::{generate_scenario, unit_uniform, zipf_popularity, RateMode, ScenarioConfig};
pub use sweep::{
    derive_seed, sweep, Headline, ReplicateRow, SweepAxis, SweepResult, SweepRow, CSV_HEADER,
};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::Instance;
use crate::objective::{cost_closed_form, cost_unicast};
use crate::simulator::{simulate, SimConfig, SimMode, SimReport};
use crate::solvers::{greedy_macp, popularity_placement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Popularity caching, every request a unicast.
    #[serde(rename = "PAC-UT")]
    PacUt,
    /// Popularity caching, per-period multicast.
    #[serde(rename = "PAC-MT")]
    PacMt,
    /// Greedy multicast-aware caching, per-period multicast.
    #[serde(rename = "MAC-MT")]
    MacMt,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::PacUt, Scheme::PacMt, Scheme::MacMt];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::PacUt => "PAC-UT",
            Scheme::PacMt => "PAC-MT",
            Scheme::MacMt => "MAC-MT",
        }
    }

    pub fn sim_mode(self) -> SimMode {
        match self {
            Scheme::PacUt => SimMode::Unicast,
            Scheme::PacMt | Scheme::MacMt => SimMode::Multicast,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Monte Carlo settings for a comparison run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSettings {
    pub periods: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub analytic_cost: f64,
    pub sim: Option<SimReport>,
}

/// Evaluates all three schemes on one instance, in [`Scheme::ALL`] order.
/// With `sim`, each scheme is also simulated; scheme `k` uses seed
/// `derive_seed(sim.seed, k)`.
pub fn run_comparison(instance: &Instance, sim: Option<SimSettings>) -> Result<Vec<SchemeResult>> {
    let popular = popularity_placement(instance);
    let greedy = greedy_macp(instance).policy;
    Scheme::ALL
        .iter()
        .enumerate()
        .map(|(k, &scheme)| {
            let (policy, analytic_cost) = match scheme {
                Scheme::PacUt => (&popular, cost_unicast(instance, &popular)?.total),
                Scheme::PacMt => (&popular, cost_closed_form(instance, &popular)?.total),
                Scheme::MacMt => (&greedy, cost_closed_form(instance, &greedy)?.total),
            };
            let sim = sim
                .map(|s| {
                    let config = SimConfig {
                        periods: s.periods,
                        mode: scheme.sim_mode(),
                        seed: derive_seed(s.seed, k as u64),
                    };
                    simulate(instance, policy, &config)
                })
                .transpose()?;
            Ok(SchemeResult {
                scheme,
                analytic_cost,
                sim,
            })
        })
        .collect()
}
