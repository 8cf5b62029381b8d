//! Multicast-aware cache placement for small-cell networks.
//!
//! A macrocell base station (MBS) covers a set of small-cell base stations
//! (SCBSs), each with a finite cache. Requests for the same file that arrive
//! within one service period of length `d` are served together: either every
//! requester is covered by an SCBS that caches the file, or the MBS fetches it
//! over the backhaul and multicasts it once.
//!
//! The crate is organised as
//!
//! - [`model`]: problem instances, caching policies, demand probabilities and
//!   the MBS trigger indicator,
//! - [`objective`]: expected per-period cost (subset enumeration, linear-time
//!   closed form, incremental marginal cost, unicast cost),
//! - [`solvers`]: greedy multicast-aware placement, popularity placement and
//!   an exhaustive optimum for tiny instances,
//! - [`reduction`]: set packing to the threshold decision problem, with exact
//!   deciders on both sides,
//! - [`simulator`]: seeded Monte Carlo replay of Poisson demand,
//! - [`harness`]: scenario generation, scheme comparison and parameter sweeps.

pub mod error;
pub mod harness;
pub mod model;
pub mod objective;
pub mod reduction;
pub mod simulator;
pub mod solvers;

pub use error::{MacpError, Result};
pub use model::{
    mbs_triggered, request_probability, subset_probability, AreaSubset, CachingPolicy, Instance,
    InstanceParams,
};
pub use objective::{
    cost_bruteforce, cost_closed_form, cost_unicast, marginal_cost, CostBreakdown,
};
pub use simulator::{simulate, SimConfig, SimMode, SimReport};
pub use solvers::{exact_optimal, greedy_macp, popularity_placement, SolverReport};
