//! Set packing reduced to the threshold version of multicast-aware caching.
//!
//! Each element becomes an SCBS with a one-file cache, each listed subset a
//! file that is requested (with probability `1/|L|`) exactly by the SCBSs of
//! that subset. Backhaul and SCBS transmissions are free and an MBS multicast
//! costs 1, so serving `m` files entirely from caches costs `1 - m/|L|`, and
//! unit caches force the locally served subsets to be pairwise disjoint.

use std::collections::BTreeMap;
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MacpError, Result};
use crate::model::{AreaSubset, CachingPolicy, MAX_SUBSET_SCBS};
use crate::solvers::{for_each_policy, DEFAULT_POLICY_CAP};

/// Decision threshold slack when comparing an objective against `Q`.
pub const THRESHOLD_SLACK: f64 = 1e-9;

/// Largest list length [`spp_decide`] will search.
pub const MAX_SPP_SUBSETS: usize = 24;

/// Set packing: are there `target` pairwise disjoint subsets in `subsets`?
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SppInstance {
    pub elements: Vec<u32>,
    pub subsets: Vec<Vec<u32>>,
    pub target: usize,
}

impl SppInstance {
    pub fn new(elements: Vec<u32>, subsets: Vec<Vec<u32>>, target: usize) -> Result<Self> {
        let spp = Self {
            elements,
            subsets,
            target,
        };
        spp.validate()?;
        Ok(spp)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = self.elements.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.elements.len() {
            return invalid("elements must be distinct");
        }
        for (idx, subset) in self.subsets.iter().enumerate() {
            if let Some(e) = subset.iter().find(|e| !self.elements.contains(e)) {
                return invalid(format!("subset {idx} contains {e}, which is not an element"));
            }
        }
        if self.target > self.subsets.len() {
            return invalid(format!(
                "target {} exceeds the number of subsets {}",
                self.target,
                self.subsets.len()
            ));
        }
        Ok(())
    }

    fn position(&self, element: u32) -> usize {
        self.elements
            .iter()
            .position(|&e| e == element)
            .expect("validated subset element")
    }

    /// SCBS indices (element positions) covered by subset `idx`.
    pub fn subset_positions(&self, idx: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.subsets[idx].iter().map(|&e| self.position(e)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spp: Self = serde_json::from_str(text)?;
        spp.validate()?;
        Ok(spp)
    }
}

/// One entry of an explicit request probability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityEntry {
    pub file: usize,
    /// Requesting areas (0 = MBS-only area, `n + 1` = SCBS `n`).
    pub areas: AreaSubset,
    pub probability: f64,
}

/// Threshold decision instance with an arbitrary (sparse) joint request
/// probability table instead of independent areas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionInstance {
    pub num_scbs: usize,
    pub num_files: usize,
    pub cache_size: Vec<usize>,
    pub cost_backhaul: f64,
    pub cost_mbs_tx: f64,
    pub cost_scbs_tx: Vec<f64>,
    pub deadline: f64,
    /// Subsets not listed have probability 0.
    pub probabilities: Vec<ProbabilityEntry>,
    pub threshold: f64,
}

impl DecisionInstance {
    pub fn validate(&self) -> Result<()> {
        let n = self.num_scbs;
        if n > MAX_SUBSET_SCBS {
            return invalid(format!("at most {MAX_SUBSET_SCBS} SCBSs are supported"));
        }
        if self.cache_size.len() != n || self.cost_scbs_tx.len() != n {
            return invalid("cache_size and cost_scbs_tx must have num_scbs entries");
        }
        let costs = [self.cost_backhaul, self.cost_mbs_tx]
            .into_iter()
            .chain(self.cost_scbs_tx.iter().copied());
        for c in costs {
            if !(c.is_finite() && c >= 0.0) {
                return invalid(format!("costs must be finite and non-negative, got {c}"));
            }
        }
        if !(self.deadline.is_finite() && self.deadline > 0.0) {
            return invalid("deadline must be finite and positive");
        }
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            return invalid("threshold must be finite and non-negative");
        }
        let mut mass = vec![0.0; self.num_files];
        for entry in &self.probabilities {
            if entry.file >= self.num_files {
                return invalid(format!("probability entry for unknown file {}", entry.file));
            }
            if entry.areas.max_area().is_some_and(|a| a > n) {
                return invalid(format!("probability entry references unknown area in {}", entry.areas));
            }
            if !(0.0..=1.0).contains(&entry.probability) {
                return invalid(format!("probability {} outside [0, 1]", entry.probability));
            }
            mass[entry.file] += entry.probability;
        }
        if let Some(file) = mass.iter().position(|&m| m > 1.0 + 1e-12) {
            return invalid(format!("probabilities for file {file} sum to {}", mass[file]));
        }
        Ok(())
    }

    /// Objective of `policy` over the explicit table. Entries with an empty
    /// area set never cost anything.
    pub fn objective(&self, policy: &CachingPolicy) -> Result<f64> {
        if policy.num_scbs() != self.num_scbs || policy.num_files() != self.num_files {
            return invalid("policy dimensions do not match the decision instance");
        }
        if let Some(n) = (0..self.num_scbs).find(|&n| policy.fill(n) > self.cache_size[n]) {
            return invalid(format!("policy overfills SCBS {n}"));
        }
        Ok(self.objective_unchecked(policy))
    }

    fn objective_unchecked(&self, policy: &CachingPolicy) -> f64 {
        let mbs_cost = self.cost_backhaul + self.cost_mbs_tx;
        self.probabilities
            .iter()
            .filter(|e| !e.areas.is_empty())
            .map(|e| {
                let triggered = e.areas.contains_mbs_only()
                    || e.areas.scbs().any(|n| !policy.is_cached(n, e.file));
                let cost = if triggered {
                    mbs_cost
                } else {
                    e.areas.scbs().map(|n| self.cost_scbs_tx[n]).sum()
                };
                e.probability * cost
            })
            .sum()
    }
}

pub fn spp_to_macdp(spp: &SppInstance) -> Result<DecisionInstance> {
    spp.validate()?;
    if spp.subsets.is_empty() {
        return invalid("the subset list must be non-empty");
    }
    let n = spp.elements.len();
    if n > MAX_SUBSET_SCBS {
        return invalid(format!("at most {MAX_SUBSET_SCBS} elements are supported"));
    }
    let files = spp.subsets.len();
    let share = 1.0 / files as f64;
    let probabilities = (0..files)
        .map(|i| {
            let areas = spp
                .subset_positions(i)
                .into_iter()
                .fold(AreaSubset::EMPTY, AreaSubset::with_scbs);
            ProbabilityEntry {
                file: i,
                areas,
                probability: share,
            }
        })
        .collect();
    Ok(DecisionInstance {
        num_scbs: n,
        num_files: files,
        cache_size: vec![1; n],
        cost_backhaul: 0.0,
        cost_mbs_tx: 1.0,
        cost_scbs_tx: vec![0.0; n],
        deadline: 1.0,
        probabilities,
        threshold: 1.0 - spp.target as f64 / files as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacdpOutcome {
    pub satisfiable: bool,
    /// Lexicographically first policy meeting the threshold.
    pub witness: Option<CachingPolicy>,
    pub witness_cost: Option<f64>,
    pub policies_examined: u64,
}

pub fn macdp_decide(decision: &DecisionInstance) -> Result<MacdpOutcome> {
    macdp_decide_capped(decision, DEFAULT_POLICY_CAP)
}

pub fn macdp_decide_capped(decision: &DecisionInstance, cap: u128) -> Result<MacdpOutcome> {
    decision.validate()?;
    let caps: Vec<usize> = decision
        .cache_size
        .iter()
        .map(|&s| s.min(decision.num_files))
        .collect();
    let mut found = None;
    let examined = for_each_policy(decision.num_files, &caps, cap, |policy| {
        let cost = decision.objective_unchecked(policy);
        if cost <= decision.threshold + THRESHOLD_SLACK {
            found = Some((policy.clone(), cost));
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(MacdpOutcome {
        satisfiable: found.is_some(),
        witness_cost: found.as_ref().map(|(_, c)| *c),
        witness: found.map(|(p, _)| p),
        policies_examined: examined,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SppOutcome {
    pub satisfiable: bool,
    /// Zero-based indices into the subset list of a lexicographically first
    /// packing of size `target`.
    pub witness: Option<Vec<usize>>,
}

/// Exhaustive set packing decision (depth-first over subset selections).
pub fn spp_decide(spp: &SppInstance) -> Result<SppOutcome> {
    spp.validate()?;
    if spp.subsets.len() > MAX_SPP_SUBSETS {
        return Err(MacpError::Capacity {
            what: "set packing search over subset selections".into(),
            required: 1u128 << spp.subsets.len().min(127),
            cap: 1u128 << MAX_SPP_SUBSETS,
        });
    }
    if spp.elements.len() > 128 {
        return invalid("at most 128 elements are supported");
    }
    let masks: Vec<u128> = (0..spp.subsets.len())
        .map(|i| {
            spp.subset_positions(i)
                .into_iter()
                .fold(0u128, |m, p| m | (1u128 << p))
        })
        .collect();

    fn search(masks: &[u128], start: usize, used: u128, need: usize, picked: &mut Vec<usize>) -> bool {
        if need == 0 {
            return true;
        }
        for i in start..masks.len() {
            if masks.len() - i < need {
                break;
            }
            if masks[i] & used == 0 {
                picked.push(i);
                if search(masks, i + 1, used | masks[i], need - 1, picked) {
                    return true;
                }
                picked.pop();
            }
        }
        false
    }

    let mut picked = Vec::new();
    let ok = search(&masks, 0, 0, spp.target, &mut picked);
    Ok(SppOutcome {
        satisfiable: ok,
        witness: ok.then_some(picked),
    })
}

/// Subsets whose file is cached at every SCBS of the subset.
pub fn packing_from_policy(spp: &SppInstance, policy: &CachingPolicy) -> Vec<usize> {
    (0..spp.subsets.len())
        .filter(|&i| {
            spp.subset_positions(i)
                .into_iter()
                .all(|n| policy.is_cached(n, i))
        })
        .collect()
}

/// Caches file `i` at every SCBS of subset `i` for each picked subset.
/// Fails if two picked subsets share an element.
pub fn policy_from_packing(spp: &SppInstance, picked: &[usize]) -> Result<CachingPolicy> {
    let mut owner: BTreeMap<usize, usize> = BTreeMap::new();
    let mut policy = CachingPolicy::empty(spp.elements.len(), spp.subsets.len());
    for &i in picked {
        if i >= spp.subsets.len() {
            return invalid(format!("subset index {i} out of range"));
        }
        for n in spp.subset_positions(i) {
            if let Some(other) = owner.insert(n, i) {
                return invalid(format!("subsets {other} and {i} overlap"));
            }
            policy.set(n, i, true);
        }
    }
    Ok(policy)
}
