//! Cache placement algorithms.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{MacpError, Result};
use crate::model::{CachingPolicy, Instance};
use crate::objective::{closed_form_unchecked, file_cost_with};

/// Default bound on the number of policies [`exact_optimal`] will enumerate.
pub const DEFAULT_POLICY_CAP: u128 = 10_000_000;

/// Costs closer than this (relative to max(1, |cost|)) count as ties.
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub scbs: usize,
    pub file: usize,
    /// Objective after this placement.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub policy: CachingPolicy,
    /// Objective (closed form) of `policy`.
    pub objective: f64,
    /// Greedy audit trail; empty for non-iterative solvers.
    pub trace: Vec<TraceStep>,
    /// Number of candidate objective evaluations performed.
    pub evaluations: u64,
}

/// Greedy multicast-aware placement.
///
/// Starting from empty caches, repeatedly performs the single placement with
/// the lowest resulting objective among SCBSs whose cache is not yet full, until
/// every cache holds `min(S_n, I)` files. Ties go to the smallest SCBS index,
/// then the smallest file index.
pub fn greedy_macp(instance: &Instance) -> SolverReport {
    let mut policy = CachingPolicy::empty_for(instance);
    let mut per_file = closed_form_unchecked(instance, &policy).per_file;
    let mut fill = vec![0usize; instance.num_scbs()];
    let mut trace = Vec::with_capacity(instance.total_capacity());
    let mut evaluations = 0u64;

    for iteration in 1..=instance.total_capacity() {
        let mut best: Option<(f64, usize, usize, f64)> = None;
        for (n, &filled) in fill.iter().enumerate() {
            if filled >= instance.cache_size(n) {
                continue;
            }
            for (i, &current) in per_file.iter().enumerate() {
                if policy.is_cached(n, i) {
                    continue;
                }
                evaluations += 1;
                let term = file_cost_with(instance, &policy, n, i);
                // compare the change in the affected term; the other terms are shared
                let delta = term - current;
                if best.is_none_or(|(best_delta, ..)| delta < best_delta) {
                    best = Some((delta, n, i, term));
                }
            }
        }
        let (_, n, i, term) = best.expect("a non-full cache always has an uncached file");
        policy.set(n, i, true);
        per_file[i] = term;
        fill[n] += 1;
        trace.push(TraceStep {
            iteration,
            scbs: n,
            file: i,
            objective: per_file.iter().sum(),
        });
    }

    let objective = closed_form_unchecked(instance, &policy).total;
    SolverReport {
        policy,
        objective,
        trace,
        evaluations,
    }
}

/// Each SCBS caches its `S_n` locally most requested files (ties to the
/// smaller file index), independently of the others.
pub fn popularity_placement(instance: &Instance) -> CachingPolicy {
    let mut policy = CachingPolicy::empty_for(instance);
    for n in 0..instance.num_scbs() {
        let mut files: Vec<usize> = (0..instance.num_files()).collect();
        files.sort_by(|&a, &b| {
            instance
                .rate(n + 1, b)
                .total_cmp(&instance.rate(n + 1, a))
                .then(a.cmp(&b))
        });
        for &i in files.iter().take(instance.cache_size(n)) {
            policy.set(n, i, true);
        }
    }
    policy
}

pub fn exact_optimal(instance: &Instance) -> Result<SolverReport> {
    exact_optimal_capped(instance, DEFAULT_POLICY_CAP)
}

/// Exhaustive search over every feasible placement (rows with at most `S_n`
/// files). Returns the lexicographically smallest minimiser.
pub fn exact_optimal_capped(instance: &Instance, cap: u128) -> Result<SolverReport> {
    let caps: Vec<usize> = (0..instance.num_scbs())
        .map(|n| instance.cache_size(n))
        .collect();
    let mut best: Option<(f64, CachingPolicy)> = None;
    let visited = for_each_policy(instance.num_files(), &caps, cap, |policy| {
        let cost = closed_form_unchecked(instance, policy).total;
        let better = match &best {
            None => true,
            Some((b, _)) => cost < b - TIE_TOLERANCE * b.abs().max(1.0),
        };
        if better {
            best = Some((cost, policy.clone()));
        }
        ControlFlow::Continue(())
    })?;
    let (objective, policy) = best.expect("the empty policy is always feasible");
    Ok(SolverReport {
        policy,
        objective,
        trace: Vec::new(),
        evaluations: visited,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| {
        acc.saturating_mul((n - j) as u128) / (j as u128 + 1)
    })
}

/// Number of placements with at most `caps[n]` files in row `n`.
pub fn policy_space_size(num_files: usize, caps: &[usize]) -> u128 {
    caps.iter()
        .map(|&c| {
            (0..=c.min(num_files))
                .map(|k| binomial(num_files, k))
                .fold(0u128, u128::saturating_add)
        })
        .fold(1u128, u128::saturating_mul)
}

/// All rows over `num_files` files with at most `cap` ones, in ascending
/// lexicographic order of the 0/1 string (file 0 first).
fn rows_in_lex_order(num_files: usize, cap: usize) -> Vec<Vec<usize>> {
    fn extend(
        file: usize,
        num_files: usize,
        cap: usize,
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if file == num_files {
            out.push(current.clone());
            return;
        }
        extend(file + 1, num_files, cap, current, out);
        if current.len() < cap {
            current.push(file);
            extend(file + 1, num_files, cap, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    extend(0, num_files, cap, &mut Vec::new(), &mut out);
    out
}

/// Visits every placement whose row `n` holds at most `caps[n]` files, in
/// lexicographic order of the row-major 0/1 matrix. Returns the number visited.
pub(crate) fn for_each_policy<F>(num_files: usize, caps: &[usize], cap: u128, mut visit: F) -> Result<u64>
where
    F: FnMut(&CachingPolicy) -> ControlFlow<()>,
{
    let size = policy_space_size(num_files, caps);
    if size > cap {
        return Err(MacpError::Capacity {
            what: "exhaustive policy enumeration".into(),
            required: size,
            cap,
        });
    }
    let rows: Vec<Vec<Vec<usize>>> = caps
        .iter()
        .map(|&c| rows_in_lex_order(num_files, c.min(num_files)))
        .collect();
    let mut index = vec![0usize; caps.len()];
    let mut policy = CachingPolicy::empty(caps.len(), num_files);
    let mut visited = 0u64;
    loop {
        visited += 1;
        if visit(&policy).is_break() {
            return Ok(visited);
        }
        // odometer with the last row turning fastest
        let mut k = caps.len();
        loop {
            if k == 0 {
                return Ok(visited);
            }
            k -= 1;
            for &i in &rows[k][index[k]] {
                policy.set(k, i, false);
            }
            index[k] += 1;
            if index[k] == rows[k].len() {
                index[k] = 0;
                continue;
            }
            for &i in &rows[k][index[k]] {
                policy.set(k, i, true);
            }
            break;
        }
    }
}
