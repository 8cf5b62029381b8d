//! Expected servicing cost of a caching policy over one service period.
//!
//! For every file and every non-empty set `r` of requesting areas, the MBS
//! multicasts once (cost `c_B + c_W`) when some requester is not covered by a
//! cache holding the file; otherwise each requesting SCBS serves its own users
//! at cost `c_n`. [`cost_bruteforce`] evaluates that sum literally over all
//! `2^(N+1)` subsets. [`cost_closed_form`] factorises it under independent
//! areas and runs in `O(N·I)`:
//!
//! ```text
//! P(MBS fires for i)      = 1 - Π_{n ∉ C_i} q_n                (n0 is never in C_i)
//! E[local cost for i]     = Π_{n ∉ C_i} q_n · Σ_{n ∈ C_i} c_n p_n
//! ```
//!
//! where `C_i` is the set of SCBSs caching `i` and `q_n = 1 - p_n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MacpError, Result};
use crate::model::{mbs_triggered, subset_probability, AreaSubset, CachingPolicy, Instance};

/// Default largest `N` accepted by [`cost_bruteforce`].
pub const DEFAULT_ENUMERATION_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub per_file: Vec<f64>,
    /// Part of `total` paid for MBS transmissions (`c_B + c_W` terms).
    pub mbs_component: f64,
    /// Part of `total` paid for SCBS transmissions (`c_n` terms).
    pub scbs_component: f64,
}

impl CostBreakdown {
    fn from_parts(parts: &[(f64, f64)]) -> Self {
        let per_file: Vec<f64> = parts.iter().map(|(m, s)| m + s).collect();
        Self {
            total: per_file.iter().sum(),
            mbs_component: parts.iter().map(|(m, _)| m).sum(),
            scbs_component: parts.iter().map(|(_, s)| s).sum(),
            per_file,
        }
    }
}

pub fn cost_bruteforce(instance: &Instance, policy: &CachingPolicy) -> Result<CostBreakdown> {
    cost_bruteforce_capped(instance, policy, DEFAULT_ENUMERATION_CAP)
}

/// Literal subset enumeration, refusing instances with more than `max_scbs` SCBSs.
pub fn cost_bruteforce_capped(
    instance: &Instance,
    policy: &CachingPolicy,
    max_scbs: usize,
) -> Result<CostBreakdown> {
    if instance.num_scbs() > max_scbs {
        return Err(MacpError::Capacity {
            what: "subset enumeration (use cost_closed_form for large N)".into(),
            required: instance.num_scbs() as u128,
            cap: max_scbs as u128,
        });
    }
    policy.check_feasible(instance)?;
    let subsets = 1u64 << instance.num_areas();
    let mbs_cost = instance.mbs_cost();
    let parts = (0..instance.num_files())
        .map(|file| {
            let mut mbs = 0.0;
            let mut local = 0.0;
            for bits in 1..subsets {
                let r = AreaSubset::from_bits(bits);
                let p = subset_probability(instance, r, file)?;
                if mbs_triggered(policy, r, file)? {
                    mbs += p * mbs_cost;
                } else {
                    local += p * r.scbs().map(|n| instance.scbs_cost(n)).sum::<f64>();
                }
            }
            Ok((mbs, local))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostBreakdown::from_parts(&parts))
}

/// `(mbs part, scbs part)` of one file's expected cost when the SCBSs for
/// which `cached` holds store it.
fn file_term(instance: &Instance, file: usize, cached: impl Fn(usize) -> bool) -> (f64, f64) {
    let mut uncached_quiet = 1.0 - instance.area_probability(0, file);
    let mut local = 0.0;
    for n in 0..instance.num_scbs() {
        let p = instance.area_probability(n + 1, file);
        if cached(n) {
            local += instance.scbs_cost(n) * p;
        } else {
            uncached_quiet *= 1.0 - p;
        }
    }
    (
        instance.mbs_cost() * (1.0 - uncached_quiet),
        uncached_quiet * local,
    )
}

pub fn cost_closed_form(instance: &Instance, policy: &CachingPolicy) -> Result<CostBreakdown> {
    policy.check_feasible(instance)?;
    Ok(closed_form_unchecked(instance, policy))
}

pub(crate) fn closed_form_unchecked(instance: &Instance, policy: &CachingPolicy) -> CostBreakdown {
    let parts: Vec<_> = (0..instance.num_files())
        .map(|file| file_term(instance, file, |n| policy.is_cached(n, file)))
        .collect();
    CostBreakdown::from_parts(&parts)
}

/// Expected cost of `file` if `scbs` were added to its current holders.
pub(crate) fn file_cost_with(
    instance: &Instance,
    policy: &CachingPolicy,
    scbs: usize,
    file: usize,
) -> f64 {
    let (mbs, local) = file_term(instance, file, |n| n == scbs || policy.is_cached(n, file));
    mbs + local
}

/// Total cost after additionally caching `file` at `scbs`.
///
/// `snapshot` must be the closed-form breakdown of `policy`; only the term of
/// `file` is recomputed.
pub fn marginal_cost(
    instance: &Instance,
    policy: &CachingPolicy,
    snapshot: &CostBreakdown,
    scbs: usize,
    file: usize,
) -> Result<f64> {
    if scbs >= instance.num_scbs() || file >= instance.num_files() {
        return invalid(format!("placement ({scbs}, {file}) out of range"));
    }
    if snapshot.per_file.len() != instance.num_files() {
        return invalid("snapshot does not match the instance's file count");
    }
    policy.check_feasible(instance)?;
    if policy.is_cached(scbs, file) {
        return invalid(format!("file {file} is already cached at SCBS {scbs}"));
    }
    if policy.fill(scbs) >= instance.cache_size(scbs) {
        return invalid(format!("cache of SCBS {scbs} is full"));
    }
    let new_term = file_cost_with(instance, policy, scbs, file);
    Ok(snapshot.total - snapshot.per_file[file] + new_term)
}

/// Expected cost per period when every request is a separate unicast:
/// `λ·d` requests per area and file, each costing `c_n` if cached locally and
/// `c_B + c_W` otherwise.
pub fn cost_unicast(instance: &Instance, policy: &CachingPolicy) -> Result<CostBreakdown> {
    policy.check_feasible(instance)?;
    let d = instance.deadline();
    let mbs_cost = instance.mbs_cost();
    let parts: Vec<_> = (0..instance.num_files())
        .map(|file| {
            let mut mbs = instance.rate(0, file) * d * mbs_cost;
            let mut local = 0.0;
            for n in 0..instance.num_scbs() {
                let expected = instance.rate(n + 1, file) * d;
                if policy.is_cached(n, file) {
                    local += expected * instance.scbs_cost(n);
                } else {
                    mbs += expected * mbs_cost;
                }
            }
            (mbs, local)
        })
        .collect();
    Ok(CostBreakdown::from_parts(&parts))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::model::tests::motivating_instance;
    use crate::model::InstanceParams;
    use proptest::prelude::*;

    fn zero_demand(inst: &Instance) -> Instance {
        let mut p = inst.params().clone();
        for row in p.demand.iter_mut() {
            row.iter_mut().for_each(|r| *r = 0.0);
        }
        Instance::new(p).unwrap()
    }

    #[test]
    fn worked_example_costs() {
        let inst = motivating_instance();
        let aware = CachingPolicy::from_placements(2, 3, [(0, 1), (1, 2)]).unwrap();
        let agnostic = CachingPolicy::from_placements(2, 3, [(0, 0), (1, 0)]).unwrap();
        for eval in [cost_bruteforce, cost_closed_form] {
            assert!((eval(&inst, &aware).unwrap().total - 0.6394).abs() <= 5e-4);
            assert!((eval(&inst, &agnostic).unwrap().total - 0.7747).abs() <= 5e-4);
        }
    }

    #[test]
    fn zero_demand_costs_nothing() {
        let inst = zero_demand(&motivating_instance());
        let policy = CachingPolicy::from_placements(2, 3, [(0, 1)]).unwrap();
        assert_eq!(cost_bruteforce(&inst, &policy).unwrap().total, 0.0);
        assert_eq!(cost_closed_form(&inst, &policy).unwrap().total, 0.0);
        assert_eq!(cost_unicast(&inst, &policy).unwrap().total, 0.0);
    }

    #[test]
    fn empty_policy_pays_mbs_whenever_anyone_asks() {
        let inst = motivating_instance();
        let cost = cost_closed_form(&inst, &CachingPolicy::empty_for(&inst)).unwrap();
        let expected: f64 = (0..3)
            .map(|i| {
                let quiet: f64 = (0..3).map(|a| 1.0 - inst.area_probability(a, i)).product();
                inst.mbs_cost() * (1.0 - quiet)
            })
            .sum();
        assert!((cost.total - expected).abs() < 1e-12);
        assert_eq!(cost.scbs_component, 0.0);
    }

    #[test]
    fn bruteforce_cap_and_feasibility() {
        let inst = motivating_instance();
        let policy = CachingPolicy::empty_for(&inst);
        assert!(matches!(
            cost_bruteforce_capped(&inst, &policy, 1),
            Err(MacpError::Capacity { .. })
        ));
        let over = CachingPolicy::from_placements(2, 3, [(0, 0), (0, 1)]).unwrap();
        assert!(matches!(
            cost_bruteforce(&inst, &over),
            Err(MacpError::InvalidArgument(_))
        ));
        assert!(cost_closed_form(&inst, &over).is_err());
    }

    #[test]
    fn marginal_cost_examples() {
        let inst = motivating_instance();
        let empty = CachingPolicy::empty_for(&inst);
        let snap = cost_closed_form(&inst, &empty).unwrap();
        let got = marginal_cost(&inst, &empty, &snap, 0, 1).unwrap();
        let direct = cost_closed_form(
            &inst,
            &CachingPolicy::from_placements(2, 3, [(0, 1)]).unwrap(),
        )
        .unwrap();
        assert!((got - direct.total).abs() < 1e-12);

        // file 2 has no demand at SCBS 0: caching it there changes nothing
        let unchanged = marginal_cost(&inst, &empty, &snap, 0, 2).unwrap();
        assert!((unchanged - snap.total).abs() < 1e-15);

        let one = CachingPolicy::from_placements(2, 3, [(0, 1)]).unwrap();
        let snap1 = cost_closed_form(&inst, &one).unwrap();
        assert!(marginal_cost(&inst, &one, &snap1, 0, 1).is_err(), "slot filled");
        assert!(marginal_cost(&inst, &one, &snap1, 0, 0).is_err(), "cache full");
    }

    #[test]
    fn unicast_examples() {
        let single = |cached: bool, c_scbs: f64| {
            let inst = Instance::new(InstanceParams {
                num_scbs: 1,
                num_files: 1,
                cache_size: vec![1],
                cost_backhaul: 1.0,
                cost_mbs_tx: 1.0,
                cost_scbs_tx: vec![c_scbs],
                demand: vec![vec![0.0], vec![2.0]],
                deadline: 10.0,
            })
            .unwrap();
            let policy = if cached {
                CachingPolicy::from_placements(1, 1, [(0, 0)]).unwrap()
            } else {
                CachingPolicy::empty(1, 1)
            };
            cost_unicast(&inst, &policy).unwrap()
        };
        assert_eq!(single(true, 0.0).total, 0.0);
        assert_eq!(single(false, 0.0).total, 40.0);
        assert_eq!(single(false, 0.0).mbs_component, 40.0);
        assert_eq!(single(true, 0.5).scbs_component, 10.0);
    }

    #[test]
    fn breakdown_json_keys() {
        let inst = motivating_instance();
        let cost = cost_closed_form(&inst, &CachingPolicy::empty_for(&inst)).unwrap();
        let v: serde_json::Value = serde_json::to_value(&cost).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["mbs_component", "per_file", "scbs_component", "total"]);
    }

    /// Random instance with `c_n <= c_W` plus a random feasible policy.
    pub(crate) fn arb_case(
        max_scbs: usize,
        max_files: usize,
    ) -> impl Strategy<Value = (Instance, CachingPolicy)> {
        (1..=max_scbs, 1..=max_files).prop_flat_map(|(n, files)| {
            (
                prop::collection::vec(prop::collection::vec(0.0f64..2.0, files), n + 1),
                prop::collection::vec(0..=files, n),
                0.0f64..2.0,
                0.1f64..2.0,
                prop::collection::vec(0.0f64..1.0, n),
                0.2f64..3.0,
                prop::collection::vec(any::<u64>(), n),
            )
                .prop_map(move |(demand, sizes, cb, cw, frac, d, picks)| {
                    let inst = Instance::new(InstanceParams {
                        num_scbs: n,
                        num_files: files,
                        cache_size: sizes.clone(),
                        cost_backhaul: cb,
                        cost_mbs_tx: cw,
                        cost_scbs_tx: frac.iter().map(|f| f * cw).collect(),
                        demand,
                        deadline: d,
                    })
                    .unwrap();
                    let mut policy = CachingPolicy::empty(n, files);
                    for k in 0..n {
                        // rotate the pick bits to choose up to S_n files
                        let mut taken = 0;
                        for i in 0..files {
                            if taken < sizes[k] && (picks[k] >> i) & 1 == 1 {
                                policy.set(k, i, true);
                                taken += 1;
                            }
                        }
                    }
                    (inst, policy)
                })
        })
    }

    /// Scales SCBS costs so that `Σ c_n <= c_B + c_W`, the regime in which an
    /// extra placement can never raise the objective.
    pub(crate) fn with_light_scbs_costs(inst: &Instance) -> Instance {
        let mut p = inst.params().clone();
        let sum: f64 = p.cost_scbs_tx.iter().sum();
        let budget = p.cost_backhaul + p.cost_mbs_tx;
        if sum > budget {
            p.cost_scbs_tx.iter_mut().for_each(|c| *c *= budget / sum);
        }
        Instance::new(p).unwrap()
    }

    #[test]
    fn expensive_scbs_can_make_an_extra_placement_costlier() {
        // Both SCBSs request the file; caching it at one of them replaces a
        // single MBS multicast (cost 1) by two SCBS multicasts (cost 1 each)
        // whenever both ask.
        let inst = Instance::new(InstanceParams {
            num_scbs: 2,
            num_files: 1,
            cache_size: vec![1, 1],
            cost_backhaul: 0.0,
            cost_mbs_tx: 1.0,
            cost_scbs_tx: vec![1.0, 1.0],
            demand: vec![vec![0.0], vec![1.0], vec![1.0]],
            deadline: 1.0,
        })
        .unwrap();
        let one = CachingPolicy::from_placements(2, 1, [(1, 0)]).unwrap();
        let snap = cost_closed_form(&inst, &one).unwrap();
        let both = marginal_cost(&inst, &one, &snap, 0, 0).unwrap();
        assert!(both > snap.total);
        assert!((both - cost_bruteforce(&inst, &CachingPolicy::from_placements(2, 1, [(0, 0), (1, 0)]).unwrap()).unwrap().total).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn closed_form_matches_enumeration((inst, policy) in arb_case(8, 6)) {
            let bf = cost_bruteforce(&inst, &policy).unwrap();
            let cf = cost_closed_form(&inst, &policy).unwrap();
            prop_assert!((bf.total - cf.total).abs() <= 1e-9);
            prop_assert!((bf.mbs_component - cf.mbs_component).abs() <= 1e-9);
            prop_assert!((bf.scbs_component - cf.scbs_component).abs() <= 1e-9);
            for (a, b) in bf.per_file.iter().zip(&cf.per_file) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
            prop_assert!((cf.total - cf.per_file.iter().sum::<f64>()).abs() <= 1e-9);
            prop_assert!((cf.total - cf.mbs_component - cf.scbs_component).abs() <= 1e-9);
        }

        #[test]
        fn adding_a_placement_never_hurts((inst, policy) in arb_case(8, 6)) {
            let inst = with_light_scbs_costs(&inst);
            let snap = cost_closed_form(&inst, &policy).unwrap();
            for n in 0..inst.num_scbs() {
                if policy.fill(n) >= inst.cache_size(n) {
                    continue;
                }
                for i in 0..inst.num_files() {
                    if policy.is_cached(n, i) {
                        continue;
                    }
                    let m = marginal_cost(&inst, &policy, &snap, n, i).unwrap();
                    prop_assert!(m <= snap.total + 1e-12);
                    let mut next = policy.clone();
                    next.set(n, i, true);
                    let full = cost_closed_form(&inst, &next).unwrap().total;
                    prop_assert!((m - full).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn unicast_dominates_when_scbs_are_free((inst, policy) in arb_case(6, 5)) {
            let mut p = inst.params().clone();
            p.cost_scbs_tx.iter_mut().for_each(|c| *c = 0.0);
            let inst = Instance::new(p).unwrap();
            let uni = cost_unicast(&inst, &policy).unwrap().total;
            let multi = cost_closed_form(&inst, &policy).unwrap().total;
            prop_assert!(uni + 1e-12 >= multi);
        }

        #[test]
        fn costs_scale_linearly((inst, policy) in arb_case(5, 4), alpha in 0.01f64..50.0) {
            let mut p = inst.params().clone();
            p.cost_backhaul *= alpha;
            p.cost_mbs_tx *= alpha;
            p.cost_scbs_tx.iter_mut().for_each(|c| *c *= alpha);
            let scaled = Instance::new(p).unwrap();
            let base = cost_closed_form(&inst, &policy).unwrap();
            let s = cost_closed_form(&scaled, &policy).unwrap();
            let tol = 1e-9 * (1.0 + alpha * base.total);
            prop_assert!((s.total - alpha * base.total).abs() <= tol);
            prop_assert!((s.mbs_component - alpha * base.mbs_component).abs() <= tol);
            prop_assert!((s.scbs_component - alpha * base.scbs_component).abs() <= tol);
            for (a, b) in s.per_file.iter().zip(&base.per_file) {
                prop_assert!((a - alpha * b).abs() <= tol);
            }
        }
    }
}
