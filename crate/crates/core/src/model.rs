//! Problem data: instances, caching policies, area subsets and the demand
//! probabilities derived from Poisson arrivals.
//!
//! Areas are numbered the way the demand matrix is laid out: area `0` is the
//! region covered only by the MBS, area `n + 1` is the coverage area of SCBS
//! `n` (SCBS indices are zero-based everywhere in this crate).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, MacpError, Result};

/// Area index of the MBS-only region.
pub const MBS_ONLY_AREA: usize = 0;

/// Largest number of SCBSs an [`AreaSubset`] can address.
pub const MAX_SUBSET_SCBS: usize = 63;

/// Probability of at least one Poisson arrival of intensity `rate` within a
/// period of length `deadline`: `1 - exp(-rate * deadline)`.
pub fn request_probability(rate: f64, deadline: f64) -> Result<f64> {
    if !(rate.is_finite() && rate >= 0.0) {
        return invalid(format!("rate must be finite and non-negative, got {rate}"));
    }
    if !(deadline.is_finite() && deadline > 0.0) {
        return invalid(format!("deadline must be finite and positive, got {deadline}"));
    }
    Ok(-(-rate * deadline).exp_m1())
}

/// Raw instance fields, exactly as they appear in the JSON interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub num_scbs: usize,
    pub num_files: usize,
    pub cache_size: Vec<usize>,
    pub cost_backhaul: f64,
    pub cost_mbs_tx: f64,
    pub cost_scbs_tx: Vec<f64>,
    /// `num_scbs + 1` rows of per-file request rates; row 0 is the MBS-only area.
    pub demand: Vec<Vec<f64>>,
    pub deadline: f64,
}

/// A validated problem instance.
///
/// Cache sizes larger than the catalog are clamped to `num_files`. Per-area
/// request probabilities are computed once on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceParams", into = "InstanceParams")]
pub struct Instance {
    params: InstanceParams,
    /// `p[area][file]`, same layout as `demand`.
    probs: Vec<Vec<f64>>,
}

fn check_cost(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} must be finite and non-negative, got {value}"))
    }
}

impl Instance {
    pub fn new(mut params: InstanceParams) -> Result<Self> {
        let n = params.num_scbs;
        let files = params.num_files;
        if n == 0 {
            return invalid("num_scbs must be positive");
        }
        if files == 0 {
            return invalid("num_files must be positive");
        }
        if params.cache_size.len() != n {
            return invalid(format!(
                "cache_size has {} entries, expected {n}",
                params.cache_size.len()
            ));
        }
        if params.cost_scbs_tx.len() != n {
            return invalid(format!(
                "cost_scbs_tx has {} entries, expected {n}",
                params.cost_scbs_tx.len()
            ));
        }
        if params.demand.len() != n + 1 {
            return invalid(format!(
                "demand has {} rows, expected {} (row 0 is the MBS-only area)",
                params.demand.len(),
                n + 1
            ));
        }
        check_cost("cost_backhaul", params.cost_backhaul)?;
        check_cost("cost_mbs_tx", params.cost_mbs_tx)?;
        for (idx, &c) in params.cost_scbs_tx.iter().enumerate() {
            check_cost(&format!("cost_scbs_tx[{idx}]"), c)?;
            if c > params.cost_mbs_tx {
                return invalid(format!(
                    "cost_scbs_tx[{idx}] = {c} exceeds cost_mbs_tx = {}",
                    params.cost_mbs_tx
                ));
            }
        }
        if !(params.deadline.is_finite() && params.deadline > 0.0) {
            return invalid(format!(
                "deadline must be finite and positive, got {}",
                params.deadline
            ));
        }
        let mut probs = Vec::with_capacity(n + 1);
        for (area, row) in params.demand.iter().enumerate() {
            if row.len() != files {
                return invalid(format!(
                    "demand row {area} has {} entries, expected {files}",
                    row.len()
                ));
            }
            let p_row = row
                .iter()
                .map(|&rate| request_probability(rate, params.deadline))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| MacpError::InvalidArgument(format!("demand row {area}: {e}")))?;
            probs.push(p_row);
        }
        for s in params.cache_size.iter_mut() {
            *s = (*s).min(files);
        }
        Ok(Self { params, probs })
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    pub fn num_scbs(&self) -> usize {
        self.params.num_scbs
    }

    pub fn num_files(&self) -> usize {
        self.params.num_files
    }

    pub fn num_areas(&self) -> usize {
        self.params.num_scbs + 1
    }

    pub fn cache_size(&self, scbs: usize) -> usize {
        self.params.cache_size[scbs]
    }

    pub fn cost_backhaul(&self) -> f64 {
        self.params.cost_backhaul
    }

    pub fn cost_mbs_tx(&self) -> f64 {
        self.params.cost_mbs_tx
    }

    /// `c_B + c_W`, the price of one MBS transmission including the backhaul fetch.
    pub fn mbs_cost(&self) -> f64 {
        self.params.cost_backhaul + self.params.cost_mbs_tx
    }

    pub fn scbs_cost(&self, scbs: usize) -> f64 {
        self.params.cost_scbs_tx[scbs]
    }

    pub fn deadline(&self) -> f64 {
        self.params.deadline
    }

    pub fn rate(&self, area: usize, file: usize) -> f64 {
        self.params.demand[area][file]
    }

    /// Probability of at least one request for `file` from `area` in one period.
    pub fn area_probability(&self, area: usize, file: usize) -> f64 {
        self.probs[area][file]
    }

    /// Total number of placements a full run of the greedy fills: `Σ_n min(S_n, I)`.
    pub fn total_capacity(&self) -> usize {
        self.params.cache_size.iter().sum()
    }

    /// Same instance with a different period length.
    pub fn with_deadline(&self, deadline: f64) -> Result<Self> {
        let mut params = self.params.clone();
        params.deadline = deadline;
        Self::new(params)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl TryFrom<InstanceParams> for Instance {
    type Error = MacpError;

    fn try_from(params: InstanceParams) -> Result<Self> {
        Self::new(params)
    }
}

impl From<Instance> for InstanceParams {
    fn from(instance: Instance) -> Self {
        instance.params
    }
}

/// A set of areas, stored as a bitmask: bit 0 is the MBS-only area, bit
/// `n + 1` is SCBS `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct AreaSubset(u64);

impl AreaSubset {
    pub const EMPTY: AreaSubset = AreaSubset(0);

    pub fn from_bits(bits: u64) -> Self {
        AreaSubset(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// Builds a subset from area indices (0 = MBS-only area, `n + 1` = SCBS `n`).
    pub fn from_areas<I: IntoIterator<Item = usize>>(areas: I) -> Result<Self> {
        let mut bits = 0u64;
        for area in areas {
            if area > MAX_SUBSET_SCBS {
                return invalid(format!(
                    "area {area} out of range, subsets address at most {MAX_SUBSET_SCBS} SCBSs"
                ));
            }
            bits |= 1 << area;
        }
        Ok(AreaSubset(bits))
    }

    pub fn with_mbs_only(self) -> Self {
        AreaSubset(self.0 | 1)
    }

    pub fn with_scbs(self, scbs: usize) -> Self {
        assert!(scbs < MAX_SUBSET_SCBS, "SCBS index {scbs} out of range");
        AreaSubset(self.0 | (1 << (scbs + 1)))
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains_area(self, area: usize) -> bool {
        area <= MAX_SUBSET_SCBS && self.0 & (1 << area) != 0
    }

    pub fn contains_mbs_only(self) -> bool {
        self.0 & 1 != 0
    }

    pub fn contains_scbs(self, scbs: usize) -> bool {
        self.contains_area(scbs + 1)
    }

    /// Area indices in ascending order.
    pub fn areas(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..=MAX_SUBSET_SCBS).filter(move |&a| bits & (1 << a) != 0)
    }

    /// Zero-based SCBS indices in ascending order.
    pub fn scbs(self) -> impl Iterator<Item = usize> {
        self.areas().filter(|&a| a != MBS_ONLY_AREA).map(|a| a - 1)
    }

    /// Highest area index present, if any.
    pub fn max_area(self) -> Option<usize> {
        (self.0 != 0).then(|| 63 - self.0.leading_zeros() as usize)
    }
}

impl fmt::Display for AreaSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, area) in self.areas().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            if area == MBS_ONLY_AREA {
                write!(f, "n0")?;
            } else {
                write!(f, "{}", area)?;
            }
        }
        write!(f, "}}")
    }
}

impl Serialize for AreaSubset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.areas())
    }
}

impl<'de> Deserialize<'de> for AreaSubset {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let areas = Vec::<usize>::deserialize(deserializer)?;
        AreaSubset::from_areas(areas).map_err(serde::de::Error::custom)
    }
}

/// Probability that, for `file`, exactly the areas in `subset` see at least
/// one request in a period. Areas are independent; the product runs over all
/// `N + 1` areas.
pub fn subset_probability(instance: &Instance, subset: AreaSubset, file: usize) -> Result<f64> {
    if file >= instance.num_files() {
        return invalid(format!(
            "file {file} out of range for {} files",
            instance.num_files()
        ));
    }
    if let Some(max) = subset.max_area() {
        if max >= instance.num_areas() {
            return invalid(format!(
                "subset {subset} references area {max}, instance has {} areas",
                instance.num_areas()
            ));
        }
    }
    let mut prob = 1.0;
    for area in 0..instance.num_areas() {
        let p = instance.area_probability(area, file);
        prob *= if subset.contains_area(area) { p } else { 1.0 - p };
    }
    Ok(prob)
}

/// Whether the MBS has to multicast `file` when exactly the areas in `subset`
/// request it: some requester is in the MBS-only area or at an SCBS that does
/// not cache the file.
pub fn mbs_triggered(policy: &CachingPolicy, subset: AreaSubset, file: usize) -> Result<bool> {
    if subset.is_empty() {
        return invalid("trigger indicator is only defined for non-empty subsets");
    }
    if file >= policy.num_files() {
        return invalid(format!(
            "file {file} out of range for {} files",
            policy.num_files()
        ));
    }
    if let Some(max) = subset.max_area() {
        if max > policy.num_scbs() {
            return invalid(format!(
                "subset {subset} references area {max}, policy has {} SCBSs",
                policy.num_scbs()
            ));
        }
    }
    Ok(subset.contains_mbs_only() || subset.scbs().any(|n| !policy.is_cached(n, file)))
}

/// Binary placement matrix: `placement[n][i]` is true when SCBS `n` caches file `i`.
///
/// Serialises as an `N × I` array of 0/1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CachingPolicy {
    num_scbs: usize,
    num_files: usize,
    cells: Vec<bool>,
}

impl CachingPolicy {
    pub fn empty(num_scbs: usize, num_files: usize) -> Self {
        Self {
            num_scbs,
            num_files,
            cells: vec![false; num_scbs * num_files],
        }
    }

    pub fn empty_for(instance: &Instance) -> Self {
        Self::empty(instance.num_scbs(), instance.num_files())
    }

    /// Builds a policy from 0/1 rows; all rows must have the same length.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let num_files = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(rows.len() * num_files);
        for (n, row) in rows.iter().enumerate() {
            if row.len() != num_files {
                return invalid(format!(
                    "placement row {n} has {} entries, expected {num_files}",
                    row.len()
                ));
            }
            for &v in row {
                match v {
                    0 => cells.push(false),
                    1 => cells.push(true),
                    other => return invalid(format!("placement entries must be 0 or 1, got {other}")),
                }
            }
        }
        Ok(Self {
            num_scbs: rows.len(),
            num_files,
            cells,
        })
    }

    /// Builds a policy from `(scbs, file)` pairs.
    pub fn from_placements<I>(num_scbs: usize, num_files: usize, placements: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut policy = Self::empty(num_scbs, num_files);
        for (n, i) in placements {
            if n >= num_scbs || i >= num_files {
                return invalid(format!("placement ({n}, {i}) out of range"));
            }
            policy.set(n, i, true);
        }
        Ok(policy)
    }

    pub fn num_scbs(&self) -> usize {
        self.num_scbs
    }

    pub fn num_files(&self) -> usize {
        self.num_files
    }

    pub fn is_cached(&self, scbs: usize, file: usize) -> bool {
        self.cells[scbs * self.num_files + file]
    }

    pub fn set(&mut self, scbs: usize, file: usize, cached: bool) {
        self.cells[scbs * self.num_files + file] = cached;
    }

    pub fn row(&self, scbs: usize) -> &[bool] {
        &self.cells[scbs * self.num_files..(scbs + 1) * self.num_files]
    }

    /// Number of files cached at `scbs`.
    pub fn fill(&self, scbs: usize) -> usize {
        self.row(scbs).iter().filter(|&&c| c).count()
    }

    pub fn placement_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    /// SCBSs caching `file`.
    pub fn holders(&self, file: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_scbs).filter(move |&n| self.is_cached(n, file))
    }

    pub fn to_rows(&self) -> Vec<Vec<u8>> {
        (0..self.num_scbs)
            .map(|n| self.row(n).iter().map(|&c| u8::from(c)).collect())
            .collect()
    }

    /// Checks dimensions against `instance` and every row against its cache size.
    pub fn check_feasible(&self, instance: &Instance) -> Result<()> {
        if self.num_scbs != instance.num_scbs() || self.num_files != instance.num_files() {
            return invalid(format!(
                "policy is {}x{}, instance is {}x{}",
                self.num_scbs,
                self.num_files,
                instance.num_scbs(),
                instance.num_files()
            ));
        }
        for n in 0..self.num_scbs {
            let fill = self.fill(n);
            if fill > instance.cache_size(n) {
                return invalid(format!(
                    "SCBS {n} caches {fill} files, capacity is {}",
                    instance.cache_size(n)
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

impl Serialize for CachingPolicy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CachingPolicy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<u8>>::deserialize(deserializer)?;
        CachingPolicy::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Two SCBSs, three files, one cache slot each, `c_B + c_W = 1`, free SCBS
    /// transmissions, `d = 1`.
    pub(crate) fn motivating_instance() -> Instance {
        Instance::new(InstanceParams {
            num_scbs: 2,
            num_files: 3,
            cache_size: vec![1, 1],
            cost_backhaul: 0.5,
            cost_mbs_tx: 0.5,
            cost_scbs_tx: vec![0.0, 0.0],
            demand: vec![
                vec![0.0, 0.0, 0.0],
                vec![0.51, 0.49, 0.0],
                vec![0.51, 0.0, 0.49],
            ],
            deadline: 1.0,
        })
        .unwrap()
    }

    fn round4(x: f64) -> f64 {
        (x * 1e4).round() / 1e4
    }

    #[test]
    fn request_probability_matches_worked_example() {
        assert_eq!(round4(request_probability(0.51, 1.0).unwrap()), 0.3995);
        assert_eq!(round4(request_probability(0.49, 1.0).unwrap()), 0.3874);
        assert_eq!(request_probability(0.0, 10.0).unwrap(), 0.0);
    }

    #[test]
    fn request_probability_rejects_bad_arguments() {
        assert!(request_probability(-0.1, 1.0).is_err());
        assert!(request_probability(1.0, 0.0).is_err());
        assert!(request_probability(1.0, -1.0).is_err());
        assert!(request_probability(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn subset_probability_examples() {
        let inst = motivating_instance();
        let both = AreaSubset::EMPTY.with_scbs(0).with_scbs(1);
        let p = subset_probability(&inst, both, 0).unwrap();
        let p1 = request_probability(0.51, 1.0).unwrap();
        assert!((p - p1 * p1).abs() < 1e-15);
        assert_eq!(round4(p), 0.1596);
        assert!(subset_probability(&inst, both, 3).is_err());
        assert!(subset_probability(&inst, AreaSubset::from_bits(1 << 3), 0).is_err());

        let mut params = inst.params().clone();
        params.demand = vec![vec![0.0; 3]; 3];
        let zero = Instance::new(params).unwrap();
        assert_eq!(subset_probability(&zero, AreaSubset::EMPTY, 1).unwrap(), 1.0);
    }

    #[test]
    fn trigger_examples() {
        let mut policy = CachingPolicy::empty(2, 3);
        let n0 = AreaSubset::EMPTY.with_mbs_only();
        assert!(mbs_triggered(&policy, n0, 0).unwrap());
        policy.set(0, 0, true);
        assert!(mbs_triggered(&policy, n0, 0).unwrap());
        assert!(!mbs_triggered(&policy, AreaSubset::EMPTY.with_scbs(0), 0).unwrap());
        let both = AreaSubset::EMPTY.with_scbs(0).with_scbs(1);
        assert!(mbs_triggered(&policy, both, 0).unwrap());
        assert!(mbs_triggered(&policy, AreaSubset::EMPTY, 0).is_err());
    }

    #[test]
    fn instance_validation() {
        let base = motivating_instance().params().clone();

        let mut p = base.clone();
        p.cost_scbs_tx = vec![0.6, 0.0];
        assert!(Instance::new(p).is_err(), "c_n above c_W must be rejected");

        let mut p = base.clone();
        p.demand.pop();
        assert!(Instance::new(p).is_err());

        let mut p = base.clone();
        p.deadline = 0.0;
        assert!(Instance::new(p).is_err());

        let mut p = base.clone();
        p.demand[1][0] = -1.0;
        assert!(Instance::new(p).is_err());

        let mut p = base;
        p.cache_size = vec![7, 2];
        let inst = Instance::new(p).unwrap();
        assert_eq!(inst.cache_size(0), 3);
        assert_eq!(inst.cache_size(1), 2);
    }

    #[test]
    fn instance_json_uses_normative_field_names() {
        let inst = motivating_instance();
        let value: serde_json::Value = serde_json::from_str(&inst.to_json().unwrap()).unwrap();
        for key in [
            "num_scbs",
            "num_files",
            "cache_size",
            "cost_backhaul",
            "cost_mbs_tx",
            "cost_scbs_tx",
            "demand",
            "deadline",
        ] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert_eq!(Instance::from_json(&inst.to_json().unwrap()).unwrap(), inst);
    }

    #[test]
    fn policy_json_is_zero_one_matrix() {
        let policy = CachingPolicy::from_placements(2, 3, [(0, 1), (1, 2)]).unwrap();
        assert_eq!(policy.to_json().unwrap(), "[[0,1,0],[0,0,1]]");
        assert_eq!(CachingPolicy::from_json("[[0,1,0],[0,0,1]]").unwrap(), policy);
        assert!(CachingPolicy::from_json("[[0,2,0]]").is_err());
        assert!(CachingPolicy::from_json("[[0,1],[1]]").is_err());
    }

    #[test]
    fn feasibility_checks_capacity() {
        let inst = motivating_instance();
        let policy = CachingPolicy::from_placements(2, 3, [(0, 0), (0, 1)]).unwrap();
        assert!(policy.check_feasible(&inst).is_err());
        assert!(CachingPolicy::empty(3, 3).check_feasible(&inst).is_err());
    }

    fn arb_instance(max_scbs: usize) -> impl Strategy<Value = Instance> {
        (1..=max_scbs, 1usize..=3, 0.1f64..3.0).prop_flat_map(|(n, files, d)| {
            prop::collection::vec(prop::collection::vec(0.0f64..2.0, files), n + 1).prop_map(
                move |demand| {
                    Instance::new(InstanceParams {
                        num_scbs: n,
                        num_files: files,
                        cache_size: vec![1; n],
                        cost_backhaul: 1.0,
                        cost_mbs_tx: 1.0,
                        cost_scbs_tx: vec![0.0; n],
                        demand,
                        deadline: d,
                    })
                    .unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn subset_probabilities_form_a_distribution(inst in arb_instance(10)) {
            for file in 0..inst.num_files() {
                let total: f64 = (0..1u64 << inst.num_areas())
                    .map(|bits| subset_probability(&inst, AreaSubset::from_bits(bits), file).unwrap())
                    .sum();
                prop_assert!((total - 1.0).abs() < 1e-12, "sum = {}", total);
            }
        }

        #[test]
        fn request_probability_is_monotone(r1 in 0.0f64..20.0, r2 in 0.0f64..20.0, d1 in 0.01f64..20.0, d2 in 0.01f64..20.0) {
            let (rlo, rhi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let lo = request_probability(rlo, dlo).unwrap();
            prop_assert!(lo <= request_probability(rhi, dlo).unwrap());
            prop_assert!(lo <= request_probability(rlo, dhi).unwrap());
            prop_assert!((0.0..=1.0).contains(&lo));
        }

        #[test]
        fn trigger_characterisation(n in 1usize..8, bits in 1u64..512, cells in prop::collection::vec(any::<bool>(), 8)) {
            let bits = bits & ((1u64 << (n + 1)) - 1);
            prop_assume!(bits != 0);
            let subset = AreaSubset::from_bits(bits);
            let mut policy = CachingPolicy::empty(n, 1);
            for (k, &cell) in cells.iter().take(n).enumerate() {
                policy.set(k, 0, cell);
            }
            let expected = !(subset.contains_mbs_only() || subset.scbs().any(|k| !cells[k]));
            prop_assert_eq!(!mbs_triggered(&policy, subset, 0).unwrap(), expected);

            // Dropping a cached copy never turns a triggered subset into a local one.
            for k in 0..n {
                if policy.is_cached(k, 0) {
                    let mut reduced = policy.clone();
                    reduced.set(k, 0, false);
                    if mbs_triggered(&policy, subset, 0).unwrap() {
                        prop_assert!(mbs_triggered(&reduced, subset, 0).unwrap());
                    }
                }
            }
        }
    }
}
