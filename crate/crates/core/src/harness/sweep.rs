use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_scenario, run_comparison, ScenarioConfig, Scheme, SimSettings};
use crate::error::{invalid, MacpError, Result};

pub const CSV_HEADER: [&str; 8] = [
    "axis",
    "value",
    "scheme",
    "analytic_cost",
    "sim_cost",
    "sim_stderr",
    "replication",
    "seed",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Files per SCBS cache (absolute count).
    CacheSize,
    ZipfShape,
    Deadline,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::CacheSize => "cache_size",
            SweepAxis::ZipfShape => "zipf_shape",
            SweepAxis::Deadline => "deadline",
        }
    }

    /// Standard grids: caches at 10%..90% of the catalog, zipf shape
    /// 0.2..1.6, and periods {1, 2, 5, 10, 20, 50} s.
    pub fn default_values(self, config: &ScenarioConfig) -> Vec<f64> {
        match self {
            SweepAxis::CacheSize => (1..=9)
                .map(|tenth| (config.num_files as f64 * tenth as f64 / 10.0).round())
                .collect(),
            SweepAxis::ZipfShape => (1..=8).map(|k| k as f64 * 0.2).map(|a| (a * 10.0).round() / 10.0).collect(),
            SweepAxis::Deadline => vec![1.0, 2.0, 5.0, 10.0, 20.0, 50.0],
        }
    }

    fn apply(self, config: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = config.clone();
        match self {
            SweepAxis::CacheSize => {
                if !(value >= 0.0 && value.fract() == 0.0 && value.is_finite()) {
                    return invalid(format!("cache size must be a non-negative integer, got {value}"));
                }
                cfg.cache_size = value as usize;
            }
            SweepAxis::ZipfShape => {
                if !(value.is_finite() && value >= 0.0) {
                    return invalid(format!("zipf shape must be non-negative, got {value}"));
                }
                cfg.zipf_shape = value;
            }
            SweepAxis::Deadline => {
                if !(value.is_finite() && value > 0.0) {
                    return invalid(format!("deadline must be positive, got {value}"));
                }
                cfg.deadline = value;
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = MacpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cache_size" | "cache-size" => Ok(SweepAxis::CacheSize),
            "zipf_shape" | "zipf-shape" | "zipf" => Ok(SweepAxis::ZipfShape),
            "deadline" => Ok(SweepAxis::Deadline),
            other => invalid(format!(
                "unknown axis {other:?}, expected cache_size, zipf_shape or deadline"
            )),
        }
    }
}

/// SplitMix64 finaliser applied to `base + index * golden-ratio increment`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One (value, scheme, replication) measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub value: f64,
    pub scheme: Scheme,
    pub replication: usize,
    /// Scenario seed of this replication.
    pub seed: u64,
    pub analytic_cost: f64,
    pub sim_cost: Option<f64>,
    pub sim_stderr: Option<f64>,
}

/// Replication average for one (value, scheme).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub scheme: Scheme,
    pub analytic_cost: f64,
    pub sim_cost: Option<f64>,
    /// Standard error of the averaged simulated cost.
    pub sim_stderr: Option<f64>,
    /// `analytic_cost` relative to PAC-UT at the same value.
    pub ratio_to_pac_ut: f64,
}

/// Largest relative cost reductions of MAC-MT over the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Headline {
    pub max_reduction_vs_pac_mt: f64,
    pub at_value_vs_pac_mt: f64,
    pub max_reduction_vs_pac_ut: f64,
    pub at_value_vs_pac_ut: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub seed: u64,
    pub replications: usize,
    /// One row per (value, scheme), values in input order, schemes in [`Scheme::ALL`] order.
    pub rows: Vec<SweepRow>,
    pub replicate_rows: Vec<ReplicateRow>,
}

impl SweepResult {
    pub fn row(&self, value: f64, scheme: Scheme) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.scheme == scheme)
    }

    /// Averaged analytic costs of `scheme` in value order.
    pub fn series(&self, scheme: Scheme) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (r.value, r.analytic_cost))
            .collect()
    }

    pub fn headline(&self) -> Headline {
        let mut h = Headline {
            max_reduction_vs_pac_mt: f64::NEG_INFINITY,
            at_value_vs_pac_mt: f64::NAN,
            max_reduction_vs_pac_ut: f64::NEG_INFINITY,
            at_value_vs_pac_ut: f64::NAN,
            seed: self.seed,
        };
        let mac = self.series(Scheme::MacMt);
        let pmt = self.series(Scheme::PacMt);
        let put = self.series(Scheme::PacUt);
        for ((&(v, m), &(_, p)), &(_, u)) in mac.iter().zip(&pmt).zip(&put) {
            if p > 0.0 && 1.0 - m / p > h.max_reduction_vs_pac_mt {
                h.max_reduction_vs_pac_mt = 1.0 - m / p;
                h.at_value_vs_pac_mt = v;
            }
            if u > 0.0 && 1.0 - m / u > h.max_reduction_vs_pac_ut {
                h.max_reduction_vs_pac_ut = 1.0 - m / u;
                h.at_value_vs_pac_ut = v;
            }
        }
        h
    }

    /// Writes per-replication rows, then the averages with replication `mean`
    /// and the master seed. Simulation columns are empty for analytic-only runs.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.replicate_rows {
            w.write_record([
                self.axis.name().to_string(),
                r.value.to_string(),
                r.scheme.name().to_string(),
                r.analytic_cost.to_string(),
                opt(r.sim_cost),
                opt(r.sim_stderr),
                r.replication.to_string(),
                r.seed.to_string(),
            ])?;
        }
        for r in &self.rows {
            w.write_record([
                self.axis.name().to_string(),
                r.value.to_string(),
                r.scheme.name().to_string(),
                r.analytic_cost.to_string(),
                opt(r.sim_cost),
                opt(r.sim_stderr),
                "mean".to_string(),
                self.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

/// Runs the three schemes at every axis value for `replications` independent
/// rate draws and averages them.
///
/// Replication `r` uses scenario seed `derive_seed(config.seed, r)` at every
/// value, so curves along the axis share their rate draws. When simulating,
/// the replication's seed also feeds [`run_comparison`].
pub fn sweep(
    config: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    replications: usize,
    sim_periods: Option<u64>,
) -> Result<SweepResult> {
    if values.is_empty() {
        return invalid("sweep needs at least one value");
    }
    if replications == 0 {
        return invalid("replications must be at least 1");
    }
    config.validate()?;
    let configs = values
        .iter()
        .map(|&v| axis.apply(config, v))
        .collect::<Result<Vec<_>>>()?;

    let jobs: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|v| (0..replications).map(move |r| (v, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(v, r)| {
            let seed = derive_seed(config.seed, r as u64);
            let cfg = ScenarioConfig {
                seed,
                ..configs[v].clone()
            };
            let instance = generate_scenario(&cfg)?;
            let sim = sim_periods.map(|periods| SimSettings { periods, seed });
            let rows = run_comparison(&instance, sim)?;
            Ok(rows
                .into_iter()
                .map(|s| ReplicateRow {
                    value: values[v],
                    scheme: s.scheme,
                    replication: r,
                    seed,
                    analytic_cost: s.analytic_cost,
                    sim_cost: s.sim.as_ref().map(|x| x.mean_cost_per_period),
                    sim_stderr: s.sim.as_ref().map(|x| x.std_error),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let replicate_rows: Vec<ReplicateRow> = results.into_iter().flatten().collect();

    let reps = replications as f64;
    let mut rows = Vec::with_capacity(values.len() * Scheme::ALL.len());
    for (v, &value) in values.iter().enumerate() {
        let group = &replicate_rows[v * replications * 3..(v + 1) * replications * 3];
        let mean_of = |scheme: Scheme, f: &dyn Fn(&ReplicateRow) -> Option<f64>| -> Option<f64> {
            group
                .iter()
                .filter(|r| r.scheme == scheme)
                .map(f)
                .sum::<Option<f64>>()
                .map(|s| s / reps)
        };
        let pac_ut = mean_of(Scheme::PacUt, &|r| Some(r.analytic_cost)).unwrap_or(0.0);
        for scheme in Scheme::ALL {
            let analytic_cost = mean_of(scheme, &|r| Some(r.analytic_cost)).unwrap_or(0.0);
            let sim_stderr = group
                .iter()
                .filter(|r| r.scheme == scheme)
                .map(|r| r.sim_stderr.map(|s| s * s))
                .sum::<Option<f64>>()
                .map(|var| var.sqrt() / reps);
            rows.push(SweepRow {
                value,
                scheme,
                analytic_cost,
                sim_cost: mean_of(scheme, &|r| r.sim_cost),
                sim_stderr,
                ratio_to_pac_ut: if pac_ut > 0.0 { analytic_cost / pac_ut } else { f64::NAN },
            });
        }
    }

    Ok(SweepResult {
        axis,
        seed: config.seed,
        replications,
        rows,
        replicate_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ScenarioConfig {
        ScenarioConfig {
            num_scbs: 4,
            num_files: 10,
            cache_size: 2,
            ..Default::default()
        }
    }

    #[test]
    fn default_grids() {
        let cfg = ScenarioConfig::default();
        assert_eq!(
            SweepAxis::CacheSize.default_values(&cfg),
            vec![10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0]
        );
        assert_eq!(
            SweepAxis::ZipfShape.default_values(&cfg),
            vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6]
        );
        assert_eq!(SweepAxis::Deadline.default_values(&cfg).len(), 6);
    }

    #[test]
    fn row_layout_and_csv() {
        let res = sweep(&small(), SweepAxis::CacheSize, &[1.0, 3.0], 2, None).unwrap();
        assert_eq!(res.rows.len(), 6);
        assert_eq!(res.replicate_rows.len(), 12);
        assert!(res.rows.iter().all(|r| r.sim_cost.is_none()));
        let csv = res.to_csv_string().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "axis,value,scheme,analytic_cost,sim_cost,sim_stderr,replication,seed"
        );
        assert!(lines.next().unwrap().starts_with("cache_size,1,PAC-UT,"));
        assert_eq!(csv.lines().count(), 1 + 12 + 6);
        assert!(csv.lines().last().unwrap().contains(",mean,2014"));
    }

    #[test]
    fn averages_match_replicates() {
        // short periods keep the multicast cost random
        let cfg = ScenarioConfig {
            deadline: 0.5,
            ..small()
        };
        let res = sweep(&cfg, SweepAxis::ZipfShape, &[0.5], 3, Some(2000)).unwrap();
        for row in &res.rows {
            let reps: Vec<_> = res.replicate_rows.iter().filter(|r| r.scheme == row.scheme).collect();
            let mean = reps.iter().map(|r| r.analytic_cost).sum::<f64>() / 3.0;
            assert!((row.analytic_cost - mean).abs() < 1e-12);
            assert!(row.sim_cost.is_some() && row.sim_stderr.unwrap() > 0.0);
        }
        assert_eq!(res.row(0.5, Scheme::PacUt).unwrap().ratio_to_pac_ut, 1.0);
    }

    #[test]
    fn sweeps_are_deterministic() {
        let a = sweep(&small(), SweepAxis::Deadline, &[1.0, 5.0], 2, Some(500)).unwrap();
        let b = sweep(&small(), SweepAxis::Deadline, &[1.0, 5.0], 2, Some(500)).unwrap();
        assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
    }

    #[test]
    fn invalid_sweeps() {
        assert!(sweep(&small(), SweepAxis::Deadline, &[], 1, None).is_err());
        assert!(sweep(&small(), SweepAxis::Deadline, &[1.0], 0, None).is_err());
        assert!(sweep(&small(), SweepAxis::Deadline, &[0.0], 1, None).is_err());
        assert!(sweep(&small(), SweepAxis::CacheSize, &[2.5], 1, None).is_err());
        assert!(sweep(&small(), SweepAxis::ZipfShape, &[-1.0], 1, None).is_err());
        assert!("bogus".parse::<SweepAxis>().is_err());
        assert_eq!("zipf".parse::<SweepAxis>().unwrap(), SweepAxis::ZipfShape);
    }

    #[test]
    fn seeds_are_spread() {
        let seeds: Vec<u64> = (0..4).map(|r| derive_seed(2014, r)).collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(seeds[i], seeds[j]);
            }
        }
    }
}
