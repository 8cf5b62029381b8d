//! Monte Carlo replay of Poisson demand against a fixed policy.
//!
//! Every period draws `K ~ Poisson(λ·d)` requests per area and file. Requests
//! are served at the period boundary, so arrival times are never sampled.
//!
//! Period `t` draws from its own ChaCha8 stream (`stream = t`) seeded by the
//! master seed, and periods are folded in fixed-size chunks merged in order, so
//! the report is bit-identical whatever the thread count.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{CachingPolicy, Instance};

const CHUNK_PERIODS: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Unicast,
    Multicast,
}

impl std::str::FromStr for SimMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "unicast" => Ok(SimMode::Unicast),
            "multicast" => Ok(SimMode::Multicast),
            other => Err(format!("unknown mode {other:?}, expected unicast or multicast")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub periods: u64,
    pub mode: SimMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub mean_cost_per_period: f64,
    /// Sample standard deviation over `sqrt(periods)`; 0 for a single period.
    pub std_error: f64,
    pub periods: u64,
    pub mbs_transmissions: u64,
    pub scbs_transmissions: u64,
    pub unicast_transmissions: u64,
}

/// One row of the per-period trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: u64,
    pub cost: f64,
    pub mbs_tx: u64,
    pub scbs_tx: u64,
    pub unicast_tx: u64,
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
    mbs_tx: u64,
    scbs_tx: u64,
    unicast_tx: u64,
}

impl Accumulator {
    fn push(&mut self, rec: &PeriodRecord) {
        self.count += 1;
        let delta = rec.cost - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (rec.cost - self.mean);
        self.mbs_tx += rec.mbs_tx;
        self.scbs_tx += rec.scbs_tx;
        self.unicast_tx += rec.unicast_tx;
    }

    fn merge(mut self, other: &Accumulator) -> Accumulator {
        if other.count == 0 {
            return self;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / total as f64;
        self.count = total;
        self.mbs_tx += other.mbs_tx;
        self.scbs_tx += other.scbs_tx;
        self.unicast_tx += other.unicast_tx;
        self
    }

    fn report(&self) -> SimReport {
        let std_error = if self.count > 1 {
            (self.m2 / (self.count - 1) as f64).sqrt() / (self.count as f64).sqrt()
        } else {
            0.0
        };
        SimReport {
            mean_cost_per_period: self.mean,
            std_error,
            periods: self.count,
            mbs_transmissions: self.mbs_tx,
            scbs_transmissions: self.scbs_tx,
            unicast_transmissions: self.unicast_tx,
        }
    }
}

struct Sampler<'a> {
    instance: &'a Instance,
    policy: &'a CachingPolicy,
    mode: SimMode,
    seed: u64,
    /// `[area * I + file]`, `None` where the mean is zero.
    dists: Vec<Option<Poisson<f64>>>,
}

impl<'a> Sampler<'a> {
    fn new(instance: &'a Instance, policy: &'a CachingPolicy, config: &SimConfig) -> Result<Self> {
        let d = instance.deadline();
        let mut dists = Vec::with_capacity(instance.num_areas() * instance.num_files());
        for area in 0..instance.num_areas() {
            for file in 0..instance.num_files() {
                let mean = instance.rate(area, file) * d;
                dists.push(if mean > 0.0 {
                    Some(Poisson::new(mean).map_err(|e| {
                        crate::MacpError::InvalidArgument(format!("Poisson mean {mean}: {e}"))
                    })?)
                } else {
                    None
                });
            }
        }
        Ok(Self {
            instance,
            policy,
            mode: config.mode,
            seed: config.seed,
            dists,
        })
    }

    fn period(&self, period: u64, counts: &mut [u64]) -> PeriodRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(period);
        for (slot, dist) in counts.iter_mut().zip(&self.dists) {
            *slot = dist.as_ref().map_or(0, |p| p.sample(&mut rng) as u64);
        }

        let files = self.instance.num_files();
        let mbs_cost = self.instance.mbs_cost();
        let mut rec = PeriodRecord {
            period,
            cost: 0.0,
            mbs_tx: 0,
            scbs_tx: 0,
            unicast_tx: 0,
        };
        for file in 0..files {
            let from_mbs_area = counts[file];
            match self.mode {
                SimMode::Multicast => {
                    let mut triggered = from_mbs_area > 0;
                    let mut local_cost = 0.0;
                    let mut local_tx = 0;
                    for n in 0..self.instance.num_scbs() {
                        if counts[(n + 1) * files + file] == 0 {
                            continue;
                        }
                        if self.policy.is_cached(n, file) {
                            local_cost += self.instance.scbs_cost(n);
                            local_tx += 1;
                        } else {
                            triggered = true;
                        }
                    }
                    if triggered {
                        rec.cost += mbs_cost;
                        rec.mbs_tx += 1;
                    } else {
                        rec.cost += local_cost;
                        rec.scbs_tx += local_tx;
                    }
                }
                SimMode::Unicast => {
                    rec.cost += from_mbs_area as f64 * mbs_cost;
                    rec.unicast_tx += from_mbs_area;
                    for n in 0..self.instance.num_scbs() {
                        let k = counts[(n + 1) * files + file];
                        let unit = if self.policy.is_cached(n, file) {
                            self.instance.scbs_cost(n)
                        } else {
                            mbs_cost
                        };
                        rec.cost += k as f64 * unit;
                        rec.unicast_tx += k;
                    }
                }
            }
        }
        rec
    }

    fn run(&self, periods: u64, keep_trace: bool) -> (Accumulator, Vec<PeriodRecord>) {
        let chunks = periods.div_ceil(CHUNK_PERIODS);
        let cells = self.dists.len();
        let partials: Vec<(Accumulator, Vec<PeriodRecord>)> = (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let start = chunk * CHUNK_PERIODS;
                let end = (start + CHUNK_PERIODS).min(periods);
                let mut counts = vec![0u64; cells];
                let mut acc = Accumulator::default();
                let mut trace = Vec::new();
                for t in start..end {
                    let rec = self.period(t, &mut counts);
                    acc.push(&rec);
                    if keep_trace {
                        trace.push(rec);
                    }
                }
                (acc, trace)
            })
            .collect();
        let mut total = Accumulator::default();
        let mut trace = Vec::new();
        for (acc, part) in partials {
            total = total.merge(&acc);
            trace.extend(part);
        }
        (total, trace)
    }
}

fn check(instance: &Instance, policy: &CachingPolicy, config: &SimConfig) -> Result<()> {
    policy.check_feasible(instance)?;
    if config.periods == 0 {
        return invalid("periods must be at least 1");
    }
    Ok(())
}

pub fn simulate(instance: &Instance, policy: &CachingPolicy, config: &SimConfig) -> Result<SimReport> {
    check(instance, policy, config)?;
    let (acc, _) = Sampler::new(instance, policy, config)?.run(config.periods, false);
    Ok(acc.report())
}

/// Like [`simulate`], also returning every period's record.
pub fn simulate_with_trace(
    instance: &Instance,
    policy: &CachingPolicy,
    config: &SimConfig,
) -> Result<(SimReport, Vec<PeriodRecord>)> {
    check(instance, policy, config)?;
    let (acc, trace) = Sampler::new(instance, policy, config)?.run(config.periods, true);
    Ok((acc.report(), trace))
}

/// Writes `period,cost,mbs_tx,scbs_tx,unicast_tx` rows.
pub fn write_trace_csv<W: Write>(records: &[PeriodRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for rec in records {
        writer.serialize(rec)?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::motivating_instance;
    use crate::objective::{cost_closed_form, cost_unicast};

    fn config(mode: SimMode, periods: u64) -> SimConfig {
        SimConfig {
            periods,
            mode,
            seed: 7,
        }
    }

    #[test]
    fn zero_demand_is_free() {
        let mut p = motivating_instance().params().clone();
        p.demand = vec![vec![0.0; 3]; 3];
        let inst = Instance::new(p).unwrap();
        let policy = CachingPolicy::empty_for(&inst);
        for mode in [SimMode::Unicast, SimMode::Multicast] {
            let r = simulate(&inst, &policy, &config(mode, 500)).unwrap();
            assert_eq!(r.mean_cost_per_period, 0.0);
            assert_eq!(r.std_error, 0.0);
            assert_eq!(
                (r.mbs_transmissions, r.scbs_transmissions, r.unicast_transmissions),
                (0, 0, 0)
            );
        }
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let inst = motivating_instance();
        let policy = CachingPolicy::from_placements(2, 3, [(0, 1), (1, 2)]).unwrap();
        let cfg = config(SimMode::Multicast, 5000);
        let (a, ta) = simulate_with_trace(&inst, &policy, &cfg).unwrap();
        let (b, tb) = simulate_with_trace(&inst, &policy, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!(simulate(&inst, &policy, &cfg).unwrap(), a);
        let other = simulate(&inst, &policy, &SimConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(other.mean_cost_per_period, a.mean_cost_per_period);
    }

    #[test]
    fn trace_is_consistent_with_report() {
        let inst = motivating_instance();
        let policy = CachingPolicy::from_placements(2, 3, [(0, 0), (1, 2)]).unwrap();
        let (report, trace) =
            simulate_with_trace(&inst, &policy, &config(SimMode::Multicast, 3000)).unwrap();
        assert_eq!(trace.len(), 3000);
        assert!(trace.iter().enumerate().all(|(k, r)| r.period == k as u64));
        let mean = trace.iter().map(|r| r.cost).sum::<f64>() / 3000.0;
        assert!((mean - report.mean_cost_per_period).abs() < 1e-12);
        // at most one MBS multicast per file per period
        assert!(trace.iter().all(|r| r.mbs_tx <= 3 && r.unicast_tx == 0));
        assert_eq!(trace.iter().map(|r| r.mbs_tx).sum::<u64>(), report.mbs_transmissions);

        let mut buf = Vec::new();
        write_trace_csv(&trace[..2], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("period,cost,mbs_tx,scbs_tx,unicast_tx\n0,"));
    }

    #[test]
    fn worked_example_converges() {
        let inst = motivating_instance();
        let policy = CachingPolicy::from_placements(2, 3, [(0, 1), (1, 2)]).unwrap();
        let analytic = cost_closed_form(&inst, &policy).unwrap().total;
        let r = simulate(&inst, &policy, &config(SimMode::Multicast, 100_000)).unwrap();
        assert!((r.mean_cost_per_period - analytic).abs() <= 4.0 * r.std_error);

        let analytic = cost_unicast(&inst, &policy).unwrap().total;
        let r = simulate(&inst, &policy, &config(SimMode::Unicast, 100_000)).unwrap();
        assert!((r.mean_cost_per_period - analytic).abs() <= 4.0 * r.std_error);
    }

    #[test]
    fn rejects_bad_inputs() {
        let inst = motivating_instance();
        let over = CachingPolicy::from_placements(2, 3, [(0, 0), (0, 1)]).unwrap();
        assert!(simulate(&inst, &over, &config(SimMode::Unicast, 10)).is_err());
        let ok = CachingPolicy::empty_for(&inst);
        assert!(simulate(&inst, &ok, &config(SimMode::Unicast, 0)).is_err());
    }
}
