use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{Instance, InstanceParams};

/// How per-SCBS request rates are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateMode {
    /// One total rate `R_n ~ U[low, high]` per SCBS, split over files by the
    /// zipf popularity: `λ_ni = R_n q_i`.
    #[default]
    PerScbsTotal,
    /// An independent multiplier `U_ni ~ U[low, high]` per (SCBS, file):
    /// `λ_ni = U_ni q_i`.
    PerPair,
}

/// Synthetic scenario parameters. Defaults are the standard evaluation setup:
/// 14 SCBSs, 100 files, 20-file caches, 10 s periods, zipf shape 0.8, rates in
/// [1, 10] requests/s, `c_B = c_W = 1`, free SCBS transmissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub num_scbs: usize,
    pub num_files: usize,
    pub cache_size: usize,
    pub deadline: f64,
    pub zipf_shape: f64,
    pub rate_low: f64,
    pub rate_high: f64,
    pub cost_backhaul: f64,
    pub cost_mbs_tx: f64,
    pub cost_scbs: f64,
    pub rate_mode: RateMode,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_scbs: 14,
            num_files: 100,
            cache_size: 20,
            deadline: 10.0,
            zipf_shape: 0.8,
            rate_low: 1.0,
            rate_high: 10.0,
            cost_backhaul: 1.0,
            cost_mbs_tx: 1.0,
            cost_scbs: 0.0,
            rate_mode: RateMode::PerScbsTotal,
            seed: 2014,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.zipf_shape.is_finite() && self.zipf_shape >= 0.0) {
            return invalid(format!("zipf shape must be non-negative, got {}", self.zipf_shape));
        }
        if !(self.rate_low.is_finite() && self.rate_high.is_finite())
            || self.rate_low < 0.0
            || self.rate_low > self.rate_high
        {
            return invalid(format!(
                "need 0 <= rate_low <= rate_high, got [{}, {}]",
                self.rate_low, self.rate_high
            ));
        }
        if self.num_scbs == 0 || self.num_files == 0 {
            return invalid("num_scbs and num_files must be positive");
        }
        Ok(())
    }
}

/// Zipf popularity `q_i = i^(-a) / Σ_j j^(-a)` over ranks `1..=num_files`.
pub fn zipf_popularity(num_files: usize, shape: f64) -> Vec<f64> {
    let weights: Vec<f64> = (1..=num_files).map(|i| (i as f64).powf(-shape)).collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one 64-bit output.
pub fn unit_uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Builds an instance from `config`.
///
/// Randomness comes from `ChaCha8Rng::seed_from_u64(config.seed)`; a rate in
/// `[low, high]` is `low + (high - low) * u` with `u` from [`unit_uniform`].
/// SCBS rates are drawn in SCBS order (then file order for
/// [`RateMode::PerPair`]). The MBS-only area has no demand.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Instance> {
    config.validate()?;
    let popularity = zipf_popularity(config.num_files, config.zipf_shape);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let span = config.rate_high - config.rate_low;
    let mut demand = vec![vec![0.0; config.num_files]];
    for _ in 0..config.num_scbs {
        let row = match config.rate_mode {
            RateMode::PerScbsTotal => {
                let total = config.rate_low + span * unit_uniform(&mut rng);
                popularity.iter().map(|q| total * q).collect()
            }
            RateMode::PerPair => popularity
                .iter()
                .map(|q| (config.rate_low + span * unit_uniform(&mut rng)) * q)
                .collect(),
        };
        demand.push(row);
    }
    Instance::new(InstanceParams {
        num_scbs: config.num_scbs,
        num_files: config.num_files,
        cache_size: vec![config.cache_size; config.num_scbs],
        cost_backhaul: config.cost_backhaul,
        cost_mbs_tx: config.cost_mbs_tx,
        cost_scbs_tx: vec![config.cost_scbs; config.num_scbs],
        demand,
        deadline: config.deadline,
    })
}
