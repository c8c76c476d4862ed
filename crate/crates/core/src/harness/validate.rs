//! Pipeline stages checked against the brute-force oracles on small seeded
//! scenarios.

use super::config::ScenarioConfig;
use super::pipeline::{run_pipeline, PipelineConfig};
use super::scenario::generate_scenario;
use crate::error::{Error, Result};
use crate::oracle::{grid_power_oracle, tree_enum_oracle, AllocRule, MAX_ENUM_UAVS};
use crate::power::marginal_rate;

/// Grid step for the power oracle, as a fraction of the budget.
pub const GRID_RESOLUTION: f64 = 1e-3;
/// Largest tree the power grid is run on; the grid grows as K^(n-1).
pub const GRID_MAX_UAVS: usize = 4;
pub const WATERFILL_REL_TOL: f64 = 1e-6;
pub const KKT_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SeedReport {
    pub seed: u64,
    pub spt: f64,
    pub refined: f64,
    /// Best tree at the water-filled SPT powers.
    pub oracle_fixed: f64,
    /// Best tree with its own water-filled powers.
    pub oracle_joint: f64,
    /// Relative shortfall of water-filling against the power grid, if run.
    pub waterfill_gap: Option<f64>,
    /// Largest relative spread of marginal rates over the active links.
    pub kkt_spread: f64,
}

impl SeedReport {
    pub fn passed(&self) -> bool {
        let slack = 1e-9 * self.oracle_joint;
        self.refined >= self.spt
            && self.refined <= self.oracle_fixed + slack
            && self.oracle_fixed <= self.oracle_joint + slack
            && self.waterfill_gap.is_none_or(|g| g <= WATERFILL_REL_TOL)
            && self.kkt_spread <= KKT_REL_TOL
    }

    /// `(oracle_joint - refined) / oracle_joint`.
    pub fn joint_gap(&self) -> f64 {
        (self.oracle_joint - self.refined) / self.oracle_joint
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub seeds: Vec<SeedReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.seeds.iter().all(SeedReport::passed)
    }

    pub fn mean_joint_gap(&self) -> f64 {
        self.seeds.iter().map(SeedReport::joint_gap).sum::<f64>() / self.seeds.len() as f64
    }
}

/// Runs `cfg.trials` seeds starting at `cfg.seed`.
pub fn validate_against_oracles(cfg: &ScenarioConfig) -> Result<ValidationReport> {
    cfg.validate()?;
    if cfg.n_uavs > MAX_ENUM_UAVS {
        return Err(Error::InvalidConfig(format!(
            "oracle validation supports at most {MAX_ENUM_UAVS} UAVs, got {}",
            cfg.n_uavs
        )));
    }
    let pcfg = PipelineConfig {
        power_budget_w: cfg.power_budget_w,
        edge_weight: cfg.edge_weight,
        solver: cfg.solver,
    };
    let mut seeds = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        let seed = cfg.seed.wrapping_add(t as u64);
        let wrap = |e: Error| e.in_scenario(seed, cfg.n_uavs);
        let scfg = ScenarioConfig {
            seed,
            ..cfg.clone()
        };
        let topo = generate_scenario(&scfg).map_err(wrap)?.topology;
        let params = topo.params();
        let out = run_pipeline(&topo, &pcfg).map_err(wrap)?;

        let fixed =
            tree_enum_oracle(&topo, AllocRule::Fixed(&out.alloc.power), params).map_err(wrap)?;
        let joint = tree_enum_oracle(
            &topo,
            AllocRule::Waterfill {
                budget: cfg.power_budget_w,
            },
            params,
        )
        .map_err(wrap)?;

        let waterfill_gap = if cfg.n_uavs <= GRID_MAX_UAVS {
            let grid =
                grid_power_oracle(&out.spt, &topo, cfg.power_budget_w, params, GRID_RESOLUTION)
                    .map_err(wrap)?;
            Some(((grid.best_value - out.throughput_p11) / grid.best_value).max(0.0))
        } else {
            None
        };

        let marginals: Vec<f64> = out
            .alloc
            .active_ids()
            .map(|i| marginal_rate(out.alloc.power[i], topo.gain(i, out.spt.parent[i]), params))
            .collect();
        let hi = marginals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = marginals.iter().cloned().fold(f64::MAX, f64::min);
        let kkt_spread = if marginals.is_empty() {
            0.0
        } else {
            (hi - lo) / hi
        };

        seeds.push(SeedReport {
            seed,
            spt: out.throughput_p11,
            refined: out.throughput_p14,
            oracle_fixed: fixed.best_value,
            oracle_joint: joint.best_value,
            waterfill_gap,
            kkt_spread,
        });
    }
    Ok(ValidationReport { seeds })
}
