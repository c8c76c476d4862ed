//! Scenario and sweep configuration.
//!
//! The noise density is given in dBm/Hz and the reference gain may be derived
//! from the carrier frequency; both are converted to linear SI units here and
//! nowhere else.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linksel::SolverConfig;
use crate::model::{dbm_per_hz_to_watts, free_space_ref_gain, ChannelParams, DistanceMode};
use crate::routing::EdgeWeight;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub carrier_hz: f64,
    /// Overrides the free-space value derived from `carrier_hz`.
    pub ref_gain: Option<f64>,
    pub pathloss_exp: f64,
    pub link_threshold_m: f64,
    pub distance_mode: DistanceMode,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            bandwidth_hz: 10e6,
            noise_dbm_per_hz: -174.0,
            carrier_hz: 1e9,
            ref_gain: None,
            pathloss_exp: 2.0,
            link_threshold_m: 6000.0,
            distance_mode: DistanceMode::Planar,
        }
    }
}

impl ChannelConfig {
    pub fn to_params(&self) -> Result<ChannelParams> {
        if !(self.carrier_hz > 0.0) && self.ref_gain.is_none() {
            return Err(Error::InvalidConfig(format!(
                "carrier frequency must be positive, got {}",
                self.carrier_hz
            )));
        }
        let params = ChannelParams {
            bandwidth_hz: self.bandwidth_hz,
            noise_density: dbm_per_hz_to_watts(self.noise_dbm_per_hz),
            ref_gain: self
                .ref_gain
                .unwrap_or_else(|| free_space_ref_gain(self.carrier_hz)),
            pathloss_exp: self.pathloss_exp,
            link_threshold_m: self.link_threshold_m,
            distance_mode: self.distance_mode,
        };
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Side of the square deployment area, m.
    pub area_side_m: f64,
    pub n_uavs: usize,
    /// Common UAV altitude, m.
    pub altitude_m: f64,
    /// Minimum horizontal spacing between any two nodes, m.
    pub min_separation_m: f64,
    pub seed: u64,
    pub channel: ChannelConfig,
    pub power_budget_w: f64,
    /// Number of seeds per grid point in a sweep (`seed`, `seed + 1`, ...).
    pub trials: usize,
    pub solver: SolverConfig,
    /// Ground station `(x, y)`; defaults to the middle of the bottom edge.
    pub gs_position: Option<[f64; 2]>,
    pub edge_weight: EdgeWeight,
    /// Placement attempts before giving up on a seed.
    pub max_placement_rounds: usize,
    /// Fill the `wall_ms` column. Off by default so that output depends only
    /// on the configuration.
    pub record_wall_time: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            area_side_m: 20_000.0,
            n_uavs: 25,
            altitude_m: 150.0,
            min_separation_m: 500.0,
            seed: 0,
            channel: ChannelConfig::default(),
            power_budget_w: 1.0,
            trials: 100,
            solver: SolverConfig::default(),
            gs_position: None,
            edge_weight: EdgeWeight::Distance,
            max_placement_rounds: 100,
            record_wall_time: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.area_side_m > 0.0 && self.area_side_m.is_finite()) {
            return bad(format!(
                "area side must be positive, got {}",
                self.area_side_m
            ));
        }
        if self.n_uavs == 0 {
            return bad("at least one UAV is required".into());
        }
        if !(self.altitude_m > 0.0) {
            return bad(format!(
                "altitude must be positive, got {}",
                self.altitude_m
            ));
        }
        if !(self.min_separation_m >= 0.0 && self.min_separation_m < self.area_side_m) {
            return bad(format!(
                "minimum separation must lie in [0, area side), got {}",
                self.min_separation_m
            ));
        }
        if !(self.power_budget_w > 0.0 && self.power_budget_w.is_finite()) {
            return bad(format!(
                "power budget must be positive, got {}",
                self.power_budget_w
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.max_placement_rounds == 0 {
            return bad("max_placement_rounds must be at least 1".into());
        }
        if let Some([x, y]) = self.gs_position {
            if !(x.is_finite() && y.is_finite()) {
                return bad("ground station position must be finite".into());
            }
        }
        self.channel.to_params()?;
        self.solver.validate()?;
        Ok(())
    }

    pub fn gs_xy(&self) -> [f64; 2] {
        self.gs_position.unwrap_or([self.area_side_m / 2.0, 0.0])
    }
}

/// Grid of power budgets and UAV counts; an empty list means "the base
/// scenario's value".
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepRanges {
    pub pb_w: Vec<f64>,
    pub n_uavs: Vec<usize>,
}

/// Layout of a config file:
///
/// ```toml
/// [scenario]
/// n_uavs = 25
/// power_budget_w = 2.0
///
/// [scenario.channel]
/// link_threshold_m = 6000.0
///
/// [sweep]
/// pb_w = [0.5, 1.0, 2.0]
/// n_uavs = [20, 25, 30]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioConfig,
    pub sweep: SweepRanges,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &std::path::Path) -> Result<ConfigFile> {
        ConfigFile::parse(&std::fs::read_to_string(path)?)
    }

    /// Parses `text` with every key it leaves out taken from `self` rather
    /// than from the built-in defaults.
    pub fn overlay(&self, text: &str) -> Result<ConfigFile> {
        let mut base = toml::Table::try_from(self)
            .map_err(|e| Error::InvalidConfig(format!("cannot serialize base config: {e}")))?;
        let top: toml::Table = toml::from_str(text)?;
        merge(&mut base, top);
        Ok(base.try_into()?)
    }
}

fn merge(into: &mut toml::Table, from: toml::Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}
