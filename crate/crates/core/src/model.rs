//! Network model: node geometry, deterministic path-loss channel, link
//! capacity and the distance-threshold admissibility matrix.
//!
//! Node indices used throughout the crate are zero-based: UAVs occupy
//! `0..n` and the ground station is `n`. The externally visible ids carried by
//! [`Node::id`] are one-based (`1..=n` for UAVs, `n + 1` for the ground
//! station).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Converts a spectral density in dBm/Hz to W/Hz.
pub fn dbm_per_hz_to_watts(dbm_per_hz: f64) -> f64 {
    10f64.powf((dbm_per_hz - 30.0) / 10.0)
}

/// Free-space received power at 1 m, `(c / 4πf)^2`.
pub fn free_space_ref_gain(carrier_hz: f64) -> f64 {
    let ratio = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * carrier_hz);
    ratio * ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Horizontal distance only; altitude is ignored even on UAV-to-ground links.
    #[default]
    Planar,
    /// Full Euclidean distance including the altitude difference.
    #[serde(rename = "3d")]
    ThreeD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Uav,
    GroundStation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub role: Role,
}

impl Node {
    pub fn uav(id: usize, x: f64, y: f64, altitude: f64) -> Self {
        Node {
            id,
            x,
            y,
            z: altitude,
            role: Role::Uav,
        }
    }

    pub fn ground_station(id: usize, x: f64, y: f64) -> Self {
        Node {
            id,
            x,
            y,
            z: 0.0,
            role: Role::GroundStation,
        }
    }
}

/// Physical-layer constants, all in linear SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Channel bandwidth `B`, Hz.
    pub bandwidth_hz: f64,
    /// Noise spectral density `σ²`, W/Hz.
    pub noise_density: f64,
    /// Received power at the 1 m reference distance, `α0`.
    pub ref_gain: f64,
    /// Path-loss exponent `β`.
    pub pathloss_exp: f64,
    /// Maximum link length `d_th`, m.
    pub link_threshold_m: f64,
    pub distance_mode: DistanceMode,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            bandwidth_hz: 10e6,
            noise_density: dbm_per_hz_to_watts(-174.0),
            ref_gain: free_space_ref_gain(1e9),
            pathloss_exp: 2.0,
            link_threshold_m: 6000.0,
            distance_mode: DistanceMode::Planar,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("bandwidth", self.bandwidth_hz),
            ("noise density", self.noise_density),
            ("reference gain", self.ref_gain),
            ("path-loss exponent", self.pathloss_exp),
            ("link threshold", self.link_threshold_m),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidChannel(format!(
                    "{name} must be finite and positive, got {value}"
                )));
            }
        }
        if self.pathloss_exp < 2.0 {
            return Err(Error::InvalidChannel(format!(
                "path-loss exponent must be at least 2, got {}",
                self.pathloss_exp
            )));
        }
        Ok(())
    }

    /// Total in-band noise power `σ²B`, W.
    pub fn noise_power(&self) -> f64 {
        self.noise_density * self.bandwidth_hz
    }
}

pub fn distance(a: &Node, b: &Node, mode: DistanceMode) -> Result<f64> {
    if a.id == b.id {
        return Err(Error::SelfLink(a.id));
    }
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let sq = match mode {
        DistanceMode::Planar => dx * dx + dy * dy,
        DistanceMode::ThreeD => {
            let dz = a.z - b.z;
            dx * dx + dy * dy + dz * dz
        }
    };
    Ok(sq.sqrt())
}

/// Path-loss gain `α0 / d^β`.
pub fn channel_gain(d: f64, params: &ChannelParams) -> Result<f64> {
    if d <= 0.0 || d.is_nan() {
        return Err(Error::ZeroDistance);
    }
    Ok(params.ref_gain / d.powf(params.pathloss_exp))
}

/// Shannon capacity `B log2(1 + P h / σ²B)` in bits/s.
///
/// Callers guarantee `power >= 0` and `gain > 0`.
pub fn link_capacity(power: f64, gain: f64, params: &ChannelParams) -> f64 {
    debug_assert!(power >= 0.0, "negative transmit power {power}");
    debug_assert!(gain > 0.0, "non-positive gain {gain}");
    let snr = power * gain / params.noise_power();
    params.bandwidth_hz * snr.ln_1p() / std::f64::consts::LN_2
}

/// Node set plus the per-pair distance, gain and admissibility tables.
///
/// Rows are UAVs `0..n`; columns are all nodes `0..=n` (the last column is the
/// ground station). Self pairs carry zero gain and are never admissible.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<Node>,
    params: ChannelParams,
    distances: Vec<f64>,
    gains: Vec<f64>,
    incidence: Vec<bool>,
}

impl Topology {
    /// Builds the tables for `nodes`, which must list UAVs with ids `1..=n`
    /// in order followed by the ground station with id `n + 1`.
    pub fn build(nodes: Vec<Node>, params: &ChannelParams) -> Result<Topology> {
        params.validate()?;
        validate_nodes(&nodes)?;
        let n = nodes.len() - 1;
        let cols = n + 1;
        let mut distances = vec![0.0; n * cols];
        let mut gains = vec![0.0; n * cols];
        let mut incidence = vec![false; n * cols];
        for i in 0..n {
            for j in 0..cols {
                if i == j {
                    continue;
                }
                let d = distance(&nodes[i], &nodes[j], params.distance_mode)?;
                if d == 0.0 {
                    return Err(Error::CoincidentNodes(nodes[i].id, nodes[j].id));
                }
                let idx = i * cols + j;
                distances[idx] = d;
                gains[idx] = channel_gain(d, params)?;
                incidence[idx] = d <= params.link_threshold_m;
            }
        }
        Ok(Topology {
            nodes,
            params: *params,
            distances,
            gains,
            incidence,
        })
    }

    pub fn n_uavs(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Index of the ground station (equal to the UAV count).
    pub fn gs(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    fn idx(&self, uav: usize, node: usize) -> usize {
        assert!(uav < self.n_uavs(), "row {uav} is not a UAV");
        uav * (self.n_uavs() + 1) + node
    }

    pub fn distance(&self, uav: usize, node: usize) -> f64 {
        self.distances[self.idx(uav, node)]
    }

    pub fn gain(&self, uav: usize, node: usize) -> f64 {
        self.gains[self.idx(uav, node)]
    }

    /// `A_ij`: whether the link is within the distance threshold.
    pub fn is_admissible(&self, uav: usize, node: usize) -> bool {
        self.incidence[self.idx(uav, node)]
    }

    /// Admissible neighbours of `uav` in ascending index order, the ground
    /// station last.
    pub fn neighbors(&self, uav: usize) -> impl Iterator<Item = usize> + '_ {
        (0..=self.n_uavs()).filter(move |&j| self.is_admissible(uav, j))
    }

    /// Incidence matrix as rows of 0/1, `n x (n + 1)`.
    pub fn incidence_matrix(&self) -> Vec<Vec<u8>> {
        let cols = self.n_uavs() + 1;
        self.incidence
            .chunks(cols)
            .map(|row| row.iter().map(|&a| u8::from(a)).collect())
            .collect()
    }
}

fn validate_nodes(nodes: &[Node]) -> Result<()> {
    if nodes.len() < 2 {
        return Err(Error::InvalidNodes(
            "need at least one UAV and a ground station".into(),
        ));
    }
    for (k, node) in nodes.iter().enumerate() {
        if node.id != k + 1 {
            return Err(Error::InvalidNodes(format!(
                "node at position {k} has id {}, expected {}",
                node.id,
                k + 1
            )));
        }
        if ![node.x, node.y, node.z].iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidNodes(format!(
                "node {} has non-finite coordinates",
                node.id
            )));
        }
    }
    let (gs, uavs) = nodes.split_last().expect("non-empty");
    if gs.role != Role::GroundStation || uavs.iter().any(|u| u.role != Role::Uav) {
        return Err(Error::InvalidNodes(
            "exactly one ground station is required, listed last".into(),
        ));
    }
    if gs.z != 0.0 {
        return Err(Error::InvalidNodes(format!(
            "ground station altitude must be 0, got {}",
            gs.z
        )));
    }
    let altitude = uavs[0].z;
    if altitude <= 0.0 || uavs.iter().any(|u| u.z != altitude) {
        return Err(Error::InvalidNodes(
            "all UAVs must share one positive altitude".into(),
        ));
    }
    Ok(())
}
