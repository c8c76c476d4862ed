//! Random UAV placement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::model::{Node, Topology};
use crate::routing::build_spt;

/// Draws per UAV before a placement round is abandoned.
const DRAWS_PER_UAV: usize = 1000;

#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Topology,
    /// Placement rounds used, counting the successful one.
    pub rounds: usize,
}

/// Places `cfg.n_uavs` UAVs uniformly in the square at the configured
/// altitude, keeping every pair of nodes (ground station included) at least
/// `min_separation_m` apart horizontally, and redraws the whole layout until
/// every UAV can reach the ground station.
///
/// The layout depends only on the seed and the geometric fields of `cfg`.
pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let params = cfg.channel.to_params()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [gx, gy] = cfg.gs_xy();
    let sep_sq = cfg.min_separation_m * cfg.min_separation_m;
    let mut too_dense = 0;

    for round in 1..=cfg.max_placement_rounds {
        let mut placed: Vec<(f64, f64)> = Vec::with_capacity(cfg.n_uavs);
        let mut ok = true;
        for _ in 0..cfg.n_uavs {
            let spot = (0..DRAWS_PER_UAV).find_map(|_| {
                let x = rng.random_range(0.0..cfg.area_side_m);
                let y = rng.random_range(0.0..cfg.area_side_m);
                let clear = placed
                    .iter()
                    .chain(std::iter::once(&(gx, gy)))
                    .all(|&(px, py)| (px - x).powi(2) + (py - y).powi(2) >= sep_sq);
                clear.then_some((x, y))
            });
            match spot {
                Some(p) => placed.push(p),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            too_dense += 1;
            continue;
        }

        let mut nodes: Vec<Node> = placed
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| Node::uav(k + 1, x, y, cfg.altitude_m))
            .collect();
        nodes.push(Node::ground_station(cfg.n_uavs + 1, gx, gy));
        let topology = match Topology::build(nodes, &params) {
            Ok(t) => t,
            Err(Error::CoincidentNodes(..)) => continue,
            Err(e) => return Err(e),
        };
        match build_spt(&topology, cfg.edge_weight) {
            Ok(_) => {
                return Ok(Scenario {
                    topology,
                    rounds: round,
                })
            }
            Err(Error::Disconnected { .. }) => continue,
            Err(e) => return Err(e),
        }
    }

    let reason = if too_dense == cfg.max_placement_rounds {
        format!(
            "could not keep {} m separation between {} UAVs in a {} m square; \
             lower n_uavs or min_separation_m",
            cfg.min_separation_m, cfg.n_uavs, cfg.area_side_m
        )
    } else {
        format!(
            "no placement connected every UAV to the ground station within {} m links",
            cfg.channel.link_threshold_m
        )
    };
    Err(Error::PlacementFailed {
        rounds: cfg.max_placement_rounds,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Role;

    #[test]
    fn single_uav_lands_inside_square() {
        for seed in 0..20 {
            let cfg = ScenarioConfig {
                n_uavs: 1,
                seed,
                ..ScenarioConfig::default()
            };
            let s = generate_scenario(&cfg).unwrap();
            let nodes = s.topology.nodes();
            assert_eq!(nodes.len(), 2);
            let u = &nodes[0];
            assert_eq!(u.role, Role::Uav);
            assert!(u.x >= 0.0 && u.x < 20_000.0 && u.y >= 0.0 && u.y < 20_000.0);
            assert_eq!(u.z, 150.0);
            assert_eq!(nodes[1].z, 0.0);
        }
    }

    #[test]
    fn same_seed_same_layout() {
        let cfg = ScenarioConfig {
            seed: 1234,
            ..ScenarioConfig::default()
        };
        let a = generate_scenario(&cfg).unwrap();
        let b = generate_scenario(&cfg).unwrap();
        assert_eq!(a.topology.nodes(), b.topology.nodes());
        let c = generate_scenario(&ScenarioConfig { seed: 1235, ..cfg }).unwrap();
        assert_ne!(a.topology.nodes(), c.topology.nodes());
    }

    #[test]
    fn separation_is_respected() {
        let cfg = ScenarioConfig {
            seed: 9,
            min_separation_m: 1500.0,
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&cfg).unwrap();
        let nodes = s.topology.nodes();
        for a in nodes {
            for b in nodes {
                if a.id != b.id {
                    assert!(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt() >= 1500.0);
                }
            }
        }
    }

    #[test]
    fn dense_area_fails_with_hint() {
        let cfg = ScenarioConfig {
            area_side_m: 2000.0,
            n_uavs: 30,
            min_separation_m: 1000.0,
            max_placement_rounds: 3,
            ..ScenarioConfig::default()
        };
        match generate_scenario(&cfg) {
            Err(Error::PlacementFailed { rounds: 3, reason }) => {
                assert!(reason.contains("lower n_uavs"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unreachable_layout_reports_disconnection() {
        let cfg = ScenarioConfig {
            n_uavs: 3,
            channel: super::super::config::ChannelConfig {
                link_threshold_m: 1.0,
                ..Default::default()
            },
            max_placement_rounds: 5,
            ..ScenarioConfig::default()
        };
        match generate_scenario(&cfg) {
            Err(Error::PlacementFailed { reason, .. }) => assert!(reason.contains("connected")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
