//! Water-filling power allocation over the links of a routing tree.
//!
//! Each UAV transmits on its single parent link. The total budget `P_b` is
//! split to maximize the sum of link capacities. At the KKT point every link
//! with positive power sees the same marginal rate `B h / (σ²B + P h) = λ`,
//! which gives `P_i = B/λ - σ²B/h_i`. Links whose share would be non-positive
//! are switched off and the water level is recomputed over the survivors.

use crate::error::{Error, Result};
use crate::model::{link_capacity, ChannelParams, Topology};
use crate::routing::RoutingTree;

/// Powers at or below this value (W) are clamped to zero.
pub const CLAMP_TOLERANCE_W: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    /// Transmit power of each UAV on its parent link, W.
    pub power: Vec<f64>,
    /// Lagrange multiplier of the budget constraint.
    pub water_level_lambda: f64,
    /// UAVs that receive strictly positive power.
    pub active: Vec<bool>,
    /// Sum of link capacities at these powers, bits/s.
    pub throughput: f64,
}

impl PowerAllocation {
    pub fn active_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.active
            .iter()
            .enumerate()
            .filter(|&(_, &a)| a)
            .map(|(i, _)| i)
    }

    pub fn total_power(&self) -> f64 {
        self.power.iter().sum()
    }
}

/// `B h / (σ²B + P h)`, the left-hand side of the stationarity condition.
pub fn marginal_rate(power: f64, gain: f64, params: &ChannelParams) -> f64 {
    params.bandwidth_hz * gain / (params.noise_power() + power * gain)
}

/// Allocates `budget` W across the parent links of `tree`.
pub fn allocate_power(
    tree: &RoutingTree,
    topo: &Topology,
    budget: f64,
    params: &ChannelParams,
) -> Result<PowerAllocation> {
    let gains: Vec<f64> = tree
        .parent
        .iter()
        .enumerate()
        .map(|(i, &p)| topo.gain(i, p))
        .collect();
    waterfill(&gains, budget, params)
}

/// Water-filling over independent links with the given gains.
pub fn waterfill(gains: &[f64], budget: f64, params: &ChannelParams) -> Result<PowerAllocation> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(Error::InvalidBudget(budget));
    }
    if gains.is_empty() {
        return Err(Error::InvalidNodes("no links to allocate power to".into()));
    }
    if let Some(&g) = gains.iter().find(|&&g| !(g.is_finite() && g > 0.0)) {
        return Err(Error::InvalidChannel(format!(
            "link gain must be positive, got {g}"
        )));
    }

    let bandwidth = params.bandwidth_hz;
    // σ²B/h_i: the noise-to-gain "floor" of each link, in W.
    let floors: Vec<f64> = gains.iter().map(|&h| params.noise_power() / h).collect();
    let n = gains.len();
    let mut active = vec![true; n];
    let mut power = vec![0.0; n];

    // The active set only shrinks, so this runs at most n times.
    let level = loop {
        let count = active.iter().filter(|&&a| a).count();
        assert!(count > 0, "water-filling emptied the active set");
        let floor_sum: f64 = floors
            .iter()
            .zip(&active)
            .filter(|&(_, &a)| a)
            .map(|(f, _)| f)
            .sum();
        // B/λ with λ = |S| / (P_b/B + Σ_S σ²/h_i).
        let level = (budget + floor_sum) / count as f64;

        let mut clamped = false;
        for i in 0..n {
            if active[i] && level - floors[i] <= CLAMP_TOLERANCE_W {
                active[i] = false;
                clamped = true;
            }
        }
        if !clamped {
            break level;
        }
    };

    let count = active.iter().filter(|&&a| a).count();
    for i in 0..n {
        power[i] = if !active[i] {
            0.0
        } else if count == 1 {
            budget
        } else {
            level - floors[i]
        };
    }

    let throughput = power
        .iter()
        .zip(gains)
        .map(|(&p, &h)| link_capacity(p, h, params))
        .sum();

    Ok(PowerAllocation {
        power,
        water_level_lambda: bandwidth / level,
        active,
        throughput,
    })
}

/// Sum of link capacities of `tree` at the powers in `alloc`.
pub fn network_throughput(
    alloc: &PowerAllocation,
    tree: &RoutingTree,
    topo: &Topology,
    params: &ChannelParams,
) -> f64 {
    tree.parent
        .iter()
        .enumerate()
        .map(|(i, &p)| link_capacity(alloc.power[i], topo.gain(i, p), params))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{channel_gain, DistanceMode, Node};
    use crate::routing::{build_spt, EdgeWeight};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> ChannelParams {
        ChannelParams {
            bandwidth_hz: 1.0,
            noise_density: 1.0,
            ref_gain: 1.0,
            pathloss_exp: 2.0,
            link_threshold_m: 1e9,
            distance_mode: DistanceMode::Planar,
        }
    }

    /// Best point of Σ log2(1 + P_i h_i) on a simplex grid with `steps`
    /// divisions, for two links.
    fn grid_two(h: [f64; 2], budget: f64, steps: usize) -> (f64, [f64; 2]) {
        let mut best = (f64::NEG_INFINITY, [0.0; 2]);
        for k in 0..=steps {
            let p1 = budget * k as f64 / steps as f64;
            let p2 = budget - p1;
            let v = (1.0 + p1 * h[0]).log2() + (1.0 + p2 * h[1]).log2();
            if v > best.0 {
                best = (v, [p1, p2]);
            }
        }
        best
    }

    #[test]
    fn equal_gains_split_evenly() {
        for budget in [0.01, 1.0, 37.5] {
            let a = waterfill(&[3.0, 3.0], budget, &unit()).unwrap();
            assert!((a.power[0] - budget / 2.0).abs() <= 1e-15 * budget);
            assert!((a.power[1] - budget / 2.0).abs() <= 1e-15 * budget);
        }
    }

    #[test]
    fn hand_traced_two_link_optimum() {
        let a = waterfill(&[1.0, 2.0], 3.0, &unit()).unwrap();
        assert!((a.water_level_lambda - 2.0 / 4.5).abs() < 1e-15);
        assert!((a.power[0] - 1.25).abs() < 1e-12);
        assert!((a.power[1] - 1.75).abs() < 1e-12);
        let (_, grid) = grid_two([1.0, 2.0], 3.0, 3000);
        assert!((grid[0] - 1.25).abs() <= 1e-3 && (grid[1] - 1.75).abs() <= 1e-3);
    }

    #[test]
    fn weak_link_is_switched_off() {
        let a = waterfill(&[1.0, 100.0], 0.1, &unit()).unwrap();
        assert_eq!(a.power, vec![0.0, 0.1]);
        assert_eq!(a.active, vec![false, true]);
        assert!((a.water_level_lambda - 1.0 / 0.11).abs() < 1e-12);
        // λ ≥ h_1/σ² for the switched-off link.
        assert!(a.water_level_lambda >= 1.0);
        let (_, grid) = grid_two([1.0, 100.0], 0.1, 1000);
        assert_eq!(grid, [0.0, 0.1]);
    }

    #[test]
    fn rejects_non_positive_budget() {
        assert!(matches!(
            waterfill(&[1.0], 0.0, &unit()),
            Err(Error::InvalidBudget(_))
        ));
        assert!(matches!(
            waterfill(&[1.0], -1.0, &unit()),
            Err(Error::InvalidBudget(_))
        ));
    }

    fn random_topology(rng: &mut ChaCha8Rng, n: usize) -> Option<(Topology, RoutingTree)> {
        let mut nodes: Vec<Node> = (0..n)
            .map(|k| {
                Node::uav(
                    k + 1,
                    rng.random_range(0.0..12000.0),
                    rng.random_range(0.0..12000.0),
                    150.0,
                )
            })
            .collect();
        nodes.push(Node::ground_station(n + 1, 6000.0, 0.0));
        let topo = Topology::build(nodes, &ChannelParams::default()).ok()?;
        let tree = build_spt(&topo, EdgeWeight::Distance).ok()?;
        Some((topo, tree))
    }

    #[test]
    fn throughput_matches_term_by_term_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = ChannelParams::default();
        let mut done = 0;
        while done < 10 {
            let Some((topo, tree)) = random_topology(&mut rng, 5) else {
                continue;
            };
            let alloc = allocate_power(&tree, &topo, 2.0, &p).unwrap();
            let mut expected = 0.0;
            for i in 0..5 {
                let node = &topo.nodes()[i];
                let par = &topo.nodes()[tree.parent[i]];
                let d = ((node.x - par.x).powi(2) + (node.y - par.y).powi(2)).sqrt();
                let h = p.ref_gain / (d * d);
                expected += p.bandwidth_hz
                    * (1.0 + alloc.power[i] * h / (p.noise_density * p.bandwidth_hz)).log2();
            }
            let got = network_throughput(&alloc, &tree, &topo, &p);
            assert!((got - expected).abs() <= 1e-12 * expected);
            assert!((alloc.throughput - got).abs() <= 1e-12 * got);
            done += 1;
        }
    }

    #[test]
    fn degenerate_zero_powers_give_zero_throughput() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = ChannelParams::default();
        let (topo, tree) = loop {
            if let Some(x) = random_topology(&mut rng, 3) {
                break x;
            }
        };
        let alloc = PowerAllocation {
            power: vec![0.0; 3],
            water_level_lambda: 0.0,
            active: vec![false; 3],
            throughput: 0.0,
        };
        assert_eq!(network_throughput(&alloc, &tree, &topo, &p), 0.0);
    }

    #[test]
    fn single_uav_takes_whole_budget() {
        let p = ChannelParams::default();
        let nodes = vec![
            Node::uav(1, 0.0, 2500.0, 150.0),
            Node::ground_station(2, 0.0, 0.0),
        ];
        let topo = Topology::build(nodes, &p).unwrap();
        let tree = build_spt(&topo, EdgeWeight::Distance).unwrap();
        let alloc = allocate_power(&tree, &topo, 0.7, &p).unwrap();
        assert_eq!(alloc.power, vec![0.7]);
        let h = channel_gain(2500.0, &p).unwrap();
        assert_eq!(
            network_throughput(&alloc, &tree, &topo, &p),
            link_capacity(0.7, h, &p)
        );
    }

    fn gains_strategy() -> impl Strategy<Value = (Vec<f64>, f64)> {
        (
            prop::collection::vec(-3.0f64..3.0, 1..12)
                .prop_map(|v| v.into_iter().map(|e| 10f64.powf(e)).collect()),
            -2.0f64..2.0,
        )
            .prop_map(|(g, b)| (g, 10f64.powf(b)))
    }

    proptest! {
        #[test]
        fn budget_is_conserved((gains, budget) in gains_strategy()) {
            let a = waterfill(&gains, budget, &unit()).unwrap();
            prop_assert!((a.total_power() - budget).abs() <= 1e-9 * budget);
            prop_assert!(a.power.iter().all(|&p| p >= 0.0));
        }

        #[test]
        fn kkt_conditions_hold((gains, budget) in gains_strategy()) {
            let params = unit();
            let a = waterfill(&gains, budget, &params).unwrap();
            let lambda = a.water_level_lambda;
            for i in 0..gains.len() {
                if a.active[i] {
                    let m = marginal_rate(a.power[i], gains[i], &params);
                    prop_assert!((m - lambda).abs() <= 1e-8 * lambda, "{} vs {}", m, lambda);
                } else {
                    prop_assert_eq!(a.power[i], 0.0);
                    // λ ≥ h_i/σ² up to the clamping tolerance.
                    let slack = CLAMP_TOLERANCE_W * lambda * lambda / params.bandwidth_hz;
                    prop_assert!(lambda >= gains[i] / params.noise_density - slack - 1e-12 * lambda);
                }
            }
        }

        #[test]
        fn throughput_nondecreasing_in_budget((gains, budget) in gains_strategy(), factor in 1.0f64..4.0) {
            let lo = waterfill(&gains, budget, &unit()).unwrap();
            let hi = waterfill(&gains, budget * factor, &unit()).unwrap();
            prop_assert!(hi.throughput >= lo.throughput * (1.0 - 1e-12));
        }

        #[test]
        fn capacity_is_concave_in_power(h in 1e-3f64..1e3, power in 1e-3f64..1e2) {
            let params = unit();
            let step = 1e-3 * power;
            let curvature = link_capacity(power + step, h, &params) - 2.0 * link_capacity(power, h, &params)
                + link_capacity(power - step, h, &params);
            prop_assert!(curvature < 0.0);
        }
    }
}
