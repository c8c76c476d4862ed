//! Shortest-path routing tree rooted at the ground station, and structural
//! validation of arbitrary parent assignments.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeWeight {
    /// Link length in meters.
    #[default]
    Distance,
    /// One per hop.
    Hops,
}

impl EdgeWeight {
    fn of(self, topo: &Topology, uav: usize, node: usize) -> f64 {
        match self {
            EdgeWeight::Distance => topo.distance(uav, node),
            EdgeWeight::Hops => 1.0,
        }
    }
}

/// Parent assignment for every UAV. `parent[i]` is a node index (a UAV or the
/// ground station); `path_cost[i]` is the accumulated edge weight to the
/// ground station.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTree {
    pub parent: Vec<usize>,
    pub path_cost: Vec<f64>,
    pub weight: EdgeWeight,
}

impl RoutingTree {
    /// Wraps a hand-built parent vector. Path costs are computed where the
    /// parent chain reaches the ground station and left infinite otherwise.
    pub fn from_parents(parent: Vec<usize>, topo: &Topology, weight: EdgeWeight) -> Self {
        let mut tree = RoutingTree {
            path_cost: vec![f64::INFINITY; parent.len()],
            parent,
            weight,
        };
        tree.recompute_path_costs(topo);
        tree
    }

    pub fn n_uavs(&self) -> usize {
        self.parent.len()
    }

    /// Ground station index implied by the tree size.
    pub fn gs(&self) -> usize {
        self.parent.len()
    }

    /// Whether `node` lies in the subtree rooted at `ancestor` (a UAV is its
    /// own descendant).
    pub fn is_descendant(&self, node: usize, ancestor: usize) -> bool {
        let gs = self.gs();
        let mut cur = node;
        for _ in 0..=self.n_uavs() {
            if cur == ancestor {
                return true;
            }
            if cur >= gs {
                return false;
            }
            cur = self.parent[cur];
        }
        false
    }

    pub fn children(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter(move |&(_, &p)| p == node)
            .map(|(i, _)| i)
    }

    pub fn recompute_path_costs(&mut self, topo: &Topology) {
        let n = self.n_uavs();
        for i in 0..n {
            let mut cost = 0.0;
            let mut cur = i;
            let mut ok = false;
            for _ in 0..n {
                let p = self.parent[cur];
                if p > n || p == cur || !topo.is_admissible(cur, p) {
                    break;
                }
                cost += self.weight.of(topo, cur, p);
                if p == n {
                    ok = true;
                    break;
                }
                cur = p;
            }
            self.path_cost[i] = if ok { cost } else { f64::INFINITY };
        }
    }
}

/// Bellman-Ford shortest-path tree over admissible links.
///
/// Ties between equally short parents go to the lower node index.
pub fn build_spt(topo: &Topology, weight: EdgeWeight) -> Result<RoutingTree> {
    let n = topo.n_uavs();
    let gs = topo.gs();
    let mut dist = vec![f64::INFINITY; n + 1];
    dist[gs] = 0.0;

    for _ in 0..=n {
        let mut changed = false;
        for i in 0..n {
            for j in topo.neighbors(i) {
                let cand = dist[j] + weight.of(topo, i, j);
                if cand < dist[i] {
                    dist[i] = cand;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }

    let stranded: Vec<usize> = (0..n)
        .filter(|&i| dist[i].is_infinite())
        .map(|i| topo.nodes()[i].id)
        .collect();
    if !stranded.is_empty() {
        return Err(Error::Disconnected { stranded });
    }

    let mut parent = vec![gs; n];
    let mut path_cost = vec![0.0; n];
    for i in 0..n {
        let mut best = (f64::INFINITY, gs);
        for j in topo.neighbors(i) {
            let cand = dist[j] + weight.of(topo, i, j);
            if cand < best.0 {
                best = (cand, j);
            }
        }
        parent[i] = best.1;
        path_cost[i] = best.0;
    }

    let tree = RoutingTree {
        parent,
        path_cost,
        weight,
    };
    debug_assert!(validate_tree(&tree, topo).is_valid());
    Ok(tree)
}

/// A broken structural constraint, tagged by the constraint it violates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// C3: the parent is not a single valid node other than the UAV itself.
    BadParent { uav: usize, parent: usize },
    /// C4: following parents from this UAV never reaches the ground station.
    NotRooted { uav: usize },
    /// C5: the UAV lies on a parent cycle.
    Loop { uav: usize },
    /// C5: two UAVs are each other's parent.
    MutualLink { a: usize, b: usize },
    /// C6: the parent link exceeds the distance threshold.
    Inadmissible { uav: usize, parent: usize },
}

impl Violation {
    pub fn constraint(&self) -> &'static str {
        match self {
            Violation::BadParent { .. } => "C3",
            Violation::NotRooted { .. } => "C4",
            Violation::Loop { .. } | Violation::MutualLink { .. } => "C5",
            Violation::Inadmissible { .. } => "C6",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadParent { uav, parent } => {
                write!(f, "C3: UAV {uav} has invalid parent {parent}")
            }
            Violation::NotRooted { uav } => write!(f, "C4: UAV {uav} does not reach the GS"),
            Violation::Loop { uav } => write!(f, "C5: UAV {uav} lies on a routing loop"),
            Violation::MutualLink { a, b } => write!(f, "C5: UAVs {a} and {b} are mutual parents"),
            Violation::Inadmissible { uav, parent } => {
                write!(f, "C6: link {uav}->{parent} exceeds the distance threshold")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeReport {
    pub violations: Vec<Violation>,
}

impl TreeReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, constraint: &str) -> bool {
        self.violations.iter().any(|v| v.constraint() == constraint)
    }
}

/// Checks single-parent structure, rootedness, loop freedom and link
/// admissibility. Indices in the report are zero-based node indices.
pub fn validate_tree(tree: &RoutingTree, topo: &Topology) -> TreeReport {
    let n = topo.n_uavs();
    let gs = topo.gs();
    let mut violations = Vec::new();

    if tree.n_uavs() != n {
        violations.push(Violation::BadParent {
            uav: tree.n_uavs(),
            parent: n,
        });
        return TreeReport { violations };
    }

    for (i, &p) in tree.parent.iter().enumerate() {
        if p > gs || p == i {
            violations.push(Violation::BadParent { uav: i, parent: p });
        } else if !topo.is_admissible(i, p) {
            violations.push(Violation::Inadmissible { uav: i, parent: p });
        }
        if p < n && p != i && tree.parent[p] == i && i < p {
            violations.push(Violation::MutualLink { a: i, b: p });
        }
    }

    // Walk each chain; a chain that revisits a node is on or feeds a cycle.
    for i in 0..n {
        let mut seen = vec![false; n];
        let mut cur = i;
        let mut rooted = false;
        loop {
            if cur == gs {
                rooted = true;
                break;
            }
            if cur > gs || seen[cur] {
                break;
            }
            seen[cur] = true;
            cur = tree.parent[cur];
        }
        if !rooted {
            violations.push(Violation::NotRooted { uav: i });
            // On the cycle itself iff following parents returns to i.
            let mut cur = tree.parent[i];
            for _ in 0..n {
                if cur >= n {
                    break;
                }
                if cur == i {
                    violations.push(Violation::Loop { uav: i });
                    break;
                }
                cur = tree.parent[cur];
            }
        }
    }

    TreeReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChannelParams, DistanceMode, Node};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(threshold: f64) -> ChannelParams {
        ChannelParams {
            link_threshold_m: threshold,
            distance_mode: DistanceMode::Planar,
            ..ChannelParams::default()
        }
    }

    fn topo(coords: &[(f64, f64)], gs: (f64, f64), threshold: f64) -> Topology {
        let mut nodes: Vec<Node> = coords
            .iter()
            .enumerate()
            .map(|(k, &(x, y))| Node::uav(k + 1, x, y, 150.0))
            .collect();
        nodes.push(Node::ground_station(coords.len() + 1, gs.0, gs.1));
        Topology::build(nodes, &params(threshold)).unwrap()
    }

    #[test]
    fn single_uav_links_to_gs() {
        let t = topo(&[(0.0, 3000.0)], (0.0, 0.0), 6000.0);
        let tree = build_spt(&t, EdgeWeight::Distance).unwrap();
        assert_eq!(tree.parent, vec![1]);
        assert_eq!(tree.path_cost, vec![3000.0]);
    }

    #[test]
    fn forced_chain() {
        let t = topo(&[(0.0, 5000.0), (0.0, 10000.0)], (0.0, 0.0), 6000.0);
        assert!(!t.is_admissible(1, 2));
        let tree = build_spt(&t, EdgeWeight::Distance).unwrap();
        assert_eq!(tree.parent, vec![2, 0]);
        assert_eq!(tree.path_cost, vec![5000.0, 10000.0]);
    }

    #[test]
    fn disconnection_lists_stranded_ids() {
        let t = topo(
            &[(0.0, 1000.0), (50000.0, 0.0), (50000.0, 2000.0)],
            (0.0, 0.0),
            6000.0,
        );
        match build_spt(&t, EdgeWeight::Distance) {
            Err(Error::Disconnected { stranded }) => assert_eq!(stranded, vec![2, 3]),
            other => panic!("unexpected {other:?}"),
        }
        let t = topo(&[(0.0, 10000.0)], (0.0, 0.0), 6000.0);
        assert!(matches!(
            build_spt(&t, EdgeWeight::Hops),
            Err(Error::Disconnected { .. })
        ));
    }

    #[test]
    fn hop_ties_go_to_lower_index() {
        // UAV 2 reaches the GS through either UAV 0 or UAV 1 in two hops.
        let t = topo(
            &[(-3000.0, 4000.0), (3000.0, 4000.0), (0.0, 8000.0)],
            (0.0, 0.0),
            5000.0,
        );
        assert!(t.is_admissible(2, 0) && t.is_admissible(2, 1) && !t.is_admissible(2, 3));
        let tree = build_spt(&t, EdgeWeight::Hops).unwrap();
        assert_eq!(tree.parent, vec![3, 3, 0]);
        assert_eq!(tree.path_cost, vec![1.0, 1.0, 2.0]);
    }

    /// Minimum cost over every simple path from `i` to the GS.
    fn brute_force_cost(t: &Topology, weight: EdgeWeight, i: usize) -> f64 {
        fn dfs(
            t: &Topology,
            w: EdgeWeight,
            cur: usize,
            visited: &mut Vec<bool>,
            acc: f64,
            best: &mut f64,
        ) {
            let gs = t.gs();
            for j in 0..=t.n_uavs() {
                if j == cur || !t.is_admissible(cur, j) {
                    continue;
                }
                let step = match w {
                    EdgeWeight::Distance => {
                        let a = &t.nodes()[cur];
                        let b = &t.nodes()[j];
                        ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt()
                    }
                    EdgeWeight::Hops => 1.0,
                };
                if j == gs {
                    *best = best.min(acc + step);
                } else if !visited[j] {
                    visited[j] = true;
                    dfs(t, w, j, visited, acc + step, best);
                    visited[j] = false;
                }
            }
        }
        let mut visited = vec![false; t.n_uavs()];
        visited[i] = true;
        let mut best = f64::INFINITY;
        dfs(t, weight, i, &mut visited, 0.0, &mut best);
        best
    }

    #[test]
    fn spt_costs_match_path_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 30 {
            let coords: Vec<(f64, f64)> = (0..6)
                .map(|_| {
                    (
                        rng.random_range(0.0..12000.0),
                        rng.random_range(0.0..12000.0),
                    )
                })
                .collect();
            let t = topo(&coords, (6000.0, 0.0), 6000.0);
            for weight in [EdgeWeight::Distance, EdgeWeight::Hops] {
                let Ok(tree) = build_spt(&t, weight) else {
                    continue;
                };
                for i in 0..6 {
                    let expected = brute_force_cost(&t, weight, i);
                    assert!(
                        (tree.path_cost[i] - expected).abs() <= 1e-9 * expected,
                        "uav {i}: {} vs {expected}",
                        tree.path_cost[i]
                    );
                    // Bellman optimality against every admissible alternative.
                    for j in t.neighbors(i) {
                        let via =
                            weight.of(&t, i, j) + if j == 6 { 0.0 } else { tree.path_cost[j] };
                        assert!(tree.path_cost[i] <= via + 1e-9 * via);
                    }
                }
                assert!(validate_tree(&tree, &t).is_valid());
                checked += 1;
            }
        }
    }

    #[test]
    fn spt_is_deterministic() {
        let t = topo(
            &[(1000.0, 2000.0), (4000.0, 4500.0), (2500.0, 7000.0)],
            (3000.0, 0.0),
            6000.0,
        );
        let a = build_spt(&t, EdgeWeight::Distance).unwrap();
        let b = build_spt(&t, EdgeWeight::Distance).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_cycle_reports_c5() {
        let t = topo(&[(0.0, 1000.0), (0.0, 2000.0)], (0.0, 0.0), 6000.0);
        let tree = RoutingTree::from_parents(vec![1, 0], &t, EdgeWeight::Distance);
        let report = validate_tree(&tree, &t);
        assert!(report.violates("C5"));
        assert!(report.violates("C4"));
        assert!(report
            .violations
            .contains(&Violation::MutualLink { a: 0, b: 1 }));
        assert!(tree.path_cost.iter().all(|c| c.is_infinite()));
    }

    #[test]
    fn long_link_reports_c6() {
        let t = topo(&[(0.0, 5000.0), (0.0, 10000.0)], (0.0, 0.0), 6000.0);
        let tree = RoutingTree::from_parents(vec![2, 2], &t, EdgeWeight::Distance);
        let report = validate_tree(&tree, &t);
        assert_eq!(
            report.violations,
            vec![Violation::Inadmissible { uav: 1, parent: 2 }]
        );
    }

    #[test]
    fn self_parent_reports_c3() {
        let t = topo(&[(0.0, 1000.0)], (0.0, 0.0), 6000.0);
        let tree = RoutingTree::from_parents(vec![0], &t, EdgeWeight::Distance);
        let report = validate_tree(&tree, &t);
        assert!(report.violates("C3"));
    }

    #[test]
    fn longer_cycle_and_feeder() {
        // 0 -> 1 -> 2 -> 0 is a loop; 3 feeds into it.
        let coords = [
            (0.0, 1000.0),
            (1000.0, 1000.0),
            (500.0, 1800.0),
            (1500.0, 2000.0),
        ];
        let t = topo(&coords, (0.0, 0.0), 6000.0);
        let tree = RoutingTree::from_parents(vec![1, 2, 0, 1], &t, EdgeWeight::Distance);
        let report = validate_tree(&tree, &t);
        let loops: Vec<_> = report
            .violations
            .iter()
            .filter(|v| matches!(v, Violation::Loop { .. }))
            .collect();
        assert_eq!(loops.len(), 3);
        assert!(report.violations.contains(&Violation::NotRooted { uav: 3 }));
        assert!(!report.violations.contains(&Violation::Loop { uav: 3 }));
    }

    #[test]
    fn descendant_query() {
        let t = topo(&[(0.0, 5000.0), (0.0, 10000.0)], (0.0, 0.0), 6000.0);
        let tree = build_spt(&t, EdgeWeight::Distance).unwrap();
        assert!(tree.is_descendant(1, 0));
        assert!(!tree.is_descendant(0, 1));
        assert!(tree.is_descendant(0, 0));
        assert_eq!(tree.children(0).collect::<Vec<_>>(), vec![1]);
    }
}
