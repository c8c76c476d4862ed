//! Brute-force references for small instances.
//!
//! Nothing here calls into [`crate::power`] or [`crate::linksel`]; the
//! oracles only share the channel model.

use crate::error::{Error, Result};
use crate::model::{link_capacity, ChannelParams, Topology};
use crate::routing::RoutingTree;

/// Largest simplex grid (number of points) the power oracle will search.
pub const GRID_POINT_BUDGET: f64 = 2e8;

/// Largest UAV count the tree enumerator accepts.
pub const MAX_ENUM_UAVS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub enum Configuration {
    Powers(Vec<f64>),
    Tree {
        parents: Vec<usize>,
        powers: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Best total throughput found, bits/s.
    pub best_value: f64,
    pub best_configuration: Configuration,
    /// Number of configurations covered by the search.
    pub evaluations: u64,
}

impl OracleResult {
    pub fn powers(&self) -> &[f64] {
        match &self.best_configuration {
            Configuration::Powers(p) => p,
            Configuration::Tree { powers, .. } => powers,
        }
    }

    pub fn parents(&self) -> Option<&[usize]> {
        match &self.best_configuration {
            Configuration::Tree { parents, .. } => Some(parents),
            Configuration::Powers(_) => None,
        }
    }
}

fn simplex_points(steps: usize, links: usize) -> f64 {
    // C(steps + links - 1, links - 1)
    (1..links).fold(1.0, |acc, k| acc * (steps + k) as f64 / k as f64)
}

/// Best power split of `budget` over the parent links of `tree`, searched on
/// the grid `{P = budget * k / K, Σ k = K}` with `K = round(1/resolution)`.
pub fn grid_power_oracle(
    tree: &RoutingTree,
    topo: &Topology,
    budget: f64,
    params: &ChannelParams,
    resolution: f64,
) -> Result<OracleResult> {
    let gains: Vec<f64> = tree
        .parent
        .iter()
        .enumerate()
        .map(|(i, &p)| topo.gain(i, p))
        .collect();
    grid_power_oracle_gains(&gains, budget, params, resolution)
}

/// [`grid_power_oracle`] for explicit link gains.
///
/// The maximum over all grid points is computed exactly by max-plus
/// convolution of the per-link rate tables, which visits every split of
/// every sub-budget once instead of listing the points one by one.
pub fn grid_power_oracle_gains(
    gains: &[f64],
    budget: f64,
    params: &ChannelParams,
    resolution: f64,
) -> Result<OracleResult> {
    if !(budget > 0.0) {
        return Err(Error::InvalidBudget(budget));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::OracleBudget(format!(
            "resolution {resolution} outside (0, 1]"
        )));
    }
    let n = gains.len();
    if n == 0 {
        return Err(Error::OracleBudget("no links".into()));
    }
    let steps = (1.0 / resolution).round() as usize;
    let points = simplex_points(steps, n);
    if points > GRID_POINT_BUDGET {
        return Err(Error::OracleBudget(format!(
            "{n} links at resolution {resolution} give {points:.3e} grid points (limit {GRID_POINT_BUDGET:.0e})"
        )));
    }

    let unit = budget / steps as f64;
    let rates: Vec<Vec<f64>> = gains
        .iter()
        .map(|&h| {
            (0..=steps)
                .map(|k| link_capacity(unit * k as f64, h, params))
                .collect()
        })
        .collect();

    // best[r]: best value of links 0..=j using r units; choice[j][r]: units given to link j.
    let mut best = rates[0].clone();
    let mut choice = vec![(0..=steps).collect::<Vec<_>>()];
    for rate in &rates[1..] {
        let mut next = vec![f64::NEG_INFINITY; steps + 1];
        let mut pick = vec![0; steps + 1];
        for r in 0..=steps {
            for k in 0..=r {
                let v = best[r - k] + rate[k];
                if v > next[r] {
                    next[r] = v;
                    pick[r] = k;
                }
            }
        }
        best = next;
        choice.push(pick);
    }

    let mut units = vec![0; n];
    let mut remaining = steps;
    for j in (0..n).rev() {
        let k = choice[j][remaining];
        units[j] = k;
        remaining -= k;
    }
    let powers = units.iter().map(|&k| unit * k as f64).collect();
    Ok(OracleResult {
        best_value: best[steps],
        best_configuration: Configuration::Powers(powers),
        evaluations: points as u64,
    })
}

/// How the tree enumerator assigns power to each candidate tree.
#[derive(Debug, Clone, Copy)]
pub enum AllocRule<'a> {
    /// Optimal split of the budget over the tree's links.
    Waterfill { budget: f64 },
    /// The given per-UAV powers, unchanged.
    Fixed(&'a [f64]),
}

/// Water-filling by sorting the links by noise floor and taking the largest
/// prefix whose common level lies above every floor in it.
fn sorted_waterfill(gains: &[f64], budget: f64, params: &ChannelParams) -> Vec<f64> {
    let floors: Vec<f64> = gains.iter().map(|&h| params.noise_power() / h).collect();
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| floors[a].total_cmp(&floors[b]));
    let mut level = budget + floors[order[0]];
    let mut prefix = floors[order[0]];
    for k in 2..=order.len() {
        prefix += floors[order[k - 1]];
        let candidate = (budget + prefix) / k as f64;
        if candidate > floors[order[k - 1]] {
            level = candidate;
        } else {
            break;
        }
    }
    floors.iter().map(|&f| (level - f).max(0.0)).collect()
}

/// Whether following `parents` from every UAV reaches the ground station.
fn is_arborescence(parents: &[usize]) -> bool {
    let n = parents.len();
    // 0 = unknown, 1 = on current walk, 2 = reaches the root
    let mut state = vec![0u8; n];
    for start in 0..n {
        let mut path = Vec::new();
        let mut cur = start;
        let ok = loop {
            if cur == n || state[cur] == 2 {
                break true;
            }
            if state[cur] == 1 {
                break false;
            }
            state[cur] = 1;
            path.push(cur);
            cur = parents[cur];
        };
        if !ok {
            return false;
        }
        for v in path {
            state[v] = 2;
        }
    }
    true
}

fn stranded(topo: &Topology) -> Vec<usize> {
    let n = topo.n_uavs();
    let mut reached = vec![false; n + 1];
    reached[n] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            if !reached[i] && topo.neighbors(i).any(|j| reached[j]) {
                reached[i] = true;
                changed = true;
            }
        }
    }
    (0..n)
        .filter(|&i| !reached[i])
        .map(|i| topo.nodes()[i].id)
        .collect()
}

/// Best ground-station-rooted spanning arborescence over admissible links,
/// found by listing every parent assignment and discarding those with cycles.
pub fn tree_enum_oracle(
    topo: &Topology,
    rule: AllocRule<'_>,
    params: &ChannelParams,
) -> Result<OracleResult> {
    let n = topo.n_uavs();
    if n > MAX_ENUM_UAVS {
        return Err(Error::OracleBudget(format!(
            "tree enumeration supports at most {MAX_ENUM_UAVS} UAVs, got {n}"
        )));
    }
    match rule {
        AllocRule::Waterfill { budget } if !(budget > 0.0) => {
            return Err(Error::InvalidBudget(budget));
        }
        AllocRule::Fixed(p) if p.len() != n => {
            return Err(Error::InvalidConfig(format!(
                "{} fixed powers given for {n} UAVs",
                p.len()
            )));
        }
        _ => {}
    }

    let options: Vec<Vec<usize>> = (0..n).map(|i| topo.neighbors(i).collect()).collect();
    if options.iter().any(Vec::is_empty) {
        return Err(Error::Disconnected {
            stranded: stranded(topo),
        });
    }

    let mut digits = vec![0usize; n];
    let mut parents = vec![0usize; n];
    let mut gains = vec![0.0; n];
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut evaluations = 0u64;
    loop {
        for i in 0..n {
            parents[i] = options[i][digits[i]];
        }
        if is_arborescence(&parents) {
            evaluations += 1;
            for i in 0..n {
                gains[i] = topo.gain(i, parents[i]);
            }
            let powers = match rule {
                AllocRule::Waterfill { budget } => sorted_waterfill(&gains, budget, params),
                AllocRule::Fixed(p) => p.to_vec(),
            };
            let value: f64 = powers
                .iter()
                .zip(&gains)
                .map(|(&p, &h)| link_capacity(p, h, params))
                .sum();
            if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                best = Some((value, parents.clone(), powers));
            }
        }

        // Odometer increment.
        let mut pos = 0;
        loop {
            if pos == n {
                let Some((best_value, parents, powers)) = best else {
                    return Err(Error::Disconnected {
                        stranded: stranded(topo),
                    });
                };
                return Ok(OracleResult {
                    best_value,
                    best_configuration: Configuration::Tree { parents, powers },
                    evaluations,
                });
            }
            digits[pos] += 1;
            if digits[pos] < options[pos].len() {
                break;
            }
            digits[pos] = 0;
            pos += 1;
        }
    }
}
