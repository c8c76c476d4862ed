//! Link-selection refinement of a water-filled routing tree.
//!
//! With the per-UAV powers `P_i*` held fixed, every UAV considers the
//! admissible neighbours it could adopt as parent without breaking the tree.
//! The binary choice is relaxed to `L ∈ (0, 1)` and the log-barrier objective
//!
//! ```text
//! φ(L) = Σ_ik L_ik R_ik D_ik + (1/γ) Σ_ik [ln L_ik + ln(1 - L_ik)]
//! ```
//!
//! is maximized subject to `Σ_k L_ik P_ik = P_i*` for each UAV. The
//! constraint couples only the entries of one UAV and the Hessian is
//! diagonal, so each UAV is an independent problem solved by a feasible-start
//! equality-constrained Newton method with backtracking. The relaxed values
//! are then rounded: each UAV adopts its highest-valued candidate when that
//! raises its link rate and keeps the tree valid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{link_capacity, ChannelParams, Topology};
use crate::power::PowerAllocation;
use crate::routing::{validate_tree, RoutingTree};

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Node index of the prospective parent.
    pub node: usize,
    pub gain: f64,
    /// Link rate at the UAV's fixed power, bits/s.
    pub rate: f64,
    /// Entry of the directional matrix (1 for an admissible parent).
    pub direction: i8,
}

impl Candidate {
    pub fn weight(&self) -> f64 {
        self.rate * f64::from(self.direction)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavCandidates {
    pub uav: usize,
    pub parent: usize,
    /// Rate on the current parent link at `power`.
    pub parent_rate: f64,
    /// Fixed transmit power `P_i*`.
    pub power: f64,
    pub candidates: Vec<Candidate>,
}

impl UavCandidates {
    pub fn weights(&self) -> Vec<f64> {
        self.candidates.iter().map(Candidate::weight).collect()
    }

    /// Per-link powers `P_ik`; every candidate link uses the UAV's own `P_i*`.
    pub fn link_powers(&self) -> Vec<f64> {
        vec![self.power; self.candidates.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    /// Indexed by UAV.
    pub per_uav: Vec<UavCandidates>,
}

/// Orientation of the pair `(i, k)` relative to `tree`: 1 when `k` is the
/// parent of `i` or could become it, -1 when `i` is the parent of `k`,
/// 0 otherwise.
pub fn direction(tree: &RoutingTree, topo: &Topology, uav: usize, node: usize) -> i8 {
    let n = topo.n_uavs();
    if node == uav {
        0
    } else if tree.parent[uav] == node {
        1
    } else if node < n && tree.parent[node] == uav {
        -1
    } else if topo.is_admissible(uav, node) && !tree.is_descendant(node, uav) {
        1
    } else {
        0
    }
}

/// `D` as an `n x (n + 1)` matrix.
pub fn directional_matrix(tree: &RoutingTree, topo: &Topology) -> Vec<Vec<i8>> {
    (0..topo.n_uavs())
        .map(|i| {
            (0..=topo.n_uavs())
                .map(|k| direction(tree, topo, i, k))
                .collect()
        })
        .collect()
}

/// Alternative parents for every UAV: admissible neighbours other than the
/// current parent that are not in the UAV's own subtree.
pub fn build_candidates(
    tree: &RoutingTree,
    topo: &Topology,
    alloc: &PowerAllocation,
    params: &ChannelParams,
) -> CandidateSet {
    let per_uav = (0..topo.n_uavs())
        .map(|i| {
            let parent = tree.parent[i];
            let power = alloc.power[i];
            let candidates = topo
                .neighbors(i)
                .filter(|&k| k != parent && !tree.is_descendant(k, i))
                .map(|k| {
                    let gain = topo.gain(i, k);
                    Candidate {
                        node: k,
                        gain,
                        rate: link_capacity(power, gain, params),
                        direction: direction(tree, topo, i, k),
                    }
                })
                .collect();
            UavCandidates {
                uav: i,
                parent,
                parent_rate: link_capacity(power, topo.gain(i, parent), params),
                power,
                candidates,
            }
        })
        .collect();
    CandidateSet { per_uav }
}

/// Barrier schedule, line search and stopping parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub gamma_init: f64,
    pub gamma_growth: f64,
    /// Number of barrier rounds; round `r` uses `gamma_init * gamma_growth^r`.
    pub barrier_rounds: usize,
    pub epsilon_decrement: f64,
    pub backtrack_alpha: f64,
    pub backtrack_tau_shrink: f64,
    pub max_newton_iters: usize,
    /// Distance kept from 0 and 1 by the starting point.
    pub interior_margin: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma_init: 10.0,
            gamma_growth: 10.0,
            barrier_rounds: 3,
            epsilon_decrement: 1e-8,
            backtrack_alpha: 0.25,
            backtrack_tau_shrink: 0.5,
            max_newton_iters: 100,
            interior_margin: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSolverConfig(msg));
        if !(self.gamma_init > 0.0 && self.gamma_init.is_finite()) {
            return bad(format!(
                "gamma_init must be positive, got {}",
                self.gamma_init
            ));
        }
        if !(self.gamma_growth > 1.0 && self.gamma_growth.is_finite()) {
            return bad(format!(
                "gamma_growth must exceed 1, got {}",
                self.gamma_growth
            ));
        }
        if self.barrier_rounds == 0 {
            return bad("barrier_rounds must be at least 1".into());
        }
        if !(self.epsilon_decrement > 0.0) {
            return bad(format!(
                "epsilon_decrement must be positive, got {}",
                self.epsilon_decrement
            ));
        }
        if !(self.backtrack_alpha > 0.0 && self.backtrack_alpha < 0.5) {
            return bad(format!(
                "backtrack_alpha must lie in (0, 0.5), got {}",
                self.backtrack_alpha
            ));
        }
        if !(self.backtrack_tau_shrink > 0.0 && self.backtrack_tau_shrink < 1.0) {
            return bad(format!(
                "backtrack_tau_shrink must lie in (0, 1), got {}",
                self.backtrack_tau_shrink
            ));
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters must be at least 1".into());
        }
        if !(self.interior_margin > 0.0 && self.interior_margin < 0.5) {
            return bad(format!(
                "interior_margin must lie in (0, 0.5), got {}",
                self.interior_margin
            ));
        }
        Ok(())
    }

    pub fn gamma(&self, round: usize) -> f64 {
        self.gamma_init * self.gamma_growth.powi(round as i32)
    }

    pub fn final_gamma(&self) -> f64 {
        self.gamma(self.barrier_rounds - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UavStatus {
    /// Interior optimum found.
    Solved,
    /// A single candidate: the constraint forces `L = 1`, so no strictly
    /// interior point exists. The value is reported as 1.
    Pinned,
    /// Nothing to choose from; the UAV keeps its parent.
    NoCandidates,
    /// The UAV carries no power, so every candidate rate is zero.
    ZeroPower,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UavRelaxed {
    pub uav: usize,
    pub status: UavStatus,
    /// Relaxed values aligned with the UAV's candidate list.
    pub values: Vec<f64>,
    /// Newton iterations summed over barrier rounds.
    pub iterations: usize,
    pub round_iterations: Vec<usize>,
    pub final_decrement: f64,
    /// Largest relative equality-constraint residual seen at any iterate.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedLinkMatrix {
    /// Indexed by UAV, aligned with [`CandidateSet::per_uav`].
    pub per_uav: Vec<UavRelaxed>,
    /// Barrier parameter of the last round.
    pub gamma: f64,
    pub iterations: usize,
    /// Largest final decrement over the solved UAVs.
    pub final_decrement: f64,
}

impl RelaxedLinkMatrix {
    /// Relaxed value of link `uav -> node`, if it was a candidate.
    pub fn value(&self, set: &CandidateSet, uav: usize, node: usize) -> Option<f64> {
        let pos = set.per_uav[uav]
            .candidates
            .iter()
            .position(|c| c.node == node)?;
        self.per_uav[uav].values.get(pos).copied()
    }

    pub fn max_residual(&self) -> f64 {
        self.per_uav
            .iter()
            .map(|u| u.max_residual)
            .fold(0.0, f64::max)
    }
}

/// One solver iterate, for debugging output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub uav: usize,
    pub round: usize,
    pub gamma: f64,
    pub iteration: usize,
    pub phi: f64,
    pub decrement: f64,
    /// Accepted step length; zero on the terminating row.
    pub step: f64,
    pub residual: f64,
}

fn check_domain(values: &[f64]) -> Result<()> {
    match values.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        Some(&v) => Err(Error::OutsideBarrierDomain(v)),
        None => Ok(()),
    }
}

/// `Σ w_k L_k + (1/γ) Σ [ln L_k + ln(1 - L_k)]` for one block of entries.
pub fn barrier_value(values: &[f64], weights: &[f64], gamma: f64) -> Result<f64> {
    assert_eq!(values.len(), weights.len());
    check_domain(values)?;
    let linear: f64 = values.iter().zip(weights).map(|(l, w)| l * w).sum();
    let barrier: f64 = values.iter().map(|&l| l.ln() + (-l).ln_1p()).sum();
    Ok(linear + barrier / gamma)
}

/// Gradient and Hessian diagonal of [`barrier_value`].
pub fn barrier_derivatives(
    values: &[f64],
    weights: &[f64],
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    assert_eq!(values.len(), weights.len());
    check_domain(values)?;
    let grad = values
        .iter()
        .zip(weights)
        .map(|(&l, &w)| w + (1.0 / l - 1.0 / (1.0 - l)) / gamma)
        .collect();
    let hess = values
        .iter()
        .map(|&l| -(1.0 / (l * l) + 1.0 / ((1.0 - l) * (1.0 - l))) / gamma)
        .collect();
    Ok((grad, hess))
}

fn solved<'a>(
    relaxed: &'a RelaxedLinkMatrix,
    set: &'a CandidateSet,
) -> impl Iterator<Item = (&'a UavRelaxed, &'a UavCandidates)> {
    relaxed
        .per_uav
        .iter()
        .zip(&set.per_uav)
        .filter(|(r, _)| r.status == UavStatus::Solved)
}

/// φ summed over every UAV whose relaxed block is interior.
pub fn barrier_objective(
    relaxed: &RelaxedLinkMatrix,
    set: &CandidateSet,
    gamma: f64,
) -> Result<f64> {
    solved(relaxed, set).try_fold(0.0, |acc, (r, c)| {
        Ok(acc + barrier_value(&r.values, &c.weights(), gamma)?)
    })
}

/// Gradient and Hessian diagonal of [`barrier_objective`], concatenated in
/// UAV then candidate order.
pub fn gradient_hessian(
    relaxed: &RelaxedLinkMatrix,
    set: &CandidateSet,
    gamma: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut grad = Vec::new();
    let mut hess = Vec::new();
    for (r, c) in solved(relaxed, set) {
        let (g, h) = barrier_derivatives(&r.values, &c.weights(), gamma)?;
        grad.extend(g);
        hess.extend(h);
    }
    Ok((grad, hess))
}

/// Interior point stored as the value and its complement, so entries close
/// to 1 keep full relative precision in `1 - L`.
struct Point {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

struct Subproblem<'a> {
    uav: usize,
    /// Weights shifted by a multiple of the link powers. On the constraint
    /// set this changes φ by a constant and leaves the Newton steps intact.
    shifted: Vec<f64>,
    weights: &'a [f64],
    link_power: &'a [f64],
    target: f64,
}

impl Subproblem<'_> {
    fn phi(&self, x: &Point, gamma: f64) -> f64 {
        let linear: f64 = x.lo.iter().zip(self.weights).map(|(l, w)| l * w).sum();
        let barrier: f64 = x.lo.iter().zip(&x.hi).map(|(l, h)| l.ln() + h.ln()).sum();
        linear + barrier / gamma
    }

    fn residual(&self, x: &Point) -> f64 {
        let lhs: f64 = x.lo.iter().zip(self.link_power).map(|(l, p)| l * p).sum();
        (lhs - self.target).abs() / self.target
    }

    /// Ascent direction and squared decrement at `x`.
    ///
    /// With `d = -1/∇²φ` (positive), the step solving the KKT system is
    /// `Δ = d ∘ (∇φ - ν p)` where `ν = pᵀ d∇φ / pᵀ d p`, so `pᵀΔ = 0`.
    /// The squared decrement is `∇φᵀΔ = Σ d (∇φ - ν p)²`.
    fn newton_step(&self, x: &Point, gamma: f64) -> (Vec<f64>, f64) {
        let m = x.lo.len();
        let mut grad = Vec::with_capacity(m);
        let mut inv_curv = Vec::with_capacity(m);
        for k in 0..m {
            let (l, h) = (x.lo[k], x.hi[k]);
            grad.push(self.shifted[k] + (1.0 / l - 1.0 / h) / gamma);
            inv_curv.push(gamma / (1.0 / (l * l) + 1.0 / (h * h)));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..m {
            let p = self.link_power[k];
            num += p * inv_curv[k] * grad[k];
            den += p * inv_curv[k] * p;
        }
        let nu = num / den;
        let mut step = Vec::with_capacity(m);
        let mut dec_sq = 0.0;
        for k in 0..m {
            let r = grad[k] - nu * self.link_power[k];
            step.push(inv_curv[k] * r);
            dec_sq += inv_curv[k] * r * r;
        }
        (step, dec_sq)
    }

    /// `φ(x + τΔ) - φ(x)` evaluated without cancellation.
    fn phi_change(&self, x: &Point, step: &[f64], tau: f64, gamma: f64) -> f64 {
        let mut linear = 0.0;
        let mut barrier = 0.0;
        for k in 0..step.len() {
            let s = tau * step[k];
            linear += self.shifted[k] * s;
            barrier += (s / x.lo[k]).ln_1p() + (-s / x.hi[k]).ln_1p();
        }
        linear + barrier / gamma
    }
}

fn interior_after(x: &Point, step: &[f64], tau: f64) -> bool {
    step.iter()
        .enumerate()
        .all(|(k, &s)| x.lo[k] + tau * s > 0.0 && x.hi[k] - tau * s > 0.0)
}

struct RoundOutcome {
    iterations: usize,
    decrement: f64,
}

fn solve_round(
    sub: &Subproblem<'_>,
    x: &mut Point,
    gamma: f64,
    round: usize,
    cfg: &SolverConfig,
    max_residual: &mut f64,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> std::result::Result<RoundOutcome, RoundOutcome> {
    let mut iteration = 0;
    loop {
        let (step, dec_sq) = sub.newton_step(x, gamma);
        let decrement = dec_sq.max(0.0).sqrt();
        if decrement <= cfg.epsilon_decrement {
            if let Some(t) = trace.as_deref_mut() {
                t.push(TraceRow {
                    uav: sub.uav,
                    round,
                    gamma,
                    iteration,
                    phi: sub.phi(x, gamma),
                    decrement,
                    step: 0.0,
                    residual: sub.residual(x),
                });
            }
            return Ok(RoundOutcome {
                iterations: iteration,
                decrement,
            });
        }
        if iteration == cfg.max_newton_iters {
            return Err(RoundOutcome {
                iterations: iteration,
                decrement,
            });
        }

        let mut tau = 1.0;
        while !interior_after(x, &step, tau) {
            tau *= cfg.backtrack_tau_shrink;
        }
        while sub.phi_change(x, &step, tau, gamma) < cfg.backtrack_alpha * tau * dec_sq {
            tau *= cfg.backtrack_tau_shrink;
            if tau < f64::EPSILON * f64::EPSILON {
                // The line search can make no progress at working precision.
                return Err(RoundOutcome {
                    iterations: iteration,
                    decrement,
                });
            }
        }

        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow {
                uav: sub.uav,
                round,
                gamma,
                iteration,
                phi: sub.phi(x, gamma),
                decrement,
                step: tau,
                residual: sub.residual(x),
            });
        }
        for (k, &s) in step.iter().enumerate() {
            x.lo[k] += tau * s;
            x.hi[k] -= tau * s;
        }
        *max_residual = max_residual.max(sub.residual(x));
        iteration += 1;
    }
}

fn solve_uav(
    cands: &UavCandidates,
    target: f64,
    cfg: &SolverConfig,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<UavRelaxed> {
    let m = cands.candidates.len();
    let blank = |status, values| UavRelaxed {
        uav: cands.uav,
        status,
        values,
        iterations: 0,
        round_iterations: Vec::new(),
        final_decrement: 0.0,
        max_residual: 0.0,
    };
    match m {
        0 => return Ok(blank(UavStatus::NoCandidates, Vec::new())),
        _ if target <= 0.0 => return Ok(blank(UavStatus::ZeroPower, vec![0.0; m])),
        1 => return Ok(blank(UavStatus::Pinned, vec![1.0])),
        _ => {}
    }

    let weights = cands.weights();
    let link_power = cands.link_powers();
    let shift = weights
        .iter()
        .zip(&link_power)
        .map(|(w, p)| w / p)
        .fold(f64::NEG_INFINITY, f64::max);
    let sub = Subproblem {
        uav: cands.uav,
        shifted: weights
            .iter()
            .zip(&link_power)
            .map(|(w, p)| w - shift * p)
            .collect(),
        weights: &weights,
        link_power: &link_power,
        target,
    };

    // Each entry alone satisfies L_k P_ik = P_i*; scaling by 1/m makes the
    // sum meet the constraint.
    let lo: Vec<f64> = link_power
        .iter()
        .map(|&p| (target / (p * m as f64)).clamp(cfg.interior_margin, 1.0 - cfg.interior_margin))
        .collect();
    let hi = lo.iter().map(|l| 1.0 - l).collect();
    let mut x = Point { lo, hi };
    let mut max_residual = sub.residual(&x);

    let mut round_iterations = Vec::with_capacity(cfg.barrier_rounds);
    let mut decrement = f64::INFINITY;
    for round in 0..cfg.barrier_rounds {
        let gamma = cfg.gamma(round);
        match solve_round(
            &sub,
            &mut x,
            gamma,
            round,
            cfg,
            &mut max_residual,
            trace.as_deref_mut(),
        ) {
            Ok(out) => {
                round_iterations.push(out.iterations);
                decrement = out.decrement;
            }
            Err(out) => {
                return Err(Error::NoConvergence {
                    uav: cands.uav + 1,
                    iterations: out.iterations,
                    decrement: out.decrement,
                })
            }
        }
    }

    Ok(UavRelaxed {
        uav: cands.uav,
        status: UavStatus::Solved,
        values: x.lo,
        iterations: round_iterations.iter().sum(),
        round_iterations,
        final_decrement: decrement,
        max_residual,
    })
}

fn refine(
    set: &CandidateSet,
    alloc: &PowerAllocation,
    cfg: &SolverConfig,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<RelaxedLinkMatrix> {
    cfg.validate()?;
    let per_uav = set
        .per_uav
        .iter()
        .map(|c| solve_uav(c, alloc.power[c.uav], cfg, trace.as_deref_mut()))
        .collect::<Result<Vec<_>>>()?;
    let iterations = per_uav.iter().map(|u| u.iterations).sum();
    let final_decrement = per_uav
        .iter()
        .filter(|u| u.status == UavStatus::Solved)
        .map(|u| u.final_decrement)
        .fold(0.0, f64::max);
    Ok(RelaxedLinkMatrix {
        per_uav,
        gamma: cfg.final_gamma(),
        iterations,
        final_decrement,
    })
}

/// Solves the relaxed link-selection problem for every UAV.
pub fn newton_refine(
    set: &CandidateSet,
    alloc: &PowerAllocation,
    cfg: &SolverConfig,
) -> Result<RelaxedLinkMatrix> {
    refine(set, alloc, cfg, None)
}

/// As [`newton_refine`], also returning one row per Newton iterate.
pub fn newton_refine_traced(
    set: &CandidateSet,
    alloc: &PowerAllocation,
    cfg: &SolverConfig,
) -> Result<(RelaxedLinkMatrix, Vec<TraceRow>)> {
    let mut trace = Vec::new();
    let relaxed = refine(set, alloc, cfg, Some(&mut trace))?;
    Ok((relaxed, trace))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Swap {
    pub uav: usize,
    pub old_parent: usize,
    pub new_parent: usize,
    pub rate_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub tree: RoutingTree,
    /// Total throughput of `tree` at the unchanged powers, bits/s.
    pub throughput: f64,
    pub swaps: Vec<Swap>,
}

/// Rounds the relaxed solution back to a routing tree.
///
/// UAVs are visited in descending order of the rate gain their top-valued
/// candidate would bring. A swap happens only when it raises the UAV's rate
/// at its fixed power and the tree stays valid, so the throughput never
/// drops.
pub fn round_and_update(
    relaxed: &RelaxedLinkMatrix,
    set: &CandidateSet,
    tree: &RoutingTree,
    alloc: &PowerAllocation,
    topo: &Topology,
    params: &ChannelParams,
) -> Refinement {
    let mut proposals: Vec<(usize, &Candidate, f64)> = Vec::new();
    for (r, c) in relaxed.per_uav.iter().zip(&set.per_uav) {
        if !matches!(r.status, UavStatus::Solved | UavStatus::Pinned) {
            continue;
        }
        // Highest value wins; ties go to the lower node index (candidates
        // are listed in ascending node order).
        let mut best: Option<(usize, f64)> = None;
        for (pos, &v) in r.values.iter().enumerate() {
            if best.is_none_or(|(_, bv)| v > bv) {
                best = Some((pos, v));
            }
        }
        let Some((pos, _)) = best else { continue };
        let cand = &c.candidates[pos];
        let gain = cand.rate - c.parent_rate;
        if gain > 0.0 {
            proposals.push((c.uav, cand, gain));
        }
    }
    proposals.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));

    let mut out = tree.clone();
    let mut swaps = Vec::new();
    for (uav, cand, gain) in proposals {
        if !topo.is_admissible(uav, cand.node) || out.is_descendant(cand.node, uav) {
            continue;
        }
        swaps.push(Swap {
            uav,
            old_parent: out.parent[uav],
            new_parent: cand.node,
            rate_gain: gain,
        });
        out.parent[uav] = cand.node;
    }
    out.recompute_path_costs(topo);
    debug_assert!(validate_tree(&out, topo).is_valid());

    let throughput = out
        .parent
        .iter()
        .enumerate()
        .map(|(i, &p)| link_capacity(alloc.power[i], topo.gain(i, p), params))
        .sum();
    Refinement {
        tree: out,
        throughput,
        swaps,
    }
}
