//! The end-to-end optimization for one topology.

use crate::error::Result;
use crate::linksel::{
    build_candidates, newton_refine, newton_refine_traced, round_and_update, CandidateSet,
    Refinement, RelaxedLinkMatrix, SolverConfig, TraceRow,
};
use crate::model::Topology;
use crate::power::{allocate_power, network_throughput, PowerAllocation};
use crate::routing::{build_spt, EdgeWeight, RoutingTree};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub power_budget_w: f64,
    pub edge_weight: EdgeWeight,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub spt: RoutingTree,
    pub alloc: PowerAllocation,
    pub candidates: CandidateSet,
    pub relaxed: RelaxedLinkMatrix,
    pub refined: Refinement,
    /// Throughput of the shortest-path tree under water-filling, bits/s.
    pub throughput_p11: f64,
    /// Throughput after link refinement at the same powers, bits/s.
    pub throughput_p14: f64,
    pub newton_iters: usize,
}

impl PipelineOutcome {
    /// The tree actually used after refinement.
    pub fn tree(&self) -> &RoutingTree {
        &self.refined.tree
    }
}

/// SPT, water-filling, relaxed link selection, rounding.
pub fn run_pipeline(topo: &Topology, cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    run(topo, cfg, None)
}

pub fn run_pipeline_traced(
    topo: &Topology,
    cfg: &PipelineConfig,
) -> Result<(PipelineOutcome, Vec<TraceRow>)> {
    let mut trace = Vec::new();
    let out = run(topo, cfg, Some(&mut trace))?;
    Ok((out, trace))
}

fn run(
    topo: &Topology,
    cfg: &PipelineConfig,
    trace: Option<&mut Vec<TraceRow>>,
) -> Result<PipelineOutcome> {
    let params = topo.params();
    let spt = build_spt(topo, cfg.edge_weight)?;
    let alloc = allocate_power(&spt, topo, cfg.power_budget_w, params)?;
    let throughput_p11 = network_throughput(&alloc, &spt, topo, params);
    let candidates = build_candidates(&spt, topo, &alloc, params);
    let relaxed = match trace {
        Some(rows) => {
            let (relaxed, t) = newton_refine_traced(&candidates, &alloc, &cfg.solver)?;
            *rows = t;
            relaxed
        }
        None => newton_refine(&candidates, &alloc, &cfg.solver)?,
    };
    let refined = round_and_update(&relaxed, &candidates, &spt, &alloc, topo, params);
    Ok(PipelineOutcome {
        throughput_p11,
        throughput_p14: refined.throughput,
        newton_iters: relaxed.iterations,
        spt,
        alloc,
        candidates,
        relaxed,
        refined,
    })
}

/// One line per UAV: `uav_id,parent_id,distance_m,gain,power_w,rate_bps`,
/// with 1-based ids (the ground station is `n + 1`).
pub fn tree_dump(topo: &Topology, tree: &RoutingTree, alloc: &PowerAllocation) -> String {
    let params = topo.params();
    let mut out = String::from("uav_id,parent_id,distance_m,gain,power_w,rate_bps\n");
    for (i, &p) in tree.parent.iter().enumerate() {
        let h = topo.gain(i, p);
        let rate = crate::model::link_capacity(alloc.power[i], h, params);
        out.push_str(&format!(
            "{},{},{},{:e},{:e},{}\n",
            i + 1,
            p + 1,
            topo.distance(i, p),
            h,
            alloc.power[i],
            rate
        ));
    }
    out
}
