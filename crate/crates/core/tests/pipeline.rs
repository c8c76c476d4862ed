use fanet_core::harness::{
    generate_scenario, run_pipeline, run_sweep, PipelineConfig, ScenarioConfig,
};
use fanet_core::oracle::{tree_enum_oracle, AllocRule};
use fanet_core::{ChannelParams, Node, Topology};

fn small(seed: u64, n: usize) -> ScenarioConfig {
    ScenarioConfig {
        area_side_m: 8000.0,
        n_uavs: n,
        seed,
        ..ScenarioConfig::default()
    }
}

fn pcfg(budget: f64) -> PipelineConfig {
    PipelineConfig {
        power_budget_w: budget,
        ..PipelineConfig::default()
    }
}

#[test]
fn unique_tree_leaves_nothing_to_refine() {
    // Only neighbouring links are shorter than the 6 km threshold.
    let nodes = vec![
        Node::uav(1, 0.0, 5000.0, 150.0),
        Node::uav(2, 0.0, 10_000.0, 150.0),
        Node::uav(3, 0.0, 15_000.0, 150.0),
        Node::ground_station(4, 0.0, 0.0),
    ];
    let topo = Topology::build(nodes, &ChannelParams::default()).unwrap();
    let out = run_pipeline(&topo, &pcfg(1.0)).unwrap();
    assert_eq!(out.throughput_p11, out.throughput_p14);
    assert!(out.refined.swaps.is_empty());
    assert_eq!(out.tree().parent, vec![3, 0, 1]);
}

#[test]
fn refined_at_least_spt_on_dense_scenarios() {
    for seed in 0..20 {
        let topo = generate_scenario(&ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        })
        .unwrap()
        .topology;
        let out = run_pipeline(&topo, &pcfg(2.0)).unwrap();
        assert!(out.throughput_p14 >= out.throughput_p11, "seed {seed}");
    }
}

#[test]
fn refined_tree_throughput_is_sum_of_link_rates() {
    let topo = generate_scenario(&ScenarioConfig {
        seed: 77,
        ..ScenarioConfig::default()
    })
    .unwrap()
    .topology;
    let out = run_pipeline(&topo, &pcfg(1.0)).unwrap();
    let p = topo.params();
    let mut total = 0.0;
    for (i, &k) in out.tree().parent.iter().enumerate() {
        let a = &topo.nodes()[i];
        let b = &topo.nodes()[k];
        let d = ((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt();
        let h = p.ref_gain / d.powf(p.pathloss_exp);
        let snr = out.alloc.power[i] * h / (p.noise_density * p.bandwidth_hz);
        total += p.bandwidth_hz * (1.0 + snr).log2();
    }
    assert!((total - out.throughput_p14).abs() <= 1e-9 * total);
}

#[test]
fn six_uavs_bounded_by_exhaustive_tree() {
    let topo = generate_scenario(&small(2024, 6)).unwrap().topology;
    let out = run_pipeline(&topo, &pcfg(1.0)).unwrap();
    let best = tree_enum_oracle(&topo, AllocRule::Fixed(&out.alloc.power), topo.params()).unwrap();
    assert!(out.throughput_p14 <= best.best_value * (1.0 + 1e-12));
    assert!(out.throughput_p11 <= out.throughput_p14);
}

#[test]
fn five_uavs_close_to_oracle_on_most_seeds() {
    let mut within = 0;
    for seed in 0..100 {
        let topo = generate_scenario(&small(seed, 5)).unwrap().topology;
        let out = run_pipeline(&topo, &pcfg(1.0)).unwrap();
        let best = tree_enum_oracle(&topo, AllocRule::Waterfill { budget: 1.0 }, topo.params())
            .unwrap()
            .best_value;
        assert!(out.throughput_p14 <= best * (1.0 + 1e-12));
        if out.throughput_p14 >= 0.95 * best {
            within += 1;
        }
    }
    println!("{within}/100 seeds within 5% of the best tree");
    assert!(within >= 90);
}

#[test]
fn placement_needs_few_rounds() {
    let mut quick = 0;
    for seed in 0..1000 {
        let s = generate_scenario(&ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        })
        .unwrap();
        if s.rounds <= 10 {
            quick += 1;
        }
    }
    println!("{quick}/1000 placements within 10 rounds");
    assert!(quick >= 990);
}

#[test]
fn single_trial_sweep_has_one_row() {
    let cfg = ScenarioConfig {
        trials: 1,
        ..small(3, 4)
    };
    let res = run_sweep(&cfg, &[], &[]).unwrap();
    assert_eq!(res.rows.len(), 1);
    assert_eq!(res.aggregates.len(), 1);
    assert_eq!(res.aggregates[0].p14.std, 0.0);
}

#[test]
fn emitted_aggregates_match_recomputation_from_rows() {
    let cfg = ScenarioConfig {
        trials: 7,
        ..small(100, 5)
    };
    let csv = run_sweep(&cfg, &[0.5, 2.0], &[4, 6])
        .unwrap()
        .to_csv_string()
        .unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let recs: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let (rows, aggs): (Vec<_>, Vec<_>) = recs.iter().partition(|r| r[2].parse::<u64>().is_ok());
    assert_eq!(rows.len(), 28);
    assert_eq!(aggs.len(), 8);
    for agg in aggs {
        let group: Vec<&csv::StringRecord> = rows
            .iter()
            .copied()
            .filter(|r| r[0] == agg[0] && r[1] == agg[1])
            .collect();
        assert_eq!(group.len(), 7);
        for col in [3, 4, 5] {
            let xs: Vec<f64> = group.iter().map(|r| r[col].parse().unwrap()).collect();
            let mut sum = 0.0;
            for x in &xs {
                sum += x;
            }
            let mean = sum / xs.len() as f64;
            let mut ss = 0.0;
            for x in &xs {
                ss += (x - mean) * (x - mean);
            }
            let std = (ss / (xs.len() - 1) as f64).sqrt();
            let want = if &agg[2] == "mean" { mean } else { std };
            assert_eq!(agg[col].parse::<f64>().unwrap(), want, "{agg:?} col {col}");
        }
    }
}

#[test]
fn sweep_is_deterministic() {
    let cfg = ScenarioConfig {
        trials: 10,
        ..ScenarioConfig::default()
    };
    let a = run_sweep(&cfg, &[1.0], &[20]).unwrap();
    let b = run_sweep(&cfg, &[1.0], &[20]).unwrap();
    assert_eq!(a.to_csv_string().unwrap(), b.to_csv_string().unwrap());
}
