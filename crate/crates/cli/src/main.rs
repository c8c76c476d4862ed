use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fanet_core::harness::{
    generate_scenario, run_pipeline, run_pipeline_traced, run_sweep, tree_dump,
    validate_against_oracles, ConfigFile, PipelineConfig, ScenarioConfig,
};
use fanet_core::{DistanceMode, EdgeWeight, Error};

#[derive(Parser)]
#[command(
    name = "fanet",
    version,
    about = "Throughput optimization for UAV relay networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one random scenario and print a summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Print the refined routing tree after the summary.
        #[arg(long)]
        tree: bool,
        /// Write the refined routing tree to a file.
        #[arg(long, value_name = "PATH")]
        tree_out: Option<PathBuf>,
    },
    /// Run a grid of power budgets and UAV counts over many seeds, as CSV.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Power budgets, W (comma separated).
        #[arg(long, value_delimiter = ',')]
        pb: Vec<f64>,
        /// UAV counts (comma separated).
        #[arg(long, value_delimiter = ',')]
        n: Vec<usize>,
        /// Output file; stdout when omitted.
        #[arg(long, short, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// Compare the pipeline against brute-force oracles on small scenarios.
    ///
    /// Defaults to 5 UAVs in an 8 km square over 20 seeds.
    Validate {
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Emit every Newton iterate of the link-selection solver as CSV.
    Trace {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, short, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

/// Scenario settings. Flags override the config file, which overrides the
/// defaults.
#[derive(Args, Debug, Default)]
struct ScenarioArgs {
    /// TOML config file with `[scenario]` and `[sweep]` tables.
    #[arg(long, short, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long)]
    area_side_m: Option<f64>,
    #[arg(long)]
    n_uavs: Option<usize>,
    #[arg(long)]
    altitude_m: Option<f64>,
    #[arg(long)]
    min_separation_m: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    power_budget_w: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    gs_x: Option<f64>,
    #[arg(long)]
    gs_y: Option<f64>,
    #[arg(long, value_parser = ["distance", "hops"])]
    edge_weight: Option<String>,
    #[arg(long)]
    max_placement_rounds: Option<usize>,
    /// Fill the wall_ms column with measured times.
    #[arg(long)]
    record_wall_time: bool,
    #[arg(long)]
    bandwidth_hz: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    noise_dbm_per_hz: Option<f64>,
    #[arg(long)]
    carrier_hz: Option<f64>,
    #[arg(long)]
    ref_gain: Option<f64>,
    #[arg(long)]
    pathloss_exp: Option<f64>,
    #[arg(long)]
    link_threshold_m: Option<f64>,
    #[arg(long, value_parser = ["planar", "3d"])]
    distance_mode: Option<String>,
    #[arg(long)]
    gamma_init: Option<f64>,
    #[arg(long)]
    gamma_growth: Option<f64>,
    #[arg(long)]
    barrier_rounds: Option<usize>,
    #[arg(long)]
    epsilon_decrement: Option<f64>,
    #[arg(long)]
    max_newton_iters: Option<usize>,
}

impl ScenarioArgs {
    fn resolve(&self, base: ConfigFile) -> Result<ConfigFile, Error> {
        let mut file = match &self.config {
            Some(path) => base.overlay(&std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidConfig(format!("cannot read {}: {e}", path.display()))
            })?)?,
            None => base,
        };
        let s = &mut file.scenario;
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = self.$flag.clone() { s.$($field).+ = v; })*
            };
        }
        set!(
            area_side_m => area_side_m,
            n_uavs => n_uavs,
            altitude_m => altitude_m,
            min_separation_m => min_separation_m,
            seed => seed,
            power_budget_w => power_budget_w,
            trials => trials,
            max_placement_rounds => max_placement_rounds,
            bandwidth_hz => channel.bandwidth_hz,
            noise_dbm_per_hz => channel.noise_dbm_per_hz,
            carrier_hz => channel.carrier_hz,
            pathloss_exp => channel.pathloss_exp,
            link_threshold_m => channel.link_threshold_m,
            gamma_init => solver.gamma_init,
            gamma_growth => solver.gamma_growth,
            barrier_rounds => solver.barrier_rounds,
            epsilon_decrement => solver.epsilon_decrement,
            max_newton_iters => solver.max_newton_iters,
        );
        if self.ref_gain.is_some() {
            s.channel.ref_gain = self.ref_gain;
        }
        if self.record_wall_time {
            s.record_wall_time = true;
        }
        if self.gs_x.is_some() || self.gs_y.is_some() {
            let [x, y] = s.gs_xy();
            s.gs_position = Some([self.gs_x.unwrap_or(x), self.gs_y.unwrap_or(y)]);
        }
        match self.edge_weight.as_deref() {
            Some("hops") => s.edge_weight = EdgeWeight::Hops,
            Some(_) => s.edge_weight = EdgeWeight::Distance,
            None => {}
        }
        match self.distance_mode.as_deref() {
            Some("3d") => s.channel.distance_mode = DistanceMode::ThreeD,
            Some(_) => s.channel.distance_mode = DistanceMode::Planar,
            None => {}
        }
        s.validate()?;
        Ok(file)
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn pipeline_config(s: &ScenarioConfig) -> PipelineConfig {
    PipelineConfig {
        power_budget_w: s.power_budget_w,
        edge_weight: s.edge_weight,
        solver: s.solver,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            scenario,
            tree,
            tree_out,
        } => {
            let s = scenario.resolve(ConfigFile::default())?.scenario;
            let sc = generate_scenario(&s).map_err(|e| wrap(e, &s))?;
            let out = run_pipeline(&sc.topology, &pipeline_config(&s)).map_err(|e| wrap(e, &s))?;
            let gain = out.throughput_p14 - out.throughput_p11;
            println!("seed                {}", s.seed);
            println!("uavs                {}", s.n_uavs);
            println!("placement rounds    {}", sc.rounds);
            println!("power budget        {} W", s.power_budget_w);
            println!("active links        {}", out.alloc.active_ids().count());
            println!("water level lambda  {:e}", out.alloc.water_level_lambda);
            println!("SPT throughput      {:.6e} bit/s", out.throughput_p11);
            println!("refined throughput  {:.6e} bit/s", out.throughput_p14);
            println!(
                "improvement         {:.6e} bit/s ({:.3}%)",
                gain,
                100.0 * gain / out.throughput_p11
            );
            println!("parent swaps        {}", out.refined.swaps.len());
            println!("newton iterations   {}", out.newton_iters);
            let dump = tree_dump(&sc.topology, out.tree(), &out.alloc);
            if tree {
                print!("\n{dump}");
            }
            if let Some(p) = tree_out {
                std::fs::write(p, dump)?;
            }
        }
        Command::Sweep {
            scenario,
            pb,
            n,
            out,
        } => {
            let file = scenario.resolve(ConfigFile::default())?;
            let pb = if pb.is_empty() { file.sweep.pb_w } else { pb };
            let n = if n.is_empty() { file.sweep.n_uavs } else { n };
            let res = run_sweep(&file.scenario, &pb, &n)?;
            res.write_csv(output(&out)?)?;
        }
        Command::Validate { scenario } => {
            let preset = ConfigFile {
                scenario: ScenarioConfig {
                    n_uavs: 5,
                    area_side_m: 8000.0,
                    trials: 20,
                    ..ScenarioConfig::default()
                },
                ..ConfigFile::default()
            };
            let s = scenario.resolve(preset)?.scenario;
            let rep = validate_against_oracles(&s)?;
            println!("seed,spt_bps,refined_bps,oracle_fixed_bps,oracle_joint_bps,waterfill_gap,kkt_spread,result");
            for r in &rep.seeds {
                println!(
                    "{},{:.6e},{:.6e},{:.6e},{:.6e},{},{:.1e},{}",
                    r.seed,
                    r.spt,
                    r.refined,
                    r.oracle_fixed,
                    r.oracle_joint,
                    r.waterfill_gap.map_or("-".into(), |g| format!("{g:.1e}")),
                    r.kkt_spread,
                    if r.passed() { "PASS" } else { "FAIL" }
                );
            }
            let failed = rep.seeds.iter().filter(|r| !r.passed()).count();
            eprintln!(
                "{} of {} seeds passed; mean gap to joint oracle {:.3}%",
                rep.seeds.len() - failed,
                rep.seeds.len(),
                100.0 * rep.mean_joint_gap()
            );
            if failed > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Trace { scenario, out } => {
            let s = scenario.resolve(ConfigFile::default())?.scenario;
            let sc = generate_scenario(&s).map_err(|e| wrap(e, &s))?;
            let (_, rows) =
                run_pipeline_traced(&sc.topology, &pipeline_config(&s)).map_err(|e| wrap(e, &s))?;
            let mut wr = csv::Writer::from_writer(output(&out)?);
            for mut row in rows {
                row.uav += 1;
                wr.serialize(row)?;
            }
            wr.flush()?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn wrap(e: Error, s: &ScenarioConfig) -> Error {
    Error::Scenario {
        seed: s.seed,
        n_uavs: s.n_uavs,
        source: Box::new(e),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::InvalidConfig(_)
        | Error::InvalidChannel(_)
        | Error::InvalidSolverConfig(_)
        | Error::InvalidBudget(_)
        | Error::Toml(_) => 2,
        Error::Disconnected { .. } | Error::PlacementFailed { .. } => 3,
        Error::NoConvergence { .. } => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
