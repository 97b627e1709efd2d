//! `crnsim` command-line runner.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crnsim_core::engine::write_trace;
use crnsim_core::experiment::{
    check_table1, run_sweep, write_outputs, Overrides, Sweep, SweepConfig, WORKERS_ENV,
};
use crnsim_core::seed::run_seed;
use crnsim_core::spectrum::assign_channels;
use crnsim_core::topology::Topology;
use crnsim_core::{seed, ActivityClass, HandshakeKind, ProtocolKind, Scenario, Simulation};

#[derive(Parser)]
#[command(
    name = "crnsim",
    version,
    about = "Multihop blind rendezvous simulator for cognitive radio networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario over R paired seeds and print its metrics.
    Run(RunArgs),
    /// Run every cell of the configured grid and write result files.
    Sweep(SweepArgs),
    /// Recompute channel utilizations from the reference rate table.
    CheckTable1,
    /// Single run with the full per-half-slot transcript as CSV.
    Trace(TraceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Sym,
    Asym,
}

/// Config file plus command-line overrides shared by every subcommand that
/// runs the simulator.
#[derive(Args)]
struct ScenarioArgs {
    /// TOML sweep configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Runs per cell.
    #[arg(long, value_name = "INT")]
    runs: Option<usize>,
    /// Protocol(s): mdmca, mrcs, mmca, memca.
    #[arg(long, value_name = "NAME", value_delimiter = ',')]
    protocol: Option<Vec<ProtocolKind>>,
    /// Handshake(s): 2wh, 3wh.
    #[arg(long, value_name = "2wh|3wh", value_delimiter = ',')]
    handshake: Option<Vec<HandshakeKind>>,
    /// Node count(s).
    #[arg(long, value_name = "INT", value_delimiter = ',')]
    nodes: Option<Vec<usize>>,
    /// Channels per node (the whole pool when symmetric).
    #[arg(long, value_name = "INT", value_delimiter = ',')]
    channels: Option<Vec<usize>>,
    /// Channel availability mode; `asym` needs `--m`.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Channels common to all nodes in asymmetric mode (implies `--mode asym`).
    #[arg(long, value_name = "INT", value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// PR activity: zero, low, long, high, mix.
    #[arg(long, value_name = "CLASS", value_delimiter = ',')]
    activity: Option<Vec<ActivityClass>>,
    /// Slot budget per run.
    #[arg(long, value_name = "INT")]
    max_slots: Option<u64>,
    /// Worker threads (all cores when unset).
    #[arg(long, env = WORKERS_ENV, value_name = "INT")]
    workers: Option<usize>,
}

impl ScenarioArgs {
    fn config(&self, out: Option<PathBuf>) -> Result<SweepConfig> {
        let mut cfg = match &self.config {
            Some(path) => SweepConfig::load(path)?,
            None => SweepConfig::default(),
        };
        cfg.apply(Overrides {
            seed: self.seed,
            runs: self.runs,
            out,
            protocols: self.protocol.clone(),
            handshakes: self.handshake.clone(),
            nodes: self.nodes.clone(),
            channels: self.channels.clone(),
            asymmetric: self.mode.map(|m| matches!(m, ModeArg::Asym)),
            m: self.m.clone(),
            activities: self.activity.clone(),
            max_slots: self.max_slots,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Write result files to this directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write the transcript of the first run (`trace.csv`, needs `--out`).
    #[arg(long, requires = "out")]
    trace: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output directory (default: `out` from the config, else `results`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Which run of the base seed to replay.
    #[arg(long, default_value_t = 0)]
    run: u64,
    /// Node positions ("id x y" per line) instead of a random topology.
    #[arg(long, value_name = "PATH")]
    positions: Option<PathBuf>,
    /// Write the CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run(args) => run(args),
        Command::Sweep(args) => sweep(args),
        Command::CheckTable1 => {
            let report = check_table1();
            print!("{report}");
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Trace(args) => trace(args),
    }
}

fn run(args: RunArgs) -> Result<ExitCode> {
    let cfg = args.scenario.config(args.out.clone())?;
    let cells = cfg.cells()?;
    if cells.len() != 1 {
        bail!(
            "`run` takes a single scenario but the options describe {} cells; use `sweep`",
            cells.len()
        );
    }
    let sweep = run_sweep(&cfg, args.scenario.workers, None)?;
    print_summary(&sweep);
    if let Some(dir) = &args.out {
        write_outputs(&sweep, dir)?;
        if args.trace {
            let sim = traced_run(&cells[0], run_seed(cfg.seed, 0), None)?;
            let path = dir.join("trace.csv");
            write_trace_file(&sim, Some(&path))?;
        }
        eprintln!("wrote results to {}", dir.display());
    }
    Ok(exit_status(&sweep))
}

fn sweep(args: SweepArgs) -> Result<ExitCode> {
    let mut cfg = args.scenario.config(args.out.clone())?;
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    cfg.out = Some(dir.clone());
    let cells = cfg.cells()?.len();
    eprintln!("running {cells} cells x {} runs", cfg.runs);
    let sweep = run_sweep(&cfg, args.scenario.workers, Some(&dir))?;
    print_summary(&sweep);
    eprintln!("wrote results to {}", dir.display());
    Ok(exit_status(&sweep))
}

fn trace(args: TraceArgs) -> Result<ExitCode> {
    let cfg = args.scenario.config(None)?;
    let cells = cfg.cells()?;
    if cells.len() != 1 {
        bail!("`trace` takes a single scenario, got {} cells", cells.len());
    }
    let sim = traced_run(
        &cells[0],
        run_seed(cfg.seed, args.run),
        args.positions.as_deref(),
    )?;
    write_trace_file(&sim, args.out.as_deref())?;
    let rec = sim.record_outcome();
    eprintln!(
        "run seed {}: {} half-slots, PT={} SR={}, {} censored",
        rec.seed,
        rec.half_slots,
        rec.packets,
        rec.successes,
        rec.censored_count()
    );
    Ok(ExitCode::SUCCESS)
}

fn traced_run(scenario: &Scenario, run_seed: u64, positions: Option<&Path>) -> Result<Simulation> {
    let mut sim = match positions {
        None => Simulation::new(scenario.clone(), run_seed)?,
        Some(path) => {
            let topology = Topology::from_position_file(path, scenario.range)?;
            if topology.node_count() != scenario.nodes {
                bail!(
                    "{} lists {} nodes but the scenario has {}",
                    path.display(),
                    topology.node_count(),
                    scenario.nodes
                );
            }
            let spectrum = assign_channels(
                scenario.nodes,
                scenario.pool_size(),
                scenario.resolved_mode(),
                &mut seed::stream(run_seed, "channels", 0),
            )?;
            Simulation::with_parts(scenario.clone(), topology, spectrum, run_seed)?
        }
    };
    sim.enable_trace();
    while !sim.finished() {
        sim.step()?;
    }
    Ok(sim)
}

fn write_trace_file(sim: &Simulation, path: Option<&Path>) -> Result<()> {
    let rows = sim.trace().unwrap_or_default();
    match path {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            let mut w = BufWriter::new(f);
            write_trace(rows, &mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut w = BufWriter::new(stdout.lock());
            write_trace(rows, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn describe(s: &Scenario) -> String {
    let mode = match s.mode.similarity() {
        None => "sym".to_string(),
        Some(m) => format!("asym m={m}"),
    };
    format!(
        "{:<6} {} N={:<3} C={:<3} {:<10} {:<5}",
        s.protocol, s.handshake, s.nodes, s.channels, mode, s.activity
    )
}

fn print_summary(sweep: &Sweep) {
    println!(
        "{:<48} {:>10} {:>9} {:>8} {:>8}",
        "cell", "ATTR", "sd", "PPR", "censored"
    );
    for cell in &sweep.cells {
        match &cell.result {
            Ok(r) => {
                let ppr = r
                    .ppr
                    .as_ref()
                    .map(|p| format!("{:.3}", p.mean))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{:<48} {:>10.3} {:>9.3} {:>8} {:>8}",
                    describe(&r.scenario),
                    r.attr_slots,
                    r.attr_dispersion.sd,
                    ppr,
                    r.censored_nodes
                );
            }
            Err(e) => println!("{:<48} failed: {e}", describe(&cell.scenario)),
        }
    }
}

fn exit_status(sweep: &Sweep) -> ExitCode {
    if sweep.failures().next().is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
