//! Scenario sweeps: expand a config grid, run every cell over paired seeds in
//! parallel, and write the aggregated results.

mod config;
mod output;
mod table1;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

pub use config::{Overrides, SweepConfig, DEFAULT_RUNS};
pub use output::{
    emit_plotdata, read_plotdata, write_data_csv, write_outputs, write_plotdata, write_runs_csv,
    write_summary_json, DataRow, Grouping, PlotRow, DATA_HEADER,
};
pub use table1::{
    check_rate_table, check_table1, TableCheckReport, TableCheckRow, TABLE_TOLERANCE,
};

use crate::engine::{self, RunRecord, Scenario};
use crate::error::{Error, Result};
use crate::metrics::ExperimentResult;
use crate::seed::run_seed;

/// Environment variable read for the worker count when none is given.
pub const WORKERS_ENV: &str = "CRNSIM_WORKERS";

#[derive(Debug, Clone, Serialize)]
pub struct CellOutcome {
    pub index: usize,
    pub scenario: Scenario,
    /// Aggregated result, or why the cell could not be run (for example an
    /// infeasible topology).
    pub result: std::result::Result<ExperimentResult, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Sweep {
    pub config: SweepConfig,
    pub cells: Vec<CellOutcome>,
}

impl Sweep {
    pub fn results(&self) -> impl Iterator<Item = &ExperimentResult> {
        self.cells.iter().filter_map(|c| c.result.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (&Scenario, &str)> {
        self.cells
            .iter()
            .filter_map(|c| c.result.as_ref().err().map(|e| (&c.scenario, e.as_str())))
    }
}

/// Runs `scenario` for `runs` paired seeds under `base_seed`, in parallel on
/// the current rayon pool.
pub fn run_cell(scenario: &Scenario, base_seed: u64, runs: usize) -> Result<ExperimentResult> {
    scenario.validate()?;
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    let records = (0..runs as u64)
        .into_par_iter()
        .map(|i| engine::run(scenario, run_seed(base_seed, i)))
        .collect::<Result<Vec<RunRecord>>>()?;
    ExperimentResult::new(scenario.clone(), records)
}

fn worker_count(explicit: Option<usize>) -> Result<Option<usize>> {
    if let Some(n) = explicit {
        return Ok(Some(n));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::invalid(format!("{WORKERS_ENV}='{v}' is not a count"))),
        Err(_) => Ok(None),
    }
}

/// Runs every cell of the grid. Cells that fail are kept with their error
/// and the sweep carries on. Output does not depend on the worker count.
pub fn execute(config: &SweepConfig, workers: Option<usize>) -> Result<Sweep> {
    let scenarios = config.cells()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = worker_count(workers)? {
        if n == 0 {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let runs = config.runs as u64;
    let records: Vec<Result<RunRecord>> = pool.install(|| {
        (0..scenarios.len() as u64 * runs)
            .into_par_iter()
            .map(|task| {
                let scenario = &scenarios[(task / runs) as usize];
                engine::run(scenario, run_seed(config.seed, task % runs))
            })
            .collect()
    });

    let mut records = records.into_iter();
    let cells = scenarios
        .into_iter()
        .enumerate()
        .map(|(index, scenario)| {
            // drain the whole chunk before looking for errors so the next
            // cell starts on its own records
            let chunk: Vec<Result<RunRecord>> = records.by_ref().take(config.runs).collect();
            let result = chunk
                .into_iter()
                .collect::<Result<Vec<_>>>()
                .and_then(|recs| ExperimentResult::new(scenario.clone(), recs))
                .map_err(|e| e.to_string());
            CellOutcome {
                index,
                scenario,
                result,
            }
        })
        .collect();
    Ok(Sweep {
        config: config.clone(),
        cells,
    })
}

/// Runs the sweep and, when `out` is given, writes the result files there.
pub fn run_sweep(
    config: &SweepConfig,
    workers: Option<usize>,
    out: Option<&Path>,
) -> Result<Sweep> {
    let sweep = execute(config, workers)?;
    if let Some(dir) = out {
        write_outputs(&sweep, dir)?;
    }
    Ok(sweep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::ActivityClass;
    use crate::handshake::HandshakeKind;
    use crate::protocols::ProtocolKind;

    fn small() -> SweepConfig {
        SweepConfig {
            protocols: vec![ProtocolKind::Mdmca, ProtocolKind::Memca],
            handshakes: vec![HandshakeKind::ThreeWay],
            nodes: vec![3],
            channels: vec![6],
            activities: vec![ActivityClass::Zero],
            runs: 4,
            width: 150.0,
            height: 150.0,
            max_slots: 2_000,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let a = execute(&small(), Some(1)).unwrap();
        let b = execute(&small(), Some(3)).unwrap();
        let ra: Vec<_> = a.results().map(|r| r.records.clone()).collect();
        let rb: Vec<_> = b.results().map(|r| r.records.clone()).collect();
        assert_eq!(ra.len(), 2);
        assert_eq!(ra, rb);
    }

    #[test]
    fn cells_are_paired_across_protocols() {
        let s = execute(&small(), Some(2)).unwrap();
        let seeds: Vec<Vec<u64>> = s
            .results()
            .map(|r| r.records.iter().map(|x| x.seed).collect())
            .collect();
        assert_eq!(seeds[0], seeds[1]);
    }

    #[test]
    fn infeasible_cell_is_reported_and_sweep_continues() {
        let cfg = SweepConfig {
            nodes: vec![1, 30],
            width: 1000.0,
            height: 1000.0,
            topology_attempts: 20,
            ..small()
        };
        let s = execute(&cfg, Some(2)).unwrap();
        assert_eq!(s.cells.len(), 4);
        let failures: Vec<_> = s.failures().collect();
        assert_eq!(s.results().count(), 2, "{failures:?}");
        let failures: Vec<_> = s.failures().collect();
        assert_eq!(failures.len(), 2);
        assert!(failures
            .iter()
            .all(|(sc, e)| sc.nodes == 30 && e.contains("infeasible")));
    }

    #[test]
    fn run_cell_matches_execute() {
        let cfg = small();
        let s = execute(&cfg, Some(2)).unwrap();
        let direct = run_cell(&s.cells[1].scenario, cfg.seed, cfg.runs).unwrap();
        assert_eq!(s.cells[1].result.as_ref().unwrap(), &direct);
    }
}
