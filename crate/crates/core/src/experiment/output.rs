use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Sweep;
use crate::engine::{RunRecord, Scenario};
use crate::error::{Error, Result};
use crate::metrics::{ExperimentResult, PprSummary};
use crate::spectrum::ChannelMode;

pub const DATA_HEADER: &str =
    "protocol,handshake,N,C,mode,m,activity,seed,attr_slots,ppr,sd,censored";

/// One line of `data.csv`: scenario columns followed by the cell's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub protocol: String,
    pub handshake: String,
    #[serde(rename = "N")]
    pub nodes: usize,
    #[serde(rename = "C")]
    pub channels: usize,
    pub mode: String,
    pub m: Option<usize>,
    pub activity: String,
    pub seed: u64,
    pub attr_slots: f64,
    pub ppr: Option<f64>,
    pub sd: f64,
    /// Censored node count over all runs.
    pub censored: usize,
}

fn mode_name(mode: &ChannelMode) -> &'static str {
    match mode {
        ChannelMode::Symmetric => "sym",
        ChannelMode::Asymmetric { .. } => "asym",
    }
}

impl DataRow {
    pub fn new(result: &ExperimentResult, seed: u64) -> Self {
        let s = &result.scenario;
        DataRow {
            protocol: s.protocol.to_string(),
            handshake: s.handshake.to_string(),
            nodes: s.nodes,
            channels: s.channels,
            mode: mode_name(&s.mode).into(),
            m: s.mode.similarity(),
            activity: s.activity.to_string(),
            seed,
            attr_slots: result.attr_slots,
            ppr: result.ppr.as_ref().map(|p| p.mean),
            sd: result.attr_dispersion.sd,
            censored: result.censored_nodes,
        }
    }
}

pub fn write_data_csv<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in sweep.results() {
        w.serialize(DataRow::new(r, sweep.config.seed))?;
    }
    if sweep.results().next().is_none() {
        w.write_record(DATA_HEADER.split(','))?;
    }
    w.flush().map_err(|e| Error::io("data.csv", e))?;
    Ok(())
}

#[derive(Serialize)]
struct RunRow<'a> {
    protocol: String,
    handshake: String,
    #[serde(rename = "N")]
    nodes: usize,
    #[serde(rename = "C")]
    channels: usize,
    mode: &'a str,
    m: Option<usize>,
    activity: String,
    run: usize,
    seed: u64,
    mean_ttr_slots: f64,
    packets: u64,
    successes: u64,
    lone_requests: u64,
    censored: usize,
    half_slots: u64,
}

/// Per-run detail, one line per (cell, run).
pub fn write_runs_csv<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in sweep.results() {
        let s = &r.scenario;
        for (run, rec) in r.records.iter().enumerate() {
            w.serialize(RunRow {
                protocol: s.protocol.to_string(),
                handshake: s.handshake.to_string(),
                nodes: s.nodes,
                channels: s.channels,
                mode: mode_name(&s.mode),
                m: s.mode.similarity(),
                activity: s.activity.to_string(),
                run,
                seed: rec.seed,
                mean_ttr_slots: rec.mean_ttr_slots(),
                packets: rec.packets,
                successes: rec.successes,
                lone_requests: rec.lone_requests,
                censored: rec.censored_count(),
                half_slots: rec.half_slots,
            })?;
        }
    }
    w.flush().map_err(|e| Error::io("runs.csv", e))?;
    Ok(())
}

#[derive(Serialize)]
struct CellSummary<'a> {
    index: usize,
    scenario: &'a Scenario,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attr_slots: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attr_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attr_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attr_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    attr_median: Option<f64>,
    ppr: Option<&'a PprSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    censored_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    censored_runs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runs: Option<&'a [RunRecord]>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a super::SweepConfig,
    cells: Vec<CellSummary<'a>>,
}

pub fn write_summary_json<W: Write>(sweep: &Sweep, out: W) -> Result<()> {
    let cells = sweep
        .cells
        .iter()
        .map(|c| match &c.result {
            Ok(r) => CellSummary {
                index: c.index,
                scenario: &c.scenario,
                status: "ok",
                error: None,
                attr_slots: Some(r.attr_slots),
                attr_sd: Some(r.attr_dispersion.sd),
                attr_min: Some(r.attr_dispersion.min),
                attr_max: Some(r.attr_dispersion.max),
                attr_median: Some(r.median_attr()),
                ppr: r.ppr.as_ref(),
                censored_nodes: Some(r.censored_nodes),
                censored_runs: Some(r.censored_runs),
                runs: Some(&r.records),
            },
            Err(e) => CellSummary {
                index: c.index,
                scenario: &c.scenario,
                status: "failed",
                error: Some(e),
                attr_slots: None,
                attr_sd: None,
                attr_min: None,
                attr_max: None,
                attr_median: None,
                ppr: None,
                censored_nodes: None,
                censored_runs: None,
                runs: None,
            },
        })
        .collect();
    let mut out = out;
    serde_json::to_writer_pretty(
        &mut out,
        &Summary {
            config: &sweep.config,
            cells,
        },
    )?;
    writeln!(out).map_err(|e| Error::io("summary.json", e))?;
    Ok(())
}

/// Axis used to label rows of the plot table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    #[default]
    Protocol,
    Handshake,
    Nodes,
    Channels,
    Mode,
    Activity,
}

impl Grouping {
    fn label(&self, s: &Scenario) -> String {
        match self {
            Grouping::Protocol => s.protocol.to_string(),
            Grouping::Handshake => s.handshake.to_string(),
            Grouping::Nodes => s.nodes.to_string(),
            Grouping::Channels => s.channels.to_string(),
            Grouping::Mode => s.mode.to_string(),
            Grouping::Activity => s.activity.to_string(),
        }
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Grouping::Protocol => "protocol",
            Grouping::Handshake => "handshake",
            Grouping::Nodes => "nodes",
            Grouping::Channels => "channels",
            Grouping::Mode => "mode",
            Grouping::Activity => "activity",
        })
    }
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "protocol" => Ok(Grouping::Protocol),
            "handshake" => Ok(Grouping::Handshake),
            "nodes" | "n" => Ok(Grouping::Nodes),
            "channels" | "c" => Ok(Grouping::Channels),
            "mode" | "m" => Ok(Grouping::Mode),
            "activity" => Ok(Grouping::Activity),
            _ => Err(Error::invalid(format!("unknown grouping '{s}'"))),
        }
    }
}

/// Long-format plot row: one per (cell, metric).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub cell: usize,
    pub group: String,
    pub protocol: String,
    pub handshake: String,
    #[serde(rename = "N")]
    pub nodes: usize,
    #[serde(rename = "C")]
    pub channels: usize,
    pub mode: String,
    pub m: Option<usize>,
    pub activity: String,
    pub metric: String,
    /// Empty when the metric is undefined for the cell (PPR with no
    /// successful rendezvous).
    pub value: Option<f64>,
}

pub fn emit_plotdata(results: &[ExperimentResult], grouping: Grouping) -> Vec<PlotRow> {
    let mut rows = Vec::with_capacity(results.len() * 2);
    for (cell, r) in results.iter().enumerate() {
        let s = &r.scenario;
        let metrics = [
            ("attr_slots", Some(r.attr_slots)),
            ("ppr", r.ppr.as_ref().map(|p| p.mean)),
        ];
        for (metric, value) in metrics {
            rows.push(PlotRow {
                cell,
                group: grouping.label(s),
                protocol: s.protocol.to_string(),
                handshake: s.handshake.to_string(),
                nodes: s.nodes,
                channels: s.channels,
                mode: mode_name(&s.mode).into(),
                m: s.mode.similarity(),
                activity: s.activity.to_string(),
                metric: metric.into(),
                value,
            });
        }
    }
    rows
}

pub fn write_plotdata<W: Write>(rows: &[PlotRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("plotdata.csv", e))?;
    Ok(())
}

pub fn read_plotdata<R: Read>(input: R) -> Result<Vec<PlotRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize()
        .collect::<std::result::Result<Vec<PlotRow>, _>>()
        .map_err(Error::from)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Writes `data.csv`, `runs.csv`, `summary.json`, `plotdata.csv` and the
/// resolved `config.toml` into `dir`. Returns the paths written.
pub fn write_outputs(sweep: &Sweep, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = dir.join("data.csv");
    write_data_csv(sweep, create(&data)?)?;
    let runs = dir.join("runs.csv");
    write_runs_csv(sweep, create(&runs)?)?;
    let summary = dir.join("summary.json");
    write_summary_json(sweep, create(&summary)?)?;
    let plot = dir.join("plotdata.csv");
    let results: Vec<ExperimentResult> = sweep.results().cloned().collect();
    write_plotdata(&emit_plotdata(&results, Grouping::Protocol), create(&plot)?)?;
    let config = dir.join("config.toml");
    fs::write(&config, sweep.config.to_toml_string()).map_err(|e| Error::io(&config, e))?;
    Ok(vec![data, runs, summary, plot, config])
}
