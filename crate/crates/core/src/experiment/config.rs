use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activity::{ActivityClass, ActivityRates};
use crate::engine::{CompletionPolicy, Scenario, DEFAULT_MAX_SLOTS};
use crate::error::{Error, Result};
use crate::handshake::HandshakeKind;
use crate::protocols::ProtocolKind;
use crate::spectrum::ChannelMode;
use crate::topology::DEFAULT_ATTEMPT_BUDGET;

pub const DEFAULT_RUNS: usize = 30;

/// Scenario grid plus run settings, read from TOML.
///
/// ```toml
/// protocols  = ["mdmca", "memca"]
/// handshakes = ["2wh", "3wh"]
/// nodes      = [3, 10]
/// channels   = [10, 20]
/// modes      = ["sym", "9", "5", "2"]   # "sym", a similarity m, or "asym:m:k"
/// activities = ["zero", "high", "mix"]
/// runs = 30
/// seed = 1
/// max_slots = 100000
/// width = 1000.0
/// height = 1000.0
/// range = 100.0
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub protocols: Vec<ProtocolKind>,
    pub handshakes: Vec<HandshakeKind>,
    pub nodes: Vec<usize>,
    pub channels: Vec<usize>,
    pub modes: Vec<String>,
    pub activities: Vec<ActivityClass>,
    pub runs: usize,
    pub seed: u64,
    pub max_slots: u64,
    pub width: f64,
    pub height: f64,
    pub range: f64,
    /// Per-node channel count in asymmetric cells without an explicit `k`.
    pub set_size: Option<usize>,
    /// Global channel pool for asymmetric cells (default twice the
    /// per-node channel count).
    pub pool: Option<usize>,
    pub completion: CompletionPolicy,
    pub termination_window: Option<u64>,
    pub overhearing: bool,
    pub gate_unconfirmed: bool,
    pub topology_attempts: u32,
    /// Per-channel rates replacing the reference table; channel `c` uses
    /// entry `c - 1`.
    pub rates: Option<Vec<ActivityRates>>,
    pub out: Option<PathBuf>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            protocols: ProtocolKind::ALL.to_vec(),
            handshakes: vec![HandshakeKind::TwoWay, HandshakeKind::ThreeWay],
            nodes: vec![3],
            channels: vec![10],
            modes: vec!["sym".into()],
            activities: vec![ActivityClass::Zero],
            runs: DEFAULT_RUNS,
            seed: 1,
            max_slots: DEFAULT_MAX_SLOTS,
            width: 1000.0,
            height: 1000.0,
            range: 100.0,
            set_size: None,
            pool: None,
            completion: CompletionPolicy::ResponderOnly,
            termination_window: None,
            overhearing: false,
            gate_unconfirmed: false,
            topology_attempts: DEFAULT_ATTEMPT_BUDGET,
            rates: None,
            out: None,
        }
    }
}

/// Command-line overrides; `None` leaves the config value alone.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
    pub protocols: Option<Vec<ProtocolKind>>,
    pub handshakes: Option<Vec<HandshakeKind>>,
    pub nodes: Option<Vec<usize>>,
    pub channels: Option<Vec<usize>>,
    /// `Some(false)` symmetric, `Some(true)` asymmetric (needs `m`).
    pub asymmetric: Option<bool>,
    pub m: Option<Vec<usize>>,
    pub activities: Option<Vec<ActivityClass>>,
    pub max_slots: Option<u64>,
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn apply(&mut self, o: Overrides) -> Result<()> {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.runs {
            self.runs = v;
        }
        if let Some(v) = o.out {
            self.out = Some(v);
        }
        if let Some(v) = o.protocols {
            self.protocols = v;
        }
        if let Some(v) = o.handshakes {
            self.handshakes = v;
        }
        if let Some(v) = o.nodes {
            self.nodes = v;
        }
        if let Some(v) = o.channels {
            self.channels = v;
        }
        if let Some(v) = o.activities {
            self.activities = v;
        }
        if let Some(v) = o.max_slots {
            self.max_slots = v;
        }
        match (o.asymmetric, o.m) {
            (Some(false), Some(_)) => {
                return Err(Error::invalid("--m only applies to asymmetric mode"));
            }
            (Some(false), None) => self.modes = vec!["sym".into()],
            (Some(true), None) => {
                return Err(Error::invalid("asymmetric mode needs --m"));
            }
            (_, Some(ms)) => self.modes = ms.iter().map(|m| m.to_string()).collect(),
            (None, None) => {}
        }
        Ok(())
    }

    pub fn channel_modes(&self) -> Result<Vec<ChannelMode>> {
        self.modes
            .iter()
            .map(|s| {
                let mode: ChannelMode = s.parse()?;
                Ok(match mode {
                    ChannelMode::Asymmetric { m, k: None } => ChannelMode::Asymmetric {
                        m,
                        k: self.set_size,
                    },
                    other => other,
                })
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |name: &str, len: usize| {
            if len == 0 {
                Err(Error::invalid(format!("sweep axis '{name}' is empty")))
            } else {
                Ok(())
            }
        };
        empty("protocols", self.protocols.len())?;
        empty("handshakes", self.handshakes.len())?;
        empty("nodes", self.nodes.len())?;
        empty("channels", self.channels.len())?;
        empty("modes", self.modes.len())?;
        empty("activities", self.activities.len())?;
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.max_slots == 0 {
            return Err(Error::invalid("max_slots must be at least 1"));
        }
        self.channel_modes()?;
        if let Some(rates) = &self.rates {
            let need = self
                .cells_unchecked()?
                .iter()
                .map(Scenario::pool_size)
                .max()
                .unwrap_or(0);
            if rates.len() < need {
                return Err(Error::invalid(format!(
                    "rates override covers {} channels, sweep needs {need}",
                    rates.len()
                )));
            }
            for r in rates {
                r.validate()?;
            }
        }
        Ok(())
    }

    /// Scenario for every cell of the grid, in a fixed order (protocol,
    /// handshake, nodes, channels, mode, activity; last axis fastest).
    pub fn cells(&self) -> Result<Vec<Scenario>> {
        self.validate()?;
        self.cells_unchecked()
    }

    fn cells_unchecked(&self) -> Result<Vec<Scenario>> {
        let modes = self.channel_modes()?;
        let mut out = Vec::new();
        for &protocol in &self.protocols {
            for &handshake in &self.handshakes {
                for &nodes in &self.nodes {
                    for &channels in &self.channels {
                        for &mode in &modes {
                            for &activity in &self.activities {
                                let mut scenario = Scenario {
                                    nodes,
                                    width: self.width,
                                    height: self.height,
                                    range: self.range,
                                    channels,
                                    mode,
                                    pool: match mode {
                                        ChannelMode::Symmetric => None,
                                        ChannelMode::Asymmetric { .. } => self.pool,
                                    },
                                    activity,
                                    rates: None,
                                    protocol,
                                    handshake,
                                    max_slots: self.max_slots,
                                    completion: self.completion,
                                    termination_window: self.termination_window,
                                    overhearing: self.overhearing,
                                    gate_unconfirmed: self.gate_unconfirmed,
                                    topology_attempts: self.topology_attempts,
                                };
                                if let Some(r) = &self.rates {
                                    scenario.rates =
                                        Some(r[..scenario.pool_size().min(r.len())].to_vec());
                                }
                                out.push(scenario);
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}
