//! Per-half-slot channel selection strategies.
//!
//! All strategies make two rendezvous attempts per timeslot, one in each
//! half-slot. The baselines advance their single clock every half-slot and
//! hop over the full available set.

mod dmca;
mod modular;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{ChannelId, NodeChannels};

pub use dmca::{mdmca_select, ClockState};
pub use modular::{memca_select, mmca_select, mrcs_select, next_prime, ModularClock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Half {
    First,
    Second,
}

impl Half {
    pub fn index(self) -> u8 {
        match self {
            Half::First => 1,
            Half::Second => 2,
        }
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Mdmca,
    Mrcs,
    Mmca,
    Memca,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Mdmca,
        ProtocolKind::Mrcs,
        ProtocolKind::Mmca,
        ProtocolKind::Memca,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProtocolKind::Mdmca => "mdmca",
            ProtocolKind::Mrcs => "mrcs",
            ProtocolKind::Mmca => "mmca",
            ProtocolKind::Memca => "memca",
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase().replace('-', "");
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.as_str() == lower)
            .ok_or_else(|| Error::invalid(format!("unknown protocol '{s}'")))
    }
}

/// Per-node selection state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strategy {
    Mdmca {
        clock: ClockState,
        first: Option<ChannelId>,
    },
    Mrcs,
    Mmca(ModularClock),
    Memca(ModularClock),
}

impl Strategy {
    pub fn new<R: Rng + ?Sized>(
        kind: ProtocolKind,
        spectrum: &NodeChannels,
        rng: &mut R,
    ) -> Result<Self> {
        if spectrum.is_empty() {
            return Err(Error::NoChannel);
        }
        let m = spectrum.len();
        Ok(match kind {
            ProtocolKind::Mdmca => Strategy::Mdmca {
                clock: ClockState::new(m, rng)?,
                first: None,
            },
            ProtocolKind::Mrcs => Strategy::Mrcs,
            ProtocolKind::Mmca => Strategy::Mmca(ModularClock::new(m, rng)?),
            ProtocolKind::Memca => Strategy::Memca(ModularClock::new(m, rng)?),
        })
    }

    pub fn kind(&self) -> ProtocolKind {
        match self {
            Strategy::Mdmca { .. } => ProtocolKind::Mdmca,
            Strategy::Mrcs => ProtocolKind::Mrcs,
            Strategy::Mmca(_) => ProtocolKind::Mmca,
            Strategy::Memca(_) => ProtocolKind::Memca,
        }
    }

    /// Channel for the given half-slot. Halves must alternate starting with
    /// [`Half::First`].
    pub fn select<R: Rng + ?Sized>(
        &mut self,
        spectrum: &NodeChannels,
        half: Half,
        rng: &mut R,
    ) -> Result<ChannelId> {
        match self {
            Strategy::Mdmca { clock, first } => match half {
                Half::First => {
                    let c1 = mdmca_select(clock, spectrum, Half::First, None)?;
                    *first = Some(c1);
                    Ok(c1)
                }
                Half::Second => {
                    let c2 = mdmca_select(clock, spectrum, Half::Second, first.take())?;
                    clock.end_slot(rng);
                    Ok(c2)
                }
            },
            Strategy::Mrcs => mrcs_select(spectrum, rng),
            Strategy::Mmca(clock) => mmca_select(clock, spectrum, rng),
            Strategy::Memca(clock) => memca_select(clock, spectrum, rng),
        }
    }
}
