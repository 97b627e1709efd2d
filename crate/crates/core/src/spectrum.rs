//! Channel pools, per-node available sets and the prime / non-prime split.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ChannelId = u32;

pub fn is_prime(n: u32) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Splits a channel set by primality of the global channel ID. Both halves
/// come back sorted ascending.
pub fn partition_prime<I>(channels: I) -> (Vec<ChannelId>, Vec<ChannelId>)
where
    I: IntoIterator<Item = ChannelId>,
{
    let sorted: BTreeSet<ChannelId> = channels.into_iter().collect();
    sorted.into_iter().partition(|&c| is_prime(c))
}

/// One node's view of the spectrum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeChannels {
    /// Available channels, ascending.
    pub available: Vec<ChannelId>,
    pub prime: Vec<ChannelId>,
    pub non_prime: Vec<ChannelId>,
}

impl NodeChannels {
    pub fn new<I: IntoIterator<Item = ChannelId>>(channels: I) -> Self {
        let available: Vec<ChannelId> = channels
            .into_iter()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let (prime, non_prime) = partition_prime(available.iter().copied());
        NodeChannels {
            available,
            prime,
            non_prime,
        }
    }

    pub fn len(&self) -> usize {
        self.available.len()
    }

    pub fn is_empty(&self) -> bool {
        self.available.is_empty()
    }

    pub fn contains(&self, c: ChannelId) -> bool {
        self.available.binary_search(&c).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum ChannelMode {
    Symmetric,
    Asymmetric {
        /// Channels common to every node.
        m: usize,
        /// Per-node set size. At this level `None` picks the largest size
        /// that still leaves exactly `m` channels common to all nodes;
        /// scenarios resolve it to their per-node channel count first.
        k: Option<usize>,
    },
}

impl ChannelMode {
    pub fn similarity(&self) -> Option<usize> {
        match self {
            ChannelMode::Symmetric => None,
            ChannelMode::Asymmetric { m, .. } => Some(*m),
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelMode::Symmetric => f.write_str("sym"),
            ChannelMode::Asymmetric { m, k: None } => write!(f, "asym:{m}"),
            ChannelMode::Asymmetric { m, k: Some(k) } => write!(f, "asym:{m}:{k}"),
        }
    }
}

impl FromStr for ChannelMode {
    type Err = Error;

    /// Accepts `sym`, `asym:M`, `asym:M:K`, or a bare similarity `M`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "sym" || s == "symmetric" {
            return Ok(ChannelMode::Symmetric);
        }
        let rest = s
            .strip_prefix("asym:")
            .or_else(|| s.strip_prefix("asymmetric:"))
            .unwrap_or(&s);
        let bad = || Error::invalid(format!("unrecognized channel mode '{s}'"));
        let mut parts = rest.split(':');
        let m = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let k = match parts.next() {
            Some(p) => Some(p.parse().map_err(|_| bad())?),
            None => None,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(ChannelMode::Asymmetric { m, k })
    }
}

/// Largest per-node set size for which every one of the `pool - m`
/// non-common channels can be missing from at least one of `nodes` nodes.
pub fn default_set_size(nodes: usize, pool: usize, m: usize) -> usize {
    if m >= pool {
        return pool;
    }
    if nodes <= 1 {
        return m;
    }
    let rest = pool - m;
    pool - rest.div_ceil(nodes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectrumMap {
    pub pool_size: usize,
    pub nodes: Vec<NodeChannels>,
}

impl SpectrumMap {
    pub fn node(&self, n: usize) -> &NodeChannels {
        &self.nodes[n]
    }

    /// Channels available to every node.
    pub fn common(&self) -> BTreeSet<ChannelId> {
        let mut it = self.nodes.iter();
        let Some(first) = it.next() else {
            return BTreeSet::new();
        };
        let mut acc: BTreeSet<ChannelId> = first.available.iter().copied().collect();
        for n in it {
            acc.retain(|c| n.contains(*c));
        }
        acc
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Assigns per-node channel sets drawn from the pool `1..=pool`.
///
/// Asymmetric mode draws a common core of `m` channels, then gives every
/// non-core channel to at least one node as an exclusion so that exactly
/// `m` channels remain universal. Each node ends with `k` channels.
pub fn assign_channels<R: Rng + ?Sized>(
    nodes: usize,
    pool: usize,
    mode: ChannelMode,
    rng: &mut R,
) -> Result<SpectrumMap> {
    if nodes == 0 {
        return Err(Error::invalid("node count must be at least 1"));
    }
    if pool == 0 || pool > u32::MAX as usize {
        return Err(Error::invalid(format!(
            "channel pool size {pool} out of range"
        )));
    }
    let all: Vec<ChannelId> = (1..=pool as ChannelId).collect();
    let map = match mode {
        ChannelMode::Symmetric => SpectrumMap {
            pool_size: pool,
            nodes: vec![NodeChannels::new(all.iter().copied()); nodes],
        },
        ChannelMode::Asymmetric { m, k } => {
            let k = k.unwrap_or_else(|| default_set_size(nodes, pool, m));
            if m < 1 || m > k || k > pool {
                return Err(Error::invalid(format!(
                    "asymmetric mode needs 1 <= m <= k <= C, got m={m} k={k} C={pool}"
                )));
            }
            let rest_len = pool - m;
            let drop_per_node = pool - k;
            if rest_len > 0 && nodes * drop_per_node < rest_len {
                return Err(Error::invalid(format!(
                    "cannot keep exactly m={m} common channels with N={nodes}, k={k}, C={pool}"
                )));
            }
            asymmetric(nodes, pool, m, k, rng)
        }
    };
    map.verify(mode)?;
    Ok(map)
}

fn asymmetric<R: Rng + ?Sized>(
    nodes: usize,
    pool: usize,
    m: usize,
    k: usize,
    rng: &mut R,
) -> SpectrumMap {
    let mut shuffled: Vec<ChannelId> = (1..=pool as ChannelId).collect();
    shuffled.shuffle(rng);
    let rest = shuffled.split_off(m);
    let drop_per_node = pool - k;

    let mut exclusions: Vec<BTreeSet<ChannelId>> = vec![BTreeSet::new(); nodes];
    // every non-core channel is missing from at least one node
    let mut owners: Vec<usize> = (0..nodes).collect();
    owners.shuffle(rng);
    for (i, &c) in rest.iter().enumerate() {
        exclusions[owners[i % nodes]].insert(c);
    }
    for excl in &mut exclusions {
        let mut pool_left: Vec<ChannelId> =
            rest.iter().copied().filter(|c| !excl.contains(c)).collect();
        pool_left.shuffle(rng);
        let need = drop_per_node - excl.len();
        excl.extend(pool_left.into_iter().take(need));
    }

    let nodes = exclusions
        .iter()
        .map(|excl| NodeChannels::new((1..=pool as ChannelId).filter(|c| !excl.contains(c))))
        .collect();
    SpectrumMap {
        pool_size: pool,
        nodes,
    }
}

impl SpectrumMap {
    fn verify(&self, mode: ChannelMode) -> Result<()> {
        if self.nodes.iter().any(NodeChannels::is_empty) {
            return Err(Error::invalid("a node was left without channels"));
        }
        if let ChannelMode::Asymmetric { m, .. } = mode {
            let common = self.common().len();
            if common != m {
                return Err(Error::invalid(format!(
                    "channel assignment produced {common} common channels, expected {m}"
                )));
            }
        }
        Ok(())
    }
}
