//! Single-clock baselines: random channel selection and the modular clock.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{is_prime, ChannelId, NodeChannels};

/// Smallest prime `p >= n` (2 for `n <= 2`).
pub fn next_prime(n: usize) -> usize {
    let mut p = n.max(2);
    while !is_prime(p as u32) {
        p += 1;
    }
    p
}

/// Uniform draw from the node's available channels.
pub fn mrcs_select<R: Rng + ?Sized>(spectrum: &NodeChannels, rng: &mut R) -> Result<ChannelId> {
    if spectrum.is_empty() {
        return Err(Error::NoChannel);
    }
    Ok(spectrum.available[rng.random_range(0..spectrum.len())])
}

/// Modular clock over a prime modulus `p >= m`. Advances once per half-slot;
/// indices past `m` wrap onto `index mod m`. The rate is redrawn every `2p`
/// half-slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModularClock {
    m: usize,
    p: usize,
    j: usize,
    r: usize,
    since_redraw: usize,
}

impl ModularClock {
    pub fn new<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::NoChannel);
        }
        let p = next_prime(m);
        let j = rng.random_range(0..p);
        let r = rng.random_range(0..p);
        Self::from_parts(m, j, r)
    }

    pub fn from_parts(m: usize, j: usize, r: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::NoChannel);
        }
        let p = next_prime(m);
        if j >= p || r >= p {
            return Err(Error::invalid(format!(
                "clock values must lie in [0, {p}): j={j} r={r}"
            )));
        }
        Ok(ModularClock {
            m,
            p,
            j,
            r,
            since_redraw: 0,
        })
    }

    pub fn modulus(&self) -> usize {
        self.p
    }

    pub fn index(&self) -> usize {
        self.j
    }

    pub fn rate(&self) -> usize {
        self.r
    }

    pub fn channel_for_index(&self, spectrum: &NodeChannels, j: usize) -> ChannelId {
        spectrum.available[j % self.m]
    }
}

/// Advances the modular clock by one half-slot and returns its channel.
pub fn mmca_select<R: Rng + ?Sized>(
    clock: &mut ModularClock,
    spectrum: &NodeChannels,
    rng: &mut R,
) -> Result<ChannelId> {
    if spectrum.is_empty() {
        return Err(Error::NoChannel);
    }
    if spectrum.len() != clock.m {
        return Err(Error::invalid(format!(
            "clock built for {} channels used with {}",
            clock.m,
            spectrum.len()
        )));
    }
    if clock.since_redraw == 2 * clock.p {
        clock.r = rng.random_range(0..clock.p);
        clock.since_redraw = 0;
    }
    clock.j = (clock.j + clock.r) % clock.p;
    clock.since_redraw += 1;
    Ok(clock.channel_for_index(spectrum, clock.j))
}

/// Channel selection of the extended modular clock; the clock core is the
/// same as [`mmca_select`]. What sets the protocol apart is its termination
/// window, which the engine applies.
pub fn memca_select<R: Rng + ?Sized>(
    clock: &mut ModularClock,
    spectrum: &NodeChannels,
    rng: &mut R,
) -> Result<ChannelId> {
    mmca_select(clock, spectrum, rng)
}
