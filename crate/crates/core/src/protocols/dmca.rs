//! Dual modular clock channel selection.
//!
//! Each node runs two clocks over its available-channel indices. The first
//! clock drives the first half-slot and lands on the node's prime-numbered
//! channels; the second drives the second half-slot over the non-prime
//! channels. If either subset is empty that half falls back to the full
//! set. Hopping rates are redrawn every `m` slots, where `m` is the number of
//! available channels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{ChannelId, NodeChannels};

use super::Half;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockState {
    j1: usize,
    j2: usize,
    r1: usize,
    r2: usize,
    /// Slot counter within the current rate period.
    t: usize,
    m: usize,
}

impl ClockState {
    /// Random initial indices and rates for a node with `m` channels.
    pub fn new<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::NoChannel);
        }
        let j1 = rng.random_range(0..m);
        let j2 = rng.random_range(0..m);
        let r1 = rng.random_range(0..m);
        let r2 = rng.random_range(0..m);
        Self::from_parts(m, j1, j2, r1, r2)
    }

    pub fn from_parts(m: usize, j1: usize, j2: usize, r1: usize, r2: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::NoChannel);
        }
        if [j1, j2, r1, r2].iter().any(|&v| v >= m) {
            return Err(Error::invalid(format!(
                "clock values must lie in [0, {m}): j1={j1} j2={j2} r1={r1} r2={r2}"
            )));
        }
        Ok(ClockState {
            j1,
            j2,
            r1,
            r2,
            t: 0,
            m,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn indices(&self) -> (usize, usize) {
        (self.j1, self.j2)
    }

    pub fn rates(&self) -> (usize, usize) {
        (self.r1, self.r2)
    }

    pub fn slot_counter(&self) -> usize {
        self.t
    }

    fn check(&self, spectrum: &NodeChannels) -> Result<()> {
        if spectrum.is_empty() {
            return Err(Error::NoChannel);
        }
        if spectrum.len() != self.m {
            return Err(Error::invalid(format!(
                "clock built for {} channels used with {}",
                self.m,
                spectrum.len()
            )));
        }
        Ok(())
    }

    pub fn first_half(&mut self, spectrum: &NodeChannels) -> Result<ChannelId> {
        self.check(spectrum)?;
        self.j1 = (self.j1 + self.r1) % self.m;
        let primes = &spectrum.prime;
        Ok(if primes.is_empty() {
            spectrum.available[self.j1]
        } else {
            primes[self.j1 % primes.len()]
        })
    }

    /// `c1` is the channel this node used in the first half of the slot.
    pub fn second_half(
        &mut self,
        spectrum: &NodeChannels,
        c1: Option<ChannelId>,
    ) -> Result<ChannelId> {
        self.check(spectrum)?;
        self.j2 = (self.j2 + self.r2) % self.m;
        let others = &spectrum.non_prime;
        let mut c2 = if others.is_empty() {
            spectrum.available[self.j2]
        } else {
            others[self.j2 % others.len()]
        };
        if Some(c2) == c1 {
            self.j2 = (self.j2 + 1) % self.m;
            c2 = spectrum.available[self.j2];
        }
        Ok(c2)
    }

    /// Closes a slot; rates are redrawn when the period of `m` slots wraps.
    pub fn end_slot<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        self.t += 1;
        if self.t == self.m {
            self.t = 0;
            self.r1 = rng.random_range(0..self.m);
            self.r2 = rng.random_range(0..self.m);
        }
    }
}

/// One selection step. For the second half, `c1` is the channel chosen in
/// the first half of the same slot. Does not close the slot; callers pair
/// this with [`ClockState::end_slot`].
pub fn mdmca_select(
    state: &mut ClockState,
    spectrum: &NodeChannels,
    half: Half,
    c1: Option<ChannelId>,
) -> Result<ChannelId> {
    match half {
        Half::First => state.first_half(spectrum),
        Half::Second => state.second_half(spectrum, c1),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::SimRng;
    use rand::SeedableRng;

    #[test]
    fn first_half_hops_on_primes() {
        let sp = NodeChannels::new(1..=10);
        let mut st = ClockState::from_parts(10, 3, 0, 4, 0).unwrap();
        assert_eq!(mdmca_select(&mut st, &sp, Half::First, None).unwrap(), 7);
        assert_eq!(st.indices().0, 7);
    }

    #[test]
    fn second_half_hops_on_non_primes() {
        let sp = NodeChannels::new(1..=10);
        let mut st = ClockState::from_parts(10, 0, 9, 0, 3).unwrap();
        assert_eq!(
            mdmca_select(&mut st, &sp, Half::Second, Some(2)).unwrap(),
            6
        );
        assert_eq!(st.indices().1, 2);
    }

    #[test]
    fn singleton_without_primes() {
        let sp = NodeChannels::new([4]);
        let mut st = ClockState::from_parts(1, 0, 0, 0, 0).unwrap();
        let c1 = st.first_half(&sp).unwrap();
        assert_eq!(c1, 4);
        let c2 = st.second_half(&sp, Some(c1)).unwrap();
        assert_eq!(c2, 4);
        assert_eq!(st.indices(), (0, 0));
    }

    #[test]
    fn collision_branch_moves_to_next_index() {
        // no primes: both halves hop over the full set
        let sp = NodeChannels::new([1, 4]);
        let mut st = ClockState::from_parts(2, 0, 0, 1, 0).unwrap();
        let c1 = st.first_half(&sp).unwrap();
        assert_eq!(c1, 4);
        // j2 stays 0 -> non-prime[0] = 1, no collision
        assert_eq!(st.second_half(&sp, Some(c1)).unwrap(), 1);
        let mut st = ClockState::from_parts(2, 0, 1, 1, 0).unwrap();
        let c1 = st.first_half(&sp).unwrap();
        // j2 = 1 -> non-prime[1] = 4 == c1 -> bump to index 0
        assert_eq!(st.second_half(&sp, Some(c1)).unwrap(), 1);
        assert_eq!(st.indices().1, 0);
    }

    #[test]
    fn rates_redrawn_every_m_slots() {
        let sp = NodeChannels::new(1..=7);
        let mut rng = SimRng::seed_from_u64(3);
        let mut st = ClockState::new(7, &mut rng).unwrap();
        for slot in 1..=70 {
            st.first_half(&sp).unwrap();
            st.second_half(&sp, None).unwrap();
            st.end_slot(&mut rng);
            assert_eq!(st.slot_counter(), slot % 7);
            let (a, b) = st.indices();
            let (r1, r2) = st.rates();
            assert!(a < 7 && b < 7 && r1 < 7 && r2 < 7);
        }
    }

    #[test]
    fn rejects_bad_state() {
        assert!(ClockState::from_parts(0, 0, 0, 0, 0).is_err());
        assert!(ClockState::from_parts(3, 3, 0, 0, 0).is_err());
        let mut st = ClockState::from_parts(3, 0, 0, 0, 0).unwrap();
        let empty = NodeChannels::new(std::iter::empty());
        assert!(matches!(st.first_half(&empty), Err(Error::NoChannel)));
    }
}
