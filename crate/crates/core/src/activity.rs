//! Primary-radio channel occupancy.
//!
//! Each channel alternates between OFF (idle) and ON (occupied by a primary
//! radio) with exponentially distributed holding times. Rates follow the
//! convention `U = λy / (λx + λy)`: ON periods have mean `1/λx` and OFF
//! periods have mean `1/λy`, so `λy` is the rate at which an idle channel
//! becomes busy.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivityRates {
    pub lambda_x: f64,
    pub lambda_y: f64,
}

impl ActivityRates {
    pub fn new(lambda_x: f64, lambda_y: f64) -> Result<Self> {
        let rates = ActivityRates { lambda_x, lambda_y };
        rates.validate()?;
        Ok(rates)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.lambda_x) || !ok(self.lambda_y) {
            return Err(Error::invalid(format!(
                "rates must be finite and nonnegative, got λx={} λy={}",
                self.lambda_x, self.lambda_y
            )));
        }
        if self.lambda_x + self.lambda_y <= 0.0 {
            return Err(Error::invalid("λx and λy cannot both be zero"));
        }
        Ok(())
    }

    /// Mean ON holding time in seconds.
    pub fn mean_on(&self) -> f64 {
        1.0 / self.lambda_x
    }

    /// Mean OFF holding time in seconds.
    pub fn mean_off(&self) -> f64 {
        1.0 / self.lambda_y
    }

    /// True when the channel can never become busy.
    pub fn never_busy(&self) -> bool {
        self.lambda_y == 0.0
    }
}

/// Long-run fraction of time the channel is ON.
pub fn utilization(rates: ActivityRates) -> Result<f64> {
    rates.validate()?;
    Ok(rates.lambda_y / (rates.lambda_x + rates.lambda_y))
}

/// Probability of being ON / OFF at time `t` for a channel that starts OFF.
///
/// `p_off` is returned as `1 - p_on`, which makes the pair sum to exactly
/// one in floating point.
pub fn state_probabilities(rates: ActivityRates, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be nonnegative, got {t}")));
    }
    let u = utilization(rates)?;
    let decay = (-(rates.lambda_x + rates.lambda_y) * t).exp();
    let p_on = u - u * decay;
    Ok((p_on, 1.0 - p_on))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityClass {
    Zero,
    Low,
    Long,
    High,
    Mix,
}

impl ActivityClass {
    pub const ALL: [ActivityClass; 5] = [
        ActivityClass::Zero,
        ActivityClass::Low,
        ActivityClass::Long,
        ActivityClass::High,
        ActivityClass::Mix,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ActivityClass::Zero => "zero",
            ActivityClass::Low => "low",
            ActivityClass::Long => "long",
            ActivityClass::High => "high",
            ActivityClass::Mix => "mix",
        }
    }
}

impl fmt::Display for ActivityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for ActivityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(ActivityClass::Zero),
            "low" => Ok(ActivityClass::Low),
            "long" => Ok(ActivityClass::Long),
            // the 85% scenarios are the High columns
            "high" | "85" => Ok(ActivityClass::High),
            "mix" | "mixed" => Ok(ActivityClass::Mix),
            other => Err(Error::invalid(format!("unknown activity class '{other}'"))),
        }
    }
}

/// One column of the reference rate table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateTableEntry {
    pub channel: u32,
    pub class: ActivityClass,
    pub lambda_x: f64,
    pub lambda_y: f64,
    /// Utilization as printed in the table (two decimals).
    pub utilization: f64,
}

impl RateTableEntry {
    pub fn rates(&self) -> ActivityRates {
        ActivityRates {
            lambda_x: self.lambda_x,
            lambda_y: self.lambda_y,
        }
    }
}

const fn entry(channel: u32, class: ActivityClass, lx: f64, ly: f64, u: f64) -> RateTableEntry {
    RateTableEntry {
        channel,
        class,
        lambda_x: lx,
        lambda_y: ly,
        utilization: u,
    }
}

/// Reference per-channel rates for the zero/low/long/high activity levels,
/// laid out in the Zero, Low, Long, High rotation used by the mixed profile.
pub const RATE_TABLE: [RateTableEntry; 20] = {
    use ActivityClass::*;
    [
        entry(1, Zero, 1000.0, 0.0, 0.0),
        entry(2, Low, 1.0, 0.21, 0.17),
        entry(3, Long, 0.25, 0.25, 0.50),
        entry(4, High, 0.22, 1.44, 0.86),
        entry(5, Zero, 1000.0, 0.0, 0.0),
        entry(6, Low, 1.36, 0.22, 0.13),
        entry(7, Long, 0.21, 0.24, 0.53),
        entry(8, High, 0.22, 1.58, 0.87),
        entry(9, Zero, 1000.0, 0.0, 0.0),
        entry(10, Low, 1.26, 0.22, 0.14),
        entry(11, Long, 0.22, 0.24, 0.52),
        entry(12, High, 0.23, 1.25, 0.84),
        entry(13, Zero, 1000.0, 0.0, 0.0),
        entry(14, Low, 1.26, 0.21, 0.14),
        entry(15, Long, 0.21, 0.22, 0.51),
        entry(16, High, 0.21, 1.06, 0.83),
        entry(17, Zero, 1000.0, 0.0, 0.0),
        entry(18, Low, 1.28, 0.22, 0.14),
        entry(19, Long, 0.20, 0.20, 0.50),
        entry(20, High, 0.21, 1.09, 0.83),
    ]
};

/// Per-channel rates for `channel_count` channels (channel `c` gets entry
/// `c - 1`).
///
/// A single class cycles through that class's table columns in channel
/// order; `Mix` walks the whole table, repeating it past 20 channels.
pub fn make_profile(class: ActivityClass, channel_count: usize) -> Vec<ActivityRates> {
    make_profile_from(&RATE_TABLE, class, channel_count)
}

/// As [`make_profile`] but over a caller-supplied table.
pub fn make_profile_from(
    table: &[RateTableEntry],
    class: ActivityClass,
    channel_count: usize,
) -> Vec<ActivityRates> {
    let columns: Vec<ActivityRates> = match class {
        ActivityClass::Mix => table.iter().map(RateTableEntry::rates).collect(),
        single => table
            .iter()
            .filter(|e| e.class == single)
            .map(RateTableEntry::rates)
            .collect(),
    };
    assert!(!columns.is_empty(), "rate table has no {class} columns");
    (0..channel_count)
        .map(|i| columns[i % columns.len()])
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ChannelState {
    Off,
    On,
}

impl ChannelState {
    fn flip(self) -> Self {
        match self {
            ChannelState::Off => ChannelState::On,
            ChannelState::On => ChannelState::Off,
        }
    }
}

impl fmt::Display for ChannelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelState::Off => "OFF",
            ChannelState::On => "ON",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub state: ChannelState,
    pub start: f64,
    pub duration: f64,
}

impl Interval {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

/// Lazily sampled ON/OFF trace of one channel.
#[derive(Debug, Clone)]
pub struct ChannelProcess {
    channel_id: u32,
    rates: ActivityRates,
    intervals: Vec<Interval>,
    rng: SimRng,
}

impl ChannelProcess {
    pub fn new(channel_id: u32, rates: ActivityRates, rng: SimRng) -> Result<Self> {
        rates.validate()?;
        Ok(ChannelProcess {
            channel_id,
            rates,
            intervals: Vec::new(),
            rng,
        })
    }

    /// Process for `channel_id` drawing from the channel's own substream of
    /// `run_seed`.
    pub fn for_run(run_seed: u64, channel_id: u32, rates: ActivityRates) -> Result<Self> {
        Self::new(
            channel_id,
            rates,
            seed::stream(run_seed, "pr-channel", u64::from(channel_id)),
        )
    }

    pub fn channel_id(&self) -> u32 {
        self.channel_id
    }

    pub fn rates(&self) -> ActivityRates {
        self.rates
    }

    fn draw(&mut self, state: ChannelState) -> f64 {
        let rate = match state {
            ChannelState::Off => self.rates.lambda_y,
            ChannelState::On => self.rates.lambda_x,
        };
        if rate == 0.0 {
            return f64::INFINITY;
        }
        let exp = Exp::new(rate).expect("rate is positive and finite");
        loop {
            let d = exp.sample(&mut self.rng);
            if d > 0.0 {
                return d;
            }
        }
    }

    fn covered_until(&self) -> f64 {
        self.intervals.last().map_or(0.0, Interval::end)
    }

    fn extend_to(&mut self, t: f64) {
        while self.covered_until() <= t {
            let (state, start) = match self.intervals.last() {
                None => (ChannelState::Off, 0.0),
                Some(last) => (last.state.flip(), last.end()),
            };
            let duration = self.draw(state);
            self.intervals.push(Interval {
                state,
                start,
                duration,
            });
        }
    }

    /// Intervals covering `[0, horizon]`, the last one clipped at `horizon`.
    ///
    /// Calls with growing horizons extend the trace; earlier intervals are
    /// never redrawn.
    pub fn sample_intervals(&mut self, horizon: f64) -> Result<Vec<Interval>> {
        if !(horizon > 0.0) {
            return Err(Error::invalid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        self.extend_to(horizon);
        let mut out = Vec::new();
        for iv in &self.intervals {
            if iv.start >= horizon {
                break;
            }
            out.push(Interval {
                duration: iv.end().min(horizon) - iv.start,
                ..*iv
            });
        }
        Ok(out)
    }

    pub fn state_at(&mut self, t: f64) -> ChannelState {
        if self.rates.never_busy() || t <= 0.0 {
            return ChannelState::Off;
        }
        self.extend_to(t);
        // half-open intervals [start, end)
        let idx = self.intervals.partition_point(|iv| iv.end() <= t);
        self.intervals[idx].state
    }

    pub fn is_busy(&mut self, t: f64) -> bool {
        self.state_at(t) == ChannelState::On
    }
}
