//! Run aggregation: average time to rendezvous, packets per successful
//! rendezvous, and paired comparisons.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::engine::{RunRecord, Scenario};
use crate::error::{Error, Result};

/// Average TTR in slots: mean over nodes within each run, then over runs.
/// Censored nodes count at the slot budget.
pub fn attr(records: &[RunRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("ATTR of an empty record set"));
    }
    Ok(records.iter().map(RunRecord::mean_ttr_slots).sum::<f64>() / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PprSummary {
    /// Mean of `PT/SR` over runs with at least one successful rendezvous.
    pub mean: f64,
    pub runs: usize,
    /// Seeds of runs without any successful rendezvous.
    pub undefined_runs: Vec<u64>,
}

/// Packets per successful rendezvous, averaged over runs. Runs with no
/// successful rendezvous are left out and listed separately.
pub fn ppr(records: &[RunRecord]) -> Result<PprSummary> {
    let mut sum = 0.0;
    let mut runs = 0;
    let mut undefined_runs = Vec::new();
    for r in records {
        match r.ppr() {
            Some(v) => {
                sum += v;
                runs += 1;
            }
            None => undefined_runs.push(r.seed),
        }
    }
    if runs == 0 {
        return Err(Error::UndefinedPpr(format!(
            "none of {} runs had a successful rendezvous",
            records.len()
        )));
    }
    Ok(PprSummary {
        mean: sum / runs as f64,
        runs,
        undefined_runs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl Dispersion {
    /// Sample standard deviation (zero for a single value), min and max.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Dispersion { sd, min, max })
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: Scenario,
    pub records: Vec<RunRecord>,
    pub attr_slots: f64,
    /// Spread of per-run mean TTR, in slots.
    pub attr_dispersion: Dispersion,
    pub ppr: Option<PprSummary>,
    pub censored_nodes: usize,
    pub censored_runs: usize,
}

impl ExperimentResult {
    pub fn new(scenario: Scenario, records: Vec<RunRecord>) -> Result<Self> {
        let attr_slots = attr(&records)?;
        let per_run: Vec<f64> = records.iter().map(RunRecord::mean_ttr_slots).collect();
        let attr_dispersion = Dispersion::of(&per_run).expect("records are nonempty");
        let ppr = match ppr(&records) {
            Ok(s) => Some(s),
            Err(Error::UndefinedPpr(_)) => None,
            Err(e) => return Err(e),
        };
        let censored_nodes = records.iter().map(RunRecord::censored_count).sum();
        let censored_runs = records.iter().filter(|r| r.censored_count() > 0).count();
        Ok(ExperimentResult {
            scenario,
            records,
            attr_slots,
            attr_dispersion,
            ppr,
            censored_nodes,
            censored_runs,
        })
    }

    pub fn per_run_attr(&self) -> Vec<f64> {
        self.records.iter().map(RunRecord::mean_ttr_slots).collect()
    }

    pub fn median_attr(&self) -> f64 {
        median(&self.per_run_attr()).expect("records are nonempty")
    }
}

/// Two-sided exact sign test over paired differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    /// Pairs where the first sample is lower.
    pub lower: usize,
    /// Pairs where the first sample is higher.
    pub higher: usize,
    pub ties: usize,
    pub p_value: f64,
}

pub fn sign_test(pairs: &[(f64, f64)]) -> SignTest {
    let lower = pairs.iter().filter(|(a, b)| a < b).count();
    let higher = pairs.iter().filter(|(a, b)| a > b).count();
    let ties = pairs.len() - lower - higher;
    SignTest {
        lower,
        higher,
        ties,
        p_value: binomial_two_sided(lower + higher, lower.min(higher)),
    }
}

/// `P(X <= k) * 2` for `X ~ Bin(n, 1/2)`, capped at 1.
fn binomial_two_sided(n: usize, k: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_choose = 0.0f64;
    let mut tail = 0.0;
    for i in 0..=k {
        if i > 0 {
            ln_choose += ((n - i + 1) as f64).ln() - (i as f64).ln();
        }
        tail += (ln_choose + ln_half_n).exp();
    }
    (2.0 * tail).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub attr_a: f64,
    pub attr_b: f64,
    pub attr_ratio: f64,
    /// `100 * (1 - ATTR_a / ATTR_b)`.
    pub attr_improvement_pct: f64,
    pub attr_test: SignTest,
    pub ppr_a: Option<f64>,
    pub ppr_b: Option<f64>,
    pub ppr_ratio: Option<f64>,
    pub ppr_improvement_pct: Option<f64>,
    /// Over seeds where both runs have a defined PPR.
    pub ppr_test: SignTest,
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == b {
        1.0
    } else {
        a / b
    }
}

fn index_by_seed(recs: &[RunRecord]) -> Result<BTreeMap<u64, &RunRecord>> {
    let mut map = BTreeMap::new();
    for r in recs {
        if map.insert(r.seed, r).is_some() {
            return Err(Error::InvalidComparison(format!(
                "seed {} appears twice",
                r.seed
            )));
        }
    }
    Ok(map)
}

/// Paired comparison of `a` against `b`; runs are matched by seed and both
/// sides must cover the same seeds.
pub fn compare(a: &[RunRecord], b: &[RunRecord]) -> Result<Comparison> {
    let ia = index_by_seed(a)?;
    let ib = index_by_seed(b)?;
    if !ia.keys().eq(ib.keys()) {
        return Err(Error::InvalidComparison(
            "the two result sets cover different seeds".into(),
        ));
    }
    if ia.is_empty() {
        return Err(Error::InvalidComparison("nothing to compare".into()));
    }
    let attr_pairs: Vec<(f64, f64)> = ia
        .iter()
        .map(|(s, ra)| (ra.mean_ttr_slots(), ib[s].mean_ttr_slots()))
        .collect();
    let ppr_pairs: Vec<(f64, f64)> = ia
        .iter()
        .filter_map(|(s, ra)| Some((ra.ppr()?, ib[s].ppr()?)))
        .collect();
    let attr_a = attr(a)?;
    let attr_b = attr(b)?;
    let ppr_a = ppr(a).ok().map(|s| s.mean);
    let ppr_b = ppr(b).ok().map(|s| s.mean);
    let ppr_ratio = ppr_a.zip(ppr_b).map(|(x, y)| ratio(x, y));
    Ok(Comparison {
        attr_a,
        attr_b,
        attr_ratio: ratio(attr_a, attr_b),
        attr_improvement_pct: 100.0 * (1.0 - ratio(attr_a, attr_b)),
        attr_test: sign_test(&attr_pairs),
        ppr_a,
        ppr_b,
        ppr_ratio,
        ppr_improvement_pct: ppr_ratio.map(|r| 100.0 * (1.0 - r)),
        ppr_test: sign_test(&ppr_pairs),
    })
}
