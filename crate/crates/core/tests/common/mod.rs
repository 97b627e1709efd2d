//! Independent reference models used by the integration and acceptance
//! tests. Nothing here calls into the code under test except where noted.

#![allow(dead_code)]

use std::collections::BTreeMap;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};

use crnsim_core::engine::{Chooser, Scenario, Simulation};
use crnsim_core::handshake::{run_handshake, HandshakeKind, NeighborTables, NodeId};
use crnsim_core::protocols::{mdmca_select, ClockState, Half};
use crnsim_core::seed::SimRng;
use crnsim_core::spectrum::{ChannelMode, NodeChannels, SpectrumMap};
use crnsim_core::topology::{Position, Topology};

pub type Prob = Ratio<u128>;

// ---------------------------------------------------------------------------
// dual modular clock, transcribed line by line from its reference pseudocode

fn prime(c: u32) -> bool {
    c >= 2 && (2..c).all(|d| c % d != 0)
}

/// Channel pairs `(c1, c2)` for the first `slots` timeslots. `channels` is
/// the node's available set in ascending order. The first pair of rates is
/// given; later ones are drawn from `rng` (R1 then R2) each time the inner
/// loop over `t` finishes.
pub fn literal_dual_clock(
    channels: &[u32],
    j1_init: usize,
    j2_init: usize,
    r1_init: usize,
    r2_init: usize,
    slots: usize,
    rng: &mut SimRng,
) -> Vec<(u32, u32)> {
    let m_i = channels.len();
    // divide m_i into prime (Mp) and non-prime (Np) sets
    let mp: Vec<u32> = channels.iter().copied().filter(|&c| prime(c)).collect();
    let np: Vec<u32> = channels.iter().copied().filter(|&c| !prime(c)).collect();
    let c_i = |j: usize| channels[j];

    let mut j1 = j1_init;
    let mut j2 = j2_init;
    let mut out = Vec::new();
    let mut first_pass = true;
    loop {
        // choose R1, R2 from [0, m_i)
        let (r1, r2) = if first_pass {
            (r1_init, r2_init)
        } else {
            let a = rng.random_range(0..m_i);
            let b = rng.random_range(0..m_i);
            (a, b)
        };
        first_pass = false;
        for _t in 0..m_i {
            // first half
            j1 = (j1 + r1) % m_i;
            let c1 = if !mp.is_empty() {
                mp[j1 % mp.len()]
            } else {
                c_i(j1)
            };
            // second half
            j2 = (j2 + r2) % m_i;
            let mut c2 = if !np.is_empty() {
                np[j2 % np.len()]
            } else {
                c_i(j2)
            };
            if c2 == c1 {
                j2 = (j2 + 1) % m_i;
                c2 = c_i(j2);
            }
            out.push((c1, c2));
            if out.len() == slots {
                return out;
            }
        }
    }
}

/// Same trace from the library's implementation.
pub fn library_dual_clock(
    channels: &[u32],
    j1: usize,
    j2: usize,
    r1: usize,
    r2: usize,
    slots: usize,
    rng: &mut SimRng,
) -> Vec<(u32, u32)> {
    let spectrum = NodeChannels::new(channels.iter().copied());
    let mut clock = ClockState::from_parts(channels.len(), j1, j2, r1, r2).unwrap();
    (0..slots)
        .map(|_| {
            let c1 = mdmca_select(&mut clock, &spectrum, Half::First, None).unwrap();
            let c2 = mdmca_select(&mut clock, &spectrum, Half::Second, Some(c1)).unwrap();
            clock.end_slot(rng);
            (c1, c2)
        })
        .collect()
}

/// Compares both traces over every subset of {1..10} with at most
/// `max_m` channels, every starting index and rate, for `slots` slots.
/// Returns (cases, mismatches).
pub fn dual_clock_equivalence(max_m: usize, slots: usize) -> (u64, Vec<String>) {
    let mut cases = 0u64;
    let mut mismatches = Vec::new();
    for mask in 1u32..(1 << 10) {
        let m = mask.count_ones() as usize;
        if m > max_m {
            continue;
        }
        let channels: Vec<u32> = (1..=10).filter(|c| mask & (1 << (c - 1)) != 0).collect();
        for j1 in 0..m {
            for j2 in 0..m {
                for r1 in 0..m {
                    for r2 in 0..m {
                        let seed =
                            ((mask as u64) << 32) | ((j1 * 1000 + j2 * 100 + r1 * 10 + r2) as u64);
                        let a = literal_dual_clock(
                            &channels,
                            j1,
                            j2,
                            r1,
                            r2,
                            slots,
                            &mut SimRng::seed_from_u64(seed),
                        );
                        let b = library_dual_clock(
                            &channels,
                            j1,
                            j2,
                            r1,
                            r2,
                            slots,
                            &mut SimRng::seed_from_u64(seed),
                        );
                        cases += 1;
                        if a != b && mismatches.len() < 10 {
                            mismatches.push(format!(
                                "CU={channels:?} j1={j1} j2={j2} R1={r1} R2={r2}: {a:?} vs {b:?}"
                            ));
                        }
                    }
                }
            }
        }
    }
    (cases, mismatches)
}

// ---------------------------------------------------------------------------
// three-node chain, one channel, no PR activity, three-way handshake

/// Outcome key: per-node completion half-slots, or `None` if the run was
/// still going at the depth limit.
pub type Outcome = Option<Vec<u64>>;

/// Exact outcome distribution of the chain 0 - 1 - 2 computed from first
/// principles: every half-slot all three nodes share the single channel and
/// form one cluster; an incomplete node is elected uniformly and hands the
/// handshake to a uniformly chosen neighbor, unknown neighbors first. After
/// a three-way handshake both parties know the union of their knowledge.
pub fn chain_oracle(depth: u64) -> BTreeMap<Outcome, Prob> {
    #[derive(Clone)]
    struct State {
        know: [u8; 3],
        direct: [u8; 3],
        done: [Option<u64>; 3],
    }
    fn neighbors(i: usize) -> Vec<usize> {
        match i {
            0 => vec![1],
            1 => vec![0, 2],
            _ => vec![1],
        }
    }
    fn walk(s: State, h: u64, depth: u64, p: Prob, out: &mut BTreeMap<Outcome, Prob>) {
        if s.done.iter().all(Option::is_some) {
            let key = Some(s.done.iter().map(|d| d.unwrap()).collect());
            *out.entry(key).or_insert_with(|| Prob::from_integer(0)) += p;
            return;
        }
        if h > depth {
            *out.entry(None).or_insert_with(|| Prob::from_integer(0)) += p;
            return;
        }
        let eligible: Vec<usize> = (0..3).filter(|&i| s.done[i].is_none()).collect();
        let pi = p / Prob::from_integer(eligible.len() as u128);
        for &i in &eligible {
            let nb = neighbors(i);
            let fresh: Vec<usize> = nb
                .iter()
                .copied()
                .filter(|&r| s.direct[i] & (1 << r) == 0)
                .collect();
            let choices = if fresh.is_empty() { nb } else { fresh };
            let pr = pi / Prob::from_integer(choices.len() as u128);
            for &r in &choices {
                let mut t = s.clone();
                let union = s.know[i] | s.know[r] | (1 << i) | (1 << r);
                t.know[i] = union & !(1 << i);
                t.know[r] = union & !(1 << r);
                t.direct[i] |= 1 << r;
                t.direct[r] |= 1 << i;
                for n in 0..3 {
                    if t.done[n].is_none() && t.know[n].count_ones() == 2 {
                        t.done[n] = Some(h);
                    }
                }
                walk(t, h + 1, depth, pr, out);
            }
        }
    }
    let mut out = BTreeMap::new();
    let start = State {
        know: [0; 3],
        direct: [0; 3],
        done: [None; 3],
    };
    walk(start, 1, depth, Prob::from_integer(1), &mut out);
    out
}

/// Chooser that replays a fixed prefix of decisions, then takes option 0,
/// recording every decision and its number of options.
struct Replay<'a> {
    prefix: &'a [usize],
    taken: Vec<(usize, usize)>,
}

impl Chooser for Replay<'_> {
    fn choose(&mut self, n: usize) -> usize {
        let c = self.prefix.get(self.taken.len()).copied().unwrap_or(0);
        assert!(c < n, "replayed choice {c} out of {n}");
        self.taken.push((c, n));
        c
    }
}

pub fn chain_simulation() -> Simulation {
    let scenario = Scenario {
        nodes: 3,
        channels: 1,
        mode: ChannelMode::Symmetric,
        handshake: HandshakeKind::ThreeWay,
        ..Scenario::default()
    };
    let topology = Topology::from_positions(
        vec![
            Position { x: 0.0, y: 0.0 },
            Position { x: 80.0, y: 0.0 },
            Position { x: 160.0, y: 0.0 },
        ],
        100.0,
    )
    .unwrap();
    let spectrum = SpectrumMap {
        pool_size: 1,
        nodes: vec![NodeChannels::new([1]); 3],
    };
    Simulation::with_parts(scenario, topology, spectrum, 11).unwrap()
}

/// Outcome distribution of the engine itself, enumerating every sequence
/// of election decisions it asks for, each weighted by the product of
/// `1/options` along the way.
pub fn chain_engine_enumeration(depth: u64) -> (BTreeMap<Outcome, Prob>, u64) {
    let mut out: BTreeMap<Outcome, Prob> = BTreeMap::new();
    let mut prefix: Vec<usize> = Vec::new();
    let mut leaves = 0u64;
    loop {
        let mut sim = chain_simulation();
        let mut chooser = Replay {
            prefix: &prefix,
            taken: Vec::new(),
        };
        while !sim.finished() && sim.elapsed_half_slots() < depth {
            sim.step_with(&mut chooser).unwrap();
        }
        let key = sim
            .all_complete()
            .then(|| sim.record_outcome().ttr_half_slots);
        let weight = chooser
            .taken
            .iter()
            .fold(Prob::from_integer(1), |w, &(_, n)| {
                w / Prob::from_integer(n as u128)
            });
        *out.entry(key).or_insert_with(|| Prob::from_integer(0)) += weight;
        leaves += 1;

        let mut taken = chooser.taken;
        loop {
            match taken.pop() {
                Some((c, n)) if c + 1 < n => {
                    taken.push((c + 1, n));
                    break;
                }
                Some(_) => continue,
                None => return (out, leaves),
            }
        }
        prefix = taken.into_iter().map(|(c, _)| c).collect();
    }
}

// ---------------------------------------------------------------------------
// handshake invariants over random meeting sequences

fn knowledge_with_self(t: &NeighborTables) -> std::collections::BTreeSet<NodeId> {
    let mut k = t.knowledge();
    k.insert(t.owner());
    k
}

/// Applies `meetings` random handshakes among `n` nodes and checks every
/// invariant after each one. Returns the first violation.
pub fn check_meeting_sequence(rng: &mut SimRng, n: usize, meetings: usize) -> Result<(), String> {
    let mut tables: Vec<NeighborTables> = (0..n).map(NeighborTables::new).collect();
    for step in 0..meetings {
        let a = rng.random_range(0..n);
        let mut b = rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let kind = if rng.random::<bool>() {
            HandshakeKind::TwoWay
        } else {
            HandshakeKind::ThreeWay
        };
        let gate = rng.random_range(0..4) == 0;
        let before_a = tables[a].clone();
        let before_b = tables[b].clone();

        let (ta, tb) = if a < b {
            let (lo, hi) = tables.split_at_mut(b);
            (&mut lo[a], &mut hi[0])
        } else {
            let (lo, hi) = tables.split_at_mut(a);
            (&mut hi[0], &mut lo[b])
        };
        let transcript = run_handshake(kind, ta, tb, gate);
        let ctx = format!("step {step}: {kind} {a}->{b} gate={gate}");

        let expected_packets = match kind {
            HandshakeKind::TwoWay => 2,
            HandshakeKind::ThreeWay => 3,
        };
        if transcript.packets() != expected_packets {
            return Err(format!("{ctx}: {} packets", transcript.packets()));
        }
        if transcript.successful != 1 {
            return Err(format!("{ctx}: {} successes", transcript.successful));
        }
        for (before, after) in [(&before_a, &*ta), (&before_b, &*tb)] {
            if !before.knowledge().is_subset(&after.knowledge()) {
                return Err(format!("{ctx}: knowledge of {} shrank", after.owner()));
            }
            if !before.confirmed().is_subset(after.confirmed()) {
                return Err(format!("{ctx}: confirmations of {} shrank", after.owner()));
            }
            after
                .check_invariants(n)
                .map_err(|e| format!("{ctx}: {e}"))?;
        }
        if !ta.direct().contains(&b) || !tb.direct().contains(&a) {
            return Err(format!("{ctx}: endpoints not direct neighbors"));
        }
        if !ta.is_confirmed(b) {
            return Err(format!("{ctx}: initiator did not confirm"));
        }
        match kind {
            HandshakeKind::ThreeWay => {
                if !tb.is_confirmed(a) {
                    return Err(format!("{ctx}: responder did not confirm"));
                }
                if !gate {
                    let ka = knowledge_with_self(ta);
                    let kb = knowledge_with_self(tb);
                    if ka != kb {
                        return Err(format!("{ctx}: knowledge differs {ka:?} vs {kb:?}"));
                    }
                    if !knowledge_with_self(&before_b).is_subset(&ka)
                        || !knowledge_with_self(&before_a).is_subset(&kb)
                    {
                        return Err(format!("{ctx}: pre-handshake knowledge not absorbed"));
                    }
                }
            }
            HandshakeKind::TwoWay => {
                if tb.is_confirmed(a) != before_b.is_confirmed(a) {
                    return Err(format!("{ctx}: responder confirmed under 2WH"));
                }
                if !gate && knowledge_with_self(ta) != knowledge_with_self(tb) {
                    return Err(format!("{ctx}: knowledge differs after 2WH"));
                }
            }
        }
        let _ = &mut tables;
    }
    Ok(())
}
