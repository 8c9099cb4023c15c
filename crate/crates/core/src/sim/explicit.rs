//! Per-process reference semantics for very small `n`.
//!
//! Heard-of sets are enumerated as subsets of senders, timestamps are real
//! phase numbers, and nothing is merged by symmetry. Results are projected to
//! [`AbstractConfig`] only for comparison with the counting engine.

use std::collections::{BTreeMap, BTreeSet};

use super::round::update_value;
use super::{AbstractConfig, Msg, Profile, RoundCounts, SimError, Value};
use crate::model::{Algorithm, Guard, PhaseEntry, PhasePredicate, RoundType, Threshold};

pub const MAX_N: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ProcState {
    pub inp: Value,
    /// Phase in which `inp` was last written; 0 initially.
    pub ts: u32,
    pub dec: Value,
}

pub type ExplicitState = Vec<ProcState>;

pub fn initial_states(n: usize) -> Vec<ExplicitState> {
    (0..1u32 << n)
        .map(|mask| {
            (0..n)
                .map(|p| ProcState {
                    inp: if mask >> p & 1 == 1 { Value::B } else { Value::A },
                    ts: 0,
                    dec: Value::Undef,
                })
                .collect()
        })
        .collect()
}

pub fn project(state: &ExplicitState, timestamps: bool) -> AbstractConfig {
    let raw = state.iter().map(|s| {
        let rank = if timestamps { s.ts.min(u8::MAX as u32) as u8 } else { 0 };
        (Profile { inp: s.inp, ts_rank: rank, dec: s.dec }, 1)
    });
    AbstractConfig::normalized(state.len(), raw, 0)
}

fn heard(msgs: &[Msg], senders: u32) -> RoundCounts {
    let mut m = BTreeMap::new();
    for (q, msg) in msgs.iter().enumerate() {
        if senders >> q & 1 == 1 {
            *m.entry(*msg).or_insert(0) += 1;
        }
    }
    RoundCounts::from_map(m)
}

fn admissible_sets(entry: &PhaseEntry, n: usize) -> Vec<u32> {
    (0..1u32 << n)
        .filter(|s| match entry.thr {
            Threshold::Absent => true,
            Threshold::Present(t) => t.exceeded_by(s.count_ones() as usize, n),
        })
        .collect()
}

/// All tuples whose `p`-th entry is drawn from `choices[p]`.
fn product(choices: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut out = vec![Vec::new()];
    for c in choices {
        let mut next = Vec::new();
        for prefix in &out {
            for v in c {
                let mut t = prefix.clone();
                t.push(*v);
                next.push(t);
            }
        }
        out = next;
    }
    out
}

/// Round outputs with the receiving leader, if the round is `lr`.
fn round_outputs(
    alg: &Algorithm,
    i: usize,
    msgs: &[Msg],
    prev_leader: Option<usize>,
    entry: &PhaseEntry,
) -> BTreeSet<(Vec<Value>, Option<usize>)> {
    let n = msgs.len();
    let round = alg.round(i);
    let instrs = round.instructions();
    let sets = admissible_sets(entry, n);
    let eval = |s: u32| update_value(instrs, &heard(msgs, s), n);
    let mut out = BTreeSet::new();
    match round.rtype() {
        RoundType::Every if entry.has_eq => {
            for &s in &sets {
                out.insert((vec![eval(s); n], None));
            }
        }
        RoundType::Every => {
            let per: BTreeSet<Value> = sets.iter().map(|&s| eval(s)).collect();
            let per: Vec<Value> = per.into_iter().collect();
            for t in product(&vec![per; n]) {
                out.insert((t, None));
            }
        }
        RoundType::LeaderReceive => {
            for leader in 0..n {
                for &s in &sets {
                    let mut t = vec![Value::Undef; n];
                    t[leader] = eval(s);
                    out.insert((t, Some(leader)));
                }
            }
        }
        RoundType::LeaderSend => {
            let has_uni = round.has_guard(Guard::Uni);
            let lr_before = i > 1 && alg.round(i - 1).rtype() == RoundType::LeaderReceive;
            let leaders: Vec<usize> = match (lr_before, prev_leader) {
                (true, Some(l)) => vec![l],
                _ => (0..n).collect(),
            };
            for q in leaders {
                let d = msgs[q].value;
                let got = if has_uni { d } else { Value::Undef };
                if entry.has_ls {
                    out.insert((vec![got; n], None));
                } else {
                    let choices = vec![vec![got, Value::Undef]; n];
                    for t in product(&choices) {
                        out.insert((t, None));
                    }
                }
            }
        }
    }
    out
}

/// Successor states of one phase numbered `phase` (1-based).
pub fn successors(alg: &Algorithm, state: &ExplicitState, phi: &PhasePredicate, phase: u32) -> BTreeSet<ExplicitState> {
    let n = state.len();
    let ts = alg.timestamps();
    let first: Vec<Msg> =
        state.iter().map(|s| Msg { value: s.inp, rank: if ts { s.ts.min(u8::MAX as u32) as u8 } else { 0 } }).collect();
    // (x values, round-ir values, leader of the previous round)
    let mut paths: BTreeSet<(Vec<Msg>, Vec<Value>, Option<usize>)> = BTreeSet::new();
    paths.insert((first, Vec::new(), None));
    for i in 1..=alg.num_rounds() {
        let mut next = BTreeSet::new();
        for (msgs, vir, leader) in &paths {
            for (vals, l) in round_outputs(alg, i, msgs, *leader, phi.entry(i)) {
                let vir2 = if i == alg.ir() { vals.clone() } else { vir.clone() };
                let msgs2: Vec<Msg> = vals.iter().map(|v| Msg::plain(*v)).collect();
                next.insert((msgs2, vir2, l));
            }
        }
        paths = next;
    }
    paths
        .into_iter()
        .map(|(last, vir, _)| {
            (0..n)
                .map(|p| {
                    let mut s = state[p];
                    if !vir[p].is_undef() {
                        s.inp = vir[p];
                        s.ts = phase;
                    }
                    if s.dec.is_undef() {
                        s.dec = last[p].value;
                    }
                    s
                })
                .collect()
        })
        .collect()
}

/// Projections of the states reachable in exactly `d` phases, `d = 0..=depth`.
pub fn reachable_layers(
    alg: &Algorithm,
    phi: &PhasePredicate,
    n: usize,
    depth: usize,
) -> Result<Vec<BTreeSet<AbstractConfig>>, SimError> {
    if n > MAX_N {
        return Err(SimError::ExplicitTooLarge(n));
    }
    let mut cur: BTreeSet<ExplicitState> = initial_states(n).into_iter().collect();
    let ts = alg.timestamps();
    let mut layers = vec![cur.iter().map(|s| project(s, ts)).collect()];
    for d in 1..=depth {
        let mut next = BTreeSet::new();
        for s in &cur {
            next.extend(successors(alg, s, phi, d as u32));
        }
        layers.push(next.iter().map(|s| project(s, ts)).collect());
        cur = next;
    }
    Ok(layers)
}

/// Explicit states reachable within `depth` phases, one representative per
/// projected configuration, with the phase number at which each was found.
pub fn representatives(
    alg: &Algorithm,
    phi: &PhasePredicate,
    n: usize,
    depth: usize,
) -> Result<BTreeMap<AbstractConfig, (ExplicitState, u32)>, SimError> {
    if n > MAX_N {
        return Err(SimError::ExplicitTooLarge(n));
    }
    let ts = alg.timestamps();
    let mut reps = BTreeMap::new();
    let mut cur: BTreeSet<ExplicitState> = initial_states(n).into_iter().collect();
    for s in &cur {
        reps.entry(project(s, ts)).or_insert((s.clone(), 0));
    }
    for d in 1..=depth {
        let mut next = BTreeSet::new();
        for s in &cur {
            next.extend(successors(alg, s, phi, d as u32));
        }
        for s in &next {
            reps.entry(project(s, ts)).or_insert((s.clone(), d as u32));
        }
        cur = next;
    }
    Ok(reps)
}
