use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Msg, RoundCounts, Value};
use crate::model::{Algorithm, Guard, Instruction, Operation, PhaseEntry, RoundType, Threshold};

/// Result of the first instruction whose guard and size test hold on `H − {?}`.
pub fn update_value(instrs: &[Instruction], h: &RoundCounts, n: usize) -> Value {
    let defined: Vec<(Msg, usize)> = h.0.iter().copied().filter(|(m, c)| !m.value.is_undef() && *c > 0).collect();
    let size: usize = defined.iter().map(|(_, c)| c).sum();
    let mut distinct: Vec<Value> = defined.iter().map(|(m, _)| m.value).collect();
    distinct.sort();
    distinct.dedup();
    if distinct.is_empty() {
        return Value::Undef;
    }
    for ins in instrs {
        let guard = match ins.guard {
            Guard::Uni => distinct.len() == 1,
            Guard::Mult => distinct.len() >= 2,
        };
        if guard && ins.threshold.exceeded_by(size, n) {
            return apply(ins.op, &defined, &distinct);
        }
    }
    Value::Undef
}

fn apply(op: Operation, defined: &[(Msg, usize)], distinct: &[Value]) -> Value {
    match op {
        Operation::Min => distinct[0],
        Operation::Smor => {
            let count = |v: Value| defined.iter().filter(|(m, _)| m.value == v).map(|(_, c)| c).sum::<usize>();
            let mut best = distinct[0];
            for &v in &distinct[1..] {
                if count(v) > count(best) {
                    best = v;
                }
            }
            best
        }
        Operation::MaxTs => {
            let top = defined.iter().map(|(m, _)| m.rank).max().unwrap_or(0);
            defined.iter().filter(|(m, _)| m.rank == top).map(|(m, _)| m.value).min().unwrap_or(Value::Undef)
        }
    }
}

fn admissible(entry: &PhaseEntry, size: usize, n: usize) -> bool {
    match entry.thr {
        Threshold::Absent => true,
        Threshold::Present(t) => t.exceeded_by(size, n),
    }
}

/// Every value some process can compute from `pool` under `entry`, with the
/// first heard-of multiset (in enumeration order) producing it.
///
/// The size atom is tested on the full multiset, `?` included.
pub fn fire_set(
    instrs: &[Instruction],
    pool: &RoundCounts,
    entry: &PhaseEntry,
    n: usize,
) -> BTreeMap<Value, RoundCounts> {
    let mut out = BTreeMap::new();
    let mut cur = vec![0usize; pool.0.len()];
    fn rec(
        k: usize,
        cur: &mut Vec<usize>,
        pool: &RoundCounts,
        instrs: &[Instruction],
        entry: &PhaseEntry,
        n: usize,
        out: &mut BTreeMap<Value, RoundCounts>,
    ) {
        if k == pool.0.len() {
            let size: usize = cur.iter().sum();
            if !admissible(entry, size, n) {
                return;
            }
            let h = RoundCounts(
                pool.0.iter().zip(cur.iter()).filter(|(_, c)| **c > 0).map(|((m, _), c)| (*m, *c)).collect(),
            );
            let v = update_value(instrs, &h, n);
            out.entry(v).or_insert(h);
            return;
        }
        for c in 0..=pool.0[k].1 {
            cur[k] = c;
            rec(k + 1, cur, pool, instrs, entry, n, out);
        }
        cur[k] = 0;
    }
    rec(0, &mut cur, pool, instrs, entry, n, &mut out);
    out
}

/// One way a round can end: the vector of new values and how it arises.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundStep {
    pub output: RoundCounts,
    /// Heard-of multiset chosen for each produced value.
    pub heard: Vec<(Value, RoundCounts)>,
    /// Value sent by the leader in `ls` rounds.
    pub leader: Option<Value>,
}

/// All count vectors over `values` summing to `n`.
pub(crate) fn vectors_over(values: &[Value], n: usize) -> Vec<RoundCounts> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; values.len()];
    fn rec(k: usize, left: usize, values: &[Value], cur: &mut Vec<usize>, out: &mut Vec<RoundCounts>) {
        if k + 1 == values.len() {
            cur[k] = left;
            let mut m = BTreeMap::new();
            for (v, c) in values.iter().zip(cur.iter()) {
                *m.entry(Msg::plain(*v)).or_insert(0) += *c;
            }
            out.push(RoundCounts::from_map(m));
            return;
        }
        for c in 0..=left {
            cur[k] = c;
            rec(k + 1, left - c, values, cur, out);
        }
    }
    if !values.is_empty() {
        rec(0, n, values, &mut cur, &mut out);
    }
    out
}

fn one_of(d: Value, n: usize) -> RoundCounts {
    if d.is_undef() {
        RoundCounts::uniform(Value::Undef, n)
    } else {
        RoundCounts::abq(usize::from(d == Value::A), usize::from(d == Value::B), n - 1)
    }
}

/// Successor vectors of round `i` (1-based) from `pool`, deduplicated and
/// sorted by output.
pub fn round_successors(alg: &Algorithm, i: usize, pool: &RoundCounts, entry: &PhaseEntry, n: usize) -> Vec<RoundStep> {
    let round = alg.round(i);
    let mut out: BTreeMap<RoundCounts, RoundStep> = BTreeMap::new();
    let mut push = |s: RoundStep| {
        out.entry(s.output.clone()).or_insert(s);
    };
    match round.rtype() {
        RoundType::Every => {
            let fire = fire_set(round.instructions(), pool, entry, n);
            if entry.has_eq {
                for (d, h) in &fire {
                    push(RoundStep { output: RoundCounts::uniform(*d, n), heard: vec![(*d, h.clone())], leader: None });
                }
            } else {
                let vals: Vec<Value> = fire.keys().copied().collect();
                for v in vectors_over(&vals, n) {
                    let heard = v.0.iter().map(|(m, _)| (m.value, fire[&m.value].clone())).collect();
                    push(RoundStep { output: v, heard, leader: None });
                }
            }
        }
        RoundType::LeaderReceive => {
            for (d, h) in fire_set(round.instructions(), pool, entry, n) {
                push(RoundStep { output: one_of(d, n), heard: vec![(d, h)], leader: None });
            }
        }
        RoundType::LeaderSend => {
            let has_uni = round.has_guard(Guard::Uni);
            let deliver = |d: Value| if has_uni { d } else { Value::Undef };
            let lr_before = i > 1 && alg.round(i - 1).rtype() == RoundType::LeaderReceive;
            let set_f: Vec<Value> = pool.values();
            if entry.has_ls {
                let senders = if lr_before {
                    vec![pool.values().into_iter().find(|v| !v.is_undef()).unwrap_or(Value::Undef)]
                } else {
                    set_f
                };
                for d in senders {
                    push(RoundStep { output: RoundCounts::uniform(deliver(d), n), heard: vec![], leader: Some(d) });
                }
            } else {
                for d in set_f {
                    let got = deliver(d);
                    let support = if got.is_undef() { vec![Value::Undef] } else { vec![got, Value::Undef] };
                    for v in vectors_over(&support, n) {
                        push(RoundStep { output: v, heard: vec![], leader: Some(d) });
                    }
                }
            }
        }
    }
    out.into_values().collect()
}
