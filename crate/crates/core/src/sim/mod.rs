//! Executable semantics over two input values.
//!
//! A configuration is abstracted to the number of processes per
//! [`Profile`]. Processes are interchangeable and every process picks its
//! heard-of multiset independently, so the abstraction loses nothing; the
//! [`explicit`] engine re-runs the same semantics on per-process tuples as a
//! cross-check.

pub mod explicit;
mod phase;
mod round;
mod search;
mod witness;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use phase::{phase_successors, phase_successors_detailed, Flow, PhaseStep};
pub use round::{fire_set, round_successors, update_value, RoundStep};
pub use search::{check_agreement, check_termination, mixed_output_reachable, reachable_layers, Bounds};
pub use witness::{replay, ReplayError, Witness, WitnessKind, WitnessPhase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    #[serde(rename = "a")]
    A,
    #[serde(rename = "b")]
    B,
    #[serde(rename = "?")]
    Undef,
}

impl Value {
    pub fn is_undef(self) -> bool {
        self == Value::Undef
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Value::A => "a",
            Value::B => "b",
            Value::Undef => "?",
        })
    }
}

/// A message: a value and, in the first round of timestamp algorithms, the
/// rank of its timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Msg {
    pub value: Value,
    pub rank: u8,
}

impl Msg {
    pub fn plain(value: Value) -> Self {
        Msg { value, rank: 0 }
    }
}

/// Multiset of messages, kept sorted without zero counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
pub struct RoundCounts(pub Vec<(Msg, usize)>);

impl RoundCounts {
    pub fn from_map(m: BTreeMap<Msg, usize>) -> Self {
        RoundCounts(m.into_iter().filter(|(_, c)| *c > 0).collect())
    }

    /// Counts of plain values `a`, `b`, `?`.
    pub fn abq(a: usize, b: usize, q: usize) -> Self {
        let mut m = BTreeMap::new();
        m.insert(Msg::plain(Value::A), a);
        m.insert(Msg::plain(Value::B), b);
        m.insert(Msg::plain(Value::Undef), q);
        Self::from_map(m)
    }

    pub fn uniform(v: Value, n: usize) -> Self {
        RoundCounts(if n == 0 { vec![] } else { vec![(Msg::plain(v), n)] })
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, c)| c).sum()
    }

    pub fn count_value(&self, v: Value) -> usize {
        self.0.iter().filter(|(m, _)| m.value == v).map(|(_, c)| c).sum()
    }

    /// Distinct values present, `?` included.
    pub fn values(&self) -> Vec<Value> {
        let mut v: Vec<Value> = self.0.iter().map(|(m, _)| m.value).collect();
        v.dedup();
        v.sort();
        v.dedup();
        v
    }

    /// Forget ranks.
    pub fn plain(&self) -> RoundCounts {
        let mut m = BTreeMap::new();
        for (msg, c) in &self.0 {
            *m.entry(Msg::plain(msg.value)).or_insert(0) += c;
        }
        Self::from_map(m)
    }

    pub fn is_sub_of(&self, other: &RoundCounts) -> bool {
        self.0.iter().all(|(m, c)| other.0.iter().find(|(o, _)| o == m).is_some_and(|(_, oc)| c <= oc))
    }
}

impl fmt::Display for RoundCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, (m, c)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(", ")?;
            }
            if m.rank > 0 {
                write!(f, "{}@{}:{}", m.value, m.rank, c)?;
            } else {
                write!(f, "{}:{}", m.value, c)?;
            }
        }
        f.write_str("}")
    }
}

/// Local state of a process at a phase boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Profile {
    pub inp: Value,
    pub ts_rank: u8,
    pub dec: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AbstractConfig {
    pub n: usize,
    pub counts: Vec<(Profile, usize)>,
    /// Number of sporadic predicates already consumed; 0 outside lasso search.
    pub sporadic_index: usize,
}

impl AbstractConfig {
    /// Sorts, merges, drops zeros and compresses timestamp ranks.
    pub fn normalized(n: usize, raw: impl IntoIterator<Item = (Profile, usize)>, sporadic_index: usize) -> Self {
        let mut m: BTreeMap<Profile, usize> = BTreeMap::new();
        for (p, c) in raw {
            if c > 0 {
                *m.entry(p).or_insert(0) += c;
            }
        }
        let mut ranks: Vec<u8> = m.keys().map(|p| p.ts_rank).collect();
        ranks.sort();
        ranks.dedup();
        let mut out: BTreeMap<Profile, usize> = BTreeMap::new();
        for (p, c) in m {
            let r = ranks.binary_search(&p.ts_rank).unwrap() as u8;
            *out.entry(Profile { ts_rank: r, ..p }).or_insert(0) += c;
        }
        AbstractConfig { n, counts: out.into_iter().collect(), sporadic_index }
    }

    /// All inputs drawn from `{a, b}`, timestamps equal, nobody decided.
    pub fn initial(n: usize) -> Vec<AbstractConfig> {
        (0..=n)
            .map(|nb| {
                let p = |inp| Profile { inp, ts_rank: 0, dec: Value::Undef };
                Self::normalized(n, [(p(Value::A), n - nb), (p(Value::B), nb)], 0)
            })
            .collect()
    }

    pub fn with_index(&self, s: usize) -> Self {
        AbstractConfig { sporadic_index: s, ..self.clone() }
    }

    pub fn decided(&self, v: Value) -> usize {
        self.counts.iter().filter(|(p, _)| p.dec == v).map(|(_, c)| c).sum()
    }

    pub fn disagrees(&self) -> bool {
        self.decided(Value::A) > 0 && self.decided(Value::B) > 0
    }

    pub fn all_decided(&self) -> bool {
        self.decided(Value::Undef) == 0
    }

    /// Decision summary, used to compare engines.
    pub fn dec_counts(&self) -> (usize, usize, usize) {
        (self.decided(Value::A), self.decided(Value::B), self.decided(Value::Undef))
    }

    /// Round-1 pool: everybody sends `(inp, ts)`.
    pub fn round_one_pool(&self, timestamps: bool) -> RoundCounts {
        let mut m = BTreeMap::new();
        for (p, c) in &self.counts {
            let rank = if timestamps { p.ts_rank } else { 0 };
            *m.entry(Msg { value: p.inp, rank }).or_insert(0) += c;
        }
        RoundCounts::from_map(m)
    }
}

impl fmt::Display for AbstractConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (k, (p, c)) in self.counts.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{c}x({},t{},{})", p.inp, p.ts_rank, p.dec)?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("n = {n} is below 2")]
    TooSmall { n: usize },
    #[error("about {estimate} abstract configurations at n = {n}, above the limit of {limit}; lower --n")]
    TooLarge { n: usize, estimate: u128, limit: u128 },
    #[error("the explicit engine supports n <= 3, got {0}")]
    ExplicitTooLarge(usize),
}

/// Upper bound on the number of abstract configurations for `n` processes.
pub fn state_estimate(n: usize, timestamps: bool) -> u128 {
    let ranks = if timestamps { n } else { 1 };
    let profiles = (2 * 3 * ranks) as u128;
    binomial(profiles + n as u128 - 1, n as u128)
}

fn binomial(a: u128, b: u128) -> u128 {
    let mut r: u128 = 1;
    for i in 0..b {
        r = match r.checked_mul(a - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    r
}

pub const STATE_LIMIT: u128 = 50_000_000;

pub fn guard_size(n: usize, timestamps: bool) -> Result<(), SimError> {
    if n < 2 {
        return Err(SimError::TooSmall { n });
    }
    let estimate = state_estimate(n, timestamps);
    if estimate > STATE_LIMIT {
        return Err(SimError::TooLarge { n, estimate, limit: STATE_LIMIT });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_are_compressed() {
        let p = |inp, r, dec| Profile { inp, ts_rank: r, dec };
        let c =
            AbstractConfig::normalized(3, [(p(Value::A, 4, Value::Undef), 1), (p(Value::B, 9, Value::Undef), 2)], 0);
        assert_eq!(c.counts[0].0.ts_rank, 0);
        assert_eq!(c.counts[1].0.ts_rank, 1);
    }

    #[test]
    fn initial_configs() {
        let init = AbstractConfig::initial(3);
        assert_eq!(init.len(), 4);
        assert!(init.iter().all(|c| c.counts.iter().map(|x| x.1).sum::<usize>() == 3));
    }

    #[test]
    fn estimates_grow() {
        assert!(state_estimate(6, true) > state_estimate(6, false));
        assert!(guard_size(6, true).is_ok());
        assert!(guard_size(40, true).is_err());
        assert!(guard_size(1, false).is_err());
    }
}
