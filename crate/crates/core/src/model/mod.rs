//! Domain types shared by the parser, normalizer, classifiers, verdict engine
//! and simulator.
//!
//! Every constructor checks the structural invariants of the fragment, so a
//! value of [`Algorithm`] or [`Instance`] in hand is always well formed.

mod rat;
mod verdict;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use rat::{rat, threshold_ge, Rat, Threshold};
pub use verdict::{Outcome, Reason, ReasonKind, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed rational {num}/{den}: zero denominator")]
    MalformedRational { num: i64, den: i64 },
    #[error("cannot read `{0}` as a rational")]
    RationalSyntax(String),
    #[error("threshold {0} outside [0,1)")]
    ThresholdRange(Rat),
    #[error("an algorithm needs at least two rounds, found {0}")]
    TooFewRounds(usize),
    #[error("round {found} is listed at position {expected}")]
    RoundIndex { expected: usize, found: usize },
    #[error("no round updates inp")]
    NoInputRound,
    #[error("rounds {0} and {1} both update inp")]
    DuplicateInputRound(usize, usize),
    #[error("inp is updated in the last round")]
    InputInLastRound,
    #[error("round {0} sets dec but is not the last round")]
    DecOutsideLastRound(usize),
    #[error("the last round does not set dec")]
    LastRoundWithoutDec,
    #[error("lr round {0} is not followed by an ls round")]
    LrNotFollowedByLs(usize),
    #[error("round {0} is of type lr but updates inp or dec")]
    LrUpdatesState(usize),
    #[error("ls round {0} has a mult instruction")]
    MultInLsRound(usize),
    #[error("maxts used in round {0}; it is only allowed in round 1")]
    MaxTsOutsideRoundOne(usize),
    #[error("timestamps are sent in round 1, so every round-1 instruction must use maxts")]
    MixedRoundOneOps,
    #[error("maxts requires round 1 to send (inp, ts)")]
    MaxTsWithoutTimestamps,
    #[error("predicate has {found} entries but the algorithm has {expected} rounds")]
    PredicateArity { expected: usize, found: usize },
    #[error("ls atom in round {0}, which is not an ls round")]
    LsAtomOutsideLsRound(usize),
    #[error("eq atom in ls round {0}")]
    EqInLsRound(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Operation {
    Min,
    Smor,
    MaxTs,
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Min => "min",
            Operation::Smor => "smor",
            Operation::MaxTs => "maxts",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Guard {
    Uni,
    Mult,
}

/// One conditional line `if guard(H) && |H| > threshold·n then x := op(H)`.
///
/// A guard without a size conjunct carries threshold 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instruction {
    pub guard: Guard,
    pub threshold: Rat,
    pub op: Operation,
}

impl Instruction {
    pub fn new(guard: Guard, threshold: Rat, op: Operation) -> Result<Self, ModelError> {
        check_unit(threshold)?;
        Ok(Instruction { guard, threshold, op })
    }

    pub fn uni(threshold: Rat, op: Operation) -> Result<Self, ModelError> {
        Self::new(Guard::Uni, threshold, op)
    }

    pub fn mult(threshold: Rat, op: Operation) -> Result<Self, ModelError> {
        Self::new(Guard::Mult, threshold, op)
    }
}

fn check_unit(t: Rat) -> Result<(), ModelError> {
    if t.is_negative() || t >= Rat::one() {
        Err(ModelError::ThresholdRange(t))
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum RoundType {
    #[default]
    Every,
    LeaderReceive,
    LeaderSend,
}

impl fmt::Display for RoundType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RoundType::Every => "every",
            RoundType::LeaderReceive => "lr",
            RoundType::LeaderSend => "ls",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Round {
    pub(crate) index: usize,
    pub(crate) rtype: RoundType,
    pub(crate) instructions: Vec<Instruction>,
    pub(crate) sets_inp: bool,
    pub(crate) sets_dec: bool,
}

impl Round {
    pub fn new(index: usize, rtype: RoundType, instructions: Vec<Instruction>, sets_inp: bool, sets_dec: bool) -> Self {
        Round { index, rtype, instructions, sets_inp, sets_dec }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn rtype(&self) -> RoundType {
        self.rtype
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn sets_inp(&self) -> bool {
        self.sets_inp
    }

    pub fn sets_dec(&self) -> bool {
        self.sets_dec
    }

    pub fn has_guard(&self, g: Guard) -> bool {
        self.instructions.iter().any(|i| i.guard == g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fragment {
    Core,
    Ts,
    Coord,
    TsCoord,
}

impl Fragment {
    pub fn from_flags(timestamps: bool, coordinators: bool) -> Self {
        match (timestamps, coordinators) {
            (false, false) => Fragment::Core,
            (true, false) => Fragment::Ts,
            (false, true) => Fragment::Coord,
            (true, true) => Fragment::TsCoord,
        }
    }

    pub fn timestamps(self) -> bool {
        matches!(self, Fragment::Ts | Fragment::TsCoord)
    }

    pub fn coordinators(self) -> bool {
        matches!(self, Fragment::Coord | Fragment::TsCoord)
    }

    /// Whether an instance detected as `self` may be checked under `other`.
    /// Coordinator theorems specialize to instances without lr/ls rounds.
    pub fn admits_override(self, other: Fragment) -> bool {
        self == other || (self.timestamps() == other.timestamps() && other.coordinators())
    }
}

impl fmt::Display for Fragment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Fragment::Core => "core",
            Fragment::Ts => "ts",
            Fragment::Coord => "coord",
            Fragment::TsCoord => "ts_coord",
        })
    }
}

impl std::str::FromStr for Fragment {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "core" => Ok(Fragment::Core),
            "ts" => Ok(Fragment::Ts),
            "coord" => Ok(Fragment::Coord),
            "ts_coord" | "ts-coord" => Ok(Fragment::TsCoord),
            other => Err(format!("unknown fragment `{other}`")),
        }
    }
}

/// A one-phase Heard-Of algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Algorithm {
    name: String,
    rounds: Vec<Round>,
    ir: usize,
    timestamps: bool,
}

impl Algorithm {
    /// Builds an algorithm, rejecting anything outside the syntactic fragment.
    /// `timestamps` records whether round 1 sends `(inp, ts)`.
    pub fn new(name: impl Into<String>, rounds: Vec<Round>, timestamps: bool) -> Result<Self, ModelError> {
        let r = rounds.len();
        if r < 2 {
            return Err(ModelError::TooFewRounds(r));
        }
        for (pos, round) in rounds.iter().enumerate() {
            if round.index != pos + 1 {
                return Err(ModelError::RoundIndex { expected: pos + 1, found: round.index });
            }
            for ins in &round.instructions {
                check_unit(ins.threshold)?;
            }
        }
        let mut ir = None;
        for round in &rounds {
            if round.sets_inp {
                if let Some(prev) = ir {
                    return Err(ModelError::DuplicateInputRound(prev, round.index));
                }
                ir = Some(round.index);
            }
            if round.sets_dec && round.index != r {
                return Err(ModelError::DecOutsideLastRound(round.index));
            }
        }
        let ir = ir.ok_or(ModelError::NoInputRound)?;
        if ir == r {
            return Err(ModelError::InputInLastRound);
        }
        if !rounds[r - 1].sets_dec {
            return Err(ModelError::LastRoundWithoutDec);
        }
        for (pos, round) in rounds.iter().enumerate() {
            match round.rtype {
                RoundType::LeaderReceive => {
                    if round.sets_inp || round.sets_dec {
                        return Err(ModelError::LrUpdatesState(round.index));
                    }
                    if rounds.get(pos + 1).map(|n| n.rtype) != Some(RoundType::LeaderSend) {
                        return Err(ModelError::LrNotFollowedByLs(round.index));
                    }
                }
                RoundType::LeaderSend => {
                    if round.has_guard(Guard::Mult) {
                        return Err(ModelError::MultInLsRound(round.index));
                    }
                }
                RoundType::Every => {}
            }
            for ins in &round.instructions {
                if ins.op == Operation::MaxTs {
                    if round.index != 1 {
                        return Err(ModelError::MaxTsOutsideRoundOne(round.index));
                    }
                    if !timestamps {
                        return Err(ModelError::MaxTsWithoutTimestamps);
                    }
                } else if timestamps && round.index == 1 {
                    return Err(ModelError::MixedRoundOneOps);
                }
            }
        }
        Ok(Algorithm { name: name.into(), rounds, ir, timestamps })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// 1-based round lookup.
    pub fn round(&self, i: usize) -> &Round {
        &self.rounds[i - 1]
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn ir(&self) -> usize {
        self.ir
    }

    pub fn timestamps(&self) -> bool {
        self.timestamps
    }

    pub fn coordinators(&self) -> bool {
        self.rounds.iter().any(|r| r.rtype != RoundType::Every)
    }

    pub fn fragment(&self) -> Fragment {
        Fragment::from_flags(self.timestamps, self.coordinators())
    }

    /// Same algorithm with new instruction lists; re-validated.
    pub fn with_instructions(&self, per_round: Vec<Vec<Instruction>>) -> Result<Self, ModelError> {
        let rounds =
            self.rounds.iter().zip(per_round).map(|(r, ins)| Round { instructions: ins, ..r.clone() }).collect();
        Algorithm::new(self.name.clone(), rounds, self.timestamps)
    }
}

/// Atomic predicates holding in one round of a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub has_eq: bool,
    pub has_ls: bool,
    pub thr: Threshold,
}

impl PhaseEntry {
    pub const TRUE: PhaseEntry = PhaseEntry { has_eq: false, has_ls: false, thr: Threshold::Absent };

    pub fn thr(t: Rat) -> Self {
        PhaseEntry { thr: Threshold::Present(t), ..Self::TRUE }
    }

    pub fn eq_thr(t: Rat) -> Self {
        PhaseEntry { has_eq: true, thr: Threshold::Present(t), has_ls: false }
    }

    pub fn ls() -> Self {
        PhaseEntry { has_ls: true, ..Self::TRUE }
    }

    pub fn is_true(&self) -> bool {
        *self == Self::TRUE
    }

    /// Conjunction of two entries.
    pub fn and(&self, other: &PhaseEntry) -> PhaseEntry {
        PhaseEntry {
            has_eq: self.has_eq || other.has_eq,
            has_ls: self.has_ls || other.has_ls,
            thr: self.thr.max(other.thr),
        }
    }

    /// Entry-wise implication `self ⇒ other`.
    pub fn implies(&self, other: &PhaseEntry) -> bool {
        (self.has_eq || !other.has_eq) && (self.has_ls || !other.has_ls) && self.thr >= other.thr
    }

    pub fn c_equalizer(&self) -> bool {
        self.has_eq || self.has_ls
    }
}

/// A communication predicate for one phase: one entry per round.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhasePredicate(pub Vec<PhaseEntry>);

impl PhasePredicate {
    pub fn new(entries: Vec<PhaseEntry>) -> Self {
        PhasePredicate(entries)
    }

    pub fn trivial(rounds: usize) -> Self {
        PhasePredicate(vec![PhaseEntry::TRUE; rounds])
    }

    pub fn entries(&self) -> &[PhaseEntry] {
        &self.0
    }

    /// 1-based entry lookup.
    pub fn entry(&self, i: usize) -> &PhaseEntry {
        &self.0[i - 1]
    }

    /// `thr_i(φ)`.
    pub fn thr(&self, i: usize) -> Threshold {
        self.0[i - 1].thr
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn and(&self, other: &PhasePredicate) -> PhasePredicate {
        PhasePredicate(self.0.iter().zip(&other.0).map(|(a, b)| a.and(b)).collect())
    }

    pub fn implies(&self, other: &PhasePredicate) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.implies(b))
    }

    pub fn has_equalizer(&self) -> bool {
        self.0.iter().any(|e| e.has_eq)
    }

    pub fn has_c_equalizer(&self) -> bool {
        self.0.iter().any(|e| e.c_equalizer())
    }
}

/// `G global ∧ F(φ¹ ∧ F(φ² ∧ … F φᵏ))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CommSpec {
    global: PhasePredicate,
    sporadics: Vec<PhasePredicate>,
}

impl CommSpec {
    /// An empty sporadic list stands for a single sporadic equal to the global predicate.
    pub fn new(global: PhasePredicate, sporadics: Vec<PhasePredicate>) -> Self {
        let sporadics = if sporadics.is_empty() { vec![global.clone()] } else { sporadics };
        CommSpec { global, sporadics }
    }

    pub fn global(&self) -> &PhasePredicate {
        &self.global
    }

    pub fn sporadics(&self) -> &[PhasePredicate] {
        &self.sporadics
    }
}

/// An algorithm paired with its communication predicate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Instance {
    alg: Algorithm,
    spec: CommSpec,
}

impl Instance {
    pub fn new(alg: Algorithm, spec: CommSpec) -> Result<Self, ModelError> {
        let r = alg.num_rounds();
        for p in std::iter::once(spec.global()).chain(spec.sporadics()) {
            if p.len() != r {
                return Err(ModelError::PredicateArity { expected: r, found: p.len() });
            }
            for (pos, e) in p.entries().iter().enumerate() {
                let rt = alg.rounds()[pos].rtype;
                if e.has_ls && rt != RoundType::LeaderSend {
                    return Err(ModelError::LsAtomOutsideLsRound(pos + 1));
                }
                if e.has_eq && rt == RoundType::LeaderSend {
                    return Err(ModelError::EqInLsRound(pos + 1));
                }
            }
        }
        Ok(Instance { alg, spec })
    }

    pub fn alg(&self) -> &Algorithm {
        &self.alg
    }

    pub fn spec(&self) -> &CommSpec {
        &self.spec
    }

    pub fn into_parts(self) -> (Algorithm, CommSpec) {
        (self.alg, self.spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(n, d).unwrap()
    }

    fn one_third() -> Algorithm {
        let t = r(2, 3);
        Algorithm::new(
            "ot",
            vec![
                Round::new(
                    1,
                    RoundType::Every,
                    vec![Instruction::uni(t, Operation::Smor).unwrap(), Instruction::mult(t, Operation::Smor).unwrap()],
                    true,
                    false,
                ),
                Round::new(2, RoundType::Every, vec![Instruction::uni(t, Operation::Smor).unwrap()], false, true),
            ],
            false,
        )
        .unwrap()
    }

    #[test]
    fn valid_construction() {
        let a = one_third();
        assert_eq!(a.ir(), 1);
        assert_eq!(a.fragment(), Fragment::Core);
    }

    #[test]
    fn structural_violations_rejected() {
        let t = r(1, 2);
        let u = |op| Instruction::uni(t, op).unwrap();
        let one = |sets_inp, sets_dec| Round::new(1, RoundType::Every, vec![u(Operation::Smor)], sets_inp, sets_dec);
        let two = |sets_inp, sets_dec| Round::new(2, RoundType::Every, vec![u(Operation::Smor)], sets_inp, sets_dec);
        assert_eq!(Algorithm::new("x", vec![one(true, false)], false), Err(ModelError::TooFewRounds(1)));
        assert_eq!(
            Algorithm::new("x", vec![one(false, false), two(false, true)], false),
            Err(ModelError::NoInputRound)
        );
        assert_eq!(
            Algorithm::new("x", vec![one(true, true), two(false, true)], false),
            Err(ModelError::DecOutsideLastRound(1))
        );
        assert_eq!(
            Algorithm::new("x", vec![one(true, false), two(false, false)], false),
            Err(ModelError::LastRoundWithoutDec)
        );
        let lr_last = vec![one(true, false), Round::new(2, RoundType::LeaderReceive, vec![], false, true)];
        assert!(Algorithm::new("x", lr_last, false).is_err());
        let ts1 = Round::new(1, RoundType::Every, vec![u(Operation::MaxTs)], true, false);
        let maxts2 = vec![ts1, Round::new(2, RoundType::Every, vec![u(Operation::MaxTs)], false, true)];
        assert_eq!(Algorithm::new("x", maxts2, true), Err(ModelError::MaxTsOutsideRoundOne(2)));
        assert_eq!(
            Algorithm::new("x", vec![one(true, false), two(false, true)], true),
            Err(ModelError::MixedRoundOneOps)
        );
        assert!(Instruction::uni(Rat::one(), Operation::Min).is_err());
    }

    #[test]
    fn empty_sporadics_default_to_global() {
        let g = PhasePredicate::trivial(2);
        let s = CommSpec::new(g.clone(), vec![]);
        assert_eq!(s.sporadics(), &[g]);
    }

    #[test]
    fn instance_checks_predicate_placement() {
        let a = one_third();
        let bad = CommSpec::new(PhasePredicate::new(vec![PhaseEntry::ls(), PhaseEntry::TRUE]), vec![]);
        assert_eq!(Instance::new(a.clone(), bad), Err(ModelError::LsAtomOutsideLsRound(1)));
        let arity = CommSpec::new(PhasePredicate::trivial(3), vec![]);
        assert!(matches!(Instance::new(a, arity), Err(ModelError::PredicateArity { .. })));
    }

    #[test]
    fn entry_conjunction_and_implication() {
        let g = PhaseEntry::thr(r(1, 3));
        let s = PhaseEntry { has_eq: true, ..PhaseEntry::TRUE };
        let c = s.and(&g);
        assert_eq!(c, PhaseEntry::eq_thr(r(1, 3)));
        assert!(c.implies(&g) && c.implies(&s));
        assert!(!g.implies(&s));
    }
}
