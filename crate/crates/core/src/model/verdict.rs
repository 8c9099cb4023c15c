use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accept,
    Reject,
    OutOfFragment,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Accept => "accept",
            Outcome::Reject => "reject",
            Outcome::OutOfFragment => "out_of_fragment",
        })
    }
}

/// Structured reason codes attached to non-accepting verdicts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Reason {
    /// Round 1 has no mult instruction.
    MissingMultRound1,
    MissingUniRound(usize),
    /// Some round-1 mult instruction does not use smor.
    Round1MultNotSmor,
    /// One of the two constant inequalities fails.
    ConstantsViolation,
    LsFirstRound,
    LsAfterIr,
    /// A mult instruction in round ir+1 that can fire.
    MultAfterIr,
    /// Timestamp proviso on round ir: mult present or uni threshold below 1/2, not repairable.
    TsIrProviso,
    NoUnifier,
    NoDecider,
    NoDeciderAfterUnifier,
    GlobalEqualizer,
    GlobalCEqualizer,
    Assumption1(usize),
    FragmentOverride,
}

/// What a reason says about the algorithm, used to pick a simulator check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ReasonKind {
    Agreement,
    Termination,
    /// Agreement or termination, depending on the construction.
    Structural,
    Fragment,
}

impl Reason {
    pub fn kind(&self) -> ReasonKind {
        match self {
            Reason::MissingMultRound1 | Reason::MissingUniRound(_) => ReasonKind::Termination,
            Reason::NoUnifier | Reason::NoDecider | Reason::NoDeciderAfterUnifier => ReasonKind::Termination,
            Reason::Round1MultNotSmor | Reason::ConstantsViolation | Reason::MultAfterIr | Reason::TsIrProviso => {
                ReasonKind::Agreement
            }
            Reason::LsFirstRound | Reason::LsAfterIr => ReasonKind::Structural,
            Reason::GlobalEqualizer | Reason::GlobalCEqualizer | Reason::Assumption1(_) | Reason::FragmentOverride => {
                ReasonKind::Fragment
            }
        }
    }

    pub fn code(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reason::MissingMultRound1 => f.write_str("MissingMultRound1"),
            Reason::MissingUniRound(i) => write!(f, "MissingUniRound({i})"),
            Reason::Round1MultNotSmor => f.write_str("Round1MultNotSmor"),
            Reason::ConstantsViolation => f.write_str("ConstantsViolation"),
            Reason::LsFirstRound => f.write_str("LsFirstRound"),
            Reason::LsAfterIr => f.write_str("LsAfterIr"),
            Reason::MultAfterIr => f.write_str("MultAfterIr"),
            Reason::TsIrProviso => f.write_str("TsIrProviso"),
            Reason::NoUnifier => f.write_str("NoUnifier"),
            Reason::NoDecider => f.write_str("NoDecider"),
            Reason::NoDeciderAfterUnifier => f.write_str("NoDeciderAfterUnifier"),
            Reason::GlobalEqualizer => f.write_str("GlobalEqualizer"),
            Reason::GlobalCEqualizer => f.write_str("GlobalCEqualizer"),
            Reason::Assumption1(i) => write!(f, "Assumption1({i})"),
            Reason::FragmentOverride => f.write_str("FragmentOverride"),
        }
    }
}

impl Serialize for Reason {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Checker verdict. `Reject` and `OutOfFragment` always carry a reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    outcome: Outcome,
    reasons: Vec<Reason>,
}

impl Verdict {
    pub fn accept() -> Self {
        Verdict { outcome: Outcome::Accept, reasons: Vec::new() }
    }

    /// `None` when `reasons` is empty.
    pub fn reject(reasons: Vec<Reason>) -> Option<Self> {
        (!reasons.is_empty()).then_some(Verdict { outcome: Outcome::Reject, reasons })
    }

    pub fn out_of_fragment(reasons: Vec<Reason>) -> Option<Self> {
        (!reasons.is_empty()).then_some(Verdict { outcome: Outcome::OutOfFragment, reasons })
    }

    pub fn outcome(&self) -> Outcome {
        self.outcome
    }

    pub fn reasons(&self) -> &[Reason] {
        &self.reasons
    }

    pub fn is_accept(&self) -> bool {
        self.outcome == Outcome::Accept
    }

    /// Whether the simulator is expected to produce a concrete counterexample.
    pub fn wants_witness(&self) -> bool {
        self.outcome == Outcome::Reject && self.reasons.iter().any(|r| r.kind() != ReasonKind::Fragment)
    }
}
