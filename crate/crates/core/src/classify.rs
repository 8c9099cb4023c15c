//! Round and predicate classifiers feeding the characterization theorems.

use serde::Serialize;

use crate::model::{Algorithm, Guard, Operation, PhasePredicate, Rat, Reason, RoundType, Threshold};

/// Threshold summary of one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundInfo {
    pub index: usize,
    pub rtype: RoundType,
    pub has_uni: bool,
    pub has_mult: bool,
    pub thr_u: Threshold,
    /// Minimal mult threshold `thr_m^{i,k}`.
    pub thr_m_min: Threshold,
    /// Maximal mult threshold `thr_m^{i,1}`.
    pub thr_m_max: Threshold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundFacts {
    rounds: Vec<RoundInfo>,
    ir: usize,
}

impl RoundFacts {
    /// 1-based.
    pub fn round(&self, i: usize) -> &RoundInfo {
        &self.rounds[i - 1]
    }

    pub fn rounds(&self) -> &[RoundInfo] {
        &self.rounds
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn ir(&self) -> usize {
        self.ir
    }
}

pub fn round_facts(alg: &Algorithm) -> RoundFacts {
    let rounds = alg
        .rounds()
        .iter()
        .map(|r| {
            let uni = r.instructions().iter().filter(|i| i.guard == Guard::Uni).map(|i| i.threshold).min();
            let mults: Vec<Rat> =
                r.instructions().iter().filter(|i| i.guard == Guard::Mult).map(|i| i.threshold).collect();
            let present = |v: Option<Rat>| v.map_or(Threshold::Absent, Threshold::Present);
            RoundInfo {
                index: r.index(),
                rtype: r.rtype(),
                has_uni: uni.is_some(),
                has_mult: !mults.is_empty(),
                thr_u: present(uni),
                thr_m_min: present(mults.iter().copied().min()),
                thr_m_max: present(mults.iter().copied().max()),
            }
        })
        .collect();
    RoundFacts { rounds, ir: alg.ir() }
}

/// `max(1 − thr_u^1, 1 − thr_m^{1,k}/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BorderThreshold {
    pub value: Rat,
}

/// `None` when round 1 lacks a uni or a mult instruction.
pub fn border_threshold(facts: &RoundFacts) -> Option<BorderThreshold> {
    let r1 = facts.round(1);
    let (u, m) = (r1.thr_u.value()?, r1.thr_m_min.value()?);
    let one = Rat::one();
    let value = (one - u).max(one - m / Rat::from_int(2));
    Some(BorderThreshold { value })
}

pub fn is_preserving(i: usize, phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    let r = facts.round(i);
    !r.has_uni || !r.has_mult || phi.thr(i) < r.thr_u.max(r.thr_m_min)
}

pub fn is_solo_safe(i: usize, phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    let r = facts.round(i);
    r.has_uni && r.thr_u <= phi.thr(i)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CFacts {
    pub c_preserving: bool,
    pub c_solo_safe: bool,
    pub c_equalizer: bool,
}

pub fn c_variants(i: usize, phi: &PhasePredicate, facts: &RoundFacts) -> CFacts {
    let e = phi.entry(i);
    let (c_preserving, c_solo_safe) = if facts.round(i).rtype == RoundType::LeaderSend {
        (!e.has_ls, e.has_ls)
    } else {
        (is_preserving(i, phi, facts), is_solo_safe(i, phi, facts))
    };
    CFacts { c_preserving, c_solo_safe, c_equalizer: e.c_equalizer() }
}

/// Classifier results for one (predicate, round) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RoundPredicateFacts {
    pub preserving: bool,
    pub solo_safe: bool,
    pub equalizer: bool,
    pub c_preserving: bool,
    pub c_solo_safe: bool,
    pub c_equalizer: bool,
}

pub fn predicate_facts(phi: &PhasePredicate, facts: &RoundFacts) -> Vec<RoundPredicateFacts> {
    (1..=facts.num_rounds())
        .map(|i| {
            let c = c_variants(i, phi, facts);
            RoundPredicateFacts {
                preserving: is_preserving(i, phi, facts),
                solo_safe: is_solo_safe(i, phi, facts),
                equalizer: phi.entry(i).has_eq,
                c_preserving: c.c_preserving,
                c_solo_safe: c.c_solo_safe,
                c_equalizer: c.c_equalizer,
            }
        })
        .collect()
}

/// Which family of definitions to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flavor {
    pub strong: bool,
    pub coord: bool,
}

impl Flavor {
    pub const PLAIN: Flavor = Flavor { strong: false, coord: false };
    pub const STRONG: Flavor = Flavor { strong: true, coord: false };
    pub const C: Flavor = Flavor { strong: false, coord: true };
    pub const STRONG_C: Flavor = Flavor { strong: true, coord: true };
}

fn solo_safe_as(f: Flavor, i: usize, phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    if f.coord {
        c_variants(i, phi, facts).c_solo_safe
    } else {
        is_solo_safe(i, phi, facts)
    }
}

fn preserving_as(f: Flavor, i: usize, phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    if f.coord {
        c_variants(i, phi, facts).c_preserving
    } else {
        is_preserving(i, phi, facts)
    }
}

fn equalizer_as(f: Flavor, i: usize, phi: &PhasePredicate) -> bool {
    let e = phi.entry(i);
    if f.coord {
        e.c_equalizer()
    } else {
        e.has_eq
    }
}

pub fn is_decider_as(f: Flavor, phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    (1..=facts.num_rounds()).all(|i| solo_safe_as(f, i, phi, facts))
}

pub fn is_decider(phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    is_decider_as(Flavor::PLAIN, phi, facts)
}

pub fn is_c_decider(phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    is_decider_as(Flavor::C, phi, facts)
}

/// First-round threshold clause of the unifier definition.
pub fn unifier_round_one_clause(f: Flavor, phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    let r1 = facts.round(1);
    let t1 = phi.thr(1);
    let border = border_threshold(facts).map(|b| Threshold::Present(b.value));
    let base = t1 >= r1.thr_m_min && (t1 >= r1.thr_u || border.is_some_and(|b| t1 >= b));
    base && (!f.strong || r1.thr_u <= t1)
}

/// Smallest equalizer position `i ∈ [1, ir]` making `phi` a unifier of the
/// given flavor, or `None`.
pub fn unifier_position(f: Flavor, phi: &PhasePredicate, facts: &RoundFacts) -> Option<usize> {
    if !unifier_round_one_clause(f, phi, facts) {
        return None;
    }
    let ir = facts.ir();
    (1..=ir).find(|&i| {
        equalizer_as(f, i, phi)
            && (2..=i).all(|j| !preserving_as(f, j, phi, facts))
            && (i + 1..=ir).all(|j| solo_safe_as(f, j, phi, facts))
    })
}

pub fn is_unifier(phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    unifier_position(Flavor::PLAIN, phi, facts).is_some()
}

pub fn is_strong_unifier(phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    unifier_position(Flavor::STRONG, phi, facts).is_some()
}

pub fn is_c_unifier(phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    unifier_position(Flavor::C, phi, facts).is_some()
}

pub fn is_strong_c_unifier(phi: &PhasePredicate, facts: &RoundFacts) -> bool {
    unifier_position(Flavor::STRONG_C, phi, facts).is_some()
}

/// One evaluated constant inequality `lhs ≥ rhs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConstantCheck {
    pub lhs_name: String,
    pub lhs: Rat,
    pub rhs_name: String,
    pub rhs: Rat,
    pub holds: bool,
}

impl ConstantCheck {
    fn new(lhs_name: &str, lhs: Rat, rhs_name: &str, rhs: Rat) -> Self {
        ConstantCheck { lhs_name: lhs_name.into(), lhs, rhs_name: rhs_name.into(), rhs, holds: lhs >= rhs }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SafetyReport {
    pub violations: Vec<Reason>,
    pub constants: Vec<ConstantCheck>,
}

fn structure_common(facts: &RoundFacts) -> Vec<Reason> {
    let mut v = Vec::new();
    if !facts.round(1).has_mult {
        v.push(Reason::MissingMultRound1);
    }
    for r in facts.rounds() {
        if !r.has_uni {
            v.push(Reason::MissingUniRound(r.index));
        }
    }
    v
}

fn constants(facts: &RoundFacts, halve_mult: bool) -> Vec<ConstantCheck> {
    let r1 = facts.round(1);
    let next = facts.round(facts.ir() + 1);
    let (Some(u1), Some(m1), Some(un)) = (r1.thr_u.value(), r1.thr_m_min.value(), next.thr_u.value()) else {
        return Vec::new();
    };
    let rhs = Rat::one() - un;
    let rhs_name = "1−thr_u^{ir+1}";
    let first = if halve_mult {
        ConstantCheck::new("thr_m^{1,k}/2", m1 / Rat::from_int(2), rhs_name, rhs)
    } else {
        ConstantCheck::new("thr_m^{1,k}", m1, rhs_name, rhs)
    };
    vec![first, ConstantCheck::new("thr_u^1", u1, rhs_name, rhs)]
}

/// Items of syntactic safety (core and coordinator fragments).
pub fn is_syntactically_safe(alg: &Algorithm, facts: &RoundFacts) -> SafetyReport {
    let mut violations = structure_common(facts);
    let round1_not_smor = alg.round(1).instructions().iter().any(|i| i.guard == Guard::Mult && i.op != Operation::Smor);
    if round1_not_smor {
        violations.push(Reason::Round1MultNotSmor);
    }
    let constants = constants(facts, true);
    if constants.iter().any(|c| !c.holds) {
        violations.push(Reason::ConstantsViolation);
    }
    SafetyReport { violations, constants }
}

/// Items of syntactic t-safety (timestamp fragments).
pub fn is_t_safe(_alg: &Algorithm, facts: &RoundFacts) -> SafetyReport {
    let mut violations = structure_common(facts);
    let constants = constants(facts, false);
    if constants.iter().any(|c| !c.holds) {
        violations.push(Reason::ConstantsViolation);
    }
    SafetyReport { violations, constants }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Instruction, PhaseEntry, Round};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(n, d).unwrap()
    }

    fn one_third(t1: Rat, t2: Rat) -> Algorithm {
        Algorithm::new(
            "ot",
            vec![
                Round::new(
                    1,
                    RoundType::Every,
                    vec![
                        Instruction::uni(t1, Operation::Smor).unwrap(),
                        Instruction::mult(t1, Operation::Smor).unwrap(),
                    ],
                    true,
                    false,
                ),
                Round::new(2, RoundType::Every, vec![Instruction::uni(t2, Operation::Smor).unwrap()], false, true),
            ],
            false,
        )
        .unwrap()
    }

    fn pred(e: &[PhaseEntry]) -> PhasePredicate {
        PhasePredicate::new(e.to_vec())
    }

    #[test]
    fn facts_of_one_third() {
        let f = round_facts(&one_third(r(2, 3), r(2, 3)));
        let r1 = f.round(1);
        assert_eq!((r1.thr_u, r1.thr_m_min), (Threshold::Present(r(2, 3)), Threshold::Present(r(2, 3))));
        assert_eq!(f.round(2).thr_m_min, Threshold::Absent);
        assert!(!f.round(2).has_mult);
    }

    #[test]
    fn border_threshold_values() {
        let b = |u, m| {
            let alg = Algorithm::new(
                "b",
                vec![
                    Round::new(
                        1,
                        RoundType::Every,
                        vec![
                            Instruction::uni(u, Operation::Smor).unwrap(),
                            Instruction::mult(m, Operation::Smor).unwrap(),
                        ],
                        true,
                        false,
                    ),
                    Round::new(2, RoundType::Every, vec![Instruction::uni(u, Operation::Smor).unwrap()], false, true),
                ],
                false,
            )
            .unwrap();
            border_threshold(&round_facts(&alg)).unwrap().value
        };
        assert_eq!(b(r(2, 3), r(2, 3)), r(2, 3));
        assert_eq!(b(r(1, 2), r(1, 2)), r(3, 4));
        assert_eq!(b(r(9, 10), r(9, 10)), r(11, 20));
    }

    #[test]
    fn preserving_and_solo_safe_examples() {
        let f = round_facts(&one_third(r(2, 3), r(2, 3)));
        let p = |t: Threshold| pred(&[PhaseEntry { thr: t, ..PhaseEntry::TRUE }, PhaseEntry::TRUE]);
        assert!(!is_preserving(1, &p(Threshold::Present(r(2, 3))), &f));
        assert!(is_preserving(1, &p(Threshold::Present(r(1, 2))), &f));
        assert!(is_preserving(2, &p(Threshold::Present(r(9, 10))), &f));
        assert!(is_solo_safe(1, &p(Threshold::Present(r(2, 3))), &f));
        assert!(!is_solo_safe(1, &p(Threshold::Absent), &f));
    }

    #[test]
    fn one_third_unifier_and_decider() {
        let f = round_facts(&one_third(r(2, 3), r(2, 3)));
        let t = r(2, 3);
        let phi1 = pred(&[PhaseEntry::eq_thr(t), PhaseEntry::TRUE]);
        let phi2 = pred(&[PhaseEntry::thr(t), PhaseEntry::thr(t)]);
        assert_eq!(unifier_position(Flavor::PLAIN, &phi1, &f), Some(1));
        assert!(is_decider(&phi2, &f));
        assert!(!is_decider(&phi1, &f));
        assert!(!is_decider(&pred(&[PhaseEntry::thr(t), PhaseEntry::TRUE]), &f));
        let weak = pred(&[PhaseEntry::eq_thr(r(1, 3)), PhaseEntry::TRUE]);
        assert!(!is_unifier(&weak, &f));
    }

    #[test]
    fn constants_of_one_third() {
        let alg = one_third(r(2, 3), r(2, 3));
        assert!(is_syntactically_safe(&alg, &round_facts(&alg)).violations.is_empty());
        let bad = one_third(r(1, 2), r(2, 3));
        let rep = is_syntactically_safe(&bad, &round_facts(&bad));
        assert_eq!(rep.violations, vec![Reason::ConstantsViolation]);
        assert_eq!((rep.constants[0].lhs, rep.constants[0].rhs), (r(1, 4), r(1, 3)));
        let ok = one_third(r(1, 2), r(3, 4));
        assert!(is_syntactically_safe(&ok, &round_facts(&ok)).violations.is_empty());
    }

    fn grid() -> impl Strategy<Value = Rat> {
        prop::sample::select(vec![r(0, 1), r(1, 4), r(1, 3), r(1, 2), r(3, 5), r(2, 3), r(3, 4), r(4, 5), r(9, 10)])
    }

    fn entry() -> impl Strategy<Value = PhaseEntry> {
        (any::<bool>(), prop::option::of(grid())).prop_map(|(eq, t)| PhaseEntry {
            has_eq: eq,
            has_ls: false,
            thr: t.map_or(Threshold::Absent, Threshold::Present),
        })
    }

    proptest! {
        #[test]
        fn border_exceeds_half(u in grid(), m in grid()) {
            let alg = Algorithm::new("b", vec![
                Round::new(1, RoundType::Every, vec![Instruction::uni(u, Operation::Smor).unwrap(), Instruction::mult(m, Operation::Smor).unwrap()], true, false),
                Round::new(2, RoundType::Every, vec![Instruction::uni(u, Operation::Smor).unwrap()], false, true),
            ], false).unwrap();
            prop_assert!(border_threshold(&round_facts(&alg)).unwrap().value > Rat::half());
        }

        #[test]
        fn strengthening_keeps_deciders(t1 in grid(), t2 in grid(), a in entry(), b in entry(), c in entry(), d in entry()) {
            let f = round_facts(&one_third(t1, t2));
            let phi = pred(&[a, b]);
            let stronger = pred(&[a.and(&c), b.and(&d)]);
            if is_decider(&phi, &f) {
                prop_assert!(is_decider(&stronger, &f));
            }
        }

        #[test]
        fn flavor_implications(t1 in grid(), t2 in grid(), a in entry(), b in entry()) {
            let f = round_facts(&one_third(t1, t2));
            let phi = pred(&[a, b]);
            if is_strong_unifier(&phi, &f) {
                prop_assert!(is_unifier(&phi, &f));
            }
            if is_unifier(&phi, &f) {
                prop_assert!(is_c_unifier(&phi, &f));
            }
            for pf in predicate_facts(&phi, &f) {
                prop_assert!(!pf.equalizer || pf.c_equalizer);
            }
        }
    }
}
