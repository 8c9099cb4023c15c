//! Theorem dispatch: structural conditions plus condition T and its
//! strong/coordinator variants, with an explanation trace.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use crate::classify::{
    border_threshold, is_decider_as, is_syntactically_safe, is_t_safe, predicate_facts, round_facts, unifier_position,
    unifier_round_one_clause, ConstantCheck, Flavor, RoundFacts, RoundPredicateFacts,
};
use crate::dsl::pretty_predicate;
use crate::model::{Fragment, Instance, Outcome, PhasePredicate, Rat, Reason, ReasonKind, RoundType, Verdict};
use crate::normalize::{normalize_as, Rewrite};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Which structural definition was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    SyntacticSafety,
    TSafety,
}

/// Name of the existential condition checked per fragment.
pub fn condition_name(f: Fragment) -> &'static str {
    match f {
        Fragment::Core => "T",
        Fragment::Ts => "sT",
        Fragment::Coord => "cT",
        Fragment::TsCoord => "scT",
    }
}

fn flavor(f: Fragment) -> (Flavor, Flavor) {
    let unifier = Flavor { strong: f.timestamps(), coord: f.coordinators() };
    let decider = Flavor { strong: false, coord: f.coordinators() };
    (unifier, decider)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PredicateTrace {
    /// 1-based sporadic index.
    pub index: usize,
    pub predicate: String,
    pub rounds: Vec<RoundPredicateFacts>,
    pub round_one_clause: bool,
    /// Equalizer position making this predicate a unifier.
    pub unifier_at: Option<usize>,
    pub decider: bool,
}

/// What the simulator should look for when confirming a rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessRequest {
    Agreement,
    Termination,
    Either,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TheoremTrace {
    pub algorithm: String,
    pub detected_fragment: Fragment,
    pub fragment: Fragment,
    pub condition: &'static str,
    pub outcome: Outcome,
    pub reasons: Vec<Reason>,
    pub rewrites: Vec<Rewrite>,
    /// `None` when provisos already put the instance out of the fragment.
    pub structure: Option<Structure>,
    pub structural_violations: Vec<Reason>,
    pub constants: Vec<ConstantCheck>,
    pub border_threshold: Option<Rat>,
    pub predicates: Vec<PredicateTrace>,
    pub witness_pair: Option<(usize, usize)>,
    pub witness_request: Option<WitnessRequest>,
}

fn coord_items(inst: &Instance) -> Vec<Reason> {
    let alg = inst.alg();
    let mut v = Vec::new();
    if alg.round(1).rtype() == RoundType::LeaderSend {
        v.push(Reason::LsFirstRound);
    }
    if alg.round(alg.ir() + 1).rtype() == RoundType::LeaderSend {
        v.push(Reason::LsAfterIr);
    }
    v
}

fn predicate_trace(k: usize, phi: &PhasePredicate, facts: &RoundFacts, fragment: Fragment) -> PredicateTrace {
    let (u, d) = flavor(fragment);
    PredicateTrace {
        index: k + 1,
        predicate: pretty_predicate(phi),
        rounds: predicate_facts(phi, facts),
        round_one_clause: unifier_round_one_clause(u, phi, facts),
        unifier_at: unifier_position(u, phi, facts),
        decider: is_decider_as(d, phi, facts),
    }
}

/// Lexicographically smallest `(i, j)`, `i ≤ j`, with a unifier at `i` and
/// a decider at `j`.
pub fn witness_pair(predicates: &[PredicateTrace]) -> Option<(usize, usize)> {
    predicates
        .iter()
        .filter(|p| p.unifier_at.is_some())
        .find_map(|u| predicates.iter().find(|d| d.index >= u.index && d.decider).map(|d| (u.index, d.index)))
}

fn condition_reason(predicates: &[PredicateTrace]) -> Option<Reason> {
    let any_u = predicates.iter().any(|p| p.unifier_at.is_some());
    let any_d = predicates.iter().any(|p| p.decider);
    match (any_u, any_d) {
        (false, _) => Some(Reason::NoUnifier),
        (true, false) => Some(Reason::NoDecider),
        (true, true) if witness_pair(predicates).is_none() => Some(Reason::NoDeciderAfterUnifier),
        _ => None,
    }
}

fn request(reasons: &[Reason]) -> Option<WitnessRequest> {
    let kinds: Vec<ReasonKind> = reasons.iter().map(Reason::kind).filter(|k| *k != ReasonKind::Fragment).collect();
    if kinds.is_empty() {
        None
    } else if kinds.contains(&ReasonKind::Agreement) {
        Some(WitnessRequest::Agreement)
    } else if kinds.iter().all(|k| *k == ReasonKind::Termination) {
        Some(WitnessRequest::Termination)
    } else {
        Some(WitnessRequest::Either)
    }
}

/// Checks `inst` under its detected fragment.
pub fn check_consensus(inst: &Instance) -> (Verdict, TheoremTrace) {
    check_consensus_as(inst, None)
}

/// Checks `inst`, optionally under an overriding fragment.
pub fn check_consensus_as(inst: &Instance, fragment: Option<Fragment>) -> (Verdict, TheoremTrace) {
    let detected = inst.alg().fragment();
    let fragment = fragment.unwrap_or(detected);
    let norm = normalize_as(inst, fragment);
    let ninst = &norm.instance;
    let alg = ninst.alg();
    let facts = round_facts(alg);
    let mut trace = TheoremTrace {
        algorithm: alg.name().to_string(),
        detected_fragment: detected,
        fragment,
        condition: condition_name(fragment),
        outcome: Outcome::Accept,
        reasons: Vec::new(),
        rewrites: norm.report.rewrites.clone(),
        structure: None,
        structural_violations: Vec::new(),
        constants: Vec::new(),
        border_threshold: border_threshold(&facts).map(|b| b.value),
        predicates: Vec::new(),
        witness_pair: None,
        witness_request: None,
    };
    let (out_of, rejecting): (Vec<Reason>, Vec<Reason>) =
        norm.report.violations.iter().cloned().partition(|r| r.kind() == ReasonKind::Fragment);
    if let Some(v) = Verdict::out_of_fragment(out_of) {
        trace.outcome = v.outcome();
        trace.reasons = v.reasons().to_vec();
        return (v, trace);
    }
    let mut reasons = rejecting;
    if fragment.coordinators() {
        reasons.extend(coord_items(ninst));
    }
    let safety = if fragment.timestamps() {
        trace.structure = Some(Structure::TSafety);
        is_t_safe(alg, &facts)
    } else {
        trace.structure = Some(Structure::SyntacticSafety);
        is_syntactically_safe(alg, &facts)
    };
    reasons.extend(safety.violations.iter().cloned());
    trace.structural_violations = safety.violations;
    trace.constants = safety.constants;
    trace.predicates =
        ninst.spec().sporadics().iter().enumerate().map(|(k, p)| predicate_trace(k, p, &facts, fragment)).collect();
    trace.witness_pair = witness_pair(&trace.predicates);
    reasons.extend(condition_reason(&trace.predicates));
    let verdict = Verdict::reject(reasons).unwrap_or_else(Verdict::accept);
    trace.outcome = verdict.outcome();
    trace.reasons = verdict.reasons().to_vec();
    trace.witness_request = request(&trace.reasons);
    if !verdict.is_accept() {
        trace.witness_pair = None;
    }
    (verdict, trace)
}

/// Versioned machine-readable report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub algorithm: String,
    pub verdict: Outcome,
    pub fragment: Fragment,
    pub reasons: Vec<Reason>,
    pub witness_pair: Option<[usize; 2]>,
    pub constants: BTreeMap<String, Rat>,
    pub rewrites: Vec<Rewrite>,
}

impl Report {
    pub fn from_trace(t: &TheoremTrace) -> Self {
        let mut constants = BTreeMap::new();
        if let Some(b) = t.border_threshold {
            constants.insert("border_threshold".to_string(), b);
        }
        for c in &t.constants {
            constants.insert(c.lhs_name.clone(), c.lhs);
            constants.insert(c.rhs_name.clone(), c.rhs);
        }
        Report {
            schema_version: REPORT_SCHEMA_VERSION,
            algorithm: t.algorithm.clone(),
            verdict: t.outcome,
            fragment: t.fragment,
            reasons: t.reasons.clone(),
            witness_pair: t.witness_pair.map(|(i, j)| [i, j]),
            constants,
            rewrites: t.rewrites.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn proviso_text(r: &Reason) -> String {
    match r {
        Reason::GlobalEqualizer => "Proviso 1: the global predicate has an equalizer".into(),
        Reason::GlobalCEqualizer => "Proviso 1 (coordinator form): the global predicate has a c-equalizer".into(),
        Reason::MultAfterIr => "Proviso 1: round ir+1 has a mult instruction that can fire".into(),
        Reason::TsIrProviso => "Proviso 2: round ir has a mult instruction or thr_u^ir < 1/2, and it matters".into(),
        Reason::Assumption1(i) => {
            format!("Assumption 1: round {i} has a threshold below thr_{i} of the global predicate")
        }
        Reason::FragmentOverride => "the requested fragment does not contain the algorithm".into(),
        other => other.to_string(),
    }
}

/// Deterministic human-readable account of a trace.
pub fn explain(t: &TheoremTrace) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "algorithm: {}", t.algorithm);
    if t.fragment == t.detected_fragment {
        let _ = writeln!(s, "fragment: {}", t.fragment);
    } else {
        let _ = writeln!(s, "fragment: {} (detected {})", t.fragment, t.detected_fragment);
    }
    for w in &t.rewrites {
        let _ = writeln!(s, "rewrite: {w}");
    }
    if t.outcome == Outcome::OutOfFragment {
        for r in &t.reasons {
            let _ = writeln!(s, "out of fragment: {}", proviso_text(r));
        }
        let _ = writeln!(s, "verdict: {}", t.outcome);
        return s;
    }
    for r in t.reasons.iter().filter(|r| matches!(r, Reason::MultAfterIr | Reason::TsIrProviso)) {
        let _ = writeln!(s, "proviso violated: {}", proviso_text(r));
    }
    let name = match t.structure {
        Some(Structure::TSafety) => "syntactically t-safe",
        _ => "syntactically safe",
    };
    let _ = writeln!(s, "{name}: {}", yes(t.structural_violations.is_empty()));
    for r in &t.structural_violations {
        let _ = writeln!(s, "  failed: {r}");
    }
    for c in &t.constants {
        let rel = if c.holds { ">=" } else { "<" };
        let _ = writeln!(s, "  {} = {} {rel} {} = {}", c.lhs_name, c.lhs, c.rhs, c.rhs_name);
    }
    for r in t.reasons.iter().filter(|r| matches!(r, Reason::LsFirstRound | Reason::LsAfterIr)) {
        let _ = writeln!(s, "  failed: {r}");
    }
    match t.border_threshold {
        Some(b) => {
            let _ = writeln!(s, "border threshold: max(1−thr_u^1, 1−thr_m^{{1,k}}/2) = {b}");
        }
        None => {
            let _ = writeln!(s, "border threshold: undefined (round 1 lacks uni or mult)");
        }
    }
    let (uname, dname) = match t.fragment {
        Fragment::Core => ("unifier", "decider"),
        Fragment::Ts => ("strong unifier", "decider"),
        Fragment::Coord => ("c-unifier", "c-decider"),
        Fragment::TsCoord => ("strong c-unifier", "c-decider"),
    };
    for p in &t.predicates {
        let u = match p.unifier_at {
            Some(i) => format!("yes (equalizer in round {i})"),
            None if !p.round_one_clause => "no (round-1 threshold clause fails)".into(),
            None => "no".into(),
        };
        let _ = writeln!(s, "φ^{} = {}: {uname}: {u}; {dname}: {}", p.index, p.predicate, yes(p.decider));
    }
    match t.witness_pair {
        Some((i, j)) => {
            let _ = writeln!(s, "condition {}: {uname}: φ^{i}, {dname}: φ^{j}", t.condition);
        }
        None => {
            let why = t
                .reasons
                .iter()
                .find(|r| matches!(r, Reason::NoUnifier | Reason::NoDecider | Reason::NoDeciderAfterUnifier))
                .map_or_else(|| "holds, but structure fails".to_string(), |r| format!("fails ({r})"));
            let _ = writeln!(s, "condition {}: {why}", t.condition);
        }
    }
    let _ = writeln!(s, "verdict: {}", t.outcome);
    if !t.reasons.is_empty() {
        let codes: Vec<String> = t.reasons.iter().map(Reason::code).collect();
        let _ = writeln!(s, "reasons: {}", codes.join(", "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::model::{CommSpec, PhaseEntry};
    use proptest::prelude::*;

    fn load(name: &str) -> Instance {
        let path = format!("{}/../../corpus/{name}.ho", env!("CARGO_MANIFEST_DIR"));
        parse(&std::fs::read_to_string(path).unwrap()).unwrap()
    }

    #[test]
    fn one_third_goldens() {
        let (v, t) = check_consensus(&load("onethird-2-3"));
        assert!(v.is_accept());
        assert_eq!(t.witness_pair, Some((1, 2)));
        let text = explain(&t);
        assert!(text.contains("unifier: φ^1"), "{text}");
        assert!(text.contains("= 2/3"), "{text}");
        assert!(check_consensus(&load("onethird-1-2_3-4")).0.is_accept());
        let (v, t) = check_consensus(&load("onethird-1-2_2-3"));
        assert_eq!(v.reasons(), &[Reason::ConstantsViolation]);
        assert!(explain(&t).contains("thr_m^{1,k}/2 = 1/4 < 1/3 = 1−thr_u^{ir+1}"), "{}", explain(&t));
        assert_eq!(t.witness_request, Some(WitnessRequest::Agreement));
    }

    #[test]
    fn reordered_sporadics() {
        let (v, _) = check_consensus(&load("onethird-reordered"));
        assert_eq!(v.reasons(), &[Reason::NoDeciderAfterUnifier]);
    }

    #[test]
    fn global_equalizer_is_out_of_fragment() {
        let (v, t) = check_consensus(&load("onethird-global-eq"));
        assert_eq!(v.outcome(), Outcome::OutOfFragment);
        assert!(explain(&t).contains("Proviso 1"));
    }

    #[test]
    fn paxos_uses_sct() {
        let (v, t) = check_consensus(&load("paxos-4round"));
        assert!(v.is_accept(), "{}", explain(&t));
        assert_eq!(t.condition, "scT");
        assert_eq!(t.structure, Some(Structure::TSafety));
        assert_eq!(t.witness_pair, Some((1, 1)));
    }

    #[test]
    fn dispatch_tags() {
        let (_, t) = check_consensus(&load("onethird-2-3"));
        assert_eq!((t.condition, t.structure), ("T", Some(Structure::SyntacticSafety)));
        let (_, t) = check_consensus(&load("ts-three-round"));
        assert_eq!((t.condition, t.structure), ("sT", Some(Structure::TSafety)));
        let (_, t) = check_consensus(&load("coord-3round"));
        assert_eq!((t.condition, t.structure), ("cT", Some(Structure::SyntacticSafety)));
        let (v, _) = check_consensus_as(&load("onethird-2-3"), Some(Fragment::Ts));
        assert_eq!(v.reasons(), &[Reason::FragmentOverride]);
        let (v, t) = check_consensus_as(&load("onethird-2-3"), Some(Fragment::Coord));
        assert!(v.is_accept());
        assert_eq!(t.condition, "cT");
    }

    #[test]
    fn mutations_reject() {
        for (name, reason) in [
            ("onethird-no-uni-round2", Reason::MissingUniRound(2)),
            ("onethird-no-mult-round1", Reason::MissingMultRound1),
            ("onethird-min-round1", Reason::Round1MultNotSmor),
            ("onethird-unifier-only", Reason::NoDecider),
        ] {
            let (v, _) = check_consensus(&load(name));
            assert_eq!(v.outcome(), Outcome::Reject, "{name}");
            assert!(v.reasons().contains(&reason), "{name}: {:?}", v.reasons());
        }
    }

    #[test]
    fn report_is_deterministic() {
        let a = Report::from_trace(&check_consensus(&load("onethird-1-2_2-3")).1).to_json();
        let b = Report::from_trace(&check_consensus(&load("onethird-1-2_2-3")).1).to_json();
        assert_eq!(a, b);
        let v: serde_json::Value = serde_json::from_str(&a).unwrap();
        assert_eq!(v["verdict"], "reject");
        assert_eq!(v["reasons"][0], "ConstantsViolation");
        assert_eq!(v["constants"]["border_threshold"], "3/4");
        assert!(v["witness_pair"].is_null());
    }

    fn arb_entry() -> impl Strategy<Value = PhaseEntry> {
        (any::<bool>(), prop::option::of(0i64..6)).prop_map(|(eq, t)| match t {
            Some(k) => PhaseEntry { has_eq: eq, ..PhaseEntry::thr(Rat::new(k, 6).unwrap()) },
            None => PhaseEntry { has_eq: eq, ..PhaseEntry::TRUE },
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn witness_pair_is_lexicographic_minimum(
            preds in prop::collection::vec((arb_entry(), arb_entry()), 1..5),
        ) {
            let base = load("onethird-2-3");
            let sporadics = preds.into_iter().map(|(a, b)| PhasePredicate::new(vec![a, b])).collect();
            let inst = Instance::new(base.alg().clone(), CommSpec::new(PhasePredicate::trivial(2), sporadics)).unwrap();
            let (v, t) = check_consensus(&inst);
            let ps = &t.predicates;
            let mut brute = None;
            'outer: for i in 0..ps.len() {
                for j in i..ps.len() {
                    if ps[i].unifier_at.is_some() && ps[j].decider {
                        brute = Some((i + 1, j + 1));
                        break 'outer;
                    }
                }
            }
            if v.is_accept() {
                prop_assert_eq!(t.witness_pair, brute);
            } else {
                prop_assert!(t.witness_pair.is_none());
            }
            prop_assert_eq!(v.is_accept(), brute.is_some());
        }
    }
}
