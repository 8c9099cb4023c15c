use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::phase::{apply_flows, PhaseStep};
use super::round::{round_successors, update_value};
use super::{AbstractConfig, Value};
use crate::model::{Instance, PhasePredicate, RoundType, Threshold};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    AgreementViolation,
    NonTerminationLasso,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessPhase {
    /// `global`, `sporadic 2`, or `sporadic 1+2` for a phase meeting both.
    pub predicate: String,
    pub entries: PhasePredicate,
    pub from: AbstractConfig,
    pub step: PhaseStep,
}

impl WitnessPhase {
    pub(crate) fn retag(mut step: PhaseStep, index: usize) -> PhaseStep {
        step.to.sporadic_index = index;
        step
    }
}

/// A counterexample trace over abstract configurations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub schema_version: u32,
    pub kind: WitnessKind,
    pub algorithm: String,
    pub n: usize,
    pub phases: Vec<WitnessPhase>,
    /// Index of the first phase of the repeated cycle, for lassos.
    pub loop_start: Option<usize>,
    pub final_state: AbstractConfig,
}

impl Witness {
    pub(crate) fn new(
        kind: WitnessKind,
        inst: &Instance,
        n: usize,
        phases: Vec<WitnessPhase>,
        loop_start: Option<usize>,
    ) -> Self {
        let final_state = phases.last().map(|p| p.step.to.clone()).expect("witnesses have at least one phase");
        Witness {
            schema_version: 1,
            kind,
            algorithm: inst.alg().name().to_string(),
            n,
            phases,
            loop_start,
            final_state,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("witness serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReplayError> {
        serde_json::from_str(text).map_err(|e| ReplayError(format!("cannot read witness: {e}")))
    }

    /// Human-readable trace.
    pub fn summary(&self) -> String {
        let mut s = format!("{:?} for {} at n = {}\n", self.kind, self.algorithm, self.n);
        for (k, p) in self.phases.iter().enumerate() {
            if self.loop_start == Some(k) {
                s.push_str("  -- loop starts here --\n");
            }
            let outs: Vec<String> = p.step.rounds.iter().map(|r| r.output.to_string()).collect();
            s.push_str(&format!("  phase {} [{}] {} -> {}\n", k + 1, p.predicate, p.from, p.step.to));
            s.push_str(&format!("    rounds: {}\n", outs.join(" | ")));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("witness does not replay: {0}")]
pub struct ReplayError(pub String);

fn fail<T>(msg: impl Into<String>) -> Result<T, ReplayError> {
    Err(ReplayError(msg.into()))
}

fn expected_predicate(inst: &Instance, s: usize, t: usize) -> Option<PhasePredicate> {
    let spec = inst.spec();
    if s == t {
        return Some(spec.global().clone());
    }
    if t < s || t > spec.sporadics().len() {
        return None;
    }
    let mut p = spec.sporadics()[s].clone();
    for q in &spec.sporadics()[s + 1..t] {
        p = p.and(q);
    }
    Some(p)
}

/// Re-executes every recorded choice of `w` against `inst`.
pub fn replay(inst: &Instance, w: &Witness) -> Result<(), ReplayError> {
    let alg = inst.alg();
    let n = w.n;
    let Some(first) = w.phases.first() else {
        return fail("no phases");
    };
    let initial = AbstractConfig::initial(n);
    if !initial.contains(&first.from.with_index(0)) || first.from.sporadic_index != 0 {
        return fail("trace does not start in an initial configuration");
    }
    let mut cur = first.from.clone();
    for (k, ph) in w.phases.iter().enumerate() {
        let tag = format!("phase {}", k + 1);
        if ph.from != cur {
            return fail(format!("{tag}: starts in {} but previous phase ended in {cur}", ph.from));
        }
        let (s, t) = (ph.from.sporadic_index, ph.step.to.sporadic_index);
        match expected_predicate(inst, s, t) {
            Some(p) if p == ph.entries => {}
            _ => return fail(format!("{tag}: predicate does not match sporadic progress {s} -> {t}")),
        }
        if ph.step.rounds.len() != alg.num_rounds() {
            return fail(format!("{tag}: wrong number of rounds"));
        }
        let mut pool = ph.from.round_one_pool(alg.timestamps());
        for (i0, rs) in ph.step.rounds.iter().enumerate() {
            let i = i0 + 1;
            let entry = ph.entries.entry(i);
            let options = round_successors(alg, i, &pool, entry, n);
            if !options.iter().any(|o| o.output == rs.output) {
                return fail(format!("{tag}, round {i}: output {} is not a successor of {pool}", rs.output));
            }
            if alg.round(i).rtype() != RoundType::LeaderSend {
                for (v, h) in &rs.heard {
                    let size_ok = match entry.thr {
                        Threshold::Absent => true,
                        Threshold::Present(t) => t.exceeded_by(h.total(), n),
                    };
                    if !h.is_sub_of(&pool) || !size_ok || update_value(alg.round(i).instructions(), h, n) != *v {
                        return fail(format!("{tag}, round {i}: heard-of multiset {h} does not yield {v}"));
                    }
                }
            }
            pool = rs.output.clone();
        }
        let ir_out = ph.step.rounds[alg.ir() - 1].output.plain();
        let last_out = ph.step.rounds[alg.num_rounds() - 1].output.plain();
        let margin =
            |f: &dyn Fn(&super::Flow) -> bool| ph.step.flows.iter().filter(|x| f(x)).map(|x| x.count).sum::<usize>();
        for (p, c) in &ph.from.counts {
            if margin(&|x| x.from == *p) != *c {
                return fail(format!("{tag}: flows do not cover the class {p:?}"));
            }
        }
        if ph.step.flows.iter().any(|x| !ph.from.counts.iter().any(|(p, _)| *p == x.from)) {
            return fail(format!("{tag}: flow from a missing class"));
        }
        for v in [Value::A, Value::B, Value::Undef] {
            if margin(&|x| x.v_ir == v) != ir_out.count_value(v) || margin(&|x| x.v_r == v) != last_out.count_value(v) {
                return fail(format!("{tag}: flows disagree with round outputs on {v}"));
            }
        }
        let to = apply_flows(alg, &ph.from, &ph.step.flows).with_index(t);
        if to != ph.step.to {
            return fail(format!("{tag}: flows lead to {to}, not {}", ph.step.to));
        }
        cur = to;
    }
    if cur != w.final_state {
        return fail("final state does not match");
    }
    match w.kind {
        WitnessKind::AgreementViolation => {
            if !cur.disagrees() {
                return fail("final state has no conflicting decisions");
            }
        }
        WitnessKind::NonTerminationLasso => {
            let Some(l) = w.loop_start else {
                return fail("lasso without loop start");
            };
            if l >= w.phases.len() || w.phases[l].from != cur {
                return fail("cycle does not close");
            }
            let k = inst.spec().sporadics().len();
            if cur.sporadic_index != k || w.phases[l..].iter().any(|p| p.predicate != "global") {
                return fail("cycle must use the global predicate after all sporadic predicates");
            }
            if cur.all_decided() {
                return fail("every process decided on the cycle");
            }
        }
    }
    Ok(())
}
