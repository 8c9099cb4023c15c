use std::collections::BTreeSet;

use hoc::corpus::{self, CorpusEntry};
use hoc::model::{Instance, PhasePredicate};
use hoc::sim::{
    check_agreement, check_termination, explicit, phase_successors, reachable_layers, replay, AbstractConfig, Bounds,
    Profile, Value, WitnessKind,
};
use proptest::prelude::*;

fn inst(id: &str) -> Instance {
    corpus::find(id).unwrap().instance().unwrap()
}

fn bundled() -> &'static [CorpusEntry] {
    corpus::bundled()
}

#[test]
fn accepted_onethird_has_no_counterexample() {
    let i = inst("onethird-2-3");
    assert!(check_agreement(&i, Bounds::new(6)).is_none());
    assert!(check_termination(&i, Bounds::new(4)).is_none());
}

#[test]
fn min_in_round_one_breaks_agreement() {
    let i = inst("onethird-min-round1");
    let w = check_agreement(&i, Bounds::new(6)).expect("witness");
    assert_eq!(w.kind, WitnessKind::AgreementViolation);
    assert!(w.final_state.disagrees());
    replay(&i, &w).unwrap();
}

#[test]
fn missing_mult_loops_at_spread() {
    let i = inst("onethird-no-mult-round1");
    let w = check_termination(&i, Bounds::new(4)).expect("lasso");
    assert_eq!(w.kind, WitnessKind::NonTerminationLasso);
    replay(&i, &w).unwrap();
    // an even split under the global predicate can repeat forever
    let p = |inp| Profile { inp, ts_rank: 0, dec: Value::Undef };
    let spread = AbstractConfig::normalized(4, [(p(Value::A), 2), (p(Value::B), 2)], 0);
    assert!(phase_successors(i.alg(), &spread, i.spec().global()).contains(&spread));
}

#[test]
fn unifier_without_decider_loops_at_solo() {
    let i = inst("onethird-unifier-only");
    let w = check_termination(&i, Bounds::new(4)).expect("lasso");
    replay(&i, &w).unwrap();
    let start = w.loop_start.unwrap();
    assert!(w.phases[start..].iter().all(|p| !p.from.all_decided()));
    let solo = AbstractConfig::normalized(4, [(Profile { inp: Value::B, ts_rank: 0, dec: Value::Undef }, 4)], 0);
    assert!(phase_successors(i.alg(), &solo, i.spec().global()).contains(&solo));
}

#[test]
fn witnesses_replay_for_every_rejection() {
    for e in bundled().iter().filter(|e| e.expected == hoc::model::Outcome::Reject) {
        let i = e.instance().unwrap();
        let b = Bounds::new(4);
        if let Some(w) = check_agreement(&i, b).or_else(|| check_termination(&i, b)) {
            replay(&i, &w).unwrap_or_else(|err| panic!("{}: {err}", e.id));
            let back = hoc::sim::Witness::from_json(&w.to_json()).unwrap();
            assert_eq!(back, w);
        }
    }
}

#[test]
fn accepted_corpus_entries_have_no_counterexample_at_four() {
    for e in bundled().iter().filter(|e| e.expected == hoc::model::Outcome::Accept) {
        let i = e.instance().unwrap();
        let b = Bounds::new(4);
        assert!(check_agreement(&i, b).is_none(), "{}", e.id);
        assert!(check_termination(&i, b).is_none(), "{}", e.id);
    }
}

#[test]
fn engines_agree_on_decision_sets() {
    let i = inst("onethird-2-3");
    for phi in std::iter::once(i.spec().global()).chain(i.spec().sporadics()) {
        let ex = explicit::reachable_layers(i.alg(), phi, 3, 3).unwrap();
        let ct = reachable_layers(i.alg(), phi, 3, 3);
        let dec = |l: &BTreeSet<AbstractConfig>| l.iter().map(AbstractConfig::dec_counts).collect::<BTreeSet<_>>();
        for d in 0..=3 {
            assert_eq!(dec(&ex[d]), dec(&ct[d]), "depth {d}");
        }
    }
}

#[test]
fn explicit_equalizer_is_uniform() {
    let i = inst("onethird-2-3");
    let phi = &i.spec().sporadics()[0];
    for s in explicit::initial_states(3) {
        for next in explicit::successors(i.alg(), &s, phi, 1) {
            let inps: BTreeSet<Value> = next.iter().map(|p| p.inp).collect();
            assert_eq!(inps.len(), 1, "{next:?}");
        }
    }
}

fn walk(inst: &Instance, n: usize, choices: &[usize]) -> Vec<AbstractConfig> {
    let preds: Vec<&PhasePredicate> = std::iter::once(inst.spec().global()).chain(inst.spec().sporadics()).collect();
    let init = AbstractConfig::initial(n);
    let mut cur = init[choices[0] % init.len()].clone();
    let mut path = vec![cur.clone()];
    for w in choices[1..].chunks(2) {
        let phi = preds[w[0] % preds.len()];
        let succ = phase_successors(inst.alg(), &cur, phi);
        cur = succ[w[1] % succ.len()].clone();
        path.push(cur.clone());
    }
    path
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dec_is_monotone_and_inp_total(k in 0usize..18, n in 2usize..=5, choices in proptest::collection::vec(0usize..1000, 9)) {
        let e = &bundled()[k % bundled().len()];
        let i = e.instance().unwrap();
        let path = walk(&i, n, &choices);
        for c in &path {
            prop_assert!(c.counts.iter().all(|(p, _)| !p.inp.is_undef()));
            prop_assert_eq!(c.counts.iter().map(|x| x.1).sum::<usize>(), n);
        }
        for w in path.windows(2) {
            for v in [Value::A, Value::B] {
                prop_assert!(w[1].decided(v) >= w[0].decided(v), "{}: {} -> {}", e.id, w[0], w[1]);
            }
        }
    }
}
