//! Rewrites an instance into the shape the characterization theorems assume.
//!
//! Every rewrite is semantics-preserving for the executions it can affect and
//! is logged in a [`NormReport`].

use std::fmt;

use serde::Serialize;

use crate::classify::{c_variants, is_preserving, round_facts};
use crate::model::{
    Algorithm, CommSpec, Fragment, Guard, Instance, Instruction, PhasePredicate, Rat, Reason, RoundType, Threshold,
};
use crate::sim::mixed_output_reachable;

/// Largest process count tried when deciding whether a proviso-violating
/// mult instruction can fire.
pub const PROVISO_SEARCH_N: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RewriteRule {
    ReorderInstructions,
    DropDominated,
    StrengthenSporadic,
    PruneDeadMult,
    RaiseThreshold,
    RemoveUnfiredMult,
    RaiseIrUniThreshold,
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string tag"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Rewrite {
    pub rule: RewriteRule,
    /// 1-based round, or sporadic index for [`RewriteRule::StrengthenSporadic`].
    pub at: usize,
    pub detail: String,
}

impl fmt::Display for Rewrite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} @{}: {}", self.rule, self.at, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormReport {
    pub rewrites: Vec<Rewrite>,
    pub violations: Vec<Reason>,
    pub fragment: Fragment,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Normalized {
    pub instance: Instance,
    pub report: NormReport,
}

fn show(ins: &[Instruction]) -> String {
    let parts: Vec<String> =
        ins.iter().map(|i| format!("{:?} {} {:?}", i.guard, i.threshold, i.op).to_lowercase()).collect();
    format!("[{}]", parts.join(", "))
}

/// Operation chosen by first-match for a size just above `t`, per guard.
fn pick(ins: &[Instruction], g: Guard, t: Rat) -> Option<Instruction> {
    ins.iter().find(|i| i.guard == g && i.threshold <= t).copied()
}

/// `true` when both lists compute the same update function.
///
/// Only the first matching instruction of each guard matters, all uni
/// operations agree on single-valued multisets, and first-match is constant
/// between consecutive thresholds.
fn same_update(a: &[Instruction], b: &[Instruction]) -> bool {
    let mut points: Vec<Rat> = a.iter().chain(b).map(|i| i.threshold).collect();
    points.sort();
    points.dedup();
    points.iter().all(|&t| {
        let uni = pick(a, Guard::Uni, t).is_some() == pick(b, Guard::Uni, t).is_some();
        let mult = pick(a, Guard::Mult, t).map(|i| i.op) == pick(b, Guard::Mult, t).map(|i| i.op);
        uni && mult
    })
}

/// Drops every instruction whose guard already appeared with a threshold no
/// larger: it can never be the first match.
fn drop_dominated(ins: &[Instruction]) -> Vec<Instruction> {
    let mut out: Vec<Instruction> = Vec::new();
    for i in ins {
        if !out.iter().any(|o| o.guard == i.guard && o.threshold <= i.threshold) {
            out.push(*i);
        }
    }
    out
}

fn canonical_round(ins: &[Instruction]) -> Vec<Instruction> {
    let mut uni: Vec<Instruction> = ins.iter().filter(|i| i.guard == Guard::Uni).copied().collect();
    uni.sort_by_key(|i| i.threshold);
    uni.truncate(1);
    let mut mult: Vec<Instruction> = ins.iter().filter(|i| i.guard == Guard::Mult).copied().collect();
    mult.sort_by_key(|m| std::cmp::Reverse(m.threshold));
    mult.dedup_by(|later, earlier| later.threshold == earlier.threshold);
    uni.extend(mult);
    uni
}

fn canonicalize_logged(alg: &Algorithm) -> (Algorithm, Vec<Rewrite>) {
    let mut log = Vec::new();
    let per_round: Vec<Vec<Instruction>> = alg
        .rounds()
        .iter()
        .map(|r| {
            let src = r.instructions();
            let sorted = canonical_round(src);
            let (out, rule) = if same_update(src, &sorted) {
                (sorted, RewriteRule::ReorderInstructions)
            } else {
                // Once dominated lines are gone, same-guard thresholds strictly
                // decrease, so sorting no longer changes any first match.
                let kept = canonical_round(&drop_dominated(src));
                (kept, RewriteRule::DropDominated)
            };
            debug_assert!(same_update(src, &out));
            if out != src {
                log.push(Rewrite { rule, at: r.index(), detail: format!("{} -> {}", show(src), show(&out)) });
            }
            out
        })
        .collect();
    let out = alg.with_instructions(per_round).expect("reordering keeps a valid algorithm");
    (out, log)
}

/// At most one uni instruction first, then mult instructions by
/// non-increasing threshold; first-match results are unchanged.
pub fn canonicalize_rounds(alg: &Algorithm) -> Algorithm {
    canonicalize_logged(alg).0
}

fn strengthen_logged(spec: &CommSpec) -> (CommSpec, Vec<Rewrite>) {
    let g = spec.global();
    let mut log = Vec::new();
    let sporadics = spec
        .sporadics()
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let t = s.and(g);
            if &t != s {
                log.push(Rewrite {
                    rule: RewriteRule::StrengthenSporadic,
                    at: k + 1,
                    detail: "conjoined with global".into(),
                });
            }
            t
        })
        .collect();
    (CommSpec::new(g.clone(), sporadics), log)
}

/// Replaces each sporadic predicate by its conjunction with the global one.
pub fn strengthen_sporadics(spec: &CommSpec) -> CommSpec {
    strengthen_logged(spec).0
}

/// Rounds `1..i` are plain rounds, non-preserving under `global`, so no `?`
/// reaches round `i` from a `?`-free start.
fn undef_free_at(alg: &Algorithm, global: &PhasePredicate, i: usize) -> bool {
    let facts = round_facts(alg);
    (1..i).all(|j| alg.round(j).rtype() == RoundType::Every && !is_preserving(j, global, &facts))
}

fn prune_logged(alg: &Algorithm, global: &PhasePredicate) -> (Algorithm, Vec<Rewrite>) {
    let mut log = Vec::new();
    let per_round = alg
        .rounds()
        .iter()
        .map(|r| {
            let i = r.index();
            let src = r.instructions().to_vec();
            let Threshold::Present(g) = global.thr(i) else {
                return src;
            };
            if r.rtype() != RoundType::Every || !undef_free_at(alg, global, i) {
                return src;
            }
            // Every admissible H is ?-free with more than g·n entries, so the
            // size test of any instruction at or below g always passes.
            let mut out = Vec::new();
            let mut covered = false;
            for ins in src.iter().copied() {
                if ins.guard == Guard::Mult && covered {
                    log.push(Rewrite {
                        rule: RewriteRule::PruneDeadMult,
                        at: i,
                        detail: format!("mult {} {:?} never fires above {g}", ins.threshold, ins.op).to_lowercase(),
                    });
                    continue;
                }
                let mut ins = ins;
                if ins.guard == Guard::Mult && ins.threshold <= g {
                    covered = true;
                }
                if ins.threshold < g {
                    log.push(Rewrite {
                        rule: RewriteRule::RaiseThreshold,
                        at: i,
                        detail: format!("{:?} {} -> {g}", ins.guard, ins.threshold).to_lowercase(),
                    });
                    ins.threshold = g;
                }
                out.push(ins);
            }
            out
        })
        .collect();
    (alg.with_instructions(per_round).expect("pruning keeps a valid algorithm"), log)
}

/// Removes mult instructions that can never fire under `global` and lifts
/// thresholds below `thr_i(global)` to it, where no `?` can reach round `i`.
pub fn prune_dead_mults(alg: &Algorithm, global: &PhasePredicate) -> Algorithm {
    prune_logged(alg, global).0
}

fn assumption_one(alg: &Algorithm, global: &PhasePredicate, coord: bool) -> Vec<Reason> {
    let facts = round_facts(alg);
    let mut out = Vec::new();
    for i in 1..=alg.num_rounds() {
        let earlier_fixed = (1..i).all(|j| {
            if coord {
                !c_variants(j, global, &facts).c_preserving
            } else {
                !is_preserving(j, global, &facts)
            }
        });
        let r = facts.round(i);
        if !earlier_fixed || r.rtype == RoundType::LeaderSend {
            continue;
        }
        let g = global.thr(i);
        let uni_ok = !r.has_uni || r.thr_u >= g;
        let mult_ok = !r.has_mult || r.thr_m_min >= g;
        if !(uni_ok && mult_ok) {
            out.push(Reason::Assumption1(i));
        }
    }
    out
}

fn without_mults(alg: &Algorithm, i: usize) -> Vec<Vec<Instruction>> {
    alg.rounds()
        .iter()
        .map(|r| {
            let ins = r.instructions().iter().copied();
            if r.index() == i {
                ins.filter(|x| x.guard == Guard::Uni).collect()
            } else {
                ins.collect()
            }
        })
        .collect()
}

/// Checks (and where licensed, repairs) the provisos of `fragment`.
///
/// Returns the possibly rewritten algorithm and the report.
pub fn validate_provisos(alg: &Algorithm, spec: &CommSpec, fragment: Fragment) -> (Algorithm, NormReport) {
    let global = spec.global();
    let mut alg = alg.clone();
    let mut rewrites = Vec::new();
    let mut violations = Vec::new();
    if global.has_equalizer() {
        violations.push(Reason::GlobalEqualizer);
    } else if fragment.coordinators() && global.has_c_equalizer() {
        violations.push(Reason::GlobalCEqualizer);
    }
    let ir = alg.ir();
    if alg.round(ir + 1).has_guard(Guard::Mult) {
        if mixed_output_reachable(&alg, global, ir, PROVISO_SEARCH_N) {
            violations.push(Reason::MultAfterIr);
        } else {
            alg = alg.with_instructions(without_mults(&alg, ir + 1)).expect("removing mults keeps validity");
            rewrites.push(Rewrite {
                rule: RewriteRule::RemoveUnfiredMult,
                at: ir + 1,
                detail: format!(
                    "round {ir} never outputs both values under the global predicate (n <= {PROVISO_SEARCH_N})"
                ),
            });
        }
    }
    if fragment.timestamps() {
        let half = Rat::half();
        let facts = round_facts(&alg);
        let r = facts.round(ir);
        let low_uni = r.thr_u < Threshold::Present(half);
        if r.has_mult || low_uni {
            let harmless = ir > 1 && !mixed_output_reachable(&alg, global, ir - 1, PROVISO_SEARCH_N);
            if harmless {
                if r.has_mult {
                    alg = alg.with_instructions(without_mults(&alg, ir)).expect("removing mults keeps validity");
                    rewrites.push(Rewrite {
                        rule: RewriteRule::RemoveUnfiredMult,
                        at: ir,
                        detail: format!("round {} never outputs both values under the global predicate", ir - 1),
                    });
                }
                if low_uni && r.has_uni {
                    let per_round = alg
                        .rounds()
                        .iter()
                        .map(|x| {
                            x.instructions()
                                .iter()
                                .map(|ins| {
                                    let mut ins = *ins;
                                    if x.index() == ir && ins.guard == Guard::Uni && ins.threshold < half {
                                        ins.threshold = half;
                                    }
                                    ins
                                })
                                .collect()
                        })
                        .collect();
                    alg = alg.with_instructions(per_round).expect("raising a threshold keeps validity");
                    rewrites.push(Rewrite {
                        rule: RewriteRule::RaiseIrUniThreshold,
                        at: ir,
                        detail: format!("thr_u^{ir} {} -> 1/2", r.thr_u),
                    });
                }
            } else {
                violations.push(Reason::TsIrProviso);
            }
        }
    }
    violations.extend(assumption_one(&alg, global, fragment.coordinators()));
    (alg, NormReport { rewrites, violations, fragment })
}

/// Full pipeline with the detected fragment.
pub fn normalize(inst: &Instance) -> Normalized {
    normalize_as(inst, inst.alg().fragment())
}

/// Full pipeline, checking provisos of `fragment`.
pub fn normalize_as(inst: &Instance, fragment: Fragment) -> Normalized {
    let (alg, mut rewrites) = canonicalize_logged(inst.alg());
    let (spec, log) = strengthen_logged(inst.spec());
    rewrites.extend(log);
    let (alg, log) = prune_logged(&alg, spec.global());
    rewrites.extend(log);
    let (alg, mut report) = validate_provisos(&alg, &spec, fragment);
    rewrites.append(&mut report.rewrites);
    report.rewrites = rewrites;
    let detected = inst.alg().fragment();
    if !detected.admits_override(fragment) {
        report.violations.insert(0, Reason::FragmentOverride);
    }
    let instance = Instance::new(alg, spec).expect("normalization keeps arity and atom placement");
    Normalized { instance, report }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;
    use crate::model::{Operation, PhaseEntry, Round};
    use crate::sim::{fire_set, RoundCounts};
    use proptest::prelude::*;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(n, d).unwrap()
    }

    fn uni(t: Rat, op: Operation) -> Instruction {
        Instruction::uni(t, op).unwrap()
    }

    fn mult(t: Rat, op: Operation) -> Instruction {
        Instruction::mult(t, op).unwrap()
    }

    fn two_rounds(first: Vec<Instruction>) -> Algorithm {
        Algorithm::new(
            "t",
            vec![
                Round::new(1, RoundType::Every, first, true, false),
                Round::new(2, RoundType::Every, vec![uni(r(2, 3), Operation::Smor)], false, true),
            ],
            false,
        )
        .unwrap()
    }

    fn pools(n: usize, with_undef: bool) -> Vec<RoundCounts> {
        let mut out = Vec::new();
        for a in 0..=n {
            for b in 0..=n - a {
                let q = n - a - b;
                if with_undef || q == 0 {
                    out.push(RoundCounts::abq(a, b, q));
                }
            }
        }
        out
    }

    fn entries() -> Vec<PhaseEntry> {
        let mut v = vec![PhaseEntry::TRUE];
        for (n, d) in [(1, 3), (1, 2), (2, 3), (3, 4)] {
            v.push(PhaseEntry::thr(r(n, d)));
        }
        v
    }

    fn same_fire_sets(a: &[Instruction], b: &[Instruction], with_undef: bool, only: Option<PhaseEntry>) -> bool {
        (2..=6).all(|n| {
            pools(n, with_undef).iter().all(|p| {
                let es = only.map_or_else(entries, |e| vec![e]);
                es.iter().all(|e| {
                    let x: Vec<_> = fire_set(a, p, e, n).into_keys().collect();
                    let y: Vec<_> = fire_set(b, p, e, n).into_keys().collect();
                    x == y
                })
            })
        })
    }

    #[test]
    fn reorder_examples() {
        let a = two_rounds(vec![mult(r(1, 2), Operation::Smor), uni(r(2, 3), Operation::Smor)]);
        assert_eq!(
            canonicalize_rounds(&a).round(1).instructions(),
            &[uni(r(2, 3), Operation::Smor), mult(r(1, 2), Operation::Smor)]
        );
        let b = two_rounds(vec![uni(r(2, 3), Operation::Min), mult(r(1, 2), Operation::Smor)]);
        assert_eq!(canonicalize_rounds(&b), b);
        let c = two_rounds(vec![mult(r(1, 3), Operation::Smor), mult(r(2, 3), Operation::Smor)]);
        assert_eq!(
            canonicalize_rounds(&c).round(1).instructions(),
            &[mult(r(2, 3), Operation::Smor), mult(r(1, 3), Operation::Smor)]
        );
    }

    #[test]
    fn mixed_ops_keep_order() {
        // [mult 1/3 min, mult 2/3 smor]: the smor line is dominated.
        let a = two_rounds(vec![mult(r(1, 3), Operation::Min), mult(r(2, 3), Operation::Smor)]);
        let (c, log) = canonicalize_logged(&a);
        assert_eq!(c.round(1).instructions(), &[mult(r(1, 3), Operation::Min)]);
        assert_eq!(log[0].rule, RewriteRule::DropDominated);
    }

    #[test]
    fn strengthen_examples() {
        let g = PhasePredicate::new(vec![PhaseEntry::thr(r(1, 3)), PhaseEntry::TRUE]);
        let s = PhasePredicate::new(vec![PhaseEntry { has_eq: true, ..PhaseEntry::TRUE }, PhaseEntry::thr(r(2, 3))]);
        let out = strengthen_sporadics(&CommSpec::new(g.clone(), vec![s]));
        assert_eq!(out.sporadics()[0].entry(1), &PhaseEntry::eq_thr(r(1, 3)));
        assert_eq!(out.sporadics()[0].entry(2), &PhaseEntry::thr(r(2, 3)));
        let g = PhasePredicate::new(vec![PhaseEntry::thr(r(1, 2)), PhaseEntry::TRUE]);
        let s = PhasePredicate::new(vec![PhaseEntry::thr(r(1, 3)), PhaseEntry::TRUE]);
        assert_eq!(strengthen_sporadics(&CommSpec::new(g, vec![s])).sporadics()[0].thr(1), Threshold::Present(r(1, 2)));
    }

    #[test]
    fn prune_example() {
        let a = two_rounds(vec![
            uni(r(2, 3), Operation::Smor),
            mult(r(2, 3), Operation::Smor),
            mult(r(1, 3), Operation::Smor),
        ]);
        let g = PhasePredicate::new(vec![PhaseEntry::thr(r(1, 2)), PhaseEntry::TRUE]);
        let p = prune_dead_mults(&a, &g);
        assert_eq!(
            p.round(1).instructions(),
            &[uni(r(2, 3), Operation::Smor), mult(r(2, 3), Operation::Smor), mult(r(1, 2), Operation::Smor)]
        );
        assert!(same_fire_sets(a.round(1).instructions(), p.round(1).instructions(), false, Some(*g.entry(1))));
        let three = two_rounds(vec![
            mult(r(3, 4), Operation::Min),
            mult(r(1, 2), Operation::Smor),
            mult(r(1, 3), Operation::Smor),
        ]);
        let p = prune_dead_mults(&three, &g);
        assert_eq!(p.round(1).instructions(), &[mult(r(3, 4), Operation::Min), mult(r(1, 2), Operation::Smor)]);
        let trivial = PhasePredicate::trivial(2);
        assert_eq!(prune_dead_mults(&a, &trivial), a);
    }

    #[test]
    fn provisos_on_corpus_shapes() {
        let ot = parse(include_str!("../../../corpus/onethird-2-3.ho")).unwrap();
        let n = normalize(&ot);
        assert!(n.report.violations.is_empty());
        assert!(n.report.rewrites.is_empty());
        let eq = parse(include_str!("../../../corpus/onethird-global-eq.ho")).unwrap();
        assert_eq!(normalize(&eq).report.violations, vec![Reason::GlobalEqualizer]);
        let paxos = parse(include_str!("../../../corpus/paxos-4round.ho")).unwrap();
        let n = normalize(&paxos);
        assert!(n.report.violations.is_empty(), "{:?}", n.report);
        assert!(n.report.rewrites.iter().any(|w| w.rule == RewriteRule::RaiseIrUniThreshold && w.at == 2));
    }

    #[test]
    fn mult_after_ir() {
        // OneThird with a mult in round 2: round 1 can output both values.
        let text = include_str!("../../../corpus/onethird-2-3.ho").replace(
            "if uni(H) && |H| > 2/3 then dec := smor(H);",
            "if uni(H) && |H| > 2/3 then dec := smor(H);\n    if mult(H) && |H| > 2/3 then dec := smor(H);",
        );
        let inst = parse(&text).unwrap();
        assert_eq!(normalize(&inst).report.violations, vec![Reason::MultAfterIr]);
    }

    #[test]
    fn unfired_mult_after_ir_removed() {
        // Round 1 has only a uni line at the global threshold, so it never
        // outputs both values.
        let text = r#"
algorithm "u" {
  round 1 {
    send (inp);
    if uni(H) && |H| > 1/2 then x1 := inp := smor(H);
  }
  round 2 {
    send x1;
    if uni(H) && |H| > 1/2 then dec := smor(H);
    if mult(H) && |H| > 1/2 then dec := smor(H);
  }
}
predicate {
  global: (thr 1/2, true);
}
"#;
        let n = normalize(&parse(text).unwrap());
        assert!(n.report.violations.is_empty(), "{:?}", n.report);
        assert!(!n.instance.alg().round(2).has_guard(Guard::Mult));
    }

    #[test]
    fn override_rules() {
        let ot = parse(include_str!("../../../corpus/onethird-2-3.ho")).unwrap();
        assert!(normalize_as(&ot, Fragment::Coord).report.violations.is_empty());
        assert_eq!(normalize_as(&ot, Fragment::Ts).report.violations[0], Reason::FragmentOverride);
    }

    fn arb_rat() -> impl Strategy<Value = Rat> {
        (0i64..6).prop_map(|k| Rat::new(k, 6).unwrap())
    }

    fn arb_instr() -> impl Strategy<Value = Instruction> {
        (any::<bool>(), arb_rat(), 0usize..2).prop_map(|(u, t, op)| {
            let op = [Operation::Min, Operation::Smor][op];
            if u {
                uni(t, op)
            } else {
                mult(t, op)
            }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn canonicalize_preserves_fire_sets(ins in prop::collection::vec(arb_instr(), 1..5)) {
            let a = two_rounds(ins);
            let c = canonicalize_rounds(&a);
            prop_assert!(same_fire_sets(a.round(1).instructions(), c.round(1).instructions(), true, None));
        }

        #[test]
        fn prune_preserves_undef_free_fire_sets(ins in prop::collection::vec(arb_instr(), 1..5), g in arb_rat()) {
            let a = canonicalize_rounds(&two_rounds(ins));
            let phi = PhasePredicate::new(vec![PhaseEntry::thr(g), PhaseEntry::TRUE]);
            let p = prune_dead_mults(&a, &phi);
            prop_assert!(same_fire_sets(a.round(1).instructions(), p.round(1).instructions(), false, Some(*phi.entry(1))));
        }

        #[test]
        fn normalize_is_idempotent(ins in prop::collection::vec(arb_instr(), 1..5), g in arb_rat(), s in arb_rat()) {
            let a = two_rounds(ins);
            let global = PhasePredicate::new(vec![PhaseEntry::thr(g), PhaseEntry::TRUE]);
            let sp = PhasePredicate::new(vec![PhaseEntry::eq_thr(s), PhaseEntry::thr(s)]);
            let inst = Instance::new(a, CommSpec::new(global, vec![sp])).unwrap();
            let once = normalize(&inst);
            let twice = normalize(&once.instance);
            prop_assert_eq!(&once.instance, &twice.instance);
        }

        #[test]
        fn strengthened_implies_global(g in arb_rat(), s in arb_rat(), eq in any::<bool>()) {
            let global = PhasePredicate::new(vec![PhaseEntry::thr(g), PhaseEntry::TRUE]);
            let sp = PhasePredicate::new(vec![PhaseEntry { has_eq: eq, ..PhaseEntry::thr(s) }, PhaseEntry::TRUE]);
            let out = strengthen_sporadics(&CommSpec::new(global.clone(), vec![sp.clone()]));
            prop_assert!(out.sporadics()[0].implies(&global));
            prop_assert!(out.sporadics()[0].implies(&sp));
        }
    }
}
