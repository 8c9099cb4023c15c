use std::collections::{BTreeSet, HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::phase::{phase_successors, phase_successors_detailed};
use super::round::round_successors;
use super::witness::{Witness, WitnessKind, WitnessPhase};
use super::{AbstractConfig, Msg, RoundCounts, Value};
use crate::model::{Algorithm, Instance, PhasePredicate};

/// Exploration bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub n: usize,
    /// Longest explored prefix, in phases; `None` explores to a fixpoint.
    pub max_phases: Option<usize>,
}

impl Bounds {
    pub fn new(n: usize) -> Self {
        Bounds { n, max_phases: None }
    }

    pub fn with_depth(n: usize, depth: usize) -> Self {
        Bounds { n, max_phases: Some(depth) }
    }

    fn allows(&self, depth: usize) -> bool {
        self.max_phases.is_none_or(|m| depth < m)
    }
}

struct Node {
    cfg: AbstractConfig,
    parent: Option<usize>,
    depth: usize,
}

/// Predicate used to move from sporadic index `s` to `t`.
fn predicate_between(inst: &Instance, s: usize, t: usize) -> (String, PhasePredicate) {
    let spec = inst.spec();
    if s == t {
        return ("global".into(), spec.global().clone());
    }
    let mut p = spec.sporadics()[s].clone();
    for q in &spec.sporadics()[s + 1..t] {
        p = p.and(q);
    }
    let label = if t == s + 1 {
        format!("sporadic {}", s + 1)
    } else {
        let ids: Vec<String> = (s + 1..=t).map(|i| i.to_string()).collect();
        format!("sporadic {}", ids.join("+"))
    };
    (label, p)
}

fn explain_steps(inst: &Instance, path: &[AbstractConfig]) -> Vec<WitnessPhase> {
    path.windows(2)
        .map(|w| {
            let (label, phi) = predicate_between(inst, w[0].sporadic_index, w[1].sporadic_index);
            let succ = phase_successors_detailed(inst.alg(), &w[0], &phi);
            let step =
                succ.get(&w[1].with_index(w[0].sporadic_index)).cloned().expect("witness step is a recorded successor");
            WitnessPhase {
                predicate: label,
                entries: phi,
                from: w[0].clone(),
                step: WitnessPhase::retag(step, w[1].sporadic_index),
            }
        })
        .collect()
}

fn path_to(nodes: &[Node], mut k: usize) -> Vec<AbstractConfig> {
    let mut path = vec![nodes[k].cfg.clone()];
    while let Some(p) = nodes[k].parent {
        path.push(nodes[p].cfg.clone());
        k = p;
    }
    path.reverse();
    path
}

/// Breadth-first search under the global predicate for a configuration in
/// which two processes decided differently.
pub fn check_agreement(inst: &Instance, bounds: Bounds) -> Option<Witness> {
    let alg = inst.alg();
    let global = inst.spec().global();
    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashMap<AbstractConfig, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    for c in AbstractConfig::initial(bounds.n) {
        seen.insert(c.clone(), nodes.len());
        queue.push_back(nodes.len());
        nodes.push(Node { cfg: c, parent: None, depth: 0 });
    }
    while let Some(k) = queue.pop_front() {
        if !bounds.allows(nodes[k].depth) {
            continue;
        }
        let cfg = nodes[k].cfg.clone();
        for next in phase_successors(alg, &cfg, global) {
            if seen.contains_key(&next) {
                continue;
            }
            let id = nodes.len();
            seen.insert(next.clone(), id);
            let bad = next.disagrees();
            nodes.push(Node { cfg: next, parent: Some(k), depth: nodes[k].depth + 1 });
            if bad {
                let path = path_to(&nodes, id);
                return Some(Witness::new(
                    WitnessKind::AgreementViolation,
                    inst,
                    bounds.n,
                    explain_steps(inst, &path),
                    None,
                ));
            }
            queue.push_back(id);
        }
    }
    None
}

/// Search for an execution that consumes every sporadic predicate in order
/// and then cycles under the global predicate with some process undecided.
pub fn check_termination(inst: &Instance, bounds: Bounds) -> Option<Witness> {
    let alg = inst.alg();
    let spec = inst.spec();
    let k = spec.sporadics().len();
    let mut nodes: Vec<Node> = Vec::new();
    let mut seen: HashMap<AbstractConfig, usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut level_k_edges: Vec<(usize, usize)> = Vec::new();
    for c in AbstractConfig::initial(bounds.n) {
        let c = c.with_index(0);
        seen.insert(c.clone(), nodes.len());
        queue.push_back(nodes.len());
        nodes.push(Node { cfg: c, parent: None, depth: 0 });
    }
    while let Some(id) = queue.pop_front() {
        let s = nodes[id].cfg.sporadic_index;
        if s < k && !bounds.allows(nodes[id].depth) {
            continue;
        }
        let cfg = nodes[id].cfg.clone();
        for t in s..=k {
            let (_, phi) = predicate_between(inst, s, t);
            for next in phase_successors(alg, &cfg, &phi) {
                let next = next.with_index(t);
                let to = match seen.get(&next) {
                    Some(&j) => j,
                    None => {
                        let j = nodes.len();
                        seen.insert(next.clone(), j);
                        nodes.push(Node { cfg: next, parent: Some(id), depth: nodes[id].depth + 1 });
                        queue.push_back(j);
                        j
                    }
                };
                if s == k && t == k {
                    level_k_edges.push((id, to));
                }
            }
        }
    }
    let mut g: DiGraph<usize, ()> = DiGraph::new();
    let mut index: HashMap<usize, NodeIndex> = HashMap::new();
    let mut node_of = |g: &mut DiGraph<usize, ()>, id: usize| *index.entry(id).or_insert_with(|| g.add_node(id));
    for &(a, b) in &level_k_edges {
        let (na, nb) = (node_of(&mut g, a), node_of(&mut g, b));
        g.add_edge(na, nb, ());
    }
    let mut best: Option<(usize, Vec<NodeIndex>)> = None;
    for scc in tarjan_scc(&g) {
        let cyclic = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
        if !cyclic {
            continue;
        }
        for &v in &scc {
            let id = g[v];
            if !nodes[id].cfg.all_decided() && best.as_ref().is_none_or(|(b, _)| id < *b) {
                best = Some((id, scc.clone()));
            }
        }
    }
    let (start, scc) = best?;
    let stem = path_to(&nodes, start);
    let members: BTreeSet<usize> = scc.iter().map(|v| g[*v]).collect();
    let cycle = shortest_cycle(&g, &nodes, start, &members);
    let mut path = stem.clone();
    path.extend(cycle.into_iter().skip(1));
    let loop_start = stem.len() - 1;
    Some(Witness::new(WitnessKind::NonTerminationLasso, inst, bounds.n, explain_steps(inst, &path), Some(loop_start)))
}

fn shortest_cycle(
    g: &DiGraph<usize, ()>,
    nodes: &[Node],
    start: usize,
    members: &BTreeSet<usize>,
) -> Vec<AbstractConfig> {
    let by_id: HashMap<usize, NodeIndex> = g.node_indices().map(|v| (g[v], v)).collect();
    let mut parent: HashMap<usize, usize> = HashMap::new();
    let mut queue = VecDeque::from([start]);
    let mut found = false;
    'bfs: while let Some(u) = queue.pop_front() {
        let mut succ: Vec<usize> = g.neighbors(by_id[&u]).map(|v| g[v]).filter(|v| members.contains(v)).collect();
        succ.sort();
        succ.dedup();
        for v in succ {
            if v == start {
                parent.insert(usize::MAX, u);
                found = true;
                break 'bfs;
            }
            if let std::collections::hash_map::Entry::Vacant(e) = parent.entry(v) {
                e.insert(u);
                queue.push_back(v);
            }
        }
    }
    assert!(found, "a cyclic component contains a cycle through each member");
    let mut ids = vec![start];
    let mut cur = parent[&usize::MAX];
    while cur != start {
        ids.push(cur);
        cur = parent[&cur];
    }
    ids.push(start);
    ids.reverse();
    ids.into_iter().map(|i| nodes[i].cfg.clone()).collect()
}

/// Every round-1 pool over values `a`, `b` with contiguous timestamp ranks.
fn all_round_one_pools(n: usize, timestamps: bool) -> Vec<RoundCounts> {
    let mut out = Vec::new();
    if !timestamps {
        for nb in 0..=n {
            out.push(RoundCounts::abq(n - nb, nb, 0));
        }
        return out;
    }
    // label each process class by (value, rank); ranks 0..m all used
    let mut classes: Vec<Msg> = Vec::new();
    for m in 1..=n {
        classes.clear();
        for r in 0..m as u8 {
            classes.push(Msg { value: Value::A, rank: r });
            classes.push(Msg { value: Value::B, rank: r });
        }
        let mut cur = vec![0usize; classes.len()];
        fn rec(k: usize, left: usize, m: usize, classes: &[Msg], cur: &mut Vec<usize>, out: &mut Vec<RoundCounts>) {
            if k == classes.len() {
                if left == 0 && (0..m).all(|r| cur[2 * r] + cur[2 * r + 1] > 0) {
                    let map = classes.iter().copied().zip(cur.iter().copied()).collect();
                    out.push(RoundCounts::from_map(map));
                }
                return;
            }
            for c in 0..=left {
                cur[k] = c;
                rec(k + 1, left - c, m, classes, cur, out);
            }
            cur[k] = 0;
        }
        rec(0, n, m, &classes, &mut cur, &mut out);
    }
    out
}

/// Whether some start pool lets round `upto` output both `a` and `b` under
/// `phi`, for some process count in `2..=max_n`.
pub fn mixed_output_reachable(alg: &Algorithm, phi: &PhasePredicate, upto: usize, max_n: usize) -> bool {
    (2..=max_n).any(|n| {
        let mut pools: BTreeSet<RoundCounts> = all_round_one_pools(n, alg.timestamps()).into_iter().collect();
        for i in 1..=upto {
            let mut next = BTreeSet::new();
            for p in &pools {
                for s in round_successors(alg, i, p, phi.entry(i), n) {
                    next.insert(s.output);
                }
            }
            pools = next;
        }
        pools.iter().any(|p| p.count_value(Value::A) > 0 && p.count_value(Value::B) > 0)
    })
}

/// Configurations reachable in exactly `d` phases under `phi`, for `d = 0..=depth`.
pub fn reachable_layers(
    alg: &Algorithm,
    phi: &PhasePredicate,
    n: usize,
    depth: usize,
) -> Vec<BTreeSet<AbstractConfig>> {
    let mut layers = vec![AbstractConfig::initial(n).into_iter().collect::<BTreeSet<_>>()];
    for _ in 0..depth {
        let mut next = BTreeSet::new();
        for c in layers.last().unwrap() {
            next.extend(phase_successors(alg, c, phi));
        }
        layers.push(next);
    }
    layers
}
