use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::round::round_successors;
use super::{AbstractConfig, Profile, RoundCounts, RoundStep, Value};
use crate::model::{Algorithm, PhasePredicate};

/// Number of processes that start the phase in `from`, compute `v_ir` in
/// round ir and `v_r` in the last round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Flow {
    pub from: Profile,
    pub v_ir: Value,
    pub v_r: Value,
    pub count: usize,
}

/// How one phase transition is realized.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseStep {
    pub rounds: Vec<RoundStep>,
    pub flows: Vec<Flow>,
    pub to: AbstractConfig,
}

/// Every non-negative integer matrix with the given row and column sums.
pub(crate) fn tables(rows: &[usize], cols: &[usize]) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut cur = vec![vec![0; cols.len()]; rows.len()];
    let mut left = cols.to_vec();
    fn row(
        i: usize,
        j: usize,
        rest: usize,
        rows: &[usize],
        left: &mut Vec<usize>,
        cur: &mut Vec<Vec<usize>>,
        out: &mut Vec<Vec<Vec<usize>>>,
    ) {
        if i == rows.len() {
            if left.iter().all(|c| *c == 0) {
                out.push(cur.clone());
            }
            return;
        }
        if j + 1 == left.len() {
            if rest <= left[j] {
                cur[i][j] = rest;
                left[j] -= rest;
                let next = rows.get(i + 1).copied().unwrap_or(0);
                row(i + 1, 0, next, rows, left, cur, out);
                left[j] += rest;
                cur[i][j] = 0;
            }
            return;
        }
        for c in 0..=rest.min(left[j]) {
            cur[i][j] = c;
            left[j] -= c;
            row(i, j + 1, rest - c, rows, left, cur, out);
            left[j] += c;
        }
        cur[i][j] = 0;
    }
    if cols.is_empty() {
        if rows.iter().all(|r| *r == 0) {
            out.push(cur);
        }
        return out;
    }
    let first = rows.first().copied().unwrap_or(0);
    row(0, 0, first, rows, &mut left, &mut cur, &mut out);
    out
}

fn value_margin(v: &RoundCounts) -> Vec<(Value, usize)> {
    let plain = v.plain();
    plain.0.iter().map(|(m, c)| (m.value, *c)).collect()
}

/// Joint assignments of round-ir and last-round values to process classes.
fn flows(cfg: &AbstractConfig, v_ir: &RoundCounts, v_r: &RoundCounts) -> Vec<Vec<Flow>> {
    let irm = value_margin(v_ir);
    let rm = value_margin(v_r);
    let rows: Vec<usize> = cfg.counts.iter().map(|(_, c)| *c).collect();
    let cols: Vec<usize> = irm.iter().map(|(_, c)| *c).collect();
    let mut stage1: Vec<Vec<(Profile, Value, usize)>> = tables(&rows, &cols)
        .into_iter()
        .map(|t| {
            let mut cells = Vec::new();
            for (k, (p, _)) in cfg.counts.iter().enumerate() {
                for (j, (v, _)) in irm.iter().enumerate() {
                    if t[k][j] > 0 {
                        cells.push((*p, *v, t[k][j]));
                    }
                }
            }
            cells
        })
        .collect();
    stage1.sort();
    stage1.dedup();
    let mut out = Vec::new();
    let cols2: Vec<usize> = rm.iter().map(|(_, c)| *c).collect();
    for cells in stage1 {
        let rows2: Vec<usize> = cells.iter().map(|c| c.2).collect();
        for t in tables(&rows2, &cols2) {
            let mut fl = Vec::new();
            for (k, (p, vi, _)) in cells.iter().enumerate() {
                for (j, (vr, _)) in rm.iter().enumerate() {
                    if t[k][j] > 0 {
                        fl.push(Flow { from: *p, v_ir: *vi, v_r: *vr, count: t[k][j] });
                    }
                }
            }
            out.push(fl);
        }
    }
    out
}

/// Configuration reached by a given flow table.
pub(crate) fn apply_flows(alg: &Algorithm, cfg: &AbstractConfig, fl: &[Flow]) -> AbstractConfig {
    let fresh = cfg.counts.iter().map(|(p, _)| p.ts_rank).max().unwrap_or(0).saturating_add(1);
    let raw = fl.iter().map(|f| {
        let mut p = f.from;
        if !f.v_ir.is_undef() {
            p.inp = f.v_ir;
            p.ts_rank = if alg.timestamps() { fresh } else { 0 };
        }
        if p.dec.is_undef() {
            p.dec = f.v_r;
        }
        (p, f.count)
    });
    AbstractConfig::normalized(cfg.n, raw, cfg.sporadic_index)
}

/// Round-by-round composition; keyed by (round-ir vector, last vector).
fn round_paths(
    a: &Algorithm,
    cfg: &AbstractConfig,
    phi: &PhasePredicate,
) -> BTreeMap<(RoundCounts, RoundCounts), Vec<RoundStep>> {
    let n = cfg.n;
    let ir = a.ir();
    type Key = (Option<RoundCounts>, RoundCounts);
    let mut states: BTreeMap<Key, Vec<RoundStep>> = BTreeMap::new();
    states.insert((None, cfg.round_one_pool(a.timestamps())), Vec::new());
    for i in 1..=a.num_rounds() {
        let mut next: BTreeMap<Key, Vec<RoundStep>> = BTreeMap::new();
        for ((vir, pool), path) in &states {
            for step in round_successors(a, i, pool, phi.entry(i), n) {
                let vir2 = if i == ir { Some(step.output.clone()) } else { vir.clone() };
                let key = (vir2, step.output.clone());
                next.entry(key).or_insert_with(|| {
                    let mut p = path.clone();
                    p.push(step);
                    p
                });
            }
        }
        states = next;
    }
    states.into_iter().map(|((vir, vr), p)| ((vir.expect("ir round precedes the last round"), vr), p)).collect()
}

/// One witness step per reachable successor, first found in canonical order.
pub fn phase_successors_detailed(
    alg: &Algorithm,
    cfg: &AbstractConfig,
    phi: &PhasePredicate,
) -> BTreeMap<AbstractConfig, PhaseStep> {
    let mut out = BTreeMap::new();
    for ((vir, vr), path) in round_paths(alg, cfg, phi) {
        for fl in flows(cfg, &vir, &vr) {
            let to = apply_flows(alg, cfg, &fl);
            out.entry(to.clone()).or_insert_with(|| PhaseStep { rounds: path.clone(), flows: fl, to });
        }
    }
    out
}

/// Successor configurations of one phase under `phi`, sorted.
pub fn phase_successors(alg: &Algorithm, cfg: &AbstractConfig, phi: &PhasePredicate) -> Vec<AbstractConfig> {
    let mut pairs: Vec<(RoundCounts, RoundCounts)> = round_paths(alg, cfg, phi).into_keys().collect();
    pairs.dedup();
    let mut out: Vec<AbstractConfig> = Vec::new();
    for (vir, vr) in pairs {
        for fl in flows(cfg, &vir, &vr) {
            out.push(apply_flows(alg, cfg, &fl));
        }
    }
    out.sort();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_enumeration() {
        // 2x2 with margins (2,1) and (1,2): two tables
        assert_eq!(tables(&[2, 1], &[1, 2]).len(), 2);
        assert_eq!(tables(&[1, 1], &[1, 1]).len(), 2);
        assert_eq!(tables(&[3], &[1, 2]).len(), 1);
        assert_eq!(tables(&[2, 2], &[2, 2]).len(), 3);
        for t in tables(&[2, 1, 3], &[3, 3]) {
            assert_eq!(t.iter().map(|r| r[0]).sum::<usize>(), 3);
            assert_eq!(t[2].iter().sum::<usize>(), 3);
        }
    }
}
