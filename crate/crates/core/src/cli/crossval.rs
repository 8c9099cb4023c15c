//! Checker-versus-simulator agreement over batches of instances.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{Instance, Outcome, ReasonKind, Verdict};
use crate::sim::{check_agreement, check_termination, guard_size, Bounds};
use crate::verdict::{check_consensus, TheoremTrace};

pub type Checker = dyn Fn(&Instance) -> (Verdict, TheoremTrace) + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossvalOptions {
    /// Largest process count; every `n` in `2..=max_n` is explored.
    pub max_n: usize,
    /// Phase bound for both searches.
    pub depth: usize,
}

impl Default for CrossvalOptions {
    fn default() -> Self {
        CrossvalOptions { max_n: 6, depth: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossvalRow {
    pub id: String,
    pub checker: Outcome,
    pub reasons: Vec<String>,
    /// Golden verdict, when the instance comes with one.
    pub expected: Option<Outcome>,
    /// Smallest `n` with an agreement violation.
    pub agreement_violation: Option<usize>,
    /// Smallest `n` with a non-terminating lasso.
    pub lasso: Option<usize>,
    /// Largest `n` the simulator explored for this row.
    pub explored_n: usize,
    pub consistent: bool,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CrossvalSummary {
    pub max_n: usize,
    pub depth: usize,
    pub rows: Vec<CrossvalRow>,
}

impl CrossvalSummary {
    pub fn inconsistencies(&self) -> usize {
        self.rows.iter().filter(|r| !r.consistent).count()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.inconsistencies() > 0)
    }

    pub fn table(&self) -> String {
        let w = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(2).max(8);
        let mut s = format!(
            "{:<w$}  {:<15}  {:<9}  {:<9}  {:<10}\n",
            "instance", "checker", "agreement", "lasso", "consistent"
        );
        let at = |x: Option<usize>| x.map_or("-".to_string(), |n| format!("n={n}"));
        for r in &self.rows {
            s.push_str(&format!(
                "{:<w$}  {:<15}  {:<9}  {:<9}  {:<10}",
                r.id,
                r.checker.to_string(),
                at(r.agreement_violation),
                at(r.lasso),
                if r.consistent { "yes" } else { "NO" }
            ));
            if !r.note.is_empty() {
                s.push_str("  ");
                s.push_str(&r.note);
            }
            s.push('\n');
        }
        s.push_str(&format!(
            "{} instances, {} inconsistent (n <= {}, depth <= {})\n",
            self.rows.len(),
            self.inconsistencies(),
            self.max_n,
            self.depth
        ));
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Witness kinds that confirm a rejection, as (agreement, lasso).
fn confirming(v: &Verdict) -> (bool, bool) {
    let mut agreement = false;
    let mut lasso = false;
    for r in v.reasons() {
        match r.kind() {
            ReasonKind::Agreement => agreement = true,
            ReasonKind::Termination => lasso = true,
            ReasonKind::Structural => {
                agreement = true;
                lasso = true;
            }
            ReasonKind::Fragment => {}
        }
    }
    (agreement, lasso)
}

pub fn crossval_one(
    id: &str,
    inst: &Instance,
    expected: Option<Outcome>,
    opts: CrossvalOptions,
    checker: &Checker,
) -> CrossvalRow {
    let (verdict, _) = checker(inst);
    let mut row = CrossvalRow {
        id: id.to_string(),
        checker: verdict.outcome(),
        reasons: verdict.reasons().iter().map(|r| r.code()).collect(),
        expected,
        agreement_violation: None,
        lasso: None,
        explored_n: 0,
        consistent: true,
        note: String::new(),
    };
    if let Some(e) = expected {
        if e != verdict.outcome() {
            row.consistent = false;
            row.note = format!("expected {e}");
            return row;
        }
    }
    let (want_agreement, want_lasso) = confirming(&verdict);
    let timestamps = inst.alg().timestamps();
    match verdict.outcome() {
        Outcome::OutOfFragment => row.note = "no claim outside the fragment".into(),
        Outcome::Accept => {
            for n in 2..=opts.max_n {
                if guard_size(n, timestamps).is_err() {
                    break;
                }
                row.explored_n = n;
                let b = Bounds::with_depth(n, opts.depth);
                if row.agreement_violation.is_none() && check_agreement(inst, b).is_some() {
                    row.agreement_violation = Some(n);
                }
                if row.lasso.is_none() && check_termination(inst, b).is_some() {
                    row.lasso = Some(n);
                }
            }
            if row.agreement_violation.is_some() || row.lasso.is_some() {
                row.consistent = false;
                row.note = "accepted but the simulator found a counterexample".into();
            }
        }
        Outcome::Reject if !want_agreement && !want_lasso => row.note = "fragment reasons only".into(),
        Outcome::Reject => {
            for n in 2..=opts.max_n {
                if guard_size(n, timestamps).is_err() {
                    break;
                }
                row.explored_n = n;
                let b = Bounds::with_depth(n, opts.depth);
                if want_agreement && check_agreement(inst, b).is_some() {
                    row.agreement_violation = Some(n);
                    break;
                }
                if want_lasso && check_termination(inst, b).is_some() {
                    row.lasso = Some(n);
                    break;
                }
            }
            if row.agreement_violation.is_none() && row.lasso.is_none() {
                row.consistent = false;
                row.note = format!("rejected but no witness up to n = {}", row.explored_n);
            }
        }
    }
    row
}

/// Runs every instance; rows keep input order regardless of scheduling.
pub fn crossval(
    items: &[(String, Instance, Option<Outcome>)],
    opts: CrossvalOptions,
    checker: &Checker,
) -> CrossvalSummary {
    let rows = items.par_iter().map(|(id, inst, e)| crossval_one(id, inst, *e, opts, checker)).collect();
    CrossvalSummary { max_n: opts.max_n, depth: opts.depth, rows }
}

pub fn default_checker() -> &'static Checker {
    &|inst: &Instance| check_consensus(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::find;

    fn item(id: &str) -> (String, Instance, Option<Outcome>) {
        let e = find(id).unwrap();
        (e.id.clone(), e.instance().unwrap(), Some(e.expected))
    }

    #[test]
    fn accepted_and_rejected_rows() {
        let opts = CrossvalOptions { max_n: 4, depth: 6 };
        let items = vec![item("onethird-2-3"), item("onethird-min-round1"), item("onethird-unifier-only")];
        let s = crossval(&items, opts, default_checker());
        assert_eq!(s.inconsistencies(), 0, "{}", s.table());
        assert_eq!(s.rows[1].agreement_violation, Some(4));
        assert!(s.rows[2].lasso.is_some());
        assert_eq!(s.exit_code(), 0);
    }

    #[test]
    fn accepting_checker_is_caught() {
        let buggy: &Checker = &|inst: &Instance| {
            let (_, t) = check_consensus(inst);
            (Verdict::accept(), t)
        };
        let (id, inst, _) = item("onethird-min-round1");
        let s = crossval(&[(id, inst, None)], CrossvalOptions { max_n: 4, depth: 6 }, buggy);
        assert_eq!(s.exit_code(), 1);
        assert!(s.table().contains("NO"));
    }
}
