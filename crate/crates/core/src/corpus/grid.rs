//! Generated families of the two-round OneThird template.

use crate::model::{rat, Fragment, Outcome, Rat};

use super::CorpusEntry;

/// Threshold values of the stamped grid.
pub fn grid_values() -> [Rat; 6] {
    [r(1, 3), r(1, 2), r(3, 5), r(2, 3), r(3, 4), r(4, 5)]
}

/// Values small enough that no two-round core algorithm can be correct.
pub fn impossibility_values() -> [Rat; 3] {
    [r(1, 4), r(1, 3), r(1, 2)]
}

fn r(n: i64, d: i64) -> Rat {
    rat(n, d).expect("literal rational")
}

/// Constants of the template: round-1 uni, round-1 mult, round-2 uni.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridPoint {
    pub uni1: Rat,
    pub mult1: Rat,
    pub uni2: Rat,
}

/// Sporadic predicates `(eq? && thr t, true), (thr d1, thr d2)` over a
/// trivial global predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PredicateShape {
    pub unifier_eq: bool,
    pub unifier_thr: Rat,
    pub decider: (Rat, Rat),
}

impl PredicateShape {
    /// The smallest predicates making the template correct when it can be.
    pub fn canonical(p: GridPoint) -> Self {
        PredicateShape { unifier_eq: true, unifier_thr: p.mult1, decider: (p.uni1, p.uni2) }
    }
}

fn token(x: Rat) -> String {
    x.to_string().replace('/', "-")
}

fn point_id(p: GridPoint) -> String {
    format!("{}_{}_{}", token(p.uni1), token(p.mult1), token(p.uni2))
}

pub fn one_third_text(name: &str, p: GridPoint, s: PredicateShape) -> String {
    let eq = if s.unifier_eq { "eq && " } else { "" };
    format!(
        "// Generated: two-round OneThird template.\n\
         algorithm \"{name}\" {{\n\
         \x20 round 1 {{\n\
         \x20   send (inp);\n\
         \x20   if uni(H) && |H| > {u1} then x1 := inp := smor(H);\n\
         \x20   if mult(H) && |H| > {m1} then x1 := inp := smor(H);\n\
         \x20 }}\n\
         \x20 round 2 {{\n\
         \x20   send x1;\n\
         \x20   if uni(H) && |H| > {u2} then dec := smor(H);\n\
         \x20 }}\n\
         }}\n\
         predicate {{\n\
         \x20 global: (true, true);\n\
         \x20 sporadic: ({eq}thr {t}, true), (thr {d1}, thr {d2});\n\
         }}\n",
        u1 = p.uni1,
        m1 = p.mult1,
        u2 = p.uni2,
        t = s.unifier_thr,
        d1 = s.decider.0,
        d2 = s.decider.1,
    )
}

/// Closed-form verdict of the template under its canonical predicates:
/// both constant inequalities, plus the unifier clause on round 1.
pub fn one_third_oracle(p: GridPoint) -> Outcome {
    let one = Rat::one();
    let half = Rat::half();
    let constants = p.mult1 * half >= one - p.uni2 && p.uni1 >= one - p.uni2;
    let border = std::cmp::max(one - p.uni1, one - p.mult1 * half);
    let unifier = p.mult1 >= p.uni1 || p.mult1 >= border;
    if constants && unifier {
        Outcome::Accept
    } else {
        Outcome::Reject
    }
}

fn points(values: &[Rat]) -> Vec<GridPoint> {
    let mut v = Vec::new();
    for &uni1 in values {
        for &mult1 in values {
            for &uni2 in values {
                v.push(GridPoint { uni1, mult1, uni2 });
            }
        }
    }
    v
}

fn entry(id: String, p: GridPoint, s: PredicateShape, expected: Outcome, anchor: &str) -> CorpusEntry {
    CorpusEntry {
        source: one_third_text(&id, p, s),
        file: format!("grid/{id}.ho"),
        id,
        fragment: Fragment::Core,
        expected,
        reasons: Vec::new(),
        anchor: anchor.to_string(),
    }
}

/// The 6x6x6 grid with canonical predicates and oracle verdicts.
pub fn one_third_entries() -> Vec<CorpusEntry> {
    points(&grid_values())
        .into_iter()
        .map(|p| {
            let id = format!("onethird-grid-{}", point_id(p));
            entry(id, p, PredicateShape::canonical(p), one_third_oracle(p), "parametrised two-round OneThird")
        })
        .collect()
}

/// Every template instance with constants and predicate thresholds drawn
/// from the small values; all are expected to be rejected.
pub fn impossibility_grid() -> Vec<CorpusEntry> {
    let vals = impossibility_values();
    let mut out = Vec::new();
    for p in points(&vals) {
        for q in points(&vals) {
            let s = PredicateShape { unifier_eq: true, unifier_thr: q.uni1, decider: (q.mult1, q.uni2) };
            let id = format!("impossible-{}-p{}", point_id(p), point_id(q));
            out.push(entry(id, p, s, Outcome::Reject, "all constants at most 1/2"));
        }
    }
    out
}

/// Cross-validation family: every grid point once with canonical predicates
/// and once with a rotated predicate whose equalizer flag alternates.
/// Rotated entries carry no oracle and expect whatever the checker says.
pub fn crossval_family() -> Vec<(CorpusEntry, Option<Outcome>)> {
    let g = grid_values();
    let idx = |x: Rat| g.iter().position(|&y| y == x).expect("grid value");
    let mut out = Vec::new();
    for p in points(&g) {
        let id = format!("crossval-{}", point_id(p));
        let e = entry(id, p, PredicateShape::canonical(p), one_third_oracle(p), "parametrised two-round OneThird");
        out.push((e, Some(one_third_oracle(p))));
        let (a, b, c) = (idx(p.uni1), idx(p.mult1), idx(p.uni2));
        let s = PredicateShape {
            unifier_eq: (a + b + c) % 2 == 0,
            unifier_thr: g[(b + 1) % 6],
            decider: (g[(a + 2) % 6], g[(c + 3) % 6]),
        };
        let id = format!("crossval-{}-rot", point_id(p));
        let e = entry(id, p, s, Outcome::Reject, "rotated predicate thresholds");
        out.push((e, None));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn oracle_on_published_points() {
        let p = |a, b, c| GridPoint { uni1: a, mult1: a, uni2: c }.with_mult(b);
        assert_eq!(one_third_oracle(p(r(2, 3), r(2, 3), r(2, 3))), Outcome::Accept);
        assert_eq!(one_third_oracle(p(r(1, 2), r(1, 2), r(3, 4))), Outcome::Accept);
        assert_eq!(one_third_oracle(p(r(1, 2), r(1, 2), r(2, 3))), Outcome::Reject);
    }

    impl GridPoint {
        fn with_mult(self, m: Rat) -> Self {
            GridPoint { mult1: m, ..self }
        }
    }

    #[test]
    fn generated_text_parses() {
        for e in one_third_entries().iter().chain(impossibility_grid().iter().take(5)) {
            let inst = parse(&e.source).unwrap();
            assert_eq!(inst.alg().name(), e.id);
        }
    }

    #[test]
    fn family_sizes() {
        assert_eq!(one_third_entries().len(), 216);
        assert_eq!(impossibility_grid().len(), 729);
        let cv = crossval_family();
        assert_eq!(cv.len(), 432);
        assert!(cv.iter().any(|(e, o)| o.is_none() && !e.source.contains("eq &&")));
        assert!(cv.iter().any(|(e, o)| o.is_none() && e.source.contains("eq &&")));
    }

    #[test]
    fn some_grid_points_accept() {
        let n = one_third_entries().iter().filter(|e| e.expected == Outcome::Accept).count();
        assert!(n > 0 && n < 216);
    }
}
