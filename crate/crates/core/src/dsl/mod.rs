//! Text format for problem instances: one file holds an algorithm and its
//! communication predicate.
//!
//! ```text
//! algorithm "OneThird" {
//!   round 1 {
//!     send (inp);
//!     if uni(H) && |H| > 2/3 then x1 := inp := smor(H);
//!     if mult(H) && |H| > 2/3 then x1 := inp := smor(H);
//!   }
//!   round 2 {
//!     send x1;
//!     if uni(H) && |H| > 2/3 then dec := smor(H);
//!   }
//! }
//! predicate {
//!   global: (true, true);
//!   sporadic: (eq && thr 2/3, true), (thr 2/3, thr 2/3);
//! }
//! ```

mod lexer;
mod parser;

use std::fmt::{self, Write as _};

use crate::model::{Guard, Instance, PhaseEntry, PhasePredicate, RoundType, Threshold};

pub use parser::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
}

impl SourceSpan {
    pub(crate) fn join(self, other: SourceSpan) -> SourceSpan {
        SourceSpan { end: other.end.max(self.end), ..self }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn at(span: SourceSpan, message: &str) -> Self {
        ParseError { span, message: message.to_string(), expected: Vec::new() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

impl std::error::Error for ParseError {}

/// Renders an instance in the concrete syntax accepted by [`parse`].
pub fn pretty(inst: &Instance) -> String {
    let alg = inst.alg();
    let r = alg.num_rounds();
    let mut out = String::new();
    let _ = writeln!(out, "algorithm {} {{", quote(alg.name()));
    for round in alg.rounds() {
        let i = round.index();
        let rt = match round.rtype() {
            RoundType::Every => String::new(),
            t => format!(" {t}"),
        };
        let _ = writeln!(out, "  round {i}{rt} {{");
        if i == 1 {
            let ts = if alg.timestamps() { ", ts" } else { "" };
            let _ = writeln!(out, "    send (inp{ts});");
        } else {
            let _ = writeln!(out, "    send x{};", i - 1);
        }
        let lhs = if i == r {
            "dec".to_string()
        } else if round.sets_inp() {
            format!("x{i} := inp")
        } else {
            format!("x{i}")
        };
        for ins in round.instructions() {
            let g = match ins.guard {
                Guard::Uni => "uni",
                Guard::Mult => "mult",
            };
            let size = if ins.threshold.numer() == 0 { String::new() } else { format!(" && |H| > {}", ins.threshold) };
            let _ = writeln!(out, "    if {g}(H){size} then {lhs} := {}(H);", ins.op);
        }
        out.push_str("  }\n");
    }
    out.push_str("}\npredicate {\n");
    let _ = writeln!(out, "  global: {};", pretty_predicate(inst.spec().global()));
    let sp: Vec<String> = inst.spec().sporadics().iter().map(pretty_predicate).collect();
    let _ = writeln!(out, "  sporadic: {};", sp.join(", "));
    out.push_str("}\n");
    out
}

fn quote(s: &str) -> String {
    let mut q = String::from('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

/// Renders one phase predicate as a tuple, e.g. `(eq && thr 2/3, true)`.
pub fn pretty_predicate(p: &PhasePredicate) -> String {
    let parts: Vec<String> = p.entries().iter().map(pentry).collect();
    format!("({})", parts.join(", "))
}

fn pentry(e: &PhaseEntry) -> String {
    let mut atoms = Vec::new();
    if e.has_eq {
        atoms.push("eq".to_string());
    }
    if e.has_ls {
        atoms.push("ls".to_string());
    }
    if let Threshold::Present(t) = e.thr {
        atoms.push(format!("thr {t}"));
    }
    if atoms.is_empty() {
        "true".into()
    } else {
        atoms.join(" && ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Fragment, Rat};
    use proptest::prelude::*;

    const ONE_THIRD: &str = r#"
// OneThird with both thresholds 2/3
algorithm "OneThird" {
  round 1 {
    send (inp);
    if uni(H) && |H| > 2/3 then x1 := inp := smor(H);
    if mult(H) && |H| > 2/3 then x1 := inp := smor(H);
  }
  round 2 {
    send x1;
    if uni(H) && |H| > 2/3 then dec := smor(H);
  }
}
predicate {
  global: (true, true);
  sporadic: (eq && thr 2/3, true), (thr 2/3, thr 2/3);
}
"#;

    const PAXOS: &str = r#"
algorithm "Paxos" {
  round 1 lr {
    send (inp, ts);
    if uni(H) && |H| > 1/2 then x1 := maxts(H);
    if mult(H) && |H| > 1/2 then x1 := maxts(H);
  }
  round 2 ls {
    send x1;
    if uni(H) then x2 := inp := smor(H);
  }
  round 3 lr {
    send x2;
    if uni(H) && |H| > 1/2 then x3 := smor(H);
  }
  round 4 ls {
    send x3;
    if uni(H) then dec := smor(H);
  }
}
predicate {
  global: (true, true, true, true);
  sporadic: (thr 1/2, ls, thr 1/2, ls);
}
"#;

    fn r(n: i64, d: i64) -> Rat {
        Rat::new(n, d).unwrap()
    }

    #[test]
    fn parses_one_third() {
        let inst = parse(ONE_THIRD).unwrap();
        let a = inst.alg();
        assert_eq!(a.num_rounds(), 2);
        assert_eq!(a.ir(), 1);
        assert_eq!(a.fragment(), Fragment::Core);
        assert_eq!(inst.spec().global(), &PhasePredicate::trivial(2));
        let s = inst.spec().sporadics();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].entries(), &[PhaseEntry::eq_thr(r(2, 3)), PhaseEntry::TRUE]);
        assert_eq!(s[1].entries(), &[PhaseEntry::thr(r(2, 3)), PhaseEntry::thr(r(2, 3))]);
    }

    #[test]
    fn parses_paxos() {
        let inst = parse(PAXOS).unwrap();
        let a = inst.alg();
        assert_eq!(a.ir(), 2);
        assert_eq!(a.fragment(), Fragment::TsCoord);
        assert_eq!(a.round(2).instructions()[0].threshold, Rat::zero());
        assert_eq!(a.round(3).rtype(), RoundType::LeaderReceive);
    }

    #[test]
    fn round_trips() {
        for text in [ONE_THIRD, PAXOS] {
            let a = parse(text).unwrap();
            let b = parse(&pretty(&a)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn missing_sporadic_clause_defaults_to_global() {
        let text = ONE_THIRD.replace("  sporadic: (eq && thr 2/3, true), (thr 2/3, thr 2/3);\n", "");
        let inst = parse(&text).unwrap();
        assert_eq!(inst.spec().sporadics(), &[inst.spec().global().clone()]);
    }

    fn err_of(text: &str) -> ParseError {
        let e = parse(text).unwrap_err();
        assert!(!e.message.is_empty());
        assert!(e.span.start <= e.span.end && e.span.end <= text.len(), "{e:?}");
        e
    }

    #[test]
    fn dec_before_last_round_is_structural() {
        let text = r#"
algorithm "x" {
  round 1 { send (inp); if uni(H) then x1 := inp := smor(H); }
  round 2 { send x1; if uni(H) then dec := smor(H); }
  round 3 { send x2; if uni(H) then dec := smor(H); }
}
predicate { global: (true, true, true); }
"#;
        let e = err_of(text);
        assert!(e.message.contains("dec"), "{}", e.message);
        assert_eq!(e.span.line, 4);
    }

    #[test]
    fn structural_errors() {
        let base = |r2: &str, pred: &str| {
            format!(
                "algorithm \"x\" {{ round 1 {{ send (inp); if uni(H) then x1 := inp := smor(H); }} {r2} }} predicate {{ global: {pred}; }}"
            )
        };
        let e = err_of(&base("round 2 { send x1; if uni(H) then dec := smor(H); }", "(true)"));
        assert!(e.message.contains("entries"));
        err_of(&base("round 2 { send x1; if uni(H) then dec := maxts(H); }", "(true, true)"));
        err_of(&base("round 3 { send x1; if uni(H) then dec := smor(H); }", "(true, true)"));
        err_of(&base("round 2 { send x7; if uni(H) then dec := smor(H); }", "(true, true)"));
        err_of(&base("round 2 lr { send x1; if uni(H) then dec := smor(H); }", "(true, true)"));
        err_of(&base("round 2 { send x1; if uni(H) && |H| > 1 then dec := smor(H); }", "(true, true)"));
        err_of(&base("round 2 { send x1; if uni(H) && |H| > 1/0 then dec := smor(H); }", "(true, true)"));
        parse(&base("round 2 { send x1; }", "(true, true)")).unwrap();
        err_of(&base("round 2 { send x1; if uni(H) then dec := smor(H); }", "(ls, true)"));
        let ok = base("round 2 { send x1; if uni(H) then dec := smor(H); }", "(true, true)");
        parse(&ok).unwrap();
    }

    #[test]
    fn lexical_errors_point_into_text() {
        let e = err_of("algorithm \"x\" { round 1 { send (inp); if uni(H) & |H| > 1/2 }");
        assert!(e.message.contains("&&"));
        err_of("algorithm \"x");
        err_of("algorithm \"x\" { round 99999999999 {");
        err_of("");
        err_of("algorithm \"x\" { round 1 # }");
    }

    #[test]
    fn expected_token_classes_reported() {
        let e = err_of("algorithm \"x\" { round 1 { send (inp); if then");
        assert!(e.expected.iter().any(|t| t.contains("uni")));
    }

    proptest! {
        #[test]
        fn errors_stay_inside_input(cut in 0usize..ONE_THIRD.len()) {
            if let Err(e) = parse(&ONE_THIRD[..cut]) {
                prop_assert!(e.span.start <= e.span.end && e.span.end <= cut);
            }
        }

        #[test]
        fn arbitrary_bytes_never_panic(s in "[ -~\n]{0,200}") {
            if let Err(e) = parse(&s) {
                prop_assert!(e.span.end <= s.len());
            }
        }
    }
}
