use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, SourceSpan};
use crate::model::{
    Algorithm, CommSpec, Guard, Instance, Instruction, ModelError, Operation, PhaseEntry, PhasePredicate, Rat, Round,
    RoundType, Threshold,
};

enum Target {
    Inp { ts: bool },
    Var(String),
}

enum Assign {
    Var { name: String, inp: bool },
    Dec,
}

struct RawRound {
    index: usize,
    rtype: RoundType,
    target: Target,
    instrs: Vec<(Instruction, Assign, SourceSpan)>,
    span: SourceSpan,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, expected: &[&str]) -> PResult<T> {
        let found = self.peek().class();
        Err(ParseError {
            span: self.span(),
            message: format!("expected {}, found {found}", expected.join(" or ")),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    }

    fn expect(&mut self, t: Tok) -> PResult<SourceSpan> {
        if *self.peek() == t {
            Ok(self.advance().span)
        } else {
            let class = t.class();
            self.err(&[class.as_str()])
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<SourceSpan> {
        if self.is_kw(kw) {
            Ok(self.advance().span)
        } else {
            self.err(&[&format!("`{kw}`")])
        }
    }

    fn int(&mut self) -> PResult<u64> {
        match *self.peek() {
            Tok::Int(v) => {
                self.advance();
                Ok(v)
            }
            _ => self.err(&["integer"]),
        }
    }

    fn rational(&mut self) -> PResult<(Rat, SourceSpan)> {
        let start = self.span();
        let num = self.int()?;
        let den = if *self.peek() == Tok::Slash {
            self.advance();
            let sp = self.span();
            let d = self.int()?;
            if d == 0 {
                return Err(ParseError::at(sp, "zero denominator"));
            }
            d
        } else {
            1
        };
        let value = Rat::new(num as i64, den as i64).map_err(|e| ParseError::at(start, &e.to_string()))?;
        let span = start.join(self.toks[self.pos.saturating_sub(1)].span);
        Ok((value, span))
    }

    fn unit_rational(&mut self) -> PResult<Rat> {
        let (v, span) = self.rational()?;
        if v >= Rat::one() {
            return Err(ParseError::at(span, &format!("threshold {v} must lie in [0,1)")));
        }
        Ok(v)
    }

    fn file(&mut self) -> PResult<Instance> {
        let alg_span = self.keyword("algorithm")?;
        let name = match self.peek().clone() {
            Tok::Str(s) => {
                self.advance();
                s
            }
            _ => return self.err(&["string"]),
        };
        self.expect(Tok::LBrace)?;
        let mut raw = Vec::new();
        while self.is_kw("round") {
            raw.push(self.round()?);
        }
        if raw.is_empty() {
            return self.err(&["`round`"]);
        }
        let close = self.expect(Tok::RBrace)?;
        let alg = build_algorithm(name, raw, alg_span.join(close))?;
        let pred_span = self.span();
        let spec = self.predicate(alg.num_rounds())?;
        if *self.peek() != Tok::Eof {
            return self.err(&["end of input"]);
        }
        Instance::new(alg, spec).map_err(|e| ParseError::at(pred_span, &e.to_string()))
    }

    fn round(&mut self) -> PResult<RawRound> {
        let start = self.keyword("round")?;
        let idx_span = self.span();
        let index = self.int()? as usize;
        if index == 0 {
            return Err(ParseError::at(idx_span, "rounds are numbered from 1"));
        }
        let rtype = if self.is_kw("every") {
            self.advance();
            RoundType::Every
        } else if self.is_kw("lr") {
            self.advance();
            RoundType::LeaderReceive
        } else if self.is_kw("ls") {
            self.advance();
            RoundType::LeaderSend
        } else {
            RoundType::Every
        };
        self.expect(Tok::LBrace)?;
        self.keyword("send")?;
        let target = match self.peek().clone() {
            Tok::LParen => {
                self.advance();
                self.keyword("inp")?;
                let ts = if *self.peek() == Tok::Comma {
                    self.advance();
                    self.keyword("ts")?;
                    true
                } else {
                    false
                };
                self.expect(Tok::RParen)?;
                Target::Inp { ts }
            }
            Tok::Ident(s) => {
                self.advance();
                Target::Var(s)
            }
            _ => return self.err(&["`(`", "identifier"]),
        };
        self.expect(Tok::Semi)?;
        let mut instrs = Vec::new();
        while self.is_kw("if") {
            instrs.push(self.instruction()?);
        }
        if *self.peek() != Tok::RBrace {
            return self.err(&["`if`", "`}`"]);
        }
        let end = self.advance().span;
        Ok(RawRound { index, rtype, target, instrs, span: start.join(end) })
    }

    fn instruction(&mut self) -> PResult<(Instruction, Assign, SourceSpan)> {
        let start = self.keyword("if")?;
        let guard = if self.is_kw("uni") {
            Guard::Uni
        } else if self.is_kw("mult") {
            Guard::Mult
        } else {
            return self.err(&["`uni`", "`mult`"]);
        };
        self.advance();
        self.expect(Tok::LParen)?;
        self.keyword("H")?;
        self.expect(Tok::RParen)?;
        let threshold = if *self.peek() == Tok::AndAnd {
            self.advance();
            self.expect(Tok::SizeH)?;
            self.expect(Tok::Gt)?;
            self.unit_rational()?
        } else {
            Rat::zero()
        };
        self.keyword("then")?;
        let assign = match self.peek().clone() {
            Tok::Ident(s) if s == "dec" => {
                self.advance();
                Assign::Dec
            }
            Tok::Ident(s) if s == "inp" => {
                return Err(ParseError::at(self.span(), "inp is assigned through `x_i := inp := op(H)`"));
            }
            Tok::Ident(name) => {
                self.advance();
                self.expect(Tok::Assign)?;
                let inp = if self.is_kw("inp") {
                    self.advance();
                    true
                } else {
                    false
                };
                if inp {
                    self.expect(Tok::Assign)?;
                }
                let a = Assign::Var { name, inp };
                return self.finish_instruction(start, guard, threshold, a);
            }
            _ => return self.err(&["identifier", "`dec`"]),
        };
        self.expect(Tok::Assign)?;
        self.finish_instruction(start, guard, threshold, assign)
    }

    fn finish_instruction(
        &mut self,
        start: SourceSpan,
        guard: Guard,
        threshold: Rat,
        assign: Assign,
    ) -> PResult<(Instruction, Assign, SourceSpan)> {
        let op = if self.is_kw("min") {
            Operation::Min
        } else if self.is_kw("smor") {
            Operation::Smor
        } else if self.is_kw("maxts") {
            Operation::MaxTs
        } else {
            return self.err(&["`min`", "`smor`", "`maxts`"]);
        };
        self.advance();
        self.expect(Tok::LParen)?;
        self.keyword("H")?;
        self.expect(Tok::RParen)?;
        let end = self.expect(Tok::Semi)?;
        let span = start.join(end);
        let ins = Instruction::new(guard, threshold, op).map_err(|e| ParseError::at(span, &e.to_string()))?;
        Ok((ins, assign, span))
    }

    fn predicate(&mut self, rounds: usize) -> PResult<CommSpec> {
        self.keyword("predicate")?;
        self.expect(Tok::LBrace)?;
        self.keyword("global")?;
        self.expect(Tok::Colon)?;
        let global = self.ptuple(rounds)?;
        self.expect(Tok::Semi)?;
        let mut sporadics = Vec::new();
        if self.is_kw("sporadic") {
            self.advance();
            self.expect(Tok::Colon)?;
            if *self.peek() != Tok::Semi {
                sporadics.push(self.ptuple(rounds)?);
                while *self.peek() == Tok::Comma {
                    self.advance();
                    sporadics.push(self.ptuple(rounds)?);
                }
            }
            self.expect(Tok::Semi)?;
        }
        self.expect(Tok::RBrace)?;
        Ok(CommSpec::new(global, sporadics))
    }

    fn ptuple(&mut self, rounds: usize) -> PResult<PhasePredicate> {
        let start = self.expect(Tok::LParen)?;
        let mut entries = vec![self.pentry()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            entries.push(self.pentry()?);
        }
        let end = self.expect(Tok::RParen)?;
        if entries.len() != rounds {
            let e = ModelError::PredicateArity { expected: rounds, found: entries.len() };
            return Err(ParseError::at(start.join(end), &e.to_string()));
        }
        Ok(PhasePredicate::new(entries))
    }

    fn pentry(&mut self) -> PResult<PhaseEntry> {
        if self.is_kw("true") {
            self.advance();
            return Ok(PhaseEntry::TRUE);
        }
        let mut e = PhaseEntry::TRUE;
        loop {
            if self.is_kw("eq") {
                self.advance();
                e.has_eq = true;
            } else if self.is_kw("ls") {
                self.advance();
                e.has_ls = true;
            } else if self.is_kw("thr") {
                self.advance();
                let t = Threshold::Present(self.unit_rational()?);
                e.thr = e.thr.max(t);
            } else {
                return self.err(&["`true`", "`eq`", "`ls`", "`thr`"]);
            }
            if *self.peek() == Tok::AndAnd {
                self.advance();
            } else {
                return Ok(e);
            }
        }
    }
}

fn build_algorithm(name: String, raw: Vec<RawRound>, span: SourceSpan) -> PResult<Algorithm> {
    let r = raw.len();
    let mut rounds = Vec::with_capacity(r);
    let mut timestamps = false;
    for (pos, rr) in raw.into_iter().enumerate() {
        let i = pos + 1;
        if rr.index != i {
            return Err(ParseError::at(rr.span, &format!("round {} appears where round {i} belongs", rr.index)));
        }
        match (&rr.target, i) {
            (Target::Inp { ts }, 1) => timestamps = *ts,
            (Target::Inp { .. }, _) => {
                return Err(ParseError::at(rr.span, &format!("round {i} must send x{}, not inp", i - 1)));
            }
            (Target::Var(v), 1) => {
                return Err(ParseError::at(rr.span, &format!("round 1 must send (inp), found `{v}`")));
            }
            (Target::Var(v), _) => {
                let want = format!("x{}", i - 1);
                if *v != want {
                    return Err(ParseError::at(rr.span, &format!("round {i} must send {want}, found `{v}`")));
                }
            }
        }
        let mut sets_inp = None;
        let mut instrs = Vec::new();
        for (ins, assign, ispan) in rr.instrs {
            match assign {
                Assign::Dec => {
                    if i != r {
                        return Err(ParseError::at(
                            ispan,
                            &format!("dec is set in round {i}, but only the last round {r} may set it"),
                        ));
                    }
                }
                Assign::Var { name, inp } => {
                    if i == r {
                        return Err(ParseError::at(ispan, "the last round may only set dec"));
                    }
                    let want = format!("x{i}");
                    if name != want {
                        return Err(ParseError::at(ispan, &format!("round {i} must assign {want}, found `{name}`")));
                    }
                    match sets_inp {
                        None => sets_inp = Some(inp),
                        Some(prev) if prev != inp => {
                            return Err(ParseError::at(
                                ispan,
                                "either every instruction of a round updates inp or none does",
                            ));
                        }
                        _ => {}
                    }
                }
            }
            instrs.push(ins);
        }
        rounds.push((Round::new(i, rr.rtype, instrs, sets_inp.unwrap_or(false), i == r), rr.span));
    }
    let spans: Vec<SourceSpan> = rounds.iter().map(|(_, s)| *s).collect();
    let rounds: Vec<Round> = rounds.into_iter().map(|(r, _)| r).collect();
    Algorithm::new(name, rounds, timestamps).map_err(|e| {
        let at = match &e {
            ModelError::DuplicateInputRound(_, i)
            | ModelError::DecOutsideLastRound(i)
            | ModelError::LrNotFollowedByLs(i)
            | ModelError::LrUpdatesState(i)
            | ModelError::MultInLsRound(i)
            | ModelError::MaxTsOutsideRoundOne(i) => spans.get(*i - 1).copied().unwrap_or(span),
            ModelError::MixedRoundOneOps | ModelError::MaxTsWithoutTimestamps => spans[0],
            ModelError::InputInLastRound | ModelError::LastRoundWithoutDec => *spans.last().unwrap(),
            _ => span,
        };
        ParseError::at(at, &e.to_string())
    })
}

pub fn parse(text: &str) -> Result<Instance, ParseError> {
    let toks = tokenize(text)?;
    Parser { toks, pos: 0 }.file()
}
