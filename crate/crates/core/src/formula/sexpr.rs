//! Prefix S-expression syntax for formulas.

use std::fmt;

use super::{Formula, FormulaError, Term};

pub(super) fn write_formula(f: &Formula, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    match f {
        Formula::True => write!(out, "true"),
        Formula::False => write!(out, "false"),
        Formula::Sym(c, x) => write!(out, "(sym {c} {x})"),
        Formula::Lt(x, y) => write!(out, "(lt {x} {y})"),
        Formula::Leq(x, y) => write!(out, "(leq {x} {y})"),
        Formula::Eq(x, y) => write!(out, "(eq {x} {y})"),
        Formula::Aux(r, ts) | Formula::AuxP(r, ts) => {
            let head = if matches!(f, Formula::Aux(..)) {
                "aux"
            } else {
                "aux'"
            };
            write!(out, "({head} {r}")?;
            for x in ts {
                write!(out, " {x}")?;
            }
            write!(out, ")")
        }
        Formula::And(ps) | Formula::Or(ps) => {
            write!(
                out,
                "({}",
                if matches!(f, Formula::And(_)) {
                    "and"
                } else {
                    "or"
                }
            )?;
            for p in ps {
                write!(out, " ")?;
                write_formula(p, out)?;
            }
            write!(out, ")")
        }
        Formula::Not(g) => {
            write!(out, "(not ")?;
            write_formula(g, out)?;
            write!(out, ")")
        }
        Formula::Exists(v, g) => {
            write!(out, "(exists {v} ")?;
            write_formula(g, out)?;
            write!(out, ")")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Open,
    Close,
    Atom(String),
}

fn tokenize(s: &str) -> Vec<(usize, Tok)> {
    let mut out = Vec::new();
    let mut chars = s.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        match c {
            '(' => {
                out.push((i, Tok::Open));
                chars.next();
            }
            ')' => {
                out.push((i, Tok::Close));
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut a = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c == '(' || c == ')' || c.is_whitespace() {
                        break;
                    }
                    a.push(c);
                    chars.next();
                }
                out.push((i, Tok::Atom(a)));
            }
        }
    }
    out
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    len: usize,
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> FormulaError {
        let at = self.toks.get(self.pos).map(|t| t.0).unwrap_or(self.len);
        FormulaError::Parse {
            pos: at,
            msg: msg.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.1.clone());
        self.pos += 1;
        t
    }

    fn atom(&mut self) -> Result<String, FormulaError> {
        match self.next() {
            Some(Tok::Atom(a)) => Ok(a),
            _ => {
                self.pos -= 1;
                Err(self.err("expected a name"))
            }
        }
    }

    fn close(&mut self) -> Result<(), FormulaError> {
        match self.next() {
            Some(Tok::Close) => Ok(()),
            _ => {
                self.pos -= 1;
                Err(self.err("expected ')'"))
            }
        }
    }

    fn term(&mut self) -> Result<Term, FormulaError> {
        Ok(Term::from(self.atom()?.as_str()))
    }

    fn formula(&mut self) -> Result<Formula, FormulaError> {
        match self.next() {
            Some(Tok::Atom(a)) if a == "true" => Ok(Formula::True),
            Some(Tok::Atom(a)) if a == "false" => Ok(Formula::False),
            Some(Tok::Open) => {
                let head = self.atom()?;
                let f = match head.as_str() {
                    "sym" => {
                        let s = self.atom()?;
                        let mut cs = s.chars();
                        let c = cs.next().ok_or_else(|| self.err("empty symbol"))?;
                        if cs.next().is_some() {
                            return Err(self.err("symbols are single characters"));
                        }
                        Formula::Sym(c, self.term()?)
                    }
                    "lt" => Formula::Lt(self.term()?, self.term()?),
                    "leq" => Formula::Leq(self.term()?, self.term()?),
                    "eq" => Formula::Eq(self.term()?, self.term()?),
                    "aux" | "aux'" => {
                        let r = self.atom()?;
                        let mut ts = Vec::new();
                        while matches!(self.toks.get(self.pos), Some((_, Tok::Atom(_)))) {
                            ts.push(self.term()?);
                        }
                        if head == "aux" {
                            Formula::Aux(r, ts)
                        } else {
                            Formula::AuxP(r, ts)
                        }
                    }
                    "and" | "or" => {
                        let mut ps = Vec::new();
                        while !matches!(self.toks.get(self.pos), Some((_, Tok::Close)) | None) {
                            ps.push(self.formula()?);
                        }
                        if head == "and" {
                            Formula::And(ps)
                        } else {
                            Formula::Or(ps)
                        }
                    }
                    "not" => Formula::Not(Box::new(self.formula()?)),
                    "exists" => {
                        let v = self.atom()?;
                        Formula::Exists(v, Box::new(self.formula()?))
                    }
                    other => {
                        self.pos -= 1;
                        return Err(self.err(format!("unknown head {other:?}")));
                    }
                };
                self.close()?;
                Ok(f)
            }
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err("expected a formula"))
            }
        }
    }
}

pub fn parse_formula(s: &str) -> Result<Formula, FormulaError> {
    let mut p = Parser {
        toks: tokenize(s),
        pos: 0,
        len: s.len(),
    };
    let f = p.formula()?;
    if p.pos != p.toks.len() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}
