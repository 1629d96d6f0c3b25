//! Regular expressions, Thompson NFAs, subset construction, and the
//! quantifier-free maintenance of DFA runs over the dynamic word.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::base::labeled;
use crate::engine::{AbstractUpdate, DynamicProgram, EngineError, RelationSpec};
use crate::formula::*;
use crate::word::Alphabet;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("regex error at {pos}: {msg}")]
pub struct RegexError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Regex {
    Empty,
    Epsilon,
    Lit(char),
    /// Any symbol of the alphabet.
    Any,
    Alt(Box<Regex>, Box<Regex>),
    Concat(Box<Regex>, Box<Regex>),
    Star(Box<Regex>),
    /// Capture variable `x{α}`.
    Bind(String, Box<Regex>),
}

impl Regex {
    pub fn alt(a: Regex, b: Regex) -> Regex {
        Regex::Alt(Box::new(a), Box::new(b))
    }

    pub fn cat(a: Regex, b: Regex) -> Regex {
        Regex::Concat(Box::new(a), Box::new(b))
    }

    pub fn star(a: Regex) -> Regex {
        Regex::Star(Box::new(a))
    }

    /// Concatenation of literals.
    pub fn word(s: &str) -> Regex {
        s.chars()
            .map(Regex::Lit)
            .fold(Regex::Epsilon, |acc, c| match acc {
                Regex::Epsilon => c,
                acc => Regex::cat(acc, c),
            })
    }

    /// Variables bound anywhere in the expression, in first-occurrence order.
    pub fn vars(&self) -> Vec<String> {
        fn go(r: &Regex, out: &mut Vec<String>) {
            match r {
                Regex::Alt(a, b) | Regex::Concat(a, b) => {
                    go(a, out);
                    go(b, out);
                }
                Regex::Star(a) => go(a, out),
                Regex::Bind(x, a) => {
                    if !out.contains(x) {
                        out.push(x.clone());
                    }
                    go(a, out);
                }
                _ => {}
            }
        }
        let mut out = Vec::new();
        go(self, &mut out);
        out
    }
}

impl fmt::Display for Regex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regex::Empty => write!(f, "[]"),
            Regex::Epsilon => write!(f, "()"),
            Regex::Lit(c) => write!(f, "{c}"),
            Regex::Any => write!(f, "."),
            Regex::Alt(a, b) => write!(f, "({a}|{b})"),
            Regex::Concat(a, b) => write!(f, "{a}{b}"),
            Regex::Star(a) => write!(f, "({a})*"),
            Regex::Bind(x, a) => write!(f, " {x}{{{a}}}"),
        }
    }
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    len: usize,
    alphabet: &'a Alphabet,
    binds: bool,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> RegexError {
        let at = self.chars.get(self.pos).map_or(self.len, |c| c.0);
        RegexError {
            pos: at,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self
            .chars
            .get(self.pos)
            .is_some_and(|c| c.1.is_whitespace())
        {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn alt(&mut self) -> Result<Regex, RegexError> {
        let mut r = self.concat()?;
        while self.peek() == Some('|') {
            self.pos += 1;
            r = Regex::alt(r, self.concat()?);
        }
        Ok(r)
    }

    fn concat(&mut self) -> Result<Regex, RegexError> {
        let mut items = Vec::new();
        while let Some(c) = self.peek() {
            if c == '|' || c == ')' || c == '}' {
                break;
            }
            items.push(self.postfix()?);
        }
        Ok(items
            .into_iter()
            .reduce(Regex::cat)
            .unwrap_or(Regex::Epsilon))
    }

    fn postfix(&mut self) -> Result<Regex, RegexError> {
        let mut r = self.atom()?;
        loop {
            match self.chars.get(self.pos).map(|c| c.1) {
                Some('*') => {
                    self.pos += 1;
                    r = Regex::star(r);
                }
                Some('+') => {
                    self.pos += 1;
                    r = Regex::cat(r.clone(), Regex::star(r));
                }
                _ => return Ok(r),
            }
        }
    }

    // A variable name is a run of identifier characters directly followed by `{`.
    fn bind_name(&self) -> Option<(String, usize)> {
        let mut k = self.pos;
        let mut name = String::new();
        while let Some(&(_, c)) = self.chars.get(k) {
            if c.is_alphanumeric() || c == '_' {
                name.push(c);
                k += 1;
            } else {
                break;
            }
        }
        match self.chars.get(k) {
            Some((_, '{')) if !name.is_empty() => Some((name, k + 1)),
            _ => None,
        }
    }

    fn atom(&mut self) -> Result<Regex, RegexError> {
        let c = self
            .peek()
            .ok_or_else(|| self.err("unexpected end of regex"))?;
        if let Some((name, after)) = self.bind_name() {
            if !self.binds {
                return Err(self.err("capture variables are not allowed here"));
            }
            self.pos = after;
            let inner = self.alt()?;
            if self.peek() != Some('}') {
                return Err(self.err("expected '}'"));
            }
            self.pos += 1;
            return Ok(Regex::Bind(name, Box::new(inner)));
        }
        self.pos += 1;
        match c {
            '(' => {
                if self.peek() == Some(')') {
                    self.pos += 1;
                    return Ok(Regex::Epsilon);
                }
                let r = self.alt()?;
                if self.peek() != Some(')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(r)
            }
            '[' => {
                if self.peek() != Some(']') {
                    return Err(self.err("expected ']'"));
                }
                self.pos += 1;
                Ok(Regex::Empty)
            }
            '.' => Ok(Regex::Any),
            c if self.alphabet.contains(c) => Ok(Regex::Lit(c)),
            c => {
                self.pos -= 1;
                Err(self.err(format!("symbol {c:?} is not in the alphabet")))
            }
        }
    }
}

fn parse(text: &str, alphabet: &Alphabet, binds: bool) -> Result<Regex, RegexError> {
    let mut p = Parser {
        chars: text.char_indices().collect(),
        pos: 0,
        len: text.len(),
        alphabet,
        binds,
    };
    let r = p.alt()?;
    if p.peek().is_some() {
        return Err(p.err("unexpected character"));
    }
    Ok(r)
}

/// Parse a plain regular expression (no capture variables).
pub fn parse_regex(text: &str, alphabet: &Alphabet) -> Result<Regex, RegexError> {
    parse(text, alphabet, false)
}

/// Parse a regex formula, which may bind capture variables with `x{...}`.
pub fn parse_regex_formula(text: &str, alphabet: &Alphabet) -> Result<Regex, RegexError> {
    parse(text, alphabet, true)
}

/// Membership by direct recursion on the expression (captures ignored).
pub fn regex_matches(r: &Regex, w: &str) -> bool {
    let w: Vec<char> = w.chars().collect();
    ends(r, &w, 0).contains(&w.len())
}

fn ends(r: &Regex, w: &[char], i: usize) -> BTreeSet<usize> {
    match r {
        Regex::Empty => BTreeSet::new(),
        Regex::Epsilon => BTreeSet::from([i]),
        Regex::Lit(c) => (w.get(i) == Some(c)).then_some(i + 1).into_iter().collect(),
        Regex::Any => (i < w.len()).then_some(i + 1).into_iter().collect(),
        Regex::Alt(a, b) => ends(a, w, i).union(&ends(b, w, i)).copied().collect(),
        Regex::Concat(a, b) => ends(a, w, i)
            .into_iter()
            .flat_map(|j| ends(b, w, j))
            .collect(),
        Regex::Star(a) => {
            let mut seen = BTreeSet::from([i]);
            let mut todo = vec![i];
            while let Some(j) = todo.pop() {
                for k in ends(a, w, j) {
                    if seen.insert(k) {
                        todo.push(k);
                    }
                }
            }
            seen
        }
        Regex::Bind(_, a) => ends(a, w, i),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Eps,
    Sym(char),
    Open(String),
    Close(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Eps => write!(f, "ε"),
            Label::Sym(c) => write!(f, "{c}"),
            Label::Open(x) => write!(f, "⊢{x}"),
            Label::Close(x) => write!(f, "⊣{x}"),
        }
    }
}

/// NFA over symbols, ε and variable operations.
#[derive(Debug, Clone)]
pub struct Nfa {
    pub alphabet: Alphabet,
    pub trans: Vec<Vec<(Label, usize)>>,
    pub start: usize,
    pub finals: Vec<bool>,
}

impl Nfa {
    pub fn states(&self) -> usize {
        self.trans.len()
    }

    fn add_state(&mut self) -> usize {
        self.trans.push(Vec::new());
        self.finals.push(false);
        self.trans.len() - 1
    }

    /// States reachable from `set` by edges accepted by `follow`.
    pub fn closure(
        &self,
        set: &BTreeSet<usize>,
        follow: impl Fn(&Label) -> bool,
    ) -> BTreeSet<usize> {
        let mut out = set.clone();
        let mut todo: Vec<usize> = set.iter().copied().collect();
        while let Some(q) = todo.pop() {
            for (l, t) in &self.trans[q] {
                if follow(l) && out.insert(*t) {
                    todo.push(*t);
                }
            }
        }
        out
    }

    /// Simulation on a terminal word; variable operations count as ε.
    pub fn accepts(&self, w: &str) -> bool {
        let silent = |l: &Label| !matches!(l, Label::Sym(_));
        let mut cur = self.closure(&BTreeSet::from([self.start]), silent);
        for c in w.chars() {
            let step: BTreeSet<usize> = cur
                .iter()
                .flat_map(|&q| {
                    self.trans[q]
                        .iter()
                        .filter(|(l, _)| *l == Label::Sym(c))
                        .map(|(_, t)| *t)
                })
                .collect();
            cur = self.closure(&step, silent);
        }
        cur.iter().any(|&q| self.finals[q])
    }
}

/// Thompson construction with a single final state.
pub fn compile_nfa(r: &Regex, alphabet: &Alphabet) -> Nfa {
    let mut nfa = Nfa {
        alphabet: alphabet.clone(),
        trans: Vec::new(),
        start: 0,
        finals: Vec::new(),
    };
    let s = nfa.add_state();
    let f = nfa.add_state();
    build(&mut nfa, r, s, f);
    nfa.start = s;
    nfa.finals[f] = true;
    nfa
}

fn build(nfa: &mut Nfa, r: &Regex, s: usize, f: usize) {
    match r {
        Regex::Empty => {}
        Regex::Epsilon => nfa.trans[s].push((Label::Eps, f)),
        Regex::Lit(c) => nfa.trans[s].push((Label::Sym(*c), f)),
        Regex::Any => {
            for &c in nfa.alphabet.clone().symbols() {
                nfa.trans[s].push((Label::Sym(c), f));
            }
        }
        Regex::Alt(a, b) => {
            build(nfa, a, s, f);
            build(nfa, b, s, f);
        }
        Regex::Concat(a, b) => {
            let m = nfa.add_state();
            build(nfa, a, s, m);
            build(nfa, b, m, f);
        }
        Regex::Star(a) => {
            let (i, o) = (nfa.add_state(), nfa.add_state());
            nfa.trans[s].push((Label::Eps, i));
            nfa.trans[s].push((Label::Eps, f));
            build(nfa, a, i, o);
            nfa.trans[o].push((Label::Eps, i));
            nfa.trans[o].push((Label::Eps, f));
        }
        Regex::Bind(x, a) => {
            let (i, o) = (nfa.add_state(), nfa.add_state());
            nfa.trans[s].push((Label::Open(x.clone()), i));
            build(nfa, a, i, o);
            nfa.trans[o].push((Label::Close(x.clone()), f));
        }
    }
}

/// Complete DFA over the alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    pub alphabet: Alphabet,
    /// `delta[q][k]` for the `k`-th alphabet symbol.
    pub delta: Vec<Vec<usize>>,
    pub start: usize,
    pub finals: Vec<bool>,
}

impl Dfa {
    pub fn states(&self) -> usize {
        self.delta.len()
    }

    pub fn step(&self, q: usize, c: char) -> usize {
        self.delta[q][self.alphabet.index_of(c).expect("symbol in alphabet")]
    }

    pub fn run(&self, q: usize, w: impl IntoIterator<Item = char>) -> usize {
        w.into_iter().fold(q, |q, c| self.step(q, c))
    }

    pub fn accepts(&self, w: &str) -> bool {
        self.finals[self.run(self.start, w.chars())]
    }

    /// Whether the language is empty (no final state reachable).
    pub fn is_empty(&self) -> bool {
        let mut seen = vec![false; self.states()];
        let mut todo = vec![self.start];
        seen[self.start] = true;
        while let Some(q) = todo.pop() {
            if self.finals[q] {
                return false;
            }
            for &t in &self.delta[q] {
                if !seen[t] {
                    seen[t] = true;
                    todo.push(t);
                }
            }
        }
        true
    }
}

/// Subset construction from the given start set, over symbol edges only.
/// ε and variable-operation edges are followed only when `silent` says so.
pub fn determinize_from(
    nfa: &Nfa,
    start: &BTreeSet<usize>,
    finals: &[bool],
    silent: impl Fn(&Label) -> bool,
) -> Dfa {
    let syms = nfa.alphabet.symbols().to_vec();
    let init = nfa.closure(start, &silent);
    let mut ids: HashMap<BTreeSet<usize>, usize> = HashMap::new();
    let mut sets = vec![init.clone()];
    ids.insert(init, 0);
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        let mut row = Vec::with_capacity(syms.len());
        for &c in &syms {
            let step: BTreeSet<usize> = sets[i]
                .iter()
                .flat_map(|&q| {
                    nfa.trans[q]
                        .iter()
                        .filter(|(l, _)| *l == Label::Sym(c))
                        .map(|(_, t)| *t)
                })
                .collect();
            let next = nfa.closure(&step, &silent);
            let id = match ids.get(&next) {
                Some(&id) => id,
                None => {
                    let id = sets.len();
                    sets.push(next.clone());
                    ids.insert(next, id);
                    queue.push_back(id);
                    id
                }
            };
            row.push(id);
        }
        if delta.len() <= i {
            delta.resize(i + 1, Vec::new());
        }
        delta[i] = row;
    }
    let fin = sets.iter().map(|s| s.iter().any(|&q| finals[q])).collect();
    Dfa {
        alphabet: nfa.alphabet.clone(),
        delta,
        start: 0,
        finals: fin,
    }
}

/// Subset construction; variable operations are treated as ε.
pub fn determinize(nfa: &Nfa) -> Dfa {
    determinize_from(nfa, &BTreeSet::from([nfa.start]), &nfa.finals, |l| {
        !matches!(l, Label::Sym(_))
    })
}

pub fn dfa_from_regex(text: &str, alphabet: &Alphabet) -> Result<Dfa, RegexError> {
    Ok(determinize(&compile_nfa(
        &parse_regex(text, alphabet)?,
        alphabet,
    )))
}

// ---- maintenance ----

/// Relation names for one DFA, all sharing `prefix`.
#[derive(Debug, Clone)]
pub struct DfaNames {
    pub prefix: String,
}

impl DfaNames {
    pub fn new(prefix: &str) -> Self {
        DfaNames {
            prefix: prefix.to_string(),
        }
    }

    /// `R_{p,q}(i,j)`: `i < j` and the run from `p` over `w[i+1,j-1]` ends in `q`.
    pub fn run(&self, p: usize, q: usize) -> String {
        format!("{}R_{p}_{q}", self.prefix)
    }

    /// `I_q(j)`: the run from the start over `w[1,j-1]` ends in `q`.
    pub fn init(&self, q: usize) -> String {
        format!("{}I_{q}", self.prefix)
    }

    /// `F_p(i)`: the run from `p` over `w[i+1,n]` accepts.
    pub fn fin(&self, p: usize) -> String {
        format!("{}F_{p}", self.prefix)
    }

    pub fn acc(&self) -> String {
        format!("{}ACC", self.prefix)
    }
}

/// Quantifier-free rules for `R_{p,q}`, `I_q`, `F_p` and the 0-ary `ACC`.
pub fn regular_language_rules(dfa: &Dfa, names: &DfaNames) -> Vec<RelationSpec> {
    let nq = dfa.states();
    let ab = &dfa.alphabet;
    // state after reading the node u: δ(r,ζ) on insertion, r itself on reset
    let after = |r: usize, up: AbstractUpdate| match up {
        AbstractUpdate::Ins(z) => dfa.step(r, z),
        AbstractUpdate::Reset => r,
    };
    let mut specs = Vec::new();
    for p in 0..nq {
        for q in 0..nq {
            let name = names.run(p, q);
            let init = if p == q { lt("i", "j") } else { Formula::False };
            let mut spec = RelationSpec::new(&name, &["i", "j"], init);
            for up in AbstractUpdate::all(ab) {
                let through = or((0..nq)
                    .map(|r| {
                        and(vec![
                            aux(&names.run(p, r), &["i", "u"]),
                            aux(&names.run(after(r, up), q), &["u", "j"]),
                        ])
                    })
                    .collect());
                let body = or(vec![
                    and(vec![
                        aux(&name, &["i", "j"]),
                        or(vec![leq("u", "i"), leq("j", "u")]),
                    ]),
                    and(vec![lt("i", "u"), lt("u", "j"), through]),
                ]);
                spec = spec.rule(up, body);
            }
            specs.push(spec);
        }
    }
    for q in 0..nq {
        let name = names.init(q);
        let init = if q == dfa.start {
            Formula::True
        } else {
            Formula::False
        };
        let mut spec = RelationSpec::new(&name, &["j"], init);
        for up in AbstractUpdate::all(ab) {
            let through = or((0..nq)
                .map(|r| {
                    and(vec![
                        aux(&names.init(r), &["u"]),
                        aux(&names.run(after(r, up), q), &["u", "j"]),
                    ])
                })
                .collect());
            spec = spec.rule(
                up,
                or(vec![
                    and(vec![aux(&name, &["j"]), leq("j", "u")]),
                    and(vec![lt("u", "j"), through]),
                ]),
            );
        }
        specs.push(spec);
    }
    for p in 0..nq {
        let name = names.fin(p);
        let init = if dfa.finals[p] {
            Formula::True
        } else {
            Formula::False
        };
        let mut spec = RelationSpec::new(&name, &["i"], init);
        for up in AbstractUpdate::all(ab) {
            let through = or((0..nq)
                .map(|r| {
                    and(vec![
                        aux(&names.run(p, r), &["i", "u"]),
                        aux(&names.fin(after(r, up)), &["u"]),
                    ])
                })
                .collect());
            spec = spec.rule(
                up,
                or(vec![
                    and(vec![aux(&name, &["i"]), leq("u", "i")]),
                    and(vec![lt("i", "u"), through]),
                ]),
            );
        }
        specs.push(spec);
    }
    let init = if dfa.finals[dfa.start] {
        Formula::True
    } else {
        Formula::False
    };
    let mut acc = RelationSpec::new(&names.acc(), &[], init);
    for up in AbstractUpdate::all(ab) {
        acc = acc.rule(
            up,
            or((0..nq)
                .map(|r| {
                    and(vec![
                        aux(&names.init(r), &["u"]),
                        aux(&names.fin(after(r, up)), &["u"]),
                    ])
                })
                .collect()),
        );
    }
    specs.push(acc);
    specs
}

/// Rules for `R_A(x,y)`: labeled `x ≤ y` with `w[x,y] ∈ L(dfa)`. Reads the
/// run relations of `names` (which must be part of the same program).
pub fn constraint_rules(dfa: &Dfa, names: &DfaNames, rel: &str) -> Vec<RelationSpec> {
    let ab = &dfa.alphabet;
    let nq = dfa.states();
    let mut parts = Vec::new();
    for &z in ab.symbols() {
        let q1 = dfa.step(dfa.start, z);
        if dfa.finals[q1] {
            parts.push(and(vec![eq("x", "y"), sym(z, "x")]));
        }
        for &e in ab.symbols() {
            let ends: Vec<Formula> = (0..nq)
                .filter(|&q| dfa.finals[dfa.step(q, e)])
                .map(|q| auxp(&names.run(q1, q), &["x", "y"]))
                .collect();
            if !ends.is_empty() {
                parts.push(and(vec![sym(z, "x"), sym(e, "y"), or(ends)]));
            }
        }
    }
    let body = and(vec![
        labeled(ab, "x"),
        labeled(ab, "y"),
        leq("x", "y"),
        or(parts),
    ]);
    vec![RelationSpec::new(rel, &["x", "y"], Formula::False).every(ab, body)]
}

/// Program with designated `ACC` tracking membership of the whole word.
pub fn regular_program(dfa: &Dfa) -> Result<DynamicProgram, EngineError> {
    let names = DfaNames::new("");
    DynamicProgram::new(
        dfa.alphabet.clone(),
        regular_language_rules(dfa, &names),
        Some(&names.acc()),
    )
}

/// Program maintaining the run relations and `R_A` for `dfa`, designated `R_A`.
pub fn constraint_program(dfa: &Dfa) -> Result<DynamicProgram, EngineError> {
    let names = DfaNames::new("");
    let mut specs = regular_language_rules(dfa, &names);
    specs.extend(constraint_rules(dfa, &names, "R_A"));
    DynamicProgram::new(dfa.alphabet.clone(), specs, Some("R_A"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::parse("ab").unwrap()
    }

    #[test]
    fn parse_and_match() {
        let r = parse_regex("ab*", &ab()).unwrap();
        for (w, ok) in [
            ("a", true),
            ("ab", true),
            ("abb", true),
            ("b", false),
            ("", false),
        ] {
            assert_eq!(regex_matches(&r, w), ok, "{w}");
            assert_eq!(dfa_from_regex("ab*", &ab()).unwrap().accepts(w), ok);
        }
        assert!(parse_regex("a|", &ab()).is_ok());
        assert!(parse_regex("(a", &ab()).is_err());
        assert_eq!(parse_regex("ac", &ab()).unwrap_err().pos, 1);
        assert!(parse_regex("x{a}", &ab()).is_err());
        let f = parse_regex_formula(".* x{ab}.*", &ab()).unwrap();
        assert_eq!(f.vars(), vec!["x".to_string()]);
    }

    #[test]
    fn wine_or_cake() {
        let a = Alphabet::parse("winecak").unwrap();
        let d = dfa_from_regex("(wine)|(cake)", &a).unwrap();
        assert!(d.accepts("wine") && d.accepts("cake"));
        assert!(!d.accepts("win") && !d.accepts("winecake") && !d.accepts(""));
    }

    #[test]
    fn empty_and_epsilon() {
        let d = dfa_from_regex("[]", &ab()).unwrap();
        assert!(d.is_empty());
        let e = dfa_from_regex("()", &ab()).unwrap();
        assert!(e.accepts("") && !e.accepts("a"));
    }
}
