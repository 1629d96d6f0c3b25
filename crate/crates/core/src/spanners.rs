//! Document spanners: spans, regex formulas with capture variables, the
//! spanner algebra with its static semantics, vset-path decomposition, and
//! the maintenance of regular and core spanners over the dynamic word.
//!
//! The maintained spanner relation has two columns per variable (sorted by
//! name). A span `⟨i,j⟩` becomes the nodes at positions `i` and `j`, where a
//! position one past the end is `$`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::base::{base_specs, labeled, FIRST, LAST, NEXT};
use crate::engine::{DynamicProgram, EngineError, RelationSpec};
use crate::formula::*;
use crate::regular::{
    compile_nfa, determinize_from, parse_regex_formula, regular_language_rules, Dfa, DfaNames,
    Label, Nfa, Regex, RegexError,
};
use crate::relation::{Relation, Tuple};
use crate::relext::with_base;
use crate::splog::{self, close_col, open_col, RegisteredRelation, SpLog, SpLogError};
use crate::word::{Alphabet, WordStructure};

#[derive(Debug, Error)]
pub enum SpannerError {
    #[error(transparent)]
    Regex(#[from] RegexError),
    #[error("regex formula is not functional: {0}")]
    NotFunctional(String),
    #[error("incompatible operands: {0:?} vs {1:?}")]
    Incompatible(Vec<String>, Vec<String>),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("realization must have free variables x_p, x_c per spanner variable; found {0:?}")]
    Realization(Vec<String>),
    #[error(transparent)]
    SpLog(#[from] SpLogError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// 1-based span `⟨i,j⟩` with `i ≤ j`; content is `w[i..j-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Span {
    pub i: usize,
    pub j: usize,
}

impl Span {
    pub fn new(i: usize, j: usize) -> Self {
        assert!(1 <= i && i <= j, "bad span ⟨{i},{j}⟩");
        Span { i, j }
    }

    pub fn content<'a>(&self, w: &'a [char]) -> &'a [char] {
        &w[self.i - 1..self.j - 1]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "⟨{},{}⟩", self.i, self.j)
    }
}

/// A `(V,w)`-tuple.
pub type VTuple = BTreeMap<String, Span>;
pub type SpannerRelation = BTreeSet<VTuple>;

// ---- static semantics of regex formulas ----

fn ends_with_spans(
    r: &Regex,
    w: &[char],
    i: usize,
) -> Result<BTreeSet<(usize, VTuple)>, SpannerError> {
    Ok(match r {
        Regex::Empty => BTreeSet::new(),
        Regex::Epsilon => BTreeSet::from([(i, VTuple::new())]),
        Regex::Lit(c) => (w.get(i) == Some(c))
            .then(|| (i + 1, VTuple::new()))
            .into_iter()
            .collect(),
        Regex::Any => (i < w.len())
            .then(|| (i + 1, VTuple::new()))
            .into_iter()
            .collect(),
        Regex::Alt(a, b) => {
            let mut s = ends_with_spans(a, w, i)?;
            s.extend(ends_with_spans(b, w, i)?);
            s
        }
        Regex::Concat(a, b) => {
            let mut out = BTreeSet::new();
            for (j, m1) in ends_with_spans(a, w, i)? {
                for (k, m2) in ends_with_spans(b, w, j)? {
                    if m1.keys().any(|x| m2.contains_key(x)) {
                        return Err(SpannerError::NotFunctional(format!(
                            "variable bound twice in {r}"
                        )));
                    }
                    let mut m = m1.clone();
                    m.extend(m2);
                    out.insert((k, m));
                }
            }
            out
        }
        Regex::Star(a) => {
            if !a.vars().is_empty() {
                return Err(SpannerError::NotFunctional(format!(
                    "variable under a star in {r}"
                )));
            }
            let mut seen = BTreeSet::from([i]);
            let mut todo = vec![i];
            while let Some(j) = todo.pop() {
                for (k, _) in ends_with_spans(a, w, j)? {
                    if seen.insert(k) {
                        todo.push(k);
                    }
                }
            }
            seen.into_iter().map(|j| (j, VTuple::new())).collect()
        }
        Regex::Bind(x, a) => {
            let mut out = BTreeSet::new();
            for (j, mut m) in ends_with_spans(a, w, i)? {
                if m.contains_key(x) {
                    return Err(SpannerError::NotFunctional(format!(
                        "{x} bound inside itself"
                    )));
                }
                m.insert(x.clone(), Span::new(i + 1, j + 1));
                out.insert((j, m));
            }
            out
        }
    })
}

/// `[α](w)` by recursion on the regex formula.
pub fn eval_regex_formula(r: &Regex, w: &str) -> Result<SpannerRelation, SpannerError> {
    let cs: Vec<char> = w.chars().collect();
    let vars: BTreeSet<String> = r.vars().into_iter().collect();
    let mut out = SpannerRelation::new();
    for (j, m) in ends_with_spans(r, &cs, 0)? {
        if j == cs.len() {
            if m.keys().cloned().collect::<BTreeSet<_>>() != vars {
                return Err(SpannerError::NotFunctional(format!(
                    "not every variable is bound in {r}"
                )));
            }
            out.insert(m);
        }
    }
    Ok(out)
}

// ---- algebra ----

#[derive(Debug, Clone, PartialEq)]
pub enum AlgebraExpr {
    Rgx(Regex),
    Union(Box<AlgebraExpr>, Box<AlgebraExpr>),
    Proj(Vec<String>, Box<AlgebraExpr>),
    Join(Box<AlgebraExpr>, Box<AlgebraExpr>),
    SelectEq(String, String, Box<AlgebraExpr>),
    Diff(Box<AlgebraExpr>, Box<AlgebraExpr>),
}

impl AlgebraExpr {
    pub fn vars(&self) -> BTreeSet<String> {
        match self {
            AlgebraExpr::Rgx(r) => r.vars().into_iter().collect(),
            AlgebraExpr::Union(a, _) | AlgebraExpr::Diff(a, _) => a.vars(),
            AlgebraExpr::Proj(ys, _) => ys.iter().cloned().collect(),
            AlgebraExpr::Join(a, b) => a.vars().union(&b.vars()).cloned().collect(),
            AlgebraExpr::SelectEq(_, _, e) => e.vars(),
        }
    }

    pub fn has_diff(&self) -> bool {
        match self {
            AlgebraExpr::Rgx(_) => false,
            AlgebraExpr::Diff(..) => true,
            AlgebraExpr::Union(a, b) | AlgebraExpr::Join(a, b) => a.has_diff() || b.has_diff(),
            AlgebraExpr::Proj(_, e) | AlgebraExpr::SelectEq(_, _, e) => e.has_diff(),
        }
    }

    /// Check operand compatibility and variable references.
    pub fn check(&self, alphabet: &Alphabet) -> Result<(), SpannerError> {
        match self {
            AlgebraExpr::Rgx(r) => check_functional(&compile_nfa(r, alphabet)),
            AlgebraExpr::Union(a, b) | AlgebraExpr::Diff(a, b) => {
                a.check(alphabet)?;
                b.check(alphabet)?;
                let (va, vb) = (a.vars(), b.vars());
                if va != vb {
                    return Err(SpannerError::Incompatible(
                        va.into_iter().collect(),
                        vb.into_iter().collect(),
                    ));
                }
                Ok(())
            }
            AlgebraExpr::Join(a, b) => {
                a.check(alphabet)?;
                b.check(alphabet)
            }
            AlgebraExpr::Proj(ys, e) => {
                e.check(alphabet)?;
                let v = e.vars();
                match ys.iter().find(|y| !v.contains(*y)) {
                    Some(y) => Err(SpannerError::UnknownVariable(y.clone())),
                    None => Ok(()),
                }
            }
            AlgebraExpr::SelectEq(x, y, e) => {
                e.check(alphabet)?;
                let v = e.vars();
                match [x, y].into_iter().find(|z| !v.contains(*z)) {
                    Some(z) => Err(SpannerError::UnknownVariable(z.clone())),
                    None => Ok(()),
                }
            }
        }
    }
}

/// Static semantics of the algebra, including difference.
pub fn eval_static(e: &AlgebraExpr, w: &str) -> Result<SpannerRelation, SpannerError> {
    let cs: Vec<char> = w.chars().collect();
    Ok(match e {
        AlgebraExpr::Rgx(r) => eval_regex_formula(r, w)?,
        AlgebraExpr::Union(a, b) => {
            let (va, vb) = (a.vars(), b.vars());
            if va != vb {
                return Err(SpannerError::Incompatible(
                    va.into_iter().collect(),
                    vb.into_iter().collect(),
                ));
            }
            eval_static(a, w)?
                .union(&eval_static(b, w)?)
                .cloned()
                .collect()
        }
        AlgebraExpr::Diff(a, b) => {
            let (va, vb) = (a.vars(), b.vars());
            if va != vb {
                return Err(SpannerError::Incompatible(
                    va.into_iter().collect(),
                    vb.into_iter().collect(),
                ));
            }
            eval_static(a, w)?
                .difference(&eval_static(b, w)?)
                .cloned()
                .collect()
        }
        AlgebraExpr::Proj(ys, a) => eval_static(a, w)?
            .into_iter()
            .map(|m| m.into_iter().filter(|(x, _)| ys.contains(x)).collect())
            .collect(),
        AlgebraExpr::Join(a, b) => {
            let (ra, rb) = (eval_static(a, w)?, eval_static(b, w)?);
            let mut out = SpannerRelation::new();
            for m1 in &ra {
                for m2 in &rb {
                    if m1.iter().all(|(x, s)| m2.get(x).is_none_or(|t| t == s)) {
                        let mut m = m1.clone();
                        m.extend(m2.iter().map(|(x, s)| (x.clone(), *s)));
                        out.insert(m);
                    }
                }
            }
            out
        }
        AlgebraExpr::SelectEq(x, y, a) => eval_static(a, w)?
            .into_iter()
            .filter(|m| m[x].content(&cs) == m[y].content(&cs))
            .collect(),
    })
}

/// Parse `(union e e)`, `(proj (x y) e)`, `(join e e)`, `(seleq x y e)`,
/// `(diff e e)`, `(rgx "...")`.
pub fn parse_algebra(text: &str, alphabet: &Alphabet) -> Result<AlgebraExpr, SpannerError> {
    struct P<'a> {
        s: &'a str,
        pos: usize,
        alphabet: &'a Alphabet,
    }
    impl P<'_> {
        fn err(&self, msg: &str) -> SpannerError {
            SpannerError::Parse {
                pos: self.pos,
                msg: msg.to_string(),
            }
        }
        fn ws(&mut self) {
            let rest = &self.s[self.pos..];
            self.pos += rest.len() - rest.trim_start().len();
        }
        fn eat(&mut self, c: char) -> Result<(), SpannerError> {
            self.ws();
            if self.s[self.pos..].starts_with(c) {
                self.pos += c.len_utf8();
                Ok(())
            } else {
                Err(self.err(&format!("expected {c:?}")))
            }
        }
        fn word(&mut self) -> Result<String, SpannerError> {
            self.ws();
            let rest = &self.s[self.pos..];
            let len = rest
                .find(|c: char| c.is_whitespace() || c == '(' || c == ')' || c == '"')
                .unwrap_or(rest.len());
            if len == 0 {
                return Err(self.err("expected a word"));
            }
            self.pos += len;
            Ok(rest[..len].to_string())
        }
        fn expr(&mut self) -> Result<AlgebraExpr, SpannerError> {
            self.eat('(')?;
            let head = self.word()?;
            let e = match head.as_str() {
                "rgx" => {
                    self.eat('"')?;
                    let start = self.pos;
                    let end = self.s[start..]
                        .find('"')
                        .ok_or_else(|| self.err("unterminated string"))?;
                    let r = parse_regex_formula(&self.s[start..start + end], self.alphabet)
                        .map_err(|e| SpannerError::Parse {
                            pos: start + e.pos,
                            msg: e.msg,
                        })?;
                    self.pos = start + end + 1;
                    AlgebraExpr::Rgx(r)
                }
                "union" | "join" | "diff" => {
                    let a = Box::new(self.expr()?);
                    let b = Box::new(self.expr()?);
                    match head.as_str() {
                        "union" => AlgebraExpr::Union(a, b),
                        "join" => AlgebraExpr::Join(a, b),
                        _ => AlgebraExpr::Diff(a, b),
                    }
                }
                "proj" => {
                    self.eat('(')?;
                    let mut ys = Vec::new();
                    loop {
                        self.ws();
                        if self.s[self.pos..].starts_with(')') {
                            self.pos += 1;
                            break;
                        }
                        ys.push(self.word()?);
                    }
                    AlgebraExpr::Proj(ys, Box::new(self.expr()?))
                }
                "seleq" => {
                    let x = self.word()?;
                    let y = self.word()?;
                    AlgebraExpr::SelectEq(x, y, Box::new(self.expr()?))
                }
                _ => return Err(self.err(&format!("unknown operator {head:?}"))),
            };
            self.eat(')')?;
            Ok(e)
        }
    }
    let mut p = P {
        s: text,
        pos: 0,
        alphabet,
    };
    let e = p.expr()?;
    p.ws();
    if p.pos != text.len() {
        return Err(p.err("trailing input"));
    }
    e.check(alphabet)?;
    Ok(e)
}

// ---- encoding ----

/// Node at 1-based position `p`, or `$` one past the end.
fn node_at_position(ws: &WordStructure, nodes: &[usize], p: usize) -> usize {
    nodes.get(p - 1).copied().unwrap_or(ws.dollar())
}

/// The spanner relation: two columns per variable of `order`.
pub fn encode(rel: &SpannerRelation, ws: &WordStructure, order: &[String]) -> Relation {
    let nodes = ws.labeled_nodes();
    let rows = rel.iter().map(|m| {
        order
            .iter()
            .flat_map(|x| {
                let s = m[x];
                [
                    node_at_position(ws, &nodes, s.i),
                    node_at_position(ws, &nodes, s.j),
                ]
            })
            .collect::<Tuple>()
    });
    Relation::from_tuples(2 * order.len(), rows)
}

/// Inverse of [`encode`].
pub fn decode(rel: &Relation, ws: &WordStructure, order: &[String]) -> SpannerRelation {
    let nodes = ws.labeled_nodes();
    let pos = |x: usize| {
        if x == ws.dollar() {
            nodes.len() + 1
        } else {
            nodes.iter().position(|&y| y == x).expect("labeled node") + 1
        }
    };
    rel.rows()
        .iter()
        .map(|t| {
            order
                .iter()
                .enumerate()
                .map(|(k, x)| (x.clone(), Span::new(pos(t[2 * k]), pos(t[2 * k + 1]))))
                .collect()
        })
        .collect()
}

// ---- vset-paths ----

/// A vset-path: `ops.len() + 1` deterministic segments joined by variable operations.
#[derive(Debug, Clone)]
pub struct VsetPath {
    pub ops: Vec<Label>,
    pub segments: Vec<Dfa>,
}

impl VsetPath {
    pub fn vars(&self) -> BTreeSet<String> {
        self.ops
            .iter()
            .filter_map(|l| match l {
                Label::Open(x) => Some(x.clone()),
                _ => None,
            })
            .collect()
    }
}

/// Every accepting path of the NFA carries each variable's open then close
/// operation exactly once.
pub fn check_functional(nfa: &Nfa) -> Result<(), SpannerError> {
    let vars: Vec<String> = {
        let mut v: BTreeSet<String> = BTreeSet::new();
        for row in &nfa.trans {
            for (l, _) in row {
                if let Label::Open(x) | Label::Close(x) = l {
                    v.insert(x.clone());
                }
            }
        }
        v.into_iter().collect()
    };
    // status per variable: 0 unopened, 1 open, 2 closed, 3 error
    let start = (nfa.start, vec![0u8; vars.len()]);
    let mut seen = BTreeSet::from([start.clone()]);
    let mut todo = vec![start];
    while let Some((q, st)) = todo.pop() {
        if nfa.finals[q] && st.iter().any(|&s| s != 2) {
            return Err(SpannerError::NotFunctional(
                "an accepting run misuses a variable".into(),
            ));
        }
        for (l, t) in &nfa.trans[q] {
            let mut st2 = st.clone();
            match l {
                Label::Open(x) => {
                    let k = vars.binary_search(x).unwrap();
                    st2[k] = if st2[k] == 0 { 1 } else { 3 };
                }
                Label::Close(x) => {
                    let k = vars.binary_search(x).unwrap();
                    st2[k] = if st2[k] == 1 { 2 } else { 3 };
                }
                _ => {}
            }
            if seen.insert((*t, st2.clone())) {
                todo.push((*t, st2));
            }
        }
    }
    Ok(())
}

fn segment(nfa: &Nfa, from: usize, to: &[bool]) -> Dfa {
    determinize_from(nfa, &BTreeSet::from([from]), to, |l| *l == Label::Eps)
}

/// Union of vset-paths with the same spans as the (functional) automaton:
/// one path per order of operation edges with non-empty segments.
pub fn to_vset_paths(nfa: &Nfa) -> Result<Vec<VsetPath>, SpannerError> {
    check_functional(nfa)?;
    let mut edges: Vec<(usize, Label, usize)> = Vec::new();
    for (q, row) in nfa.trans.iter().enumerate() {
        for (l, t) in row {
            if !matches!(l, Label::Eps | Label::Sym(_)) {
                edges.push((q, l.clone(), *t));
            }
        }
    }
    let nvars = edges
        .iter()
        .filter_map(|(_, l, _)| {
            if let Label::Open(x) = l {
                Some(x)
            } else {
                None
            }
        })
        .collect::<BTreeSet<_>>()
        .len();
    let mut out = Vec::new();
    let mut chosen: Vec<usize> = Vec::new();
    let mut segs: Vec<Dfa> = Vec::new();
    #[allow(clippy::too_many_arguments)]
    fn go(
        nfa: &Nfa,
        edges: &[(usize, Label, usize)],
        total: usize,
        from: usize,
        chosen: &mut Vec<usize>,
        segs: &mut Vec<Dfa>,
        out: &mut Vec<VsetPath>,
    ) {
        if chosen.len() == total {
            let last = segment(nfa, from, &nfa.finals);
            if !last.is_empty() {
                let mut s = segs.clone();
                s.push(last);
                out.push(VsetPath {
                    ops: chosen.iter().map(|&e| edges[e].1.clone()).collect(),
                    segments: s,
                });
            }
            return;
        }
        for (k, (q, l, t)) in edges.iter().enumerate() {
            let used = |lab: &Label| chosen.iter().any(|&e| &edges[e].1 == lab);
            let ok = match l {
                Label::Open(_) => !used(l),
                Label::Close(x) => !used(l) && used(&Label::Open(x.clone())),
                _ => false,
            };
            if !ok {
                continue;
            }
            let mut target = vec![false; nfa.states()];
            target[*q] = true;
            let seg = segment(nfa, from, &target);
            if seg.is_empty() {
                continue;
            }
            chosen.push(k);
            segs.push(seg);
            go(nfa, edges, total, *t, chosen, segs, out);
            segs.pop();
            chosen.pop();
        }
    }
    go(
        nfa,
        &edges,
        2 * nvars,
        nfa.start,
        &mut chosen,
        &mut segs,
        &mut out,
    );
    Ok(out)
}

// ---- maintenance ----

/// Designated relation of spanner programs.
pub const SPANNER: &str = "R_P";

fn op_column(l: &Label) -> String {
    match l {
        Label::Open(x) => open_col(x),
        Label::Close(x) => close_col(x),
        _ => unreachable!("not a variable operation"),
    }
}

/// Names of the automaton relations for segment `m` of path `pi`.
pub fn segment_names(pi: usize, m: usize) -> DfaNames {
    DfaNames::new(&format!("S{pi}_{m}_"))
}

/// Quantifier-free rules maintaining the spanner relation of a union of
/// vset-paths; columns follow the sorted variable names.
pub fn regular_spanner_specs(
    paths: &[VsetPath],
    vars: &BTreeSet<String>,
    alphabet: &Alphabet,
) -> Vec<RelationSpec> {
    let mut specs = Vec::new();
    let mut bodies = Vec::new();
    let mut eps_path = false;
    for (pi, path) in paths.iter().enumerate() {
        let names: Vec<DfaNames> = (0..path.segments.len())
            .map(|m| segment_names(pi, m))
            .collect();
        for (d, n) in path.segments.iter().zip(&names) {
            specs.extend(regular_language_rules(d, n));
        }
        eps_path |= path.segments.iter().all(|d| d.finals[d.start]);
        if path.ops.is_empty() {
            bodies.push(aux_acc(&names[0]));
            continue;
        }
        let cols: Vec<String> = path.ops.iter().map(op_column).collect();
        let mut conj = Vec::new();
        for c in &cols {
            conj.push(or(vec![labeled(alphabet, c), eq(c.as_str(), "$")]));
        }
        // before the first operation
        let d0 = &path.segments[0];
        conj.push(or((0..d0.states())
            .filter(|&f| d0.finals[f])
            .map(|f| auxp(&names[0].init(f), &[cols[0].as_str()]))
            .collect()));
        // between consecutive operations
        for m in 1..cols.len() {
            let d = &path.segments[m];
            let (a, b) = (cols[m - 1].as_str(), cols[m].as_str());
            let mut alts = Vec::new();
            if d.finals[d.start] {
                alts.push(eq(a, b));
            }
            for &z in alphabet.symbols() {
                let q = d.step(d.start, z);
                let ends: Vec<Formula> = (0..d.states())
                    .filter(|&f| d.finals[f])
                    .map(|f| auxp(&names[m].run(q, f), &[a, b]))
                    .collect();
                alts.push(and(vec![lt(a, b), sym(z, a), or(ends)]));
            }
            conj.push(or(alts));
        }
        // after the last operation
        let dl = path.segments.last().expect("segments");
        let last = cols.last().expect("ops").as_str();
        let mut alts = Vec::new();
        if dl.finals[dl.start] {
            alts.push(eq(last, "$"));
        }
        let nl = names.last().expect("names");
        for &z in alphabet.symbols() {
            alts.push(and(vec![
                sym(z, last),
                auxp(&nl.fin(dl.step(dl.start, z)), &[last]),
            ]));
        }
        conj.push(or(alts));
        bodies.push(and(conj));
    }
    let head: Vec<String> = splog::columns(vars);
    let head: Vec<&str> = head.iter().map(String::as_str).collect();
    let init = if eps_path {
        and(head.iter().map(|c| eq(*c, "$")).collect())
    } else {
        Formula::False
    };
    specs.push(RelationSpec::new(SPANNER, &head, init).every(alphabet, or(bodies)));
    specs
}

fn aux_acc(n: &DfaNames) -> Formula {
    auxp(&n.acc(), &[] as &[&str])
}

pub fn regular_spanner_rules(
    paths: &[VsetPath],
    vars: &BTreeSet<String>,
    alphabet: &Alphabet,
) -> Result<DynamicProgram, SpannerError> {
    Ok(DynamicProgram::new(
        alphabet.clone(),
        regular_spanner_specs(paths, vars, alphabet),
        Some(SPANNER),
    )?)
}

/// Compile a regex formula (text) to its regular spanner program.
pub fn regex_spanner_program(
    text: &str,
    alphabet: &Alphabet,
) -> Result<DynamicProgram, SpannerError> {
    let r = parse_regex_formula(text, alphabet)?;
    let nfa = compile_nfa(&r, alphabet);
    let paths = to_vset_paths(&nfa)?;
    regular_spanner_rules(&paths, &r.vars().into_iter().collect(), alphabet)
}

/// Realization variable names for spanner variable `x`.
pub fn realization_vars(x: &str) -> (String, String) {
    (format!("{x}_p"), format!("{x}_c"))
}

/// Maintain a core spanner from a SpLog (or SpLog¬) realization whose free
/// variables are `x_p`, `x_c` for every spanner variable `x`.
pub fn core_spanner_rules(
    realization: &SpLog,
    vars: &[String],
    alphabet: &Alphabet,
    registry: &[RegisteredRelation],
) -> Result<DynamicProgram, SpannerError> {
    let free = realization.free();
    let want: BTreeSet<String> = vars
        .iter()
        .flat_map(|x| {
            let (p, c) = realization_vars(x);
            [p, c]
        })
        .collect();
    if free != want {
        return Err(SpannerError::Realization(free.into_iter().collect()));
    }
    let inner = if realization.has_negation() {
        splog::compile_neg(realization, alphabet, registry)?
    } else {
        splog::compile(realization, alphabet, registry)?
    };
    let mut specs: Vec<RelationSpec> = inner.specs().to_vec();
    let args = splog::columns(&free);
    let mut conj = vec![auxp(splog::TOP, &args)];
    for x in vars {
        let (p, c) = realization_vars(x);
        let (pa, pb, ca, cb) = (open_col(&p), close_col(&p), open_col(&c), close_col(&c));
        let (o, cl) = (open_col(x), close_col(x));
        let after = |a: &str, v: &str| {
            or(vec![
                auxp(NEXT, &[a, v]),
                and(vec![auxp(LAST, &[a]), eq(v, "$")]),
            ])
        };
        // o is the node at position |σ(x_p)| + 1
        conj.push(or(vec![
            and(vec![
                eq(pa.as_str(), "$"),
                eq(pb.as_str(), "$"),
                auxp(FIRST, &[o.as_str()]),
            ]),
            and(vec![auxp(FIRST, &[pa.as_str()]), after(&pb, &o)]),
        ]));
        conj.push(or(vec![
            and(vec![
                eq(ca.as_str(), "$"),
                eq(cb.as_str(), "$"),
                eq(cl.as_str(), o.as_str()),
            ]),
            and(vec![eq(ca.as_str(), o.as_str()), after(&cb, &cl)]),
        ]));
    }
    let head_set: BTreeSet<String> = vars.iter().cloned().collect();
    let head = splog::columns(&head_set);
    let head: Vec<&str> = head.iter().map(String::as_str).collect();
    let init = if !splog::models(realization, "", registry).is_empty() {
        and(head.iter().map(|c| eq(*c, "$")).collect())
    } else {
        Formula::False
    };
    specs.push(
        RelationSpec::new(SPANNER, &head, init).every(alphabet, exists_owned(&args, and(conj))),
    );
    let base_names: BTreeSet<String> = base_specs(alphabet).into_iter().map(|s| s.name).collect();
    let specs: Vec<RelationSpec> = specs
        .into_iter()
        .filter(|s| !base_names.contains(&s.name))
        .collect();
    Ok(with_base(alphabet, specs, Some(SPANNER))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wine_or_cake_spans() {
        let a = Alphabet::parse("winecak").unwrap();
        let r = parse_regex_formula(".*x{(wine)|(cake)}.*", &a).unwrap();
        let rel = eval_regex_formula(&r, "winecake").unwrap();
        let spans: BTreeSet<Span> = rel.iter().map(|m| m["x"]).collect();
        assert_eq!(spans, BTreeSet::from([Span::new(1, 5), Span::new(5, 9)]));
    }

    #[test]
    fn banana_repeat() {
        let a = Alphabet::parse("abn").unwrap();
        let e = parse_algebra(r#"(seleq x y (rgx ".*x{.+}y{.+}.*"))"#, &a).unwrap();
        let rel = eval_static(&e, "banana").unwrap();
        assert!(rel
            .iter()
            .any(|m| m["x"] == Span::new(2, 4) && m["y"] == Span::new(4, 6)));
    }

    #[test]
    fn non_functional_rejected() {
        let a = Alphabet::parse("ab").unwrap();
        for bad in ["x{a}*", "x{a}|b", "x{a}x{b}", "x{x{a}}"] {
            let r = parse_regex_formula(bad, &a).unwrap();
            assert!(check_functional(&compile_nfa(&r, &a)).is_err(), "{bad}");
        }
        let ok = parse_regex_formula("x{a}|x{b}", &a).unwrap();
        check_functional(&compile_nfa(&ok, &a)).unwrap();
    }

    #[test]
    fn algebra_errors() {
        let a = Alphabet::parse("ab").unwrap();
        assert!(matches!(
            parse_algebra(r#"(union (rgx "x{a}") (rgx "a"))"#, &a),
            Err(SpannerError::Incompatible(..))
        ));
        assert!(matches!(
            parse_algebra(r#"(proj (y) (rgx "x{a}"))"#, &a),
            Err(SpannerError::UnknownVariable(_))
        ));
        assert!(parse_algebra(r#"(rgx "x{a}""#, &a).is_err());
    }
}
