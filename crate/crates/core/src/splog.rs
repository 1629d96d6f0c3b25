//! SpLog and SpLog¬: syntax, static semantics, and compilation into dynamic
//! programs over endpoint pairs.
//!
//! A free variable `x` (other than the main variable `W`) is represented by two
//! columns `x_o`, `x_c`: a labeled-endpoint interval holding `σ(x)`, or `($,$)`
//! for the empty word. Every compiled relation contains all representations of
//! each satisfying assignment, so conjunction, disjunction, projection and
//! negation act on it directly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::base::labeled;
use crate::engine::{DynamicProgram, EngineError, RelationSpec};
use crate::formula::*;
use crate::patterns::{self, all_factorizations, Item, Kind, Pattern, PatternError};
use crate::regular::{
    compile_nfa, constraint_rules, determinize, parse_regex, regex_matches, regular_language_rules,
    DfaNames, Regex, RegexError,
};
use crate::relext::{self, with_base};
use crate::word::Alphabet;

/// Name of the main variable.
pub const MAIN: &str = "W";

#[derive(Debug, Error)]
pub enum SpLogError {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    Regex(#[from] RegexError),
    #[error("disjuncts have different free variables: {0:?} vs {1:?}")]
    OrFreeMismatch(Vec<String>, Vec<String>),
    #[error("cannot quantify {0}: not a free variable other than W")]
    BadExists(String),
    #[error("main variable W on the right side of an equation")]
    MainOnRight,
    #[error("negation is only allowed in SpLog¬ mode")]
    NegationNotAllowed,
    #[error("constraint on {0} must be conjoined with a formula in which {0} is free")]
    UnanchoredConstraint(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("relation {rel} takes {expected} variables, got {got}")]
    RelArity {
        rel: String,
        expected: usize,
        got: usize,
    },
    #[error("relation constraints cannot use the main variable")]
    RelOnMain,
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpLog {
    /// `W ≐ η`.
    WordEq(Pattern),
    And(Box<SpLog>, Box<SpLog>),
    Or(Box<SpLog>, Box<SpLog>),
    Exists(String, Box<SpLog>),
    /// `C_A(x)` for the language of a regex.
    Constraint(String, Regex),
    /// A registered string relation applied to variables.
    RelConstraint(String, Vec<String>),
    Not(Box<SpLog>),
}

impl SpLog {
    pub fn and(a: SpLog, b: SpLog) -> SpLog {
        SpLog::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: SpLog, b: SpLog) -> SpLog {
        SpLog::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(x: &str, f: SpLog) -> SpLog {
        SpLog::Exists(x.to_string(), Box::new(f))
    }

    pub fn negate(f: SpLog) -> SpLog {
        SpLog::Not(Box::new(f))
    }

    /// Free variables other than `W`.
    pub fn free(&self) -> BTreeSet<String> {
        match self {
            SpLog::WordEq(p) => p.vars().into_iter().filter(|x| x != MAIN).collect(),
            SpLog::And(a, b) | SpLog::Or(a, b) => a.free().union(&b.free()).cloned().collect(),
            SpLog::Exists(x, f) => {
                let mut s = f.free();
                s.remove(x);
                s
            }
            SpLog::Constraint(x, _) => [x.clone()].into_iter().filter(|x| x != MAIN).collect(),
            SpLog::RelConstraint(_, xs) => xs.iter().cloned().collect(),
            SpLog::Not(f) => f.free(),
        }
    }

    pub fn has_negation(&self) -> bool {
        match self {
            SpLog::Not(_) => true,
            SpLog::And(a, b) | SpLog::Or(a, b) => a.has_negation() || b.has_negation(),
            SpLog::Exists(_, f) => f.has_negation(),
            _ => false,
        }
    }

    fn is_constraint(&self) -> bool {
        matches!(self, SpLog::Constraint(..) | SpLog::RelConstraint(..))
    }

    fn constraint_vars(&self) -> Vec<String> {
        match self {
            SpLog::Constraint(x, _) => vec![x.clone()],
            SpLog::RelConstraint(_, xs) => xs.clone(),
            _ => vec![],
        }
    }
}

impl fmt::Display for SpLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpLog::WordEq(p) => write!(f, "eq(W, {p})"),
            SpLog::And(a, b) => write!(f, "and({a}, {b})"),
            SpLog::Or(a, b) => write!(f, "or({a}, {b})"),
            SpLog::Exists(x, g) => write!(f, "exists({x}, {g})"),
            SpLog::Constraint(x, r) => write!(f, "constr({x}, /{r}/)"),
            SpLog::RelConstraint(r, xs) => write!(f, "rel({r}, {})", xs.join(", ")),
            SpLog::Not(g) => write!(f, "not({g})"),
        }
    }
}

// ---- registered relations ----

type StrPred = dyn Fn(&[&str]) -> bool + Send + Sync;

/// A maintained relation over variable images usable in `rel(...)`.
#[derive(Clone)]
pub struct RegisteredRelation {
    pub name: String,
    /// Number of string arguments; the maintained relation has twice as many columns.
    pub args: usize,
    pub specs: fn(&Alphabet) -> Vec<RelationSpec>,
    /// Static meaning on non-empty strings.
    pub holds: Arc<StrPred>,
}

impl fmt::Debug for RegisteredRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RegisteredRelation({}/{})", self.name, self.args)
    }
}

fn count(s: &str, z: char) -> usize {
    s.chars().filter(|&c| c == z).count()
}

fn reg(
    name: &str,
    specs: fn(&Alphabet) -> Vec<RelationSpec>,
    holds: impl Fn(&str, &str) -> bool + Send + Sync + 'static,
) -> RegisteredRelation {
    RegisteredRelation {
        name: name.to_string(),
        args: 2,
        specs,
        holds: Arc::new(move |a: &[&str]| holds(a[0], a[1])),
    }
}

/// The string relations of the extension library, by their relation names.
pub fn builtin_relations() -> Vec<RegisteredRelation> {
    vec![
        reg(relext::LEN, relext::len_rules, |s, t| {
            s.chars().count() == t.chars().count()
        }),
        reg(relext::FEQ, relext::feq_rules, |s, t| s == t),
        reg(relext::REV, relext::rev_rules, |s, t| {
            s.chars().eq(t.chars().rev())
        }),
        reg(relext::PERM, relext::perm_rules, |s, t| {
            let (mut a, mut b): (Vec<char>, Vec<char>) = (s.chars().collect(), t.chars().collect());
            a.sort();
            b.sort();
            a == b
        }),
        reg(relext::SCATT, relext::scatt_rules, |s, t| {
            let mut it = t.chars();
            s.chars().all(|c| it.any(|d| d == c))
        }),
        reg(relext::LT, relext::lt_rules, |s, t| {
            s.chars().count() < t.chars().count()
        }),
        reg(
            "R_num_a",
            |a| relext::num_rules(a, 'a'),
            |s, t| count(s, 'a') == count(t, 'a'),
        ),
        reg(
            "R_num_b",
            |a| relext::num_rules(a, 'b'),
            |s, t| count(s, 'b') == count(t, 'b'),
        ),
    ]
}

fn lookup<'a>(registry: &'a [RegisteredRelation], name: &str) -> Option<&'a RegisteredRelation> {
    registry.iter().find(|r| r.name == name)
}

// ---- parsing ----

struct Parser<'a> {
    text: &'a str,
    pos: usize,
    alphabet: &'a Alphabet,
}

impl Parser<'_> {
    fn err(&self, msg: impl Into<String>) -> SpLogError {
        SpLogError::Parse {
            pos: self.pos,
            msg: msg.into(),
        }
    }

    fn rest(&self) -> &str {
        &self.text[self.pos..]
    }

    fn ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.text.len() - trimmed.len();
    }

    fn expect(&mut self, c: char) -> Result<(), SpLogError> {
        self.ws();
        if self.rest().starts_with(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected {c:?}")))
        }
    }

    fn ident(&mut self) -> Result<String, SpLogError> {
        self.ws();
        let len = self
            .rest()
            .find(|c: char| !(c.is_alphanumeric() || c == '_'))
            .unwrap_or(self.rest().len());
        let id = self.rest()[..len].to_string();
        if id.is_empty() || !id.starts_with(|c: char| c.is_alphabetic()) {
            return Err(self.err("expected an identifier"));
        }
        self.pos += len;
        Ok(id)
    }

    // Raw text up to the closing parenthesis of the current call.
    fn until_close(&mut self) -> Result<(usize, String), SpLogError> {
        let start = self.pos;
        let end = self
            .rest()
            .find(')')
            .ok_or_else(|| self.err("missing ')'"))?;
        self.pos += end;
        Ok((start, self.text[start..start + end].to_string()))
    }

    fn formula(&mut self) -> Result<SpLog, SpLogError> {
        let head = self.ident()?;
        self.expect('(')?;
        let f = match head.as_str() {
            "eq" => {
                let lhs = self.ident()?;
                if lhs != MAIN {
                    return Err(self.err("left side of an equation must be W"));
                }
                self.expect(',')?;
                let (at, text) = self.until_close()?;
                let p = Pattern::parse(&text, self.alphabet).map_err(|e| match e {
                    PatternError::Parse { pos, msg } => SpLogError::Parse { pos: at + pos, msg },
                    e => e.into(),
                })?;
                SpLog::WordEq(p)
            }
            "and" | "or" => {
                let a = self.formula()?;
                self.expect(',')?;
                let mut f = self.formula()?;
                let mut acc = a;
                loop {
                    acc = if head == "and" {
                        SpLog::and(acc, f)
                    } else {
                        SpLog::or(acc, f)
                    };
                    self.ws();
                    if self.rest().starts_with(',') {
                        self.pos += 1;
                        f = self.formula()?;
                    } else {
                        break;
                    }
                }
                acc
            }
            "exists" => {
                let x = self.ident()?;
                self.expect(',')?;
                SpLog::exists(&x, self.formula()?)
            }
            "not" => SpLog::negate(self.formula()?),
            "constr" => {
                let x = self.ident()?;
                self.expect(',')?;
                self.expect('/')?;
                let start = self.pos;
                let end = self
                    .rest()
                    .find('/')
                    .ok_or_else(|| self.err("unterminated regex"))?;
                let body = &self.text[start..start + end];
                let r = parse_regex(body, self.alphabet).map_err(|e| SpLogError::Parse {
                    pos: start + e.pos,
                    msg: e.msg,
                })?;
                self.pos += end + 1;
                SpLog::Constraint(x, r)
            }
            "rel" => {
                let name = self.ident()?;
                let mut xs = Vec::new();
                loop {
                    self.ws();
                    if !self.rest().starts_with(',') {
                        break;
                    }
                    self.pos += 1;
                    xs.push(self.ident()?);
                }
                SpLog::RelConstraint(name, xs)
            }
            other => return Err(self.err(format!("unknown connective {other:?}"))),
        };
        self.expect(')')?;
        Ok(f)
    }
}

/// Parse the concrete syntax `eq(W, a <x> b)`, `and(f, g, …)`, `or(…)`,
/// `exists(x, f)`, `constr(x, /regex/)`, `rel(NAME, x, y)`, `not(f)`.
pub fn parse_splog(text: &str, alphabet: &Alphabet) -> Result<SpLog, SpLogError> {
    let mut p = Parser {
        text,
        pos: 0,
        alphabet,
    };
    let f = p.formula()?;
    p.ws();
    if !p.rest().is_empty() {
        return Err(p.err("trailing input"));
    }
    Ok(f)
}

// ---- well-formedness ----

/// Check the syntactic restrictions; `negation` enables SpLog¬.
pub fn wellformed(
    f: &SpLog,
    negation: bool,
    registry: &[RegisteredRelation],
) -> Result<(), SpLogError> {
    match f {
        SpLog::WordEq(p) => {
            if p.items
                .iter()
                .any(|it| matches!(it, Item::Var(x) if x == MAIN))
            {
                return Err(SpLogError::MainOnRight);
            }
            Ok(())
        }
        SpLog::And(a, b) => {
            for (c, other) in [(a, b), (b, a)] {
                if c.is_constraint() {
                    check_constraint(c, registry)?;
                    if other.is_constraint() {
                        return Err(SpLogError::UnanchoredConstraint(
                            c.constraint_vars().join(","),
                        ));
                    }
                    let fv = other.free();
                    for x in c.constraint_vars() {
                        if x != MAIN && !fv.contains(&x) {
                            return Err(SpLogError::UnanchoredConstraint(x));
                        }
                    }
                } else {
                    wellformed(c, negation, registry)?;
                }
            }
            Ok(())
        }
        SpLog::Or(a, b) => {
            let (fa, fb) = (a.free(), b.free());
            if fa != fb {
                return Err(SpLogError::OrFreeMismatch(
                    fa.into_iter().collect(),
                    fb.into_iter().collect(),
                ));
            }
            wellformed(a, negation, registry)?;
            wellformed(b, negation, registry)
        }
        SpLog::Exists(x, g) => {
            if x == MAIN || !g.free().contains(x) {
                return Err(SpLogError::BadExists(x.clone()));
            }
            wellformed(g, negation, registry)
        }
        SpLog::Constraint(..) | SpLog::RelConstraint(..) => Err(SpLogError::UnanchoredConstraint(
            f.constraint_vars().join(","),
        )),
        SpLog::Not(g) => {
            if !negation {
                return Err(SpLogError::NegationNotAllowed);
            }
            wellformed(g, negation, registry)
        }
    }
}

fn check_constraint(c: &SpLog, registry: &[RegisteredRelation]) -> Result<(), SpLogError> {
    if let SpLog::RelConstraint(name, xs) = c {
        let r = lookup(registry, name).ok_or_else(|| SpLogError::UnknownRelation(name.clone()))?;
        if r.args != xs.len() {
            return Err(SpLogError::RelArity {
                rel: name.clone(),
                expected: r.args,
                got: xs.len(),
            });
        }
        if xs.iter().any(|x| x == MAIN) {
            return Err(SpLogError::RelOnMain);
        }
    }
    Ok(())
}

// ---- static semantics ----

pub type Assignment = BTreeMap<String, String>;

fn subwords(w: &str) -> BTreeSet<String> {
    let cs: Vec<char> = w.chars().collect();
    let mut out = BTreeSet::from([String::new()]);
    for i in 0..cs.len() {
        for j in i + 1..=cs.len() {
            out.insert(cs[i..j].iter().collect());
        }
    }
    out
}

fn constraint_holds(c: &SpLog, sigma: &Assignment, registry: &[RegisteredRelation]) -> bool {
    match c {
        SpLog::Constraint(x, r) => regex_matches(r, &sigma[x]),
        SpLog::RelConstraint(name, xs) => {
            let args: Vec<&str> = xs.iter().map(|x| sigma[x].as_str()).collect();
            args.iter().all(|s| !s.is_empty())
                && lookup(registry, name).is_some_and(|r| (r.holds)(&args))
        }
        _ => unreachable!("not a constraint"),
    }
}

/// `σ ⊨ f`, where `σ` maps `W` and every free variable to a string.
/// Quantified variables range over subwords of `σ(W)`.
pub fn eval_static(f: &SpLog, sigma: &Assignment, registry: &[RegisteredRelation]) -> bool {
    match f {
        SpLog::WordEq(p) => sigma[MAIN] == p.apply(sigma),
        SpLog::And(a, b) => [a, b].iter().all(|g| {
            if g.is_constraint() {
                constraint_holds(g, sigma, registry)
            } else {
                eval_static(g, sigma, registry)
            }
        }),
        SpLog::Or(a, b) => eval_static(a, sigma, registry) || eval_static(b, sigma, registry),
        SpLog::Exists(x, g) => subwords(&sigma[MAIN]).into_iter().any(|v| {
            let mut s = sigma.clone();
            s.insert(x.clone(), v);
            eval_static(g, &s, registry)
        }),
        SpLog::Constraint(..) | SpLog::RelConstraint(..) => constraint_holds(f, sigma, registry),
        SpLog::Not(g) => {
            let w = &sigma[MAIN];
            g.free().iter().all(|x| w.contains(sigma[x].as_str()))
                && !eval_static(g, sigma, registry)
        }
    }
}

/// All assignments of the free variables (other than `W`) satisfying `f` with `W ↦ w`.
pub fn models(f: &SpLog, w: &str, registry: &[RegisteredRelation]) -> BTreeSet<Assignment> {
    match f {
        SpLog::WordEq(p) => {
            let cs: Vec<char> = w.chars().collect();
            let vars = p.vars();
            all_factorizations(p, &cs, Kind::Erasing)
                .into_iter()
                .map(|fac| {
                    vars.iter()
                        .map(|x| {
                            let i = p
                                .items
                                .iter()
                                .position(|it| matches!(it, Item::Var(y) if y == x))
                                .unwrap();
                            let (s, l) = fac[i];
                            (x.clone(), cs[s..s + l].iter().collect())
                        })
                        .collect()
                })
                .collect()
        }
        SpLog::And(a, b) => {
            let (cons, rest): (Vec<&SpLog>, Vec<&SpLog>) =
                [&**a, &**b].into_iter().partition(|g| g.is_constraint());
            let mut acc: BTreeSet<Assignment> = BTreeSet::from([Assignment::new()]);
            for g in rest {
                let m = models(g, w, registry);
                acc = join(&acc, &m);
            }
            acc.into_iter()
                .filter(|s| {
                    cons.iter().all(|c| {
                        let mut full = s.clone();
                        full.insert(MAIN.to_string(), w.to_string());
                        constraint_holds(c, &full, registry)
                    })
                })
                .collect()
        }
        SpLog::Or(a, b) => models(a, w, registry)
            .union(&models(b, w, registry))
            .cloned()
            .collect(),
        SpLog::Exists(x, g) => models(g, w, registry)
            .into_iter()
            .map(|mut s| {
                s.remove(x);
                s
            })
            .collect(),
        SpLog::Constraint(..) | SpLog::RelConstraint(..) => {
            let vars: Vec<String> = f.free().into_iter().collect();
            all_assignments(&vars, w)
                .into_iter()
                .filter(|s| {
                    let mut full = s.clone();
                    full.insert(MAIN.to_string(), w.to_string());
                    constraint_holds(f, &full, registry)
                })
                .collect()
        }
        SpLog::Not(g) => {
            let vars: Vec<String> = g.free().into_iter().collect();
            let pos = models(g, w, registry);
            all_assignments(&vars, w)
                .into_iter()
                .filter(|s| !pos.contains(s))
                .collect()
        }
    }
}

fn join(a: &BTreeSet<Assignment>, b: &BTreeSet<Assignment>) -> BTreeSet<Assignment> {
    let mut out = BTreeSet::new();
    for s in a {
        for t in b {
            if s.iter().all(|(k, v)| t.get(k).is_none_or(|u| u == v)) {
                let mut m = s.clone();
                m.extend(t.iter().map(|(k, v)| (k.clone(), v.clone())));
                out.insert(m);
            }
        }
    }
    out
}

/// Every assignment of `vars` to subwords of `w`.
pub fn all_assignments(vars: &[String], w: &str) -> Vec<Assignment> {
    let subs: Vec<String> = subwords(w).into_iter().collect();
    let mut out = vec![Assignment::new()];
    for x in vars {
        out = out
            .into_iter()
            .flat_map(|s| {
                subs.iter().map(move |v| {
                    let mut t = s.clone();
                    t.insert(x.clone(), v.clone());
                    t
                })
            })
            .collect();
    }
    out
}

// ---- compilation ----

pub fn open_col(x: &str) -> String {
    format!("{x}_o")
}

pub fn close_col(x: &str) -> String {
    format!("{x}_c")
}

/// Column names of a relation over the sorted free variables.
pub fn columns(free: &BTreeSet<String>) -> Vec<String> {
    free.iter()
        .flat_map(|x| [open_col(x), close_col(x)])
        .collect()
}

fn dollar_pair(o: &str, c: &str) -> Formula {
    and(vec![eq(o, "$"), eq(c, "$")])
}

/// `(o,c)` is `($,$)` or a labeled-endpoint interval.
pub fn valid_pair(alphabet: &Alphabet, o: &str, c: &str) -> Formula {
    or(vec![
        dollar_pair(o, c),
        and(vec![leq(o, c), labeled(alphabet, o), labeled(alphabet, c)]),
    ])
}

/// Designated relation of a compiled formula.
pub const TOP: &str = "R_phi";

struct Compiler<'a> {
    alphabet: &'a Alphabet,
    registry: &'a [RegisteredRelation],
    specs: Vec<RelationSpec>,
    next: usize,
}

impl Compiler<'_> {
    fn fresh(&mut self) -> usize {
        self.next += 1;
        self.next
    }

    fn push_unique(&mut self, specs: Vec<RelationSpec>) {
        for s in specs {
            if !self.specs.iter().any(|t| t.name == s.name) {
                self.specs.push(s);
            }
        }
    }

    fn init_for(&self, f: &SpLog) -> Formula {
        let free = f.free();
        if models(f, "", self.registry).is_empty() {
            Formula::False
        } else {
            and(free
                .iter()
                .map(|x| dollar_pair(&open_col(x), &close_col(x)))
                .collect())
        }
    }

    /// Add the relation for `f` and return its name.
    fn relation(&mut self, f: &SpLog, name: Option<&str>) -> Result<String, SpLogError> {
        let name = match name {
            Some(n) => n.to_string(),
            None => format!("{TOP}{}", self.fresh()),
        };
        let body = self.body(f, &name)?;
        let cols = columns(&f.free());
        let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
        let spec = RelationSpec::new(&name, &cols, self.init_for(f)).every(self.alphabet, body);
        self.specs.push(spec);
        Ok(name)
    }

    fn atom(&mut self, f: &SpLog) -> Result<Formula, SpLogError> {
        let name = self.relation(f, None)?;
        let cols = columns(&f.free());
        Ok(auxp(&name, &cols))
    }

    fn body(&mut self, f: &SpLog, name: &str) -> Result<Formula, SpLogError> {
        Ok(match f {
            SpLog::WordEq(p) => {
                let vars = p.vars();
                let pat = format!("{name}_pat");
                self.push_unique(vec![patterns::relation_spec(
                    p,
                    &vars,
                    self.alphabet,
                    &pat,
                )?]);
                if vars.is_empty() {
                    return Ok(auxp(&pat, &[] as &[&str]));
                }
                self.push_unique(relext::feq_rules(self.alphabet));
                let mut bound = Vec::new();
                let mut args = Vec::new();
                let mut links = Vec::new();
                for (k, x) in vars.iter().enumerate() {
                    let (yo, yc) = (format!("_y{k}o"), format!("_y{k}c"));
                    let (xo, xc) = (open_col(x), close_col(x));
                    links.push(or(vec![
                        and(vec![dollar_pair(&yo, &yc), dollar_pair(&xo, &xc)]),
                        auxp(
                            relext::FEQ,
                            &[yo.as_str(), yc.as_str(), xo.as_str(), xc.as_str()],
                        ),
                    ]));
                    args.push(yo.clone());
                    args.push(yc.clone());
                    bound.push(yo);
                    bound.push(yc);
                }
                let mut conj = vec![auxp(&pat, &args)];
                conj.extend(links);
                exists_owned(&bound, and(conj))
            }
            SpLog::And(a, b) => {
                let mut conj = Vec::new();
                for g in [a, b] {
                    if g.is_constraint() {
                        conj.push(self.constraint(g)?);
                    } else {
                        conj.push(self.atom(g)?);
                    }
                }
                and(conj)
            }
            SpLog::Or(a, b) => or(vec![self.atom(a)?, self.atom(b)?]),
            SpLog::Exists(x, g) => exists_owned(&[open_col(x), close_col(x)], self.atom(g)?),
            SpLog::Not(g) => {
                let mut conj: Vec<Formula> = g
                    .free()
                    .iter()
                    .map(|x| valid_pair(self.alphabet, &open_col(x), &close_col(x)))
                    .collect();
                conj.push(not(self.atom(g)?));
                and(conj)
            }
            SpLog::Constraint(..) | SpLog::RelConstraint(..) => {
                return Err(SpLogError::UnanchoredConstraint(
                    f.constraint_vars().join(","),
                ))
            }
        })
    }

    fn constraint(&mut self, c: &SpLog) -> Result<Formula, SpLogError> {
        match c {
            SpLog::Constraint(x, r) => {
                let dfa = determinize(&compile_nfa(r, self.alphabet));
                let k = self.fresh();
                let names = DfaNames::new(&format!("A{k}_"));
                self.push_unique(regular_language_rules(&dfa, &names));
                if x == MAIN {
                    return Ok(auxp(&names.acc(), &[] as &[&str]));
                }
                let rel = format!("A{k}_R_A");
                self.push_unique(constraint_rules(&dfa, &names, &rel));
                let (o, cc) = (open_col(x), close_col(x));
                let mut alts = vec![auxp(&rel, &[o.as_str(), cc.as_str()])];
                if dfa.finals[dfa.start] {
                    alts.push(dollar_pair(&o, &cc));
                }
                Ok(or(alts))
            }
            SpLog::RelConstraint(name, xs) => {
                let r = lookup(self.registry, name)
                    .ok_or_else(|| SpLogError::UnknownRelation(name.clone()))?;
                self.push_unique((r.specs)(self.alphabet));
                let cols: Vec<String> = xs
                    .iter()
                    .flat_map(|x| [open_col(x), close_col(x)])
                    .collect();
                Ok(auxp(name, &cols))
            }
            _ => unreachable!("not a constraint"),
        }
    }
}

fn compile_with(
    f: &SpLog,
    alphabet: &Alphabet,
    registry: &[RegisteredRelation],
) -> Result<DynamicProgram, SpLogError> {
    let mut c = Compiler {
        alphabet,
        registry,
        specs: Vec::new(),
        next: 0,
    };
    c.relation(f, Some(TOP))?;
    let specs = c.specs;
    Ok(with_base(alphabet, specs, Some(TOP))?)
}

/// Compile a SpLog formula; the designated relation `R_phi` has two columns per
/// free variable (sorted by name).
pub fn compile(
    f: &SpLog,
    alphabet: &Alphabet,
    registry: &[RegisteredRelation],
) -> Result<DynamicProgram, SpLogError> {
    if f.has_negation() {
        return Err(SpLogError::NegationNotAllowed);
    }
    wellformed(f, false, registry)?;
    compile_with(f, alphabet, registry)
}

/// Compile a SpLog¬ formula.
pub fn compile_neg(
    f: &SpLog,
    alphabet: &Alphabet,
    registry: &[RegisteredRelation],
) -> Result<DynamicProgram, SpLogError> {
    wellformed(f, true, registry)?;
    compile_with(f, alphabet, registry)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::parse("ab").unwrap()
    }

    fn w(word: &str) -> Assignment {
        Assignment::from([(MAIN.to_string(), word.to_string())])
    }

    #[test]
    fn cube_example() {
        let f = parse_splog("exists(x, and(eq(W, <x><x><x>), constr(x, /ab*/)))", &ab()).unwrap();
        assert!(f.free().is_empty());
        wellformed(&f, false, &[]).unwrap();
        assert!(eval_static(&f, &w("ababab"), &[]));
        assert!(!eval_static(&f, &w("aa"), &[]));
        assert!(eval_static(&f, &w("aaa"), &[]));
    }

    #[test]
    fn models_examples() {
        let f = parse_splog("eq(W, <x><y>)", &ab()).unwrap();
        let m = models(&f, "ab", &[]);
        assert_eq!(m.len(), 3);
        let g = parse_splog("and(eq(W, <x><y>), constr(x, /a/))", &ab()).unwrap();
        let m = models(&g, "ab", &[]);
        let only: Vec<_> = m.into_iter().collect();
        assert_eq!(
            only,
            vec![Assignment::from([
                ("x".into(), "a".into()),
                ("y".into(), "b".into())
            ])]
        );
    }

    #[test]
    fn wellformed_errors() {
        let a = ab();
        let or_bad = parse_splog("or(eq(W, <x>), eq(W, <y>))", &a).unwrap();
        assert!(matches!(
            wellformed(&or_bad, false, &[]),
            Err(SpLogError::OrFreeMismatch(..))
        ));
        let neg = parse_splog("not(eq(W, ))", &a).unwrap();
        assert!(matches!(
            wellformed(&neg, false, &[]),
            Err(SpLogError::NegationNotAllowed)
        ));
        wellformed(&neg, true, &[]).unwrap();
        let ex = parse_splog("exists(y, eq(W, <x>))", &a).unwrap();
        assert!(matches!(
            wellformed(&ex, false, &[]),
            Err(SpLogError::BadExists(_))
        ));
        let main = parse_splog("eq(W, a<W>)", &a).unwrap();
        assert!(matches!(
            wellformed(&main, false, &[]),
            Err(SpLogError::MainOnRight)
        ));
        let lone = parse_splog("and(eq(W, <x>), constr(y, /a/))", &a).unwrap();
        assert!(matches!(
            wellformed(&lone, false, &[]),
            Err(SpLogError::UnanchoredConstraint(_))
        ));
        let unk = parse_splog("and(eq(W, <x><y>), rel(R_nope, x, y))", &a).unwrap();
        assert!(matches!(
            wellformed(&unk, false, &builtin_relations()),
            Err(SpLogError::UnknownRelation(_))
        ));
    }

    #[test]
    fn parse_errors() {
        assert!(parse_splog("eq(x, a)", &ab()).is_err());
        assert!(parse_splog("and(eq(W, a)", &ab()).is_err());
        assert!(parse_splog("foo(W)", &ab()).is_err());
        assert!(parse_splog("constr(x, /c/)", &ab()).is_err());
    }

    #[test]
    fn empty_equation() {
        let f = parse_splog("eq(W, )", &ab()).unwrap();
        assert!(eval_static(&f, &w(""), &[]));
        assert!(!eval_static(&f, &w("a"), &[]));
    }
}
