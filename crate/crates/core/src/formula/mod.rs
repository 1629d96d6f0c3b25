//! First-order formulas over word structures and auxiliary relations.

mod eval;
mod sexpr;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

pub use eval::{eval_all, evaluate, CompiledFormula, EvalCtx, EvalEnv};
pub use sexpr::parse_formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("relation {rel} has arity {expected}, used with {got} arguments")]
    ArityMismatch {
        rel: String,
        expected: usize,
        got: usize,
    },
    #[error("cyclic primed reference through {0}")]
    Cycle(String),
    #[error("update parameter used outside an update rule")]
    NoParam,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Dollar,
    One,
    Param,
}

impl From<&str> for Term {
    fn from(s: &str) -> Term {
        match s {
            "$" => Term::Dollar,
            "1" => Term::One,
            "u" => Term::Param,
            _ => Term::Var(s.to_string()),
        }
    }
}

impl From<String> for Term {
    fn from(s: String) -> Term {
        Term::from(s.as_str())
    }
}

impl From<&String> for Term {
    fn from(s: &String) -> Term {
        Term::from(s.as_str())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Dollar => write!(f, "$"),
            Term::One => write!(f, "1"),
            Term::Param => write!(f, "u"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    False,
    Sym(char, Term),
    Lt(Term, Term),
    Leq(Term, Term),
    Eq(Term, Term),
    Aux(String, Vec<Term>),
    AuxP(String, Vec<Term>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Not(Box<Formula>),
    Exists(String, Box<Formula>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FragmentClass {
    QF,
    CQ,
    UCQ,
    FO,
}

impl FragmentClass {
    /// Name of the dynamic class a program with this rule fragment belongs to.
    pub fn dyn_label(self) -> &'static str {
        match self {
            FragmentClass::QF => "DynPROP",
            FragmentClass::CQ | FragmentClass::UCQ => "DynCQ",
            FragmentClass::FO => "DynFO",
        }
    }
}

// ---- builders ----

pub fn t(s: &str) -> Term {
    Term::from(s)
}

pub fn sym(c: char, x: impl Into<Term>) -> Formula {
    Formula::Sym(c, x.into())
}

pub fn lt(x: impl Into<Term>, y: impl Into<Term>) -> Formula {
    Formula::Lt(x.into(), y.into())
}

pub fn leq(x: impl Into<Term>, y: impl Into<Term>) -> Formula {
    Formula::Leq(x.into(), y.into())
}

pub fn eq(x: impl Into<Term>, y: impl Into<Term>) -> Formula {
    Formula::Eq(x.into(), y.into())
}

pub fn aux<T: Into<Term> + Clone>(rel: &str, args: &[T]) -> Formula {
    Formula::Aux(
        rel.to_string(),
        args.iter().cloned().map(Into::into).collect(),
    )
}

pub fn auxp<T: Into<Term> + Clone>(rel: &str, args: &[T]) -> Formula {
    Formula::AuxP(
        rel.to_string(),
        args.iter().cloned().map(Into::into).collect(),
    )
}

/// Conjunction; nested conjunctions are flattened and `true` conjuncts dropped.
pub fn and(parts: Vec<Formula>) -> Formula {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Formula::And(inner) => out.extend(inner),
            Formula::True => {}
            Formula::False => return Formula::False,
            other => out.push(other),
        }
    }
    match out.len() {
        0 => Formula::True,
        1 => out.pop().unwrap(),
        _ => Formula::And(out),
    }
}

/// Disjunction; nested disjunctions are flattened and `false` disjuncts dropped.
pub fn or(parts: Vec<Formula>) -> Formula {
    let mut out = Vec::new();
    for p in parts {
        match p {
            Formula::Or(inner) => out.extend(inner),
            Formula::False => {}
            Formula::True => return Formula::True,
            other => out.push(other),
        }
    }
    match out.len() {
        0 => Formula::False,
        1 => out.pop().unwrap(),
        _ => Formula::Or(out),
    }
}

pub fn not(f: Formula) -> Formula {
    Formula::Not(Box::new(f))
}

/// `∃ vars: f`, nesting one quantifier per variable.
pub fn exists(vars: &[&str], f: Formula) -> Formula {
    vars.iter()
        .rev()
        .fold(f, |acc, v| Formula::Exists(v.to_string(), Box::new(acc)))
}

pub fn exists_owned(vars: &[String], f: Formula) -> Formula {
    vars.iter()
        .rev()
        .fold(f, |acc, v| Formula::Exists(v.clone(), Box::new(acc)))
}

/// `x ≠ y` written negation-free as `x < y ∨ y < x`.
pub fn neq(x: impl Into<Term> + Clone, y: impl Into<Term> + Clone) -> Formula {
    or(vec![lt(x.clone(), y.clone()), lt(y, x)])
}

impl Formula {
    pub fn is_atom(&self) -> bool {
        matches!(
            self,
            Formula::True
                | Formula::False
                | Formula::Sym(..)
                | Formula::Lt(..)
                | Formula::Leq(..)
                | Formula::Eq(..)
                | Formula::Aux(..)
                | Formula::AuxP(..)
        )
    }

    /// Order, equality and constant atoms: the only atoms a quantifier-free
    /// formula may negate.
    pub fn is_order_atom(&self) -> bool {
        matches!(
            self,
            Formula::True | Formula::False | Formula::Lt(..) | Formula::Leq(..) | Formula::Eq(..)
        )
    }

    /// Visit every atom.
    pub fn for_each_atom<'a>(&'a self, f: &mut dyn FnMut(&'a Formula)) {
        match self {
            Formula::And(ps) | Formula::Or(ps) => ps.iter().for_each(|p| p.for_each_atom(f)),
            Formula::Not(g) | Formula::Exists(_, g) => g.for_each_atom(f),
            atom => f(atom),
        }
    }

    /// Names of relations referenced by primed atoms.
    pub fn primed_refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_atom(&mut |a| {
            if let Formula::AuxP(r, _) = a {
                out.insert(r.clone());
            }
        });
        out
    }

    /// Names of relations referenced by unprimed atoms.
    pub fn unprimed_refs(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.for_each_atom(&mut |a| {
            if let Formula::Aux(r, _) = a {
                out.insert(r.clone());
            }
        });
        out
    }

    pub fn uses_param(&self) -> bool {
        let mut found = false;
        self.for_each_atom(&mut |a| {
            for term in atom_terms(a) {
                if *term == Term::Param {
                    found = true;
                }
            }
        });
        found
    }

    pub fn size(&self) -> usize {
        match self {
            Formula::And(ps) | Formula::Or(ps) => 1 + ps.iter().map(Formula::size).sum::<usize>(),
            Formula::Not(g) | Formula::Exists(_, g) => 1 + g.size(),
            _ => 1,
        }
    }
}

pub(crate) fn atom_terms(a: &Formula) -> Vec<&Term> {
    match a {
        Formula::Sym(_, x) => vec![x],
        Formula::Lt(x, y) | Formula::Leq(x, y) | Formula::Eq(x, y) => vec![x, y],
        Formula::Aux(_, ts) | Formula::AuxP(_, ts) => ts.iter().collect(),
        _ => vec![],
    }
}

pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    fn go(f: &Formula, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match f {
            Formula::And(ps) | Formula::Or(ps) => ps.iter().for_each(|p| go(p, bound, out)),
            Formula::Not(g) => go(g, bound, out),
            Formula::Exists(v, g) => {
                bound.push(v.clone());
                go(g, bound, out);
                bound.pop();
            }
            atom => {
                for term in atom_terms(atom) {
                    if let Term::Var(v) = term {
                        if !bound.contains(v) {
                            out.insert(v.clone());
                        }
                    }
                }
            }
        }
    }
    let mut out = BTreeSet::new();
    go(f, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, Copy, Default)]
struct Features {
    exists: bool,
    or: bool,
    not_any: bool,
    not_nonatomic: bool,
}

impl Features {
    fn merge(&mut self, o: Features) {
        self.exists |= o.exists;
        self.or |= o.or;
        self.not_any |= o.not_any;
        self.not_nonatomic |= o.not_nonatomic;
    }

    fn class(self) -> FragmentClass {
        if !self.exists && !self.not_nonatomic {
            FragmentClass::QF
        } else if !self.not_any {
            if self.or {
                FragmentClass::UCQ
            } else {
                FragmentClass::CQ
            }
        } else {
            FragmentClass::FO
        }
    }
}

fn features(f: &Formula) -> Features {
    let mut out = Features::default();
    match f {
        Formula::Leq(..) => out.or = true,
        Formula::And(ps) => ps.iter().for_each(|p| out.merge(features(p))),
        Formula::Or(ps) => {
            out.or = true;
            ps.iter().for_each(|p| out.merge(features(p)));
        }
        Formula::Not(g) => {
            out.not_any = true;
            if !g.is_order_atom() {
                out.not_nonatomic = true;
            }
            out.merge(features(g));
        }
        Formula::Exists(_, g) => {
            out.exists = true;
            out.merge(features(g));
        }
        _ => {}
    }
    out
}

/// Weakest fragment the formula syntactically fits (`Leq` counts as `Lt ∨ Eq`).
pub fn classify(f: &Formula) -> FragmentClass {
    features(f).class()
}

/// A rule body together with its designated output variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleBody {
    pub vars: Vec<String>,
    pub body: Formula,
}

/// Rename every bound variable of `f` to a fresh name and substitute free
/// variables according to `subst`.
pub fn substitute(f: &Formula, subst: &HashMap<String, Term>, fresh: &mut usize) -> Formula {
    fn term(x: &Term, s: &HashMap<String, Term>) -> Term {
        match x {
            Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| x.clone()),
            other => other.clone(),
        }
    }
    fn go(f: &Formula, s: &mut HashMap<String, Term>, fresh: &mut usize) -> Formula {
        match f {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Sym(c, x) => Formula::Sym(*c, term(x, s)),
            Formula::Lt(x, y) => Formula::Lt(term(x, s), term(y, s)),
            Formula::Leq(x, y) => Formula::Leq(term(x, s), term(y, s)),
            Formula::Eq(x, y) => Formula::Eq(term(x, s), term(y, s)),
            Formula::Aux(r, ts) => Formula::Aux(r.clone(), ts.iter().map(|x| term(x, s)).collect()),
            Formula::AuxP(r, ts) => {
                Formula::AuxP(r.clone(), ts.iter().map(|x| term(x, s)).collect())
            }
            Formula::And(ps) => Formula::And(ps.iter().map(|p| go(p, s, fresh)).collect()),
            Formula::Or(ps) => Formula::Or(ps.iter().map(|p| go(p, s, fresh)).collect()),
            Formula::Not(g) => Formula::Not(Box::new(go(g, s, fresh))),
            Formula::Exists(v, g) => {
                *fresh += 1;
                let nv = format!("{}~{}", v.split('~').next().unwrap_or(v), fresh);
                let prev = s.insert(v.clone(), Term::Var(nv.clone()));
                let body = go(g, s, fresh);
                match prev {
                    Some(p) => s.insert(v.clone(), p),
                    None => s.remove(v),
                };
                Formula::Exists(nv, Box::new(body))
            }
        }
    }
    let mut s = subst.clone();
    go(f, &mut s, fresh)
}

/// Replace every primed atom by the referenced rule body, recursively.
pub fn inline_primed(
    f: &Formula,
    rules: &HashMap<String, RuleBody>,
) -> Result<Formula, FormulaError> {
    let mut memo: HashMap<String, Formula> = HashMap::new();
    let mut fresh = 0usize;
    let mut visiting = HashSet::new();
    inline_rec(f, rules, &mut memo, &mut visiting, &mut fresh)
}

fn inline_rec(
    f: &Formula,
    rules: &HashMap<String, RuleBody>,
    memo: &mut HashMap<String, Formula>,
    visiting: &mut HashSet<String>,
    fresh: &mut usize,
) -> Result<Formula, FormulaError> {
    Ok(match f {
        Formula::AuxP(r, args) => {
            let rule = rules
                .get(r)
                .ok_or_else(|| FormulaError::UnknownRelation(r.clone()))?;
            if rule.vars.len() != args.len() {
                return Err(FormulaError::ArityMismatch {
                    rel: r.clone(),
                    expected: rule.vars.len(),
                    got: args.len(),
                });
            }
            if !memo.contains_key(r) {
                if !visiting.insert(r.clone()) {
                    return Err(FormulaError::Cycle(r.clone()));
                }
                let body = inline_rec(&rule.body, rules, memo, visiting, fresh)?;
                visiting.remove(r);
                memo.insert(r.clone(), body);
            }
            let subst: HashMap<String, Term> = rule
                .vars
                .iter()
                .cloned()
                .zip(args.iter().cloned())
                .collect();
            substitute(&memo[r], &subst, fresh)
        }
        Formula::And(ps) => Formula::And(
            ps.iter()
                .map(|p| inline_rec(p, rules, memo, visiting, fresh))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Or(ps) => Formula::Or(
            ps.iter()
                .map(|p| inline_rec(p, rules, memo, visiting, fresh))
                .collect::<Result<_, _>>()?,
        ),
        Formula::Not(g) => Formula::Not(Box::new(inline_rec(g, rules, memo, visiting, fresh)?)),
        Formula::Exists(v, g) => Formula::Exists(
            v.clone(),
            Box::new(inline_rec(g, rules, memo, visiting, fresh)?),
        ),
        other => other.clone(),
    })
}

/// Class of `inline_primed(f, rules)` computed without materialising the
/// inlined formula.
pub fn classify_inlined(
    f: &Formula,
    rules: &HashMap<String, RuleBody>,
) -> Result<FragmentClass, FormulaError> {
    let mut memo: HashMap<String, (Features, bool)> = HashMap::new();
    let mut visiting = HashSet::new();
    Ok(inlined_features(f, rules, &mut memo, &mut visiting)?
        .0
        .class())
}

// Returns the features of the inlined formula and whether it is an order atom.
fn inlined_features(
    f: &Formula,
    rules: &HashMap<String, RuleBody>,
    memo: &mut HashMap<String, (Features, bool)>,
    visiting: &mut HashSet<String>,
) -> Result<(Features, bool), FormulaError> {
    let mut out = Features::default();
    match f {
        Formula::AuxP(r, _) => {
            if let Some(v) = memo.get(r) {
                return Ok(*v);
            }
            let rule = rules
                .get(r)
                .ok_or_else(|| FormulaError::UnknownRelation(r.clone()))?;
            if !visiting.insert(r.clone()) {
                return Err(FormulaError::Cycle(r.clone()));
            }
            let v = inlined_features(&rule.body, rules, memo, visiting)?;
            visiting.remove(r);
            memo.insert(r.clone(), v);
            return Ok(v);
        }
        Formula::Leq(..) => {
            out.or = true;
            return Ok((out, true));
        }
        Formula::Sym(..) | Formula::Aux(..) => return Ok((out, false)),
        Formula::And(ps) | Formula::Or(ps) => {
            if matches!(f, Formula::Or(_)) {
                out.or = true;
            }
            for p in ps {
                out.merge(inlined_features(p, rules, memo, visiting)?.0);
            }
        }
        Formula::Not(g) => {
            let (gf, atomic) = inlined_features(g, rules, memo, visiting)?;
            out.not_any = true;
            out.not_nonatomic = !atomic;
            out.merge(gf);
        }
        Formula::Exists(_, g) => {
            out.exists = true;
            out.merge(inlined_features(g, rules, memo, visiting)?.0);
        }
        _ => return Ok((out, true)),
    }
    Ok((out, false))
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        sexpr::write_formula(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_variables() {
        let f = exists(&["x"], aux("R", &["x", "y"]));
        assert_eq!(free_vars(&f), ["y".to_string()].into_iter().collect());
        assert_eq!(
            free_vars(&lt("u", "x")),
            ["x".to_string()].into_iter().collect()
        );
        let f = and(vec![sym('a', "x"), or(vec![eq("y", "$"), sym('b', "x")])]);
        assert_eq!(free_vars(&f).len(), 2);
    }

    #[test]
    fn classes() {
        assert_eq!(
            classify(&and(vec![
                sym('a', "x"),
                exists(&["y"], aux("R", &["x", "y"]))
            ])),
            FragmentClass::CQ
        );
        assert_eq!(classify(&not(aux("R", &["x"]))), FragmentClass::FO);
        assert_eq!(
            classify(&and(vec![not(eq("x", "y")), sym('a', "x")])),
            FragmentClass::QF
        );
        assert_eq!(
            classify(&exists(&["y"], not(aux("R", &["x", "y"])))),
            FragmentClass::FO
        );
        assert_eq!(
            classify(&not(and(vec![aux("R", &["x"]), sym('a', "x")]))),
            FragmentClass::FO
        );
        assert_eq!(
            classify(&or(vec![sym('a', "x"), lt("x", "u")])),
            FragmentClass::QF
        );
        assert_eq!(
            classify(&exists(
                &["y"],
                or(vec![aux("R", &["x", "y"]), sym('a', "y")])
            )),
            FragmentClass::UCQ
        );
        assert!(FragmentClass::QF < FragmentClass::CQ && FragmentClass::UCQ < FragmentClass::FO);
    }

    #[test]
    fn inlining_freshens_and_substitutes() {
        let mut rules = HashMap::new();
        rules.insert(
            "S".to_string(),
            RuleBody {
                vars: vec!["x".into()],
                body: exists(&["y"], aux("R", &["x", "y"])),
            },
        );
        let f = and(vec![auxp("S", &["y"]), sym('a', "y")]);
        let g = inline_primed(&f, &rules).unwrap();
        assert_eq!(free_vars(&g), ["y".to_string()].into_iter().collect());
        assert!(g.primed_refs().is_empty());
        let plain = sym('a', "z");
        assert_eq!(inline_primed(&plain, &rules).unwrap(), plain);
        rules.insert(
            "T".into(),
            RuleBody {
                vars: vec![],
                body: auxp("T", &[] as &[&str]),
            },
        );
        assert!(matches!(
            inline_primed(&auxp("T", &[] as &[&str]), &rules),
            Err(FormulaError::Cycle(_))
        ));
    }

    #[test]
    fn inlined_class_matches_materialised() {
        let mut rules = HashMap::new();
        rules.insert(
            "S".to_string(),
            RuleBody {
                vars: vec!["x".into()],
                body: exists(&["y"], aux("R", &["x", "y"])),
            },
        );
        for f in [
            and(vec![auxp("S", &["z"]), sym('a', "z")]),
            not(auxp("S", &["z"])),
            or(vec![auxp("S", &["z"]), lt("z", "u")]),
        ] {
            let direct = classify(&inline_primed(&f, &rules).unwrap());
            assert_eq!(classify_inlined(&f, &rules).unwrap(), direct);
        }
    }
}
