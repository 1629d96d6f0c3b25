//! Patterns over terminals and variables, their membership problem, and the
//! update rules maintaining (non-)erasing pattern languages.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::base::{EQ, FIRST, LAST, NEXT};
use crate::engine::{DynamicProgram, EngineError, RelationSpec};
use crate::formula::*;
use crate::relext::with_base;
use crate::word::Alphabet;

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("pattern parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("empty pattern")]
    Empty,
    #[error("variable {0} does not occur in the pattern")]
    UnknownVariable(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Item {
    Terminal(char),
    Var(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Pattern {
    pub items: Vec<Item>,
}

pub type Substitution = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    NonErasing,
    Erasing,
}

impl Pattern {
    pub fn new(items: Vec<Item>) -> Self {
        Pattern { items }
    }

    /// `a<x><x>b`: bare alphabet symbols and `<name>` variables.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self, PatternError> {
        let mut items = Vec::new();
        let mut it = text.char_indices().peekable();
        while let Some((pos, c)) = it.next() {
            if c.is_whitespace() {
                continue;
            }
            if c == '<' {
                let mut name = String::new();
                loop {
                    match it.next() {
                        Some((_, '>')) => break,
                        Some((_, d)) if d.is_alphanumeric() || d == '_' => name.push(d),
                        Some((p, d)) => {
                            return Err(PatternError::Parse {
                                pos: p,
                                msg: format!("bad character {d:?} in variable"),
                            })
                        }
                        None => {
                            return Err(PatternError::Parse {
                                pos: text.len(),
                                msg: "unterminated variable".into(),
                            })
                        }
                    }
                }
                if name.is_empty() {
                    return Err(PatternError::Parse {
                        pos,
                        msg: "empty variable name".into(),
                    });
                }
                items.push(Item::Var(name));
            } else if alphabet.contains(c) {
                items.push(Item::Terminal(c));
            } else {
                return Err(PatternError::Parse {
                    pos,
                    msg: format!("symbol {c:?} is not in the alphabet"),
                });
            }
        }
        Ok(Pattern { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Variables in first-occurrence order.
    pub fn vars(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for it in &self.items {
            if let Item::Var(x) = it {
                if !out.contains(x) {
                    out.push(x.clone());
                }
            }
        }
        out
    }

    /// The pattern with every variable in `erased` removed.
    pub fn erase(&self, erased: &[String]) -> Pattern {
        Pattern {
            items: self
                .items
                .iter()
                .filter(|it| !matches!(it, Item::Var(x) if erased.contains(x)))
                .cloned()
                .collect(),
        }
    }

    pub fn apply(&self, s: &Substitution) -> String {
        self.items
            .iter()
            .map(|it| match it {
                Item::Terminal(c) => c.to_string(),
                Item::Var(x) => s.get(x).cloned().unwrap_or_default(),
            })
            .collect()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for it in &self.items {
            match it {
                Item::Terminal(c) => write!(f, "{c}")?,
                Item::Var(x) => write!(f, "<{x}>")?,
            }
        }
        Ok(())
    }
}

// ---- membership ----

/// A substitution `σ` of the given kind with `σ(p) = w`, if one exists.
pub fn membership_witness(p: &Pattern, w: &str, kind: Kind) -> Option<Substitution> {
    let w: Vec<char> = w.chars().collect();
    let vars = p.vars();
    let idx = |x: &str| vars.iter().position(|v| v == x).unwrap();
    let mut asg: Vec<Option<(usize, usize)>> = vec![None; vars.len()];
    let mut failed = HashSet::new();
    let min = if kind == Kind::Erasing { 0 } else { 1 };

    #[allow(clippy::too_many_arguments)]
    fn go(
        items: &[Item],
        i: usize,
        pos: usize,
        w: &[char],
        asg: &mut Vec<Option<(usize, usize)>>,
        idx: &dyn Fn(&str) -> usize,
        min: usize,
        failed: &mut HashSet<(usize, usize, Vec<Option<(usize, usize)>>)>,
    ) -> bool {
        if i == items.len() {
            return pos == w.len();
        }
        let key = (i, pos, asg.clone());
        if failed.contains(&key) {
            return false;
        }
        let ok = match &items[i] {
            Item::Terminal(c) => {
                w.get(pos) == Some(c) && go(items, i + 1, pos + 1, w, asg, idx, min, failed)
            }
            Item::Var(x) => {
                let k = idx(x);
                match asg[k] {
                    Some((s, l)) => {
                        pos + l <= w.len()
                            && w[s..s + l] == w[pos..pos + l]
                            && go(items, i + 1, pos + l, w, asg, idx, min, failed)
                    }
                    None => {
                        let mut found = false;
                        for l in min..=(w.len() - pos) {
                            asg[k] = Some((pos, l));
                            if go(items, i + 1, pos + l, w, asg, idx, min, failed) {
                                found = true;
                                break;
                            }
                        }
                        if !found {
                            asg[k] = None;
                        }
                        found
                    }
                }
            }
        };
        if !ok {
            failed.insert(key);
        }
        ok
    }

    if !go(&p.items, 0, 0, &w, &mut asg, &idx, min, &mut failed) {
        return None;
    }
    Some(
        vars.iter()
            .zip(&asg)
            .map(|(x, a)| {
                let (s, l) = a.expect("all variables assigned");
                (x.clone(), w[s..s + l].iter().collect())
            })
            .collect(),
    )
}

pub fn membership_oracle(p: &Pattern, w: &str, kind: Kind) -> bool {
    membership_witness(p, w, kind).is_some()
}

/// Every factorization of `w` matching `p`: one `(start, len)` per item.
pub fn all_factorizations(p: &Pattern, w: &[char], kind: Kind) -> Vec<Vec<(usize, usize)>> {
    let min = if kind == Kind::Erasing { 0 } else { 1 };
    let mut out = Vec::new();
    let mut cur: Vec<(usize, usize)> = Vec::new();
    fn go(
        p: &Pattern,
        w: &[char],
        min: usize,
        pos: usize,
        cur: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let i = cur.len();
        if i == p.items.len() {
            if pos == w.len() {
                out.push(cur.clone());
            }
            return;
        }
        let lens: Vec<usize> = match &p.items[i] {
            Item::Terminal(c) => {
                if w.get(pos) == Some(c) {
                    vec![1]
                } else {
                    vec![]
                }
            }
            Item::Var(x) => match p.items[..i]
                .iter()
                .position(|it| matches!(it, Item::Var(y) if y == x))
            {
                Some(j) => {
                    let (s, l) = cur[j];
                    if pos + l <= w.len() && w[s..s + l] == w[pos..pos + l] {
                        vec![l]
                    } else {
                        vec![]
                    }
                }
                None => (min..=w.len() - pos).collect(),
            },
        };
        for l in lens {
            cur.push((pos, l));
            go(p, w, min, pos + l, cur, out);
            cur.pop();
        }
    }
    go(p, w, min, 0, &mut cur, &mut out);
    out
}

// ---- update rules ----

/// Names of the open/close output columns for the `k`-th listed variable.
pub fn out_vars(k: usize) -> (String, String) {
    (format!("o{k}"), format!("c{k}"))
}

/// The formula ω of the construction for a non-empty pattern, before the
/// existential closure. `heads` maps a variable to the position-variable pair
/// used for its first occurrence.
fn omega(p: &Pattern, heads: &BTreeMap<String, (String, String)>) -> (Formula, Vec<String>) {
    let mut parts = Vec::new();
    let mut bound: Vec<String> = Vec::new();
    let mut spans: Vec<(String, String)> = Vec::new();
    for (i, it) in p.items.iter().enumerate() {
        let n = i + 1;
        match it {
            Item::Terminal(c) => {
                let t = format!("t{n}");
                bound.push(t.clone());
                parts.push(sym(*c, t.as_str()));
                if i == 0 {
                    parts.push(auxp(FIRST, &[t.as_str()]));
                } else {
                    parts.push(auxp(NEXT, &[spans[i - 1].1.as_str(), t.as_str()]));
                }
                spans.push((t.clone(), t));
            }
            Item::Var(x) => {
                let prev = p.items[..i]
                    .iter()
                    .rposition(|it| matches!(it, Item::Var(y) if y == x));
                let (xs, ts) = match (prev, heads.get(x)) {
                    (None, Some(h)) => h.clone(),
                    _ => {
                        let pair = (format!("x{n}"), format!("t{n}"));
                        bound.push(pair.0.clone());
                        bound.push(pair.1.clone());
                        pair
                    }
                };
                if i == 0 {
                    parts.push(auxp(FIRST, &[xs.as_str()]));
                } else {
                    parts.push(auxp(NEXT, &[spans[i - 1].1.as_str(), xs.as_str()]));
                }
                parts.push(leq(xs.as_str(), ts.as_str()));
                if let Some(j) = prev {
                    let (a, b) = &spans[j];
                    parts.push(auxp(
                        EQ,
                        &[a.as_str(), b.as_str(), xs.as_str(), ts.as_str()],
                    ));
                }
                spans.push((xs, ts));
            }
        }
    }
    parts.push(auxp(
        LAST,
        &[spans.last().expect("non-empty pattern").1.as_str()],
    ));
    (Formula::And(parts), bound)
}

/// `∃ … ω` for a non-empty pattern.
pub fn nonerasing_formula(p: &Pattern) -> Result<Formula, PatternError> {
    if p.is_empty() {
        return Err(PatternError::Empty);
    }
    let (w, bound) = omega(p, &BTreeMap::new());
    Ok(exists_owned(&bound, w))
}

/// True exactly on the empty word.
pub fn epsilon_formula() -> Formula {
    exists(&["x"], and(vec![auxp(FIRST, &["x"]), eq("x", "$")]))
}

/// 0-ary relation `name` holding iff the word is in the non-erasing language.
pub fn nonerasing_spec(
    p: &Pattern,
    alphabet: &Alphabet,
    name: &str,
) -> Result<RelationSpec, PatternError> {
    let body = nonerasing_formula(p)?;
    Ok(RelationSpec::new(name, &[], Formula::False).every(alphabet, body))
}

/// Members of the erasing decomposition: every distinct non-empty erasure,
/// plus whether some erasure is empty.
pub fn erasing_members(p: &Pattern) -> (Vec<(Vec<String>, Pattern)>, bool) {
    let vars = p.vars();
    let mut seen = HashSet::new();
    let mut members = Vec::new();
    let mut eps = false;
    for mask in 0..(1usize << vars.len()) {
        let erased: Vec<String> = vars
            .iter()
            .enumerate()
            .filter(|(k, _)| mask >> k & 1 == 1)
            .map(|(_, x)| x.clone())
            .collect();
        let q = p.erase(&erased);
        if q.is_empty() {
            eps = true;
        } else if seen.insert(q.clone()) {
            members.push((erased, q));
        }
    }
    (members, eps)
}

pub fn erasing_spec(p: &Pattern, alphabet: &Alphabet, name: &str) -> RelationSpec {
    let (members, eps) = erasing_members(p);
    let mut parts: Vec<Formula> = members
        .iter()
        .map(|(_, q)| nonerasing_formula(q).expect("non-empty"))
        .collect();
    if eps {
        parts.push(epsilon_formula());
    }
    let init = if eps { Formula::True } else { Formula::False };
    RelationSpec::new(name, &[], init).every(alphabet, or(parts))
}

/// Relation of arity `2·|free|` holding the image intervals of the listed
/// variables (first occurrences) over all erasing witnesses; an erased
/// variable contributes `($,$)`.
pub fn relation_spec(
    p: &Pattern,
    free: &[String],
    alphabet: &Alphabet,
    name: &str,
) -> Result<RelationSpec, PatternError> {
    let vars = p.vars();
    if let Some(x) = free.iter().find(|x| !vars.contains(x)) {
        return Err(PatternError::UnknownVariable(x.clone()));
    }
    let cols: Vec<(String, String)> = (0..free.len()).map(out_vars).collect();
    let dollar_pair = |k: usize| {
        and(vec![
            eq(cols[k].0.as_str(), "$"),
            eq(cols[k].1.as_str(), "$"),
        ])
    };
    let (members, eps) = erasing_members(p);
    let mut parts = Vec::new();
    for (erased, q) in &members {
        let heads: BTreeMap<String, (String, String)> = free
            .iter()
            .enumerate()
            .filter(|(_, x)| !erased.contains(x))
            .map(|(k, x)| (x.clone(), cols[k].clone()))
            .collect();
        let (w, bound) = omega(q, &heads);
        let mut conj = vec![exists_owned(&bound, w)];
        for (k, x) in free.iter().enumerate() {
            if erased.contains(x) {
                conj.push(dollar_pair(k));
            }
        }
        parts.push(and(conj));
    }
    let all_dollar = and((0..free.len()).map(dollar_pair).collect());
    if eps {
        parts.push(and(vec![epsilon_formula(), all_dollar.clone()]));
    }
    let head: Vec<&str> = cols
        .iter()
        .flat_map(|(a, b)| [a.as_str(), b.as_str()])
        .collect();
    let init = if eps { all_dollar } else { Formula::False };
    Ok(RelationSpec::new(name, &head, init).every(alphabet, or(parts)))
}

/// Base relations plus `P`, designated.
pub fn nonerasing_rules(p: &Pattern, alphabet: &Alphabet) -> Result<DynamicProgram, PatternError> {
    Ok(with_base(
        alphabet,
        vec![nonerasing_spec(p, alphabet, "P")?],
        Some("P"),
    )?)
}

/// Base relations plus `P_E`, designated.
pub fn erasing_rules(p: &Pattern, alphabet: &Alphabet) -> Result<DynamicProgram, PatternError> {
    Ok(with_base(
        alphabet,
        vec![erasing_spec(p, alphabet, "P_E")],
        Some("P_E"),
    )?)
}

/// Base relations plus `R_pat`, designated.
pub fn relation_rules(
    p: &Pattern,
    free: &[String],
    alphabet: &Alphabet,
) -> Result<DynamicProgram, PatternError> {
    Ok(with_base(
        alphabet,
        vec![relation_spec(p, free, alphabet, "R_pat")?],
        Some("R_pat"),
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::parse("ab").unwrap()
    }

    #[test]
    fn axxb_example() {
        let p = Pattern::parse("a<x><x>b", &ab()).unwrap();
        assert!(membership_oracle(&p, "ab", Kind::Erasing));
        assert!(!membership_oracle(&p, "ab", Kind::NonErasing));
        let w = membership_witness(&p, "ababab", Kind::NonErasing).unwrap();
        assert_eq!(w["x"], "ba");
        assert!(membership_oracle(&p, "ababab", Kind::Erasing));
    }

    #[test]
    fn single_terminal() {
        let p = Pattern::parse("a", &ab()).unwrap();
        assert!(membership_oracle(&p, "a", Kind::NonErasing));
        assert!(!membership_oracle(&p, "b", Kind::NonErasing));
    }

    #[test]
    fn parse_errors() {
        assert!(Pattern::parse("a<x", &ab()).is_err());
        assert!(Pattern::parse("c", &ab()).is_err());
        assert!(Pattern::parse("<>", &ab()).is_err());
        assert_eq!(
            Pattern::parse("a<x>b<x>", &ab()).unwrap().to_string(),
            "a<x>b<x>"
        );
    }

    #[test]
    fn empty_pattern_rejected() {
        assert!(matches!(
            nonerasing_formula(&Pattern::default()),
            Err(PatternError::Empty)
        ));
    }
}
