//! Dynamic programs: schemas, initialisation and per-update rules, executed
//! stratum by stratum.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::formula::{
    classify_inlined, free_vars, inline_primed, parse_formula, CompiledFormula, EvalCtx, Formula,
    FormulaError, FragmentClass, RuleBody,
};
use crate::relation::Relation;
use crate::word::{Alphabet, ConcreteUpdate, Node, WordError, WordStructure};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Word(#[from] WordError),
    #[error("relation {rel}: {err}")]
    Formula { rel: String, err: FormulaError },
    #[error("relation {0} is declared twice")]
    DuplicateRelation(String),
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("relation {rel} has no rule for {update}")]
    MissingRule { rel: String, update: AbstractUpdate },
    #[error("relation {rel}: free variable {var} is not an output variable")]
    StrayVariable { rel: String, var: String },
    #[error("primed references form a cycle through {0}")]
    StratumCycle(String),
    #[error("INIT formula of {0} may only use the order and constants")]
    BadInit(String),
    #[error("conflicting definitions for relation {0}")]
    Conflict(String),
    #[error("alphabets differ")]
    AlphabetMismatch,
    #[error("update {index} ({update}): {err}")]
    Trace {
        index: usize,
        update: ConcreteUpdate,
        err: Box<EngineError>,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AbstractUpdate {
    Ins(char),
    Reset,
}

impl AbstractUpdate {
    pub fn of(u: &ConcreteUpdate) -> Self {
        match u {
            ConcreteUpdate::Ins(c, _) => AbstractUpdate::Ins(*c),
            ConcreteUpdate::Reset(_) => AbstractUpdate::Reset,
        }
    }

    pub fn all(alphabet: &Alphabet) -> Vec<AbstractUpdate> {
        let mut v: Vec<AbstractUpdate> = alphabet
            .symbols()
            .iter()
            .map(|&c| AbstractUpdate::Ins(c))
            .collect();
        v.push(AbstractUpdate::Reset);
        v
    }
}

impl fmt::Display for AbstractUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbstractUpdate::Ins(c) => write!(f, "ins {c}"),
            AbstractUpdate::Reset => write!(f, "reset"),
        }
    }
}

/// Source form of one auxiliary relation: output variables, INIT formula and
/// an update rule per abstract update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSpec {
    pub name: String,
    pub vars: Vec<String>,
    pub init: Formula,
    pub rules: BTreeMap<AbstractUpdate, Formula>,
}

impl RelationSpec {
    pub fn new(name: &str, vars: &[&str], init: Formula) -> Self {
        RelationSpec {
            name: name.to_string(),
            vars: vars.iter().map(|v| v.to_string()).collect(),
            init,
            rules: BTreeMap::new(),
        }
    }

    pub fn rule(mut self, on: AbstractUpdate, body: Formula) -> Self {
        self.rules.insert(on, body);
        self
    }

    /// Same body for every insertion symbol.
    pub fn ins_all(mut self, alphabet: &Alphabet, body: impl Fn(char) -> Formula) -> Self {
        for &c in alphabet.symbols() {
            self.rules.insert(AbstractUpdate::Ins(c), body(c));
        }
        self
    }

    /// Same body for every abstract update.
    pub fn every(self, alphabet: &Alphabet, body: Formula) -> Self {
        let b2 = body.clone();
        self.ins_all(alphabet, |_| b2.clone())
            .rule(AbstractUpdate::Reset, body)
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationSchema {
    pub name: String,
    pub arity: usize,
    pub stratum: usize,
}

/// A validated and compiled dynamic program.
#[derive(Debug, Clone)]
pub struct DynamicProgram {
    alphabet: Alphabet,
    specs: Vec<RelationSpec>,
    strata: Vec<usize>,
    order: Vec<usize>,
    index: HashMap<String, usize>,
    designated: Option<String>,
    init_c: Vec<CompiledFormula>,
    rules_c: Vec<BTreeMap<AbstractUpdate, CompiledFormula>>,
}

impl DynamicProgram {
    pub fn new(
        alphabet: Alphabet,
        specs: Vec<RelationSpec>,
        designated: Option<&str>,
    ) -> Result<Self, EngineError> {
        let mut index = HashMap::new();
        for (i, s) in specs.iter().enumerate() {
            if index.insert(s.name.clone(), i).is_some() {
                return Err(EngineError::DuplicateRelation(s.name.clone()));
            }
        }
        if let Some(d) = designated {
            if !index.contains_key(d) {
                return Err(EngineError::UnknownRelation(d.to_string()));
            }
        }
        let updates = AbstractUpdate::all(&alphabet);
        for s in &specs {
            for up in &updates {
                let body = s.rules.get(up).ok_or(EngineError::MissingRule {
                    rel: s.name.clone(),
                    update: *up,
                })?;
                for v in free_vars(body) {
                    if !s.vars.contains(&v) {
                        return Err(EngineError::StrayVariable {
                            rel: s.name.clone(),
                            var: v,
                        });
                    }
                }
            }
            if !s.init.primed_refs().is_empty()
                || !s.init.unprimed_refs().is_empty()
                || s.init.uses_param()
            {
                return Err(EngineError::BadInit(s.name.clone()));
            }
        }
        // stratum = 1 + max stratum of primed references
        let mut strata: Vec<Option<usize>> = vec![None; specs.len()];
        fn level(
            i: usize,
            specs: &[RelationSpec],
            index: &HashMap<String, usize>,
            strata: &mut Vec<Option<usize>>,
            visiting: &mut Vec<bool>,
        ) -> Result<usize, EngineError> {
            if let Some(l) = strata[i] {
                return Ok(l);
            }
            if visiting[i] {
                return Err(EngineError::StratumCycle(specs[i].name.clone()));
            }
            visiting[i] = true;
            let mut l = 0;
            for body in specs[i].rules.values() {
                for r in body.primed_refs() {
                    let j = *index
                        .get(&r)
                        .ok_or_else(|| EngineError::UnknownRelation(r.clone()))?;
                    l = l.max(level(j, specs, index, strata, visiting)? + 1);
                }
            }
            visiting[i] = false;
            strata[i] = Some(l);
            Ok(l)
        }
        let mut visiting = vec![false; specs.len()];
        for i in 0..specs.len() {
            level(i, &specs, &index, &mut strata, &mut visiting)?;
        }
        let strata: Vec<usize> = strata.into_iter().map(|l| l.unwrap()).collect();
        let mut order: Vec<usize> = (0..specs.len()).collect();
        order.sort_by_key(|&i| (strata[i], i));

        let arities: Vec<usize> = specs.iter().map(|s| s.arity()).collect();
        let mut resolve = |name: &str, _primed: bool| -> Result<(usize, usize), FormulaError> {
            let i = *index
                .get(name)
                .ok_or_else(|| FormulaError::UnknownRelation(name.to_string()))?;
            Ok((i, arities[i]))
        };
        let mut init_c = Vec::new();
        let mut rules_c = Vec::new();
        for s in &specs {
            let wrap = |err| EngineError::Formula {
                rel: s.name.clone(),
                err,
            };
            init_c.push(CompiledFormula::compile(&s.init, &s.vars, &mut resolve).map_err(wrap)?);
            let mut m = BTreeMap::new();
            for up in &updates {
                m.insert(
                    *up,
                    CompiledFormula::compile(&s.rules[up], &s.vars, &mut resolve).map_err(wrap)?,
                );
            }
            rules_c.push(m);
        }
        Ok(DynamicProgram {
            alphabet,
            specs,
            strata,
            order,
            index,
            designated: designated.map(str::to_string),
            init_c,
            rules_c,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn specs(&self) -> &[RelationSpec] {
        &self.specs
    }

    pub fn spec(&self, name: &str) -> Option<&RelationSpec> {
        self.index.get(name).map(|&i| &self.specs[i])
    }

    pub fn schemas(&self) -> Vec<RelationSchema> {
        self.specs
            .iter()
            .zip(&self.strata)
            .map(|(s, &l)| RelationSchema {
                name: s.name.clone(),
                arity: s.arity(),
                stratum: l,
            })
            .collect()
    }

    pub fn stratum(&self, name: &str) -> Option<usize> {
        self.index.get(name).map(|&i| self.strata[i])
    }

    pub fn designated(&self) -> Option<&str> {
        self.designated.as_deref()
    }

    pub fn with_designated(mut self, name: &str) -> Result<Self, EngineError> {
        if !self.index.contains_key(name) {
            return Err(EngineError::UnknownRelation(name.to_string()));
        }
        self.designated = Some(name.to_string());
        Ok(self)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn init(&self, n: usize) -> Result<ProgramState, EngineError> {
        let ws = WordStructure::new(n, self.alphabet.clone())?;
        let empty: Vec<&Relation> = Vec::new();
        let ctx = EvalCtx::new(&ws, &empty, &empty);
        let mut aux = Vec::with_capacity(self.specs.len());
        for (i, c) in self.init_c.iter().enumerate() {
            let r = c.eval_all(&ctx, None).map_err(|err| EngineError::Formula {
                rel: self.specs[i].name.clone(),
                err,
            })?;
            aux.push(Arc::new(r));
        }
        Ok(ProgramState { ws, aux })
    }

    /// State with the given word structure and relation contents, e.g. taken
    /// from definitional recomputation.
    pub fn state_from(
        &self,
        ws: WordStructure,
        rels: &HashMap<String, Relation>,
    ) -> Result<ProgramState, EngineError> {
        let mut aux = Vec::new();
        for s in &self.specs {
            let r = rels
                .get(&s.name)
                .ok_or_else(|| EngineError::UnknownRelation(s.name.clone()))?;
            aux.push(Arc::new(r.clone()));
        }
        Ok(ProgramState { ws, aux })
    }

    pub fn step(&self, s: &ProgramState, u: &ConcreteUpdate) -> Result<ProgramState, EngineError> {
        let ws = s.ws.apply(u)?;
        let up = AbstractUpdate::of(u);
        let placeholder = Relation::empty(0);
        let old: Vec<&Relation> = s.aux.iter().map(|r| r.as_ref()).collect();
        let mut new_vals: Vec<Option<Arc<Relation>>> = vec![None; self.specs.len()];
        let mut pos = 0;
        while pos < self.order.len() {
            let level = self.strata[self.order[pos]];
            let end = self.order[pos..]
                .iter()
                .position(|&i| self.strata[i] != level)
                .map_or(self.order.len(), |k| pos + k);
            let new_refs: Vec<&Relation> = new_vals
                .iter()
                .map(|r| r.as_deref().unwrap_or(&placeholder))
                .collect();
            let ctx = EvalCtx::new(&ws, &old, &new_refs);
            let mut computed = Vec::new();
            for &i in &self.order[pos..end] {
                let r = self.rules_c[i][&up]
                    .eval_all(&ctx, Some(u.node()))
                    .map_err(|err| EngineError::Formula {
                        rel: self.specs[i].name.clone(),
                        err,
                    })?;
                computed.push((i, r));
            }
            drop(ctx);
            for (i, r) in computed {
                new_vals[i] = Some(Arc::new(r));
            }
            pos = end;
        }
        Ok(ProgramState {
            ws,
            aux: new_vals.into_iter().map(|r| r.unwrap()).collect(),
        })
    }

    pub fn run(
        &self,
        s: &ProgramState,
        trace: &[ConcreteUpdate],
    ) -> Result<ProgramState, EngineError> {
        let mut cur = s.clone();
        for (index, u) in trace.iter().enumerate() {
            cur = self.step(&cur, u).map_err(|err| EngineError::Trace {
                index,
                update: *u,
                err: Box::new(err),
            })?;
        }
        Ok(cur)
    }

    fn rule_bodies(&self, up: AbstractUpdate) -> HashMap<String, RuleBody> {
        self.specs
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    RuleBody {
                        vars: s.vars.clone(),
                        body: s.rules[&up].clone(),
                    },
                )
            })
            .collect()
    }

    /// Weakest fragment containing every update rule after primed inlining.
    pub fn classify(&self) -> FragmentClass {
        let mut best = FragmentClass::QF;
        for up in AbstractUpdate::all(&self.alphabet) {
            let rules = self.rule_bodies(up);
            for s in &self.specs {
                let c = classify_inlined(&s.rules[&up], &rules).expect("validated program");
                best = best.max(c);
            }
        }
        best
    }

    /// Equivalent single-stratum program whose rules have every primed atom
    /// replaced by the referenced rule body.
    pub fn inlined(&self) -> Result<DynamicProgram, EngineError> {
        let mut specs = self.specs.clone();
        for up in AbstractUpdate::all(&self.alphabet) {
            let rules = self.rule_bodies(up);
            for s in specs.iter_mut() {
                let body =
                    inline_primed(&s.rules[&up], &rules).map_err(|err| EngineError::Formula {
                        rel: s.name.clone(),
                        err,
                    })?;
                s.rules.insert(up, body);
            }
        }
        DynamicProgram::new(self.alphabet.clone(), specs, self.designated.as_deref())
    }

    /// Program dump in the line format `relation`, `init`, `rule`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        if let Some(d) = &self.designated {
            out.push_str(&format!("designated {d}\n"));
        }
        out.push_str(&format!("alphabet {}\n", self.alphabet));
        for (s, l) in self.specs.iter().zip(&self.strata) {
            out.push_str(&format!(
                "relation {}/{} stratum {} vars {}\n",
                s.name,
                s.arity(),
                l,
                s.vars.join(" ")
            ));
            out.push_str(&format!("init {} {}\n", s.name, s.init));
            for (up, body) in &s.rules {
                out.push_str(&format!("rule {} {} {}\n", s.name, up, body));
            }
        }
        out
    }

    pub fn parse_dump(text: &str) -> Result<DynamicProgram, EngineError> {
        let mut alphabet = None;
        let mut designated = None;
        let mut specs: Vec<RelationSpec> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let perr = |msg: String| EngineError::Parse { line, msg };
            let raw = raw.trim();
            if raw.is_empty() || raw.starts_with('#') {
                continue;
            }
            let (key, rest) = raw.split_once(' ').unwrap_or((raw, ""));
            let formula = |s: &str| parse_formula(s).map_err(|e| perr(e.to_string()));
            match key {
                "alphabet" => {
                    alphabet = Some(Alphabet::parse(rest).map_err(|e| perr(e.to_string()))?)
                }
                "designated" => designated = Some(rest.trim().to_string()),
                "relation" => {
                    let toks: Vec<&str> = rest.split_whitespace().collect();
                    let (name, _arity) = toks
                        .first()
                        .and_then(|t| t.split_once('/'))
                        .ok_or_else(|| perr("expected <name>/<arity>".into()))?;
                    let vars: Vec<&str> = match toks.iter().position(|t| *t == "vars") {
                        Some(p) => toks[p + 1..].to_vec(),
                        None => Vec::new(),
                    };
                    specs.push(RelationSpec::new(name, &vars, Formula::False));
                }
                "init" | "rule" => {
                    let (name, rest) = rest
                        .split_once(' ')
                        .ok_or_else(|| perr("missing relation".into()))?;
                    let spec = specs
                        .iter_mut()
                        .find(|s| s.name == name)
                        .ok_or_else(|| perr(format!("undeclared relation {name}")))?;
                    if key == "init" {
                        spec.init = formula(rest)?;
                    } else if let Some(body) = rest.strip_prefix("reset ") {
                        spec.rules.insert(AbstractUpdate::Reset, formula(body)?);
                    } else if let Some(r) = rest.strip_prefix("ins ") {
                        let mut cs = r.chars();
                        let c = cs.next().ok_or_else(|| perr("missing symbol".into()))?;
                        spec.rules
                            .insert(AbstractUpdate::Ins(c), formula(cs.as_str())?);
                    } else {
                        return Err(perr("expected ins or reset".into()));
                    }
                }
                other => return Err(perr(format!("unknown key {other:?}"))),
            }
        }
        let alphabet = alphabet.ok_or(EngineError::Parse {
            line: 1,
            msg: "missing alphabet".into(),
        })?;
        DynamicProgram::new(alphabet, specs, designated.as_deref())
    }
}

/// Union of programs over one alphabet; relations with the same name must
/// have identical definitions and are kept once.
pub fn compose(parts: &[&DynamicProgram]) -> Result<DynamicProgram, EngineError> {
    let first = parts.first().ok_or(EngineError::AlphabetMismatch)?;
    let mut specs: Vec<RelationSpec> = Vec::new();
    let mut designated = None;
    for p in parts {
        if p.alphabet != first.alphabet {
            return Err(EngineError::AlphabetMismatch);
        }
        for s in &p.specs {
            match specs.iter().find(|t| t.name == s.name) {
                Some(t) if t == s => {}
                Some(_) => return Err(EngineError::Conflict(s.name.clone())),
                None => specs.push(s.clone()),
            }
        }
        if designated.is_none() {
            designated = p.designated.clone();
        }
    }
    DynamicProgram::new(first.alphabet.clone(), specs, designated.as_deref())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgramState {
    pub ws: WordStructure,
    aux: Vec<Arc<Relation>>,
}

impl ProgramState {
    pub fn relation<'a>(&'a self, p: &DynamicProgram, name: &str) -> Option<&'a Relation> {
        p.index.get(name).map(|&i| self.aux[i].as_ref())
    }

    pub fn relations<'a>(
        &'a self,
        p: &'a DynamicProgram,
    ) -> impl Iterator<Item = (&'a str, &'a Relation)> {
        p.specs
            .iter()
            .zip(&self.aux)
            .map(|(s, r)| (s.name.as_str(), r.as_ref()))
    }

    /// `<name>: (t1,..) ...` lines, in declaration order.
    pub fn dump(&self, p: &DynamicProgram) -> String {
        let mut out = String::new();
        for (name, r) in self.relations(p) {
            out.push_str(&dump_relation(name, r, self.ws.dollar()));
            out.push('\n');
        }
        out
    }
}

pub fn dump_relation(name: &str, r: &Relation, dollar: Node) -> String {
    let body = r.render(dollar);
    if body.is_empty() {
        format!("{name}:")
    } else {
        format!("{name}: {body}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{and, aux, auxp, eq, exists, lt, or, sym};

    fn ab() -> Alphabet {
        Alphabet::parse("ab").unwrap()
    }

    // counts labeled nodes up to x, as a toy program with a primed layer
    fn toy() -> DynamicProgram {
        let a = ab();
        let lab = RelationSpec::new("L", &["x"], Formula::False)
            .ins_all(&a, |_| or(vec![aux("L", &["x"]), eq("x", "u")]))
            .rule(
                AbstractUpdate::Reset,
                and(vec![aux("L", &["x"]), lt("x", "u")]).clone(),
            );
        let lab = RelationSpec {
            rules: {
                let mut m = lab.rules.clone();
                m.insert(
                    AbstractUpdate::Reset,
                    or(vec![
                        and(vec![aux("L", &["x"]), lt("x", "u")]),
                        and(vec![aux("L", &["x"]), lt("u", "x")]),
                    ]),
                );
                m
            },
            ..lab
        };
        let has_a = RelationSpec::new("A", &[], Formula::False).every(
            &a,
            exists(&["y"], and(vec![auxp("L", &["y"]), sym('a', "y")])),
        );
        DynamicProgram::new(a, vec![lab, has_a], Some("A")).unwrap()
    }

    #[test]
    fn strata_and_steps() {
        let p = toy();
        assert_eq!(p.stratum("L"), Some(0));
        assert_eq!(p.stratum("A"), Some(1));
        let s = p.init(4).unwrap();
        assert!(s.relation(&p, "A").unwrap().is_empty());
        let s = p
            .run(
                &s,
                &[ConcreteUpdate::Ins('b', 2), ConcreteUpdate::Ins('a', 3)],
            )
            .unwrap();
        assert_eq!(s.relation(&p, "L").unwrap().rows(), &[vec![2], vec![3]]);
        assert_eq!(s.relation(&p, "A").unwrap(), &Relation::unit());
        let s2 = p.step(&s, &ConcreteUpdate::Reset(3)).unwrap();
        assert!(s2.relation(&p, "A").unwrap().is_empty());
        assert!(p.step(&s2, &ConcreteUpdate::Reset(3)).is_err());
        assert_eq!(p.run(&s, &[]).unwrap(), s);
        match p.run(&s, &[ConcreteUpdate::Reset(1)]) {
            Err(EngineError::Trace { index, .. }) => assert_eq!(index, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation() {
        let a = ab();
        let missing = RelationSpec::new("R", &["x"], Formula::False)
            .rule(AbstractUpdate::Reset, Formula::False);
        assert!(matches!(
            DynamicProgram::new(a.clone(), vec![missing], None),
            Err(EngineError::MissingRule { .. })
        ));
        let cyc = RelationSpec::new("R", &[], Formula::False).every(&a, auxp("R", &[] as &[&str]));
        assert!(matches!(
            DynamicProgram::new(a.clone(), vec![cyc], None),
            Err(EngineError::StratumCycle(_))
        ));
        let stray = RelationSpec::new("R", &["x"], Formula::False).every(&a, sym('a', "y"));
        assert!(matches!(
            DynamicProgram::new(a.clone(), vec![stray], None),
            Err(EngineError::StrayVariable { .. })
        ));
        let bad_init = RelationSpec::new("R", &["x"], aux("R", &["x"])).every(&a, Formula::False);
        assert!(matches!(
            DynamicProgram::new(a, vec![bad_init], None),
            Err(EngineError::BadInit(_))
        ));
    }

    #[test]
    fn dump_round_trip_and_compose() {
        let p = toy();
        let q = DynamicProgram::parse_dump(&p.dump()).unwrap();
        assert_eq!(q.specs(), p.specs());
        assert_eq!(q.designated(), Some("A"));
        let c = compose(&[&p, &p]).unwrap();
        assert_eq!(c.specs(), p.specs());
        let mut other = p.specs().to_vec();
        other[1].init = Formula::True;
        let o = DynamicProgram::new(ab(), other, None).unwrap();
        assert!(matches!(compose(&[&p, &o]), Err(EngineError::Conflict(_))));
    }

    #[test]
    fn inlined_agrees() {
        let p = toy();
        let q = p.inlined().unwrap();
        assert_eq!(q.stratum("A"), Some(0));
        let s = p
            .run(&p.init(4).unwrap(), &[ConcreteUpdate::Ins('a', 1)])
            .unwrap();
        for u in s.ws.valid_updates() {
            assert_eq!(p.step(&s, &u).unwrap(), q.step(&s, &u).unwrap());
        }
        assert_eq!(p.classify(), FragmentClass::UCQ);
    }
}
