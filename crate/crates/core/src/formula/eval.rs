//! Formula evaluation by backtracking joins.
//!
//! Formulas are compiled to a slot-indexed form: output variables take slots
//! `0..k`, the update parameter slot `k`, and every quantifier its own slot.
//! A binding maps slots to nodes, with `0` meaning unbound.

use std::collections::{BTreeSet, HashMap};

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use super::{Formula, FormulaError, Term};
use crate::relation::{Relation, Tuple};
use crate::word::{Node, WordStructure};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CTerm {
    Slot(u16),
    Dollar,
    One,
}

#[derive(Debug, Clone)]
enum CNode {
    True,
    False,
    Sym(char, CTerm),
    Lt(CTerm, CTerm),
    Leq(CTerm, CTerm),
    Eq(CTerm, CTerm),
    Rel {
        primed: bool,
        idx: usize,
        args: Vec<CTerm>,
    },
    And(Vec<Cf>),
    Or(Vec<Cf>),
    Not(Box<Cf>),
    Exists(u16, Box<Cf>),
}

#[derive(Debug, Clone)]
struct Cf {
    node: CNode,
    // sorted free slots, including the parameter slot when used
    free: Vec<u16>,
    // worth memoizing when checked fully bound
    heavy: bool,
}

/// A formula compiled against fixed output variables and a relation resolver.
#[derive(Debug, Clone)]
pub struct CompiledFormula {
    root: Cf,
    n_slots: usize,
    arity: usize,
    uses_param: bool,
}

struct Compiler<'r> {
    scope: Vec<(String, u16)>,
    next: u16,
    resolve: &'r mut dyn FnMut(&str, bool) -> Result<(usize, usize), FormulaError>,
    param_slot: u16,
    uses_param: bool,
}

impl Compiler<'_> {
    fn term(&mut self, t: &Term) -> Result<CTerm, FormulaError> {
        Ok(match t {
            Term::Dollar => CTerm::Dollar,
            Term::One => CTerm::One,
            Term::Param => {
                self.uses_param = true;
                CTerm::Slot(self.param_slot)
            }
            Term::Var(v) => match self.scope.iter().rev().find(|(n, _)| n == v) {
                Some((_, s)) => CTerm::Slot(*s),
                None => return Err(FormulaError::UnboundVariable(v.clone())),
            },
        })
    }

    fn node(&mut self, f: &Formula) -> Result<Cf, FormulaError> {
        let node = match f {
            Formula::True => CNode::True,
            Formula::False => CNode::False,
            Formula::Sym(c, x) => CNode::Sym(*c, self.term(x)?),
            Formula::Lt(x, y) => CNode::Lt(self.term(x)?, self.term(y)?),
            Formula::Leq(x, y) => CNode::Leq(self.term(x)?, self.term(y)?),
            Formula::Eq(x, y) => CNode::Eq(self.term(x)?, self.term(y)?),
            Formula::Aux(r, ts) | Formula::AuxP(r, ts) => {
                let primed = matches!(f, Formula::AuxP(..));
                let (idx, arity) = (self.resolve)(r, primed)?;
                if arity != ts.len() {
                    return Err(FormulaError::ArityMismatch {
                        rel: r.clone(),
                        expected: arity,
                        got: ts.len(),
                    });
                }
                let args = ts.iter().map(|x| self.term(x)).collect::<Result<_, _>>()?;
                CNode::Rel { primed, idx, args }
            }
            Formula::And(ps) => {
                CNode::And(ps.iter().map(|p| self.node(p)).collect::<Result<_, _>>()?)
            }
            Formula::Or(ps) => {
                CNode::Or(ps.iter().map(|p| self.node(p)).collect::<Result<_, _>>()?)
            }
            Formula::Not(g) => CNode::Not(Box::new(self.node(g)?)),
            Formula::Exists(v, g) => {
                let s = self.next;
                self.next += 1;
                self.scope.push((v.clone(), s));
                let body = self.node(g)?;
                self.scope.pop();
                CNode::Exists(s, Box::new(body))
            }
        };
        let heavy = match &node {
            CNode::Exists(..) => true,
            CNode::And(ps) | CNode::Or(ps) => ps.iter().any(|p| p.heavy),
            CNode::Not(g) => g.heavy,
            _ => false,
        };
        Ok(Cf {
            free: free_slots(&node),
            node,
            heavy,
        })
    }
}

/// The slot of a disjunction of symbol atoms over one variable.
fn guard_slot(cf: &Cf) -> Option<u16> {
    let CNode::Or(ps) = &cf.node else { return None };
    let mut slot = None;
    for p in ps {
        match &p.node {
            CNode::Sym(_, CTerm::Slot(s)) if slot.is_none_or(|t| t == *s) => slot = Some(*s),
            _ => return None,
        }
    }
    slot
}

fn term_slot(t: &CTerm) -> Option<u16> {
    match t {
        CTerm::Slot(s) => Some(*s),
        _ => None,
    }
}

fn free_slots(n: &CNode) -> Vec<u16> {
    let mut set = BTreeSet::new();
    match n {
        CNode::True | CNode::False => {}
        CNode::Sym(_, x) => set.extend(term_slot(x)),
        CNode::Lt(x, y) | CNode::Leq(x, y) | CNode::Eq(x, y) => {
            set.extend(term_slot(x));
            set.extend(term_slot(y));
        }
        CNode::Rel { args, .. } => set.extend(args.iter().filter_map(term_slot)),
        CNode::And(ps) | CNode::Or(ps) => {
            for p in ps {
                set.extend(p.free.iter().copied());
            }
        }
        CNode::Not(g) => set.extend(g.free.iter().copied()),
        CNode::Exists(s, g) => set.extend(g.free.iter().copied().filter(|x| x != s)),
    }
    set.into_iter().collect()
}

impl CompiledFormula {
    /// Compile `f` with designated output variables. `resolve(name, primed)`
    /// returns the relation's index and arity.
    pub fn compile(
        f: &Formula,
        out_vars: &[String],
        resolve: &mut dyn FnMut(&str, bool) -> Result<(usize, usize), FormulaError>,
    ) -> Result<Self, FormulaError> {
        let k = out_vars.len();
        let mut c = Compiler {
            scope: out_vars
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), i as u16))
                .collect(),
            next: k as u16 + 1,
            resolve,
            param_slot: k as u16,
            uses_param: false,
        };
        let root = c.node(f)?;
        Ok(CompiledFormula {
            root,
            n_slots: c.next as usize,
            arity: k,
            uses_param: c.uses_param,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn uses_param(&self) -> bool {
        self.uses_param
    }

    fn binding(&self, param: Option<Node>) -> Result<Vec<Node>, FormulaError> {
        let mut b = vec![0; self.n_slots];
        match param {
            Some(u) => b[self.arity] = u,
            None if self.uses_param => return Err(FormulaError::NoParam),
            None => {}
        }
        Ok(b)
    }

    /// All output tuples satisfying the formula.
    pub fn eval_all(
        &self,
        ctx: &EvalCtx<'_>,
        param: Option<Node>,
    ) -> Result<Relation, FormulaError> {
        let mut b = self.binding(param)?;
        let k = self.arity;
        let dollar = ctx.dollar;
        let mut out: Vec<Tuple> = Vec::new();
        let mut cb = |b: &mut [Node]| {
            let unbound: Vec<usize> = (0..k).filter(|&i| b[i] == 0).collect();
            if unbound.is_empty() {
                out.push(b[..k].to_vec());
                return false;
            }
            // output variables the formula leaves unconstrained range over D
            let mut t: Tuple = b[..k].to_vec();
            for &i in &unbound {
                t[i] = 1;
            }
            loop {
                out.push(t.clone());
                let mut pos = 0;
                loop {
                    if pos == unbound.len() {
                        return false;
                    }
                    let i = unbound[pos];
                    if t[i] < dollar {
                        t[i] += 1;
                        break;
                    }
                    t[i] = 1;
                    pos += 1;
                }
            }
        };
        Solver {
            ctx,
            outputs: k as u16,
            memo: &Memo::default(),
        }
        .solve(&[&self.root], &mut b, &mut cb);
        Ok(Relation::from_tuples(k, out))
    }

    /// Truth under a full assignment of the output variables.
    pub fn holds(
        &self,
        ctx: &EvalCtx<'_>,
        param: Option<Node>,
        asg: &[Node],
    ) -> Result<bool, FormulaError> {
        let mut b = self.binding(param)?;
        b[..self.arity].copy_from_slice(asg);
        Ok(Solver {
            ctx,
            outputs: 0,
            memo: &Memo::default(),
        }
        .solve(&[&self.root], &mut b, &mut |_| true))
    }
}

/// Index-based evaluation context: the updated word, the pre-update
/// relations and the relations already recomputed in this step.
pub struct EvalCtx<'a> {
    labels: &'a [Option<char>],
    dollar: Node,
    old: &'a [&'a Relation],
    new: &'a [&'a Relation],
    sym_nodes: Vec<(char, Vec<Node>)>,
}

impl<'a> EvalCtx<'a> {
    pub fn new(ws: &'a WordStructure, old: &'a [&'a Relation], new: &'a [&'a Relation]) -> Self {
        let labels = ws.label_slice();
        let sym_nodes = ws
            .alphabet()
            .symbols()
            .iter()
            .map(|&c| (c, (1..=ws.n()).filter(|&i| labels[i] == Some(c)).collect()))
            .collect();
        EvalCtx {
            labels,
            dollar: ws.dollar(),
            old,
            new,
            sym_nodes,
        }
    }

    fn sym_nodes(&self, c: char) -> &[Node] {
        self.sym_nodes
            .iter()
            .find(|(s, _)| *s == c)
            .map(|(_, v)| v.as_slice())
            .unwrap_or(&[])
    }

    fn rel(&self, primed: bool, idx: usize) -> &Relation {
        if primed {
            self.new[idx]
        } else {
            self.old[idx]
        }
    }
}

struct Solver<'c, 'a> {
    ctx: &'c EvalCtx<'a>,
    // output slots `0..outputs`; once the remaining goals mention none of
    // them unbound, one witness for the rest is enough
    outputs: u16,
    memo: &'c Memo,
}

// Truth of fully bound existential goals, keyed by goal and free-slot values.
#[derive(Default)]
struct Memo(std::cell::RefCell<FxHashMap<(usize, u128), bool>>);

// Exact key: the goal's address and up to 8 free-slot values of 16 bits.
fn memo_key(cf: &Cf, b: &[Node]) -> Option<(usize, u128)> {
    if cf.free.len() > 8 {
        return None;
    }
    let mut k: u128 = 0;
    for &s in &cf.free {
        let v = b[s as usize];
        if v >= 1 << 16 {
            return None;
        }
        k = (k << 16) | v as u128;
    }
    Some((cf as *const Cf as usize, k))
}

type Goals<'f> = SmallVec<[&'f Cf; 16]>;

enum Choice {
    Atom(usize),
    Flatten,
    Branch(usize),
    Enumerate(u16),
}

impl Solver<'_, '_> {
    #[inline]
    fn val(&self, t: CTerm, b: &[Node]) -> Node {
        match t {
            CTerm::Slot(s) => b[s as usize],
            CTerm::Dollar => self.ctx.dollar,
            CTerm::One => 1,
        }
    }

    fn check(&self, cf: &Cf, b: &mut [Node]) -> bool {
        match &cf.node {
            CNode::True => true,
            CNode::False => false,
            CNode::Sym(c, x) => {
                let v = self.val(*x, b);
                self.ctx.labels.get(v).copied().flatten() == Some(*c)
            }
            CNode::Lt(x, y) => self.val(*x, b) < self.val(*y, b),
            CNode::Leq(x, y) => self.val(*x, b) <= self.val(*y, b),
            CNode::Eq(x, y) => self.val(*x, b) == self.val(*y, b),
            CNode::Rel { primed, idx, args } => {
                let b: &[Node] = b;
                self.ctx
                    .rel(*primed, *idx)
                    .contains_by(|c| self.val(args[c], b))
            }
            CNode::And(ps) => ps.iter().all(|p| self.check(p, b)),
            CNode::Or(ps) if cf.heavy => {
                let Some(key) = memo_key(cf, b) else {
                    return ps.iter().any(|p| self.check(p, b));
                };
                if let Some(&v) = self.memo.0.borrow().get(&key) {
                    return v;
                }
                let v = ps.iter().any(|p| self.check(p, b));
                self.memo.0.borrow_mut().insert(key, v);
                v
            }
            CNode::Or(ps) => ps.iter().any(|p| self.check(p, b)),
            CNode::Not(g) => !self.check(g, b),
            CNode::Exists(_, body) => {
                let Some(key) = memo_key(cf, b) else {
                    return self.satisfiable(&[&**body], b);
                };
                if let Some(&v) = self.memo.0.borrow().get(&key) {
                    return v;
                }
                let v = self.satisfiable(&[&**body], b);
                self.memo.0.borrow_mut().insert(key, v);
                v
            }
        }
    }

    fn satisfiable(&self, goals: &[&Cf], b: &mut [Node]) -> bool {
        Solver {
            ctx: self.ctx,
            outputs: 0,
            memo: self.memo,
        }
        .solve(goals, b, &mut |_| true)
    }

    // Rows agreeing with the bound arguments.
    fn matching<'r>(&self, rel: &'r Relation, args: &[CTerm], b: &[Node]) -> Option<&'r [u32]> {
        let mut mask = 0u32;
        for (c, a) in args.iter().enumerate().take(32) {
            if self.val(*a, b) != 0 {
                mask |= 1 << c;
            }
        }
        rel.matching(mask, |c| self.val(args[c], b))
    }

    fn is_bound(cf: &Cf, b: &[Node]) -> bool {
        cf.free.iter().all(|&s| b[s as usize] != 0)
    }

    // Estimated number of candidate extensions produced by an atom goal.
    fn cost(&self, cf: &Cf, b: &[Node]) -> Option<usize> {
        let d = self.ctx.dollar;
        match &cf.node {
            CNode::Sym(c, _) => Some(self.ctx.sym_nodes(*c).len()),
            CNode::Eq(x, y) => {
                let (vx, vy) = (self.val(*x, b), self.val(*y, b));
                Some(if vx != 0 || vy != 0 { 1 } else { d })
            }
            CNode::Lt(x, y) | CNode::Leq(x, y) => {
                let (vx, vy) = (self.val(*x, b), self.val(*y, b));
                Some(if vx != 0 {
                    d - vx + 1
                } else if vy != 0 {
                    vy
                } else {
                    d * d / 2
                })
            }
            CNode::Rel { primed, idx, args } => {
                let rel = self.ctx.rel(*primed, *idx);
                Some(
                    self.matching(rel, args, b)
                        .map_or(rel.len(), |ids| ids.len()),
                )
            }
            _ => None,
        }
    }

    /// Enumerate bindings satisfying all goals; `k` returns true to stop.
    /// Returns true iff stopped. The binding is restored before returning.
    fn solve<'f>(
        &self,
        goals: &[&'f Cf],
        b: &mut [Node],
        k: &mut dyn FnMut(&mut [Node]) -> bool,
    ) -> bool {
        // flatten conjunctions and check everything already bound
        let mut work: Goals<'f> = SmallVec::new();
        let mut stack: Goals<'f> = SmallVec::from_slice(goals);
        while let Some(g) = stack.pop() {
            match &g.node {
                CNode::True => {}
                CNode::False => return false,
                CNode::And(ps) => stack.extend(ps.iter()),
                CNode::Exists(_, body) if !Self::is_bound(g, b) => stack.push(body),
                _ => {
                    if Self::is_bound(g, b) {
                        if !self.check(g, b) {
                            return false;
                        }
                    } else {
                        work.push(g);
                    }
                }
            }
        }
        if work.is_empty() {
            return k(b);
        }
        if self.outputs > 0
            && work.iter().all(|g| {
                g.free
                    .iter()
                    .all(|&s| s >= self.outputs || b[s as usize] != 0)
            })
        {
            return self.satisfiable(&work, b) && k(b);
        }

        let d = self.ctx.dollar;
        let mut best: Option<(usize, usize)> = None;
        let mut has_exists = false;
        let mut best_or: Option<(usize, usize)> = None;
        for (i, g) in work.iter().enumerate() {
            match &g.node {
                CNode::Exists(..) => has_exists = true,
                // a symbol guard only filters when another goal can bind its slot
                CNode::Or(_)
                    if guard_slot(g).is_some_and(|s| {
                        work.iter()
                            .enumerate()
                            .any(|(j, h)| j != i && guard_slot(h).is_none() && h.free.contains(&s))
                    }) => {}
                CNode::Or(ps) => {
                    if best_or.is_none_or(|(_, n)| ps.len() < n) {
                        best_or = Some((i, ps.len()));
                    }
                }
                CNode::Not(_) => {}
                _ => {
                    if let Some(c) = self.cost(g, b) {
                        if c == 0 {
                            return false;
                        }
                        if best.is_none_or(|(_, bc)| c < bc) {
                            best = Some((i, c));
                        }
                    }
                }
            }
        }
        let choice = match (best, best_or) {
            (Some((i, c)), _) if c <= d => Choice::Atom(i),
            _ if has_exists => Choice::Flatten,
            (None, Some((i, _))) => Choice::Branch(i),
            (Some((i, c)), Some((j, n))) => {
                if n * d < c {
                    Choice::Branch(j)
                } else {
                    Choice::Atom(i)
                }
            }
            (Some((i, _)), None) => Choice::Atom(i),
            (None, None) => {
                let slot = work
                    .iter()
                    .flat_map(|g| g.free.iter())
                    .copied()
                    .find(|&s| b[s as usize] == 0)
                    .expect("unbound goal without unbound slot");
                Choice::Enumerate(slot)
            }
        };

        match choice {
            Choice::Flatten => {
                let next: Goals = work
                    .iter()
                    .map(|g| match &g.node {
                        CNode::Exists(_, body) => &**body,
                        _ => *g,
                    })
                    .collect();
                self.solve(&next, b, k)
            }
            Choice::Branch(i) => {
                let or = work.swap_remove(i);
                let CNode::Or(ps) = &or.node else {
                    unreachable!()
                };
                for p in ps {
                    work.push(p);
                    let stop = self.solve(&work, b, k);
                    work.pop();
                    if stop {
                        return true;
                    }
                }
                false
            }
            Choice::Enumerate(s) => {
                for v in 1..=d {
                    b[s as usize] = v;
                    let stop = self.solve(&work, b, k);
                    b[s as usize] = 0;
                    if stop {
                        return true;
                    }
                }
                false
            }
            Choice::Atom(i) => {
                let g = work.swap_remove(i);
                self.generate(g, work, b, k)
            }
        }
    }

    fn try_value<'f>(
        &self,
        s: u16,
        v: Node,
        rest: &[&'f Cf],
        b: &mut [Node],
        k: &mut dyn FnMut(&mut [Node]) -> bool,
    ) -> bool {
        b[s as usize] = v;
        let stop = self.solve(rest, b, k);
        b[s as usize] = 0;
        stop
    }

    fn generate<'f>(
        &self,
        g: &'f Cf,
        rest: Goals<'f>,
        b: &mut [Node],
        k: &mut dyn FnMut(&mut [Node]) -> bool,
    ) -> bool {
        let d = self.ctx.dollar;
        match &g.node {
            CNode::Sym(c, x) => {
                let s = term_slot(x).expect("unbound constant");
                for &v in self.ctx.sym_nodes(*c) {
                    if self.try_value(s, v, &rest, b, k) {
                        return true;
                    }
                }
                false
            }
            CNode::Eq(x, y) => {
                let (vx, vy) = (self.val(*x, b), self.val(*y, b));
                match (term_slot(x), term_slot(y)) {
                    (Some(sx), _) if vx == 0 && vy != 0 => self.try_value(sx, vy, &rest, b, k),
                    (_, Some(sy)) if vy == 0 && vx != 0 => self.try_value(sy, vx, &rest, b, k),
                    (Some(sx), Some(sy)) => {
                        for v in 1..=d {
                            b[sx as usize] = v;
                            b[sy as usize] = v;
                            let stop = self.solve(&rest, b, k);
                            b[sx as usize] = 0;
                            b[sy as usize] = 0;
                            if stop {
                                return true;
                            }
                        }
                        false
                    }
                    _ => unreachable!("eq goal without unbound slot"),
                }
            }
            CNode::Lt(x, y) | CNode::Leq(x, y) => {
                let strict = matches!(g.node, CNode::Lt(..));
                let (vx, vy) = (self.val(*x, b), self.val(*y, b));
                let (sx, sy) = (term_slot(x), term_slot(y));
                if vx != 0 {
                    let lo = if strict { vx + 1 } else { vx };
                    let s = sy.unwrap();
                    for v in lo..=d {
                        if self.try_value(s, v, &rest, b, k) {
                            return true;
                        }
                    }
                    false
                } else if vy != 0 {
                    let hi = if strict { vy.saturating_sub(1) } else { vy };
                    let s = sx.unwrap();
                    for v in 1..=hi {
                        if self.try_value(s, v, &rest, b, k) {
                            return true;
                        }
                    }
                    false
                } else {
                    let (sx, sy) = (sx.unwrap(), sy.unwrap());
                    if sx == sy {
                        if strict {
                            return false;
                        }
                        for v in 1..=d {
                            if self.try_value(sx, v, &rest, b, k) {
                                return true;
                            }
                        }
                        return false;
                    }
                    for v in 1..=d {
                        b[sx as usize] = v;
                        let lo = if strict { v + 1 } else { v };
                        for w in lo..=d {
                            if self.try_value(sy, w, &rest, b, k) {
                                b[sx as usize] = 0;
                                return true;
                            }
                        }
                        b[sx as usize] = 0;
                    }
                    false
                }
            }
            CNode::Rel { primed, idx, args } => {
                let rel = self.ctx.rel(*primed, *idx);
                let posting = self.matching(rel, args, b);
                let rows = rel.rows();
                let mut run = |t: &Tuple, b: &mut [Node]| -> bool {
                    let mut newly: [u16; 16] = [0; 16];
                    let mut nn = 0;
                    let mut ok = true;
                    for (c, a) in args.iter().enumerate() {
                        let want = t[c];
                        match a {
                            CTerm::Slot(s) => {
                                let cur = b[*s as usize];
                                if cur == 0 {
                                    b[*s as usize] = want;
                                    newly[nn] = *s;
                                    nn += 1;
                                } else if cur != want {
                                    ok = false;
                                    break;
                                }
                            }
                            other => {
                                if self.val(*other, b) != want {
                                    ok = false;
                                    break;
                                }
                            }
                        }
                    }
                    let stop = ok && self.solve(&rest, b, k);
                    for &s in &newly[..nn] {
                        b[s as usize] = 0;
                    }
                    stop
                };
                match posting {
                    Some(ids) => {
                        for &r in ids {
                            if run(&rows[r as usize], b) {
                                return true;
                            }
                        }
                    }
                    None => {
                        for t in rows {
                            if run(t, b) {
                                return true;
                            }
                        }
                    }
                }
                false
            }
            _ => unreachable!("generate on non-atom"),
        }
    }
}

/// Name-based evaluation environment.
pub struct EvalEnv<'a> {
    /// The updated word structure (for symbol atoms).
    pub ws: &'a WordStructure,
    /// Pre-update relations, read by unprimed atoms.
    pub old: HashMap<String, &'a Relation>,
    /// Already recomputed relations, read by primed atoms.
    pub new: HashMap<String, &'a Relation>,
    pub param: Option<Node>,
}

fn compile_in_env(
    f: &Formula,
    env: &EvalEnv<'_>,
    out_vars: &[String],
) -> Result<(CompiledFormula, Vec<String>, Vec<String>), FormulaError> {
    let mut old_names: Vec<String> = Vec::new();
    let mut new_names: Vec<String> = Vec::new();
    let mut resolve = |name: &str, primed: bool| -> Result<(usize, usize), FormulaError> {
        let (map, names) = if primed {
            (&env.new, &mut new_names)
        } else {
            (&env.old, &mut old_names)
        };
        let rel = map
            .get(name)
            .ok_or_else(|| FormulaError::UnknownRelation(name.to_string()))?;
        let idx = match names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                names.push(name.to_string());
                names.len() - 1
            }
        };
        Ok((idx, rel.arity()))
    };
    let c = CompiledFormula::compile(f, out_vars, &mut resolve)?;
    Ok((c, old_names, new_names))
}

fn with_ctx<R>(
    env: &EvalEnv<'_>,
    old_names: &[String],
    new_names: &[String],
    run: impl FnOnce(&EvalCtx<'_>) -> R,
) -> R {
    let old: Vec<&Relation> = old_names.iter().map(|n| env.old[n]).collect();
    let new: Vec<&Relation> = new_names.iter().map(|n| env.new[n]).collect();
    let ctx = EvalCtx::new(env.ws, &old, &new);
    run(&ctx)
}

/// Truth of `f` under `asg`, which must bind every free variable.
pub fn evaluate(
    f: &Formula,
    env: &EvalEnv<'_>,
    asg: &HashMap<String, Node>,
) -> Result<bool, FormulaError> {
    let vars: Vec<String> = asg.keys().cloned().collect();
    let (c, on, nn) = compile_in_env(f, env, &vars)?;
    let vals: Vec<Node> = vars.iter().map(|v| asg[v]).collect();
    with_ctx(env, &on, &nn, |ctx| c.holds(ctx, env.param, &vals))
}

/// `{ t̄ | evaluate(f, out_vars ↦ t̄) }`.
pub fn eval_all(
    f: &Formula,
    env: &EvalEnv<'_>,
    out_vars: &[String],
) -> Result<Relation, FormulaError> {
    let (c, on, nn) = compile_in_env(f, env, out_vars)?;
    with_ctx(env, &on, &nn, |ctx| c.eval_all(ctx, env.param))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{and, aux, eq, exists, lt, not, or, parse_formula, sym};
    use crate::word::Alphabet;

    fn env<'a>(ws: &'a WordStructure, rels: &[(&str, &'a Relation)]) -> EvalEnv<'a> {
        EvalEnv {
            ws,
            old: rels.iter().map(|(n, r)| (n.to_string(), *r)).collect(),
            new: HashMap::new(),
            param: Some(1),
        }
    }

    // Reference evaluator: plain recursion over all assignments.
    fn naive(
        f: &Formula,
        ws: &WordStructure,
        rels: &HashMap<String, &Relation>,
        asg: &mut HashMap<String, Node>,
        u: Node,
    ) -> bool {
        let tv = |x: &Term, asg: &HashMap<String, Node>| match x {
            Term::Var(v) => asg[v],
            Term::Dollar => ws.dollar(),
            Term::One => 1,
            Term::Param => u,
        };
        match f {
            Formula::True => true,
            Formula::False => false,
            Formula::Sym(c, x) => ws.label(tv(x, asg)) == Some(*c),
            Formula::Lt(x, y) => tv(x, asg) < tv(y, asg),
            Formula::Leq(x, y) => tv(x, asg) <= tv(y, asg),
            Formula::Eq(x, y) => tv(x, asg) == tv(y, asg),
            Formula::Aux(r, ts) | Formula::AuxP(r, ts) => {
                let t: Vec<Node> = ts.iter().map(|x| tv(x, asg)).collect();
                rels[r].contains(&t)
            }
            Formula::And(ps) => ps.iter().all(|p| naive(p, ws, rels, asg, u)),
            Formula::Or(ps) => ps.iter().any(|p| naive(p, ws, rels, asg, u)),
            Formula::Not(g) => !naive(g, ws, rels, asg, u),
            Formula::Exists(v, g) => {
                let prev = asg.get(v).copied();
                let mut found = false;
                for x in 1..=ws.dollar() {
                    asg.insert(v.clone(), x);
                    if naive(g, ws, rels, asg, u) {
                        found = true;
                        break;
                    }
                }
                match prev {
                    Some(p) => asg.insert(v.clone(), p),
                    None => asg.remove(v),
                };
                found
            }
        }
    }

    #[test]
    fn constants_and_nullary() {
        let ws = WordStructure::from_layout("_ab_b__", Alphabet::parse("ab").unwrap()).unwrap();
        let e = env(&ws, &[]);
        assert!(evaluate(&eq("$", "$"), &e, &HashMap::new()).unwrap());
        assert!(evaluate(
            &sym('b', Term::Var("x".into())),
            &e,
            &[("x".to_string(), 3)].into()
        )
        .unwrap());
        assert_eq!(eval_all(&Formula::True, &e, &[]).unwrap(), Relation::unit());
        assert_eq!(
            eval_all(&Formula::False, &e, &[]).unwrap(),
            Relation::empty(0)
        );
    }

    #[test]
    fn errors() {
        let ws = WordStructure::new(3, Alphabet::parse("a").unwrap()).unwrap();
        let e = env(&ws, &[]);
        assert!(matches!(
            eval_all(&sym('a', "x"), &e, &[]),
            Err(FormulaError::UnboundVariable(_))
        ));
        assert!(matches!(
            eval_all(&aux("R", &["x"]), &e, &["x".into()]),
            Err(FormulaError::UnknownRelation(_))
        ));
        let r = Relation::empty(2);
        let e = env(&ws, &[("R", &r)]);
        assert!(matches!(
            eval_all(&aux("R", &["x"]), &e, &["x".into()]),
            Err(FormulaError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn matches_naive_enumeration() {
        let ws = WordStructure::from_layout("ab_ba_", Alphabet::parse("ab").unwrap()).unwrap();
        let r = Relation::from_tuples(
            2,
            vec![vec![1, 2], vec![2, 4], vec![4, 5], vec![5, 7], vec![3, 3]],
        );
        let s = Relation::from_tuples(1, vec![vec![2], vec![7]]);
        let rels: HashMap<String, &Relation> =
            [("R".to_string(), &r), ("S".to_string(), &s)].into();
        let e = EvalEnv {
            ws: &ws,
            old: rels.clone(),
            new: HashMap::new(),
            param: Some(4),
        };
        let formulas = [
            "(exists z (and (aux R x z) (aux R z y)))",
            "(or (and (aux R x y) (lt u y)) (and (eq x y) (sym a x)))",
            "(and (not (aux R x y)) (leq x y) (sym b y))",
            "(exists z (or (aux S z) (and (aux R z x) (not (eq z y)))))",
            "(and (lt x y) (not (exists z (and (lt x z) (lt z y)))))",
            "(or (aux S x) (aux S y))",
            "(and (aux R x x) (eq y $))",
        ];
        for src in formulas {
            let f = parse_formula(src).unwrap();
            let got = eval_all(&f, &e, &["x".into(), "y".into()]).unwrap();
            let mut want = Vec::new();
            for x in 1..=ws.dollar() {
                for y in 1..=ws.dollar() {
                    let mut asg: HashMap<String, Node> =
                        [("x".to_string(), x), ("y".to_string(), y)].into();
                    if naive(&f, &ws, &rels, &mut asg, 4) {
                        want.push(vec![x, y]);
                    }
                }
            }
            assert_eq!(got, Relation::from_tuples(2, want), "{src}");
        }
        // builders agree with the parser
        let f = and(vec![
            lt("x", "y"),
            or(vec![sym('a', "x"), not(sym('b', "y"))]),
        ]);
        let g = exists(&["w"], and(vec![f.clone(), aux("S", &["w"])]));
        assert_eq!(
            eval_all(&g, &e, &["x".into(), "y".into()]).unwrap(),
            eval_all(&f, &e, &["x".into(), "y".into()]).unwrap()
        );
    }
}
