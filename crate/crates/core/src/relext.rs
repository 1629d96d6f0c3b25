//! Maintained string relations over pairs of intervals: equal length, full
//! equality, reversal, symbol counts, permutation, scattered subword and
//! strictly shorter, plus the power-of-two length language.
//!
//! A 4-ary tuple `(a,b,c,d)` stands for the pair of factors `w[a,b]` and
//! `w[c,d]`; all four endpoints are labeled, `a ≤ b` and `c ≤ d`. Intervals
//! may overlap and come in any order.
//!
//! Update rules split the intervals at the updated node `u` into pieces that
//! do not contain `u`, whose old relation values are still valid, and glue
//! them back together.

use std::cell::Cell;

use crate::base::{self, all_labeled, labeled, NEXT};
use crate::engine::{AbstractUpdate, DynamicProgram, EngineError, RelationSpec};
use crate::formula::*;
use crate::word::Alphabet;

pub const LEN: &str = "R_len";
pub const FEQ: &str = "R_feq";
pub const REV: &str = "R_rev";
pub const PERM: &str = "R_perm";
pub const SCATT: &str = "R_scatt";
pub const LT: &str = "R_lt";
pub const POW2: &str = "P2";
pub const L2: &str = "L2";

pub fn num_name(z: char) -> String {
    format!("R_num_{z}")
}

pub fn avoid_name(z: char) -> String {
    format!("Z_{z}")
}

const V4: [&str; 4] = ["a", "b", "c", "d"];

#[derive(Clone, Debug)]
enum Bound {
    In(String),
    Ex(String),
}

/// A set of consecutive symbol elements given by two bounds.
#[derive(Clone, Debug)]
struct Piece {
    lo: Bound,
    hi: Bound,
}

fn inc(x: &str) -> Bound {
    Bound::In(x.to_string())
}

fn exc(x: &str) -> Bound {
    Bound::Ex(x.to_string())
}

fn pc(lo: Bound, hi: Bound) -> Piece {
    Piece { lo, hi }
}

/// Value of a pair relation when one or both sides are empty.
#[derive(Clone, Debug)]
enum Side {
    Holds,
    Fails,
    /// The nonempty side must avoid a symbol (relation name of its `Z_` table).
    Avoids(String),
}

#[derive(Clone, Debug)]
struct PairRel {
    name: String,
    left_empty: Side,
    right_empty: Side,
}

struct Gen<'a> {
    alphabet: &'a Alphabet,
    fresh: Cell<usize>,
}

impl<'a> Gen<'a> {
    fn new(alphabet: &'a Alphabet) -> Self {
        Gen {
            alphabet,
            fresh: Cell::new(0),
        }
    }

    fn var(&self) -> String {
        let k = self.fresh.get() + 1;
        self.fresh.set(k);
        format!("_{k}")
    }

    fn lab(&self, x: &str) -> Formula {
        labeled(self.alphabet, x)
    }

    fn ex(&self, vars: &[String], f: Formula) -> Formula {
        exists_owned(vars, f)
    }

    fn empty(&self, p: &Piece) -> Formula {
        match (&p.lo, &p.hi) {
            (Bound::In(a), Bound::In(b)) => lt(b.as_str(), a.as_str()),
            (Bound::In(a), Bound::Ex(b)) | (Bound::Ex(a), Bound::In(b)) => {
                leq(b.as_str(), a.as_str())
            }
            (Bound::Ex(a), Bound::Ex(b)) => or(vec![
                leq(b.as_str(), a.as_str()),
                auxp(NEXT, &[a.as_str(), b.as_str()]),
            ]),
        }
    }

    /// `f` is the first element of a nonempty piece.
    fn first_of(&self, p: &Piece, f: &str) -> Formula {
        let lo = match &p.lo {
            Bound::In(a) => eq(f, a.as_str()),
            Bound::Ex(a) => auxp(NEXT, &[a.as_str(), f]),
        };
        let hi = match &p.hi {
            Bound::In(b) => leq(f, b.as_str()),
            Bound::Ex(b) => lt(f, b.as_str()),
        };
        and(vec![lo, hi])
    }

    /// `f`/`l` are the first/last element of a nonempty piece.
    fn ends_of(&self, p: &Piece, f: &str, l: &str) -> Formula {
        let lo = match &p.lo {
            Bound::In(a) => eq(f, a.as_str()),
            Bound::Ex(a) => auxp(NEXT, &[a.as_str(), f]),
        };
        let hi = match &p.hi {
            Bound::In(b) => eq(l, b.as_str()),
            Bound::Ex(b) => auxp(NEXT, &[l, b.as_str()]),
        };
        and(vec![lo, hi, leq(f, l)])
    }

    fn member(&self, s: &str, p: &Piece) -> Formula {
        let lo = match &p.lo {
            Bound::In(a) => leq(a.as_str(), s),
            Bound::Ex(a) => lt(a.as_str(), s),
        };
        let hi = match &p.hi {
            Bound::In(b) => leq(s, b.as_str()),
            Bound::Ex(b) => lt(s, b.as_str()),
        };
        and(vec![lo, hi, self.lab(s)])
    }

    /// Old value of a unary interval predicate on a possibly empty piece;
    /// empty pieces satisfy it.
    fn unary(&self, p: &Piece, rel: &str) -> Formula {
        let (f, l) = (self.var(), self.var());
        or(vec![
            self.empty(p),
            self.ex(
                &[f.clone(), l.clone()],
                and(vec![
                    self.ends_of(p, &f, &l),
                    aux(rel, &[f.as_str(), l.as_str()]),
                ]),
            ),
        ])
    }

    fn side(&self, s: &Side, p: &Piece) -> Formula {
        match s {
            Side::Holds => Formula::True,
            Side::Fails => Formula::False,
            Side::Avoids(z) => self.unary(p, z),
        }
    }

    /// Old value of `r` on two possibly empty pieces.
    fn pair(&self, r: &PairRel, p: &Piece, q: &Piece) -> Formula {
        let v: Vec<String> = (0..4).map(|_| self.var()).collect();
        or(vec![
            and(vec![self.empty(p), self.empty(q)]),
            and(vec![self.empty(p), self.side(&r.left_empty, q)]),
            and(vec![self.empty(q), self.side(&r.right_empty, p)]),
            self.ex(
                &v,
                and(vec![
                    self.ends_of(p, &v[0], &v[1]),
                    self.ends_of(q, &v[2], &v[3]),
                    aux(
                        &r.name,
                        &[v[0].as_str(), v[1].as_str(), v[2].as_str(), v[3].as_str()],
                    ),
                ]),
            ),
        ])
    }

    /// Split `p` into a prefix and the remaining suffix, either possibly
    /// empty: `body(prefix, suffix)` where `None` is the empty prefix.
    fn split(&self, p: &Piece, body: impl Fn(Option<&Piece>, &Piece) -> Formula) -> Formula {
        let s = self.var();
        let pre = pc(p.lo.clone(), inc(&s));
        let suf = pc(exc(&s), p.hi.clone());
        or(vec![
            body(None, p),
            self.ex(
                &[s.clone()],
                and(vec![self.member(&s, p), body(Some(&pre), &suf)]),
            ),
        ])
    }

    /// `p ⊑ q1 · q2` for the scattered-subword relation.
    fn sub_concat(&self, r: &PairRel, p: &Piece, q1: &Piece, q2: &Piece) -> Formula {
        self.split(p, |p1, p2| {
            let left = match p1 {
                None => Formula::True,
                Some(p1) => self.pair(r, p1, q1),
            };
            and(vec![left, self.pair(r, p2, q2)])
        })
    }

    /// `p ⊑ q1 · z · q2` where `z` is the symbol at the updated node.
    fn sub_concat_sym(&self, r: &PairRel, p: &Piece, q1: &Piece, z: char, q2: &Piece) -> Formula {
        self.split(p, |p1, p2| {
            let left = match p1 {
                None => Formula::True,
                Some(p1) => self.pair(r, p1, q1),
            };
            let f = self.var();
            let via_z = self.ex(
                &[f.clone()],
                and(vec![
                    self.first_of(p2, &f),
                    sym(z, f.as_str()),
                    self.pair(r, &pc(exc(&f), p2.hi.clone()), q2),
                ]),
            );
            and(vec![left, or(vec![self.pair(r, p2, q2), via_z])])
        })
    }
}

fn guard4(alphabet: &Alphabet) -> Formula {
    and(vec![
        all_labeled(alphabet, &V4),
        leq("a", "b"),
        leq("c", "d"),
    ])
}

fn inside(x: &str, y: &str) -> Formula {
    and(vec![leq(x, "u"), leq("u", y)])
}

fn inside_strict(x: &str, y: &str) -> Formula {
    and(vec![lt(x, "u"), lt("u", y)])
}

fn outside(x: &str, y: &str) -> Formula {
    or(vec![lt("u", x), lt(y, "u")])
}

fn x_piece(a: &str, b: &str) -> Piece {
    pc(inc(a), inc(b))
}

/// Which alignment a length-preserving relation uses.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Align {
    /// Equal content.
    Same,
    /// Equal length.
    Len,
    /// Second is the reversal of the first.
    Rev,
}

impl Align {
    fn name(self) -> &'static str {
        match self {
            Align::Same => FEQ,
            Align::Len => LEN,
            Align::Rev => REV,
        }
    }

    fn rel(self) -> PairRel {
        PairRel {
            name: self.name().to_string(),
            left_empty: Side::Fails,
            right_empty: Side::Fails,
        }
    }

    /// `v` can stand opposite the inserted symbol `z`.
    fn matches(self, g: &Gen, z: char, v: &str) -> Formula {
        match self {
            Align::Len => g.lab(v),
            _ => sym(z, v),
        }
    }
}

// u inside [a,b] only, insertion of z.
fn align_ins_one(g: &Gen, al: Align, z: char, a: &str, b: &str, c: &str, d: &str) -> Formula {
    let r = al.rel();
    let v = g.var();
    let before = pc(inc(a), exc("u"));
    let after = pc(exc("u"), inc(b));
    let y_pre = pc(inc(c), exc(&v));
    let y_post = pc(exc(&v), inc(d));
    let body = match al {
        Align::Rev => and(vec![
            g.pair(&r, &after, &y_pre),
            g.pair(&r, &before, &y_post),
        ]),
        _ => and(vec![
            g.pair(&r, &before, &y_pre),
            g.pair(&r, &after, &y_post),
        ]),
    };
    g.ex(
        &[v.clone()],
        and(vec![
            g.member(&v, &x_piece(c, d)),
            al.matches(g, z, &v),
            body,
        ]),
    )
}

// u inside both intervals and a > c, insertion of z; Same / Len only.
fn align_ins_both_shifted(
    g: &Gen,
    al: Align,
    z: char,
    a: &str,
    b: &str,
    c: &str,
    d: &str,
) -> Formula {
    let r = al.rel();
    let (v1, v2) = (g.var(), g.var());
    g.ex(
        &[v1.clone(), v2.clone()],
        and(vec![
            lt(c, a),
            g.member(&v1, &pc(inc(c), exc("u"))),
            g.member(&v2, &pc(exc("u"), inc(b))),
            al.matches(g, z, &v1),
            al.matches(g, z, &v2),
            g.pair(&r, &pc(inc(a), exc("u")), &pc(inc(c), exc(&v1))),
            g.pair(&r, &pc(exc("u"), exc(&v2)), &pc(exc(&v1), exc("u"))),
            g.pair(&r, &pc(exc(&v2), inc(b)), &pc(exc("u"), inc(d))),
        ]),
    )
}

fn rev_ins_both(g: &Gen, z: char) -> Formula {
    let r = Align::Rev.rel();
    let self_aligned = and(vec![
        g.pair(&r, &pc(inc("a"), exc("u")), &pc(exc("u"), inc("d"))),
        g.pair(&r, &pc(exc("u"), inc("b")), &pc(inc("c"), exc("u"))),
    ]);
    let (v, w) = (g.var(), g.var());
    let later = g.ex(
        &[v.clone(), w.clone()],
        and(vec![
            g.member(&v, &pc(exc("u"), inc("d"))),
            g.member(&w, &pc(exc("u"), inc("b"))),
            sym(z, v.as_str()),
            sym(z, w.as_str()),
            g.pair(&r, &pc(inc("a"), exc("u")), &pc(exc(&v), inc("d"))),
            g.pair(&r, &pc(exc("u"), exc(&w)), &pc(exc("u"), exc(&v))),
            g.pair(&r, &pc(exc(&w), inc("b")), &pc(inc("c"), exc("u"))),
        ]),
    );
    let (v, w) = (g.var(), g.var());
    let earlier = g.ex(
        &[v.clone(), w.clone()],
        and(vec![
            g.member(&v, &pc(inc("c"), exc("u"))),
            g.member(&w, &pc(inc("a"), exc("u"))),
            sym(z, v.as_str()),
            sym(z, w.as_str()),
            g.pair(&r, &pc(inc("a"), exc(&w)), &pc(exc("u"), inc("d"))),
            g.pair(&r, &pc(exc(&w), exc("u")), &pc(exc(&v), exc("u"))),
            g.pair(&r, &pc(exc("u"), inc("b")), &pc(inc("c"), exc(&v))),
        ]),
    );
    or(vec![self_aligned, later, earlier])
}

fn identity() -> Formula {
    and(vec![eq("a", "c"), eq("b", "d")])
}

fn align_ins(alphabet: &Alphabet, al: Align, z: char) -> Formula {
    let g = Gen::new(alphabet);
    let both = match al {
        Align::Rev => rev_ins_both(&g, z),
        _ => or(vec![
            align_ins_both_shifted(&g, al, z, "a", "b", "c", "d"),
            align_ins_both_shifted(&g, al, z, "c", "d", "a", "b"),
        ]),
    };
    let mut parts = vec![
        and(vec![
            aux(al.name(), &V4),
            outside("a", "b"),
            outside("c", "d"),
        ]),
        and(vec![
            inside("a", "b"),
            outside("c", "d"),
            align_ins_one(&g, al, z, "a", "b", "c", "d"),
        ]),
        and(vec![
            inside("c", "d"),
            outside("a", "b"),
            align_ins_one(&g, al, z, "c", "d", "a", "b"),
        ]),
        and(vec![inside("a", "b"), inside("c", "d"), both]),
    ];
    if al != Align::Rev {
        parts.push(identity());
    }
    and(vec![or(parts), guard4(alphabet)])
}

/// Neighbours `p ⇝ u ⇝ q` in the word before a reset.
fn around_u(p: &str, q: &str) -> Formula {
    and(vec![aux(NEXT, &[p, "u"]), aux(NEXT, &["u", q])])
}

// u strictly inside [a,b] only, reset; [a,p] and [q,b] are the halves.
fn align_reset_one(g: &Gen, al: Align, a: &str, b: &str, c: &str, d: &str) -> Formula {
    let r = al.rel();
    let (p, q, s) = (g.var(), g.var(), g.var());
    let y1 = pc(inc(c), inc(&s));
    let y2 = pc(exc(&s), inc(d));
    let body = match al {
        Align::Rev => and(vec![
            g.pair(&r, &x_piece(&q, b), &y1),
            g.pair(&r, &x_piece(a, &p), &y2),
        ]),
        _ => and(vec![
            g.pair(&r, &x_piece(a, &p), &y1),
            g.pair(&r, &x_piece(&q, b), &y2),
        ]),
    };
    g.ex(
        &[p.clone(), q.clone(), s.clone()],
        and(vec![around_u(&p, &q), g.member(&s, &x_piece(c, d)), body]),
    )
}

fn align_reset_both_shifted(g: &Gen, al: Align, a: &str, b: &str, c: &str, d: &str) -> Formula {
    let r = al.rel();
    let (p, q, s, t) = (g.var(), g.var(), g.var(), g.var());
    g.ex(
        &[p.clone(), q.clone(), s.clone(), t.clone()],
        and(vec![
            lt(c, a),
            around_u(&p, &q),
            g.member(&s, &x_piece(c, &p)),
            g.member(&t, &x_piece(&q, b)),
            g.pair(&r, &x_piece(a, &p), &x_piece(c, &s)),
            g.pair(&r, &x_piece(&q, &t), &pc(exc(&s), inc(&p))),
            g.pair(&r, &pc(exc(&t), inc(b)), &x_piece(&q, d)),
        ]),
    )
}

fn rev_reset_both(g: &Gen) -> Formula {
    let r = Align::Rev.rel();
    let (p, q) = (g.var(), g.var());
    let self_aligned = and(vec![
        g.pair(&r, &x_piece(&q, "b"), &x_piece("c", &p)),
        g.pair(&r, &x_piece("a", &p), &x_piece(&q, "d")),
    ]);
    let (s, t) = (g.var(), g.var());
    let short_tail = g.ex(
        &[s.clone(), t.clone()],
        and(vec![
            g.member(&s, &x_piece("c", &p)),
            g.member(&t, &x_piece("a", &p)),
            g.pair(&r, &x_piece(&q, "b"), &x_piece("c", &s)),
            g.pair(&r, &x_piece("a", &t), &x_piece(&q, "d")),
            g.pair(&r, &pc(exc(&t), inc(&p)), &pc(exc(&s), inc(&p))),
        ]),
    );
    let (s, t) = (g.var(), g.var());
    let long_tail = g.ex(
        &[s.clone(), t.clone()],
        and(vec![
            g.member(&t, &x_piece(&q, "b")),
            g.member(&s, &x_piece(&q, "d")),
            g.pair(&r, &pc(exc(&t), inc("b")), &x_piece("c", &p)),
            g.pair(&r, &x_piece(&q, &t), &x_piece(&q, &s)),
            g.pair(&r, &x_piece("a", &p), &pc(exc(&s), inc("d"))),
        ]),
    );
    g.ex(
        &[p.clone(), q.clone()],
        and(vec![
            around_u(&p, &q),
            or(vec![self_aligned, short_tail, long_tail]),
        ]),
    )
}

fn align_reset(alphabet: &Alphabet, al: Align) -> Formula {
    let g = Gen::new(alphabet);
    let both = match al {
        Align::Rev => rev_reset_both(&g),
        _ => or(vec![
            align_reset_both_shifted(&g, al, "a", "b", "c", "d"),
            align_reset_both_shifted(&g, al, "c", "d", "a", "b"),
        ]),
    };
    let mut parts = vec![
        and(vec![
            aux(al.name(), &V4),
            outside("a", "b"),
            outside("c", "d"),
        ]),
        and(vec![
            inside_strict("a", "b"),
            outside("c", "d"),
            align_reset_one(&g, al, "a", "b", "c", "d"),
        ]),
        and(vec![
            inside_strict("c", "d"),
            outside("a", "b"),
            align_reset_one(&g, al, "c", "d", "a", "b"),
        ]),
        and(vec![inside_strict("a", "b"), inside_strict("c", "d"), both]),
    ];
    if al != Align::Rev {
        parts.push(identity());
    }
    and(vec![or(parts), guard4(alphabet)])
}

fn align_spec(alphabet: &Alphabet, al: Align) -> RelationSpec {
    let a = alphabet.clone();
    RelationSpec::new(al.name(), &V4, Formula::False)
        .ins_all(alphabet, |z| align_ins(&a, al, z))
        .rule(AbstractUpdate::Reset, align_reset(alphabet, al))
}

/// `R_len`: equal length.
pub fn len_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    vec![align_spec(alphabet, Align::Len)]
}

/// `R_feq`: equal content, with no constraint on how the intervals lie.
pub fn feq_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    vec![align_spec(alphabet, Align::Same)]
}

/// `R_rev`: the second factor is the reversal of the first.
pub fn rev_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    vec![align_spec(alphabet, Align::Rev)]
}

// ---- symbol counts ----

/// `Z_z(x,y)`: labeled `x ≤ y` and no `z` in `w[x,y]`.
fn avoid_spec(alphabet: &Alphabet, z: char) -> RelationSpec {
    let name = avoid_name(z);
    let guard = and(vec![all_labeled(alphabet, &["x", "y"]), leq("x", "y")]);
    let a = alphabet.clone();
    let nm = name.clone();
    let g0 = guard.clone();
    let ins = move |zeta: char| {
        let g = Gen::new(&a);
        let mut parts = vec![and(vec![aux(&nm, &["x", "y"]), outside("x", "y")])];
        if zeta != z {
            parts.push(and(vec![
                inside("x", "y"),
                g.unary(&pc(inc("x"), exc("u")), &nm),
                g.unary(&pc(exc("u"), inc("y")), &nm),
            ]));
        }
        and(vec![or(parts), g0.clone()])
    };
    let reset = and(vec![
        or(vec![
            and(vec![aux(&name, &["x", "y"]), outside("x", "y")]),
            exists(
                &["p", "q"],
                and(vec![
                    inside_strict("x", "y"),
                    around_u("p", "q"),
                    aux(&name, &["x", "p"]),
                    aux(&name, &["q", "y"]),
                ]),
            ),
        ]),
        guard,
    ]);
    RelationSpec::new(&name, &["x", "y"], Formula::False)
        .ins_all(alphabet, ins)
        .rule(AbstractUpdate::Reset, reset)
}

fn num_rel(z: char) -> PairRel {
    PairRel {
        name: num_name(z),
        left_empty: Side::Avoids(avoid_name(z)),
        right_empty: Side::Avoids(avoid_name(z)),
    }
}

// Both intervals contain u and a ≥ c: only the parts outside the overlap count.
fn num_both(g: &Gen, z: char, a: &str, b: &str, c: &str, d: &str) -> Formula {
    let zn = avoid_name(z);
    and(vec![
        leq(c, a),
        or(vec![
            and(vec![
                leq(b, d),
                g.unary(&pc(inc(c), exc(a)), &zn),
                g.unary(&pc(exc(b), inc(d)), &zn),
            ]),
            and(vec![
                lt(d, b),
                g.pair(&num_rel(z), &pc(exc(d), inc(b)), &pc(inc(c), exc(a))),
            ]),
        ]),
    ])
}

/// The factor of `[c,d]` split at some point matches `left`/`right`.
fn split_y(g: &Gen, r: &PairRel, left: &Piece, right: &Piece, c: &str, d: &str) -> Formula {
    g.split(&x_piece(c, d), |y1, y2| {
        let l = match y1 {
            None => g.pair(r, left, &pc(inc(c), exc(c))),
            Some(y1) => g.pair(r, left, y1),
        };
        and(vec![l, g.pair(r, right, y2)])
    })
}

fn num_ins_one(g: &Gen, z: char, zeta: char, a: &str, b: &str, c: &str, d: &str) -> Formula {
    let r = num_rel(z);
    let before = pc(inc(a), exc("u"));
    let after = pc(exc("u"), inc(b));
    if zeta == z {
        let v = g.var();
        g.ex(
            &[v.clone()],
            and(vec![
                g.member(&v, &x_piece(c, d)),
                sym(z, v.as_str()),
                g.pair(&r, &before, &pc(inc(c), exc(&v))),
                g.pair(&r, &after, &pc(exc(&v), inc(d))),
            ]),
        )
    } else {
        split_y(g, &r, &before, &after, c, d)
    }
}

fn num_reset_one(g: &Gen, z: char, a: &str, b: &str, c: &str, d: &str) -> Formula {
    let r = num_rel(z);
    let (p, q) = (g.var(), g.var());
    g.ex(
        &[p.clone(), q.clone()],
        and(vec![
            around_u(&p, &q),
            split_y(g, &r, &x_piece(a, &p), &x_piece(&q, b), c, d),
        ]),
    )
}

fn num_spec(alphabet: &Alphabet, z: char) -> RelationSpec {
    let name = num_name(z);
    let a = alphabet.clone();
    let nm = name.clone();
    let ins = move |zeta: char| {
        let g = Gen::new(&a);
        let parts = vec![
            and(vec![aux(&nm, &V4), outside("a", "b"), outside("c", "d")]),
            and(vec![
                inside("a", "b"),
                outside("c", "d"),
                num_ins_one(&g, z, zeta, "a", "b", "c", "d"),
            ]),
            and(vec![
                inside("c", "d"),
                outside("a", "b"),
                num_ins_one(&g, z, zeta, "c", "d", "a", "b"),
            ]),
            and(vec![
                inside("a", "b"),
                inside("c", "d"),
                or(vec![
                    num_both(&g, z, "a", "b", "c", "d"),
                    num_both(&g, z, "c", "d", "a", "b"),
                ]),
            ]),
        ];
        and(vec![or(parts), guard4(&a)])
    };
    let g = Gen::new(alphabet);
    let reset = and(vec![
        or(vec![
            and(vec![aux(&name, &V4), outside("a", "b"), outside("c", "d")]),
            and(vec![
                inside_strict("a", "b"),
                outside("c", "d"),
                num_reset_one(&g, z, "a", "b", "c", "d"),
            ]),
            and(vec![
                inside_strict("c", "d"),
                outside("a", "b"),
                num_reset_one(&g, z, "c", "d", "a", "b"),
            ]),
            and(vec![
                inside_strict("a", "b"),
                inside_strict("c", "d"),
                or(vec![
                    num_both(&g, z, "a", "b", "c", "d"),
                    num_both(&g, z, "c", "d", "a", "b"),
                ]),
            ]),
        ]),
        guard4(alphabet),
    ]);
    RelationSpec::new(&name, &V4, Formula::False)
        .ins_all(alphabet, ins)
        .rule(AbstractUpdate::Reset, reset)
}

/// `R_num_z` for one symbol, with its helper `Z_z`.
pub fn num_rules(alphabet: &Alphabet, z: char) -> Vec<RelationSpec> {
    vec![avoid_spec(alphabet, z), num_spec(alphabet, z)]
}

/// `R_perm` as the conjunction of the per-symbol count relations.
pub fn perm_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    let mut v = Vec::new();
    for &z in alphabet.symbols() {
        v.extend(num_rules(alphabet, z));
    }
    let body = and(alphabet
        .symbols()
        .iter()
        .map(|&z| auxp(&num_name(z), &V4))
        .collect());
    v.push(RelationSpec::new(PERM, &V4, Formula::False).every(alphabet, body));
    v
}

// ---- scattered subword ----

fn scatt_rel() -> PairRel {
    PairRel {
        name: SCATT.to_string(),
        left_empty: Side::Holds,
        right_empty: Side::Fails,
    }
}

fn scatt_ins(alphabet: &Alphabet, z: char) -> Formula {
    let g = Gen::new(alphabet);
    let r = scatt_rel();
    let xa = pc(inc("a"), exc("u"));
    let xb = pc(exc("u"), inc("b"));
    let yc = pc(inc("c"), exc("u"));
    let yd = pc(exc("u"), inc("d"));
    let v = g.var();
    let x_only = g.ex(
        &[v.clone()],
        and(vec![
            g.member(&v, &x_piece("c", "d")),
            sym(z, v.as_str()),
            g.pair(&r, &xa, &pc(inc("c"), exc(&v))),
            g.pair(&r, &xb, &pc(exc(&v), inc("d"))),
        ]),
    );
    let y_only = g.sub_concat_sym(&r, &x_piece("a", "b"), &yc, z, &yd);
    let at_u = and(vec![g.pair(&r, &xa, &yc), g.pair(&r, &xb, &yd)]);
    let v = g.var();
    let earlier = g.ex(
        &[v.clone()],
        and(vec![
            g.member(&v, &yc),
            sym(z, v.as_str()),
            g.pair(&r, &xa, &pc(inc("c"), exc(&v))),
            g.sub_concat_sym(&r, &xb, &pc(exc(&v), exc("u")), z, &yd),
        ]),
    );
    let v = g.var();
    let later = g.ex(
        &[v.clone()],
        and(vec![
            g.member(&v, &yd),
            sym(z, v.as_str()),
            g.sub_concat_sym(&r, &xa, &yc, z, &pc(exc("u"), exc(&v))),
            g.pair(&r, &xb, &pc(exc(&v), inc("d"))),
        ]),
    );
    and(vec![
        or(vec![
            and(vec![aux(SCATT, &V4), outside("a", "b"), outside("c", "d")]),
            and(vec![inside("a", "b"), outside("c", "d"), x_only]),
            and(vec![inside("c", "d"), outside("a", "b"), y_only]),
            and(vec![
                inside("a", "b"),
                inside("c", "d"),
                or(vec![at_u, earlier, later]),
            ]),
        ]),
        guard4(alphabet),
    ])
}

fn scatt_reset(alphabet: &Alphabet) -> Formula {
    let g = Gen::new(alphabet);
    let r = scatt_rel();
    let (p, q) = (g.var(), g.var());
    let x1 = x_piece("a", &p);
    let x2 = x_piece(&q, "b");
    let y1 = x_piece("c", &p);
    let y2 = x_piece(&q, "d");
    let x_only = split_y(&g, &r, &x1, &x2, "c", "d");
    let y_only = g.sub_concat(&r, &x_piece("a", "b"), &y1, &y2);
    let s = g.var();
    let cut_in_y1 = g.ex(
        &[s.clone()],
        and(vec![
            g.member(&s, &y1),
            g.pair(&r, &x1, &x_piece("c", &s)),
            g.sub_concat(&r, &x2, &pc(exc(&s), inc(&p)), &y2),
        ]),
    );
    let s = g.var();
    let cut_in_y2 = g.ex(
        &[s.clone()],
        and(vec![
            g.member(&s, &y2),
            g.sub_concat(&r, &x1, &y1, &x_piece(&q, &s)),
            g.pair(&r, &x2, &pc(exc(&s), inc("d"))),
        ]),
    );
    and(vec![
        or(vec![
            and(vec![aux(SCATT, &V4), outside("a", "b"), outside("c", "d")]),
            g.ex(
                &[p.clone(), q.clone()],
                and(vec![
                    around_u(&p, &q),
                    or(vec![
                        and(vec![inside_strict("a", "b"), outside("c", "d"), x_only]),
                        and(vec![inside_strict("c", "d"), outside("a", "b"), y_only]),
                        and(vec![
                            inside_strict("a", "b"),
                            inside_strict("c", "d"),
                            or(vec![cut_in_y1, cut_in_y2]),
                        ]),
                    ]),
                ]),
            ),
        ]),
        guard4(alphabet),
    ])
}

/// `R_scatt`: the first factor is a scattered subword of the second.
pub fn scatt_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    let a = alphabet.clone();
    vec![RelationSpec::new(SCATT, &V4, Formula::False)
        .ins_all(alphabet, |z| scatt_ins(&a, z))
        .rule(AbstractUpdate::Reset, scatt_reset(alphabet))]
}

// ---- derived from R_len ----

/// `R_lt`: the first factor is strictly shorter. Requires `R_len`.
pub fn lt_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    let body = and(vec![
        guard4(alphabet),
        exists(
            &["x1", "x2"],
            and(vec![
                auxp(LEN, &["a", "b", "x1", "x2"]),
                or(vec![
                    and(vec![lt("c", "x1"), leq("x2", "d")]),
                    and(vec![leq("c", "x1"), lt("x2", "d")]),
                ]),
            ]),
        ),
    ]);
    vec![RelationSpec::new(LT, &V4, Formula::False).every(alphabet, body)]
}

/// `P2(x,y)`: `|w[x,y]|` is a power of two; `L2`: so is `|w|`. Require `R_len`.
pub fn pow2_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    let free = |x: &str, y: &str| and(vec![aux(POW2, &[x, y]), outside(x, y)]);
    let p_body = and(vec![
        all_labeled(alphabet, &["x", "y"]),
        or(vec![
            eq("x", "y"),
            free("x", "y"),
            exists(
                &["z1", "z2"],
                and(vec![
                    auxp(NEXT, &["z1", "z2"]),
                    leq("x", "z1"),
                    leq("z2", "y"),
                    auxp(LEN, &["x", "z1", "z2", "y"]),
                    or(vec![free("x", "z1"), free("z2", "y")]),
                ]),
            ),
        ]),
    ]);
    let l_body = exists(
        &["x", "y"],
        and(vec![
            auxp(base::FIRST, &["x"]),
            auxp(base::LAST, &["y"]),
            auxp(POW2, &["x", "y"]),
        ]),
    );
    vec![
        RelationSpec::new(POW2, &["x", "y"], Formula::False).every(alphabet, p_body),
        RelationSpec::new(L2, &[], Formula::False).every(alphabet, l_body),
    ]
}

/// Base relations plus the given extension specs, as one program.
pub fn with_base(
    alphabet: &Alphabet,
    specs: Vec<RelationSpec>,
    designated: Option<&str>,
) -> Result<DynamicProgram, EngineError> {
    let mut all = base::base_specs(alphabet);
    all.extend(specs);
    DynamicProgram::new(alphabet.clone(), all, designated)
}
