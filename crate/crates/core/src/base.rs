//! Update rules for the base relations `R_first`, `R_last`, `R_Next` and `R_eq`.
//!
//! `R_first`/`R_last` hold the first/last symbol element; on the empty word
//! they hold `$` and `1` respectively. `R_Next(x,y)` holds when `y` is the
//! symbol element right after `x`. `R_eq(xo,xc,yo,yc)` holds when both
//! intervals have labeled endpoints, `xc < yo` and `w[xo,xc] = w[yo,yc]`.

use crate::engine::{AbstractUpdate, DynamicProgram, EngineError, RelationSpec};
use crate::formula::*;
use crate::word::Alphabet;

pub const FIRST: &str = "R_first";
pub const LAST: &str = "R_last";
pub const NEXT: &str = "R_Next";
pub const EQ: &str = "R_eq";

/// `x` carries some symbol (in the post-update word).
pub fn labeled(alphabet: &Alphabet, x: &str) -> Formula {
    or(alphabet.symbols().iter().map(|&c| sym(c, x)).collect())
}

/// All listed terms carry a symbol.
pub fn all_labeled(alphabet: &Alphabet, xs: &[&str]) -> Formula {
    and(xs.iter().map(|x| labeled(alphabet, x)).collect())
}

// The R_first/R_last disjuncts also require the partner to be labeled, since
// on the empty word those relations hold the placeholders `$` and `1`.
fn next_ins(alphabet: &Alphabet) -> Formula {
    or(vec![
        and(vec![
            aux(NEXT, &["x", "y"]),
            or(vec![leq("u", "x"), leq("y", "u")]),
        ]),
        and(vec![
            eq("u", "x"),
            aux(FIRST, &["y"]),
            lt("u", "y"),
            labeled(alphabet, "y"),
        ]),
        and(vec![
            eq("u", "x"),
            exists(
                &["v"],
                and(vec![aux(NEXT, &["v", "y"]), lt("v", "u"), lt("u", "y")]),
            ),
        ]),
        and(vec![
            eq("u", "y"),
            aux(LAST, &["x"]),
            lt("x", "u"),
            labeled(alphabet, "x"),
        ]),
        and(vec![
            eq("u", "y"),
            exists(
                &["v"],
                and(vec![aux(NEXT, &["x", "v"]), lt("x", "u"), lt("u", "v")]),
            ),
        ]),
    ])
}

fn next_reset() -> Formula {
    or(vec![
        and(vec![
            aux(NEXT, &["x", "y"]),
            or(vec![lt("u", "x"), lt("y", "u")]),
        ]),
        and(vec![aux(NEXT, &["x", "u"]), aux(NEXT, &["u", "y"])]),
    ])
}

// The first disjunct keeps `x` when `u` relabels `x` itself.
fn first_ins() -> Formula {
    or(vec![
        and(vec![aux(FIRST, &["x"]), leq("x", "u")]),
        exists(
            &["y"],
            and(vec![aux(FIRST, &["y"]), lt("u", "y"), eq("u", "x")]),
        ),
    ])
}

fn last_ins() -> Formula {
    or(vec![
        and(vec![aux(LAST, &["x"]), leq("u", "x")]),
        exists(
            &["y"],
            and(vec![aux(LAST, &["y"]), lt("y", "u"), eq("u", "x")]),
        ),
    ])
}

fn first_reset() -> Formula {
    or(vec![
        and(vec![aux(FIRST, &["x"]), lt("x", "u")]),
        and(vec![aux(FIRST, &["u"]), aux(NEXT, &["u", "x"])]),
        and(vec![aux(FIRST, &["u"]), aux(LAST, &["u"]), eq("x", "$")]),
    ])
}

fn last_reset() -> Formula {
    or(vec![
        and(vec![aux(LAST, &["x"]), lt("u", "x")]),
        and(vec![aux(LAST, &["u"]), aux(NEXT, &["x", "u"])]),
        and(vec![aux(FIRST, &["u"]), aux(LAST, &["u"]), eq("x", "1")]),
    ])
}

/// Rules for `R_first/1`, `R_last/1` and `R_Next/2`.
pub fn next_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    vec![
        RelationSpec::new(FIRST, &["x"], eq("x", "$"))
            .ins_all(alphabet, |_| first_ins())
            .rule(AbstractUpdate::Reset, first_reset()),
        RelationSpec::new(LAST, &["x"], eq("x", "1"))
            .ins_all(alphabet, |_| last_ins())
            .rule(AbstractUpdate::Reset, last_reset()),
        RelationSpec::new(NEXT, &["x", "y"], Formula::False)
            .ins_all(alphabet, |_| next_ins(alphabet))
            .rule(AbstractUpdate::Reset, next_reset()),
    ]
}

const EQ_VARS: [&str; 4] = ["xo", "xc", "yo", "yc"];

fn eq_ins(alphabet: &Alphabet, z: char) -> Formula {
    let np = |a: &str, b: &str| auxp(NEXT, &[a, b]);
    let r = |a: &str, b: &str, c: &str, d: &str| aux(EQ, &[a, b, c, d]);
    let parts = vec![
        // u outside both intervals
        and(vec![
            r("xo", "xc", "yo", "yc"),
            or(vec![
                lt("u", "xo"),
                and(vec![lt("xc", "u"), lt("u", "yo")]),
                lt("yc", "u"),
            ]),
        ]),
        // u opens the left interval
        exists(
            &["v1", "v2"],
            and(vec![
                r("v1", "xc", "v2", "yc"),
                np("xo", "v1"),
                np("yo", "v2"),
                sym(z, "yo"),
                eq("u", "xo"),
            ]),
        ),
        // u strictly inside the left interval
        exists(
            &["z1", "z2", "z3", "z4", "v"],
            and(vec![
                np("z1", "u"),
                np("u", "z2"),
                np("z3", "v"),
                np("v", "z4"),
                r("xo", "z1", "yo", "z3"),
                r("z2", "xc", "z4", "yc"),
                sym(z, "v"),
            ]),
        ),
        // u closes the left interval
        exists(
            &["v1", "v2"],
            and(vec![
                r("xo", "v1", "yo", "v2"),
                np("v1", "u"),
                np("v2", "yc"),
                eq("u", "xc"),
                sym(z, "yc"),
            ]),
        ),
        // the left interval is the single node u
        and(vec![
            eq("u", "xo"),
            eq("xo", "xc"),
            eq("yo", "yc"),
            sym(z, "yo"),
        ]),
        // mirrored cases with u in the right interval
        exists(
            &["v1", "v2"],
            and(vec![
                r("v1", "xc", "v2", "yc"),
                np("xo", "v1"),
                np("yo", "v2"),
                sym(z, "xo"),
                eq("u", "yo"),
            ]),
        ),
        exists(
            &["z1", "z2", "z3", "z4", "v"],
            and(vec![
                np("z1", "v"),
                np("v", "z2"),
                np("z3", "u"),
                np("u", "z4"),
                r("xo", "z1", "yo", "z3"),
                r("z2", "xc", "z4", "yc"),
                sym(z, "v"),
            ]),
        ),
        exists(
            &["v1", "v2"],
            and(vec![
                r("xo", "v1", "yo", "v2"),
                np("v1", "xc"),
                np("v2", "u"),
                eq("u", "yc"),
                sym(z, "xc"),
            ]),
        ),
        and(vec![
            eq("u", "yo"),
            eq("xo", "xc"),
            eq("yo", "yc"),
            sym(z, "xo"),
        ]),
    ];
    and(vec![
        or(parts),
        lt("xc", "yo"),
        all_labeled(alphabet, &EQ_VARS),
    ])
}

fn eq_reset(alphabet: &Alphabet) -> Formula {
    let n = |a: &str, b: &str| aux(NEXT, &[a, b]);
    let r = |a: &str, b: &str, c: &str, d: &str| aux(EQ, &[a, b, c, d]);
    let parts = vec![
        and(vec![
            r("xo", "xc", "yo", "yc"),
            or(vec![
                lt("u", "xo"),
                and(vec![lt("xc", "u"), lt("u", "yo")]),
                lt("yc", "u"),
            ]),
        ]),
        // u was strictly inside the left interval: glue the two halves
        exists(
            &["z1", "z2", "z3", "z4"],
            and(vec![
                r("xo", "z1", "yo", "z3"),
                r("z2", "xc", "z4", "yc"),
                n("z1", "u"),
                n("u", "z2"),
                n("z3", "z4"),
            ]),
        ),
        exists(
            &["z1", "z2", "z3", "z4"],
            and(vec![
                r("xo", "z1", "yo", "z3"),
                r("z2", "xc", "z4", "yc"),
                n("z1", "z2"),
                n("z3", "u"),
                n("u", "z4"),
            ]),
        ),
    ];
    and(vec![
        or(parts),
        lt("xc", "yo"),
        all_labeled(alphabet, &EQ_VARS),
    ])
}

/// Rules for `R_eq/4`; the insertion rules read `R_Next'`.
pub fn eq_rules(alphabet: &Alphabet) -> Vec<RelationSpec> {
    let a = alphabet.clone();
    vec![RelationSpec::new(EQ, &EQ_VARS, Formula::False)
        .ins_all(alphabet, |z| eq_ins(&a, z))
        .rule(AbstractUpdate::Reset, eq_reset(alphabet))]
}

/// `R_first`, `R_last`, `R_Next` and `R_eq` together.
pub fn base_specs(alphabet: &Alphabet) -> Vec<RelationSpec> {
    let mut v = next_rules(alphabet);
    v.extend(eq_rules(alphabet));
    v
}

pub fn base_program(alphabet: &Alphabet) -> Result<DynamicProgram, EngineError> {
    DynamicProgram::new(alphabet.clone(), base_specs(alphabet), None)
}
