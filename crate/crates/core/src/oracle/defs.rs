//! Brute-force definitions, computed from the word structure alone.

use crate::relation::{Relation, Tuple};
use crate::word::{Node, WordStructure};

use super::Definition;

/// All intervals `[x,y]` with labeled endpoints, paired with their content.
pub fn intervals(ws: &WordStructure) -> Vec<(Node, Node, Vec<char>)> {
    let nodes = ws.labeled_nodes();
    let mut out = Vec::new();
    for (i, &x) in nodes.iter().enumerate() {
        let mut s = Vec::new();
        for &y in &nodes[i..] {
            s.push(ws.label(y).unwrap());
            out.push((x, y, s.clone()));
        }
    }
    out
}

/// `{(x1,y1,x2,y2) | pred(w[x1,y1], w[x2,y2])}` over labeled-endpoint intervals.
pub fn interval_pairs(ws: &WordStructure, pred: impl Fn(&[char], &[char]) -> bool) -> Relation {
    let iv = intervals(ws);
    let mut rows = Vec::new();
    for (a, b, s) in &iv {
        for (c, d, t) in &iv {
            if pred(s, t) {
                rows.push(vec![*a, *b, *c, *d]);
            }
        }
    }
    Relation::from_tuples(4, rows)
}

fn unary(xs: impl IntoIterator<Item = Node>) -> Relation {
    Relation::from_tuples(1, xs.into_iter().map(|x| vec![x]))
}

pub fn flag(b: bool) -> Relation {
    if b {
        Relation::unit()
    } else {
        Relation::empty(0)
    }
}

pub fn first(ws: &WordStructure) -> Relation {
    unary(Some(
        ws.labeled_nodes().first().copied().unwrap_or(ws.dollar()),
    ))
}

pub fn last(ws: &WordStructure) -> Relation {
    unary(Some(ws.labeled_nodes().last().copied().unwrap_or(1)))
}

pub fn next(ws: &WordStructure) -> Relation {
    let nodes = ws.labeled_nodes();
    Relation::from_tuples(2, nodes.windows(2).map(|p| vec![p[0], p[1]]))
}

pub fn eq(ws: &WordStructure) -> Relation {
    let iv = intervals(ws);
    let mut rows: Vec<Tuple> = Vec::new();
    for (a, b, s) in &iv {
        for (c, d, t) in &iv {
            if b < c && s == t {
                rows.push(vec![*a, *b, *c, *d]);
            }
        }
    }
    Relation::from_tuples(4, rows)
}

/// Equal content, intervals may overlap or come in any order.
pub fn full_eq(ws: &WordStructure) -> Relation {
    interval_pairs(ws, |s, t| s == t)
}

pub fn len(ws: &WordStructure) -> Relation {
    interval_pairs(ws, |s, t| s.len() == t.len())
}

pub fn lt(ws: &WordStructure) -> Relation {
    interval_pairs(ws, |s, t| s.len() < t.len())
}

pub fn rev(ws: &WordStructure) -> Relation {
    interval_pairs(ws, |s, t| s.len() == t.len() && s.iter().eq(t.iter().rev()))
}

pub fn num(ws: &WordStructure, z: char) -> Relation {
    interval_pairs(ws, |s, t| count(s, z) == count(t, z))
}

pub fn perm(ws: &WordStructure) -> Relation {
    let syms = ws.alphabet().symbols().to_vec();
    interval_pairs(ws, |s, t| {
        s.len() == t.len() && syms.iter().all(|&z| count(s, z) == count(t, z))
    })
}

pub fn scatt(ws: &WordStructure) -> Relation {
    interval_pairs(ws, is_subsequence)
}

fn count(s: &[char], z: char) -> usize {
    s.iter().filter(|&&c| c == z).count()
}

fn is_subsequence(s: &[char], t: &[char]) -> bool {
    let mut it = t.iter();
    s.iter().all(|c| it.any(|d| d == c))
}

/// Labeled-endpoint intervals without the symbol `z`.
pub fn avoid(ws: &WordStructure, z: char) -> Relation {
    Relation::from_tuples(
        2,
        intervals(ws)
            .into_iter()
            .filter(|(_, _, s)| !s.contains(&z))
            .map(|(a, b, _)| vec![a, b]),
    )
}

pub fn pow2(ws: &WordStructure) -> Relation {
    Relation::from_tuples(
        2,
        intervals(ws)
            .into_iter()
            .filter(|(_, _, s)| s.len().is_power_of_two())
            .map(|(a, b, _)| vec![a, b]),
    )
}

pub fn is_pow2_len(ws: &WordStructure) -> Relation {
    flag(ws.len().is_power_of_two())
}

/// Definitions of the four base relations.
pub fn base() -> Vec<Definition> {
    vec![
        Definition::new("R_first", 1, first),
        Definition::new("R_last", 1, last),
        Definition::new("R_Next", 2, next),
        Definition::new("R_eq", 4, eq),
    ]
}

/// Definitions for every relation of the extension library over `alphabet`.
pub fn ext(alphabet: &crate::word::Alphabet) -> Vec<Definition> {
    let mut v = vec![
        Definition::new("R_len", 4, len),
        Definition::new("R_feq", 4, full_eq),
        Definition::new("R_rev", 4, rev),
        Definition::new("R_perm", 4, perm),
        Definition::new("R_scatt", 4, scatt),
        Definition::new("R_lt", 4, lt),
        Definition::new("P2", 2, pow2),
        Definition::new("L2", 0, is_pow2_len),
    ];
    for &z in alphabet.symbols() {
        v.push(Definition::new(
            format!("R_num_{z}"),
            4,
            move |ws: &WordStructure| num(ws, z),
        ));
        v.push(Definition::new(
            format!("Z_{z}"),
            2,
            move |ws: &WordStructure| avoid(ws, z),
        ));
    }
    v
}

fn word_between(ws: &WordStructure, i: Node, j: Node) -> Vec<char> {
    ((i + 1)..j).filter_map(|x| ws.label(x)).collect()
}

/// Run relations of `dfa` computed by running it on every subword.
pub fn dfa_runs(dfa: &crate::regular::Dfa, names: &crate::regular::DfaNames) -> Vec<Definition> {
    let mut v = Vec::new();
    let nq = dfa.states();
    for p in 0..nq {
        for q in 0..nq {
            let d = dfa.clone();
            v.push(Definition::new(
                names.run(p, q),
                2,
                move |ws: &WordStructure| {
                    let mut rows = Vec::new();
                    for i in 1..=ws.dollar() {
                        for j in (i + 1)..=ws.dollar() {
                            if d.run(p, word_between(ws, i, j)) == q {
                                rows.push(vec![i, j]);
                            }
                        }
                    }
                    Relation::from_tuples(2, rows)
                },
            ));
        }
        let d = dfa.clone();
        v.push(Definition::new(
            names.init(p),
            1,
            move |ws: &WordStructure| {
                unary((1..=ws.dollar()).filter(|&j| d.run(d.start, word_between(ws, 0, j)) == p))
            },
        ));
        let d = dfa.clone();
        v.push(Definition::new(
            names.fin(p),
            1,
            move |ws: &WordStructure| {
                unary(
                    (1..=ws.dollar())
                        .filter(|&i| d.finals[d.run(p, word_between(ws, i, ws.dollar()))]),
                )
            },
        ));
    }
    let d = dfa.clone();
    v.push(Definition::new(
        names.acc(),
        0,
        move |ws: &WordStructure| flag(d.accepts(&ws.word())),
    ));
    v
}

/// `{(x,y) | x ≤ y labeled, w[x,y] ∈ L(dfa)}`.
pub fn in_language(
    dfa: &crate::regular::Dfa,
) -> impl Fn(&WordStructure) -> Relation + Send + Sync + 'static {
    let d = dfa.clone();
    move |ws: &WordStructure| {
        Relation::from_tuples(
            2,
            intervals(ws)
                .into_iter()
                .filter(|(_, _, s)| d.accepts(&s.iter().collect::<String>()))
                .map(|(a, b, _)| vec![a, b]),
        )
    }
}

/// 0-ary membership flag for a pattern language.
pub fn pattern_flag(
    name: &str,
    p: &crate::patterns::Pattern,
    kind: crate::patterns::Kind,
) -> Definition {
    let p = p.clone();
    Definition::new(name, 0, move |ws: &WordStructure| {
        flag(crate::patterns::membership_oracle(&p, &ws.word(), kind))
    })
}

/// Image intervals of `free` (first occurrences) over all erasing factorizations.
pub fn pattern_relation(name: &str, p: &crate::patterns::Pattern, free: &[String]) -> Definition {
    use crate::patterns::{all_factorizations, Item, Kind};
    let p = p.clone();
    let free = free.to_vec();
    Definition::new(name, 2 * free.len(), move |ws: &WordStructure| {
        let nodes = ws.labeled_nodes();
        let w: Vec<char> = ws.word().chars().collect();
        let firsts: Vec<usize> = free
            .iter()
            .map(|x| {
                p.items
                    .iter()
                    .position(|it| matches!(it, Item::Var(y) if y == x))
                    .expect("free var occurs")
            })
            .collect();
        let rows = all_factorizations(&p, &w, Kind::Erasing)
            .into_iter()
            .map(|f| {
                firsts
                    .iter()
                    .flat_map(|&i| {
                        let (s, l) = f[i];
                        if l == 0 {
                            [ws.dollar(), ws.dollar()]
                        } else {
                            [nodes[s], nodes[s + l - 1]]
                        }
                    })
                    .collect()
            });
        Relation::from_tuples(2 * free.len(), rows)
    })
}

/// All endpoint-pair encodings of the models of a SpLog formula: each value
/// becomes every labeled interval with that content, or `($,$)` when empty.
pub fn splog_relation(
    name: &str,
    f: &crate::splog::SpLog,
    registry: &[crate::splog::RegisteredRelation],
) -> Definition {
    let f = f.clone();
    let registry = registry.to_vec();
    let free: Vec<String> = f.free().into_iter().collect();
    Definition::new(name, 2 * free.len(), move |ws: &WordStructure| {
        let mut by_content: std::collections::HashMap<String, Vec<(Node, Node)>> =
            Default::default();
        for (a, b, s) in intervals(ws) {
            by_content
                .entry(s.into_iter().collect())
                .or_default()
                .push((a, b));
        }
        by_content.insert(String::new(), vec![(ws.dollar(), ws.dollar())]);
        let mut rows: Vec<Tuple> = Vec::new();
        for m in crate::splog::models(&f, &ws.word(), &registry) {
            let mut partial: Vec<Tuple> = vec![vec![]];
            for x in &free {
                let reps = by_content.get(&m[x]).cloned().unwrap_or_default();
                partial = partial
                    .into_iter()
                    .flat_map(|t| {
                        reps.iter().map(move |&(a, b)| {
                            let mut t = t.clone();
                            t.extend([a, b]);
                            t
                        })
                    })
                    .collect();
            }
            rows.extend(partial);
        }
        Relation::from_tuples(2 * free.len(), rows)
    })
}

/// Spanner relation of an algebra expression, by static evaluation on the
/// current word. Spans are placed on nodes by walking the labeled nodes.
pub fn spanner_relation(name: &str, e: &crate::spanners::AlgebraExpr) -> Definition {
    let e = e.clone();
    let vars: Vec<String> = e.vars().into_iter().collect();
    Definition::new(name, 2 * vars.len(), move |ws: &WordStructure| {
        let at = |p: usize| ws.node_at(p).unwrap_or(ws.dollar());
        let rel = crate::spanners::eval_static(&e, &ws.word()).expect("static evaluation");
        let rows = rel.iter().map(|m| {
            vars.iter()
                .flat_map(|x| [at(m[x].i), at(m[x].j)])
                .collect::<Tuple>()
        });
        Relation::from_tuples(2 * vars.len(), rows)
    })
}
