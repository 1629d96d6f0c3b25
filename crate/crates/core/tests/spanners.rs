use std::collections::BTreeSet;

use dynspan::engine::DynamicProgram;
use dynspan::formula::FragmentClass;
use dynspan::oracle::{defs, differential, exhaustive_single_updates, fuzz, FuzzConfig};
use dynspan::regular::{compile_nfa, parse_regex_formula};
use dynspan::spanners::*;
use dynspan::splog::{builtin_relations, parse_splog};
use dynspan::word::{parse_trace, Alphabet, WordStructure};
use proptest::prelude::*;

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

fn regular(text: &str) -> DynamicProgram {
    regex_spanner_program(text, &ab()).unwrap()
}

fn core(realization: &str, vars: &[&str]) -> DynamicProgram {
    let f = parse_splog(realization, &ab()).unwrap();
    let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
    core_spanner_rules(&f, &vars, &ab(), &builtin_relations()).unwrap()
}

fn rows(p: &DynamicProgram, n: usize, trace: &str) -> Vec<String> {
    let s = p
        .run(&p.init(n).unwrap(), &parse_trace(trace).unwrap())
        .unwrap();
    let r = s.relation(p, SPANNER).unwrap();
    r.rows()
        .iter()
        .map(|t| dynspan::relation::render_tuple(t, n + 1))
        .collect()
}

const AB_REALIZATION: &str = "exists(s, and(eq(W, <x_p><x_c><s>), constr(x_c, /ab/)))";

#[test]
fn ab_occurrences_golden() {
    for p in [regular(".*x{ab}.*"), core(AB_REALIZATION, &["x"])] {
        assert_eq!(rows(&p, 6, "ins a 1; ins b 3; ins a 5"), ["(1,5)"]);
        assert_eq!(
            rows(&p, 6, "ins a 1; ins b 3; ins a 5; ins b 6"),
            ["(1,5)", "(5,$)"]
        );
    }
}

#[test]
fn regular_spanners_match_static_semantics() {
    for text in [
        ".*x{ab}.*",
        ".*x{.}.*y{.}.*",
        "x{y{a*}b*}.*",
        ".*x{()}.*",
        "a*x{b*}y{a.*}|x{()}y{.*}",
        "(a|b)*a",
        "x{[]}",
    ] {
        let p = regular(text);
        assert_eq!(p.classify(), FragmentClass::QF, "{text}");
        let r = parse_regex_formula(text, &ab()).unwrap();
        let mut d = vec![defs::spanner_relation(
            SPANNER,
            &AlgebraExpr::Rgx(r.clone()),
        )];
        for (pi, path) in to_vset_paths(&compile_nfa(&r, &ab()))
            .unwrap()
            .iter()
            .enumerate()
        {
            for (m, dfa) in path.segments.iter().enumerate() {
                d.extend(defs::dfa_runs(dfa, &segment_names(pi, m)));
            }
        }
        for n in 1..=4 {
            exhaustive_single_updates(&p, &d, n).unwrap_or_else(|r| panic!("{text}: {r:?}"));
        }
        for seed in 0..10 {
            let trace = fuzz(&FuzzConfig::new(seed, 10, 6, ab()));
            let r = differential(&p, &d, 6, &trace).unwrap();
            assert!(r.is_none(), "{text}: {}", r.unwrap().to_text());
        }
    }
}

#[test]
fn core_spanners_match_algebra() {
    let cases = [
        (
            r#"(rgx ".*x{ab}.*")"#,
            AB_REALIZATION,
            FragmentClass::UCQ,
        ),
        (
            r#"(proj (x) (seleq x y (rgx ".*x{.+}.*y{.+}.*")))"#,
            "exists(m, exists(s, and(eq(W, <x_p><x_c><m><x_c><s>), constr(x_c, /.+/))))",
            FragmentClass::UCQ,
        ),
        (
            r#"(diff (rgx ".*x{a}.*") (rgx ".*x{a}b.*"))"#,
            "and(exists(s, eq(W, <x_p><x_c><s>)), constr(x_c, /a/), not(exists(t, eq(W, <x_p><x_c>b<t>))))",
            FragmentClass::FO,
        ),
        (
            r#"(rgx ".*x{()}b.*")"#,
            "exists(s, and(eq(W, <x_p><x_c>b<s>), constr(x_c, /()/)))",
            FragmentClass::UCQ,
        ),
    ];
    for (expr, real, class) in cases {
        let e = parse_algebra(expr, &ab()).unwrap();
        let vars: Vec<String> = e.vars().into_iter().collect();
        let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
        let p = core(real, &vars);
        assert_eq!(p.classify(), class, "{expr}");
        let d = vec![defs::spanner_relation(SPANNER, &e)];
        for seed in 0..8 {
            let trace = fuzz(&FuzzConfig::new(seed, 8, 5, ab()));
            let r = differential(&p, &d, 5, &trace).unwrap();
            assert!(r.is_none(), "{expr}: {}", r.unwrap().to_text());
        }
    }
}

#[test]
fn realization_must_match_variables() {
    let f = parse_splog(AB_REALIZATION, &ab()).unwrap();
    let r = core_spanner_rules(&f, &["y".to_string()], &ab(), &builtin_relations());
    assert!(matches!(r, Err(SpannerError::Realization(_))));
}

#[test]
fn vset_paths_cover_operation_orders() {
    let r = parse_regex_formula(".*x{.}.*y{.}.*|.*y{.}.*x{.}.*", &ab()).unwrap();
    let paths = to_vset_paths(&compile_nfa(&r, &ab())).unwrap();
    assert!(paths
        .iter()
        .all(|p| p.ops.len() == 4 && p.segments.len() == 5));
    let orders: BTreeSet<String> = paths.iter().map(|p| format!("{:?}", p.ops)).collect();
    assert_eq!(orders.len(), 2);
}

fn expr_strategy() -> impl Strategy<Value = AlgebraExpr> {
    let texts = [".*x{a.*}", "x{.*}b.*", ".*x{b}.*", "x{()}.*", ".*x{.*}"];
    let leaf = proptest::sample::select(texts.to_vec())
        .prop_map(|t| AlgebraExpr::Rgx(parse_regex_formula(t, &ab()).unwrap()));
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| AlgebraExpr::Union(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| AlgebraExpr::Join(Box::new(a), Box::new(b))),
            (inner.clone(), inner).prop_map(|(a, b)| AlgebraExpr::Diff(Box::new(a), Box::new(b))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_roundtrip(e in expr_strategy(), layout in "[ab_]{1,7}") {
        let ws = WordStructure::from_layout(&layout, ab()).unwrap();
        let rel = eval_static(&e, &ws.word()).unwrap();
        let order: Vec<String> = e.vars().into_iter().collect();
        prop_assert_eq!(decode(&encode(&rel, &ws, &order), &ws, &order), rel);
    }

    #[test]
    fn union_join_diff_laws(e in expr_strategy(), f in expr_strategy(), w in "[ab]{0,5}") {
        let a = eval_static(&e, &w).unwrap();
        let b = eval_static(&f, &w).unwrap();
        let j = eval_static(&AlgebraExpr::Join(Box::new(e.clone()), Box::new(f.clone())), &w).unwrap();
        let j2 = eval_static(&AlgebraExpr::Join(Box::new(f), Box::new(e.clone())), &w).unwrap();
        prop_assert_eq!(&j, &j2);
        let d = eval_static(&AlgebraExpr::Diff(Box::new(e.clone()), Box::new(e)), &w).unwrap();
        prop_assert!(d.is_empty());
        // all joins here share x
        let inter: BTreeSet<_> = a.intersection(&b).cloned().collect();
        prop_assert_eq!(j, inter);
    }
}
