use dynspan::formula::FragmentClass;
use dynspan::oracle::{defs, differential, fuzz, FuzzConfig};
use dynspan::splog::*;
use dynspan::word::Alphabet;
use proptest::prelude::*;

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

const POSITIVE: &[&str] = &[
    "exists(x, and(eq(W, <x><x><x>), constr(x, /ab*/)))",
    "eq(W, <x><y>)",
    "exists(p, exists(s, and(eq(W, <p><x><s>), constr(x, /ab/))))",
    "and(eq(W, <x>a<y>), eq(W, <y>a<x>))",
    "and(eq(W, <x><y>), rel(R_len, x, y))",
    "or(eq(W, a<x>), eq(W, <x>b))",
    "and(eq(W, <x><x>), constr(W, /(ab)*/))",
    "eq(W, )",
];

const NEGATIVE: &[&str] = &[
    "not(eq(W, ))",
    "exists(p, exists(s, and(eq(W, <p><x><s>), not(exists(y, eq(W, <y><x><x>))))))",
    "not(not(eq(W, a<x>)))",
];

fn check(text: &str, neg: bool, seeds: u64, n: usize) {
    let reg = builtin_relations();
    let f = parse_splog(text, &ab()).unwrap();
    let p = if neg {
        compile_neg(&f, &ab(), &reg)
    } else {
        compile(&f, &ab(), &reg)
    }
    .unwrap();
    let class = p.classify();
    if neg {
        assert_eq!(class, FragmentClass::FO, "{text}");
    } else {
        assert_eq!(class, FragmentClass::UCQ, "{text}");
    }
    let d = vec![defs::splog_relation(TOP, &f, &reg)];
    for seed in 0..seeds {
        let trace = fuzz(&FuzzConfig::new(seed, 10, n, ab()));
        let r = differential(&p, &d, n, &trace).unwrap();
        assert!(r.is_none(), "{text}\n{}", r.unwrap().to_text());
    }
}

#[test]
fn positive_formulas_track_models() {
    for f in POSITIVE {
        check(f, false, 12, 6);
    }
}

#[test]
fn negated_formulas_track_models() {
    for f in NEGATIVE {
        check(f, true, 12, 6);
    }
}

#[test]
fn negation_rejected_by_positive_compiler() {
    let f = parse_splog(NEGATIVE[0], &ab()).unwrap();
    assert!(matches!(
        compile(&f, &ab(), &[]),
        Err(SpLogError::NegationNotAllowed)
    ));
}

#[test]
fn factorization_relation_decodes() {
    let reg = builtin_relations();
    let f = parse_splog("eq(W, <x><y>)", &ab()).unwrap();
    let p = compile(&f, &ab(), &reg).unwrap();
    let trace = dynspan::word::parse_trace("ins a 1; ins b 2").unwrap();
    let s = p.run(&p.init(3).unwrap(), &trace).unwrap();
    let rel = s.relation(&p, TOP).unwrap();
    // (x,y) in {(ε,ab),(a,b),(ab,ε)}, each with every representation
    let want = vec![vec![1, 1, 2, 2], vec![1, 2, 4, 4], vec![4, 4, 1, 2]];
    let mut got = rel.rows().to_vec();
    got.sort();
    let mut want = want;
    want.sort();
    assert_eq!(got, want);
}

fn formula_strategy() -> impl Strategy<Value = &'static str> {
    prop::sample::select(POSITIVE.iter().chain(NEGATIVE).copied().collect::<Vec<_>>())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn models_match_static_semantics(text in formula_strategy(), w in "[ab]{0,5}") {
        let reg = builtin_relations();
        let f = parse_splog(text, &ab()).unwrap();
        let vars: Vec<String> = f.free().into_iter().collect();
        let m = models(&f, &w, &reg);
        for mut s in all_assignments(&vars, &w) {
            let inside = m.contains(&s);
            s.insert(MAIN.to_string(), w.clone());
            prop_assert_eq!(eval_static(&f, &s, &reg), inside, "{} on {:?} with {:?}", text, w, s);
        }
    }

    #[test]
    fn constraint_is_a_filter(w in "[ab]{0,5}") {
        let plain = parse_splog("eq(W, <x><y>)", &ab()).unwrap();
        let cons = parse_splog("and(eq(W, <x><y>), constr(x, /a*/))", &ab()).unwrap();
        let want: std::collections::BTreeSet<_> =
            models(&plain, &w, &[]).into_iter().filter(|s| s["x"].chars().all(|c| c == 'a')).collect();
        prop_assert_eq!(models(&cons, &w, &[]), want);
    }
}

#[test]
fn oracle_detects_a_wrong_program() {
    let reg = builtin_relations();
    let f = parse_splog("eq(W, a<x>)", &ab()).unwrap();
    let g = parse_splog("eq(W, <x>b)", &ab()).unwrap();
    let p = compile(&g, &ab(), &reg).unwrap();
    let d = vec![defs::splog_relation(TOP, &f, &reg)];
    let found = (0..20).any(|seed| {
        let trace = fuzz(&FuzzConfig::new(seed, 10, 6, ab()));
        differential(&p, &d, 6, &trace).unwrap().is_some()
    });
    assert!(found);
}
