use std::collections::BTreeMap;

use dynspan::engine::compose;
use dynspan::formula::{Formula, FragmentClass, Term};
use dynspan::oracle::{
    defs, differential, exhaustive_single_updates, fuzz, Definition, FuzzConfig,
};
use dynspan::patterns::*;
use dynspan::relext::with_base;
use dynspan::word::Alphabet;
use proptest::prelude::*;

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

fn pat(s: &str) -> Pattern {
    Pattern::parse(s, &ab()).unwrap()
}

fn with_base_defs(extra: Definition) -> Vec<Definition> {
    let mut d = defs::base();
    d.push(extra);
    d
}

fn exhaustive(p: &dynspan::engine::DynamicProgram, d: &[Definition], max_n: usize) {
    for n in 1..=max_n {
        exhaustive_single_updates(p, d, n).unwrap();
    }
}

#[test]
fn nonerasing_exhaustive() {
    for s in ["a<x>b<x>", "a<x><x>b", "<x><y><x>", "<x>a", "ab"] {
        let p = pat(s);
        let prog = nonerasing_rules(&p, &ab()).unwrap();
        assert_eq!(prog.classify(), FragmentClass::UCQ, "{s}");
        exhaustive(
            &prog,
            &with_base_defs(defs::pattern_flag("P", &p, Kind::NonErasing)),
            5,
        );
    }
}

#[test]
fn erasing_exhaustive() {
    for s in ["a<x><x>b", "<x>", "<x>b<y>", "<x><x>"] {
        let p = pat(s);
        let prog = erasing_rules(&p, &ab()).unwrap();
        assert_eq!(prog.classify(), FragmentClass::UCQ, "{s}");
        exhaustive(
            &prog,
            &with_base_defs(defs::pattern_flag("P_E", &p, Kind::Erasing)),
            5,
        );
    }
}

#[test]
fn relation_exhaustive() {
    for (s, free) in [
        ("<x>", vec!["x"]),
        ("a<x>b<x>", vec!["x"]),
        ("<x>a<y>", vec!["y", "x"]),
        ("<x><y><x>", vec![]),
    ] {
        let p = pat(s);
        let free: Vec<String> = free.into_iter().map(String::from).collect();
        let prog = relation_rules(&p, &free, &ab()).unwrap();
        exhaustive(
            &prog,
            &with_base_defs(defs::pattern_relation("R_pat", &p, &free)),
            5,
        );
    }
}

#[test]
fn relation_single_variable_is_whole_word() {
    let p = pat("<x>");
    let prog = relation_rules(&p, &["x".to_string()], &ab()).unwrap();
    let trace = dynspan::word::parse_trace("ins a 2; ins b 4").unwrap();
    let s = prog.run(&prog.init(5).unwrap(), &trace).unwrap();
    let got = s.relation(&prog, "R_pat").unwrap();
    assert_eq!(got.rows(), &[vec![2, 4]]);
    let empty = prog.init(5).unwrap();
    assert_eq!(
        empty.relation(&prog, "R_pat").unwrap().rows(),
        &[vec![6, 6]]
    );
}

#[test]
fn unknown_free_variable() {
    assert!(matches!(
        relation_rules(&pat("a<x>"), &["y".to_string()], &ab()),
        Err(PatternError::UnknownVariable(_))
    ));
}

// Atoms of the printed formula for axbx, with the variable names used there.
#[test]
fn axbx_atoms_match_printed_formula() {
    let f = nonerasing_formula(&pat("a<x>b<x>")).unwrap();
    let mut atoms: Vec<String> = Vec::new();
    f.for_each_atom(&mut |a| atoms.push(a.to_string()));
    let p = |r: &str, args: &[&str]| {
        Formula::AuxP(r.into(), args.iter().map(|&a| Term::from(a)).collect()).to_string()
    };
    let mut want = vec![
        p("R_first", &["t1"]),
        Formula::Sym('a', "t1".into()).to_string(),
        p("R_Next", &["t1", "x2"]),
        Formula::Leq("x2".into(), "t2".into()).to_string(),
        p("R_Next", &["t2", "t3"]),
        Formula::Sym('b', "t3".into()).to_string(),
        p("R_Next", &["t3", "x4"]),
        Formula::Leq("x4".into(), "t4".into()).to_string(),
        p("R_eq", &["x2", "t2", "x4", "t4"]),
        p("R_last", &["t4"]),
    ];
    atoms.sort();
    want.sort();
    assert_eq!(atoms, want);
}

#[test]
fn composed_flags() {
    let (p1, p2) = (pat("a<x>b<x>"), pat("a<x><x>b"));
    let a = with_base(
        &ab(),
        vec![nonerasing_spec(&p1, &ab(), "P_axbx").unwrap()],
        Some("P_axbx"),
    )
    .unwrap();
    let b = with_base(
        &ab(),
        vec![nonerasing_spec(&p2, &ab(), "P_axxb").unwrap()],
        Some("P_axxb"),
    )
    .unwrap();
    let both = compose(&[&a, &b]).unwrap();
    let mut d = defs::base();
    d.push(defs::pattern_flag("P_axbx", &p1, Kind::NonErasing));
    d.push(defs::pattern_flag("P_axxb", &p2, Kind::NonErasing));
    for seed in 0..30 {
        let trace = fuzz(&FuzzConfig::new(seed, 15, 7, ab()));
        let r = differential(&both, &d, 7, &trace).unwrap();
        assert!(r.is_none(), "{}", r.unwrap().to_text());
    }
}

fn all_words(max: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max {
        layer = layer
            .iter()
            .flat_map(|w| ["a", "b"].map(|c| format!("{w}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn pattern_strategy() -> impl Strategy<Value = Pattern> {
    let item = prop_oneof![
        Just(Item::Terminal('a')),
        Just(Item::Terminal('b')),
        Just(Item::Var("x".into())),
        Just(Item::Var("y".into())),
    ];
    proptest::collection::vec(item, 1..=4).prop_map(Pattern::new)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn erasing_decomposition(p in pattern_strategy()) {
        let (members, eps) = erasing_members(&p);
        for w in all_words(6) {
            let union = members.iter().any(|(_, q)| membership_oracle(q, &w, Kind::NonErasing)) || (eps && w.is_empty());
            prop_assert_eq!(membership_oracle(&p, &w, Kind::Erasing), union, "{} on {:?}", p, w);
        }
    }

    #[test]
    fn witness_and_enumeration_agree(p in pattern_strategy(), w in "[ab]{0,6}") {
        let chars: Vec<char> = w.chars().collect();
        for kind in [Kind::Erasing, Kind::NonErasing] {
            let wit = membership_witness(&p, &w, kind);
            if let Some(s) = &wit {
                prop_assert_eq!(p.apply(s), w.clone());
                if kind == Kind::NonErasing {
                    prop_assert!(s.values().all(|v| !v.is_empty()));
                }
            }
            prop_assert_eq!(wit.is_some(), !all_factorizations(&p, &chars, kind).is_empty());
        }
    }

    #[test]
    fn erasing_program_tracks_membership(p in pattern_strategy(), seed in any::<u64>()) {
        let prog = erasing_rules(&p, &ab()).unwrap();
        let d = vec![defs::pattern_flag("P_E", &p, Kind::Erasing)];
        let trace = fuzz(&FuzzConfig::new(seed, 8, 6, ab()));
        let r = differential(&prog, &d, 6, &trace).unwrap();
        prop_assert!(r.is_none(), "{}: {}", p, r.unwrap().to_text());
    }
}

#[test]
fn substitution_apply() {
    let s: Substitution = BTreeMap::from([("x".to_string(), "ba".to_string())]);
    assert_eq!(pat("a<x><x>b").apply(&s), "ababab");
}
