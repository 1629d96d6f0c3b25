use dynspan::formula::FragmentClass;
use dynspan::oracle::{
    defs, differential, exhaustive_single_updates, fuzz, Definition, FuzzConfig,
};
use dynspan::regular::*;
use dynspan::word::Alphabet;
use proptest::prelude::*;

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

fn check_language(re: &str, max_n: usize) {
    let dfa = dfa_from_regex(re, &ab()).unwrap();
    let p = regular_program(&dfa).unwrap();
    assert_eq!(p.classify(), FragmentClass::QF);
    let d = defs::dfa_runs(&dfa, &DfaNames::new(""));
    for n in 1..=max_n {
        exhaustive_single_updates(&p, &d, n).unwrap();
    }
    for seed in 0..20 {
        let trace = fuzz(&FuzzConfig::new(seed, 30, 6, ab()));
        let r = differential(&p, &d, 6, &trace).unwrap();
        assert!(r.is_none(), "{}", r.unwrap().to_text());
    }
}

#[test]
fn a_star() {
    check_language("a*", 5);
}

#[test]
fn ab_star() {
    check_language("(ab)*", 5);
}

#[test]
fn contains_a() {
    check_language(".*a.*", 5);
}

#[test]
fn constraint_relation() {
    let r = parse_regex("(ab)+|b", &ab()).unwrap();
    let dfa = determinize(&compile_nfa(&r, &ab()));
    let p = constraint_program(&dfa).unwrap();
    assert!(p.classify() <= FragmentClass::UCQ);
    let rr = r.clone();
    let mut d = defs::dfa_runs(&dfa, &DfaNames::new(""));
    d.push(Definition::new(
        "R_A",
        2,
        move |ws: &dynspan::word::WordStructure| {
            dynspan::relation::Relation::from_tuples(
                2,
                defs::intervals(ws)
                    .into_iter()
                    .filter(|(_, _, s)| regex_matches(&rr, &s.iter().collect::<String>()))
                    .map(|(a, b, _)| vec![a, b]),
            )
        },
    ));
    for n in 1..=5 {
        exhaustive_single_updates(&p, &d, n).unwrap();
    }
}

fn regex_strategy() -> impl Strategy<Value = Regex> {
    let leaf = prop_oneof![
        Just(Regex::Empty),
        Just(Regex::Epsilon),
        Just(Regex::Lit('a')),
        Just(Regex::Lit('b')),
        Just(Regex::Any),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Regex::alt(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Regex::cat(a, b)),
            inner.prop_map(Regex::star),
        ]
    })
}

proptest! {
    #[test]
    fn nfa_dfa_and_direct_matching_agree(r in regex_strategy(), w in "[ab]{0,7}") {
        let nfa = compile_nfa(&r, &ab());
        let dfa = determinize(&nfa);
        let want = regex_matches(&r, &w);
        prop_assert_eq!(nfa.accepts(&w), want);
        prop_assert_eq!(dfa.accepts(&w), want);
    }

    #[test]
    fn display_roundtrips(r in regex_strategy(), w in "[ab]{0,6}") {
        let back = parse_regex(&r.to_string(), &ab()).unwrap();
        prop_assert_eq!(regex_matches(&back, &w), regex_matches(&r, &w));
    }
}
