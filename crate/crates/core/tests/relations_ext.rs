use dynspan::engine::RelationSpec;
use dynspan::oracle::{defs, exhaustive_single_updates, Definition};
use dynspan::relext::*;
use dynspan::word::Alphabet;

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

fn check(specs: Vec<RelationSpec>, max_n: usize) {
    let a = ab();
    let p = with_base(&a, specs, None).unwrap();
    let mut d: Vec<Definition> = defs::base();
    d.extend(
        defs::ext(&a)
            .into_iter()
            .filter(|d| p.relation_index(&d.name).is_some()),
    );
    for n in 1..=max_n {
        exhaustive_single_updates(&p, &d, n).unwrap();
    }
}

#[test]
fn len_exhaustive() {
    check(len_rules(&ab()), 5);
}

#[test]
fn feq_exhaustive() {
    check(feq_rules(&ab()), 5);
}

#[test]
fn rev_exhaustive() {
    check(rev_rules(&ab()), 5);
}

#[test]
fn num_exhaustive() {
    check(num_rules(&ab(), 'a'), 5);
}

#[test]
fn perm_exhaustive() {
    check(perm_rules(&ab()), 4);
}

#[test]
fn scatt_exhaustive() {
    check(scatt_rules(&ab()), 5);
}

#[test]
fn lt_and_pow2_exhaustive() {
    let mut s = len_rules(&ab());
    s.extend(lt_rules(&ab()));
    s.extend(pow2_rules(&ab()));
    check(s, 5);
}
