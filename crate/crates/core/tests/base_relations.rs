use dynspan::base::base_program;
use dynspan::oracle::{defs, exhaustive_single_updates};
use dynspan::word::Alphabet;

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

#[test]
fn exhaustive_up_to_five() {
    let p = base_program(&ab()).unwrap();
    for n in 1..=5 {
        exhaustive_single_updates(&p, &defs::base(), n).unwrap();
    }
}
