//! Acceptance checks; prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dynspan::base::base_program;
use dynspan::builtins::{suite, Builtin};
use dynspan::engine::DynamicProgram;
use dynspan::formula::{Formula, Term};
use dynspan::oracle::{defs, exhaustive_single_updates, fuzz, run_campaign, Campaign, FuzzConfig};
use dynspan::patterns::{self, membership_oracle, Kind, Pattern};
use dynspan::relation::{render_tuple, Tuple};
use dynspan::relext::{self, with_base, L2};
use dynspan::spanners::{self, SPANNER};
use dynspan::splog;
use dynspan::word::{parse_trace, Alphabet, ConcreteUpdate};

fn ab() -> Alphabet {
    Alphabet::parse("ab").unwrap()
}

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

/// Trace building the word of a layout from the empty structure.
fn layout_trace(layout: &str) -> Vec<ConcreteUpdate> {
    layout
        .chars()
        .enumerate()
        .filter(|(_, c)| *c != '_')
        .map(|(i, c)| ConcreteUpdate::Ins(c, i + 1))
        .collect()
}

fn rows(p: &DynamicProgram, n: usize, trace: &[ConcreteUpdate], rel: &str) -> BTreeSet<Tuple> {
    let s = p.run(&p.init(n).unwrap(), trace).unwrap();
    s.relation(p, rel).unwrap().to_set()
}

fn goldens() -> Check {
    let t0 = Instant::now();
    let base = base_program(&ab()).map_err(|e| e.to_string())?;

    let tr = layout_trace("_ab_b__");
    ensure(
        rows(&base, 7, &tr, "R_first") == BTreeSet::from([vec![2]]),
        "R_first on _ab_b__",
    )?;
    ensure(
        rows(&base, 7, &tr, "R_last") == BTreeSet::from([vec![5]]),
        "R_last on _ab_b__",
    )?;
    ensure(
        rows(&base, 7, &tr, "R_Next") == BTreeSet::from([vec![2, 3], vec![3, 5]]),
        "R_Next on _ab_b__",
    )?;

    let tr = layout_trace("a__ba_b_ab");
    let want: BTreeSet<Tuple> = [
        [1, 1, 5, 5],
        [1, 1, 9, 9],
        [4, 4, 7, 7],
        [4, 4, 10, 10],
        [5, 5, 9, 9],
        [7, 7, 10, 10],
        [1, 4, 5, 7],
        [1, 4, 9, 10],
        [4, 5, 7, 9],
        [5, 7, 9, 10],
    ]
    .into_iter()
    .map(|t| t.to_vec())
    .collect();
    let got = rows(&base, 10, &tr, "R_eq");
    ensure(
        got == want,
        format!("R_eq on a__ba_b_ab has {} tuples", got.len()),
    )?;
    ensure(
        !got.contains(&vec![3, 5, 7, 9]) && !got.contains(&vec![9, 10, 5, 7]),
        "R_eq exclusions",
    )?;

    let sp = spanners::regex_spanner_program(".*x{ab}.*", &ab()).map_err(|e| e.to_string())?;
    let render = |set: BTreeSet<Tuple>| set.iter().map(|t| render_tuple(t, 7)).collect::<Vec<_>>();
    let tr = parse_trace("ins a 1; ins b 3; ins a 5").unwrap();
    ensure(
        render(rows(&sp, 6, &tr, SPANNER)) == ["(1,5)"],
        "spanner on aba",
    )?;
    let tr = parse_trace("ins a 1; ins b 3; ins a 5; ins b 6").unwrap();
    ensure(
        render(rows(&sp, 6, &tr, SPANNER)) == ["(1,5)", "(5,$)"],
        "spanner after ins b 6",
    )?;

    let axxb = Pattern::parse("a<x><x>b", &ab()).map_err(|e| e.to_string())?;
    ensure(
        membership_oracle(&axxb, "ab", Kind::Erasing),
        "ab erasing member",
    )?;
    ensure(
        !membership_oracle(&axxb, "ab", Kind::NonErasing),
        "ab not a non-erasing member",
    )?;
    ensure(
        membership_oracle(&axxb, "ababab", Kind::Erasing),
        "ababab erasing member",
    )?;
    ensure(
        membership_oracle(&axxb, "ababab", Kind::NonErasing),
        "ababab non-erasing member",
    )?;
    let ne = patterns::nonerasing_rules(&axxb, &ab()).map_err(|e| e.to_string())?;
    let er = patterns::erasing_rules(&axxb, &ab()).map_err(|e| e.to_string())?;
    let flag = |p: &DynamicProgram, rel: &str, w: &str| {
        !rows(p, w.len(), &layout_trace(w), rel).is_empty()
    };
    ensure(
        flag(&er, "P_E", "ab") && !flag(&ne, "P", "ab"),
        "maintained flags on ab",
    )?;
    ensure(
        flag(&er, "P_E", "ababab") && flag(&ne, "P", "ababab"),
        "maintained flags on ababab",
    )?;

    let f = patterns::nonerasing_formula(&Pattern::parse("a<x>b<x>", &ab()).unwrap())
        .map_err(|e| e.to_string())?;
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
    ensure(atoms == want, "axbx atom multiset")?;

    let el = t0.elapsed();
    ensure(el.as_secs_f64() < 1.0, format!("goldens took {el:?}"))?;
    Ok(format!("all goldens exact in {el:.2?}"))
}

fn fuzzing(all: &[Builtin]) -> Check {
    let t0 = Instant::now();
    let mut failures = Vec::new();
    for b in all {
        let c = Campaign {
            seed: 0,
            trials: 1000,
            steps: 12,
            n: 8,
            alphabet: ab(),
            jobs: 0,
        };
        let t = Instant::now();
        let r = run_campaign(&b.program, &b.defs, &c).map_err(|e| format!("{}: {e}", b.name))?;
        eprintln!("  {}: {:.1?}", b.name, t.elapsed());
        if let Some((seed, rep)) = r.first {
            failures.push(format!(
                "{} (seed {seed}): {}",
                b.name,
                rep.to_text().lines().next().unwrap_or("")
            ));
        }
    }
    ensure(failures.is_empty(), failures.join("; "))?;
    Ok(format!(
        "{} programs x 1000 traces, no divergence in {:.1?}",
        all.len(),
        t0.elapsed()
    ))
}

fn exhaustive() -> Check {
    let p = with_base(&ab(), relext::len_rules(&ab()), None).map_err(|e| e.to_string())?;
    let mut d = defs::base();
    d.extend(
        defs::ext(&ab())
            .into_iter()
            .filter(|d| d.name == relext::LEN),
    );
    for n in 1..=4 {
        exhaustive_single_updates(&p, &d, n)?;
    }
    Ok("every structure with n <= 4 and every single update".into())
}

fn classes(all: &[Builtin]) -> Check {
    let mut bad = Vec::new();
    for b in all {
        let got = b.program.classify();
        if got != b.class {
            bad.push(format!("{}: {got:?} (want {:?})", b.name, b.class));
        }
    }
    // core spanners from realizations
    let core = |real: &str| {
        let f = splog::parse_splog(real, &ab()).unwrap();
        spanners::core_spanner_rules(&f, &["x".to_string()], &ab(), &splog::builtin_relations())
            .unwrap()
            .classify()
    };
    let c1 = core("exists(s, and(eq(W, <x_p><x_c><s>), constr(x_c, /ab/)))");
    let c2 = core("and(exists(s, eq(W, <x_p><x_c><s>)), not(eq(W, <x_p><x_c>)))");
    if c1 != dynspan::formula::FragmentClass::UCQ || c2 != dynspan::formula::FragmentClass::FO {
        bad.push(format!("core spanners: {c1:?} / {c2:?}"));
    }
    ensure(bad.is_empty(), bad.join("; "))?;
    Ok(format!(
        "{} built-in programs plus 2 core spanners in their fragments",
        all.len()
    ))
}

fn power_of_two() -> Check {
    let a = ab();
    let mut specs = relext::len_rules(&a);
    specs.extend(relext::pow2_rules(&a));
    let p = with_base(&a, specs, Some(L2)).map_err(|e| e.to_string())?;
    let n = 33;
    let mut s = p.init(n).map_err(|e| e.to_string())?;
    let mut trues = Vec::new();
    for len in 1..=32 {
        let z = if len % 3 == 0 { 'b' } else { 'a' };
        s = p
            .step(&s, &ConcreteUpdate::Ins(z, len))
            .map_err(|e| e.to_string())?;
        if !s.relation(&p, L2).unwrap().is_empty() {
            trues.push(len);
        }
    }
    ensure(
        trues == [1, 2, 4, 8, 16, 32],
        format!("L2 held at {trues:?}"),
    )?;
    let base = s;
    let pow2 = |k: usize| k.is_power_of_two();
    for seed in 0..200u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = base.clone();
        for _ in 0..8 {
            let ups = s.ws.valid_updates();
            let u = &ups[rng.gen_range(0..ups.len())];
            s = p.step(&s, u).map_err(|e| e.to_string())?;
            let got = !s.relation(&p, L2).unwrap().is_empty();
            ensure(
                got == pow2(s.ws.len()),
                format!("seed {seed}: L2={got} at |w|={}", s.ws.len()),
            )?;
        }
    }
    Ok("L2 true exactly at 1,2,4,8,16,32; 200 mutation traces agree".into())
}

fn inlining(all: &[Builtin]) -> Check {
    let mut checked = 0;
    for b in all {
        let flat = b
            .program
            .inlined()
            .map_err(|e| format!("{}: {e}", b.name))?;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let n = rng.gen_range(1..=6);
            let trace = fuzz(&FuzzConfig::new(rng.gen(), rng.gen_range(0..10), n, ab()));
            let s = b
                .program
                .run(&b.program.init(n).unwrap(), &trace)
                .map_err(|e| e.to_string())?;
            let ups = s.ws.valid_updates();
            let u = &ups[rng.gen_range(0..ups.len())];
            let s1 = b.program.step(&s, u).map_err(|e| e.to_string())?;
            let s2 = flat.step(&s, u).map_err(|e| e.to_string())?;
            for (name, r) in s1.relations(&b.program) {
                if s2.relation(&flat, name) != Some(r) {
                    return Err(format!(
                        "{}: {name} differs after {u} on {}",
                        b.name,
                        s.ws.layout()
                    ));
                }
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} random states, stratified and inlined steps identical"
    ))
}

fn report(k: usize, name: &str, r: &Check, t: Instant) -> bool {
    match r {
        Ok(msg) => println!("criterion {k} PASS  {name}: {msg}"),
        Err(msg) => println!("criterion {k} FAIL  {name}: {msg}"),
    }
    eprintln!("  ({:.1?})", t.elapsed());
    r.is_ok()
}

fn main() {
    let all = suite(&ab()).expect("built-in suite");
    let mut ok = true;
    // cheap checks first; results print as they finish
    let t = Instant::now();
    ok &= report(1, "worked-example goldens", &goldens(), t);
    let t = Instant::now();
    let c3 = report(3, "exhaustive small structures", &exhaustive(), t);
    let t = Instant::now();
    let c4 = report(4, "class discipline", &classes(&all), t);
    let t = Instant::now();
    ok &= report(5, "power-of-two length", &power_of_two(), t);
    let t = Instant::now();
    ok &= report(6, "stratified = inlined", &inlining(&all), t);
    let t = Instant::now();
    let c2 = report(2, "differential fuzzing", &fuzzing(&all), t);
    let derived: Check = if c2 && c3 && c4 {
        Ok("criteria 2, 3 and 4 pass".into())
    } else {
        Err("one of criteria 2-4 failed".into())
    };
    ok &= c2 && c3 && c4;
    report(7, "headline results via 2-4", &derived, Instant::now());
    if !ok {
        std::process::exit(1);
    }
}
