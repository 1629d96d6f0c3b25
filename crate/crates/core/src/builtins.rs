//! The fixed suite of built-in programs, each paired with the definitions it
//! is checked against and the fragment its rules must fall into.

use thiserror::Error;

use crate::base::base_program;
use crate::engine::{DynamicProgram, EngineError, RelationSpec};
use crate::formula::FragmentClass;
use crate::oracle::{defs, Definition};
use crate::patterns::{self, Kind, Pattern, PatternError};
use crate::regular::{
    compile_nfa, dfa_from_regex, parse_regex_formula, regular_program, DfaNames, RegexError,
};
use crate::relext::{self, with_base};
use crate::spanners::{self, AlgebraExpr, SpannerError};
use crate::splog::{self, SpLogError};
use crate::word::Alphabet;

#[derive(Debug, Error)]
pub enum BuiltinError {
    #[error("unknown built-in {0:?}")]
    Unknown(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Regex(#[from] RegexError),
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error(transparent)]
    SpLog(#[from] SpLogError),
    #[error(transparent)]
    Spanner(#[from] SpannerError),
}

pub struct Builtin {
    pub name: String,
    pub family: &'static str,
    pub program: DynamicProgram,
    pub defs: Vec<Definition>,
    /// The fragment the rules must classify into (exactly).
    pub class: FragmentClass,
}

pub const REGULAR_LANGUAGES: [&str; 3] = ["(ab)*", "a*b*", ".*aa.*"];
pub const REGULAR_SPANNERS: [&str; 2] = [".*x{ab}.*", "b*x{a+}.*"];
pub const PATTERNS: [(&str, Kind); 4] = [
    ("a<x>b<x>", Kind::NonErasing),
    ("a<x><x>b", Kind::NonErasing),
    ("a<x><x>b", Kind::Erasing),
    ("<x><y><x>", Kind::Erasing),
];
pub const SPLOG: [(&str, &str); 4] = [
    ("cube", "eq(W, <x><x><x>)"),
    (
        "constraint",
        "exists(p, exists(s, and(eq(W, <p><x><s>), constr(x, /ab*/))))",
    ),
    ("len", "and(eq(W, <x><y>), rel(R_len, x, y))"),
    (
        "neg",
        "exists(p, exists(s, and(eq(W, <p><x><s>), not(exists(y, eq(W, <y><x><x>))))))",
    ),
];

fn ext(alphabet: &Alphabet, name: &str, specs: Vec<RelationSpec>) -> Result<Builtin, BuiltinError> {
    let program = with_base(alphabet, specs, None)?;
    let mut d = defs::base();
    d.extend(
        defs::ext(alphabet)
            .into_iter()
            .filter(|d| program.relation_index(&d.name).is_some()),
    );
    Ok(Builtin {
        name: name.to_string(),
        family: "relations",
        program,
        defs: d,
        class: FragmentClass::UCQ,
    })
}

fn pattern_name(p: &str, kind: Kind) -> String {
    let k = match kind {
        Kind::NonErasing => "ne",
        Kind::Erasing => "e",
    };
    format!("pattern:{k}:{p}")
}

/// The whole suite over `alphabet`.
pub fn suite(alphabet: &Alphabet) -> Result<Vec<Builtin>, BuiltinError> {
    let mut out = vec![Builtin {
        name: "base".into(),
        family: "base",
        program: base_program(alphabet)?,
        defs: defs::base(),
        class: FragmentClass::UCQ,
    }];
    let a = alphabet;
    let z = a.symbols()[0];
    out.push(ext(a, "len", relext::len_rules(a))?);
    let mut pow = relext::len_rules(a);
    pow.extend(relext::pow2_rules(a));
    out.push(ext(a, "pow2", pow)?);
    out.push(ext(a, "scatt", relext::scatt_rules(a))?);
    out.push(ext(a, &format!("num_{z}"), relext::num_rules(a, z))?);
    out.push(ext(a, "perm", relext::perm_rules(a))?);
    out.push(ext(a, "rev", relext::rev_rules(a))?);
    let mut lt = relext::len_rules(a);
    lt.extend(relext::lt_rules(a));
    out.push(ext(a, "lt", lt)?);

    for re in REGULAR_LANGUAGES {
        let dfa = dfa_from_regex(re, a)?;
        let names = DfaNames::new("");
        let d = defs::dfa_runs(&dfa, &names);
        out.push(Builtin {
            name: format!("regular:{re}"),
            family: "regular",
            program: regular_program(&dfa)?,
            defs: d,
            class: FragmentClass::QF,
        });
    }

    for re in REGULAR_SPANNERS {
        out.push(regex_spanner(re, a)?);
    }

    for (p, kind) in PATTERNS {
        out.push(pattern(p, kind, a)?);
    }

    for (name, text) in SPLOG {
        out.push(splog_builtin(name, text, a)?);
    }
    Ok(out)
}

pub fn regex_spanner(text: &str, a: &Alphabet) -> Result<Builtin, BuiltinError> {
    let r = parse_regex_formula(text, a)?;
    let paths = spanners::to_vset_paths(&compile_nfa(&r, a))?;
    let program = spanners::regular_spanner_rules(&paths, &r.vars().into_iter().collect(), a)?;
    let mut d = vec![defs::spanner_relation(
        spanners::SPANNER,
        &AlgebraExpr::Rgx(r),
    )];
    for (pi, path) in paths.iter().enumerate() {
        for (m, dfa) in path.segments.iter().enumerate() {
            d.extend(defs::dfa_runs(dfa, &spanners::segment_names(pi, m)));
        }
    }
    Ok(Builtin {
        name: format!("spanner:{text}"),
        family: "spanner",
        program,
        defs: d,
        class: FragmentClass::QF,
    })
}

pub fn pattern(text: &str, kind: Kind, a: &Alphabet) -> Result<Builtin, BuiltinError> {
    let p = Pattern::parse(text, a)?;
    let (program, flag) = match kind {
        Kind::NonErasing => (patterns::nonerasing_rules(&p, a)?, "P"),
        Kind::Erasing => (patterns::erasing_rules(&p, a)?, "P_E"),
    };
    let mut d = defs::base();
    d.push(defs::pattern_flag(flag, &p, kind));
    Ok(Builtin {
        name: pattern_name(text, kind),
        family: "pattern",
        program,
        defs: d,
        class: FragmentClass::UCQ,
    })
}

pub fn splog_builtin(name: &str, text: &str, a: &Alphabet) -> Result<Builtin, BuiltinError> {
    let registry = splog::builtin_relations();
    let f = splog::parse_splog(text, a)?;
    let (program, class) = if f.has_negation() {
        (splog::compile_neg(&f, a, &registry)?, FragmentClass::FO)
    } else {
        (splog::compile(&f, a, &registry)?, FragmentClass::UCQ)
    };
    let mut d = defs::base();
    d.extend(
        defs::ext(a)
            .into_iter()
            .filter(|d| program.relation_index(&d.name).is_some()),
    );
    d.push(defs::splog_relation(splog::TOP, &f, &registry));
    Ok(Builtin {
        name: format!("splog:{name}"),
        family: "splog",
        program,
        defs: d,
        class,
    })
}

/// Look up one member of the suite, or a family (`base`, `relations`,
/// `regular`, `spanner`, `pattern`, `splog`, `all`).
pub fn select(alphabet: &Alphabet, key: &str) -> Result<Vec<Builtin>, BuiltinError> {
    let all = suite(alphabet)?;
    let picked: Vec<Builtin> = all
        .into_iter()
        .filter(|b| key == "all" || b.name == key || b.family == key)
        .collect();
    if picked.is_empty() {
        return Err(BuiltinError::Unknown(key.to_string()));
    }
    Ok(picked)
}
