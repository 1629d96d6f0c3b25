use std::fs;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dynspan::builtins::{self, Builtin};
use dynspan::engine::{AbstractUpdate, DynamicProgram, RelationSpec};
use dynspan::formula::not;
use dynspan::oracle::{defs, differential, run_campaign, Campaign, Definition};
use dynspan::patterns::{self, Kind, Pattern};
use dynspan::regular::{
    compile_nfa, dfa_from_regex, parse_regex, parse_regex_formula, regex_matches, regular_program,
};
use dynspan::relation::Relation;
use dynspan::relext::{self, with_base};
use dynspan::spanners::{self, AlgebraExpr};
use dynspan::splog;
use dynspan::word::{parse_trace, Alphabet, ConcreteUpdate, WordStructure};

#[derive(Parser)]
#[command(
    name = "dynspan",
    version,
    about = "Maintain spanner, pattern and string relations under single-symbol edits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a spec and write the program dump.
    Compile {
        #[command(flatten)]
        spec: SpecArgs,
        /// Write the dump here instead of stdout.
        #[arg(long)]
        out: Option<String>,
    },
    /// Run a trace and print the designated relation.
    Run {
        #[command(flatten)]
        src: ProgramArgs,
        #[arg(long)]
        n: usize,
        /// Trace file (`-` for stdin).
        #[arg(long)]
        trace: String,
        /// Print after every update, not just at the end.
        #[arg(long)]
        every: bool,
        /// Compare every step with the definitions.
        #[arg(long)]
        verify: bool,
    },
    /// Differential fuzzing of built-in programs.
    Fuzz {
        /// A built-in name or family (`all` for everything).
        #[arg(long, default_value = "all")]
        builtin: String,
        #[arg(long, env = "DYNSPAN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 12)]
        steps: usize,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value = "ab")]
        alphabet: String,
        /// Worker threads (0 = available parallelism).
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Negate one insertion rule first (to see a divergence report).
        #[arg(long)]
        corrupt: bool,
        /// JSON-lines report instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Static evaluation on one word, no dynamic program involved.
    Eval {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        word: String,
    },
    /// Print the dynamic class of a program.
    Classify {
        #[command(flatten)]
        src: ProgramArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SpecKind {
    /// Pattern such as `a<x><x>b` (membership flag).
    Pattern,
    /// Regular language.
    Regex,
    /// Regex formula with capture variables `x{...}`.
    Rgx,
    /// SpLog formula.
    Splog,
    /// Spanner algebra expression.
    Spanner,
    /// Named relation of the library (`base`, `R_len`, `P2`, ...).
    Relation,
}

#[derive(Args, Clone)]
struct SpecArgs {
    #[arg(long, value_enum)]
    kind: Option<SpecKind>,
    #[arg(long, default_value = "ab")]
    alphabet: String,
    /// Erasing pattern semantics.
    #[arg(long)]
    erasing: bool,
    /// Allow negation (SpLog).
    #[arg(long)]
    neg: bool,
    /// Pattern: maintain the relation over these variables instead of the flag.
    #[arg(long, value_delimiter = ',')]
    free: Option<Vec<String>>,
    /// Spanner: SpLog realization with free variables x_p, x_c per variable.
    #[arg(long)]
    realization: Option<String>,
    /// Read kind, alphabet, body and flags from a `key: value` file.
    #[arg(long)]
    spec_file: Option<String>,
    body: Option<String>,
}

#[derive(Args, Clone)]
struct ProgramArgs {
    /// A program dump written by `compile`.
    #[arg(long, conflicts_with_all = ["builtin", "kind"])]
    program: Option<String>,
    /// A member of the built-in suite (definitions are then available).
    #[arg(long, conflicts_with = "kind")]
    builtin: Option<String>,
    #[command(flatten)]
    spec: SpecArgs,
}

/// Parse and usage problems; exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<E: std::fmt::Display>(e: E) -> anyhow::Error {
    anyhow::Error::new(Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<u8> {
    match cmd {
        Cmd::Compile { spec, out } => {
            let c = compile(&spec.resolve()?)?;
            let text = c.program.dump();
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {path}"))?,
                None => print!("{text}"),
            }
            println!("class: {}", c.program.classify().dyn_label());
            Ok(0)
        }
        Cmd::Classify { src } => {
            let c = load(&src)?;
            println!("class: {}", c.program.classify().dyn_label());
            Ok(0)
        }
        Cmd::Run {
            src,
            n,
            trace,
            every,
            verify,
        } => {
            let c = load(&src)?;
            run(&c, n, &trace, every, verify)
        }
        Cmd::Eval { spec, word } => eval(&spec.resolve()?, &word),
        Cmd::Fuzz {
            builtin,
            seed,
            trials,
            steps,
            n,
            alphabet,
            jobs,
            corrupt,
            json,
        } => {
            let a = Alphabet::parse(&alphabet).map_err(usage)?;
            let picked = builtins::select(&a, &builtin).map_err(usage)?;
            let mut code = 0;
            for b in picked {
                let program = if corrupt {
                    corrupted(&b.program)?
                } else {
                    b.program.clone()
                };
                let c = Campaign {
                    seed,
                    trials,
                    steps,
                    n,
                    alphabet: a.clone(),
                    jobs,
                };
                let r = run_campaign(&program, &b.defs, &c)?;
                if r.first.is_none() {
                    println!("{}: ok {}/{}", b.name, r.passed, r.trials);
                } else {
                    code = 1;
                    println!("{}: FAIL {}/{}", b.name, r.passed, r.trials);
                }
                if let Some((s, rep)) = r.first {
                    println!("seed {s}");
                    println!("{}", if json { rep.to_json() } else { rep.to_text() });
                }
            }
            Ok(code)
        }
    }
}

/// A spec after merging flags with an optional spec file.
struct Spec {
    kind: SpecKind,
    alphabet: Alphabet,
    erasing: bool,
    neg: bool,
    free: Option<Vec<String>>,
    realization: Option<String>,
    body: String,
}

impl SpecArgs {
    fn resolve(&self) -> Result<Spec> {
        let mut kind = self.kind;
        let mut alphabet = self.alphabet.clone();
        let (mut erasing, mut neg) = (self.erasing, self.neg);
        let mut free = self.free.clone();
        let mut realization = self.realization.clone();
        let mut body = self.body.clone();
        if let Some(path) = &self.spec_file {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (k, v) = line
                    .split_once(':')
                    .ok_or_else(|| usage(format!("{path}:{}: expected key: value", i + 1)))?;
                let v = v.trim().to_string();
                match k.trim() {
                    "kind" => {
                        kind = Some(
                            SpecKind::from_str(&v, true)
                                .map_err(|e| usage(format!("{path}:{}: {e}", i + 1)))?,
                        )
                    }
                    "alphabet" => alphabet = v,
                    "body" => body = Some(v),
                    "erasing" => erasing = v == "true",
                    "neg" => neg = v == "true",
                    "free" => {
                        free = Some(
                            v.split(',')
                                .map(|s| s.trim().to_string())
                                .filter(|s| !s.is_empty())
                                .collect(),
                        )
                    }
                    "realization" => realization = Some(v),
                    other => bail!(usage(format!("{path}:{}: unknown key {other:?}", i + 1))),
                }
            }
        }
        Ok(Spec {
            kind: kind.ok_or_else(|| usage("missing --kind"))?,
            alphabet: Alphabet::parse(&alphabet).map_err(usage)?,
            erasing,
            neg,
            free,
            realization,
            body: body.ok_or_else(|| usage("missing spec body"))?,
        })
    }
}

struct Compiled {
    program: DynamicProgram,
    defs: Vec<Definition>,
}

fn from_builtin(b: Builtin) -> Compiled {
    Compiled {
        program: b.program,
        defs: b.defs,
    }
}

fn library(name: &str, a: &Alphabet) -> Result<Compiled> {
    let mut specs = Vec::new();
    match name {
        "base" => {}
        "R_len" => specs = relext::len_rules(a),
        "R_feq" => specs = relext::feq_rules(a),
        "R_rev" => specs = relext::rev_rules(a),
        "R_perm" => specs = relext::perm_rules(a),
        "R_scatt" => specs = relext::scatt_rules(a),
        "R_lt" => {
            specs = relext::len_rules(a);
            specs.extend(relext::lt_rules(a));
        }
        "P2" | "L2" => {
            specs = relext::len_rules(a);
            specs.extend(relext::pow2_rules(a));
        }
        other => match other
            .strip_prefix("R_num_")
            .and_then(|z| z.chars().next().filter(|_| z.chars().count() == 1))
        {
            Some(z) if a.contains(z) => specs = relext::num_rules(a, z),
            _ => bail!(usage(format!("unknown relation {other:?}"))),
        },
    }
    let program = with_base(a, specs, (name != "base").then_some(name))?;
    let mut d = defs::base();
    d.extend(
        defs::ext(a)
            .into_iter()
            .filter(|d| program.relation_index(&d.name).is_some()),
    );
    Ok(Compiled { program, defs: d })
}

fn compile(s: &Spec) -> Result<Compiled> {
    let a = &s.alphabet;
    Ok(match s.kind {
        SpecKind::Pattern => {
            let p = Pattern::parse(&s.body, a).map_err(usage)?;
            match &s.free {
                Some(free) => {
                    let program = patterns::relation_rules(&p, free, a).map_err(usage)?;
                    let mut d = defs::base();
                    d.push(defs::pattern_relation("R_pat", &p, free));
                    Compiled { program, defs: d }
                }
                None => {
                    let kind = if s.erasing {
                        Kind::Erasing
                    } else {
                        Kind::NonErasing
                    };
                    from_builtin(builtins::pattern(&s.body, kind, a).map_err(usage)?)
                }
            }
        }
        SpecKind::Regex => {
            let dfa = dfa_from_regex(&s.body, a).map_err(usage)?;
            let d = defs::dfa_runs(&dfa, &dynspan::regular::DfaNames::new(""));
            Compiled {
                program: regular_program(&dfa)?,
                defs: d,
            }
        }
        SpecKind::Rgx => from_builtin(builtins::regex_spanner(&s.body, a).map_err(usage)?),
        SpecKind::Splog => {
            let f = splog::parse_splog(&s.body, a).map_err(usage)?;
            if f.has_negation() && !s.neg {
                bail!(usage("formula uses not(...); pass --neg"));
            }
            from_builtin(builtins::splog_builtin("spec", &s.body, a).map_err(usage)?)
        }
        SpecKind::Spanner => {
            let e = spanners::parse_algebra(&s.body, a).map_err(usage)?;
            let d = vec![defs::spanner_relation(spanners::SPANNER, &e)];
            match (&e, &s.realization) {
                (_, Some(r)) => {
                    let f = splog::parse_splog(r, a).map_err(usage)?;
                    if f.has_negation() && !s.neg {
                        bail!(usage("realization uses not(...); pass --neg"));
                    }
                    let vars: Vec<String> = e.vars().into_iter().collect();
                    let program =
                        spanners::core_spanner_rules(&f, &vars, a, &splog::builtin_relations())
                            .map_err(usage)?;
                    Compiled { program, defs: d }
                }
                (AlgebraExpr::Rgx(r), None) => {
                    let paths = spanners::to_vset_paths(&compile_nfa(r, a)).map_err(usage)?;
                    let program = spanners::regular_spanner_rules(
                        &paths,
                        &r.vars().into_iter().collect(),
                        a,
                    )?;
                    Compiled { program, defs: d }
                }
                _ => bail!(usage(
                    "algebra expressions other than a single (rgx ...) need --realization"
                )),
            }
        }
        SpecKind::Relation => library(s.body.trim(), a)?,
    })
}

fn load(src: &ProgramArgs) -> Result<Compiled> {
    if let Some(path) = &src.program {
        let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
        let program =
            DynamicProgram::parse_dump(&text).map_err(|e| usage(format!("{path}: {e}")))?;
        return Ok(Compiled {
            program,
            defs: Vec::new(),
        });
    }
    if let Some(name) = &src.builtin {
        let a = Alphabet::parse(&src.spec.alphabet).map_err(usage)?;
        let b = builtins::select(&a, name).map_err(usage)?;
        if b.len() != 1 {
            bail!(usage(format!("{name:?} names a family; pick one member")));
        }
        return Ok(from_builtin(b.into_iter().next().expect("one")));
    }
    compile(&src.spec.resolve()?)
}

/// Updates with the line they came from.
fn read_trace(path: &str) -> Result<Vec<(usize, ConcreteUpdate)>> {
    let text = if path == "-" {
        std::io::read_to_string(std::io::stdin())?
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {path}"))?
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ups = parse_trace(line).map_err(|e| {
            usage(format!(
                "line {}: {}",
                i + 1,
                e.to_string().trim_start_matches("line 1: ")
            ))
        })?;
        out.extend(ups.into_iter().map(|u| (i + 1, u)));
    }
    Ok(out)
}

fn show(p: &DynamicProgram, s: &dynspan::engine::ProgramState) -> Vec<String> {
    let dollar = s.ws.dollar();
    match p.designated() {
        Some(d) => vec![format!(
            "{d}: {}",
            s.relation(p, d).expect("designated").render(dollar)
        )],
        None => s
            .relations(p)
            .map(|(name, r): (&str, &Relation)| format!("{name}: {}", r.render(dollar)))
            .collect(),
    }
}

fn run(c: &Compiled, n: usize, trace: &str, every: bool, verify: bool) -> Result<u8> {
    let p = &c.program;
    if verify && c.defs.is_empty() {
        bail!(usage(
            "--verify needs a spec or --builtin (a dump carries no definitions)"
        ));
    }
    let ups = read_trace(trace)?;
    let mut ws = WordStructure::new(n, p.alphabet().clone()).map_err(usage)?;
    for (line, u) in &ups {
        ws.validate(u)
            .map_err(|e| usage(format!("line {line}: {e}")))?;
        ws.apply_mut(u)?;
    }
    let mut state = p.init(n)?;
    if every {
        for l in show(p, &state) {
            println!("{l}");
        }
    }
    for (_, u) in &ups {
        state = p.step(&state, u)?;
        if every {
            for l in show(p, &state) {
                println!("{l}");
            }
        }
    }
    if !every {
        for l in show(p, &state) {
            println!("{l}");
        }
    }
    if verify {
        let only: Vec<ConcreteUpdate> = ups.into_iter().map(|(_, u)| u).collect();
        if let Some(rep) = differential(p, &c.defs, n, &only)? {
            println!("{}", rep.to_text());
            return Ok(1);
        }
        println!("verified {} steps", only.len());
    }
    Ok(0)
}

fn eval(s: &Spec, word: &str) -> Result<u8> {
    let a = &s.alphabet;
    if let Some(c) = word.chars().find(|c| !a.contains(*c)) {
        bail!(usage(format!("symbol {c:?} is not in the alphabet")));
    }
    match s.kind {
        SpecKind::Pattern => {
            let p = Pattern::parse(&s.body, a).map_err(usage)?;
            let kind = if s.erasing {
                Kind::Erasing
            } else {
                Kind::NonErasing
            };
            match patterns::membership_witness(&p, word, kind) {
                Some(sub) => {
                    let parts: Vec<String> = sub.iter().map(|(x, v)| format!("{x}={v}")).collect();
                    println!("member: true ({})", parts.join(", "));
                }
                None => println!("member: false"),
            }
        }
        SpecKind::Regex => {
            let r = parse_regex(&s.body, a).map_err(usage)?;
            println!("member: {}", regex_matches(&r, word));
        }
        SpecKind::Rgx | SpecKind::Spanner => {
            let e = match s.kind {
                SpecKind::Rgx => AlgebraExpr::Rgx(parse_regex_formula(&s.body, a).map_err(usage)?),
                _ => spanners::parse_algebra(&s.body, a).map_err(usage)?,
            };
            e.check(a).map_err(usage)?;
            let rel = spanners::eval_static(&e, word).map_err(usage)?;
            println!("tuples: {}", rel.len());
            for m in rel {
                let parts: Vec<String> = m.iter().map(|(x, sp)| format!("{x}={sp}")).collect();
                println!("{}", parts.join(" "));
            }
        }
        SpecKind::Splog => {
            let f = splog::parse_splog(&s.body, a).map_err(usage)?;
            let registry = splog::builtin_relations();
            splog::wellformed(&f, s.neg, &registry).map_err(usage)?;
            let ms = splog::models(&f, word, &registry);
            println!("{}", !ms.is_empty());
            for m in ms {
                let parts: Vec<String> = m.iter().map(|(x, v)| format!("{x}={v:?}")).collect();
                if !parts.is_empty() {
                    println!("{}", parts.join(" "));
                }
            }
        }
        SpecKind::Relation => bail!(usage("eval does not apply to library relations")),
    }
    Ok(0)
}

/// Negate the first insertion rule of the designated (or last) relation.
fn corrupted(p: &DynamicProgram) -> Result<DynamicProgram> {
    let mut specs: Vec<RelationSpec> = p.specs().to_vec();
    let idx = p
        .designated()
        .and_then(|d| specs.iter().position(|s| s.name == d))
        .unwrap_or(specs.len() - 1);
    let z = p.alphabet().symbols()[0];
    let body = specs[idx]
        .rules
        .get(&AbstractUpdate::Ins(z))
        .cloned()
        .ok_or_else(|| anyhow!("no insertion rule"))?;
    specs[idx].rules.insert(AbstractUpdate::Ins(z), not(body));
    Ok(DynamicProgram::new(
        p.alphabet().clone(),
        specs,
        p.designated(),
    )?)
}
