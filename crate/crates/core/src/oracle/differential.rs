//! Step-by-step comparison of a dynamic program with definitions.

use serde_json::json;

use crate::engine::{DynamicProgram, EngineError};
use crate::relation::{render_tuple, Tuple};
use crate::word::{ConcreteUpdate, Node, WordStructure};

use super::{diff, Definition};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DivergenceReport {
    pub n: usize,
    pub trace: Vec<ConcreteUpdate>,
    /// Number of updates applied when the mismatch showed (0 = after INIT).
    pub step: usize,
    pub rel: String,
    pub extra: Vec<Tuple>,
    pub missing: Vec<Tuple>,
}

impl DivergenceReport {
    fn dollar(&self) -> Node {
        self.n + 1
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("DIVERGE step={} rel={}\n", self.step, self.rel);
        for t in &self.extra {
            s += &format!("+{}\n", render_tuple(t, self.dollar()));
        }
        for t in &self.missing {
            s += &format!("-{}\n", render_tuple(t, self.dollar()));
        }
        s += "trace:\n";
        for u in &self.trace {
            s += &format!("  {u}\n");
        }
        s
    }

    pub fn to_json(&self) -> String {
        let d = self.dollar();
        let tuples = |ts: &[Tuple]| ts.iter().map(|t| render_tuple(t, d)).collect::<Vec<_>>();
        json!({
            "step": self.step,
            "rel": self.rel,
            "extra": tuples(&self.extra),
            "missing": tuples(&self.missing),
            "trace": self.trace.iter().map(|u| u.to_string()).collect::<Vec<_>>(),
        })
        .to_string()
    }
}

/// Run `trace` from INIT and return the first mismatch, without shrinking.
pub fn replay(
    p: &DynamicProgram,
    defs: &[Definition],
    n: usize,
    trace: &[ConcreteUpdate],
) -> Result<Option<DivergenceReport>, EngineError> {
    let mut state = p.init(n)?;
    let check = |state: &crate::engine::ProgramState, step: usize| -> Option<DivergenceReport> {
        for d in defs {
            let Some(got) = state.relation(p, &d.name) else {
                continue;
            };
            let want = d.recompute(&state.ws);
            if *got != want {
                let (extra, missing) = diff(got, &want);
                return Some(DivergenceReport {
                    n,
                    trace: trace.to_vec(),
                    step,
                    rel: d.name.clone(),
                    extra,
                    missing,
                });
            }
        }
        None
    };
    if let Some(r) = check(&state, 0) {
        return Ok(Some(r));
    }
    for (k, u) in trace.iter().enumerate() {
        state = p.step(&state, u).map_err(|err| EngineError::Trace {
            index: k,
            update: *u,
            err: Box::new(err),
        })?;
        if let Some(r) = check(&state, k + 1) {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

fn is_valid(n: usize, alphabet: &crate::word::Alphabet, trace: &[ConcreteUpdate]) -> bool {
    let Ok(mut ws) = WordStructure::new(n, alphabet.clone()) else {
        return false;
    };
    trace.iter().all(|u| ws.apply_mut(u).is_ok())
}

/// Greedily drop single updates while the trace stays valid and still
/// diverges on the same relation.
pub fn shrink(
    p: &DynamicProgram,
    defs: &[Definition],
    report: DivergenceReport,
) -> DivergenceReport {
    let mut best = report;
    best.trace.truncate(best.step);
    let mut i = 0;
    while i < best.trace.len() {
        let mut cand = best.trace.clone();
        cand.remove(i);
        if is_valid(best.n, p.alphabet(), &cand) {
            if let Ok(Some(r)) = replay(p, defs, best.n, &cand) {
                if r.rel == best.rel {
                    best = r;
                    best.trace.truncate(best.step);
                    continue;
                }
            }
        }
        i += 1;
    }
    best
}

/// First divergence of `p` from `defs` along `trace`, minimised.
pub fn differential(
    p: &DynamicProgram,
    defs: &[Definition],
    n: usize,
    trace: &[ConcreteUpdate],
) -> Result<Option<DivergenceReport>, EngineError> {
    Ok(replay(p, defs, n, trace)?.map(|r| shrink(p, defs, r)))
}
