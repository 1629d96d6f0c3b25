//! Definitional recomputation of maintained relations, differential checking
//! against dynamic programs, and random trace generation.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::relation::{Relation, Tuple};
use crate::word::WordStructure;

mod campaign;
pub mod defs;
mod differential;
mod fuzz;

pub use campaign::{run_campaign, Campaign, CampaignResult};
pub use differential::{differential, replay, shrink, DivergenceReport};
pub use fuzz::{fuzz, node_touch_counts, FuzzConfig};

type ComputeFn = dyn Fn(&WordStructure) -> Relation + Send + Sync;

/// A relation given by its definition: a pure function of the word structure.
#[derive(Clone)]
pub struct Definition {
    pub name: String,
    pub arity: usize,
    compute: Arc<ComputeFn>,
}

impl Definition {
    pub fn new(
        name: impl Into<String>,
        arity: usize,
        compute: impl Fn(&WordStructure) -> Relation + Send + Sync + 'static,
    ) -> Self {
        Definition {
            name: name.into(),
            arity,
            compute: Arc::new(compute),
        }
    }

    /// Same definition under another relation name.
    pub fn renamed(&self, name: impl Into<String>) -> Self {
        Definition {
            name: name.into(),
            arity: self.arity,
            compute: self.compute.clone(),
        }
    }

    pub fn recompute(&self, ws: &WordStructure) -> Relation {
        (self.compute)(ws)
    }
}

impl fmt::Debug for Definition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Definition({}/{})", self.name, self.arity)
    }
}

/// Tuples in `maintained` but not in `expected`, and the other way round.
pub fn diff(maintained: &Relation, expected: &Relation) -> (Vec<Tuple>, Vec<Tuple>) {
    let a: BTreeSet<&Tuple> = maintained.rows().iter().collect();
    let b: BTreeSet<&Tuple> = expected.rows().iter().collect();
    let extra = a.difference(&b).map(|t| (*t).clone()).collect();
    let missing = b.difference(&a).map(|t| (*t).clone()).collect();
    (extra, missing)
}

/// Every word structure with domain size `n` over `alphabet`.
pub fn all_structures(n: usize, alphabet: &crate::word::Alphabet) -> Vec<WordStructure> {
    let k = alphabet.len() + 1;
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut labels = Vec::new();
            for i in 1..=n {
                let d = code % k;
                code /= k;
                if d > 0 {
                    labels.push((i, alphabet.symbols()[d - 1]));
                }
            }
            WordStructure::from_labels(n, alphabet.clone(), &labels).expect("valid labels")
        })
        .collect()
}

/// Compare every definition against `p` after each valid single update from
/// every structure of size `n`, starting from definitional states. Returns
/// a description of the first mismatch.
pub fn exhaustive_single_updates(
    p: &crate::engine::DynamicProgram,
    defs: &[Definition],
    n: usize,
) -> Result<(), String> {
    use std::collections::HashMap;
    for ws in all_structures(n, p.alphabet()) {
        let rels: HashMap<String, Relation> = defs
            .iter()
            .map(|d| (d.name.clone(), d.recompute(&ws)))
            .collect();
        let state = p.state_from(ws.clone(), &rels).map_err(|e| e.to_string())?;
        for u in ws.valid_updates() {
            let next = p.step(&state, &u).map_err(|e| e.to_string())?;
            for d in defs {
                let got = next.relation(p, &d.name).expect("defined relation");
                let want = d.recompute(&next.ws);
                if *got != want {
                    let (extra, missing) = diff(got, &want);
                    return Err(format!(
                        "{} after {u} on {}: extra {:?} missing {:?}",
                        d.name,
                        ws.layout(),
                        extra,
                        missing
                    ));
                }
            }
        }
    }
    Ok(())
}
