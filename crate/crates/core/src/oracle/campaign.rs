//! Many independent fuzz trials, run in parallel.

use rayon::prelude::*;

use super::{differential, fuzz, Definition, DivergenceReport, FuzzConfig};
use crate::engine::{DynamicProgram, EngineError};
use crate::word::Alphabet;

#[derive(Debug, Clone)]
pub struct Campaign {
    pub seed: u64,
    pub trials: usize,
    pub steps: usize,
    pub n: usize,
    pub alphabet: Alphabet,
    /// Worker threads; 0 means available parallelism.
    pub jobs: usize,
}

#[derive(Debug)]
pub struct CampaignResult {
    pub trials: usize,
    pub passed: usize,
    /// Seed and report of the divergence with the smallest seed.
    pub first: Option<(u64, DivergenceReport)>,
}

/// Trial `k` uses seed `seed + k`; the result does not depend on `jobs`.
pub fn run_campaign(
    p: &DynamicProgram,
    defs: &[Definition],
    c: &Campaign,
) -> Result<CampaignResult, EngineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(c.jobs)
        .build()
        .expect("thread pool");
    let results: Vec<Result<Option<DivergenceReport>, EngineError>> = pool.install(|| {
        (0..c.trials)
            .into_par_iter()
            .map(|k| {
                let cfg = FuzzConfig::new(
                    c.seed.wrapping_add(k as u64),
                    c.steps,
                    c.n,
                    c.alphabet.clone(),
                );
                differential(p, defs, c.n, &fuzz(&cfg))
            })
            .collect()
    });
    let mut passed = 0;
    let mut first = None;
    for (k, r) in results.into_iter().enumerate() {
        match r? {
            None => passed += 1,
            Some(rep) => {
                if first.is_none() {
                    first = Some((c.seed.wrapping_add(k as u64), rep));
                }
            }
        }
    }
    Ok(CampaignResult {
        trials: c.trials,
        passed,
        first,
    })
}
