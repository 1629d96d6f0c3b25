//! Seeded random traces of valid updates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::word::{Alphabet, ConcreteUpdate, WordStructure};

#[derive(Debug, Clone)]
pub struct FuzzConfig {
    pub seed: u64,
    pub steps: usize,
    pub n: usize,
    pub alphabet: Alphabet,
    /// Probability of an insertion when a reset would also be possible.
    pub ins_bias: f64,
}

impl FuzzConfig {
    pub fn new(seed: u64, steps: usize, n: usize, alphabet: Alphabet) -> Self {
        FuzzConfig {
            seed,
            steps,
            n,
            alphabet,
            ins_bias: 0.7,
        }
    }
}

/// A trace that is valid when applied in order to the empty structure.
pub fn fuzz(cfg: &FuzzConfig) -> Vec<ConcreteUpdate> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ws = WordStructure::new(cfg.n, cfg.alphabet.clone()).expect("n >= 1");
    let syms = cfg.alphabet.symbols();
    let mut out = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let labeled = ws.labeled_nodes();
        let u = if !labeled.is_empty() && !rng.gen_bool(cfg.ins_bias) {
            ConcreteUpdate::Reset(labeled[rng.gen_range(0..labeled.len())])
        } else {
            loop {
                let i = rng.gen_range(1..=cfg.n);
                let c = syms[rng.gen_range(0..syms.len())];
                if ws.label(i) != Some(c) {
                    break ConcreteUpdate::Ins(c, i);
                }
            }
        };
        ws.apply_mut(&u).expect("generated update is valid");
        out.push(u);
    }
    out
}

/// Per node (index 1..=n): how many insertions and resets touch it.
pub fn node_touch_counts(traces: &[Vec<ConcreteUpdate>], n: usize) -> Vec<(usize, usize)> {
    let mut counts = vec![(0, 0); n + 1];
    for u in traces.iter().flatten() {
        match u {
            ConcreteUpdate::Ins(_, i) => counts[*i].0 += 1,
            ConcreteUpdate::Reset(i) => counts[*i].1 += 1,
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let cfg = FuzzConfig::new(42, 30, 5, Alphabet::parse("ab").unwrap());
        let t = fuzz(&cfg);
        assert_eq!(t, fuzz(&cfg));
        let mut ws = WordStructure::new(5, cfg.alphabet.clone()).unwrap();
        for u in &t {
            ws.apply_mut(u).unwrap();
        }
    }
}
