//! Extensional relations over domain nodes.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use rustc_hash::FxHashMap;

use crate::word::Node;

pub type Tuple = Vec<Node>;

const MASK_COLS: usize = 12;

fn mask_key(mask: u32, val: impl Fn(usize) -> Node) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut m = mask;
    while m != 0 {
        let c = m.trailing_zeros() as usize;
        h = (h ^ val(c) as u64)
            .wrapping_mul(0x0100_0000_01b3)
            .rotate_left(17);
        m &= m - 1;
    }
    h
}

/// A sorted, de-duplicated set of tuples with lazily built indexes, one per
/// set of bound columns.
pub struct Relation {
    arity: usize,
    rows: Vec<Tuple>,
    index: OnceLock<Vec<OnceLock<FxHashMap<u64, Vec<u32>>>>>,
}

impl Relation {
    pub fn empty(arity: usize) -> Self {
        Relation {
            arity,
            rows: Vec::new(),
            index: OnceLock::new(),
        }
    }

    /// 0-ary relation holding the empty tuple.
    pub fn unit() -> Self {
        Relation {
            arity: 0,
            rows: vec![Vec::new()],
            index: OnceLock::new(),
        }
    }

    pub fn from_tuples(arity: usize, tuples: impl IntoIterator<Item = Tuple>) -> Self {
        let mut rows: Vec<Tuple> = tuples.into_iter().collect();
        debug_assert!(rows.iter().all(|t| t.len() == arity));
        rows.sort_unstable();
        rows.dedup();
        Relation {
            arity,
            rows,
            index: OnceLock::new(),
        }
    }

    pub fn from_set(arity: usize, set: BTreeSet<Tuple>) -> Self {
        Relation {
            arity,
            rows: set.into_iter().collect(),
            index: OnceLock::new(),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Tuple] {
        &self.rows
    }

    pub fn contains(&self, t: &[Node]) -> bool {
        self.rows.binary_search_by(|r| r.as_slice().cmp(t)).is_ok()
    }

    /// Membership of the tuple whose column `c` is `val(c)`.
    pub fn contains_by(&self, val: impl Fn(usize) -> Node) -> bool {
        self.rows
            .binary_search_by(|r| {
                for (c, &x) in r.iter().enumerate() {
                    match x.cmp(&val(c)) {
                        std::cmp::Ordering::Equal => {}
                        o => return o,
                    }
                }
                std::cmp::Ordering::Equal
            })
            .is_ok()
    }

    pub fn to_set(&self) -> BTreeSet<Tuple> {
        self.rows.iter().cloned().collect()
    }

    /// Row ids that agree with `val` on the columns in `mask` (bit `c` for
    /// column `c`); `None` when no indexed column is in `mask`. Only the
    /// first `MASK_COLS` columns are indexed and keys are hashed, so callers
    /// must still compare the rows.
    pub fn matching(&self, mask: u32, val: impl Fn(usize) -> Node) -> Option<&[u32]> {
        let cols = self.arity.min(MASK_COLS);
        let mask = mask & ((1u32 << cols) - 1);
        if mask == 0 {
            return None;
        }
        let slots = self
            .index
            .get_or_init(|| (0..1usize << cols).map(|_| OnceLock::new()).collect());
        let idx = slots[mask as usize].get_or_init(|| {
            let mut m: FxHashMap<u64, Vec<u32>> = FxHashMap::default();
            for (r, t) in self.rows.iter().enumerate() {
                m.entry(mask_key(mask, |c| t[c]))
                    .or_default()
                    .push(r as u32);
            }
            m
        });
        Some(idx.get(&mask_key(mask, val)).map_or(&[], |v| v.as_slice()))
    }

    /// Render as `(t1,..,tk) ...` with `$` for `dollar`.
    pub fn render(&self, dollar: Node) -> String {
        let parts: Vec<String> = self.rows.iter().map(|t| render_tuple(t, dollar)).collect();
        parts.join(" ")
    }
}

pub fn render_tuple(t: &[Node], dollar: Node) -> String {
    let inner: Vec<String> = t
        .iter()
        .map(|&x| {
            if x == dollar {
                "$".to_string()
            } else {
                x.to_string()
            }
        })
        .collect();
    format!("({})", inner.join(","))
}

impl Clone for Relation {
    fn clone(&self) -> Self {
        Relation {
            arity: self.arity,
            rows: self.rows.clone(),
            index: OnceLock::new(),
        }
    }
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.arity == other.arity && self.rows == other.rows
    }
}

impl Eq for Relation {}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Relation/{}{:?}", self.arity, self.rows)
    }
}
