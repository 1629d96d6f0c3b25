//! Word structures: a fixed domain `1..=n+1` whose last node is `$`, with at
//! most one terminal symbol per node.

use std::fmt;

use thiserror::Error;

/// A domain element. Nodes are 1-based; `n + 1` is the constant `$`.
pub type Node = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WordError {
    #[error("domain size must be at least 1")]
    ZeroDomain,
    #[error("alphabet must be non-empty")]
    EmptyAlphabet,
    #[error("duplicate symbol {0:?} in alphabet")]
    DuplicateSymbol(char),
    #[error("symbol {0:?} is not in the alphabet")]
    UnknownSymbol(char),
    #[error("node {0} is outside the domain")]
    OutOfDomain(Node),
    #[error("updates may not target $")]
    DollarTarget,
    #[error("update at node {0} does not change the word")]
    NoChange(Node),
    #[error("node {0} carries no symbol")]
    Unlabeled(Node),
    #[error("bad interval [{0},{1}]")]
    BadInterval(Node, Node),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self, WordError> {
        let mut out: Vec<char> = Vec::new();
        for c in symbols {
            if out.contains(&c) {
                return Err(WordError::DuplicateSymbol(c));
            }
            out.push(c);
        }
        if out.is_empty() {
            return Err(WordError::EmptyAlphabet);
        }
        Ok(Alphabet { symbols: out })
    }

    /// Alphabet from the characters of a string, e.g. `"ab"`.
    pub fn parse(s: &str) -> Result<Self, WordError> {
        Self::new(s.chars().filter(|c| !c.is_whitespace() && *c != ','))
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn contains(&self, c: char) -> bool {
        self.symbols.contains(&c)
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.symbols {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConcreteUpdate {
    Ins(char, Node),
    Reset(Node),
}

impl ConcreteUpdate {
    pub fn node(&self) -> Node {
        match *self {
            ConcreteUpdate::Ins(_, i) | ConcreteUpdate::Reset(i) => i,
        }
    }
}

impl fmt::Display for ConcreteUpdate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConcreteUpdate::Ins(c, i) => write!(f, "ins {c} {i}"),
            ConcreteUpdate::Reset(i) => write!(f, "reset {i}"),
        }
    }
}

/// Parse a trace: `ins <sym> <node>` or `reset <node>`, separated by newlines
/// or `;`, with `#` comments.
pub fn parse_trace(text: &str) -> Result<Vec<ConcreteUpdate>, WordError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let code = raw.split('#').next().unwrap_or("");
        for content in code.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let toks: Vec<&str> = content.split_whitespace().collect();
            let perr = |msg: &str| WordError::Parse {
                line,
                msg: msg.to_string(),
            };
            let node = |s: &str| {
                s.parse::<Node>()
                    .map_err(|_| perr(&format!("bad node {s:?}")))
            };
            match toks.as_slice() {
                ["ins", sym, i] => {
                    let mut cs = sym.chars();
                    let c = cs.next().ok_or_else(|| perr("missing symbol"))?;
                    if cs.next().is_some() {
                        return Err(perr("symbols are single characters"));
                    }
                    out.push(ConcreteUpdate::Ins(c, node(i)?));
                }
                ["reset", i] => out.push(ConcreteUpdate::Reset(node(i)?)),
                _ => return Err(perr(&format!("cannot parse update {content:?}"))),
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WordStructure {
    n: usize,
    alphabet: Alphabet,
    // indexed by node; slot 0 unused
    labels: Vec<Option<char>>,
}

impl WordStructure {
    pub fn new(n: usize, alphabet: Alphabet) -> Result<Self, WordError> {
        if n == 0 {
            return Err(WordError::ZeroDomain);
        }
        Ok(WordStructure {
            n,
            alphabet,
            labels: vec![None; n + 2],
        })
    }

    /// Build from explicit `(node, symbol)` labels.
    pub fn from_labels(
        n: usize,
        alphabet: Alphabet,
        labels: &[(Node, char)],
    ) -> Result<Self, WordError> {
        let mut ws = Self::new(n, alphabet)?;
        for &(i, c) in labels {
            ws.check_target(i)?;
            if !ws.alphabet.contains(c) {
                return Err(WordError::UnknownSymbol(c));
            }
            ws.labels[i] = Some(c);
        }
        Ok(ws)
    }

    /// Layout string such as `"_ab_b__"`: one character per node, `_` for
    /// no symbol. The domain size is the string length.
    pub fn from_layout(layout: &str, alphabet: Alphabet) -> Result<Self, WordError> {
        let chars: Vec<char> = layout.chars().filter(|c| !c.is_whitespace()).collect();
        let labels: Vec<(Node, char)> = chars
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != '_')
            .map(|(i, c)| (i + 1, *c))
            .collect();
        Self::from_labels(chars.len(), alphabet, &labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dollar(&self) -> Node {
        self.n + 1
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn label(&self, i: Node) -> Option<char> {
        self.labels.get(i).copied().flatten()
    }

    pub fn is_labeled(&self, i: Node) -> bool {
        self.label(i).is_some()
    }

    /// Labels as a slice indexed by node (slot 0 and `$` are always `None`).
    pub fn label_slice(&self) -> &[Option<char>] {
        &self.labels
    }

    pub fn labeled_nodes(&self) -> Vec<Node> {
        (1..=self.n).filter(|&i| self.labels[i].is_some()).collect()
    }

    pub fn len(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn word(&self) -> String {
        self.labels.iter().flatten().collect()
    }

    pub fn subword(&self, i: Node, j: Node) -> Result<String, WordError> {
        if j > self.n + 1 || i == 0 {
            return Err(WordError::OutOfDomain(j.max(i)));
        }
        if i > j {
            return Err(WordError::BadInterval(i, j));
        }
        Ok(self.labels[i..=j].iter().flatten().collect())
    }

    pub fn position(&self, x: Node) -> Result<usize, WordError> {
        if x == 0 || x > self.n + 1 {
            return Err(WordError::OutOfDomain(x));
        }
        if self.labels[x].is_none() {
            return Err(WordError::Unlabeled(x));
        }
        Ok(self.labels[1..=x].iter().filter(|l| l.is_some()).count())
    }

    /// Node holding the symbol at 1-based word position `p`.
    pub fn node_at(&self, p: usize) -> Option<Node> {
        if p == 0 {
            return None;
        }
        self.labeled_nodes().get(p - 1).copied()
    }

    pub fn next(&self, x: Node, y: Node) -> bool {
        if !self.is_labeled(x) || !self.is_labeled(y) || x >= y {
            return false;
        }
        (x + 1..y).all(|k| self.labels[k].is_none())
    }

    fn check_target(&self, i: Node) -> Result<(), WordError> {
        if i == self.n + 1 {
            return Err(WordError::DollarTarget);
        }
        if i == 0 || i > self.n {
            return Err(WordError::OutOfDomain(i));
        }
        Ok(())
    }

    /// Check that `u` is a valid update for this structure.
    pub fn validate(&self, u: &ConcreteUpdate) -> Result<(), WordError> {
        let i = u.node();
        self.check_target(i)?;
        match *u {
            ConcreteUpdate::Ins(c, _) => {
                if !self.alphabet.contains(c) {
                    return Err(WordError::UnknownSymbol(c));
                }
                if self.labels[i] == Some(c) {
                    return Err(WordError::NoChange(i));
                }
            }
            ConcreteUpdate::Reset(_) => {
                if self.labels[i].is_none() {
                    return Err(WordError::NoChange(i));
                }
            }
        }
        Ok(())
    }

    pub fn apply_mut(&mut self, u: &ConcreteUpdate) -> Result<(), WordError> {
        self.validate(u)?;
        match *u {
            ConcreteUpdate::Ins(c, i) => self.labels[i] = Some(c),
            ConcreteUpdate::Reset(i) => self.labels[i] = None,
        }
        Ok(())
    }

    pub fn apply(&self, u: &ConcreteUpdate) -> Result<WordStructure, WordError> {
        let mut out = self.clone();
        out.apply_mut(u)?;
        Ok(out)
    }

    /// All updates that are valid on this structure.
    pub fn valid_updates(&self) -> Vec<ConcreteUpdate> {
        let mut out = Vec::new();
        for i in 1..=self.n {
            for &c in self.alphabet.symbols() {
                if self.labels[i] != Some(c) {
                    out.push(ConcreteUpdate::Ins(c, i));
                }
            }
            if self.labels[i].is_some() {
                out.push(ConcreteUpdate::Reset(i));
            }
        }
        out
    }

    /// Node name for dumps: `$` for `n+1`.
    pub fn node_name(&self, x: Node) -> String {
        if x == self.n + 1 {
            "$".to_string()
        } else {
            x.to_string()
        }
    }

    pub fn dump(&self) -> String {
        let labels: Vec<String> = (1..=self.n)
            .filter_map(|i| self.labels[i].map(|c| format!("{i}:{c}")))
            .collect();
        format!(
            "domain {}\nalphabet {}\nlabels {}\n",
            self.n,
            self.alphabet,
            labels.join(" ")
        )
    }

    pub fn parse_dump(text: &str) -> Result<WordStructure, WordError> {
        let mut n = None;
        let mut alphabet = None;
        let mut labels = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let perr = |msg: String| WordError::Parse { line, msg };
            let raw = raw.trim();
            if raw.is_empty() {
                continue;
            }
            let (key, rest) = raw.split_once(' ').unwrap_or((raw, ""));
            match key {
                "domain" => {
                    n = Some(
                        rest.trim()
                            .parse::<usize>()
                            .map_err(|e| perr(e.to_string()))?,
                    )
                }
                "alphabet" => alphabet = Some(Alphabet::parse(rest)?),
                "labels" => {
                    for tok in rest.split_whitespace() {
                        let (i, c) = tok
                            .split_once(':')
                            .ok_or_else(|| perr(format!("bad label {tok:?}")))?;
                        let i = i.parse::<Node>().map_err(|e| perr(e.to_string()))?;
                        let c = c
                            .chars()
                            .next()
                            .ok_or_else(|| perr("empty symbol".into()))?;
                        labels.push((i, c));
                    }
                }
                other => return Err(perr(format!("unknown key {other:?}"))),
            }
        }
        let n = n.ok_or(WordError::Parse {
            line: 1,
            msg: "missing domain".into(),
        })?;
        let alphabet = alphabet.ok_or(WordError::Parse {
            line: 2,
            msg: "missing alphabet".into(),
        })?;
        Self::from_labels(n, alphabet, &labels)
    }

    /// Layout string, inverse of [`WordStructure::from_layout`].
    pub fn layout(&self) -> String {
        (1..=self.n)
            .map(|i| self.labels[i].unwrap_or('_'))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ab() -> Alphabet {
        Alphabet::parse("ab").unwrap()
    }

    #[test]
    fn word_and_updates() {
        let ws = WordStructure::from_labels(5, ab(), &[(2, 'a'), (4, 'a'), (5, 'b')]).unwrap();
        assert_eq!(ws.word(), "aab");
        let ws = ws.apply(&ConcreteUpdate::Ins('b', 1)).unwrap();
        assert_eq!(ws.word(), "baab");
        let ws = ws.apply(&ConcreteUpdate::Reset(4)).unwrap();
        assert_eq!(ws.word(), "bab");
        assert_eq!(
            ws.apply(&ConcreteUpdate::Ins('a', 2)),
            Err(WordError::NoChange(2))
        );
        assert_eq!(
            ws.apply(&ConcreteUpdate::Reset(3)),
            Err(WordError::NoChange(3))
        );
        assert_eq!(
            ws.apply(&ConcreteUpdate::Reset(6)),
            Err(WordError::DollarTarget)
        );
    }

    #[test]
    fn empty_structures() {
        assert_eq!(WordStructure::new(0, ab()), Err(WordError::ZeroDomain));
        let ws = WordStructure::new(6, ab()).unwrap();
        assert_eq!(ws.dollar(), 7);
        assert_eq!(ws.word(), "");
    }

    #[test]
    fn subwords_positions_next() {
        let ws = WordStructure::from_layout("a__ba_b_ab", ab()).unwrap();
        assert_eq!(ws.subword(3, 5).unwrap(), "ba");
        assert_eq!(ws.subword(2, 2).unwrap(), "");
        assert!(ws.subword(5, 3).is_err());
        let ws = WordStructure::from_layout("_ab_b__", ab()).unwrap();
        assert_eq!(ws.position(5).unwrap(), 3);
        assert!(ws.position(8).is_err());
        assert!(ws.next(3, 5));
        assert!(!ws.next(2, 5));
        assert!(!ws.next(3, 3));
    }

    #[test]
    fn trace_parsing() {
        let t = parse_trace("# build\nins a 1\n\nreset 1 # gone\n").unwrap();
        assert_eq!(
            t,
            vec![ConcreteUpdate::Ins('a', 1), ConcreteUpdate::Reset(1)]
        );
        match parse_trace("ins a 1\nfoo") {
            Err(WordError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dump_round_trip() {
        let ws = WordStructure::from_layout("a__ba_b_ab", ab()).unwrap();
        assert_eq!(WordStructure::parse_dump(&ws.dump()).unwrap(), ws);
    }
}
