//! Re-Pair grammar compression.
//!
//! The most frequent adjacent pair (non-overlapping occurrences, ties broken
//! by first occurrence) is repeatedly replaced by a fresh nonterminal until no
//! pair repeats. Rules and the final sequence are then coded with an adaptive
//! order-0 model over the terminal-plus-nonterminal alphabet.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::range::{BitCounter, RangeDecoder, RangeEncoder, SymbolSink, MAX_TOTAL};
use super::{CodeLength, CodeLengthModel, Codec};
use crate::error::{Error, Result};

/// Input length, rule count and sequence length, 32 bits each.
pub const HEADER_BITS: f64 = 96.0;
const FIRST_NONTERMINAL: u32 = 256;
/// Keeps the adaptive alphabet well inside the coder's frequency budget.
const MAX_RULES: usize = (MAX_TOTAL as usize / 2) - FIRST_NONTERMINAL as usize;

/// Straight-line grammar. Rule `k` defines nonterminal `256 + k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    pub rules: Vec<(u32, u32)>,
    pub sequence: Vec<u32>,
}

impl Grammar {
    pub fn build(input: &[u8]) -> Self {
        let mut seq: Vec<u32> = input.iter().map(|&b| u32::from(b)).collect();
        let mut rules = Vec::new();
        while rules.len() < MAX_RULES {
            let Some(pair) = most_frequent_pair(&seq) else {
                break;
            };
            let id = FIRST_NONTERMINAL + rules.len() as u32;
            rules.push(pair);
            seq = replace_pair(&seq, pair, id);
        }
        Self {
            rules,
            sequence: seq,
        }
    }

    pub fn alphabet_size(&self) -> usize {
        FIRST_NONTERMINAL as usize + self.rules.len()
    }

    /// Every right-hand side refers only to terminals or earlier rules.
    pub fn is_acyclic(&self) -> bool {
        self.rules.iter().enumerate().all(|(k, &(a, b))| {
            let id = FIRST_NONTERMINAL + k as u32;
            a < id && b < id
        })
    }

    pub fn expand(&self) -> Result<Vec<u8>> {
        if !self.is_acyclic() {
            return Err(Error::Decode("grammar contains a forward reference".into()));
        }
        let limit = self.alphabet_size() as u32;
        // Expansions of earlier rules are memoized; acyclicity makes this a
        // single forward pass.
        let mut expansions: Vec<Vec<u8>> = Vec::with_capacity(self.rules.len());
        let piece = |s: u32, exp: &Vec<Vec<u8>>| -> Vec<u8> {
            if s < FIRST_NONTERMINAL {
                vec![s as u8]
            } else {
                exp[(s - FIRST_NONTERMINAL) as usize].clone()
            }
        };
        for &(a, b) in &self.rules {
            let mut e = piece(a, &expansions);
            e.extend(piece(b, &expansions));
            expansions.push(e);
        }
        let mut out = Vec::new();
        for &s in &self.sequence {
            if s >= limit {
                return Err(Error::Decode(format!("undefined symbol {s}")));
            }
            out.extend(piece(s, &expansions));
        }
        Ok(out)
    }

    /// Text form, one `rule -> symbol symbol` line per rule followed by the
    /// start sequence.
    pub fn dump(&self) -> String {
        let name = |s: u32| {
            if s < FIRST_NONTERMINAL {
                format!("{s}")
            } else {
                format!("R{s}")
            }
        };
        let mut out = String::new();
        for (k, &(a, b)) in self.rules.iter().enumerate() {
            let _ = writeln!(
                out,
                "R{} -> {} {}",
                FIRST_NONTERMINAL as usize + k,
                name(a),
                name(b)
            );
        }
        let body: Vec<String> = self.sequence.iter().map(|&s| name(s)).collect();
        let _ = writeln!(out, "S -> {}", body.join(" "));
        out
    }

    fn stream(&self) -> impl Iterator<Item = u32> + '_ {
        self.rules
            .iter()
            .flat_map(|&(a, b)| [a, b])
            .chain(self.sequence.iter().copied())
    }
}

fn most_frequent_pair(seq: &[u32]) -> Option<(u32, u32)> {
    // pair -> (count, first position, last counted position)
    let mut stats: HashMap<(u32, u32), (u32, usize, usize)> = HashMap::new();
    for i in 0..seq.len().saturating_sub(1) {
        let pair = (seq[i], seq[i + 1]);
        match stats.get_mut(&pair) {
            Some(entry) => {
                if pair.0 == pair.1 && entry.2 + 1 == i {
                    continue;
                }
                entry.0 += 1;
                entry.2 = i;
            }
            None => {
                stats.insert(pair, (1, i, i));
            }
        }
    }
    stats
        .into_iter()
        .filter(|(_, (count, _, _))| *count >= 2)
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .map(|(pair, _)| pair)
}

fn replace_pair(seq: &[u32], pair: (u32, u32), id: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if i + 1 < seq.len() && (seq[i], seq[i + 1]) == pair {
            out.push(id);
            i += 2;
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

/// Adaptive frequency table backed by a Fenwick tree.
struct FrequencyTable {
    freq: Vec<u32>,
    tree: Vec<u32>,
    total: u32,
}

impl FrequencyTable {
    const INCREMENT: u32 = 8;

    fn uniform(size: usize) -> Self {
        let mut t = Self {
            freq: vec![1; size],
            tree: vec![0; size + 1],
            total: 0,
        };
        t.rebuild();
        t
    }

    fn rebuild(&mut self) {
        self.tree.iter_mut().for_each(|v| *v = 0);
        self.total = 0;
        for i in 0..self.freq.len() {
            let f = self.freq[i];
            self.total += f;
            let mut j = i + 1;
            while j < self.tree.len() {
                self.tree[j] += f;
                j += j & j.wrapping_neg();
            }
        }
    }

    fn cumulative(&self, sym: usize) -> u32 {
        let mut sum = 0;
        let mut j = sym;
        while j > 0 {
            sum += self.tree[j];
            j &= j - 1;
        }
        sum
    }

    /// Symbol whose interval contains `target`.
    fn find(&self, target: u32) -> usize {
        let mut pos = 0;
        let mut rem = target;
        let mut step = self.tree.len().next_power_of_two() >> 1;
        while step > 0 {
            let next = pos + step;
            if next < self.tree.len() && self.tree[next] <= rem {
                pos = next;
                rem -= self.tree[next];
            }
            step >>= 1;
        }
        pos
    }

    fn code<S: SymbolSink>(&mut self, sym: usize, sink: &mut S) {
        sink.code(self.cumulative(sym), self.freq[sym], self.total);
        self.update(sym);
    }

    fn update(&mut self, sym: usize) {
        self.freq[sym] += Self::INCREMENT;
        self.total += Self::INCREMENT;
        if self.total > MAX_TOTAL {
            for f in &mut self.freq {
                *f = f.div_ceil(2);
            }
            self.rebuild();
        } else {
            let mut j = sym + 1;
            while j < self.tree.len() {
                self.tree[j] += Self::INCREMENT;
                j += j & j.wrapping_neg();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RePair;

impl CodeLengthModel for RePair {
    fn id(&self) -> &str {
        "repair"
    }

    fn code_length(&self, input: &[u8]) -> CodeLength {
        let grammar = Grammar::build(input);
        let mut model = FrequencyTable::uniform(grammar.alphabet_size());
        let mut counter = BitCounter::starting_at(HEADER_BITS);
        for s in grammar.stream() {
            model.code(s as usize, &mut counter);
        }
        CodeLength::from_bits(counter.bits)
    }
}

impl Codec for RePair {
    fn compress(&self, input: &[u8]) -> Vec<u8> {
        let grammar = Grammar::build(input);
        let mut header = Vec::with_capacity(12);
        for n in [input.len(), grammar.rules.len(), grammar.sequence.len()] {
            let n = u32::try_from(n).expect("input longer than 4 GiB");
            header.extend_from_slice(&n.to_le_bytes());
        }
        let mut enc = RangeEncoder::with_prefix(header);
        let mut model = FrequencyTable::uniform(grammar.alphabet_size());
        for s in grammar.stream() {
            model.code(s as usize, &mut enc);
        }
        enc.finish()
    }

    fn decompress(&self, data: &[u8]) -> Result<Vec<u8>> {
        if data.len() < 12 {
            return Err(Error::Decode("missing Re-Pair header".into()));
        }
        let word = |i: usize| u32::from_le_bytes(data[i..i + 4].try_into().unwrap()) as usize;
        let (len, rule_count, seq_len) = (word(0), word(4), word(8));
        if len == 0 {
            return Ok(Vec::new());
        }
        if rule_count > MAX_RULES || seq_len > len {
            return Err(Error::Decode("implausible Re-Pair header".into()));
        }
        let mut dec = RangeDecoder::new(&data[12..])?;
        let mut model = FrequencyTable::uniform(FIRST_NONTERMINAL as usize + rule_count);
        let mut next = || -> Result<u32> {
            let target = dec.target(model.total)?;
            let sym = model.find(target);
            dec.consume(model.cumulative(sym), model.freq[sym]);
            model.update(sym);
            Ok(sym as u32)
        };
        let mut rules = Vec::with_capacity(rule_count);
        for _ in 0..rule_count {
            rules.push((next()?, next()?));
        }
        let sequence = (0..seq_len).map(|_| next()).collect::<Result<Vec<_>>>()?;
        let out = Grammar { rules, sequence }.expand()?;
        if out.len() != len {
            return Err(Error::Decode(format!(
                "expanded {} bytes, header says {len}",
                out.len()
            )));
        }
        Ok(out)
    }
}
