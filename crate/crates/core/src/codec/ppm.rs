//! Byte-oriented PPM with escape method C and symbol exclusion.
//!
//! Every context of order `0..=max_order` keeps per-symbol counts. A symbol is
//! coded in the longest context that has seen it; each context passed on the
//! way down costs an escape whose frequency equals the number of distinct
//! (non-excluded) symbols there. Symbols already offered by a longer context
//! are excluded from shorter ones. The final fallback is a uniform order -1
//! model over the non-excluded bytes.
//!
//! The reported code length is the exact accumulated `-log2` probability of
//! every coding event plus a 32-bit length header; the range-coded stream
//! produced by [`Ppm::compress`] tracks that figure to within a few bytes.

use std::collections::HashMap;

use super::range::{BitCounter, RangeDecoder, RangeEncoder, SymbolSink};
use super::{CodeLength, CodeLengthModel, Codec};
use crate::error::{Error, Result};

pub const HEADER_BITS: f64 = 32.0;
pub const MAX_ORDER: usize = 7;

/// Counts in a context are halved once they sum past this.
const RESCALE_LIMIT: u32 = 1 << 15;

#[derive(Debug, Clone, Default)]
struct Context {
    /// (symbol, count), sorted by symbol.
    entries: Vec<(u8, u32)>,
    sum: u32,
}

impl Context {
    fn increment(&mut self, sym: u8) {
        match self.entries.binary_search_by_key(&sym, |e| e.0) {
            Ok(i) => self.entries[i].1 += 1,
            Err(i) => self.entries.insert(i, (sym, 1)),
        }
        self.sum += 1;
        if self.sum > RESCALE_LIMIT {
            self.sum = 0;
            for e in &mut self.entries {
                e.1 = e.1.div_ceil(2);
                self.sum += e.1;
            }
        }
    }
}

#[derive(Clone, Copy)]
struct Exclusion([u64; 4]);

impl Exclusion {
    fn new() -> Self {
        Self([0; 4])
    }
    #[inline]
    fn contains(&self, s: u8) -> bool {
        self.0[(s >> 6) as usize] >> (s & 63) & 1 == 1
    }
    #[inline]
    fn insert(&mut self, s: u8) {
        self.0[(s >> 6) as usize] |= 1 << (s & 63);
    }
    fn len(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }
}

trait ContextTable {
    fn lookup(&self, key: u64) -> Option<&Context>;
    fn increment(&mut self, key: u64, sym: u8);
}

impl ContextTable for HashMap<u64, Context> {
    fn lookup(&self, key: u64) -> Option<&Context> {
        self.get(&key)
    }
    fn increment(&mut self, key: u64, sym: u8) {
        self.entry(key).or_default().increment(sym);
    }
}

/// Copy-on-write view over a frozen table; lets many suffixes be scored
/// against one shared prefix model.
struct Overlay<'a> {
    base: &'a HashMap<u64, Context>,
    delta: HashMap<u64, Context>,
}

impl ContextTable for Overlay<'_> {
    fn lookup(&self, key: u64) -> Option<&Context> {
        self.delta.get(&key).or_else(|| self.base.get(&key))
    }
    fn increment(&mut self, key: u64, sym: u8) {
        let base = self.base;
        self.delta
            .entry(key)
            .or_insert_with(|| base.get(&key).cloned().unwrap_or_default())
            .increment(sym);
    }
}

fn context_key(window: &[u8], order: usize) -> u64 {
    let tail = &window[window.len() - order..];
    let packed = tail.iter().fold(0u64, |k, &b| (k << 8) | u64::from(b));
    packed | (order as u64) << 56
}

/// Codes `sym` given the trailing `window` bytes, then updates every context.
fn code_symbol<T: ContextTable, S: SymbolSink>(
    table: &mut T,
    window: &[u8],
    max_order: usize,
    sym: u8,
    sink: &mut S,
) {
    let top = max_order.min(window.len());
    let mut excluded = Exclusion::new();
    let mut coded = false;
    for order in (0..=top).rev() {
        let Some(ctx) = table.lookup(context_key(window, order)) else {
            continue;
        };
        let mut cum = 0u32;
        let mut hit = None;
        let mut sum = 0u32;
        let mut distinct = 0u32;
        for &(s, c) in &ctx.entries {
            if excluded.contains(s) {
                continue;
            }
            if s == sym {
                hit = Some((cum, c));
            }
            if hit.is_none() {
                cum += c;
            }
            sum += c;
            distinct += 1;
        }
        if distinct == 0 {
            continue;
        }
        let total = sum + distinct;
        if let Some((cum, freq)) = hit {
            sink.code(cum, freq, total);
            coded = true;
            break;
        }
        sink.code(sum, distinct, total);
        for &(s, _) in &ctx.entries {
            excluded.insert(s);
        }
    }
    if !coded {
        let rank = (0..sym).filter(|&s| !excluded.contains(s)).count() as u32;
        sink.code(rank, 1, 256 - excluded.len());
    }
    for order in 0..=top {
        table.increment(context_key(window, order), sym);
    }
}

fn decode_symbol<T: ContextTable>(
    table: &mut T,
    window: &[u8],
    max_order: usize,
    dec: &mut RangeDecoder<'_>,
) -> Result<u8> {
    let top = max_order.min(window.len());
    let mut excluded = Exclusion::new();
    let mut found = None;
    for order in (0..=top).rev() {
        let Some(ctx) = table.lookup(context_key(window, order)) else {
            continue;
        };
        let live: Vec<(u8, u32)> = ctx
            .entries
            .iter()
            .copied()
            .filter(|&(s, _)| !excluded.contains(s))
            .collect();
        if live.is_empty() {
            continue;
        }
        let sum: u32 = live.iter().map(|e| e.1).sum();
        let distinct = live.len() as u32;
        let target = dec.target(sum + distinct)?;
        if target < sum {
            let mut cum = 0;
            for (s, c) in live {
                if target < cum + c {
                    dec.consume(cum, c);
                    found = Some(s);
                    break;
                }
                cum += c;
            }
            break;
        }
        dec.consume(sum, distinct);
        for &(s, _) in &ctx.entries {
            excluded.insert(s);
        }
    }
    let sym = match found {
        Some(s) => s,
        None => {
            let total = 256 - excluded.len();
            let target = dec.target(total)?;
            let sym = (0..=255u8)
                .filter(|&s| !excluded.contains(s))
                .nth(target as usize)
                .ok_or_else(|| Error::Decode("order -1 target out of range".into()))?;
            dec.consume(target, 1);
            sym
        }
    };
    for order in 0..=top {
        table.increment(context_key(window, order), sym);
    }
    Ok(sym)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ppm {
    order: usize,
}

impl Default for Ppm {
    fn default() -> Self {
        Self { order: 4 }
    }
}

impl Ppm {
    pub fn new(order: usize) -> Result<Self> {
        if order > MAX_ORDER {
            return Err(Error::Config(format!(
                "PPM order {order} exceeds maximum {MAX_ORDER}"
            )));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Runs the model over `input`, returning the trained state.
    pub fn train(&self, input: &[u8]) -> PpmState {
        let mut table = HashMap::new();
        let mut counter = BitCounter::starting_at(HEADER_BITS);
        for i in 0..input.len() {
            code_symbol(&mut table, &input[..i], self.order, input[i], &mut counter);
        }
        let keep = input.len().saturating_sub(self.order);
        PpmState {
            order: self.order,
            table,
            window: input[keep..].to_vec(),
            bits: counter.bits,
        }
    }
}

/// Model state after consuming a prefix.
#[derive(Debug, Clone)]
pub struct PpmState {
    order: usize,
    table: HashMap<u64, Context>,
    window: Vec<u8>,
    bits: f64,
}

impl PpmState {
    /// Code length (header included) of the consumed prefix.
    pub fn bits(&self) -> f64 {
        self.bits
    }

    /// Code length of prefix‖suffix without disturbing this state.
    pub fn extended_bits(&self, suffix: &[u8]) -> f64 {
        let mut overlay = Overlay {
            base: &self.table,
            delta: HashMap::new(),
        };
        let mut window = self.window.clone();
        let mut counter = BitCounter::starting_at(self.bits);
        for &b in suffix {
            code_symbol(&mut overlay, &window, self.order, b, &mut counter);
            window.push(b);
            if window.len() > self.order {
                window.remove(0);
            }
        }
        counter.bits
    }

    /// Coding probability of every byte value as the next symbol.
    pub fn next_byte_distribution(&self) -> [f64; 256] {
        let mut out = [0.0; 256];
        let top = self.order.min(self.window.len());
        let mut excluded = Exclusion::new();
        let mut carry = 1.0;
        for order in (0..=top).rev() {
            let Some(ctx) = self.table.get(&context_key(&self.window, order)) else {
                continue;
            };
            let live: Vec<(u8, u32)> = ctx
                .entries
                .iter()
                .copied()
                .filter(|&(s, _)| !excluded.contains(s))
                .collect();
            if live.is_empty() {
                continue;
            }
            let sum: u32 = live.iter().map(|e| e.1).sum();
            let total = f64::from(sum + live.len() as u32);
            for &(s, c) in &live {
                out[s as usize] = carry * f64::from(c) / total;
                excluded.insert(s);
            }
            carry *= live.len() as f64 / total;
        }
        let remaining = 256 - excluded.len();
        for s in 0..=255u8 {
            if !excluded.contains(s) {
                out[s as usize] = carry / f64::from(remaining);
            }
        }
        out
    }

    /// Per-context check: symbol frequencies plus escape sum to the total.
    #[cfg(test)]
    fn context_masses(&self) -> Vec<f64> {
        self.table
            .values()
            .map(|ctx| {
                let total = f64::from(ctx.sum + ctx.entries.len() as u32);
                ctx.entries
                    .iter()
                    .map(|e| f64::from(e.1) / total)
                    .sum::<f64>()
                    + ctx.entries.len() as f64 / total
            })
            .collect()
    }
}

impl CodeLengthModel for Ppm {
    fn id(&self) -> &str {
        "ppm"
    }

    fn code_length(&self, input: &[u8]) -> CodeLength {
        CodeLength::from_bits(self.train(input).bits())
    }

    fn suffix_code_lengths(&self, prefix: &[u8], suffixes: &[Vec<u8>]) -> Vec<CodeLength> {
        use rayon::prelude::*;
        let state = self.train(prefix);
        suffixes
            .par_iter()
            .map(|s| CodeLength::from_bits(state.extended_bits(s)))
            .collect()
    }
}

impl Codec for Ppm {
    fn compress(&self, input: &[u8]) -> Vec<u8> {
        let len = u32::try_from(input.len()).expect("input longer than 4 GiB");
        let mut enc = RangeEncoder::with_prefix(len.to_le_bytes().to_vec());
        let mut table = HashMap::new();
        for i in 0..input.len() {
            code_symbol(&mut table, &input[..i], self.order, input[i], &mut enc);
        }
        enc.finish()
    }

    fn decompress(&self, data: &[u8]) -> Result<Vec<u8>> {
        let (head, body) = data
            .split_first_chunk::<4>()
            .ok_or_else(|| Error::Decode("missing PPM length header".into()))?;
        let len = u32::from_le_bytes(*head) as usize;
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return Ok(out);
        }
        let mut dec = RangeDecoder::new(body)?;
        let mut table = HashMap::new();
        for _ in 0..len {
            let sym = decode_symbol(&mut table, &out, self.order, &mut dec)?;
            out.push(sym);
            if dec.overran() {
                return Err(Error::Decode("PPM stream truncated".into()));
            }
        }
        Ok(out)
    }
}
