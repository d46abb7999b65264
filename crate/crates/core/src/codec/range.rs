//! Carry-propagating range coder over cumulative frequency intervals.
//!
//! The coder follows the LZMA layout: a 33-bit `low`, a 32-bit `range`, and a
//! cached byte plus a run of pending `0xFF` bytes that absorb carries. Totals
//! handed to `encode` must not exceed [`MAX_TOTAL`].

use crate::error::{Error, Result};

pub const MAX_TOTAL: u32 = 1 << 16;
const TOP: u32 = 1 << 24;

/// Anything that consumes `(cumulative, frequency, total)` coding events.
pub trait SymbolSink {
    fn code(&mut self, cum: u32, freq: u32, total: u32);
}

/// Accumulates the ideal code length `-log2(freq/total)` of every event.
#[derive(Debug, Clone, Copy)]
pub struct BitCounter {
    pub bits: f64,
}

impl BitCounter {
    pub fn starting_at(bits: f64) -> Self {
        Self { bits }
    }
}

impl SymbolSink for BitCounter {
    #[inline]
    fn code(&mut self, _cum: u32, freq: u32, total: u32) {
        self.bits += (f64::from(total) / f64::from(freq)).log2();
    }
}

pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Default for RangeEncoder {
    fn default() -> Self {
        Self::new()
    }
}

impl RangeEncoder {
    pub fn new() -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::new(),
        }
    }

    pub fn with_prefix(prefix: Vec<u8>) -> Self {
        Self {
            out: prefix,
            ..Self::new()
        }
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut temp = self.cache;
            loop {
                self.out.push(temp.wrapping_add(carry));
                temp = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = ((self.low >> 24) & 0xFF) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

impl SymbolSink for RangeEncoder {
    fn code(&mut self, cum: u32, freq: u32, total: u32) {
        debug_assert!(freq > 0 && cum + freq <= total && total <= MAX_TOTAL);
        let r = self.range / total;
        self.low += u64::from(r) * u64::from(cum);
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }
}

pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
    step: u32,
}

impl<'a> RangeDecoder<'a> {
    pub fn new(data: &'a [u8]) -> Result<Self> {
        if data.len() < 5 {
            return Err(Error::Decode(
                "range-coded stream shorter than 5 bytes".into(),
            ));
        }
        let mut dec = Self {
            data,
            pos: 0,
            code: 0,
            range: u32::MAX,
            step: 1,
        };
        for _ in 0..5 {
            dec.code = (dec.code << 8) | u32::from(dec.next_byte());
        }
        Ok(dec)
    }

    fn next_byte(&mut self) -> u8 {
        // Reading past the end yields zeros; the encoder's flush guarantees
        // enough bytes for valid streams.
        let b = self.data.get(self.pos).copied().unwrap_or(0);
        self.pos += 1;
        b
    }

    /// Returns the cumulative-frequency target of the next symbol.
    pub fn target(&mut self, total: u32) -> Result<u32> {
        if total == 0 || total > MAX_TOTAL {
            return Err(Error::Decode(format!("invalid frequency total {total}")));
        }
        self.step = self.range / total;
        let v = self.code / self.step;
        if v >= total {
            return Err(Error::Decode("code value outside frequency range".into()));
        }
        Ok(v)
    }

    /// Consumes the symbol whose interval was located with [`Self::target`].
    pub fn consume(&mut self, cum: u32, freq: u32) {
        self.code = self.code.wrapping_sub(self.step * cum);
        self.range = self.step * freq;
        while self.range < TOP {
            self.code = (self.code << 8) | u32::from(self.next_byte());
            self.range <<= 8;
        }
    }

    pub fn overran(&self) -> bool {
        self.pos > self.data.len() + 5
    }
}
