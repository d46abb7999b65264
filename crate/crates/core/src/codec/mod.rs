//! Lossless compressor backends behind a uniform code-length interface.
//!
//! A backend's code length `|φ(x)|` is the only thing the probability layer
//! consumes. Whole-byte backends (DEFLATE) report eight bits per output byte;
//! arithmetic-coded backends (PPM, Re-Pair) report the exact accumulated
//! `-log2` coding probability plus a fixed header.

pub mod deflate;
pub mod ppm;
pub mod range;
pub mod repair;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use deflate::Deflate;
pub use ppm::Ppm;
pub use repair::{Grammar, RePair};

use crate::error::{Error, Result};
use crate::prob::SymbolSeries;

/// First byte of the symbol encoding: symbol `k` is written as `0x30 + k`.
pub const SYMBOL_BASE: u8 = 0x30;

/// Length of a compressed representation, in bits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct CodeLength(f64);

impl CodeLength {
    pub fn new(bits: f64) -> Result<Self> {
        if bits.is_finite() && bits >= 0.0 {
            Ok(Self(bits))
        } else {
            Err(Error::InvalidInput(format!(
                "code length {bits} is not a finite non-negative number"
            )))
        }
    }

    /// For backends whose arithmetic cannot produce an invalid length.
    pub(crate) fn from_bits(bits: f64) -> Self {
        debug_assert!(bits.is_finite() && bits >= 0.0);
        Self(bits)
    }

    pub fn bits(self) -> f64 {
        self.0
    }
}

impl fmt::Display for CodeLength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.fract() == 0.0 {
            write!(f, "{}", self.0)
        } else {
            write!(f, "{:.3}", self.0)
        }
    }
}

/// Anything that can assign a code length to a byte string.
///
/// Implementations must be deterministic and safe to call from many threads
/// at once.
pub trait CodeLengthModel: Send + Sync {
    fn id(&self) -> &str;

    fn code_length(&self, input: &[u8]) -> CodeLength;

    /// Code lengths of `prefix‖suffix` for every suffix, in order.
    fn suffix_code_lengths(&self, prefix: &[u8], suffixes: &[Vec<u8>]) -> Vec<CodeLength> {
        suffixes
            .par_iter()
            .map(|s| {
                let mut buf = Vec::with_capacity(prefix.len() + s.len());
                buf.extend_from_slice(prefix);
                buf.extend_from_slice(s);
                self.code_length(&buf)
            })
            .collect()
    }
}

/// A code-length model that is also an actual lossless compressor.
pub trait Codec: CodeLengthModel {
    fn compress(&self, input: &[u8]) -> Vec<u8>;
    fn decompress(&self, data: &[u8]) -> Result<Vec<u8>>;
}

pub fn code_length(backend: &dyn CodeLengthModel, input: &[u8]) -> CodeLength {
    backend.code_length(input)
}

pub fn roundtrip(backend: &dyn Codec, input: &[u8]) -> Result<Vec<u8>> {
    backend.decompress(&backend.compress(input))
}

/// Writes one byte per symbol, `0x30 + symbol` (wrapping above 0xFF).
pub fn encode_symbols(series: &SymbolSeries) -> Result<Vec<u8>> {
    encode_raw(series.symbols(), series.alphabet_size())
}

pub(crate) fn encode_raw(symbols: &[u32], alphabet_size: u32) -> Result<Vec<u8>> {
    if alphabet_size > 256 {
        return Err(Error::UnsupportedAlphabet(alphabet_size as usize));
    }
    Ok(symbols
        .iter()
        .map(|&s| SYMBOL_BASE.wrapping_add(s as u8))
        .collect())
}

pub fn decode_symbols(bytes: &[u8], alphabet_size: u32) -> Result<SymbolSeries> {
    if alphabet_size > 256 {
        return Err(Error::UnsupportedAlphabet(alphabet_size as usize));
    }
    let symbols = bytes
        .iter()
        .map(|&b| u32::from(b.wrapping_sub(SYMBOL_BASE)))
        .collect();
    SymbolSeries::new(symbols, alphabet_size)
}

/// Backend choice plus parameters, as named in configs and on the command
/// line: `deflate[:level]`, `ppm[:order]`, `repair`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum BackendSpec {
    Deflate { level: u32 },
    Ppm { order: usize },
    RePair,
}

impl BackendSpec {
    pub fn build(self) -> Result<Arc<dyn Codec>> {
        Ok(match self {
            BackendSpec::Deflate { level } => Arc::new(Deflate::new(level)?),
            BackendSpec::Ppm { order } => Arc::new(Ppm::new(order)?),
            BackendSpec::RePair => Arc::new(RePair),
        })
    }

    pub fn all_defaults() -> Vec<BackendSpec> {
        vec![
            BackendSpec::Deflate { level: 9 },
            BackendSpec::Ppm { order: 4 },
            BackendSpec::RePair,
        ]
    }
}

impl FromStr for BackendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, param) = match s.trim().split_once(':') {
            Some((n, p)) => (n, Some(p)),
            None => (s.trim(), None),
        };
        let parse = |p: &str| {
            p.parse::<usize>()
                .map_err(|_| Error::Config(format!("bad parameter `{p}` for backend `{name}`")))
        };
        let spec = match (name, param) {
            ("deflate" | "zlib", None) => BackendSpec::Deflate { level: 9 },
            ("deflate" | "zlib", Some(p)) => BackendSpec::Deflate {
                level: parse(p)? as u32,
            },
            ("ppm", None) => BackendSpec::Ppm { order: 4 },
            ("ppm", Some(p)) => BackendSpec::Ppm { order: parse(p)? },
            ("repair" | "rp", None) => BackendSpec::RePair,
            _ => return Err(Error::Config(format!("unknown backend `{s}`"))),
        };
        // Validate parameters eagerly.
        spec.build()?;
        Ok(spec)
    }
}

impl TryFrom<String> for BackendSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<BackendSpec> for String {
    fn from(b: BackendSpec) -> String {
        b.to_string()
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Deflate { level } => write!(f, "deflate:{level}"),
            BackendSpec::Ppm { order } => write!(f, "ppm:{order}"),
            BackendSpec::RePair => write!(f, "repair"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_encoding_is_ascii_offset() {
        let s = SymbolSeries::new(vec![0, 1, 0], 2).unwrap();
        assert_eq!(encode_symbols(&s).unwrap(), vec![0x30, 0x31, 0x30]);
        let s = SymbolSeries::new(vec![15], 16).unwrap();
        assert_eq!(encode_symbols(&s).unwrap(), vec![0x3F]);
    }

    #[test]
    fn oversized_alphabet_rejected() {
        assert!(matches!(
            encode_raw(&[0], 257),
            Err(Error::UnsupportedAlphabet(257))
        ));
    }

    #[test]
    fn full_byte_alphabet_is_bijective() {
        let symbols: Vec<u32> = (0..256).collect();
        let bytes = encode_raw(&symbols, 256).unwrap();
        let mut sorted = bytes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 256);
        assert_eq!(decode_symbols(&bytes, 256).unwrap().symbols(), &symbols[..]);
    }

    #[test]
    fn backend_names_parse() {
        assert_eq!(
            "ppm:3".parse::<BackendSpec>().unwrap(),
            BackendSpec::Ppm { order: 3 }
        );
        assert_eq!(
            "zlib".parse::<BackendSpec>().unwrap(),
            BackendSpec::Deflate { level: 9 }
        );
        assert_eq!("rp".parse::<BackendSpec>().unwrap(), BackendSpec::RePair);
        assert!("bzip2".parse::<BackendSpec>().is_err());
        assert!("ppm:9".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn code_length_rejects_negative() {
        assert!(CodeLength::new(-1.0).is_err());
        assert!(CodeLength::new(f64::NAN).is_err());
    }
}
