//! Raw DEFLATE (no zlib or gzip framing), backed by `flate2`.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use super::{CodeLength, CodeLengthModel, Codec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Deflate {
    level: u32,
}

impl Default for Deflate {
    fn default() -> Self {
        Self { level: 9 }
    }
}

impl Deflate {
    pub fn new(level: u32) -> Result<Self> {
        if level > 9 {
            return Err(Error::Config(format!("deflate level {level} not in 0..=9")));
        }
        Ok(Self { level })
    }

    pub fn level(&self) -> u32 {
        self.level
    }
}

impl CodeLengthModel for Deflate {
    fn id(&self) -> &str {
        "deflate"
    }

    /// Whole bytes of the compressed stream, times eight.
    fn code_length(&self, input: &[u8]) -> CodeLength {
        CodeLength::from_bits(8.0 * self.compress(input).len() as f64)
    }
}

impl Codec for Deflate {
    fn compress(&self, input: &[u8]) -> Vec<u8> {
        let mut enc = DeflateEncoder::new(Vec::new(), Compression::new(self.level));
        enc.write_all(input).expect("writing to a Vec cannot fail");
        enc.finish().expect("writing to a Vec cannot fail")
    }

    fn decompress(&self, data: &[u8]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        DeflateDecoder::new(data)
            .read_to_end(&mut out)
            .map_err(|e| Error::Decode(e.to_string()))?;
        Ok(out)
    }
}
