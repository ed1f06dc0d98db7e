//! Integer range coder driven by quantized cumulative distributions.
//!
//! The coder keeps a 33-bit `low` (32 bits plus a carry) in a `u64` and a
//! 32-bit `range`, renormalizing a byte at a time whenever the range drops
//! below 2^24. Carries are resolved with the usual cache/pending-0xFF trick,
//! so output is produced strictly left to right. All encode/decode
//! arithmetic is integer-only, which makes the produced bytes identical on
//! every platform.
//!
//! Probabilities reach the coder exclusively as [`IntegerCdf`] tables whose
//! counts sum to exactly `2^PRECISION_BITS`. [`quantize_pmf`] turns a
//! real-valued PMF into such a table, giving every symbol at least one count
//! so that anything the model considers impossible can still be coded.

use crate::error::{Error, Result};

/// Probability precision used throughout the codec.
pub const PRECISION_BITS: u32 = 16;

const TOP: u32 = 1 << 24;

/// Monotone integer cumulative table over an alphabet `0..len()`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntegerCdf {
    cumulative: Vec<u32>,
    precision_bits: u32,
}

impl IntegerCdf {
    /// Builds a table from per-symbol counts, which must all be positive and
    /// sum to `2^precision_bits`.
    pub fn from_counts(counts: &[u32], precision_bits: u32) -> Result<Self> {
        if precision_bits == 0 || precision_bits > PRECISION_BITS {
            return Err(Error::AlphabetTooLarge {
                symbols: counts.len(),
                precision: precision_bits,
            });
        }
        let mut cumulative = Vec::with_capacity(counts.len() + 1);
        cumulative.push(0u32);
        let mut acc = 0u64;
        for (index, &c) in counts.iter().enumerate() {
            if c == 0 {
                return Err(Error::InvalidPmf { index, value: 0.0 });
            }
            acc += u64::from(c);
            cumulative.push(acc.min(u64::from(u32::MAX)) as u32);
        }
        if counts.is_empty() || acc != 1u64 << precision_bits {
            return Err(Error::Malformed {
                what: "integer cdf",
                detail: format!("counts sum to {acc}, expected {}", 1u64 << precision_bits),
            });
        }
        Ok(Self {
            cumulative,
            precision_bits,
        })
    }

    /// Near-uniform table over `symbols` entries (largest-remainder split).
    pub fn uniform(symbols: usize) -> Result<Self> {
        quantize_pmf(&vec![1.0; symbols])
    }

    /// Number of symbols in the alphabet.
    pub fn len(&self) -> usize {
        self.cumulative.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn precision_bits(&self) -> u32 {
        self.precision_bits
    }

    pub fn cumulative(&self) -> &[u32] {
        &self.cumulative
    }

    pub fn count(&self, symbol: usize) -> u32 {
        self.cumulative[symbol + 1] - self.cumulative[symbol]
    }

    /// Code length of `symbol` in bits under this table.
    pub fn cost_bits(&self, symbol: usize) -> f64 {
        f64::from(self.precision_bits) - f64::from(self.count(symbol)).log2()
    }
}

/// Quantizes a PMF to a [`PRECISION_BITS`]-bit [`IntegerCdf`].
pub fn quantize_pmf(pmf: &[f64]) -> Result<IntegerCdf> {
    quantize_pmf_with_precision(pmf, PRECISION_BITS)
}

/// Largest-remainder quantization with a floor of one count per symbol.
///
/// Every symbol first receives one count; the remaining `2^P - n` counts are
/// split proportionally to `pmf`, rounding down, and the leftover counts go
/// to the largest fractional remainders (lower index wins ties).
pub fn quantize_pmf_with_precision(pmf: &[f64], precision_bits: u32) -> Result<IntegerCdf> {
    let n = pmf.len();
    let total = 1u64 << precision_bits;
    if n == 0 || precision_bits == 0 || precision_bits > PRECISION_BITS || 2 * n as u64 > total {
        return Err(Error::AlphabetTooLarge {
            symbols: n,
            precision: precision_bits,
        });
    }
    let mut sum = 0.0;
    for (index, &p) in pmf.iter().enumerate() {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(Error::InvalidPmf { index, value: p });
        }
        sum += p;
    }
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::InvalidPmf {
            index: 0,
            value: sum,
        });
    }

    let free = (total - n as u64) as f64;
    let scale = free / sum;
    let mut counts = Vec::with_capacity(n);
    // Remainders are in [0, 1), where the f64 bit pattern orders like the
    // value; the second key puts lower indices first on ties.
    let mut keys = Vec::with_capacity(n);
    let mut assigned = 0u64;
    for (i, &p) in pmf.iter().enumerate() {
        let ideal = p * scale;
        let floor = ideal.floor();
        counts.push(floor as u32 + 1);
        keys.push(((ideal - floor).to_bits(), u32::MAX - i as u32));
        assigned += floor as u64;
    }
    let free_counts = total - n as u64;
    // Float round-off can overshoot by a count; take it back from the
    // largest entry.
    while assigned > free_counts {
        let (i, _) = counts.iter().enumerate().fold(
            (0, 0),
            |best, (i, &c)| if c > best.1 { (i, c) } else { best },
        );
        counts[i] -= 1;
        assigned -= 1;
    }
    let deficit = (free_counts - assigned) as usize;
    if deficit > 0 {
        if deficit < n {
            keys.select_nth_unstable_by(deficit - 1, |a, b| b.cmp(a));
        }
        for &(_, inv) in keys.iter().take(deficit.min(n)) {
            counts[(u32::MAX - inv) as usize] += 1;
        }
    }

    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0u32);
    let mut acc = 0u32;
    for c in counts {
        acc += c;
        cumulative.push(acc);
    }
    debug_assert_eq!(u64::from(acc), total);
    Ok(IntegerCdf {
        cumulative,
        precision_bits,
    })
}

/// Finished coder output.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bitstream {
    pub bytes: Vec<u8>,
}

impl Bitstream {
    /// Output length in bits; the coder is byte-oriented so there is no
    /// partial trailing byte.
    pub fn bit_len(&self) -> usize {
        self.bytes.len() * 8
    }
}

#[derive(Debug)]
pub struct RangeEncoder {
    low: u64,
    range: u32,
    cache: u8,
    pending: u64,
    // The first byte a carry-cache coder emits is always zero; it is dropped
    // and the decoder starts one byte later.
    skip_first: bool,
    out: Vec<u8>,
    finished: bool,
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
            pending: 1,
            skip_first: true,
            out: Vec::new(),
            finished: false,
        }
    }

    pub fn encode(&mut self, cdf: &IntegerCdf, symbol: usize) -> Result<()> {
        if self.finished {
            return Err(Error::AlreadyFinished);
        }
        if symbol >= cdf.len() {
            return Err(Error::SymbolOutOfRange {
                symbol,
                alphabet: cdf.len(),
            });
        }
        let start = cdf.cumulative[symbol];
        let freq = cdf.cumulative[symbol + 1] - start;
        let r = self.range >> cdf.precision_bits;
        self.low += u64::from(r) * u64::from(start);
        self.range = r * freq;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
        Ok(())
    }

    /// Bytes committed so far, excluding anything still held for carry
    /// resolution.
    pub fn bytes_written(&self) -> usize {
        self.out.len()
    }

    /// Flushes the full 32-bit `low`, so a decoder consumes exactly the
    /// bytes produced here and streams can be concatenated back to back.
    pub fn finish(&mut self) -> Result<Bitstream> {
        if self.finished {
            return Err(Error::AlreadyFinished);
        }
        for _ in 0..5 {
            self.shift_low();
        }
        self.finished = true;
        Ok(Bitstream {
            bytes: std::mem::take(&mut self.out),
        })
    }

    fn shift_low(&mut self) {
        if (self.low as u32) < 0xFF00_0000 || (self.low >> 32) != 0 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.emit(byte.wrapping_add(carry));
                byte = 0xFF;
                self.pending -= 1;
                if self.pending == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.pending += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    fn emit(&mut self, byte: u8) {
        if self.skip_first {
            debug_assert_eq!(byte, 0);
            self.skip_first = false;
        } else {
            self.out.push(byte);
        }
    }
}

#[derive(Debug)]
pub struct RangeDecoder<'a> {
    data: &'a [u8],
    pos: usize,
    code: u32,
    range: u32,
}

impl<'a> RangeDecoder<'a> {
    /// Starts decoding at the beginning of `data`. Trailing bytes after the
    /// stream are left untouched; see [`RangeDecoder::consumed`].
    pub fn new(data: &'a [u8]) -> Result<Self> {
        let mut dec = Self {
            data,
            pos: 0,
            code: 0,
            range: u32::MAX,
        };
        for _ in 0..4 {
            dec.code = (dec.code << 8) | u32::from(dec.next_byte()?);
        }
        if dec.code >= dec.range {
            return Err(Error::CorruptPayload);
        }
        Ok(dec)
    }

    pub fn decode(&mut self, cdf: &IntegerCdf) -> Result<usize> {
        let r = self.range >> cdf.precision_bits;
        let target = self.code / r;
        if target >= 1 << cdf.precision_bits {
            return Err(Error::CorruptPayload);
        }
        let cum = &cdf.cumulative;
        let symbol = cum.partition_point(|&c| c <= target) - 1;
        let start = cum[symbol];
        let freq = cum[symbol + 1] - start;
        self.code -= r * start;
        self.range = r * freq;
        while self.range < TOP {
            self.code = (self.code << 8) | u32::from(self.next_byte()?);
            self.range <<= 8;
        }
        Ok(symbol)
    }

    /// Bytes read from the input so far. After the final symbol this equals
    /// the length of the encoder's output.
    pub fn consumed(&self) -> usize {
        self.pos
    }

    fn next_byte(&mut self) -> Result<u8> {
        let byte = *self
            .data
            .get(self.pos)
            .ok_or(Error::Exhausted { consumed: self.pos })?;
        self.pos += 1;
        Ok(byte)
    }
}
