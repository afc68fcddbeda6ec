//! OFDM-SNM block mapping.
//!
//! A block carries information in two places: the number of activated
//! subcarriers `T` (selected by the heading bits) and the M-PSK symbols
//! placed on those `T` subcarriers (selected by the payload bits). The
//! activated subcarriers are always the `T` lowest-indexed ones, so there is
//! exactly one activation pattern per count and the codebook holds
//! `sum_{t=1..N} M^t` blocks.
//!
//! Pattern indices enumerate the codebook by increasing `T`, then by the
//! payload bits read as a big-endian integer. `k = offset(T) + payload`
//! with `offset(T) = sum_{t<T} M^t`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use thiserror::Error;

/// Upper bound on the number of blocks a [`Codebook`] will materialize.
pub const MAX_CODEBOOK_BLOCKS: u64 = 1 << 22;

const SYMBOL_TOLERANCE: f64 = 1e-9;

/// Relative gap below which two detection metrics count as tied.
pub const METRIC_TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("N must be a power of two (got {0})")]
    SubcarriersNotPowerOfTwo(usize),
    #[error("M must be a power of two and at least 2 (got {0})")]
    InvalidOrder(usize),
    #[error("codebook size overflows a 64-bit integer for N={subcarriers}, M={order}")]
    CodebookOverflow { subcarriers: usize, order: usize },
    #[error("codebook of {size} blocks exceeds the materialization limit of {limit}")]
    CodebookTooLarge { size: u64, limit: u64 },
    #[error("bit stream has {got} bits, expected at least {expected} heading bits")]
    MissingHeading { expected: usize, got: usize },
    #[error("bit stream length mismatch: T={active} requires p(k)={expected} bits, got {got}")]
    LengthMismatch {
        active: usize,
        expected: usize,
        got: usize,
    },
    #[error("invalid bit character {0:?}")]
    InvalidBit(char),
    #[error("block is not a legitimate codeword: {0}")]
    InvalidBlock(String),
}

/// Subcarrier count `N` and PSK order `M` of one subcarrier group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModulationParams {
    subcarriers: usize,
    order: usize,
}

impl ModulationParams {
    pub fn new(subcarriers: usize, order: usize) -> Result<Self, ModemError> {
        if subcarriers == 0 || !subcarriers.is_power_of_two() {
            return Err(ModemError::SubcarriersNotPowerOfTwo(subcarriers));
        }
        if order < 2 || !order.is_power_of_two() {
            return Err(ModemError::InvalidOrder(order));
        }
        Ok(Self { subcarriers, order })
    }

    /// `N`.
    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    /// `M`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// `p1 = log2(N)`.
    pub fn heading_bits(&self) -> usize {
        self.subcarriers.trailing_zeros() as usize
    }

    /// `log2(M)`.
    pub fn bits_per_symbol(&self) -> usize {
        self.order.trailing_zeros() as usize
    }

    /// Total stream length `p(k) = p1 + T log2(M)` for `active` subcarriers.
    pub fn stream_length(&self, active: usize) -> usize {
        self.heading_bits() + active * self.bits_per_symbol()
    }
}

/// Number of legitimate blocks, `M (M^N - 1) / (M - 1)`, in exact integer arithmetic.
pub fn codebook_size(params: &ModulationParams) -> Result<u64, ModemError> {
    let overflow = || ModemError::CodebookOverflow {
        subcarriers: params.subcarriers,
        order: params.order,
    };
    let m = params.order as u64;
    let mut power = 1u64;
    let mut total = 0u64;
    for _ in 0..params.subcarriers {
        power = power.checked_mul(m).ok_or_else(overflow)?;
        total = total.checked_add(power).ok_or_else(overflow)?;
    }
    Ok(total)
}

/// Average rate in bits per channel use, `log2(N) + (N+1)/2 * log2(M)`.
pub fn average_rate(params: &ModulationParams) -> f64 {
    params.heading_bits() as f64
        + (params.subcarriers as f64 + 1.0) / 2.0 * params.bits_per_symbol() as f64
}

/// An ordered sequence of bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitStream(Vec<bool>);

impl BitStream {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Appends the `width` low bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: usize) {
        for shift in (0..width).rev() {
            self.0.push((value >> shift) & 1 == 1);
        }
    }
}

impl From<Vec<bool>> for BitStream {
    fn from(bits: Vec<bool>) -> Self {
        Self(bits)
    }
}

impl FromStr for BitStream {
    type Err = ModemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(ModemError::InvalidBit(other)),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }
}

impl fmt::Display for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

fn read_uint(bits: &[bool]) -> u64 {
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
}

fn gray_encode(index: usize) -> usize {
    index ^ (index >> 1)
}

fn gray_decode(label: usize) -> usize {
    let mut index = label;
    let mut shift = label >> 1;
    while shift != 0 {
        index ^= shift;
        shift >>= 1;
    }
    index
}

/// Unit-energy PSK point `exp(j 2 pi m / M)`.
pub fn psk_point(index: usize, order: usize) -> Complex64 {
    let (sin, cos) = (2.0 * PI * index as f64 / order as f64).sin_cos();
    Complex64::new(cos, sin)
}

/// PSK point carrying the Gray label `label`.
pub fn psk_symbol_for_label(label: usize, order: usize) -> Complex64 {
    psk_point(gray_decode(label), order)
}

fn pattern_offset(active: usize, order: usize) -> u64 {
    // sum_{t=1}^{active-1} M^t; always below the codebook size so no overflow
    let m = order as u64;
    let mut power = 1u64;
    let mut total = 0u64;
    for _ in 1..active {
        power *= m;
        total += power;
    }
    total
}

/// One legitimate OFDM-SNM block.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitBlock {
    index: usize,
    active: usize,
    labels: Vec<usize>,
    symbols: Vec<Complex64>,
}

impl TransmitBlock {
    fn from_labels(params: &ModulationParams, labels: Vec<usize>) -> Self {
        let active = labels.len();
        let bps = params.bits_per_symbol();
        let payload = labels
            .iter()
            .fold(0u64, |acc, &label| (acc << bps) | label as u64);
        let index = (pattern_offset(active, params.order) + payload) as usize;
        let mut symbols = vec![Complex64::new(0.0, 0.0); params.subcarriers];
        for (slot, &label) in symbols.iter_mut().zip(&labels) {
            *slot = psk_symbol_for_label(label, params.order);
        }
        Self {
            index,
            active,
            labels,
            symbols,
        }
    }

    /// Identifies the codeword that `symbols` represents.
    pub fn from_symbols(
        symbols: &[Complex64],
        params: &ModulationParams,
    ) -> Result<Self, ModemError> {
        if symbols.len() != params.subcarriers {
            return Err(ModemError::InvalidBlock(format!(
                "expected {} subcarriers, got {}",
                params.subcarriers,
                symbols.len()
            )));
        }
        let active = symbols.iter().take_while(|x| x.norm() > 0.5).count();
        if active == 0 {
            return Err(ModemError::InvalidBlock("no active subcarrier".into()));
        }
        if let Some(n) = symbols[active..].iter().position(|x| *x != Complex64::new(0.0, 0.0)) {
            return Err(ModemError::InvalidBlock(format!(
                "subcarrier {} follows an inactive one but is not zero",
                active + n
            )));
        }
        let order = params.order;
        let mut labels = Vec::with_capacity(active);
        for (n, x) in symbols[..active].iter().enumerate() {
            let turns = x.arg() / (2.0 * PI) * order as f64;
            let point = (turns.round() as i64).rem_euclid(order as i64) as usize;
            if (x - psk_point(point, order)).norm() > SYMBOL_TOLERANCE {
                return Err(ModemError::InvalidBlock(format!(
                    "subcarrier {n} carries {x}, which is not a {order}-PSK point"
                )));
            }
            labels.push(gray_encode(point));
        }
        Ok(Self::from_labels(params, labels))
    }

    /// Pattern index `k`.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Activated count `T`.
    pub fn active_count(&self) -> usize {
        self.active
    }

    pub fn subcarriers(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_active(&self, subcarrier: usize) -> bool {
        subcarrier < self.active
    }

    /// Binary activation vector `S(k)`.
    pub fn activation_vector(&self) -> Vec<u8> {
        (0..self.symbols.len())
            .map(|n| u8::from(self.is_active(n)))
            .collect()
    }

    /// Frequency-domain block `x(k)`.
    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    /// Gray labels of the active symbols, in subcarrier order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Maps a bit stream onto a block.
///
/// The first `log2(N)` bits, read big-endian as `v`, select `T = v + 1`. Each
/// following group of `log2(M)` bits is a Gray label for one PSK symbol,
/// assigned to subcarriers `0..T` in order.
pub fn encode(bits: &BitStream, params: &ModulationParams) -> Result<TransmitBlock, ModemError> {
    codebook_size(params)?;
    let heading = params.heading_bits();
    if bits.len() < heading {
        return Err(ModemError::MissingHeading {
            expected: heading,
            got: bits.len(),
        });
    }
    let active = read_uint(&bits.bits()[..heading]) as usize + 1;
    let expected = params.stream_length(active);
    if bits.len() != expected {
        return Err(ModemError::LengthMismatch {
            active,
            expected,
            got: bits.len(),
        });
    }
    let labels = bits.bits()[heading..]
        .chunks(params.bits_per_symbol())
        .map(|chunk| read_uint(chunk) as usize)
        .collect();
    Ok(TransmitBlock::from_labels(params, labels))
}

/// Inverse of [`encode`].
pub fn decode_bits(block: &TransmitBlock, params: &ModulationParams) -> Result<BitStream, ModemError> {
    let size = codebook_size(params)?;
    if block.subcarriers() != params.subcarriers
        || block.active == 0
        || block.active > params.subcarriers
        || block.index as u64 >= size
    {
        return Err(ModemError::InvalidBlock(format!(
            "block k={} with T={} over {} subcarriers is not in the N={}, M={} codebook",
            block.index,
            block.active,
            block.subcarriers(),
            params.subcarriers,
            params.order
        )));
    }
    let mut out = BitStream::default();
    out.push_uint((block.active - 1) as u64, params.heading_bits());
    for &label in &block.labels {
        if label >= params.order {
            return Err(ModemError::InvalidBlock(format!(
                "label {label} out of range for M={}",
                params.order
            )));
        }
        out.push_uint(label as u64, params.bits_per_symbol());
    }
    Ok(out)
}

/// The full set of legitimate blocks, ordered by pattern index.
#[derive(Debug, Clone)]
pub struct Codebook {
    params: ModulationParams,
    blocks: Vec<TransmitBlock>,
}

impl Codebook {
    pub fn new(params: ModulationParams) -> Result<Self, ModemError> {
        let size = codebook_size(&params)?;
        if size > MAX_CODEBOOK_BLOCKS {
            return Err(ModemError::CodebookTooLarge {
                size,
                limit: MAX_CODEBOOK_BLOCKS,
            });
        }
        let mut blocks = Vec::with_capacity(size as usize);
        let bps = params.bits_per_symbol();
        for active in 1..=params.subcarriers {
            let count = 1u64 << (bps * active);
            for payload in 0..count {
                let labels = (0..active)
                    .rev()
                    .map(|slot| ((payload >> (slot * bps)) as usize) & (params.order - 1))
                    .collect();
                blocks.push(TransmitBlock::from_labels(&params, labels));
            }
        }
        debug_assert!(blocks.iter().enumerate().all(|(k, b)| b.index == k));
        Ok(Self { params, blocks })
    }

    pub fn params(&self) -> &ModulationParams {
        &self.params
    }

    /// `Xi`.
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn blocks(&self) -> &[TransmitBlock] {
        &self.blocks
    }

    pub fn get(&self, index: usize) -> Option<&TransmitBlock> {
        self.blocks.get(index)
    }
}

/// Result of [`ml_detect`].
#[derive(Debug, Clone, Copy)]
pub struct Detection<'a> {
    pub index: usize,
    pub block: &'a TransmitBlock,
    pub metric: f64,
}

/// Squared Frobenius distance `||y - sqrt(P/T) H x||^2` for one candidate.
pub fn detection_metric(
    received: &[Complex64],
    channel: &[Complex64],
    candidate: &TransmitBlock,
    power: f64,
) -> f64 {
    let scale = (power / candidate.active as f64).sqrt();
    received
        .iter()
        .zip(channel)
        .zip(&candidate.symbols)
        .map(|((y, h), x)| (y - h * x * scale).norm_sqr())
        .sum()
}

/// Exhaustive maximum-likelihood block detection.
///
/// Every codeword is scored with its own power scaling `sqrt(P/T)`. Ties go
/// to the lowest pattern index; metrics within [`METRIC_TIE_TOLERANCE`]
/// (relative) of the incumbent are ties, so equal metrics that differ only
/// by rounding resolve the same way on every platform.
pub fn ml_detect<'a>(
    received: &[Complex64],
    channel: &[Complex64],
    codebook: &'a Codebook,
    power: f64,
) -> Detection<'a> {
    assert_eq!(received.len(), codebook.params.subcarriers);
    assert_eq!(channel.len(), codebook.params.subcarriers);
    let mut best = Detection {
        index: 0,
        block: &codebook.blocks[0],
        metric: f64::INFINITY,
    };
    for (index, block) in codebook.blocks.iter().enumerate() {
        let metric = detection_metric(received, channel, block, power);
        if metric < best.metric * (1.0 - METRIC_TIE_TOLERANCE) {
            best = Detection {
                index,
                block,
                metric,
            };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, m: usize) -> ModulationParams {
        ModulationParams::new(n, m).unwrap()
    }

    fn bits(s: &str) -> BitStream {
        s.parse().unwrap()
    }

    fn assert_symbols(actual: &[Complex64], expected: &[f64]) {
        assert_eq!(actual.len(), expected.len());
        for (a, e) in actual.iter().zip(expected) {
            assert!((a - Complex64::new(*e, 0.0)).norm() < 1e-12, "{a} != {e}");
        }
    }

    #[test]
    fn rejects_invalid_params() {
        assert_eq!(
            ModulationParams::new(3, 2),
            Err(ModemError::SubcarriersNotPowerOfTwo(3))
        );
        assert_eq!(
            ModulationParams::new(0, 2),
            Err(ModemError::SubcarriersNotPowerOfTwo(0))
        );
        assert_eq!(ModulationParams::new(4, 1), Err(ModemError::InvalidOrder(1)));
        assert_eq!(ModulationParams::new(4, 6), Err(ModemError::InvalidOrder(6)));
    }

    #[test]
    fn codebook_size_examples() {
        assert_eq!(codebook_size(&params(1, 2)).unwrap(), 2);
        assert_eq!(codebook_size(&params(2, 2)).unwrap(), 6);
        assert_eq!(codebook_size(&params(4, 2)).unwrap(), 30);
        assert_eq!(codebook_size(&params(8, 4)).unwrap(), 87_380);
    }

    #[test]
    fn codebook_size_overflow_is_an_error() {
        let err = codebook_size(&params(64, 2)).unwrap_err();
        assert!(matches!(err, ModemError::CodebookOverflow { .. }));
        assert_eq!(codebook_size(&params(32, 2)).unwrap(), (1u64 << 33) - 2);
    }

    #[test]
    fn average_rate_examples() {
        assert_eq!(average_rate(&params(1, 2)), 1.0);
        assert_eq!(average_rate(&params(4, 2)), 4.5);
        assert_eq!(average_rate(&params(8, 4)), 12.0);
    }

    #[test]
    fn encode_examples() {
        let p = params(4, 2);
        let block = encode(&bits("001"), &p).unwrap();
        assert_eq!(block.active_count(), 1);
        assert_symbols(block.symbols(), &[-1.0, 0.0, 0.0, 0.0]);

        let block = encode(&bits("10101"), &p).unwrap();
        assert_eq!(block.active_count(), 3);
        assert_eq!(block.activation_vector(), vec![1, 1, 1, 0]);
        assert_symbols(block.symbols(), &[-1.0, 1.0, -1.0, 0.0]);

        let block = encode(&bits("0"), &params(1, 2)).unwrap();
        assert_eq!(block.active_count(), 1);
        assert_symbols(block.symbols(), &[1.0]);
    }

    #[test]
    fn encode_rejects_wrong_length() {
        let p = params(4, 2);
        assert_eq!(
            encode(&bits("1010"), &p),
            Err(ModemError::LengthMismatch {
                active: 3,
                expected: 5,
                got: 4
            })
        );
        assert_eq!(
            encode(&bits("1"), &p),
            Err(ModemError::MissingHeading {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn decode_examples() {
        let p = params(4, 2);
        let block = encode(&bits("10101"), &p).unwrap();
        assert_eq!(decode_bits(&block, &p).unwrap().to_string(), "10101");

        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let block = TransmitBlock::from_symbols(&[one, zero, zero, zero], &p).unwrap();
        assert_eq!(decode_bits(&block, &p).unwrap().to_string(), "000");

        let block = TransmitBlock::from_symbols(&[one; 4], &p).unwrap();
        assert_eq!(decode_bits(&block, &p).unwrap().to_string(), "110000");
    }

    #[test]
    fn invalid_blocks_are_rejected() {
        let p = params(4, 2);
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        let j = Complex64::new(0.0, 1.0);
        // gap in the activation pattern
        assert!(TransmitBlock::from_symbols(&[one, zero, one, zero], &p).is_err());
        // not a BPSK point
        assert!(TransmitBlock::from_symbols(&[j, zero, zero, zero], &p).is_err());
        // nothing active
        assert!(TransmitBlock::from_symbols(&[zero; 4], &p).is_err());
        // wrong length
        assert!(TransmitBlock::from_symbols(&[one; 3], &p).is_err());
        // block from a larger codebook
        let big = encode(&bits("110000"), &p).unwrap();
        assert!(decode_bits(&big, &params(2, 2)).is_err());
    }

    #[test]
    fn qpsk_uses_gray_labels() {
        let p = params(1, 4);
        // adjacent constellation points differ in one bit
        let points: Vec<_> = (0..4).map(gray_encode).collect();
        for m in 0..4 {
            let next = points[(m + 1) % 4];
            assert_eq!((points[m] ^ next).count_ones(), 1);
        }
        let block = encode(&bits("11"), &p).unwrap();
        assert!((block.symbols()[0] - psk_point(2, 4)).norm() < 1e-12);
        for m in 0..16 {
            assert_eq!(gray_decode(gray_encode(m)), m);
        }
    }

    #[test]
    fn codebook_indices_follow_bit_order() {
        let p = params(2, 2);
        let book = Codebook::new(p).unwrap();
        assert_eq!(book.len(), 6);
        let streams: Vec<String> = book
            .blocks()
            .iter()
            .map(|b| decode_bits(b, &p).unwrap().to_string())
            .collect();
        assert_eq!(streams, ["00", "01", "100", "101", "110", "111"]);
    }

    #[test]
    fn codebook_too_large_is_refused() {
        let err = Codebook::new(params(16, 4)).unwrap_err();
        assert!(matches!(err, ModemError::CodebookTooLarge { .. }));
    }

    #[test]
    fn all_zero_received_matches_brute_force() {
        let p = params(2, 2);
        let book = Codebook::new(p).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); 2];
        for channel in [
            vec![Complex64::new(1.0, 0.0); 2],
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0)],
            vec![Complex64::new(0.3, 0.0), Complex64::new(1.0, 0.0)],
        ] {
            let power = 7.0;
            // independent scoring: energy of the scaled noiseless image of each codeword
            let scores: Vec<f64> = book
                .blocks()
                .iter()
                .map(|b| {
                    let t = b.active_count() as f64;
                    (0..t as usize).map(|n| power / t * channel[n].norm_sqr()).sum()
                })
                .collect();
            let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
            let expected = scores.iter().position(|&s| (s - min).abs() <= 1e-12 * min).unwrap();
            let detection = ml_detect(&zero, &channel, &book, power);
            assert_eq!(detection.index, expected, "channel {channel:?}");
        }
    }

    #[test]
    fn noiseless_detection_recovers_block() {
        let p = params(4, 4);
        let book = Codebook::new(p).unwrap();
        let channel: Vec<Complex64> = (0..4)
            .map(|n| Complex64::from_polar(0.4 + 0.3 * n as f64, 0.7 * n as f64))
            .collect();
        for block in book.blocks().iter().step_by(7) {
            let power = 10.0;
            let scale = (power / block.active_count() as f64).sqrt();
            let received: Vec<_> = block
                .symbols()
                .iter()
                .zip(&channel)
                .map(|(x, h)| h * x * scale)
                .collect();
            let detection = ml_detect(&received, &channel, &book, power);
            assert_eq!(detection.index, block.index());
            assert!(detection.metric < 1e-20);
        }
    }
}
