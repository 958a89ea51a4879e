//! Chunk-wise lossless compression and the compression-rate stream.
//!
//! Samples are quantised to 16-bit fixed point and the resulting bytes are
//! coded with a byte-oriented LZSS coder. The coder's parameters are fixed so
//! that compressed sizes are reproducible everywhere:
//!
//! - window 4096 bytes, minimum match 3 bytes, maximum match 273 bytes;
//! - tokens are grouped by eight behind one flag byte (bit `i`, least
//!   significant first, set when token `i` is a match);
//! - a literal is one byte;
//! - a match is two bytes, `d = distance - 1` and `l = length - 3`:
//!   `[d & 0xff][(d >> 8) << 4 | min(l, 15)]`, followed by one extension
//!   byte `l - 15` when `l >= 15`;
//! - matches are found greedily through hash chains of three-byte prefixes,
//!   searching at most 64 candidates per position.

use serde::{Deserialize, Serialize};

use crate::trace_gen::PressureChunk;
use crate::{Error, NodeId, Result};

pub const WINDOW: usize = 4096;
pub const MIN_MATCH: usize = 3;
pub const MAX_MATCH: usize = MIN_MATCH + 15 + 255;
const CHAIN_LIMIT: usize = 64;
const HASH_BITS: u32 = 12;
const NIL: u32 = u32::MAX;

/// Version of the container layout written by [`CompressedChunk::to_container`].
pub const CONTAINER_VERSION: u16 = 1;

/// Fixed-point sensing format: head in units of `resolution_m`, clamped to
/// `0..levels`, written as little-endian `u16`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub resolution_m: f64,
    pub levels: u32,
}

impl Default for Quantizer {
    fn default() -> Self {
        Self {
            resolution_m: 0.01,
            levels: 65536,
        }
    }
}

impl Quantizer {
    pub fn validate(&self) -> Result<()> {
        if !(2..=65536).contains(&self.levels) {
            return Err(Error::input("quantizer levels must lie in 2..=65536"));
        }
        if !(self.resolution_m > 0.0 && self.resolution_m.is_finite()) {
            return Err(Error::input("quantizer resolution must be > 0"));
        }
        Ok(())
    }

    pub fn code(&self, value: f64) -> u16 {
        let max = (self.levels - 1) as f64;
        (value / self.resolution_m).round().clamp(0.0, max) as u16
    }

    pub fn value(&self, code: u16) -> f64 {
        code as f64 * self.resolution_m
    }

    pub fn encode_into(&self, samples: &[f64], out: &mut Vec<u8>) {
        out.clear();
        out.reserve(samples.len() * 2);
        for &s in samples {
            out.extend_from_slice(&self.code(s).to_le_bytes());
        }
    }

    pub fn encode(&self, samples: &[f64]) -> Vec<u8> {
        let mut out = Vec::new();
        self.encode_into(samples, &mut out);
        out
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<Vec<f64>> {
        if !bytes.len().is_multiple_of(2) {
            return Err(Error::input("quantized byte stream has odd length"));
        }
        Ok(bytes
            .chunks_exact(2)
            .map(|b| self.value(u16::from_le_bytes([b[0], b[1]])))
            .collect())
    }
}

/// Reusable LZSS encoder state.
pub struct Compressor {
    head: Vec<u32>,
    prev: Vec<u32>,
}

impl Default for Compressor {
    fn default() -> Self {
        Self::new()
    }
}

#[inline]
fn hash3(b: &[u8]) -> usize {
    let v = u32::from(b[0]) | u32::from(b[1]) << 8 | u32::from(b[2]) << 16;
    (v.wrapping_mul(2_654_435_761) >> (32 - HASH_BITS)) as usize
}

impl Compressor {
    pub fn new() -> Self {
        Self {
            head: vec![NIL; 1 << HASH_BITS],
            prev: vec![NIL; WINDOW],
        }
    }

    fn insert(&mut self, input: &[u8], pos: usize) {
        if pos + MIN_MATCH <= input.len() {
            let h = hash3(&input[pos..]);
            self.prev[pos % WINDOW] = self.head[h];
            self.head[h] = pos as u32;
        }
    }

    fn longest_match(&self, input: &[u8], pos: usize) -> (usize, usize) {
        if pos + MIN_MATCH > input.len() {
            return (0, 0);
        }
        let max_len = MAX_MATCH.min(input.len() - pos);
        let mut cand = self.head[hash3(&input[pos..])];
        let mut best = (0, 0);
        let mut steps = 0;
        while cand != NIL && steps < CHAIN_LIMIT {
            let c = cand as usize;
            if c >= pos || pos - c > WINDOW {
                break;
            }
            let len = input[c..]
                .iter()
                .zip(&input[pos..pos + max_len])
                .take_while(|(a, b)| a == b)
                .count();
            if len > best.0 {
                best = (len, pos - c);
                if len == max_len {
                    break;
                }
            }
            let next = self.prev[c % WINDOW];
            // Stale chain entries point forward or out of the window.
            if next == NIL || next as usize >= c {
                break;
            }
            cand = next;
            steps += 1;
        }
        if best.0 >= MIN_MATCH {
            best
        } else {
            (0, 0)
        }
    }

    /// Compress `input` into `out` (cleared first).
    pub fn compress_into(&mut self, input: &[u8], out: &mut Vec<u8>) {
        out.clear();
        self.head.fill(NIL);
        let mut pos = 0;
        let mut flag_at = 0;
        let mut nth = 8;
        while pos < input.len() {
            if nth == 8 {
                flag_at = out.len();
                out.push(0);
                nth = 0;
            }
            let (len, dist) = self.longest_match(input, pos);
            if len >= MIN_MATCH {
                out[flag_at] |= 1 << nth;
                let d = dist - 1;
                let l = len - MIN_MATCH;
                out.push((d & 0xff) as u8);
                out.push((((d >> 8) as u8) << 4) | l.min(15) as u8);
                if l >= 15 {
                    out.push((l - 15) as u8);
                }
                for p in pos..pos + len {
                    self.insert(input, p);
                }
                pos += len;
            } else {
                out.push(input[pos]);
                self.insert(input, pos);
                pos += 1;
            }
            nth += 1;
        }
    }

    pub fn compress(&mut self, input: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        self.compress_into(input, &mut out);
        out
    }
}

/// Invert [`Compressor::compress`].
pub fn decompress_bytes(payload: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(payload.len() * 2);
    let mut i = 0;
    while i < payload.len() {
        let flags = payload[i];
        i += 1;
        for bit in 0..8 {
            if i >= payload.len() {
                break;
            }
            if flags & (1 << bit) == 0 {
                out.push(payload[i]);
                i += 1;
                continue;
            }
            if i + 1 >= payload.len() {
                return Err(Error::input("truncated match token"));
            }
            let d = payload[i] as usize | ((payload[i + 1] >> 4) as usize) << 8;
            let mut l = (payload[i + 1] & 0x0f) as usize;
            i += 2;
            if l == 15 {
                let ext = *payload.get(i).ok_or_else(|| Error::input("truncated match length"))?;
                l += ext as usize;
                i += 1;
            }
            let dist = d + 1;
            let len = l + MIN_MATCH;
            if dist > out.len() {
                return Err(Error::input("match reaches before start of output"));
            }
            let start = out.len() - dist;
            for k in 0..len {
                let b = out[start + k];
                out.push(b);
            }
        }
    }
    Ok(out)
}

/// One compressed chunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompressedChunk {
    pub node_id: NodeId,
    pub timestamp_us: u64,
    pub payload: Vec<u8>,
    pub original_size: u32,
    pub compressed_size: u32,
}

impl CompressedChunk {
    /// `[u16 version][u32 original_size][u32 compressed_size][payload]`, little-endian.
    pub fn to_container(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(10 + self.payload.len());
        out.extend_from_slice(&CONTAINER_VERSION.to_le_bytes());
        out.extend_from_slice(&self.original_size.to_le_bytes());
        out.extend_from_slice(&self.compressed_size.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_container(node_id: NodeId, timestamp_us: u64, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 {
            return Err(Error::input("container shorter than its header"));
        }
        let version = u16::from_le_bytes([bytes[0], bytes[1]]);
        if version != CONTAINER_VERSION {
            return Err(Error::input(format!("unsupported container version {version}")));
        }
        let original_size = u32::from_le_bytes(bytes[2..6].try_into().expect("4 bytes"));
        let compressed_size = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes"));
        let payload = bytes[10..].to_vec();
        if payload.len() != compressed_size as usize {
            return Err(Error::input("container payload length does not match header"));
        }
        Ok(Self {
            node_id,
            timestamp_us,
            payload,
            original_size,
            compressed_size,
        })
    }

    /// `max(0, 1 - compressed / original)`.
    pub fn rate(&self) -> f64 {
        compression_rate(self.original_size as usize, self.compressed_size as usize)
    }
}

pub fn compression_rate(original: usize, compressed: usize) -> f64 {
    if original == 0 {
        return 0.0;
    }
    (1.0 - compressed as f64 / original as f64).clamp(0.0, 1.0)
}

pub fn compress_chunk(chunk: &PressureChunk, quantizer: &Quantizer) -> Result<CompressedChunk> {
    let mut comp = Compressor::new();
    compress_chunk_with(&mut comp, chunk, quantizer)
}

/// [`compress_chunk`] reusing encoder state.
pub fn compress_chunk_with(
    comp: &mut Compressor,
    chunk: &PressureChunk,
    quantizer: &Quantizer,
) -> Result<CompressedChunk> {
    quantizer.validate()?;
    if chunk.samples.is_empty() {
        return Err(Error::input("cannot compress an empty chunk"));
    }
    if let Some(bad) = chunk.samples.iter().find(|x| !x.is_finite()) {
        return Err(Error::input(format!("chunk sample {bad} is not finite")));
    }
    let raw = quantizer.encode(&chunk.samples);
    let payload = comp.compress(&raw);
    Ok(CompressedChunk {
        node_id: chunk.node_id,
        timestamp_us: chunk.timestamp_us,
        original_size: raw.len() as u32,
        compressed_size: payload.len() as u32,
        payload,
    })
}

/// Quantized samples recovered from a chunk.
pub fn decompress_chunk(chunk: &CompressedChunk, quantizer: &Quantizer) -> Result<Vec<f64>> {
    let raw = decompress_bytes(&chunk.payload)?;
    if raw.len() != chunk.original_size as usize {
        return Err(Error::input("decompressed size does not match header"));
    }
    quantizer.decode(&raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionRatePoint {
    pub timestamp_us: u64,
    pub rate: f64,
}

pub fn rate_stream(chunks: &[CompressedChunk]) -> Vec<CompressionRatePoint> {
    chunks
        .iter()
        .map(|c| CompressionRatePoint {
            timestamp_us: c.timestamp_us,
            rate: c.rate(),
        })
        .collect()
}

/// Compresses the chunks of one node's stream, reusing buffers.
pub struct ChunkRateMeter {
    quantizer: Quantizer,
    comp: Compressor,
    raw: Vec<u8>,
    packed: Vec<u8>,
}

impl ChunkRateMeter {
    pub fn new(quantizer: Quantizer) -> Result<Self> {
        quantizer.validate()?;
        Ok(Self {
            quantizer,
            comp: Compressor::new(),
            raw: Vec::new(),
            packed: Vec::new(),
        })
    }

    /// Compressed size and rate of one chunk of samples.
    pub fn measure(&mut self, samples: &[f64]) -> (usize, f64) {
        self.quantizer.encode_into(samples, &mut self.raw);
        self.comp.compress_into(&self.raw, &mut self.packed);
        (self.packed.len(), compression_rate(self.raw.len(), self.packed.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{mean, variance};
    use proptest::prelude::*;
    use rand::{Rng, RngCore, SeedableRng};

    fn chunk(samples: Vec<f64>) -> PressureChunk {
        PressureChunk {
            node_id: NodeId(1),
            timestamp_us: 0,
            samples,
        }
    }

    #[test]
    fn constant_chunk_compresses_well() {
        let c = compress_chunk(&chunk(vec![52.37; 100]), &Quantizer::default()).unwrap();
        // literal, literal, one 198-byte match (with extension): 1 flag + 2 + 3
        assert_eq!(c.compressed_size, 6);
        assert!(c.rate() >= 0.9);
    }

    #[test]
    fn random_bytes_do_not_compress() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut bytes = vec![0u8; 200];
        rng.fill_bytes(&mut bytes);
        let packed = Compressor::new().compress(&bytes);
        assert!(compression_rate(200, packed.len()) <= 0.05);
        assert_eq!(decompress_bytes(&packed).unwrap(), bytes);
    }

    #[test]
    fn empty_chunk_is_rejected() {
        assert!(compress_chunk(&chunk(vec![]), &Quantizer::default()).is_err());
        assert!(compress_chunk(&chunk(vec![f64::NAN]), &Quantizer::default()).is_err());
        let bad = Quantizer {
            resolution_m: 0.01,
            levels: 1,
        };
        assert!(compress_chunk(&chunk(vec![1.0]), &bad).is_err());
    }

    #[test]
    fn container_round_trip() {
        let c = compress_chunk(
            &chunk((0..100).map(|i| 40.0 + (i as f64 * 0.1).sin()).collect()),
            &Quantizer::default(),
        )
        .unwrap();
        let bytes = c.to_container();
        assert_eq!(&bytes[..2], &[1, 0]);
        assert_eq!(u32::from_le_bytes(bytes[2..6].try_into().unwrap()), 200);
        let back = CompressedChunk::from_container(c.node_id, c.timestamp_us, &bytes).unwrap();
        assert_eq!(back, c);
        assert!(CompressedChunk::from_container(c.node_id, 0, &bytes[..12]).is_err());
    }

    #[test]
    fn empty_rate_stream() {
        assert!(rate_stream(&[]).is_empty());
    }

    #[test]
    fn stable_sine_has_high_low_variance_rates() {
        let q = Quantizer::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let chunks: Vec<CompressedChunk> = (0..200)
            .map(|c| {
                let s = (0..100)
                    .map(|i| {
                        let t = (c * 100 + i) as f64 / 128.0;
                        50.0 + 0.5 * (t / 60.0).sin() + 0.01 * rng.random::<f64>()
                    })
                    .collect();
                compress_chunk(&chunk(s), &q).unwrap()
            })
            .collect();
        let rates: Vec<f64> = rate_stream(&chunks).iter().map(|p| p.rate).collect();
        assert!(mean(&rates) > 0.4, "mean {}", mean(&rates));
        assert!(variance(&rates) < 0.01);
    }

    #[test]
    fn step_with_ringing_drops_rate() {
        let q = Quantizer::default();
        let stable: Vec<f64> = (0..100).map(|i| 50.0 + 0.001 * i as f64).collect();
        let ringing: Vec<f64> = (0..100)
            .map(|i| {
                let t = i as f64 / 128.0;
                48.0 + 2.0 * (-t / 2.5).exp() * (2.0 * std::f64::consts::PI * 1.3 * t).sin()
            })
            .collect();
        let a = compress_chunk(&chunk(stable), &q).unwrap().rate();
        let b = compress_chunk(&chunk(ringing), &q).unwrap().rate();
        assert!(b < a - 0.3, "{b} vs {a}");
    }

    proptest! {
        #[test]
        fn lossless_on_arbitrary_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..3000)) {
            let packed = Compressor::new().compress(&bytes);
            prop_assert_eq!(decompress_bytes(&packed).unwrap(), bytes);
        }

        #[test]
        fn lossless_on_repetitive_bytes(
            alphabet in 1u8..4,
            len in 0usize..6000,
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random_range(0..alphabet)).collect();
            let packed = Compressor::new().compress(&bytes);
            prop_assert_eq!(decompress_bytes(&packed).unwrap(), bytes);
        }

        #[test]
        fn quantized_chunk_round_trip(samples in proptest::collection::vec(-10.0f64..700.0, 1..300)) {
            let q = Quantizer::default();
            let c = compress_chunk(&chunk(samples.clone()), &q).unwrap();
            let back = decompress_chunk(&c, &q).unwrap();
            let expected = q.decode(&q.encode(&samples)).unwrap();
            prop_assert_eq!(back, expected);
        }

        #[test]
        fn duplicating_first_half_never_grows(
            half in proptest::collection::vec(any::<u8>(), 1..400),
            second in proptest::collection::vec(0u8..3, 1..400),
        ) {
            let m = half.len().min(second.len());
            let mut original = half[..m].to_vec();
            original.extend_from_slice(&second[..m]);
            let mut dup = half[..m].to_vec();
            dup.extend_from_slice(&half[..m]);
            let mut comp = Compressor::new();
            let a = comp.compress(&original).len();
            let b = comp.compress(&dup).len();
            prop_assert!(b <= a, "dup {} > original {}", b, a);
        }
    }
}
