//! Aligned versus offset-by-one copies over several large vectors.
//!
//! Every pattern copies `n - 1` elements of each source vector into a
//! destination vector. The offset patterns displace one side of the copy by
//! one element, like the x-shift of a streaming step: `offsetRead` is the
//! gather (`dst[k] = src[k + 1]`, pull) and `offsetWrite` the scatter
//! (`dst[k + 1] = src[k]`, push). The wrapping sum of every value moved is
//! accumulated inside the timed loop and checked afterwards; the line-kernel
//! variant sums the destination once the clock has stopped.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::streaming::{gather_line, scatter_line, StreamStrategy};

/// Elements copied per vector before moving to the next one.
const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum AccessPattern {
    AlignedRead,
    OffsetRead,
    AlignedWrite,
    OffsetWrite,
}

impl AccessPattern {
    pub const ALL: [AccessPattern; 4] =
        [AccessPattern::AlignedRead, AccessPattern::OffsetRead, AccessPattern::AlignedWrite, AccessPattern::OffsetWrite];

    /// `(read offset, write offset)`.
    fn offsets(self) -> (usize, usize) {
        match self {
            AccessPattern::OffsetRead => (1, 0),
            AccessPattern::OffsetWrite => (0, 1),
            _ => (0, 0),
        }
    }

    /// The aligned pattern an offset pattern is compared with.
    pub fn aligned_counterpart(self) -> AccessPattern {
        match self {
            AccessPattern::OffsetRead | AccessPattern::AlignedRead => AccessPattern::AlignedRead,
            AccessPattern::OffsetWrite | AccessPattern::AlignedWrite => AccessPattern::AlignedWrite,
        }
    }
}

impl std::fmt::Display for AccessPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AccessPattern::AlignedRead => "alignedRead",
            AccessPattern::OffsetRead => "offsetRead",
            AccessPattern::AlignedWrite => "alignedWrite",
            AccessPattern::OffsetWrite => "offsetWrite",
        })
    }
}

impl std::str::FromStr for AccessPattern {
    type Err = crate::ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AccessPattern::ALL
            .into_iter()
            .find(|p| p.to_string().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::ConfigError::UnknownValue { key: "pattern", value: s.to_owned() })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MembenchConfig {
    /// Bytes per vector.
    pub vector_bytes: usize,
    /// Independent vectors, the ILP width.
    pub vectors: usize,
    pub pattern: AccessPattern,
    /// Route the offset copy through a streaming line kernel.
    pub strategy: Option<StreamStrategy>,
    /// Timed passes; the fastest one is reported.
    pub repeats: usize,
    /// Skip the last-level cache size check.
    pub allow_cache_resident: bool,
}

impl MembenchConfig {
    pub fn new(vector_bytes: usize, vectors: usize, pattern: AccessPattern) -> Self {
        Self { vector_bytes, vectors, pattern, strategy: None, repeats: 3, allow_cache_resident: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MembenchResult {
    pub pattern: AccessPattern,
    pub vector_bytes: usize,
    pub vectors: usize,
    pub strategy: Option<String>,
    /// Bytes read plus bytes written in one pass.
    pub bytes: usize,
    /// Fastest pass.
    pub seconds: f64,
    pub bandwidth: f64,
    pub checksum: u32,
}

/// Offset bandwidth as a fraction of the aligned one.
pub fn offset_ratio(offset: &MembenchResult, aligned: &MembenchResult) -> f64 {
    offset.bandwidth / aligned.bandwidth
}

/// Size of the largest CPU cache reported by sysfs.
pub fn last_level_cache_bytes() -> Option<usize> {
    let dir = std::fs::read_dir("/sys/devices/system/cpu/cpu0/cache").ok()?;
    dir.filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("index"))
        .filter_map(|e| std::fs::read_to_string(e.path().join("size")).ok())
        .filter_map(|s| parse_cache_size(s.trim()))
        .max()
}

fn parse_cache_size(s: &str) -> Option<usize> {
    let (digits, scale) = match s.chars().last()? {
        'K' => (&s[..s.len() - 1], 1 << 10),
        'M' => (&s[..s.len() - 1], 1 << 20),
        'G' => (&s[..s.len() - 1], 1 << 30),
        _ => (s, 1),
    };
    digits.parse::<usize>().ok().map(|v| v * scale)
}

fn alloc(len: usize) -> Result<Vec<u32>, BenchError> {
    let mut v = Vec::new();
    v.try_reserve_exact(len).map_err(|_| BenchError::InsufficientMemory { bytes: len * 4 })?;
    v.resize(len, 0);
    Ok(v)
}

/// Deterministic, position-dependent fill so that a wrong offset changes
/// the checksum.
fn fill(v: &mut [u32], seed: u32) {
    for (k, x) in v.iter_mut().enumerate() {
        *x = (k as u32).wrapping_mul(0x9E37_79B9) ^ seed.wrapping_mul(0x85EB_CA6B);
    }
}

/// Wrapping sum of the values an `(r, w)` copy moves, computed directly.
pub(crate) fn expected_checksum(src: &[Vec<u32>], read_offset: usize) -> u32 {
    src.iter()
        .map(|v| v[read_offset..read_offset + v.len() - 1].iter().fold(0u32, |a, &x| a.wrapping_add(x)))
        .fold(0u32, u32::wrapping_add)
}

fn copy_pass(src: &[Vec<u32>], dst: &mut [Vec<u32>], r: usize, w: usize) -> u32 {
    let n = src[0].len() - 1;
    let mut sums = vec![0u32; src.len()];
    let mut k0 = 0;
    while k0 < n {
        let k1 = (k0 + CHUNK).min(n);
        for ((s, d), sum) in src.iter().zip(dst.iter_mut()).zip(sums.iter_mut()) {
            let s = &s[k0 + r..k1 + r];
            let d = &mut d[k0 + w..k1 + w];
            let mut acc = *sum;
            for (o, &x) in d.iter_mut().zip(s) {
                *o = x;
                acc = acc.wrapping_add(x);
            }
            *sum = acc;
        }
        k0 = k1;
    }
    sums.into_iter().fold(0, u32::wrapping_add)
}

/// Same copy, with the displaced side handled by a streaming line kernel.
fn strategy_pass(src: &[Vec<u32>], dst: &mut [Vec<u32>], r: usize, w: usize, strategy: &StreamStrategy) {
    let mut scratch = Vec::new();
    for (s, d) in src.iter().zip(dst.iter_mut()) {
        let nx = s.len();
        let src_line: &[u32] = s;
        let mut dst_line: &mut [u32] = d;
        match (r, w) {
            // dst[x] = src[x + 1]
            (1, 0) => gather_line(strategy, &src_line, &mut dst_line, nx, -1, false, &mut scratch),
            // dst[x + 1] = src[x]
            (0, 1) => scatter_line(strategy, &src_line, &mut dst_line, nx, 1, false, &mut scratch),
            _ => gather_line(strategy, &src_line, &mut dst_line, nx, 0, false, &mut scratch),
        }
    }
}

/// Wrapping sum of the written range of every destination.
fn written_checksum(dst: &[Vec<u32>], w: usize) -> u32 {
    dst.iter()
        .map(|d| d[w..w + d.len() - 1].iter().fold(0u32, |a, &x| a.wrapping_add(x)))
        .fold(0u32, u32::wrapping_add)
}

/// Effective bandwidth of one access pattern.
pub fn membench(config: &MembenchConfig) -> Result<MembenchResult, BenchError> {
    let n = config.vector_bytes / 4;
    if n < 2 || config.vectors == 0 || config.repeats == 0 {
        return Err(crate::ConfigError::Invalid("membench needs vectors of at least 8 bytes and one repeat".into()).into());
    }
    let working_set = 2 * n * 4 * config.vectors;
    if !config.allow_cache_resident {
        if let Some(cache) = last_level_cache_bytes() {
            if working_set < 4 * cache {
                return Err(BenchError::CacheResident { working_set, cache });
            }
        }
    }
    let mut src = Vec::with_capacity(config.vectors);
    let mut dst = Vec::with_capacity(config.vectors);
    for v in 0..config.vectors {
        let mut s = alloc(n)?;
        fill(&mut s, v as u32);
        src.push(s);
        dst.push(alloc(n)?);
    }
    let (r, w) = config.pattern.offsets();
    let expected = expected_checksum(&src, r);
    let mut best = f64::INFINITY;
    let mut checksum = 0;
    for _ in 0..config.repeats {
        let t = Instant::now();
        checksum = match &config.strategy {
            None => copy_pass(&src, &mut dst, r, w),
            Some(s) => {
                strategy_pass(&src, &mut dst, r, w, s);
                let elapsed = t.elapsed().as_secs_f64();
                best = best.min(elapsed);
                // the line kernels do not accumulate, so verify after the clock stops
                written_checksum(&dst, w)
            }
        };
        if config.strategy.is_none() {
            best = best.min(t.elapsed().as_secs_f64());
        }
        if checksum != expected {
            return Err(BenchError::ChecksumMismatch { pattern: config.pattern, got: checksum, expected });
        }
    }
    let bytes = 2 * (n - 1) * 4 * config.vectors;
    Ok(MembenchResult {
        pattern: config.pattern,
        vector_bytes: config.vector_bytes,
        vectors: config.vectors,
        strategy: config.strategy.map(|s| s.to_string()),
        bytes,
        seconds: best,
        bandwidth: bytes as f64 / best,
        checksum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streaming::StrategyKind;

    fn small(pattern: AccessPattern) -> MembenchConfig {
        MembenchConfig { allow_cache_resident: true, ..MembenchConfig::new(40_000, 3, pattern) }
    }

    #[test]
    fn offset_read_checksum_matches_shifted_aligned_read() {
        let n = 10_000;
        let mut v = vec![0u32; n + 1];
        fill(&mut v, 7);
        let direct = v[1..].iter().fold(0u32, |a, &x| a.wrapping_add(x));
        // offsetRead over v reads what alignedRead reads over v shifted by one
        let mut shifted = v[1..].to_vec();
        shifted.push(0);
        let src = vec![v.clone()];
        let mut dst = vec![vec![0u32; n + 1]];
        assert_eq!(copy_pass(&src, &mut dst, 1, 0), direct);
        assert_eq!(expected_checksum(&src, 1), direct);
        assert_eq!(expected_checksum(&[shifted], 0), direct);
        assert_ne!(expected_checksum(&src, 0), direct);
    }

    #[test]
    fn patterns_move_the_intended_elements() {
        let src = vec![(0..50u32).collect::<Vec<_>>()];
        let mut dst = vec![vec![0u32; 50]];
        copy_pass(&src, &mut dst, 1, 0);
        assert_eq!(&dst[0][..49], &src[0][1..]);
        let mut dst = vec![vec![0u32; 50]];
        copy_pass(&src, &mut dst, 0, 1);
        assert_eq!(&dst[0][1..], &src[0][..49]);
        assert_eq!(dst[0][0], 0);
    }

    #[test]
    fn every_pattern_verifies() {
        for p in AccessPattern::ALL {
            let r = membench(&small(p)).unwrap();
            assert_eq!(r.bytes, 2 * 9_999 * 4 * 3);
            assert!(r.bandwidth > 0.0);
            assert_eq!(p.to_string().parse::<AccessPattern>().unwrap(), p);
        }
    }

    #[test]
    fn strategy_analogues_agree_with_plain_copy() {
        for p in [AccessPattern::OffsetRead, AccessPattern::OffsetWrite, AccessPattern::AlignedRead] {
            let plain = membench(&small(p)).unwrap();
            for kind in StrategyKind::ALL {
                let cfg = MembenchConfig { strategy: Some(StreamStrategy::new(kind, 64)), ..small(p) };
                assert_eq!(membench(&cfg).unwrap().checksum, plain.checksum, "{p} {kind}");
            }
        }
    }

    #[test]
    fn cache_sizes_parse() {
        assert_eq!(parse_cache_size("32K"), Some(32 * 1024));
        assert_eq!(parse_cache_size("300M"), Some(300 << 20));
        assert_eq!(parse_cache_size("12"), Some(12));
        assert_eq!(parse_cache_size("x"), None);
    }

    #[test]
    fn small_vectors_are_refused_unless_allowed() {
        if let Some(cache) = last_level_cache_bytes() {
            let cfg = MembenchConfig::new(4096, 1, AccessPattern::AlignedRead);
            assert!(matches!(membench(&cfg), Err(BenchError::CacheResident { cache: c, .. }) if c == cache));
        }
    }

    #[test]
    fn huge_request_fails_cleanly() {
        let cfg = MembenchConfig { allow_cache_resident: true, ..MembenchConfig::new(usize::MAX / 8, 1, AccessPattern::AlignedRead) };
        assert!(matches!(membench(&cfg), Err(BenchError::InsufficientMemory { .. })));
    }
}
