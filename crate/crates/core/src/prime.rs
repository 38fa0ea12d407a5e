//! Segmented sieve, indexed prime access and the Rosser-type estimates.

use std::io::{Read, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, Position};
use crate::report::{VerificationReport, Witness};

/// Segment length (in odd numbers) used when none is configured.
pub const DEFAULT_SEGMENT_LEN: usize = 1 << 18;

/// Largest sieve limit supported; primes are stored as `u32`.
pub const MAX_LIMIT: u64 = u32::MAX as u64;

/// Which prime an index `m` names.
///
/// `ZeroBased` is the convention of `f(n) = floor(p_n / n)`: `p_0 = 2`.
/// `OneBased` is the classical "m-th prime" (`p_1 = 2`) in which the
/// Rosser-type estimates and the `p_7012 / 7012` maximum are stated.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[serde(rename_all = "snake_case")]
pub enum IndexConvention {
    ZeroBased,
    OneBased,
}

impl std::fmt::Display for IndexConvention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IndexConvention::ZeroBased => "zero-based (p_0 = 2)",
            IndexConvention::OneBased => "one-based (p_1 = 2)",
        })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SieveConfig {
    /// Odd numbers per segment.
    pub segment_len: usize,
}

impl Default for SieveConfig {
    fn default() -> Self {
        SieveConfig {
            segment_len: DEFAULT_SEGMENT_LEN,
        }
    }
}

/// All primes up to `limit`, indexed from 0 (`index 0 -> 2`).
///
/// Immutable after construction.
#[derive(Clone, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u32>,
}

impl std::fmt::Debug for PrimeTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PrimeTable")
            .field("limit", &self.limit)
            .field("count", &self.primes.len())
            .finish()
    }
}

/// Builds the table of primes `<= limit` with the default segment length.
pub fn sieve_upto(limit: u64) -> Result<PrimeTable> {
    PrimeTable::sieve(limit)
}

/// `p_n`, zero-based.
pub fn nth_prime(table: &PrimeTable, n: u64) -> Result<u64> {
    table.nth(n)
}

/// `floor(p_n / n)` for `n >= 1`.
pub fn prime_quotient(table: &PrimeTable, n: u64) -> Result<u64> {
    table.quotient(n)
}

/// `p_n mod n` for `n >= 1`.
pub fn prime_remainder(table: &PrimeTable, n: u64) -> Result<u64> {
    table.remainder(n)
}

impl PrimeTable {
    pub fn sieve(limit: u64) -> Result<Self> {
        Self::sieve_with(limit, &SieveConfig::default())
    }

    pub fn sieve_with(limit: u64, config: &SieveConfig) -> Result<Self> {
        if limit < 2 {
            return Err(Error::Domain(format!(
                "sieve limit must be at least 2, got {limit}"
            )));
        }
        if limit > MAX_LIMIT {
            return Err(Error::Domain(format!(
                "sieve limit {limit} exceeds the supported maximum {MAX_LIMIT}"
            )));
        }
        if config.segment_len == 0 {
            return Err(Error::Domain("segment length must be positive".into()));
        }
        Ok(PrimeTable {
            limit,
            primes: segmented_sieve(limit, config.segment_len),
        })
    }

    /// Builds a table from an explicit list; used by the cache reader.
    fn from_parts(limit: u64, primes: Vec<u32>) -> Self {
        PrimeTable { limit, primes }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn count(&self) -> u64 {
        self.primes.len() as u64
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.primes
    }

    pub fn last(&self) -> u64 {
        *self
            .primes
            .last()
            .expect("table holds at least the prime 2") as u64
    }

    fn out_of_range(&self, index: u64) -> Error {
        Error::PrimeIndex {
            index,
            limit: self.limit,
            count: self.count(),
        }
    }

    /// `p_n` under the zero-based convention.
    pub fn nth(&self, n: u64) -> Result<u64> {
        self.primes
            .get(usize::try_from(n).map_err(|_| self.out_of_range(n))?)
            .map(|&p| p as u64)
            .ok_or_else(|| self.out_of_range(n))
    }

    /// The prime named by `m` under `convention`.
    pub fn prime_at(&self, m: u64, convention: IndexConvention) -> Result<u64> {
        match convention {
            IndexConvention::ZeroBased => self.nth(m),
            IndexConvention::OneBased => {
                if m == 0 {
                    return Err(Error::Domain("one-based prime index starts at 1".into()));
                }
                self.nth(m - 1).map_err(|_| self.out_of_range(m))
            }
        }
    }

    /// Largest valid index under `convention`.
    pub fn max_index(&self, convention: IndexConvention) -> u64 {
        match convention {
            IndexConvention::ZeroBased => self.count() - 1,
            IndexConvention::OneBased => self.count(),
        }
    }

    pub fn quotient(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::Domain("floor(p_n / n) is undefined at n = 0".into()));
        }
        Ok(self.nth(n)? / n)
    }

    pub fn remainder(&self, n: u64) -> Result<u64> {
        if n == 0 {
            return Err(Error::Domain("p_n mod n is undefined at n = 0".into()));
        }
        Ok(self.nth(n)? % n)
    }

    pub fn is_prime(&self, p: u64) -> Result<bool> {
        if p > self.limit {
            return Err(Error::Domain(format!(
                "{p} exceeds the sieve limit {}",
                self.limit
            )));
        }
        let Ok(p) = u32::try_from(p) else {
            return Ok(false);
        };
        Ok(self.primes.binary_search(&p).is_ok())
    }

    /// Writes the binary cache: magic `PQPT`, version, limit, count (all
    /// little endian), then LEB128-encoded gaps between consecutive primes.
    pub fn write_cache<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&CACHE_VERSION.to_le_bytes())?;
        out.write_all(&self.limit.to_le_bytes())?;
        out.write_all(&self.count().to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.primes.len() + 16);
        let mut prev = 0u32;
        for &p in &self.primes {
            write_leb128(&mut buf, (p - prev) as u64);
            prev = p;
        }
        out.write_all(&buf)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_cache<R: Read>(mut input: R) -> Result<Self> {
        let mut header = [0u8; 24];
        input
            .read_exact(&mut header)
            .map_err(|e| Error::Cache(format!("truncated header: {e}")))?;
        if &header[0..4] != CACHE_MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let limit = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let count = u64::from_le_bytes(header[16..24].try_into().unwrap());
        if !(2..=MAX_LIMIT).contains(&limit) {
            return Err(Error::Cache(format!("invalid limit {limit}")));
        }
        let mut body = Vec::new();
        input.read_to_end(&mut body)?;
        let mut primes = Vec::with_capacity(count as usize);
        let mut pos = 0usize;
        let mut prev = 0u64;
        while pos < body.len() {
            let (gap, used) = read_leb128(&body[pos..])
                .ok_or_else(|| Error::Cache(format!("malformed gap at byte {pos}")))?;
            pos += used;
            if gap == 0 {
                return Err(Error::Cache("zero gap".into()));
            }
            prev += gap;
            if prev > limit {
                return Err(Error::Cache(format!("prime {prev} exceeds limit {limit}")));
            }
            primes.push(prev as u32);
        }
        if primes.len() as u64 != count {
            return Err(Error::Cache(format!(
                "header says {count} primes, body holds {}",
                primes.len()
            )));
        }
        if primes.first() != Some(&2) {
            return Err(Error::Cache("table must start at 2".into()));
        }
        Ok(PrimeTable::from_parts(limit, primes))
    }
}

const CACHE_MAGIC: &[u8; 4] = b"PQPT";
const CACHE_VERSION: u32 = 1;

fn write_leb128(out: &mut Vec<u8>, mut v: u64) {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn read_leb128(bytes: &[u8]) -> Option<(u64, usize)> {
    let mut v = 0u64;
    for (i, &b) in bytes.iter().enumerate().take(10) {
        v |= ((b & 0x7f) as u64) << (7 * i);
        if b & 0x80 == 0 {
            return Some((v, i + 1));
        }
    }
    None
}

/// Odd-only segmented sieve of Eratosthenes. Segment `s` covers the odd
/// numbers `lo, lo + 2, ..., lo + 2 (segment_len - 1)`.
fn segmented_sieve(limit: u64, segment_len: usize) -> Vec<u32> {
    let mut primes = Vec::with_capacity(prime_count_upper_estimate(limit));
    primes.push(2);
    if limit < 3 {
        return primes;
    }
    let root = limit.isqrt();
    let base = small_odd_primes(root);
    // Next odd multiple of each base prime still to be crossed out.
    let mut next: Vec<u64> = base.iter().map(|&p| p * p).collect();
    let mut composite = vec![false; segment_len];
    let span = 2 * segment_len as u64;
    let mut lo = 3u64;
    while lo <= limit {
        let hi = (lo + span - 2).min(if limit % 2 == 0 { limit - 1 } else { limit });
        let len = ((hi - lo) / 2 + 1) as usize;
        composite[..len].fill(false);
        for (j, &p) in base.iter().enumerate() {
            if p * p > hi {
                break;
            }
            let mut m = next[j];
            while m <= hi {
                composite[((m - lo) / 2) as usize] = true;
                m += 2 * p;
            }
            next[j] = m;
        }
        primes.extend(
            composite[..len]
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(i, _)| (lo + 2 * i as u64) as u32),
        );
        lo += span;
    }
    primes
}

/// Odd primes `<= n` by a plain sieve.
fn small_odd_primes(n: u64) -> Vec<u64> {
    if n < 3 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in (3..=n).step_by(2) {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i * i;
        while j <= n {
            composite[j] = true;
            j += 2 * i;
        }
    }
    out
}

/// Rosser–Schoenfeld style `pi(x) < 1.25506 x / ln x`, used only to size allocations.
fn prime_count_upper_estimate(limit: u64) -> usize {
    if limit < 17 {
        return 8;
    }
    let x = limit as f64;
    (1.25506 * x / x.ln()) as usize + 16
}

/// A decimal constant held exactly as `numer / 10^scale`.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScaledDecimal {
    pub numer: u64,
    pub scale: u32,
}

impl ScaledDecimal {
    pub const fn new(numer: u64, scale: u32) -> Self {
        ScaledDecimal { numer, scale }
    }

    pub fn denom(&self) -> u64 {
        10u64.pow(self.scale)
    }

    pub fn enclosure(&self) -> Interval {
        Interval::from_ratio(self.numer, self.denom())
    }
}

impl std::fmt::Display for ScaledDecimal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let d = self.denom();
        write!(
            f,
            "{}.{:0width$}",
            self.numer / d,
            self.numer % d,
            width = self.scale as usize
        )
    }
}

/// `m log m + m log log m - C m` bounds on the `m`-th prime.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub struct RosserBounds {
    pub lower_const: ScaledDecimal,
    pub upper_const: ScaledDecimal,
    pub lower_min_m: u64,
    pub upper_min_m: u64,
}

impl Default for RosserBounds {
    fn default() -> Self {
        RosserBounds {
            lower_const: ScaledDecimal::new(10_072_629, 7),
            upper_const: ScaledDecimal::new(9_385, 4),
            lower_min_m: 2,
            upper_min_m: 7022,
        }
    }
}

/// Encloses `m log m + m log log m`, the common head of both bounds.
fn head(m: u64) -> (Interval, Interval) {
    let mi = Interval::from_u64(m);
    let log_m = mi.ln();
    let head = mi * log_m + mi * log_m.ln();
    (mi, head)
}

impl RosserBounds {
    pub fn lower(&self, m: u64) -> Result<Interval> {
        if m < self.lower_min_m {
            return Err(Error::Domain(format!(
                "lower estimate holds for m >= {}, got {m}",
                self.lower_min_m
            )));
        }
        let (mi, h) = head(m);
        Ok(h - mi * self.lower_const.enclosure())
    }

    pub fn upper(&self, m: u64) -> Result<Interval> {
        if m < self.upper_min_m {
            return Err(Error::Domain(format!(
                "upper estimate holds for m >= {}, got {m}",
                self.upper_min_m
            )));
        }
        let (mi, h) = head(m);
        Ok(h - mi * self.upper_const.enclosure())
    }

    /// Smallest `m >= lower_min_m` whose certified lower bound gives
    /// `p_m / m >= n + 1`, hence `floor(p_m / m) > n`. A sufficient search
    /// limit for `f^-1(n)`.
    pub fn inverse_search_hint(&self, n: u64) -> u64 {
        let target = (n + 1) as f64;
        // log m grows slowly; double then bisect.
        let ok = |m: u64| {
            let lo = self.lower(m).expect("m >= lower_min_m").lo();
            lo / m as f64 >= target * (1.0 + 1e-12)
        };
        let mut hi = self.lower_min_m.max(2);
        while !ok(hi) {
            if hi > u64::MAX / 4 {
                return u64::MAX;
            }
            hi *= 2;
        }
        let mut lo = self.lower_min_m.max(2);
        if ok(lo) {
            return lo;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Certified lower estimate `m log m + m log log m - 1.0072629 m` (`m >= 2`).
pub fn rosser_lower(m: u64) -> Result<Interval> {
    RosserBounds::default().lower(m)
}

/// Certified upper estimate `m log m + m log log m - 0.9385 m` (`m >= 7022`).
pub fn rosser_upper(m: u64) -> Result<Interval> {
    RosserBounds::default().upper(m)
}

/// Checks both estimates against the sieve for every `m` in `[start, end]`,
/// the upper one only from `upper_min_m` on. An enclosure that straddles the
/// prime makes the report inconclusive, never a pass.
pub fn check_estimates(
    table: &PrimeTable,
    start: u64,
    end: u64,
    convention: IndexConvention,
) -> Result<VerificationReport> {
    check_estimates_with(table, &RosserBounds::default(), start, end, convention)
}

pub fn check_estimates_with(
    table: &PrimeTable,
    bounds: &RosserBounds,
    start: u64,
    end: u64,
    convention: IndexConvention,
) -> Result<VerificationReport> {
    let started = Instant::now();
    if end > table.max_index(convention) {
        return Err(Error::PrimeIndex {
            index: end,
            limit: table.limit(),
            count: table.count(),
        });
    }
    let start = start.max(bounds.lower_min_m);
    let mut report = VerificationReport::new(
        "estimates",
        "Rosser-type estimates of p_m",
        format!("primes<= {}", table.limit()),
    )
    .with_range("lower", start, end)
    .with_limit("sieve_limit", table.limit());
    if end >= bounds.upper_min_m {
        report = report.with_range("upper", start.max(bounds.upper_min_m), end);
    }
    report.observe("convention", serde_json::to_value(convention).unwrap());
    report.observe("lower_const", bounds.lower_const.to_string());
    report.observe("upper_const", bounds.upper_const.to_string());

    let lower_c = bounds.lower_const.enclosure();
    let upper_c = bounds.upper_const.enclosure();
    let (mut lower_violations, mut upper_violations, mut undecided) = (0u64, 0u64, 0u64);
    let mut first_undecided = None;
    for m in start..=end {
        let prime = table.prime_at(m, convention)?;
        let p = prime as f64;
        let (mi, h) = head(m);
        let low = h - mi * lower_c;
        match low.position(p) {
            Position::Below => {}
            Position::Above => {
                lower_violations += 1;
                report.fail(Witness::RosserLower {
                    m,
                    prime,
                    bound_lo: low.lo(),
                    bound_hi: low.hi(),
                    convention,
                });
            }
            Position::Straddles => {
                undecided += 1;
                first_undecided.get_or_insert(m);
            }
        }
        if m >= bounds.upper_min_m {
            let up = h - mi * upper_c;
            match up.position(p) {
                Position::Above => {}
                Position::Below => {
                    upper_violations += 1;
                    report.fail(Witness::RosserUpper {
                        m,
                        prime,
                        bound_lo: up.lo(),
                        bound_hi: up.hi(),
                        convention,
                    });
                }
                Position::Straddles => {
                    undecided += 1;
                    first_undecided.get_or_insert(m);
                }
            }
        }
    }
    report.observe("lower_violations", lower_violations);
    report.observe("upper_violations", upper_violations);
    report.observe("undecided", undecided);
    if let Some(m) = first_undecided {
        report.inconclusive(format!(
            "{undecided} comparisons undecided by interval arithmetic, first at m = {m}"
        ));
    }
    Ok(report.finish(started))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial_division(n: u64) -> bool {
        n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
    }

    #[test]
    fn small_tables() {
        let t = sieve_upto(10).unwrap();
        assert_eq!(t.as_slice(), &[2, 3, 5, 7]);
        assert_eq!(t.count(), 4);
        let t = sieve_upto(2).unwrap();
        assert_eq!(t.as_slice(), &[2]);
        assert_eq!(sieve_upto(3).unwrap().as_slice(), &[2, 3]);
        assert!(matches!(sieve_upto(1), Err(Error::Domain(_))));
        assert!(matches!(sieve_upto(0), Err(Error::Domain(_))));
    }

    #[test]
    fn matches_trial_division_for_every_segment_length() {
        let expected: Vec<u32> = (0..5000u64)
            .filter(|&n| trial_division(n))
            .map(|n| n as u32)
            .collect();
        for seg in [1usize, 2, 3, 7, 64, 1000, 1 << 16] {
            let t = PrimeTable::sieve_with(4999, &SieveConfig { segment_len: seg }).unwrap();
            assert_eq!(t.as_slice(), &expected[..], "segment_len {seg}");
        }
        // limits landing on even numbers and prime squares
        for limit in [4u64, 8, 9, 25, 49, 50, 121, 122] {
            let t = PrimeTable::sieve_with(limit, &SieveConfig { segment_len: 3 }).unwrap();
            let want: Vec<u32> = (0..=limit)
                .filter(|&n| trial_division(n))
                .map(|n| n as u32)
                .collect();
            assert_eq!(t.as_slice(), &want[..], "limit {limit}");
        }
    }

    #[test]
    fn indexing_conventions() {
        let t = sieve_upto(100).unwrap();
        assert_eq!(t.nth(0).unwrap(), 2);
        assert_eq!(t.nth(4).unwrap(), 11);
        assert_eq!(t.prime_at(1, IndexConvention::OneBased).unwrap(), 2);
        assert_eq!(t.prime_at(25, IndexConvention::OneBased).unwrap(), 97);
        assert!(t.prime_at(0, IndexConvention::OneBased).is_err());
        match t.nth(25) {
            Err(Error::PrimeIndex {
                index,
                limit,
                count,
            }) => {
                assert_eq!((index, limit, count), (25, 100, 25));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quotient_and_remainder() {
        let t = sieve_upto(100).unwrap();
        assert_eq!((t.quotient(1).unwrap(), t.remainder(1).unwrap()), (3, 0));
        assert_eq!((t.quotient(4).unwrap(), t.remainder(4).unwrap()), (2, 3));
        assert!(matches!(t.quotient(0), Err(Error::Domain(_))));
        assert!(matches!(t.remainder(0), Err(Error::Domain(_))));
        for n in 1..t.count() {
            assert_eq!(
                n * t.quotient(n).unwrap() + t.remainder(n).unwrap(),
                t.nth(n).unwrap()
            );
        }
    }

    #[test]
    fn cache_round_trip_and_corruption() {
        let t = sieve_upto(10_000).unwrap();
        let mut bytes = Vec::new();
        t.write_cache(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"PQPT");
        let back = PrimeTable::read_cache(&bytes[..]).unwrap();
        assert_eq!(back, t);

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            PrimeTable::read_cache(&bad[..]),
            Err(Error::Cache(_))
        ));
        let truncated = &bytes[..bytes.len() - 1];
        assert!(PrimeTable::read_cache(truncated).is_err());
        assert!(PrimeTable::read_cache(&bytes[..10]).is_err());
    }

    #[test]
    fn scaled_constants_print_exactly() {
        let b = RosserBounds::default();
        assert_eq!(b.lower_const.to_string(), "1.0072629");
        assert_eq!(b.upper_const.to_string(), "0.9385");
        assert!(b.lower_const.enclosure().contains(1.0072629));
    }

    #[test]
    fn estimate_domains() {
        assert!(rosser_lower(1).is_err());
        assert!(rosser_upper(7021).is_err());
        // m = 2: 2 log 2 + 2 log log 2 - 2.0145258 is about -1.36
        let l = rosser_lower(2).unwrap();
        assert!(l.contains(2.0 * 2f64.ln() + 2.0 * 2f64.ln().ln() - 2.0145258));
        assert_eq!(l.position(5.0), Position::Below);
    }

    #[test]
    fn upper_estimate_breaks_below_8602() {
        let t = sieve_upto(200_000).unwrap();
        // classical indexing: p_7022 = 70919 exceeds the bound 70918.61...,
        // as do 17 indices in [8581, 8601]
        let r = check_estimates(&t, 2, 17_000, IndexConvention::OneBased).unwrap();
        assert_eq!(r.result, crate::report::Outcome::Fail);
        assert!(matches!(
            r.witness,
            Some(Witness::RosserUpper {
                m: 7022,
                prime: 70919,
                ..
            })
        ));
        assert_eq!(r.observations["upper_violations"], 18);
        assert_eq!(r.observations["lower_violations"], 0);
        assert_eq!(r.observations["undecided"], 0);
        let bounds = RosserBounds {
            upper_min_m: 8602,
            ..RosserBounds::default()
        };
        let r = check_estimates_with(&t, &bounds, 2, 17_000, IndexConvention::OneBased).unwrap();
        assert!(r.passed(), "{}", r.to_json());

        let r0 = check_estimates(&t, 2, 17_000, IndexConvention::ZeroBased).unwrap();
        assert_eq!(r0.result, crate::report::Outcome::Fail);
        assert_eq!(r0.observations["upper_violations"], 27);
        assert_eq!(r0.observations["lower_violations"], 0);
    }

    #[test]
    fn search_hint_is_sufficient() {
        let t = sieve_upto(2_000_000).unwrap();
        let b = RosserBounds::default();
        for n in 0..12u64 {
            let m = b.inverse_search_hint(n);
            if m < t.count() {
                assert!(t.quotient(m).unwrap() > n, "n = {n}, hint {m}");
            }
        }
    }
}
