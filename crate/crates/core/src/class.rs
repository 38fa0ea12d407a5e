//! Pseudo-inverses and membership checks for the class `C(k, d, n0)`.
//!
//! A function belongs to `C(k, d, n0)` when it is `k`-almost increasing,
//! `f(y) - f(x) >= -k` for all `y >= x`, and its pseudo-inverse has at least
//! `(1/d)`-linear difference, `f^-1(n+1) - f^-1(n) > n/d` for all `n >= n0`.
//! Both properties quantify over all naturals; the checks here cover finite
//! ranges and say so in their reports.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::FunctionOracle;
use crate::report::{Outcome, VerificationReport, Witness};

/// The triple `(k, d, n0)`. Derived constants are computed on demand.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ClassParams {
    pub k: u64,
    pub d: u64,
    pub n0: u64,
}

impl ClassParams {
    pub fn new(k: u64, d: u64, n0: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("class parameter d must be positive".into()));
        }
        Ok(ClassParams { k, d, n0 })
    }

    /// `2 + 4d + n0^2 + k`; the threshold is `x0 = f^-1` of this value.
    pub fn x0_target(&self) -> u64 {
        2 + 4 * self.d + self.n0 * self.n0 + self.k
    }

    /// `n1 = 2 + 5d + n0^2`, the start of the domain of `n -> c n^2`.
    pub fn n1(&self) -> u64 {
        2 + 5 * self.d + self.n0 * self.n0
    }

    /// `c = 5d`.
    pub fn c(&self) -> u64 {
        5 * self.d
    }

    /// Width of the restricted congruences: `k + d`.
    pub fn slack(&self) -> u64 {
        self.k + self.d
    }

    pub fn x0(&self, f: &FunctionOracle, search_limit: u64) -> Result<u64> {
        pseudo_inverse(f, self.x0_target(), search_limit)
    }
}

impl std::fmt::Display for ClassParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{})", self.k, self.d, self.n0)
    }
}

impl std::str::FromStr for ClassParams {
    type Err = Error;

    /// Parses `k,d,n0`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [k, d, n0] = parts[..] else {
            return Err(Error::Domain(format!("expected k,d,n0, got {s:?}")));
        };
        let num = |t: &str| {
            t.parse::<u64>()
                .map_err(|e| Error::Domain(format!("bad class parameter {t:?}: {e}")))
        };
        ClassParams::new(num(k)?, num(d)?, num(n0)?)
    }
}

/// Incrementally computed pseudo-inverse `f^-1(n) = min { m : f(m+1) > n }`.
///
/// A single forward scan resolves every `n` below the running maximum of
/// `f`, so resolving `f^-1(0..=N)` costs one pass up to `f^-1(N)`.
/// The scan starts at `m = max(n_start, 1) - 1`.
#[derive(Clone, Debug)]
pub struct InverseTable {
    f: FunctionOracle,
    next_arg: u64,
    values: Vec<u64>,
}

impl InverseTable {
    pub fn new(f: &FunctionOracle) -> Self {
        InverseTable {
            f: f.clone(),
            next_arg: f.n_start().max(1),
            values: Vec::new(),
        }
    }

    pub fn oracle(&self) -> &FunctionOracle {
        &self.f
    }

    /// Smallest `m` the scan can return.
    pub fn first_m(&self) -> u64 {
        self.f.n_start().max(1) - 1
    }

    /// Number of resolved values: `f^-1(n)` is cached for `n < resolved()`.
    pub fn resolved(&self) -> u64 {
        self.values.len() as u64
    }

    /// `f^-1(n)`, scanning no further than `m = search_limit`.
    pub fn get(&mut self, n: u64, search_limit: u64) -> Result<u64> {
        if let Some(sup) = self.f.known_sup() {
            if n >= sup {
                return Err(Error::BoundedOracle {
                    oracle: self.f.id(),
                    sup,
                    n,
                });
            }
        }
        let last_m = match self.f.max_arg() {
            Some(max) => search_limit.min(max.saturating_sub(1)),
            None => search_limit,
        };
        while self.values.len() as u64 <= n {
            let j = self.next_arg;
            if j - 1 > last_m {
                return Err(Error::SearchExhausted { n, limit: last_m });
            }
            let v = self.f.eval(j)?;
            while (self.values.len() as u64) < v {
                self.values.push(j - 1);
            }
            self.next_arg += 1;
        }
        Ok(self.values[n as usize])
    }
}

/// `f^-1(n)`: the least `m` with `f(m+1) > n`.
pub fn pseudo_inverse(f: &FunctionOracle, n: u64, search_limit: u64) -> Result<u64> {
    InverseTable::new(f).get(n, search_limit)
}

/// Checks `f(y) - f(x) >= -k` for all `n_start <= x <= y <= range_end` in
/// one backward pass: the condition is `f(x) - min_{y >= x} f(y) <= k`.
pub fn check_k_almost_increasing(
    f: &FunctionOracle,
    k: u64,
    range_end: u64,
) -> Result<VerificationReport> {
    let started = Instant::now();
    let start = f.n_start();
    if range_end < start {
        return Err(Error::Domain(format!(
            "range end {range_end} precedes n_start {start}"
        )));
    }
    // evaluability of the far end is checked up front
    f.eval(range_end)?;
    let mut report = VerificationReport::new(
        "k-almost-increasing",
        "f(y) - f(x) >= -k for y >= x",
        f.id(),
    )
    .with_range("x", start, range_end)
    .with_limit("k", k);

    let (mut min_val, mut min_at) = (f.eval(range_end)?, range_end);
    let (mut worst, mut worst_pair) = (0u64, None);
    for x in (start..range_end).rev() {
        let fx = f.eval(x)?;
        if fx > min_val && fx - min_val > worst {
            worst = fx - min_val;
            worst_pair = Some((x, min_at, fx, min_val));
        }
        if fx < min_val {
            (min_val, min_at) = (fx, x);
        }
    }
    report.observe("worst_drop", worst);
    if worst > k {
        let (x, y, fx, fy) = worst_pair.expect("positive drop has a pair");
        report.fail(Witness::Descent { x, y, fx, fy, k });
    }
    Ok(report.finish(started))
}

/// Checks `d (f^-1(n+1) - f^-1(n)) > n` for `n0 <= n < n_max`, exactly.
///
/// Search exhaustion is returned as an error tagged with the first `n` that
/// could not be resolved; a bounded oracle fails with an
/// [`Witness::UndefinedInverse`] witness.
pub fn check_linear_difference(
    f: &FunctionOracle,
    d: u64,
    n0: u64,
    n_max: u64,
    search_limit: u64,
) -> Result<VerificationReport> {
    let mut inv = InverseTable::new(f);
    check_linear_difference_with(&mut inv, d, n0, n_max, search_limit)
}

pub fn check_linear_difference_with(
    inv: &mut InverseTable,
    d: u64,
    n0: u64,
    n_max: u64,
    search_limit: u64,
) -> Result<VerificationReport> {
    let started = Instant::now();
    if d == 0 {
        return Err(Error::Domain("d must be positive".into()));
    }
    if n_max < n0 {
        return Err(Error::Domain(format!("n_max {n_max} < n0 {n0}")));
    }
    let mut report = VerificationReport::new(
        "linear-difference",
        "f^-1(n+1) - f^-1(n) > n/d",
        inv.oracle().id(),
    )
    .with_range("n", n0, n_max.saturating_sub(1))
    .with_limit("d", d)
    .with_limit("search_limit", search_limit);
    let mut min_slack: Option<i128> = None;
    for n in n0..n_max {
        let (lo, hi) = match (inv.get(n, search_limit), inv.get(n + 1, search_limit)) {
            (Ok(lo), Ok(hi)) => (lo, hi),
            (Err(Error::BoundedOracle { sup, .. }), _)
            | (_, Err(Error::BoundedOracle { sup, .. })) => {
                report.fail(Witness::UndefinedInverse { n, sup });
                break;
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let gap = hi - lo;
        let slack = d as i128 * gap as i128 - n as i128;
        min_slack = Some(min_slack.map_or(slack, |s: i128| s.min(slack)));
        if slack <= 0 {
            report.fail(Witness::LinearDifference {
                n,
                inverse_n: lo,
                inverse_next: hi,
                d,
            });
            break;
        }
    }
    if let Some(s) = min_slack {
        report.observe("min_d_gap_minus_n", s as i64);
    }
    Ok(report.finish(started))
}

/// Conjunction of the two defining properties of `C(k, d, n0)` over finite ranges.
pub fn class_check(
    f: &FunctionOracle,
    params: &ClassParams,
    range_end: u64,
    n_max: u64,
    search_limit: u64,
) -> Result<VerificationReport> {
    let started = Instant::now();
    let mut report = VerificationReport::new("class", "membership in C(k,d,n0)", f.id())
        .with_params(*params)
        .with_range("x", f.n_start(), range_end)
        .with_range("n", params.n0, n_max.saturating_sub(1))
        .with_limit("search_limit", search_limit);
    report.note(
        "empirical membership over the checked ranges only; both conditions quantify over all naturals",
    );
    report.push_part(check_k_almost_increasing(f, params.k, range_end)?);
    match check_linear_difference(f, params.d, params.n0, n_max, search_limit) {
        Ok(part) => report.push_part(part),
        Err(Error::SearchExhausted { n, limit }) => {
            report.inconclusive(format!(
                "pseudo-inverse search exhausted at n = {n} (limit m <= {limit}); retry with a larger table"
            ));
        }
        Err(e) => return Err(e),
    }
    debug_assert!(report.result != Outcome::Fail || report.witness.is_some());
    Ok(report.finish(started))
}

/// Synthetic member of `C(0, d, 1)`: `x -> floor(sqrt(2x/d))`.
pub fn make_sqrt_like(d: u64) -> Result<FunctionOracle> {
    FunctionOracle::sqrt_like(d)
}

/// Table-backed oracle starting at 0.
pub fn make_table_oracle(values: Vec<u64>) -> Result<FunctionOracle> {
    FunctionOracle::table(0, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prime::sieve_upto;
    use std::sync::Arc;

    fn prime_f(limit: u64) -> FunctionOracle {
        FunctionOracle::prime_quotient(Arc::new(sieve_upto(limit).unwrap()))
    }

    /// Brute force from the definition.
    fn inverse_by_scan(f: &FunctionOracle, n: u64) -> u64 {
        (f.n_start().max(1) - 1..)
            .find(|&m| f.eval(m + 1).unwrap() > n)
            .unwrap()
    }

    #[test]
    fn derived_constants() {
        let p = ClassParams::new(1, 1, 11).unwrap();
        assert_eq!(p.x0_target(), 128);
        assert_eq!(p.n1(), 128);
        assert_eq!(p.c(), 5);
        let q = ClassParams::new(0, 1, 1).unwrap();
        assert_eq!((q.x0_target(), q.n1(), q.c()), (7, 8, 5));
        assert!(ClassParams::new(0, 0, 1).is_err());
        assert_eq!("1, 1,11".parse::<ClassParams>().unwrap(), p);
        assert!("1,1".parse::<ClassParams>().is_err());
        assert!("1,0,1".parse::<ClassParams>().is_err());
    }

    #[test]
    fn pseudo_inverse_examples() {
        let f = prime_f(1000);
        assert_eq!(pseudo_inverse(&f, 2, 100).unwrap(), 0);
        let s = make_sqrt_like(1).unwrap();
        assert_eq!(pseudo_inverse(&s, 7, 1000).unwrap(), 31);
        assert_eq!(s.eval(32).unwrap(), 8);
        assert!(matches!(
            pseudo_inverse(&s, 7, 30),
            Err(Error::SearchExhausted { n: 7, limit: 30 })
        ));
        let c = FunctionOracle::constant(0, 4);
        assert_eq!(pseudo_inverse(&c, 3, 10).unwrap(), 0);
        assert!(matches!(
            pseudo_inverse(&c, 4, 10),
            Err(Error::BoundedOracle { .. })
        ));
    }

    #[test]
    fn sqrt_like_inverse_closed_form() {
        for d in 1..=3u64 {
            let f = make_sqrt_like(d).unwrap();
            let mut inv = InverseTable::new(&f);
            for n in 0..300u64 {
                let closed = (d * (n + 1) * (n + 1)).div_ceil(2) - 1;
                assert_eq!(inv.get(n, u64::MAX).unwrap(), closed, "d={d} n={n}");
            }
        }
    }

    #[test]
    fn inverse_table_matches_scan_and_brackets() {
        let f = prime_f(1_500_000);
        let mut inv = InverseTable::new(&f);
        for n in 0..=11 {
            let m = inv.get(n, u64::MAX).unwrap();
            assert_eq!(m, inverse_by_scan(&f, n));
            assert!(f.eval(m + 1).unwrap() > n);
            assert!((1..=m).all(|j| f.eval(j).unwrap() <= n));
        }
        // p_k/k < 11 below 7022, so f^-1(11) is well past it
        assert!(inv.get(11, u64::MAX).unwrap() >= 7022);
    }

    #[test]
    fn k_almost_increasing_examples() {
        let f = prime_f(4_000_000);
        let r = check_k_almost_increasing(&f, 1, 200_000).unwrap();
        assert!(r.passed(), "{}", r.to_json());
        let r0 = check_k_almost_increasing(&f, 0, 1000).unwrap();
        assert_eq!(r0.result, Outcome::Fail);
        let Some(Witness::Descent { x, y, fx, fy, .. }) = r0.witness else {
            panic!("no witness")
        };
        assert!(x <= y && fy < fx);
        assert_eq!((f.eval(x).unwrap(), f.eval(y).unwrap()), (fx, fy));
        let s = make_sqrt_like(1).unwrap();
        assert!(check_k_almost_increasing(&s, 0, 10_000).unwrap().passed());
        assert!(check_k_almost_increasing(&f, 1, 10_000_000).is_err());
    }

    fn naive_worst_drop(f: &FunctionOracle, end: u64) -> u64 {
        let mut worst = 0;
        for x in f.n_start()..=end {
            for y in x..=end {
                let (fx, fy) = (f.eval(x).unwrap(), f.eval(y).unwrap());
                worst = worst.max(fx.saturating_sub(fy));
            }
        }
        worst
    }

    #[test]
    fn suffix_minima_equal_pairwise_check() {
        let f = prime_f(50_000);
        let r = check_k_almost_increasing(&f, 0, 2000).unwrap();
        assert_eq!(r.observations["worst_drop"], naive_worst_drop(&f, 2000));
        let bumpy =
            FunctionOracle::table(0, (0..600u64).map(|i| (i * 7919) % 97 + i / 10).collect())
                .unwrap();
        for k in [0u64, 5, 50, 96, 200] {
            let r = check_k_almost_increasing(&bumpy, k, 599).unwrap();
            let worst = naive_worst_drop(&bumpy, 599);
            assert_eq!(r.observations["worst_drop"], worst);
            assert_eq!(r.passed(), worst <= k);
        }
    }

    #[test]
    fn linear_difference_examples() {
        let f = prime_f(4_000_000);
        let r = check_linear_difference(&f, 1, 11, 13, u64::MAX).unwrap();
        assert!(r.passed(), "{}", r.to_json());
        let s = make_sqrt_like(1).unwrap();
        assert!(check_linear_difference(&s, 1, 1, 10_000, u64::MAX)
            .unwrap()
            .passed());
        let c = FunctionOracle::constant(1, 3);
        let r = check_linear_difference(&c, 1, 0, 10, u64::MAX).unwrap();
        assert_eq!(r.result, Outcome::Fail);
        let r = check_linear_difference(&c, 1, 5, 10, u64::MAX).unwrap();
        assert!(matches!(
            r.witness,
            Some(Witness::UndefinedInverse { n: 5, sup: 3 })
        ));
        assert!(matches!(
            check_linear_difference(&f, 1, 11, 40, u64::MAX),
            Err(Error::SearchExhausted { .. })
        ));
    }

    #[test]
    fn class_membership() {
        let f = prime_f(4_000_000);
        let p = ClassParams::new(1, 1, 11).unwrap();
        let r = class_check(&f, &p, 200_000, 13, u64::MAX).unwrap();
        assert!(r.passed(), "{}", r.to_json());
        let r = class_check(&f, &p, 200_000, 30, u64::MAX).unwrap();
        assert_eq!(r.result, Outcome::Inconclusive);

        let s = make_sqrt_like(1).unwrap();
        assert!(class_check(
            &s,
            &ClassParams::new(0, 1, 1).unwrap(),
            10_000,
            1000,
            u64::MAX
        )
        .unwrap()
        .passed());
        // n = 0 is covered too: f^-1(0) = 0, f^-1(1) = 1
        assert!(class_check(
            &s,
            &ClassParams::new(0, 1, 0).unwrap(),
            10_000,
            1000,
            u64::MAX
        )
        .unwrap()
        .passed());
        let s2 = make_sqrt_like(2).unwrap();
        assert!(class_check(
            &s2,
            &ClassParams::new(0, 2, 1).unwrap(),
            10_000,
            1000,
            u64::MAX
        )
        .unwrap()
        .passed());
        let r = class_check(&f, &ClassParams::new(0, 1, 11).unwrap(), 1000, 12, u64::MAX).unwrap();
        assert_eq!(r.result, Outcome::Fail);
    }
}
