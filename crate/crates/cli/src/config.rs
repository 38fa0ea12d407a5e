use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use serde::Serialize;

use primequo_core::ClassParams;

use crate::CliError;

/// Which function the class-level checks run on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleSpec {
    Prime,
    SqrtLike(u64),
    /// One value per line, first value at argument 1.
    Table(PathBuf),
}

impl FromStr for OracleSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "prime" {
            return Ok(OracleSpec::Prime);
        }
        if let Some(d) = s.strip_prefix("sqrt-like:") {
            let d: u64 = d.parse().map_err(|e| format!("sqrt-like:{d}: {e}"))?;
            if d == 0 {
                return Err("sqrt-like needs d >= 1".into());
            }
            return Ok(OracleSpec::SqrtLike(d));
        }
        if let Some(path) = s.strip_prefix("table:") {
            if path.is_empty() {
                return Err("table: needs a path".into());
            }
            return Ok(OracleSpec::Table(path.into()));
        }
        Err(format!(
            "unknown oracle {s:?}; expected prime, sqrt-like:D or table:PATH"
        ))
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Prime => f.write_str("prime"),
            OracleSpec::SqrtLike(d) => write!(f, "sqrt-like:{d}"),
            OracleSpec::Table(p) => write!(f, "table:{}", p.display()),
        }
    }
}

impl Serialize for OracleSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Inclusive `A..B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Range {
    pub start: u64,
    pub end: u64,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
        let start = a.trim().parse::<u64>().map_err(|e| format!("{a:?}: {e}"))?;
        let end = b.trim().parse::<u64>().map_err(|e| format!("{b:?}: {e}"))?;
        if start > end {
            return Err(format!("empty range {s}"));
        }
        Ok(Range { start, end })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Seconds: small sieve, short ranges.
    Test,
    /// A minute or so on a laptop.
    Desk,
    /// The full sieve up to 10^9.
    Large,
}

/// Range defaults of a profile.
#[derive(Clone, Copy, Debug)]
pub struct ProfileDefaults {
    pub sieve_limit: u64,
    /// `m` of the exhaustive pair check of almost-monotonicity.
    pub pair_bound: u64,
    /// End of the tail comparison past the direct-computation head.
    pub tail_bound: u64,
    /// Last `m` of the estimate check.
    pub estimates_end: u64,
    /// Argument range of the prime-quotient growth and drift checks.
    pub prime_x: Range,
    /// Argument range of the growth and drift checks on synthetic oracles.
    pub synthetic_x: Range,
}

impl Profile {
    pub fn defaults(self) -> ProfileDefaults {
        let prime_x = |end| Range { start: 7022, end };
        match self {
            Profile::Test => ProfileDefaults {
                sieve_limit: 3_000_000,
                pair_bound: 200_000,
                tail_bound: 200_000,
                estimates_end: 200_000,
                prime_x: prime_x(200_000),
                synthetic_x: Range {
                    start: 0,
                    end: 20_000,
                },
            },
            Profile::Desk => ProfileDefaults {
                sieve_limit: 100_000_000,
                pair_bound: 200_000,
                tail_bound: 5_000_000,
                estimates_end: 5_000_000,
                prime_x: prime_x(1_000_000),
                synthetic_x: Range {
                    start: 0,
                    end: 100_000,
                },
            },
            Profile::Large => ProfileDefaults {
                sieve_limit: 1_000_000_000,
                pair_bound: 200_000,
                tail_bound: 50_000_000,
                estimates_end: 50_000_000,
                prime_x: prime_x(1_000_000),
                synthetic_x: Range {
                    start: 0,
                    end: 1_000_000,
                },
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    ZeroBased,
    OneBased,
}

impl From<Convention> for primequo_core::IndexConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::ZeroBased => primequo_core::IndexConvention::ZeroBased,
            Convention::OneBased => primequo_core::IndexConvention::OneBased,
        }
    }
}

/// Everything a run depends on, after defaults are filled in. Echoed into
/// every report.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub profile: Profile,
    pub sieve_limit: u64,
    pub oracle: Option<OracleSpec>,
    pub params: Option<ClassParams>,
    pub range: Option<Range>,
    pub n_max: Option<u64>,
    pub seed: u64,
    pub jobs: usize,
    pub convention: Convention,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

/// Default class parameters of an oracle.
pub fn default_params(oracle: &OracleSpec) -> Result<ClassParams, CliError> {
    match oracle {
        OracleSpec::Prime => Ok(ClassParams::new(1, 1, 11)?),
        OracleSpec::SqrtLike(d) => Ok(ClassParams::new(0, *d, 1)?),
        OracleSpec::Table(_) => Err(CliError::Usage(
            "--params is required with a table oracle".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_selectors() {
        assert_eq!("prime".parse::<OracleSpec>(), Ok(OracleSpec::Prime));
        assert_eq!(
            "sqrt-like:3".parse::<OracleSpec>(),
            Ok(OracleSpec::SqrtLike(3))
        );
        assert_eq!(
            "table:/tmp/f.txt".parse::<OracleSpec>(),
            Ok(OracleSpec::Table("/tmp/f.txt".into()))
        );
        assert!("sqrt-like:0".parse::<OracleSpec>().is_err());
        assert!("sqrt-like:x".parse::<OracleSpec>().is_err());
        assert!("table:".parse::<OracleSpec>().is_err());
        assert!("primes".parse::<OracleSpec>().is_err());
        assert_eq!(OracleSpec::SqrtLike(2).to_string(), "sqrt-like:2");
    }

    #[test]
    fn ranges() {
        assert_eq!("3..10".parse::<Range>(), Ok(Range { start: 3, end: 10 }));
        assert_eq!("5..5".parse::<Range>(), Ok(Range { start: 5, end: 5 }));
        assert!("10..3".parse::<Range>().is_err());
        assert!("3-10".parse::<Range>().is_err());
        assert!("..10".parse::<Range>().is_err());
    }

    #[test]
    fn profiles_grow() {
        let (t, d, l) = (
            Profile::Test.defaults(),
            Profile::Desk.defaults(),
            Profile::Large.defaults(),
        );
        assert!(t.sieve_limit < d.sieve_limit && d.sieve_limit < l.sieve_limit);
        assert_eq!(l.sieve_limit, 1_000_000_000);
        assert_eq!(l.estimates_end, 50_000_000);
    }
}
