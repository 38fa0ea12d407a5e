//! Total integer functions `{n >= n_start} -> N` used as interpretations of `f`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::prime::PrimeTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OracleKind {
    PrimeQuotient,
    SqrtLike,
    Table,
    Constant,
    /// Another oracle with some values overwritten; used for fault injection.
    Patched,
}

#[derive(Clone, Debug)]
enum Source {
    PrimeQuotient(Arc<PrimeTable>),
    SqrtLike {
        d: u64,
    },
    Table {
        values: Arc<[u64]>,
    },
    Constant {
        value: u64,
    },
    Patched {
        base: Arc<FunctionOracle>,
        patches: Arc<BTreeMap<u64, u64>>,
    },
}

/// A function `f` evaluable on `[n_start, max_arg]`.
///
/// Cloning is cheap; all data is shared.
#[derive(Clone, Debug)]
pub struct FunctionOracle {
    n_start: u64,
    source: Source,
}

impl FunctionOracle {
    /// `n -> floor(p_n / n)` on `1 <= n < table.count()`.
    pub fn prime_quotient(table: Arc<PrimeTable>) -> Self {
        FunctionOracle {
            n_start: 1,
            source: Source::PrimeQuotient(table),
        }
    }

    /// `x -> floor(sqrt(2x / d))`, a member of `C(0, d, 1)` with
    /// `f^-1(n) = ceil(d (n+1)^2 / 2) - 1`.
    pub fn sqrt_like(d: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::Domain("sqrt-like oracle needs d >= 1".into()));
        }
        let f = FunctionOracle {
            n_start: 0,
            source: Source::SqrtLike { d },
        };
        debug_assert!(
            crate::class::class_check(
                &f,
                &crate::class::ClassParams::new(0, d, 1).unwrap(),
                2_000,
                30,
                1 << 20
            )
            .map(|r| r.passed())
            .unwrap_or(false),
            "sqrt-like({d}) failed its own membership check"
        );
        Ok(f)
    }

    /// `f(n_start + i) = values[i]`. Arguments past the table fail loudly.
    pub fn table(n_start: u64, values: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain(
                "table oracle needs at least one value".into(),
            ));
        }
        Ok(FunctionOracle {
            n_start,
            source: Source::Table {
                values: values.into(),
            },
        })
    }

    /// Parses one value per line; blank lines and `#` comments are skipped.
    pub fn table_from_text(n_start: u64, text: &str) -> Result<Self> {
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v = line
                .parse::<u64>()
                .map_err(|e| Error::Domain(format!("line {}: {e}: {line:?}", i + 1)))?;
            values.push(v);
        }
        Self::table(n_start, values)
    }

    /// The constant function; bounded, so it has no pseudo-inverse above `value`.
    pub fn constant(n_start: u64, value: u64) -> Self {
        FunctionOracle {
            n_start,
            source: Source::Constant { value },
        }
    }

    /// This oracle with `patches[x]` replacing `f(x)`.
    pub fn patched(&self, patches: BTreeMap<u64, u64>) -> Self {
        FunctionOracle {
            n_start: self.n_start,
            source: Source::Patched {
                base: Arc::new(self.clone()),
                patches: Arc::new(patches),
            },
        }
    }

    pub fn kind(&self) -> OracleKind {
        match self.source {
            Source::PrimeQuotient(_) => OracleKind::PrimeQuotient,
            Source::SqrtLike { .. } => OracleKind::SqrtLike,
            Source::Table { .. } => OracleKind::Table,
            Source::Constant { .. } => OracleKind::Constant,
            Source::Patched { .. } => OracleKind::Patched,
        }
    }

    pub fn n_start(&self) -> u64 {
        self.n_start
    }

    /// Largest evaluable argument, `None` when unlimited.
    pub fn max_arg(&self) -> Option<u64> {
        match &self.source {
            Source::PrimeQuotient(t) => Some(t.count() - 1),
            Source::SqrtLike { .. } => Some(u64::MAX / 2),
            Source::Table { values } => Some(self.n_start + values.len() as u64 - 1),
            Source::Constant { .. } => None,
            Source::Patched { base, .. } => base.max_arg(),
        }
    }

    /// Known supremum for oracles that are bounded by construction.
    pub fn known_sup(&self) -> Option<u64> {
        match &self.source {
            Source::Constant { value } => Some(*value),
            _ => None,
        }
    }

    /// The underlying prime table, for prime-quotient oracles (patched or not).
    pub fn prime_table(&self) -> Option<&Arc<PrimeTable>> {
        match &self.source {
            Source::PrimeQuotient(t) => Some(t),
            Source::Patched { base, .. } => base.prime_table(),
            _ => None,
        }
    }

    /// Short identifier used in reports.
    pub fn id(&self) -> String {
        match &self.source {
            Source::PrimeQuotient(t) => format!("prime-quotient(limit={})", t.limit()),
            Source::SqrtLike { d } => format!("sqrt-like:{d}"),
            Source::Table { values } => {
                format!("table(start={}, len={})", self.n_start, values.len())
            }
            Source::Constant { value } => format!("constant:{value}"),
            Source::Patched { base, patches } => {
                format!("{}+patched({})", base.id(), patches.len())
            }
        }
    }

    fn range_error(&self, arg: u64) -> Error {
        Error::OracleRange {
            oracle: self.id(),
            arg,
            start: self.n_start,
            end: self.max_arg(),
        }
    }

    pub fn eval(&self, x: u64) -> Result<u64> {
        if x < self.n_start || self.max_arg().is_some_and(|m| x > m) {
            return Err(self.range_error(x));
        }
        Ok(match &self.source {
            Source::PrimeQuotient(t) => t.quotient(x)?,
            Source::SqrtLike { d } => ((2 * x) / d).isqrt(),
            Source::Table { values } => values[(x - self.n_start) as usize],
            Source::Constant { value } => *value,
            Source::Patched { base, patches } => match patches.get(&x) {
                Some(&v) => v,
                None => base.eval(x)?,
            },
        })
    }

    /// `x * f(x)`, the interpretation of the function symbol `F`.
    pub fn eval_times(&self, x: u64) -> Result<u64> {
        let fx = self.eval(x)?;
        x.checked_mul(fx)
            .ok_or_else(|| Error::Overflow(format!("{x} * f({x}) = {x} * {fx}")))
    }
}
