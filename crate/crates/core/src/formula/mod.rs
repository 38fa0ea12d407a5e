//! Positive existential formulas over `{+, 1, F}`.
//!
//! `F` is interpreted as `x -> x * f(x)` for a [`FunctionOracle`](crate::oracle::FunctionOracle)
//! `f`. There is no negation, no universal quantifier and no multiplication
//! node; comparisons are sugar for existentials (see [`Formula::le`]).

mod ast;
mod eval;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ast::{Formula, NameSupply, Term, WitnessHint};
pub use eval::{EvalError, Evaluator, Program, Witnesses, DEFAULT_CANDIDATE_BUDGET};
pub use parse::{parse, parse_formula, parse_term, ParseError, ParseErrorKind, Parsed};

use crate::error::Error;

/// Values for free variables. Written as `x=1,y=2`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment(BTreeMap<String, u64>);

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    pub fn with(mut self, var: impl Into<String>, value: u64) -> Self {
        self.0.insert(var.into(), value);
        self
    }

    pub fn set(&mut self, var: impl Into<String>, value: u64) {
        self.0.insert(var.into(), value);
    }

    pub fn get(&self, var: &str) -> Option<u64> {
        self.0.get(var).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, u64)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (S, u64)>>(iter: I) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

impl FromStr for Assignment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let mut out = Assignment::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Domain(format!("expected var=value, got {part:?}")))?;
            let k = k.trim();
            let valid = k.starts_with(|c: char| c.is_ascii_lowercase())
                && k.chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
            if !valid {
                return Err(Error::Domain(format!("bad variable name {k:?}")));
            }
            let v = v
                .trim()
                .parse::<u64>()
                .map_err(|e| Error::Domain(format!("{part:?}: {e}")))?;
            if out.0.insert(k.to_string(), v).is_some() {
                return Err(Error::Domain(format!("variable {k:?} assigned twice")));
            }
        }
        Ok(out)
    }
}
