//! Structured verification results shared by every check and by the CLI.
//!
//! The JSON form carries `{ check, anchor, oracle, params, ranges, result,
//! witness?, seed, runtime_ms }` plus check-specific limits and observations.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::class::ClassParams;
use crate::prime::IndexConvention;

#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

impl Outcome {
    /// Conjunction: a failure dominates, then indecision.
    pub fn and(self, other: Outcome) -> Outcome {
        use Outcome::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Pass,
        }
    }

    /// Process exit code: 0 pass, 1 fail, 2 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 2,
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Inconclusive => "inconclusive",
        })
    }
}

/// Inclusive range of checked arguments.
#[derive(Serialize, Deserialize, Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckedRange {
    pub start: u64,
    pub end: u64,
}

/// Concrete evidence of a failed check, detailed enough to be re-evaluated
/// on its own (see [`crate::verifier::reproduces`]).
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// `f(y) - f(x) < -k` with `x <= y`.
    Descent {
        x: u64,
        y: u64,
        fx: u64,
        fy: u64,
        k: u64,
    },
    /// `d * (f^-1(n+1) - f^-1(n)) <= n`.
    LinearDifference {
        n: u64,
        inverse_n: u64,
        inverse_next: u64,
        d: u64,
    },
    /// The oracle is bounded below `n + 1`, so `f^-1(n)` does not exist.
    UndefinedInverse { n: u64, sup: u64 },
    RosserLower {
        m: u64,
        prime: u64,
        bound_lo: f64,
        bound_hi: f64,
        convention: IndexConvention,
    },
    RosserUpper {
        m: u64,
        prime: u64,
        bound_lo: f64,
        bound_hi: f64,
        convention: IndexConvention,
    },
    /// The maximum of `p_k / k` over `1 <= k <= k_max` is not where, or not as
    /// small as, it was claimed to be.
    MaxQuotient {
        argmax: u64,
        prime: u64,
        claimed_argmax: u64,
        bound_numer: u64,
        bound_denom: u64,
        convention: IndexConvention,
    },
    /// `min f` on the tail is below `max f` on the head minus one.
    TailDrop {
        head_argmax: u64,
        head_max: u64,
        tail_argmin: u64,
        tail_min: u64,
    },
    /// `p_k / k >= n + 2` at `k = f^-1(n) + n`.
    QuotientStep { n: u64, k: u64, prime: u64 },
    /// `f^-1(n+d) - f^-1(n) <= n`.
    InverseGap {
        n: u64,
        d: u64,
        inverse_n: u64,
        inverse_n_plus_d: u64,
    },
    /// No `x` in `(from, to]` with `f(x) = n`.
    MissingValue { n: u64, from: u64, to: u64 },
    /// `f(x) = n` but `2d x <= (n-1)(n-2) - n0(n0-1)`.
    QuadraticLowerBound { x: u64, n: u64, d: u64, n0: u64 },
    /// `f(x+c) - f(x)` outside `[-k, k+d]`.
    ShortRangeDrift {
        x: u64,
        c: u64,
        fx: u64,
        fxc: u64,
        k: u64,
        d: u64,
    },
    /// `f(x) >= x`.
    NotBelowArgument { x: u64, fx: u64 },
    /// `f(x) != (x+1) f(x+1) - x f(x) (mod x+1)`.
    StepCongruence { x: u64, fx: u64, fx1: u64 },
    /// `|f(x+1) - f(x)| > bound`.
    StepSize {
        x: u64,
        fx: u64,
        fx1: u64,
        bound: u64,
    },
    /// `f(x) <= bound` although `x > x0`.
    ThresholdValue { x: u64, fx: u64, bound: u64 },
    /// A defined relation disagreed with the oracle-computed truth value.
    Relation {
        relation: String,
        assignment: BTreeMap<String, u64>,
        expected: bool,
        actual: bool,
    },
    /// Evaluating a defined relation raised an error.
    RelationError {
        relation: String,
        assignment: BTreeMap<String, u64>,
        message: String,
    },
}

#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub check: String,
    pub anchor: String,
    pub oracle: String,
    pub params: Option<ClassParams>,
    pub ranges: BTreeMap<String, CheckedRange>,
    pub result: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    pub seed: Option<u64>,
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub limits: BTreeMap<String, u64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub observations: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<VerificationReport>,
}

impl VerificationReport {
    /// A passing report with nothing recorded yet.
    pub fn new(
        check: impl Into<String>,
        anchor: impl Into<String>,
        oracle: impl Into<String>,
    ) -> Self {
        VerificationReport {
            check: check.into(),
            anchor: anchor.into(),
            oracle: oracle.into(),
            params: None,
            ranges: BTreeMap::new(),
            result: Outcome::Pass,
            witness: None,
            seed: None,
            runtime_ms: 0,
            limits: BTreeMap::new(),
            observations: BTreeMap::new(),
            notes: Vec::new(),
            config: None,
            parts: Vec::new(),
        }
    }

    pub fn with_params(mut self, params: ClassParams) -> Self {
        self.params = Some(params);
        self
    }

    pub fn with_range(mut self, name: &str, start: u64, end: u64) -> Self {
        self.ranges
            .insert(name.to_string(), CheckedRange { start, end });
        self
    }

    pub fn with_limit(mut self, name: &str, value: u64) -> Self {
        self.limits.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn observe(&mut self, name: &str, value: impl Into<Value>) {
        self.observations.insert(name.to_string(), value.into());
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Records a failure. The first witness is kept.
    pub fn fail(&mut self, witness: Witness) {
        if self.result != Outcome::Fail {
            self.result = Outcome::Fail;
            self.witness = Some(witness);
        }
    }

    pub fn inconclusive(&mut self, why: impl Into<String>) {
        self.result = self.result.and(Outcome::Inconclusive);
        self.notes.push(why.into());
    }

    /// Adds a sub-report and folds its outcome into this one.
    pub fn push_part(&mut self, part: VerificationReport) {
        self.result = self.result.and(part.result);
        if part.result == Outcome::Fail && self.witness.is_none() {
            self.witness = part.witness.clone();
        }
        self.parts.push(part);
    }

    pub fn finish(mut self, started: Instant) -> Self {
        self.runtime_ms = started.elapsed().as_millis() as u64;
        self
    }

    pub fn passed(&self) -> bool {
        self.result == Outcome::Pass
    }

    /// Zeroes every `runtime_ms`, recursively, for byte-stable output.
    pub fn strip_timing(&mut self) {
        self.runtime_ms = 0;
        for p in &mut self.parts {
            p.strip_timing();
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
