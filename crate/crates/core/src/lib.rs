//! Computational companion to the prime quotient function `f(n) = floor(p_n / n)`.
//!
//! The crate is organized bottom-up:
//!
//! * [`prime`] sieves primes and exposes `p_n`, `r_n = p_n mod n`, `floor(p_n/n)`
//!   and the Rosser-type enclosures of `p_m`.
//! * [`oracle`] and [`class`] treat integer functions abstractly: pseudo-inverses
//!   `f^-1(n) = min { m : f(m+1) > n }` and membership checks for the class
//!   `C(k, d, n0)` of `k`-almost increasing functions whose pseudo-inverse has
//!   at least `(1/d)`-linear difference.
//! * [`formula`] is a small positive-existential logic over `{+, 1, F}`, where
//!   `F` is interpreted as `x -> x * f(x)`, with a text format and an evaluator.
//! * [`definability`] emits the existential definitions of `f`, `n -> 5dn^2`
//!   and multiplication as [`formula::Formula`] values.
//! * [`verifier`] runs every empirical check and produces [`report::VerificationReport`]s.

pub mod class;
pub mod definability;
pub mod error;
pub mod formula;
pub mod interval;
pub mod oracle;
pub mod prime;
pub mod report;
pub mod verifier;

pub use class::{ClassParams, InverseTable};
pub use definability::{DefinedRelation, Domain, Threshold};

pub use error::{Error, Result};
pub use formula::{Assignment, Formula, Term, WitnessHint};

pub use interval::Interval;
pub use oracle::{FunctionOracle, OracleKind};
pub use prime::{IndexConvention, PrimeTable, RosserBounds};
pub use report::{Outcome, VerificationReport, Witness};
