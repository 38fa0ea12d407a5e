//! Shared fixtures for the benchmarks.

use primequo_core::definability::{define_c_n_squared, define_f_tilde, define_multiplication};
use primequo_core::{ClassParams, DefinedRelation, FunctionOracle, Threshold};

/// `sqrt-like(1)` with its class parameters `(0, 1, 1)` and `x0`.
pub fn sqrt_fixture() -> (FunctionOracle, ClassParams, Threshold) {
    let f = FunctionOracle::sqrt_like(1).expect("d = 1 is valid");
    let params = ClassParams::new(0, 1, 1).expect("valid parameters");
    let threshold = Threshold::resolve(&f, &params, 1 << 20).expect("x0 resolves");
    (f, params, threshold)
}

/// The three defined relations over the fixture.
pub fn relations() -> [DefinedRelation; 3] {
    let (_, params, th) = sqrt_fixture();
    [
        define_f_tilde(&params, th.clone()),
        define_c_n_squared(&params, th.clone()),
        define_multiplication(&params, th),
    ]
}
