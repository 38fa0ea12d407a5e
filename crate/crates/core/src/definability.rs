//! Existential definitions over `{+, 1, F}` for members of `C(k, d, n0)`.
//!
//! * [`define_f_tilde`]: `R(x, y) <-> y = f(x)` for `x > x0`.
//! * [`define_c_n_squared`]: `Q(n, y) <-> y = 5d n^2` for `n >= n1`.
//! * [`define_multiplication`]: `M(a, b, z) <-> z = a b`, total.
//!
//! Each builder also exists as a function over arbitrary terms
//! (`f_tilde_formula`, ...) so the definitions can be composed without
//! substitution. Constant multiples are unrolled into left-leaning sums.
//! Formulas for large parameters are deep; see [`with_deep_stack`].

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::class::{ClassParams, InverseTable};
use crate::error::{Error, Result};
use crate::formula::{
    parse_formula, Assignment, EvalError, Evaluator, Formula, NameSupply, Term, WitnessHint,
};
use crate::oracle::FunctionOracle;

/// Name of the free parameter standing for an unreachable `x0`.
pub const SYMBOLIC_X0: &str = "x0";

/// Lower threshold `x0 = f^-1(2 + 4d + n0^2 + k)` of the domain of `R`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Threshold {
    Finite {
        value: u64,
    },
    /// Kept as the free variable [`SYMBOLIC_X0`]; `x0 = f^-1(target)`.
    Symbolic {
        target: u64,
    },
}

impl Threshold {
    /// `x0` for `f`, or a symbolic threshold when the pseudo-inverse
    /// cannot be resolved within `search_limit`.
    pub fn resolve(
        f: &FunctionOracle,
        params: &ClassParams,
        search_limit: u64,
    ) -> Result<Threshold> {
        match params.x0(f, search_limit) {
            Ok(value) => Ok(Threshold::Finite { value }),
            Err(Error::SearchExhausted { .. }) => Ok(Threshold::Symbolic {
                target: params.x0_target(),
            }),
            Err(e) => Err(e),
        }
    }

    pub fn symbolic(params: &ClassParams) -> Threshold {
        Threshold::Symbolic {
            target: params.x0_target(),
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Finite { value } => write!(f, "{value}"),
            Threshold::Symbolic { target } => write!(f, "{SYMBOLIC_X0} = f^-1({target})"),
        }
    }
}

/// Where a relation is defined.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Domain {
    Total,
    AtLeast { var: String, bound: u64 },
    Above { var: String, threshold: Threshold },
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Total => f.write_str("all inputs"),
            Domain::AtLeast { var, bound } => write!(f, "{var} >= {bound}"),
            Domain::Above { var, threshold } => write!(f, "{var} > {threshold}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelationError {
    #[error("{relation}: input {var} = {value} is outside the domain {domain}")]
    OutsideDomain {
        relation: String,
        var: String,
        value: u64,
        domain: String,
    },
    #[error("{relation}: domain threshold unreachable ({threshold})")]
    ThresholdUnreachable { relation: String, threshold: String },
    #[error("{relation}: missing input `{var}`")]
    MissingInput { relation: String, var: String },
    #[error("{relation}: {source}")]
    Eval { relation: String, source: EvalError },
}

/// Node counts of a formula.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SizeMetrics {
    pub nodes: usize,
    pub equalities: usize,
    pub conjunctions: usize,
    pub disjunctions: usize,
    pub existentials: usize,
    pub f_applications: usize,
    pub ones: usize,
    pub text_len: usize,
}

impl SizeMetrics {
    pub fn of(phi: &Formula) -> SizeMetrics {
        fn term(t: &Term, m: &mut SizeMetrics) {
            let mut stack = vec![t];
            while let Some(t) = stack.pop() {
                m.nodes += 1;
                match t {
                    Term::Var(_) => {}
                    Term::One => m.ones += 1,
                    Term::Sum(a, b) => {
                        stack.push(a);
                        stack.push(b);
                    }
                    Term::FApp(a) => {
                        m.f_applications += 1;
                        stack.push(a);
                    }
                }
            }
        }
        let mut m = SizeMetrics::default();
        phi.visit(&mut |p| {
            m.nodes += 1;
            match p {
                Formula::Eq(a, b) => {
                    m.equalities += 1;
                    term(a, &mut m);
                    term(b, &mut m);
                }
                Formula::And(..) => m.conjunctions += 1,
                Formula::Or(..) => m.disjunctions += 1,
                Formula::Exists { hint, .. } => {
                    m.existentials += 1;
                    if let WitnessHint::SearchTo(t)
                    | WitnessHint::FunctionalFInverse { target: t, .. } = hint
                    {
                        term(t, &mut m);
                    }
                }
            }
        });
        m.text_len = phi.to_string().len();
        m
    }
}

/// Problems found by [`DefinedRelation::lint`].
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct LintReport {
    pub problems: Vec<String>,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.problems.is_empty()
    }
}

/// A relation together with its defining formula.
#[derive(Clone, Debug, Serialize)]
pub struct DefinedRelation {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    /// Free variables standing for unresolved constants (the symbolic `x0`).
    pub parameters: Vec<String>,
    #[serde(serialize_with = "as_text")]
    pub formula: Formula,
    pub domain: Domain,
    pub params: ClassParams,
    pub note: String,
}

fn as_text<S: serde::Serializer>(phi: &Formula, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(phi)
}

impl DefinedRelation {
    pub fn arity(&self) -> usize {
        self.inputs.len() + self.outputs.len()
    }

    pub fn roles(&self) -> Vec<&str> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .chain(&self.parameters)
            .map(String::as_str)
            .collect()
    }

    /// Checks the domain constraint on the inputs of `a`.
    pub fn check_domain(&self, a: &Assignment) -> std::result::Result<(), RelationError> {
        for v in self.inputs.iter().chain(&self.outputs) {
            if a.get(v).is_none() {
                return Err(RelationError::MissingInput {
                    relation: self.name.clone(),
                    var: v.clone(),
                });
            }
        }
        let unreachable = || RelationError::ThresholdUnreachable {
            relation: self.name.clone(),
            threshold: Threshold::symbolic(&self.params).to_string(),
        };
        // a symbolic x0 can still be supplied by the caller
        if self.parameters.iter().any(|p| a.get(p).is_none()) {
            return Err(unreachable());
        }
        let outside = |var: &str, value: u64| RelationError::OutsideDomain {
            relation: self.name.clone(),
            var: var.to_string(),
            value,
            domain: self.domain.to_string(),
        };
        match &self.domain {
            Domain::Total => Ok(()),
            Domain::AtLeast { var, bound } => {
                let v = a.get(var).unwrap_or_default();
                if v >= *bound {
                    Ok(())
                } else {
                    Err(outside(var, v))
                }
            }
            Domain::Above { var, threshold } => match threshold {
                Threshold::Finite { value } => {
                    let v = a.get(var).unwrap_or_default();
                    if v > *value {
                        Ok(())
                    } else {
                        Err(outside(var, v))
                    }
                }
                Threshold::Symbolic { .. } => match a.get(SYMBOLIC_X0) {
                    Some(x0) => {
                        let v = a.get(var).unwrap_or_default();
                        if v > x0 {
                            Ok(())
                        } else {
                            Err(outside(var, v))
                        }
                    }
                    None => Err(unreachable()),
                },
            },
        }
    }

    /// Truth value at `a`, after the domain gate.
    pub fn evaluate(
        &self,
        ev: &Evaluator,
        a: &Assignment,
    ) -> std::result::Result<bool, RelationError> {
        self.check_domain(a)?;
        ev.eval_formula(&self.formula, a)
            .map_err(|source| RelationError::Eval {
                relation: self.name.clone(),
                source,
            })
    }

    /// Structural checks: free variables are exactly the declared roles,
    /// every quantifier carries a usable bound, hint terms only use
    /// variables in scope, and the text form parses back to the same tree.
    pub fn lint(&self) -> LintReport {
        let mut problems = Vec::new();
        let free = self.formula.free_vars();
        let roles: BTreeSet<String> = self.roles().into_iter().map(String::from).collect();
        if free != roles {
            problems.push(format!(
                "free variables {free:?} differ from roles {roles:?}"
            ));
        }
        fn walk(p: &Formula, scope: &mut Vec<String>, problems: &mut Vec<String>) {
            match p {
                Formula::Eq(..) => {}
                Formula::And(a, b) | Formula::Or(a, b) => {
                    walk(a, scope, problems);
                    walk(b, scope, problems);
                }
                Formula::Exists { var, hint, body } => {
                    if matches!(hint, WitnessHint::Unbounded) {
                        problems.push(format!("exists {var} has no witness bound"));
                    }
                    for v in hint.vars() {
                        if !scope.contains(&v) {
                            problems.push(format!("hint of exists {var} uses `{v}` out of scope"));
                        }
                    }
                    if scope.contains(var) {
                        problems.push(format!("exists {var} shadows an outer variable"));
                    }
                    scope.push(var.clone());
                    walk(body, scope, problems);
                    scope.pop();
                }
            }
        }
        let mut scope: Vec<String> = free.into_iter().collect();
        walk(&self.formula, &mut scope, &mut problems);
        match parse_formula(&self.formula.to_string()) {
            Ok(back) if back == self.formula => {}
            Ok(_) => problems.push("text form parses to a different tree".into()),
            Err(e) => problems.push(format!("text form does not parse: {e}")),
        }
        LintReport { problems }
    }

    pub fn size(&self) -> SizeMetrics {
        SizeMetrics::of(&self.formula)
    }

    /// The relation as JSON: name, roles, domain, params, size and formula text.
    pub fn envelope(&self) -> serde_json::Value {
        json!({
            "name": self.name,
            "roles": {
                "inputs": self.inputs,
                "outputs": self.outputs,
                "parameters": self.parameters,
            },
            "domain": self.domain,
            "domain_text": self.domain.to_string(),
            "params": self.params.to_string(),
            "constants": {
                "x0_target": self.params.x0_target(),
                "n1": self.params.n1(),
                "c": self.params.c(),
                "slack": self.params.slack(),
            },
            "size": self.size(),
            "note": self.note,
            "formula": self.formula.to_string(),
        })
    }
}

/// `a ≡_c b (mod m)`: `|a - b|` is one of `0, m, ..., c m`, as the
/// disjunction over `h` of `a = b + h m` and `b = a + h m`.
pub fn restricted_congruence(a: &Term, b: &Term, m: &Term, c: u64) -> Formula {
    let branch = |h: u64| {
        let plus = |t: &Term| match m.times(h) {
            Some(hm) => Term::sum(t.clone(), hm),
            None => t.clone(),
        };
        Formula::or(
            Formula::eq(a.clone(), plus(b)),
            Formula::eq(b.clone(), plus(a)),
        )
    };
    Formula::or_all((0..=c).map(branch)).expect("at least one branch")
}

/// `x > x0`, with a numeral or the symbolic parameter for `x0`.
fn above_threshold(x: &Term, threshold: &Threshold, names: &mut NameSupply) -> Formula {
    match threshold {
        Threshold::Finite { value: 0 } => {
            let u = names.fresh("u");
            Formula::exists(
                u.clone(),
                WitnessHint::SearchTo(x.clone()),
                Formula::eq(Term::var(u).succ(), x.clone()),
            )
        }
        Threshold::Finite { value } => {
            Formula::lt(Term::numeral(*value).expect("nonzero"), x.clone(), names)
        }
        Threshold::Symbolic { .. } => Formula::lt(Term::var(SYMBOLIC_X0), x.clone(), names),
    }
}

/// `R(x, y)`: `x > x0 & y <= x & f(x) ≡_{k+d} (x+1) f(x+1) - x f(x) (mod x+1)`,
/// with the congruence written as
/// `OR_h [ y + F(x) = F(x+1) + h(x+1)  |  F(x+1) = y + F(x) + h(x+1) ]`.
pub fn f_tilde_formula(
    params: &ClassParams,
    threshold: &Threshold,
    x: &Term,
    y: &Term,
    names: &mut NameSupply,
) -> Formula {
    let x1 = x.clone().succ();
    let lhs = Term::sum(y.clone(), Term::f(x.clone()));
    let rhs = Term::f(x1.clone());
    Formula::and(
        Formula::and(
            above_threshold(x, threshold, names),
            Formula::le(y.clone(), x.clone(), names),
        ),
        restricted_congruence(&lhs, &rhs, &x1, params.slack()),
    )
}

/// `Q(n, y)`: `exists x [f(x) = 5dn] . R(x, 5dn) & y + F(x) ≡_{k+d} F(x+n) (mod x+n) & y < x+n`.
///
/// The witness `x` is resolved through `finv(5dn, k)`.
pub fn c_n_squared_formula(
    params: &ClassParams,
    threshold: &Threshold,
    n: &Term,
    y: &Term,
    names: &mut NameSupply,
) -> Formula {
    let (x_name, hint, r, rest, _) = c_n_squared_parts(params, threshold, n, y, names);
    Formula::exists(x_name, hint, Formula::and(r, rest))
}

/// `Q(n, y)` split into the part binding the witness `x` and the rest, so
/// that further quantifiers can be nested inside the scope of `x`:
/// returns `(x name, finv hint, R(x, 5dn), congruence & y < x+n)`.
fn c_n_squared_parts(
    params: &ClassParams,
    threshold: &Threshold,
    n: &Term,
    y: &Term,
    names: &mut NameSupply,
) -> (String, WitnessHint, Formula, Formula, Term) {
    let x_name = names.fresh("x");
    let x = Term::var(&x_name);
    let target = n.times(params.c()).expect("c = 5d >= 5");
    let xn = Term::sum(x.clone(), n.clone());
    let r = f_tilde_formula(params, threshold, &x, &target, names);
    let rest = Formula::and(
        restricted_congruence(
            &Term::sum(y.clone(), Term::f(x.clone())),
            &Term::f(xn.clone()),
            &xn,
            params.slack(),
        ),
        Formula::lt(y.clone(), xn.clone(), names),
    );
    let hint = WitnessHint::FunctionalFInverse {
        target,
        slack: params.k,
    };
    (x_name, hint, r, rest, xn)
}

/// `M(a, b, z)`, from `Q` at `A = a + n1`, `B = b + n1` and `A + B` and
/// `c (A+B)^2 = c A^2 + c B^2 + 2c A B` with `A B = ab + n1 a + n1 b + n1^2`:
///
/// `qS = qA + qB + 2c z + 2c n1 a + 2c n1 b + 2c n1^2`.
///
/// Each `q` is bound inside the scope of the witness `x` of its `Q`, with
/// the bound `q < x + n` as its search range.
pub fn multiplication_formula(
    params: &ClassParams,
    threshold: &Threshold,
    a: &Term,
    b: &Term,
    z: &Term,
    names: &mut NameSupply,
) -> Formula {
    let n1 = params.n1();
    let c2 = 2 * params.c();
    let big_a = a.clone().plus_numeral(n1);
    let big_b = b.clone().plus_numeral(n1);
    let big_s = Term::sum(big_a.clone(), big_b.clone());

    let q_names: Vec<String> = ["q_a", "q_b", "q_s"]
        .iter()
        .map(|q| names.fresh(q))
        .collect();
    let parts: Vec<_> = [&big_a, &big_b, &big_s]
        .iter()
        .zip(&q_names)
        .map(|(n, q)| c_n_squared_parts(params, threshold, n, &Term::var(q), names))
        .collect();

    let qa_qb = Term::sum(Term::var(&q_names[0]), Term::var(&q_names[1]));
    let correction = [
        z.times(c2),
        a.times(c2 * n1),
        b.times(c2 * n1),
        Term::numeral(c2 * n1 * n1),
    ];
    let rhs = correction.into_iter().flatten().fold(qa_qb, Term::sum);
    let mut inner = Formula::eq(Term::var(&q_names[2]), rhs);

    for ((x_name, hint, r, rest, xn), q) in parts.into_iter().zip(&q_names).rev() {
        let q_scope = Formula::exists(
            q.clone(),
            WitnessHint::SearchTo(xn),
            Formula::and(rest, inner),
        );
        inner = Formula::exists(x_name, hint, Formula::and(r, q_scope));
    }
    inner
}

fn names_avoiding(vars: &[&str]) -> NameSupply {
    let mut names = NameSupply::new();
    for v in vars {
        names.reserve(v);
    }
    names.reserve(SYMBOLIC_X0);
    names
}

fn parameters(threshold: &Threshold) -> Vec<String> {
    match threshold {
        Threshold::Finite { .. } => vec![],
        Threshold::Symbolic { .. } => vec![SYMBOLIC_X0.to_string()],
    }
}

/// `R(x, y) <-> y = f(x)` on `x > x0`.
pub fn define_f_tilde(params: &ClassParams, threshold: Threshold) -> DefinedRelation {
    let mut names = names_avoiding(&["x", "y"]);
    let formula = f_tilde_formula(
        params,
        &threshold,
        &Term::var("x"),
        &Term::var("y"),
        &mut names,
    );
    DefinedRelation {
        name: "ftilde".into(),
        inputs: vec!["x".into()],
        outputs: vec!["y".into()],
        parameters: parameters(&threshold),
        formula,
        domain: Domain::Above {
            var: "x".into(),
            threshold,
        },
        params: *params,
        note: "y = f(x) for x > x0 = f^-1(2 + 4d + n0^2 + k)".into(),
    }
}

/// `Q(n, y) <-> y = 5d n^2` on `n >= n1`.
pub fn define_c_n_squared(params: &ClassParams, threshold: Threshold) -> DefinedRelation {
    let mut names = names_avoiding(&["n", "y"]);
    let formula = c_n_squared_formula(
        params,
        &threshold,
        &Term::var("n"),
        &Term::var("y"),
        &mut names,
    );
    DefinedRelation {
        name: "csquare".into(),
        inputs: vec!["n".into()],
        outputs: vec!["y".into()],
        parameters: parameters(&threshold),
        formula,
        domain: Domain::AtLeast {
            var: "n".into(),
            bound: params.n1(),
        },
        params: *params,
        note: format!("y = {} n^2 for n >= n1 = {}", params.c(), params.n1()),
    }
}

/// `M(a, b, z) <-> z = a b` on all of `N^2`.
pub fn define_multiplication(params: &ClassParams, threshold: Threshold) -> DefinedRelation {
    let mut names = names_avoiding(&["a", "b", "z"]);
    let formula = multiplication_formula(
        params,
        &threshold,
        &Term::var("a"),
        &Term::var("b"),
        &Term::var("z"),
        &mut names,
    );
    DefinedRelation {
        name: "mult".into(),
        inputs: vec!["a".into(), "b".into()],
        outputs: vec!["z".into()],
        parameters: parameters(&threshold),
        formula,
        domain: Domain::Total,
        params: *params,
        note: format!(
            "z = ab via 5d-squares of a + n1, b + n1 and their sum (n1 = {}, c = {})",
            params.n1(),
            params.c()
        ),
    }
}

/// `(f^-1(target - 1), f^-1(target + k)]` as the pair of its end points;
/// every `x` with `f(x) = target` lies in it.
pub fn witness_bracket(
    f: &FunctionOracle,
    params: &ClassParams,
    target: u64,
    search_limit: u64,
) -> Result<(u64, u64)> {
    if target == 0 {
        return Err(Error::Domain("witness bracket needs target >= 1".into()));
    }
    let mut inv = InverseTable::new(f);
    let low = inv.get(target - 1, search_limit)?;
    let top = target
        .checked_add(params.k)
        .ok_or_else(|| Error::Overflow(format!("{target} + {}", params.k)))?;
    let high = inv.get(top, search_limit)?;
    Ok((low, high))
}

/// Runs `job` on a thread with a large stack. Formulas for large parameters
/// contain sums with hundreds of thousands of nested nodes, and every
/// traversal (printing, evaluation, dropping) recurses through them.
pub fn with_deep_stack<T: Send>(job: impl FnOnce() -> T + Send) -> T {
    const STACK: usize = 1 << 30;
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(STACK)
            .spawn_scoped(s, job)
            .expect("spawn worker thread")
            .join()
            .unwrap_or_else(|e| std::panic::resume_unwind(e))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p011() -> ClassParams {
        ClassParams::new(0, 1, 1).unwrap()
    }

    fn sqrt1() -> FunctionOracle {
        FunctionOracle::sqrt_like(1).unwrap()
    }

    fn t31() -> Threshold {
        Threshold::Finite { value: 31 }
    }

    #[test]
    fn congruence_examples() {
        let ev = Evaluator::new(&sqrt1());
        let (a, b, m) = (Term::var("a"), Term::var("b"), Term::var("m"));
        let phi = restricted_congruence(&a, &b, &m, 2);
        let at = |x, y, z| Assignment::new().with("a", x).with("b", y).with("m", z);
        assert!(ev.eval_formula(&phi, &at(7, 1, 3)).unwrap());
        let phi1 = restricted_congruence(&a, &b, &m, 1);
        assert!(!ev.eval_formula(&phi1, &at(1, 7, 3)).unwrap());
        for c in 0..6 {
            let m = SizeMetrics::of(&restricted_congruence(&a, &b, &Term::var("m"), c));
            assert_eq!(m.equalities as u64, 2 * (c + 1));
            assert_eq!(m.disjunctions as u64, 2 * (c + 1) - 1);
        }
        // |a - b| in {0, m, ..., cm}
        for (x, y, z) in [
            (0u64, 0u64, 0u64),
            (5, 5, 1),
            (3, 11, 4),
            (11, 3, 4),
            (20, 2, 6),
            (2, 20, 6),
        ] {
            let want = (0..=2).any(|h| x.abs_diff(y) == h * z);
            assert_eq!(
                ev.eval_formula(&phi, &at(x, y, z)).unwrap(),
                want,
                "{x} {y} {z}"
            );
        }
    }

    #[test]
    fn derived_constants() {
        let p = p011();
        assert_eq!((p.x0_target(), p.n1(), p.c(), p.slack()), (7, 8, 5, 1));
        assert_eq!(Threshold::resolve(&sqrt1(), &p, 1 << 20).unwrap(), t31());
        let prime = ClassParams::new(1, 1, 11).unwrap();
        assert_eq!(prime.x0_target(), 128);
        assert_eq!(prime.n1(), 128);
    }

    #[test]
    fn f_tilde_on_sqrt_like() {
        let rel = define_f_tilde(&p011(), t31());
        let ev = Evaluator::new(&sqrt1());
        let at = |x, y| Assignment::new().with("x", x).with("y", y);
        assert!(rel.evaluate(&ev, &at(40, 8)).unwrap());
        assert!(!rel.evaluate(&ev, &at(40, 7)).unwrap());
        assert!(!rel.evaluate(&ev, &at(40, 9)).unwrap());
        assert!(matches!(
            rel.evaluate(&ev, &at(31, 7)),
            Err(RelationError::OutsideDomain { value: 31, .. })
        ));
        // Disjunction width k + d + 1 = 2 branches, each with two orientations.
        assert_eq!(rel.size().equalities, 2 + 2 * 2);
        assert!(rel.lint().is_clean(), "{:?}", rel.lint());
        for x in 32..200u64 {
            let ys = ev
                .solutions(&rel.formula, &Assignment::new().with("x", x), "y", x)
                .unwrap();
            assert_eq!(
                ys,
                [sqrt1().eval(x).unwrap()].into_iter().collect(),
                "x={x}"
            );
        }
    }

    #[test]
    fn prime_instance_is_symbolic() {
        let params = ClassParams::new(1, 1, 11).unwrap();
        let table = std::sync::Arc::new(crate::prime::sieve_upto(100_000).unwrap());
        let f = FunctionOracle::prime_quotient(table);
        let th = Threshold::resolve(&f, &params, 1 << 20).unwrap();
        assert_eq!(th, Threshold::Symbolic { target: 128 });
        let rel = define_f_tilde(&params, th);
        assert_eq!(rel.parameters, vec!["x0".to_string()]);
        assert!(rel.formula.free_vars().contains("x0"));
        assert!(rel.lint().is_clean(), "{:?}", rel.lint());
        let ev = Evaluator::new(&f);
        let err = rel
            .evaluate(&ev, &Assignment::new().with("x", 10_000).with("y", 9))
            .unwrap_err();
        assert!(
            err.to_string().contains("domain threshold unreachable"),
            "{err}"
        );
        assert_eq!(rel.size().equalities, 2 + 2 * 3);
    }

    #[test]
    fn c_n_squared_on_sqrt_like() {
        let rel = define_c_n_squared(&p011(), t31());
        assert!(rel.lint().is_clean(), "{:?}", rel.lint());
        let ev = Evaluator::new(&sqrt1());
        let at = |n, y| Assignment::new().with("n", n).with("y", y);
        assert!(rel.evaluate(&ev, &at(8, 320)).unwrap());
        assert!(!rel.evaluate(&ev, &at(8, 319)).unwrap());
        assert!(!rel.evaluate(&ev, &at(8, 321)).unwrap());
        assert!(matches!(
            rel.evaluate(&ev, &at(7, 245)),
            Err(RelationError::OutsideDomain { .. })
        ));
        for n in 8..20u64 {
            let ys = ev
                .solutions(
                    &rel.formula,
                    &Assignment::new().with("n", n),
                    "y",
                    u64::MAX / 4,
                )
                .unwrap();
            assert_eq!(ys, [5 * n * n].into_iter().collect(), "n={n}");
        }
    }

    #[test]
    fn c_n_squared_brute_sweep_small_n() {
        let rel = define_c_n_squared(&p011(), t31());
        let ev = Evaluator::new(&sqrt1());
        let prog = ev.compile(&rel.formula).unwrap();
        let n = 8u64;
        // x + n bounds y; the witness satisfies f(x) = 40, so x < 41^2 / 2.
        for y in 0..(41 * 41 / 2 + n) {
            let holds = prog
                .eval_formula(&Assignment::new().with("n", n).with("y", y))
                .unwrap();
            assert_eq!(holds, y == 320, "y={y}");
        }
    }

    #[test]
    fn multiplication_on_sqrt_like() {
        let rel = define_multiplication(&p011(), t31());
        assert!(rel.lint().is_clean(), "{:?}", rel.lint());
        let ev = Evaluator::new(&sqrt1());
        let prog = ev.compile(&rel.formula).unwrap();
        let at = |a, b, z| Assignment::new().with("a", a).with("b", b).with("z", z);
        assert!(prog.eval_formula(&at(3, 4, 12)).unwrap());
        assert!(!prog.eval_formula(&at(3, 4, 11)).unwrap());
        assert!(!prog.eval_formula(&at(3, 4, 13)).unwrap());
        for b in 0..6 {
            assert!(prog.eval_formula(&at(0, b, 0)).unwrap());
        }
        for a in 0..4u64 {
            for b in 0..4u64 {
                let zs = prog
                    .solutions(&Assignment::new().with("a", a).with("b", b), "z", 1000)
                    .unwrap();
                assert_eq!(zs, [a * b].into_iter().collect(), "a={a} b={b}");
            }
        }
    }

    #[test]
    fn prime_multiplication_is_emittable() {
        let params = ClassParams::new(1, 1, 11).unwrap();
        let (size, clean, env) = with_deep_stack(move || {
            let rel = define_multiplication(&params, Threshold::symbolic(&params));
            (rel.size(), rel.lint().is_clean(), rel.envelope())
        });
        assert!(clean);
        assert_eq!(size.existentials, 3 * (1 + 1 + 1 + 1 + 1));
        assert_eq!(env["roles"]["parameters"][0], "x0");
        // 2c n1^2 ones in the correction term alone
        assert!(size.ones >= 10 * 128 * 128);
    }

    #[test]
    fn bracket_holds_level_sets() {
        let f = sqrt1();
        let (lo, hi) = witness_bracket(&f, &p011(), 40, 1 << 20).unwrap();
        let level: Vec<u64> = (0..2000).filter(|x| f.eval(*x).unwrap() == 40).collect();
        assert_eq!(level, ((lo + 1)..=hi).collect::<Vec<_>>());
        assert!(witness_bracket(&f, &p011(), 0, 100).is_err());
    }
}
