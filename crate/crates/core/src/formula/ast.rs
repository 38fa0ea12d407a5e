use std::collections::BTreeSet;
use std::fmt;

/// Terms over `{+, 1, F}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    One,
    Sum(Box<Term>, Box<Term>),
    /// `F(t)`, interpreted as `t * f(t)`.
    FApp(Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn sum(a: Term, b: Term) -> Term {
        Term::Sum(Box::new(a), Box::new(b))
    }

    pub fn f(arg: Term) -> Term {
        Term::FApp(Box::new(arg))
    }

    /// `t + 1`.
    pub fn succ(self) -> Term {
        Term::sum(self, Term::One)
    }

    /// Left-leaning sum of the given terms; `None` for an empty list.
    pub fn sum_all<I: IntoIterator<Item = Term>>(terms: I) -> Option<Term> {
        terms.into_iter().reduce(Term::sum)
    }

    /// The numeral `n` as `((1 + 1) + ...) + 1`; there is no term for 0.
    pub fn numeral(n: u64) -> Option<Term> {
        Term::One.times(n)
    }

    /// `t + t + ... + t` (`times` copies, left-leaning); `None` for zero copies.
    pub fn times(&self, times: u64) -> Option<Term> {
        Term::sum_all((0..times).map(|_| self.clone()))
    }

    /// `self + n`, leaving `self` unchanged for `n = 0`.
    pub fn plus_numeral(self, n: u64) -> Term {
        match Term::numeral(n) {
            Some(k) => Term::sum(self, k),
            None => self,
        }
    }

    pub fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::One => {}
            Term::Sum(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Term::FApp(a) => a.collect_vars(out),
        }
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    pub fn mentions(&self, var: &str) -> bool {
        match self {
            Term::Var(v) => v == var,
            Term::One => false,
            Term::Sum(a, b) => a.mentions(var) || b.mentions(var),
            Term::FApp(a) => a.mentions(var),
        }
    }

    pub fn substitute(&self, var: &str, replacement: &Term) -> Term {
        match self {
            Term::Var(v) if v == var => replacement.clone(),
            Term::Var(_) | Term::One => self.clone(),
            Term::Sum(a, b) => Term::sum(
                a.substitute(var, replacement),
                b.substitute(var, replacement),
            ),
            Term::FApp(a) => Term::f(a.substitute(var, replacement)),
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::One => 1,
            Term::Sum(a, b) => 1 + a.size() + b.size(),
            Term::FApp(a) => 1 + a.size(),
        }
    }
}

/// How the evaluator enumerates the witness of an existential.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum WitnessHint {
    /// Witnesses lie in `[0, bound]`.
    SearchTo(Term),
    /// The witness `x` satisfies `f(x) = target` for a `slack`-almost
    /// increasing `f`, so it lies in `(f^-1(target - 1), f^-1(target + slack)]`.
    FunctionalFInverse { target: Term, slack: u64 },
    /// No bound known; the evaluator refuses.
    Unbounded,
}

impl WitnessHint {
    pub fn vars(&self) -> BTreeSet<String> {
        match self {
            WitnessHint::SearchTo(t) | WitnessHint::FunctionalFInverse { target: t, .. } => {
                t.vars()
            }
            WitnessHint::Unbounded => BTreeSet::new(),
        }
    }

    fn substitute(&self, var: &str, replacement: &Term) -> WitnessHint {
        match self {
            WitnessHint::SearchTo(t) => WitnessHint::SearchTo(t.substitute(var, replacement)),
            WitnessHint::FunctionalFInverse { target, slack } => WitnessHint::FunctionalFInverse {
                target: target.substitute(var, replacement),
                slack: *slack,
            },
            WitnessHint::Unbounded => WitnessHint::Unbounded,
        }
    }
}

/// Positive existential formulas: no negation, no universal quantifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Formula {
    Eq(Term, Term),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Exists {
        var: String,
        hint: WitnessHint,
        body: Box<Formula>,
    },
}

impl Formula {
    pub fn eq(a: Term, b: Term) -> Formula {
        Formula::Eq(a, b)
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(var: impl Into<String>, hint: WitnessHint, body: Formula) -> Formula {
        Formula::Exists {
            var: var.into(),
            hint,
            body: Box::new(body),
        }
    }

    /// Left-leaning conjunction; `None` for an empty list.
    pub fn and_all<I: IntoIterator<Item = Formula>>(parts: I) -> Option<Formula> {
        parts.into_iter().reduce(Formula::and)
    }

    pub fn or_all<I: IntoIterator<Item = Formula>>(parts: I) -> Option<Formula> {
        parts.into_iter().reduce(Formula::or)
    }

    /// `a <= b` as `exists u <= b . (a + u) = b`, with `u` fresh.
    pub fn le(a: Term, b: Term, names: &mut NameSupply) -> Formula {
        let u = names.fresh("u");
        Formula::exists(
            u.clone(),
            WitnessHint::SearchTo(b.clone()),
            Formula::eq(Term::sum(a, Term::var(u)), b),
        )
    }

    /// `a < b` as `exists u <= b . ((a + u) + 1) = b`, with `u` fresh.
    pub fn lt(a: Term, b: Term, names: &mut NameSupply) -> Formula {
        let u = names.fresh("u");
        Formula::exists(
            u.clone(),
            WitnessHint::SearchTo(b.clone()),
            Formula::eq(Term::sum(a, Term::var(u)).succ(), b),
        )
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        match self {
            Formula::Eq(a, b) => {
                let mut out = a.vars();
                b.collect_vars(&mut out);
                out
            }
            Formula::And(p, q) | Formula::Or(p, q) => {
                let mut out = p.free_vars();
                out.extend(q.free_vars());
                out
            }
            Formula::Exists { var, hint, body } => {
                let mut out = body.free_vars();
                out.remove(var);
                out.extend(hint.vars());
                out
            }
        }
    }

    pub fn bound_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |phi| {
            if let Formula::Exists { var, .. } = phi {
                out.insert(var.clone());
            }
        });
        out
    }

    /// Every variable name occurring anywhere, free or bound.
    pub fn all_vars(&self) -> BTreeSet<String> {
        let mut out = self.free_vars();
        out.extend(self.bound_vars());
        out
    }

    /// Pre-order traversal of the formula nodes.
    pub fn visit<'a>(&'a self, visitor: &mut impl FnMut(&'a Formula)) {
        visitor(self);
        match self {
            Formula::Eq(..) => {}
            Formula::And(p, q) | Formula::Or(p, q) => {
                p.visit(visitor);
                q.visit(visitor);
            }
            Formula::Exists { body, .. } => body.visit(visitor),
        }
    }

    /// Capture-avoiding substitution `self[var := replacement]`.
    pub fn substitute(&self, var: &str, replacement: &Term) -> Formula {
        match self {
            Formula::Eq(a, b) => Formula::eq(
                a.substitute(var, replacement),
                b.substitute(var, replacement),
            ),
            Formula::And(p, q) => Formula::and(
                p.substitute(var, replacement),
                q.substitute(var, replacement),
            ),
            Formula::Or(p, q) => Formula::or(
                p.substitute(var, replacement),
                q.substitute(var, replacement),
            ),
            Formula::Exists {
                var: bound,
                hint,
                body,
            } => {
                let hint = hint.substitute(var, replacement);
                if bound == var {
                    return Formula::exists(bound.clone(), hint, (**body).clone());
                }
                if !body.free_vars().contains(var) {
                    return Formula::exists(bound.clone(), hint, (**body).clone());
                }
                if replacement.mentions(bound) {
                    let mut avoid = body.all_vars();
                    avoid.extend(replacement.vars());
                    avoid.insert(var.to_string());
                    let fresh = NameSupply::avoiding(avoid).fresh(bound);
                    let renamed = body.substitute(bound, &Term::var(fresh.clone()));
                    Formula::exists(fresh, hint, renamed.substitute(var, replacement))
                } else {
                    Formula::exists(bound.clone(), hint, body.substitute(var, replacement))
                }
            }
        }
    }
}

/// Hands out variable names not used before.
#[derive(Clone, Debug, Default)]
pub struct NameSupply {
    taken: BTreeSet<String>,
}

impl NameSupply {
    pub fn new() -> Self {
        NameSupply::default()
    }

    pub fn avoiding(taken: BTreeSet<String>) -> Self {
        NameSupply { taken }
    }

    pub fn reserve(&mut self, name: &str) {
        self.taken.insert(name.to_string());
    }

    /// `base` if unused, otherwise `base_1`, `base_2`, ...
    pub fn fresh(&mut self, base: &str) -> String {
        let mut name = base.to_string();
        let mut i = 0u64;
        while self.taken.contains(&name) {
            i += 1;
            name = format!("{base}_{i}");
        }
        self.taken.insert(name.clone());
        name
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::One => f.write_str("1"),
            Term::Sum(a, b) => write!(f, "({a} + {b})"),
            Term::FApp(a) => write!(f, "F({a})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Eq(a, b) => write!(f, "({a} = {b})"),
            Formula::And(p, q) => write!(f, "({p} & {q})"),
            Formula::Or(p, q) => write!(f, "({p} | {q})"),
            Formula::Exists { var, hint, body } => match hint {
                WitnessHint::SearchTo(b) => write!(f, "exists {var} <= {b} . {body}"),
                WitnessHint::FunctionalFInverse { target, slack } => {
                    write!(f, "exists {var} in finv({target}, {slack}) . {body}")
                }
                WitnessHint::Unbounded => write!(f, "exists {var} . {body}"),
            },
        }
    }
}
