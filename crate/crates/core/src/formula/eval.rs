//! Evaluation in `<N, +, 1, x -> x f(x)>` with witness hints.
//!
//! Formulas are compiled to a slot-indexed form first. Every variable
//! occurrence becomes a slot, closed `1`/`+` subterms are folded, and each
//! existential records the slots it depends on so that its result can be
//! memoized. Candidate witnesses are pruned by solving the linear equalities
//! of the body for the bound variable; pruning only ever drops candidates
//! that cannot satisfy the body.

use std::collections::{BTreeSet, HashMap};
use std::sync::Mutex;

use thiserror::Error;

use super::ast::{Formula, Term, WitnessHint};
use super::Assignment;
use crate::class::InverseTable;
use crate::error::Error;
use crate::oracle::FunctionOracle;

pub const DEFAULT_CANDIDATE_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is not assigned")]
    Unassigned(String),
    #[error("`exists {var}` has no witness bound; refusing to search (at {path})")]
    Unbounded { var: String, path: String },
    #[error("`exists {var}`: {size} candidates exceed the budget of {budget} (at {path})")]
    Budget {
        var: String,
        size: u128,
        budget: u64,
        path: String,
    },
    #[error("{source} (at {path})")]
    Oracle { source: Error, path: String },
}

impl EvalError {
    fn oracle(source: Error) -> Self {
        EvalError::Oracle {
            source,
            path: String::new(),
        }
    }

    /// Prefixes the quantifier path with `exists var`.
    fn within(mut self, var: &str) -> Self {
        let path = match &mut self {
            EvalError::Unassigned(_) => return self,
            EvalError::Unbounded { path, .. }
            | EvalError::Budget { path, .. }
            | EvalError::Oracle { path, .. } => path,
        };
        *path = if path.is_empty() {
            format!("exists {var}")
        } else {
            format!("exists {var} / {path}")
        };
        self
    }

    fn finish(mut self) -> Self {
        if let EvalError::Unbounded { path, .. }
        | EvalError::Budget { path, .. }
        | EvalError::Oracle { path, .. } = &mut self
        {
            if path.is_empty() {
                *path = "top level".into();
            }
        }
        self
    }
}

type EResult<T> = std::result::Result<T, EvalError>;

/// Values chosen for existential variables on a satisfying path, outermost first.
pub type Witnesses = Vec<(String, u64)>;

/// A compiled term in normal form: `constant + sum coef * slot + sum F(arg)`.
#[derive(Clone, Debug, Default)]
struct CTerm {
    constant: u128,
    /// Sorted by slot, coefficients positive.
    slots: Vec<(usize, u128)>,
    apps: Vec<CTerm>,
}

impl CTerm {
    fn slot(s: usize) -> Self {
        CTerm {
            slots: vec![(s, 1)],
            ..CTerm::default()
        }
    }

    fn constant(c: u128) -> Self {
        CTerm {
            constant: c,
            ..CTerm::default()
        }
    }

    fn app(arg: CTerm) -> Self {
        CTerm {
            apps: vec![arg],
            ..CTerm::default()
        }
    }

    fn add(mut self, other: CTerm) -> Self {
        self.constant = self.constant.saturating_add(other.constant);
        for (s, c) in other.slots {
            match self.slots.binary_search_by_key(&s, |(t, _)| *t) {
                Ok(i) => self.slots[i].1 = self.slots[i].1.saturating_add(c),
                Err(i) => self.slots.insert(i, (s, c)),
            }
        }
        self.apps.extend(other.apps);
        self
    }

    fn coef(&self, slot: usize) -> u128 {
        self.slots
            .binary_search_by_key(&slot, |(t, _)| *t)
            .map_or(0, |i| self.slots[i].1)
    }

    fn mentions(&self, slot: usize) -> bool {
        self.coef(slot) > 0 || self.apps.iter().any(|a| a.mentions(slot))
    }

    fn collect(&self, out: &mut BTreeSet<usize>) {
        out.extend(self.slots.iter().map(|(s, _)| *s));
        for a in &self.apps {
            a.collect(out);
        }
    }
}

#[derive(Clone, Debug)]
enum CHint {
    SearchTo(CTerm),
    FInverse { target: CTerm, slack: u64 },
}

#[derive(Debug)]
enum Kind {
    Eq(CTerm, CTerm),
    And(Box<Node>, Box<Node>),
    Or(Box<Node>, Box<Node>),
    Exists {
        id: usize,
        slot: usize,
        hint: CHint,
        body: Box<Node>,
    },
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    /// Free slots, sorted.
    free: Vec<usize>,
}

impl Node {
    fn mentions(&self, slot: usize) -> bool {
        self.free.binary_search(&slot).is_ok()
    }
}

struct Compiler {
    names: Vec<String>,
    scope: Vec<(String, usize)>,
    next_id: usize,
}

impl Compiler {
    fn lookup(&self, name: &str) -> Option<usize> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, s)| *s)
    }

    fn term(&self, t: &Term) -> CTerm {
        match t {
            Term::Var(v) => {
                CTerm::slot(self.lookup(v).expect("free variables are registered first"))
            }
            Term::One => CTerm::constant(1),
            Term::Sum(a, b) => self.term(a).add(self.term(b)),
            Term::FApp(a) => CTerm::app(self.term(a)),
        }
    }

    fn formula(&mut self, p: &Formula, path: &mut Vec<String>) -> EResult<Node> {
        let (kind, free) = match p {
            Formula::Eq(a, b) => {
                let (a, b) = (self.term(a), self.term(b));
                let mut free = BTreeSet::new();
                a.collect(&mut free);
                b.collect(&mut free);
                (Kind::Eq(a, b), free)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let (a, b) = (self.formula(a, path)?, self.formula(b, path)?);
                let free: BTreeSet<usize> = a.free.iter().chain(&b.free).copied().collect();
                let (a, b) = (Box::new(a), Box::new(b));
                let kind = if matches!(p, Formula::And(..)) {
                    Kind::And(a, b)
                } else {
                    Kind::Or(a, b)
                };
                (kind, free)
            }
            Formula::Exists { var, hint, body } => {
                let mut free = BTreeSet::new();
                let hint = match hint {
                    WitnessHint::SearchTo(t) => CHint::SearchTo(self.term(t)),
                    WitnessHint::FunctionalFInverse { target, slack } => CHint::FInverse {
                        target: self.term(target),
                        slack: *slack,
                    },
                    WitnessHint::Unbounded => {
                        let at = if path.is_empty() {
                            "top level".to_string()
                        } else {
                            path.join(" / ")
                        };
                        return Err(EvalError::Unbounded {
                            var: var.clone(),
                            path: at,
                        });
                    }
                };
                match &hint {
                    CHint::SearchTo(t) | CHint::FInverse { target: t, .. } => t.collect(&mut free),
                }
                let slot = self.names.len();
                self.names.push(var.clone());
                let id = self.next_id;
                self.next_id += 1;
                self.scope.push((var.clone(), slot));
                path.push(format!("exists {var}"));
                let body = self.formula(body, path);
                path.pop();
                self.scope.pop();
                let body = body?;
                free.extend(body.free.iter().copied().filter(|s| *s != slot));
                (
                    Kind::Exists {
                        id,
                        slot,
                        hint,
                        body: Box::new(body),
                    },
                    free,
                )
            }
        };
        Ok(Node {
            kind,
            free: free.into_iter().collect(),
        })
    }
}

/// Candidate witnesses: `[lo, hi]`, plus `0` when `zero` is set.
#[derive(Clone, Copy, Debug)]
struct Span {
    lo: u64,
    hi: u64,
    zero: bool,
}

impl Span {
    fn size(&self) -> u128 {
        let base = if self.lo > self.hi {
            0
        } else {
            (self.hi - self.lo) as u128 + 1
        };
        base + u128::from(self.zero && (self.lo > self.hi || self.lo > 0))
    }

    fn contains(&self, x: u64) -> bool {
        (self.zero && x == 0) || (self.lo <= x && x <= self.hi)
    }

    fn iter(self) -> impl Iterator<Item = u64> {
        let zero = (self.zero && (self.lo > self.hi || self.lo > 0)).then_some(0);
        zero.into_iter().chain(self.lo..=self.hi)
    }
}

/// Result of solving a formula for one slot.
#[derive(Clone, Debug)]
enum Cands {
    /// Every value satisfies it.
    All,
    /// Exactly these values (or, when pruning, at most these).
    Set(BTreeSet<u64>),
    /// Not determined by linear reasoning.
    Unknown,
}

/// Evaluator for one oracle. Cheap to share across threads.
pub struct Evaluator {
    f: FunctionOracle,
    inverse: Mutex<InverseTable>,
    search_limit: u64,
    candidate_budget: u64,
    memoize: bool,
    prune: bool,
}

impl Evaluator {
    pub fn new(f: &FunctionOracle) -> Self {
        Evaluator {
            f: f.clone(),
            inverse: Mutex::new(InverseTable::new(f)),
            search_limit: f.max_arg().unwrap_or(u64::MAX / 2),
            candidate_budget: DEFAULT_CANDIDATE_BUDGET,
            memoize: true,
            prune: true,
        }
    }

    /// Bound for the pseudo-inverse scans behind `finv` hints.
    pub fn with_search_limit(mut self, limit: u64) -> Self {
        self.search_limit = limit;
        self
    }

    /// Largest candidate range a single existential may enumerate.
    pub fn with_candidate_budget(mut self, budget: u64) -> Self {
        self.candidate_budget = budget;
        self
    }

    pub fn with_memoization(mut self, on: bool) -> Self {
        self.memoize = on;
        self
    }

    pub fn with_pruning(mut self, on: bool) -> Self {
        self.prune = on;
        self
    }

    pub fn oracle(&self) -> &FunctionOracle {
        &self.f
    }

    /// `f^-1(n)`, shared across all evaluations.
    pub fn pseudo_inverse(&self, n: u64) -> crate::Result<u64> {
        self.inverse
            .lock()
            .expect("inverse table poisoned")
            .get(n, self.search_limit)
    }

    /// The candidate range of a `finv(target, slack)` hint:
    /// `(f^-1(target - 1), f^-1(target + slack)]` as an inclusive `(lo, hi)`.
    /// For `target = 0` the range starts at the first argument of `f`.
    pub fn bracket(&self, target: u64, slack: u64) -> crate::Result<(u64, u64)> {
        let top = target
            .checked_add(slack)
            .ok_or_else(|| Error::Overflow(format!("{target} + {slack}")))?;
        let hi = self.pseudo_inverse(top)?;
        let lo = if target == 0 {
            self.f.n_start().max(1)
        } else {
            self.pseudo_inverse(target - 1)? + 1
        };
        Ok((lo, hi))
    }

    pub fn compile(&self, phi: &Formula) -> EResult<Program<'_>> {
        let free: Vec<String> = phi.free_vars().into_iter().collect();
        let mut c = Compiler {
            names: free.clone(),
            scope: free
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), i))
                .collect(),
            next_id: 0,
        };
        let root = c.formula(phi, &mut Vec::new())?;
        Ok(Program {
            ev: self,
            free,
            names: c.names,
            root,
            memo: Mutex::new(HashMap::new()),
            solve_memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn eval_term(&self, t: &Term, a: &Assignment) -> EResult<u64> {
        let free: Vec<String> = t.vars().into_iter().collect();
        let c = Compiler {
            names: free.clone(),
            scope: free
                .iter()
                .enumerate()
                .map(|(i, v)| (v.clone(), i))
                .collect(),
            next_id: 0,
        };
        let env = bind(&free, a)?;
        self.term(&c.term(t), &env).map_err(EvalError::finish)
    }

    pub fn eval_formula(&self, phi: &Formula, a: &Assignment) -> EResult<bool> {
        Ok(self.evaluate(phi, a)?.is_some())
    }

    /// Truth value with the witnesses of one satisfying path.
    pub fn evaluate(&self, phi: &Formula, a: &Assignment) -> EResult<Option<Witnesses>> {
        self.compile(phi)?.evaluate(a)
    }

    /// All values `v <= bound` of the free variable `var` for which `phi` holds
    /// under `a[var := v]`.
    pub fn solutions(
        &self,
        phi: &Formula,
        a: &Assignment,
        var: &str,
        bound: u64,
    ) -> EResult<BTreeSet<u64>> {
        self.compile(phi)?.solutions(a, var, bound)
    }

    fn term(&self, t: &CTerm, env: &[u64]) -> EResult<u64> {
        let overflow = || EvalError::oracle(Error::Overflow("term value exceeds 2^64 - 1".into()));
        let mut v = t.constant;
        for (s, c) in &t.slots {
            v = c
                .checked_mul(env[*s] as u128)
                .and_then(|m| v.checked_add(m))
                .ok_or_else(overflow)?;
        }
        for a in &t.apps {
            let x = self.term(a, env)?;
            v = v
                .checked_add(self.f.eval_times(x).map_err(EvalError::oracle)? as u128)
                .ok_or_else(overflow)?;
        }
        u64::try_from(v).map_err(|_| overflow())
    }

    /// `t` as `coef * slot + constant`, or `None` when the slot sits under `F`
    /// or `t` depends on the `unknown` slot.
    fn linear(
        &self,
        t: &CTerm,
        slot: usize,
        unknown: Option<usize>,
        env: &[u64],
    ) -> Option<(i128, i128)> {
        if t.apps
            .iter()
            .any(|a| a.mentions(slot) || unknown.is_some_and(|u| a.mentions(u)))
        {
            return None;
        }
        let mut coef = 0i128;
        let mut rest = i128::try_from(t.constant).ok()?;
        for (s, c) in &t.slots {
            let c = i128::try_from(*c).ok()?;
            if *s == slot {
                coef = c;
            } else if Some(*s) == unknown {
                return None;
            } else {
                rest = rest.checked_add(c.checked_mul(env[*s] as i128)?)?;
            }
        }
        for a in &t.apps {
            let x = self.term(a, env).ok()?;
            rest = rest.checked_add(self.f.eval_times(x).ok()? as i128)?;
        }
        Some((coef, rest))
    }

    /// Values of `slot` that can satisfy `p`, by linear reasoning only.
    fn prune(&self, p: &Node, slot: usize, unknown: Option<usize>, env: &[u64]) -> Cands {
        if !p.mentions(slot) {
            return Cands::Unknown;
        }
        match &p.kind {
            Kind::Eq(a, b) => match (
                self.linear(a, slot, unknown, env),
                self.linear(b, slot, unknown, env),
            ) {
                (Some(l), Some(r)) => solve_eq(l, r),
                _ => Cands::Unknown,
            },
            Kind::And(a, b) => match (
                self.prune(a, slot, unknown, env),
                self.prune(b, slot, unknown, env),
            ) {
                (Cands::Set(x), Cands::Set(y)) => Cands::Set(x.intersection(&y).copied().collect()),
                (Cands::Set(x), _) | (_, Cands::Set(x)) => Cands::Set(x),
                (Cands::All, Cands::All) => Cands::All,
                _ => Cands::Unknown,
            },
            Kind::Or(a, b) => match (
                self.prune(a, slot, unknown, env),
                self.prune(b, slot, unknown, env),
            ) {
                (Cands::Set(mut x), Cands::Set(y)) => {
                    x.extend(y);
                    Cands::Set(x)
                }
                _ => Cands::Unknown,
            },
            Kind::Exists { .. } => Cands::Unknown,
        }
    }
}

fn solve_eq((a1, b1): (i128, i128), (a2, b2): (i128, i128)) -> Cands {
    let (coef, rhs) = (a1 - a2, b2 - b1);
    if coef == 0 {
        return if rhs == 0 {
            Cands::All
        } else {
            Cands::Set(BTreeSet::new())
        };
    }
    let mut out = BTreeSet::new();
    if rhs % coef == 0 {
        let x = rhs / coef;
        if (0..=u64::MAX as i128).contains(&x) {
            out.insert(x as u64);
        }
    }
    Cands::Set(out)
}

fn bind(free: &[String], a: &Assignment) -> EResult<Vec<u64>> {
    free.iter()
        .map(|v| a.get(v).ok_or_else(|| EvalError::Unassigned(v.clone())))
        .collect()
}

type MemoKey = (usize, Vec<u64>);
type SlotWitnesses = Vec<(usize, u64)>;

/// A formula compiled against one [`Evaluator`]. Existential results are
/// memoized across calls, so reusing a program over a grid of assignments
/// shares work between them.
pub struct Program<'e> {
    ev: &'e Evaluator,
    free: Vec<String>,
    names: Vec<String>,
    root: Node,
    memo: Mutex<HashMap<MemoKey, Option<SlotWitnesses>>>,
    solve_memo: Mutex<HashMap<(usize, MemoKey), Cands>>,
}

impl Program<'_> {
    pub fn free_vars(&self) -> &[String] {
        &self.free
    }

    /// Number of memoized existential results.
    pub fn memo_len(&self) -> usize {
        self.memo.lock().expect("memo poisoned").len()
    }

    fn env(&self, a: &Assignment) -> EResult<Vec<u64>> {
        let mut env = bind(&self.free, a)?;
        env.resize(self.names.len(), 0);
        Ok(env)
    }

    pub fn evaluate(&self, a: &Assignment) -> EResult<Option<Witnesses>> {
        let mut env = self.env(a)?;
        let found = self.eval(&self.root, &mut env).map_err(EvalError::finish)?;
        Ok(found.map(|ws| {
            ws.into_iter()
                .map(|(s, v)| (self.names[s].clone(), v))
                .collect()
        }))
    }

    pub fn eval_formula(&self, a: &Assignment) -> EResult<bool> {
        Ok(self.evaluate(a)?.is_some())
    }

    /// All `v <= bound` with `phi[var := v]` true; `var` must be free.
    pub fn solutions(&self, a: &Assignment, var: &str, bound: u64) -> EResult<BTreeSet<u64>> {
        let Some(slot) = self.free.iter().position(|v| v == var) else {
            // `var` does not occur: either every value or none.
            let mut env = self.env(a)?;
            let holds = self
                .eval(&self.root, &mut env)
                .map_err(EvalError::finish)?
                .is_some();
            return if holds {
                self.full_range(var, bound)
            } else {
                Ok(BTreeSet::new())
            };
        };
        let mut a = a.clone();
        a.set(var, 0);
        let mut env = self.env(&a)?;
        let found = self
            .solve(&self.root, slot, &mut env)
            .map_err(EvalError::finish)?;
        let out = match found {
            Cands::Set(s) => s.into_iter().filter(|v| *v <= bound).collect(),
            Cands::All => self.full_range(var, bound)?,
            Cands::Unknown => {
                self.check_budget(var, bound as u128 + 1)?;
                let mut out = BTreeSet::new();
                for v in 0..=bound {
                    env[slot] = v;
                    if self
                        .eval(&self.root, &mut env)
                        .map_err(EvalError::finish)?
                        .is_some()
                    {
                        out.insert(v);
                    }
                }
                out
            }
        };
        Ok(out)
    }

    fn full_range(&self, var: &str, bound: u64) -> EResult<BTreeSet<u64>> {
        self.check_budget(var, bound as u128 + 1)?;
        Ok((0..=bound).collect())
    }

    fn check_budget(&self, var: &str, size: u128) -> EResult<()> {
        if size > self.ev.candidate_budget as u128 {
            return Err(EvalError::Budget {
                var: var.to_string(),
                size,
                budget: self.ev.candidate_budget,
                path: String::new(),
            });
        }
        Ok(())
    }

    fn span(&self, hint: &CHint, env: &[u64]) -> EResult<Span> {
        match hint {
            CHint::SearchTo(t) => Ok(Span {
                lo: 0,
                hi: self.ev.term(t, env)?,
                zero: false,
            }),
            CHint::FInverse { target, slack } => {
                let t = self.ev.term(target, env)?;
                let (lo, hi) = self.ev.bracket(t, *slack).map_err(EvalError::oracle)?;
                Ok(Span {
                    lo,
                    hi,
                    zero: self.ev.f.n_start() == 0,
                })
            }
        }
    }

    /// Candidates for the witness of an existential, pruned when enabled.
    fn candidates(
        &self,
        var: &str,
        span: Span,
        body: &Node,
        slot: usize,
        unknown: Option<usize>,
        env: &[u64],
    ) -> EResult<Vec<u64>> {
        if self.ev.prune {
            if let Cands::Set(s) = self.ev.prune(body, slot, unknown, env) {
                return Ok(s.into_iter().filter(|x| span.contains(*x)).collect());
            }
        }
        self.check_budget(var, span.size())?;
        Ok(span.iter().collect())
    }

    fn eval(&self, p: &Node, env: &mut Vec<u64>) -> EResult<Option<SlotWitnesses>> {
        match &p.kind {
            Kind::Eq(a, b) => Ok((self.ev.term(a, env)? == self.ev.term(b, env)?).then(Vec::new)),
            Kind::And(a, b) => {
                let Some(mut wa) = self.eval(a, env)? else {
                    return Ok(None);
                };
                let Some(wb) = self.eval(b, env)? else {
                    return Ok(None);
                };
                wa.extend(wb);
                Ok(Some(wa))
            }
            Kind::Or(a, b) => match self.eval(a, env)? {
                Some(w) => Ok(Some(w)),
                None => self.eval(b, env),
            },
            Kind::Exists {
                id,
                slot,
                hint,
                body,
            } => {
                let var = &self.names[*slot];
                let key = self
                    .ev
                    .memoize
                    .then(|| (*id, p.free.iter().map(|s| env[*s]).collect::<Vec<_>>()));
                if let Some(key) = &key {
                    if let Some(hit) = self.memo.lock().expect("memo poisoned").get(key) {
                        return Ok(hit.clone());
                    }
                }
                let found = self
                    .eval_exists(var, *slot, hint, body, env)
                    .map_err(|e| e.within(var))?;
                if let Some(key) = key {
                    self.memo
                        .lock()
                        .expect("memo poisoned")
                        .insert(key, found.clone());
                }
                Ok(found)
            }
        }
    }

    fn eval_exists(
        &self,
        var: &str,
        slot: usize,
        hint: &CHint,
        body: &Node,
        env: &mut Vec<u64>,
    ) -> EResult<Option<SlotWitnesses>> {
        let span = self.span(hint, env)?;
        if !body.mentions(slot) {
            let Some(first) = span.iter().next() else {
                return Ok(None);
            };
            env[slot] = first;
            return Ok(self.eval(body, env)?.map(|w| prepend(slot, first, w)));
        }
        for x in self.candidates(var, span, body, slot, None, env)? {
            env[slot] = x;
            if let Some(w) = self.eval(body, env)? {
                return Ok(Some(prepend(slot, x, w)));
            }
        }
        Ok(None)
    }

    /// Values of `target` satisfying `p`, given every other free slot of `p`.
    fn solve(&self, p: &Node, target: usize, env: &mut Vec<u64>) -> EResult<Cands> {
        if !p.mentions(target) {
            let holds = self.eval(p, env)?.is_some();
            return Ok(if holds {
                Cands::All
            } else {
                Cands::Set(BTreeSet::new())
            });
        }
        match &p.kind {
            Kind::Eq(a, b) => Ok(
                match (
                    self.ev.linear(a, target, None, env),
                    self.ev.linear(b, target, None, env),
                ) {
                    (Some(l), Some(r)) => solve_eq(l, r),
                    _ => Cands::Unknown,
                },
            ),
            Kind::And(a, b) => {
                let left = self.solve(a, target, env)?;
                match left {
                    Cands::Set(s) if s.is_empty() => Ok(Cands::Set(s)),
                    Cands::Set(s) => Ok(Cands::Set(self.filter(s, b, target, env)?)),
                    Cands::All => self.solve(b, target, env),
                    Cands::Unknown => match self.solve(b, target, env)? {
                        Cands::Set(s) => Ok(Cands::Set(self.filter(s, a, target, env)?)),
                        _ => Ok(Cands::Unknown),
                    },
                }
            }
            Kind::Or(a, b) => {
                let left = self.solve(a, target, env)?;
                match left {
                    Cands::All | Cands::Unknown => Ok(left),
                    Cands::Set(mut s) => match self.solve(b, target, env)? {
                        Cands::Set(t) => {
                            s.extend(t);
                            Ok(Cands::Set(s))
                        }
                        other => Ok(other),
                    },
                }
            }
            Kind::Exists {
                id,
                slot,
                hint,
                body,
            } => {
                let var = &self.names[*slot];
                let key = self.ev.memoize.then(|| {
                    let vals = p
                        .free
                        .iter()
                        .filter(|s| **s != target)
                        .map(|s| env[*s])
                        .collect::<Vec<_>>();
                    (target, (*id, vals))
                });
                if let Some(key) = &key {
                    if let Some(hit) = self.solve_memo.lock().expect("memo poisoned").get(key) {
                        return Ok(hit.clone());
                    }
                }
                let found = self.solve_exists(var, *slot, hint, body, target, env)?;
                if let Some(key) = key {
                    self.solve_memo
                        .lock()
                        .expect("memo poisoned")
                        .insert(key, found.clone());
                }
                Ok(found)
            }
        }
    }

    fn solve_exists(
        &self,
        var: &str,
        slot: usize,
        hint: &CHint,
        body: &Node,
        target: usize,
        env: &mut Vec<u64>,
    ) -> EResult<Cands> {
        let mut hint_slots = BTreeSet::new();
        match hint {
            CHint::SearchTo(t) | CHint::FInverse { target: t, .. } => t.collect(&mut hint_slots),
        }
        if hint_slots.contains(&target) {
            return Ok(Cands::Unknown);
        }
        let span = self.span(hint, env).map_err(|e| e.within(var))?;
        let mut out = BTreeSet::new();
        for x in self
            .candidates(var, span, body, slot, Some(target), env)
            .map_err(|e| e.within(var))?
        {
            env[slot] = x;
            match self.solve(body, target, env).map_err(|e| e.within(var))? {
                Cands::Set(s) => out.extend(s),
                other => return Ok(other),
            }
        }
        Ok(Cands::Set(out))
    }

    fn filter(
        &self,
        s: BTreeSet<u64>,
        p: &Node,
        target: usize,
        env: &mut Vec<u64>,
    ) -> EResult<BTreeSet<u64>> {
        let mut out = BTreeSet::new();
        for v in s {
            env[target] = v;
            if self.eval(p, env)?.is_some() {
                out.insert(v);
            }
        }
        Ok(out)
    }
}

fn prepend(slot: usize, value: u64, rest: SlotWitnesses) -> SlotWitnesses {
    let mut out = Vec::with_capacity(rest.len() + 1);
    out.push((slot, value));
    out.extend(rest);
    out
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use proptest::prelude::*;

    use super::*;
    use crate::formula::parse_formula;

    /// Direct recursive semantics with plain bounded search, no pruning or memo.
    fn naive(
        f: &FunctionOracle,
        p: &Formula,
        env: &mut HashMap<String, u64>,
    ) -> crate::Result<bool> {
        fn term(f: &FunctionOracle, t: &Term, env: &HashMap<String, u64>) -> crate::Result<u64> {
            Ok(match t {
                Term::Var(v) => env[v],
                Term::One => 1,
                Term::Sum(a, b) => term(f, a, env)? + term(f, b, env)?,
                Term::FApp(a) => f.eval_times(term(f, a, env)?)?,
            })
        }
        match p {
            Formula::Eq(a, b) => Ok(term(f, a, env)? == term(f, b, env)?),
            Formula::And(a, b) => Ok(naive(f, a, env)? && naive(f, b, env)?),
            Formula::Or(a, b) => Ok(naive(f, a, env)? || naive(f, b, env)?),
            Formula::Exists { var, hint, body } => {
                let range: Vec<u64> = match hint {
                    WitnessHint::SearchTo(t) => (0..=term(f, t, env)?).collect(),
                    WitnessHint::FunctionalFInverse { target, slack } => {
                        // (finv(t - 1), finv(t + slack)], plus 0 when f is defined there
                        let t = term(f, target, env)?;
                        let hi = scan_inverse(f, t + slack)?;
                        let lo = if t == 0 {
                            f.n_start().max(1)
                        } else {
                            scan_inverse(f, t - 1)? + 1
                        };
                        let zero = (f.n_start() == 0 && lo > 0).then_some(0);
                        zero.into_iter().chain(lo..=hi).collect()
                    }
                    WitnessHint::Unbounded => panic!("unbounded"),
                };
                if range.len() > NAIVE_CAP {
                    return Err(Error::Domain("range too large for the reference".into()));
                }
                let saved = env.get(var).copied();
                let mut found = false;
                for x in range {
                    env.insert(var.clone(), x);
                    if naive(f, body, env)? {
                        found = true;
                        break;
                    }
                }
                match saved {
                    Some(v) => env.insert(var.clone(), v),
                    None => env.remove(var),
                };
                Ok(found)
            }
        }
    }

    /// Least `m` with `f(m+1) > n`, by plain scan.
    fn scan_inverse(f: &FunctionOracle, n: u64) -> crate::Result<u64> {
        let mut m = f.n_start().max(1) - 1;
        while f.eval(m + 1)? <= n {
            m += 1;
            if m > SEARCH_CAP {
                return Err(Error::SearchExhausted {
                    n,
                    limit: SEARCH_CAP,
                });
            }
        }
        Ok(m)
    }

    const NAIVE_CAP: usize = 64;
    const SEARCH_CAP: u64 = 4096;

    fn sqrt1() -> FunctionOracle {
        FunctionOracle::sqrt_like(1).unwrap()
    }

    fn x() -> Term {
        Term::var("x")
    }

    #[test]
    fn term_values() {
        let ev = Evaluator::new(&sqrt1());
        let a = Assignment::new().with("x", 8);
        assert_eq!(
            ev.eval_term(&Term::sum(Term::One, Term::One), &a).unwrap(),
            2
        );
        assert_eq!(ev.eval_term(&Term::f(x()), &a).unwrap(), 32);
        assert!(matches!(
            ev.eval_term(&Term::var("y"), &a),
            Err(EvalError::Unassigned(v)) if v == "y"
        ));
        let t = std::sync::Arc::new(crate::prime::sieve_upto(100).unwrap());
        let pq = Evaluator::new(&FunctionOracle::prime_quotient(t));
        assert_eq!(
            pq.eval_term(&Term::f(x()), &Assignment::new().with("x", 4))
                .unwrap(),
            8
        );
        let err = pq
            .eval_term(&Term::f(x()), &Assignment::new().with("x", 0))
            .unwrap_err();
        assert!(matches!(
            err,
            EvalError::Oracle {
                source: Error::OracleRange { arg: 0, .. },
                ..
            }
        ));
    }

    #[test]
    fn commutativity_instance() {
        let ev = Evaluator::new(&sqrt1());
        let phi = parse_formula("((x + 1) = (1 + x))").unwrap();
        for v in 0..50 {
            assert!(ev
                .eval_formula(&phi, &Assignment::new().with("x", v))
                .unwrap());
        }
    }

    #[test]
    fn unbounded_is_refused_with_path() {
        let ev = Evaluator::new(&sqrt1());
        let phi = parse_formula("exists v <= x . exists u . ((v + u) = x)").unwrap();
        let err = ev
            .eval_formula(&phi, &Assignment::new().with("x", 3))
            .unwrap_err();
        assert_eq!(
            err,
            EvalError::Unbounded {
                var: "u".into(),
                path: "exists v".into()
            }
        );
        assert!(err.to_string().contains("exists v"));
    }

    #[test]
    fn oracle_errors_carry_quantifier_path() {
        let f = FunctionOracle::table(0, vec![0, 1, 1, 2]).unwrap();
        let ev = Evaluator::new(&f);
        let phi = parse_formula("exists y <= (x + 1) . (F(y) = (x + x))").unwrap();
        let err = ev
            .eval_formula(&phi, &Assignment::new().with("x", 4))
            .unwrap_err();
        let EvalError::Oracle { path, .. } = &err else {
            panic!("{err}")
        };
        assert_eq!(path, "exists y");
    }

    #[test]
    fn witnesses_are_reported() {
        let ev = Evaluator::new(&sqrt1());
        let phi = parse_formula("exists u <= x . ((y + (u + 1)) = x)").unwrap();
        let a = Assignment::new().with("x", 10).with("y", 3);
        assert_eq!(
            ev.evaluate(&phi, &a).unwrap(),
            Some(vec![("u".to_string(), 6)])
        );
        let a = Assignment::new().with("x", 3).with("y", 3);
        assert_eq!(ev.evaluate(&phi, &a).unwrap(), None);
    }

    #[test]
    fn shadowing_resolves_to_innermost() {
        let ev = Evaluator::new(&sqrt1());
        let phi = parse_formula("exists x <= 1 . exists x <= ((1 + 1) + 1) . (x = ((1 + 1) + 1))")
            .unwrap();
        assert!(ev.eval_formula(&phi, &Assignment::new()).unwrap());
    }

    #[test]
    fn finv_bracket_matches_level_sets() {
        let f = sqrt1();
        let ev = Evaluator::new(&f);
        for target in 0..60u64 {
            let (lo, hi) = ev.bracket(target, 0).unwrap();
            let level: Vec<u64> = (0..5000)
                .filter(|x| f.eval(*x).unwrap() == target)
                .collect();
            let inside: Vec<u64> = (lo..=hi)
                .filter(|x| f.eval(*x).unwrap() == target)
                .collect();
            let mut want = level.clone();
            if target > 0 {
                assert_eq!(
                    want,
                    (lo..=hi).collect::<Vec<_>>(),
                    "monotone f: bracket is the level set"
                );
            } else {
                want.retain(|x| *x > 0);
            }
            assert_eq!(inside, want, "target {target}");
        }
    }

    #[test]
    fn finv_hint_finds_zero_argument() {
        let f = FunctionOracle::table(0, vec![5, 0, 1, 2, 3, 4, 6, 7, 8, 9]).unwrap();
        let ev = Evaluator::new(&f);
        let phi = parse_formula("exists x in finv(y, 0) . ((x + (1 + 1)) = (1 + 1))").unwrap();
        let w = ev
            .evaluate(&phi, &Assignment::new().with("y", 5))
            .unwrap()
            .unwrap();
        assert_eq!(w, vec![("x".to_string(), 0)]);
    }

    #[test]
    fn solutions_match_sweep() {
        let ev = Evaluator::new(&sqrt1());
        let phi = parse_formula(
            "exists x <= n . (((F(x) + y) = (x + ((n + n) + 1))) | ((y + (1 + 1)) = (n + x)))",
        )
        .unwrap();
        for n in 0..12u64 {
            let a = Assignment::new().with("n", n);
            let fast = ev.solutions(&phi, &a, "y", 200).unwrap();
            let slow: BTreeSet<u64> = (0..=200)
                .filter(|y| ev.eval_formula(&phi, &a.clone().with("y", *y)).unwrap())
                .collect();
            assert_eq!(fast, slow, "n={n}");
        }
    }

    #[test]
    fn solutions_fall_back_to_scan() {
        let ev = Evaluator::new(&sqrt1());
        let phi = parse_formula("(F(y) = ((((1 + 1) + 1) + 1) + (((1 + 1) + 1) + 1)))").unwrap();
        let got = ev.solutions(&phi, &Assignment::new(), "y", 100).unwrap();
        // y f(y) = 8: f(4) = 2
        assert_eq!(got, [4].into_iter().collect());
        let closed = parse_formula("(1 = 1)").unwrap();
        assert_eq!(
            ev.solutions(&closed, &Assignment::new(), "y", 3)
                .unwrap()
                .len(),
            4
        );
    }

    #[test]
    fn budget_is_enforced() {
        let ev = Evaluator::new(&sqrt1())
            .with_candidate_budget(10)
            .with_pruning(false);
        let phi = parse_formula("exists u <= x . (F(u) = x)").unwrap();
        let err = ev
            .eval_formula(&phi, &Assignment::new().with("x", 100))
            .unwrap_err();
        assert!(matches!(err, EvalError::Budget { size: 101, .. }));
    }

    #[test]
    fn memo_is_shared_across_calls() {
        let ev = Evaluator::new(&sqrt1());
        let phi = parse_formula("exists u <= (x + x) . exists v <= x . ((u + v) = F(x))").unwrap();
        let prog = ev.compile(&phi).unwrap();
        for x in 0..20 {
            let a = Assignment::new().with("x", x);
            assert_eq!(
                prog.eval_formula(&a).unwrap(),
                naive(&sqrt1(), &phi, &mut HashMap::from([("x".into(), x)])).unwrap()
            );
        }
        assert!(prog.memo_len() > 20);
    }

    // Random formulas over x, y with small bounded quantifiers.

    fn arb_term(vars: Vec<String>) -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            Just(Term::One),
            proptest::sample::select(vars).prop_map(Term::Var)
        ];
        leaf.prop_recursive(3, 8, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::sum(a, b)),
                inner.prop_map(Term::f),
            ]
        })
    }

    fn arb_formula(depth: u32, vars: Vec<String>) -> BoxedStrategy<Formula> {
        let eq =
            (arb_term(vars.clone()), arb_term(vars.clone())).prop_map(|(a, b)| Formula::eq(a, b));
        if depth == 0 {
            return eq.boxed();
        }
        let bound_name = format!("q{depth}");
        let mut inner_vars = vars.clone();
        inner_vars.push(bound_name.clone());
        prop_oneof![
            2 => eq,
            1 => (arb_formula(depth - 1, vars.clone()), arb_formula(depth - 1, vars.clone()))
                .prop_map(|(a, b)| Formula::and(a, b)),
            1 => (arb_formula(depth - 1, vars.clone()), arb_formula(depth - 1, vars.clone()))
                .prop_map(|(a, b)| Formula::or(a, b)),
            2 => (arb_term(vars.clone()), arb_formula(depth - 1, inner_vars), any::<bool>(), 0u64..3)
                .prop_map(move |(t, body, finv, slack)| {
                    let hint = if finv {
                        WitnessHint::FunctionalFInverse { target: t, slack }
                    } else {
                        WitnessHint::SearchTo(t)
                    };
                    Formula::exists(bound_name.clone(), hint, body)
                }),
        ]
        .boxed()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn hinted_matches_naive(
            phi in arb_formula(4, vec!["x".into(), "y".into()]),
            x in 0u64..6,
            y in 0u64..6,
            prune in any::<bool>(),
            memoize in any::<bool>(),
        ) {
            let f = sqrt1();
            let ev = Evaluator::new(&f)
                .with_pruning(prune)
                .with_memoization(memoize)
                .with_candidate_budget(NAIVE_CAP as u64)
                .with_search_limit(SEARCH_CAP);
            let a = Assignment::new().with("x", x).with("y", y);
            let mut env = HashMap::from([("x".to_string(), x), ("y".to_string(), y)]);
            // errors (e.g. overflow in huge F towers) are not compared
            if let Ok(want) = naive(&f, &phi, &mut env) {
                let got = ev.evaluate(&phi, &a).unwrap();
                prop_assert_eq!(got.is_some(), want, "{}", phi);
            }
        }

        #[test]
        fn substitution_lemma(
            phi in arb_formula(3, vec!["x".into(), "y".into()]),
            t in arb_term(vec!["y".into()]),
            y in 0u64..5,
        ) {
            let ev = Evaluator::new(&sqrt1()).with_candidate_budget(NAIVE_CAP as u64)
                .with_search_limit(SEARCH_CAP);
            let a = Assignment::new().with("y", y);
            if let Ok(tv) = ev.eval_term(&t, &a) {
                if tv <= 40 {
                    let lhs = ev.eval_formula(&phi.substitute("x", &t), &a);
                    let rhs = ev.eval_formula(&phi, &a.clone().with("x", tv));
                    if let (Ok(l), Ok(r)) = (lhs, rhs) {
                        prop_assert_eq!(l, r);
                    }
                }
            }
        }

        #[test]
        fn solutions_agree_with_scan(
            phi in arb_formula(3, vec!["x".into(), "y".into()]),
            x in 0u64..6,
        ) {
            let ev = Evaluator::new(&sqrt1()).with_candidate_budget(NAIVE_CAP as u64)
                .with_search_limit(SEARCH_CAP);
            let a = Assignment::new().with("x", x);
            if let Ok(fast) = ev.solutions(&phi, &a, "y", 30) {
                let mut slow = BTreeSet::new();
                for y in 0..=30 {
                    match ev.eval_formula(&phi, &a.clone().with("y", y)) {
                        Ok(true) => { slow.insert(y); }
                        Ok(false) => {}
                        Err(_) => return Ok(()),
                    }
                }
                prop_assert_eq!(fast, slow, "{}", phi);
            }
        }
    }
}
