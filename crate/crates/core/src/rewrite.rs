//! Clause simplification: conditional rewriting, case splitting on `IF`,
//! explicit expansion and definition normalization.
//!
//! `HIDE` is opaque everywhere in this module: the rewriter returns
//! `(HIDE x)` untouched and `split_ifs` never looks inside it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::sexpr::SExpr;
use crate::term::{apply_builtin, beta_reduce, substitute, unparse, Term};
use crate::world::{Definition, Equiv, Theory, World};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewriteError {
    #[error("rewriter fuel exhausted")]
    FuelExhausted,
    #[error("cannot expand {0}: it has no definition")]
    NoDefinition(String),
}

/// A disjunction of literals. A hypothesis `h` appears as `(NOT h)`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Clause {
    pub literals: Vec<Term>,
}

impl Clause {
    pub fn new(literals: Vec<Term>) -> Clause {
        Clause { literals }
    }

    pub fn to_sexpr(&self) -> SExpr {
        SExpr::list(self.literals.iter().map(unparse).collect::<Vec<_>>())
    }

    /// Some literal is a non-NIL constant, or some literal occurs together
    /// with its negation.
    pub fn is_proved(&self) -> bool {
        self.literals.iter().any(Term::is_true_const)
            || self.literals.iter().any(|l| {
                l.negated()
                    .is_some_and(|inner| self.literals.iter().any(|m| m == inner))
            })
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr().print(true))
    }
}

/// `(NOT a)`, or `b` when `a` is `(NOT b)`.
pub fn negate(a: &Term) -> Term {
    match a.negated() {
        Some(b) => b.clone(),
        None => Term::not(a.clone()),
    }
}

/// Terms known true or false, matched syntactically.
#[derive(Debug, Clone, Default)]
pub struct Assumptions {
    known_true: BTreeSet<Term>,
    known_false: BTreeSet<Term>,
}

impl Assumptions {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `t` as having truth value `value`.
    pub fn assume(&mut self, t: &Term, value: bool) {
        match t.negated() {
            Some(inner) => self.assume(inner, !value),
            None if value => {
                self.known_true.insert(t.clone());
            }
            None => {
                self.known_false.insert(t.clone());
            }
        }
    }

    /// The assumptions available when rewriting one literal of a clause:
    /// every other literal is assumed false.
    pub fn from_other_literals(lits: &[Term], skip: usize) -> Self {
        let mut a = Self::new();
        for (j, l) in lits.iter().enumerate() {
            if j != skip {
                a.assume(l, false);
            }
        }
        a
    }

    fn decide(&self, t: &Term) -> Option<bool> {
        if self.known_true.contains(t) {
            Some(true)
        } else if self.known_false.contains(t) {
            Some(false)
        } else {
            None
        }
    }

    fn with(&self, t: &Term, value: bool) -> Self {
        let mut a = self.clone();
        a.assume(t, value);
        a
    }
}

fn bool_const(b: bool) -> Term {
    if b {
        Term::t()
    } else {
        Term::nil()
    }
}

/// One-way matching of `pattern` against `t`, extending `s`.
pub fn one_way_match(pattern: &Term, t: &Term, s: &mut BTreeMap<String, Term>) -> bool {
    match (pattern, t) {
        (Term::Var(v), _) => match s.get(v) {
            Some(bound) => bound == t,
            None => {
                s.insert(v.clone(), t.clone());
                true
            }
        },
        (Term::Const(a), Term::Const(b)) => a == b,
        (Term::App(f, ps), Term::App(g, ts)) => {
            f == g && ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, t)| one_way_match(p, t, s))
        }
        _ => false,
    }
}

pub struct Rewriter<'a> {
    world: &'a World,
    theory: &'a Theory,
    fuel: u64,
}

impl<'a> Rewriter<'a> {
    pub fn new(world: &'a World, theory: &'a Theory, fuel: u64) -> Self {
        Rewriter {
            world,
            theory,
            fuel,
        }
    }

    pub fn remaining_fuel(&self) -> u64 {
        self.fuel
    }

    /// Rewrites `t`; `prop` means only its truth value matters.
    pub fn rewrite(&mut self, t: &Term, asm: &Assumptions, prop: bool) -> Result<Term, RewriteError> {
        if self.fuel == 0 {
            return Err(RewriteError::FuelExhausted);
        }
        self.fuel -= 1;
        match t {
            Term::Lambda { .. } => self.rewrite(&beta_reduce(t), asm, prop),
            Term::Const(_) => Ok(t.clone()),
            Term::Var(_) => Ok(match (prop, asm.decide(t)) {
                (true, Some(b)) => bool_const(b),
                _ => t.clone(),
            }),
            Term::App(f, _) if f == "HIDE" => Ok(t.clone()),
            Term::App(f, args) if f == "IF" => self.rewrite_if(&args[0], &args[1], &args[2], asm, prop),
            Term::App(f, args) if f == "IMPLIES" => {
                let expanded = Term::if_(
                    args[0].clone(),
                    Term::if_(args[1].clone(), Term::t(), Term::nil()),
                    Term::t(),
                );
                self.rewrite(&expanded, asm, prop)
            }
            Term::App(f, args) => {
                let arg_prop = f == "NOT";
                let args = args
                    .iter()
                    .map(|a| self.rewrite(a, asm, arg_prop))
                    .collect::<Result<Vec<_>, _>>()?;
                self.rewrite_call(f, args, asm, prop)
            }
        }
    }

    fn rewrite_if(
        &mut self,
        test: &Term,
        then: &Term,
        els: &Term,
        asm: &Assumptions,
        prop: bool,
    ) -> Result<Term, RewriteError> {
        let test = self.rewrite(test, asm, true)?;
        if let Term::Const(v) = &test {
            let branch = if v.is_nil() { els } else { then };
            return self.rewrite(branch, asm, prop);
        }
        let then = self.rewrite(then, &asm.with(&test, true), prop)?;
        let els = self.rewrite(els, &asm.with(&test, false), prop)?;
        if then == els {
            return Ok(then);
        }
        if prop && then.is_true_const() && els.is_nil() {
            return Ok(test);
        }
        Ok(Term::if_(test, then, els))
    }

    fn rewrite_call(
        &mut self,
        f: &str,
        args: Vec<Term>,
        asm: &Assumptions,
        prop: bool,
    ) -> Result<Term, RewriteError> {
        if prop && f == "NOT" {
            if let Some(x) = args[0].negated() {
                return Ok(x.clone());
            }
        }
        if let Some(t) = builtin_simplify(f, &args) {
            return Ok(t);
        }
        let term = Term::App(f.to_string(), args);
        for rule in self.world.rules() {
            if !self.theory.is_enabled(&rule.name) || (rule.equiv == Equiv::Iff && !prop) {
                continue;
            }
            let mut s = BTreeMap::new();
            if !one_way_match(&rule.lhs, &term, &mut s) {
                continue;
            }
            if self.relieve_hyps(&rule.hyps, &s, asm)? {
                let rhs = substitute(&rule.rhs, &s);
                return self.rewrite(&rhs, asm, prop);
            }
        }
        if let Some(def) = self.world.definition(f) {
            if !def.recursive && self.theory.is_enabled(f) {
                let Term::App(_, args) = &term else { unreachable!() };
                let s = def.formals.iter().cloned().zip(args.iter().cloned()).collect();
                let body = substitute(&beta_reduce(&def.body), &s);
                return self.rewrite(&body, asm, prop);
            }
        }
        if prop {
            if let Some(b) = asm.decide(&term) {
                return Ok(bool_const(b));
            }
        }
        Ok(term)
    }

    fn relieve_hyps(
        &mut self,
        hyps: &[Term],
        s: &BTreeMap<String, Term>,
        asm: &Assumptions,
    ) -> Result<bool, RewriteError> {
        for h in hyps {
            if !self.rewrite(&substitute(h, s), asm, true)?.is_true_const() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Built-in evaluation on constants and a few structural identities.
fn builtin_simplify(f: &str, args: &[Term]) -> Option<Term> {
    if args.iter().all(Term::is_const) {
        let vals: Vec<SExpr> = args
            .iter()
            .map(|a| match a {
                Term::Const(v) => v.clone(),
                _ => unreachable!(),
            })
            .collect();
        if let Some(v) = apply_builtin(f, &vals) {
            return Some(Term::Const(v));
        }
    }
    match (f, args) {
        ("EQUAL", [a, b]) if a == b => Some(Term::t()),
        ("CAR", [Term::App(g, xs)]) if g == "CONS" => Some(xs[0].clone()),
        ("CDR", [Term::App(g, xs)]) if g == "CONS" => Some(xs[1].clone()),
        ("CONSP", [Term::App(g, _)]) if g == "CONS" => Some(Term::t()),
        ("ATOM", [Term::App(g, _)]) if g == "CONS" => Some(Term::nil()),
        ("NOT", [inner]) if inner.negated().is_some() => {
            let x = inner.negated().unwrap().clone();
            Some(Term::if_(x, Term::t(), Term::nil()))
        }
        _ => None,
    }
}

/// Rewrites a term under a theory and assumptions.
pub fn rewrite_term(
    t: &Term,
    theory: &Theory,
    assumptions: &Assumptions,
    world: &World,
    fuel: u64,
) -> Result<Term, RewriteError> {
    Rewriter::new(world, theory, fuel).rewrite(t, assumptions, false)
}

/// Finds the leftmost-innermost `IF` with a non-constant test outside
/// `HIDE`.
pub fn find_split(t: &Term) -> Option<&Term> {
    match t {
        Term::App(f, _) if f == "HIDE" => None,
        Term::App(f, args) => {
            if let Some(found) = args.iter().find_map(find_split) {
                return Some(found);
            }
            if f == "IF" && !args[0].is_const() {
                Some(t)
            } else {
                None
            }
        }
        Term::Lambda { actuals, body, .. } => {
            actuals.iter().find_map(find_split).or_else(|| find_split(body))
        }
        _ => None,
    }
}

/// Replaces occurrences of `from` outside `HIDE`.
pub fn replace_outside_hide(t: &Term, from: &Term, to: &Term) -> Term {
    if t == from {
        return to.clone();
    }
    match t {
        Term::App(f, _) if f == "HIDE" => t.clone(),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| replace_outside_hide(a, from, to)).collect(),
        ),
        _ => t.clone(),
    }
}

/// The result of a split: the test and the two clauses.
pub fn split_clause(c: &Clause) -> Option<(Term, Clause, Clause)> {
    let (idx, if_term) = c
        .literals
        .iter()
        .enumerate()
        .find_map(|(i, l)| find_split(l).map(|t| (i, t.clone())))?;
    let Term::App(_, parts) = &if_term else { unreachable!() };
    let (test, then, els) = (&parts[0], &parts[1], &parts[2]);
    let mut then_lits = c.literals.clone();
    then_lits[idx] = replace_outside_hide(&c.literals[idx], &if_term, then);
    then_lits.push(negate(test));
    let mut else_lits = c.literals.clone();
    else_lits[idx] = replace_outside_hide(&c.literals[idx], &if_term, els);
    else_lits.push(test.clone());
    Some((test.clone(), Clause::new(then_lits), Clause::new(else_lits)))
}

/// Case split on the first splittable `IF`; `[c]` when there is none.
pub fn split_ifs(c: &Clause) -> Vec<Clause> {
    match split_clause(c) {
        Some((_, a, b)) => vec![a, b],
        None => vec![c.clone()],
    }
}

/// The outcome of one simplification pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simplified {
    pub clauses: Vec<Clause>,
    pub changed: bool,
    /// The literal-level result before splitting.
    pub rewritten: Clause,
    /// The test of the `IF` split on, if any.
    pub split_on: Option<Term>,
}

pub fn simplify_clause_detailed(
    c: &Clause,
    theory: &Theory,
    world: &World,
    fuel: u64,
) -> Result<Simplified, RewriteError> {
    let mut rw = Rewriter::new(world, theory, fuel);
    let mut lits: Vec<Term> = c.literals.iter().map(beta_reduce).collect();
    let mut changed = lits != c.literals;
    for i in 0..lits.len() {
        let asm = Assumptions::from_other_literals(&lits, i);
        let new = rw.rewrite(&lits[i], &asm, true)?;
        if new != lits[i] {
            changed = true;
            lits[i] = new;
        }
    }
    let mut kept: Vec<Term> = Vec::with_capacity(lits.len());
    for l in lits {
        if l.is_nil() || kept.contains(&l) {
            changed = true;
        } else {
            kept.push(l);
        }
    }
    let rewritten = Clause::new(kept);
    if rewritten.is_proved() {
        return Ok(Simplified {
            clauses: vec![],
            changed: true,
            rewritten,
            split_on: None,
        });
    }
    match split_clause(&rewritten) {
        Some((test, a, b)) => Ok(Simplified {
            clauses: vec![a, b],
            changed: true,
            rewritten,
            split_on: Some(test),
        }),
        None => Ok(Simplified {
            clauses: vec![rewritten.clone()],
            changed,
            rewritten,
            split_on: None,
        }),
    }
}

/// One simplification pass. A proved clause yields no clauses.
pub fn simplify_clause(
    c: &Clause,
    theory: &Theory,
    world: &World,
    fuel: u64,
) -> Result<(Vec<Clause>, bool), RewriteError> {
    let s = simplify_clause_detailed(c, theory, world, fuel)?;
    Ok((s.clauses, s.changed))
}

/// Unfolds every occurrence of each target, regardless of the theory.
pub fn expand_calls(c: &Clause, targets: &[Term], world: &World) -> Result<Clause, RewriteError> {
    let mut lits = c.literals.clone();
    for target in targets {
        let replacement = match target {
            Term::App(f, args) if f == "HIDE" && args.len() == 1 => args[0].clone(),
            Term::App(f, args) => {
                let def = world
                    .definition(f)
                    .ok_or_else(|| RewriteError::NoDefinition(f.clone()))?;
                let s = def.formals.iter().cloned().zip(args.iter().cloned()).collect();
                beta_reduce(&substitute(&def.body, &s))
            }
            other => return Err(RewriteError::NoDefinition(other.to_string())),
        };
        let inside_hide = target.call_of("HIDE").is_some();
        lits = lits
            .iter()
            .map(|l| replace_term(l, target, &replacement, inside_hide))
            .collect();
    }
    Ok(Clause::new(lits))
}

fn replace_term(t: &Term, from: &Term, to: &Term, enter_hide: bool) -> Term {
    if t == from {
        return to.clone();
    }
    match t {
        Term::App(f, _) if f == "HIDE" && !enter_hide => t.clone(),
        Term::App(f, args) => Term::App(
            f.clone(),
            args.iter().map(|a| replace_term(a, from, to, enter_hide)).collect(),
        ),
        _ => t.clone(),
    }
}

/// Pulls `IF` out of argument positions (including `HIDE` and `IF` tests)
/// when the definition asks for normalization.
pub fn normalize_definition(d: &Definition) -> Definition {
    if !d.normalized {
        return d.clone();
    }
    Definition {
        body: normalize_term(&beta_reduce(&d.body)),
        ..d.clone()
    }
}

pub fn normalize_term(t: &Term) -> Term {
    match t {
        Term::App(f, args) if f == "IF" => {
            let test = normalize_term(&args[0]);
            let then = normalize_term(&args[1]);
            let els = normalize_term(&args[2]);
            if let Some([p, q, r]) = test.call_of("IF").map(|a| <&[Term; 3]>::try_from(a).unwrap()) {
                return normalize_term(&Term::if_(
                    p.clone(),
                    Term::if_(q.clone(), then.clone(), els.clone()),
                    Term::if_(r.clone(), then, els),
                ));
            }
            Term::if_(test, then, els)
        }
        Term::App(f, args) => {
            let args: Vec<Term> = args.iter().map(normalize_term).collect();
            if let Some(i) = args.iter().position(|a| a.call_of("IF").is_some()) {
                let parts = args[i].call_of("IF").unwrap();
                let mut then_args = args.clone();
                then_args[i] = parts[1].clone();
                let mut else_args = args.clone();
                else_args[i] = parts[2].clone();
                return normalize_term(&Term::if_(
                    parts[0].clone(),
                    Term::App(f.clone(), then_args),
                    Term::App(f.clone(), else_args),
                ));
            }
            Term::App(f.clone(), args)
        }
        _ => t.clone(),
    }
}

/// True if some `IF` occurs as an argument of a call or as an `IF` test.
pub fn has_if_in_argument_position(t: &Term) -> bool {
    match t {
        Term::App(f, args) if f == "IF" => {
            args[0].call_of("IF").is_some() || args.iter().any(has_if_in_argument_position)
        }
        Term::App(_, args) => args
            .iter()
            .any(|a| a.call_of("IF").is_some() || has_if_in_argument_position(a)),
        Term::Lambda { body, actuals, .. } => {
            has_if_in_argument_position(body) || actuals.iter().any(has_if_in_argument_position)
        }
        _ => false,
    }
}
