//! Internal terms: translation from surface syntax, substitution, beta
//! reduction and a ground evaluator.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::sexpr::{SExpr, QUASIQUOTE, QUOTE, UNQUOTE, UNQUOTE_SPLICING};
use crate::world::{FunctionKind, World};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(SExpr),
    App(String, Vec<Term>),
    /// `((LAMBDA formals body) . actuals)`
    Lambda {
        formals: Vec<String>,
        body: Box<Term>,
        actuals: Vec<Term>,
    },
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn app(f: &str, args: Vec<Term>) -> Term {
        Term::App(f.to_string(), args)
    }

    pub fn nil() -> Term {
        Term::Const(SExpr::Nil)
    }

    pub fn t() -> Term {
        Term::Const(SExpr::t())
    }

    pub fn quoted_sym(name: &str) -> Term {
        Term::Const(SExpr::sym(name))
    }

    pub fn not(t: Term) -> Term {
        Term::app("NOT", vec![t])
    }

    pub fn if_(a: Term, b: Term, c: Term) -> Term {
        Term::app("IF", vec![a, b, c])
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, Term::Const(SExpr::Nil))
    }

    /// A non-NIL constant.
    pub fn is_true_const(&self) -> bool {
        matches!(self, Term::Const(v) if !v.is_nil())
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }

    /// The argument of `(NOT x)`.
    pub fn negated(&self) -> Option<&Term> {
        match self {
            Term::App(f, args) if f == "NOT" && args.len() == 1 => Some(&args[0]),
            _ => None,
        }
    }

    /// If this is a call of `f`, its arguments.
    pub fn call_of(&self, f: &str) -> Option<&[Term]> {
        match self {
            Term::App(g, args) if g == f => Some(args),
            _ => None,
        }
    }

    /// Free variables in first-occurrence order.
    pub fn free_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_free(&mut out, &BTreeSet::new());
        out
    }

    fn collect_free(&self, out: &mut Vec<String>, bound: &BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                if !bound.contains(v) && !out.contains(v) {
                    out.push(v.clone());
                }
            }
            Term::Const(_) => {}
            Term::App(_, args) => args.iter().for_each(|a| a.collect_free(out, bound)),
            Term::Lambda {
                formals,
                body,
                actuals,
            } => {
                actuals.iter().for_each(|a| a.collect_free(out, bound));
                let mut inner = bound.clone();
                inner.extend(formals.iter().cloned());
                body.collect_free(out, &inner);
            }
        }
    }

    pub fn contains_lambda(&self) -> bool {
        match self {
            Term::Lambda { .. } => true,
            Term::App(_, args) => args.iter().any(Term::contains_lambda),
            _ => false,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) | Term::Const(_) => 1,
            Term::App(_, args) => 1 + args.iter().map(Term::size).sum::<usize>(),
            Term::Lambda { body, actuals, .. } => {
                1 + body.size() + actuals.iter().map(Term::size).sum::<usize>()
            }
        }
    }
}

/// Renders a term as surface syntax. Self-evaluating constants print bare,
/// other constants as `(QUOTE v)`.
pub fn unparse(t: &Term) -> SExpr {
    match t {
        Term::Var(v) => SExpr::sym(v),
        Term::Const(v) => match v {
            SExpr::Nil | SExpr::Keyword(_) | SExpr::Integer(_) | SExpr::Str(_) => v.clone(),
            SExpr::Symbol(s) if s == "T" => v.clone(),
            _ => SExpr::quote(v.clone()),
        },
        Term::App(f, args) => SExpr::list(
            std::iter::once(SExpr::sym(f))
                .chain(args.iter().map(unparse))
                .collect::<Vec<_>>(),
        ),
        Term::Lambda {
            formals,
            body,
            actuals,
        } => {
            let lambda = SExpr::list([
                SExpr::sym("LAMBDA"),
                SExpr::list(formals.iter().map(|f| SExpr::sym(f)).collect::<Vec<_>>()),
                unparse(body),
            ]);
            SExpr::list(
                std::iter::once(lambda)
                    .chain(actuals.iter().map(unparse))
                    .collect::<Vec<_>>(),
            )
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", unparse(self))
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", unparse(self).print(true))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("unknown function symbol {0}")]
    UnknownFunction(String),
    #[error("{name} expects {expected} arguments, got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("nested quasiquote is not supported: {0}")]
    NestedQuasiquote(String),
    #[error(",@ in a non-list position: {0}")]
    SpliceOutsideList(String),
    #[error("unquote outside of a quasiquote: {0}")]
    UnquoteOutsideQuasiquote(String),
    #[error("unsupported B* binder: {0}")]
    UnsupportedBinder(String),
    #[error("malformed {form}: {detail}")]
    Malformed { form: String, detail: String },
}

fn malformed(form: &SExpr, detail: &str) -> TranslateError {
    TranslateError::Malformed {
        form: form.to_string(),
        detail: detail.to_string(),
    }
}

/// Expands the body of a depth-one quasiquote into `CONS`,
/// `BINARY-APPEND` and `QUOTE` forms.
pub fn expand_quasiquote(form: &SExpr) -> Result<SExpr, TranslateError> {
    qq(form)
}

fn qq(x: &SExpr) -> Result<SExpr, TranslateError> {
    if let Some((mark, inner)) = x.as_mark() {
        match mark {
            UNQUOTE => return Ok(inner.clone()),
            QUASIQUOTE => return Err(TranslateError::NestedQuasiquote(x.to_string())),
            // Element positions are handled by the pair case below.
            UNQUOTE_SPLICING => return Err(TranslateError::SpliceOutsideList(x.to_string())),
            _ => {}
        }
    }
    match x {
        SExpr::Pair(a, rest) => {
            if let Some((UNQUOTE_SPLICING, spliced)) = a.as_mark() {
                Ok(SExpr::list([
                    SExpr::sym("BINARY-APPEND"),
                    spliced.clone(),
                    qq(rest)?,
                ]))
            } else {
                Ok(SExpr::list([SExpr::sym("CONS"), qq(a)?, qq(rest)?]))
            }
        }
        atom => Ok(SExpr::quote(atom.clone())),
    }
}

/// Translates a logic term (theorem bodies, definition bodies, hint terms).
pub fn translate(form: &SExpr, world: &World) -> Result<Term, TranslateError> {
    Translator {
        world,
        hint_fns: false,
    }
    .tr(form)
}

/// Translates a computed-hint expression; registered hint functions are
/// callable in addition to the logic's functions.
pub fn translate_hint_expr(form: &SExpr, world: &World) -> Result<Term, TranslateError> {
    Translator {
        world,
        hint_fns: true,
    }
    .tr(form)
}

struct Translator<'w> {
    world: &'w World,
    hint_fns: bool,
}

impl Translator<'_> {
    fn tr(&self, form: &SExpr) -> Result<Term, TranslateError> {
        match form {
            SExpr::Nil | SExpr::Keyword(_) | SExpr::Integer(_) | SExpr::Str(_) => {
                Ok(Term::Const(form.clone()))
            }
            SExpr::Symbol(s) if s == "T" => Ok(Term::Const(form.clone())),
            SExpr::Symbol(s) => Ok(Term::Var(s.clone())),
            SExpr::Pair(head, _) => {
                let parts = form
                    .to_vec()
                    .ok_or_else(|| malformed(form, "dotted list in term position"))?;
                let args = &parts[1..];
                match &**head {
                    SExpr::Symbol(h) => self.tr_call(form, h, args),
                    SExpr::Pair(..) if head.car().is_some_and(|c| c.is_symbol("LAMBDA")) => {
                        self.tr_lambda(form, head, args)
                    }
                    _ => Err(malformed(form, "head is not a function symbol")),
                }
            }
        }
    }

    fn tr_all(&self, forms: &[SExpr]) -> Result<Vec<Term>, TranslateError> {
        forms.iter().map(|f| self.tr(f)).collect()
    }

    fn tr_call(&self, form: &SExpr, head: &str, args: &[SExpr]) -> Result<Term, TranslateError> {
        match head {
            QUOTE => match args {
                [x] => Ok(Term::Const(x.clone())),
                _ => Err(malformed(form, "QUOTE takes one argument")),
            },
            QUASIQUOTE => match args {
                [x] => self.tr(&expand_quasiquote(x)?),
                _ => Err(malformed(form, "QUASIQUOTE takes one argument")),
            },
            UNQUOTE | UNQUOTE_SPLICING => {
                Err(TranslateError::UnquoteOutsideQuasiquote(form.to_string()))
            }
            "LET" => self.tr_let(form, args),
            "LET*" => self.tr_let_star(form, args),
            "B*" => self.tr(&expand_bstar(form, args)?),
            "AND" => Ok(match args {
                [] => Term::t(),
                [a] => self.tr(a)?,
                [a, rest @ ..] => {
                    let rest = SExpr::list(
                        std::iter::once(SExpr::sym("AND"))
                            .chain(rest.iter().cloned())
                            .collect::<Vec<_>>(),
                    );
                    Term::if_(self.tr(a)?, self.tr(&rest)?, Term::nil())
                }
            }),
            "OR" => Ok(match args {
                [] => Term::nil(),
                [a] => self.tr(a)?,
                [a, rest @ ..] => {
                    let rest = SExpr::list(
                        std::iter::once(SExpr::sym("OR"))
                            .chain(rest.iter().cloned())
                            .collect::<Vec<_>>(),
                    );
                    let a = self.tr(a)?;
                    Term::if_(a.clone(), a, self.tr(&rest)?)
                }
            }),
            "COND" => self.tr_cond(form, args),
            "LIST" => {
                let mut acc = Term::nil();
                for a in args.iter().rev() {
                    acc = Term::app("CONS", vec![self.tr(a)?, acc]);
                }
                Ok(acc)
            }
            "APPEND" => match args {
                [] => Ok(Term::nil()),
                _ => {
                    let mut terms = self.tr_all(args)?;
                    let mut acc = terms.pop().unwrap();
                    while let Some(t) = terms.pop() {
                        acc = Term::app("BINARY-APPEND", vec![t, acc]);
                    }
                    Ok(acc)
                }
            },
            crate::termhint::TERMHINT_SEQ => match args {
                [h1, h2] => {
                    let h2 = self.tr(h2)?;
                    let h2 = if h2.call_of("HIDE").is_some() {
                        h2
                    } else {
                        Term::app("HIDE", vec![h2])
                    };
                    Ok(Term::app(crate::termhint::TERMHINT_SEQ, vec![self.tr(h1)?, h2]))
                }
                _ => Err(TranslateError::Arity {
                    name: head.to_string(),
                    expected: 2,
                    got: args.len(),
                }),
            },
            _ => {
                let arity = self
                    .world
                    .arity(head)
                    .or_else(|| {
                        self.hint_fns
                            .then(|| self.world.hint_fn(head).map(|f| f.arity()))
                            .flatten()
                    })
                    .ok_or_else(|| TranslateError::UnknownFunction(head.to_string()))?;
                if arity != args.len() {
                    return Err(TranslateError::Arity {
                        name: head.to_string(),
                        expected: arity,
                        got: args.len(),
                    });
                }
                Ok(Term::App(head.to_string(), self.tr_all(args)?))
            }
        }
    }

    fn tr_lambda(&self, form: &SExpr, lambda: &SExpr, args: &[SExpr]) -> Result<Term, TranslateError> {
        let parts = lambda
            .to_vec()
            .filter(|p| p.len() == 3)
            .ok_or_else(|| malformed(form, "LAMBDA needs formals and a body"))?;
        let formals = symbol_list(&parts[1]).ok_or_else(|| malformed(form, "bad formals"))?;
        if formals.len() != args.len() {
            return Err(TranslateError::Arity {
                name: "LAMBDA".into(),
                expected: formals.len(),
                got: args.len(),
            });
        }
        Ok(closed_lambda(formals, self.tr(&parts[2])?, self.tr_all(args)?))
    }

    fn tr_let(&self, form: &SExpr, args: &[SExpr]) -> Result<Term, TranslateError> {
        let (bindings, body) = split_let(form, args)?;
        let mut formals = Vec::new();
        let mut actuals = Vec::new();
        for (v, e) in bindings {
            formals.push(v);
            actuals.push(self.tr(&e)?);
        }
        Ok(closed_lambda(formals, self.tr(&body)?, actuals))
    }

    fn tr_let_star(&self, form: &SExpr, args: &[SExpr]) -> Result<Term, TranslateError> {
        let (bindings, body) = split_let(form, args)?;
        let mut term = self.tr(&body)?;
        for (v, e) in bindings.into_iter().rev() {
            term = closed_lambda(vec![v], term, vec![self.tr(&e)?]);
        }
        Ok(term)
    }

    fn tr_cond(&self, form: &SExpr, clauses: &[SExpr]) -> Result<Term, TranslateError> {
        let Some((first, rest)) = clauses.split_first() else {
            return Ok(Term::nil());
        };
        let parts = first
            .to_vec()
            .filter(|p| !p.is_empty())
            .ok_or_else(|| malformed(form, "COND clause must be a non-empty list"))?;
        let test = self.tr(&parts[0])?;
        let rest = self.tr_cond(form, rest)?;
        if parts.len() == 1 {
            return Ok(Term::if_(test.clone(), test, rest));
        }
        let result = self.tr(parts.last().unwrap())?;
        if test.is_true_const() {
            return Ok(result);
        }
        Ok(Term::if_(test, result, rest))
    }
}

fn symbol_list(e: &SExpr) -> Option<Vec<String>> {
    e.to_vec()?
        .iter()
        .map(|x| match x {
            SExpr::Symbol(s) if s != "T" => Some(s.clone()),
            _ => None,
        })
        .collect()
}

type Bindings = Vec<(String, SExpr)>;

fn split_let(form: &SExpr, args: &[SExpr]) -> Result<(Bindings, SExpr), TranslateError> {
    let (bindings, body) = match args {
        [b, body @ ..] if !body.is_empty() => (b, body.last().unwrap()),
        _ => return Err(malformed(form, "expected bindings and a body")),
    };
    let bindings = bindings
        .to_vec()
        .ok_or_else(|| malformed(form, "bindings must be a list"))?
        .iter()
        .map(|b| match b.to_vec().as_deref() {
            Some([SExpr::Symbol(v), e]) if v != "T" => Ok((v.clone(), e.clone())),
            _ => Err(malformed(form, "binding must be (var expr)")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((bindings, body.clone()))
}

/// Builds a lambda application whose body has no free variables besides its
/// formals: extra free variables become pass-through formals.
pub fn closed_lambda(mut formals: Vec<String>, body: Term, mut actuals: Vec<Term>) -> Term {
    for v in body.free_vars() {
        if !formals.contains(&v) {
            actuals.push(Term::Var(v.clone()));
            formals.push(v);
        }
    }
    Term::Lambda {
        formals,
        body: Box::new(body),
        actuals,
    }
}

/// `(B* binders body...)` with `(var expr)`, `((WHEN test) result...)` and
/// `((UNLESS test) result...)` binders.
fn expand_bstar(form: &SExpr, args: &[SExpr]) -> Result<SExpr, TranslateError> {
    let (binders, body) = match args {
        [b, body @ ..] if !body.is_empty() => (b, body.last().unwrap().clone()),
        _ => return Err(malformed(form, "expected binders and a body")),
    };
    let binders = binders
        .to_vec()
        .ok_or_else(|| malformed(form, "binders must be a list"))?;
    let mut acc = body;
    for b in binders.iter().rev() {
        let parts = b
            .to_vec()
            .filter(|p| p.len() >= 2)
            .ok_or_else(|| TranslateError::UnsupportedBinder(b.to_string()))?;
        let result = parts.last().unwrap().clone();
        match &parts[0] {
            SExpr::Symbol(v) if parts.len() == 2 => {
                acc = SExpr::list([
                    SExpr::sym("LET"),
                    SExpr::list([SExpr::list([SExpr::sym(v), parts[1].clone()])]),
                    acc,
                ]);
            }
            head => match head.to_vec().as_deref() {
                Some([kind, test]) if kind.is_symbol("WHEN") => {
                    acc = SExpr::list([SExpr::sym("IF"), test.clone(), result, acc]);
                }
                Some([kind, test]) if kind.is_symbol("UNLESS") => {
                    acc = SExpr::list([SExpr::sym("IF"), test.clone(), acc, result]);
                }
                _ => return Err(TranslateError::UnsupportedBinder(b.to_string())),
            },
        }
    }
    Ok(acc)
}

/// Capture-avoiding substitution of free variables.
pub fn substitute(t: &Term, s: &BTreeMap<String, Term>) -> Term {
    if s.is_empty() {
        return t.clone();
    }
    match t {
        Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| t.clone()),
        Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(|a| substitute(a, s)).collect()),
        Term::Lambda {
            formals,
            body,
            actuals,
        } => {
            let actuals = actuals.iter().map(|a| substitute(a, s)).collect();
            let mut inner: BTreeMap<String, Term> = s
                .iter()
                .filter(|(k, _)| !formals.contains(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if inner.is_empty() {
                return Term::Lambda {
                    formals: formals.clone(),
                    body: body.clone(),
                    actuals,
                };
            }
            // Rename formals that would capture a free variable of a replacement.
            let body_free = body.free_vars();
            let incoming: BTreeSet<String> = inner
                .iter()
                .filter(|(k, _)| body_free.contains(k))
                .flat_map(|(_, v)| v.free_vars())
                .collect();
            let mut new_formals = Vec::with_capacity(formals.len());
            for f in formals {
                if incoming.contains(f) {
                    let fresh = fresh_name(f, &incoming, &body_free, formals);
                    inner.insert(f.clone(), Term::Var(fresh.clone()));
                    new_formals.push(fresh);
                } else {
                    new_formals.push(f.clone());
                }
            }
            Term::Lambda {
                formals: new_formals,
                body: Box::new(substitute(body, &inner)),
                actuals,
            }
        }
    }
}

fn fresh_name(base: &str, a: &BTreeSet<String>, b: &[String], c: &[String]) -> String {
    (1..)
        .map(|i| format!("{base}-{i}"))
        .find(|n| !a.contains(n) && !b.contains(n) && !c.contains(n))
        .unwrap()
}

/// Replaces every lambda application by its instantiated body.
pub fn beta_reduce(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Const(_) => t.clone(),
        Term::App(f, args) => Term::App(f.clone(), args.iter().map(beta_reduce).collect()),
        Term::Lambda {
            formals,
            body,
            actuals,
        } => {
            let s: BTreeMap<String, Term> = formals
                .iter()
                .cloned()
                .zip(actuals.iter().map(beta_reduce))
                .collect();
            substitute(&beta_reduce(body), &s)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("evaluation fuel exhausted")]
    FuelExhausted,
    #[error("{0} is a stub and has no evaluation rule")]
    Stub(String),
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
}

fn truth(b: bool) -> SExpr {
    if b {
        SExpr::t()
    } else {
        SExpr::Nil
    }
}

/// Applies a built-in to evaluated arguments. `IF` and `HIDE` are not
/// handled here; `None` means `f` is not an evaluable built-in.
pub fn apply_builtin(f: &str, args: &[SExpr]) -> Option<SExpr> {
    let v = match (f, args) {
        ("CONS", [a, b]) => SExpr::cons(a.clone(), b.clone()),
        ("CAR", [a]) => a.car().cloned().unwrap_or(SExpr::Nil),
        ("CDR", [a]) => a.cdr().cloned().unwrap_or(SExpr::Nil),
        ("CONSP", [a]) => truth(a.is_pair()),
        ("ATOM", [a]) => truth(!a.is_pair()),
        ("EQUAL", [a, b]) => truth(a == b),
        ("NOT", [a]) => truth(a.is_nil()),
        ("IMPLIES", [a, b]) => truth(a.is_nil() || !b.is_nil()),
        ("BINARY-APPEND", [a, b]) => {
            let items: Vec<SExpr> = a.iter().cloned().collect();
            SExpr::list_with_tail(items, b.clone())
        }
        ("LEN", [a]) => SExpr::Integer(BigInt::from(a.iter().count())),
        ("MEMBER-EQUAL", [x, l]) => {
            let mut cur = l;
            loop {
                match cur {
                    SExpr::Pair(h, d) => {
                        if &**h == x {
                            break cur.clone();
                        }
                        cur = d;
                    }
                    _ => break SExpr::Nil,
                }
            }
        }
        _ => return None,
    };
    Some(v)
}

/// Call-by-value evaluator over built-ins and definitions.
pub struct Evaluator<'w> {
    world: &'w World,
    fuel: u64,
}

impl<'w> Evaluator<'w> {
    pub fn new(world: &'w World, fuel: u64) -> Self {
        Evaluator { world, fuel }
    }

    pub fn eval(&mut self, t: &Term, env: &BTreeMap<String, SExpr>) -> Result<SExpr, EvalError> {
        if self.fuel == 0 {
            return Err(EvalError::FuelExhausted);
        }
        self.fuel -= 1;
        match t {
            Term::Var(v) => env.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone())),
            Term::Const(c) => Ok(c.clone()),
            Term::Lambda {
                formals,
                body,
                actuals,
            } => {
                let mut inner = BTreeMap::new();
                for (f, a) in formals.iter().zip(actuals) {
                    inner.insert(f.clone(), self.eval(a, env)?);
                }
                self.eval(body, &inner)
            }
            Term::App(f, args) if f == "IF" => {
                if self.eval(&args[0], env)?.is_nil() {
                    self.eval(&args[2], env)
                } else {
                    self.eval(&args[1], env)
                }
            }
            Term::App(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, env))
                    .collect::<Result<Vec<_>, _>>()?;
                if f == "HIDE" {
                    return Ok(vals.into_iter().next().unwrap());
                }
                if let Some(v) = apply_builtin(f, &vals) {
                    return Ok(v);
                }
                match self.world.function(f).map(|fun| &fun.kind) {
                    Some(FunctionKind::Defined(d)) => {
                        let inner = d.formals.iter().cloned().zip(vals).collect();
                        self.eval(&d.body, &inner)
                    }
                    Some(_) => Err(EvalError::Stub(f.clone())),
                    None => Err(EvalError::UnknownFunction(f.clone())),
                }
            }
        }
    }
}

/// Evaluates a closed term.
pub fn ground_eval(t: &Term, world: &World, fuel: u64) -> Result<SExpr, EvalError> {
    Evaluator::new(world, fuel).eval(t, &BTreeMap::new())
}
