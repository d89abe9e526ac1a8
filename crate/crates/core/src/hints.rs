//! The hint language and the waterfall proof driver.
//!
//! A hint list is a list of [`ComputedHint`]s. Literal keyword lists and
//! `(USE-TERMHINT ...)` become computed hints whose expression is a quoted
//! keyword list; goal-spec hints (`("Goal" :kw ...)`) only fire on the goal
//! they name.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::rewrite::{expand_calls, simplify_clause_detailed, Clause, RewriteError};
use crate::sexpr::SExpr;
use crate::term::{
    apply_builtin, substitute, translate, translate_hint_expr, unparse, Term, TranslateError,
};
use crate::termhint;
use crate::world::{HintFn, Theory, World, WorldError};

pub const CLAUSE_VAR: &str = "CLAUSE";
pub const ID_VAR: &str = "ID";
pub const STABLE_VAR: &str = "STABLE-UNDER-SIMPLIFICATIONP";

/// Built-ins a computed hint may call besides registered hint functions.
const HINT_BUILTINS: &[&str] = &["IF", "CONS", "MEMBER-EQUAL", "EQUAL", "NOT"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HintError {
    #[error("unknown hint keyword :{0}")]
    UnknownKeyword(String),
    #[error("unknown theorem {0}")]
    UnknownTheorem(String),
    #[error("hint is not a keyword/value list: {0}")]
    NotKeywordList(String),
    #[error("malformed :instance {0}")]
    MalformedInstance(String),
    #[error("malformed {key} value: {value}")]
    MalformedValue { key: String, value: String },
    #[error("unregistered clause processor {0}")]
    UnknownClauseProcessor(String),
    #[error("computed hint calls {0}, which is not a registered hint function")]
    Unregistered(String),
    #[error("computed hint result {0} is not a valid term for re-evaluation: {1}")]
    NotATerm(String, TranslateError),
    #[error("computed hint produced {0}, which is neither NIL nor a keyword/value list")]
    BadResult(String),
    #[error("computed hint evaluation ran out of fuel")]
    FuelExhausted,
    #[error("unbound variable {0} in computed hint")]
    Unbound(String),
    #[error(transparent)]
    Termhint(#[from] crate::termhint::TermhintError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UseInstance {
    pub theorem: String,
    pub subst: Vec<(String, Term)>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TheoryDelta {
    pub enable: BTreeSet<String>,
    pub disable: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Hint {
    Use(Vec<UseInstance>),
    Expand(Vec<Term>),
    InTheory(TheoryDelta),
    ClauseProcessor(String),
    /// Applies `base`, then the fired hint's slot in the pending list is
    /// replaced by `new_pending`.
    Replacement {
        new_pending: Vec<ComputedHint>,
        base: Box<Hint>,
    },
    /// Several keys of one keyword list, applied together.
    Composite(Vec<Hint>),
}

#[derive(Clone, PartialEq, Eq)]
pub struct ComputedHint {
    pub expr: Term,
    pub fires_once: bool,
    /// Restricts the hint to the named goal.
    pub goal: Option<String>,
    /// The hint-list entry this came from, for display.
    pub source: Option<SExpr>,
}

impl ComputedHint {
    pub fn new(expr: Term) -> Self {
        ComputedHint {
            expr,
            fires_once: true,
            goal: None,
            source: None,
        }
    }

    fn with_source(mut self, source: &SExpr) -> Self {
        self.source = Some(source.clone());
        self
    }

    /// A hint that always yields the given keyword list.
    pub fn literal(kwlist: SExpr) -> Self {
        Self::new(Term::Const(kwlist))
    }

    /// Surface form, as it would appear in a hint list.
    pub fn to_sexpr(&self) -> SExpr {
        if let Some(src) = &self.source {
            return src.clone();
        }
        match (&self.goal, &self.expr) {
            (Some(g), Term::Const(kw)) => {
                SExpr::list_with_tail([SExpr::Str(g.clone())], kw.clone())
            }
            _ => unparse(&self.expr),
        }
    }
}

impl fmt::Debug for ComputedHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

fn symbols(names: &BTreeSet<String>) -> SExpr {
    SExpr::list(names.iter().map(|n| SExpr::sym(n)).collect::<Vec<_>>())
}

impl Hint {
    /// Renders the hint as a keyword/value list.
    pub fn to_sexpr(&self) -> SExpr {
        SExpr::list(self.keyword_items())
    }

    fn keyword_items(&self) -> Vec<SExpr> {
        match self {
            Hint::Use(instances) => {
                let items = instances
                    .iter()
                    .map(|i| {
                        let mut parts = vec![SExpr::keyword("INSTANCE"), SExpr::sym(&i.theorem)];
                        parts.extend(
                            i.subst
                                .iter()
                                .map(|(v, t)| SExpr::list([SExpr::sym(v), unparse(t)])),
                        );
                        SExpr::list(parts)
                    })
                    .collect::<Vec<_>>();
                vec![SExpr::keyword("USE"), SExpr::list(items)]
            }
            Hint::Expand(targets) => vec![
                SExpr::keyword("EXPAND"),
                SExpr::list(targets.iter().map(unparse).collect::<Vec<_>>()),
            ],
            Hint::InTheory(d) => {
                let value = match (d.enable.is_empty(), d.disable.is_empty()) {
                    (false, true) => SExpr::list_with_tail([SExpr::sym("ENABLE")], symbols(&d.enable)),
                    (true, false) => {
                        SExpr::list_with_tail([SExpr::sym("DISABLE")], symbols(&d.disable))
                    }
                    _ => SExpr::list([SExpr::sym("E/D"), symbols(&d.enable), symbols(&d.disable)]),
                };
                vec![SExpr::keyword("IN-THEORY"), value]
            }
            Hint::ClauseProcessor(name) => {
                vec![SExpr::keyword("CLAUSE-PROCESSOR"), SExpr::sym(name)]
            }
            Hint::Replacement { new_pending, base } => {
                let mut v = vec![
                    SExpr::keyword("COMPUTED-HINT-REPLACEMENT"),
                    SExpr::list(new_pending.iter().map(ComputedHint::to_sexpr).collect::<Vec<_>>()),
                ];
                v.extend(base.keyword_items());
                v
            }
            Hint::Composite(parts) => parts.iter().flat_map(Hint::keyword_items).collect(),
        }
    }

    /// All non-replacement parts, flattened.
    pub fn parts(&self) -> Vec<&Hint> {
        match self {
            Hint::Composite(ps) => ps.iter().flat_map(Hint::parts).collect(),
            Hint::Replacement { base, .. } => base.parts(),
            other => vec![other],
        }
    }
}

impl fmt::Display for Hint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sexpr())
    }
}

/// True for a proper list whose first element is a keyword.
pub fn is_keyword_list(v: &SExpr) -> bool {
    matches!(v.car(), Some(SExpr::Keyword(_))) && v.is_proper_list()
}

fn theory_names(value: &SExpr, key: &str) -> Result<BTreeSet<String>, HintError> {
    let bad = || HintError::MalformedValue {
        key: key.to_string(),
        value: value.to_string(),
    };
    value
        .to_vec()
        .ok_or_else(bad)?
        .iter()
        .map(|n| n.symbol_name().map(str::to_string).ok_or_else(bad))
        .collect()
}

/// Parses a theory expression: `(ENABLE ...)`, `(DISABLE ...)` or
/// `(E/D (enable...) (disable...))`.
pub fn parse_theory_delta(value: &SExpr, world: &World) -> Result<TheoryDelta, HintError> {
    let bad = || HintError::MalformedValue {
        key: "IN-THEORY".into(),
        value: value.to_string(),
    };
    let parts = value.to_vec().filter(|p| !p.is_empty()).ok_or_else(bad)?;
    let rest = SExpr::list(parts[1..].to_vec());
    let delta = match parts[0].symbol_name() {
        Some("ENABLE") => TheoryDelta {
            enable: theory_names(&rest, "ENABLE")?,
            ..Default::default()
        },
        Some("DISABLE") => TheoryDelta {
            disable: theory_names(&rest, "DISABLE")?,
            ..Default::default()
        },
        Some("E/D") if parts.len() <= 3 => TheoryDelta {
            enable: parts
                .get(1)
                .map(|e| theory_names(e, "E/D"))
                .transpose()?
                .unwrap_or_default(),
            disable: parts
                .get(2)
                .map(|e| theory_names(e, "E/D"))
                .transpose()?
                .unwrap_or_default(),
        },
        _ => return Err(bad()),
    };
    world.check_rule_names(&delta.enable)?;
    world.check_rule_names(&delta.disable)?;
    Ok(delta)
}

fn parse_instance(form: &SExpr, world: &World) -> Result<UseInstance, HintError> {
    if let Some(name) = form.symbol_name() {
        return world
            .theorem(name)
            .map(|_| UseInstance {
                theorem: name.to_string(),
                subst: vec![],
            })
            .ok_or_else(|| HintError::UnknownTheorem(name.to_string()));
    }
    let bad = || HintError::MalformedInstance(form.to_string());
    let parts = form.to_vec().ok_or_else(bad)?;
    match parts.as_slice() {
        [SExpr::Keyword(k), name, bindings @ ..] if k == "INSTANCE" => {
            let name = name.symbol_name().ok_or_else(bad)?;
            if world.theorem(name).is_none() {
                return Err(HintError::UnknownTheorem(name.to_string()));
            }
            let subst = bindings
                .iter()
                .map(|b| match b.to_vec().as_deref() {
                    Some([SExpr::Symbol(v), t]) => Ok((v.clone(), translate(t, world)?)),
                    _ => Err(bad()),
                })
                .collect::<Result<Vec<_>, HintError>>()?;
            Ok(UseInstance {
                theorem: name.to_string(),
                subst,
            })
        }
        _ => Err(bad()),
    }
}

/// Parses one entry of a hint list.
pub fn parse_hint_entry(entry: &SExpr, world: &World) -> Result<ComputedHint, HintError> {
    if let SExpr::Pair(head, rest) = entry {
        if let SExpr::Str(goal) = &**head {
            parse_hint(rest, world)?;
            return Ok(ComputedHint {
                expr: Term::Const((**rest).clone()),
                fires_once: true,
                goal: Some(goal.clone()),
                source: Some(entry.clone()),
            });
        }
        if head.is_symbol(termhint::USE_TERMHINT) {
            let form = match entry.to_vec().as_deref() {
                Some([_, form]) => form.clone(),
                _ => {
                    return Err(HintError::MalformedValue {
                        key: termhint::USE_TERMHINT.into(),
                        value: entry.to_string(),
                    })
                }
            };
            let kwlist = termhint::use_termhint_form(&form);
            parse_hint(&kwlist, world)?;
            return Ok(ComputedHint::literal(kwlist).with_source(entry));
        }
    }
    if is_keyword_list(entry) {
        parse_hint(entry, world)?;
        return Ok(ComputedHint::literal(entry.clone()).with_source(entry));
    }
    Ok(ComputedHint::new(translate_hint_expr(entry, world)?).with_source(entry))
}

/// Parses a keyword/value hint list into one composite hint.
pub fn parse_hint(kwlist: &SExpr, world: &World) -> Result<Hint, HintError> {
    let items = kwlist
        .to_vec()
        .filter(|v| v.len() % 2 == 0)
        .ok_or_else(|| HintError::NotKeywordList(kwlist.to_string()))?;
    let mut parts = Vec::new();
    let mut replacement = None;
    for (i, pair) in items.chunks(2).enumerate() {
        let (key, value) = (&pair[0], &pair[1]);
        let SExpr::Keyword(key) = key else {
            return Err(HintError::NotKeywordList(kwlist.to_string()));
        };
        let bad = || HintError::MalformedValue {
            key: key.clone(),
            value: value.to_string(),
        };
        match key.as_str() {
            "COMPUTED-HINT-REPLACEMENT" if i == 0 => {
                let entries = value.to_vec().ok_or_else(bad)?;
                replacement = Some(
                    entries
                        .iter()
                        .map(|e| parse_hint_entry(e, world))
                        .collect::<Result<Vec<_>, _>>()?,
                );
            }
            "USE" => {
                let forms = if matches!(value.car(), Some(SExpr::Keyword(_))) {
                    vec![value.clone()]
                } else {
                    value.to_vec().ok_or_else(bad)?
                };
                let instances = forms
                    .iter()
                    .map(|f| parse_instance(f, world))
                    .collect::<Result<Vec<_>, _>>()?;
                parts.push(Hint::Use(instances));
            }
            "EXPAND" => {
                let forms = match value.car() {
                    Some(SExpr::Symbol(_)) => vec![value.clone()],
                    _ => value.to_vec().ok_or_else(bad)?,
                };
                let targets = forms
                    .iter()
                    .map(|f| translate(f, world))
                    .collect::<Result<Vec<_>, _>>()?;
                parts.push(Hint::Expand(targets));
            }
            "IN-THEORY" => parts.push(Hint::InTheory(parse_theory_delta(value, world)?)),
            "CLAUSE-PROCESSOR" => {
                let name = value
                    .symbol_name()
                    .or_else(|| value.car().and_then(SExpr::symbol_name))
                    .ok_or_else(bad)?;
                if !world.has_clause_processor(name) {
                    return Err(HintError::UnknownClauseProcessor(name.to_string()));
                }
                parts.push(Hint::ClauseProcessor(name.to_string()));
            }
            _ => return Err(HintError::UnknownKeyword(key.clone())),
        }
    }
    let base = Hint::Composite(parts);
    Ok(match replacement {
        Some(new_pending) => Hint::Replacement {
            new_pending,
            base: Box::new(base),
        },
        None => base,
    })
}

/// A goal awaiting work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Goal {
    pub name: String,
    pub clause: Clause,
    pub theory: Theory,
    pub pending: Vec<ComputedHint>,
}

/// What applying a hint produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub clause: Clause,
    pub theory: Theory,
    /// Set when the hint carried a replacement list.
    pub new_pending: Option<Vec<ComputedHint>>,
    pub warnings: Vec<String>,
}

pub fn run_clause_processor(name: &str, c: &Clause, world: &World) -> Result<Clause, HintError> {
    if !world.has_clause_processor(name) {
        return Err(HintError::UnknownClauseProcessor(name.to_string()));
    }
    match name {
        termhint::DROP_TERMHINT_HYP => Ok(termhint::drop_termhint_hyp(c)),
        _ => Err(HintError::UnknownClauseProcessor(name.to_string())),
    }
}

/// Applies a hint to a goal. Clause processors run first, then `:use`
/// literals are added, then `:expand`, then the theory change.
pub fn apply_hint(h: &Hint, goal: &Goal, world: &World) -> Result<Applied, HintError> {
    let mut clause = goal.clause.clone();
    let mut theory = goal.theory.clone();
    let mut warnings = Vec::new();
    let parts = h.parts();
    for p in &parts {
        if let Hint::ClauseProcessor(name) = p {
            clause = run_clause_processor(name, &clause, world)?;
        }
    }
    for p in &parts {
        if let Hint::Use(instances) = p {
            for inst in instances {
                let body = world
                    .theorem(&inst.theorem)
                    .ok_or_else(|| HintError::UnknownTheorem(inst.theorem.clone()))?;
                let free = body.free_vars();
                let mut s = BTreeMap::new();
                for (v, t) in &inst.subst {
                    if free.contains(v) {
                        s.insert(v.clone(), t.clone());
                    } else {
                        warnings.push(format!(
                            "{}: {v} is not free in the theorem; binding ignored",
                            inst.theorem
                        ));
                    }
                }
                for v in free.iter().filter(|v| !s.contains_key(*v)) {
                    warnings.push(format!("{}: {v} left unbound", inst.theorem));
                }
                clause.literals.push(Term::not(substitute(body, &s)));
            }
        }
    }
    for p in &parts {
        if let Hint::Expand(targets) = p {
            clause = expand_calls(&clause, targets, world)?;
        }
    }
    for p in &parts {
        if let Hint::InTheory(d) = p {
            theory.enable(&d.enable);
            theory.disable(&d.disable);
        }
    }
    let new_pending = match h {
        Hint::Replacement { new_pending, .. } => Some(new_pending.clone()),
        _ => None,
    };
    Ok(Applied {
        clause,
        theory,
        new_pending,
        warnings,
    })
}

/// Evaluation context for computed hints.
#[derive(Debug, Clone)]
pub struct HintContext<'a> {
    pub clause: &'a Clause,
    pub id: &'a str,
    pub stable: bool,
}

/// The restricted evaluator used for computed hints.
pub struct HintEvaluator<'w> {
    pub world: &'w World,
    fuel: u64,
}

impl<'w> HintEvaluator<'w> {
    pub fn new(world: &'w World, fuel: u64) -> Self {
        HintEvaluator { world, fuel }
    }

    fn env(ctx: &HintContext<'_>) -> BTreeMap<String, SExpr> {
        BTreeMap::from([
            (CLAUSE_VAR.to_string(), ctx.clause.to_sexpr()),
            (ID_VAR.to_string(), SExpr::Str(ctx.id.to_string())),
            (
                STABLE_VAR.to_string(),
                if ctx.stable { SExpr::t() } else { SExpr::Nil },
            ),
        ])
    }

    pub fn eval(
        &mut self,
        t: &Term,
        env: &BTreeMap<String, SExpr>,
        ctx: &HintContext<'_>,
    ) -> Result<SExpr, HintError> {
        if self.fuel == 0 {
            return Err(HintError::FuelExhausted);
        }
        self.fuel -= 1;
        match t {
            Term::Var(v) => env.get(v).cloned().ok_or_else(|| HintError::Unbound(v.clone())),
            Term::Const(c) => Ok(c.clone()),
            Term::Lambda {
                formals,
                body,
                actuals,
            } => {
                let mut inner = BTreeMap::new();
                for (f, a) in formals.iter().zip(actuals) {
                    inner.insert(f.clone(), self.eval(a, env, ctx)?);
                }
                self.eval(body, &inner, ctx)
            }
            Term::App(f, args) if f == "IF" => {
                if self.eval(&args[0], env, ctx)?.is_nil() {
                    self.eval(&args[2], env, ctx)
                } else {
                    self.eval(&args[1], env, ctx)
                }
            }
            Term::App(f, args) => {
                let vals = args
                    .iter()
                    .map(|a| self.eval(a, env, ctx))
                    .collect::<Result<Vec<_>, _>>()?;
                if HINT_BUILTINS.contains(&f.as_str()) {
                    return Ok(apply_builtin(f, &vals).expect("hint built-ins are evaluable"));
                }
                match self.world.hint_fn(f) {
                    Some(HintFn::Native { .. }) if f == termhint::USE_TERMHINT_FIND_HINT => {
                        termhint::find_hint_value(&vals[0], self, ctx)
                    }
                    Some(HintFn::User { formals, body }) => {
                        let inner = formals.iter().cloned().zip(vals).collect();
                        let body = body.clone();
                        self.eval(&body, &inner, ctx)
                    }
                    _ => Err(HintError::Unregistered(f.clone())),
                }
            }
        }
    }

    /// Evaluates a computed hint. A keyword list is the hint itself; any
    /// other non-NIL value is evaluated once more as a term.
    pub fn eval_computed_hint(
        &mut self,
        ch: &ComputedHint,
        ctx: &HintContext<'_>,
    ) -> Result<Option<SExpr>, HintError> {
        if ch.goal.as_deref().is_some_and(|g| g != ctx.id) {
            return Ok(None);
        }
        let v = self.eval(&ch.expr, &Self::env(ctx), ctx)?;
        if v.is_nil() {
            Ok(None)
        } else if is_keyword_list(&v) {
            Ok(Some(v))
        } else {
            self.eval_hint_value(&v, ctx)
        }
    }

    /// The second evaluation: `v` is read as a term and evaluated; the result
    /// must be NIL or a keyword list.
    pub fn eval_hint_value(
        &mut self,
        v: &SExpr,
        ctx: &HintContext<'_>,
    ) -> Result<Option<SExpr>, HintError> {
        let term = translate_hint_expr(v, self.world)
            .map_err(|e| HintError::NotATerm(v.to_string(), e))?;
        let r = self.eval(&term, &Self::env(ctx), ctx)?;
        if r.is_nil() {
            Ok(None)
        } else if is_keyword_list(&r) {
            Ok(Some(r))
        } else {
            Err(HintError::BadResult(r.to_string()))
        }
    }
}

/// Evaluates a computed hint against a goal and parses the result.
pub fn eval_computed_hint(
    ch: &ComputedHint,
    goal: &Goal,
    stable: bool,
    world: &World,
    fuel: u64,
) -> Result<Option<Hint>, HintError> {
    let ctx = HintContext {
        clause: &goal.clause,
        id: &goal.name,
        stable,
    };
    HintEvaluator::new(world, fuel)
        .eval_computed_hint(ch, &ctx)?
        .map(|kw| parse_hint(&kw, world))
        .transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    /// Waterfall steps per theorem.
    pub max_steps: u64,
    /// Rewriter fuel per simplification pass.
    pub rewrite_fuel: u64,
    /// Evaluator fuel per computed-hint evaluation.
    pub eval_fuel: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_steps: 10_000,
            rewrite_fuel: 100_000,
            eval_fuel: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Simplify,
    Split,
    Hint,
    Checkpoint,
    Proved,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Simplify => "SIMPLIFY",
            EventKind::Split => "SPLIT",
            EventKind::Hint => "HINT",
            EventKind::Checkpoint => "CHECKPOINT",
            EventKind::Proved => "PROVED",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub goal: String,
    pub kind: EventKind,
    pub payload: SExpr,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EVENT {} {} {}", self.goal, self.kind, self.payload)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checkpoint {
    pub name: String,
    pub clause: Clause,
    pub labels: Vec<String>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProofResult {
    Proved,
    Failed(Vec<Checkpoint>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofOutcome {
    pub result: ProofResult,
    pub trace: Vec<TraceEvent>,
    pub warnings: Vec<String>,
    pub steps: u64,
}

impl ProofOutcome {
    pub fn proved(&self) -> bool {
        self.result == ProofResult::Proved
    }

    pub fn checkpoints(&self) -> &[Checkpoint] {
        match &self.result {
            ProofResult::Proved => &[],
            ProofResult::Failed(c) => c,
        }
    }
}

fn child_name(parent: &str, k: usize) -> String {
    if parent == "Goal" {
        format!("Subgoal {k}")
    } else {
        format!("{parent}.{k}")
    }
}

struct Waterfall<'w> {
    world: &'w World,
    limits: Limits,
    steps: u64,
    trace: Vec<TraceEvent>,
    warnings: Vec<String>,
    checkpoints: Vec<Checkpoint>,
}

enum StepOutcome {
    Done,
    Children(Vec<Goal>),
}

impl Waterfall<'_> {
    fn event(&mut self, goal: &str, kind: EventKind, payload: SExpr) {
        self.trace.push(TraceEvent {
            goal: goal.to_string(),
            kind,
            payload,
        });
    }

    fn fail(&mut self, goal: &Goal, diagnostic: Option<String>) {
        self.event(&goal.name, EventKind::Checkpoint, goal.clause.to_sexpr());
        self.checkpoints.push(Checkpoint {
            name: goal.name.clone(),
            clause: goal.clause.clone(),
            labels: termhint::mark_clause_labels(&goal.clause),
            diagnostic,
        });
    }

    /// Fires the first applicable pending hint. Returns whether one fired.
    fn try_hints(&mut self, goal: &mut Goal, stable: bool) -> Result<bool, HintError> {
        for i in 0..goal.pending.len() {
            let ch = goal.pending[i].clone();
            let Some(hint) = eval_computed_hint(&ch, goal, stable, self.world, self.limits.eval_fuel)?
            else {
                continue;
            };
            self.event(&goal.name, EventKind::Hint, hint.to_sexpr());
            let applied = apply_hint(&hint, goal, self.world)?;
            self.warnings.extend(
                applied
                    .warnings
                    .into_iter()
                    .map(|w| format!("{}: {w}", goal.name)),
            );
            goal.clause = applied.clause;
            goal.theory = applied.theory;
            let replacement = applied.new_pending.unwrap_or_default();
            if ch.fires_once {
                goal.pending.splice(i..=i, replacement);
            } else {
                goal.pending.splice(i + 1..i + 1, replacement);
            }
            return Ok(true);
        }
        Ok(false)
    }

    fn run_goal(&mut self, mut goal: Goal) -> Result<StepOutcome, String> {
        let mut fresh = true;
        loop {
            self.steps += 1;
            if self.steps > self.limits.max_steps {
                let msg = format!("step limit of {} exceeded", self.limits.max_steps);
                self.fail(&goal, Some(msg.clone()));
                return Err(msg);
            }
            if fresh {
                fresh = false;
                match self.try_hints(&mut goal, false) {
                    Ok(true) => continue,
                    Ok(false) => {}
                    Err(e) => {
                        self.fail(&goal, Some(e.to_string()));
                        return Ok(StepOutcome::Done);
                    }
                }
            }
            let s = match simplify_clause_detailed(
                &goal.clause,
                &goal.theory,
                self.world,
                self.limits.rewrite_fuel,
            ) {
                Ok(s) => s,
                Err(e) => {
                    let msg = e.to_string();
                    self.fail(&goal, Some(msg.clone()));
                    return Err(msg);
                }
            };
            if s.clauses.is_empty() {
                self.event(&goal.name, EventKind::Proved, goal.clause.to_sexpr());
                return Ok(StepOutcome::Done);
            }
            if s.rewritten != goal.clause {
                self.event(&goal.name, EventKind::Simplify, s.rewritten.to_sexpr());
            }
            if let Some(test) = &s.split_on {
                self.event(&goal.name, EventKind::Split, unparse(test));
                let children = s
                    .clauses
                    .into_iter()
                    .enumerate()
                    .map(|(k, clause)| Goal {
                        name: child_name(&goal.name, k + 1),
                        clause,
                        theory: goal.theory.clone(),
                        pending: goal.pending.clone(),
                    })
                    .collect();
                return Ok(StepOutcome::Children(children));
            }
            if s.changed {
                goal.clause = s.rewritten;
                continue;
            }
            match self.try_hints(&mut goal, true) {
                Ok(true) => continue,
                Ok(false) => {
                    self.fail(&goal, None);
                    return Ok(StepOutcome::Done);
                }
                Err(e) => {
                    self.fail(&goal, Some(e.to_string()));
                    return Ok(StepOutcome::Done);
                }
            }
        }
    }
}

/// Runs the proof driver on an initial goal named "Goal".
pub fn waterfall(
    clause: Clause,
    theory: Theory,
    hints: Vec<ComputedHint>,
    world: &World,
    limits: Limits,
) -> ProofOutcome {
    let mut wf = Waterfall {
        world,
        limits,
        steps: 0,
        trace: Vec::new(),
        warnings: Vec::new(),
        checkpoints: Vec::new(),
    };
    let mut stack = vec![Goal {
        name: "Goal".to_string(),
        clause,
        theory,
        pending: hints,
    }];
    while let Some(goal) = stack.pop() {
        match wf.run_goal(goal) {
            Ok(StepOutcome::Done) => {}
            Ok(StepOutcome::Children(children)) => stack.extend(children.into_iter().rev()),
            Err(_) => break,
        }
    }
    let result = if wf.checkpoints.is_empty() {
        ProofResult::Proved
    } else {
        ProofResult::Failed(wf.checkpoints)
    };
    ProofOutcome {
        result,
        trace: wf.trace,
        warnings: wf.warnings,
        steps: wf.steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sexpr::parse_one;

    fn world() -> World {
        let mut w = World::new();
        w.add_stub("P", 1).unwrap();
        w.add_stub("Q", 1).unwrap();
        w
    }

    fn p(s: &str) -> SExpr {
        parse_one(s).unwrap()
    }

    fn goal(w: &World, lits: &[&str]) -> Goal {
        Goal {
            name: "Goal".into(),
            clause: Clause::new(lits.iter().map(|l| translate(&p(l), w).unwrap()).collect()),
            theory: w.theory.clone(),
            pending: vec![],
        }
    }

    #[test]
    fn parse_in_theory() {
        let mut w = world();
        w.add_rule(crate::world::RewriteRule {
            name: "MY-THEORY1".into(),
            hyps: vec![],
            equiv: crate::world::Equiv::Iff,
            lhs: translate(&p("(p x)"), &w).unwrap(),
            rhs: Term::t(),
        })
        .unwrap();
        let h = parse_hint(&p("(:in-theory (enable my-theory1))"), &w).unwrap();
        assert_eq!(
            h,
            Hint::Composite(vec![Hint::InTheory(TheoryDelta {
                enable: ["MY-THEORY1".to_string()].into(),
                disable: BTreeSet::new(),
            })])
        );
        assert_eq!(h.to_string(), "(:IN-THEORY (ENABLE MY-THEORY1))");
    }

    #[test]
    fn parse_mark_clause_instance() {
        let w = world();
        let h = parse_hint(
            &p("(:use ((:instance mark-clause-is-true (x 'my-special-case))))"),
            &w,
        )
        .unwrap();
        assert_eq!(
            h,
            Hint::Composite(vec![Hint::Use(vec![UseInstance {
                theorem: "MARK-CLAUSE-IS-TRUE".into(),
                subst: vec![("X".into(), Term::quoted_sym("MY-SPECIAL-CASE"))],
            }])])
        );
    }

    #[test]
    fn parse_errors() {
        let w = world();
        assert_eq!(
            parse_hint(&p("(:frobnicate 3)"), &w),
            Err(HintError::UnknownKeyword("FROBNICATE".into()))
        );
        assert!(matches!(parse_hint(&p("(:use)"), &w), Err(HintError::NotKeywordList(_))));
        assert!(matches!(
            parse_hint(&p("(:use ((:instance no-such-thm)))"), &w),
            Err(HintError::UnknownTheorem(_))
        ));
        assert!(matches!(
            parse_hint(&p("(:use ((:instance mark-clause-is-true x)))"), &w),
            Err(HintError::MalformedInstance(_))
        ));
        assert!(matches!(
            parse_hint(&p("(:in-theory (enable nothing-here))"), &w),
            Err(HintError::World(WorldError::UnknownRuleName(_)))
        ));
    }

    #[test]
    fn use_adds_exactly_one_literal() {
        let w = world();
        let g = goal(&w, &["(p a)"]);
        let h = parse_hint(&p("(:use ((:instance use-termhint-hyp-is-true (x (q b)))))"), &w).unwrap();
        let a = apply_hint(&h, &g, &w).unwrap();
        assert_eq!(a.clause.to_string(), "((P A) (NOT (USE-TERMHINT-HYP (Q B))))");
        assert!(a.warnings.is_empty());
    }

    #[test]
    fn use_warns_on_non_free_binding() {
        let w = world();
        let g = goal(&w, &["(p a)"]);
        let h = parse_hint(&p("(:use ((:instance mark-clause-is-true (y 'k))))"), &w).unwrap();
        let a = apply_hint(&h, &g, &w).unwrap();
        assert_eq!(a.clause.to_string(), "((P A) (NOT (MARK-CLAUSE X)))");
        assert_eq!(a.warnings.len(), 2);
    }

    #[test]
    fn in_theory_enables_for_the_child() {
        let mut w = world();
        w.add_rule(crate::world::RewriteRule {
            name: "P-TRUE".into(),
            hyps: vec![],
            equiv: crate::world::Equiv::Iff,
            lhs: translate(&p("(p x)"), &w).unwrap(),
            rhs: Term::t(),
        })
        .unwrap();
        w.theory.disable(&["P-TRUE".to_string()]);
        let g = goal(&w, &["(p a)"]);
        let outcome = waterfall(g.clause.clone(), g.theory.clone(), vec![], &w, Limits::default());
        assert!(!outcome.proved());
        let hint = parse_hint_entry(&p("(\"Goal\" :in-theory (enable p-true))"), &w).unwrap();
        let outcome = waterfall(g.clause, g.theory, vec![hint], &w, Limits::default());
        assert!(outcome.proved(), "{:?}", outcome.trace);
    }

    #[test]
    fn stability_gated_hint_waits() {
        let w = world();
        let g = goal(&w, &["(p a)"]);
        let ch = ComputedHint::new(
            translate_hint_expr(
                &p("(and stable-under-simplificationp (use-termhint-find-hint clause))"),
                &w,
            )
            .unwrap(),
        );
        assert_eq!(eval_computed_hint(&ch, &g, false, &w, 1000).unwrap(), None);
    }

    #[test]
    fn membership_hint_fires_on_matching_clause() {
        let w = world();
        let ch = ComputedHint::new(
            translate_hint_expr(
                &p("(and (member-equal '(not (p a)) clause) '(:expand ((p a))))"),
                &w,
            )
            .unwrap(),
        );
        let with = goal(&w, &["(q a)", "(not (p a))"]);
        let without = goal(&w, &["(q a)", "(p a)"]);
        let mut ev = HintEvaluator::new(&w, 1000);
        fn ctx(g: &Goal) -> HintContext<'_> {
            HintContext {
                clause: &g.clause,
                id: "Goal",
                stable: false,
            }
        }
        assert!(ev.eval_computed_hint(&ch, &ctx(&with)).unwrap().is_some());
        assert!(ev.eval_computed_hint(&ch, &ctx(&without)).unwrap().is_none());
    }

    #[test]
    fn unquoted_keyword_list_fails_second_evaluation() {
        let w = world();
        let g = goal(&w, &["(p a)"]);
        let ctx = HintContext {
            clause: &g.clause,
            id: "Goal",
            stable: true,
        };
        let mut ev = HintEvaluator::new(&w, 1000);
        let r = ev.eval_hint_value(&p("(:expand ((p a)))"), &ctx);
        assert!(matches!(r, Err(HintError::NotATerm(..))), "{r:?}");
        let ok = ev.eval_hint_value(&p("'(:expand ((p a)))"), &ctx).unwrap();
        assert_eq!(ok.unwrap().to_string(), "(:EXPAND ((P A)))");
    }

    #[test]
    fn unregistered_functions_are_rejected() {
        let w = world();
        let g = goal(&w, &["(p a)"]);
        let ch = ComputedHint::new(translate_hint_expr(&p("(p clause)"), &w).unwrap());
        assert_eq!(
            eval_computed_hint(&ch, &g, true, &w, 100),
            Err(HintError::Unregistered("P".into()))
        );
    }

    #[test]
    fn trivial_goal_proves() {
        let w = world();
        let g = goal(&w, &["(equal x x)"]);
        let out = waterfall(g.clause, g.theory, vec![], &w, Limits::default());
        assert!(out.proved());
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace[0].to_string(), "EVENT Goal PROVED ((EQUAL X X))");
    }

    #[test]
    fn split_names_children() {
        let w = world();
        let g = goal(&w, &["(if (p a) (q a) (q b))"]);
        let out = waterfall(g.clause, g.theory, vec![], &w, Limits::default());
        let names: Vec<_> = out.checkpoints().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["Subgoal 1", "Subgoal 2"]);
    }

    #[test]
    fn step_limit_reports_diagnostic() {
        let w = world();
        let g = goal(&w, &["(if (p a) (q a) (q b))"]);
        let limits = Limits {
            max_steps: 1,
            ..Limits::default()
        };
        let out = waterfall(g.clause, g.theory, vec![], &w, limits);
        assert!(!out.proved());
        assert!(out.checkpoints()[0]
            .diagnostic
            .as_deref()
            .unwrap()
            .contains("step limit"));
    }
}
