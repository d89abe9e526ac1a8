//! Batch runner for event files.
//!
//! Each file is processed in a fresh [`World`]; events within a file run in
//! order and later events see the effects of earlier ones.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::hints::{
    parse_hint_entry, parse_theory_delta, waterfall, ComputedHint, HintError, Limits,
    ProofOutcome, CLAUSE_VAR, ID_VAR, STABLE_VAR,
};
use crate::rewrite::{normalize_definition, Clause};
use crate::sexpr::{self, ReadError, SExpr};
use crate::term::{translate, translate_hint_expr, Term, TranslateError};
use crate::world::{Definition, Equiv, HintFn, RewriteRule, World, WorldError};

#[derive(Debug, Error)]
pub enum EventError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("malformed event {form}: {detail}")]
    Malformed { form: String, detail: String },
    #[error("unknown event {0}")]
    UnknownEvent(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Hint(#[from] HintError),
}

fn malformed(form: &SExpr, detail: &str) -> EventError {
    EventError::Malformed {
        form: form.to_string(),
        detail: detail.to_string(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub trace: bool,
    pub checkpoints: bool,
    pub max_steps: Option<u64>,
    pub stop_on_failure: bool,
}

impl Flags {
    pub fn limits(&self) -> Limits {
        let mut l = Limits::default();
        if let Some(n) = self.max_steps {
            l.max_steps = n;
        }
        l
    }
}

#[derive(Debug, Clone)]
pub struct TheoremReport {
    pub name: String,
    /// The clause the proof started from.
    pub goal: Clause,
    pub outcome: ProofOutcome,
}

impl TheoremReport {
    pub fn proved(&self) -> bool {
        self.outcome.proved()
    }
}

#[derive(Debug, Default)]
pub struct FileReport {
    pub path: PathBuf,
    pub theorems: Vec<TheoremReport>,
    pub warnings: Vec<String>,
    /// The event error that stopped processing of this file.
    pub error: Option<String>,
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub files: Vec<FileReport>,
}

impl RunReport {
    pub fn theorems(&self) -> impl Iterator<Item = &TheoremReport> {
        self.files.iter().flat_map(|f| f.theorems.iter())
    }

    pub fn theorem(&self, name: &str) -> Option<&TheoremReport> {
        self.theorems().find(|t| t.name == name)
    }

    /// 2 on any parse or event error, 1 on any failed theorem, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.files.iter().any(|f| f.error.is_some()) {
            2
        } else if self.theorems().any(|t| !t.proved()) {
            1
        } else {
            0
        }
    }
}

/// Splits `(IMPLIES h c)` into hypothesis literals and a conclusion.
fn hyps_and_concl(t: &Term) -> (Vec<Term>, Term) {
    match t.call_of("IMPLIES") {
        Some([h, c]) => {
            let mut hyps = conjuncts(h);
            let (more, concl) = hyps_and_concl(c);
            hyps.extend(more);
            (hyps, concl)
        }
        _ => (vec![], t.clone()),
    }
}

/// `(IF a b NIL)` is a conjunction.
fn conjuncts(t: &Term) -> Vec<Term> {
    match t.call_of("IF") {
        Some([a, b, c]) if c.is_nil() => {
            let mut v = conjuncts(a);
            v.extend(conjuncts(b));
            v
        }
        _ => vec![t.clone()],
    }
}

/// The clause for a theorem body: each hypothesis becomes a negated literal.
pub fn clausify(t: &Term) -> Clause {
    let (hyps, concl) = hyps_and_concl(t);
    let mut lits: Vec<Term> = hyps.iter().map(crate::rewrite::negate).collect();
    lits.push(concl);
    Clause::new(lits)
}

/// The rewrite rule a proved theorem stands for.
pub fn rule_from_theorem(name: &str, body: &Term) -> RewriteRule {
    let (hyps, concl) = hyps_and_concl(body);
    let (equiv, lhs, rhs) = match (concl.call_of("EQUAL"), concl.negated()) {
        (Some([l, r]), _) => (Equiv::Equal, l.clone(), r.clone()),
        (_, Some(p)) => (Equiv::Equal, p.clone(), Term::nil()),
        _ => (Equiv::Iff, concl.clone(), Term::t()),
    };
    RewriteRule {
        name: name.to_string(),
        hyps,
        equiv,
        lhs,
        rhs,
    }
}

fn symbol_arg(form: &SExpr, v: Option<&SExpr>, what: &str) -> Result<String, EventError> {
    v.and_then(SExpr::symbol_name)
        .map(str::to_string)
        .ok_or_else(|| malformed(form, &format!("expected {what}")))
}

fn formals(form: &SExpr, v: Option<&SExpr>) -> Result<Vec<String>, EventError> {
    let v = v.ok_or_else(|| malformed(form, "missing formals"))?;
    let items = v.to_vec().ok_or_else(|| malformed(form, "formals must be a list"))?;
    items
        .iter()
        .map(|x| {
            x.symbol_name()
                .map(str::to_string)
                .ok_or_else(|| malformed(form, "formals must be symbols"))
        })
        .collect()
}

/// Reads trailing `:key value` pairs.
fn keyword_args<'a>(
    form: &SExpr,
    items: &'a [SExpr],
) -> Result<BTreeMap<String, &'a SExpr>, EventError> {
    if items.len() % 2 != 0 {
        return Err(malformed(form, "odd keyword argument list"));
    }
    let mut out = BTreeMap::new();
    for pair in items.chunks(2) {
        match &pair[0] {
            SExpr::Keyword(k) => {
                out.insert(k.clone(), &pair[1]);
            }
            _ => return Err(malformed(form, "expected a keyword")),
        }
    }
    Ok(out)
}

/// True for `(DECLARE (XARGS ... :NORMALIZE NIL ...))`.
fn declares_no_normalize(form: &SExpr, decl: &SExpr) -> Result<bool, EventError> {
    let items = decl.to_vec().unwrap_or_default();
    let mut no_normalize = false;
    for spec in &items[1..] {
        let parts = spec.to_vec().unwrap_or_default();
        if parts.first().map_or(false, |h| h.is_symbol("XARGS")) {
            let kw = keyword_args(form, &parts[1..])?;
            if let Some(v) = kw.get("NORMALIZE") {
                no_normalize = v.is_nil();
            }
        }
    }
    Ok(no_normalize)
}

fn mentions(t: &Term, f: &str) -> bool {
    match t {
        Term::Var(_) | Term::Const(_) => false,
        Term::App(g, args) => g == f || args.iter().any(|a| mentions(a, f)),
        Term::Lambda { body, actuals, .. } => {
            mentions(body, f) || actuals.iter().any(|a| mentions(a, f))
        }
    }
}

struct Session {
    world: World,
    flags: Flags,
    report: FileReport,
}

impl Session {
    fn event(&mut self, form: &SExpr) -> Result<bool, EventError> {
        let items = form.to_vec().ok_or_else(|| malformed(form, "not a list"))?;
        let head = items
            .first()
            .and_then(SExpr::symbol_name)
            .ok_or_else(|| malformed(form, "missing event name"))?;
        match head {
            "DEFSTUB" => self.defstub(form, &items),
            "DEFUN" => self.defun(form, &items, true),
            "DEFUND" => self.defun(form, &items, false),
            "DEFTHM" => return self.defthm(form, &items),
            "IN-THEORY" => {
                let v = items.get(1).ok_or_else(|| malformed(form, "missing theory"))?;
                let d = parse_theory_delta(v, &self.world)?;
                self.world.theory.disable(&d.disable);
                self.world.theory.enable(&d.enable);
                Ok(())
            }
            "REGISTER-HINT-FN" => self.register_hint_fn(form, &items),
            other => Err(EventError::UnknownEvent(other.to_string())),
        }?;
        Ok(true)
    }

    fn defstub(&mut self, form: &SExpr, items: &[SExpr]) -> Result<(), EventError> {
        let name = symbol_arg(form, items.get(1), "a name")?;
        let arity = match items.get(2) {
            Some(SExpr::Integer(n)) => n
                .try_into()
                .map_err(|_| malformed(form, "bad arity"))?,
            v => formals(form, v)?.len(),
        };
        self.world.add_stub(&name, arity)?;
        Ok(())
    }

    fn defun(&mut self, form: &SExpr, items: &[SExpr], enabled: bool) -> Result<(), EventError> {
        if items.len() < 4 {
            return Err(malformed(form, "expected name, formals and body"));
        }
        let name = symbol_arg(form, items.get(1), "a name")?;
        let formals = formals(form, items.get(2))?;
        let mut normalize = true;
        for decl in &items[3..items.len() - 1] {
            if !decl.car().map_or(false, |h| h.is_symbol("DECLARE")) {
                return Err(malformed(form, "expected a declaration"));
            }
            if declares_no_normalize(form, decl)? {
                normalize = false;
            }
        }
        self.world.declare_function(&name, formals.len())?;
        let body = match translate(&items[items.len() - 1], &self.world) {
            Ok(b) => b,
            Err(e) => {
                self.world.remove_function(&name);
                return Err(e.into());
            }
        };
        let extra: Vec<String> = body
            .free_vars()
            .into_iter()
            .filter(|v| !formals.contains(v))
            .collect();
        if !extra.is_empty() {
            self.world.remove_function(&name);
            return Err(malformed(form, &format!("free variables {extra:?} in body")));
        }
        let def = Definition {
            recursive: mentions(&body, &name),
            name,
            formals,
            body,
            normalized: normalize,
        };
        let def = if normalize {
            normalize_definition(&def)
        } else {
            def
        };
        self.world.add_definition(def, enabled);
        Ok(())
    }

    fn register_hint_fn(&mut self, form: &SExpr, items: &[SExpr]) -> Result<(), EventError> {
        if items.len() != 4 {
            return Err(malformed(form, "expected name, formals and body"));
        }
        let name = symbol_arg(form, items.get(1), "a name")?;
        let formals = formals(form, items.get(2))?;
        let body = translate_hint_expr(&items[3], &self.world)?;
        let allowed = |v: &String| {
            formals.contains(v) || [CLAUSE_VAR, ID_VAR, STABLE_VAR].contains(&v.as_str())
        };
        if let Some(v) = body.free_vars().into_iter().find(|v| !allowed(v)) {
            return Err(malformed(form, &format!("unbound variable {v}")));
        }
        self.world.add_hint_fn(&name, HintFn::User { formals, body })?;
        Ok(())
    }

    /// Returns false when the proof failed.
    fn defthm(&mut self, form: &SExpr, items: &[SExpr]) -> Result<bool, EventError> {
        if items.len() < 3 {
            return Err(malformed(form, "expected name and body"));
        }
        let name = symbol_arg(form, items.get(1), "a name")?;
        if self.world.theorem(&name).is_some() {
            return Err(WorldError::Redefinition(name).into());
        }
        let body = translate(&items[2], &self.world)?;
        let kw = keyword_args(form, &items[3..])?;
        let hints = match kw.get("HINTS") {
            Some(v) => v
                .to_vec()
                .ok_or_else(|| malformed(form, ":hints must be a list"))?
                .iter()
                .map(|e| parse_hint_entry(e, &self.world))
                .collect::<Result<Vec<ComputedHint>, _>>()?,
            None => vec![],
        };
        let make_rule = match kw.get("RULE-CLASSES") {
            None => true,
            Some(SExpr::Nil) => false,
            Some(v) if v.is_symbol("REWRITE") || v.to_string() == "(REWRITE)" => true,
            Some(SExpr::Keyword(k)) if k == "REWRITE" => true,
            Some(_) => return Err(malformed(form, "unsupported :rule-classes")),
        };
        for k in kw.keys() {
            if k != "HINTS" && k != "RULE-CLASSES" {
                return Err(malformed(form, &format!("unknown keyword :{k}")));
            }
        }
        let goal = clausify(&body);
        let outcome = waterfall(
            goal.clone(),
            self.world.theory.clone(),
            hints,
            &self.world,
            self.flags.limits(),
        );
        let proved = outcome.proved();
        self.report
            .warnings
            .extend(outcome.warnings.iter().map(|w| format!("{name}: {w}")));
        if proved {
            self.world.add_theorem(&name, body.clone())?;
            if make_rule {
                if let Err(e) = self.world.add_rule(rule_from_theorem(&name, &body)) {
                    self.report
                        .warnings
                        .push(format!("{name}: no rewrite rule stored: {e}"));
                }
            }
        }
        self.report.theorems.push(TheoremReport {
            name,
            goal,
            outcome,
        });
        Ok(proved)
    }
}

/// Processes the events of one source text.
pub fn run_source(path: &Path, src: &str, flags: &Flags) -> FileReport {
    run_source_world(path, src, flags).0
}

/// Like [`run_source`], also returning the final world.
pub fn run_source_world(path: &Path, src: &str, flags: &Flags) -> (FileReport, World) {
    let mut s = Session {
        world: World::new(),
        flags: flags.clone(),
        report: FileReport {
            path: path.to_path_buf(),
            ..FileReport::default()
        },
    };
    let forms = match sexpr::parse(src) {
        Ok(f) => f,
        Err(e) => {
            s.report.error = Some(e.to_string());
            return (s.report, s.world);
        }
    };
    for form in &forms {
        match s.event(form) {
            Ok(true) => {}
            Ok(false) if flags.stop_on_failure => break,
            Ok(false) => {}
            Err(e) => {
                s.report.error = Some(e.to_string());
                break;
            }
        }
    }
    (s.report, s.world)
}

pub fn run(files: &[PathBuf], flags: &Flags) -> RunReport {
    let mut report = RunReport::default();
    for path in files {
        let file = match std::fs::read_to_string(path) {
            Ok(src) => run_source(path, &src, flags),
            Err(source) => FileReport {
                path: path.clone(),
                error: Some(
                    EventError::Io {
                        path: path.display().to_string(),
                        source,
                    }
                    .to_string(),
                ),
                ..FileReport::default()
            },
        };
        let stop = flags.stop_on_failure && file.theorems.iter().any(|t| !t.proved());
        report.files.push(file);
        if stop {
            break;
        }
    }
    report
}

/// Standard-output text for a run.
pub fn report(r: &RunReport, flags: &Flags) -> String {
    let mut out = String::new();
    for t in r.theorems() {
        let status = if t.proved() { "PROVED" } else { "FAILED" };
        if flags.trace {
            let _ = writeln!(out, "THEOREM {}", t.name);
            for e in &t.outcome.trace {
                let _ = writeln!(out, "{e}");
            }
        }
        let _ = writeln!(out, "{status} {} ({} steps)", t.name, t.outcome.steps);
        if flags.checkpoints {
            for c in t.outcome.checkpoints() {
                let _ = write!(out, "CHECKPOINT {}", c.name);
                if !c.labels.is_empty() {
                    let _ = write!(out, " [{}]", c.labels.join(" "));
                }
                let _ = writeln!(out);
                let _ = writeln!(out, "  {}", c.clause);
            }
        }
    }
    let total = r.theorems().count();
    let proved = r.theorems().filter(|t| t.proved()).count();
    let _ = writeln!(out, "PROVED {proved}/{total}");
    out
}

/// Standard-error text: warnings, proof diagnostics and event errors.
pub fn diagnostics(r: &RunReport) -> String {
    let mut out = String::new();
    for f in &r.files {
        let path = f.path.display();
        for w in &f.warnings {
            let _ = writeln!(out, "{path}: warning: {w}");
        }
        for t in &f.theorems {
            for c in t.outcome.checkpoints() {
                if let Some(d) = &c.diagnostic {
                    let _ = writeln!(out, "{path}: {} {}: {d}", t.name, c.name);
                }
            }
        }
        if let Some(e) = &f.error {
            let _ = writeln!(out, "{path}: error: {e}");
        }
    }
    out
}
