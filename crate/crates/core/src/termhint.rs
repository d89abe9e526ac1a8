//! Hint terms that are simplified together with the goal.
//!
//! `(USE-TERMHINT form)` adds the hypothesis `(USE-TERMHINT-HYP form)` to
//! the goal and installs a computed hint that waits for the goal to be
//! stable under simplification. At that point the simplified argument of
//! the hypothesis is read back into a hint by [`process_termhint`], the
//! hypothesis is dropped by a clause processor, and the hint is issued.

use thiserror::Error;

use crate::hints::{HintContext, HintError, HintEvaluator, Hint, UseInstance, parse_hint};
use crate::rewrite::Clause;
use crate::sexpr::SExpr;
use crate::term::{translate, unparse, Term};
use crate::world::{HintFn, World};

pub const USE_TERMHINT: &str = "USE-TERMHINT";
pub const USE_TERMHINT_HYP: &str = "USE-TERMHINT-HYP";
pub const USE_TERMHINT_HYP_IS_TRUE: &str = "USE-TERMHINT-HYP-IS-TRUE";
pub const USE_TERMHINT_FIND_HINT: &str = "USE-TERMHINT-FIND-HINT";
pub const HQ: &str = "HQ";
pub const TERMHINT_SEQ: &str = "TERMHINT-SEQ";
pub const MARK_CLAUSE: &str = "MARK-CLAUSE";
pub const MARK_CLAUSE_IS_TRUE: &str = "MARK-CLAUSE-IS-TRUE";
pub const DROP_TERMHINT_HYP: &str = "DROP-TERMHINT-HYP";

/// Stubs, always-true theorems, the hyp-dropping clause processor and the
/// find-hint function. No rewrite rule may target the stubs.
pub fn install_prelude(world: &mut World) {
    for (name, arity) in [
        (USE_TERMHINT_HYP, 1),
        (HQ, 1),
        (MARK_CLAUSE, 1),
        (TERMHINT_SEQ, 2),
    ] {
        world.add_stub(name, arity).expect("prelude names are fresh");
        world.protect(name);
    }
    let x = || vec![Term::var("X")];
    world
        .add_theorem(USE_TERMHINT_HYP_IS_TRUE, Term::app(USE_TERMHINT_HYP, x()))
        .expect("fresh");
    world
        .add_theorem(MARK_CLAUSE_IS_TRUE, Term::app(MARK_CLAUSE, x()))
        .expect("fresh");
    world.add_clause_processor(DROP_TERMHINT_HYP);
    world
        .add_hint_fn(USE_TERMHINT_FIND_HINT, HintFn::Native { arity: 1 })
        .expect("fresh");
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermhintError {
    #[error("cannot interpret a call of {head} in hint term: {residual}")]
    Uninterpretable { head: String, residual: String },
    #[error("first argument of BINARY-APPEND is not a proper list: {0}")]
    AppendNotList(String),
    #[error("a hint may not carry its own :COMPUTED-HINT-REPLACEMENT inside TERMHINT-SEQ: {0}")]
    NestedReplacement(String),
}

/// The keyword list `(USE-TERMHINT form)` stands for.
pub fn use_termhint_form(hint_form: &SExpr) -> SExpr {
    let finder = SExpr::list([
        SExpr::sym("AND"),
        SExpr::sym("STABLE-UNDER-SIMPLIFICATIONP"),
        SExpr::list([SExpr::sym(USE_TERMHINT_FIND_HINT), SExpr::sym("CLAUSE")]),
    ]);
    let instance = SExpr::list([
        SExpr::keyword("INSTANCE"),
        SExpr::sym(USE_TERMHINT_HYP_IS_TRUE),
        SExpr::list([SExpr::sym("X"), hint_form.clone()]),
    ]);
    SExpr::list([
        SExpr::keyword("COMPUTED-HINT-REPLACEMENT"),
        SExpr::list([finder]),
        SExpr::keyword("USE"),
        SExpr::list([instance]),
    ])
}

pub fn use_termhint(hint_form: &SExpr, world: &World) -> Result<Hint, HintError> {
    parse_hint(&use_termhint_form(hint_form), world)
}

/// `(TERMHINT-SEQ h1 (HIDE h2))`
pub fn termhint_seq_macro(h1: &SExpr, h2: &SExpr) -> SExpr {
    SExpr::list([
        SExpr::sym(TERMHINT_SEQ),
        h1.clone(),
        SExpr::list([SExpr::sym("HIDE"), h2.clone()]),
    ])
}

/// Interprets a simplified hint term built from `QUOTE`, `CONS`,
/// `BINARY-APPEND` and `HQ`.
pub fn process_termhint(t: &Term) -> Result<SExpr, TermhintError> {
    match t {
        Term::Const(v) => Ok(v.clone()),
        Term::App(f, args) if f == HQ => Ok(unparse(&args[0])),
        Term::App(f, args) if f == "CONS" => Ok(SExpr::cons(
            process_termhint(&args[0])?,
            process_termhint(&args[1])?,
        )),
        Term::App(f, args) if f == "BINARY-APPEND" => {
            let front = process_termhint(&args[0])?;
            let items = front
                .to_vec()
                .ok_or_else(|| TermhintError::AppendNotList(t.to_string()))?;
            Ok(SExpr::list_with_tail(items, process_termhint(&args[1])?))
        }
        Term::App(f, _) => Err(TermhintError::Uninterpretable {
            head: f.clone(),
            residual: t.to_string(),
        }),
        Term::Var(v) => Err(TermhintError::Uninterpretable {
            head: v.clone(),
            residual: t.to_string(),
        }),
        Term::Lambda { .. } => Err(TermhintError::Uninterpretable {
            head: "LAMBDA".into(),
            residual: t.to_string(),
        }),
    }
}

/// Quotes a value that would otherwise start with a keyword, so that the
/// second evaluation yields the keyword list itself.
pub fn keyword_fixup(v: SExpr) -> SExpr {
    if crate::hints::is_keyword_list(&v) {
        SExpr::quote(v)
    } else {
        v
    }
}

/// The argument of a `(NOT (USE-TERMHINT-HYP arg))` literal.
fn hyp_argument(lit: &SExpr) -> Option<&SExpr> {
    let parts = lit.to_vec()?;
    if parts.len() != 2 || !parts[0].is_symbol("NOT") {
        return None;
    }
    let inner = lit.cdr()?.car()?;
    match inner.to_vec().as_deref() {
        Some([head, _]) if head.is_symbol(USE_TERMHINT_HYP) => inner.cdr()?.car(),
        _ => None,
    }
}

/// Reads one hint term back into keyword/value items; empty for NIL.
fn extract(
    t: &Term,
    ev: &mut HintEvaluator<'_>,
    ctx: &HintContext<'_>,
) -> Result<Vec<SExpr>, HintError> {
    let v = keyword_fixup(process_termhint(t)?);
    if v.is_nil() {
        return Ok(vec![]);
    }
    Ok(ev
        .eval_hint_value(&v, ctx)?
        .map(|kw| kw.to_vec().expect("keyword lists are proper"))
        .unwrap_or_default())
}

/// The value of `(USE-TERMHINT-FIND-HINT CLAUSE)`: NIL when the clause has
/// no termhint hypothesis, otherwise a keyword list that issues the
/// extracted hint and drops the hypothesis.
pub fn find_hint_value(
    clause: &SExpr,
    ev: &mut HintEvaluator<'_>,
    ctx: &HintContext<'_>,
) -> Result<SExpr, HintError> {
    let Some(arg) = clause.iter().find_map(hyp_argument) else {
        return Ok(SExpr::Nil);
    };
    let term = translate(arg, ev.world)?;
    let drop = [SExpr::keyword("CLAUSE-PROCESSOR"), SExpr::sym(DROP_TERMHINT_HYP)];
    let mut items = Vec::new();
    match term.call_of(TERMHINT_SEQ) {
        Some([first, second]) => {
            let rest = match second.call_of("HIDE") {
                Some([inner]) => inner,
                _ => second,
            };
            let base = extract(first, ev, ctx)?;
            if base.first() == Some(&SExpr::keyword("COMPUTED-HINT-REPLACEMENT")) {
                return Err(TermhintError::NestedReplacement(SExpr::list(base).to_string()).into());
            }
            items.push(SExpr::keyword("COMPUTED-HINT-REPLACEMENT"));
            items.push(SExpr::list([SExpr::list([
                SExpr::sym(USE_TERMHINT),
                unparse(rest),
            ])]));
            items.extend(base);
        }
        _ => items.extend(extract(&term, ev, ctx)?),
    }
    items.extend(drop);
    Ok(SExpr::list(items))
}

/// `find_hint_value` parsed into a hint.
pub fn find_hint(
    clause: &Clause,
    id: &str,
    world: &World,
    fuel: u64,
) -> Result<Option<Hint>, HintError> {
    let ctx = HintContext {
        clause,
        id,
        stable: true,
    };
    let mut ev = HintEvaluator::new(world, fuel);
    let v = find_hint_value(&clause.to_sexpr(), &mut ev, &ctx)?;
    if v.is_nil() {
        Ok(None)
    } else {
        parse_hint(&v, world).map(Some)
    }
}

fn is_termhint_hyp(lit: &Term) -> bool {
    lit.negated()
        .is_some_and(|h| h.call_of(USE_TERMHINT_HYP).is_some())
}

/// Removes every `(NOT (USE-TERMHINT-HYP _))` literal.
pub fn drop_termhint_hyp(c: &Clause) -> Clause {
    Clause::new(
        c.literals
            .iter()
            .filter(|l| !is_termhint_hyp(l))
            .cloned()
            .collect(),
    )
}

pub fn has_termhint_hyp(c: &Clause) -> bool {
    c.literals.iter().any(is_termhint_hyp)
}

/// A `:use` of `MARK-CLAUSE-IS-TRUE` labelling the goal with `label`.
pub fn mark_clause_hint(label: &str) -> Hint {
    Hint::Use(vec![UseInstance {
        theorem: MARK_CLAUSE_IS_TRUE.to_string(),
        subst: vec![("X".to_string(), Term::quoted_sym(label))],
    }])
}

/// Labels from `(NOT (MARK-CLAUSE 'label))` hypotheses, in clause order.
pub fn mark_clause_labels(c: &Clause) -> Vec<String> {
    c.literals
        .iter()
        .filter_map(|l| match l.negated()?.call_of(MARK_CLAUSE)? {
            [Term::Const(v)] => Some(v.to_string()),
            [other] => Some(other.to_string()),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hints::{apply_hint, Goal};
    use crate::sexpr::parse_one;
    use crate::term::beta_reduce;

    fn world() -> World {
        let mut w = World::new();
        for (f, a) in [("FOO", 2), ("BAR", 2), ("BAZ", 2), ("FA", 2), ("P", 1)] {
            w.add_stub(f, a).unwrap();
        }
        w
    }

    fn tr(w: &World, s: &str) -> Term {
        beta_reduce(&translate(&parse_one(s).unwrap(), w).unwrap())
    }

    #[test]
    fn interprets_else_branch_hint() {
        let w = world();
        let t = tr(
            &w,
            "(let* ((f (foo a b)) (g (bar f c)) (h (baz f d))) `'(:expand ((fa ,(hq g) ,(hq h)))))",
        );
        let v = process_termhint(&t).unwrap();
        assert_eq!(
            v.to_string(),
            "(QUOTE (:EXPAND ((FA (BAR (FOO A B) C) (BAZ (FOO A B) D)))))"
        );
        assert_eq!(keyword_fixup(v.clone()), v);
    }

    #[test]
    fn hq_passes_term_through() {
        let w = world();
        let t = tr(&w, "(hq (bar (foo a b) c))");
        assert_eq!(process_termhint(&t).unwrap().to_string(), "(BAR (FOO A B) C)");
    }

    #[test]
    fn uninterpretable_head() {
        let w = world();
        let err = process_termhint(&tr(&w, "(baz x x)")).unwrap_err();
        assert!(matches!(err, TermhintError::Uninterpretable { ref head, .. } if head == "BAZ"));
        let err = process_termhint(&tr(&w, "(binary-append 'a 'nil)")).unwrap_err();
        assert!(matches!(err, TermhintError::AppendNotList(_)));
    }

    #[test]
    fn append_from_splicing() {
        let w = world();
        let t = tr(&w, "(let ((xs '(a b))) `(:expand (,@xs c)))");
        assert_eq!(process_termhint(&t).unwrap().to_string(), "(:EXPAND (A B C))");
    }

    #[test]
    fn keyword_fixup_cases() {
        let kw = parse_one("(:expand ((f x)))").unwrap();
        assert_eq!(keyword_fixup(kw.clone()), SExpr::quote(kw.clone()));
        let q = SExpr::quote(kw);
        assert_eq!(keyword_fixup(q.clone()), q);
        assert_eq!(keyword_fixup(SExpr::Nil), SExpr::Nil);
    }

    fn clause(w: &World, lits: &[&str]) -> Clause {
        Clause::new(lits.iter().map(|l| tr(w, l)).collect())
    }

    #[test]
    fn find_hint_extracts_and_drops() {
        let w = world();
        let c = clause(
            &w,
            &[
                "(p (fa (bar (foo a b) c) (baz (foo a b) d)))",
                "(not (use-termhint-hyp (cons 'quote (cons (cons ':expand (cons (cons (cons 'fa (cons (hq (bar (foo a b) c)) (cons (hq (baz (foo a b) d)) 'nil))) 'nil) 'nil)) 'nil))))",
            ],
        );
        let h = find_hint(&c, "Goal", &w, 10_000).unwrap().unwrap();
        assert_eq!(
            h.to_string(),
            "(:EXPAND ((FA (BAR (FOO A B) C) (BAZ (FOO A B) D))) :CLAUSE-PROCESSOR DROP-TERMHINT-HYP)"
        );
    }

    #[test]
    fn find_hint_without_hyp() {
        let w = world();
        let c = clause(&w, &["(p x)"]);
        assert_eq!(find_hint(&c, "Goal", &w, 100).unwrap(), None);
    }

    #[test]
    fn nil_hint_only_drops() {
        let w = world();
        let c = clause(&w, &["(p x)", "(not (use-termhint-hyp 'nil))"]);
        let h = find_hint(&c, "Goal", &w, 100).unwrap().unwrap();
        assert_eq!(h.to_string(), "(:CLAUSE-PROCESSOR DROP-TERMHINT-HYP)");
        let goal = Goal {
            name: "Goal".into(),
            clause: c,
            theory: w.theory.clone(),
            pending: vec![],
        };
        let applied = apply_hint(&h, &goal, &w).unwrap();
        assert_eq!(applied.clause.to_string(), "((P X))");
    }

    #[test]
    fn seq_stages() {
        let w = world();
        let c = clause(
            &w,
            &["(p x)", "(not (use-termhint-hyp (termhint-seq ''(:expand ((p x))) (if (p y) ''(:expand ((p y))) 'nil))))"],
        );
        let h = find_hint(&c, "Goal", &w, 1000).unwrap().unwrap();
        assert_eq!(
            h.to_sexpr().print(true),
            "(:COMPUTED-HINT-REPLACEMENT ((USE-TERMHINT (IF (P Y) ''(:EXPAND ((P Y))) NIL))) :EXPAND ((P X)) :CLAUSE-PROCESSOR DROP-TERMHINT-HYP)"
        );
    }

    #[test]
    fn drop_removes_all_hyps() {
        let w = world();
        let c = clause(
            &w,
            &["(not (use-termhint-hyp a))", "(p x)", "(not (use-termhint-hyp b))"],
        );
        assert_eq!(drop_termhint_hyp(&c).to_string(), "((P X))");
        let plain = clause(&w, &["(p x)"]);
        assert_eq!(drop_termhint_hyp(&plain), plain);
    }

    #[test]
    fn seq_macro_shape() {
        let h1 = parse_one("''(:in-theory (enable r1))").unwrap();
        let h2 = parse_one("(if a 'x 'y)").unwrap();
        assert_eq!(
            termhint_seq_macro(&h1, &h2).print(true),
            "(TERMHINT-SEQ ''(:IN-THEORY (ENABLE R1)) (HIDE (IF A 'X 'Y)))"
        );
    }

    #[test]
    fn mark_clause_labels_are_reported() {
        let w = world();
        let goal = Goal {
            name: "Goal".into(),
            clause: clause(&w, &["(p x)"]),
            theory: w.theory.clone(),
            pending: vec![],
        };
        let applied = apply_hint(&mark_clause_hint("MY-SPECIAL-CASE"), &goal, &w).unwrap();
        assert_eq!(
            applied.clause.to_string(),
            "((P X) (NOT (MARK-CLAUSE (QUOTE MY-SPECIAL-CASE))))"
        );
        assert_eq!(mark_clause_labels(&applied.clause), ["MY-SPECIAL-CASE"]);
    }

    #[test]
    fn prelude_stubs_reject_rules() {
        let mut w = world();
        let r = crate::world::RewriteRule {
            name: "BAD".into(),
            hyps: vec![],
            equiv: crate::world::Equiv::Iff,
            lhs: tr(&w, "(use-termhint-hyp x)"),
            rhs: Term::t(),
        };
        assert!(w.add_rule(r).is_err());
    }
}
