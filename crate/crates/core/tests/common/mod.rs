#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use termhint::cli::{run_source_world, FileReport, Flags};
use termhint::hints::EventKind;
use termhint::rewrite::{simplify_clause, Clause};
use termhint::sexpr::{self, SExpr};
use termhint::term::{translate, Term};
use termhint::world::{Theory, World};

pub const CORPUS_FILES: &[&str] = &[
    "trivial.lisp",
    "pipeline.lisp",
    "robust-member-plain.lisp",
    "robust-member-changed.lisp",
    "robust-termhint-plain.lisp",
    "robust-termhint-changed.lisp",
    "seq-explicit.lisp",
    "seq-normalized.lisp",
    "seq-no-normalize.lisp",
    "nil-hint.lisp",
    "mark-clause.lisp",
];

pub fn corpus_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn all_corpus_paths() -> Vec<PathBuf> {
    CORPUS_FILES.iter().map(|f| corpus_path(f)).collect()
}

pub fn load(name: &str) -> (FileReport, World) {
    let path = corpus_path(name);
    let src = std::fs::read_to_string(&path).expect("corpus file");
    run_source_world(&path, &src, &Flags::default())
}

/// Trace lines of every theorem in the file.
pub fn trace_lines(r: &FileReport) -> Vec<String> {
    r.theorems
        .iter()
        .flat_map(|t| t.outcome.trace.iter().map(|e| e.to_string()))
        .collect()
}

pub fn parse(s: &str) -> SExpr {
    sexpr::parse_one(s).expect("test input parses")
}

pub fn tr(s: &str, w: &World) -> Term {
    translate(&parse(s), w).expect("test input translates")
}

/// Every clause a corpus proof passed through, translated back from the
/// trace, plus the initial goals.
pub fn corpus_clauses() -> Vec<(World, Clause)> {
    let mut out = Vec::new();
    for name in CORPUS_FILES {
        let (report, world) = load(name);
        for t in &report.theorems {
            out.push((world.clone(), t.goal.clone()));
            for e in &t.outcome.trace {
                if matches!(
                    e.kind,
                    EventKind::Simplify | EventKind::Checkpoint | EventKind::Proved
                ) {
                    let lits = e
                        .payload
                        .iter()
                        .map(|l| translate(l, &world).expect("trace literal translates"))
                        .collect();
                    out.push((world.clone(), Clause::new(lits)));
                }
            }
        }
    }
    out
}

/// Simplifies until no clause changes; returns the leaves.
pub fn simplify_to_fixpoint(
    c: &Clause,
    theory: &Theory,
    world: &World,
    fuel: u64,
    max_rounds: usize,
) -> Option<Vec<Clause>> {
    let mut work = vec![c.clone()];
    let mut done = Vec::new();
    let mut rounds = 0;
    while let Some(c) = work.pop() {
        rounds += 1;
        if rounds > max_rounds {
            return None;
        }
        let (cs, changed) = simplify_clause(&c, theory, world, fuel).ok()?;
        if changed {
            work.extend(cs);
        } else {
            done.push(c);
        }
    }
    Some(done)
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

fn truthy(v: &SExpr) -> bool {
    !matches!(v, SExpr::Nil)
}

fn boolean(b: bool) -> SExpr {
    if b {
        SExpr::sym("T")
    } else {
        SExpr::Nil
    }
}

fn list_items(v: &SExpr) -> Option<Vec<SExpr>> {
    let mut out = Vec::new();
    let mut cur = v;
    loop {
        match cur {
            SExpr::Nil => return Some(out),
            SExpr::Pair(a, d) => {
                out.push((**a).clone());
                cur = d;
            }
            _ => return None,
        }
    }
}

/// A direct evaluator for the functions the generated terms use.
pub fn oracle_eval(t: &Term, env: &BTreeMap<String, SExpr>) -> SExpr {
    match t {
        Term::Const(v) => v.clone(),
        Term::Var(x) => env.get(x).cloned().expect("bound variable"),
        Term::Lambda {
            formals,
            body,
            actuals,
        } => {
            let inner = formals
                .iter()
                .cloned()
                .zip(actuals.iter().map(|a| oracle_eval(a, env)))
                .collect();
            oracle_eval(body, &inner)
        }
        Term::App(f, args) => {
            if f == "IF" {
                return if truthy(&oracle_eval(&args[0], env)) {
                    oracle_eval(&args[1], env)
                } else {
                    oracle_eval(&args[2], env)
                };
            }
            let v: Vec<SExpr> = args.iter().map(|a| oracle_eval(a, env)).collect();
            match f.as_str() {
                "NOT" => boolean(!truthy(&v[0])),
                "CONS" => SExpr::Pair(v[0].clone().into(), v[1].clone().into()),
                "CAR" => match &v[0] {
                    SExpr::Pair(a, _) => (**a).clone(),
                    _ => SExpr::Nil,
                },
                "CDR" => match &v[0] {
                    SExpr::Pair(_, d) => (**d).clone(),
                    _ => SExpr::Nil,
                },
                "CONSP" => boolean(matches!(v[0], SExpr::Pair(..))),
                "EQUAL" => boolean(v[0] == v[1]),
                "BINARY-APPEND" => {
                    let mut items = list_items(&v[0]).unwrap_or_default();
                    let mut tail = v[1].clone();
                    while let Some(x) = items.pop() {
                        tail = SExpr::Pair(x.into(), tail.into());
                    }
                    tail
                }
                other => panic!("oracle has no rule for {other}"),
            }
        }
    }
}

/// Truth value of a clause: some literal is non-NIL.
pub fn clause_holds(c: &Clause, env: &BTreeMap<String, SExpr>) -> bool {
    c.literals.iter().any(|l| truthy(&oracle_eval(l, env)))
}

pub const ATOMS: &[&str] = &["A", "B", "C", "D"];

/// All 16 boolean assignments of A..D.
pub fn assignments() -> Vec<BTreeMap<String, SExpr>> {
    (0..16u32)
        .map(|bits| {
            ATOMS
                .iter()
                .enumerate()
                .map(|(i, a)| (a.to_string(), boolean(bits & (1 << i) != 0)))
                .collect()
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Quasiquote templates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Tmpl {
    Atom(SExpr),
    List(Vec<Slot>),
}

#[derive(Debug, Clone)]
pub enum Slot {
    Elem(Tmpl),
    /// `,x`; the payload is the surface form placed after the comma.
    Unquote(SExpr),
    /// `,@x` with a quoted list.
    Splice(Vec<SExpr>),
}

fn mark(head: &str, x: SExpr) -> SExpr {
    SExpr::list([SExpr::sym(head), x])
}

impl Tmpl {
    /// The body of the backquote, with unquote markers.
    pub fn surface(&self) -> SExpr {
        match self {
            Tmpl::Atom(a) => a.clone(),
            Tmpl::List(slots) => SExpr::list(
                slots
                    .iter()
                    .map(|s| match s {
                        Slot::Elem(t) => t.surface(),
                        Slot::Unquote(x) => mark("UNQUOTE", x.clone()),
                        Slot::Splice(vs) => {
                            mark("UNQUOTE-SPLICING", SExpr::quote(SExpr::list(vs.clone())))
                        }
                    })
                    .collect::<Vec<_>>(),
            ),
        }
    }

    pub fn backquoted(&self) -> SExpr {
        mark("QUASIQUOTE", self.surface())
    }

    /// The template with each unquote replaced by `value(x)` and each splice
    /// inlined.
    pub fn fill(&self, value: &dyn Fn(&SExpr) -> SExpr) -> SExpr {
        match self {
            Tmpl::Atom(a) => a.clone(),
            Tmpl::List(slots) => {
                let mut items = Vec::new();
                for s in slots {
                    match s {
                        Slot::Elem(t) => items.push(t.fill(value)),
                        Slot::Unquote(x) => items.push(value(x)),
                        Slot::Splice(vs) => items.extend(vs.iter().cloned()),
                    }
                }
                SExpr::list(items)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Strategies
// ---------------------------------------------------------------------------

pub fn symbol_name() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("FOO".to_string()),
        Just("BAR".to_string()),
        Just("X".to_string()),
        "[A-Z][A-Z0-9*+-]{0,6}".prop_filter("not a number or reserved", |s| {
            !s.starts_with(['+', '-'])
                && !["NIL", "QUOTE", "QUASIQUOTE", "UNQUOTE", "UNQUOTE-SPLICING"]
                    .contains(&s.as_str())
        }),
    ]
}

pub fn atom() -> impl Strategy<Value = SExpr> {
    prop_oneof![
        Just(SExpr::Nil),
        symbol_name().prop_map(|s| SExpr::sym(&s)),
        "[A-Z][A-Z-]{0,5}".prop_map(|s| SExpr::keyword(&s)),
        any::<i64>().prop_map(SExpr::int),
        "[a-z \"\\\\]{0,6}".prop_map(SExpr::Str),
    ]
}

/// Arbitrary data, including dotted pairs and quote-family marks.
pub fn sexpr() -> impl Strategy<Value = SExpr> {
    atom().prop_recursive(4, 48, 5, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..5).prop_map(SExpr::list),
            (prop::collection::vec(inner.clone(), 1..4), inner.clone())
                .prop_map(|(items, tail)| SExpr::list_with_tail(items, tail)),
            (
                prop::sample::select(vec!["QUOTE", "QUASIQUOTE", "UNQUOTE", "UNQUOTE-SPLICING"]),
                inner
            )
                .prop_map(|(h, x)| mark(h, x)),
        ]
    })
}

/// Constant data without quote-family marks, for template atoms and values.
pub fn plain_data() -> impl Strategy<Value = SExpr> {
    let leaf = prop_oneof![
        Just(SExpr::Nil),
        prop::sample::select(vec!["A", "B", "FA", "EXPAND", "USE"]).prop_map(SExpr::sym),
        prop::sample::select(vec!["EXPAND", "USE", "IN-THEORY"]).prop_map(SExpr::keyword),
        (0i64..100).prop_map(SExpr::int),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop::collection::vec(inner, 0..3).prop_map(SExpr::list)
    })
}

/// Depth-1 templates whose unquotes carry quoted constants.
pub fn const_template() -> impl Strategy<Value = Tmpl> {
    template_with(plain_data().prop_map(SExpr::quote).boxed())
}

/// Surface terms over X, Y and the stubs F/1, G/2.
pub fn stub_term() -> impl Strategy<Value = SExpr> {
    let leaf = prop_oneof![
        Just(SExpr::sym("X")),
        Just(SExpr::sym("Y")),
        (0i64..10).prop_map(SExpr::int),
        Just(SExpr::keyword("K")),
    ];
    leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| SExpr::list([SExpr::sym("F"), a])),
            (inner.clone(), inner).prop_map(|(a, b)| SExpr::list([SExpr::sym("G"), a, b])),
        ]
    })
}

pub fn stub_world() -> World {
    let mut w = World::new();
    w.add_stub("F", 1).unwrap();
    w.add_stub("G", 2).unwrap();
    w
}

/// Depth-1 templates whose unquotes are `(HQ term)`.
pub fn hq_template() -> impl Strategy<Value = Tmpl> {
    template_with(stub_term().prop_map(|t| SExpr::list([SExpr::sym("HQ"), t])).boxed())
}

fn template_with(unquoted: BoxedStrategy<SExpr>) -> impl Strategy<Value = Tmpl> {
    let leaf = plain_data().prop_filter("list atoms come through Tmpl::List", |d| !d.is_pair());
    leaf.prop_map(Tmpl::Atom).prop_recursive(3, 24, 4, move |inner| {
        let slot = prop_oneof![
            3 => inner.prop_map(Slot::Elem),
            2 => unquoted.clone().prop_map(Slot::Unquote),
            1 => prop::collection::vec(plain_data(), 0..3).prop_map(Slot::Splice),
        ];
        prop::collection::vec(slot, 0..4).prop_map(Tmpl::List)
    })
}

/// Propositional terms over A..D, depth ≤ 3.
pub fn bool_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        4 => prop::sample::select(ATOMS.to_vec()).prop_map(Term::var),
        1 => Just(Term::t()),
        1 => Just(Term::nil()),
    ];
    leaf.prop_recursive(3, 20, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), inner.clone())
                .prop_map(|(a, b, c)| Term::if_(a, b, c)),
            inner.prop_map(Term::not),
        ]
    })
}

pub fn bool_clause() -> impl Strategy<Value = Clause> {
    prop::collection::vec(bool_term(), 1..4).prop_map(Clause::new)
}

/// Ground terms over the list built-ins.
pub fn ground_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::nil()),
        Just(Term::t()),
        prop::sample::select(vec!["A", "B"]).prop_map(Term::quoted_sym),
        (0i64..3).prop_map(|n| Term::Const(SExpr::int(n))),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("CONS", vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("EQUAL", vec![a, b])),
            inner.clone().prop_map(|a| Term::app("CAR", vec![a])),
            inner.clone().prop_map(|a| Term::app("CDR", vec![a])),
            inner.clone().prop_map(|a| Term::app("CONSP", vec![a])),
            inner.clone().prop_map(Term::not),
            (inner.clone(), inner.clone(), inner).prop_map(|(a, b, c)| Term::if_(a, b, c)),
        ]
    })
}

/// Hint terms in the interpreter's language.
pub fn hint_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        plain_data().prop_map(Term::Const),
        stub_term().prop_map(|s| Term::app("HQ", vec![translate(&s, &stub_world()).unwrap()])),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::app("CONS", vec![a, b])),
            (inner.clone(), inner).prop_map(|(a, b)| Term::app("BINARY-APPEND", vec![a, b])),
        ]
    })
}

/// Terms over the robustness corpus signature, with IF and HIDE.
pub fn world_term() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        Just(Term::var("X")),
        Just(Term::var("Y")),
        Just(Term::nil()),
        Just(Term::quoted_sym("B")),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            (
                prop::sample::select(vec!["P", "NORM", "M1", "M2", "CHOOSE", "CAR", "CONSP", "NOT", "HIDE"]),
                inner.clone()
            )
                .prop_map(|(f, a)| Term::app(f, vec![a])),
            (prop::sample::select(vec!["CONS", "EQUAL"]), inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| Term::app(f, vec![a, b])),
            (inner.clone(), inner.clone(), inner).prop_map(|(a, b, c)| Term::if_(a, b, c)),
        ]
    })
}

/// Random subsets of the names a theory can enable.
pub fn theory_from(names: &[String], mask: u32) -> Theory {
    Theory {
        enabled: names
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << (i % 32)) != 0)
            .map(|(_, n)| n.clone())
            .collect(),
    }
}
