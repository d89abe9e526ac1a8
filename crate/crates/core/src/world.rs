//! The logical world: function signatures, definitions, theorems, rewrite
//! rules, the current theory and the registered hint machinery.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::term::Term;

/// Built-in functions with their arities. These have evaluation rules and
/// are folded on constant arguments by the rewriter.
pub const BUILTINS: &[(&str, usize)] = &[
    ("CONS", 2),
    ("CAR", 1),
    ("CDR", 1),
    ("CONSP", 1),
    ("ATOM", 1),
    ("EQUAL", 2),
    ("NOT", 1),
    ("IF", 3),
    ("IMPLIES", 2),
    ("BINARY-APPEND", 2),
    ("LEN", 1),
    ("MEMBER-EQUAL", 2),
    ("HIDE", 1),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Definition {
    pub name: String,
    pub formals: Vec<String>,
    pub body: Term,
    pub normalized: bool,
    pub recursive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FunctionKind {
    Builtin,
    Stub,
    Defined(Definition),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub arity: usize,
    pub kind: FunctionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equiv {
    Equal,
    Iff,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteRule {
    pub name: String,
    pub hyps: Vec<Term>,
    pub equiv: Equiv,
    pub lhs: Term,
    pub rhs: Term,
}

/// Names of enabled rules and definitions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Theory {
    pub enabled: BTreeSet<String>,
}

impl Theory {
    pub fn is_enabled(&self, name: &str) -> bool {
        self.enabled.contains(name)
    }

    pub fn enable<'a>(&mut self, names: impl IntoIterator<Item = &'a String>) {
        self.enabled.extend(names.into_iter().cloned());
    }

    pub fn disable<'a>(&mut self, names: impl IntoIterator<Item = &'a String>) {
        for n in names {
            self.enabled.remove(n);
        }
    }
}

/// A function callable from computed hints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HintFn {
    /// Implemented natively; `USE-TERMHINT-FIND-HINT` is the only one.
    Native { arity: usize },
    /// User-registered: a body over its formals.
    User { formals: Vec<String>, body: Term },
}

impl HintFn {
    pub fn arity(&self) -> usize {
        match self {
            HintFn::Native { arity } => *arity,
            HintFn::User { formals, .. } => formals.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("name {0} is already in use")]
    Redefinition(String),
    #[error("{name}: free variables {vars:?} of the right-hand side or hypotheses do not occur in the left-hand side")]
    FreeVariableRule { name: String, vars: Vec<String> },
    #[error("{0} cannot be used as a rewrite rule")]
    BadRuleShape(String),
    #[error("unknown rule or function {0} in theory expression")]
    UnknownRuleName(String),
    #[error("{0} is built in and cannot be the target of a rewrite rule")]
    ProtectedTarget(String),
}

#[derive(Debug, Clone)]
pub struct World {
    functions: BTreeMap<String, Function>,
    theorems: BTreeMap<String, Term>,
    rules: Vec<RewriteRule>,
    hint_fns: BTreeMap<String, HintFn>,
    clause_processors: BTreeSet<String>,
    /// Functions no rewrite rule may target.
    protected: BTreeSet<String>,
    pub theory: Theory,
}

impl Default for World {
    fn default() -> Self {
        Self::new()
    }
}

impl World {
    /// A world holding the built-ins and the termhint prelude.
    pub fn new() -> World {
        let mut w = World::bare();
        crate::termhint::install_prelude(&mut w);
        w
    }

    /// Built-ins only, without the prelude.
    pub fn bare() -> World {
        let functions = BUILTINS
            .iter()
            .map(|&(n, a)| {
                (
                    n.to_string(),
                    Function {
                        arity: a,
                        kind: FunctionKind::Builtin,
                    },
                )
            })
            .collect();
        World {
            functions,
            theorems: BTreeMap::new(),
            rules: Vec::new(),
            hint_fns: BTreeMap::new(),
            clause_processors: BTreeSet::new(),
            protected: BTreeSet::new(),
            theory: Theory::default(),
        }
    }

    fn check_fresh(&self, name: &str) -> Result<(), WorldError> {
        if self.functions.contains_key(name) || self.hint_fns.contains_key(name) {
            Err(WorldError::Redefinition(name.to_string()))
        } else {
            Ok(())
        }
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.get(name)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.functions.get(name).map(|f| f.arity)
    }

    pub fn definition(&self, name: &str) -> Option<&Definition> {
        match self.functions.get(name) {
            Some(Function {
                kind: FunctionKind::Defined(d),
                ..
            }) => Some(d),
            _ => None,
        }
    }

    pub fn is_builtin(&self, name: &str) -> bool {
        matches!(
            self.functions.get(name),
            Some(Function {
                kind: FunctionKind::Builtin,
                ..
            })
        )
    }

    pub fn add_stub(&mut self, name: &str, arity: usize) -> Result<(), WorldError> {
        self.check_fresh(name)?;
        self.functions.insert(
            name.to_string(),
            Function {
                arity,
                kind: FunctionKind::Stub,
            },
        );
        Ok(())
    }

    /// Declares a function's arity before its body is translated, so that
    /// recursive calls translate.
    pub fn declare_function(&mut self, name: &str, arity: usize) -> Result<(), WorldError> {
        self.add_stub(name, arity)
    }

    /// Installs a definition for a previously declared (or new) function.
    /// The definition rule is enabled when `enabled` is set.
    pub fn add_definition(&mut self, def: Definition, enabled: bool) {
        let name = def.name.clone();
        self.functions.insert(
            name.clone(),
            Function {
                arity: def.formals.len(),
                kind: FunctionKind::Defined(def),
            },
        );
        if enabled {
            self.theory.enabled.insert(name);
        }
    }

    pub fn remove_function(&mut self, name: &str) {
        self.functions.remove(name);
    }

    pub fn protect(&mut self, name: &str) {
        self.protected.insert(name.to_string());
    }

    pub fn is_protected(&self, name: &str) -> bool {
        self.protected.contains(name)
    }

    pub fn add_theorem(&mut self, name: &str, body: Term) -> Result<(), WorldError> {
        if self.theorems.contains_key(name) {
            return Err(WorldError::Redefinition(name.to_string()));
        }
        self.theorems.insert(name.to_string(), body);
        Ok(())
    }

    pub fn theorem(&self, name: &str) -> Option<&Term> {
        self.theorems.get(name)
    }

    /// Adds an enabled rewrite rule, checking the free-variable condition.
    pub fn add_rule(&mut self, rule: RewriteRule) -> Result<(), WorldError> {
        if let Term::App(f, _) = &rule.lhs {
            if self.is_protected(f) || f == "IF" || f == "HIDE" {
                return Err(WorldError::ProtectedTarget(f.clone()));
            }
        } else {
            return Err(WorldError::BadRuleShape(rule.name));
        }
        let lhs_vars = rule.lhs.free_vars();
        let mut extra: Vec<String> = rule
            .hyps
            .iter()
            .chain(std::iter::once(&rule.rhs))
            .flat_map(|t| t.free_vars())
            .filter(|v| !lhs_vars.contains(v))
            .collect();
        extra.dedup();
        if !extra.is_empty() {
            return Err(WorldError::FreeVariableRule {
                name: rule.name,
                vars: extra,
            });
        }
        self.theory.enabled.insert(rule.name.clone());
        self.rules.push(rule);
        Ok(())
    }

    /// Rules in definition order.
    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn has_rule_name(&self, name: &str) -> bool {
        self.rules.iter().any(|r| r.name == name) || self.definition(name).is_some()
    }

    pub fn add_hint_fn(&mut self, name: &str, f: HintFn) -> Result<(), WorldError> {
        self.check_fresh(name)?;
        self.hint_fns.insert(name.to_string(), f);
        Ok(())
    }

    pub fn hint_fn(&self, name: &str) -> Option<&HintFn> {
        self.hint_fns.get(name)
    }

    pub fn add_clause_processor(&mut self, name: &str) {
        self.clause_processors.insert(name.to_string());
    }

    pub fn has_clause_processor(&self, name: &str) -> bool {
        self.clause_processors.contains(name)
    }

    /// Resolves names for `(ENABLE ...)` / `(DISABLE ...)`.
    pub fn check_rule_names(&self, names: &BTreeSet<String>) -> Result<(), WorldError> {
        for n in names {
            if !self.has_rule_name(n) {
                return Err(WorldError::UnknownRuleName(n.clone()));
            }
        }
        Ok(())
    }
}
