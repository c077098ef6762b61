//! Parser for the `:strips` + `:typing` PDDL subset.
//!
//! Anything outside the subset (numeric fluents, negative preconditions,
//! conditional or quantified effects, durative actions, `either` types, ...)
//! is rejected with a diagnostic naming the feature and its position.

use super::sexpr::{read_all, Pos, SExpr};
use super::{
    ActionSchema, Atom, DomainDef, LiftedAtom, LiftedTask, ObjectConst, PredicateSchema, Term, TypeTree, TypedParam,
    ROOT_TYPE,
};
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{pos}: {kind}")]
pub struct PddlError {
    pub pos: Pos,
    pub kind: PddlErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PddlErrorKind {
    #[error("syntax error: expected {expected}")]
    Syntax { expected: String },
    #[error("unsupported PDDL feature `{0}`")]
    Unsupported(String),
    #[error("undeclared type `{0}`")]
    UndeclaredType(String),
    #[error("undeclared predicate `{0}`")]
    UndeclaredPredicate(String),
    #[error("undeclared object `{0}`")]
    UndeclaredObject(String),
    #[error("undeclared variable `{0}`")]
    UndeclaredVariable(String),
    #[error("predicate `{predicate}` expects {expected} argument(s), got {found}")]
    Arity {
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("object `{object}` of type `{found}` does not match parameter type `{expected}`")]
    TypeMismatch {
        object: String,
        expected: String,
        found: String,
    },
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("problem refers to domain `{found}` but the domain is `{expected}`")]
    DomainMismatch { expected: String, found: String },
}

type Result<T> = std::result::Result<T, PddlError>;

fn err<T>(pos: Pos, kind: PddlErrorKind) -> Result<T> {
    Err(PddlError { pos, kind })
}

fn syntax<T>(pos: Pos, expected: &str) -> Result<T> {
    err(
        pos,
        PddlErrorKind::Syntax {
            expected: expected.to_string(),
        },
    )
}

fn read(text: &str) -> Result<Vec<SExpr>> {
    read_all(text).map_err(|e| PddlError {
        pos: e.pos,
        kind: PddlErrorKind::Syntax { expected: e.message },
    })
}

fn symbol<'a>(e: &'a SExpr, expected: &str) -> Result<&'a str> {
    match e.as_symbol() {
        Some(s) => Ok(s),
        None => syntax(e.pos(), expected),
    }
}

fn list<'a>(e: &'a SExpr, expected: &str) -> Result<&'a [SExpr]> {
    match e.as_list() {
        Some(l) => Ok(l),
        None => syntax(e.pos(), expected),
    }
}

/// Splits `(define (<kind> NAME) sections...)` into name and sections.
fn define_block<'a>(exprs: &'a [SExpr], kind: &str) -> Result<(String, &'a [SExpr])> {
    let top = match exprs {
        [one] => one,
        [] => return syntax(Pos { line: 1, col: 1 }, "`(define ...)`"),
        [_, extra, ..] => return syntax(extra.pos(), "end of input after `(define ...)`"),
    };
    let items = list(top, "`(define ...)`")?;
    if items.first().and_then(SExpr::as_symbol) != Some("define") {
        return syntax(top.pos(), "`define`");
    }
    let header = items
        .get(1)
        .ok_or(())
        .or_else(|_| syntax(top.pos(), &format!("`({kind} NAME)`")))?;
    let h = list(header, &format!("`({kind} NAME)`"))?;
    match h {
        [k, name] if k.as_symbol() == Some(kind) => Ok((symbol(name, "a name")?.to_string(), &items[2..])),
        _ => syntax(header.pos(), &format!("`({kind} NAME)`")),
    }
}

/// Parses `a b - t c - u d` into (name, type) pairs; untyped names default to `object`.
fn typed_list(items: &[SExpr], types: Option<&TypeTree>) -> Result<Vec<(String, String, Pos)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let it = &items[i];
        if it.as_symbol() == Some("-") {
            let ty_expr = items
                .get(i + 1)
                .ok_or(())
                .or_else(|_| syntax(it.pos(), "a type name after `-`"))?;
            if ty_expr.head() == Some("either") {
                return err(ty_expr.pos(), PddlErrorKind::Unsupported("either".into()));
            }
            let ty = symbol(ty_expr, "a type name")?;
            if let Some(tt) = types {
                if !tt.contains(ty) {
                    return err(ty_expr.pos(), PddlErrorKind::UndeclaredType(ty.into()));
                }
            }
            if pending.is_empty() {
                return syntax(it.pos(), "a name before `-`");
            }
            for (n, p) in pending.drain(..) {
                out.push((n, ty.to_string(), p));
            }
            i += 2;
        } else {
            pending.push((symbol(it, "a name")?.to_string(), it.pos()));
            i += 1;
        }
    }
    for (n, p) in pending {
        out.push((n, ROOT_TYPE.to_string(), p));
    }
    Ok(out)
}

fn check_requirements(items: &[SExpr]) -> Result<()> {
    for r in items {
        let name = symbol(r, "a requirement flag")?;
        match name {
            ":strips" | ":typing" => {}
            other => {
                return err(r.pos(), PddlErrorKind::Unsupported(other.to_string()));
            }
        }
    }
    Ok(())
}

/// Parses a domain file into a task fragment.
pub fn parse_domain(text: &str) -> Result<DomainDef> {
    let exprs = read(text)?;
    let (name, sections) = define_block(&exprs, "domain")?;
    let mut dom = DomainDef {
        name,
        types: TypeTree::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        schemas: Vec::new(),
    };
    // Types first so later sections can be validated regardless of order.
    for s in sections {
        if s.head() == Some(":types") {
            let items = &list(s, "a section")?[1..];
            for (t, parent, p) in typed_list(items, None)? {
                if t == ROOT_TYPE {
                    continue;
                }
                if dom.types.contains(&t) && dom.types.parent.get(&t) != Some(&parent) {
                    return err(p, PddlErrorKind::Duplicate(t));
                }
                dom.types.declare(&t, &parent);
            }
        }
    }
    for s in sections {
        if s.head() == Some(":types") {
            for (_, parent, p) in typed_list(&list(s, "a section")?[1..], None)? {
                if !dom.types.contains(&parent) {
                    return err(p, PddlErrorKind::UndeclaredType(parent));
                }
            }
        }
    }

    let mut seen_actions = HashSet::new();
    for s in sections {
        let items = list(s, "a domain section")?;
        let head = match items.first().and_then(SExpr::as_symbol) {
            Some(h) => h,
            None => return syntax(s.pos(), "a section keyword"),
        };
        match head {
            ":requirements" => check_requirements(&items[1..])?,
            ":types" => {}
            ":constants" => {
                for (n, ty, p) in typed_list(&items[1..], Some(&dom.types))? {
                    if dom.constants.iter().any(|c| c.name == n) {
                        return err(p, PddlErrorKind::Duplicate(n));
                    }
                    dom.constants.push(ObjectConst { name: n, ty });
                }
            }
            ":predicates" => {
                for pe in &items[1..] {
                    let pl = list(pe, "a predicate declaration `(name ?x - t ...)`")?;
                    let pname = match pl.first() {
                        Some(n) => symbol(n, "a predicate name")?,
                        None => return syntax(pe.pos(), "a predicate name"),
                    };
                    if dom.predicate(pname).is_some() {
                        return err(pe.pos(), PddlErrorKind::Duplicate(pname.into()));
                    }
                    let params = typed_params(&pl[1..], &dom.types)?;
                    dom.predicates.push(PredicateSchema {
                        name: pname.to_string(),
                        params,
                    });
                }
            }
            ":action" => {
                let a = parse_action(items, s.pos(), &dom)?;
                if !seen_actions.insert(a.name.clone()) {
                    return err(s.pos(), PddlErrorKind::Duplicate(a.name));
                }
                dom.schemas.push(a);
            }
            other => return err(s.pos(), PddlErrorKind::Unsupported(other.to_string())),
        }
    }
    Ok(dom)
}

fn typed_params(items: &[SExpr], types: &TypeTree) -> Result<Vec<TypedParam>> {
    let mut out: Vec<TypedParam> = Vec::new();
    for (n, ty, p) in typed_list(items, Some(types))? {
        if !n.starts_with('?') {
            return syntax(p, "a variable starting with `?`");
        }
        if out.iter().any(|q| q.name == n) {
            return err(p, PddlErrorKind::Duplicate(n));
        }
        out.push(TypedParam { name: n, ty });
    }
    Ok(out)
}

fn parse_action(items: &[SExpr], pos: Pos, dom: &DomainDef) -> Result<ActionSchema> {
    let name = match items.get(1) {
        Some(n) => symbol(n, "an action name")?.to_string(),
        None => return syntax(pos, "an action name"),
    };
    let mut params = Vec::new();
    let mut pre = Vec::new();
    let mut add = Vec::new();
    let mut del = Vec::new();
    let mut i = 2;
    while i < items.len() {
        let key = symbol(&items[i], "`:parameters`, `:precondition` or `:effect`")?;
        let val = match items.get(i + 1) {
            Some(v) => v,
            None => return syntax(items[i].pos(), &format!("a value after `{key}`")),
        };
        match key {
            ":parameters" => params = typed_params(list(val, "a parameter list")?, &dom.types)?,
            ":precondition" => {
                for (neg, atom, p) in conjunction(val)? {
                    if neg {
                        return err(p, PddlErrorKind::Unsupported(":negative-preconditions".into()));
                    }
                    pre.push(lifted_atom(atom, &params, dom)?);
                }
            }
            ":effect" => {
                for (neg, atom, _) in conjunction(val)? {
                    let a = lifted_atom(atom, &params, dom)?;
                    if neg {
                        del.push(a);
                    } else {
                        add.push(a);
                    }
                }
            }
            other => return err(items[i].pos(), PddlErrorKind::Unsupported(other.to_string())),
        }
        i += 2;
    }
    Ok(ActionSchema {
        name,
        params,
        pre,
        add,
        del,
    })
}

/// Flattens `(and l1 l2 ...)`, a single literal, or `()` into literals.
fn conjunction(e: &SExpr) -> Result<Vec<(bool, &SExpr, Pos)>> {
    let items = list(e, "a literal or `(and ...)`")?;
    let mut out = Vec::new();
    match e.head() {
        None if items.is_empty() => {}
        Some("and") => {
            for it in &items[1..] {
                out.extend(conjunction(it)?);
            }
        }
        Some("not") => match &items[1..] {
            [inner] => {
                if let Some(h) = inner.head() {
                    if is_keyword(h) {
                        return err(inner.pos(), PddlErrorKind::Unsupported(h.to_string()));
                    }
                }
                out.push((true, inner, e.pos()));
            }
            _ => return syntax(e.pos(), "exactly one literal inside `not`"),
        },
        Some(h) if is_keyword(h) => {
            return err(e.pos(), PddlErrorKind::Unsupported(h.to_string()));
        }
        _ => out.push((false, e, e.pos())),
    }
    Ok(out)
}

fn is_keyword(h: &str) -> bool {
    matches!(
        h,
        "or" | "imply"
            | "forall"
            | "exists"
            | "when"
            | "="
            | "<"
            | ">"
            | "<="
            | ">="
            | "increase"
            | "decrease"
            | "assign"
            | "scale-up"
            | "scale-down"
    )
}

fn lifted_atom(e: &SExpr, params: &[TypedParam], dom: &DomainDef) -> Result<LiftedAtom> {
    let items = list(e, "an atom `(pred args...)`")?;
    let pname = match items.first() {
        Some(n) => symbol(n, "a predicate name")?,
        None => return syntax(e.pos(), "a predicate name"),
    };
    let schema = match dom.predicate(pname) {
        Some(s) => s,
        None => return err(e.pos(), PddlErrorKind::UndeclaredPredicate(pname.into())),
    };
    let args = &items[1..];
    if args.len() != schema.arity() {
        return err(
            e.pos(),
            PddlErrorKind::Arity {
                predicate: pname.into(),
                expected: schema.arity(),
                found: args.len(),
            },
        );
    }
    let mut terms = Vec::with_capacity(args.len());
    for (a, sp) in args.iter().zip(&schema.params) {
        let s = symbol(a, "a variable or constant")?;
        let ty = if s.starts_with('?') {
            match params.iter().find(|p| p.name == s) {
                Some(p) => {
                    terms.push(Term::Var(s.to_string()));
                    &p.ty
                }
                None => return err(a.pos(), PddlErrorKind::UndeclaredVariable(s.into())),
            }
        } else {
            match dom.constants.iter().find(|c| c.name == s) {
                Some(c) => {
                    terms.push(Term::Const(s.to_string()));
                    &c.ty
                }
                None => return err(a.pos(), PddlErrorKind::UndeclaredObject(s.into())),
            }
        };
        // A parameter may be declared with a supertype of the predicate slot;
        // grounding filters incompatible bindings, so only reject disjoint types.
        if !dom.types.is_subtype(ty, &sp.ty) && !dom.types.is_subtype(&sp.ty, ty) {
            return err(
                a.pos(),
                PddlErrorKind::TypeMismatch {
                    object: s.into(),
                    expected: sp.ty.clone(),
                    found: ty.clone(),
                },
            );
        }
    }
    Ok(LiftedAtom {
        predicate: pname.to_string(),
        args: terms,
    })
}

/// Parses a problem file against an already parsed domain. Only objects and
/// the initial state are semantically relevant; `:goal` atoms are kept as
/// advisory.
pub fn parse_problem(text: &str, domain: &DomainDef) -> Result<LiftedTask> {
    let exprs = read(text)?;
    let (name, sections) = define_block(&exprs, "problem")?;
    let mut objects: Vec<ObjectConst> = domain.constants.clone();
    let mut init = Vec::new();
    let mut advisory_goals = Vec::new();
    let mut init_exprs: Vec<&SExpr> = Vec::new();
    let mut goal_expr: Option<&SExpr> = None;

    for s in sections {
        let items = list(s, "a problem section")?;
        let head = match items.first().and_then(SExpr::as_symbol) {
            Some(h) => h,
            None => return syntax(s.pos(), "a section keyword"),
        };
        match head {
            ":domain" => {
                let d = match items.get(1) {
                    Some(d) => symbol(d, "a domain name")?,
                    None => return syntax(s.pos(), "a domain name"),
                };
                if d != domain.name {
                    return err(
                        s.pos(),
                        PddlErrorKind::DomainMismatch {
                            expected: domain.name.clone(),
                            found: d.into(),
                        },
                    );
                }
            }
            ":requirements" => check_requirements(&items[1..])?,
            ":objects" => {
                for (n, ty, p) in typed_list(&items[1..], Some(&domain.types))? {
                    if objects.iter().any(|o| o.name == n) {
                        return err(p, PddlErrorKind::Duplicate(n));
                    }
                    objects.push(ObjectConst { name: n, ty });
                }
            }
            ":init" => init_exprs.extend(&items[1..]),
            ":goal" => match items.get(1) {
                Some(g) => goal_expr = Some(g),
                None => return syntax(s.pos(), "a goal condition"),
            },
            other => return err(s.pos(), PddlErrorKind::Unsupported(other.to_string())),
        }
    }

    let by_name: HashMap<&str, &ObjectConst> = objects.iter().map(|o| (o.name.as_str(), o)).collect();
    let ground = |e: &SExpr| -> Result<Atom> {
        let items = list(e, "a ground atom `(pred obj...)`")?;
        let pname = match items.first() {
            Some(n) => symbol(n, "a predicate name")?,
            None => return syntax(e.pos(), "a predicate name"),
        };
        if is_keyword(pname) || pname == "not" {
            return err(e.pos(), PddlErrorKind::Unsupported(pname.into()));
        }
        let schema = match domain.predicate(pname) {
            Some(s) => s,
            None => return err(e.pos(), PddlErrorKind::UndeclaredPredicate(pname.into())),
        };
        if items.len() - 1 != schema.arity() {
            return err(
                e.pos(),
                PddlErrorKind::Arity {
                    predicate: pname.into(),
                    expected: schema.arity(),
                    found: items.len() - 1,
                },
            );
        }
        let mut args = Vec::new();
        for (a, sp) in items[1..].iter().zip(&schema.params) {
            let s = symbol(a, "an object name")?;
            let o = match by_name.get(s) {
                Some(o) => o,
                None => return err(a.pos(), PddlErrorKind::UndeclaredObject(s.into())),
            };
            if !domain.types.is_subtype(&o.ty, &sp.ty) {
                return err(
                    a.pos(),
                    PddlErrorKind::TypeMismatch {
                        object: s.into(),
                        expected: sp.ty.clone(),
                        found: o.ty.clone(),
                    },
                );
            }
            args.push(s.to_string());
        }
        Ok(Atom {
            predicate: pname.to_string(),
            args,
        })
    };

    for e in init_exprs {
        let a = ground(e)?;
        if !init.contains(&a) {
            init.push(a);
        }
    }
    if let Some(g) = goal_expr {
        for (neg, atom, p) in conjunction(g)? {
            if neg {
                return err(p, PddlErrorKind::Unsupported(":negative-preconditions".into()));
            }
            advisory_goals.push(ground(atom)?);
        }
    }

    Ok(LiftedTask {
        domain: domain.clone(),
        problem_name: name,
        objects,
        init,
        advisory_goals,
    })
}
