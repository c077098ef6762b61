//! LTLf goals over ground atoms.
//!
//! Surface grammar (tightest binding first):
//!
//! ```text
//! unary   := '!' unary | 'X' unary | 'WX' unary | 'F' unary | 'G' unary | primary
//! until   := unary ('U' until)?          -- right associative
//! and     := until ('&' until)*
//! or      := and ('|' and)*
//! primary := 'true' | 'false' | pred '(' obj (',' obj)* ')' | pred | '(' or ')'
//! ```
//!
//! `X` is the strong next (false at the last position), `WX` the weak next
//! (true at the last position). `&&`, `||`, `¬`, `∧`, `∨`, `□` and `◇` are
//! accepted as alternative spellings.

use crate::model::{Atom, AtomId, GroundTask, State};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ltl {
    True,
    False,
    Atom(AtomId),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    WeakNext(Box<Ltl>),
    Eventually(Box<Ltl>),
    Always(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
}

/// Anything that decides atom truth at one trace position.
pub trait Valuation {
    fn holds(&self, atom: AtomId) -> bool;
}

impl Valuation for State {
    fn holds(&self, atom: AtomId) -> bool {
        self.contains(atom)
    }
}

impl Ltl {
    pub fn atom(id: AtomId) -> Ltl {
        Ltl::Atom(id)
    }

    /// `F (g & WX false)`: `g` holds in the final state of the trace.
    pub fn at_end(goal: Ltl) -> Ltl {
        Ltl::Eventually(Box::new(Ltl::And(
            Box::new(goal),
            Box::new(Ltl::WeakNext(Box::new(Ltl::False))),
        )))
    }

    /// Inverse of [`Ltl::at_end`].
    pub fn as_at_end(&self) -> Option<&Ltl> {
        match self {
            Ltl::Eventually(inner) => match inner.as_ref() {
                Ltl::And(g, w) if **w == Ltl::WeakNext(Box::new(Ltl::False)) => Some(g),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn negate(f: Ltl) -> Ltl {
        match f {
            Ltl::True => Ltl::False,
            Ltl::False => Ltl::True,
            Ltl::Not(inner) => *inner,
            other => Ltl::Not(Box::new(other)),
        }
    }

    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        match (a, b) {
            (Ltl::False, _) | (_, Ltl::False) => Ltl::False,
            (Ltl::True, x) | (x, Ltl::True) => x,
            (a, b) if a == b => a,
            (a, b) => Ltl::And(Box::new(a), Box::new(b)),
        }
    }

    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        match (a, b) {
            (Ltl::True, _) | (_, Ltl::True) => Ltl::True,
            (Ltl::False, x) | (x, Ltl::False) => x,
            (a, b) if a == b => a,
            (a, b) => Ltl::Or(Box::new(a), Box::new(b)),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => 0,
            Ltl::Not(a) | Ltl::Next(a) | Ltl::WeakNext(a) | Ltl::Eventually(a) | Ltl::Always(a) => 1 + a.depth(),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// True if no temporal operator occurs.
    pub fn is_propositional(&self) -> bool {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => true,
            Ltl::Not(a) => a.is_propositional(),
            Ltl::And(a, b) | Ltl::Or(a, b) => a.is_propositional() && b.is_propositional(),
            _ => false,
        }
    }

    pub fn atoms(&self) -> Vec<AtomId> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_atoms(&self, out: &mut Vec<AtomId>) {
        match self {
            Ltl::True | Ltl::False => {}
            Ltl::Atom(a) => out.push(*a),
            Ltl::Not(a) | Ltl::Next(a) | Ltl::WeakNext(a) | Ltl::Eventually(a) | Ltl::Always(a) => a.collect_atoms(out),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Truth of the formula at `index` of `trace`, computed bottom-up over
    /// subformulas and backwards over positions.
    pub fn evaluate<V: Valuation>(&self, trace: &[V], index: usize) -> bool {
        assert!(
            index < trace.len(),
            "index {index} outside trace of length {}",
            trace.len()
        );
        self.table(trace)[index]
    }

    fn table<V: Valuation>(&self, trace: &[V]) -> Vec<bool> {
        let n = trace.len();
        match self {
            Ltl::True => vec![true; n],
            Ltl::False => vec![false; n],
            Ltl::Atom(a) => trace.iter().map(|s| s.holds(*a)).collect(),
            Ltl::Not(f) => f.table(trace).into_iter().map(|b| !b).collect(),
            Ltl::And(a, b) => {
                let (ta, tb) = (a.table(trace), b.table(trace));
                ta.iter().zip(&tb).map(|(x, y)| *x && *y).collect()
            }
            Ltl::Or(a, b) => {
                let (ta, tb) = (a.table(trace), b.table(trace));
                ta.iter().zip(&tb).map(|(x, y)| *x || *y).collect()
            }
            Ltl::Next(f) => {
                let t = f.table(trace);
                (0..n).map(|i| i + 1 < n && t[i + 1]).collect()
            }
            Ltl::WeakNext(f) => {
                let t = f.table(trace);
                (0..n).map(|i| i + 1 >= n || t[i + 1]).collect()
            }
            Ltl::Eventually(f) => {
                let t = f.table(trace);
                let mut out = vec![false; n];
                let mut acc = false;
                for i in (0..n).rev() {
                    acc |= t[i];
                    out[i] = acc;
                }
                out
            }
            Ltl::Always(f) => {
                let t = f.table(trace);
                let mut out = vec![true; n];
                let mut acc = true;
                for i in (0..n).rev() {
                    acc &= t[i];
                    out[i] = acc;
                }
                out
            }
            Ltl::Until(a, b) => {
                let (ta, tb) = (a.table(trace), b.table(trace));
                let mut out = vec![false; n];
                let mut next = false;
                for i in (0..n).rev() {
                    next = tb[i] || (ta[i] && next);
                    out[i] = next;
                }
                out
            }
        }
    }

    /// Rewrites the formula against the current state so that the result
    /// constrains the remaining suffix. Only meaningful when at least one more
    /// state follows; the end of the trace is handled by
    /// [`Ltl::accepting_if_ends`].
    pub fn progress<V: Valuation>(&self, state: &V) -> Ltl {
        match self {
            Ltl::True => Ltl::True,
            Ltl::False => Ltl::False,
            Ltl::Atom(a) => {
                if state.holds(*a) {
                    Ltl::True
                } else {
                    Ltl::False
                }
            }
            Ltl::Not(f) => Ltl::negate(f.progress(state)),
            Ltl::And(a, b) => Ltl::and(a.progress(state), b.progress(state)),
            Ltl::Or(a, b) => Ltl::or(a.progress(state), b.progress(state)),
            Ltl::Next(f) | Ltl::WeakNext(f) => (**f).clone(),
            Ltl::Eventually(f) => Ltl::or(f.progress(state), self.clone()),
            Ltl::Always(f) => Ltl::and(f.progress(state), self.clone()),
            Ltl::Until(a, b) => Ltl::or(b.progress(state), Ltl::and(a.progress(state), self.clone())),
        }
    }

    /// Truth of the formula on the one-state trace `[last]`, i.e. when the
    /// trace ends at the current state.
    pub fn accepting_if_ends<V: Valuation>(&self, last: &V) -> bool {
        match self {
            Ltl::True => true,
            Ltl::False => false,
            Ltl::Atom(a) => last.holds(*a),
            Ltl::Not(f) => !f.accepting_if_ends(last),
            Ltl::And(a, b) => a.accepting_if_ends(last) && b.accepting_if_ends(last),
            Ltl::Or(a, b) => a.accepting_if_ends(last) || b.accepting_if_ends(last),
            Ltl::Next(_) => false,
            Ltl::WeakNext(_) => true,
            Ltl::Eventually(f) | Ltl::Always(f) => f.accepting_if_ends(last),
            Ltl::Until(_, b) => b.accepting_if_ends(last),
        }
    }

    /// Splits nested conjunctions into their conjuncts.
    pub fn conjuncts(self) -> Vec<Ltl> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(f) = stack.pop() {
            match f {
                Ltl::And(a, b) => {
                    stack.push(*b);
                    stack.push(*a);
                }
                other => out.push(other),
            }
        }
        out
    }

    /// Renders in the surface grammar using `name` for atoms.
    pub fn render(&self, name: &dyn Fn(AtomId) -> String) -> String {
        let mut s = String::new();
        self.write(&mut s, name);
        s
    }

    pub fn to_text(&self, task: &GroundTask) -> String {
        self.render(&|id| task.atom(id).to_string())
    }

    fn is_binary(&self) -> bool {
        matches!(self, Ltl::And(..) | Ltl::Or(..) | Ltl::Until(..))
    }

    fn write_operand(&self, out: &mut String, name: &dyn Fn(AtomId) -> String) {
        if self.is_binary() {
            out.push('(');
            self.write(out, name);
            out.push(')');
        } else {
            self.write(out, name);
        }
    }

    fn write(&self, out: &mut String, name: &dyn Fn(AtomId) -> String) {
        match self {
            Ltl::True => out.push_str("true"),
            Ltl::False => out.push_str("false"),
            Ltl::Atom(a) => out.push_str(&name(*a)),
            Ltl::Not(f) => {
                out.push('!');
                f.write_operand(out, name);
            }
            Ltl::Next(f) | Ltl::WeakNext(f) | Ltl::Eventually(f) | Ltl::Always(f) => {
                out.push_str(match self {
                    Ltl::Next(_) => "X ",
                    Ltl::WeakNext(_) => "WX ",
                    Ltl::Eventually(_) => "F ",
                    _ => "G ",
                });
                f.write_operand(out, name);
            }
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) => {
                a.write_operand(out, name);
                out.push_str(match self {
                    Ltl::And(..) => " & ",
                    Ltl::Or(..) => " | ",
                    _ => " U ",
                });
                b.write_operand(out, name);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LtlError {
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("syntax error at offset {offset}: expected {expected}")]
    Syntax { offset: usize, expected: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Not,
    And,
    Or,
    Next,
    WeakNext,
    Eventually,
    Always,
    Until,
    True,
    False,
    LParen,
    RParen,
    Comma,
    Ident(String),
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LtlError> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (off, c) = chars[i];
        let two = |n: char| chars.get(i + 1).map(|&(_, c)| c) == Some(n);
        let tok = match c {
            c if c.is_whitespace() => {
                i += 1;
                continue;
            }
            '!' | '~' | '¬' => Tok::Not,
            '&' | '∧' => {
                if c == '&' && two('&') {
                    i += 1;
                }
                Tok::And
            }
            '|' | '∨' => {
                if c == '|' && two('|') {
                    i += 1;
                }
                Tok::Or
            }
            '□' => Tok::Always,
            '◇' => Tok::Eventually,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            c if c.is_alphanumeric() || c == '_' || c == '-' || c == '$' => {
                let start = i;
                while i < chars.len() {
                    let c = chars[i].1;
                    if c.is_alphanumeric() || c == '_' || c == '-' || c == '$' {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let word: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                let tok = match word.as_str() {
                    "X" => Tok::Next,
                    "WX" => Tok::WeakNext,
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    "U" => Tok::Until,
                    "true" => Tok::True,
                    "false" => Tok::False,
                    _ => Tok::Ident(word.to_lowercase()),
                };
                out.push((tok, off));
                continue;
            }
            _ => {
                return Err(LtlError::Syntax {
                    offset: off,
                    expected: format!("an operator or atom, found `{c}`"),
                })
            }
        };
        out.push((tok, off));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    resolve: &'a dyn Fn(&str, &[String]) -> Option<AtomId>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |&(_, o)| o)
    }

    fn fail<T>(&self, expected: &str) -> Result<T, LtlError> {
        Err(LtlError::Syntax {
            offset: self.offset(),
            expected: expected.to_string(),
        })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<Ltl, LtlError> {
        let mut f = self.and()?;
        while self.eat(&Tok::Or) {
            f = Ltl::Or(Box::new(f), Box::new(self.and()?));
        }
        Ok(f)
    }

    fn and(&mut self) -> Result<Ltl, LtlError> {
        let mut f = self.until()?;
        while self.eat(&Tok::And) {
            f = Ltl::And(Box::new(f), Box::new(self.until()?));
        }
        Ok(f)
    }

    fn until(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            Ok(Ltl::Until(Box::new(lhs), Box::new(self.until()?)))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<Ltl, LtlError> {
        let wrap: fn(Box<Ltl>) -> Ltl = match self.peek() {
            Some(Tok::Not) => Ltl::Not,
            Some(Tok::Next) => Ltl::Next,
            Some(Tok::WeakNext) => Ltl::WeakNext,
            Some(Tok::Eventually) => Ltl::Eventually,
            Some(Tok::Always) => Ltl::Always,
            _ => return self.primary(),
        };
        self.pos += 1;
        Ok(wrap(Box::new(self.unary()?)))
    }

    fn primary(&mut self) -> Result<Ltl, LtlError> {
        match self.peek().cloned() {
            Some(Tok::True) => {
                self.pos += 1;
                Ok(Ltl::True)
            }
            Some(Tok::False) => {
                self.pos += 1;
                Ok(Ltl::False)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.or()?;
                if !self.eat(&Tok::RParen) {
                    return self.fail("`)`");
                }
                Ok(f)
            }
            Some(Tok::Ident(pred)) => {
                self.pos += 1;
                let mut args = Vec::new();
                if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
                    loop {
                        match self.peek().cloned() {
                            Some(Tok::Ident(a)) => {
                                self.pos += 1;
                                args.push(a);
                            }
                            _ => return self.fail("an object name"),
                        }
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        if !self.eat(&Tok::Comma) {
                            return self.fail("`,` or `)`");
                        }
                    }
                }
                match (self.resolve)(&pred, &args) {
                    Some(id) => Ok(Ltl::Atom(id)),
                    None => Err(LtlError::UnknownAtom(format!("{}({})", pred, args.join(",")))),
                }
            }
            _ => self.fail("a formula"),
        }
    }
}

/// Parses with a caller-supplied atom resolver.
pub fn parse_with(text: &str, resolve: &dyn Fn(&str, &[String]) -> Option<AtomId>) -> Result<Ltl, LtlError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
        resolve,
    };
    let f = p.or()?;
    if p.pos != p.toks.len() {
        return p.fail("end of formula");
    }
    Ok(f)
}

/// Parses a formula whose atoms must exist in the task's atom universe.
pub fn parse_ltlf(text: &str, task: &GroundTask) -> Result<Ltl, LtlError> {
    parse_with(text, &|pred, args| {
        task.atom_id(&Atom {
            predicate: pred.to_string(),
            args: args.to_vec(),
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GoalSource {
    #[default]
    Template,
    Translated,
    AtomGoal,
}

/// A named temporal goal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalGoal {
    pub id: String,
    pub formula: Ltl,
    pub short_name: String,
    pub source: GoalSource,
}

impl TemporalGoal {
    /// Whether the goal holds on the trace (checked from its first state).
    pub fn satisfied_by(&self, trace: &[State]) -> bool {
        self.formula.evaluate(trace, 0)
    }
}

impl fmt::Display for TemporalGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.short_name, self.id)
    }
}
