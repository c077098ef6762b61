//! S-expression reader used by the PDDL front end.

use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SExpr {
    Symbol(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Symbol(..) => None,
        }
    }

    /// Head symbol of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.as_list().and_then(|l| l.first()).and_then(SExpr::as_symbol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReadError {
    pub pos: Pos,
    pub message: String,
}

/// Reads every top-level expression in `text`. Symbols are lower-cased since
/// PDDL identifiers are case-insensitive. `;` starts a line comment.
pub fn read_all(text: &str) -> Result<Vec<SExpr>, ReadError> {
    let mut stack: Vec<(Vec<SExpr>, Pos)> = Vec::new();
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 0;
    let mut chars = text.chars().peekable();
    let mut symbol: Option<(String, Pos)> = None;

    fn flush(symbol: &mut Option<(String, Pos)>, stack: &mut [(Vec<SExpr>, Pos)], out: &mut Vec<SExpr>) {
        if let Some((s, p)) = symbol.take() {
            let e = SExpr::Symbol(s, p);
            match stack.last_mut() {
                Some((items, _)) => items.push(e),
                None => out.push(e),
            }
        }
    }

    while let Some(c) = chars.next() {
        col += 1;
        let here = Pos { line, col };
        match c {
            '\n' => {
                flush(&mut symbol, &mut stack, &mut out);
                line += 1;
                col = 0;
            }
            ';' => {
                flush(&mut symbol, &mut stack, &mut out);
                while let Some(&n) = chars.peek() {
                    if n == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '(' => {
                flush(&mut symbol, &mut stack, &mut out);
                stack.push((Vec::new(), here));
            }
            ')' => {
                flush(&mut symbol, &mut stack, &mut out);
                let (items, open) = stack.pop().ok_or_else(|| ReadError {
                    pos: here,
                    message: "unexpected ')'".into(),
                })?;
                let e = SExpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(e),
                    None => out.push(e),
                }
            }
            c if c.is_whitespace() => flush(&mut symbol, &mut stack, &mut out),
            c => match &mut symbol {
                Some((s, _)) => s.extend(c.to_lowercase()),
                None => symbol = Some((c.to_lowercase().collect(), here)),
            },
        }
    }
    flush(&mut symbol, &mut stack, &mut out);
    if let Some((_, open)) = stack.pop() {
        return Err(ReadError {
            pos: open,
            message: "unclosed '(' (expected ')')".into(),
        });
    }
    Ok(out)
}
