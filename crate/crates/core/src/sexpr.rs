//! Surface syntax: reading and printing s-expressions.
//!
//! Symbols are uppercased at read time, keywords are their own variant and
//! the quote family (`'`, `` ` ``, `,`, `,@`) reads into two-element lists
//! headed by `QUOTE`, `QUASIQUOTE`, `UNQUOTE` and `UNQUOTE-SPLICING`.

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use thiserror::Error;

pub const QUOTE: &str = "QUOTE";
pub const QUASIQUOTE: &str = "QUASIQUOTE";
pub const UNQUOTE: &str = "UNQUOTE";
pub const UNQUOTE_SPLICING: &str = "UNQUOTE-SPLICING";

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SExpr {
    Nil,
    Symbol(String),
    /// Stored without the leading colon.
    Keyword(String),
    Integer(BigInt),
    Str(String),
    Pair(Arc<SExpr>, Arc<SExpr>),
}

impl SExpr {
    pub fn sym(name: &str) -> SExpr {
        if name == "NIL" {
            SExpr::Nil
        } else {
            SExpr::Symbol(name.to_string())
        }
    }

    pub fn keyword(name: &str) -> SExpr {
        SExpr::Keyword(name.to_string())
    }

    pub fn int(v: i64) -> SExpr {
        SExpr::Integer(BigInt::from(v))
    }

    pub fn t() -> SExpr {
        SExpr::Symbol("T".to_string())
    }

    pub fn cons(car: SExpr, cdr: SExpr) -> SExpr {
        SExpr::Pair(Arc::new(car), Arc::new(cdr))
    }

    pub fn list<I>(items: I) -> SExpr
    where
        I: IntoIterator<Item = SExpr>,
        I::IntoIter: DoubleEndedIterator,
    {
        Self::list_with_tail(items, SExpr::Nil)
    }

    pub fn list_with_tail<I>(items: I, tail: SExpr) -> SExpr
    where
        I: IntoIterator<Item = SExpr>,
        I::IntoIter: DoubleEndedIterator,
    {
        items
            .into_iter()
            .rev()
            .fold(tail, |acc, x| SExpr::cons(x, acc))
    }

    /// `(QUOTE x)`
    pub fn quote(x: SExpr) -> SExpr {
        SExpr::list([SExpr::sym(QUOTE), x])
    }

    pub fn is_nil(&self) -> bool {
        matches!(self, SExpr::Nil)
    }

    pub fn is_pair(&self) -> bool {
        matches!(self, SExpr::Pair(..))
    }

    pub fn is_symbol(&self, name: &str) -> bool {
        match self {
            SExpr::Symbol(s) => s == name,
            SExpr::Nil => name == "NIL",
            _ => false,
        }
    }

    pub fn symbol_name(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s) => Some(s),
            SExpr::Nil => Some("NIL"),
            _ => None,
        }
    }

    pub fn car(&self) -> Option<&SExpr> {
        match self {
            SExpr::Pair(a, _) => Some(a),
            _ => None,
        }
    }

    pub fn cdr(&self) -> Option<&SExpr> {
        match self {
            SExpr::Pair(_, d) => Some(d),
            _ => None,
        }
    }

    pub fn is_proper_list(&self) -> bool {
        let mut cur = self;
        loop {
            match cur {
                SExpr::Nil => return true,
                SExpr::Pair(_, d) => cur = d,
                _ => return false,
            }
        }
    }

    /// Elements of a proper list, `None` for atoms other than NIL and for
    /// dotted lists.
    pub fn to_vec(&self) -> Option<Vec<SExpr>> {
        let mut out = Vec::new();
        let mut cur = self;
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

    /// Iterates the cars of a list, stopping at the first non-pair tail.
    pub fn iter(&self) -> ListIter<'_> {
        ListIter { cur: self }
    }

    /// If this is `(HEAD x)` for one of the quote-family heads, returns the
    /// head name and `x`.
    pub fn as_mark(&self) -> Option<(&str, &SExpr)> {
        let (head, rest) = match self {
            SExpr::Pair(a, d) => (a, d),
            _ => return None,
        };
        let name = match &**head {
            SExpr::Symbol(s)
                if s == QUOTE || s == QUASIQUOTE || s == UNQUOTE || s == UNQUOTE_SPLICING =>
            {
                s.as_str()
            }
            _ => return None,
        };
        match &**rest {
            SExpr::Pair(x, tail) if tail.is_nil() => Some((name, x)),
            _ => None,
        }
    }

    /// Printed form, optionally with reader-macro sugar.
    pub fn print(&self, sugar: bool) -> String {
        let mut out = String::new();
        write_sexpr(&mut out, self, sugar);
        out
    }
}

pub struct ListIter<'a> {
    cur: &'a SExpr,
}

impl<'a> Iterator for ListIter<'a> {
    type Item = &'a SExpr;

    fn next(&mut self) -> Option<&'a SExpr> {
        match self.cur {
            SExpr::Pair(a, d) => {
                self.cur = d;
                Some(a)
            }
            _ => None,
        }
    }
}

/// Canonical printing: uppercase, single spaces, no sugar.
impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print(false))
    }
}

impl fmt::Debug for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.print(true))
    }
}

fn write_sexpr(out: &mut String, e: &SExpr, sugar: bool) {
    match e {
        SExpr::Nil => out.push_str("NIL"),
        SExpr::Symbol(s) => out.push_str(s),
        SExpr::Keyword(k) => {
            out.push(':');
            out.push_str(k);
        }
        SExpr::Integer(i) => out.push_str(&i.to_string()),
        SExpr::Str(s) => {
            out.push('"');
            for c in s.chars() {
                if c == '"' || c == '\\' {
                    out.push('\\');
                }
                out.push(c);
            }
            out.push('"');
        }
        SExpr::Pair(..) => {
            if sugar {
                if let Some((head, x)) = e.as_mark() {
                    out.push_str(match head {
                        QUOTE => "'",
                        QUASIQUOTE => "`",
                        UNQUOTE => ",",
                        _ => ",@",
                    });
                    write_sexpr(out, x, sugar);
                    return;
                }
            }
            out.push('(');
            let mut cur = e;
            let mut first = true;
            loop {
                match cur {
                    SExpr::Pair(a, d) => {
                        if !first {
                            out.push(' ');
                        }
                        first = false;
                        write_sexpr(out, a, sugar);
                        cur = d;
                    }
                    SExpr::Nil => break,
                    atom => {
                        out.push_str(" . ");
                        write_sexpr(out, atom, sugar);
                        break;
                    }
                }
            }
            out.push(')');
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("unexpected `)` at line {line}")]
    UnbalancedClose { line: usize },
    #[error("end of input inside a form opened at line {line}")]
    UnexpectedEof { line: usize },
    #[error("misplaced `.` at line {line}")]
    BadDot { line: usize },
    #[error("unterminated string starting at line {line}")]
    UnterminatedString { line: usize },
    #[error("bad token `{token}` at line {line}")]
    BadToken { token: String, line: usize },
}

/// Reads every form in `text`.
pub fn parse(text: &str) -> Result<Vec<SExpr>, ReadError> {
    let mut reader = Reader {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
    };
    let mut forms = Vec::new();
    loop {
        reader.skip_ws();
        if reader.peek().is_none() {
            return Ok(forms);
        }
        match reader.read()? {
            Item::Form(f) => forms.push(f),
            Item::Close => return Err(ReadError::UnbalancedClose { line: reader.line }),
            Item::Dot => return Err(ReadError::BadDot { line: reader.line }),
        }
    }
}

/// Reads exactly one form.
pub fn parse_one(text: &str) -> Result<SExpr, ReadError> {
    let mut forms = parse(text)?;
    match forms.len() {
        1 => Ok(forms.pop().unwrap()),
        0 => Err(ReadError::UnexpectedEof { line: 1 }),
        _ => Err(ReadError::BadToken {
            token: forms[1].to_string(),
            line: 1,
        }),
    }
}

enum Item {
    Form(SExpr),
    Close,
    Dot,
}

struct Reader {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

fn is_delimiter(c: char) -> bool {
    c.is_whitespace() || matches!(c, '(' | ')' | '\'' | '`' | ',' | ';' | '"')
}

impl Reader {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == ';' {
                while let Some(c) = self.bump() {
                    if c == '\n' {
                        break;
                    }
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn read_form(&mut self, open_line: usize) -> Result<SExpr, ReadError> {
        self.skip_ws();
        if self.peek().is_none() {
            return Err(ReadError::UnexpectedEof { line: open_line });
        }
        match self.read()? {
            Item::Form(f) => Ok(f),
            Item::Close => Err(ReadError::UnbalancedClose { line: self.line }),
            Item::Dot => Err(ReadError::BadDot { line: self.line }),
        }
    }

    fn read(&mut self) -> Result<Item, ReadError> {
        let line = self.line;
        let c = self.bump().expect("caller checked for input");
        let mark = |name: &str, r: &mut Reader| -> Result<Item, ReadError> {
            let x = r.read_form(line)?;
            Ok(Item::Form(SExpr::list([SExpr::sym(name), x])))
        };
        match c {
            '(' => self.read_list(line).map(Item::Form),
            ')' => Ok(Item::Close),
            '\'' => mark(QUOTE, self),
            '`' => mark(QUASIQUOTE, self),
            ',' => {
                if self.peek() == Some('@') {
                    self.bump();
                    mark(UNQUOTE_SPLICING, self)
                } else {
                    mark(UNQUOTE, self)
                }
            }
            '"' => self.read_string(line).map(Item::Form),
            _ => {
                let mut tok = String::new();
                tok.push(c);
                while let Some(c) = self.peek() {
                    if is_delimiter(c) {
                        break;
                    }
                    tok.push(c);
                    self.bump();
                }
                if tok == "." {
                    return Ok(Item::Dot);
                }
                atom_from_token(&tok, line).map(Item::Form)
            }
        }
    }

    fn read_list(&mut self, open_line: usize) -> Result<SExpr, ReadError> {
        let mut items = Vec::new();
        loop {
            self.skip_ws();
            if self.peek().is_none() {
                return Err(ReadError::UnexpectedEof { line: open_line });
            }
            match self.read()? {
                Item::Form(f) => items.push(f),
                Item::Close => return Ok(SExpr::list(items)),
                Item::Dot => {
                    if items.is_empty() {
                        return Err(ReadError::BadDot { line: self.line });
                    }
                    let tail = self.read_form(open_line)?;
                    self.skip_ws();
                    if self.peek().is_none() {
                        return Err(ReadError::UnexpectedEof { line: open_line });
                    }
                    return match self.read()? {
                        Item::Close => Ok(SExpr::list_with_tail(items, tail)),
                        _ => Err(ReadError::BadDot { line: self.line }),
                    };
                }
            }
        }
    }

    fn read_string(&mut self, line: usize) -> Result<SExpr, ReadError> {
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(ReadError::UnterminatedString { line }),
                Some('"') => return Ok(SExpr::Str(s)),
                Some('\\') => match self.bump() {
                    Some(c) => s.push(c),
                    None => return Err(ReadError::UnterminatedString { line }),
                },
                Some(c) => s.push(c),
            }
        }
    }
}

fn atom_from_token(tok: &str, line: usize) -> Result<SExpr, ReadError> {
    let digits = tok.strip_prefix(['+', '-']).unwrap_or(tok);
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        let v: BigInt = tok.parse().map_err(|_| ReadError::BadToken {
            token: tok.to_string(),
            line,
        })?;
        return Ok(SExpr::Integer(v));
    }
    let upper = tok.to_ascii_uppercase();
    if let Some(k) = upper.strip_prefix(':') {
        if k.is_empty() || k.contains(':') {
            return Err(ReadError::BadToken {
                token: tok.to_string(),
                line,
            });
        }
        return Ok(SExpr::Keyword(k.to_string()));
    }
    Ok(SExpr::sym(&upper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> SExpr {
        parse_one(s).unwrap()
    }

    #[test]
    fn reads_simple_list() {
        let e = p("(foo a b)");
        assert_eq!(
            e,
            SExpr::list([SExpr::sym("FOO"), SExpr::sym("A"), SExpr::sym("B")])
        );
    }

    #[test]
    fn backquote_quote_idiom() {
        let e = p("`'(:expand ((f ,(hq g))))");
        assert_eq!(
            e.to_string(),
            "(QUASIQUOTE (QUOTE (:EXPAND ((F (UNQUOTE (HQ G)))))))"
        );
        assert_eq!(e.print(true), "`'(:EXPAND ((F ,(HQ G))))");
    }

    #[test]
    fn quote_nil() {
        assert_eq!(p("'nil"), SExpr::quote(SExpr::Nil));
        assert_eq!(p("'nil").print(true), "'NIL");
        assert_eq!(p("()"), SExpr::Nil);
    }

    #[test]
    fn splice_and_dots() {
        assert_eq!(p(",@xs").to_string(), "(UNQUOTE-SPLICING XS)");
        assert_eq!(p("(a . b)").to_string(), "(A . B)");
        assert_eq!(p("(a b . (c))").to_string(), "(A B C)");
    }

    #[test]
    fn atoms() {
        assert_eq!(p("-12"), SExpr::int(-12));
        assert_eq!(p(":Foo"), SExpr::keyword("FOO"));
        assert_eq!(p("\"a\\\"b\""), SExpr::Str("a\"b".into()));
        assert_eq!(p("foo"), p("FOO"));
        assert_eq!(p("+"), SExpr::sym("+"));
    }

    #[test]
    fn comments_are_skipped() {
        let forms = parse("; header\n(a) ; trailing\n b").unwrap();
        assert_eq!(forms.len(), 2);
    }

    #[test]
    fn read_errors() {
        assert!(matches!(parse("(a b"), Err(ReadError::UnexpectedEof { .. })));
        assert!(matches!(parse("a)"), Err(ReadError::UnbalancedClose { .. })));
        assert!(matches!(parse("( . a)"), Err(ReadError::BadDot { .. })));
        assert!(matches!(parse("(a . b c)"), Err(ReadError::BadDot { .. })));
        assert!(matches!(parse("'"), Err(ReadError::UnexpectedEof { .. })));
        assert!(matches!(parse("\"abc"), Err(ReadError::UnterminatedString { .. })));
    }

    #[test]
    fn unquote_at_top_level_reads_structurally() {
        assert_eq!(p(",x").to_string(), "(UNQUOTE X)");
    }
}
