//! Syntax check for the CSS-style selectors used by `onclick` actions.
//!
//! Only the shape is checked; nothing here knows which elements exist.
//! Accepted: selector lists, the four combinators, type/universal selectors,
//! `#id`, `.class`, attribute selectors (including jQuery's `!=`) and pseudo
//! classes with balanced arguments.

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid selector {selector:?} at offset {offset}: {reason}")]
pub struct SelectorError {
    pub selector: String,
    pub offset: usize,
    pub reason: &'static str,
}

pub fn validate_selector(selector: &str) -> Result<(), SelectorError> {
    let mut p = Cursor { chars: selector.char_indices().collect(), pos: 0, src: selector };
    p.selector_list()
}

struct Cursor<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    src: &'a str,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn offset(&self) -> usize {
        self.chars.get(self.pos).map_or(self.src.len(), |&(i, _)| i)
    }

    fn fail<T>(&self, reason: &'static str) -> Result<T, SelectorError> {
        Err(SelectorError { selector: self.src.to_owned(), offset: self.offset(), reason })
    }

    fn skip_ws(&mut self) -> bool {
        let start = self.pos;
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
        self.pos > start
    }

    fn selector_list(&mut self) -> Result<(), SelectorError> {
        loop {
            self.skip_ws();
            self.complex()?;
            self.skip_ws();
            match self.bump() {
                None => return Ok(()),
                Some(',') => continue,
                Some(_) => {
                    self.pos -= 1;
                    return self.fail("unexpected character");
                }
            }
        }
    }

    fn complex(&mut self) -> Result<(), SelectorError> {
        self.compound()?;
        loop {
            let had_ws = self.skip_ws();
            match self.peek() {
                Some('>' | '+' | '~') => {
                    self.pos += 1;
                    self.skip_ws();
                    self.compound()?;
                }
                Some(',') | None => return Ok(()),
                Some(_) if had_ws => self.compound()?,
                Some(_) => return self.fail("unexpected character"),
            }
        }
    }

    fn compound(&mut self) -> Result<(), SelectorError> {
        let start = self.pos;
        match self.peek() {
            Some('*') => {
                self.pos += 1;
            }
            Some(c) if is_ident_start(c) || c == '\\' || c == '-' => self.ident()?,
            _ => {}
        }
        loop {
            match self.peek() {
                Some('#') => {
                    self.pos += 1;
                    self.name()?;
                }
                Some('.') => {
                    self.pos += 1;
                    self.ident()?;
                }
                Some('[') => self.attribute()?,
                Some(':') => self.pseudo()?,
                _ => break,
            }
        }
        if self.pos == start {
            return self.fail("expected a selector");
        }
        Ok(())
    }

    fn escape(&mut self) -> Result<(), SelectorError> {
        self.pos += 1;
        match self.bump() {
            Some('\n') | None => {
                self.pos -= 1;
                self.fail("dangling escape")
            }
            Some(_) => Ok(()),
        }
    }

    /// Identifier: optional leading hyphen(s), then a name-start character.
    fn ident(&mut self) -> Result<(), SelectorError> {
        while self.peek() == Some('-') {
            self.pos += 1;
        }
        match self.peek() {
            Some('\\') => self.escape()?,
            Some(c) if is_ident_start(c) => self.pos += 1,
            _ => return self.fail("expected an identifier"),
        }
        self.name_rest()
    }

    /// Name used after `#`: any run of name characters.
    fn name(&mut self) -> Result<(), SelectorError> {
        let start = self.pos;
        self.name_rest()?;
        if self.pos == start {
            return self.fail("expected a name");
        }
        Ok(())
    }

    fn name_rest(&mut self) -> Result<(), SelectorError> {
        loop {
            match self.peek() {
                Some('\\') => self.escape()?,
                Some(c) if is_name_char(c) => self.pos += 1,
                _ => return Ok(()),
            }
        }
    }

    fn attribute(&mut self) -> Result<(), SelectorError> {
        self.pos += 1;
        self.skip_ws();
        self.ident()?;
        self.skip_ws();
        match self.peek() {
            Some(']') => {
                self.pos += 1;
                return Ok(());
            }
            Some('=') => self.pos += 1,
            Some('~' | '|' | '^' | '$' | '*' | '!') => {
                self.pos += 1;
                if self.bump() != Some('=') {
                    self.pos -= 1;
                    return self.fail("expected '=' in attribute operator");
                }
            }
            _ => return self.fail("expected ']' or an attribute operator"),
        }
        self.skip_ws();
        match self.peek() {
            Some(q @ ('"' | '\'')) => self.string(q)?,
            _ => self.ident().or_else(|_| self.name())?,
        }
        self.skip_ws();
        if matches!(self.peek(), Some('i' | 'I' | 's' | 'S')) {
            self.pos += 1;
            self.skip_ws();
        }
        if self.bump() != Some(']') {
            self.pos -= 1;
            return self.fail("expected ']'");
        }
        Ok(())
    }

    fn string(&mut self, quote: char) -> Result<(), SelectorError> {
        self.pos += 1;
        loop {
            match self.bump() {
                None | Some('\n') => return self.fail("unterminated string"),
                Some('\\') => {
                    if self.bump().is_none() {
                        return self.fail("unterminated string");
                    }
                }
                Some(c) if c == quote => return Ok(()),
                Some(_) => {}
            }
        }
    }

    fn pseudo(&mut self) -> Result<(), SelectorError> {
        self.pos += 1;
        if self.peek() == Some(':') {
            self.pos += 1;
        }
        self.ident()?;
        if self.peek() != Some('(') {
            return Ok(());
        }
        self.pos += 1;
        let mut depth = 1usize;
        while depth > 0 {
            match self.peek() {
                None => return self.fail("unbalanced parenthesis"),
                Some(q @ ('"' | '\'')) => self.string(q)?,
                Some('\\') => self.escape()?,
                Some(c) => {
                    self.pos += 1;
                    match c {
                        '(' => depth += 1,
                        ')' => depth -= 1,
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || !c.is_ascii()
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-' || !c.is_ascii()
}
