use std::fmt::Write as _;

use super::selector::validate_selector;
use super::*;

/// A document value that cannot be written as valid output.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SerializeError {
    #[error("line numbers start at 1 (got from={0})")]
    LineZero(u32),
    #[error("<{element}> {attribute} must be positive")]
    NotPositive { element: &'static str, attribute: &'static str },
    #[error("download filename {0:?} must be a bare file name")]
    BadFilename(String),
    #[error("consoleid must not be empty")]
    EmptyConsoleId,
    #[error("poll interval {0} is not a finite non-negative number")]
    BadInterval(f64),
    #[error(transparent)]
    Selector(#[from] super::selector::SelectorError),
    #[error("character U+{0:04X} cannot appear in an XML document")]
    InvalidChar(u32),
}

type Result<T = ()> = std::result::Result<T, SerializeError>;

/// Write a document as `eiout` XML.
///
/// Text bodies are entity-escaped; html, svg and graphs bodies are wrapped in
/// CDATA so they come back byte-for-byte. Whitespace is only ever added
/// between structural elements, never inside a `content`.
pub fn serialize(doc: &EiOutDocument) -> std::result::Result<String, SerializeError> {
    if doc.is_empty() {
        return Ok("<eiout/>".to_owned());
    }
    let mut w = Writer { out: String::new(), depth: 0 };
    w.open("eiout", &[])?;
    if !doc.commands.is_empty() {
        w.open("eicommands", &[])?;
        for command in &doc.commands {
            w.command(command)?;
        }
        w.close("eicommands");
    }
    if !doc.actions.is_empty() {
        w.open("eiactions", &[])?;
        for action in &doc.actions {
            w.action(action)?;
        }
        w.close("eiactions");
    }
    w.close("eiout");
    Ok(w.out)
}

struct Writer {
    out: String,
    depth: usize,
}

type Attrs<'a> = [(&'a str, Option<String>)];

impl Writer {
    fn indent(&mut self) {
        if !self.out.is_empty() {
            self.out.push('\n');
        }
        for _ in 0..self.depth {
            self.out.push_str("  ");
        }
    }

    fn start_tag(&mut self, name: &str, attrs: &Attrs) -> Result {
        self.indent();
        self.out.push('<');
        self.out.push_str(name);
        for (key, value) in attrs {
            if let Some(value) = value {
                write!(self.out, " {key}=\"").unwrap();
                escape_attr(&mut self.out, value)?;
                self.out.push('"');
            }
        }
        Ok(())
    }

    fn open(&mut self, name: &str, attrs: &Attrs) -> Result {
        self.start_tag(name, attrs)?;
        self.out.push('>');
        self.depth += 1;
        Ok(())
    }

    fn empty(&mut self, name: &str, attrs: &Attrs) -> Result {
        self.start_tag(name, attrs)?;
        self.out.push_str("/>");
        Ok(())
    }

    fn close(&mut self, name: &str) {
        self.depth -= 1;
        self.indent();
        write!(self.out, "</{name}>").unwrap();
    }

    fn lines(&mut self, regions: &[LineRegion]) -> Result {
        if regions.is_empty() {
            return Ok(());
        }
        self.open("lines", &[])?;
        for r in regions {
            if r.from == 0 {
                return Err(SerializeError::LineZero(r.from));
            }
            if r.to == Some(0) {
                return Err(SerializeError::NotPositive { element: "line", attribute: "to" });
            }
            self.empty(
                "line",
                &[
                    ("from", Some(r.from.to_string())),
                    ("to", r.to.map(|v| v.to_string())),
                    ("fromch", r.from_ch.map(|v| v.to_string())),
                    ("toch", r.to_ch.map(|v| v.to_string())),
                ],
            )?;
        }
        self.close("lines");
        Ok(())
    }

    fn content(&mut self, c: &Content) -> Result {
        let (execid, time) = match &c.stream {
            Some(hint) => {
                if !(hint.interval_secs.is_finite() && hint.interval_secs >= 0.0) {
                    return Err(SerializeError::BadInterval(hint.interval_secs));
                }
                (Some(hint.execid.to_string()), Some(format!("{}sec", hint.interval_secs)))
            }
            None => (None, None),
        };
        self.start_tag(
            "content",
            &[("format", Some(c.format.as_str().to_owned())), ("execid", execid), ("time", time)],
        )?;
        self.out.push('>');
        match c.format {
            ContentFormat::Text => escape_text(&mut self.out, &c.body)?,
            _ => write_cdata(&mut self.out, &c.body)?,
        }
        self.out.push_str("</content>");
        Ok(())
    }

    fn contents(&mut self, contents: &[Content]) -> Result {
        contents.iter().try_for_each(|c| self.content(c))
    }

    fn command(&mut self, command: &EiCommand) -> Result {
        match command {
            EiCommand::PrintOnConsole(p) => {
                if p.console_id.as_deref() == Some("") {
                    return Err(SerializeError::EmptyConsoleId);
                }
                self.open(
                    "printonconsole",
                    &[("consoleid", p.console_id.clone()), ("consoletitle", p.console_title.clone())],
                )?;
                self.contents(&p.contents)?;
                self.close("printonconsole");
            }
            EiCommand::AddMarker(m) => {
                self.open(
                    "addmarker",
                    &[("dest", m.dest.clone()), ("outclass", Some(m.outclass.to_string()))],
                )?;
                self.lines(&m.lines)?;
                if let Some(c) = &m.content {
                    self.content(c)?;
                }
                self.close("addmarker");
            }
            EiCommand::HighlightLines(h) => {
                self.open(
                    "highlightlines",
                    &[("dest", h.dest.clone()), ("outclass", Some(h.outclass.to_string()))],
                )?;
                self.lines(&h.regions)?;
                self.close("highlightlines");
            }
            EiCommand::DialogBox(d) => {
                for (attribute, value) in [("boxwidth", d.width), ("boxheight", d.height)] {
                    if value == Some(0) {
                        return Err(SerializeError::NotPositive { element: "dialogbox", attribute });
                    }
                }
                self.open(
                    "dialogbox",
                    &[
                        ("outclass", Some(d.outclass.to_string())),
                        ("boxtitle", Some(d.title.clone())),
                        ("boxwidth", d.width.map(|v| v.to_string())),
                        ("boxheight", d.height.map(|v| v.to_string())),
                    ],
                )?;
                self.contents(&d.contents)?;
                self.close("dialogbox");
            }
            EiCommand::Download(d) => {
                if !is_bare_filename(&d.filename) {
                    return Err(SerializeError::BadFilename(d.filename.clone()));
                }
                self.empty(
                    "download",
                    &[("execid", Some(d.execid.to_string())), ("filename", Some(d.filename.clone()))],
                )?;
            }
        }
        Ok(())
    }

    fn nested_commands(&mut self, commands: &[EiCommand]) -> Result {
        if commands.is_empty() {
            return Ok(());
        }
        self.open("eicommands", &[])?;
        commands.iter().try_for_each(|c| self.command(c))?;
        self.close("eicommands");
        Ok(())
    }

    fn action(&mut self, action: &EiAction) -> Result {
        match action {
            EiAction::OnCodeLineClick(a) => {
                self.open(
                    "oncodelineclick",
                    &[("dest", Some(a.dest.clone())), ("outclass", Some(a.outclass.to_string()))],
                )?;
                self.lines(&a.lines)?;
                self.nested_commands(&a.commands)?;
                self.close("oncodelineclick");
            }
            EiAction::OnClick(a) => {
                self.open("onclick", &[])?;
                if !a.selectors.is_empty() {
                    self.open("elements", &[])?;
                    for s in &a.selectors {
                        validate_selector(s)?;
                        self.empty("selector", &[("value", Some(s.clone()))])?;
                    }
                    self.close("elements");
                }
                self.nested_commands(&a.commands)?;
                self.close("onclick");
            }
        }
        Ok(())
    }
}

fn check_char(c: char) -> Result {
    let ok = matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}')
        || c >= '\u{10000}';
    if ok {
        Ok(())
    } else {
        Err(SerializeError::InvalidChar(c as u32))
    }
}

fn escape_attr(out: &mut String, value: &str) -> Result {
    for c in value.chars() {
        check_char(c)?;
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    Ok(())
}

fn escape_text(out: &mut String, value: &str) -> Result {
    for c in value.chars() {
        check_char(c)?;
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    Ok(())
}

/// CDATA sections cannot contain `]]>` and would lose carriage returns to
/// line-ending normalisation, so those are written outside the section.
fn write_cdata(out: &mut String, value: &str) -> Result {
    value.chars().try_for_each(check_char)?;
    let mut open = false;
    let mut rest = value;
    while !rest.is_empty() {
        if let Some(tail) = rest.strip_prefix('\r') {
            if open {
                out.push_str("]]>");
                open = false;
            }
            out.push_str("&#13;");
            rest = tail;
            continue;
        }
        let end = rest.find('\r').unwrap_or(rest.len());
        let (chunk, tail) = rest.split_at(end);
        let mut pieces = chunk.split("]]>").peekable();
        while let Some(piece) = pieces.next() {
            if !open {
                out.push_str("<![CDATA[");
                open = true;
            }
            out.push_str(piece);
            if pieces.peek().is_some() {
                // `]]` stays in this section, `>` starts the next one
                out.push_str("]]]]><![CDATA[>");
            }
        }
        rest = tail;
    }
    if open {
        out.push_str("]]>");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_self_closing() {
        assert_eq!(serialize(&EiOutDocument::new()).unwrap(), "<eiout/>");
    }

    #[test]
    fn dialog_title_is_an_attribute() {
        let doc = EiOutDocument::new().command(DialogBox {
            title: "Hey!".into(),
            contents: vec![Content::text("some message")],
            ..Default::default()
        });
        let xml = serialize(&doc).unwrap();
        assert!(xml.contains("boxtitle=\"Hey!\""), "{xml}");
        assert_eq!(parse(&xml).unwrap(), doc);
    }

    #[test]
    fn cdata_survives_terminators_and_carriage_returns() {
        for body in ["a]]>b", "]]>", "x\r\ny", "\r", "]]]>>", "<p>&amp;</p>", ""] {
            let doc = EiOutDocument::new().command(PrintOnConsole {
                contents: vec![Content::html(body)],
                ..Default::default()
            });
            let xml = serialize(&doc).unwrap();
            assert_eq!(parse(&xml).unwrap(), doc, "{body:?} -> {xml}");
        }
    }

    #[test]
    fn builder_errors() {
        let bad_line = EiOutDocument::new()
            .command(HighlightLines { regions: vec![LineRegion::line(0)], ..Default::default() });
        assert_eq!(serialize(&bad_line), Err(SerializeError::LineZero(0)));

        let bad_char = EiOutDocument::new().command(PrintOnConsole {
            contents: vec![Content::text("\u{1}")],
            ..Default::default()
        });
        assert_eq!(serialize(&bad_char), Err(SerializeError::InvalidChar(1)));

        let bad_selector = EiOutDocument::new()
            .action(OnClick { selectors: vec!["#".into()], commands: vec![] });
        assert!(matches!(serialize(&bad_selector), Err(SerializeError::Selector(_))));
    }
}
