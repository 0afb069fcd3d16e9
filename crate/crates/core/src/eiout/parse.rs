use std::fmt;

use roxmltree::{Document, Node, NodeType};

use super::selector::validate_selector;
use super::*;

/// A document that is not an `eiout` document, or a known element that is
/// structurally broken. Callers that display tool output fall back to
/// showing the raw text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: u32,
    pub column: u32,
    /// The offending element, when the error is tied to one.
    pub element: Option<String>,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.column)?;
        if let Some(element) = &self.element {
            write!(f, "<{element}>: ")?;
        }
        f.write_str(&self.message)
    }
}

/// Something the parser skipped or substituted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

pub fn parse(text: &str) -> std::result::Result<EiOutDocument, ParseError> {
    parse_with_warnings(text).map(|(doc, _)| doc)
}

pub fn parse_with_warnings(
    text: &str,
) -> std::result::Result<(EiOutDocument, Vec<ParseWarning>), ParseError> {
    let xml = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        ParseError { line: pos.row, column: pos.col, element: None, message: e.to_string() }
    })?;
    let mut parser = Parser { src: xml.input_text(), doc: &xml, warnings: Vec::new() };
    let root = xml.root_element();
    if root.tag_name().name() != "eiout" {
        return Err(parser.error(
            root,
            format!("root element is <{}>, expected <eiout>", root.tag_name().name()),
        ));
    }
    let doc = parser.document(root)?;
    Ok((doc, parser.warnings))
}

struct Parser<'a, 'input> {
    src: &'a str,
    doc: &'a Document<'input>,
    warnings: Vec<ParseWarning>,
}

type Result<T> = std::result::Result<T, ParseError>;

impl<'a, 'input> Parser<'a, 'input> {
    fn error(&self, node: Node<'_, 'input>, message: impl Into<String>) -> ParseError {
        let pos = self.doc.text_pos_at(node.range().start);
        ParseError {
            line: pos.row,
            column: pos.col,
            element: node.is_element().then(|| node.tag_name().name().to_owned()),
            message: message.into(),
        }
    }

    fn warn(&mut self, node: Node<'_, 'input>, message: impl Into<String>) {
        let pos = self.doc.text_pos_at(node.range().start);
        self.warnings.push(ParseWarning { line: pos.row, column: pos.col, message: message.into() });
    }

    /// Element children of a structural element. Stray text is reported and
    /// ignored.
    fn elements<'n>(&mut self, node: Node<'n, 'input>) -> Vec<Node<'n, 'input>> {
        let mut out = Vec::new();
        for child in node.children() {
            match child.node_type() {
                NodeType::Element => out.push(child),
                NodeType::Text if child.text().is_some_and(|t| !t.trim().is_empty()) => {
                    let parent = node.tag_name().name().to_owned();
                    self.warn(child, format!("ignoring text inside <{parent}>"));
                }
                _ => {}
            }
        }
        out
    }

    fn unknown(&mut self, node: Node<'_, 'input>, context: &str) {
        let name = node.tag_name().name().to_owned();
        self.warn(node, format!("skipping unknown element <{name}> in <{context}>"));
    }

    fn document(&mut self, root: Node<'_, 'input>) -> Result<EiOutDocument> {
        let mut doc = EiOutDocument::default();
        for child in self.elements(root) {
            match child.tag_name().name() {
                "eicommands" => doc.commands.extend(self.commands(child, false)?),
                "eiactions" => {
                    for action in self.elements(child) {
                        match action.tag_name().name() {
                            "oncodelineclick" => doc.actions.push(self.on_code_line_click(action)?),
                            "onclick" => doc.actions.push(self.on_click(action)?),
                            _ => self.unknown(action, "eiactions"),
                        }
                    }
                }
                _ => self.unknown(child, "eiout"),
            }
        }
        Ok(doc)
    }

    fn commands(&mut self, node: Node<'_, 'input>, nested: bool) -> Result<Vec<EiCommand>> {
        let mut out = Vec::new();
        for child in self.elements(node) {
            let command = match child.tag_name().name() {
                "printonconsole" => self.print_on_console(child)?,
                "addmarker" => self.add_marker(child)?,
                "highlightlines" => self.highlight_lines(child)?,
                "dialogbox" => self.dialog_box(child)?,
                "download" => self.download(child)?,
                "oncodelineclick" | "onclick" if nested => {
                    return Err(self.error(child, "actions cannot be nested inside an action"));
                }
                _ => {
                    self.unknown(child, "eicommands");
                    continue;
                }
            };
            out.push(command);
        }
        Ok(out)
    }

    fn outclass(&mut self, node: Node<'_, 'input>) -> Outclass {
        match node.attribute("outclass") {
            None => Outclass::Info,
            Some(value) => value.parse().unwrap_or_else(|()| {
                self.warn(node, format!("unknown outclass {value:?}, using info"));
                Outclass::Info
            }),
        }
    }

    fn number(&self, node: Node<'_, 'input>, attr: &str, min: u32) -> Result<Option<u32>> {
        match node.attribute(attr) {
            None => Ok(None),
            Some(raw) => match raw.trim().parse::<u32>() {
                Ok(n) if n >= min => Ok(Some(n)),
                _ => Err(self.error(
                    node,
                    format!("attribute {attr}={raw:?} must be an integer >= {min}"),
                )),
            },
        }
    }

    fn lines(&mut self, owner: Node<'_, 'input>) -> Result<Vec<LineRegion>> {
        let mut regions = Vec::new();
        for child in owner.children().filter(|c| c.has_tag_name("lines")) {
            for line in self.elements(child) {
                if line.tag_name().name() != "line" {
                    self.unknown(line, "lines");
                    continue;
                }
                let from = self
                    .number(line, "from", 1)?
                    .ok_or_else(|| self.error(line, "missing required attribute from"))?;
                regions.push(LineRegion {
                    from,
                    to: self.number(line, "to", 1)?,
                    from_ch: self.number(line, "fromch", 0)?,
                    to_ch: self.number(line, "toch", 0)?,
                });
            }
        }
        Ok(regions)
    }

    fn contents(&mut self, owner: Node<'_, 'input>) -> Result<Vec<Content>> {
        let mut out = Vec::new();
        for child in owner.children().filter(|c| c.has_tag_name("content")) {
            out.push(self.content(child)?);
        }
        Ok(out)
    }

    fn content(&mut self, node: Node<'_, 'input>) -> Result<Content> {
        let format = match node.attribute("format") {
            None => ContentFormat::Text,
            Some(f) => f
                .parse()
                .map_err(|()| self.error(node, format!("unknown content format {f:?}")))?,
        };
        let stream = match (node.attribute("execid"), node.attribute("time")) {
            (Some(execid), Some(time)) => {
                let execid =
                    execid.parse().map_err(|e: crate::InvalidExecId| self.error(node, e.to_string()))?;
                let interval_secs = parse_interval(time).ok_or_else(|| {
                    self.error(node, format!("invalid poll interval time={time:?}"))
                })?;
                Some(StreamHint { execid, interval_secs })
            }
            (None, None) => None,
            _ => {
                self.warn(node, "stream hint needs both execid and time, ignoring it");
                None
            }
        };
        Ok(Content { format, body: self.body(node), stream })
    }

    /// Character data of the element, or its raw inner markup when it has
    /// element children (inline html or svg).
    fn body(&self, node: Node<'_, 'input>) -> String {
        let only_text = node.children().all(|c| c.is_text());
        if only_text {
            return node.children().filter_map(|c| c.text()).collect();
        }
        let range = node.range();
        let element = &self.src[range.clone()];
        let open_end = start_tag_len(element);
        let close_start = element.rfind("</").unwrap_or(element.len());
        element[open_end..close_start].to_owned()
    }

    fn required_attr(&self, node: Node<'_, 'input>, attr: &str) -> Result<String> {
        node.attribute(attr)
            .map(str::to_owned)
            .ok_or_else(|| self.error(node, format!("missing required attribute {attr}")))
    }

    fn print_on_console(&mut self, node: Node<'_, 'input>) -> Result<EiCommand> {
        let console_id = node.attribute("consoleid").map(str::to_owned);
        if console_id.as_deref() == Some("") {
            return Err(self.error(node, "consoleid must not be empty"));
        }
        self.check_children(node, &["content"]);
        Ok(EiCommand::PrintOnConsole(PrintOnConsole {
            console_id,
            console_title: node.attribute("consoletitle").map(str::to_owned),
            contents: self.contents(node)?,
        }))
    }

    fn add_marker(&mut self, node: Node<'_, 'input>) -> Result<EiCommand> {
        self.check_children(node, &["lines", "content"]);
        let mut contents = self.contents(node)?;
        if contents.len() > 1 {
            return Err(self.error(node, "a marker carries at most one <content>"));
        }
        Ok(EiCommand::AddMarker(AddMarker {
            dest: node.attribute("dest").map(str::to_owned),
            outclass: self.outclass(node),
            lines: self.lines(node)?,
            content: contents.pop(),
        }))
    }

    fn highlight_lines(&mut self, node: Node<'_, 'input>) -> Result<EiCommand> {
        self.check_children(node, &["lines"]);
        Ok(EiCommand::HighlightLines(HighlightLines {
            dest: node.attribute("dest").map(str::to_owned),
            outclass: self.outclass(node),
            regions: self.lines(node)?,
        }))
    }

    fn dialog_box(&mut self, node: Node<'_, 'input>) -> Result<EiCommand> {
        self.check_children(node, &["content"]);
        Ok(EiCommand::DialogBox(DialogBox {
            outclass: self.outclass(node),
            title: node.attribute("boxtitle").unwrap_or_default().to_owned(),
            width: self.number(node, "boxwidth", 1)?,
            height: self.number(node, "boxheight", 1)?,
            contents: self.contents(node)?,
        }))
    }

    fn download(&mut self, node: Node<'_, 'input>) -> Result<EiCommand> {
        let execid = self.required_attr(node, "execid")?;
        let execid = execid.parse().map_err(|e: crate::InvalidExecId| self.error(node, e.to_string()))?;
        let filename = self.required_attr(node, "filename")?;
        if !is_bare_filename(&filename) {
            return Err(self.error(node, format!("filename {filename:?} must be a bare file name")));
        }
        Ok(EiCommand::Download(Download { execid, filename }))
    }

    fn action_commands(&mut self, node: Node<'_, 'input>) -> Result<Vec<EiCommand>> {
        let mut out = Vec::new();
        for child in node.children().filter(|c| c.has_tag_name("eicommands")) {
            out.extend(self.commands(child, true)?);
        }
        Ok(out)
    }

    fn on_code_line_click(&mut self, node: Node<'_, 'input>) -> Result<EiAction> {
        self.check_children(node, &["lines", "eicommands"]);
        Ok(EiAction::OnCodeLineClick(OnCodeLineClick {
            dest: self.required_attr(node, "dest")?,
            outclass: self.outclass(node),
            lines: self.lines(node)?,
            commands: self.action_commands(node)?,
        }))
    }

    fn on_click(&mut self, node: Node<'_, 'input>) -> Result<EiAction> {
        self.check_children(node, &["elements", "eicommands"]);
        let mut selectors = Vec::new();
        for elements in node.children().filter(|c| c.has_tag_name("elements")) {
            for sel in self.elements(elements) {
                if sel.tag_name().name() != "selector" {
                    self.unknown(sel, "elements");
                    continue;
                }
                let value = self.required_attr(sel, "value")?;
                validate_selector(&value).map_err(|e| self.error(sel, e.to_string()))?;
                selectors.push(value);
            }
        }
        Ok(EiAction::OnClick(OnClick { selectors, commands: self.action_commands(node)? }))
    }

    fn check_children(&mut self, node: Node<'_, 'input>, known: &[&str]) {
        let context = node.tag_name().name().to_owned();
        for child in self.elements(node) {
            if !known.contains(&child.tag_name().name()) {
                self.unknown(child, &context);
            }
        }
    }
}

/// Byte length of the start tag at the beginning of `element`.
fn start_tag_len(element: &str) -> usize {
    let mut quote = None;
    for (i, b) in element.bytes().enumerate() {
        match (quote, b) {
            (None, b'"' | b'\'') => quote = Some(b),
            (Some(q), _) if q == b => quote = None,
            (None, b'>') => return i + 1,
            _ => {}
        }
    }
    element.len()
}

/// Poll interval such as `60sec`, `60s`, `500ms`, `2min` or a bare number of
/// seconds.
pub(crate) fn parse_interval(raw: &str) -> Option<f64> {
    let raw = raw.trim();
    let split = raw
        .find(|c: char| !(c.is_ascii_digit() || c == '.'))
        .unwrap_or(raw.len());
    let (number, unit) = raw.split_at(split);
    let value: f64 = number.parse().ok()?;
    let scale = match unit.trim() {
        "" | "s" | "sec" | "secs" | "second" | "seconds" => 1.0,
        "ms" => 0.001,
        "min" | "mins" | "minute" | "minutes" => 60.0,
        _ => return None,
    };
    let secs = value * scale;
    secs.is_finite().then_some(secs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document() {
        assert_eq!(parse("<eiout/>").unwrap(), EiOutDocument::default());
        assert_eq!(parse("  \n<eiout></eiout>\n").unwrap(), EiOutDocument::default());
    }

    #[test]
    fn wrong_root_and_non_xml_are_errors() {
        let err = parse("<output/>").unwrap_err();
        assert!(err.message.contains("expected <eiout>"), "{err}");
        assert!(parse("Hello World").is_err());
        assert!(parse("<eiout>").is_err());
    }

    #[test]
    fn missing_line_from_names_the_element() {
        let err = parse(
            "<eiout><eicommands><highlightlines dest=\"/a\"><lines><line to=\"3\"/></lines>\
             </highlightlines></eicommands></eiout>",
        )
        .unwrap_err();
        assert_eq!(err.element.as_deref(), Some("line"));
        assert_eq!(err.line, 1);
    }

    #[test]
    fn defaults_and_unknown_outclass() {
        let (doc, warnings) = parse_with_warnings(
            "<eiout><eicommands>\
             <dialogbox outclass=\"fatal\"><content>hi</content></dialogbox>\
             </eicommands></eiout>",
        )
        .unwrap();
        let EiCommand::DialogBox(d) = &doc.commands[0] else { panic!() };
        assert_eq!(d.outclass, Outclass::Info);
        assert_eq!(d.contents[0].format, ContentFormat::Text);
        assert_eq!(d.contents[0].body, "hi");
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].message.contains("fatal"));
    }

    #[test]
    fn unknown_elements_are_skipped_with_warnings() {
        let (doc, warnings) = parse_with_warnings(
            "<eiout><future/><eicommands><blink/><printonconsole><content>x</content>\
             </printonconsole></eicommands></eiout>",
        )
        .unwrap();
        assert_eq!(doc.commands.len(), 1);
        assert_eq!(warnings.len(), 2);
    }

    #[test]
    fn nested_actions_are_rejected() {
        let err = parse(
            "<eiout><eiactions><onclick><elements><selector value=\"#a\"/></elements>\
             <eicommands><onclick/></eicommands></onclick></eiactions></eiout>",
        )
        .unwrap_err();
        assert_eq!(err.element.as_deref(), Some("onclick"));
    }

    #[test]
    fn inline_html_body_keeps_raw_markup() {
        let doc = parse(
            "<eiout><eicommands><printonconsole><content format=\"html\">\
             <span style=\"color: red;\" id=\"err1\">10 errors</span> were found in sum.c\
             </content></printonconsole></eicommands></eiout>",
        )
        .unwrap();
        let EiCommand::PrintOnConsole(p) = &doc.commands[0] else { panic!() };
        assert_eq!(
            p.contents[0].body,
            "<span style=\"color: red;\" id=\"err1\">10 errors</span> were found in sum.c"
        );
    }

    #[test]
    fn bad_selector_and_bad_filename() {
        assert!(parse(
            "<eiout><eiactions><onclick><elements><selector value=\"#\"/></elements>\
             </onclick></eiactions></eiout>"
        )
        .is_err());
        assert!(parse(
            "<eiout><eicommands><download execid=\"EI1\" filename=\"../x\"/></eicommands></eiout>"
        )
        .is_err());
    }

    #[test]
    fn interval_units() {
        assert_eq!(parse_interval("60sec"), Some(60.0));
        assert_eq!(parse_interval("60"), Some(60.0));
        assert_eq!(parse_interval("500ms"), Some(0.5));
        assert_eq!(parse_interval("2min"), Some(120.0));
        assert_eq!(parse_interval("0.25s"), Some(0.25));
        assert_eq!(parse_interval("soon"), None);
        assert_eq!(parse_interval("-1s"), None);
    }

    #[test]
    fn start_tag_length_skips_quoted_gt() {
        assert_eq!(start_tag_len("<a x=\"1>2\">b</a>"), 11);
    }
}
