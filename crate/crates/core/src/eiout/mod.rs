//! The ei output language.
//!
//! A tool that wants more than plain console text prints an XML document
//! rooted at `eiout`. The document holds a list of *commands* that clients
//! run immediately (print on a console, add a gutter marker, highlight lines,
//! open a dialog, download a file) and a list of *actions* that clients
//! register and run when the user clicks on a code line or on a previously
//! generated HTML element.
//!
//! ```xml
//! <eiout>
//!   <eicommands>
//!     <highlightlines dest="/path-to/sum.c">
//!       <lines><line from="5" to="10"/></lines>
//!     </highlightlines>
//!   </eicommands>
//!   <eiactions>
//!     <oncodelineclick dest="/path-to/sum.c" outclass="info">
//!       <lines><line from="17"/></lines>
//!       <eicommands>
//!         <dialogbox boxtitle="Hey!">
//!           <content format="text">some message</content>
//!         </dialogbox>
//!       </eicommands>
//!     </oncodelineclick>
//!   </eiactions>
//! </eiout>
//! ```
//!
//! This module parses such documents ([`parse`]), writes them back
//! ([`serialize`]), checks them against an execution ([`validate`]) and
//! projects them onto plain text for terminals ([`render_text`]).

pub mod arbitrary;
mod lint;
mod parse;
mod render;
pub mod selector;
mod write;

pub use lint::{validate, Lint, LintContext};
pub use parse::{parse, parse_with_warnings, ParseError, ParseWarning};
pub use render::render_text;
pub use write::{serialize, SerializeError};

use std::fmt;
use std::str::FromStr;

use crate::ExecId;

/// Severity of an effect. Clients pick icons and colours from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Outclass {
    #[default]
    Info,
    Error,
    Warning,
}

impl Outclass {
    pub fn as_str(self) -> &'static str {
        match self {
            Outclass::Info => "info",
            Outclass::Error => "error",
            Outclass::Warning => "warning",
        }
    }
}

impl FromStr for Outclass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "info" => Ok(Outclass::Info),
            "error" => Ok(Outclass::Error),
            "warning" => Ok(Outclass::Warning),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Outclass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ContentFormat {
    #[default]
    Text,
    Html,
    Svg,
    /// JSON chart data, passed through untouched.
    Graphs,
}

impl ContentFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ContentFormat::Text => "text",
            ContentFormat::Html => "html",
            ContentFormat::Svg => "svg",
            ContentFormat::Graphs => "graphs",
        }
    }
}

impl FromStr for ContentFormat {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "text" => Ok(ContentFormat::Text),
            "html" => Ok(ContentFormat::Html),
            "svg" => Ok(ContentFormat::Svg),
            "graphs" => Ok(ContentFormat::Graphs),
            _ => Err(()),
        }
    }
}

/// Tells the client that more output for this content will appear in the
/// stream directory of `execid` and should be polled every `interval_secs`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamHint {
    pub execid: ExecId,
    pub interval_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Content {
    pub format: ContentFormat,
    pub body: String,
    pub stream: Option<StreamHint>,
}

impl Content {
    pub fn new(format: ContentFormat, body: impl Into<String>) -> Self {
        Content { format, body: body.into(), stream: None }
    }

    pub fn text(body: impl Into<String>) -> Self {
        Self::new(ContentFormat::Text, body)
    }

    pub fn html(body: impl Into<String>) -> Self {
        Self::new(ContentFormat::Html, body)
    }

    pub fn streamed(mut self, execid: ExecId, interval_secs: f64) -> Self {
        self.stream = Some(StreamHint { execid, interval_secs });
        self
    }
}

/// A line, or a range of lines, optionally narrowed to columns.
///
/// A region without `to` covers the single line `from`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineRegion {
    pub from: u32,
    pub to: Option<u32>,
    pub from_ch: Option<u32>,
    pub to_ch: Option<u32>,
}

impl LineRegion {
    pub fn line(n: u32) -> Self {
        LineRegion { from: n, to: None, from_ch: None, to_ch: None }
    }

    pub fn range(from: u32, to: u32) -> Self {
        LineRegion { from, to: Some(to), from_ch: None, to_ch: None }
    }

    pub fn last_line(&self) -> u32 {
        self.to.unwrap_or(self.from)
    }
}

impl fmt::Display for LineRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to {
            Some(to) if to != self.from => write!(f, "{}-{}", self.from, to),
            _ => write!(f, "{}", self.from),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrintOnConsole {
    /// `None` routes to the default console.
    pub console_id: Option<String>,
    pub console_title: Option<String>,
    pub contents: Vec<Content>,
}

/// `dest` may be omitted on commands nested in an `oncodelineclick`, in
/// which case they apply to the action's file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AddMarker {
    pub dest: Option<String>,
    pub outclass: Outclass,
    pub lines: Vec<LineRegion>,
    pub content: Option<Content>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct HighlightLines {
    pub dest: Option<String>,
    pub outclass: Outclass,
    pub regions: Vec<LineRegion>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DialogBox {
    pub outclass: Outclass,
    pub title: String,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub contents: Vec<Content>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Download {
    pub execid: ExecId,
    pub filename: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EiCommand {
    PrintOnConsole(PrintOnConsole),
    AddMarker(AddMarker),
    HighlightLines(HighlightLines),
    DialogBox(DialogBox),
    Download(Download),
}

impl EiCommand {
    pub fn element_name(&self) -> &'static str {
        match self {
            EiCommand::PrintOnConsole(_) => "printonconsole",
            EiCommand::AddMarker(_) => "addmarker",
            EiCommand::HighlightLines(_) => "highlightlines",
            EiCommand::DialogBox(_) => "dialogbox",
            EiCommand::Download(_) => "download",
        }
    }

    pub fn contents(&self) -> &[Content] {
        match self {
            EiCommand::PrintOnConsole(p) => &p.contents,
            EiCommand::AddMarker(m) => m.content.as_slice(),
            EiCommand::DialogBox(d) => &d.contents,
            EiCommand::HighlightLines(_) | EiCommand::Download(_) => &[],
        }
    }
}

impl From<PrintOnConsole> for EiCommand {
    fn from(c: PrintOnConsole) -> Self {
        EiCommand::PrintOnConsole(c)
    }
}

impl From<AddMarker> for EiCommand {
    fn from(c: AddMarker) -> Self {
        EiCommand::AddMarker(c)
    }
}

impl From<HighlightLines> for EiCommand {
    fn from(c: HighlightLines) -> Self {
        EiCommand::HighlightLines(c)
    }
}

impl From<DialogBox> for EiCommand {
    fn from(c: DialogBox) -> Self {
        EiCommand::DialogBox(c)
    }
}

impl From<Download> for EiCommand {
    fn from(c: Download) -> Self {
        EiCommand::Download(c)
    }
}

/// Commands run when the user clicks the marker placed on `lines` of `dest`.
/// A second click undoes them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OnCodeLineClick {
    pub dest: String,
    pub outclass: Outclass,
    pub lines: Vec<LineRegion>,
    pub commands: Vec<EiCommand>,
}

/// Commands run when the user clicks an element matching one of `selectors`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OnClick {
    pub selectors: Vec<String>,
    pub commands: Vec<EiCommand>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EiAction {
    OnCodeLineClick(OnCodeLineClick),
    OnClick(OnClick),
}

impl EiAction {
    pub fn commands(&self) -> &[EiCommand] {
        match self {
            EiAction::OnCodeLineClick(a) => &a.commands,
            EiAction::OnClick(a) => &a.commands,
        }
    }
}

impl From<OnCodeLineClick> for EiAction {
    fn from(a: OnCodeLineClick) -> Self {
        EiAction::OnCodeLineClick(a)
    }
}

impl From<OnClick> for EiAction {
    fn from(a: OnClick) -> Self {
        EiAction::OnClick(a)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EiOutDocument {
    pub commands: Vec<EiCommand>,
    pub actions: Vec<EiAction>,
}

impl EiOutDocument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty() && self.actions.is_empty()
    }

    pub fn command(mut self, command: impl Into<EiCommand>) -> Self {
        self.commands.push(command.into());
        self
    }

    pub fn action(mut self, action: impl Into<EiAction>) -> Self {
        self.actions.push(action.into());
        self
    }

    /// Every content carrying a stream hint, top-level and nested.
    pub fn stream_hints(&self) -> Vec<&StreamHint> {
        self.all_commands()
            .flat_map(|c| c.contents())
            .filter_map(|c| c.stream.as_ref())
            .collect()
    }

    /// Top-level commands followed by the commands nested in actions.
    pub fn all_commands(&self) -> impl Iterator<Item = &EiCommand> {
        self.commands
            .iter()
            .chain(self.actions.iter().flat_map(|a| a.commands()))
    }
}

/// True for a name that can be used as a single path component.
pub(crate) fn is_bare_filename(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.contains(['/', '\\', '\0'])
}
