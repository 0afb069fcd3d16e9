//! Building the argument vector of a tool run.
//!
//! A command template such as `/path-to/myapp _ei_parameters _ei_files` is
//! split on whitespace once, when the app config is loaded. At execution
//! time every placeholder token is replaced by zero or more context tokens.
//! Client-supplied strings only ever become whole argv elements, so they can
//! neither create token boundaries nor reach a shell.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::{ParamKind, ParamSection};
use crate::ExecId;

/// The eight template parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Placeholder {
    Parameters,
    Files,
    Outline,
    ExecId,
    Stream,
    Download,
    SessionId,
    ClientId,
}

impl Placeholder {
    pub const ALL: [Placeholder; 8] = [
        Placeholder::Parameters,
        Placeholder::Files,
        Placeholder::Outline,
        Placeholder::ExecId,
        Placeholder::Stream,
        Placeholder::Download,
        Placeholder::SessionId,
        Placeholder::ClientId,
    ];

    pub fn token(self) -> &'static str {
        match self {
            Placeholder::Parameters => "_ei_parameters",
            Placeholder::Files => "_ei_files",
            Placeholder::Outline => "_ei_outline",
            Placeholder::ExecId => "_ei_execid",
            Placeholder::Stream => "_ei_stream",
            Placeholder::Download => "_ei_download",
            Placeholder::SessionId => "_ei_sessionid",
            Placeholder::ClientId => "_ei_clientid",
        }
    }

    /// List placeholders expand to any number of argv elements and must
    /// stand alone as a token.
    pub fn is_list(self) -> bool {
        matches!(self, Placeholder::Parameters | Placeholder::Files | Placeholder::Outline)
    }

    fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.token() == token)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("command template is empty")]
    Empty,
    #[error("unknown template parameter {0}")]
    UnknownPlaceholder(String),
    #[error("{0} must be a whitespace-separated token on its own")]
    EmbeddedList(&'static str),
    #[error("the program to run must be a literal path, not {0:?}")]
    PlaceholderProgram(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Value(Placeholder),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TemplateToken {
    Literal(String),
    List(Placeholder),
    /// Literal text with single-valued placeholders spliced in, e.g.
    /// `--out=_ei_download/result.zip`.
    Pattern(Vec<Segment>),
}

/// A tokenized command template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandTemplate {
    tokens: Vec<TemplateToken>,
}

impl CommandTemplate {
    pub fn parse(raw: &str) -> Result<Self, TemplateError> {
        let mut tokens = Vec::new();
        for (i, word) in raw.split_whitespace().enumerate() {
            let token = parse_token(word)?;
            if i == 0 && !matches!(token, TemplateToken::Literal(_)) {
                return Err(TemplateError::PlaceholderProgram(word.to_owned()));
            }
            tokens.push(token);
        }
        if tokens.is_empty() {
            return Err(TemplateError::Empty);
        }
        Ok(CommandTemplate { tokens })
    }

    pub fn program(&self) -> &str {
        match &self.tokens[0] {
            TemplateToken::Literal(p) => p,
            _ => unreachable!("program token is always literal"),
        }
    }

    pub fn uses(&self, placeholder: Placeholder) -> bool {
        self.tokens.iter().any(|t| match t {
            TemplateToken::List(p) => *p == placeholder,
            TemplateToken::Pattern(segments) => segments.contains(&Segment::Value(placeholder)),
            TemplateToken::Literal(_) => false,
        })
    }

    pub fn expand(&self, ctx: &ExpansionContext) -> Argv {
        let mut argv = Vec::new();
        for token in &self.tokens {
            match token {
                TemplateToken::Literal(s) => argv.push(s.clone()),
                TemplateToken::List(p) => argv.extend(ctx.list(*p)),
                TemplateToken::Pattern(segments) => {
                    let mut word = String::new();
                    for segment in segments {
                        match segment {
                            Segment::Text(t) => word.push_str(t),
                            Segment::Value(p) => word.push_str(&ctx.single(*p)),
                        }
                    }
                    argv.push(word);
                }
            }
        }
        Argv(argv)
    }
}

fn parse_token(word: &str) -> Result<TemplateToken, TemplateError> {
    if let Some(p) = Placeholder::from_token(word) {
        return Ok(if p.is_list() {
            TemplateToken::List(p)
        } else {
            TemplateToken::Pattern(vec![Segment::Value(p)])
        });
    }
    let mut segments = Vec::new();
    let mut rest = word;
    while let Some(at) = rest.find("_ei_") {
        let name_len = rest[at + 4..]
            .find(|c: char| !c.is_ascii_lowercase())
            .unwrap_or(rest.len() - at - 4);
        let candidate = &rest[at..at + 4 + name_len];
        let p = Placeholder::from_token(candidate)
            .ok_or_else(|| TemplateError::UnknownPlaceholder(candidate.to_owned()))?;
        if p.is_list() {
            return Err(TemplateError::EmbeddedList(p.token()));
        }
        if at > 0 {
            segments.push(Segment::Text(rest[..at].to_owned()));
        }
        segments.push(Segment::Value(p));
        rest = &rest[at + candidate.len()..];
    }
    if segments.is_empty() {
        return Ok(TemplateToken::Literal(word.to_owned()));
    }
    if !rest.is_empty() {
        segments.push(Segment::Text(rest.to_owned()));
    }
    Ok(TemplateToken::Pattern(segments))
}

/// Free function form of [`CommandTemplate::expand`].
pub fn expand_template(template: &CommandTemplate, ctx: &ExpansionContext) -> Argv {
    template.expand(ctx)
}

/// Everything a template can refer to, for one execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpansionContext {
    pub serialized_params: Vec<String>,
    pub file_paths: Vec<PathBuf>,
    pub outline_tokens: Vec<String>,
    pub execid: ExecId,
    pub stream_dir: PathBuf,
    pub download_dir: PathBuf,
    pub session_id: String,
    pub client_id: String,
}

impl ExpansionContext {
    fn list(&self, p: Placeholder) -> Vec<String> {
        match p {
            Placeholder::Parameters => self.serialized_params.clone(),
            Placeholder::Files => self.file_paths.iter().map(|p| path_string(p)).collect(),
            Placeholder::Outline => self.outline_tokens.clone(),
            single => vec![self.single(single)],
        }
    }

    fn single(&self, p: Placeholder) -> String {
        match p {
            Placeholder::ExecId => self.execid.to_string(),
            Placeholder::Stream => path_string(&self.stream_dir),
            Placeholder::Download => path_string(&self.download_dir),
            Placeholder::SessionId => self.session_id.clone(),
            Placeholder::ClientId => self.client_id.clone(),
            list => self.list(list).join(" "),
        }
    }
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// The argument vector of one run. Element 0 is the program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Argv(Vec<String>);

impl Argv {
    pub fn new(elements: Vec<String>) -> Self {
        assert!(!elements.is_empty(), "argv needs a program");
        Argv(elements)
    }

    pub fn program(&self) -> &str {
        &self.0[0]
    }

    pub fn args(&self) -> &[String] {
        &self.0[1..]
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    /// A shell-quoted rendering for logs. Never executed.
    pub fn preview(&self) -> String {
        shlex::try_join(self.0.iter().map(String::as_str))
            .unwrap_or_else(|_| format!("{:?}", self.0))
    }
}

impl From<Argv> for Vec<String> {
    fn from(argv: Argv) -> Self {
        argv.0
    }
}

/// Parameter values sent by a client, keyed by parameter name.
pub type ParamValues = BTreeMap<String, Vec<String>>;

/// A file uploaded with an execute request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFile {
    /// Relative path as chosen by the client, e.g. `src/sum.c`.
    pub path: String,
    pub content: Vec<u8>,
}

/// A client's request to run one app.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ExecutionRequest {
    pub app_id: String,
    pub parameters: ParamValues,
    pub files: Vec<InputFile>,
    pub outline_entities: Vec<String>,
    pub client_id: String,
    pub session_token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationReason {
    UnknownParameter,
    NotAnOption(String),
    TooManyValues(usize),
    FlagValue(String),
    /// NUL cannot be passed in an argv element.
    NulByte,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub param: String,
    pub reason: ViolationReason,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = &self.param;
        match &self.reason {
            ViolationReason::UnknownParameter => write!(f, "{name}: unknown parameter"),
            ViolationReason::NotAnOption(v) => write!(f, "{name}: {v:?} is not one of the allowed values"),
            ViolationReason::TooManyValues(n) => write!(f, "{name}: takes a single value, got {n}"),
            ViolationReason::FlagValue(v) => write!(f, "{name}: flag takes no value (got {v:?})"),
            ViolationReason::NulByte => write!(f, "{name}: value contains a NUL byte"),
        }
    }
}

/// Check client values against a parameter section.
///
/// With `check` off, unknown names and values pass; NUL bytes are rejected
/// either way since no argv element can carry them.
pub fn validate_parameters(spec: &ParamSection, provided: &ParamValues) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let mut push = |param: &str, reason| violations.push(Violation { param: param.to_owned(), reason });
    for (name, values) in provided {
        if name.contains('\0') || values.iter().any(|v| v.contains('\0')) {
            push(name, ViolationReason::NulByte);
            continue;
        }
        if !spec.check {
            continue;
        }
        let Some(param) = spec.param(name) else {
            push(name, ViolationReason::UnknownParameter);
            continue;
        };
        let single = matches!(param.kind, ParamKind::SingleChoice | ParamKind::Flag | ParamKind::FreeText);
        if single && values.len() > 1 {
            push(name, ViolationReason::TooManyValues(values.len()));
            continue;
        }
        match param.kind {
            ParamKind::SingleChoice | ParamKind::MultiChoice => {
                for v in values {
                    if !param.options.iter().any(|o| &o.value == v) {
                        push(name, ViolationReason::NotAnOption(v.clone()));
                    }
                }
            }
            ParamKind::Flag => {
                for v in values {
                    if v != "true" && v != "false" {
                        push(name, ViolationReason::FlagValue(v.clone()));
                    }
                }
            }
            ParamKind::FreeText => {}
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Turn validated values into argv tokens: `prefix+name` followed by the
/// value as its own token, repeated per value, in declaration order.
///
/// Absent parameters fall back to their defaults and are omitted when there
/// are none. A flag given as `[]` or `["true"]` is on and emits only
/// `prefix+name`. Names unknown to the section (possible when `check` is off)
/// follow the declared ones in name order.
pub fn serialize_parameters(spec: &ParamSection, provided: &ParamValues) -> Vec<String> {
    let mut out = Vec::new();
    for param in &spec.params {
        let values = match provided.get(&param.name) {
            Some(values) => values,
            None if param.defaults.is_empty() => continue,
            None => &param.defaults,
        };
        let flag = format!("{}{}", spec.prefix, param.name);
        if param.kind == ParamKind::Flag {
            if values.last().is_none_or(|v| v != "false") {
                out.push(flag);
            }
            continue;
        }
        for v in values {
            out.push(flag.clone());
            out.push(v.clone());
        }
    }
    for (name, values) in provided {
        if spec.param(name).is_some() {
            continue;
        }
        let flag = format!("{}{}", spec.prefix, name);
        if values.is_empty() {
            out.push(flag.clone());
        }
        for v in values {
            out.push(flag.clone());
            out.push(v.clone());
        }
    }
    out
}

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("empty file path")]
    EmptyPath,
    #[error("file path {0:?} must be relative")]
    Absolute(String),
    #[error("file path {0:?} must not contain '..'")]
    ParentSegment(String),
    #[error("file path {0:?} contains a NUL byte")]
    NulByte(String),
    #[error("file path {0:?} collides with another uploaded file")]
    Collision(String),
    #[error("work directory {0} is not absolute")]
    RelativeWorkdir(PathBuf),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Normalize a client-chosen relative path. `.` and empty segments are
/// dropped; `..` anywhere is refused.
pub fn normalize_virtual_path(raw: &str) -> Result<PathBuf, FileError> {
    if raw.contains('\0') {
        return Err(FileError::NulByte(raw.to_owned()));
    }
    if raw.starts_with('/') {
        return Err(FileError::Absolute(raw.to_owned()));
    }
    let mut out = PathBuf::new();
    for segment in raw.split('/') {
        match segment {
            "" | "." => {}
            ".." => return Err(FileError::ParentSegment(raw.to_owned())),
            s => out.push(s),
        }
    }
    if out.as_os_str().is_empty() {
        return Err(FileError::EmptyPath);
    }
    Ok(out)
}

/// Write uploaded files under `workdir`, keeping their relative layout.
/// Returns absolute paths in request order.
pub fn materialize_files(files: &[InputFile], workdir: &Path) -> Result<Vec<PathBuf>, FileError> {
    if !workdir.is_absolute() {
        return Err(FileError::RelativeWorkdir(workdir.to_owned()));
    }
    let mut relative = Vec::with_capacity(files.len());
    let mut file_set = HashSet::new();
    let mut dir_set = HashSet::new();
    for f in files {
        let rel = normalize_virtual_path(&f.path)?;
        if !file_set.insert(rel.clone()) {
            return Err(FileError::Collision(f.path.clone()));
        }
        dir_set.extend(rel.ancestors().skip(1).filter(|a| !a.as_os_str().is_empty()).map(Path::to_path_buf));
        relative.push(rel);
    }
    if let Some(clash) = relative.iter().find(|r| dir_set.contains(*r)) {
        return Err(FileError::Collision(clash.to_string_lossy().into_owned()));
    }

    let mut out = Vec::with_capacity(files.len());
    for (f, rel) in files.iter().zip(relative) {
        let path = workdir.join(rel);
        let io_err = |source| FileError::Io { path: path.clone(), source };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err)?;
        }
        let mut file = fs::OpenOptions::new().write(true).create_new(true).open(&path).map_err(io_err)?;
        io::Write::write_all(&mut file, &f.content).map_err(io_err)?;
        out.push(path);
    }
    Ok(out)
}
