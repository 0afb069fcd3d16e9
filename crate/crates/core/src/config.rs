//! App and example configuration files, and the registry built from them.
//!
//! An app config looks like
//!
//! ```xml
//! <app id="myapp" visible="true">
//!   <appinfo><title>My app</title><desc><short>Counts things</short></desc></appinfo>
//!   <execinfo method="cmdline" timeout="30">
//!     <cmdlineapp>/path-to/myapp _ei_parameters _ei_files</cmdlineapp>
//!   </execinfo>
//!   <parameters prefix="-" check="true">
//!     <selectone name="c">
//!       <option value="1"/>
//!       <option value="2"/>
//!       <default value="1"/>
//!     </selectone>
//!     <selectmany name="m"><option value="a"/><option value="b"/></selectmany>
//!     <flag name="v"/>
//!     <textfield name="n"/>
//!   </parameters>
//! </app>
//! ```
//!
//! and an example config like
//!
//! ```xml
//! <examples>
//!   <exset id="iter">
//!     <folder name="Examples_1">
//!       <file name="sum.c" url="https://example.org/sum.c"/>
//!       <github owner="o" repo="r" branch="main" path="src"/>
//!     </folder>
//!   </exset>
//! </examples>
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use crate::command::CommandTemplate;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfigDefaults {
    pub timeout_s: u64,
    pub max_output_bytes: u64,
}

impl Default for ConfigDefaults {
    fn default() -> Self {
        ConfigDefaults { timeout_s: 60, max_output_bytes: 10 * 1024 * 1024 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    SingleChoice,
    MultiChoice,
    Flag,
    FreeText,
}

impl ParamKind {
    pub fn element(self) -> &'static str {
        match self {
            ParamKind::SingleChoice => "selectone",
            ParamKind::MultiChoice => "selectmany",
            ParamKind::Flag => "flag",
            ParamKind::FreeText => "textfield",
        }
    }

    fn from_element(name: &str) -> Option<Self> {
        [ParamKind::SingleChoice, ParamKind::MultiChoice, ParamKind::Flag, ParamKind::FreeText]
            .into_iter()
            .find(|k| k.element() == name)
    }

    fn has_options(self) -> bool {
        matches!(self, ParamKind::SingleChoice | ParamKind::MultiChoice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionValue {
    pub value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl OptionValue {
    pub fn new(value: impl Into<String>) -> Self {
        OptionValue { value: value.into(), label: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub kind: ParamKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub options: Vec<OptionValue>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub defaults: Vec<String>,
}

impl ParameterSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind) -> Self {
        ParameterSpec { name: name.into(), label: None, kind, options: Vec::new(), defaults: Vec::new() }
    }

    pub fn with_options<S: Into<String>>(mut self, values: impl IntoIterator<Item = S>) -> Self {
        self.options.extend(values.into_iter().map(OptionValue::new));
        self
    }

    pub fn with_defaults<S: Into<String>>(mut self, values: impl IntoIterator<Item = S>) -> Self {
        self.defaults.extend(values.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSection {
    pub prefix: String,
    pub check: bool,
    pub params: Vec<ParameterSpec>,
}

impl Default for ParamSection {
    fn default() -> Self {
        ParamSection { prefix: "-".to_owned(), check: true, params: Vec::new() }
    }
}

impl ParamSection {
    pub fn param(&self, name: &str) -> Option<&ParameterSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// One registered tool.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppSpec {
    pub id: String,
    pub title: String,
    pub description: Option<String>,
    pub visible: bool,
    pub template: CommandTemplate,
    /// The template text as written in the config.
    pub cmdline: String,
    pub params: ParamSection,
    pub timeout_s: u64,
    pub max_output_bytes: u64,
}

impl AppSpec {
    /// The config file form of this app. Parsing it with the same defaults
    /// gives back an equal value.
    pub fn to_xml(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("<app id=\"{}\" visible=\"{}\">\n", esc(&self.id), self.visible));
        out.push_str(&format!("  <appinfo>\n    <title>{}</title>\n", esc(&self.title)));
        if let Some(d) = &self.description {
            out.push_str(&format!("    <desc><short>{}</short></desc>\n", esc(d)));
        }
        out.push_str("  </appinfo>\n");
        out.push_str(&format!(
            "  <execinfo method=\"cmdline\" timeout=\"{}\" maxoutput=\"{}\">\n    <cmdlineapp>{}</cmdlineapp>\n  </execinfo>\n",
            self.timeout_s,
            self.max_output_bytes,
            esc(&self.cmdline)
        ));
        out.push_str(&format!(
            "  <parameters prefix=\"{}\" check=\"{}\">\n",
            esc(&self.params.prefix),
            self.params.check
        ));
        for p in &self.params.params {
            out.push_str(&format!("    <{} name=\"{}\"", p.kind.element(), esc(&p.name)));
            if let Some(label) = &p.label {
                out.push_str(&format!(" label=\"{}\"", esc(label)));
            }
            out.push_str(">\n");
            for o in &p.options {
                out.push_str(&format!("      <option value=\"{}\"", esc(&o.value)));
                if let Some(label) = &o.label {
                    out.push_str(&format!(" label=\"{}\"", esc(label)));
                }
                out.push_str("/>\n");
            }
            for d in &p.defaults {
                out.push_str(&format!("      <default value=\"{}\"/>\n", esc(d)));
            }
            out.push_str(&format!("    </{}>\n", p.kind.element()));
        }
        out.push_str("  </parameters>\n</app>\n");
        out
    }
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
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
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ExampleNode {
    Folder { name: String, children: Vec<ExampleNode> },
    File { name: String, url: String },
    Github { owner: String, repo: String, branch: String, path: String },
}

/// A named tree of example inputs. The root is a folder named after the set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleSet {
    pub id: String,
    pub root: ExampleNode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Fatal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    pub message: String,
}

impl Diagnostic {
    fn at(severity: Severity, node: Option<&Node>, message: impl Into<String>) -> Self {
        let line = node.map(|n| n.document().text_pos_at(n.range().start).row);
        Diagnostic { severity, source: None, line, message: message.into() }
    }

    pub fn is_fatal(&self) -> bool {
        self.severity == Severity::Fatal
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(source) = &self.source {
            write!(f, "{}:", source.display())?;
        }
        if let Some(line) = self.line {
            write!(f, "{line}:")?;
        }
        if self.source.is_some() || self.line.is_some() {
            f.write_str(" ")?;
        }
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Fatal => "error",
        };
        write!(f, "{level}: {}", self.message)
    }
}

/// A successfully parsed value with the warnings met along the way.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<Diagnostic>,
}

/// Identifiers of apps and example sets: letters, digits, `_`, `-`, `.`.
pub fn is_valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

struct Collector {
    diags: Vec<Diagnostic>,
}

impl Collector {
    fn warn(&mut self, node: &Node, message: impl Into<String>) {
        self.diags.push(Diagnostic::at(Severity::Warning, Some(node), message));
    }

    fn fatal(&mut self, node: &Node, message: impl Into<String>) {
        self.diags.push(Diagnostic::at(Severity::Fatal, Some(node), message));
    }

    fn has_fatal(&self) -> bool {
        self.diags.iter().any(Diagnostic::is_fatal)
    }

    fn finish<T>(self, value: T) -> Result<Parsed<T>, Vec<Diagnostic>> {
        if self.has_fatal() {
            Err(self.diags)
        } else {
            Ok(Parsed { value, warnings: self.diags })
        }
    }

    /// Warn about attributes outside `allowed`.
    fn attrs(&mut self, node: &Node, allowed: &[&str]) {
        for a in node.attributes() {
            if !allowed.contains(&a.name()) {
                self.warn(node, format!("<{}>: unknown attribute {:?} ignored", node.tag_name().name(), a.name()));
            }
        }
    }

    /// Warn about stray text inside an element that only holds elements.
    fn stray_text(&mut self, node: &Node) {
        for child in node.children() {
            if child.is_text() && !child.text().unwrap_or("").trim().is_empty() {
                self.warn(&child, format!("<{}>: stray text ignored", node.tag_name().name()));
            }
        }
    }

    fn required<'a>(&mut self, node: &Node<'a, '_>, attr: &str) -> Option<&'a str> {
        let v = node.attribute(attr);
        if v.is_none() {
            self.fatal(node, format!("<{}> needs a {attr:?} attribute", node.tag_name().name()));
        }
        v
    }

    fn boolean(&mut self, node: &Node, attr: &str, default: bool) -> bool {
        match node.attribute(attr) {
            None => default,
            Some(v) => match v.trim() {
                "true" => true,
                "false" => false,
                other => {
                    self.fatal(node, format!("{attr}={other:?} is not true or false"));
                    default
                }
            },
        }
    }

    fn positive(&mut self, node: &Node, attr: &str, default: u64) -> u64 {
        match node.attribute(attr) {
            None => default,
            Some(v) => match v.trim().parse::<u64>() {
                Ok(n) if n > 0 => n,
                _ => {
                    self.fatal(node, format!("{attr}={v:?} is not a positive integer"));
                    default
                }
            },
        }
    }
}

fn elements<'a, 'input>(node: &Node<'a, 'input>) -> impl Iterator<Item = Node<'a, 'input>> {
    node.children().filter(Node::is_element)
}

fn xml_error(e: roxmltree::Error) -> Vec<Diagnostic> {
    let pos = e.pos();
    vec![Diagnostic {
        severity: Severity::Fatal,
        source: None,
        line: Some(pos.row),
        message: format!("malformed XML: {e}"),
    }]
}

/// Parse and check one app config.
pub fn parse_app_spec(xml: &str, defaults: &ConfigDefaults) -> Result<Parsed<AppSpec>, Vec<Diagnostic>> {
    let doc = Document::parse(xml).map_err(xml_error)?;
    let root = doc.root_element();
    let mut c = Collector { diags: Vec::new() };
    if root.tag_name().name() != "app" {
        c.fatal(&root, format!("expected <app>, found <{}>", root.tag_name().name()));
        return Err(c.diags);
    }
    app_from_node(&root, defaults, &mut c).map_or(Err(c.diags.clone()), |app| c.finish(app))
}

fn app_from_node(root: &Node, defaults: &ConfigDefaults, c: &mut Collector) -> Option<AppSpec> {
    c.attrs(root, &["id", "visible"]);
    c.stray_text(root);
    let id = c.required(root, "id").unwrap_or_default().to_owned();
    if root.has_attribute("id") && !is_valid_id(&id) {
        c.fatal(root, format!("app id {id:?} may only use letters, digits, '_', '-' and '.'"));
    }
    let visible = c.boolean(root, "visible", true);

    let mut title = None;
    let mut description = None;
    let mut exec = None;
    let mut params = None;
    for child in elements(root) {
        match child.tag_name().name() {
            "appinfo" => (title, description) = app_info(&child, c),
            "execinfo" => {
                if exec.is_some() {
                    c.fatal(&child, "more than one <execinfo>");
                }
                exec = exec_info(&child, defaults, c);
            }
            "parameters" => {
                if params.is_some() {
                    c.fatal(&child, "more than one <parameters>");
                }
                params = Some(parameters(&child, c));
            }
            other => c.warn(&child, format!("unknown element <{other}> ignored")),
        }
    }
    let Some((cmdline, template, timeout_s, max_output_bytes)) = exec else {
        if !c.has_fatal() {
            c.fatal(root, "<app> needs an <execinfo> with a <cmdlineapp>");
        }
        return None;
    };
    if c.has_fatal() {
        return None;
    }
    Some(AppSpec {
        title: title.unwrap_or_else(|| id.clone()),
        id,
        description,
        visible,
        template,
        cmdline,
        params: params.unwrap_or_default(),
        timeout_s,
        max_output_bytes,
    })
}

fn app_info(node: &Node, c: &mut Collector) -> (Option<String>, Option<String>) {
    c.attrs(node, &[]);
    let mut title = None;
    let mut description = None;
    for child in elements(node) {
        match child.tag_name().name() {
            "title" => title = child.text().map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned),
            "desc" => {
                for d in elements(&child) {
                    match d.tag_name().name() {
                        "short" => {
                            description = d.text().map(str::trim).filter(|t| !t.is_empty()).map(str::to_owned)
                        }
                        other => c.warn(&d, format!("unknown element <{other}> ignored")),
                    }
                }
            }
            other => c.warn(&child, format!("unknown element <{other}> ignored")),
        }
    }
    (title, description)
}

fn exec_info(
    node: &Node,
    defaults: &ConfigDefaults,
    c: &mut Collector,
) -> Option<(String, CommandTemplate, u64, u64)> {
    c.attrs(node, &["method", "timeout", "maxoutput"]);
    c.stray_text(node);
    if let Some(method) = node.attribute("method") {
        if method != "cmdline" {
            c.fatal(node, format!("execution method {method:?} is not supported"));
        }
    }
    let timeout = c.positive(node, "timeout", defaults.timeout_s);
    let max_output = c.positive(node, "maxoutput", defaults.max_output_bytes);
    let mut found = None;
    for child in elements(node) {
        match child.tag_name().name() {
            "cmdlineapp" => {
                let raw = child.text().unwrap_or("");
                match CommandTemplate::parse(raw) {
                    Ok(t) => found = Some((raw.trim().to_owned(), t)),
                    Err(e) => c.fatal(&child, e.to_string()),
                }
            }
            other => c.warn(&child, format!("unknown element <{other}> ignored")),
        }
    }
    if found.is_none() && !c.has_fatal() {
        c.fatal(node, "<execinfo> needs a <cmdlineapp>");
    }
    found.map(|(raw, t)| (raw, t, timeout, max_output))
}

fn parameters(node: &Node, c: &mut Collector) -> ParamSection {
    c.attrs(node, &["prefix", "check"]);
    c.stray_text(node);
    let mut section = ParamSection {
        prefix: node.attribute("prefix").unwrap_or("-").to_owned(),
        check: c.boolean(node, "check", true),
        params: Vec::new(),
    };
    if section.prefix.chars().any(char::is_whitespace) {
        c.fatal(node, "parameter prefix must not contain whitespace");
    }
    for child in elements(node) {
        let tag = child.tag_name().name();
        let Some(kind) = ParamKind::from_element(tag) else {
            c.warn(&child, format!("unknown element <{tag}> ignored"));
            continue;
        };
        if let Some(p) = parameter(&child, kind, c) {
            if section.param(&p.name).is_some() {
                c.fatal(&child, format!("parameter {:?} declared twice", p.name));
            }
            section.params.push(p);
        }
    }
    section
}

fn parameter(node: &Node, kind: ParamKind, c: &mut Collector) -> Option<ParameterSpec> {
    c.attrs(node, &["name", "label"]);
    c.stray_text(node);
    let name = c.required(node, "name")?;
    if name.is_empty() || name.contains(|ch: char| ch.is_whitespace() || ch == '\0') {
        c.fatal(node, format!("parameter name {name:?} must be non-empty without whitespace"));
    }
    let mut p = ParameterSpec::new(name, kind);
    p.label = node.attribute("label").map(str::to_owned);
    for child in elements(node) {
        match child.tag_name().name() {
            "option" if kind.has_options() => {
                c.attrs(&child, &["value", "label"]);
                if let Some(value) = c.required(&child, "value") {
                    if p.options.iter().any(|o| o.value == value) {
                        c.fatal(&child, format!("option {value:?} of {name:?} listed twice"));
                    }
                    p.options.push(OptionValue {
                        value: value.to_owned(),
                        label: child.attribute("label").map(str::to_owned),
                    });
                }
            }
            "option" => c.fatal(&child, format!("<{}> {name:?} cannot have options", kind.element())),
            "default" => {
                c.attrs(&child, &["value"]);
                if let Some(value) = c.required(&child, "value") {
                    p.defaults.push(value.to_owned());
                }
            }
            other => c.warn(&child, format!("unknown element <{other}> ignored")),
        }
    }
    if kind.has_options() {
        if p.options.is_empty() {
            c.fatal(node, format!("{name:?} needs at least one <option>"));
        }
        for d in &p.defaults {
            if !p.options.iter().any(|o| &o.value == d) {
                c.fatal(node, format!("default {d:?} of {name:?} is not one of its options"));
            }
        }
    }
    if kind == ParamKind::Flag && p.defaults.iter().any(|d| d != "true" && d != "false") {
        c.fatal(node, format!("default of flag {name:?} must be true or false"));
    }
    if kind != ParamKind::MultiChoice && p.defaults.len() > 1 {
        c.fatal(node, format!("{name:?} takes at most one default"));
    }
    Some(p)
}

/// Parse one example config holding any number of `exset`s.
pub fn parse_example_config(xml: &str) -> Result<Parsed<Vec<ExampleSet>>, Vec<Diagnostic>> {
    let doc = Document::parse(xml).map_err(xml_error)?;
    let root = doc.root_element();
    let mut c = Collector { diags: Vec::new() };
    if root.tag_name().name() != "examples" {
        c.fatal(&root, format!("expected <examples>, found <{}>", root.tag_name().name()));
        return Err(c.diags);
    }
    let sets = example_sets(&root, &mut c);
    c.finish(sets)
}

fn example_sets(root: &Node, c: &mut Collector) -> Vec<ExampleSet> {
    c.attrs(root, &[]);
    c.stray_text(root);
    let mut sets: Vec<ExampleSet> = Vec::new();
    for child in elements(root) {
        if child.tag_name().name() != "exset" {
            c.warn(&child, format!("unknown element <{}> ignored", child.tag_name().name()));
            continue;
        }
        c.attrs(&child, &["id"]);
        let Some(id) = c.required(&child, "id") else { continue };
        if !is_valid_id(id) {
            c.fatal(&child, format!("example set id {id:?} may only use letters, digits, '_', '-' and '.'"));
        }
        if sets.iter().any(|s| s.id == id) {
            c.fatal(&child, format!("example set {id:?} declared twice"));
        }
        let children = example_children(&child, c);
        sets.push(ExampleSet {
            id: id.to_owned(),
            root: ExampleNode::Folder { name: id.to_owned(), children },
        });
    }
    sets
}

fn example_children(node: &Node, c: &mut Collector) -> Vec<ExampleNode> {
    c.stray_text(node);
    let mut out = Vec::new();
    for child in elements(node) {
        match child.tag_name().name() {
            "folder" => {
                c.attrs(&child, &["name"]);
                let name = c.required(&child, "name").unwrap_or_default().to_owned();
                let children = example_children(&child, c);
                out.push(ExampleNode::Folder { name, children });
            }
            "file" => {
                c.attrs(&child, &["name", "url"]);
                c.stray_text(&child);
                let name = c.required(&child, "name");
                let url = c.required(&child, "url");
                if let (Some(name), Some(url)) = (name, url) {
                    out.push(ExampleNode::File { name: name.to_owned(), url: url.to_owned() });
                }
            }
            "github" => {
                c.attrs(&child, &["owner", "repo", "branch", "path"]);
                c.stray_text(&child);
                let fields = ["owner", "repo", "branch", "path"].map(|a| c.required(&child, a));
                if let [Some(owner), Some(repo), Some(branch), Some(path)] = fields {
                    out.push(ExampleNode::Github {
                        owner: owner.to_owned(),
                        repo: repo.to_owned(),
                        branch: branch.to_owned(),
                        path: path.to_owned(),
                    });
                }
            }
            other => c.warn(&child, format!("unknown element <{other}> ignored")),
        }
    }
    out
}

/// What a client sees of an app in a listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppSummary {
    pub id: String,
    pub title: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub visible: bool,
    pub parameters: ParamSection,
}

impl From<&AppSpec> for AppSummary {
    fn from(app: &AppSpec) -> Self {
        AppSummary {
            id: app.id.clone(),
            title: app.title.clone(),
            description: app.description.clone(),
            visible: app.visible,
            parameters: app.params.clone(),
        }
    }
}

/// The loaded set of apps and example sets. Never mutated after loading;
/// a reload builds a new one.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    apps: BTreeMap<String, AppSpec>,
    example_sets: BTreeMap<String, ExampleSet>,
    diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, thiserror::Error)]
#[error("cannot read config directory {path}: {source}")]
pub struct RegistryError {
    pub path: PathBuf,
    #[source]
    pub source: io::Error,
}

impl Registry {
    pub fn app(&self, id: &str) -> Option<&AppSpec> {
        self.apps.get(id)
    }

    pub fn apps(&self) -> impl Iterator<Item = &AppSpec> {
        self.apps.values()
    }

    /// Apps sorted by id, hidden ones only when asked for.
    pub fn list_apps(&self, include_hidden: bool) -> Vec<AppSummary> {
        self.apps.values().filter(|a| include_hidden || a.visible).map(AppSummary::from).collect()
    }

    pub fn example_set(&self, id: &str) -> Option<&ExampleSet> {
        self.example_sets.get(id)
    }

    pub fn example_sets(&self) -> impl Iterator<Item = &ExampleSet> {
        self.example_sets.values()
    }

    /// Every warning and error from loading, in file order.
    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.diagnostics
    }

    /// Build a registry from already parsed apps, e.g. in tests.
    pub fn from_apps(apps: impl IntoIterator<Item = AppSpec>) -> Self {
        let mut r = Registry::default();
        for app in apps {
            r.apps.entry(app.id.clone()).or_insert(app);
        }
        r
    }
}

/// Load every `*.xml` file below `dir`. Files are read in path order; a
/// file whose root is `<app>` is an app config, `<examples>` an example
/// config. Invalid files are left out and reported in the diagnostics, as is
/// any app or set whose id was already taken by an earlier file.
pub fn load_registry(dir: &Path, defaults: &ConfigDefaults) -> Result<Registry, RegistryError> {
    let mut files = Vec::new();
    collect_xml(dir, &mut files).map_err(|source| RegistryError { path: dir.to_owned(), source })?;
    files.sort();

    let mut registry = Registry::default();
    for path in files {
        let mut diags = Vec::new();
        load_file(&path, defaults, &mut registry, &mut diags);
        for mut d in diags {
            d.source = Some(path.clone());
            registry.diagnostics.push(d);
        }
    }
    Ok(registry)
}

fn collect_xml(dir: &Path, out: &mut Vec<PathBuf>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        let path = entry.path();
        let ty = entry.file_type()?;
        if ty.is_dir() {
            collect_xml(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "xml") {
            out.push(path);
        }
    }
    Ok(())
}

fn fatal(message: String) -> Diagnostic {
    Diagnostic { severity: Severity::Fatal, source: None, line: None, message }
}

fn load_file(path: &Path, defaults: &ConfigDefaults, registry: &mut Registry, diags: &mut Vec<Diagnostic>) {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return diags.push(fatal(format!("cannot read file: {e}"))),
    };
    let root_name = match Document::parse(&text) {
        Ok(doc) => doc.root_element().tag_name().name().to_owned(),
        Err(e) => return diags.extend(xml_error(e)),
    };
    match root_name.as_str() {
        "app" => match parse_app_spec(&text, defaults) {
            Ok(parsed) => {
                diags.extend(parsed.warnings);
                let app = parsed.value;
                if let Some(d) = check_executable(&app) {
                    diags.push(d);
                }
                if registry.apps.contains_key(&app.id) {
                    diags.push(fatal(format!("app id {:?} already defined by an earlier file; ignored", app.id)));
                } else {
                    registry.apps.insert(app.id.clone(), app);
                }
            }
            Err(errors) => diags.extend(errors),
        },
        "examples" => match parse_example_config(&text) {
            Ok(parsed) => {
                diags.extend(parsed.warnings);
                for set in parsed.value {
                    if registry.example_sets.contains_key(&set.id) {
                        diags.push(fatal(format!(
                            "example set {:?} already defined by an earlier file; ignored",
                            set.id
                        )));
                    } else {
                        registry.example_sets.insert(set.id.clone(), set);
                    }
                }
            }
            Err(errors) => diags.extend(errors),
        },
        other => diags.push(Diagnostic {
            severity: Severity::Warning,
            source: None,
            line: None,
            message: format!("root element <{other}> is neither <app> nor <examples>; file ignored"),
        }),
    }
}

/// The program of an app should be an existing executable file. A missing
/// one only warns, since it may be installed after the server starts.
pub fn check_executable(app: &AppSpec) -> Option<Diagnostic> {
    use std::os::unix::fs::PermissionsExt;
    let program = Path::new(app.template.program());
    let problem = if !program.is_absolute() {
        Some("is not an absolute path")
    } else {
        match fs::metadata(program) {
            Err(_) => Some("does not exist"),
            Ok(m) if !m.is_file() => Some("is not a file"),
            Ok(m) if m.permissions().mode() & 0o111 == 0 => Some("is not executable"),
            Ok(_) => None,
        }
    };
    problem.map(|p| Diagnostic {
        severity: Severity::Warning,
        source: None,
        line: None,
        message: format!("app {:?}: program {} {p}", app.id, program.display()),
    })
}
