use std::collections::HashSet;
use std::fmt;

use super::*;

/// What an execution knows about itself: the absolute paths of its input
/// files and the execution ids it may refer to.
#[derive(Debug, Clone, Default)]
pub struct LintContext {
    pub known_files: HashSet<String>,
    pub known_execids: HashSet<ExecId>,
}

impl LintContext {
    pub fn new(
        files: impl IntoIterator<Item = impl Into<String>>,
        execids: impl IntoIterator<Item = ExecId>,
    ) -> Self {
        LintContext {
            known_files: files.into_iter().map(Into::into).collect(),
            known_execids: execids.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lint {
    /// A marker or highlight targets a file that was not an input.
    UnknownDest { dest: String },
    /// A marker or highlight outside any `oncodelineclick` has no `dest`.
    MissingDest { element: &'static str },
    /// A download or stream hint names an execution other than the known ones.
    UnknownExecid { execid: ExecId },
    /// `to` lies before `from`.
    BadRegion { from: u32, to: u32 },
    ZeroPollInterval { execid: ExecId },
}

impl Lint {
    pub fn code(&self) -> &'static str {
        match self {
            Lint::UnknownDest { .. } => "unknown-dest",
            Lint::MissingDest { .. } => "missing-dest",
            Lint::UnknownExecid { .. } => "unknown-execid",
            Lint::BadRegion { .. } => "bad-region",
            Lint::ZeroPollInterval { .. } => "zero-poll-interval",
        }
    }
}

impl fmt::Display for Lint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lint::UnknownDest { dest } => write!(f, "{}: {dest} is not an input file", self.code()),
            Lint::MissingDest { element } => write!(f, "{}: <{element}> has no dest", self.code()),
            Lint::UnknownExecid { execid } => write!(f, "{}: {execid}", self.code()),
            Lint::BadRegion { from, to } => write!(f, "{}: line {to} is before {from}", self.code()),
            Lint::ZeroPollInterval { execid } => {
                write!(f, "{}: stream of {execid} polled every 0 s", self.code())
            }
        }
    }
}

pub fn validate(doc: &EiOutDocument, ctx: &LintContext) -> Vec<Lint> {
    let mut lints = Vec::new();
    for command in &doc.commands {
        check_command(command, None, ctx, &mut lints);
    }
    for action in &doc.actions {
        match action {
            EiAction::OnCodeLineClick(a) => {
                check_dest(Some(&a.dest), "oncodelineclick", ctx, &mut lints);
                check_regions(&a.lines, &mut lints);
                for command in &a.commands {
                    check_command(command, Some(&a.dest), ctx, &mut lints);
                }
            }
            EiAction::OnClick(a) => {
                for command in &a.commands {
                    check_command(command, None, ctx, &mut lints);
                }
            }
        }
    }
    lints
}

fn check_command(command: &EiCommand, inherited: Option<&str>, ctx: &LintContext, lints: &mut Vec<Lint>) {
    match command {
        EiCommand::AddMarker(m) => {
            check_dest(m.dest.as_deref().or(inherited), "addmarker", ctx, lints);
            check_regions(&m.lines, lints);
        }
        EiCommand::HighlightLines(h) => {
            check_dest(h.dest.as_deref().or(inherited), "highlightlines", ctx, lints);
            check_regions(&h.regions, lints);
        }
        EiCommand::Download(d) => check_execid(&d.execid, ctx, lints),
        EiCommand::PrintOnConsole(_) | EiCommand::DialogBox(_) => {}
    }
    for content in command.contents() {
        if let Some(hint) = &content.stream {
            check_execid(&hint.execid, ctx, lints);
            if hint.interval_secs == 0.0 {
                lints.push(Lint::ZeroPollInterval { execid: hint.execid.clone() });
            }
        }
    }
}

fn check_dest(dest: Option<&str>, element: &'static str, ctx: &LintContext, lints: &mut Vec<Lint>) {
    match dest {
        None => lints.push(Lint::MissingDest { element }),
        Some(d) if !ctx.known_files.contains(d) => lints.push(Lint::UnknownDest { dest: d.to_owned() }),
        Some(_) => {}
    }
}

fn check_execid(execid: &ExecId, ctx: &LintContext, lints: &mut Vec<Lint>) {
    if !ctx.known_execids.contains(execid) {
        lints.push(Lint::UnknownExecid { execid: execid.clone() });
    }
}

fn check_regions(regions: &[LineRegion], lints: &mut Vec<Lint>) {
    for r in regions {
        if let Some(to) = r.to {
            if to < r.from {
                lints.push(Lint::BadRegion { from: r.from, to });
            }
        }
    }
}
