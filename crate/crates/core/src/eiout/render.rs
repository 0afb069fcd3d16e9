use super::*;

/// Plain-text projection of a document for terminals.
///
/// Console text comes first, default console before named ones, each named
/// console under a `--- title (console id) ---` header. Then the effects in
/// document order:
///
/// ```text
/// /p/sum.c:5-10 [INFO]
/// /p/sum.c:4 [WARNING] unused variable
/// === Hey! [INFO] ===
/// some message
/// download: EI65231/file.zip
/// interactive action at /p/sum.c:17 (2 commands)
/// ```
///
/// Non-text bodies become `[html content]`, `[svg content]` or
/// `[graphs content]`. The result has no trailing newline.
pub fn render_text(doc: &EiOutDocument) -> String {
    let mut default_console: Vec<String> = Vec::new();
    let mut consoles: Vec<(String, Option<String>, Vec<String>)> = Vec::new();
    let mut effects: Vec<String> = Vec::new();

    for command in &doc.commands {
        match command {
            EiCommand::PrintOnConsole(p) => {
                let target = match &p.console_id {
                    None => &mut default_console,
                    Some(id) => {
                        let idx = match consoles.iter().position(|(cid, _, _)| cid == id) {
                            Some(idx) => idx,
                            None => {
                                consoles.push((id.clone(), None, Vec::new()));
                                consoles.len() - 1
                            }
                        };
                        let entry = &mut consoles[idx];
                        if entry.1.is_none() {
                            entry.1 = p.console_title.clone();
                        }
                        &mut entry.2
                    }
                };
                target.extend(p.contents.iter().map(render_content));
            }
            other => effects.extend(render_effect(other)),
        }
    }

    let mut blocks = default_console;
    for (id, title, lines) in consoles {
        blocks.push(match title {
            Some(title) => format!("--- {title} (console {id}) ---"),
            None => format!("--- console {id} ---"),
        });
        blocks.extend(lines);
    }
    blocks.extend(effects);
    for action in &doc.actions {
        blocks.push(render_action(action));
    }
    blocks.join("\n")
}

fn render_content(c: &Content) -> String {
    let mut out = match c.format {
        ContentFormat::Text => c.body.strip_suffix('\n').unwrap_or(&c.body).to_owned(),
        other => format!("[{} content]", other.as_str()),
    };
    if let Some(hint) = &c.stream {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(&format!("[streaming from {} every {}s]", hint.execid, hint.interval_secs));
    }
    out
}

fn region_lines(dest: Option<&str>, regions: &[LineRegion], class: Outclass, message: Option<&str>) -> Vec<String> {
    let dest = dest.unwrap_or("?");
    let class = class.as_str().to_uppercase();
    regions
        .iter()
        .map(|r| match message {
            Some(m) if !m.is_empty() => format!("{dest}:{r} [{class}] {m}"),
            _ => format!("{dest}:{r} [{class}]"),
        })
        .collect()
}

fn render_effect(command: &EiCommand) -> Vec<String> {
    match command {
        EiCommand::AddMarker(m) => {
            let message = m.content.as_ref().map(|c| render_content(c).trim().to_owned());
            region_lines(m.dest.as_deref(), &m.lines, m.outclass, message.as_deref())
        }
        EiCommand::HighlightLines(h) => {
            region_lines(h.dest.as_deref(), &h.regions, h.outclass, None)
        }
        EiCommand::DialogBox(d) => {
            let mut out = vec![format!("=== {} [{}] ===", d.title, d.outclass.as_str().to_uppercase())];
            out.extend(d.contents.iter().map(render_content));
            out
        }
        EiCommand::Download(d) => vec![format!("download: {}/{}", d.execid, d.filename)],
        EiCommand::PrintOnConsole(p) => p.contents.iter().map(render_content).collect(),
    }
}

fn render_action(action: &EiAction) -> String {
    let n = action.commands().len();
    let noun = if n == 1 { "command" } else { "commands" };
    match action {
        EiAction::OnCodeLineClick(a) => {
            let lines: Vec<String> = a.lines.iter().map(ToString::to_string).collect();
            format!("interactive action at {}:{} ({n} {noun})", a.dest, lines.join(","))
        }
        EiAction::OnClick(a) => {
            format!("interactive action on {} ({n} {noun})", a.selectors.join(", "))
        }
    }
}
