use ei_core::protocol::OutputKind;

/// Tool output is eiout when it is well-formed XML rooted at `eiout`,
/// ignoring surrounding whitespace. Everything else is shown as plain text.
pub fn classify_output(stdout: &[u8]) -> OutputKind {
    let Ok(text) = std::str::from_utf8(stdout) else { return OutputKind::PlainText };
    match roxmltree::Document::parse(text.trim()) {
        Ok(doc) if doc.root_element().tag_name().name() == "eiout" => OutputKind::Eiout,
        _ => OutputKind::PlainText,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification() {
        for (input, kind) in [
            (&b"<eiout><eicommands/></eiout>"[..], OutputKind::Eiout),
            (b"\n  <eiout/>\n\n", OutputKind::Eiout),
            (b"<?xml version=\"1.0\"?><eiout/>", OutputKind::Eiout),
            (b"Hello World", OutputKind::PlainText),
            (b"<eiout>", OutputKind::PlainText),
            (b"<eiout/> trailing", OutputKind::PlainText),
            (b"<other/>", OutputKind::PlainText),
            (b"", OutputKind::PlainText),
            (b"<eiout>\xff</eiout>", OutputKind::PlainText),
        ] {
            assert_eq!(classify_output(input), kind, "{:?}", String::from_utf8_lossy(input));
        }
    }
}
