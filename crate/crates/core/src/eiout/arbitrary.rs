//! Random valid documents, for property tests and fuzzing tools that
//! consume the output language.

use rand::seq::SliceRandom;
use rand::Rng;

use super::*;

const SELECTORS: &[&str] = &[
    "#err1",
    "span.warn",
    "div > p + a ~ b",
    "ul li:first-child",
    "a[href^=\"http\"]",
    "input[type='text' i]",
    "li:not(.done, #x)",
    "*",
];

const PIECES: &[&str] = &[
    "a", "Z", "0", " ", "  ", "\n", "\t", "\r", "\r\n", "<", ">", "&", "\"", "'", "]]>", "]]", "<![CDATA[",
    "&amp;", "<b>x</b>", "é", "日本", "🦀", "-", "/", "\\", "=", "{\"x\":[1,2]}",
];

/// A string built from pieces that stress escaping.
pub fn random_text<R: Rng + ?Sized>(rng: &mut R, max_pieces: usize) -> String {
    let n = rng.gen_range(0..=max_pieces);
    (0..n).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn random_name<R: Rng + ?Sized>(rng: &mut R) -> String {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-";
    let n = rng.gen_range(1..12);
    let mut s: String = (0..n).map(|_| *CHARS.choose(rng).unwrap() as char).collect();
    if s == "." || s == ".." {
        s.push('x');
    }
    s
}

fn random_execid<R: Rng + ?Sized>(rng: &mut R) -> ExecId {
    if rng.gen_bool(0.2) {
        "EI65231".parse().unwrap()
    } else {
        ExecId::generate()
    }
}

fn random_outclass<R: Rng + ?Sized>(rng: &mut R) -> Outclass {
    *[Outclass::Info, Outclass::Error, Outclass::Warning].choose(rng).unwrap()
}

fn random_content<R: Rng + ?Sized>(rng: &mut R) -> Content {
    let format = *[ContentFormat::Text, ContentFormat::Html, ContentFormat::Svg, ContentFormat::Graphs]
        .choose(rng)
        .unwrap();
    let mut c = Content::new(format, random_text(rng, 8));
    if rng.gen_bool(0.2) {
        let quarters: u32 = rng.gen_range(0..2400);
        c = c.streamed(random_execid(rng), f64::from(quarters) / 4.0);
    }
    c
}

fn random_contents<R: Rng + ?Sized>(rng: &mut R) -> Vec<Content> {
    let n = rng.gen_range(0..3);
    (0..n).map(|_| random_content(rng)).collect()
}

fn random_regions<R: Rng + ?Sized>(rng: &mut R) -> Vec<LineRegion> {
    let n = rng.gen_range(0..3);
    (0..n)
        .map(|_| {
            let from = rng.gen_range(1..5000);
            LineRegion {
                from,
                to: rng.gen_bool(0.5).then(|| rng.gen_range(from..from + 50)),
                from_ch: rng.gen_bool(0.3).then(|| rng.gen_range(0..120)),
                to_ch: rng.gen_bool(0.3).then(|| rng.gen_range(0..120)),
            }
        })
        .collect()
}

fn random_dest<R: Rng + ?Sized>(rng: &mut R) -> String {
    if rng.gen_bool(0.5) {
        format!("/p/{}.c", random_name(rng))
    } else {
        random_text(rng, 5)
    }
}

fn random_command<R: Rng + ?Sized>(rng: &mut R, nested: bool) -> EiCommand {
    match rng.gen_range(0..5) {
        0 => PrintOnConsole {
            console_id: rng.gen_bool(0.5).then(|| random_name(rng)),
            console_title: rng.gen_bool(0.5).then(|| random_text(rng, 4)),
            contents: random_contents(rng),
        }
        .into(),
        1 => AddMarker {
            dest: (!nested || rng.gen_bool(0.5)).then(|| random_dest(rng)),
            outclass: random_outclass(rng),
            lines: random_regions(rng),
            content: rng.gen_bool(0.5).then(|| random_content(rng)),
        }
        .into(),
        2 => HighlightLines {
            dest: (!nested || rng.gen_bool(0.5)).then(|| random_dest(rng)),
            outclass: random_outclass(rng),
            regions: random_regions(rng),
        }
        .into(),
        3 => DialogBox {
            outclass: random_outclass(rng),
            title: random_text(rng, 4),
            width: rng.gen_bool(0.5).then(|| rng.gen_range(1..2000)),
            height: rng.gen_bool(0.5).then(|| rng.gen_range(1..2000)),
            contents: random_contents(rng),
        }
        .into(),
        _ => Download { execid: random_execid(rng), filename: random_name(rng) }.into(),
    }
}

fn random_commands<R: Rng + ?Sized>(rng: &mut R, nested: bool) -> Vec<EiCommand> {
    let n = rng.gen_range(0..4);
    (0..n).map(|_| random_command(rng, nested)).collect()
}

fn random_action<R: Rng + ?Sized>(rng: &mut R) -> EiAction {
    if rng.gen_bool(0.5) {
        OnCodeLineClick {
            dest: random_dest(rng),
            outclass: random_outclass(rng),
            lines: random_regions(rng),
            commands: random_commands(rng, true),
        }
        .into()
    } else {
        let n = rng.gen_range(0..3);
        OnClick {
            selectors: (0..n).map(|_| SELECTORS.choose(rng).unwrap().to_string()).collect(),
            commands: random_commands(rng, true),
        }
        .into()
    }
}

/// A document that [`serialize`] accepts and that survives a round trip.
pub fn random_document<R: Rng + ?Sized>(rng: &mut R) -> EiOutDocument {
    let commands = random_commands(rng, false);
    let n = rng.gen_range(0..3);
    let actions = (0..n).map(|_| random_action(rng)).collect();
    EiOutDocument { commands, actions }
}
