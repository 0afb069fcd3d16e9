use std::collections::BTreeMap;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use ei_core::command::*;
use ei_core::config::{parse_app_spec, ConfigDefaults, ParamKind, ParamSection, ParameterSpec};
use ei_core::engine::Engine;
use proptest::prelude::*;

/// A tool that writes each of its arguments followed by a NUL byte.
fn argv_dump(dir: &Path) -> PathBuf {
    let path = dir.join("argv-dump");
    std::fs::write(&path, "#!/bin/sh\nfor a in \"$@\"; do printf '%s\\0' \"$a\"; done\n").unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn split_nul(out: &[u8]) -> Vec<String> {
    out.split(|b| *b == 0)
        .map(|s| String::from_utf8(s.to_vec()).unwrap())
        .collect::<Vec<_>>()
        .split_last()
        .map(|(_, rest)| rest.to_vec())
        .unwrap_or_default()
}

fn hostile() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop::sample::select(vec![
            ";", "|", "&", "&&", "$(", ")", "`", "'", "\"", "\\", "*", "?", "~", ">", "<", "\n", " ", "\t",
            "$HOME", "${IFS}", "rm -rf /", "-c", "--", "#", "!", "{a,b}", "[x]", "%s", "é", "a",
        ]),
        0..8,
    )
    .prop_map(|v| v.concat())
}

struct Harness {
    _root: tempfile::TempDir,
    engine: Engine,
    spawned: Arc<Mutex<Vec<Vec<String>>>>,
    tool: PathBuf,
}

fn harness() -> Harness {
    let root = tempfile::tempdir().unwrap();
    let tool = argv_dump(root.path());
    let spawned = Arc::new(Mutex::new(Vec::new()));
    let sink = Arc::clone(&spawned);
    let engine = Engine::new(&root.path().join("state"))
        .unwrap()
        .with_spawn_observer(Arc::new(move |argv: &Argv| sink.lock().unwrap().push(argv.as_slice().to_vec())));
    Harness { _root: root, engine, spawned, tool }
}

fn app(tool: &Path, check: bool) -> ei_core::config::AppSpec {
    let xml = format!(
        r#"<app id="t"><execinfo timeout="10"><cmdlineapp>{} _ei_parameters _ei_outline</cmdlineapp></execinfo>
           <parameters prefix="-" check="{check}"><selectone name="c"><option value="1"/><option value="2"/></selectone></parameters></app>"#,
        tool.display()
    );
    parse_app_spec(&xml, &ConfigDefaults::default()).unwrap().value
}

#[test]
fn checked_out_of_range_value_is_rejected_naming_the_parameter() {
    let h = harness();
    let req = ExecutionRequest {
        parameters: BTreeMap::from([("c".to_owned(), vec!["3".to_owned()])]),
        ..Default::default()
    };
    match h.engine.execute(&app(&h.tool, true), &req, "s") {
        Err(ei_core::engine::EngineError::InvalidParameters(v)) => {
            assert_eq!(v[0].param, "c");
            assert_eq!(v[0].reason, ViolationReason::NotAnOption("3".into()));
        }
        other => panic!("{other:?}"),
    }
    assert!(h.spawned.lock().unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn hostile_values_arrive_as_single_tokens(value in hostile(), outline in prop::collection::vec(hostile(), 0..3)) {
        let h = harness();
        let req = ExecutionRequest {
            parameters: BTreeMap::from([("c".to_owned(), vec![value.clone()])]),
            outline_entities: outline.clone(),
            ..Default::default()
        };
        let (_, argv, result) = h.engine.execute(&app(&h.tool, false), &req, "s").unwrap();
        let mut expected = vec!["-c".to_owned(), value];
        expected.extend(outline);
        prop_assert_eq!(split_nul(&result.stdout), expected.clone());
        prop_assert_eq!(argv.args(), &expected[..]);
        let spawned = h.spawned.lock().unwrap();
        prop_assert_eq!(spawned.len(), 1);
        prop_assert_eq!(&spawned[0][0], h.tool.to_str().unwrap());
    }

    #[test]
    fn every_value_follows_its_flag(values in prop::collection::btree_map("[a-z]{1,3}", prop::collection::vec(hostile(), 0..3), 0..4)) {
        prop_assume!(!values.contains_key("m"));
        let spec = ParamSection {
            prefix: "--".into(),
            check: false,
            params: vec![ParameterSpec::new("m", ParamKind::MultiChoice).with_options(["x"])],
        };
        let tokens = serialize_parameters(&spec, &values);
        let expected_len: usize = values.values().map(|v| if v.is_empty() { 1 } else { 2 * v.len() }).sum();
        prop_assert_eq!(tokens.len(), expected_len);
        let mut i = 0;
        for (name, vs) in &values {
            let flag = format!("--{name}");
            if vs.is_empty() {
                prop_assert_eq!(&tokens[i], &flag);
                i += 1;
            }
            for v in vs {
                prop_assert_eq!(&tokens[i], &flag);
                prop_assert_eq!(&tokens[i + 1], v);
                i += 2;
            }
        }
    }

    #[test]
    fn materialized_paths_stay_inside_workdir(segments in prop::collection::vec(prop::sample::select(vec!["a", "b", ".", "..", "", "c.c", "x y"]), 1..5)) {
        let dir = tempfile::tempdir().unwrap();
        let path = segments.join("/");
        let files = [InputFile { path: path.clone(), content: b"1".to_vec() }];
        match materialize_files(&files, dir.path()) {
            Ok(paths) => {
                prop_assert!(!segments.contains(&"..") && !path.starts_with('/'));
                prop_assert!(paths[0].starts_with(dir.path()));
                prop_assert_eq!(std::fs::read(&paths[0]).unwrap(), b"1");
            }
            Err(_) => prop_assert!(
                path.starts_with('/')
                    || segments.contains(&"..")
                    || segments.iter().all(|s| s.is_empty() || *s == ".")
            ),
        }
    }
}
