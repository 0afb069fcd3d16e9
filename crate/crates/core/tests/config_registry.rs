use ei_core::command::CommandTemplate;
use ei_core::config::*;
use proptest::prelude::*;

fn data(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn myapp_listing() {
    let parsed = parse_app_spec(&data("myapp.xml"), &ConfigDefaults::default()).unwrap();
    let app = parsed.value;
    assert_eq!(app.id, "myapp");
    assert!(app.visible);
    assert_eq!(app.cmdline, "/path-to/myapp _ei_parameters");
    assert_eq!(app.params.prefix, "-");
    assert!(!app.params.check);
    let c = app.params.param("c").unwrap();
    assert_eq!(c.kind, ParamKind::SingleChoice);
    let values: Vec<_> = c.options.iter().map(|o| o.value.as_str()).collect();
    assert_eq!(values, ["1", "2"]);
    // the two "..." placeholders are reported, not fatal
    assert_eq!(parsed.warnings.len(), 2);
    assert!(parsed.warnings.iter().all(|w| w.severity == Severity::Warning));
}

/// Walks the XML directly, independent of the parser under test.
fn oracle_tree(node: roxmltree::Node) -> Vec<ExampleNode> {
    node.children()
        .filter(|n| n.is_element())
        .map(|n| match n.tag_name().name() {
            "folder" => ExampleNode::Folder { name: n.attribute("name").unwrap().into(), children: oracle_tree(n) },
            "file" => ExampleNode::File { name: n.attribute("name").unwrap().into(), url: n.attribute("url").unwrap().into() },
            "github" => ExampleNode::Github {
                owner: n.attribute("owner").unwrap().into(),
                repo: n.attribute("repo").unwrap().into(),
                branch: n.attribute("branch").unwrap().into(),
                path: n.attribute("path").unwrap().into(),
            },
            other => panic!("unexpected {other}"),
        })
        .collect()
}

#[test]
fn example_listing_matches_xml_walk() {
    let xml = data("examples.xml");
    let sets = parse_example_config(&xml).unwrap().value;
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let expected: Vec<ExampleSet> = doc
        .root_element()
        .children()
        .filter(|n| n.is_element())
        .map(|n| {
            let id = n.attribute("id").unwrap().to_owned();
            ExampleSet { root: ExampleNode::Folder { name: id.clone(), children: oracle_tree(n) }, id }
        })
        .collect();
    assert_eq!(sets, expected);
    let ids: Vec<_> = sets.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, ["iter", "set2"]);
    assert!(matches!(&sets[1].root, ExampleNode::Folder { children, .. } if matches!(&children[0],
        ExampleNode::Folder { children, .. } if matches!(&children[0], ExampleNode::Github { repo, .. } if repo == "examples"))));
}

#[test]
fn registry_from_listings() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("myapp.xml"), data("myapp.xml")).unwrap();
    std::fs::write(dir.path().join("examples.xml"), data("examples.xml")).unwrap();
    std::fs::write(dir.path().join("zzz.xml"), data("myapp.xml")).unwrap();
    let registry = load_registry(dir.path(), &ConfigDefaults::default()).unwrap();
    assert_eq!(registry.list_apps(false).len(), 1);
    assert_eq!(registry.example_sets().count(), 2);
    let duplicate: Vec<_> = registry
        .diagnostics()
        .iter()
        .filter(|d| d.is_fatal())
        .map(|d| d.source.as_ref().unwrap().file_name().unwrap().to_owned())
        .collect();
    assert_eq!(duplicate, ["zzz.xml"]);
    assert!(registry
        .diagnostics()
        .iter()
        .any(|d| d.severity == Severity::Warning && d.message.contains("/path-to/myapp")));
}

#[test]
fn missing_directory_is_an_error() {
    assert!(load_registry(std::path::Path::new("/nonexistent/ei/config"), &ConfigDefaults::default()).is_err());
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 <>&\"'=/._-]{0,12}"
}

/// Titles and descriptions are stored trimmed and non-empty.
fn trimmed() -> impl Strategy<Value = String> {
    "[a-z<&]([a-zA-Z0-9 <>&\"'=/._-]{0,10}[a-z>])?"
}

fn param() -> impl Strategy<Value = ParameterSpec> {
    (
        "[a-z][a-z0-9_-]{0,6}",
        prop::option::of(text()),
        0..4usize,
        prop::collection::vec(("[a-z0-9<&]{1,5}", prop::option::of(text())), 1..4),
        any::<prop::sample::Index>(),
        any::<bool>(),
    )
        .prop_map(|(name, label, kind, options, pick, flag_on)| {
            let kind = [ParamKind::SingleChoice, ParamKind::MultiChoice, ParamKind::Flag, ParamKind::FreeText][kind];
            let mut p = ParameterSpec::new(name, kind);
            p.label = label;
            match kind {
                ParamKind::SingleChoice | ParamKind::MultiChoice => {
                    let mut seen = std::collections::HashSet::new();
                    for (value, label) in options {
                        if seen.insert(value.clone()) {
                            p.options.push(OptionValue { value, label });
                        }
                    }
                    p.defaults.push(pick.get(&p.options).value.clone());
                }
                ParamKind::Flag => p.defaults.push(flag_on.to_string()),
                ParamKind::FreeText => {
                    if flag_on {
                        p.defaults.push(options[0].0.clone());
                    }
                }
            }
            p
        })
}

prop_compose! {
    fn app_spec()(
        id in "[a-zA-Z][a-zA-Z0-9_.-]{0,10}",
        title in trimmed(),
        description in prop::option::of(trimmed()),
        visible in any::<bool>(),
        tail in prop::collection::vec(prop::sample::select(vec!["_ei_parameters", "_ei_files", "-o", "_ei_download/x", "--id=_ei_execid"]), 0..4),
        prefix in "[-+/]{0,2}",
        check in any::<bool>(),
        params in prop::collection::vec(param(), 0..4),
        timeout_s in 1u64..100_000,
        max_output_bytes in 1u64..u64::MAX,
    ) -> AppSpec {
        let cmdline = std::iter::once("/opt/tool").chain(tail).collect::<Vec<_>>().join(" ");
        let mut unique = Vec::new();
        for p in params {
            if !unique.iter().any(|q: &ParameterSpec| q.name == p.name) {
                unique.push(p);
            }
        }
        AppSpec {
            id,
            title,
            description,
            visible,
            template: CommandTemplate::parse(&cmdline).unwrap(),
            cmdline,
            params: ParamSection { prefix, check, params: unique },
            timeout_s,
            max_output_bytes,
        }
    }
}

proptest! {
    #[test]
    fn app_specs_round_trip(app in app_spec()) {
        let parsed = parse_app_spec(&app.to_xml(), &ConfigDefaults::default()).unwrap();
        prop_assert!(parsed.warnings.is_empty());
        prop_assert_eq!(parsed.value, app);
    }

    #[test]
    fn app_summaries_survive_json(app in app_spec()) {
        let summary = AppSummary::from(&app);
        let json = serde_json::to_string(&summary).unwrap();
        prop_assert_eq!(serde_json::from_str::<AppSummary>(&json).unwrap(), summary);
    }

    #[test]
    fn listing_order_and_visibility(visible in prop::collection::vec(any::<bool>(), 0..8)) {
        let apps: Vec<AppSpec> = visible
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let xml = format!(
                    r#"<app id="app{}" visible="{v}"><execinfo><cmdlineapp>/t</cmdlineapp></execinfo></app>"#,
                    7 - i
                );
                parse_app_spec(&xml, &ConfigDefaults::default()).unwrap().value
            })
            .collect();
        let registry = Registry::from_apps(apps);
        let listed: Vec<String> = registry.list_apps(false).into_iter().map(|a| a.id).collect();
        let mut expected: Vec<String> = visible
            .iter()
            .enumerate()
            .filter(|(_, v)| **v)
            .map(|(i, _)| format!("app{}", 7 - i))
            .collect();
        expected.sort();
        prop_assert_eq!(listed, expected);
        prop_assert_eq!(registry.list_apps(true).len(), visible.len());
    }
}
