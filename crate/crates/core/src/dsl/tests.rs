use std::path::{Path, PathBuf};

use super::*;
use crate::kernel::ModelError;

fn cases_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
}

fn load_case(name: &str) -> crate::kernel::SystemModel {
    load_model(cases_dir().join(format!("{name}.model"))).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn heater_has_two_automata_and_four_transitions() {
    let text = std::fs::read_to_string(cases_dir().join("components/heater.model")).unwrap();
    let ast = parse(&text).unwrap();
    let heater = ast.components().next().unwrap();
    assert_eq!(heater.name, "Heater");
    let automata: Vec<_> = heater.automata().collect();
    assert_eq!(automata.len(), 2);
    assert_eq!(automata.iter().map(|a| a.transitions.len()).sum::<usize>(), 4);
}

#[test]
fn every_case_loads() {
    for name in ["case0", "case1", "case2", "case0a", "case1a", "case2a"] {
        load_case(name);
    }
}

#[test]
fn structural_facts() {
    let c1 = load_case("case1");
    assert_eq!(c1.instances.iter().filter(|i| i.definition.name == "Heater").count(), 4);
    assert_eq!(c1.connection_count("room", "heaterON"), Some(4));

    let c1a = load_case("case1a");
    assert_eq!(c1a.mediator_groups.len(), 1);
    assert_eq!(c1a.links_between("Heater", "Heater"), 0);

    let c2 = load_case("case2");
    assert_eq!(c2.links_between("Heater", "Heater"), 12);
    assert_eq!(c2.links_between("Heater", "Room"), 4);
    assert_eq!(c2.connection_count("h3", "otherOK"), Some(3));

    let c2a = load_case("case2a");
    assert_eq!(c2a.links_between("Heater", "Heater"), 0);
    assert_eq!(c2a.backup_chains.len(), 1);
    assert_eq!(c2a.backup_chains[0].len(), 4);
}

#[test]
fn unknown_component_type_is_reported_with_its_line() {
    let loader = MemoryLoader::new().with("m.model", "system {\n  instance c: Cooler;\n}\n");
    match load_model_with(&loader, Path::new("m.model")) {
        Err(DslError::Model { line, source, .. }) => {
            assert_eq!(line, 2);
            assert_eq!(*source, ModelError::UnknownComponentType("Cooler".into()));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn misspelled_state_is_a_model_error() {
    let src = "component H() { automaton A { state ON init; state OFF; trans ON -> ONN law inst; } }\nsystem { }";
    let loader = MemoryLoader::new().with("m.model", src);
    assert!(matches!(
        load_model_with(&loader, Path::new("m.model")),
        Err(DslError::Model { source, .. }) if matches!(*source, ModelError::UnresolvedState { .. })
    ));
}

#[test]
fn exactly_one_system_block() {
    let loader = MemoryLoader::new().with("m.model", "component H() { }");
    assert!(matches!(
        load_model_with(&loader, Path::new("m.model")),
        Err(DslError::SystemCount(0))
    ));
    let loader = MemoryLoader::new().with("m.model", "system { } system { }");
    assert!(matches!(
        load_model_with(&loader, Path::new("m.model")),
        Err(DslError::SystemCount(2))
    ));
}

#[test]
fn empty_system_assembles() {
    let loader = MemoryLoader::new().with("m.model", "system { }");
    let model = load_model_with(&loader, Path::new("m.model")).unwrap();
    assert!(model.instances.is_empty());
}

#[test]
fn printed_cases_reparse_to_the_same_ast() {
    for entry in std::fs::read_dir(cases_dir().join("components")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let ast = parse(&text).unwrap();
        let printed = print(&ast);
        assert_eq!(parse(&printed).unwrap(), ast);
        assert_eq!(print(&parse(&printed).unwrap()), printed);
    }
    for name in ["case0", "case1", "case2", "case0a", "case1a", "case2a"] {
        let text = std::fs::read_to_string(cases_dir().join(format!("{name}.model"))).unwrap();
        let ast = parse(&text).unwrap();
        assert_eq!(parse(&print(&ast)).unwrap(), ast);
    }
}

#[test]
fn non_constant_arguments_are_rejected() {
    let src = "component H(p: real = 1) { }\nsystem {\n  instance h: H(p = 1 + 2);\n}";
    let loader = MemoryLoader::new().with("m.model", src);
    assert!(matches!(
        load_model_with(&loader, Path::new("m.model")),
        Err(DslError::NonConstant { line: 3, .. })
    ));
}
