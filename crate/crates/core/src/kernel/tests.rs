use proptest::prelude::*;

use super::*;
use crate::cases::{self, CaseId};
use crate::dsl::parse_expr;

fn e(s: &str) -> Expr {
    parse_expr(s).unwrap()
}

fn toggle() -> ComponentDefinition {
    ComponentDefinition::new("Toggle")
        .param("rate", ScalarType::Real, Value::Num(1.0))
        .automaton(
            AutomatonDef::new("A", &["X", "Y"])
                .transition(TransitionDef::exponential("X", "Y", e("rate")))
                .transition(TransitionDef::instantaneous("Y", "X").when(e("active(A.Y)"))),
        )
}

#[test]
fn valid_component_defines() {
    let d = define_component(toggle()).unwrap();
    assert_eq!(d.automata[0].transitions[0].name, "X_to_Y");
}

#[test]
fn unresolved_state_is_rejected() {
    let d = toggle().automaton(AutomatonDef::new("B", &["P"]).transition(TransitionDef::instantaneous("P", "Q")));
    assert!(matches!(define_component(d), Err(ModelError::UnresolvedState { .. })));
}

#[test]
fn unresolved_identifier_is_rejected() {
    let d = toggle().automaton(
        AutomatonDef::new("B", &["P", "Q"]).transition(TransitionDef::instantaneous("P", "Q").when(e("ghost > 1"))),
    );
    assert!(matches!(define_component(d), Err(ModelError::UnresolvedIdentifier { .. })));
}

#[test]
fn numeric_condition_is_rejected() {
    let d = toggle().automaton(
        AutomatonDef::new("B", &["P", "Q"]).transition(TransitionDef::instantaneous("P", "Q").when(e("rate + 1"))),
    );
    assert!(matches!(define_component(d), Err(ModelError::NonBooleanCondition { .. })));
}

#[test]
fn duplicate_names_are_rejected() {
    let d = toggle().param("rate", ScalarType::Real, Value::Num(2.0));
    assert!(matches!(define_component(d), Err(ModelError::DuplicateName { .. })));
}

#[test]
fn aggregate_imports_see_every_connection() {
    let m = cases::build(CaseId::Case1, &cases::RateProfile::Text).unwrap();
    assert_eq!(m.connection_count("room", "heaterON"), Some(4));
    let s = m.initial_state().unwrap();
    assert_eq!(m.evaluate_expression(&s, "room", &e("count(heaterON)"), None).unwrap(), Value::Num(4.0));
    assert_eq!(
        m.evaluate_expression(&s, "room", &e("sum(heatingPower * heaterON)"), None).unwrap(),
        Value::Num(4.0)
    );
    assert_eq!(m.evaluate_expression(&s, "room", &e("heaterON[2]"), None).unwrap(), Value::Bool(true));
}

#[test]
fn connections_must_match_labels() {
    let mut parts = cases::case_parts(CaseId::Case0).unwrap();
    parts.connections = vec![ConnectionDecl::new(Endpoint::new("heater", "mb_Room"), Endpoint::new("heater", "mb_Room"))];
    assert!(assemble_system(parts).is_err());
}

#[test]
fn connections_must_name_instances() {
    let mut parts = cases::case_parts(CaseId::Case0).unwrap();
    parts.connections.push(ConnectionDecl::new(Endpoint::new("ghost", "mb_Room"), Endpoint::new("room", "mb_Heater")));
    assert!(matches!(assemble_system(parts), Err(ModelError::UnknownInstance(_))));
}

#[test]
fn backup_chains_are_checked() {
    let mut parts = cases::case_parts(CaseId::Case2a).unwrap();
    parts.backup_chains = vec![vec!["h0".into(), "h1".into(), "h0".into()]];
    assert!(assemble_system(parts).is_err());
}

#[test]
fn unique_parameters_are_enforced() {
    let mut parts = cases::case_parts(CaseId::Case2).unwrap();
    cases::override_argument(&mut parts, "h1", "priority", Value::Num(10.0)).unwrap();
    assert!(matches!(assemble_system(parts), Err(ModelError::DuplicateUniqueParameter { .. })));
}

#[test]
fn unknown_parameter_is_rejected() {
    let mut parts = cases::case_parts(CaseId::Case0).unwrap();
    cases::override_argument(&mut parts, "heater", "colour", Value::Num(1.0)).unwrap();
    assert!(matches!(assemble_system(parts), Err(ModelError::UnknownParameter { .. })));
}

#[test]
fn hooks_write_chain_successors() {
    let m = cases::build(CaseId::Case2a, &cases::RateProfile::Text).unwrap();
    let mut s = m.initial_state().unwrap();
    m.fire_notification_hooks(&mut s, "h0", "Function", "OK_to_NOK").unwrap();
    assert_eq!(m.variable(&s, "h1", "takeON"), Some(Value::Bool(true)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn connection_order_does_not_change_aggregates(seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut parts = cases::case_parts(CaseId::Case2).unwrap();
        parts.connections.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let m = assemble_system(parts).unwrap();
        let s = m.initial_state().unwrap();
        for h in ["h0", "h1", "h2", "h3"] {
            prop_assert_eq!(m.connection_count(h, "otherOK"), Some(3));
            let outranked = m.evaluate_expression(&s, h, &e("any(otherOK and otherPriority > priority)"), None).unwrap();
            prop_assert_eq!(outranked, Value::Bool(h != "h0"));
        }
        prop_assert_eq!(m.connection_count("room", "heaterON"), Some(4));
    }
}
