//! The six Heated Room cases, embedded, with their builder-API
//! equivalents and the analytic oracles used to check simulations.
//!
//! | case | design | heaters | coupling |
//! |------|--------|---------|----------|
//! | 0 / 0a | initial model | 1 | message boxes / mediator |
//! | 1 / 1a | system-level change | 4 independent | message boxes / mediator |
//! | 2 / 2a | component-level change | 4 in standby | priorities over message boxes / backup chain |

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::dsl::{self, DslError, MemoryLoader};
use crate::kernel::{
    assemble_system, Argument, AutomatonDef, ComponentDefinition, ConnectionDecl, Endpoint, Expr,
    HookAction, HookTarget, InstanceDecl, MediatorDef, MediatorGroup, MessageBoxDef, ModelError,
    PdmpContribution, ScalarType, SubjectGroup, SystemModel, SystemParts, TransitionDef, Value,
};

/// Case files, keyed by their path relative to the repository root.
pub const SOURCES: &[(&str, &str)] = &[
    ("cases/case0.model", include_str!("../../../cases/case0.model")),
    ("cases/case1.model", include_str!("../../../cases/case1.model")),
    ("cases/case2.model", include_str!("../../../cases/case2.model")),
    ("cases/case0a.model", include_str!("../../../cases/case0a.model")),
    ("cases/case1a.model", include_str!("../../../cases/case1a.model")),
    ("cases/case2a.model", include_str!("../../../cases/case2a.model")),
    ("cases/components/heater.model", include_str!("../../../cases/components/heater.model")),
    ("cases/components/heater_priority.model", include_str!("../../../cases/components/heater_priority.model")),
    ("cases/components/heater_observed.model", include_str!("../../../cases/components/heater_observed.model")),
    ("cases/components/heater_standby.model", include_str!("../../../cases/components/heater_standby.model")),
    ("cases/components/room.model", include_str!("../../../cases/components/room.model")),
    ("cases/components/room_multi.model", include_str!("../../../cases/components/room_multi.model")),
    ("cases/components/room_subject.model", include_str!("../../../cases/components/room_subject.model")),
    ("cases/components/mediator.model", include_str!("../../../cases/components/mediator.model")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseId {
    Case0,
    Case1,
    Case2,
    Case0a,
    Case1a,
    Case2a,
}

impl CaseId {
    pub const ALL: [CaseId; 6] = [
        CaseId::Case0,
        CaseId::Case1,
        CaseId::Case2,
        CaseId::Case0a,
        CaseId::Case1a,
        CaseId::Case2a,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CaseId::Case0 => "case0",
            CaseId::Case1 => "case1",
            CaseId::Case2 => "case2",
            CaseId::Case0a => "case0a",
            CaseId::Case1a => "case1a",
            CaseId::Case2a => "case2a",
        }
    }

    pub fn path(self) -> String {
        format!("cases/{}.model", self.name())
    }

    /// Same change, other design.
    pub fn counterpart(self) -> CaseId {
        match self {
            CaseId::Case0 => CaseId::Case0a,
            CaseId::Case1 => CaseId::Case1a,
            CaseId::Case2 => CaseId::Case2a,
            CaseId::Case0a => CaseId::Case0,
            CaseId::Case1a => CaseId::Case1,
            CaseId::Case2a => CaseId::Case2,
        }
    }

    pub fn is_mediated(self) -> bool {
        matches!(self, CaseId::Case0a | CaseId::Case1a | CaseId::Case2a)
    }

    pub fn heaters(self) -> &'static [&'static str] {
        match self {
            CaseId::Case0 | CaseId::Case0a => &["heater"],
            _ => &["h0", "h1", "h2", "h3"],
        }
    }

    pub fn facts(self) -> CaseFacts {
        let (instances, connections, chain_length) = match self {
            CaseId::Case0 => (2, 1, 0),
            CaseId::Case1 => (5, 4, 0),
            CaseId::Case2 => (5, 16, 0),
            CaseId::Case0a => (2, 0, 0),
            CaseId::Case1a => (5, 0, 0),
            CaseId::Case2a => (5, 0, 4),
        };
        CaseFacts {
            instances,
            connections,
            chain_length,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CaseId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim_end_matches(".model");
        let s = s.rsplit('/').next().unwrap_or(s);
        let s = s.strip_prefix("case").unwrap_or(s);
        CaseId::ALL
            .into_iter()
            .find(|c| c.name() == format!("case{s}"))
            .ok_or_else(|| format!("unknown case `{s}` (expected 0, 1, 2, 0a, 1a or 2a)"))
    }
}

/// Structural facts every case must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CaseFacts {
    pub instances: usize,
    pub connections: usize,
    pub chain_length: usize,
}

/// Failure and repair rates per heater.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RateProfile {
    /// The rates written in the case files: lambda 0.01, mu 0.1.
    #[default]
    Text,
    /// The rates of the simulation figures: lambda 0.001, mu 0.01 for a
    /// single heater; for the standby cases the main heater has lambda
    /// 0.02, mu 0.01 and the backups lambda 0.01, mu 0.01.
    Figure,
    /// The same rates for every heater.
    Uniform { lambda: f64, mu: f64 },
}

impl RateProfile {
    /// `(lambda, mu)` for each heater of `case`.
    pub fn rates(&self, case: CaseId) -> Vec<(&'static str, f64, f64)> {
        let heaters = case.heaters();
        heaters
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let (l, m) = match self {
                    RateProfile::Text => (0.01, 0.1),
                    RateProfile::Uniform { lambda, mu } => (*lambda, *mu),
                    RateProfile::Figure => match case {
                        CaseId::Case2 | CaseId::Case2a if k == 0 => (0.02, 0.01),
                        CaseId::Case2 | CaseId::Case2a => (0.01, 0.01),
                        _ => (0.001, 0.01),
                    },
                };
                (*h, l, m)
            })
            .collect()
    }
}

/// All embedded case files in a loader rooted at the repository.
pub fn loader() -> MemoryLoader {
    let mut l = MemoryLoader::new();
    for (path, text) in SOURCES {
        l.insert(path, *text);
    }
    l
}

/// The embedded file set of a case, included files first.
pub fn file_set(case: CaseId) -> Result<Vec<dsl::SourceFile>, DslError> {
    dsl::file_set(&loader(), Path::new(&case.path()))
}

/// Unassembled parts of a case as written in its files.
pub fn case_parts(case: CaseId) -> Result<SystemParts, DslError> {
    dsl::elaborate_parts(&file_set(case)?)
}

/// Sets `param = value` on `instance`, replacing any argument of that name.
pub fn override_argument(parts: &mut SystemParts, instance: &str, param: &str, value: Value) -> Result<(), ModelError> {
    let decl = parts
        .instances
        .iter_mut()
        .find(|d| d.name == instance)
        .ok_or_else(|| ModelError::UnknownInstance(instance.to_string()))?;
    decl.arguments
        .retain(|a| !matches!(a, Argument::Named(n, _) if n == param));
    decl.arguments.push(Argument::Named(param.to_string(), value));
    Ok(())
}

/// Assembles a case with the given heater rates.
pub fn build(case: CaseId, rates: &RateProfile) -> Result<SystemModel, DslError> {
    let mut parts = case_parts(case)?;
    apply_rates(&mut parts, case, rates).map_err(|e| DslError::model(Path::new(&case.path()), 0, e))?;
    assemble_system(parts).map_err(|e| DslError::model(Path::new(&case.path()), 0, e))
}

fn apply_rates(parts: &mut SystemParts, case: CaseId, rates: &RateProfile) -> Result<(), ModelError> {
    if *rates == RateProfile::Text {
        return Ok(());
    }
    for (h, l, m) in rates.rates(case) {
        override_argument(parts, h, "lambda", Value::Num(l))?;
        override_argument(parts, h, "mu", Value::Num(m))?;
    }
    Ok(())
}

// Builder-API equivalents of the case files.

fn e(text: &str) -> Expr {
    dsl::parse_expr(text).expect("builder expression")
}

fn real(x: f64) -> Value {
    Value::Num(x)
}

fn function_automaton(notify: bool) -> AutomatonDef {
    let mut fail = TransitionDef::exponential("OK", "NOK", e("lambda"));
    let mut repair = TransitionDef::exponential("NOK", "OK", e("mu"));
    if notify {
        fail = fail.notify("notifyFailure");
        repair = repair.notify("notifyRepair");
    }
    AutomatonDef::new("Function", &["OK", "NOK"]).transition(fail).transition(repair)
}

fn heater_base() -> ComponentDefinition {
    ComponentDefinition::new("Heater")
        .param("maxTemperature", ScalarType::Real, real(22.0))
        .param("minTemperature", ScalarType::Real, real(15.0))
        .param("power", ScalarType::Real, real(1.0))
        .param("lambda", ScalarType::Real, real(0.01))
        .param("mu", ScalarType::Real, real(0.1))
}

fn power_automaton(off: &str, on: &str, notify_on: bool) -> AutomatonDef {
    let mut switch_on = TransitionDef::instantaneous("OFF", "ON").when(e(on));
    if notify_on {
        switch_on = switch_on.notify("notifySwitchOn");
    }
    AutomatonDef::new("Power", &["ON", "OFF"])
        .transition(TransitionDef::instantaneous("ON", "OFF").when(e(off)))
        .transition(switch_on)
}

fn mb_room() -> MessageBoxDef {
    MessageBoxDef::new("mb_Room")
        .export("heaterON", e("active(Power.ON)"))
        .export("heatingPower", e("power"))
        .import("temperature", "roomTemperature")
}

const OFF: &str = "active(Function.NOK) or roomTemperature >= maxTemperature";
const ON: &str = "active(Function.OK) and roomTemperature <= minTemperature";

pub fn heater() -> ComponentDefinition {
    heater_base()
        .automaton(function_automaton(false))
        .automaton(power_automaton(OFF, ON, false))
        .message_box(mb_room())
}

pub fn heater_priority() -> ComponentDefinition {
    let higher = "any(otherOK and otherPriority > priority)";
    heater_base()
        .unique_param("priority", ScalarType::Int, Value::Num(0.0))
        .automaton(function_automaton(false))
        .automaton(power_automaton(&format!("{OFF} or {higher}"), &format!("{ON} and not {higher}"), false))
        .message_box(mb_room())
        .message_box(
            MessageBoxDef::new("mb_OtherH_O")
                .export("heaterPr", e("priority"))
                .export("heaterOK", e("active(Function.OK)")),
        )
        .message_box(
            MessageBoxDef::new("mb_OtherH_I")
                .import("heaterPr", "otherPriority")
                .import("heaterOK", "otherOK"),
        )
}

pub fn heater_observed() -> ComponentDefinition {
    heater_base()
        .reference("roomTemperature", Some(ScalarType::Real))
        .automaton(function_automaton(false))
        .automaton(power_automaton(OFF, ON, false))
}

pub fn heater_standby() -> ComponentDefinition {
    let to_backups = |value: &str| {
        vec![HookAction {
            target: HookTarget::Backups,
            variable: "takeON".into(),
            value: e(value),
        }]
    };
    heater_base()
        .param("isMain", ScalarType::Bool, Value::Bool(false))
        .reference("roomTemperature", Some(ScalarType::Real))
        .variable("takeON", ScalarType::Bool, e("isMain"))
        .automaton(function_automaton(true))
        .automaton(power_automaton(&format!("{OFF} or not takeON"), &format!("{ON} and takeON"), true))
        .hook("notifyFailure", to_backups("takeON"))
        .hook("notifyRepair", to_backups("false"))
        .hook("notifySwitchOn", to_backups("false"))
}

fn room_base() -> ComponentDefinition {
    ComponentDefinition::new("Room")
        .param("outside", ScalarType::Real, real(13.0))
        .param("leakage", ScalarType::Real, real(0.1))
        .variable("temperature", ScalarType::Real, e("17"))
}

fn room_with(power: &str) -> ComponentDefinition {
    room_base()
        .message_box(
            MessageBoxDef::new("mb_Heater")
                .export("temperature", e("temperature"))
                .import("heaterON", "heaterON")
                .import("heatingPower", "heatingPower"),
        )
        .pdmp(PdmpContribution {
            manager: "pdmpTemperature".into(),
            ode_variables: vec!["temperature".into()],
            equations: vec![(
                "temperature".into(),
                e(&format!("{power} - leakage * (temperature - outside)")),
            )],
            ..Default::default()
        })
}

pub fn room() -> ComponentDefinition {
    room_with("heatingPower[0] * heaterON[0]")
}

pub fn room_multi() -> ComponentDefinition {
    room_with("sum(heatingPower * heaterON)")
}

pub fn room_subject() -> ComponentDefinition {
    room_base()
}

pub fn heated_room_mediator() -> MediatorDef {
    MediatorDef {
        name: "HeatedRoomMediator".into(),
        manager: "pdmpTemperature".into(),
        equation: e("sum(heater: power * active(Power.ON)) - leakage * (subject - outside)"),
        updates: vec![("heater".into(), "roomTemperature".into(), e("subject"))],
        stop_conditions: vec![
            ("heater".into(), e("active(Power.ON) and roomTemperature >= maxTemperature")),
            ("heater".into(), e("active(Power.OFF) and roomTemperature <= minTemperature")),
        ],
    }
}

/// Parts of `case` built through the kernel API instead of the DSL.
pub fn builder_parts(case: CaseId) -> Result<SystemParts, ModelError> {
    let heaters = case.heaters();
    let (heater_def, room_def) = match case {
        CaseId::Case0 => (heater(), room()),
        CaseId::Case1 => (heater(), room_multi()),
        CaseId::Case2 => (heater_priority(), room_multi()),
        CaseId::Case0a | CaseId::Case1a => (heater_observed(), room_subject()),
        CaseId::Case2a => (heater_standby(), room_subject()),
    };
    let mut parts = SystemParts {
        definitions: vec![Arc::new(heater_def.define()?), Arc::new(room_def.define()?)],
        ..Default::default()
    };
    for (k, h) in heaters.iter().enumerate() {
        let mut decl = InstanceDecl::new(h, "Heater");
        match case {
            CaseId::Case2 => decl = decl.arg("priority", Value::Num([10.0, 6.0, 4.0, 2.0][k])),
            CaseId::Case2a if k == 0 => decl = decl.arg("isMain", Value::Bool(true)),
            _ => {}
        }
        parts.instances.push(decl);
    }
    parts.instances.push(InstanceDecl::new("room", "Room"));
    if case.is_mediated() {
        parts.mediators.push(heated_room_mediator());
        parts.mediator_groups.push(MediatorGroup {
            name: "heating".into(),
            mediator: "HeatedRoomMediator".into(),
            subjects: vec![SubjectGroup {
                instance: "room".into(),
                variable: "temperature".into(),
                actives: heaters.iter().map(|h| (h.to_string(), "heater".to_string())).collect(),
            }],
        });
    } else {
        for h in heaters {
            parts
                .connections
                .push(ConnectionDecl::new(Endpoint::new(h, "mb_Room"), Endpoint::new("room", "mb_Heater")));
        }
    }
    if case == CaseId::Case2 {
        for a in heaters {
            for b in heaters {
                if a != b {
                    parts.connections.push(ConnectionDecl::new(
                        Endpoint::new(a, "mb_OtherH_O"),
                        Endpoint::new(b, "mb_OtherH_I"),
                    ));
                }
            }
        }
    }
    if case == CaseId::Case2a {
        parts.backup_chains.push(heaters.iter().map(|h| h.to_string()).collect());
    }
    Ok(parts)
}

// Analytic oracles.

/// Room and heater constants of the closed-form temperature law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomConstants {
    pub outside: f64,
    pub leakage: f64,
    pub power: f64,
}

impl Default for RoomConstants {
    fn default() -> Self {
        RoomConstants {
            outside: 13.0,
            leakage: 0.1,
            power: 1.0,
        }
    }
}

impl RoomConstants {
    /// Equilibrium temperature with `heaters_on` heaters running.
    pub fn equilibrium(&self, heaters_on: usize) -> f64 {
        self.outside + heaters_on as f64 * self.power / self.leakage
    }

    /// `T(t_start + dt)` with `heaters_on` heaters running throughout.
    pub fn temperature(&self, heaters_on: usize, t_start: f64, dt: f64) -> f64 {
        let eq = self.equilibrium(heaters_on);
        eq + (t_start - eq) * (-self.leakage * dt).exp()
    }

    /// Time for the temperature to go from `from` to `to`, or `None` if the
    /// regime never gets there.
    pub fn time_to_reach(&self, heaters_on: usize, from: f64, to: f64) -> Option<f64> {
        let eq = self.equilibrium(heaters_on);
        let ratio = (from - eq) / (to - eq);
        (ratio >= 1.0 && ratio.is_finite()).then(|| ratio.ln() / self.leakage)
    }
}

/// `T = T_eq + (T_start - T_eq) exp(-L dt)` with the default room.
pub fn closed_form_temperature(heaters_on: usize, t_start: f64, dt: f64) -> f64 {
    RoomConstants::default().temperature(heaters_on, t_start, dt)
}

/// Long-run probability that a repairable unit is down.
pub fn steady_state_unavailability(lambda: f64, mu: f64) -> f64 {
    lambda / (lambda + mu)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let room = RoomConstants::default();
        assert!((room.time_to_reach(1, 17.0, 22.0).unwrap() - 17.917595).abs() < 1e-6);
        assert!((room.time_to_reach(0, 22.0, 15.0).unwrap() - 15.04077).abs() < 1e-5);
        assert_eq!(closed_form_temperature(1, 19.5, 0.0), 19.5);
        assert!((closed_form_temperature(1, 17.0, 10.0 * 6f64.ln()) - 22.0).abs() < 1e-12);
        assert_eq!(room.time_to_reach(0, 20.0, 25.0), None);
    }

    #[test]
    fn unavailability_examples() {
        assert!((steady_state_unavailability(0.01, 0.1) - 0.090909).abs() < 1e-6);
        assert_eq!(steady_state_unavailability(0.3, 0.3), 0.5);
        let main = steady_state_unavailability(0.02, 0.01);
        let backup = steady_state_unavailability(0.01, 0.01);
        assert!((main - 2.0 / 3.0).abs() < 1e-12);
        assert!((main * backup.powi(3) - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn case_ids_parse() {
        for c in CaseId::ALL {
            assert_eq!(c.name().parse::<CaseId>(), Ok(c));
            assert_eq!(c.path().parse::<CaseId>(), Ok(c));
        }
        assert_eq!("2a".parse::<CaseId>(), Ok(CaseId::Case2a));
        assert!("3".parse::<CaseId>().is_err());
    }

    #[test]
    fn catalog_matches_structural_facts() {
        for c in CaseId::ALL {
            let m = build(c, &RateProfile::Text).unwrap();
            let f = c.facts();
            assert_eq!(m.instances.len(), f.instances, "{c}");
            assert_eq!(m.connections.len(), f.connections, "{c}");
            assert_eq!(m.backup_chains.iter().map(Vec::len).sum::<usize>(), f.chain_length, "{c}");
        }
    }

    #[test]
    fn builder_equivalents_match_the_files() {
        for c in CaseId::ALL {
            let dsl = case_parts(c).unwrap();
            let built = builder_parts(c).unwrap();
            let defs = |p: &SystemParts| {
                let mut d: Vec<ComponentDefinition> = p.definitions.iter().map(|d| (**d).clone()).collect();
                d.sort_by(|a, b| a.name.cmp(&b.name));
                d
            };
            assert_eq!(defs(&dsl), defs(&built), "{c}");
            assert_eq!(dsl.mediators, built.mediators, "{c}");
            assert_eq!(dsl.instances, built.instances, "{c}");
            assert_eq!(dsl.connections, built.connections, "{c}");
            assert_eq!(dsl.mediator_groups, built.mediator_groups, "{c}");
            assert_eq!(dsl.backup_chains, built.backup_chains, "{c}");
            assemble_system(built).unwrap();
        }
    }

    #[test]
    fn figure_rates_override_heaters() {
        let m = build(CaseId::Case2a, &RateProfile::Figure).unwrap();
        let lambda = |h: &str| {
            let i = m.instance(h).unwrap();
            let p = i.definition.parameters.iter().position(|p| p.name == "lambda").unwrap();
            i.parameters[p]
        };
        assert_eq!(lambda("h0"), Value::Num(0.02));
        assert_eq!(lambda("h3"), Value::Num(0.01));
    }
}
