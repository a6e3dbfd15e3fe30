//! Turns parsed files into kernel definitions and an assembled system.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::ast::*;
use super::error::DslError;
use super::source::SourceFile;
use crate::kernel::{
    assemble_system, Argument, AutomatonDef, ComponentDefinition, ConnectionDecl, Endpoint, Expr,
    HookAction, InstanceDecl, MediatorDef, MediatorGroup, MessageBoxDef, ModelError, PdmpContribution,
    SubjectGroup, SystemModel, SystemParts, TransitionDef, UnaryOp, Value,
};

/// Where each system statement came from, for error reporting.
struct Origin {
    path: PathBuf,
    system_line: usize,
    statements: Vec<SystemStmt>,
}

impl Origin {
    /// Best-effort line of the statement responsible for `err`.
    fn line_of(&self, err: &ModelError) -> usize {
        let mentions = |stmt: &SystemStmt, name: &str| match stmt {
            SystemStmt::Instance { name: n, component, .. } => n == name || component == name,
            SystemStmt::Connect { left, right, .. } => left.0 == name || right.0 == name,
            SystemStmt::Mediator { name: n, mediator, items, .. } => {
                n == name
                    || mediator == name
                    || items.iter().any(|g| match g {
                        GroupItem::Subject { instance, .. } | GroupItem::Active { instance, .. } => instance == name,
                    })
            }
            SystemStmt::Chain(c, _) => c.iter().any(|i| i == name),
            SystemStmt::Pdmp { items, .. } => items.iter().any(|p| match p {
                SystemPdmpItem::Ode(i, _) | SystemPdmpItem::Eq(i, _, _) | SystemPdmpItem::Stop(i, _) => i == name,
            }),
        };
        let key = match err {
            ModelError::UnknownComponentType(n)
            | ModelError::UnknownInstance(n)
            | ModelError::CyclicBackupChain(n)
            | ModelError::DuplicateInChain(n) => Some(n.as_str()),
            ModelError::UnknownMessageBox { instance, .. } => Some(instance.as_str()),
            ModelError::Arity { component, .. } | ModelError::ParameterType { component, .. } => {
                Some(component.as_str())
            }
            ModelError::UnknownParameter { component, .. } => Some(component.as_str()),
            _ => None,
        };
        key.and_then(|k| self.statements.iter().find(|s| mentions(s, k)))
            .map(stmt_line)
            .unwrap_or(self.system_line)
    }
}

fn stmt_line(s: &SystemStmt) -> usize {
    match s {
        SystemStmt::Instance { line, .. }
        | SystemStmt::Connect { line, .. }
        | SystemStmt::Mediator { line, .. }
        | SystemStmt::Chain(_, line)
        | SystemStmt::Pdmp { line, .. } => line.0,
    }
}

/// Folds a literal (optionally negated) into a value.
fn constant(e: &Expr) -> Option<Value> {
    match e {
        Expr::Number(x) => Some(Value::Num(*x)),
        Expr::Bool(b) => Some(Value::Bool(*b)),
        Expr::Unary(UnaryOp::Neg, inner) => match constant(inner)? {
            Value::Num(x) => Some(Value::Num(-x)),
            Value::Bool(_) => None,
        },
        _ => None,
    }
}

fn invalid(scope: &str, message: impl Into<String>) -> ModelError {
    ModelError::Invalid {
        scope: scope.to_string(),
        message: message.into(),
    }
}

pub fn component_definition(c: &ComponentAst, path: &Path) -> Result<ComponentDefinition, DslError> {
    let line = c.line.0;
    let err = |e| DslError::model(path, line, e);
    let scope = format!("component {}", c.name);
    let mut def = ComponentDefinition::new(&c.name);
    for p in &c.params {
        let v = constant(&p.default).ok_or(DslError::NonConstant {
            path: path.to_path_buf(),
            line,
        })?;
        def = if p.unique {
            def.unique_param(&p.name, p.ty, v)
        } else {
            def.param(&p.name, p.ty, v)
        };
    }
    for m in &c.members {
        def = match m {
            Member::Var { name, ty, init } => def.variable(name, *ty, init.clone()),
            Member::Ref { name, ty } => def.reference(name, Some(*ty)),
            Member::Automaton(a) => {
                let inits: Vec<&str> = a.states.iter().filter(|s| s.1).map(|s| s.0.as_str()).collect();
                if inits.len() > 1 {
                    return Err(err(invalid(&scope, format!("automaton `{}` has several initial states", a.name))));
                }
                let states: Vec<&str> = a.states.iter().map(|s| s.0.as_str()).collect();
                let mut ad = AutomatonDef::new(&a.name, &states);
                if let Some(init) = inits.first() {
                    ad = ad.initial(init);
                }
                for t in &a.transitions {
                    let mut td = match t.law {
                        LawKind::Expo => TransitionDef::exponential(
                            &t.source,
                            &t.target,
                            t.law_arg.clone().unwrap_or(Expr::Number(0.0)),
                        ),
                        LawKind::Inst => {
                            let mut td = TransitionDef::instantaneous(&t.source, &t.target);
                            if let Some(w) = &t.law_arg {
                                td.law = crate::kernel::TransitionLaw::Instantaneous { weight: w.clone() };
                            }
                            td
                        }
                    };
                    if let Some(n) = &t.name {
                        td = td.named(n);
                    }
                    if let Some(w) = &t.when {
                        td = td.when(w.clone());
                    }
                    for h in &t.notify {
                        td = td.notify(h);
                    }
                    ad = ad.transition(td);
                }
                def.automaton(ad)
            }
            Member::MsgBox(mb) => {
                let mut md = MessageBoxDef::new(&mb.name);
                for (label, e) in &mb.exports {
                    md = md.export(label, e.clone());
                }
                for (label, local) in &mb.imports {
                    md = md.import(label, local.as_deref().unwrap_or(label));
                }
                def.message_box(md)
            }
            Member::Hook(h) => def.hook(
                &h.name,
                h.actions
                    .iter()
                    .map(|(target, variable, value)| HookAction {
                        target: *target,
                        variable: variable.clone(),
                        value: value.clone(),
                    })
                    .collect(),
            ),
            Member::Pdmp(p) => {
                let mut pc = PdmpContribution {
                    manager: p.manager.clone(),
                    ..Default::default()
                };
                for item in &p.items {
                    match item {
                        PdmpItem::Ode(v) => pc.ode_variables.push(v.clone()),
                        PdmpItem::Eq(v, e) => pc.equations.push((v.clone(), e.clone())),
                        PdmpItem::Stop(e) => pc.stop_conditions.push(e.clone()),
                        PdmpItem::Start(h) => pc.start_hooks.push(h.clone()),
                    }
                }
                def.pdmp(pc)
            }
        };
    }
    def.define().map_err(err)
}

pub fn mediator_definition(m: &MediatorAst, path: &Path) -> Result<MediatorDef, DslError> {
    let scope = format!("mediator {}", m.name);
    let err = |e| DslError::model(path, m.line.0, e);
    let mut manager = None;
    let mut equation = None;
    let mut updates = Vec::new();
    let mut stop_conditions = Vec::new();
    for item in &m.items {
        match item {
            MediatorItem::Manager(n) => {
                if manager.replace(n.clone()).is_some() {
                    return Err(err(invalid(&scope, "manager declared twice")));
                }
            }
            MediatorItem::Eq(e) => {
                if equation.replace(e.clone()).is_some() {
                    return Err(err(invalid(&scope, "equation declared twice")));
                }
            }
            MediatorItem::Update { role, reference, value } => {
                updates.push((role.clone(), reference.clone(), value.clone()))
            }
            MediatorItem::Stop { role, condition } => stop_conditions.push((role.clone(), condition.clone())),
        }
    }
    Ok(MediatorDef {
        name: m.name.clone(),
        manager: manager.ok_or_else(|| err(invalid(&scope, "missing `manager`")))?,
        equation: equation.ok_or_else(|| err(invalid(&scope, "missing `eq d(subject)/dt`")))?,
        updates,
        stop_conditions,
    })
}

fn system_parts(s: &SystemAst, path: &Path) -> Result<SystemParts, DslError> {
    let mut parts = SystemParts::default();
    for st in &s.statements {
        let line = stmt_line(st);
        let err = |e| DslError::model(path, line, e);
        match st {
            SystemStmt::Instance { name, component, args, .. } => {
                let mut decl = InstanceDecl::new(name, component);
                for a in args {
                    let v = constant(&a.value).ok_or(DslError::NonConstant {
                        path: path.to_path_buf(),
                        line,
                    })?;
                    decl.arguments.push(match &a.name {
                        Some(n) => Argument::Named(n.clone(), v),
                        None => Argument::Positional(v),
                    });
                }
                parts.instances.push(decl);
            }
            SystemStmt::Connect { left, right, .. } => parts.connections.push(ConnectionDecl::new(
                Endpoint::new(&left.0, &left.1),
                Endpoint::new(&right.0, &right.1),
            )),
            SystemStmt::Mediator { name, mediator, items, .. } => {
                let mut subjects: Vec<SubjectGroup> = Vec::new();
                for g in items {
                    match g {
                        GroupItem::Subject { instance, variable } => subjects.push(SubjectGroup {
                            instance: instance.clone(),
                            variable: variable.clone(),
                            actives: Vec::new(),
                        }),
                        GroupItem::Active { instance, role } => match subjects.last_mut() {
                            Some(s) => s.actives.push((instance.clone(), role.clone())),
                            None => {
                                return Err(err(invalid(
                                    &format!("mediator group {name}"),
                                    "`active` before any `subject`",
                                )))
                            }
                        },
                    }
                }
                parts.mediator_groups.push(MediatorGroup {
                    name: name.clone(),
                    mediator: mediator.clone(),
                    subjects,
                });
            }
            SystemStmt::Chain(c, _) => parts.backup_chains.push(c.clone()),
            SystemStmt::Pdmp { manager, items, .. } => {
                let mut by_instance: Vec<(String, PdmpContribution)> = Vec::new();
                fn slot<'a>(
                    by_instance: &'a mut Vec<(String, PdmpContribution)>,
                    manager: &str,
                    inst: &str,
                ) -> &'a mut PdmpContribution {
                    let k = match by_instance.iter().position(|(n, _)| n == inst) {
                        Some(k) => k,
                        None => {
                            by_instance.push((
                                inst.to_string(),
                                PdmpContribution {
                                    manager: manager.to_string(),
                                    ..Default::default()
                                },
                            ));
                            by_instance.len() - 1
                        }
                    };
                    &mut by_instance[k].1
                }
                for item in items {
                    match item {
                        SystemPdmpItem::Ode(i, v) => slot(&mut by_instance, manager, i).ode_variables.push(v.clone()),
                        SystemPdmpItem::Eq(i, v, e) => {
                            slot(&mut by_instance, manager, i).equations.push((v.clone(), e.clone()))
                        }
                        SystemPdmpItem::Stop(i, e) => {
                            slot(&mut by_instance, manager, i).stop_conditions.push(e.clone())
                        }
                    }
                }
                parts.pdmp.extend(by_instance);
            }
        }
    }
    Ok(parts)
}

/// Collects the definitions and the single system block of a file set.
pub fn elaborate_parts(files: &[SourceFile]) -> Result<SystemParts, DslError> {
    Ok(collect(files)?.0)
}

fn collect(files: &[SourceFile]) -> Result<(SystemParts, Origin), DslError> {
    let mut definitions = Vec::new();
    let mut mediators = Vec::new();
    let mut seen = HashSet::new();
    let mut system = None;
    let mut system_count = 0;
    for f in files {
        for item in &f.ast.items {
            match item {
                Item::Component(c) => {
                    if !seen.insert(c.name.clone()) {
                        return Err(DslError::model(
                            &f.path,
                            c.line.0,
                            ModelError::DuplicateName {
                                kind: "component",
                                name: c.name.clone(),
                                scope: "model".into(),
                            },
                        ));
                    }
                    definitions.push(Arc::new(component_definition(c, &f.path)?));
                }
                Item::Mediator(m) => {
                    if !seen.insert(m.name.clone()) {
                        return Err(DslError::model(
                            &f.path,
                            m.line.0,
                            ModelError::DuplicateName {
                                kind: "mediator",
                                name: m.name.clone(),
                                scope: "model".into(),
                            },
                        ));
                    }
                    mediators.push(mediator_definition(m, &f.path)?);
                }
                Item::System(s) => {
                    system_count += 1;
                    system = Some((s, &f.path));
                }
                Item::Include(..) => {}
            }
        }
    }
    if system_count != 1 {
        return Err(DslError::SystemCount(system_count));
    }
    let (s, path) = system.expect("one system");
    let mut parts = system_parts(s, path)?;
    parts.definitions = definitions;
    parts.mediators = mediators;
    let origin = Origin {
        path: path.clone(),
        system_line: s.line.0,
        statements: s.statements.clone(),
    };
    Ok((parts, origin))
}

/// Elaborates and assembles a file set.
pub fn elaborate(files: &[SourceFile]) -> Result<SystemModel, DslError> {
    let (parts, origin) = collect(files)?;
    assemble_system(parts).map_err(|e| {
        let line = origin.line_of(&e);
        DslError::model(&origin.path, line, e)
    })
}
