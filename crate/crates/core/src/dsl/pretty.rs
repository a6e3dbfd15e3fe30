//! Canonical printer. `parse(print(ast)) == ast` for every parsed AST.

use std::fmt::Write;

use super::ast::*;
use crate::kernel::HookTarget;

pub fn print(ast: &ModelAst) -> String {
    let mut out = String::new();
    for (i, item) in ast.items.iter().enumerate() {
        if i > 0 && !matches!((&ast.items[i - 1], item), (Item::Include(..), Item::Include(..))) {
            out.push('\n');
        }
        match item {
            Item::Include(p, _) => writeln!(out, "include \"{p}\";").unwrap(),
            Item::Component(c) => component(&mut out, c),
            Item::Mediator(m) => mediator(&mut out, m),
            Item::System(s) => system(&mut out, s),
        }
    }
    out
}

fn component(out: &mut String, c: &ComponentAst) {
    let params: Vec<String> = c
        .params
        .iter()
        .map(|p| {
            let u = if p.unique { " unique" } else { "" };
            format!("{}: {} = {}{u}", p.name, p.ty, p.default)
        })
        .collect();
    writeln!(out, "component {}({}) {{", c.name, params.join(", ")).unwrap();
    for m in &c.members {
        match m {
            Member::Var { name, ty, init } => writeln!(out, "  var {name}: {ty} = {init};").unwrap(),
            Member::Ref { name, ty } => writeln!(out, "  ref {name}: {ty};").unwrap(),
            Member::Automaton(a) => {
                writeln!(out, "  automaton {} {{", a.name).unwrap();
                for (s, init) in &a.states {
                    writeln!(out, "    state {s}{};", if *init { " init" } else { "" }).unwrap();
                }
                for t in &a.transitions {
                    out.push_str("    trans ");
                    if let Some(n) = &t.name {
                        write!(out, "{n}: ").unwrap();
                    }
                    write!(out, "{} -> {} law ", t.source, t.target).unwrap();
                    match (t.law, &t.law_arg) {
                        (LawKind::Expo, Some(r)) => write!(out, "expo({r})").unwrap(),
                        (LawKind::Expo, None) => out.push_str("expo(0)"),
                        (LawKind::Inst, Some(w)) => write!(out, "inst({w})").unwrap(),
                        (LawKind::Inst, None) => out.push_str("inst"),
                    }
                    if let Some(w) = &t.when {
                        write!(out, " when {w}").unwrap();
                    }
                    if !t.notify.is_empty() {
                        write!(out, " notify {}", t.notify.join(", ")).unwrap();
                    }
                    out.push_str(";\n");
                }
                out.push_str("  }\n");
            }
            Member::MsgBox(mb) => {
                writeln!(out, "  msgbox {} {{", mb.name).unwrap();
                for (l, e) in &mb.exports {
                    writeln!(out, "    export {l} = {e};").unwrap();
                }
                for (l, local) in &mb.imports {
                    match local {
                        Some(r) => writeln!(out, "    import {l} as {r};").unwrap(),
                        None => writeln!(out, "    import {l};").unwrap(),
                    }
                }
                out.push_str("  }\n");
            }
            Member::Hook(h) => {
                writeln!(out, "  hook {} {{", h.name).unwrap();
                for (target, var, e) in &h.actions {
                    let prefix = if *target == HookTarget::Backups { "backups." } else { "" };
                    writeln!(out, "    {prefix}{var} = {e};").unwrap();
                }
                out.push_str("  }\n");
            }
            Member::Pdmp(p) => {
                writeln!(out, "  pdmp {} {{", p.manager).unwrap();
                for item in &p.items {
                    match item {
                        PdmpItem::Ode(v) => writeln!(out, "    ode {v};").unwrap(),
                        PdmpItem::Eq(v, e) => writeln!(out, "    eq d({v})/dt = {e};").unwrap(),
                        PdmpItem::Stop(e) => writeln!(out, "    stop {e};").unwrap(),
                        PdmpItem::Start(h) => writeln!(out, "    start {h};").unwrap(),
                    }
                }
                out.push_str("  }\n");
            }
        }
    }
    out.push_str("}\n");
}

fn mediator(out: &mut String, m: &MediatorAst) {
    writeln!(out, "mediator {} {{", m.name).unwrap();
    for item in &m.items {
        match item {
            MediatorItem::Manager(n) => writeln!(out, "  manager {n};").unwrap(),
            MediatorItem::Eq(e) => writeln!(out, "  eq d(subject)/dt = {e};").unwrap(),
            MediatorItem::Update { role, reference, value } => {
                writeln!(out, "  update {role}.{reference} = {value};").unwrap()
            }
            MediatorItem::Stop { role, condition } => writeln!(out, "  stop {role}: {condition};").unwrap(),
        }
    }
    out.push_str("}\n");
}

fn system(out: &mut String, s: &SystemAst) {
    out.push_str("system {\n");
    for st in &s.statements {
        match st {
            SystemStmt::Instance { name, component, args, .. } => {
                write!(out, "  instance {name}: {component}").unwrap();
                if !args.is_empty() {
                    let args: Vec<String> = args
                        .iter()
                        .map(|a| match &a.name {
                            Some(n) => format!("{n} = {}", a.value),
                            None => a.value.to_string(),
                        })
                        .collect();
                    write!(out, "({})", args.join(", ")).unwrap();
                }
                out.push_str(";\n");
            }
            SystemStmt::Connect { left, right, .. } => {
                writeln!(out, "  connect {}.{} <-> {}.{};", left.0, left.1, right.0, right.1).unwrap()
            }
            SystemStmt::Mediator { name, mediator, items, .. } => {
                writeln!(out, "  mediator {name}: {mediator} {{").unwrap();
                for g in items {
                    match g {
                        GroupItem::Subject { instance, variable } => {
                            writeln!(out, "    subject {instance}.{variable};").unwrap()
                        }
                        GroupItem::Active { instance, role } => {
                            writeln!(out, "    active {instance} role {role};").unwrap()
                        }
                    }
                }
                out.push_str("  }\n");
            }
            SystemStmt::Chain(c, _) => writeln!(out, "  chain {};", c.join(" -> ")).unwrap(),
            SystemStmt::Pdmp { manager, items, .. } => {
                writeln!(out, "  pdmp {manager} {{").unwrap();
                for item in items {
                    match item {
                        SystemPdmpItem::Ode(i, v) => writeln!(out, "    ode {i}.{v};").unwrap(),
                        SystemPdmpItem::Eq(i, v, e) => writeln!(out, "    eq d({i}.{v})/dt = {e};").unwrap(),
                        SystemPdmpItem::Stop(i, e) => writeln!(out, "    stop {i}: {e};").unwrap(),
                    }
                }
                out.push_str("  }\n");
            }
        }
    }
    out.push_str("}\n");
}
