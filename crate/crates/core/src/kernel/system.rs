//! System assembly: instantiation, message-box linking, mediator and
//! backup-chain lowering, and PDMP binding.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::component::{ComponentDefinition, HookTarget, PdmpContribution, Symbol, TransitionLaw};
use super::error::{EvalError, ModelError};
use super::expr::{evaluate, AggregateOp, Compiled, EvalContext, Expr, ScalarType, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Argument {
    Positional(Value),
    Named(String, Value),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceDecl {
    pub name: String,
    pub component: String,
    pub arguments: Vec<Argument>,
}

impl InstanceDecl {
    pub fn new(name: &str, component: &str) -> Self {
        InstanceDecl {
            name: name.to_string(),
            component: component.to_string(),
            arguments: Vec::new(),
        }
    }

    pub fn arg(mut self, name: &str, value: Value) -> Self {
        self.arguments.push(Argument::Named(name.to_string(), value));
        self
    }

    pub fn positional(mut self, value: Value) -> Self {
        self.arguments.push(Argument::Positional(value));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub instance: String,
    pub message_box: String,
}

impl Endpoint {
    pub fn new(instance: &str, message_box: &str) -> Self {
        Endpoint {
            instance: instance.to_string(),
            message_box: message_box.to_string(),
        }
    }
}

impl std::fmt::Display for Endpoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.instance, self.message_box)
    }
}

/// Bidirectional message-box link: exports on each side feed the imports
/// with the same wire label on the other side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionDecl {
    pub left: Endpoint,
    pub right: Endpoint,
}

impl ConnectionDecl {
    pub fn new(left: Endpoint, right: Endpoint) -> Self {
        ConnectionDecl { left, right }
    }
}

/// Reusable mediator behaviour: the derivative of each subject variable as
/// a function of its grouped active components.
///
/// In `equation`, `subject` names the subject's continuous variable, bare
/// names resolve in the subject instance, and `op(role: body)` aggregates
/// `body` evaluated in each active of that role.
#[derive(Debug, Clone, PartialEq)]
pub struct MediatorDef {
    pub name: String,
    pub manager: String,
    pub equation: Expr,
    /// `(role, reference, value)`: each active of `role` imports `value`
    /// (evaluated in the subject) through its reference.
    pub updates: Vec<(String, String, Expr)>,
    /// `(role, condition)` evaluated in each active of that role.
    pub stop_conditions: Vec<(String, Expr)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectGroup {
    pub instance: String,
    pub variable: String,
    pub actives: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MediatorGroup {
    pub name: String,
    pub mediator: String,
    pub subjects: Vec<SubjectGroup>,
}

/// Everything `assemble_system` needs.
#[derive(Debug, Clone, Default)]
pub struct SystemParts {
    pub definitions: Vec<Arc<ComponentDefinition>>,
    pub mediators: Vec<MediatorDef>,
    pub instances: Vec<InstanceDecl>,
    pub connections: Vec<ConnectionDecl>,
    pub mediator_groups: Vec<MediatorGroup>,
    pub backup_chains: Vec<Vec<String>>,
    /// PDMP contributions declared at system level, per instance name.
    pub pdmp: Vec<(String, PdmpContribution)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub instance: usize,
    pub expr: Compiled,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CompiledLaw {
    Exponential(Compiled),
    Instantaneous(Compiled),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledTransition {
    pub name: String,
    pub source: usize,
    pub target: usize,
    pub law: CompiledLaw,
    pub condition: Option<Compiled>,
    pub hooks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledAutomaton {
    pub name: String,
    pub states: Vec<String>,
    pub initial: usize,
    pub transitions: Vec<CompiledTransition>,
    /// Outgoing transition indices per state, in declaration order.
    pub outgoing: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledHookAction {
    /// `(instance, variable slot)` pairs written by the action.
    pub targets: Vec<(usize, usize)>,
    pub value: Compiled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledHook {
    pub name: String,
    pub actions: Vec<CompiledHookAction>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub definition: Arc<ComponentDefinition>,
    pub parameters: Vec<Value>,
    /// Definition references followed by references synthesized by
    /// mediator lowering.
    pub references: Vec<String>,
    pub imports: Vec<Vec<Source>>,
    pub automata: Vec<CompiledAutomaton>,
    pub hooks: Vec<CompiledHook>,
    pub initial_values: Vec<Compiled>,
    /// Transitive backups, nearest first.
    pub downstream: Vec<usize>,
    pub(crate) var_offset: usize,
    pub(crate) automaton_offset: usize,
}

impl Instance {
    pub fn reference_slot(&self, name: &str) -> Option<usize> {
        self.references.iter().position(|r| r == name)
    }

    pub fn automaton_index(&self, name: &str) -> Option<usize> {
        self.automata.iter().position(|a| a.name == name)
    }
}

/// One PDMP manager: the continuous variables it integrates and the
/// derivative assigned to each.
#[derive(Debug, Clone, PartialEq)]
pub struct PdmpBinding {
    pub manager: String,
    /// `(instance, variable slot)`.
    pub ode_variables: Vec<(usize, usize)>,
    /// Derivative of `ode_variables[k]`, evaluated in the owning instance.
    pub equations: Vec<(usize, Compiled)>,
    pub stop_conditions: Vec<(usize, Compiled)>,
    pub start_hooks: Vec<(usize, usize)>,
}

/// Fully linked, immutable system.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub instances: Vec<Instance>,
    pub connections: Vec<ConnectionDecl>,
    pub mediator_groups: Vec<MediatorGroup>,
    pub backup_chains: Vec<Vec<String>>,
    pub pdmp_managers: Vec<PdmpBinding>,
    n_values: usize,
    n_automata: usize,
}

/// Discrete and continuous state of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct RuntimeState {
    pub values: Vec<Value>,
    pub active: Vec<usize>,
}

/// Pairs a model with a state so expressions can be evaluated.
#[derive(Clone, Copy)]
pub struct View<'a> {
    pub model: &'a SystemModel,
    pub state: &'a RuntimeState,
}

impl EvalContext for View<'_> {
    #[inline]
    fn var(&self, instance: usize, slot: usize) -> Value {
        self.state.values[self.model.instances[instance].var_offset + slot]
    }

    #[inline]
    fn is_active(&self, instance: usize, automaton: usize, state: usize) -> bool {
        self.state.active[self.model.instances[instance].automaton_offset + automaton] == state
    }

    #[inline]
    fn connection_count(&self, instance: usize, slot: usize) -> usize {
        self.model.instances[instance].imports[slot].len()
    }

    #[inline]
    fn source(&self, instance: usize, slot: usize, index: usize) -> (usize, &Compiled) {
        let s = &self.model.instances[instance].imports[slot][index];
        (s.instance, &s.expr)
    }

    fn reference_name(&self, instance: usize, slot: usize) -> String {
        let inst = &self.model.instances[instance];
        format!("{}.{}", inst.name, inst.references[slot])
    }
}

/// Links instances, connections, mediator groups and backup chains into a
/// [`SystemModel`].
pub fn assemble_system(parts: SystemParts) -> Result<SystemModel, ModelError> {
    Assembler::new(parts)?.run()
}

struct Assembler {
    parts: SystemParts,
    instances: Vec<Instance>,
    by_name: HashMap<String, usize>,
    pdmp: Vec<PdmpBinding>,
}

impl Assembler {
    fn new(parts: SystemParts) -> Result<Self, ModelError> {
        let defs: HashMap<&str, &Arc<ComponentDefinition>> = parts
            .definitions
            .iter()
            .map(|d| (d.name.as_str(), d))
            .collect();
        let mut instances = Vec::new();
        let mut by_name = HashMap::new();
        let (mut var_offset, mut automaton_offset) = (0, 0);
        for decl in &parts.instances {
            let def = *defs
                .get(decl.component.as_str())
                .ok_or_else(|| ModelError::UnknownComponentType(decl.component.clone()))?;
            if by_name.insert(decl.name.clone(), instances.len()).is_some() {
                return Err(ModelError::DuplicateName {
                    kind: "instance",
                    name: decl.name.clone(),
                    scope: "system".into(),
                });
            }
            let parameters = bind_arguments(def, &decl.arguments)?;
            instances.push(Instance {
                name: decl.name.clone(),
                definition: Arc::clone(def),
                parameters,
                references: def.references.iter().map(|r| r.name.clone()).collect(),
                imports: vec![Vec::new(); def.references.len()],
                automata: Vec::new(),
                hooks: Vec::new(),
                initial_values: Vec::new(),
                downstream: Vec::new(),
                var_offset,
                automaton_offset,
            });
            var_offset += def.variables.len();
            automaton_offset += def.automata.len();
        }
        Ok(Assembler {
            parts,
            instances,
            by_name,
            pdmp: Vec::new(),
        })
    }

    fn run(mut self) -> Result<SystemModel, ModelError> {
        self.check_unique_parameters()?;
        self.link_connections()?;
        self.lower_mediators()?;
        self.link_chains()?;
        for i in 0..self.instances.len() {
            self.compile_instance(i)?;
        }
        self.bind_component_pdmp()?;
        self.check_pdmp()?;

        let n_values = self.instances.iter().map(|i| i.definition.variables.len()).sum();
        let n_automata = self.instances.iter().map(|i| i.definition.automata.len()).sum();
        Ok(SystemModel {
            instances: self.instances,
            connections: self.parts.connections,
            mediator_groups: self.parts.mediator_groups,
            backup_chains: self.parts.backup_chains,
            pdmp_managers: self.pdmp,
            n_values,
            n_automata,
        })
    }

    fn index_of(&self, name: &str) -> Result<usize, ModelError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownInstance(name.to_string()))
    }

    fn check_unique_parameters(&self) -> Result<(), ModelError> {
        for def in &self.parts.definitions {
            for (p_idx, p) in def.parameters.iter().enumerate().filter(|(_, p)| p.unique) {
                let mut seen: Vec<(f64, &str)> = Vec::new();
                for inst in self.instances.iter().filter(|i| i.definition.name == def.name) {
                    let v = inst.parameters[p_idx];
                    if let Some((_, other)) = seen.iter().find(|(x, _)| *x == v.as_f64()) {
                        return Err(ModelError::DuplicateUniqueParameter {
                            parameter: format!("{}.{}", def.name, p.name),
                            first: other.to_string(),
                            second: inst.name.clone(),
                            value: v.to_string(),
                        });
                    }
                    seen.push((v.as_f64(), &inst.name));
                }
            }
        }
        Ok(())
    }

    fn link_connections(&mut self) -> Result<(), ModelError> {
        for c in self.parts.connections.clone() {
            let l = self.index_of(&c.left.instance)?;
            let r = self.index_of(&c.right.instance)?;
            let lbox = self.message_box(l, &c.left)?;
            let rbox = self.message_box(r, &c.right)?;
            self.wire(l, &lbox, r, &rbox, &c)?;
            self.wire(r, &rbox, l, &lbox, &c)?;
        }
        Ok(())
    }

    fn message_box(
        &self,
        inst: usize,
        ep: &Endpoint,
    ) -> Result<super::component::MessageBoxDef, ModelError> {
        self.instances[inst]
            .definition
            .find_message_box(&ep.message_box)
            .cloned()
            .ok_or_else(|| ModelError::UnknownMessageBox {
                instance: ep.instance.clone(),
                message_box: ep.message_box.clone(),
            })
    }

    /// Feeds `to`'s imports from `from`'s exports.
    fn wire(
        &mut self,
        from: usize,
        from_box: &super::component::MessageBoxDef,
        to: usize,
        to_box: &super::component::MessageBoxDef,
        c: &ConnectionDecl,
    ) -> Result<(), ModelError> {
        for imp in &to_box.imports {
            let export = from_box
                .exports
                .iter()
                .find(|e| e.label == imp.label)
                .ok_or_else(|| ModelError::LabelMismatch {
                    left: c.left.to_string(),
                    right: c.right.to_string(),
                    label: imp.label.clone(),
                })?;
            let expr = self.compile(from, &export.value)?;
            let slot = self.instances[to]
                .reference_slot(&imp.reference)
                .expect("imports declare their references");
            self.instances[to].imports[slot].push(Source {
                instance: from,
                expr,
            });
        }
        Ok(())
    }

    fn lower_mediators(&mut self) -> Result<(), ModelError> {
        let mediators: HashMap<String, MediatorDef> = self
            .parts
            .mediators
            .iter()
            .map(|m| (m.name.clone(), m.clone()))
            .collect();
        for group in self.parts.mediator_groups.clone() {
            let med = mediators
                .get(&group.mediator)
                .ok_or_else(|| ModelError::UnknownComponentType(group.mediator.clone()))?;
            for (k, subject) in group.subjects.iter().enumerate() {
                let s = self.index_of(&subject.instance)?;
                let var = match self.instances[s].definition.lookup(&subject.variable) {
                    Some(Symbol::Variable(v)) => v,
                    _ => {
                        return Err(ModelError::UnresolvedIdentifier {
                            scope: format!("mediator {}", group.name),
                            name: format!("{}.{}", subject.instance, subject.variable),
                        })
                    }
                };
                if self.instances[s].definition.variables[var].ty != ScalarType::Real {
                    return Err(ModelError::NotContinuous {
                        variable: format!("{}.{}", subject.instance, subject.variable),
                    });
                }
                let mut actives = Vec::new();
                for (name, role) in &subject.actives {
                    actives.push((self.index_of(name)?, role.clone()));
                }
                let scope = format!("mediator {} subject {}", group.name, subject.instance);

                // Role aggregates become synthetic import references on the subject.
                let mut synth = 0;
                let mut err = None;
                let equation = med.equation.map(&mut |e| match e {
                    Expr::Name(n) if n == "subject" => Expr::Name(subject.variable.clone()),
                    Expr::Aggregate {
                        op,
                        role: Some(role),
                        body,
                    } => {
                        let reference = format!("{}#{k}#{synth}", group.name);
                        synth += 1;
                        let mut sources = Vec::new();
                        for (a, r) in &actives {
                            if *r != role {
                                continue;
                            }
                            let b = if op == AggregateOp::Count {
                                Expr::Number(1.0)
                            } else {
                                (*body).clone()
                            };
                            match self.compile(*a, &b) {
                                Ok(expr) => sources.push(Source { instance: *a, expr }),
                                Err(e) => err = Some(e),
                            }
                        }
                        let inst = &mut self.instances[s];
                        inst.references.push(reference.clone());
                        inst.imports.push(sources);
                        Expr::Aggregate {
                            op,
                            role: None,
                            body: Box::new(Expr::Name(reference)),
                        }
                    }
                    other => other,
                });
                if let Some(e) = err {
                    return Err(e);
                }
                let eq = self.compile(s, &equation).map_err(|e| rescope(e, &scope))?;

                for (role, reference, value) in &med.updates {
                    let value = value.map(&mut |e| match e {
                        Expr::Name(n) if n == "subject" => Expr::Name(subject.variable.clone()),
                        other => other,
                    });
                    let src = self.compile(s, &value)?;
                    for (a, r) in &actives {
                        if r != role {
                            continue;
                        }
                        let slot = self.instances[*a].reference_slot(reference).ok_or_else(|| {
                            ModelError::UnresolvedIdentifier {
                                scope: scope.clone(),
                                name: format!("{}.{reference}", self.instances[*a].name),
                            }
                        })?;
                        self.instances[*a].imports[slot].push(Source {
                            instance: s,
                            expr: src.clone(),
                        });
                    }
                }

                let mut stops = Vec::new();
                for (role, cond) in &med.stop_conditions {
                    for (a, r) in &actives {
                        if r == role {
                            stops.push((*a, self.compile(*a, cond)?));
                        }
                    }
                }
                let binding = self.binding(&med.manager);
                binding.ode_variables.push((s, var));
                binding.equations.push((s, eq));
                binding.stop_conditions.extend(stops);
            }
        }
        Ok(())
    }

    fn link_chains(&mut self) -> Result<(), ModelError> {
        let n = self.instances.len();
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
        for chain in &self.parts.backup_chains {
            let mut seen = HashSet::new();
            let mut prev: Option<usize> = None;
            for name in chain {
                let i = self.index_of(name)?;
                if !seen.insert(i) {
                    return Err(ModelError::DuplicateInChain(name.clone()));
                }
                if let Some(p) = prev {
                    if !edges[p].contains(&i) {
                        edges[p].push(i);
                    }
                }
                prev = Some(i);
            }
        }
        // Cycle check by colouring DFS.
        fn visit(
            u: usize,
            edges: &[Vec<usize>],
            colour: &mut [u8],
            names: &[Instance],
        ) -> Result<(), ModelError> {
            colour[u] = 1;
            for &v in &edges[u] {
                match colour[v] {
                    1 => return Err(ModelError::CyclicBackupChain(names[v].name.clone())),
                    0 => visit(v, edges, colour, names)?,
                    _ => {}
                }
            }
            colour[u] = 2;
            Ok(())
        }
        let mut colour = vec![0u8; n];
        for u in 0..n {
            if colour[u] == 0 {
                visit(u, &edges, &mut colour, &self.instances)?;
            }
        }
        for u in 0..n {
            let mut order = Vec::new();
            let mut queue = std::collections::VecDeque::from(edges[u].clone());
            while let Some(v) = queue.pop_front() {
                if !order.contains(&v) {
                    order.push(v);
                    queue.extend(edges[v].iter().copied());
                }
            }
            self.instances[u].downstream = order;
        }
        Ok(())
    }

    fn compile_instance(&mut self, i: usize) -> Result<(), ModelError> {
        let def = Arc::clone(&self.instances[i].definition);
        let mut initial_values = Vec::new();
        for v in &def.variables {
            initial_values.push(self.compile(i, &v.init)?);
        }

        let mut hooks = Vec::new();
        for h in &def.notification_hooks {
            let mut actions = Vec::new();
            for act in &h.actions {
                let value = self.compile(i, &act.value)?;
                let targets = match act.target {
                    HookTarget::Own => vec![(i, var_slot(&def, &act.variable).expect("validated"))],
                    HookTarget::Backups => {
                        let mut t = Vec::new();
                        for &d in &self.instances[i].downstream {
                            let slot = var_slot(&self.instances[d].definition, &act.variable)
                                .ok_or_else(|| ModelError::HookTarget {
                                    instance: self.instances[i].name.clone(),
                                    target: self.instances[d].name.clone(),
                                    variable: act.variable.clone(),
                                })?;
                            t.push((d, slot));
                        }
                        t
                    }
                };
                actions.push(CompiledHookAction { targets, value });
            }
            hooks.push(CompiledHook {
                name: h.name.clone(),
                actions,
            });
        }

        let mut automata = Vec::new();
        for a in &def.automata {
            let mut transitions = Vec::new();
            let mut outgoing = vec![Vec::new(); a.states.len()];
            for t in &a.transitions {
                let source = a.state_index(&t.source).expect("validated");
                outgoing[source].push(transitions.len());
                let law = match &t.law {
                    TransitionLaw::Exponential { rate } => {
                        CompiledLaw::Exponential(self.compile(i, rate)?)
                    }
                    TransitionLaw::Instantaneous { weight } => {
                        CompiledLaw::Instantaneous(self.compile(i, weight)?)
                    }
                };
                let condition = match &t.condition {
                    Some(c) => Some(self.compile(i, c)?),
                    None => None,
                };
                transitions.push(CompiledTransition {
                    name: t.name.clone(),
                    source,
                    target: a.state_index(&t.target).expect("validated"),
                    law,
                    condition,
                    hooks: t
                        .fire_hooks
                        .iter()
                        .map(|h| def.notification_hooks.iter().position(|d| &d.name == h).expect("validated"))
                        .collect(),
                });
            }
            automata.push(CompiledAutomaton {
                name: a.name.clone(),
                states: a.states.clone(),
                initial: a.state_index(&a.initial_state).expect("validated"),
                transitions,
                outgoing,
            });
        }

        let inst = &mut self.instances[i];
        inst.initial_values = initial_values;
        inst.hooks = hooks;
        inst.automata = automata;
        Ok(())
    }

    fn binding(&mut self, manager: &str) -> &mut PdmpBinding {
        if let Some(k) = self.pdmp.iter().position(|b| b.manager == manager) {
            return &mut self.pdmp[k];
        }
        self.pdmp.push(PdmpBinding {
            manager: manager.to_string(),
            ode_variables: Vec::new(),
            equations: Vec::new(),
            stop_conditions: Vec::new(),
            start_hooks: Vec::new(),
        });
        self.pdmp.last_mut().expect("just pushed")
    }

    fn bind_component_pdmp(&mut self) -> Result<(), ModelError> {
        let mut contributions = Vec::new();
        for (i, inst) in self.instances.iter().enumerate() {
            for p in &inst.definition.pdmp {
                contributions.push((i, p.clone()));
            }
        }
        for (name, p) in self.parts.pdmp.clone() {
            let i = self.index_of(&name)?;
            let def = &self.instances[i].definition;
            let scope = format!("instance {name}, pdmp {}", p.manager);
            for v in p.ode_variables.iter() {
                match var_slot(def, v) {
                    Some(slot) if def.variables[slot].ty == ScalarType::Real => {}
                    Some(_) => return Err(ModelError::NotContinuous { variable: format!("{name}.{v}") }),
                    None => {
                        return Err(ModelError::UnresolvedIdentifier {
                            scope,
                            name: v.clone(),
                        })
                    }
                }
            }
            for h in &p.start_hooks {
                if def.hook_def(h).is_none() {
                    return Err(ModelError::UnknownHook { scope, hook: h.clone() });
                }
            }
            contributions.push((i, p));
        }
        for (i, p) in contributions {
            self.bind_contribution(i, &p)?;
        }
        Ok(())
    }

    fn bind_contribution(&mut self, i: usize, p: &PdmpContribution) -> Result<(), ModelError> {
        let def = Arc::clone(&self.instances[i].definition);
        let label = |v: &str| format!("{}.{v}", self.instances[i].name);
        let mut odes = Vec::new();
        for v in &p.ode_variables {
            let slot = var_slot(&def, v).expect("validated");
            let mut eqs = p.equations.iter().filter(|(x, _)| x == v);
            let (_, e) = eqs.next().ok_or_else(|| ModelError::MissingEquation(label(v)))?;
            if eqs.next().is_some() {
                return Err(ModelError::OdeBoundTwice(label(v)));
            }
            odes.push((slot, self.compile(i, e)?));
        }
        for (v, _) in &p.equations {
            if !p.ode_variables.contains(v) {
                return Err(ModelError::Invalid {
                    scope: format!("{}, pdmp {}", self.instances[i].name, p.manager),
                    message: format!("equation for `{v}`, which is not declared `ode`"),
                });
            }
        }
        let mut stops = Vec::new();
        for c in &p.stop_conditions {
            stops.push((i, self.compile(i, c)?));
        }
        let starts: Vec<(usize, usize)> = p
            .start_hooks
            .iter()
            .map(|h| (i, def.notification_hooks.iter().position(|d| &d.name == h).expect("validated")))
            .collect();
        let b = self.binding(&p.manager);
        for (slot, eq) in odes {
            b.ode_variables.push((i, slot));
            b.equations.push((i, eq));
        }
        b.stop_conditions.extend(stops);
        b.start_hooks.extend(starts);
        Ok(())
    }

    fn check_pdmp(&self) -> Result<(), ModelError> {
        let mut seen = HashSet::new();
        for b in &self.pdmp {
            for &(i, slot) in &b.ode_variables {
                if !seen.insert((i, slot)) {
                    let inst = &self.instances[i];
                    return Err(ModelError::OdeBoundTwice(format!(
                        "{}.{}",
                        inst.name, inst.definition.variables[slot].name
                    )));
                }
            }
        }
        Ok(())
    }

    fn compile(&self, inst: usize, expr: &Expr) -> Result<Compiled, ModelError> {
        compile_in(&self.instances, &self.by_name, inst, expr)
    }
}

fn rescope(e: ModelError, scope: &str) -> ModelError {
    match e {
        ModelError::UnresolvedIdentifier { name, .. } => ModelError::UnresolvedIdentifier {
            scope: scope.to_string(),
            name,
        },
        other => other,
    }
}

fn var_slot(def: &ComponentDefinition, name: &str) -> Option<usize> {
    match def.lookup(name)? {
        Symbol::Variable(v) => Some(v),
        _ => None,
    }
}

fn bind_arguments(def: &ComponentDefinition, args: &[Argument]) -> Result<Vec<Value>, ModelError> {
    let mut values: Vec<Value> = def.parameters.iter().map(|p| p.default).collect();
    let mut positional = 0;
    for a in args {
        let (idx, v) = match a {
            Argument::Positional(v) => {
                if positional >= def.parameters.len() {
                    return Err(ModelError::Arity {
                        component: def.name.clone(),
                        given: args.iter().filter(|a| matches!(a, Argument::Positional(_))).count(),
                        expected: def.parameters.len(),
                    });
                }
                positional += 1;
                (positional - 1, *v)
            }
            Argument::Named(n, v) => {
                let idx = def.parameters.iter().position(|p| &p.name == n).ok_or_else(|| {
                    ModelError::UnknownParameter {
                        component: def.name.clone(),
                        parameter: n.clone(),
                    }
                })?;
                (idx, *v)
            }
        };
        let p = &def.parameters[idx];
        values[idx] = v.coerce(p.ty).map_err(|_| ModelError::ParameterType {
            component: def.name.clone(),
            parameter: p.name.clone(),
            expected: p.ty,
            found: v.to_string(),
        })?;
    }
    Ok(values)
}

/// Compiles `expr` in the scope of instance `inst`, folding parameters.
fn compile_in(
    instances: &[Instance],
    by_name: &HashMap<String, usize>,
    inst: usize,
    expr: &Expr,
) -> Result<Compiled, ModelError> {
    let me = &instances[inst];
    let def = &me.definition;
    let unresolved = |name: String| ModelError::UnresolvedIdentifier {
        scope: format!("instance {}", me.name),
        name,
    };
    Ok(match expr {
        Expr::Number(x) => Compiled::Const(Value::Num(*x)),
        Expr::Bool(b) => Compiled::Const(Value::Bool(*b)),
        Expr::Name(n) => {
            if let Some(slot) = me.reference_slot(n) {
                Compiled::Import { slot, index: None }
            } else {
                match def.lookup(n) {
                    Some(Symbol::Parameter(p)) => Compiled::Const(me.parameters[p]),
                    Some(Symbol::Variable(v)) => Compiled::Var(v),
                    _ => return Err(unresolved(n.clone())),
                }
            }
        }
        Expr::Index(n, i) => {
            let slot = me.reference_slot(n).ok_or_else(|| unresolved(n.clone()))?;
            Compiled::Import {
                slot,
                index: Some(Box::new(compile_in(instances, by_name, inst, i)?)),
            }
        }
        Expr::Active(path) => match path.as_slice() {
            [a, s] => {
                let (automaton, state) = state_index(def, a, s).ok_or_else(|| unresolved(path.join(".")))?;
                Compiled::Active { automaton, state }
            }
            [i, a, s] => {
                let other = *by_name.get(i).ok_or_else(|| unresolved(path.join(".")))?;
                let (automaton, state) = state_index(&instances[other].definition, a, s)
                    .ok_or_else(|| unresolved(path.join(".")))?;
                Compiled::GlobalActive {
                    instance: other,
                    automaton,
                    state,
                }
            }
            _ => return Err(unresolved(path.join("."))),
        },
        Expr::Unary(op, e) => Compiled::Unary(*op, Box::new(compile_in(instances, by_name, inst, e)?)),
        Expr::Binary(op, a, b) => Compiled::Binary(
            *op,
            Box::new(compile_in(instances, by_name, inst, a)?),
            Box::new(compile_in(instances, by_name, inst, b)?),
        ),
        Expr::Aggregate { op, role, body } => {
            if role.is_some() {
                return Err(ModelError::Invalid {
                    scope: format!("instance {}", me.name),
                    message: "role aggregates are only allowed in mediators".into(),
                });
            }
            let body = compile_in(instances, by_name, inst, body)?;
            let mut slots = Vec::new();
            collect_slots(&body, &mut slots);
            Compiled::Aggregate {
                op: *op,
                slots,
                body: Box::new(body),
            }
        }
    })
}

fn collect_slots(c: &Compiled, out: &mut Vec<usize>) {
    match c {
        Compiled::Import { slot, index: None } => {
            if !out.contains(slot) {
                out.push(*slot)
            }
        }
        Compiled::Import { index: Some(i), .. } => collect_slots(i, out),
        Compiled::Unary(_, e) => collect_slots(e, out),
        Compiled::Binary(_, a, b) => {
            collect_slots(a, out);
            collect_slots(b, out);
        }
        _ => {}
    }
}

fn state_index(def: &ComponentDefinition, automaton: &str, state: &str) -> Option<(usize, usize)> {
    let a = def.automaton_index(automaton)?;
    Some((a, def.automata[a].state_index(state)?))
}

impl SystemModel {
    pub fn instance_index(&self, name: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.name == name)
    }

    pub fn instance(&self, name: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.name == name)
    }

    /// Number of connections feeding `instance.reference` (the `nbCnx` of
    /// the reference).
    pub fn connection_count(&self, instance: &str, reference: &str) -> Option<usize> {
        let inst = self.instance(instance)?;
        Some(inst.imports[inst.reference_slot(reference)?].len())
    }

    /// Number of instance pairs joined directly by a message-box connection.
    pub fn links_between(&self, component_a: &str, component_b: &str) -> usize {
        self.connections
            .iter()
            .filter(|c| {
                let a = self.instance(&c.left.instance).map(|i| i.definition.name.as_str());
                let b = self.instance(&c.right.instance).map(|i| i.definition.name.as_str());
                (a == Some(component_a) && b == Some(component_b))
                    || (a == Some(component_b) && b == Some(component_a))
            })
            .count()
    }

    pub fn value_count(&self) -> usize {
        self.n_values
    }

    pub fn automaton_count(&self) -> usize {
        self.n_automata
    }

    /// Flat index of `instance.variable` in [`RuntimeState::values`].
    pub fn value_index(&self, instance: usize, slot: usize) -> usize {
        self.instances[instance].var_offset + slot
    }

    pub fn automaton_flat_index(&self, instance: usize, automaton: usize) -> usize {
        self.instances[instance].automaton_offset + automaton
    }

    /// `instance.variable` label of an ODE variable.
    pub fn variable_label(&self, instance: usize, slot: usize) -> String {
        let inst = &self.instances[instance];
        format!("{}.{}", inst.name, inst.definition.variables[slot].name)
    }

    /// Initial discrete states and variable values.
    pub fn initial_state(&self) -> Result<RuntimeState, ModelError> {
        let mut state = RuntimeState {
            values: vec![Value::Num(0.0); self.n_values],
            active: vec![0; self.n_automata],
        };
        for inst in &self.instances {
            for (k, a) in inst.automata.iter().enumerate() {
                state.active[inst.automaton_offset + k] = a.initial;
            }
        }
        for (i, inst) in self.instances.iter().enumerate() {
            for (slot, init) in inst.initial_values.iter().enumerate() {
                let v = evaluate(&View { model: self, state: &state }, i, init, None)
                    .and_then(|v| v.coerce(inst.definition.variables[slot].ty))
                    .map_err(|source| ModelError::Eval {
                        context: format!("initial value of {}", self.variable_label(i, slot)),
                        source,
                    })?;
                state.values[inst.var_offset + slot] = v;
            }
        }
        Ok(state)
    }

    /// Compiles and evaluates `expr` in the scope of `instance`.
    /// `connection` selects the connection index used by bare import names.
    pub fn evaluate_expression(
        &self,
        state: &RuntimeState,
        instance: &str,
        expr: &Expr,
        connection: Option<usize>,
    ) -> Result<Value, ModelError> {
        let i = self
            .instance_index(instance)
            .ok_or_else(|| ModelError::UnknownInstance(instance.to_string()))?;
        let compiled = self.compile(i, expr)?;
        evaluate(&View { model: self, state }, i, &compiled, connection).map_err(|source| ModelError::Eval {
            context: expr.to_string(),
            source,
        })
    }

    pub fn compile(&self, instance: usize, expr: &Expr) -> Result<Compiled, ModelError> {
        let by_name: HashMap<String, usize> = self
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| (inst.name.clone(), i))
            .collect();
        compile_in(&self.instances, &by_name, instance, expr)
    }

    /// Compiles a system-level predicate: only constants, boolean operators
    /// and qualified `active(instance.Automaton.State)` terms are allowed.
    pub fn compile_state_predicate(&self, expr: &Expr) -> Result<Compiled, ModelError> {
        let mut bad = None;
        expr.walk(&mut |e| match e {
            Expr::Bool(_) | Expr::Number(_) | Expr::Unary(..) | Expr::Binary(..) => {}
            Expr::Active(p) if p.len() == 3 => {}
            other => {
                if bad.is_none() {
                    bad = Some(other.to_string())
                }
            }
        });
        if let Some(term) = bad {
            return Err(ModelError::Invalid {
                scope: "state predicate".into(),
                message: format!("`{term}` is not a qualified state reference"),
            });
        }
        let by_name: HashMap<String, usize> = self
            .instances
            .iter()
            .enumerate()
            .map(|(i, inst)| (inst.name.clone(), i))
            .collect();
        if self.instances.is_empty() {
            return Err(ModelError::Invalid {
                scope: "state predicate".into(),
                message: "system has no instances".into(),
            });
        }
        compile_in(&self.instances, &by_name, 0, expr)
    }

    /// Runs the hooks attached to a fired transition of `instance`.
    ///
    /// Values are evaluated in the firing instance before any write, so the
    /// action list behaves as a parallel assignment.
    pub fn run_hooks(&self, state: &mut RuntimeState, instance: usize, hooks: &[usize]) -> Result<(), EvalError> {
        for &h in hooks {
            let hook = &self.instances[instance].hooks[h];
            let mut writes = Vec::new();
            for act in &hook.actions {
                let v = evaluate(&View { model: self, state }, instance, &act.value, None)?;
                for &(target, slot) in &act.targets {
                    let ty = self.instances[target].definition.variables[slot].ty;
                    writes.push((self.value_index(target, slot), v.coerce(ty)?));
                }
            }
            for (idx, v) in writes {
                state.values[idx] = v;
            }
        }
        Ok(())
    }

    /// Fires the hooks of the named transition as if it had just fired.
    pub fn fire_notification_hooks(
        &self,
        state: &mut RuntimeState,
        instance: &str,
        automaton: &str,
        transition: &str,
    ) -> Result<(), ModelError> {
        let i = self
            .instance_index(instance)
            .ok_or_else(|| ModelError::UnknownInstance(instance.to_string()))?;
        let inst = &self.instances[i];
        let a = inst.automaton_index(automaton).ok_or_else(|| ModelError::UnresolvedAutomaton {
            scope: format!("instance {instance}"),
            automaton: automaton.to_string(),
        })?;
        let t = inst.automata[a]
            .transitions
            .iter()
            .find(|t| t.name == transition)
            .ok_or_else(|| ModelError::UnresolvedIdentifier {
                scope: format!("instance {instance}"),
                name: transition.to_string(),
            })?;
        self.run_hooks(state, i, &t.hooks).map_err(|source| ModelError::Eval {
            context: format!("hooks of {instance}.{transition}"),
            source,
        })
    }

    /// Active state name of `instance.automaton`.
    pub fn active_state<'a>(&'a self, state: &RuntimeState, instance: usize, automaton: usize) -> &'a str {
        let s = state.active[self.automaton_flat_index(instance, automaton)];
        &self.instances[instance].automata[automaton].states[s]
    }

    /// Sorted `instance.Automaton.State` labels of every active state.
    pub fn state_signature(&self, state: &RuntimeState) -> Vec<String> {
        let mut sig = Vec::new();
        for (i, inst) in self.instances.iter().enumerate() {
            for (k, a) in inst.automata.iter().enumerate() {
                sig.push(format!("{}.{}.{}", inst.name, a.name, self.active_state(state, i, k)));
            }
        }
        sig.sort();
        sig
    }

    pub fn variable(&self, state: &RuntimeState, instance: &str, variable: &str) -> Option<Value> {
        let i = self.instance_index(instance)?;
        let slot = var_slot(&self.instances[i].definition, variable)?;
        Some(state.values[self.value_index(i, slot)])
    }
}
