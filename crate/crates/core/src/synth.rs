//! Construction of the safe behavior model: a flat, deterministic statechart
//! whose states each emit one control action.
//!
//! Guards are valuation sets, so every refinement step (splitting incoming
//! transitions, subtracting higher-priority guards) is exact.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ltl::{self, GeneratedFormula, LtlFormula};
use crate::model::{
    Bound, Context, Effect, ProcessModelVariable, StpaModel, ValueDomain, VariableKind,
};
use crate::validate::{self, Diagnostic};
use crate::valuation::{ValuationSet, ValuationSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateOrigin {
    Initial,
    Base,
    SplitAppliedTooLong,
    SplitStoppedTooSoon,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub id: String,
    pub emits: Option<String>,
    /// Context a duplicate state was split on.
    pub split: Option<Context>,
    pub origin: StateOrigin,
}

impl State {
    pub fn is_split(&self) -> bool {
        self.split.is_some()
    }
}

/// Why a transition exists; also fixes its rank when priorities are assigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransitionKind {
    /// Enters the state of a demanded action.
    Demand,
    /// Leaves an action state for the initial state.
    Forbid,
    /// Moves from an action state into one of its split duplicates.
    SplitEntry,
    /// Leaves an applied-too-long split once its context stops holding.
    Escape,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub source: usize,
    pub target: usize,
    pub guard: ValuationSet,
    /// 1 is the highest precedence.
    pub priority: u32,
    pub kind: TransitionKind,
    pub provenance: Vec<String>,
}

impl Transition {
    fn add_provenance(&mut self, rule_id: &str) {
        if !self.provenance.iter().any(|p| p == rule_id) {
            self.provenance.push(rule_id.to_string());
        }
    }
}

/// A report entry about a rule that did not change the machine as usual.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub rule_id: String,
    pub context_id: String,
    pub message: String,
}

impl fmt::Display for Note {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}: {}", self.rule_id, self.context_id, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Statechart {
    pub name: String,
    pub variables: Vec<ProcessModelVariable>,
    pub actions: Vec<String>,
    /// `states[0]` is the initial state.
    pub states: Vec<State>,
    pub transitions: Vec<Transition>,
}

pub const INITIAL: usize = 0;

impl Statechart {
    /// Initial state plus one state per control action, no transitions.
    pub fn init(model: &StpaModel) -> Self {
        let mut states = vec![State {
            id: "s0".into(),
            emits: None,
            split: None,
            origin: StateOrigin::Initial,
        }];
        for a in model.actions() {
            states.push(State {
                id: format!("s_{a}"),
                emits: Some(a.clone()),
                split: None,
                origin: StateOrigin::Base,
            });
        }
        Statechart {
            name: model.controller().to_string(),
            variables: model.variables().to_vec(),
            actions: model.actions().to_vec(),
            states,
            transitions: Vec::new(),
        }
    }

    pub fn space(&self) -> ValuationSpace {
        ValuationSpace::new(&self.variables)
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    /// The base state emitting `action`.
    pub fn action_state(&self, action: &str) -> usize {
        self.states
            .iter()
            .position(|s| s.origin == StateOrigin::Base && s.emits.as_deref() == Some(action))
            .unwrap_or_else(|| panic!("no state for control action `{action}`"))
    }

    fn is_duplicate_of(&self, state: usize, base: usize) -> bool {
        state != base
            && self.states[state].is_split()
            && self.states[state].emits == self.states[base].emits
    }

    /// Numeric parameters referenced by value ranges, in first-use order.
    pub fn inputs(&self) -> Vec<(String, VariableKind)> {
        let mut out: Vec<(String, VariableKind)> = Vec::new();
        for var in &self.variables {
            for v in &var.values {
                let bounds: Vec<&Bound> = match &v.domain {
                    ValueDomain::Singleton(b) => vec![b],
                    ValueDomain::Interval { lower, upper, .. } => vec![lower, upper],
                    _ => vec![],
                };
                for b in bounds {
                    if let Bound::Param(p) = b {
                        if !out.iter().any(|(n, _)| n == p) {
                            out.push((p.clone(), VariableKind::Number));
                        }
                    }
                }
            }
        }
        out
    }

    /// Outgoing transitions of `state`, highest precedence first.
    pub fn outgoing(&self, state: usize) -> Vec<&Transition> {
        let mut out: Vec<&Transition> = self
            .transitions
            .iter()
            .filter(|t| t.source == state)
            .collect();
        out.sort_by_key(|t| t.priority);
        out
    }

    /// The transition taken from `state` on valuation `v`, if any.
    pub fn step(&self, state: usize, v: usize) -> Option<&Transition> {
        self.outgoing(state)
            .into_iter()
            .find(|t| t.guard.contains(v))
    }

    /// Successor state on `v`; the machine stays put if nothing is enabled.
    pub fn successor(&self, state: usize, v: usize) -> usize {
        self.step(state, v).map_or(state, |t| t.target)
    }

    /// Effective guard of every transition: its guard minus all guards of
    /// higher precedence leaving the same state.
    pub fn effective_guards(&self) -> Vec<ValuationSet> {
        self.transitions
            .iter()
            .map(|t| {
                let mut g = t.guard.clone();
                for u in &self.transitions {
                    if u.source == t.source && u.priority < t.priority {
                        g = g.difference(&u.guard);
                    }
                }
                g
            })
            .collect()
    }

    /// (state, valuation) pairs where more than one transition could fire:
    /// either two effective guards overlap, or two enabled transitions share
    /// the winning priority.
    pub fn nondeterminism(&self) -> Vec<(usize, usize)> {
        let effective = self.effective_guards();
        let n = self.space().len();
        let mut out = Vec::new();
        for s in 0..self.states.len() {
            for v in 0..n {
                let enabled: Vec<usize> = (0..self.transitions.len())
                    .filter(|&i| {
                        self.transitions[i].source == s && self.transitions[i].guard.contains(v)
                    })
                    .collect();
                let effective_count = enabled
                    .iter()
                    .filter(|&&i| effective[i].contains(v))
                    .count();
                let best = enabled.iter().map(|&i| self.transitions[i].priority).min();
                let tied = enabled
                    .iter()
                    .filter(|&&i| Some(self.transitions[i].priority) == best)
                    .count();
                if effective_count > 1 || tied > 1 {
                    out.push((s, v));
                }
            }
        }
        out
    }

    /// Demand rule: every state other than the action's state and its
    /// duplicates gets a transition into the action's state on `ctx`.
    pub fn apply_demand(&mut self, action: &str, ctx: &ValuationSet, rule_id: &str) {
        let target = self.action_state(action);
        for s in 0..self.states.len() {
            if s == target || self.is_duplicate_of(s, target) {
                continue;
            }
            if let Some(t) = self
                .transitions
                .iter_mut()
                .find(|t| t.source == s && t.target == target && t.kind == TransitionKind::Demand)
            {
                t.guard = t.guard.union(ctx);
                t.add_provenance(rule_id);
            } else {
                self.transitions.push(Transition {
                    source: s,
                    target,
                    guard: ctx.clone(),
                    priority: 0,
                    kind: TransitionKind::Demand,
                    provenance: vec![rule_id.to_string()],
                });
            }
        }
    }

    /// Forbid rule: leave the action's state for the initial state on `ctx`,
    /// except where a demand transition already leaves it. Returns a note if
    /// nothing was left to add.
    pub fn apply_forbid(
        &mut self,
        action: &str,
        ctx: &ValuationSet,
        rule_id: &str,
        context_id: &str,
    ) -> Option<Note> {
        let source = self.action_state(action);
        let mut remainder = ctx.clone();
        for t in &self.transitions {
            if t.source == source && t.kind == TransitionKind::Demand {
                remainder = remainder.difference(&t.guard);
            }
        }
        if remainder.is_empty() {
            return Some(Note {
                rule_id: rule_id.into(),
                context_id: context_id.into(),
                message: format!("existing transitions already leave `{action}` in this context"),
            });
        }
        if let Some(t) = self
            .transitions
            .iter_mut()
            .find(|t| t.source == source && t.target == INITIAL && t.kind == TransitionKind::Forbid)
        {
            t.guard = t.guard.union(&remainder);
            t.add_provenance(rule_id);
        } else {
            self.transitions.push(Transition {
                source,
                target: INITIAL,
                guard: remainder,
                priority: 0,
                kind: TransitionKind::Forbid,
                provenance: vec![rule_id.to_string()],
            });
        }
        None
    }

    /// Too-early rules cannot be realized without knowing the next input.
    pub fn skip_too_early(&self, rule_id: &str, context_id: &str) -> Note {
        Note {
            rule_id: rule_id.into(),
            context_id: context_id.into(),
            message: "too-early formula is generated but not realized; it depends on the next reaction's context".into(),
        }
    }

    /// Applied-too-long rule. Returns the split state, if one was used.
    pub fn apply_applied_too_long(
        &mut self,
        action: &str,
        ctx: &Context,
        set: &ValuationSet,
        rule_id: &str,
    ) -> Option<usize> {
        let base = self.action_state(action);
        let emits = self.states[base].emits.clone();
        let mut leaving = ValuationSet::empty(set.universe());
        for t in &self.transitions {
            if t.source == base && self.states[t.target].emits != emits {
                leaving = leaving.union(&t.guard);
            }
        }
        if set.complement().is_subset(&leaving) {
            return None;
        }
        let (split, created) =
            self.split_state(base, ctx, set, StateOrigin::SplitAppliedTooLong, rule_id);
        if !created {
            if let Some(t) = self
                .transitions
                .iter_mut()
                .find(|t| t.source == split && t.kind == TransitionKind::Escape)
            {
                t.add_provenance(rule_id);
            }
            return Some(split);
        }
        let escape = set.complement();
        if !escape.is_empty() {
            self.transitions.push(Transition {
                source: split,
                target: INITIAL,
                guard: escape,
                priority: 0,
                kind: TransitionKind::Escape,
                provenance: vec![rule_id.to_string()],
            });
        }
        Some(split)
    }

    /// Stopped-too-soon rule. Returns the split state and whether this call
    /// created it.
    pub fn apply_stopped_too_soon(
        &mut self,
        action: &str,
        ctx: &Context,
        set: &ValuationSet,
        rule_id: &str,
    ) -> Option<(usize, bool)> {
        let base = self.action_state(action);
        let triggered = self
            .transitions
            .iter()
            .any(|t| t.source == base && t.guard.intersects(set));
        if !triggered {
            return None;
        }
        let (split, created) =
            self.split_state(base, ctx, set, StateOrigin::SplitStoppedTooSoon, rule_id);
        let outside = set.complement();
        for t in self.transitions.iter_mut().filter(|t| t.source == split) {
            t.guard = t.guard.intersection(&outside);
            t.add_provenance(rule_id);
        }
        self.transitions.retain(|t| !t.guard.is_empty());
        Some((split, created))
    }

    /// Gives each newly created stopped-too-soon split a copy of the
    /// transitions from its base state to the other duplicates, restricted to
    /// valuations outside its context.
    pub fn link_new_duplicates(&mut self, created: &[(usize, ValuationSet, String)]) {
        for (split, set, rule_id) in created {
            let base = self.action_state(
                self.states[*split]
                    .emits
                    .as_deref()
                    .expect("split states emit an action"),
            );
            let outside = set.complement();
            let copies: Vec<Transition> = self
                .transitions
                .iter()
                .filter(|t| {
                    t.source == base && t.target != *split && self.is_duplicate_of(t.target, base)
                })
                .map(|t| {
                    let mut c = t.clone();
                    c.source = *split;
                    c.guard = c.guard.intersection(&outside);
                    c.add_provenance(rule_id);
                    c
                })
                .filter(|t| !t.guard.is_empty())
                .collect();
            self.transitions.extend(copies);
        }
    }

    /// Finds or creates the duplicate of `base` for `set`, rerouting incoming
    /// transitions and copying outgoing ones when it is created.
    fn split_state(
        &mut self,
        base: usize,
        ctx: &Context,
        set: &ValuationSet,
        origin: StateOrigin,
        rule_id: &str,
    ) -> (usize, bool) {
        let space = self.space();
        let existing = (0..self.states.len()).find(|&s| {
            self.is_duplicate_of(s, base)
                && self.states[s]
                    .split
                    .as_ref()
                    .is_some_and(|c| context_set(&space, c) == *set)
        });
        if let Some(s) = existing {
            return (s, false);
        }
        let action = self.states[base]
            .emits
            .clone()
            .expect("base states emit an action");
        let mut id = format!("s_{action}");
        for a in &ctx.assignments {
            id.push_str(&format!("_{}_{}", a.variable, a.value));
        }
        if self.state_index(&id).is_some() {
            let mut n = 2;
            while self.state_index(&format!("{id}_{n}")).is_some() {
                n += 1;
            }
            id = format!("{id}_{n}");
        }
        self.states.push(State {
            id,
            emits: Some(action),
            split: Some(ctx.clone()),
            origin,
        });
        let split = self.states.len() - 1;

        // Reroute incoming transitions; the part inside the context goes to the split.
        let mut rerouted = Vec::with_capacity(self.transitions.len() + 1);
        for t in std::mem::take(&mut self.transitions) {
            if t.target == base && t.guard.intersects(set) {
                let mut inside = t.clone();
                inside.target = split;
                inside.guard = t.guard.intersection(set);
                inside.add_provenance(rule_id);
                let mut rest = t;
                rest.guard = rest.guard.difference(set);
                if !rest.guard.is_empty() {
                    rerouted.push(rest);
                }
                rerouted.push(inside);
            } else {
                rerouted.push(t);
            }
        }
        self.transitions = rerouted;

        let copies: Vec<Transition> = self
            .transitions
            .iter()
            .filter(|t| t.source == base && !self.is_duplicate_of(t.target, base))
            .map(|t| {
                let mut c = t.clone();
                c.source = split;
                c.add_provenance(rule_id);
                c
            })
            .collect();
        self.transitions.extend(copies);
        self.transitions.push(Transition {
            source: base,
            target: split,
            guard: set.clone(),
            priority: 0,
            kind: TransitionKind::SplitEntry,
            provenance: vec![rule_id.to_string()],
        });
        (split, true)
    }

    /// Orders transitions per source (demands, forbids, split entries,
    /// escapes; creation order within a kind), refines every guard against
    /// all higher-priority ones, and merges parallel transitions of one kind.
    pub fn assign_priorities(&mut self) {
        let mut order: Vec<usize> = (0..self.transitions.len()).collect();
        order.sort_by_key(|&i| (self.transitions[i].source, self.transitions[i].kind, i));
        let mut sorted: Vec<Transition> =
            order.iter().map(|&i| self.transitions[i].clone()).collect();

        let mut taken: BTreeMap<usize, ValuationSet> = BTreeMap::new();
        for t in &mut sorted {
            let seen = taken
                .entry(t.source)
                .or_insert_with(|| ValuationSet::empty(t.guard.universe()));
            t.guard = t.guard.difference(seen);
            *seen = seen.union(&t.guard);
        }

        let mut merged: Vec<Transition> = Vec::with_capacity(sorted.len());
        for t in sorted {
            if let Some(m) = merged
                .iter_mut()
                .find(|m| m.source == t.source && m.target == t.target && m.kind == t.kind)
            {
                m.guard = m.guard.union(&t.guard);
                for p in &t.provenance {
                    m.add_provenance(p);
                }
            } else {
                merged.push(t);
            }
        }
        self.transitions = merged;
        self.renumber();
    }

    fn renumber(&mut self) {
        let mut next: BTreeMap<usize, u32> = BTreeMap::new();
        let mut order: Vec<usize> = (0..self.transitions.len()).collect();
        order.sort_by_key(|&i| (self.transitions[i].source, self.transitions[i].priority, i));
        let mut out = Vec::with_capacity(order.len());
        for i in order {
            let mut t = self.transitions[i].clone();
            let p = next.entry(t.source).or_insert(0);
            *p += 1;
            t.priority = *p;
            out.push(t);
        }
        self.transitions = out;
    }

    /// Drops transitions with empty guards and states unreachable from the
    /// initial state, until nothing changes.
    pub fn optimize(&mut self) {
        loop {
            let before = (self.states.len(), self.transitions.len());
            self.transitions.retain(|t| !t.guard.is_empty());

            let mut reachable = vec![false; self.states.len()];
            reachable[INITIAL] = true;
            let mut queue = VecDeque::from([INITIAL]);
            while let Some(s) = queue.pop_front() {
                for t in self.transitions.iter().filter(|t| t.source == s) {
                    if !reachable[t.target] {
                        reachable[t.target] = true;
                        queue.push_back(t.target);
                    }
                }
            }
            let mut remap = vec![usize::MAX; self.states.len()];
            let mut kept = Vec::new();
            for (i, s) in std::mem::take(&mut self.states).into_iter().enumerate() {
                if reachable[i] {
                    remap[i] = kept.len();
                    kept.push(s);
                }
            }
            self.states = kept;
            self.transitions
                .retain(|t| reachable[t.source] && reachable[t.target]);
            for t in &mut self.transitions {
                t.source = remap[t.source];
                t.target = remap[t.target];
            }
            self.renumber();
            if (self.states.len(), self.transitions.len()) == before {
                break;
            }
        }
    }
}

/// Valuation set of a context over `space`; contexts stored on states are
/// always resolvable against the machine's own variables.
fn context_set(space: &ValuationSpace, ctx: &Context) -> ValuationSet {
    let fixed: Vec<(usize, usize)> = ctx
        .assignments
        .iter()
        .map(|a| {
            let var = space
                .variable_index(&a.variable)
                .expect("split context resolves");
            (
                var,
                space
                    .value_index(var, &a.value)
                    .expect("split context resolves"),
            )
        })
        .collect();
    space.matching(&fixed)
}

/// A guard as a disjunction of cubes; each cube is a list of
/// (variable, value) literals in declaration order. An empty cube is `true`,
/// an empty list is `false`.
pub fn guard_cubes(space: &ValuationSpace, set: &ValuationSet) -> Vec<Vec<(usize, usize)>> {
    let vars = space.variable_count();
    let mut cubes: Vec<Vec<Option<usize>>> = set
        .iter()
        .map(|i| space.digits(i).into_iter().map(Some).collect())
        .collect();
    loop {
        let mut changed = false;
        for var in 0..vars {
            let radix = space.radix(var);
            let mut groups: BTreeMap<Vec<Option<usize>>, Vec<usize>> = BTreeMap::new();
            for (i, c) in cubes.iter().enumerate() {
                if c[var].is_some() {
                    let mut key = c.clone();
                    key[var] = None;
                    groups.entry(key).or_default().push(i);
                }
            }
            let mut drop = vec![false; cubes.len()];
            let mut added = Vec::new();
            for (key, members) in groups {
                if members.len() == radix {
                    for m in members {
                        drop[m] = true;
                    }
                    added.push(key);
                }
            }
            if !added.is_empty() {
                changed = true;
                let mut next: Vec<Vec<Option<usize>>> = cubes
                    .into_iter()
                    .zip(drop)
                    .filter(|(_, d)| !d)
                    .map(|(c, _)| c)
                    .collect();
                next.extend(added);
                cubes = next;
            }
        }
        if !changed {
            break;
        }
    }
    cubes.sort();
    cubes
        .into_iter()
        .map(|c| {
            c.into_iter()
                .enumerate()
                .filter_map(|(var, v)| v.map(|v| (var, v)))
                .collect()
        })
        .collect()
}

/// The guard's display formula over `VarEq` atoms.
pub fn guard_formula(space: &ValuationSpace, set: &ValuationSet) -> LtlFormula {
    let cubes = guard_cubes(space, set);
    let cube_formula = |cube: &Vec<(usize, usize)>| {
        cube.iter()
            .map(|&(var, v)| ltl::var_eq(space.variable_name(var), space.value_name(var, v)))
            .reduce(ltl::and)
            .unwrap_or(LtlFormula::True)
    };
    cubes
        .iter()
        .map(cube_formula)
        .reduce(ltl::or)
        .unwrap_or(LtlFormula::False)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub statechart: Statechart,
    pub formulas: Vec<GeneratedFormula>,
    pub notes: Vec<Note>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("the analysis has {} conflicting rule pair(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
}

/// Runs the full pipeline: init, demands, forbids, applied-too-long,
/// stopped-too-soon, too-early notes, priorities, optimization.
pub fn synthesize(model: &StpaModel) -> Result<Synthesis, SynthError> {
    let errors: Vec<Diagnostic> = validate::validate(model)
        .into_iter()
        .filter(|d| d.severity == validate::Severity::Error)
        .collect();
    if !errors.is_empty() {
        return Err(SynthError::Invalid(errors));
    }
    Ok(synthesize_unchecked(model))
}

/// The pipeline without the conflict check.
pub fn synthesize_unchecked(model: &StpaModel) -> Synthesis {
    let mut sc = Statechart::init(model);
    let mut notes = Vec::new();
    let instances = model.instances();
    let set_of = |ctx: &Context| model.context_set(ctx).expect("model contexts resolve");

    for inst in instances
        .iter()
        .filter(|i| i.kind.effect() == Effect::Demand)
    {
        sc.apply_demand(inst.action, &set_of(inst.context), inst.rule_id);
    }
    for inst in instances
        .iter()
        .filter(|i| i.kind.effect() == Effect::Forbid)
    {
        if let Some(n) = sc.apply_forbid(
            inst.action,
            &set_of(inst.context),
            inst.rule_id,
            &inst.context.id,
        ) {
            notes.push(n);
        }
    }
    for inst in instances
        .iter()
        .filter(|i| i.kind.effect() == Effect::AppliedTooLong)
    {
        let set = set_of(inst.context);
        if sc
            .apply_applied_too_long(inst.action, inst.context, &set, inst.rule_id)
            .is_none()
        {
            notes.push(Note {
                rule_id: inst.rule_id.to_string(),
                context_id: inst.context.id.clone(),
                message: format!(
                    "`{}` is already left whenever the context does not hold",
                    inst.action
                ),
            });
        }
    }
    let mut created = Vec::new();
    for inst in instances
        .iter()
        .filter(|i| i.kind.effect() == Effect::StoppedTooSoon)
    {
        let set = set_of(inst.context);
        match sc.apply_stopped_too_soon(inst.action, inst.context, &set, inst.rule_id) {
            Some((split, true)) => created.push((split, set, inst.rule_id.to_string())),
            Some((_, false)) => {}
            None => notes.push(Note {
                rule_id: inst.rule_id.to_string(),
                context_id: inst.context.id.clone(),
                message: format!(
                    "no transition leaves `{}` while the context holds",
                    inst.action
                ),
            }),
        }
    }
    sc.link_new_duplicates(&created);
    for inst in instances
        .iter()
        .filter(|i| i.kind.effect() == Effect::TooEarly)
    {
        notes.push(sc.skip_too_early(inst.rule_id, &inst.context.id));
    }
    sc.assign_priorities();
    sc.optimize();
    Synthesis {
        statechart: sc,
        formulas: ltl::generate_formulas(model),
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{UcaKind, UcaRule};

    fn model(actions: &[&str], ucas: Vec<UcaRule>) -> StpaModel {
        StpaModel::new(
            "C",
            vec![
                ProcessModelVariable::boolean("x"),
                ProcessModelVariable::enumeration("y", ["a", "b"]),
            ],
            actions.iter().map(|a| a.to_string()).collect(),
            ucas,
            vec![],
        )
        .unwrap()
    }

    fn uca(id: &str, action: &str, kind: UcaKind, ctx: &[(&str, &str)]) -> UcaRule {
        UcaRule {
            id: id.into(),
            action: action.into(),
            kind,
            contexts: vec![Context::new("c", ctx.iter().copied())],
        }
    }

    fn set(m: &StpaModel, ctx: &[(&str, &str)]) -> ValuationSet {
        m.context_set(&Context::new("c", ctx.iter().copied()))
            .unwrap()
    }

    fn edges(sc: &Statechart) -> Vec<(String, String, u32, String)> {
        let space = sc.space();
        sc.transitions
            .iter()
            .map(|t| {
                (
                    sc.states[t.source].id.clone(),
                    sc.states[t.target].id.clone(),
                    t.priority,
                    guard_formula(&space, &t.guard).to_string(),
                )
            })
            .collect()
    }

    #[test]
    fn init_has_one_state_per_action() {
        let sc = Statechart::init(&model(&["CA"], vec![]));
        assert_eq!(sc.states.len(), 2);
        assert!(sc.transitions.is_empty());
        let sc = Statechart::init(&model(&[], vec![]));
        assert_eq!(sc.states.len(), 1);
    }

    #[test]
    fn demand_adds_transitions_from_every_other_state() {
        let m = model(&["A", "B"], vec![]);
        let mut sc = Statechart::init(&m);
        let ctx = set(&m, &[("x", "true")]);
        sc.apply_demand("A", &ctx, "U1");
        let got: Vec<(usize, usize)> = sc
            .transitions
            .iter()
            .map(|t| (t.source, t.target))
            .collect();
        assert_eq!(got, [(0, 1), (2, 1)]);
        let before = sc.clone();
        sc.apply_demand("A", &ctx, "U1");
        assert_eq!(sc, before);
    }

    #[test]
    fn forbid_subtracts_existing_demands() {
        let m = model(&["A", "B"], vec![]);
        let mut sc = Statechart::init(&m);
        sc.apply_demand("B", &set(&m, &[("x", "true")]), "U1");
        let note = sc.apply_forbid("A", &set(&m, &[("x", "true"), ("y", "a")]), "U2", "c");
        assert!(note.is_some());
        assert_eq!(sc.transitions.len(), 2);

        let note = sc.apply_forbid("A", &set(&m, &[("y", "a")]), "U3", "c");
        assert!(note.is_none());
        let t = sc.transitions.last().unwrap();
        assert_eq!((t.source, t.target), (1, 0));
        assert_eq!(t.guard, set(&m, &[("x", "false"), ("y", "a")]));
    }

    #[test]
    fn applied_too_long_splits_and_base_state_disappears() {
        let m = StpaModel::new(
            "C",
            vec![ProcessModelVariable::boolean("x")],
            vec!["CA".into()],
            vec![
                uca("U1", "CA", UcaKind::NotProvided, &[("x", "true")]),
                uca("U2", "CA", UcaKind::AppliedTooLong, &[("x", "true")]),
            ],
            vec![],
        )
        .unwrap();
        let sc = synthesize(&m).unwrap().statechart;
        let ids: Vec<&str> = sc.states.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["s0", "s_CA_x_true"]);
        assert_eq!(
            edges(&sc),
            [
                ("s0".into(), "s_CA_x_true".into(), 1, "(x == true)".into()),
                ("s_CA_x_true".into(), "s0".into(), 1, "(x == false)".into()),
            ]
        );
    }

    #[test]
    fn applied_too_long_already_covered_is_a_no_op() {
        let m = model(&["A"], vec![]);
        let mut sc = Statechart::init(&m);
        sc.apply_forbid("A", &set(&m, &[("x", "false")]), "U1", "c");
        let before = sc.clone();
        let ctx = Context::new("c", [("x", "true")]);
        assert!(sc
            .apply_applied_too_long("A", &ctx, &set(&m, &[("x", "true")]), "U2")
            .is_none());
        assert_eq!(sc, before);
    }

    #[test]
    fn stopped_too_soon_restricts_split_outgoing() {
        let m = model(&["CA"], vec![]);
        let mut sc = Statechart::init(&m);
        let x = set(&m, &[("x", "true")]);
        sc.apply_demand("CA", &x, "U1");
        sc.apply_forbid("CA", &set(&m, &[("y", "a")]), "U2", "c");
        let ctx = Context::new("c", [("x", "true")]);
        let (split, created) = sc.apply_stopped_too_soon("CA", &ctx, &x, "U3").unwrap();
        assert!(created);
        let out = sc.outgoing(split);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].target, INITIAL);
        assert_eq!(out[0].guard, set(&m, &[("y", "a"), ("x", "false")]));
        assert!(!sc
            .transitions
            .iter()
            .any(|t| t.source == split && t.kind == TransitionKind::Escape));
    }

    #[test]
    fn stopped_too_soon_without_triggered_outgoing_is_a_no_op() {
        let m = model(&["CA"], vec![]);
        let mut sc = Statechart::init(&m);
        sc.apply_forbid("CA", &set(&m, &[("x", "false")]), "U1", "c");
        let ctx = Context::new("c", [("x", "true")]);
        assert!(sc
            .apply_stopped_too_soon("CA", &ctx, &set(&m, &[("x", "true")]), "U2")
            .is_none());
    }

    #[test]
    fn demand_outranks_forbid_and_guards_become_disjoint() {
        let m = model(&["A", "B"], vec![]);
        let mut sc = Statechart::init(&m);
        sc.apply_forbid("A", &set(&m, &[("y", "a")]), "U1", "c");
        sc.apply_demand("B", &set(&m, &[("x", "true")]), "U2");
        sc.assign_priorities();
        let out = sc.outgoing(1);
        assert_eq!(out[0].kind, TransitionKind::Demand);
        assert_eq!(out[0].priority, 1);
        assert_eq!(out[1].kind, TransitionKind::Forbid);
        assert!(!out[0].guard.intersects(&out[1].guard));
        assert!(sc.nondeterminism().is_empty());
    }

    #[test]
    fn optimize_removes_unreachable_chains_and_is_idempotent() {
        let m = model(&["A", "B"], vec![]);
        let mut sc = Statechart::init(&m);
        sc.transitions.push(Transition {
            source: 1,
            target: 2,
            guard: set(&m, &[("x", "true")]),
            priority: 1,
            kind: TransitionKind::Demand,
            provenance: vec!["U".into()],
        });
        sc.transitions.push(Transition {
            source: 0,
            target: 1,
            guard: ValuationSet::empty(4),
            priority: 1,
            kind: TransitionKind::Demand,
            provenance: vec!["U".into()],
        });
        sc.optimize();
        assert_eq!(sc.states.len(), 1);
        assert!(sc.transitions.is_empty());
        let once = sc.clone();
        sc.optimize();
        assert_eq!(sc, once);
    }

    #[test]
    fn guard_cubes_merge_full_value_sets() {
        let m = model(&["A"], vec![]);
        let space = m.space();
        let g = set(&m, &[("x", "true")]).union(&set(&m, &[("y", "a")]));
        assert_eq!(
            guard_formula(&space, &g).to_string(),
            "((y == a) || ((x == true) && (y == b)))"
        );
        assert_eq!(guard_formula(&space, &space.full()), LtlFormula::True);
        assert_eq!(
            guard_formula(&space, &ValuationSet::empty(4)),
            LtlFormula::False
        );
    }

    #[test]
    fn synthesize_rejects_conflicts() {
        let m = model(
            &["CA"],
            vec![
                uca("U1", "CA", UcaKind::Provided, &[("x", "true")]),
                uca("U2", "CA", UcaKind::NotProvided, &[("x", "true")]),
            ],
        );
        assert!(matches!(synthesize(&m), Err(SynthError::Invalid(d)) if d.len() == 1));
    }

    #[test]
    fn too_early_only_adds_notes() {
        let m = model(
            &["CA"],
            vec![
                uca("U1", "CA", UcaKind::TooEarly, &[("x", "true")]),
                uca("U2", "CA", UcaKind::TooEarly, &[("y", "a")]),
            ],
        );
        let s = synthesize(&m).unwrap();
        assert_eq!(s.notes.len(), 2);
        assert_eq!(s.notes[0].rule_id, "U1");
        assert!(s.statechart.transitions.is_empty());
        assert_eq!(s.formulas.len(), 2);
    }
}
