//! Bounded exhaustive verification: run the machine on every input lasso up
//! to a total length, evaluate every generated formula on the resulting
//! trace, and report violations with replayable counterexamples.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ltl::{Atom, CompiledFormula, GeneratedFormula, Lasso, LtlFormula};
use crate::model::{
    AbstractValue, Bound, Context, DcaKind, DcaRule, ProcessModelVariable, RuleKind, StpaModel,
    UcaKind, UcaRule, ValueDomain,
};
use crate::synth::{self, Statechart, INITIAL};
use crate::validate;
use crate::valuation::{Valuation, ValuationSet, ValuationSpace};

/// One reaction of a machine run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceStep {
    pub valuation: Valuation,
    pub state: String,
    pub sent: Option<String>,
}

impl crate::ltl::Letter for TraceStep {
    fn var_is(&self, variable: &str, value: &str) -> bool {
        self.valuation.get(variable) == Some(value)
    }

    fn sent_is(&self, action: &str) -> bool {
        self.sent.as_deref() == Some(action)
    }
}

pub type MachineTrace = Lasso<TraceStep>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("bound must be at least 1")]
    BoundTooSmall,
    #[error("input valuation {0} does not match the machine's variables")]
    BadValuation(String),
    #[error("formula `{formula}` refers to unknown {what} `{name}`")]
    UnknownAtom {
        formula: String,
        what: &'static str,
        name: String,
    },
}

/// Machine compiled to a successor table over valuation indices.
#[derive(Debug, Clone)]
pub struct Machine {
    valuations: usize,
    states: usize,
    succ: Vec<u32>,
    emits: Vec<Option<usize>>,
}

impl Machine {
    pub fn new(sc: &Statechart) -> Self {
        let valuations = sc.space().len();
        let states = sc.states.len();
        let mut succ = Vec::with_capacity(states * valuations);
        for s in 0..states {
            let out = sc.outgoing(s);
            for v in 0..valuations {
                let next = out
                    .iter()
                    .find(|t| t.guard.contains(v))
                    .map_or(s, |t| t.target);
                succ.push(next as u32);
            }
        }
        let emits = sc
            .states
            .iter()
            .map(|s| {
                s.emits.as_ref().map(|a| {
                    sc.actions
                        .iter()
                        .position(|x| x == a)
                        .expect("emitted action is declared")
                })
            })
            .collect();
        Machine {
            valuations,
            states,
            succ,
            emits,
        }
    }

    pub fn successor(&self, state: usize, v: usize) -> usize {
        self.succ[state * self.valuations + v] as usize
    }

    /// Index of the action emitted in `state`.
    pub fn emits(&self, state: usize) -> Option<usize> {
        self.emits[state]
    }
}

/// A run over valuation indices: `vals[i]`/`states[i]` of reaction `i`, the
/// word looping back to `loop_start` after the last reaction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawTrace {
    pub vals: Vec<usize>,
    pub states: Vec<usize>,
    pub loop_start: usize,
}

/// Runs the machine on `prefix · cycle^ω` (valuation indices). Reaction 0 is
/// the setup reaction: initial state, nothing sent, carrying the first input
/// valuation. Reaction `i ≥ 1` consumes input `i - 1`.
pub fn run_indices(
    m: &Machine,
    prefix: &[usize],
    cycle: &[usize],
    seen: &mut Vec<u32>,
    out: &mut RawTrace,
) {
    let p = prefix.len();
    let l = cycle.len();
    let input = |j: usize| if j < p { prefix[j] } else { cycle[(j - p) % l] };
    seen.clear();
    seen.resize(m.states * l, u32::MAX);
    out.vals.clear();
    out.states.clear();
    out.vals.push(input(0));
    out.states.push(INITIAL);
    let mut q = INITIAL;
    let mut i = 1;
    loop {
        let j = i - 1;
        if j >= p {
            let key = q * l + (j - p) % l;
            if seen[key] != u32::MAX {
                out.loop_start = seen[key] as usize;
                return;
            }
            seen[key] = i as u32;
        }
        let v = input(j);
        q = m.successor(q, v);
        out.vals.push(v);
        out.states.push(q);
        i += 1;
    }
}

/// Runs the machine on an input lasso of named valuations.
pub fn run_machine(sc: &Statechart, input: &Lasso<Valuation>) -> Result<MachineTrace, VerifyError> {
    let space = sc.space();
    let index = |v: &Valuation| {
        space
            .index(v)
            .ok_or_else(|| VerifyError::BadValuation(v.to_string()))
    };
    let prefix = input
        .prefix
        .iter()
        .map(index)
        .collect::<Result<Vec<_>, _>>()?;
    let cycle = input
        .cycle
        .iter()
        .map(index)
        .collect::<Result<Vec<_>, _>>()?;
    if cycle.is_empty() {
        return Err(VerifyError::BadValuation("(empty loop)".into()));
    }
    let m = Machine::new(sc);
    let mut raw = RawTrace::default();
    run_indices(&m, &prefix, &cycle, &mut Vec::new(), &mut raw);
    Ok(named_trace(sc, &space, &raw))
}

fn named_trace(sc: &Statechart, space: &ValuationSpace, raw: &RawTrace) -> MachineTrace {
    let steps: Vec<TraceStep> = raw
        .vals
        .iter()
        .zip(&raw.states)
        .map(|(&v, &s)| TraceStep {
            valuation: space.valuation(v),
            state: sc.states[s].id.clone(),
            sent: sc.states[s].emits.clone(),
        })
        .collect();
    let (prefix, cycle) = steps.split_at(raw.loop_start);
    Lasso {
        prefix: prefix.to_vec(),
        cycle: cycle.to_vec(),
    }
}

/// Every lasso with `prefix + loop ≤ max_total` and a nonempty loop, by
/// total length, then letter sequence, then loop length.
pub fn enumerate_input_lassos<T: Clone>(
    alphabet: &[T],
    max_total: usize,
) -> Result<impl Iterator<Item = Lasso<T>> + '_, VerifyError> {
    if max_total < 1 {
        return Err(VerifyError::BoundTooSmall);
    }
    Ok(
        LassoIndices::new(alphabet.len(), max_total).map(move |(seq, loop_len)| {
            let letters: Vec<T> = seq.iter().map(|&i| alphabet[i].clone()).collect();
            let split = letters.len() - loop_len;
            Lasso {
                prefix: letters[..split].to_vec(),
                cycle: letters[split..].to_vec(),
            }
        }),
    )
}

/// Closed-form number of lassos produced by [`enumerate_input_lassos`].
pub fn lasso_count(alphabet: usize, max_total: usize) -> u64 {
    (1..=max_total as u32)
        .map(|n| n as u64 * (alphabet as u64).pow(n))
        .sum()
}

/// Index-level lasso enumeration: yields (letters, loop length).
struct LassoIndices {
    alphabet: usize,
    max_total: usize,
    seq: Vec<usize>,
    loop_len: usize,
    done: bool,
}

impl LassoIndices {
    fn new(alphabet: usize, max_total: usize) -> Self {
        LassoIndices {
            alphabet,
            max_total,
            seq: vec![0],
            loop_len: 0,
            done: alphabet == 0,
        }
    }

    fn advance(&mut self) -> bool {
        if self.loop_len < self.seq.len() {
            self.loop_len += 1;
            return true;
        }
        self.loop_len = 1;
        for i in (0..self.seq.len()).rev() {
            self.seq[i] += 1;
            if self.seq[i] < self.alphabet {
                return true;
            }
            self.seq[i] = 0;
        }
        if self.seq.len() == self.max_total {
            return false;
        }
        self.seq = vec![0; self.seq.len() + 1];
        true
    }
}

impl Iterator for LassoIndices {
    type Item = (Vec<usize>, usize);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || !self.advance() {
            self.done = true;
            return None;
        }
        Some((self.seq.clone(), self.loop_len))
    }
}

/// Partition of the valuations into classes that no guard of the machine
/// and no state-independent subformula of the formulas can tell apart.
/// Returns one representative (the smallest index) per class.
pub fn input_classes(sc: &Statechart, formulas: &[LtlFormula]) -> Vec<usize> {
    let space = sc.space();
    let mut sets: Vec<ValuationSet> = sc.transitions.iter().map(|t| t.guard.clone()).collect();
    for f in formulas {
        collect_context_sets(f, &space, &mut sets);
    }
    let mut seen: HashMap<Vec<bool>, usize> = HashMap::new();
    let mut reps = Vec::new();
    for v in 0..space.len() {
        let sig: Vec<bool> = sets.iter().map(|s| s.contains(v)).collect();
        seen.entry(sig).or_insert_with(|| {
            reps.push(v);
            v
        });
    }
    reps
}

/// Whether `f` only talks about the current valuation.
fn is_context_only(f: &LtlFormula) -> bool {
    match f {
        LtlFormula::Sent(_) => false,
        LtlFormula::True | LtlFormula::False | LtlFormula::VarEq(..) => true,
        _ => f.is_propositional() && f.children().into_iter().all(is_context_only),
    }
}

fn collect_context_sets(f: &LtlFormula, space: &ValuationSpace, out: &mut Vec<ValuationSet>) {
    if is_context_only(f) {
        let set = ValuationSet::from_indices(
            space.len(),
            (0..space.len()).filter(|&v| eval_context(f, space, v)),
        );
        out.push(set);
        return;
    }
    for c in f.children() {
        collect_context_sets(c, space, out);
    }
}

fn eval_context(f: &LtlFormula, space: &ValuationSpace, v: usize) -> bool {
    use LtlFormula::*;
    match f {
        True => true,
        False => false,
        VarEq(x, val) => space
            .variable_index(x)
            .and_then(|i| space.value_index(i, val).map(|j| space.digit(v, i) == j))
            .unwrap_or(false),
        Not(a) => !eval_context(a, space, v),
        And(a, b) => eval_context(a, space, v) && eval_context(b, space, v),
        Or(a, b) => eval_context(a, space, v) || eval_context(b, space, v),
        Implies(a, b) => !eval_context(a, space, v) || eval_context(b, space, v),
        _ => unreachable!("temporal operator in a context-only formula"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckOptions {
    pub bound: usize,
    /// Enumerate lassos over one representative per input class instead of
    /// over every valuation. Verdicts are identical; only the work shrinks.
    pub reduce_alphabet: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            bound: 6,
            reduce_alphabet: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Holds,
    Violated,
    /// Too-early formulas are checked but not guaranteed by construction.
    NotGuaranteed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub input: Lasso<Valuation>,
    pub trace: MachineTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaResult {
    pub id: String,
    pub rule_id: String,
    pub kind: RuleKind,
    pub formula: String,
    pub status: Status,
    /// Whether the formula held on every checked lasso.
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub bound: usize,
    /// Number of input letters lassos were built from.
    pub alphabet: usize,
    pub lassos: u64,
    pub results: Vec<FormulaResult>,
}

impl Verdict {
    /// Results of non-too-early formulas that failed.
    pub fn violations(&self) -> impl Iterator<Item = &FormulaResult> {
        self.results.iter().filter(|r| r.status == Status::Violated)
    }

    pub fn is_ok(&self) -> bool {
        self.violations().next().is_none()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdicts serialize")
    }
}

enum LeafKind {
    Context(Vec<bool>),
    Sent(usize),
}

fn compile_leaves(
    sc: &Statechart,
    space: &ValuationSpace,
    compiled: &CompiledFormula,
    formulas: &[GeneratedFormula],
) -> Result<Vec<LeafKind>, VerifyError> {
    let context = || {
        formulas
            .first()
            .map(|f| f.formula.to_string())
            .unwrap_or_default()
    };
    compiled
        .atoms()
        .iter()
        .map(|a| match a {
            Atom::VarEq(x, val) => {
                let var = space
                    .variable_index(x)
                    .ok_or_else(|| VerifyError::UnknownAtom {
                        formula: context(),
                        what: "variable",
                        name: x.clone(),
                    })?;
                let value =
                    space
                        .value_index(var, val)
                        .ok_or_else(|| VerifyError::UnknownAtom {
                            formula: context(),
                            what: "value",
                            name: format!("{x}.{val}"),
                        })?;
                Ok(LeafKind::Context(
                    (0..space.len())
                        .map(|v| space.digit(v, var) == value)
                        .collect(),
                ))
            }
            Atom::Sent(action) => sc
                .actions
                .iter()
                .position(|x| x == action)
                .map(LeafKind::Sent)
                .ok_or_else(|| VerifyError::UnknownAtom {
                    formula: context(),
                    what: "control action",
                    name: action.clone(),
                }),
        })
        .collect()
}

/// Evaluates every formula at reaction 1 of every machine run over input
/// lassos up to `options.bound`.
pub fn check(
    sc: &Statechart,
    formulas: &[GeneratedFormula],
    options: CheckOptions,
) -> Result<Verdict, VerifyError> {
    if options.bound < 1 {
        return Err(VerifyError::BoundTooSmall);
    }
    let space = sc.space();
    let plain: Vec<LtlFormula> = formulas.iter().map(|f| f.formula.clone()).collect();
    let compiled = CompiledFormula::many(&plain);
    let leaves = compile_leaves(sc, &space, &compiled, formulas)?;
    let alphabet: Vec<usize> = if options.reduce_alphabet {
        input_classes(sc, &plain)
    } else {
        (0..space.len()).collect()
    };
    let machine = Machine::new(sc);

    let mut first_failure: Vec<Option<(Vec<usize>, Vec<usize>)>> = vec![None; formulas.len()];
    let mut scratch = Vec::new();
    let mut seen = Vec::new();
    let mut raw = RawTrace::default();
    let mut truth = Vec::with_capacity(formulas.len());
    let mut lassos = 0u64;
    let mut prefix = Vec::with_capacity(options.bound);
    let mut cycle = Vec::with_capacity(options.bound);
    for (seq, loop_len) in LassoIndices::new(alphabet.len(), options.bound) {
        lassos += 1;
        let split = seq.len() - loop_len;
        prefix.clear();
        prefix.extend(seq[..split].iter().map(|&i| alphabet[i]));
        cycle.clear();
        cycle.extend(seq[split..].iter().map(|&i| alphabet[i]));
        run_indices(&machine, &prefix, &cycle, &mut seen, &mut raw);
        truth.clear();
        let vals = &raw.vals;
        let states = &raw.states;
        compiled.eval_all_in(
            &mut scratch,
            vals.len(),
            raw.loop_start,
            1,
            |a, p| match &leaves[a] {
                LeafKind::Context(table) => table[vals[p]],
                LeafKind::Sent(action) => machine.emits(states[p]) == Some(*action),
            },
            &mut truth,
        );
        for (i, &ok) in truth.iter().enumerate() {
            if !ok && first_failure[i].is_none() {
                first_failure[i] = Some((prefix.clone(), cycle.clone()));
            }
        }
    }

    let results = formulas
        .iter()
        .zip(first_failure)
        .map(|(f, failure)| {
            let holds = failure.is_none();
            let status = if f.is_too_early() {
                Status::NotGuaranteed
            } else if holds {
                Status::Holds
            } else {
                Status::Violated
            };
            let counterexample = failure.map(|(p, c)| {
                let input = Lasso {
                    prefix: p.iter().map(|&v| space.valuation(v)).collect(),
                    cycle: c.iter().map(|&v| space.valuation(v)).collect(),
                };
                let trace = run_machine(sc, &input).expect("counterexample inputs are valid");
                Counterexample { input, trace }
            });
            FormulaResult {
                id: f.id(),
                rule_id: f.rule_id.clone(),
                kind: f.kind,
                formula: f.formula.to_string(),
                status,
                holds,
                counterexample,
            }
        })
        .collect();
    Ok(Verdict {
        bound: options.bound,
        alphabet: alphabet.len(),
        lassos,
        results,
    })
}

/// Re-runs a counterexample on `sc` and evaluates `formula` at reaction 1.
pub fn replay(
    sc: &Statechart,
    formula: &LtlFormula,
    input: &Lasso<Valuation>,
) -> Result<bool, VerifyError> {
    let trace = run_machine(sc, input)?;
    Ok(crate::ltl::eval_lasso(formula, &trace, 1)
        .expect("machine traces have at least two reactions"))
}

/// Size limits for [`generate_random_model`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub max_actions: usize,
    pub max_variables: usize,
    pub max_values: usize,
    pub max_rules: usize,
    pub max_contexts_per_rule: usize,
    /// Upper bound on the input classes of the synthesized machine, which
    /// keeps exhaustive checking at desk scale.
    pub max_input_classes: Option<usize>,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_actions: 3,
            max_variables: 3,
            max_values: 3,
            max_rules: 6,
            max_contexts_per_rule: 2,
            max_input_classes: Some(6),
        }
    }
}

fn random_variable(rng: &mut ChaCha8Rng, index: usize, max_values: usize) -> ProcessModelVariable {
    let name = format!("x{index}");
    let count = rng.gen_range(2..=max_values.max(2));
    match rng.gen_range(0..5) {
        0 | 1 => ProcessModelVariable::boolean(name),
        2 | 3 => ProcessModelVariable::enumeration(name, ["a", "b", "c"].into_iter().take(count)),
        _ => {
            let p = if rng.gen_bool(0.5) {
                Bound::Param(format!("limit{index}"))
            } else {
                Bound::Number(10.0)
            };
            let values = if count == 2 {
                vec![
                    ("low", interval(Bound::Min, true, p.clone(), false)),
                    ("high", interval(p, true, Bound::Max, true)),
                ]
            } else if let Bound::Param(_) = p {
                vec![
                    ("low", interval(Bound::Min, true, p.clone(), false)),
                    ("mid", ValueDomain::Singleton(p.clone())),
                    ("high", interval(p, false, Bound::Max, true)),
                ]
            } else {
                let q = Bound::Number(20.0);
                vec![
                    ("low", interval(Bound::Min, true, p.clone(), false)),
                    ("mid", interval(p, true, q.clone(), true)),
                    ("high", interval(q, false, Bound::Max, true)),
                ]
            };
            ProcessModelVariable {
                name,
                values: values
                    .into_iter()
                    .map(|(n, domain)| AbstractValue {
                        name: n.into(),
                        domain,
                    })
                    .collect(),
            }
        }
    }
}

fn interval(
    lower: Bound,
    lower_inclusive: bool,
    upper: Bound,
    upper_inclusive: bool,
) -> ValueDomain {
    ValueDomain::Interval {
        lower,
        lower_inclusive,
        upper,
        upper_inclusive,
    }
}

fn random_context(rng: &mut ChaCha8Rng, id: String, vars: &[ProcessModelVariable]) -> Context {
    let mut chosen: Vec<usize> = (0..vars.len()).filter(|_| rng.gen_bool(0.5)).collect();
    if chosen.is_empty() {
        chosen.push(rng.gen_range(0..vars.len()));
    }
    Context::new(
        id,
        chosen.into_iter().map(|i| {
            let v = vars[i].values.choose(rng).expect("variables have values");
            (vars[i].name.clone(), v.name.clone())
        }),
    )
}

/// Sometimes adds one assignment for a variable the context leaves free.
fn narrow_context(rng: &mut ChaCha8Rng, ctx: &mut Context, vars: &[ProcessModelVariable]) {
    let free: Vec<&ProcessModelVariable> = vars
        .iter()
        .filter(|v| !ctx.assignments.iter().any(|a| a.variable == v.name))
        .collect();
    if let (Some(var), true) = (free.choose(rng), rng.gen_bool(0.5)) {
        let value = var.values.choose(rng).expect("variables have values");
        ctx.assignments.push(crate::model::Assignment {
            variable: var.name.clone(),
            value: value.name.clone(),
        });
    }
}

/// A random analysis without ERROR diagnostics, deterministic per seed.
///
/// Rules are drawn one by one; a rule is dropped if it introduces an ERROR
/// or pushes the synthesized machine above `limits.max_input_classes`.
pub fn generate_random_model(seed: u64, limits: Limits) -> StpaModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let var_count = rng.gen_range(1..=limits.max_variables.max(1));
    let variables: Vec<ProcessModelVariable> = (0..var_count)
        .map(|i| random_variable(&mut rng, i, limits.max_values))
        .collect();
    let action_count = rng.gen_range(1..=limits.max_actions.max(1));
    let actions: Vec<String> = ["A", "B", "C", "D", "E", "F"]
        .iter()
        .cycle()
        .take(action_count)
        .enumerate()
        .map(|(i, a)| {
            if i < 6 {
                a.to_string()
            } else {
                format!("{a}{i}")
            }
        })
        .collect();
    let base = StpaModel::new("Random", variables.clone(), actions.clone(), vec![], vec![])
        .expect("generated variables are well formed");

    let mut ucas: Vec<UcaRule> = Vec::new();
    let mut dcas: Vec<DcaRule> = Vec::new();
    let rule_count = rng.gen_range(0..=limits.max_rules);
    // Rules that share actions and contexts interact; bias towards them so
    // splits and refinements actually get exercised.
    let mut used: Vec<(String, RuleKind, Context)> = Vec::new();
    let mut companion = None;
    for _ in 0..rule_count * 4 {
        if ucas.len() + dcas.len() == rule_count {
            break;
        }
        let mut kind = if rng.gen_bool(0.25) {
            RuleKind::Dca(if rng.gen_bool(0.5) {
                DcaKind::Provided
            } else {
                DcaKind::NotProvided
            })
        } else {
            // Splitting rules only matter together with a demand, so they are drawn more often.
            let weighted = [
                (UcaKind::Provided, 2),
                (UcaKind::NotProvided, 2),
                (UcaKind::TooEarly, 1),
                (UcaKind::TooLate, 1),
                (UcaKind::AppliedTooLong, 3),
                (UcaKind::StoppedTooSoon, 2),
            ];
            RuleKind::Uca(
                weighted
                    .choose_weighted(&mut rng, |k| k.1)
                    .expect("positive weights")
                    .0,
            )
        };
        let source = match companion.take() {
            Some(src) => Some(src),
            None if rng.gen_bool(0.6) => used.choose(&mut rng).cloned(),
            None => None,
        };
        let action = match &source {
            Some((a, _, _)) => a.clone(),
            None => actions
                .choose(&mut rng)
                .expect("at least one action")
                .clone(),
        };
        if let Some((_, source_kind, _)) = &source {
            // Pair splitting rules with demands and vice versa.
            let splitting = |k: &RuleKind| {
                matches!(
                    k.effect(),
                    crate::model::Effect::AppliedTooLong | crate::model::Effect::StoppedTooSoon
                )
            };
            if splitting(source_kind) && rng.gen_bool(0.8) {
                kind = *[
                    RuleKind::Uca(UcaKind::NotProvided),
                    RuleKind::Uca(UcaKind::TooLate),
                    RuleKind::Dca(DcaKind::Provided),
                ]
                .choose(&mut rng)
                .expect("three kinds");
            } else if source_kind.effect() == crate::model::Effect::Demand && rng.gen_bool(0.5) {
                kind = RuleKind::Uca(if rng.gen_bool(0.5) {
                    UcaKind::AppliedTooLong
                } else {
                    UcaKind::StoppedTooSoon
                });
            }
        }
        let ctx_count = rng.gen_range(1..=limits.max_contexts_per_rule.max(1));
        let contexts: Vec<Context> = (1..=ctx_count)
            .map(|i| {
                let id = format!("c{i}");
                match &source {
                    Some((_, _, ctx)) if i == 1 || rng.gen_bool(0.5) => {
                        let mut c = ctx.clone();
                        c.id = id;
                        if kind.effect() == crate::model::Effect::Demand {
                            narrow_context(&mut rng, &mut c, &variables);
                        }
                        c
                    }
                    _ => random_context(&mut rng, id, &variables),
                }
            })
            .collect();
        let (mut next_ucas, mut next_dcas) = (ucas.clone(), dcas.clone());
        match kind {
            RuleKind::Dca(k) => next_dcas.push(DcaRule {
                id: format!("D{}", dcas.len() + 1),
                action: action.clone(),
                kind: k,
                contexts: contexts.clone(),
            }),
            RuleKind::Uca(k) => next_ucas.push(UcaRule {
                id: format!("U{}", ucas.len() + 1),
                action: action.clone(),
                kind: k,
                contexts: contexts.clone(),
            }),
        }
        let candidate = base
            .with_rules(next_ucas.clone(), next_dcas.clone())
            .expect("generated rules resolve");
        if validate::has_errors(&validate::validate(&candidate)) {
            continue;
        }
        if let Some(cap) = limits.max_input_classes {
            let s = synth::synthesize_unchecked(&candidate);
            let plain: Vec<LtlFormula> = s.formulas.into_iter().map(|f| f.formula).collect();
            if input_classes(&s.statechart, &plain).len() > cap {
                continue;
            }
        }
        ucas = next_ucas;
        dcas = next_dcas;
        if matches!(
            kind.effect(),
            crate::model::Effect::AppliedTooLong | crate::model::Effect::StoppedTooSoon
        ) && rng.gen_bool(0.7)
        {
            companion = Some((action.clone(), kind, contexts[0].clone()));
        }
        used.extend(contexts.into_iter().map(|c| (action.clone(), kind, c)));
    }
    base.with_rules(ucas, dcas).expect("accepted rules resolve")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::UcaKind;
    use crate::synth::synthesize;

    fn xmodel(ucas: Vec<UcaRule>) -> StpaModel {
        StpaModel::new(
            "C",
            vec![ProcessModelVariable::boolean("x")],
            vec!["CA".into()],
            ucas,
            vec![],
        )
        .unwrap()
    }

    fn uca(id: &str, kind: UcaKind) -> UcaRule {
        UcaRule {
            id: id.into(),
            action: "CA".into(),
            kind,
            contexts: vec![Context::new("c", [("x", "true")])],
        }
    }

    fn val(x: bool) -> Valuation {
        Valuation(vec![("x".into(), x.to_string())])
    }

    #[test]
    fn demand_machine_enters_action_state() {
        let sc = synthesize(&xmodel(vec![uca("U1", UcaKind::NotProvided)]))
            .unwrap()
            .statechart;
        let t = run_machine(&sc, &Lasso::new(vec![], vec![val(true)]).unwrap()).unwrap();
        assert_eq!(t.prefix.len(), 2);
        assert_eq!(t.prefix[0].state, "s0");
        assert_eq!(t.prefix[0].sent, None);
        assert_eq!(
            t.cycle,
            [TraceStep {
                valuation: val(true),
                state: "s_CA".into(),
                sent: Some("CA".into())
            }]
        );
        let t = run_machine(&sc, &Lasso::new(vec![], vec![val(false)]).unwrap()).unwrap();
        assert!(t
            .prefix
            .iter()
            .chain(&t.cycle)
            .all(|s| s.state == "s0" && s.sent.is_none()));
    }

    #[test]
    fn applied_too_long_machine_escapes() {
        let sc = synthesize(&xmodel(vec![
            uca("U1", UcaKind::NotProvided),
            uca("U2", UcaKind::AppliedTooLong),
        ]))
        .unwrap()
        .statechart;
        let t = run_machine(&sc, &Lasso::new(vec![val(true)], vec![val(false)]).unwrap()).unwrap();
        let states: Vec<&str> = t
            .prefix
            .iter()
            .chain(&t.cycle)
            .map(|s| s.state.as_str())
            .collect();
        assert_eq!(states, ["s0", "s_CA_x_true", "s0", "s0"]);
        assert_eq!(t.cycle.len(), 1);
    }

    #[test]
    fn lasso_enumeration_counts() {
        let one: Vec<Lasso<char>> = enumerate_input_lassos(&['a'], 2).unwrap().collect();
        assert_eq!(
            one,
            [
                Lasso {
                    prefix: vec![],
                    cycle: vec!['a']
                },
                Lasso {
                    prefix: vec!['a'],
                    cycle: vec!['a']
                },
                Lasso {
                    prefix: vec![],
                    cycle: vec!['a', 'a']
                },
            ]
        );
        assert_eq!(enumerate_input_lassos(&['a', 'b'], 2).unwrap().count(), 10);
        assert_eq!(lasso_count(2, 2), 10);
        assert_eq!(enumerate_input_lassos(&[1, 2, 3], 1).unwrap().count(), 3);
        for a in 1..4 {
            for k in 1..5 {
                assert_eq!(
                    enumerate_input_lassos(&vec![0; a], k).unwrap().count() as u64,
                    lasso_count(a, k)
                );
            }
        }
        assert!(enumerate_input_lassos(&['a'], 0).is_err());
    }

    #[test]
    fn synthesized_machine_passes_and_mutant_fails() {
        let m = xmodel(vec![uca("U1", UcaKind::NotProvided)]);
        let s = synthesize(&m).unwrap();
        let v = check(&s.statechart, &s.formulas, CheckOptions::default()).unwrap();
        assert!(v.is_ok());
        assert_eq!(v.lassos, lasso_count(2, 6));

        let mut broken = s.statechart.clone();
        broken.transitions.clear();
        let v = check(&broken, &s.formulas, CheckOptions::default()).unwrap();
        let bad: Vec<&FormulaResult> = v.violations().collect();
        assert_eq!(bad.len(), 1);
        let cx = bad[0].counterexample.as_ref().unwrap();
        assert!(!replay(&broken, &s.formulas[0].formula, &cx.input).unwrap());
    }

    #[test]
    fn too_early_is_reported_separately() {
        let m = xmodel(vec![uca("U1", UcaKind::TooEarly)]);
        let s = synthesize(&m).unwrap();
        let v = check(&s.statechart, &s.formulas, CheckOptions::default()).unwrap();
        assert_eq!(v.results[0].status, Status::NotGuaranteed);
        // The machine never sends CA, so the formula holds on every lasso.
        assert!(v.results[0].holds);
        assert!(v.is_ok());
    }

    #[test]
    fn reduced_and_full_alphabets_agree() {
        let m = StpaModel::new(
            "C",
            vec![
                ProcessModelVariable::boolean("x"),
                ProcessModelVariable::enumeration("y", ["a", "b", "c"]),
            ],
            vec!["CA".into()],
            vec![uca("U1", UcaKind::NotProvided)],
            vec![],
        )
        .unwrap();
        let s = synthesize(&m).unwrap();
        let mut broken = s.statechart.clone();
        broken.transitions.clear();
        for sc in [&s.statechart, &broken] {
            let reduced = check(
                sc,
                &s.formulas,
                CheckOptions {
                    bound: 4,
                    reduce_alphabet: true,
                },
            )
            .unwrap();
            let full = check(
                sc,
                &s.formulas,
                CheckOptions {
                    bound: 4,
                    reduce_alphabet: false,
                },
            )
            .unwrap();
            assert_eq!(reduced.alphabet, 2);
            assert_eq!(full.alphabet, 6);
            let holds = |v: &Verdict| v.results.iter().map(|r| r.holds).collect::<Vec<_>>();
            assert_eq!(holds(&reduced), holds(&full));
        }
    }

    #[test]
    fn generator_is_deterministic_and_valid() {
        let limits = Limits::default();
        assert_eq!(
            generate_random_model(7, limits),
            generate_random_model(7, limits)
        );
        for seed in 0..50 {
            let m = generate_random_model(seed, limits);
            assert!(!validate::has_errors(&validate::validate(&m)));
            assert!(m.actions().len() <= 3 && m.variables().len() <= 3);
            assert!(m.variables().iter().all(|v| v.values.len() <= 3));
            assert!(m.ucas().len() + m.dcas().len() <= 6);
        }
    }
}
