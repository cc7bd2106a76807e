//! Serializations of a synthesized statechart: annotated text, JSON and DOT.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::ltl::GeneratedFormula;
use crate::model::{
    AbstractValue, Bound, Context, ProcessModelVariable, StpaModel, ValueDomain, VariableKind,
};
use crate::synth::{guard_cubes, State, StateOrigin, Statechart, Transition, TransitionKind};
use crate::valuation::{Valuation, ValuationSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// One concrete comparison `variable op rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Comparison {
    pub variable: String,
    pub op: CmpOp,
    pub rhs: String,
}

impl Comparison {
    /// Evaluates a numeric comparison; `param` resolves named bounds.
    /// `None` if the right-hand side is not numeric.
    pub fn holds(&self, x: f64, param: &dyn Fn(&str) -> Option<f64>) -> Option<bool> {
        let r = self.rhs.parse::<f64>().ok().or_else(|| param(&self.rhs))?;
        Some(match self.op {
            CmpOp::Eq => x == r,
            CmpOp::Lt => x < r,
            CmpOp::Le => x <= r,
            CmpOp::Gt => x > r,
            CmpOp::Ge => x >= r,
        })
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.variable, self.op.symbol(), self.rhs)
    }
}

/// The concrete test for `variable == value`; an empty list means `true`.
pub fn comparisons(variable: &str, value: &AbstractValue) -> Vec<Comparison> {
    let cmp = |op, rhs: String| Comparison {
        variable: variable.to_string(),
        op,
        rhs,
    };
    match &value.domain {
        ValueDomain::Boolean(b) => vec![cmp(CmpOp::Eq, b.to_string())],
        ValueDomain::Opaque => vec![cmp(CmpOp::Eq, value.name.clone())],
        ValueDomain::Singleton(b) => vec![cmp(CmpOp::Eq, b.to_string())],
        ValueDomain::Interval {
            lower,
            lower_inclusive,
            upper,
            upper_inclusive,
        } => {
            let mut out = Vec::new();
            if *lower != Bound::Min {
                let op = if *lower_inclusive {
                    CmpOp::Ge
                } else {
                    CmpOp::Gt
                };
                out.push(cmp(op, lower.to_string()));
            }
            if *upper != Bound::Max {
                let op = if *upper_inclusive {
                    CmpOp::Le
                } else {
                    CmpOp::Lt
                };
                out.push(cmp(op, upper.to_string()));
            }
            out
        }
    }
}

fn value_comparisons(sc: &Statechart, var: &str, val: &str) -> Vec<Comparison> {
    sc.variables
        .iter()
        .find(|v| v.name == var)
        .and_then(|v| v.values.iter().find(|x| x.name == val))
        .map(|v| comparisons(var, v))
        .unwrap_or_else(|| {
            vec![Comparison {
                variable: var.to_string(),
                op: CmpOp::Eq,
                rhs: val.to_string(),
            }]
        })
}

/// Guard text over concrete comparisons, e.g. `x == true && speed < v`.
pub fn guard_display(sc: &Statechart, guard: &ValuationSet) -> String {
    let space = sc.space();
    let cubes: Vec<Vec<String>> = guard_cubes(&space, guard)
        .iter()
        .map(|cube| {
            cube.iter()
                .flat_map(|&(var, v)| {
                    let var = &sc.variables[var];
                    comparisons(&var.name, &var.values[v])
                })
                .map(|c| c.to_string())
                .collect()
        })
        .collect();
    let cube_text = |c: &Vec<String>| {
        if c.is_empty() {
            "true".to_string()
        } else {
            c.join(" && ")
        }
    };
    match cubes.len() {
        0 => "false".into(),
        1 => cube_text(&cubes[0]),
        _ => cubes
            .iter()
            .map(|c| format!("({})", cube_text(c)))
            .collect::<Vec<_>>()
            .join(" || "),
    }
}

/// Formula text with process-model atoms replaced by concrete comparisons.
pub fn concrete_formula(sc: &Statechart, f: &GeneratedFormula) -> String {
    f.formula.render_with(&|var, val| {
        let cs = value_comparisons(sc, var, val);
        match cs.len() {
            0 => "true".into(),
            1 => cs[0].to_string(),
            _ => cs
                .iter()
                .map(|c| format!("({c})"))
                .collect::<Vec<_>>()
                .join(" && "),
        }
    })
}

fn type_name(var: &str) -> String {
    let mut c = var.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn ordered_transitions(sc: &Statechart) -> Vec<&Transition> {
    let mut ts: Vec<&Transition> = sc.transitions.iter().collect();
    ts.sort_by_key(|t| (t.source, t.priority));
    ts
}

/// Flat statechart text with one `@LTL` annotation per formula.
pub fn emit_textual(sc: &Statechart, formulas: &[GeneratedFormula]) -> String {
    let mut out = String::new();
    for f in formulas {
        let _ = writeln!(out, "@LTL \"{}\"", concrete_formula(sc, f));
    }
    let _ = writeln!(out, "scchart {} {{", sc.name);
    for (p, _) in sc.inputs() {
        let _ = writeln!(out, "  input number {p}");
    }
    for var in &sc.variables {
        match var.kind() {
            VariableKind::Boolean => {
                let _ = writeln!(out, "  input bool {}", var.name);
            }
            VariableKind::Number => {
                let _ = writeln!(out, "  input number {}", var.name);
            }
            VariableKind::Enum => {
                let names: Vec<&str> = var.values.iter().map(|v| v.name.as_str()).collect();
                let _ = writeln!(
                    out,
                    "  input enum {} {{ {} }} {}",
                    type_name(&var.name),
                    names.join(", "),
                    var.name
                );
            }
        }
    }
    let mut actions = vec!["none"];
    actions.extend(sc.actions.iter().map(String::as_str));
    let _ = writeln!(
        out,
        "  output enum ControlAction {{ {} }} controlAction",
        actions.join(", ")
    );
    for (i, s) in sc.states.iter().enumerate() {
        out.push('\n');
        let initial = if i == 0 { "initial " } else { "" };
        let _ = writeln!(out, "  {initial}state {} {{", s.id);
        let _ = writeln!(
            out,
            "    entry controlAction = {}",
            s.emits.as_deref().unwrap_or("none")
        );
        out.push_str("  }\n");
    }
    if !sc.transitions.is_empty() {
        out.push('\n');
    }
    for t in ordered_transitions(sc) {
        let _ = writeln!(
            out,
            "  {} -> {} priority {} if {}",
            sc.states[t.source].id,
            sc.states[t.target].id,
            t.priority,
            guard_display(sc, &t.guard)
        );
    }
    out.push_str("}\n");
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Graphviz rendering; the initial state is drawn with a double border.
pub fn emit_dot(sc: &Statechart) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph \"{}\" {{", dot_escape(&sc.name));
    out.push_str("  rankdir=LR;\n  node [shape=box, style=rounded];\n");
    out.push_str("  __start [shape=point];\n");
    for (i, s) in sc.states.iter().enumerate() {
        let extra = if i == 0 { ", peripheries=2" } else { "" };
        let _ = writeln!(
            out,
            "  \"{}\" [label=\"{}\\n{}\"{extra}];",
            dot_escape(&s.id),
            dot_escape(&s.id),
            dot_escape(s.emits.as_deref().unwrap_or("none"))
        );
    }
    if let Some(s0) = sc.states.first() {
        let _ = writeln!(out, "  __start -> \"{}\";", dot_escape(&s0.id));
    }
    for t in ordered_transitions(sc) {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"p{}: {}\"];",
            dot_escape(&sc.states[t.source].id),
            dot_escape(&sc.states[t.target].id),
            t.priority,
            dot_escape(&guard_display(sc, &t.guard))
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    id: String,
    emits: Option<String>,
    split: Option<Context>,
    origin: StateOrigin,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionDoc {
    source: String,
    target: String,
    priority: u32,
    kind: TransitionKind,
    provenance: Vec<String>,
    /// Every valuation that enables the transition before priorities apply.
    guard: Vec<Valuation>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SbmDoc {
    name: String,
    variables: Vec<ProcessModelVariable>,
    actions: Vec<String>,
    states: Vec<StateDoc>,
    transitions: Vec<TransitionDoc>,
    formulas: Vec<GeneratedFormula>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JsonError {
    #[error("malformed JSON: {0}")]
    Malformed(String),
    #[error("invalid model: {0}")]
    Schema(String),
}

/// Lossless JSON form of a machine and its formulas.
pub fn emit_json(sc: &Statechart, formulas: &[GeneratedFormula]) -> String {
    let space = sc.space();
    let doc = SbmDoc {
        name: sc.name.clone(),
        variables: sc.variables.clone(),
        actions: sc.actions.clone(),
        states: sc
            .states
            .iter()
            .map(|s| StateDoc {
                id: s.id.clone(),
                emits: s.emits.clone(),
                split: s.split.clone(),
                origin: s.origin,
            })
            .collect(),
        transitions: sc
            .transitions
            .iter()
            .map(|t| TransitionDoc {
                source: sc.states[t.source].id.clone(),
                target: sc.states[t.target].id.clone(),
                priority: t.priority,
                kind: t.kind,
                provenance: t.provenance.clone(),
                guard: t.guard.iter().map(|i| space.valuation(i)).collect(),
            })
            .collect(),
        formulas: formulas.to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("statechart serializes");
    text.push('\n');
    text
}

/// Inverse of [`emit_json`], with structural checks on the result.
pub fn parse_json(text: &str) -> Result<(Statechart, Vec<GeneratedFormula>), JsonError> {
    let doc: SbmDoc = serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => JsonError::Schema(e.to_string()),
        _ => JsonError::Malformed(e.to_string()),
    })?;
    let schema = |m: String| JsonError::Schema(m);
    StpaModel::new(
        doc.name.clone(),
        doc.variables.clone(),
        doc.actions.clone(),
        vec![],
        vec![],
    )
    .map_err(|e| schema(e.to_string()))?;
    let mut sc = Statechart {
        name: doc.name,
        variables: doc.variables,
        actions: doc.actions,
        states: Vec::new(),
        transitions: Vec::new(),
    };
    for (i, s) in doc.states.into_iter().enumerate() {
        if sc.states.iter().any(|x| x.id == s.id) {
            return Err(schema(format!("duplicate state `{}`", s.id)));
        }
        let initial = s.origin == StateOrigin::Initial;
        if initial != (i == 0) {
            return Err(schema("exactly the first state must be initial".into()));
        }
        match &s.emits {
            None if !initial => {
                return Err(schema(format!("state `{}` emits no control action", s.id)))
            }
            Some(_) if initial => return Err(schema("the initial state emits nothing".into())),
            Some(a) if !sc.actions.contains(a) => {
                return Err(schema(format!(
                    "state `{}` emits unknown action `{a}`",
                    s.id
                )))
            }
            _ => {}
        }
        let split_origin = matches!(
            s.origin,
            StateOrigin::SplitAppliedTooLong | StateOrigin::SplitStoppedTooSoon
        );
        if split_origin != s.split.is_some() {
            return Err(schema(format!(
                "state `{}`: split context and origin disagree",
                s.id
            )));
        }
        sc.states.push(State {
            id: s.id,
            emits: s.emits,
            split: s.split,
            origin: s.origin,
        });
    }
    if sc.states.is_empty() {
        return Err(schema("no states".into()));
    }
    let space = sc.space();
    for t in doc.transitions {
        let find = |id: &str| {
            sc.state_index(id)
                .ok_or_else(|| schema(format!("transition refers to unknown state `{id}`")))
        };
        let (source, target) = (find(&t.source)?, find(&t.target)?);
        let mut guard = ValuationSet::empty(space.len());
        for v in &t.guard {
            let i = space
                .index(v)
                .ok_or_else(|| schema(format!("guard valuation {v} does not fit the variables")))?;
            guard.insert(i);
        }
        sc.transitions.push(Transition {
            source,
            target,
            guard,
            priority: t.priority,
            kind: t.kind,
            provenance: t.provenance,
        });
    }
    Ok((sc, doc.formulas))
}
