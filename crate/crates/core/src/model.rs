//! In-memory STPA analysis: process-model variables with abstract values,
//! control actions, and the unsafe/desired control action rules that range
//! over context tables.
//!
//! A [`StpaModel`] is immutable once built and every name it contains is
//! resolved at construction time, so downstream passes never have to deal
//! with dangling references.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::valuation::{Valuation, ValuationSet, ValuationSpace};

/// One end of a numeric value range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    Min,
    Max,
    Number(f64),
    /// A named reference such as `desiredSpeed`; becomes a statechart input.
    Param(String),
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Min => f.write_str("MIN"),
            Bound::Max => f.write_str("MAX"),
            Bound::Number(n) => write!(f, "{n}"),
            Bound::Param(p) => f.write_str(p),
        }
    }
}

/// What an abstract value denotes concretely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ValueDomain {
    Boolean(bool),
    Singleton(Bound),
    Interval {
        lower: Bound,
        lower_inclusive: bool,
        upper: Bound,
        upper_inclusive: bool,
    },
    /// No range given; the value is a plain enum literal.
    Opaque,
}

impl ValueDomain {
    pub fn is_ranged(&self) -> bool {
        matches!(
            self,
            ValueDomain::Singleton(_) | ValueDomain::Interval { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbstractValue {
    pub name: String,
    pub domain: ValueDomain,
}

impl AbstractValue {
    pub fn opaque(name: impl Into<String>) -> Self {
        AbstractValue {
            name: name.into(),
            domain: ValueDomain::Opaque,
        }
    }
}

/// Concrete type a process-model variable is given in the generated model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableKind {
    Boolean,
    Number,
    Enum,
}

impl fmt::Display for VariableKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VariableKind::Boolean => "bool",
            VariableKind::Number => "number",
            VariableKind::Enum => "enum",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessModelVariable {
    pub name: String,
    pub values: Vec<AbstractValue>,
}

impl ProcessModelVariable {
    /// Variable whose values are `true` and `false`.
    pub fn boolean(name: impl Into<String>) -> Self {
        ProcessModelVariable {
            name: name.into(),
            values: vec![
                AbstractValue {
                    name: "true".into(),
                    domain: ValueDomain::Boolean(true),
                },
                AbstractValue {
                    name: "false".into(),
                    domain: ValueDomain::Boolean(false),
                },
            ],
        }
    }

    /// Enum-like variable without value ranges.
    pub fn enumeration<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        ProcessModelVariable {
            name: name.into(),
            values: values.into_iter().map(AbstractValue::opaque).collect(),
        }
    }

    pub fn kind(&self) -> VariableKind {
        if self
            .values
            .iter()
            .any(|v| matches!(v.domain, ValueDomain::Boolean(_)))
        {
            VariableKind::Boolean
        } else if self.values.iter().any(|v| v.domain.is_ranged()) {
            VariableKind::Number
        } else {
            VariableKind::Enum
        }
    }

    pub fn value_index(&self, name: &str) -> Option<usize> {
        self.values.iter().position(|v| v.name == name)
    }
}

/// One assignment `variable = value` inside a context row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub variable: String,
    pub value: String,
}

/// A context table row: a partial assignment of process-model variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Context {
    pub id: String,
    pub assignments: Vec<Assignment>,
}

impl Context {
    pub fn new<V: Into<String>, W: Into<String>>(
        id: impl Into<String>,
        assignments: impl IntoIterator<Item = (V, W)>,
    ) -> Self {
        Context {
            id: id.into(),
            assignments: assignments
                .into_iter()
                .map(|(variable, value)| Assignment {
                    variable: variable.into(),
                    value: value.into(),
                })
                .collect(),
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, a) in self.assignments.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} = {}", a.variable, a.value)?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UcaKind {
    Provided,
    NotProvided,
    TooEarly,
    TooLate,
    AppliedTooLong,
    StoppedTooSoon,
}

impl UcaKind {
    pub const ALL: [UcaKind; 6] = [
        UcaKind::Provided,
        UcaKind::NotProvided,
        UcaKind::TooEarly,
        UcaKind::TooLate,
        UcaKind::AppliedTooLong,
        UcaKind::StoppedTooSoon,
    ];

    /// Keyword used in the textual DSL.
    pub fn keyword(self) -> &'static str {
        match self {
            UcaKind::Provided => "provided",
            UcaKind::NotProvided => "notProvided",
            UcaKind::TooEarly => "tooEarly",
            UcaKind::TooLate => "tooLate",
            UcaKind::AppliedTooLong => "appliedTooLong",
            UcaKind::StoppedTooSoon => "stoppedTooSoon",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        UcaKind::ALL.into_iter().find(|k| k.keyword() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DcaKind {
    Provided,
    NotProvided,
}

impl DcaKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DcaKind::Provided => "provided",
            DcaKind::NotProvided => "notProvided",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        match s {
            "provided" => Some(DcaKind::Provided),
            "notProvided" => Some(DcaKind::NotProvided),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UcaRule {
    pub id: String,
    pub action: String,
    pub kind: UcaKind,
    pub contexts: Vec<Context>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DcaRule {
    pub id: String,
    pub action: String,
    pub kind: DcaKind,
    pub contexts: Vec<Context>,
}

/// Kind of a rule regardless of whether it is a UCA or a DCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "type")]
pub enum RuleKind {
    Uca(UcaKind),
    Dca(DcaKind),
}

/// How a rule shapes the synthesized machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Effect {
    /// The action must be entered when the context holds.
    Demand,
    /// The action must be left when the context holds.
    Forbid,
    TooEarly,
    AppliedTooLong,
    StoppedTooSoon,
}

impl RuleKind {
    pub fn effect(self) -> Effect {
        match self {
            RuleKind::Uca(UcaKind::NotProvided)
            | RuleKind::Uca(UcaKind::TooLate)
            | RuleKind::Dca(DcaKind::Provided) => Effect::Demand,
            RuleKind::Uca(UcaKind::Provided) | RuleKind::Dca(DcaKind::NotProvided) => {
                Effect::Forbid
            }
            RuleKind::Uca(UcaKind::TooEarly) => Effect::TooEarly,
            RuleKind::Uca(UcaKind::AppliedTooLong) => Effect::AppliedTooLong,
            RuleKind::Uca(UcaKind::StoppedTooSoon) => Effect::StoppedTooSoon,
        }
    }

    pub fn is_dca(self) -> bool {
        matches!(self, RuleKind::Dca(_))
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Uca(k) => write!(f, "UCA {}", k.keyword()),
            RuleKind::Dca(k) => write!(f, "DCA {}", k.keyword()),
        }
    }
}

/// A single (action, kind, context) triple taken from a rule row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuleInstance<'m> {
    pub rule_id: &'m str,
    pub action: &'m str,
    pub kind: RuleKind,
    pub context: &'m Context,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("duplicate {what} `{name}`")]
    Duplicate { what: &'static str, name: String },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{variable}` has no value `{value}`")]
    UnknownValue { variable: String, value: String },
    #[error("unknown control action `{0}`")]
    UnknownAction(String),
    #[error("variable `{variable}` assigned twice in context `{context}`")]
    RepeatedAssignment { context: String, variable: String },
    #[error("context `{0}` is empty")]
    EmptyContext(String),
    #[error("rule `{0}` has no contexts")]
    NoContexts(String),
    #[error("variable `{0}` has no values")]
    NoValues(String),
    #[error("variable `{0}`: {1}")]
    BadVariable(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StpaModel {
    controller: String,
    variables: Vec<ProcessModelVariable>,
    actions: Vec<String>,
    ucas: Vec<UcaRule>,
    dcas: Vec<DcaRule>,
}

impl StpaModel {
    /// Builds a model, checking every invariant and cross-reference.
    pub fn new(
        controller: impl Into<String>,
        variables: Vec<ProcessModelVariable>,
        actions: Vec<String>,
        ucas: Vec<UcaRule>,
        dcas: Vec<DcaRule>,
    ) -> Result<Self, ModelError> {
        let model = StpaModel {
            controller: controller.into(),
            variables,
            actions,
            ucas,
            dcas,
        };
        model.check()?;
        Ok(model)
    }

    fn check(&self) -> Result<(), ModelError> {
        let mut seen = HashSet::new();
        for var in &self.variables {
            if !seen.insert(var.name.as_str()) {
                return Err(ModelError::Duplicate {
                    what: "variable",
                    name: var.name.clone(),
                });
            }
            check_variable(var)?;
        }
        let mut seen = HashSet::new();
        for a in &self.actions {
            if !seen.insert(a.as_str()) {
                return Err(ModelError::Duplicate {
                    what: "control action",
                    name: a.clone(),
                });
            }
        }
        let mut ids = HashSet::new();
        for rule in self.rule_headers() {
            let (id, action, contexts) = rule;
            if !ids.insert(id) {
                return Err(ModelError::Duplicate {
                    what: "rule",
                    name: id.to_string(),
                });
            }
            if !self.actions.iter().any(|a| a == action) {
                return Err(ModelError::UnknownAction(action.to_string()));
            }
            if contexts.is_empty() {
                return Err(ModelError::NoContexts(id.to_string()));
            }
            let mut ctx_ids = HashSet::new();
            for ctx in contexts {
                if !ctx_ids.insert(ctx.id.as_str()) {
                    return Err(ModelError::Duplicate {
                        what: "context",
                        name: format!("{id}.{}", ctx.id),
                    });
                }
                self.resolve_context(ctx)?;
            }
        }
        Ok(())
    }

    fn rule_headers(&self) -> impl Iterator<Item = (&str, &str, &[Context])> {
        self.ucas
            .iter()
            .map(|r| (r.id.as_str(), r.action.as_str(), r.contexts.as_slice()))
            .chain(
                self.dcas
                    .iter()
                    .map(|r| (r.id.as_str(), r.action.as_str(), r.contexts.as_slice())),
            )
    }

    pub fn controller(&self) -> &str {
        &self.controller
    }

    pub fn variables(&self) -> &[ProcessModelVariable] {
        &self.variables
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn ucas(&self) -> &[UcaRule] {
        &self.ucas
    }

    pub fn dcas(&self) -> &[DcaRule] {
        &self.dcas
    }

    pub fn variable(&self, name: &str) -> Option<&ProcessModelVariable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn space(&self) -> ValuationSpace {
        ValuationSpace::new(&self.variables)
    }

    /// Every (action, kind, context) instance, UCAs first, in declaration order.
    pub fn instances(&self) -> Vec<RuleInstance<'_>> {
        let mut out = Vec::new();
        for r in &self.ucas {
            for c in &r.contexts {
                out.push(RuleInstance {
                    rule_id: &r.id,
                    action: &r.action,
                    kind: RuleKind::Uca(r.kind),
                    context: c,
                });
            }
        }
        for r in &self.dcas {
            for c in &r.contexts {
                out.push(RuleInstance {
                    rule_id: &r.id,
                    action: &r.action,
                    kind: RuleKind::Dca(r.kind),
                    context: c,
                });
            }
        }
        out
    }

    /// Maps a context onto (variable index, value index) pairs.
    pub fn resolve_context(&self, ctx: &Context) -> Result<Vec<(usize, usize)>, ModelError> {
        resolve_context(&self.variables, ctx)
    }

    /// Valuation set denoted by a context.
    pub fn context_set(&self, ctx: &Context) -> Result<ValuationSet, ModelError> {
        let fixed = self.resolve_context(ctx)?;
        Ok(self.space().matching(&fixed))
    }

    /// A copy of this model with different rule lists. Rules are re-checked.
    pub fn with_rules(&self, ucas: Vec<UcaRule>, dcas: Vec<DcaRule>) -> Result<Self, ModelError> {
        StpaModel::new(
            self.controller.clone(),
            self.variables.clone(),
            self.actions.clone(),
            ucas,
            dcas,
        )
    }
}

pub(crate) fn resolve_context(
    variables: &[ProcessModelVariable],
    ctx: &Context,
) -> Result<Vec<(usize, usize)>, ModelError> {
    if ctx.assignments.is_empty() {
        return Err(ModelError::EmptyContext(ctx.id.clone()));
    }
    let mut out: Vec<(usize, usize)> = Vec::with_capacity(ctx.assignments.len());
    for a in &ctx.assignments {
        let vi = variables
            .iter()
            .position(|v| v.name == a.variable)
            .ok_or_else(|| ModelError::UnknownVariable(a.variable.clone()))?;
        let xi = variables[vi]
            .value_index(&a.value)
            .ok_or_else(|| ModelError::UnknownValue {
                variable: a.variable.clone(),
                value: a.value.clone(),
            })?;
        if out.iter().any(|&(v, _)| v == vi) {
            return Err(ModelError::RepeatedAssignment {
                context: ctx.id.clone(),
                variable: a.variable.clone(),
            });
        }
        out.push((vi, xi));
    }
    Ok(out)
}

fn check_variable(var: &ProcessModelVariable) -> Result<(), ModelError> {
    if var.values.is_empty() {
        return Err(ModelError::NoValues(var.name.clone()));
    }
    let mut names = HashSet::new();
    for v in &var.values {
        if !names.insert(v.name.as_str()) {
            return Err(ModelError::Duplicate {
                what: "value",
                name: format!("{}.{}", var.name, v.name),
            });
        }
    }
    let bools: Vec<bool> = var
        .values
        .iter()
        .filter_map(|v| match v.domain {
            ValueDomain::Boolean(b) => Some(b),
            _ => None,
        })
        .collect();
    if !bools.is_empty() {
        let ok = var.values.len() == 2 && bools.len() == 2 && bools[0] != bools[1];
        if !ok {
            return Err(ModelError::BadVariable(
                var.name.clone(),
                "a boolean variable needs exactly one `true` and one `false` value".into(),
            ));
        }
        return Ok(());
    }
    let ranged = var.values.iter().filter(|v| v.domain.is_ranged()).count();
    if ranged != 0 && ranged != var.values.len() {
        return Err(ModelError::BadVariable(
            var.name.clone(),
            "either every value has a range or none has".into(),
        ));
    }
    for v in &var.values {
        if let Err(msg) = check_domain(&v.domain) {
            return Err(ModelError::BadVariable(
                var.name.clone(),
                format!("value `{}`: {msg}", v.name),
            ));
        }
    }
    Ok(())
}

/// Structural checks on a single range.
pub fn check_domain(domain: &ValueDomain) -> Result<(), String> {
    match domain {
        ValueDomain::Singleton(Bound::Min | Bound::Max) => {
            Err("MIN/MAX cannot be a singleton value".into())
        }
        ValueDomain::Interval {
            lower,
            lower_inclusive,
            upper,
            upper_inclusive,
        } => {
            if *lower == Bound::Max {
                return Err("MAX cannot be a lower bound".into());
            }
            if *upper == Bound::Min {
                return Err("MIN cannot be an upper bound".into());
            }
            let empty = match (lower, upper) {
                (Bound::Number(a), Bound::Number(b)) => {
                    a > b || (a == b && !(*lower_inclusive && *upper_inclusive))
                }
                (Bound::Param(a), Bound::Param(b)) if a == b => {
                    !(*lower_inclusive && *upper_inclusive)
                }
                _ => false,
            };
            if empty {
                Err("range is empty".into())
            } else {
                Ok(())
            }
        }
        _ => Ok(()),
    }
}

/// Every total valuation that agrees with `ctx` on its assigned variables.
pub fn expand_context(model: &StpaModel, ctx: &Context) -> Result<BTreeSet<Valuation>, ModelError> {
    let space = model.space();
    let set = model.context_set(ctx)?;
    Ok(set.iter().map(|i| space.valuation(i)).collect())
}

/// Index of rule contexts by rule id, for diagnostics and reports.
pub fn rule_index(model: &StpaModel) -> HashMap<&str, RuleKind> {
    model
        .ucas()
        .iter()
        .map(|r| (r.id.as_str(), RuleKind::Uca(r.kind)))
        .chain(
            model
                .dcas()
                .iter()
                .map(|r| (r.id.as_str(), RuleKind::Dca(r.kind))),
        )
        .collect()
}
