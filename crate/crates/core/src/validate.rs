//! Conflict and consistency checks over a resolved [`StpaModel`].
//!
//! All conflict checks work on expanded valuation sets, so two contexts that
//! look different but share a valuation are still caught.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Bound, Effect, StpaModel, ValueDomain, VariableKind};
use crate::valuation::{ValuationSet, ValuationSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiagnosticCode {
    /// The same action is both required and forbidden in one valuation.
    UnsatisfiablePair,
    /// Like `UnsatisfiablePair`, but one side is a UCA and the other a DCA.
    UcaDcaContradiction,
    /// Two different actions are required in one valuation.
    MultipleDemandedActions,
    /// Applied-too-long context and a demand context of the same action
    /// each reach outside the other.
    AppliedTooLongVersusDemand,
    /// Two distinct applied-too-long contexts of one action overlap.
    OverlappingAppliedTooLong,
    /// A stopped-too-soon context overlaps a context that forbids the action.
    StoppedTooSoonVersusForbid,
    /// A stopped-too-soon context overlaps a context demanding another action.
    StoppedTooSoonVersusDemand,
    /// A stopped-too-soon context straddles an applied-too-long context.
    StoppedTooSoonVersusAppliedTooLong,
    RangeOverlap,
    RangeGap,
    /// The controller declares no control actions.
    NoControlActions,
    /// A stopped-too-soon context holds in every valuation.
    StoppedTooSoonEverywhere,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub rule_ids: Vec<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.severity, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

struct Instance {
    label: String,
    rule_id: String,
    action: String,
    dca: bool,
    effect: Effect,
    set: ValuationSet,
}

/// Runs every check. The result is sorted, so permuting the rule lists of
/// the model yields the same list.
pub fn validate(model: &StpaModel) -> Vec<Diagnostic> {
    let space = model.space();
    let instances: Vec<Instance> = model
        .instances()
        .into_iter()
        .map(|inst| Instance {
            label: format!("{}.{}", inst.rule_id, inst.context.id),
            rule_id: inst.rule_id.to_string(),
            action: inst.action.to_string(),
            dca: inst.kind.is_dca(),
            effect: inst.kind.effect(),
            set: model
                .context_set(inst.context)
                .expect("model contexts are resolved at construction"),
        })
        .collect();

    let mut out = Vec::new();
    for (i, a) in instances.iter().enumerate() {
        for b in &instances[i + 1..] {
            check_pair(&space, a, b, &mut out);
            check_pair(&space, b, a, &mut out);
        }
    }
    check_ranges(model, &mut out);
    if model.actions().is_empty() {
        out.push(Diagnostic {
            severity: Severity::Warning,
            code: DiagnosticCode::NoControlActions,
            rule_ids: vec![],
            message: format!(
                "controller `{}` has no control actions; the machine only has its initial state",
                model.controller()
            ),
        });
    }
    for inst in &instances {
        if inst.effect == Effect::StoppedTooSoon && inst.set.is_full() {
            out.push(Diagnostic {
                severity: Severity::Warning,
                code: DiagnosticCode::StoppedTooSoonEverywhere,
                rule_ids: vec![inst.rule_id.clone()],
                message: format!(
                    "`{}` holds in every valuation, so `{}` can never be stopped once sent",
                    inst.label, inst.action
                ),
            });
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Checks an ordered pair; `check_pair(b, a)` covers the mirrored roles.
fn check_pair(space: &ValuationSpace, a: &Instance, b: &Instance, out: &mut Vec<Diagnostic>) {
    let same_action = a.action == b.action;
    let overlap = a.set.intersection(&b.set);
    let error = |code, msg: String| {
        let mut ids = vec![a.rule_id.clone(), b.rule_id.clone()];
        ids.sort();
        ids.dedup();
        Diagnostic {
            severity: Severity::Error,
            code,
            rule_ids: ids,
            message: msg,
        }
    };
    let (first, second) = if a.label <= b.label { (a, b) } else { (b, a) };
    match (a.effect, b.effect) {
        (Effect::Demand, Effect::Forbid) if same_action && !overlap.is_empty() => {
            let code = if a.dca != b.dca {
                DiagnosticCode::UcaDcaContradiction
            } else {
                DiagnosticCode::UnsatisfiablePair
            };
            out.push(error(
                code,
                format!(
                    "`{}` requires `{}` and `{}` forbids it on {}",
                    a.label,
                    a.action,
                    b.label,
                    describe(space, &overlap)
                ),
            ));
        }
        (Effect::Demand, Effect::Demand)
            if !same_action && !overlap.is_empty() && a.label < b.label =>
        {
            out.push(error(
                DiagnosticCode::MultipleDemandedActions,
                format!(
                    "`{}` requires `{}` and `{}` requires `{}` on {}; only one action can be sent",
                    first.label,
                    first.action,
                    second.label,
                    second.action,
                    describe(space, &overlap)
                ),
            ));
        }
        (Effect::AppliedTooLong, Effect::Demand) if same_action => {
            let only_atl = a.set.difference(&b.set);
            let only_demand = b.set.difference(&a.set);
            if !only_atl.is_empty() && !only_demand.is_empty() {
                out.push(error(
                    DiagnosticCode::AppliedTooLongVersusDemand,
                    format!(
                        "`{}` stops `{}` when its context ends, but `{}` requires it on {} right after {}",
                        a.label,
                        a.action,
                        b.label,
                        describe(space, &only_demand),
                        describe(space, &only_atl)
                    ),
                ));
            }
        }
        (Effect::AppliedTooLong, Effect::AppliedTooLong)
            if same_action && a.label < b.label && a.set != b.set && !overlap.is_empty() =>
        {
            out.push(error(
                DiagnosticCode::OverlappingAppliedTooLong,
                format!(
                    "applied-too-long contexts `{}` and `{}` of `{}` overlap on {} without being equal",
                    a.label,
                    b.label,
                    a.action,
                    describe(space, &overlap)
                ),
            ));
        }
        (Effect::StoppedTooSoon, Effect::Forbid) if same_action && !overlap.is_empty() => {
            out.push(error(
                DiagnosticCode::StoppedTooSoonVersusForbid,
                format!(
                    "`{}` keeps `{}` while its context holds, but `{}` forbids it on {}",
                    a.label,
                    a.action,
                    b.label,
                    describe(space, &overlap)
                ),
            ));
        }
        (Effect::StoppedTooSoon, Effect::Demand) if !same_action && !overlap.is_empty() => {
            out.push(error(
                DiagnosticCode::StoppedTooSoonVersusDemand,
                format!(
                    "`{}` keeps `{}` while its context holds, but `{}` requires `{}` on {}",
                    a.label,
                    a.action,
                    b.label,
                    b.action,
                    describe(space, &overlap)
                ),
            ));
        }
        (Effect::StoppedTooSoon, Effect::AppliedTooLong) if same_action => {
            let outside = a.set.difference(&b.set);
            if !overlap.is_empty() && !outside.is_empty() {
                out.push(error(
                    DiagnosticCode::StoppedTooSoonVersusAppliedTooLong,
                    format!(
                        "`{}` keeps `{}` on {} after `{}` has ended, which `{}` forbids",
                        a.label,
                        a.action,
                        describe(space, &outside),
                        b.label,
                        b.label
                    ),
                ));
            }
        }
        _ => {}
    }
}

fn describe(space: &ValuationSpace, set: &ValuationSet) -> String {
    const SHOWN: usize = 3;
    let mut parts: Vec<String> = set
        .iter()
        .take(SHOWN)
        .map(|i| space.valuation(i).to_string())
        .collect();
    let total = set.len();
    if total > SHOWN {
        parts.push(format!("… ({total} valuations)"));
    }
    parts.join(", ")
}

/// Position of a range end point relative to the sorted finite points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Key {
    NegInf,
    Point(usize),
    PosInf,
}

/// Sample locations: a finite point, or the open gap just below point `i`
/// (`Gap(len)` is above the largest point).
#[derive(Debug, Clone, Copy)]
enum Sample {
    Point(usize),
    Gap(usize),
}

struct Span {
    lo: Key,
    lo_inclusive: bool,
    hi: Key,
    hi_inclusive: bool,
}

impl Span {
    fn contains(&self, s: Sample) -> bool {
        let above_lo = match (s, self.lo) {
            (_, Key::NegInf) => true,
            (_, Key::PosInf) => false,
            (Sample::Point(p), Key::Point(l)) => p > l || (p == l && self.lo_inclusive),
            (Sample::Gap(g), Key::Point(l)) => g > l,
        };
        let below_hi = match (s, self.hi) {
            (_, Key::PosInf) => true,
            (_, Key::NegInf) => false,
            (Sample::Point(p), Key::Point(h)) => p < h || (p == h && self.hi_inclusive),
            (Sample::Gap(g), Key::Point(h)) => g <= h,
        };
        above_lo && below_hi
    }
}

enum Point<'a> {
    Number(f64),
    Param(&'a str),
}

fn check_ranges(model: &StpaModel, out: &mut Vec<Diagnostic>) {
    for var in model.variables() {
        if var.kind() != VariableKind::Number {
            continue;
        }
        let mut finite: Vec<Point<'_>> = Vec::new();
        for v in &var.values {
            let bounds: Vec<&Bound> = match &v.domain {
                ValueDomain::Singleton(b) => vec![b],
                ValueDomain::Interval { lower, upper, .. } => vec![lower, upper],
                _ => vec![],
            };
            for b in bounds {
                match b {
                    Bound::Number(n) => finite.push(Point::Number(*n)),
                    Bound::Param(p) => finite.push(Point::Param(p)),
                    _ => {}
                }
            }
        }
        // Points are only comparable if they are all numbers or all the same parameter.
        let mut numbers: Vec<f64> = Vec::new();
        let mut param: Option<&str> = None;
        let mut comparable = true;
        for p in &finite {
            match p {
                Point::Number(n) => numbers.push(*n),
                Point::Param(name) => match param {
                    None => param = Some(name),
                    Some(existing) if existing == *name => {}
                    Some(_) => comparable = false,
                },
            }
        }
        if !comparable || (param.is_some() && !numbers.is_empty()) {
            continue;
        }
        numbers.sort_by(f64::total_cmp);
        numbers.dedup();
        let point_count = if param.is_some() { 1 } else { numbers.len() };
        let key = |b: &Bound| match b {
            Bound::Min => Key::NegInf,
            Bound::Max => Key::PosInf,
            Bound::Param(_) => Key::Point(0),
            Bound::Number(n) => Key::Point(
                numbers
                    .iter()
                    .position(|x| x == n)
                    .expect("every numeric bound was collected"),
            ),
        };
        let spans: Vec<(&str, Span)> = var
            .values
            .iter()
            .filter_map(|v| {
                let span = match &v.domain {
                    ValueDomain::Singleton(b) => Span {
                        lo: key(b),
                        lo_inclusive: true,
                        hi: key(b),
                        hi_inclusive: true,
                    },
                    ValueDomain::Interval {
                        lower,
                        lower_inclusive,
                        upper,
                        upper_inclusive,
                    } => Span {
                        lo: key(lower),
                        lo_inclusive: *lower_inclusive,
                        hi: key(upper),
                        hi_inclusive: *upper_inclusive,
                    },
                    _ => return None,
                };
                Some((v.name.as_str(), span))
            })
            .collect();
        let samples: Vec<Sample> = (0..point_count)
            .flat_map(|i| [Sample::Gap(i), Sample::Point(i)])
            .chain(std::iter::once(Sample::Gap(point_count)))
            .collect();
        for (i, (name_a, a)) in spans.iter().enumerate() {
            for (name_b, b) in &spans[i + 1..] {
                if samples.iter().any(|&s| a.contains(s) && b.contains(s)) {
                    out.push(Diagnostic {
                        severity: Severity::Warning,
                        code: DiagnosticCode::RangeOverlap,
                        rule_ids: vec![],
                        message: format!(
                            "value ranges `{}.{name_a}` and `{}.{name_b}` overlap",
                            var.name, var.name
                        ),
                    });
                }
            }
        }
        if samples
            .iter()
            .any(|&s| !spans.iter().any(|(_, span)| span.contains(s)))
        {
            out.push(Diagnostic {
                severity: Severity::Warning,
                code: DiagnosticCode::RangeGap,
                rule_ids: vec![],
                message: format!("value ranges of `{}` do not cover every number", var.name),
            });
        }
    }
}
