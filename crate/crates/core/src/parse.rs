//! Front end for the `.stpa` text format.
//!
//! ```text
//! controller Acc {
//!   processModel {
//!     vehicleAheadStopped: { true, false }
//!     speed: { slow = [MIN, desiredSpeed), fast = [desiredSpeed, MAX] }
//!   }
//!   controlActions { stop, accelerate }
//!   ucas {
//!     U1 { action stop type notProvided contexts {
//!       c1 [ vehicleAheadStopped = true ]
//!     } }
//!   }
//!   dcas { }
//! }
//! ```
//!
//! Parsing is all-or-nothing: either a fully resolved [`StpaModel`] or a
//! list of positioned errors.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use crate::model::{
    check_domain, AbstractValue, Bound, Context, DcaKind, DcaRule, ProcessModelVariable, StpaModel,
    UcaKind, UcaRule, ValueDomain,
};

/// 1-based position of a piece of source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

impl SourceSpan {
    fn new(line: usize, column: usize, length: usize) -> Self {
        SourceSpan {
            line,
            column,
            length: length.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    Duplicate,
    UnknownReference,
    MalformedRange,
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}: {}",
            self.span.line, self.span.column, self.message
        )
    }
}

impl std::error::Error for ParseError {}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Punct(char),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(n) => write!(f, "number `{n}`"),
            Tok::Punct(c) => write!(f, "`{c}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: SourceSpan,
}

fn lex(text: &str) -> (Vec<Token>, Vec<ParseError>) {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut errors = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            i += 1;
            col += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
                col += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let s = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[s..i].iter().collect();
            tokens.push(Token {
                tok: Tok::Ident(word),
                span: SourceSpan::new(start.0, start.1, i - s),
            });
            col += i - s;
        } else if c.is_ascii_digit()
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let s = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            let lit: String = chars[s..i].iter().collect();
            let span = SourceSpan::new(start.0, start.1, i - s);
            match lit.parse::<f64>() {
                Ok(n) if n.is_finite() => tokens.push(Token {
                    tok: Tok::Number(n),
                    span,
                }),
                _ => errors.push(ParseError {
                    span,
                    kind: ParseErrorKind::Lexical,
                    message: format!("number `{lit}` is out of range"),
                }),
            }
            col += i - s;
        } else if "{}[](),:=".contains(c) {
            tokens.push(Token {
                tok: Tok::Punct(c),
                span: SourceSpan::new(start.0, start.1, 1),
            });
            i += 1;
            col += 1;
        } else {
            errors.push(ParseError {
                span: SourceSpan::new(start.0, start.1, 1),
                kind: ParseErrorKind::Lexical,
                message: format!("unexpected character `{}`", c.escape_debug()),
            });
            i += 1;
            col += 1;
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: SourceSpan::new(line, col, 1),
    });
    (tokens, errors)
}

#[derive(Debug, Clone)]
struct Name {
    text: String,
    span: SourceSpan,
}

struct PValue {
    name: Name,
    domain: ValueDomain,
    domain_span: SourceSpan,
}

struct PVariable {
    name: Name,
    values: Vec<PValue>,
}

struct PAssignment {
    variable: Name,
    value: Name,
}

struct PContext {
    id: Name,
    assignments: Vec<PAssignment>,
}

struct PRule {
    id: Name,
    action: Name,
    kind: Name,
    contexts: Vec<PContext>,
}

struct PModel {
    controller: Name,
    variables: Vec<PVariable>,
    actions: Vec<Name>,
    ucas: Vec<PRule>,
    dcas: Vec<PRule>,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let t = self.peek();
        Err(ParseError {
            span: t.span,
            kind: ParseErrorKind::Syntax,
            message: format!("expected {expected}, found {}", t.tok),
        })
    }

    fn at_punct(&self, c: char) -> bool {
        self.peek().tok == Tok::Punct(c)
    }

    fn punct(&mut self, c: char) -> PResult<SourceSpan> {
        if self.at_punct(c) {
            Ok(self.bump().span)
        } else {
            self.error(&format!("`{c}`"))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(&format!("`{kw}`"))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<Name> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let text = s.clone();
                let span = self.bump().span;
                Ok(Name { text, span })
            }
            _ => self.error(what),
        }
    }

    fn model(&mut self) -> PResult<PModel> {
        self.keyword("controller")?;
        let controller = self.ident("controller name")?;
        self.punct('{')?;
        self.keyword("processModel")?;
        self.punct('{')?;
        let mut variables = Vec::new();
        while !self.at_punct('}') {
            variables.push(self.variable()?);
        }
        self.punct('}')?;
        self.keyword("controlActions")?;
        self.punct('{')?;
        let mut actions = Vec::new();
        if !self.at_punct('}') {
            actions.push(self.ident("control action name")?);
            while self.at_punct(',') {
                self.bump();
                actions.push(self.ident("control action name")?);
            }
        }
        self.punct('}')?;
        let mut ucas = Vec::new();
        if self.at_keyword("ucas") {
            self.bump();
            ucas = self.rules()?;
        }
        let mut dcas = Vec::new();
        if self.at_keyword("dcas") {
            self.bump();
            dcas = self.rules()?;
        }
        self.punct('}')?;
        if self.peek().tok != Tok::Eof {
            return self.error("end of input");
        }
        Ok(PModel {
            controller,
            variables,
            actions,
            ucas,
            dcas,
        })
    }

    fn variable(&mut self) -> PResult<PVariable> {
        let name = self.ident("process model variable name or `}`")?;
        self.punct(':')?;
        self.punct('{')?;
        let mut values = vec![self.value()?];
        while self.at_punct(',') {
            self.bump();
            values.push(self.value()?);
        }
        self.punct('}')?;
        Ok(PVariable { name, values })
    }

    fn value(&mut self) -> PResult<PValue> {
        let name = self.ident("value name")?;
        let literal = match name.text.as_str() {
            "true" => Some(true),
            "false" => Some(false),
            _ => None,
        };
        if let Some(b) = literal {
            return Ok(PValue {
                domain: ValueDomain::Boolean(b),
                domain_span: name.span,
                name,
            });
        }
        if !self.at_punct('=') {
            return Ok(PValue {
                domain: ValueDomain::Opaque,
                domain_span: name.span,
                name,
            });
        }
        self.bump();
        let start = self.peek().span;
        let domain = match &self.peek().tok {
            Tok::Ident(s) if s == "true" || s == "false" => {
                let b = s == "true";
                self.bump();
                ValueDomain::Boolean(b)
            }
            Tok::Punct('[') | Tok::Punct('(') => {
                let lower_inclusive = self.at_punct('[');
                self.bump();
                let lower = self.bound()?;
                if lower_inclusive && self.at_punct(']') {
                    self.bump();
                    ValueDomain::Singleton(lower)
                } else {
                    self.punct(',')?;
                    let upper = self.bound()?;
                    let upper_inclusive = match self.peek().tok {
                        Tok::Punct(']') => true,
                        Tok::Punct(')') => false,
                        _ => return self.error("`]` or `)`"),
                    };
                    self.bump();
                    ValueDomain::Interval {
                        lower,
                        lower_inclusive,
                        upper,
                        upper_inclusive,
                    }
                }
            }
            _ => return self.error("`true`, `false`, or a range"),
        };
        let end = self.tokens[self.pos.saturating_sub(1)].span;
        let domain_span = if end.line == start.line {
            SourceSpan::new(
                start.line,
                start.column,
                end.column + end.length - start.column,
            )
        } else {
            start
        };
        Ok(PValue {
            name,
            domain,
            domain_span,
        })
    }

    fn bound(&mut self) -> PResult<Bound> {
        match self.peek().tok.clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(Bound::Number(n))
            }
            Tok::Ident(s) => {
                self.bump();
                Ok(match s.as_str() {
                    "MIN" => Bound::Min,
                    "MAX" => Bound::Max,
                    _ => Bound::Param(s),
                })
            }
            _ => self.error("`MIN`, `MAX`, a number, or a name"),
        }
    }

    fn rules(&mut self) -> PResult<Vec<PRule>> {
        self.punct('{')?;
        let mut out = Vec::new();
        while !self.at_punct('}') {
            out.push(self.rule()?);
        }
        self.punct('}')?;
        Ok(out)
    }

    fn rule(&mut self) -> PResult<PRule> {
        let id = self.ident("rule id or `}`")?;
        self.punct('{')?;
        self.keyword("action")?;
        let action = self.ident("control action name")?;
        self.keyword("type")?;
        let kind = self.ident("rule type")?;
        self.keyword("contexts")?;
        self.punct('{')?;
        let mut contexts = Vec::new();
        while !self.at_punct('}') {
            let cid = self.ident("context id or `}`")?;
            self.punct('[')?;
            let mut assignments = vec![self.assignment()?];
            while self.at_punct(',') {
                self.bump();
                assignments.push(self.assignment()?);
            }
            self.punct(']')?;
            contexts.push(PContext {
                id: cid,
                assignments,
            });
        }
        self.punct('}')?;
        self.punct('}')?;
        Ok(PRule {
            id,
            action,
            kind,
            contexts,
        })
    }

    fn assignment(&mut self) -> PResult<PAssignment> {
        let variable = self.ident("variable name")?;
        self.punct('=')?;
        let value = self.ident("value name")?;
        Ok(PAssignment { variable, value })
    }
}

fn err(span: SourceSpan, kind: ParseErrorKind, message: String) -> ParseError {
    ParseError {
        span,
        kind,
        message,
    }
}

/// Resolves names and checks everything the model constructor would reject,
/// attaching the span of the offending text.
fn resolve(p: PModel) -> Result<StpaModel, Vec<ParseError>> {
    let mut errors = Vec::new();
    let dup = |errors: &mut Vec<ParseError>, what: &str, n: &Name| {
        errors.push(err(
            n.span,
            ParseErrorKind::Duplicate,
            format!("duplicate {what} `{}`", n.text),
        ));
    };

    let mut var_index: HashMap<&str, usize> = HashMap::new();
    for (i, v) in p.variables.iter().enumerate() {
        if var_index.contains_key(v.name.text.as_str()) {
            dup(&mut errors, "variable", &v.name);
        } else {
            var_index.insert(&v.name.text, i);
        }
        let mut seen = HashMap::new();
        for val in &v.values {
            if seen.insert(val.name.text.as_str(), ()).is_some() {
                dup(&mut errors, "value", &val.name);
            }
            if let Err(msg) = check_domain(&val.domain) {
                errors.push(err(
                    val.domain_span,
                    ParseErrorKind::MalformedRange,
                    format!("value `{}`: {msg}", val.name.text),
                ));
            }
        }
        let bools: Vec<bool> = v
            .values
            .iter()
            .filter_map(|x| match x.domain {
                ValueDomain::Boolean(b) => Some(b),
                _ => None,
            })
            .collect();
        if !bools.is_empty() && !(v.values.len() == 2 && bools.len() == 2 && bools[0] != bools[1]) {
            errors.push(err(
                v.name.span,
                ParseErrorKind::MalformedRange,
                format!("variable `{}`: a boolean variable needs exactly one `true` and one `false` value", v.name.text),
            ));
        } else if bools.is_empty() {
            let ranged = v.values.iter().filter(|x| x.domain.is_ranged()).count();
            if ranged != 0 && ranged != v.values.len() {
                errors.push(err(
                    v.name.span,
                    ParseErrorKind::MalformedRange,
                    format!(
                        "variable `{}`: either every value has a range or none has",
                        v.name.text
                    ),
                ));
            }
        }
    }
    let mut action_seen = HashMap::new();
    for a in &p.actions {
        if action_seen.insert(a.text.as_str(), ()).is_some() {
            dup(&mut errors, "control action", a);
        }
    }
    let mut rule_seen = HashMap::new();
    for (rules, dca) in [(&p.ucas, false), (&p.dcas, true)] {
        for r in rules {
            if rule_seen.insert(r.id.text.as_str(), ()).is_some() {
                dup(&mut errors, "rule", &r.id);
            }
            if !action_seen.contains_key(r.action.text.as_str()) {
                errors.push(err(
                    r.action.span,
                    ParseErrorKind::UnknownReference,
                    format!("unknown control action `{}`", r.action.text),
                ));
            }
            let kind_ok = if dca {
                DcaKind::from_keyword(&r.kind.text).is_some()
            } else {
                UcaKind::from_keyword(&r.kind.text).is_some()
            };
            if !kind_ok {
                let allowed = if dca {
                    "provided, notProvided".to_string()
                } else {
                    UcaKind::ALL.map(|k| k.keyword()).join(", ")
                };
                errors.push(err(
                    r.kind.span,
                    ParseErrorKind::Invalid,
                    format!(
                        "unknown {} type `{}` (expected one of: {allowed})",
                        if dca { "DCA" } else { "UCA" },
                        r.kind.text
                    ),
                ));
            }
            if r.contexts.is_empty() {
                errors.push(err(
                    r.id.span,
                    ParseErrorKind::Invalid,
                    format!("rule `{}` has no contexts", r.id.text),
                ));
            }
            let mut ctx_seen = HashMap::new();
            for c in &r.contexts {
                if ctx_seen.insert(c.id.text.as_str(), ()).is_some() {
                    dup(&mut errors, "context", &c.id);
                }
                let mut assigned = HashMap::new();
                for a in &c.assignments {
                    let Some(&vi) = var_index.get(a.variable.text.as_str()) else {
                        errors.push(err(
                            a.variable.span,
                            ParseErrorKind::UnknownReference,
                            format!("unknown variable `{}`", a.variable.text),
                        ));
                        continue;
                    };
                    if assigned.insert(vi, ()).is_some() {
                        errors.push(err(
                            a.variable.span,
                            ParseErrorKind::Duplicate,
                            format!(
                                "variable `{}` assigned twice in context `{}`",
                                a.variable.text, c.id.text
                            ),
                        ));
                    }
                    if !p.variables[vi]
                        .values
                        .iter()
                        .any(|v| v.name.text == a.value.text)
                    {
                        errors.push(err(
                            a.value.span,
                            ParseErrorKind::UnknownReference,
                            format!(
                                "variable `{}` has no value `{}`",
                                a.variable.text, a.value.text
                            ),
                        ));
                    }
                }
            }
        }
    }
    if !errors.is_empty() {
        return Err(errors);
    }

    let variables = p
        .variables
        .into_iter()
        .map(|v| ProcessModelVariable {
            name: v.name.text,
            values: v
                .values
                .into_iter()
                .map(|x| AbstractValue {
                    name: x.name.text,
                    domain: x.domain,
                })
                .collect(),
        })
        .collect();
    let contexts = |cs: Vec<PContext>| -> Vec<Context> {
        cs.into_iter()
            .map(|c| {
                Context::new(
                    c.id.text,
                    c.assignments
                        .into_iter()
                        .map(|a| (a.variable.text, a.value.text)),
                )
            })
            .collect()
    };
    let ucas = p
        .ucas
        .into_iter()
        .map(|r| UcaRule {
            id: r.id.text,
            action: r.action.text,
            kind: UcaKind::from_keyword(&r.kind.text).expect("checked above"),
            contexts: contexts(r.contexts),
        })
        .collect();
    let dcas = p
        .dcas
        .into_iter()
        .map(|r| DcaRule {
            id: r.id.text,
            action: r.action.text,
            kind: DcaKind::from_keyword(&r.kind.text).expect("checked above"),
            contexts: contexts(r.contexts),
        })
        .collect();
    let span = p.controller.span;
    StpaModel::new(
        p.controller.text,
        variables,
        p.actions.into_iter().map(|a| a.text).collect(),
        ucas,
        dcas,
    )
    .map_err(|e| vec![err(span, ParseErrorKind::Invalid, e.to_string())])
}

/// Parses `.stpa` text into a resolved model.
pub fn parse(text: &str) -> Result<StpaModel, Vec<ParseError>> {
    let (tokens, errors) = lex(text);
    if !errors.is_empty() {
        return Err(errors);
    }
    let mut parser = Parser { tokens, pos: 0 };
    let p = parser.model().map_err(|e| vec![e])?;
    resolve(p)
}

/// Human-readable report with one underlined snippet per error, ordered by
/// position. Empty for no errors.
pub fn format_diagnostics(errors: &[ParseError], text: &str) -> String {
    let mut sorted: Vec<&ParseError> = errors.iter().collect();
    sorted.sort_by_key(|e| (e.span.line, e.span.column));
    let lines: Vec<&str> = text.lines().collect();
    let mut out = String::new();
    for e in sorted {
        let _ = writeln!(
            out,
            "{}:{}: error: {}",
            e.span.line, e.span.column, e.message
        );
        if let Some(src) = lines.get(e.span.line - 1) {
            let _ = writeln!(out, "    {src}");
            let pad: String = src
                .chars()
                .take(e.span.column - 1)
                .map(|c| if c == '\t' { '\t' } else { ' ' })
                .collect();
            let _ = writeln!(out, "    {pad}{}", "^".repeat(e.span.length));
        }
    }
    out
}

fn write_bound(out: &mut String, b: &Bound) {
    let _ = write!(out, "{b}");
}

fn write_domain(out: &mut String, d: &ValueDomain) {
    match d {
        ValueDomain::Boolean(b) => {
            let _ = write!(out, "{b}");
        }
        ValueDomain::Singleton(b) => {
            out.push('[');
            write_bound(out, b);
            out.push(']');
        }
        ValueDomain::Interval {
            lower,
            lower_inclusive,
            upper,
            upper_inclusive,
        } => {
            out.push(if *lower_inclusive { '[' } else { '(' });
            write_bound(out, lower);
            out.push_str(", ");
            write_bound(out, upper);
            out.push(if *upper_inclusive { ']' } else { ')' });
        }
        ValueDomain::Opaque => {}
    }
}

/// Canonical text form; `parse(&pretty_print(m)) == Ok(m)`.
pub fn pretty_print(model: &StpaModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "controller {} {{", model.controller());
    out.push_str("  processModel {\n");
    for var in model.variables() {
        let _ = write!(out, "    {}: {{ ", var.name);
        for (i, v) in var.values.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            match &v.domain {
                ValueDomain::Boolean(b) if v.name == b.to_string() => out.push_str(&v.name),
                ValueDomain::Opaque => out.push_str(&v.name),
                d => {
                    let _ = write!(out, "{} = ", v.name);
                    write_domain(&mut out, d);
                }
            }
        }
        out.push_str(" }\n");
    }
    out.push_str("  }\n");
    let _ = writeln!(out, "  controlActions {{ {} }}", model.actions().join(", "));
    let rule = |out: &mut String, id: &str, action: &str, kind: &str, contexts: &[Context]| {
        let _ = writeln!(out, "    {id} {{ action {action} type {kind} contexts {{");
        for c in contexts {
            let assigns: Vec<String> = c
                .assignments
                .iter()
                .map(|a| format!("{} = {}", a.variable, a.value))
                .collect();
            let _ = writeln!(out, "      {} [ {} ]", c.id, assigns.join(", "));
        }
        out.push_str("    } }\n");
    };
    out.push_str("  ucas {\n");
    for r in model.ucas() {
        rule(&mut out, &r.id, &r.action, r.kind.keyword(), &r.contexts);
    }
    out.push_str("  }\n  dcas {\n");
    for r in model.dcas() {
        rule(&mut out, &r.id, &r.action, r.kind.keyword(), &r.contexts);
    }
    out.push_str("  }\n}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "controller C {\n  processModel {\n    x: { true, false }\n  }\n  controlActions { CA }\n}\n";

    #[test]
    fn minimal_model() {
        let m = parse(MINIMAL).unwrap();
        assert_eq!(m.controller(), "C");
        assert_eq!(m.variables()[0], ProcessModelVariable::boolean("x"));
        assert!(m.ucas().is_empty() && m.dcas().is_empty());
    }

    #[test]
    fn value_ranges() {
        let text = "controller Acc { processModel {
            speed: { lessThanDesiredSpeed = [MIN, desiredSpeed), desiredSpeed = [desiredSpeed],
                     greaterThanDesiredSpeed = (desiredSpeed, MAX] }
        } controlActions { stop } }";
        let m = parse(text).unwrap();
        let p = || Bound::Param("desiredSpeed".into());
        let domains: Vec<&ValueDomain> =
            m.variables()[0].values.iter().map(|v| &v.domain).collect();
        assert_eq!(
            domains,
            [
                &ValueDomain::Interval {
                    lower: Bound::Min,
                    lower_inclusive: true,
                    upper: p(),
                    upper_inclusive: false
                },
                &ValueDomain::Singleton(p()),
                &ValueDomain::Interval {
                    lower: p(),
                    lower_inclusive: false,
                    upper: Bound::Max,
                    upper_inclusive: true
                },
            ]
        );
    }

    #[test]
    fn unknown_variable_has_exact_span() {
        let text = "controller C {
  processModel { x: { true, false } }
  controlActions { CA }
  ucas { U1 { action CA type provided contexts { c1 [ zz = true ] } } }
}";
        let errs = parse(text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert_eq!(errs[0].kind, ParseErrorKind::UnknownReference);
        let line4 = text.lines().nth(3).unwrap();
        let col = line4.find("zz").unwrap() + 1;
        assert_eq!(errs[0].span, SourceSpan::new(4, col, 2));
    }

    #[test]
    fn syntax_and_lexical_errors() {
        let errs = parse("controller C { processModel { x: { true false } } }").unwrap_err();
        assert_eq!(errs[0].kind, ParseErrorKind::Syntax);
        assert_eq!(errs[0].span, SourceSpan::new(1, 41, 5));
        let errs = parse("controller C { # $ }").unwrap_err();
        assert_eq!(errs.len(), 2);
        assert!(errs.iter().all(|e| e.kind == ParseErrorKind::Lexical));
        let errs = parse("").unwrap_err();
        assert_eq!(errs[0].span, SourceSpan::new(1, 1, 1));
    }

    #[test]
    fn semantic_errors_are_collected() {
        let text = "controller C {
  processModel { x: { true, false } x: { a, a } r: { lo = (MAX, 3] } }
  controlActions { A, A }
  ucas { U1 { action B type sometimes contexts { } } }
  dcas { U1 { action A type tooLate contexts { c [ x = maybe, x = true ] } } }
}";
        let errs = parse(text).unwrap_err();
        let kinds: Vec<ParseErrorKind> = errs.iter().map(|e| e.kind).collect();
        use ParseErrorKind::*;
        assert_eq!(
            kinds,
            [
                Duplicate,
                Duplicate,
                MalformedRange,
                Duplicate,
                UnknownReference,
                Invalid,
                Invalid,
                Duplicate,
                Invalid,
                UnknownReference,
                Duplicate
            ]
        );
    }

    #[test]
    fn diagnostics_report() {
        assert_eq!(format_diagnostics(&[], "x"), "");
        let text = "a\nb\nccc ddd\n";
        let e = |col, len, msg: &str| ParseError {
            span: SourceSpan::new(3, col, len),
            kind: ParseErrorKind::Syntax,
            message: msg.into(),
        };
        let report = format_diagnostics(&[e(5, 3, "second"), e(1, 3, "first")], text);
        assert!(report.contains("3:"));
        assert!(report.find("first").unwrap() < report.find("second").unwrap());
        assert!(report.contains("\n        ^^^\n"));
    }

    #[test]
    fn pretty_print_round_trips() {
        let text = "controller Acc { processModel {
            speed: { slow = [MIN, 10.5), ok = [10.5, v], fast = (v, MAX] }
            stopped: { true, false }
            mode: { a, b }
            flag: { on = true, off = false }
        } controlActions { stop, go }
        ucas { U1 { action stop type notProvided contexts { c1 [ stopped = true ] c2 [ mode = a, speed = fast ] } } }
        dcas { D1 { action go type provided contexts { c1 [ flag = on ] } } } }";
        let m = parse(text).unwrap();
        let printed = pretty_print(&m);
        assert_eq!(parse(&printed).unwrap(), m);
        assert_eq!(pretty_print(&parse(&printed).unwrap()), printed);
    }
}
