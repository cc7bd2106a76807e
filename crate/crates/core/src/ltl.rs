//! LTL formulas over context atoms, the rule-to-formula translation, and an
//! exact evaluator over ultimately periodic (lasso) words.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{Context, DcaKind, RuleInstance, RuleKind, UcaKind};
use crate::valuation::Valuation;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "op", content = "args")]
pub enum LtlFormula {
    True,
    False,
    VarEq(String, String),
    Sent(String),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Implies(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Globally(Box<LtlFormula>),
    Finally(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
    Release(Box<LtlFormula>, Box<LtlFormula>),
}

pub fn var_eq(variable: impl Into<String>, value: impl Into<String>) -> LtlFormula {
    LtlFormula::VarEq(variable.into(), value.into())
}

pub fn sent(action: impl Into<String>) -> LtlFormula {
    LtlFormula::Sent(action.into())
}

pub fn not(f: LtlFormula) -> LtlFormula {
    LtlFormula::Not(Box::new(f))
}

pub fn and(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    LtlFormula::And(Box::new(a), Box::new(b))
}

pub fn or(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    LtlFormula::Or(Box::new(a), Box::new(b))
}

pub fn implies(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    LtlFormula::Implies(Box::new(a), Box::new(b))
}

pub fn next(f: LtlFormula) -> LtlFormula {
    LtlFormula::Next(Box::new(f))
}

pub fn globally(f: LtlFormula) -> LtlFormula {
    LtlFormula::Globally(Box::new(f))
}

pub fn finally(f: LtlFormula) -> LtlFormula {
    LtlFormula::Finally(Box::new(f))
}

pub fn until(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    LtlFormula::Until(Box::new(a), Box::new(b))
}

pub fn release(a: LtlFormula, b: LtlFormula) -> LtlFormula {
    LtlFormula::Release(Box::new(a), Box::new(b))
}

impl LtlFormula {
    pub fn children(&self) -> Vec<&LtlFormula> {
        use LtlFormula::*;
        match self {
            True | False | VarEq(..) | Sent(_) => vec![],
            Not(a) | Next(a) | Globally(a) | Finally(a) => vec![a],
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) | Release(a, b) => vec![a, b],
        }
    }

    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(LtlFormula::depth)
            .max()
            .unwrap_or(0)
    }

    /// True if no temporal operator occurs in the formula.
    pub fn is_propositional(&self) -> bool {
        use LtlFormula::*;
        match self {
            Next(_) | Globally(_) | Finally(_) | Until(..) | Release(..) => false,
            _ => self
                .children()
                .into_iter()
                .all(LtlFormula::is_propositional),
        }
    }

    /// Renders with a custom rendering of `VarEq` atoms (without parentheses).
    pub fn render_with(&self, var_eq: &dyn Fn(&str, &str) -> String) -> String {
        let mut out = String::new();
        self.write(&mut out, var_eq);
        out
    }

    fn write(&self, out: &mut String, var_eq: &dyn Fn(&str, &str) -> String) {
        use LtlFormula::*;
        match self {
            True => out.push_str("true"),
            False => out.push_str("false"),
            VarEq(x, v) => {
                out.push('(');
                out.push_str(&var_eq(x, v));
                out.push(')');
            }
            Sent(a) => {
                out.push_str("(controlAction == ");
                out.push_str(a);
                out.push(')');
            }
            Not(a) => {
                out.push('!');
                a.write(out, var_eq);
            }
            Next(a) | Globally(a) | Finally(a) => {
                out.push_str(match self {
                    Next(_) => "X ",
                    Globally(_) => "G ",
                    _ => "F ",
                });
                a.write(out, var_eq);
            }
            And(a, b) | Or(a, b) | Implies(a, b) | Until(a, b) | Release(a, b) => {
                let op = match self {
                    And(..) => " && ",
                    Or(..) => " || ",
                    Implies(..) => " -> ",
                    Until(..) => " U ",
                    _ => " R ",
                };
                out.push('(');
                a.write(out, var_eq);
                out.push_str(op);
                b.write(out, var_eq);
                out.push(')');
            }
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_with(&|x, v| format!("{x} == {v}")))
    }
}

/// Conjunction of the context's assignments, left-nested in context order.
pub fn context_formula(ctx: &Context) -> LtlFormula {
    let mut atoms = ctx
        .assignments
        .iter()
        .map(|a| var_eq(a.variable.as_str(), a.value.as_str()));
    let first = atoms.next().expect("contexts are nonempty");
    atoms.fold(first, and)
}

fn provided_formula(cv: LtlFormula, ca: LtlFormula) -> LtlFormula {
    globally(implies(cv, not(ca)))
}

fn not_provided_formula(cv: LtlFormula, ca: LtlFormula) -> LtlFormula {
    let body = || and(release(ca.clone(), cv.clone()), finally(ca.clone()));
    let psi = implies(cv.clone(), body());
    let chi = globally(implies(
        and(not(cv.clone()), next(cv.clone())),
        next(body()),
    ));
    and(psi, chi)
}

pub fn translate_uca(action: &str, kind: UcaKind, ctx: &Context) -> LtlFormula {
    let cv = context_formula(ctx);
    let ca = sent(action);
    match kind {
        UcaKind::Provided => provided_formula(cv, ca),
        UcaKind::NotProvided => not_provided_formula(cv, ca),
        UcaKind::TooLate => and(
            implies(cv.clone(), ca.clone()),
            globally(implies(not(cv.clone()), next(implies(cv, ca)))),
        ),
        UcaKind::TooEarly => globally(implies(and(not(cv.clone()), next(cv)), not(ca))),
        UcaKind::AppliedTooLong => globally(implies(
            and(cv.clone(), ca.clone()),
            next(implies(not(cv), not(ca))),
        )),
        UcaKind::StoppedTooSoon => globally(implies(
            and(cv.clone(), ca.clone()),
            next(implies(not(ca), not(cv))),
        )),
    }
}

/// DCAs reuse the UCA rules with the polarity swapped.
pub fn translate_dca(action: &str, kind: DcaKind, ctx: &Context) -> LtlFormula {
    match kind {
        DcaKind::Provided => translate_uca(action, UcaKind::NotProvided, ctx),
        DcaKind::NotProvided => translate_uca(action, UcaKind::Provided, ctx),
    }
}

pub fn translate(instance: &RuleInstance<'_>) -> LtlFormula {
    match instance.kind {
        RuleKind::Uca(k) => translate_uca(instance.action, k, instance.context),
        RuleKind::Dca(k) => translate_dca(instance.action, k, instance.context),
    }
}

/// A formula together with the rule row it was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedFormula {
    pub rule_id: String,
    pub context_id: String,
    pub action: String,
    pub kind: RuleKind,
    pub formula: LtlFormula,
}

impl GeneratedFormula {
    /// Identifier `rule.context`, unique within a model.
    pub fn id(&self) -> String {
        format!("{}.{}", self.rule_id, self.context_id)
    }

    pub fn is_too_early(&self) -> bool {
        self.kind == RuleKind::Uca(UcaKind::TooEarly)
    }
}

pub fn generate_formulas(model: &crate::model::StpaModel) -> Vec<GeneratedFormula> {
    model
        .instances()
        .iter()
        .map(|inst| GeneratedFormula {
            rule_id: inst.rule_id.to_string(),
            context_id: inst.context.id.clone(),
            action: inst.action.to_string(),
            kind: inst.kind,
            formula: translate(inst),
        })
        .collect()
}

/// Observable part of one reaction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reaction {
    pub valuation: Valuation,
    pub sent: Option<String>,
}

/// Anything an atom can be evaluated against.
pub trait Letter {
    fn var_is(&self, variable: &str, value: &str) -> bool;
    fn sent_is(&self, action: &str) -> bool;
}

impl Letter for Reaction {
    fn var_is(&self, variable: &str, value: &str) -> bool {
        self.valuation.get(variable) == Some(value)
    }

    fn sent_is(&self, action: &str) -> bool {
        self.sent.as_deref() == Some(action)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LassoError {
    #[error("lasso loop must be nonempty")]
    EmptyLoop,
    #[error("start position {start} is outside the lasso of length {len}")]
    StartOutOfRange { start: usize, len: usize },
}

/// The infinite word `prefix · cycle^ω`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lasso<T> {
    pub prefix: Vec<T>,
    #[serde(rename = "loop")]
    pub cycle: Vec<T>,
}

impl<T> Lasso<T> {
    pub fn new(prefix: Vec<T>, cycle: Vec<T>) -> Result<Self, LassoError> {
        if cycle.is_empty() {
            return Err(LassoError::EmptyLoop);
        }
        Ok(Lasso { prefix, cycle })
    }

    /// Number of distinct positions.
    pub fn len(&self) -> usize {
        self.prefix.len() + self.cycle.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn loop_start(&self) -> usize {
        self.prefix.len()
    }

    /// Letter at position `i` of the infinite word.
    pub fn at(&self, i: usize) -> &T {
        if i < self.prefix.len() {
            &self.prefix[i]
        } else {
            &self.cycle[(i - self.prefix.len()) % self.cycle.len()]
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> Lasso<U> {
        Lasso {
            prefix: self.prefix.iter().map(&mut f).collect(),
            cycle: self.cycle.iter().map(&mut f).collect(),
        }
    }
}

impl<T: Clone> Lasso<T> {
    /// Same word with `k` copies of the loop moved into the prefix.
    pub fn unroll(&self, k: usize) -> Self {
        let mut prefix = self.prefix.clone();
        for _ in 0..k {
            prefix.extend(self.cycle.iter().cloned());
        }
        Lasso {
            prefix,
            cycle: self.cycle.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Node {
    Leaf(usize),
    True,
    False,
    Not(usize),
    And(usize, usize),
    Or(usize, usize),
    Implies(usize, usize),
    Next(usize),
    Globally(usize),
    Finally(usize),
    Until(usize, usize),
    Release(usize, usize),
}

/// An atomic proposition of a formula.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    VarEq(String, String),
    Sent(String),
}

/// A formula flattened into post-order for repeated evaluation.
///
/// Truth values of every subformula are kept as bitsets over lasso
/// positions; `X` is a one-step shift that wraps from the last position back
/// to the loop start, and `U`/`R` are least/greatest fixpoints of their
/// one-step unfolding.
#[derive(Debug, Clone)]
pub struct CompiledFormula {
    nodes: Vec<Node>,
    atoms: Vec<Atom>,
    roots: Vec<usize>,
}

impl CompiledFormula {
    pub fn new(f: &LtlFormula) -> Self {
        Self::many(std::slice::from_ref(f))
    }

    /// Compiles several formulas into one graph with shared subformulas.
    pub fn many(fs: &[LtlFormula]) -> Self {
        let mut c = CompiledFormula {
            nodes: Vec::new(),
            atoms: Vec::new(),
            roots: Vec::new(),
        };
        let mut memo = HashMap::new();
        for f in fs {
            let r = c.add(f, &mut memo);
            c.roots.push(r);
        }
        c
    }

    fn add<'f>(&mut self, f: &'f LtlFormula, memo: &mut HashMap<&'f LtlFormula, usize>) -> usize {
        if let Some(&i) = memo.get(f) {
            return i;
        }
        use LtlFormula as F;
        let node = match f {
            F::True => Node::True,
            F::False => Node::False,
            F::VarEq(x, v) => Node::Leaf(self.atom(Atom::VarEq(x.clone(), v.clone()))),
            F::Sent(a) => Node::Leaf(self.atom(Atom::Sent(a.clone()))),
            F::Not(a) => Node::Not(self.add(a, memo)),
            F::Next(a) => Node::Next(self.add(a, memo)),
            F::Globally(a) => Node::Globally(self.add(a, memo)),
            F::Finally(a) => Node::Finally(self.add(a, memo)),
            F::And(a, b) => Node::And(self.add(a, memo), self.add(b, memo)),
            F::Or(a, b) => Node::Or(self.add(a, memo), self.add(b, memo)),
            F::Implies(a, b) => Node::Implies(self.add(a, memo), self.add(b, memo)),
            F::Until(a, b) => Node::Until(self.add(a, memo), self.add(b, memo)),
            F::Release(a, b) => Node::Release(self.add(a, memo), self.add(b, memo)),
        };
        self.nodes.push(node);
        let i = self.nodes.len() - 1;
        memo.insert(f, i);
        i
    }

    fn atom(&mut self, a: Atom) -> usize {
        match self.atoms.iter().position(|x| *x == a) {
            Some(i) => i,
            None => {
                self.atoms.push(a);
                self.atoms.len() - 1
            }
        }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Truth at `start` of a lasso with `len` positions whose loop begins at
    /// `loop_start`. `leaf(atom, position)` gives the truth of atom number
    /// `atom` (an index into [`atoms`](Self::atoms)).
    pub fn eval(
        &self,
        len: usize,
        loop_start: usize,
        start: usize,
        leaf: impl FnMut(usize, usize) -> bool,
    ) -> bool {
        let mut scratch = Vec::new();
        self.eval_in(&mut scratch, len, loop_start, start, leaf)
    }

    /// Like [`eval`](Self::eval) but reuses `scratch` across calls.
    pub fn eval_in(
        &self,
        scratch: &mut Vec<u64>,
        len: usize,
        loop_start: usize,
        start: usize,
        leaf: impl FnMut(usize, usize) -> bool,
    ) -> bool {
        assert!(start < len, "position outside lasso");
        self.fill(scratch, len, loop_start, leaf);
        self.root_bit(scratch, len, 0, start)
    }

    /// Truth of every compiled formula at `start`, appended to `out` in
    /// compilation order.
    pub fn eval_all_in(
        &self,
        scratch: &mut Vec<u64>,
        len: usize,
        loop_start: usize,
        start: usize,
        leaf: impl FnMut(usize, usize) -> bool,
        out: &mut Vec<bool>,
    ) {
        assert!(start < len, "position outside lasso");
        self.fill(scratch, len, loop_start, leaf);
        for r in 0..self.roots.len() {
            out.push(self.root_bit(scratch, len, r, start));
        }
    }

    fn root_bit(&self, scratch: &[u64], len: usize, root: usize, p: usize) -> bool {
        let w = len.div_ceil(64);
        bit(
            &scratch[self.roots[root] * w..(self.roots[root] + 1) * w],
            p,
        )
    }

    fn fill(
        &self,
        scratch: &mut Vec<u64>,
        len: usize,
        loop_start: usize,
        mut leaf: impl FnMut(usize, usize) -> bool,
    ) {
        assert!(loop_start < len, "loop start outside lasso");
        let w = len.div_ceil(64);
        scratch.clear();
        scratch.resize(w * (self.nodes.len() + 2), 0);
        let (vals, tmp) = scratch.split_at_mut(w * self.nodes.len());
        let (t1, t2) = tmp.split_at_mut(w);
        let last_mask = if len.is_multiple_of(64) {
            u64::MAX
        } else {
            (1u64 << (len % 64)) - 1
        };

        for (i, node) in self.nodes.iter().enumerate() {
            let (done, rest) = vals.split_at_mut(i * w);
            let out = &mut rest[..w];
            let get = |j: usize| &done[j * w..(j + 1) * w];
            match *node {
                Node::Leaf(a) => {
                    for p in 0..len {
                        if leaf(a, p) {
                            out[p / 64] |= 1 << (p % 64);
                        }
                    }
                }
                Node::True => fill(out, last_mask),
                Node::False => {}
                Node::Not(a) => {
                    for (o, x) in out.iter_mut().zip(get(a)) {
                        *o = !x;
                    }
                    out[w - 1] &= last_mask;
                }
                Node::And(a, b) => zip_into(out, get(a), get(b), |x, y| x & y),
                Node::Or(a, b) => zip_into(out, get(a), get(b), |x, y| x | y),
                Node::Implies(a, b) => {
                    zip_into(out, get(a), get(b), |x, y| !x | y);
                    out[w - 1] &= last_mask;
                }
                Node::Next(a) => shift_next(out, get(a), len, loop_start),
                Node::Finally(a) => {
                    fill(t2, last_mask);
                    fixpoint(out, t1, get(a), t2, len, loop_start, false);
                }
                Node::Globally(a) => {
                    t2.fill(0);
                    fixpoint(out, t1, get(a), t2, len, loop_start, true);
                }
                Node::Until(a, b) => fixpoint(out, t1, get(b), get(a), len, loop_start, false),
                Node::Release(a, b) => fixpoint(out, t1, get(b), get(a), len, loop_start, true),
            }
        }
    }
}

fn fill(out: &mut [u64], last_mask: u64) {
    let w = out.len();
    out.fill(u64::MAX);
    out[w - 1] = last_mask;
}

fn zip_into(out: &mut [u64], a: &[u64], b: &[u64], op: impl Fn(u64, u64) -> u64) {
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = op(*x, *y);
    }
}

fn bit(v: &[u64], p: usize) -> bool {
    v[p / 64] & (1 << (p % 64)) != 0
}

/// `out[p] = v[succ(p)]` where `succ(len - 1) = loop_start`.
fn shift_next(out: &mut [u64], v: &[u64], len: usize, loop_start: usize) {
    let w = out.len();
    for k in 0..w {
        let carry = if k + 1 < w { v[k + 1] << 63 } else { 0 };
        out[k] = (v[k] >> 1) | carry;
    }
    let last = len - 1;
    out[last / 64] &= !(1 << (last % 64));
    if bit(v, loop_start) {
        out[last / 64] |= 1 << (last % 64);
    }
}

/// Solves `v = g | (f & next(v))` (least, `greatest = false`) or
/// `v = g & (f | next(v))` (greatest) by iteration from the bottom or top
/// element; the result lands in `out`.
fn fixpoint(
    out: &mut [u64],
    shifted: &mut [u64],
    g: &[u64],
    f: &[u64],
    len: usize,
    loop_start: usize,
    greatest: bool,
) {
    let w = out.len();
    let last_mask = if len.is_multiple_of(64) {
        u64::MAX
    } else {
        (1u64 << (len % 64)) - 1
    };
    if greatest {
        fill(out, last_mask);
    } else {
        out.fill(0);
    }
    loop {
        shift_next(shifted, out, len, loop_start);
        let mut changed = false;
        for k in 0..w {
            let nv = if greatest {
                g[k] & (f[k] | shifted[k])
            } else {
                g[k] | (f[k] & shifted[k])
            };
            if nv != out[k] {
                changed = true;
                out[k] = nv;
            }
        }
        if !changed {
            break;
        }
    }
}

/// Exact truth of `f` at position `start` of the lasso word.
pub fn eval_lasso<L: Letter>(
    f: &LtlFormula,
    w: &Lasso<L>,
    start: usize,
) -> Result<bool, LassoError> {
    if w.cycle.is_empty() {
        return Err(LassoError::EmptyLoop);
    }
    if start >= w.len() {
        return Err(LassoError::StartOutOfRange {
            start,
            len: w.len(),
        });
    }
    let c = CompiledFormula::new(f);
    Ok(
        c.eval(w.len(), w.loop_start(), start, |a, p| match &c.atoms[a] {
            Atom::VarEq(x, v) => w.at(p).var_is(x, v),
            Atom::Sent(ca) => w.at(p).sent_is(ca),
        }),
    )
}
