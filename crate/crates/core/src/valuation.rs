//! Total assignments of the process model and sets of them.
//!
//! Every guard and every context is ultimately a [`ValuationSet`]: a bitset
//! over the mixed-radix index of all valuations. The first declared variable
//! is the most significant digit, so index order equals lexicographic order
//! by declaration.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::ProcessModelVariable;

/// A total assignment `variable -> abstract value`, in declaration order.
///
/// Serializes as an object whose keys keep declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Valuation(pub Vec<(String, String)>);

impl Serialize for Valuation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for Valuation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Valuation;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object mapping variables to values")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> Result<Valuation, A::Error> {
                let mut out: Vec<(String, String)> = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, String>()? {
                    if out.iter().any(|(x, _)| *x == k) {
                        return Err(serde::de::Error::custom(format!(
                            "variable `{k}` given twice"
                        )));
                    }
                    out.push((k, v));
                }
                Ok(Valuation(out))
            }
        }
        deserializer.deserialize_map(V)
    }
}

impl Valuation {
    pub fn get(&self, variable: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(v, _)| v == variable)
            .map(|(_, x)| x.as_str())
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (var, val)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{var}:{val}")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValuationSpace {
    names: Vec<String>,
    values: Vec<Vec<String>>,
}

impl ValuationSpace {
    pub fn new(variables: &[ProcessModelVariable]) -> Self {
        ValuationSpace {
            names: variables.iter().map(|v| v.name.clone()).collect(),
            values: variables
                .iter()
                .map(|v| v.values.iter().map(|x| x.name.clone()).collect())
                .collect(),
        }
    }

    /// Number of valuations (1 for an empty process model).
    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn variable_count(&self) -> usize {
        self.names.len()
    }

    pub fn variable_name(&self, var: usize) -> &str {
        &self.names[var]
    }

    pub fn value_name(&self, var: usize, value: usize) -> &str {
        &self.values[var][value]
    }

    pub fn radix(&self, var: usize) -> usize {
        self.values[var].len()
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn value_index(&self, var: usize, name: &str) -> Option<usize> {
        self.values[var].iter().position(|n| n == name)
    }

    /// Value indices of valuation `index`, in declaration order.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.names.len()];
        for var in (0..self.names.len()).rev() {
            let r = self.radix(var);
            out[var] = index % r;
            index /= r;
        }
        out
    }

    pub fn index_of_digits(&self, digits: &[usize]) -> usize {
        digits
            .iter()
            .enumerate()
            .fold(0, |acc, (var, &d)| acc * self.radix(var) + d)
    }

    /// Value index of `var` in valuation `index`.
    pub fn digit(&self, index: usize, var: usize) -> usize {
        let stride: usize = (var + 1..self.names.len()).map(|v| self.radix(v)).product();
        (index / stride) % self.radix(var)
    }

    pub fn valuation(&self, index: usize) -> Valuation {
        Valuation(
            self.digits(index)
                .into_iter()
                .enumerate()
                .map(|(var, d)| (self.names[var].clone(), self.values[var][d].clone()))
                .collect(),
        )
    }

    /// Index of a named valuation; `None` if it is not total or names do not resolve.
    pub fn index(&self, valuation: &Valuation) -> Option<usize> {
        if valuation.0.len() != self.names.len() {
            return None;
        }
        let mut digits = vec![usize::MAX; self.names.len()];
        for (var, val) in &valuation.0 {
            let vi = self.variable_index(var)?;
            if digits[vi] != usize::MAX {
                return None;
            }
            digits[vi] = self.value_index(vi, val)?;
        }
        Some(self.index_of_digits(&digits))
    }

    /// All valuations agreeing with the given (variable, value) pairs.
    pub fn matching(&self, fixed: &[(usize, usize)]) -> ValuationSet {
        let mut set = ValuationSet::empty(self.len());
        for i in 0..self.len() {
            if fixed.iter().all(|&(var, val)| self.digit(i, var) == val) {
                set.insert(i);
            }
        }
        set
    }

    pub fn full(&self) -> ValuationSet {
        ValuationSet::full(self.len())
    }
}

/// A set of valuation indices over a fixed universe.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ValuationSet {
    universe: usize,
    words: Vec<u64>,
}

impl ValuationSet {
    pub fn empty(universe: usize) -> Self {
        ValuationSet {
            universe,
            words: vec![0; universe.div_ceil(64)],
        }
    }

    pub fn full(universe: usize) -> Self {
        let mut s = ValuationSet::empty(universe);
        for i in 0..universe {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(universe: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = ValuationSet::empty(universe);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn insert(&mut self, i: usize) {
        assert!(i < self.universe, "valuation index {i} out of range");
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.universe && self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.universe
    }

    pub fn union(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & !b)
    }

    pub fn complement(&self) -> Self {
        ValuationSet::full(self.universe).difference(self)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .all(|(a, b)| a & !b == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.universe).filter(move |&i| self.contains(i))
    }

    fn zip(&self, other: &Self, op: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(
            self.universe, other.universe,
            "valuation sets over different spaces"
        );
        ValuationSet {
            universe: self.universe,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        }
    }
}

impl fmt::Debug for ValuationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}
