#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use stpa_sbm::ltl::{self, Lasso, Letter, LtlFormula, Reaction};
use stpa_sbm::valuation::Valuation;

/// Truth of `f` at `start`, found by scanning witnesses over a window of
/// `|prefix| + 2|loop|` positions. Shares nothing with the crate's evaluator.
pub fn eval_oracle<L: Letter>(f: &LtlFormula, w: &Lasso<L>, start: usize) -> bool {
    let mut memo = HashMap::new();
    Oracle { w, memo: &mut memo }.at(f, start)
}

struct Oracle<'a, L> {
    w: &'a Lasso<L>,
    memo: &'a mut HashMap<(*const LtlFormula, usize), bool>,
}

impl<L: Letter> Oracle<'_, L> {
    fn succ(&self, i: usize) -> usize {
        if i + 1 < self.w.len() {
            i + 1
        } else {
            self.w.loop_start()
        }
    }

    fn window(&self, i: usize) -> Vec<usize> {
        let n = self.w.prefix.len() + 2 * self.w.cycle.len();
        let mut out = Vec::with_capacity(n);
        let mut j = i;
        for _ in 0..n {
            out.push(j);
            j = self.succ(j);
        }
        out
    }

    fn at(&mut self, f: &LtlFormula, i: usize) -> bool {
        let key = (f as *const LtlFormula, i);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        use LtlFormula::*;
        let v = match f {
            True => true,
            False => false,
            VarEq(x, v) => self.w.at(i).var_is(x, v),
            Sent(a) => self.w.at(i).sent_is(a),
            Not(a) => !self.at(a, i),
            And(a, b) => self.at(a, i) && self.at(b, i),
            Or(a, b) => self.at(a, i) || self.at(b, i),
            Implies(a, b) => !self.at(a, i) || self.at(b, i),
            Next(a) => {
                let j = self.succ(i);
                self.at(a, j)
            }
            Globally(a) => self.window(i).into_iter().all(|j| self.at(a, j)),
            Finally(a) => self.window(i).into_iter().any(|j| self.at(a, j)),
            Until(a, b) => {
                let mut out = false;
                for j in self.window(i) {
                    if self.at(b, j) {
                        out = true;
                        break;
                    }
                    if !self.at(a, j) {
                        break;
                    }
                }
                out
            }
            Release(a, b) => {
                let mut out = true;
                for j in self.window(i) {
                    if !self.at(b, j) {
                        out = false;
                        break;
                    }
                    if self.at(a, j) {
                        break;
                    }
                }
                out
            }
        };
        self.memo.insert(key, v);
        v
    }
}

/// The four letters random words are built from: `x` in {a, b} times
/// whether `A` was sent.
pub fn letter(code: usize) -> Reaction {
    Reaction {
        valuation: Valuation(vec![(
            "x".into(),
            if code & 1 == 0 { "a" } else { "b" }.into(),
        )]),
        sent: (code & 2 != 0).then(|| "A".to_string()),
    }
}

fn random_atom(rng: &mut ChaCha8Rng) -> LtlFormula {
    match rng.gen_range(0..6) {
        0 => LtlFormula::True,
        1 => LtlFormula::False,
        2 => ltl::var_eq("x", "a"),
        3 => ltl::var_eq("x", "b"),
        4 => ltl::sent("A"),
        _ => ltl::sent("B"),
    }
}

/// A random formula of depth at most `depth` over the atoms of [`letter`].
pub fn random_formula(rng: &mut ChaCha8Rng, depth: usize) -> LtlFormula {
    if depth <= 1 || rng.gen_bool(0.2) {
        return random_atom(rng);
    }
    let sub = |rng: &mut ChaCha8Rng| random_formula(rng, depth - 1);
    match rng.gen_range(0..10) {
        0 => ltl::not(sub(rng)),
        1 => ltl::and(sub(rng), sub(rng)),
        2 => ltl::or(sub(rng), sub(rng)),
        3 => ltl::implies(sub(rng), sub(rng)),
        4 => ltl::next(sub(rng)),
        5 => ltl::globally(sub(rng)),
        6 => ltl::finally(sub(rng)),
        7 => ltl::until(sub(rng), sub(rng)),
        _ => ltl::release(sub(rng), sub(rng)),
    }
}

/// A random lasso of total length at most `max_len` over at most
/// `max_alphabet` distinct letters.
pub fn random_lasso(rng: &mut ChaCha8Rng, max_len: usize, max_alphabet: usize) -> Lasso<Reaction> {
    let alphabet: Vec<usize> = (0..rng.gen_range(1..=max_alphabet.min(4)))
        .map(|_| rng.gen_range(0..4))
        .collect();
    let len = rng.gen_range(1..=max_len);
    let loop_len = rng.gen_range(1..=len);
    let word: Vec<Reaction> = (0..len)
        .map(|_| letter(alphabet[rng.gen_range(0..alphabet.len())]))
        .collect();
    Lasso::new(
        word[..len - loop_len].to_vec(),
        word[len - loop_len..].to_vec(),
    )
    .expect("loop is nonempty")
}
