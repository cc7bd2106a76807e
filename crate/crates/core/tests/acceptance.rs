//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::collections::{HashSet, VecDeque};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stpa_sbm::emit::{emit_json, parse_json};
use stpa_sbm::ltl::{
    and, eval_lasso, finally, globally, implies, next, not, release, sent, translate_dca,
    translate_uca, var_eq, Lasso, LtlFormula, Reaction,
};
use stpa_sbm::model::{Context, DcaKind, StpaModel, UcaKind};
use stpa_sbm::parse::{parse, pretty_print};
use stpa_sbm::synth::{synthesize, StateOrigin, Statechart, Synthesis, TransitionKind};
use stpa_sbm::valuation::Valuation;
use stpa_sbm::verify::{check, generate_random_model, replay, CheckOptions, Limits, Machine};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn ctx(pairs: &[(&str, &str)]) -> Context {
    Context::new("c1", pairs.iter().copied())
}

/// Hand-built trees for the six rule kinds with condition `cv`.
fn expected_uca(kind: UcaKind, cv: LtlFormula) -> LtlFormula {
    let ca = sent("CA");
    let obligation = || and(release(ca.clone(), cv.clone()), finally(ca.clone()));
    match kind {
        UcaKind::Provided => globally(implies(cv.clone(), not(ca.clone()))),
        UcaKind::NotProvided => and(
            implies(cv.clone(), obligation()),
            globally(implies(
                and(not(cv.clone()), next(cv.clone())),
                next(obligation()),
            )),
        ),
        UcaKind::TooLate => and(
            implies(cv.clone(), ca.clone()),
            globally(implies(
                not(cv.clone()),
                next(implies(cv.clone(), ca.clone())),
            )),
        ),
        UcaKind::TooEarly => globally(implies(
            and(not(cv.clone()), next(cv.clone())),
            not(ca.clone()),
        )),
        UcaKind::AppliedTooLong => globally(implies(
            and(cv.clone(), ca.clone()),
            next(implies(not(cv.clone()), not(ca.clone()))),
        )),
        UcaKind::StoppedTooSoon => globally(implies(
            and(cv.clone(), ca.clone()),
            next(implies(not(ca.clone()), not(cv.clone()))),
        )),
    }
}

fn criterion_1() -> Outcome {
    let single = ctx(&[("x", "true")]);
    let double = ctx(&[("x", "true"), ("y", "a")]);
    let cv1 = var_eq("x", "true");
    let cv2 = and(var_eq("x", "true"), var_eq("y", "a"));
    let mut cases = 0;
    let mut failed = Vec::new();
    for kind in UcaKind::ALL {
        for (c, cv) in [(&single, &cv1), (&double, &cv2)] {
            cases += 1;
            if translate_uca("CA", kind, c) != expected_uca(kind, cv.clone()) {
                failed.push(format!("{kind:?}/{}", c.assignments.len()));
            }
        }
    }
    let swaps = [
        (DcaKind::Provided, UcaKind::NotProvided),
        (DcaKind::NotProvided, UcaKind::Provided),
    ];
    for (dca, uca) in swaps {
        cases += 1;
        if translate_dca("CA", dca, &single) != expected_uca(uca, cv1.clone()) {
            failed.push(format!("dca {dca:?}"));
        }
    }
    let rendered = translate_uca("CA", UcaKind::Provided, &single).to_string();
    cases += 1;
    if rendered != "G ((x == true) -> !(controlAction == CA))" {
        failed.push(format!("rendering `{rendered}`"));
    }
    outcome(
        failed.is_empty(),
        format!(
            "{}/{cases} golden cases {}",
            cases - failed.len(),
            failed.join(" ")
        ),
    )
}

/// (cv, ca) letters over `x` and action `CA`.
fn cell(cv: u8, ca: u8) -> Reaction {
    Reaction {
        valuation: Valuation(vec![(
            "x".into(),
            if cv == 1 { "true" } else { "false" }.into(),
        )]),
        sent: (ca == 1).then(|| "CA".to_string()),
    }
}

fn shape(prefix: &[(u8, u8)], cycle: &[(u8, u8)]) -> Lasso<Reaction> {
    Lasso::new(
        prefix.iter().map(|&(a, b)| cell(a, b)).collect(),
        cycle.iter().map(|&(a, b)| cell(a, b)).collect(),
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let kinds = [
        UcaKind::Provided,
        UcaKind::NotProvided,
        UcaKind::TooEarly,
        UcaKind::TooLate,
        UcaKind::AppliedTooLong,
        UcaKind::StoppedTooSoon,
    ];
    // one trace per kind, in the order above
    let traces = [
        shape(&[], &[(1, 1)]),
        shape(&[(0, 0), (1, 0)], &[(0, 0)]),
        shape(&[(0, 1), (1, 1)], &[(1, 0)]),
        shape(&[(0, 0), (1, 0)], &[(1, 1)]),
        shape(&[(1, 1)], &[(0, 1)]),
        shape(&[(1, 1)], &[(1, 0)]),
    ];
    // frozen from tests/fixtures/trace_shapes.py; rows are traces, columns
    // are formulas, 1 = holds at position 0
    let table: [[u8; 6]; 6] = [
        [0, 1, 1, 1, 1, 1],
        [1, 0, 1, 0, 1, 1],
        [0, 1, 0, 1, 1, 0],
        [0, 1, 1, 0, 1, 1],
        [0, 1, 1, 1, 0, 1],
        [0, 1, 1, 1, 1, 0],
    ];
    let c = ctx(&[("x", "true")]);
    let mut normative = 0;
    let mut characterization = 0;
    let mut notes = Vec::new();
    for (row, trace) in traces.iter().enumerate() {
        for (col, kind) in kinds.iter().enumerate() {
            let got = eval_lasso(&translate_uca("CA", *kind, &c), trace, 0).unwrap();
            if got != (table[row][col] == 1) {
                notes.push(format!("{:?} on {:?} trace", kind, kinds[row]));
            } else if row == col {
                normative += 1;
            } else {
                characterization += 1;
            }
        }
    }
    outcome(
        notes.is_empty(),
        format!(
            "{normative}/6 own-formula violations, {characterization}/30 cross results match {}",
            notes.join(", ")
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut agree = 0;
    let total = 10_000;
    for _ in 0..total {
        let f = common::random_formula(&mut rng, 5);
        let w = common::random_lasso(&mut rng, 8, 4);
        let start = rng.gen_range(0..w.len());
        if eval_lasso(&f, &w, start).unwrap() == common::eval_oracle(&f, &w, start) {
            agree += 1;
        }
    }
    outcome(agree == total, format!("{agree}/{total} instances agree"))
}

struct Corpus {
    models: Vec<(u64, StpaModel, Synthesis)>,
}

fn corpus() -> Corpus {
    let models = (0..200u64)
        .map(|seed| {
            let m = generate_random_model(seed, Limits::default());
            let s = synthesize(&m).expect("generated models are valid");
            (seed, m, s)
        })
        .collect();
    Corpus { models }
}

fn criterion_4(c: &Corpus) -> Outcome {
    let mut violations = 0;
    let mut lassos = 0;
    let mut formulas = 0;
    let mut split = 0;
    for (seed, _, s) in &c.models {
        let v = check(&s.statechart, &s.formulas, CheckOptions::default()).unwrap();
        lassos += v.lassos;
        formulas += v.results.len();
        split += s.statechart.states.iter().any(|x| x.split.is_some()) as usize;
        let n = v.violations().count();
        if n > 0 {
            eprintln!("  seed {seed}: {n} violation(s)");
        }
        violations += n;
    }
    outcome(
        violations == 0,
        format!(
            "200 models ({split} with split states), {formulas} formulas, {lassos} lassos, {violations} violations"
        ),
    )
}

/// True if some input sequence makes the two machines emit differently.
fn behaves_differently(a: &Statechart, b: &Statechart) -> bool {
    let (ma, mb) = (Machine::new(a), Machine::new(b));
    let emit = |sc: &Statechart, s: usize| sc.states[s].emits.clone();
    let valuations = a.space().len();
    let mut seen = HashSet::from([(0, 0)]);
    let mut queue = VecDeque::from([(0usize, 0usize)]);
    while let Some((x, y)) = queue.pop_front() {
        if emit(a, x) != emit(b, y) {
            return true;
        }
        for v in 0..valuations {
            let next = (ma.successor(x, v), mb.successor(y, v));
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    false
}

fn criterion_5(c: &Corpus) -> Outcome {
    let mut mutated = 0;
    let mut equivalent = 0;
    let mut detected = 0;
    let mut replayed = 0;
    let mut missed = Vec::new();
    for (seed, _, s) in &c.models {
        if mutated == 50 {
            break;
        }
        let sc = &s.statechart;
        let candidates: Vec<usize> = (0..sc.transitions.len())
            .filter(|&i| {
                let t = &sc.transitions[i];
                t.kind == TransitionKind::Demand
                    || (t.kind == TransitionKind::Escape
                        && sc.states[t.source].origin == StateOrigin::SplitAppliedTooLong)
            })
            .collect();
        if candidates.is_empty() {
            continue;
        }
        mutated += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        let victim = candidates[rng.gen_range(0..candidates.len())];
        let mut mutant = sc.clone();
        mutant.transitions.remove(victim);
        if !behaves_differently(sc, &mutant) {
            equivalent += 1;
            continue;
        }
        let v = check(&mutant, &s.formulas, CheckOptions::default()).unwrap();
        let violations: Vec<_> = v.violations().collect();
        if violations.is_empty() {
            missed.push(*seed);
            continue;
        }
        detected += 1;
        let replays = violations.iter().all(|r| {
            let f = s.formulas.iter().find(|f| f.id() == r.id).unwrap();
            let cx = r.counterexample.as_ref().unwrap();
            !replay(&mutant, &f.formula, &cx.input).unwrap()
                && replay(sc, &f.formula, &cx.input).unwrap()
        });
        replayed += replays as usize;
    }
    let effective = mutated - equivalent;
    outcome(
        mutated == 50 && detected == effective && replayed == detected,
        format!(
            "{mutated} mutants, {equivalent} without effect, {detected}/{effective} detected, {replayed} replayed {}",
            if missed.is_empty() { String::new() } else { format!("missed seeds {missed:?}") }
        ),
    )
}

fn acc_path() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/acc.stpa")
}

fn acc() -> Synthesis {
    let text = std::fs::read_to_string(acc_path()).unwrap();
    synthesize(&parse(&text).unwrap()).unwrap()
}

fn criterion_6() -> Outcome {
    let s = acc();
    let sc = &s.statechart;
    let ids: Vec<&str> = sc.states.iter().map(|x| x.id.as_str()).collect();
    let base_gone = !sc.states.iter().any(|x| {
        x.origin == StateOrigin::Base
            && matches!(x.emits.as_deref(), Some("accelerate" | "decelerate"))
    });
    let status = Command::new(env!("CARGO_BIN_EXE_stpa-sbm"))
        .arg("verify")
        .arg(acc_path())
        .output()
        .expect("binary runs")
        .status;
    outcome(
        sc.states.len() == 4 && base_gone && status.success(),
        format!("states {ids:?}, verify exit {:?}", status.code()),
    )
}

/// Enabled transitions that no other enabled transition outranks.
fn winners(sc: &Statechart, state: usize, v: usize) -> usize {
    let enabled: Vec<u32> = sc
        .transitions
        .iter()
        .filter(|t| t.source == state && t.guard.contains(v))
        .map(|t| t.priority)
        .collect();
    match enabled.iter().min() {
        Some(top) => enabled.iter().filter(|p| *p == top).count(),
        None => 0,
    }
}

fn criterion_7(c: &Corpus) -> Outcome {
    let acc = acc();
    let machines = c
        .models
        .iter()
        .map(|(_, _, s)| &s.statechart)
        .chain([&acc.statechart]);
    let mut cells = 0;
    let mut bad = 0;
    let mut overlapping = 0;
    for sc in machines {
        for state in 0..sc.states.len() {
            for v in 0..sc.space().len() {
                cells += 1;
                if winners(sc, state, v) > 1 {
                    bad += 1;
                }
                let raw = sc
                    .transitions
                    .iter()
                    .filter(|t| t.source == state && t.guard.contains(v))
                    .count();
                overlapping += (raw > 1) as usize;
            }
        }
    }
    outcome(
        bad == 0,
        format!("201 machines, {cells} (state, valuation) cells, {bad} with competing transitions, {overlapping} with overlapping raw guards"),
    )
}

fn criterion_8(c: &Corpus) -> Outcome {
    let mut json_ok = 0;
    let mut dsl_ok = 0;
    for (_, m, s) in &c.models {
        let text = emit_json(&s.statechart, &s.formulas);
        if parse_json(&text).ok() == Some((s.statechart.clone(), s.formulas.clone())) {
            json_ok += 1;
        }
        if parse(&pretty_print(m)).ok().as_ref() == Some(m) {
            dsl_ok += 1;
        }
    }
    outcome(
        json_ok == 200 && dsl_ok == 200,
        format!("JSON {json_ok}/200, DSL {dsl_ok}/200"),
    )
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: u32, name: &str, limit: Duration, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let pass = o.pass && took <= limit;
        all &= pass;
        println!(
            "criterion {n} {name}: {} ({:.2?}, limit {:?}) {}",
            if pass { "PASS" } else { "FAIL" },
            took,
            limit,
            o.detail.trim_end()
        );
    };
    println!("running acceptance criteria");
    report(
        1,
        "formula golden suite",
        Duration::from_secs(1),
        &mut criterion_1,
    );
    report(
        2,
        "violation trace shapes",
        Duration::from_secs(1),
        &mut criterion_2,
    );
    report(
        3,
        "evaluator vs oracle",
        Duration::from_secs(30),
        &mut criterion_3,
    );
    let start = Instant::now();
    let c = corpus();
    let built = start.elapsed();
    report(
        4,
        "synthesized machines satisfy their formulas",
        Duration::from_secs(300),
        &mut || {
            let mut o = criterion_4(&c);
            o.detail = format!("{} (synthesis {:.2?})", o.detail, built);
            o
        },
    );
    report(
        5,
        "mutation sensitivity",
        Duration::from_secs(120),
        &mut || criterion_5(&c),
    );
    report(
        6,
        "adaptive cruise control end to end",
        Duration::from_secs(10),
        &mut criterion_6,
    );
    report(7, "determinism", Duration::from_secs(60), &mut || {
        criterion_7(&c)
    });
    report(8, "round trips", Duration::from_secs(60), &mut || {
        criterion_8(&c)
    });
    println!(
        "acceptance: {}",
        if all { "all criteria pass" } else { "FAILED" }
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
