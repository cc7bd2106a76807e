use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use stpa_sbm::emit::{emit_dot, emit_json, emit_textual, parse_json};
use stpa_sbm::ltl::{generate_formulas, Lasso};
use stpa_sbm::model::StpaModel;
use stpa_sbm::parse::{format_diagnostics, parse};
use stpa_sbm::synth::{synthesize, SynthError};
use stpa_sbm::validate::{has_errors, validate};
use stpa_sbm::valuation::Valuation;
use stpa_sbm::verify::{check, run_machine, CheckOptions, Machine, Status};

#[derive(Parser)]
#[command(
    name = "stpa-sbm",
    version,
    about = "Safe behavior models from STPA results"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report conflicts and range problems in a model.
    Validate { file: PathBuf },
    /// Print the LTL formula generated for every rule context.
    Ltl {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Build the statechart and write it out.
    Synth {
        file: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Build the statechart and check it against every formula.
    Verify {
        file: PathBuf,
        /// Maximum lasso length (prefix plus loop).
        #[arg(long, default_value_t = 6)]
        bound: usize,
        /// Write the full verdict as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Step a synthesized machine through a scripted input sequence.
    Simulate {
        machine: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

/// A failure with its exit code; the message goes to stderr.
struct Failure(u8, String);

type Outcome = Result<ExitCode, Failure>;

fn usage(msg: String) -> Failure {
    Failure(2, msg)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn load(path: &Path) -> Result<StpaModel, Failure> {
    let text = read(path)?;
    parse(&text).map_err(|errs| {
        let report = format_diagnostics(&errs, &text);
        usage(format!(
            "{}: {} error(s)\n{report}",
            path.display(),
            errs.len()
        ))
    })
}

fn synthesized(model: &StpaModel) -> Result<stpa_sbm::synth::Synthesis, Failure> {
    synthesize(model).map_err(|SynthError::Invalid(diags)| {
        let lines: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
        Failure(
            1,
            format!("model has conflicting rules\n{}", lines.join("\n")),
        )
    })
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { file } => {
            let model = load(&file)?;
            let diags = validate(&model);
            for d in &diags {
                let severity = d.severity.to_string().to_uppercase();
                println!(
                    "{severity} {:?} [{}]: {}",
                    d.code,
                    d.rule_ids.join(", "),
                    d.message
                );
            }
            if diags.is_empty() {
                println!("no problems found");
            }
            Ok(if has_errors(&diags) {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Ltl { file, json } => {
            let model = load(&file)?;
            let formulas = generate_formulas(&model);
            if json {
                let items: Vec<serde_json::Value> = formulas
                    .iter()
                    .map(|f| {
                        serde_json::json!({
                            "id": f.id(),
                            "rule_id": f.rule_id,
                            "context_id": f.context_id,
                            "action": f.action,
                            "kind": f.kind,
                            "formula": f.formula.to_string(),
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&items).expect("json"));
            } else {
                for f in &formulas {
                    println!("{}: {}", f.id(), f.formula);
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth {
            file,
            output,
            format,
        } => {
            let model = load(&file)?;
            let s = synthesized(&model)?;
            let text = match format {
                Format::Text => emit_textual(&s.statechart, &s.formulas),
                Format::Json => emit_json(&s.statechart, &s.formulas),
                Format::Dot => emit_dot(&s.statechart),
            };
            write(&output, &text)?;
            for n in &s.notes {
                println!("note: {n}");
            }
            println!(
                "wrote {} ({} states, {} transitions)",
                output.display(),
                s.statechart.states.len(),
                s.statechart.transitions.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify {
            file,
            bound,
            report,
        } => {
            let model = load(&file)?;
            let s = synthesized(&model)?;
            let verdict = check(
                &s.statechart,
                &s.formulas,
                CheckOptions {
                    bound,
                    ..CheckOptions::default()
                },
            )
            .map_err(|e| usage(e.to_string()))?;
            for r in &verdict.results {
                let status = match r.status {
                    Status::Holds => "holds",
                    Status::Violated => "VIOLATED",
                    Status::NotGuaranteed if r.holds => "holds (too early, not guaranteed)",
                    Status::NotGuaranteed => "fails (too early, not guaranteed)",
                };
                println!("{}: {status}", r.id);
                if let (Status::Violated, Some(cx)) = (r.status, &r.counterexample) {
                    let states: Vec<&str> = cx
                        .trace
                        .prefix
                        .iter()
                        .chain(&cx.trace.cycle)
                        .map(|t| t.state.as_str())
                        .collect();
                    println!(
                        "  counterexample states: {} (loop from {})",
                        states.join(" "),
                        cx.trace.loop_start()
                    );
                }
            }
            let violations = verdict.violations().count();
            println!(
                "checked {} formulas on {} lassos (bound {}, {} input letters): {violations} violation(s)",
                verdict.results.len(),
                verdict.lassos,
                verdict.bound,
                verdict.alphabet
            );
            if let Some(path) = report {
                write(&path, &(verdict.to_json() + "\n"))?;
            }
            Ok(if verdict.is_ok() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Simulate { machine, inputs } => {
            let (sc, _) = parse_json(&read(&machine)?)
                .map_err(|e| usage(format!("{}: {e}", machine.display())))?;
            let (prefix, cycle) = parse_trace(&read(&inputs)?)
                .map_err(|e| usage(format!("{}: {e}", inputs.display())))?;
            let space = sc.space();
            for v in prefix.iter().chain(&cycle) {
                if space.index(v).is_none() {
                    return Err(usage(format!(
                        "valuation {v} does not match the machine's variables"
                    )));
                }
            }
            println!("reaction\tstate\tcontrolAction");
            if cycle.is_empty() {
                let m = Machine::new(&sc);
                let mut state = 0;
                println!("0\t{}\tnone", sc.states[0].id);
                for (i, v) in prefix.iter().enumerate() {
                    state = m.successor(state, space.index(v).expect("checked"));
                    let s = &sc.states[state];
                    println!(
                        "{}\t{}\t{}",
                        i + 1,
                        s.id,
                        s.emits.as_deref().unwrap_or("none")
                    );
                }
            } else {
                let input = Lasso::new(prefix, cycle).map_err(|e| usage(e.to_string()))?;
                let trace = run_machine(&sc, &input).map_err(|e| usage(e.to_string()))?;
                for i in 0..trace.len() {
                    let t = trace.at(i);
                    let mark = if i == trace.loop_start() {
                        "\t<- loop"
                    } else {
                        ""
                    };
                    println!(
                        "{i}\t{}\t{}{mark}",
                        t.state,
                        t.sent.as_deref().unwrap_or("none")
                    );
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Reads `var=value, ...` lines; a `loop:` line starts the repeated part.
fn parse_trace(text: &str) -> Result<(Vec<Valuation>, Vec<Valuation>), String> {
    let (mut prefix, mut cycle) = (Vec::new(), Vec::new());
    let mut in_loop = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line == "loop:" {
            if in_loop {
                return Err(format!("line {}: second `loop:` marker", n + 1));
            }
            in_loop = true;
            continue;
        }
        let mut pairs = Vec::new();
        for part in line.split(',') {
            let (var, val) = part.split_once('=').ok_or_else(|| {
                format!(
                    "line {}: expected `var=value`, found `{}`",
                    n + 1,
                    part.trim()
                )
            })?;
            pairs.push((var.trim().to_string(), val.trim().to_string()));
        }
        if in_loop {
            cycle.push(Valuation(pairs));
        } else {
            prefix.push(Valuation(pairs));
        }
    }
    if in_loop && cycle.is_empty() {
        return Err("`loop:` marker with no valuations after it".into());
    }
    if prefix.is_empty() && cycle.is_empty() {
        return Err("no valuations".into());
    }
    Ok((prefix, cycle))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
