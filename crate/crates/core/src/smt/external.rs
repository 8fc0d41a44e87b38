//! External SMT-LIB2 backend over a line-oriented subprocess.
//!
//! The query is printed in `QF_NIA`, the solver's `sat`/`unsat`/`unknown`
//! answer and its model S-expression are parsed back. Process failures and
//! timeouts degrade to `None`; the facade maps that to `Unknown`.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use num_bigint::BigInt;
use num_traits::{One, Signed};

use crate::ir::{Formula, Polynomial, State, VarId};

use super::SatResult;

/// External solver configuration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Command line of the solver, e.g. `z3 -in`. `None` disables the
    /// external backend entirely.
    pub command: Option<String>,
    pub timeout_ms: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            command: Some("z3 -in".to_string()),
            timeout_ms: 5000,
        }
    }
}

impl SolverConfig {
    pub fn disabled() -> Self {
        SolverConfig {
            command: None,
            timeout_ms: 5000,
        }
    }
}

/// Whether the configured solver answers a trivial query.
pub fn probe(config: &SolverConfig) -> bool {
    matches!(
        run_script(config, "(set-logic QF_NIA)\n(check-sat)\n(exit)\n"),
        Some(output) if output.contains("sat")
    )
}

pub fn check_sat(config: &SolverConfig, formula: &Formula) -> Option<SatResult> {
    let script = render_script(formula);
    let output = run_script(config, &script)?;
    let mut lines = output.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("unsat") => Some(SatResult::Unsat),
        Some("sat") => {
            let rest: String = output
                .lines()
                .skip_while(|l| l.trim() != "sat")
                .skip(1)
                .collect::<Vec<_>>()
                .join(" ");
            Some(SatResult::Sat(parse_model(&rest)))
        }
        _ => Some(SatResult::Unknown),
    }
}

fn run_script(config: &SolverConfig, script: &str) -> Option<String> {
    let command = config.command.as_ref()?;
    let mut parts = command.split_whitespace();
    let bin = parts.next()?;
    let mut child = Command::new(bin)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .ok()?;
    child
        .stdin
        .take()
        .and_then(|mut stdin| stdin.write_all(script.as_bytes()).ok())?;
    let mut stdout = child.stdout.take()?;

    // Watchdog: kill the solver when the per-query timeout elapses.
    let timeout = Duration::from_millis(config.timeout_ms);
    let (tx, rx) = std::sync::mpsc::channel::<()>();
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        let _ = tx.send(());
        buf
    });
    let timed_out = rx.recv_timeout(timeout).is_err();
    if timed_out {
        let _ = child.kill();
    }
    let _ = child.wait();
    let output = reader.join().ok()?;
    if timed_out {
        None
    } else {
        Some(output)
    }
}

fn render_script(formula: &Formula) -> String {
    let mut out = String::from("(set-logic QF_NIA)\n");
    for v in formula.vars() {
        out.push_str(&format!("(declare-const {} Int)\n", smt_name(v)));
    }
    out.push_str(&format!("(assert {})\n", render_formula(formula)));
    out.push_str("(check-sat)\n(get-model)\n(exit)\n");
    out
}

fn smt_name(v: VarId) -> String {
    format!("v{}", v.0)
}

fn render_formula(f: &Formula) -> String {
    match f {
        Formula::True => "true".to_string(),
        Formula::False => "false".to_string(),
        Formula::Atom(a) => format!("(< 0 {})", render_poly(a.poly())),
        Formula::And(ps) => {
            let inner: Vec<String> = ps.iter().map(render_formula).collect();
            format!("(and {})", inner.join(" "))
        }
        Formula::Or(ps) => {
            let inner: Vec<String> = ps.iter().map(render_formula).collect();
            format!("(or {})", inner.join(" "))
        }
    }
}

fn render_poly(p: &Polynomial) -> String {
    if p.is_zero() {
        return "0".to_string();
    }
    let mut terms = Vec::new();
    for (m, c) in p.terms() {
        assert!(c.is_integer(), "atoms carry integer coefficients");
        let c = c.to_integer();
        let mut factors = Vec::new();
        if !c.is_one() || m.is_one() {
            factors.push(render_int(&c));
        }
        for (v, e) in &m.0 {
            for _ in 0..*e {
                factors.push(smt_name(*v));
            }
        }
        terms.push(if factors.len() == 1 {
            factors.pop().unwrap()
        } else {
            format!("(* {})", factors.join(" "))
        });
    }
    if terms.len() == 1 {
        terms.pop().unwrap()
    } else {
        format!("(+ {})", terms.join(" "))
    }
}

fn render_int(c: &BigInt) -> String {
    if c.is_negative() {
        format!("(- {})", c.magnitude())
    } else {
        c.to_string()
    }
}

/// Extract `define-fun` integer bindings from a model S-expression.
fn parse_model(text: &str) -> State {
    let mut model = BTreeMap::new();
    let tokens = tokenize(text);
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "define-fun" && i + 1 < tokens.len() {
            let name = &tokens[i + 1];
            // Skip to the sort "Int" and read the value expression after it.
            let mut j = i + 2;
            while j < tokens.len() && tokens[j] != "Int" {
                j += 1;
            }
            if j + 1 < tokens.len() {
                if let Some(value) = parse_value(&tokens, j + 1) {
                    if let Some(rest) = name.strip_prefix('v') {
                        if let Ok(idx) = rest.parse::<u32>() {
                            model.insert(VarId(idx), value);
                        }
                    }
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    model
}

fn parse_value(tokens: &[String], at: usize) -> Option<BigInt> {
    if tokens[at] == "(" && at + 2 < tokens.len() && tokens[at + 1] == "-" {
        tokens[at + 2].parse::<BigInt>().ok().map(|v| -v)
    } else {
        tokens[at].parse::<BigInt>().ok()
    }
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}
