//! Rendering of analysis results: a competition-style verdict line, the
//! per-transition bound table, and an optional machine-readable JSON view.

use serde::Serialize;

use crate::analysis::AnalysisResult;
use crate::ir::Program;

/// Plain-text report. The first line is the verdict in the
/// `WORST_CASE(?, <class>)` convention; bounds follow, one transition per
/// line, in transition order.
pub fn render_report(program: &Program, result: &AnalysisResult, proof: bool) -> String {
    let names = program.namer();
    let mut out = String::new();
    out.push_str(&format!("WORST_CASE(?, {})\n", result.class));
    out.push_str(&format!(
        "Overall runtime bound: {}\n",
        result.overall.display(&names)
    ));
    out.push_str("Per-transition bounds:\n");
    for t in &program.transitions {
        let bound = &result.rbglo[&t.id];
        out.push_str(&format!(
            "  {}: {} -> {} : {}\n",
            t.name,
            program.loc_name(t.src),
            program.loc_name(t.tgt),
            bound.display(&names)
        ));
    }
    if proof && !result.log.is_empty() {
        out.push_str("Derivation log:\n");
        for line in &result.log {
            out.push_str(&format!("  {line}\n"));
        }
    }
    out
}

#[derive(Serialize)]
struct JsonReport {
    class: String,
    overall: String,
    transitions: Vec<JsonTransition>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    log: Vec<String>,
}

#[derive(Serialize)]
struct JsonTransition {
    name: String,
    source: String,
    target: String,
    bound: String,
}

/// JSON report with the same fields as the plain rendering.
pub fn render_json(program: &Program, result: &AnalysisResult, proof: bool) -> String {
    let names = program.namer();
    let report = JsonReport {
        class: format!("{}", result.class),
        overall: format!("{}", result.overall.display(&names)),
        transitions: program
            .transitions
            .iter()
            .map(|t| JsonTransition {
                name: t.name.clone(),
                source: program.loc_name(t.src).to_string(),
                target: program.loc_name(t.tgt).to_string(),
                bound: format!("{}", result.rbglo[&t.id].display(&names)),
            })
            .collect(),
        log: if proof { result.log.clone() } else { Vec::new() },
    };
    serde_json::to_string_pretty(&report).expect("report serialization")
}
