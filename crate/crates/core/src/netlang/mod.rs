//! Text formats: `.bn` network descriptions and `.ev` evidence files.
//!
//! ```text
//! # comment
//! variable LatePruning { levels no yes }
//! node LateSeasonGrowth {
//!   kind chance
//!   parents LateFertilization LatePruning WarmFall
//!   tag diagnosis
//!   cpd noisy_or {
//!     leak 0.1
//!     LateFertilization 0.8
//!     LatePruning 0.8
//!     WarmFall 0.6
//!   }
//! }
//! ```
//!
//! Statements end at `;` or a newline. Table rows follow an odometer over the
//! parents in declared order with the last parent varying fastest. Noisy
//! entries name a cause, optionally qualified with `:level`, followed by
//! either one probability (binary child) or a full distribution over the
//! child's levels. Evidence files hold one `Variable = level` per line.

mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::canonical::LeakConvention;
use crate::model::{Cpd, Evidence, Network, NodeKind};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SourceSpan {
    pub file: String,
    /// 1-based.
    pub line: usize,
    /// 1-based, in characters.
    pub column: usize,
    pub length: usize,
    /// Byte offset of the first character.
    pub offset: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticSeverity {
    Error,
    Warning,
    Lint,
}

impl fmt::Display for DiagnosticSeverity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DiagnosticSeverity::Error => "error",
            DiagnosticSeverity::Warning => "warning",
            DiagnosticSeverity::Lint => "lint",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParseDiagnostic {
    pub severity: DiagnosticSeverity,
    pub message: String,
    pub span: SourceSpan,
    pub hint: Option<String>,
}

impl ParseDiagnostic {
    pub fn new(severity: DiagnosticSeverity, message: impl Into<String>, span: SourceSpan) -> Self {
        Self { severity, message: message.into(), span, hint: None }
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == DiagnosticSeverity::Error
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}: {}: {}", self.span.file, self.span.line, self.span.column, self.severity, self.message)?;
        if let Some(hint) = &self.hint {
            write!(f, " (hint: {hint})")?;
        }
        Ok(())
    }
}

/// A successfully parsed value with its non-fatal diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub diagnostics: Vec<ParseDiagnostic>,
}

pub(crate) fn sorted(mut diags: Vec<ParseDiagnostic>) -> Vec<ParseDiagnostic> {
    diags.sort_by(|a, b| {
        (a.span.line, a.span.column, a.severity, &a.message).cmp(&(b.span.line, b.span.column, b.severity, &b.message))
    });
    diags.dedup();
    diags
}

const DEFAULT_FILE: &str = "<input>";

/// Parses and validates a network description.
pub fn parse_network(text: &str) -> Result<Parsed<Network>, Vec<ParseDiagnostic>> {
    parser::parse_network(text, DEFAULT_FILE)
}

/// As [`parse_network`], labelling spans with `file`.
pub fn parse_network_named(text: &str, file: &str) -> Result<Parsed<Network>, Vec<ParseDiagnostic>> {
    parser::parse_network(text, file)
}

pub fn parse_evidence(text: &str, net: &Network) -> Result<Evidence, Vec<ParseDiagnostic>> {
    parse_evidence_named(text, net, DEFAULT_FILE)
}

pub fn parse_evidence_named(text: &str, net: &Network, file: &str) -> Result<Evidence, Vec<ParseDiagnostic>> {
    use lexer::Tok;
    let (toks, mut diags) = lexer::lex(text, file);
    let mut evidence = Evidence::new();
    let mut seen = BTreeSet::new();
    let mut i = 0;
    let err = |span: &SourceSpan, msg: String| ParseDiagnostic::new(DiagnosticSeverity::Error, msg, span.clone());
    while i < toks.len() {
        // one logical line
        let start = i;
        while !matches!(toks[i].tok, Tok::Newline | Tok::Semi | Tok::Eof) {
            i += 1;
        }
        let line = &toks[start..i];
        i += 1;
        match line {
            [] => {}
            [
                lexer::Token { tok: Tok::Ident(var), span: var_span },
                lexer::Token { tok: Tok::Eq, .. },
                lexer::Token { tok: Tok::Ident(level), span: level_span },
            ] => {
                if !seen.insert(var.clone()) {
                    diags.push(err(var_span, format!("`{var}` assigned more than once")));
                    continue;
                }
                match net.node(var) {
                    None => diags.push(err(var_span, format!("unknown variable `{var}`"))),
                    Some(n) if n.kind == NodeKind::Utility => {
                        diags.push(err(var_span, format!("utility node `{var}` cannot be observed")))
                    }
                    Some(n) if n.variable.level_index(level).is_none() => diags.push(
                        err(level_span, format!("`{var}` has no level `{level}`"))
                            .with_hint(format!("levels are: {}", n.variable.levels().join(", "))),
                    ),
                    Some(_) => {
                        evidence.set(var.clone(), level.clone());
                    }
                }
            }
            [first, ..] => diags.push(
                err(&first.span, "expected `Variable = level`".to_string()).with_hint("one assignment per line"),
            ),
        }
    }
    if diags.is_empty() {
        Ok(evidence)
    } else {
        Err(sorted(diags))
    }
}

pub fn serialize_evidence(evidence: &Evidence) -> String {
    evidence.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

fn numbers(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(" ")
}

/// Canonical text for a network. Canonical specifications stay compact and
/// numbers print in shortest round-trip form, so parsing the output
/// reproduces the network exactly.
pub fn serialize_network(net: &Network) -> String {
    let mut out = String::new();
    for node in net.nodes().iter().filter(|n| n.kind != NodeKind::Utility) {
        let _ = writeln!(out, "variable {} {{ levels {} }}", node.name(), node.variable.levels().join(" "));
    }
    for node in net.nodes() {
        let _ = writeln!(out, "\nnode {} {{", node.name());
        let _ = writeln!(out, "  kind {}", node.kind);
        if !node.parents.is_empty() {
            let _ = writeln!(out, "  parents {}", node.parents.join(" "));
        }
        if !node.tags.is_empty() {
            let _ = writeln!(out, "  tag {}", node.tags.join(" "));
        }
        match &node.cpd {
            Cpd::None => {}
            Cpd::Max => {
                let _ = writeln!(out, "  cpd max");
            }
            Cpd::Table(cpt) => {
                let _ = writeln!(out, "  cpd table {{");
                for row in cpt.rows() {
                    let _ = writeln!(out, "    row {}", numbers(row));
                }
                let _ = writeln!(out, "  }}");
            }
            Cpd::Utility(table) => {
                let width = node.parents.last().and_then(|p| net.node(p)).map_or(1, |n| n.cardinality().max(1));
                let _ = writeln!(out, "  cpd utility {{");
                for row in table.values().chunks(width) {
                    let _ = writeln!(out, "    row {}", numbers(row));
                }
                let _ = writeln!(out, "  }}");
            }
            Cpd::NoisyOr(spec) => {
                let _ = writeln!(out, "  cpd noisy_or {{");
                if spec.leak != 0.0 {
                    let _ = writeln!(out, "    leak {}", spec.leak);
                }
                if spec.convention == LeakConvention::Excluded {
                    let _ = writeln!(out, "    leak_convention excluded");
                }
                for (cause, p) in &spec.causes {
                    let _ = writeln!(out, "    {cause} {p}");
                }
                let _ = writeln!(out, "  }}");
            }
            Cpd::NoisyMax(spec) => {
                let _ = writeln!(out, "  cpd noisy_or {{");
                if let Some(leak) = &spec.leak {
                    let _ = writeln!(out, "    leak {}", numbers(leak));
                }
                if spec.convention == LeakConvention::Excluded {
                    let _ = writeln!(out, "    leak_convention excluded");
                }
                for (cause, level, dist) in spec.assessed_distributions() {
                    let _ = writeln!(out, "    {cause}:{level} {}", numbers(dist));
                }
                let _ = writeln!(out, "  }}");
            }
        }
        let _ = writeln!(out, "}}");
    }
    out
}
