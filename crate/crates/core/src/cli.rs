//! Command-line front end. [`run`] is the whole program minus process exit,
//! so tests can drive it with in-memory streams.
//!
//! Exit codes: 0 success, 1 validation, assertion or engine failure,
//! 2 usage error. Results go to stdout, diagnostics to stderr.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::canonical::{parameter_counts, CanonicalModel, ParameterCounts};
use crate::decision::{recommend, DecisionRecommendation};
use crate::inference::{posterior, prob_of_evidence, Query};
use crate::model::{Cpd, Evidence, Network};
use crate::netlang::{parse_evidence_named, parse_network_named, DiagnosticSeverity, ParseDiagnostic};
use crate::scenario::{run_suite, ScenarioSuite};
use crate::sensitivity::{
    chain_sensitivity, cpt_parameter_sweep, log_odds_decomposition, rank_indicants, sensitivity_range, CellRef, Event,
    OddsForm,
};
use crate::service::{self, Posterior, ServiceState, INDICANT_TAG};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "beliefnet", version, about = "Belief-network and influence-diagram engine")]
struct Cli {
    /// Output format for results on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and check a network; exit 1 on any error.
    Validate { network: PathBuf },
    /// Print the full table of one node, with parameter counts.
    Expand {
        network: PathBuf,
        #[arg(long)]
        node: String,
    },
    /// Posterior marginals given evidence.
    Infer {
        network: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
        /// Repeatable; defaults to every `diagnosis`-tagged variable.
        #[arg(long)]
        target: Vec<String>,
    },
    /// Expected utility of each alternative and the recommendation.
    Decide {
        network: PathBuf,
        #[arg(long)]
        evidence: Option<PathBuf>,
    },
    /// Sensitivity ranges, chains, sweeps, indicant ranking or odds form.
    Sense(SenseArgs),
    /// Run a scenario suite; exit 1 unless every scenario passes.
    Scenario { network: PathBuf, suite: PathBuf },
    /// Serve the HTTP API with the network preloaded as `n1`.
    Serve {
        network: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Debug, clap::Args)]
struct SenseArgs {
    /// Not needed with `--odds`/`--likelihood`.
    network: Option<PathBuf>,
    /// Event `Variable=level` whose probability is tracked.
    #[arg(long)]
    target: Option<Event>,
    /// Event `Variable=level` that is asserted and negated.
    #[arg(long)]
    pivot: Option<Event>,
    #[arg(long)]
    evidence: Option<PathBuf>,
    /// Intermediate events between pivot and target, comma separated.
    #[arg(long, value_delimiter = ',')]
    chain: Vec<Event>,
    /// Table cell `node/row/column` to sweep.
    #[arg(long)]
    sweep: Option<CellRef>,
    /// `start:end:count` or a comma-separated list of values.
    #[arg(long)]
    grid: Option<String>,
    /// Rank unobserved `indicant`-tagged variables by sensitivity range.
    #[arg(long)]
    rank_indicants: bool,
    /// Prior odds O(a) for the odds-likelihood form.
    #[arg(long, requires = "likelihood")]
    odds: Option<f64>,
    /// Likelihood ratio L(b, a).
    #[arg(long, requires = "odds")]
    likelihood: Option<f64>,
}

enum Failure {
    Usage(String),
    Failed(String),
    Diagnostics(Vec<ParseDiagnostic>),
    /// Output already written; only the exit code remains.
    Silent,
}

impl<E: std::error::Error> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Failed(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

/// Runs the program on `args` (including the program name).
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{text}");
                2
            } else {
                let _ = write!(out, "{text}");
                0
            };
        }
    };
    let mut ctx = Ctx { format: cli.format, out, err };
    let result = match cli.command {
        Command::Validate { network } => ctx.validate(&network),
        Command::Expand { network, node } => ctx.expand(&network, &node),
        Command::Infer { network, evidence, target } => ctx.infer(&network, evidence.as_deref(), &target),
        Command::Decide { network, evidence } => ctx.decide(&network, evidence.as_deref()),
        Command::Sense(args) => ctx.sense(&args),
        Command::Scenario { network, suite } => ctx.scenario(&network, &suite),
        Command::Serve { network, port, host } => ctx.serve(&network, SocketAddr::new(host, port)),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(ctx.err, "error: {msg}");
            2
        }
        Err(Failure::Failed(msg)) => {
            let _ = writeln!(ctx.err, "error: {msg}");
            1
        }
        Err(Failure::Diagnostics(diags)) => {
            for d in &diags {
                let _ = writeln!(ctx.err, "{d}");
            }
            1
        }
        Err(Failure::Silent) => 1,
    }
}

struct Ctx<'a> {
    format: Format,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Failed(format!("cannot read `{}`: {e}", path.display())))
}

fn load_network(path: &Path) -> Result<Network, Failure> {
    let text = read(path)?;
    parse_network_named(&text, &path.display().to_string()).map(|p| p.value).map_err(Failure::Diagnostics)
}

fn load_evidence(net: &Network, path: Option<&Path>) -> Result<Evidence, Failure> {
    match path {
        None => Ok(Evidence::new()),
        Some(path) => {
            let text = read(path)?;
            parse_evidence_named(&text, net, &path.display().to_string()).map_err(Failure::Diagnostics)
        }
    }
}

/// `a:b:n` (inclusive, evenly spaced) or `x,y,z`.
fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("malformed grid `{text}`"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if let [a, b, n] = text.split(':').collect::<Vec<_>>().as_slice() {
        let (a, b) = (num(a)?, num(b)?);
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        return match n {
            0 => Err(bad()),
            1 => Ok(vec![a]),
            _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
        };
    }
    text.split(',').map(num).collect()
}

fn p4(x: f64) -> String {
    let text = format!("{x:.4}");
    match text.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => text,
    }
}

fn width<'s>(items: impl IntoIterator<Item = &'s String>) -> usize {
    items.into_iter().map(|s| s.chars().count()).max().unwrap_or(0)
}

#[derive(Serialize)]
struct ValidateReport<'a> {
    file: String,
    valid: bool,
    nodes: usize,
    errors: usize,
    warnings: usize,
    lints: usize,
    diagnostics: &'a [ParseDiagnostic],
}

#[derive(Serialize)]
struct ExpandRow {
    parents: Vec<String>,
    probabilities: Vec<f64>,
}

#[derive(Serialize)]
struct ExpandReport {
    node: String,
    form: &'static str,
    parents: Vec<String>,
    levels: Vec<String>,
    rows: Vec<ExpandRow>,
    parameters: ExpandParameters,
}

#[derive(Serialize)]
struct ExpandParameters {
    full: usize,
    canonical: Option<usize>,
}

#[derive(Serialize)]
struct InferReport {
    evidence: Evidence,
    evidence_probability: f64,
    posteriors: Vec<Posterior>,
}

#[derive(Serialize)]
struct OddsReport {
    prior_odds: f64,
    likelihood_ratio: f64,
    posterior: f64,
    likelihood_sensitivity: f64,
    log_odds: crate::sensitivity::LogOdds,
}

#[derive(Serialize, Default)]
struct SenseReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    odds: Option<OddsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    range: Option<crate::sensitivity::SensitivityRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chain: Option<crate::sensitivity::ChainSensitivity>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<crate::sensitivity::SweepTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    indicants: Option<Vec<crate::sensitivity::IndicantSensitivity>>,
}

impl Ctx<'_> {
    fn emit_json<T: Serialize>(&mut self, value: &T) -> Outcome {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Failed(e.to_string()))?;
        writeln!(self.out, "{text}").map_err(Failure::from)
    }

    fn emit_text(&mut self, text: &str) -> Outcome {
        self.out.write_all(text.as_bytes()).map_err(Failure::from)
    }

    fn validate(&mut self, path: &Path) -> Outcome {
        let text = read(path)?;
        let file = path.display().to_string();
        let (nodes, diagnostics) = match parse_network_named(&text, &file) {
            Ok(parsed) => (parsed.value.len(), parsed.diagnostics),
            Err(diags) => (0, diags),
        };
        let count = |s: DiagnosticSeverity| diagnostics.iter().filter(|d| d.severity == s).count();
        let report = ValidateReport {
            file,
            valid: count(DiagnosticSeverity::Error) == 0,
            nodes,
            errors: count(DiagnosticSeverity::Error),
            warnings: count(DiagnosticSeverity::Warning),
            lints: count(DiagnosticSeverity::Lint),
            diagnostics: &diagnostics,
        };
        for d in &diagnostics {
            writeln!(self.err, "{d}")?;
        }
        match self.format {
            Format::Json => self.emit_json(&report)?,
            Format::Text => {
                let status = if report.valid { "ok" } else { "invalid" };
                let text = format!(
                    "{}: {status}: {} nodes, {} errors, {} warnings, {} lints\n",
                    report.file, report.nodes, report.errors, report.warnings, report.lints
                );
                self.emit_text(&text)?;
            }
        }
        if report.valid {
            Ok(())
        } else {
            Err(Failure::Silent)
        }
    }

    fn expand(&mut self, path: &Path, name: &str) -> Outcome {
        let net = load_network(path)?;
        let node = net.node(name).ok_or_else(|| Failure::Failed(format!("unknown node `{name}`")))?;
        let cpt = net.cpt_of(name).map_err(|e| Failure::Failed(e.to_string()))?;
        let parent_nodes: Vec<_> = node.parents.iter().filter_map(|p| net.node(p)).collect();
        let cards: Vec<usize> = parent_nodes.iter().map(|n| n.cardinality()).collect();
        let (form, canonical) = match &node.cpd {
            Cpd::Table(_) => ("table", None),
            Cpd::Max => ("max", Some(0)),
            Cpd::NoisyOr(spec) => ("noisy_or", Some(counts(&cards, node.cardinality(), spec.has_leak())?.canonical)),
            Cpd::NoisyMax(spec) => ("noisy_max", Some(counts(&cards, node.cardinality(), spec.has_leak())?.canonical)),
            Cpd::Utility(_) | Cpd::None => {
                return Err(Failure::Failed(format!("`{name}` has no probability table")));
            }
        };
        let rows = (0..cpt.num_rows())
            .map(|r| ExpandRow {
                parents: cpt
                    .parent_assignment(r)
                    .iter()
                    .zip(&parent_nodes)
                    .map(|(&l, n)| n.variable.levels()[l].clone())
                    .collect(),
                probabilities: cpt.row(r).to_vec(),
            })
            .collect();
        let report = ExpandReport {
            node: name.to_string(),
            form,
            parents: node.parents.clone(),
            levels: node.variable.levels().to_vec(),
            rows,
            parameters: ExpandParameters { full: cpt.num_rows() * (node.cardinality() - 1), canonical },
        };
        match self.format {
            Format::Json => self.emit_json(&report),
            Format::Text => {
                let mut text = String::new();
                let _ = writeln!(text, "{} ({form})", report.node);
                let widths: Vec<usize> = report
                    .parents
                    .iter()
                    .enumerate()
                    .map(|(i, p)| width(std::iter::once(p).chain(report.rows.iter().map(|r| &r.parents[i]))))
                    .collect();
                let col = report.levels.iter().map(|l| l.chars().count()).max().unwrap_or(0).max(6);
                let mut header: Vec<String> = report.parents.iter().zip(&widths).map(|(p, w)| format!("{p:<w$}")).collect();
                header.push("|".into());
                header.extend(report.levels.iter().map(|l| format!("{l:>col$}")));
                let _ = writeln!(text, "{}", header.join(" ").trim_start());
                for row in &report.rows {
                    let mut cells: Vec<String> = row.parents.iter().zip(&widths).map(|(p, w)| format!("{p:<w$}")).collect();
                    cells.push("|".into());
                    cells.extend(row.probabilities.iter().map(|&p| format!("{:>col$}", p4(p))));
                    let _ = writeln!(text, "{}", cells.join(" ").trim_start());
                }
                let canonical = report.parameters.canonical.map_or("-".to_string(), |c| c.to_string());
                let _ = writeln!(text, "parameters: full {}, canonical {canonical}", report.parameters.full);
                self.emit_text(&text)
            }
        }
    }

    fn infer(&mut self, path: &Path, evidence: Option<&Path>, targets: &[String]) -> Outcome {
        let net = load_network(path)?;
        let evidence = load_evidence(&net, evidence)?;
        let targets: Vec<String> = if targets.is_empty() {
            net.tagged(service::DIAGNOSIS_TAG).map(|n| n.name().to_string()).collect()
        } else {
            targets.to_vec()
        };
        if targets.is_empty() {
            return Err(Failure::Usage("no --target given and no variable is tagged `diagnosis`".into()));
        }
        let evidence_probability = prob_of_evidence(&net, &evidence)?;
        let mut posteriors = Vec::with_capacity(targets.len());
        for t in &targets {
            let dist = posterior(&net, &Query::single(t.clone(), evidence.clone()))?;
            posteriors.push(Posterior {
                variable: t.clone(),
                levels: dist.levels()[0].clone(),
                probabilities: dist.probabilities().to_vec(),
            });
        }
        let report = InferReport { evidence, evidence_probability, posteriors };
        match self.format {
            Format::Json => self.emit_json(&report),
            Format::Text => {
                let mut text = String::new();
                for p in &report.posteriors {
                    let _ = writeln!(text, "{}", p.variable);
                    let w = width(&p.levels);
                    for (l, v) in p.levels.iter().zip(&p.probabilities) {
                        let _ = writeln!(text, "  {l:<w$}  {}", p4(*v));
                    }
                }
                let _ = writeln!(text, "P(evidence) = {}", p4(report.evidence_probability));
                self.emit_text(&text)
            }
        }
    }

    fn decide(&mut self, path: &Path, evidence: Option<&Path>) -> Outcome {
        let net = load_network(path)?;
        let evidence = load_evidence(&net, evidence)?;
        let rec = recommend(&net, &evidence)?;
        match self.format {
            Format::Json => self.emit_json(&rec),
            Format::Text => {
                let text = decision_text(&rec);
                self.emit_text(&text)
            }
        }
    }

    fn sense(&mut self, args: &SenseArgs) -> Outcome {
        let mut report = SenseReport::default();
        if let (Some(o), Some(l)) = (args.odds, args.likelihood) {
            if !(o >= 0.0 && l >= 0.0) {
                return Err(Failure::Usage("odds and likelihood ratio must be non-negative".into()));
            }
            let form = OddsForm::new(o, l);
            report.odds = Some(OddsReport {
                prior_odds: o,
                likelihood_ratio: l,
                posterior: form.posterior,
                likelihood_sensitivity: form.likelihood_sensitivity(),
                log_odds: log_odds_decomposition(o, l),
            });
        }
        let wants_network = args.target.is_some() || args.pivot.is_some() || args.sweep.is_some() || args.rank_indicants;
        match (&args.network, wants_network) {
            (None, true) => return Err(Failure::Usage("a network file is required".into())),
            (None, false) if report.odds.is_none() => {
                return Err(Failure::Usage("nothing to do: give --odds/--likelihood or a network with --target".into()))
            }
            (Some(path), _) => {
                let net = load_network(path)?;
                let evidence = load_evidence(&net, args.evidence.as_deref())?;
                let target = args.target.as_ref().ok_or_else(|| Failure::Usage("--target is required".into()))?;
                if args.grid.is_some() != args.sweep.is_some() {
                    return Err(Failure::Usage("--sweep and --grid go together".into()));
                }
                if !args.chain.is_empty() {
                    let pivot = args.pivot.as_ref().ok_or_else(|| Failure::Usage("--chain needs --pivot".into()))?;
                    let mut events = vec![pivot.clone()];
                    events.extend(args.chain.iter().cloned());
                    events.push(target.clone());
                    report.chain = Some(chain_sensitivity(&net, &events, &evidence)?);
                } else if let Some(pivot) = &args.pivot {
                    report.range = Some(sensitivity_range(&net, target, pivot, &evidence)?);
                }
                if let (Some(cell), Some(grid)) = (&args.sweep, &args.grid) {
                    let grid = parse_grid(grid)?;
                    report.sweep = Some(cpt_parameter_sweep(&net, target, &evidence, cell, &grid)?);
                }
                if args.rank_indicants {
                    let candidates: Vec<String> = net.tagged(INDICANT_TAG).map(|n| n.name().to_string()).collect();
                    report.indicants = Some(rank_indicants(&net, &evidence, target, &candidates)?);
                }
                if report.range.is_none() && report.chain.is_none() && report.sweep.is_none() && report.indicants.is_none() {
                    return Err(Failure::Usage("give --pivot, --sweep/--grid or --rank-indicants".into()));
                }
            }
            (None, false) => {}
        }
        match self.format {
            Format::Json => self.emit_json(&report),
            Format::Text => {
                let text = sense_text(&report);
                self.emit_text(&text)
            }
        }
    }

    fn scenario(&mut self, path: &Path, suite_path: &Path) -> Outcome {
        let net = load_network(path)?;
        let suite = match ScenarioSuite::load(suite_path, &net) {
            Ok(s) => s,
            Err(crate::scenario::ScenarioError::Evidence { scenario, diagnostics }) => {
                writeln!(self.err, "error: scenario `{scenario}`: evidence does not match the network")?;
                return Err(Failure::Diagnostics(diagnostics));
            }
            Err(e) => return Err(e.into()),
        };
        let report = run_suite(&net, &suite);
        match self.format {
            Format::Json => self.emit_json(&report)?,
            Format::Text => {
                let mut text = String::new();
                for s in &report.scenarios {
                    let _ = writeln!(text, "{} {}", if s.passed { "PASS" } else { "FAIL" }, s.name);
                    if let Some(e) = &s.error {
                        let _ = writeln!(text, "  error: {e}");
                    }
                    for c in s.checks.iter().filter(|c| !c.passed) {
                        let _ = writeln!(
                            text,
                            "  {}={}: expected {} got {} (tolerance {})",
                            c.variable, c.level, c.expected, c.actual, c.tolerance
                        );
                    }
                    if s.recommendation != s.expected_recommendation && s.error.is_none() {
                        let _ = writeln!(
                            text,
                            "  recommendation: expected {} got {}",
                            s.expected_recommendation.as_deref().unwrap_or("-"),
                            s.recommendation.as_deref().unwrap_or("-")
                        );
                    }
                }
                let _ = writeln!(text, "{}/{} scenarios passed", report.passed, report.scenarios.len());
                self.emit_text(&text)?;
            }
        }
        if report.all_passed() {
            Ok(())
        } else {
            Err(Failure::Silent)
        }
    }

    fn serve(&mut self, path: &Path, addr: SocketAddr) -> Outcome {
        let text = read(path)?;
        let state = Arc::new(ServiceState::new());
        let info = match state.load_network(&text) {
            Ok(info) => info,
            Err(service::ApiError::Diagnostics(d)) => return Err(Failure::Diagnostics(d)),
            Err(e) => return Err(e.into()),
        };
        writeln!(self.err, "serving {} as network `{}` on http://{addr}", path.display(), info.id)?;
        let runtime = tokio::runtime::Runtime::new()?;
        runtime.block_on(service::serve(addr, state))?;
        Ok(())
    }
}

fn counts(cards: &[usize], child: usize, leak: bool) -> Result<ParameterCounts, Failure> {
    parameter_counts(cards, child, leak).map_err(Failure::from)
}

fn decision_text(rec: &DecisionRecommendation) -> String {
    let mut text = String::new();
    let _ = writeln!(text, "decision {}", rec.decision);
    let w = width(rec.alternatives.iter().map(|a| &a.alternative));
    for a in &rec.alternatives {
        let mark = if a.alternative == rec.recommended { "  *" } else { "" };
        let _ = writeln!(text, "  {:<w$}  {}{mark}", a.alternative, p4(a.expected_utility));
    }
    let tie = if rec.tie { " (tie)" } else { "" };
    let _ = writeln!(text, "recommended: {}{tie}", rec.recommended);
    text
}

fn sense_text(report: &SenseReport) -> String {
    let mut text = String::new();
    if let Some(o) = &report.odds {
        let _ = writeln!(text, "prior odds {}  likelihood ratio {}", p4(o.prior_odds), p4(o.likelihood_ratio));
        let _ = writeln!(text, "posterior = {}", p4(o.posterior));
        let _ = writeln!(text, "d posterior / d L = {}", p4(o.likelihood_sensitivity));
        let lo = &o.log_odds;
        let _ = writeln!(
            text,
            "log-odds: prior {} + log-likelihood {} = posterior {}{}",
            p4(lo.prior),
            p4(lo.log_likelihood),
            p4(lo.posterior),
            if lo.saturated { " (saturated)" } else { "" }
        );
    }
    if let Some(r) = &report.range {
        let _ = writeln!(text, "P({} | {}) = {}", r.target, r.pivot, p4(r.given_pivot));
        let _ = writeln!(text, "P({} | not {}) = {}", r.target, r.pivot, p4(r.given_not_pivot));
        let _ = writeln!(text, "sensitivity range = {}", p4(r.value));
        if let Some(w) = &r.warning {
            let _ = writeln!(text, "warning: {w}");
        }
    }
    if let Some(c) = &report.chain {
        for l in &c.links {
            let _ = writeln!(text, "SR({} <- {}) = {}", l.target, l.pivot, p4(l.value));
        }
        let _ = writeln!(text, "product = {}", p4(c.product));
        let _ = writeln!(text, "end to end = {}", p4(c.end_to_end));
        for w in &c.warnings {
            let _ = writeln!(text, "warning: {w}");
        }
    }
    if let Some(s) = &report.sweep {
        let _ = writeln!(text, "sweep {} -> P({})", s.cell, s.target);
        for p in &s.points {
            let mut line = format!("  {}  {}", p4(p.value), p4(p.posterior));
            for a in &p.alternatives {
                let _ = write!(line, "  {} {}", a.alternative, p4(a.expected_utility));
            }
            if let Some(r) = &p.recommended {
                let _ = write!(line, "  -> {r}");
            }
            let _ = writeln!(text, "{line}");
        }
        for c in &s.crossings {
            let _ = writeln!(text, "threshold: {} -> {} between {} and {}", c.from, c.to, p4(c.lower), p4(c.upper));
        }
    }
    if let Some(list) = &report.indicants {
        let w = width(list.iter().map(|i| &i.indicant));
        for i in list {
            let _ = writeln!(text, "  {:<w$}  {}  (at {})", i.indicant, p4(i.sensitivity_range), i.level);
        }
    }
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0:1:3").ok(), Some(vec![0.0, 0.5, 1.0]));
        assert_eq!(parse_grid("0.025,0.1").ok(), Some(vec![0.025, 0.1]));
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn no_negative_zero_in_text() {
        assert_eq!(p4(-1e-17), "0.0000");
        assert_eq!(p4(-0.25), "-0.2500");
    }

    #[test]
    fn usage_errors_exit_two() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["beliefnet", "frobnicate"], &mut out, &mut err), 2);
        assert_eq!(run(["beliefnet", "sense"], &mut out, &mut err), 2);
        assert_eq!(run(["beliefnet", "--help"], &mut out, &mut err), 0);
    }
}
