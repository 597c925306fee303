//! Recursive-descent parser for `.bn` files and the semantic pass that turns
//! the syntax tree into a [`Network`].

use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{lex, Tok, Token};
use super::{DiagnosticSeverity, ParseDiagnostic, Parsed, SourceSpan};
use crate::canonical::{LeakConvention, MaxCause, NoisyMaxSpec, NoisyOrSpec};
use crate::decision::UtilityTable;
use crate::model::{validate, Cpd, Cpt, Network, Node, NodeKind, Severity, VariableSpec, ViolationKind};

#[derive(Clone, Debug)]
pub(crate) struct Spanned<T> {
    pub value: T,
    pub span: SourceSpan,
}

#[derive(Debug)]
struct VarDecl {
    name: Spanned<String>,
    levels: Vec<Spanned<String>>,
}

#[derive(Debug)]
struct NoisyEntry {
    cause: Spanned<String>,
    level: Option<Spanned<String>>,
    values: Vec<f64>,
    span: SourceSpan,
}

#[derive(Debug)]
enum CpdAst {
    Table(Vec<Spanned<Vec<f64>>>),
    Noisy {
        leak: Option<Spanned<Vec<f64>>>,
        convention: Option<Spanned<String>>,
        entries: Vec<NoisyEntry>,
    },
    Max,
    Utility(Vec<Spanned<Vec<f64>>>),
}

#[derive(Debug, Default)]
struct NodeDecl {
    name: Option<Spanned<String>>,
    kind: Option<Spanned<String>>,
    parents: Option<Vec<Spanned<String>>>,
    tags: Vec<Spanned<String>>,
    cpd: Option<Spanned<CpdAst>>,
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    diags: Vec<ParseDiagnostic>,
}

type PResult<T> = Result<T, ()>;

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&mut self, message: impl Into<String>) -> PResult<T> {
        let span = self.span();
        self.diags.push(ParseDiagnostic::new(DiagnosticSeverity::Error, message, span));
        Err(())
    }

    fn unexpected<T>(&mut self, wanted: &str) -> PResult<T> {
        let found = self.peek().describe();
        self.error(format!("expected {wanted}, found {found}"))
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Semi) {
            self.bump();
        }
    }

    fn ident(&mut self, wanted: &str) -> PResult<Spanned<String>> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().span.clone();
                Ok(Spanned { value: s, span })
            }
            _ => self.unexpected(wanted),
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<SourceSpan> {
        if *self.peek() == tok {
            Ok(self.bump().span.clone())
        } else {
            self.unexpected(&tok.describe())
        }
    }

    fn at_terminator(&self) -> bool {
        matches!(self.peek(), Tok::Semi | Tok::Newline | Tok::RBrace | Tok::Eof)
    }

    fn end_statement(&mut self) -> PResult<()> {
        match self.peek() {
            Tok::Semi | Tok::Newline => {
                self.bump();
                Ok(())
            }
            Tok::RBrace | Tok::Eof => Ok(()),
            _ => self.unexpected("`;` or end of line"),
        }
    }

    fn idents_until_end(&mut self, wanted: &str) -> PResult<Vec<Spanned<String>>> {
        let mut out = Vec::new();
        while !self.at_terminator() {
            out.push(self.ident(wanted)?);
        }
        Ok(out)
    }

    fn numbers_until_end(&mut self) -> PResult<Vec<f64>> {
        let mut out = Vec::new();
        while !self.at_terminator() {
            match *self.peek() {
                Tok::Number(n) => {
                    self.bump();
                    out.push(n);
                }
                _ => return self.unexpected("a number"),
            }
        }
        Ok(out)
    }

    /// Rewinds to `start` and skips past the `}` that balances the first `{`
    /// after it, or to the end of the line when no block was opened.
    fn recover_block(&mut self, start: usize) {
        self.pos = start;
        let mut depth = 0usize;
        loop {
            match self.peek() {
                Tok::Eof => return,
                Tok::Newline if depth == 0 => return,
                Tok::LBrace => depth += 1,
                Tok::RBrace if depth <= 1 => {
                    self.bump();
                    return;
                }
                Tok::RBrace => depth -= 1,
                _ => {}
            }
            self.bump();
        }
    }

    fn file(&mut self) -> (Vec<VarDecl>, Vec<NodeDecl>) {
        let mut vars = Vec::new();
        let mut nodes = Vec::new();
        loop {
            self.skip_separators();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Ident(kw) if kw == "variable" => {
                    let start = self.pos;
                    self.bump();
                    match self.variable() {
                        Ok(v) => vars.push(v),
                        Err(()) => self.recover_block(start),
                    }
                }
                Tok::Ident(kw) if kw == "node" => {
                    let start = self.pos;
                    self.bump();
                    match self.node() {
                        Ok(n) => nodes.push(n),
                        Err(()) => self.recover_block(start),
                    }
                }
                _ => {
                    let _ = self.unexpected::<()>("`variable` or `node`");
                    while !matches!(self.peek(), Tok::Newline | Tok::Eof) {
                        self.bump();
                    }
                }
            }
        }
        (vars, nodes)
    }

    fn variable(&mut self) -> PResult<VarDecl> {
        let name = self.ident("a variable name")?;
        self.expect(Tok::LBrace)?;
        let mut levels = None;
        loop {
            self.skip_separators();
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) if kw == "levels" => {
                    if levels.is_some() {
                        return self.error("`levels` given twice");
                    }
                    self.bump();
                    levels = Some(self.idents_until_end("a level name")?);
                    self.end_statement()?;
                }
                _ => return self.unexpected("`levels` or `}`"),
            }
        }
        match levels {
            Some(levels) => Ok(VarDecl { name, levels }),
            None => {
                let span = name.span.clone();
                self.diags.push(ParseDiagnostic::new(
                    DiagnosticSeverity::Error,
                    format!("variable `{}` declares no levels", name.value),
                    span,
                ));
                Err(())
            }
        }
    }

    fn node(&mut self) -> PResult<NodeDecl> {
        let mut decl = NodeDecl { name: Some(self.ident("a node name")?), ..Default::default() };
        self.expect(Tok::LBrace)?;
        loop {
            self.skip_separators();
            let kw = match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) => kw,
                _ => return self.unexpected("a node statement"),
            };
            let kw_span = self.span();
            let twice = format!("`{kw}` given twice");
            match kw.as_str() {
                "kind" => {
                    if decl.kind.is_some() {
                        return self.error(twice);
                    }
                    self.bump();
                    decl.kind = Some(self.ident("a node kind")?);
                }
                "parents" => {
                    if decl.parents.is_some() {
                        return self.error(twice);
                    }
                    self.bump();
                    decl.parents = Some(self.idents_until_end("a parent name")?);
                }
                "tag" => {
                    self.bump();
                    let tags = self.idents_until_end("a tag")?;
                    if tags.is_empty() {
                        return self.error("`tag` needs at least one name");
                    }
                    decl.tags.extend(tags);
                }
                "cpd" => {
                    if decl.cpd.is_some() {
                        return self.error(twice);
                    }
                    self.bump();
                    let value = self.cpd()?;
                    decl.cpd = Some(Spanned { value, span: kw_span });
                }
                other => return self.error(format!("unknown node statement `{other}`")),
            }
            self.end_statement()?;
        }
        Ok(decl)
    }

    fn cpd(&mut self) -> PResult<CpdAst> {
        let form = self.ident("`table`, `noisy_or`, `max` or `utility`")?;
        match form.value.as_str() {
            "table" => Ok(CpdAst::Table(self.rows()?)),
            "utility" => Ok(CpdAst::Utility(self.rows()?)),
            "max" => Ok(CpdAst::Max),
            "noisy_or" => self.noisy(),
            other => {
                self.pos -= 1;
                self.error(format!("unknown distribution form `{other}`"))
            }
        }
    }

    fn rows(&mut self) -> PResult<Vec<Spanned<Vec<f64>>>> {
        self.expect(Tok::LBrace)?;
        let mut rows = Vec::new();
        loop {
            self.skip_separators();
            match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(rows);
                }
                Tok::Ident(kw) if kw == "row" => {
                    let span = self.bump().span.clone();
                    let values = self.numbers_until_end()?;
                    if values.is_empty() {
                        return self.error("`row` needs at least one number");
                    }
                    rows.push(Spanned { value: values, span });
                    self.end_statement()?;
                }
                _ => return self.unexpected("`row` or `}`"),
            }
        }
    }

    fn noisy(&mut self) -> PResult<CpdAst> {
        self.expect(Tok::LBrace)?;
        let mut leak = None;
        let mut convention = None;
        let mut entries = Vec::new();
        loop {
            self.skip_separators();
            let word = match self.peek().clone() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(CpdAst::Noisy { leak, convention, entries });
                }
                Tok::Ident(w) => w,
                _ => return self.unexpected("a cause entry, `leak` or `}`"),
            };
            let span = self.span();
            match word.as_str() {
                "leak" => {
                    if leak.is_some() {
                        return self.error("`leak` given twice");
                    }
                    self.bump();
                    let values = self.numbers_until_end()?;
                    if values.is_empty() {
                        return self.error("`leak` needs a probability");
                    }
                    leak = Some(Spanned { value: values, span });
                }
                "leak_convention" => {
                    self.bump();
                    convention = Some(self.ident("`included` or `excluded`")?);
                }
                _ => {
                    let cause = self.ident("a cause name")?;
                    let level = if *self.peek() == Tok::Colon {
                        self.bump();
                        Some(self.ident("a level name")?)
                    } else {
                        None
                    };
                    let values = self.numbers_until_end()?;
                    if values.is_empty() {
                        return self.error(format!("cause `{}` needs a probability", cause.value));
                    }
                    entries.push(NoisyEntry { cause, level, values, span });
                }
            }
            self.end_statement()?;
        }
    }
}

struct Builder<'a> {
    diags: Vec<ParseDiagnostic>,
    vars: BTreeMap<String, (VariableSpec, &'a VarDecl)>,
}

impl Builder<'_> {
    fn err(&mut self, span: &SourceSpan, message: impl Into<String>) {
        self.diags.push(ParseDiagnostic::new(DiagnosticSeverity::Error, message, span.clone()));
    }

    fn err_hint(&mut self, span: &SourceSpan, message: impl Into<String>, hint: impl Into<String>) {
        self.diags.push(ParseDiagnostic::new(DiagnosticSeverity::Error, message, span.clone()).with_hint(hint));
    }
}

pub(crate) fn parse_network(text: &str, file: &str) -> Result<Parsed<Network>, Vec<ParseDiagnostic>> {
    let (toks, mut diags) = lex(text, file);
    let mut parser = Parser { toks: &toks, pos: 0, diags: Vec::new() };
    let (var_decls, node_decls) = parser.file();
    diags.extend(parser.diags);
    if !diags.is_empty() {
        return Err(super::sorted(diags));
    }

    let mut b = Builder { diags: Vec::new(), vars: BTreeMap::new() };
    for decl in &var_decls {
        if b.vars.contains_key(&decl.name.value) {
            b.err(&decl.name.span, format!("variable `{}` declared twice", decl.name.value));
            continue;
        }
        match VariableSpec::new(decl.name.value.clone(), decl.levels.iter().map(|l| l.value.clone())) {
            Ok(spec) => {
                b.vars.insert(decl.name.value.clone(), (spec, decl));
            }
            Err(e) => b.err(&decl.name.span, e.to_string()),
        }
    }

    let mut node_spans: BTreeMap<String, SourceSpan> = BTreeMap::new();
    let mut kinds: BTreeMap<String, NodeKind> = BTreeMap::new();
    for decl in &node_decls {
        let name = decl.name.as_ref().expect("parsed node has a name");
        if node_spans.contains_key(&name.value) {
            b.err(&name.span, format!("node `{}` declared twice", name.value));
            continue;
        }
        node_spans.insert(name.value.clone(), name.span.clone());
        if let Some(kind) = &decl.kind {
            if let Ok(k) = kind.value.parse::<NodeKind>() {
                kinds.insert(name.value.clone(), k);
            }
        }
    }

    let mut nodes = Vec::new();
    let mut seen = BTreeSet::new();
    for decl in &node_decls {
        let name = decl.name.as_ref().expect("parsed node has a name");
        if !seen.insert(name.value.clone()) {
            continue;
        }
        if let Some(node) = build_node(&mut b, decl, name, &kinds) {
            nodes.push(node);
        }
    }

    for (name, (_, decl)) in &b.vars {
        if !node_spans.contains_key(name) {
            let span = decl.name.span.clone();
            b.diags.push(ParseDiagnostic::new(
                DiagnosticSeverity::Warning,
                format!("variable `{name}` has no node and is ignored"),
                span,
            ));
        }
    }

    let mut diags = b.diags;
    if diags.iter().any(|d| d.severity == DiagnosticSeverity::Error) {
        return Err(super::sorted(diags));
    }

    let network = Network::new(nodes).expect("duplicates rejected above");
    for v in validate(&network).violations {
        let span = match (&v.node, &v.kind) {
            (Some(n), _) => node_spans[n].clone(),
            (None, ViolationKind::Cycle { nodes }) | (None, ViolationKind::MultipleUtility { nodes }) => {
                node_spans[&nodes[0]].clone()
            }
            _ => SourceSpan { file: file.to_string(), line: 1, column: 1, length: 0, offset: 0 },
        };
        let severity = match v.severity {
            Severity::Error => DiagnosticSeverity::Error,
            Severity::Lint => DiagnosticSeverity::Lint,
        };
        let mut d = ParseDiagnostic::new(severity, v.to_string(), span);
        if let ViolationKind::OffPalette { .. } = v.kind {
            d = d.with_hint("assessed values are usually one of 0, .01, .05, .1, .2, .3, .5, .7, .8, .9, .95, .99, 1");
        }
        diags.push(d);
    }
    let diags = super::sorted(diags);
    if diags.iter().any(|d| d.severity == DiagnosticSeverity::Error) {
        Err(diags)
    } else {
        Ok(Parsed { value: network, diagnostics: diags })
    }
}

fn build_node(b: &mut Builder<'_>, decl: &NodeDecl, name: &Spanned<String>, kinds: &BTreeMap<String, NodeKind>) -> Option<Node> {
    let Some(kind_tok) = &decl.kind else {
        b.err_hint(&name.span, format!("node `{}` has no kind", name.value), "add `kind chance` (or deterministic, decision, utility)");
        return None;
    };
    let kind = match kind_tok.value.parse::<NodeKind>() {
        Ok(k) => k,
        Err(msg) => {
            b.err(&kind_tok.span, msg);
            return None;
        }
    };

    let variable = if kind == NodeKind::Utility {
        VariableSpec::utility(name.value.clone())
    } else {
        match b.vars.get(&name.value) {
            Some((spec, _)) => spec.clone(),
            None => {
                b.err_hint(
                    &name.span,
                    format!("node `{}` has no variable declaration", name.value),
                    format!("declare `variable {} {{ levels ... }}`", name.value),
                );
                return None;
            }
        }
    };

    let parents = decl.parents.clone().unwrap_or_default();
    let mut ok = true;
    let mut parent_specs = Vec::new();
    for p in &parents {
        match kinds.get(&p.value) {
            None => {
                b.err(&p.span, format!("unknown parent `{}`", p.value));
                ok = false;
            }
            Some(NodeKind::Utility) => {
                b.err(&p.span, format!("utility node `{}` cannot be a parent", p.value));
                ok = false;
            }
            Some(_) => match b.vars.get(&p.value) {
                Some((spec, _)) => parent_specs.push(spec.clone()),
                None => ok = false, // reported on the parent's own node
            },
        }
    }

    let cpd = match (&decl.cpd, kind) {
        (None, NodeKind::Decision) => Cpd::None,
        (Some(c), NodeKind::Decision) => {
            b.err(&c.span, format!("decision node `{}` cannot carry a distribution", name.value));
            return None;
        }
        (None, _) => {
            b.err(&name.span, format!("node `{}` has no `cpd`", name.value));
            return None;
        }
        (Some(_), _) if !ok => return None,
        (Some(c), _) => build_cpd(b, c, kind, &variable, &parent_specs)?,
    };
    if !ok {
        return None;
    }

    let mut node = Node::new(variable, kind, parents.into_iter().map(|p| p.value).collect(), cpd);
    node.tags = decl.tags.iter().map(|t| t.value.clone()).collect();
    Some(node)
}

fn build_cpd(b: &mut Builder<'_>, cpd: &Spanned<CpdAst>, kind: NodeKind, child: &VariableSpec, parents: &[VariableSpec]) -> Option<Cpd> {
    let parent_cards: Vec<usize> = parents.iter().map(VariableSpec::cardinality).collect();
    let rows_needed: usize = parent_cards.iter().product();
    match (&cpd.value, kind) {
        (CpdAst::Utility(rows), NodeKind::Utility) => {
            let values: Vec<f64> = rows.iter().flat_map(|r| r.value.iter().copied()).collect();
            if values.len() != rows_needed {
                b.err(&cpd.span, format!("utility table has {} values, parents require {rows_needed}", values.len()));
                return None;
            }
            Some(Cpd::Utility(UtilityTable::new(values)))
        }
        (_, NodeKind::Utility) | (CpdAst::Utility(_), _) => {
            b.err(&cpd.span, "`utility` tables belong to utility nodes only");
            None
        }
        (CpdAst::Max, _) => Some(Cpd::Max),
        (CpdAst::Table(rows), _) => {
            let mut ok = true;
            for row in rows {
                if row.value.len() != child.cardinality() {
                    b.err(
                        &row.span,
                        format!("row has {} entries, `{}` has {} levels", row.value.len(), child.name(), child.cardinality()),
                    );
                    ok = false;
                }
            }
            if rows.len() != rows_needed {
                b.err_hint(
                    &cpd.span,
                    format!("table has {} rows, parents require {rows_needed}", rows.len()),
                    "one row per parent assignment, last parent varying fastest",
                );
                ok = false;
            }
            if !ok {
                return None;
            }
            let values: Vec<Vec<f64>> = rows.iter().map(|r| r.value.clone()).collect();
            let mut cpt = Cpt::from_rows(parent_cards, &values).ok()?;
            cpt.renormalize_within_tolerance();
            Some(Cpd::Table(cpt))
        }
        (CpdAst::Noisy { leak, convention, entries }, _) => build_noisy(b, cpd, leak, convention, entries, child, parents),
    }
}

fn build_noisy(
    b: &mut Builder<'_>,
    cpd: &Spanned<CpdAst>,
    leak: &Option<Spanned<Vec<f64>>>,
    convention: &Option<Spanned<String>>,
    entries: &[NoisyEntry],
    child: &VariableSpec,
    parents: &[VariableSpec],
) -> Option<Cpd> {
    let card = child.cardinality();
    let convention = match convention {
        None => LeakConvention::Included,
        Some(c) => match c.value.as_str() {
            "included" => LeakConvention::Included,
            "excluded" => LeakConvention::Excluded,
            other => {
                b.err(&c.span, format!("unknown leak convention `{other}`"));
                return None;
            }
        },
    };

    let mut ok = true;
    let mut by_cause: BTreeMap<(usize, usize), &NoisyEntry> = BTreeMap::new();
    for e in entries {
        let Some(pi) = parents.iter().position(|p| p.name() == e.cause.value) else {
            b.err(&e.cause.span, format!("`{}` is not a parent of `{}`", e.cause.value, child.name()));
            ok = false;
            continue;
        };
        let parent = &parents[pi];
        let level = match &e.level {
            Some(l) => match parent.level_index(&l.value) {
                Some(0) => {
                    b.err(&l.span, format!("level `{}` is the absent level of `{}` and produces nothing", l.value, parent.name()));
                    ok = false;
                    continue;
                }
                Some(i) => i,
                None => {
                    b.err(&l.span, format!("`{}` has no level `{}`", parent.name(), l.value));
                    ok = false;
                    continue;
                }
            },
            None if parent.cardinality() == 2 => 1,
            None => {
                b.err_hint(
                    &e.cause.span,
                    format!("`{}` has {} levels; say which one this entry is for", parent.name(), parent.cardinality()),
                    format!("write `{}:<level> ...`", parent.name()),
                );
                ok = false;
                continue;
            }
        };
        if by_cause.insert((pi, level), e).is_some() {
            b.err(&e.span, format!("duplicate entry for `{}` level {level}", parent.name()));
            ok = false;
        }
    }
    for (pi, p) in parents.iter().enumerate() {
        for level in 1..p.cardinality() {
            if !by_cause.contains_key(&(pi, level)) {
                b.err(&cpd.span, format!("no entry for `{}` at level `{}`", p.name(), p.levels()[level]));
                ok = false;
            }
        }
    }
    if !ok {
        return None;
    }

    let plain = card == 2
        && parents.iter().all(|p| p.cardinality() == 2)
        && entries.iter().all(|e| e.level.is_none() && e.values.len() == 1)
        && leak.as_ref().is_none_or(|l| l.value.len() == 1);
    if plain {
        let causes = parents
            .iter()
            .enumerate()
            .map(|(pi, p)| (p.name().to_string(), by_cause[&(pi, 1)].values[0]))
            .collect::<Vec<_>>();
        let leak = leak.as_ref().map_or(0.0, |l| l.value[0]);
        return Some(Cpd::NoisyOr(NoisyOrSpec::leaky(causes, leak).with_convention(convention)));
    }

    let mut dist = |values: &[f64], span: &SourceSpan| -> Option<Vec<f64>> {
        match values.len() {
            1 if card == 2 => Some(vec![1.0 - values[0], values[0]]),
            n if n == card => Some(values.to_vec()),
            n => {
                b.err(span, format!("expected {card} child-level probabilities (or one for a binary child), found {n}"));
                None
            }
        }
    };
    let mut causes = Vec::with_capacity(parents.len());
    for (pi, p) in parents.iter().enumerate() {
        let mut active = Vec::new();
        for level in 1..p.cardinality() {
            let e = by_cause[&(pi, level)];
            active.push(dist(&e.values, &e.span)?);
        }
        causes.push(MaxCause::new(p.name(), p.levels().iter().cloned(), active));
    }
    let leak = match leak {
        Some(l) => Some(dist(&l.value, &l.span)?),
        None => None,
    };
    Some(Cpd::NoisyMax(NoisyMaxSpec::new(card, causes, leak).with_convention(convention)))
}
