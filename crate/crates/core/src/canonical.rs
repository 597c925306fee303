//! Noisy-OR family parameterizations and their compilation to full tables.
//!
//! Each cause is assumed to act independently. A binary effect follows the
//! noisy-OR rule `1 - prod(1 - p_i)`, optionally with a leak for causes not
//! modelled explicitly. Multi-level effects use noisy-MAX: every active cause
//! draws a child level on its own and the realized level is the maximum,
//! which gives `P(child <= k) = prod_j P_j(child <= k)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Cpt, ModelError, ROW_SUM_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonicalError {
    #[error("probability {value} for {what} lies outside [0, 1]")]
    OutOfRange { what: String, value: f64 },
    #[error("leak must be below 1, got {0}")]
    LeakTooLarge(f64),
    #[error("plain noisy-OR requires a zero leak, got {0}")]
    LeakNotZero(f64),
    #[error("cause `{cause}` has p = {p} below the leak {leak}; the leak-inclusive assessment must be at least the leak")]
    BelowLeak { cause: String, p: f64, leak: f64 },
    #[error("distribution for {what} sums to {sum}")]
    NotNormalized { what: String, sum: f64 },
    #[error("assessment for {what} is incompatible with the leak distribution")]
    IncompatibleWithLeak { what: String },
    #[error("expected {expected} {what}, found {found}")]
    Shape { what: &'static str, expected: usize, found: usize },
    #[error("cardinalities must be at least 2")]
    Cardinality,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// How assessed single-cause probabilities relate to the leak.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeakConvention {
    /// Each assessed value is the probability of the effect given that cause
    /// alone, background causes included. The leak is divided back out.
    #[default]
    Included,
    /// Assessed values exclude background causes; the leak acts as one more
    /// independent cause.
    Excluded,
}

/// Binary effect with binary causes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyOrSpec {
    /// `(parent name, sufficiency probability)` in parent order.
    pub causes: Vec<(String, f64)>,
    pub leak: f64,
    pub convention: LeakConvention,
}

impl NoisyOrSpec {
    pub fn plain<S: Into<String>>(causes: impl IntoIterator<Item = (S, f64)>) -> Self {
        Self::leaky(causes, 0.0)
    }

    pub fn leaky<S: Into<String>>(causes: impl IntoIterator<Item = (S, f64)>, leak: f64) -> Self {
        Self {
            causes: causes.into_iter().map(|(n, p)| (n.into(), p)).collect(),
            leak,
            convention: LeakConvention::Included,
        }
    }

    pub fn with_convention(mut self, convention: LeakConvention) -> Self {
        self.convention = convention;
        self
    }

    pub fn check(&self) -> Result<(), CanonicalError> {
        check_unit("leak", self.leak)?;
        if self.leak >= 1.0 {
            return Err(CanonicalError::LeakTooLarge(self.leak));
        }
        for (cause, p) in &self.causes {
            check_unit(cause, *p)?;
            if self.convention == LeakConvention::Included && *p < self.leak {
                return Err(CanonicalError::BelowLeak { cause: cause.clone(), p: *p, leak: self.leak });
            }
        }
        Ok(())
    }

    fn present_mask(&self, present: &[bool]) -> Result<(), CanonicalError> {
        if present.len() != self.causes.len() {
            return Err(CanonicalError::Shape {
                what: "cause flags",
                expected: self.causes.len(),
                found: present.len(),
            });
        }
        Ok(())
    }
}

fn check_unit(what: &str, value: f64) -> Result<(), CanonicalError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(CanonicalError::OutOfRange { what: what.to_string(), value });
    }
    Ok(())
}

/// `1 - prod_{i present} (1 - p_i)` for a gate without leak.
pub fn expand_noisy_or(spec: &NoisyOrSpec, present: &[bool]) -> Result<f64, CanonicalError> {
    if spec.leak != 0.0 {
        return Err(CanonicalError::LeakNotZero(spec.leak));
    }
    spec.check()?;
    spec.present_mask(present)?;
    let absent: f64 = spec
        .causes
        .iter()
        .zip(present)
        .filter(|(_, &on)| on)
        .map(|((_, p), _)| 1.0 - p)
        .product();
    Ok(1.0 - absent)
}

/// Leaky gate: `1 - (1 - p0) * prod_{i present} (1 - p_i) / (1 - p0)` under
/// the inclusive convention, `1 - (1 - p0) * prod (1 - p_i)` otherwise.
/// With no cause present this is `p0`; with one cause it is exactly `p_i`.
pub fn expand_leaky_noisy_or(spec: &NoisyOrSpec, present: &[bool]) -> Result<f64, CanonicalError> {
    spec.check()?;
    spec.present_mask(present)?;
    let keep = 1.0 - spec.leak;
    let factor = |p: f64| match spec.convention {
        LeakConvention::Included => (1.0 - p) / keep,
        LeakConvention::Excluded => 1.0 - p,
    };
    let absent: f64 = spec
        .causes
        .iter()
        .zip(present)
        .filter(|(_, &on)| on)
        .map(|((_, p), _)| factor(*p))
        .product();
    Ok(1.0 - keep * absent)
}

/// One parent of a noisy-MAX node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxCause {
    pub parent: String,
    /// Names of the parent's levels, level 0 first.
    pub levels: Vec<String>,
    /// `active[l - 1]` is the child-level distribution produced by this
    /// cause at parent level `l` acting alone. Level 0 produces nothing.
    pub active: Vec<Vec<f64>>,
}

impl MaxCause {
    pub fn new<S: Into<String>>(parent: impl Into<String>, levels: impl IntoIterator<Item = S>, active: Vec<Vec<f64>>) -> Self {
        Self { parent: parent.into(), levels: levels.into_iter().map(Into::into).collect(), active }
    }

    pub fn cardinality(&self) -> usize {
        self.levels.len()
    }
}

/// Ordered multi-level effect; child level 0 is "none".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyMaxSpec {
    pub child_card: usize,
    pub causes: Vec<MaxCause>,
    /// Background distribution; `None` means degenerate at level 0.
    pub leak: Option<Vec<f64>>,
    pub convention: LeakConvention,
}

impl NoisyMaxSpec {
    pub fn new(child_card: usize, causes: Vec<MaxCause>, leak: Option<Vec<f64>>) -> Self {
        Self { child_card, causes, leak, convention: LeakConvention::Included }
    }

    pub fn with_convention(mut self, convention: LeakConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Every assessed distribution as `(parent, parent level name, dist)`.
    pub fn assessed_distributions(&self) -> impl Iterator<Item = (&str, &str, &[f64])> {
        self.causes.iter().flat_map(|c| {
            c.active
                .iter()
                .enumerate()
                .map(move |(l, d)| (c.parent.as_str(), c.levels[l + 1].as_str(), d.as_slice()))
        })
    }

    pub fn check(&self) -> Result<(), CanonicalError> {
        self.pure_cdfs().map(|_| ())
    }

    fn check_dist(&self, what: String, dist: &[f64]) -> Result<(), CanonicalError> {
        if dist.len() != self.child_card {
            return Err(CanonicalError::Shape {
                what: "child-level probabilities",
                expected: self.child_card,
                found: dist.len(),
            });
        }
        for &p in dist {
            check_unit(&what, p)?;
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(CanonicalError::NotNormalized { what, sum });
        }
        Ok(())
    }

    fn leak_cdf(&self) -> Vec<f64> {
        match &self.leak {
            Some(d) => cdf(d),
            None => vec![1.0; self.child_card],
        }
    }

    /// Per-cause, per-active-level cumulative distributions with the leak
    /// divided out when assessments include it.
    fn pure_cdfs(&self) -> Result<Vec<Vec<Vec<f64>>>, CanonicalError> {
        if self.child_card < 2 {
            return Err(CanonicalError::Cardinality);
        }
        if let Some(leak) = &self.leak {
            self.check_dist("leak".into(), leak)?;
            if leak[0] <= 0.0 {
                return Err(CanonicalError::LeakTooLarge(1.0 - leak[0]));
            }
        }
        let leak_cdf = self.leak_cdf();
        self.causes
            .iter()
            .map(|cause| {
                if cause.levels.len() < 2 {
                    return Err(CanonicalError::Cardinality);
                }
                if cause.active.len() != cause.levels.len() - 1 {
                    return Err(CanonicalError::Shape {
                        what: "active-level distributions",
                        expected: cause.levels.len() - 1,
                        found: cause.active.len(),
                    });
                }
                cause
                    .active
                    .iter()
                    .enumerate()
                    .map(|(l, dist)| {
                        let what = format!("{}:{}", cause.parent, cause.levels[l + 1]);
                        self.check_dist(what.clone(), dist)?;
                        let assessed = cdf(dist);
                        match self.convention {
                            LeakConvention::Excluded => Ok(assessed),
                            LeakConvention::Included => divide_leak(&assessed, &leak_cdf, &what),
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

fn cdf(dist: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = dist
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

fn divide_leak(assessed: &[f64], leak: &[f64], what: &str) -> Result<Vec<f64>, CanonicalError> {
    let tol = ROW_SUM_TOLERANCE;
    let mut out = Vec::with_capacity(assessed.len());
    let mut prev = 0.0;
    for (&a, &l) in assessed.iter().zip(leak) {
        let r = if l > 0.0 {
            a / l
        } else if a <= tol {
            0.0
        } else {
            return Err(CanonicalError::IncompatibleWithLeak { what: what.to_string() });
        };
        if r > 1.0 + tol || r + tol < prev {
            return Err(CanonicalError::IncompatibleWithLeak { what: what.to_string() });
        }
        let r = r.min(1.0);
        out.push(r);
        prev = r;
    }
    Ok(out)
}

fn pdf_from_cdf(cdf: &[f64]) -> Vec<f64> {
    let mut prev = 0.0;
    cdf.iter()
        .map(|&c| {
            let p = (c - prev).max(0.0);
            prev = c;
            p
        })
        .collect()
}

/// Distribution of the child for one parent assignment.
pub fn expand_noisy_max(spec: &NoisyMaxSpec, assignment: &[usize]) -> Result<Vec<f64>, CanonicalError> {
    let pure = spec.pure_cdfs()?;
    max_row(spec, &pure, assignment)
}

fn max_row(spec: &NoisyMaxSpec, pure: &[Vec<Vec<f64>>], assignment: &[usize]) -> Result<Vec<f64>, CanonicalError> {
    if assignment.len() != spec.causes.len() {
        return Err(CanonicalError::Shape {
            what: "parent levels",
            expected: spec.causes.len(),
            found: assignment.len(),
        });
    }
    let mut acc = spec.leak_cdf();
    for ((cause, cdfs), &level) in spec.causes.iter().zip(pure).zip(assignment) {
        if level >= cause.cardinality() {
            return Err(CanonicalError::Shape {
                what: "parent level index bound",
                expected: cause.cardinality(),
                found: level + 1,
            });
        }
        if level > 0 {
            for (a, c) in acc.iter_mut().zip(&cdfs[level - 1]) {
                *a *= c;
            }
        }
    }
    Ok(pdf_from_cdf(&acc))
}

/// A compact parameterization that can be expanded into a full table.
pub trait CanonicalModel {
    fn compile(&self, parent_cards: &[usize]) -> Result<Cpt, CanonicalError>;
    fn has_leak(&self) -> bool;
}

impl CanonicalModel for NoisyOrSpec {
    fn compile(&self, parent_cards: &[usize]) -> Result<Cpt, CanonicalError> {
        if parent_cards.len() != self.causes.len() {
            return Err(CanonicalError::Shape { what: "parents", expected: self.causes.len(), found: parent_cards.len() });
        }
        if let Some(&bad) = parent_cards.iter().find(|&&c| c != 2) {
            return Err(CanonicalError::Shape { what: "levels on a noisy-OR cause", expected: 2, found: bad });
        }
        let n = self.causes.len();
        let mut probs = Vec::with_capacity(2 << n);
        for row in 0..(1usize << n) {
            // last parent fastest: bit (n - 1 - i) is cause i
            let present: Vec<bool> = (0..n).map(|i| row >> (n - 1 - i) & 1 == 1).collect();
            let p = expand_leaky_noisy_or(self, &present)?;
            probs.extend([1.0 - p, p]);
        }
        Ok(Cpt::new(parent_cards.to_vec(), 2, probs)?)
    }

    fn has_leak(&self) -> bool {
        self.leak != 0.0
    }
}

impl CanonicalModel for NoisyMaxSpec {
    fn compile(&self, parent_cards: &[usize]) -> Result<Cpt, CanonicalError> {
        let declared: Vec<usize> = self.causes.iter().map(MaxCause::cardinality).collect();
        if declared != parent_cards {
            return Err(CanonicalError::Shape {
                what: "parent cardinalities",
                expected: declared.iter().product(),
                found: parent_cards.iter().product(),
            });
        }
        let pure = self.pure_cdfs()?;
        let rows: usize = parent_cards.iter().product();
        let mut assignment = vec![0usize; parent_cards.len()];
        let mut probs = Vec::with_capacity(rows * self.child_card);
        for _ in 0..rows {
            probs.extend(max_row(self, &pure, &assignment)?);
            for pos in (0..assignment.len()).rev() {
                assignment[pos] += 1;
                if assignment[pos] < parent_cards[pos] {
                    break;
                }
                assignment[pos] = 0;
            }
        }
        Ok(Cpt::new(parent_cards.to_vec(), self.child_card, probs)?)
    }

    fn has_leak(&self) -> bool {
        self.leak.as_ref().is_some_and(|d| d[0] != 1.0)
    }
}

pub fn compile_to_cpt<S: CanonicalModel + ?Sized>(spec: &S, parent_cards: &[usize]) -> Result<Cpt, CanonicalError> {
    spec.compile(parent_cards)
}

/// Free parameters of a full table versus its noisy-OR/MAX form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ParameterCounts {
    pub full: usize,
    pub canonical: usize,
}

/// `full = prod(parent cards) * (child - 1)`;
/// `canonical = sum_j (card_j - 1) * (child - 1)`, plus `child - 1` for a leak.
pub fn parameter_counts(parent_cards: &[usize], child_card: usize, leak: bool) -> Result<ParameterCounts, CanonicalError> {
    if child_card < 2 || parent_cards.iter().any(|&c| c < 2) {
        return Err(CanonicalError::Cardinality);
    }
    let per = child_card - 1;
    let full = parent_cards.iter().product::<usize>() * per;
    let canonical = parent_cards.iter().map(|c| (c - 1) * per).sum::<usize>() + if leak { per } else { 0 };
    Ok(ParameterCounts { full, canonical })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CptDiff {
    pub max_abs_diff: f64,
    /// Population standard deviation of the signed element differences.
    pub stdev: f64,
}

pub fn diff_cpts(a: &Cpt, b: &Cpt) -> Result<CptDiff, CanonicalError> {
    if a.parent_cards() != b.parent_cards() || a.child_card() != b.child_card() {
        return Err(CanonicalError::Shape {
            what: "table entries",
            expected: a.probabilities().len(),
            found: b.probabilities().len(),
        });
    }
    let diffs: Vec<f64> = a.probabilities().iter().zip(b.probabilities()).map(|(x, y)| x - y).collect();
    let n = diffs.len().max(1) as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let max_abs_diff = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    Ok(CptDiff { max_abs_diff, stdev: var.sqrt() })
}
