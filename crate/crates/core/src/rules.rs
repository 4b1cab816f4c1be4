//! Prototype construction, dot-product similarity, and the NOTA-aware
//! classification rules, together with executable checkers for the three
//! embedding-space constraints that characterize perfect classification.
//!
//! A class is represented by the arithmetic mean of its support vectors; the
//! query is assigned to the highest-scoring option among the target
//! prototypes and the rule's NOTA score:
//!
//! - `NoNota`: no NOTA option (the plain nearest-prototype rule);
//! - `Threshold`: a single learned scalar θ is the NOTA logit for every query;
//! - `Nav`: the NOTA logit is the dot product with one learned vector, an
//!   individual threshold per query;
//! - `Mnav`: several learned vectors; the NOTA logit is the maximum dot
//!   product over them.
//!
//! Ties are broken in favor of target relations over NOTA, and among targets
//! toward the earliest in episode order. The constraint checkers use strict
//! inequalities with a configurable slack (default 0).

use serde::{Deserialize, Serialize};

use crate::corpus::LabelId;
use crate::error::{Error, Result};
use crate::util::dot_unchecked;

/// NOTA decision mechanism attached to a trained encoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case")]
pub enum DecisionRule {
    NoNota,
    Threshold { theta: f64 },
    Nav { vector: Vec<f64> },
    Mnav { vectors: Vec<Vec<f64>> },
}

impl DecisionRule {
    pub fn variant_name(&self) -> &'static str {
        match self {
            DecisionRule::NoNota => "no-nota",
            DecisionRule::Threshold { .. } => "threshold",
            DecisionRule::Nav { .. } => "nav",
            DecisionRule::Mnav { .. } => "mnav",
        }
    }

    /// Embedding dimension required of queries/prototypes, when the rule
    /// constrains one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            DecisionRule::NoNota | DecisionRule::Threshold { .. } => None,
            DecisionRule::Nav { vector } => Some(vector.len()),
            DecisionRule::Mnav { vectors } => vectors.first().map(|v| v.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DecisionRule::NoNota => Ok(()),
            DecisionRule::Threshold { theta } => {
                if theta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Numerical("threshold is not finite".into()))
                }
            }
            DecisionRule::Nav { vector } => validate_vectors(std::slice::from_ref(vector)),
            DecisionRule::Mnav { vectors } => {
                if vectors.is_empty() {
                    return Err(Error::ConstraintCheck(
                        "MNAV requires at least one NOTA vector".into(),
                    ));
                }
                validate_vectors(vectors)
            }
        }
    }

    /// The NOTA logit for a query, or `None` for the `NoNota` rule. For MNAV
    /// also returns which vector won the max.
    pub fn nota_logit(&self, query: &[f64]) -> Result<Option<(f64, usize)>> {
        match self {
            DecisionRule::NoNota => Ok(None),
            DecisionRule::Threshold { theta } => Ok(Some((*theta, 0))),
            DecisionRule::Nav { vector } => {
                Ok(Some((similarity(query, vector)?, 0)))
            }
            DecisionRule::Mnav { vectors } => {
                let mut best = (f64::NEG_INFINITY, 0usize);
                for (i, v) in vectors.iter().enumerate() {
                    let s = similarity(query, v)?;
                    if s > best.0 {
                        best = (s, i);
                    }
                }
                Ok(Some(best))
            }
        }
    }
}

fn validate_vectors(vectors: &[Vec<f64>]) -> Result<()> {
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numerical("NOTA vector has non-finite entries".into()));
        }
    }
    Ok(())
}

/// Arithmetic mean of the support vectors.
pub fn prototype(support: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = support.first().ok_or(Error::EmptySupport)?;
    let dim = first.len();
    let mut mean = vec![0.0; dim];
    for v in support {
        if v.len() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: v.len(),
            });
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    let k = support.len() as f64;
    for m in &mut mean {
        *m /= k;
    }
    Ok(mean)
}

/// Dot-product similarity.
pub fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(dot_unchecked(a, b))
}

/// Scored episode: one logit per target relation plus (rule permitting) NOTA.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredEpisode {
    /// `(label, logit)` pairs: targets in episode order, then NOTA if scored.
    pub logits: Vec<(LabelId, f64)>,
    pub prediction: LabelId,
}

/// Argmax with the documented tie-break: earliest target wins among equal
/// targets; NOTA wins only when strictly greater than every target logit.
/// Returns `None` for NOTA.
pub fn argmax_prediction(target_logits: &[f64], nota_logit: Option<f64>) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &logit) in target_logits.iter().enumerate() {
        match best {
            Some(b) if target_logits[b] >= logit => {}
            _ => best = Some(j),
        }
    }
    match (best, nota_logit) {
        (Some(b), Some(nota)) if nota > target_logits[b] => None,
        (None, Some(_)) => None,
        (best, _) => best,
    }
}

/// Scores a query against the episode's target prototypes under `rule`.
pub fn score_episode(
    query: &[f64],
    targets: &[(String, Vec<f64>)],
    rule: &DecisionRule,
) -> Result<ScoredEpisode> {
    let mut target_logits = Vec::with_capacity(targets.len());
    let mut logits = Vec::with_capacity(targets.len() + 1);
    for (label, proto) in targets {
        let s = similarity(query, proto)?;
        target_logits.push(s);
        logits.push((LabelId::Named(label.clone()), s));
    }
    let nota = rule.nota_logit(query)?;
    if let Some((score, _)) = nota {
        logits.push((LabelId::Nota, score));
    }
    let prediction = match argmax_prediction(&target_logits, nota.map(|(s, _)| s)) {
        Some(j) => LabelId::Named(targets[j].0.clone()),
        None => LabelId::Nota,
    };
    Ok(ScoredEpisode {
        logits,
        prediction,
    })
}

/// An instance embedded for constraint checking or exhaustive evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledEmbedding {
    pub id: String,
    pub label: String,
    pub vector: Vec<f64>,
}

/// A constraint violation: the episode fragment that breaks the inequality
/// and the (non-positive) margin by which it fails.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub query_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub same_support: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other_support: Option<Vec<String>>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub holds: bool,
    /// First counterexample found, in deterministic enumeration order.
    pub witnesses: Vec<Witness>,
}

impl CheckReport {
    fn holds() -> CheckReport {
        CheckReport {
            holds: true,
            witnesses: Vec::new(),
        }
    }

    fn violated(witness: Witness) -> CheckReport {
        CheckReport {
            holds: false,
            witnesses: vec![witness],
        }
    }
}

/// Grouped view of a labeled embedding set plus the K-subset machinery shared
/// by the three checkers.
struct ClassView<'a> {
    items: &'a [LabeledEmbedding],
    /// (class label, member indices), classes sorted by label.
    classes: Vec<(&'a str, Vec<usize>)>,
    /// Pairwise dot products.
    gram: Vec<Vec<f64>>,
}

impl<'a> ClassView<'a> {
    fn new(items: &'a [LabeledEmbedding], k: usize) -> Result<ClassView<'a>> {
        if items.is_empty() {
            return Err(Error::ConstraintCheck("empty embedding set".into()));
        }
        let dim = items[0].vector.len();
        for item in items {
            if item.vector.len() != dim {
                return Err(Error::DimMismatch {
                    left: dim,
                    right: item.vector.len(),
                });
            }
        }
        let mut classes: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
        for (i, item) in items.iter().enumerate() {
            classes.entry(item.label.as_str()).or_default().push(i);
        }
        for (label, members) in &classes {
            if members.len() < k + 1 {
                return Err(Error::ConstraintCheck(format!(
                    "class {label} has {} members; need at least K+1={} to form a \
                     same-class support excluding the query",
                    members.len(),
                    k + 1
                )));
            }
        }
        let gram = items
            .iter()
            .map(|a| items.iter().map(|b| dot_unchecked(&a.vector, &b.vector)).collect())
            .collect();
        Ok(ClassView {
            items,
            classes: classes.into_iter().collect(),
            gram,
        })
    }

    /// Mean similarity between item `q` and the support combo = dot with the
    /// combo's prototype.
    fn proto_sim(&self, q: usize, combo: &[usize]) -> f64 {
        combo.iter().map(|&m| self.gram[q][m]).sum::<f64>() / combo.len() as f64
    }

    fn ids(&self, combo: &[usize]) -> Vec<String> {
        combo.iter().map(|&m| self.items[m].id.clone()).collect()
    }
}

/// Visits all K-subsets of `pool`, skipping any that contain `exclude`.
fn for_each_combo(
    pool: &[usize],
    k: usize,
    exclude: Option<usize>,
    mut visit: impl FnMut(&[usize]) -> bool,
) -> bool {
    let filtered: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&i| Some(i) != exclude)
        .collect();
    if filtered.len() < k {
        return true;
    }
    let mut picks: Vec<usize> = (0..k).collect();
    let mut scratch = vec![0usize; k];
    loop {
        for (s, &p) in scratch.iter_mut().zip(&picks) {
            *s = filtered[p];
        }
        if !visit(&scratch) {
            return false;
        }
        // Advance to the next lexicographic combination.
        let mut i = k;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if picks[i] != i + filtered.len() - k {
                break;
            }
        }
        if picks[i] == i + filtered.len() - k {
            return true;
        }
        picks[i] += 1;
        for j in i + 1..k {
            picks[j] = picks[j - 1] + 1;
        }
    }
}

/// Middle term of the extended inequalities: a global scalar, or the
/// query-dependent NOTA similarity for NAV/MNAV vector sets.
enum MiddleTerm<'a> {
    Theta(f64),
    NotaVectors(&'a [Vec<f64>]),
}

impl MiddleTerm<'_> {
    fn value_for(&self, query: &[f64]) -> f64 {
        match self {
            MiddleTerm::Theta(theta) => *theta,
            MiddleTerm::NotaVectors(vectors) => vectors
                .iter()
                .map(|v| dot_unchecked(query, v))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// Exhaustively tests `sim(q, σ_same) > sim(q, σ_other)` over every query,
/// same-class K-support excluding the query, and other-class K-support.
/// A single-class set holds vacuously.
pub fn check_inequality_1(items: &[LabeledEmbedding], k: usize, eps: f64) -> Result<CheckReport> {
    let view = ClassView::new(items, k)?;
    for (ci, (_, members)) in view.classes.iter().enumerate() {
        for &q in members {
            let mut report = None;
            for_each_combo(members, k, Some(q), |same| {
                let lhs = view.proto_sim(q, same);
                for (cj, (_, others)) in view.classes.iter().enumerate() {
                    if cj == ci {
                        continue;
                    }
                    let mut found = true;
                    for_each_combo(others, k, None, |other| {
                        let rhs = view.proto_sim(q, other);
                        if lhs - rhs <= eps {
                            report = Some(Witness {
                                query_id: view.items[q].id.clone(),
                                same_support: Some(view.ids(same)),
                                other_support: Some(view.ids(other)),
                                margin: lhs - rhs,
                            });
                            found = false;
                        }
                        found
                    });
                    if !found {
                        return false;
                    }
                }
                true
            });
            if let Some(witness) = report {
                return Ok(CheckReport::violated(witness));
            }
        }
    }
    Ok(CheckReport::holds())
}

fn check_with_middle(
    items: &[LabeledEmbedding],
    k: usize,
    middle: MiddleTerm<'_>,
    eps: f64,
) -> Result<CheckReport> {
    let view = ClassView::new(items, k)?;
    for (ci, (_, members)) in view.classes.iter().enumerate() {
        for &q in members {
            let mid = middle.value_for(&view.items[q].vector);
            // Left side: every same-class support must beat the NOTA score.
            let mut witness = None;
            for_each_combo(members, k, Some(q), |same| {
                let lhs = view.proto_sim(q, same);
                if lhs - mid <= eps {
                    witness = Some(Witness {
                        query_id: view.items[q].id.clone(),
                        same_support: Some(view.ids(same)),
                        other_support: None,
                        margin: lhs - mid,
                    });
                    return false;
                }
                true
            });
            if let Some(w) = witness {
                return Ok(CheckReport::violated(w));
            }
            // Right side: the NOTA score must beat every other-class support.
            for (cj, (_, others)) in view.classes.iter().enumerate() {
                if cj == ci {
                    continue;
                }
                let mut witness = None;
                for_each_combo(others, k, None, |other| {
                    let rhs = view.proto_sim(q, other);
                    if mid - rhs <= eps {
                        witness = Some(Witness {
                            query_id: view.items[q].id.clone(),
                            same_support: None,
                            other_support: Some(view.ids(other)),
                            margin: mid - rhs,
                        });
                        return false;
                    }
                    true
                });
                if let Some(w) = witness {
                    return Ok(CheckReport::violated(w));
                }
            }
        }
    }
    Ok(CheckReport::holds())
}

/// Threshold constraint: `sim(q, σ_same) > θ > sim(q, σ_other)` for every
/// constructible (query, same-support, other-support).
pub fn check_inequality_2(
    items: &[LabeledEmbedding],
    k: usize,
    theta: f64,
    eps: f64,
) -> Result<CheckReport> {
    check_with_middle(items, k, MiddleTerm::Theta(theta), eps)
}

/// NAV/MNAV constraint: as inequality 2 with the query-dependent NOTA
/// similarity `max_i q·v_i` as the middle term. One vector = plain NAV.
pub fn check_inequality_3(
    items: &[LabeledEmbedding],
    k: usize,
    nota_vectors: &[Vec<f64>],
    eps: f64,
) -> Result<CheckReport> {
    if nota_vectors.is_empty() {
        return Err(Error::ConstraintCheck(
            "inequality 3 needs at least one NOTA vector".into(),
        ));
    }
    check_with_middle(items, k, MiddleTerm::NotaVectors(nota_vectors), eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, label: &str, vector: Vec<f64>) -> LabeledEmbedding {
        LabeledEmbedding {
            id: id.to_string(),
            label: label.to_string(),
            vector,
        }
    }

    #[test]
    fn prototype_mean() {
        let p = prototype(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(p, vec![0.5, 1.0]);
        let single = prototype(&[vec![3.0, 4.0]]).unwrap();
        assert_eq!(single, vec![3.0, 4.0]);
        let same = prototype(&vec![vec![2.0, 2.0]; 5]).unwrap();
        assert_eq!(same, vec![2.0, 2.0]);
        assert!(matches!(prototype(&[]), Err(Error::EmptySupport)));
        assert!(prototype(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn similarity_dot() {
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(similarity(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        assert!(similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn score_no_nota_picks_nearest() {
        let targets = vec![
            ("c1".to_string(), vec![1.0, 0.0]),
            ("c2".to_string(), vec![0.0, 1.0]),
        ];
        let scored = score_episode(&[0.9, 0.2], &targets, &DecisionRule::NoNota).unwrap();
        assert_eq!(scored.prediction, LabelId::Named("c1".into()));
        assert_eq!(scored.logits.len(), 2);
    }

    #[test]
    fn score_threshold_rejects_weak_queries() {
        let targets = vec![
            ("c1".to_string(), vec![1.0, 0.0]),
            ("c2".to_string(), vec![0.0, 1.0]),
        ];
        let rule = DecisionRule::Threshold { theta: 0.5 };
        let scored = score_episode(&[0.1, 0.2], &targets, &rule).unwrap();
        assert_eq!(scored.prediction, LabelId::Nota);
        let logits: Vec<f64> = scored.logits.iter().map(|(_, s)| *s).collect();
        assert_eq!(logits, vec![0.1, 0.2, 0.5]);
    }

    #[test]
    fn score_mnav_takes_max_vector() {
        let targets = vec![("c1".to_string(), vec![0.5, 0.5])];
        let rule = DecisionRule::Mnav {
            vectors: vec![vec![1.0, 1.0], vec![-1.0, -1.0]],
        };
        let scored = score_episode(&[0.3, 0.3], &targets, &rule).unwrap();
        // NOTA logit = max(0.6, -0.6) = 0.6 > q·μ1 = 0.3.
        assert_eq!(scored.prediction, LabelId::Nota);
        assert_eq!(scored.logits.last().unwrap().1, 0.6);
    }

    #[test]
    fn ties_prefer_targets_and_earliest() {
        // Exact tie between both targets and NOTA.
        assert_eq!(argmax_prediction(&[1.0, 1.0], Some(1.0)), Some(0));
        // NOTA wins only strictly.
        assert_eq!(argmax_prediction(&[1.0], Some(1.0 + 1e-12)), None);
        assert_eq!(argmax_prediction(&[], Some(0.0)), None);
        assert_eq!(argmax_prediction(&[2.0, 3.0], None), Some(1));
    }

    #[test]
    fn argmax_invariant_under_constant_shift() {
        let logits = [0.3, -1.2, 0.7, 0.7];
        let nota = 0.65;
        let base = argmax_prediction(&logits, Some(nota));
        for shift in [-10.0, -0.5, 0.25, 3.0] {
            let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
            assert_eq!(argmax_prediction(&shifted, Some(nota + shift)), base);
        }
    }

    fn two_clusters() -> Vec<LabeledEmbedding> {
        vec![
            item("a1", "A", vec![1.0, 0.0]),
            item("a2", "A", vec![0.9, 0.1]),
            item("a3", "A", vec![1.1, -0.1]),
            item("b1", "B", vec![0.0, 1.0]),
            item("b2", "B", vec![0.1, 0.9]),
            item("b3", "B", vec![-0.1, 1.1]),
        ]
    }

    #[test]
    fn inequality_1_on_separated_clusters() {
        let report = check_inequality_1(&two_clusters(), 1, 0.0).unwrap();
        assert!(report.holds, "witness: {:?}", report.witnesses);
    }

    #[test]
    fn inequality_1_violated_with_witness() {
        // Swap two points between the clusters.
        let mut items = two_clusters();
        items[0].vector = vec![0.0, 1.05]; // a1 sits inside cluster B
        items[3].vector = vec![1.05, 0.0]; // b1 sits inside cluster A
        let report = check_inequality_1(&items, 1, 0.0).unwrap();
        assert!(!report.holds);
        let w = &report.witnesses[0];
        assert!(w.same_support.is_some() && w.other_support.is_some());
        assert!(w.margin <= 0.0);
    }

    #[test]
    fn inequality_1_single_class_vacuous() {
        let items = vec![
            item("a1", "A", vec![1.0, 0.0]),
            item("a2", "A", vec![-1.0, 0.0]),
        ];
        let report = check_inequality_1(&items, 1, 0.0).unwrap();
        assert!(report.holds);
    }

    #[test]
    fn inequality_1_small_class_rejected() {
        let items = vec![
            item("a1", "A", vec![1.0, 0.0]),
            item("b1", "B", vec![0.0, 1.0]),
            item("b2", "B", vec![0.1, 0.9]),
        ];
        assert!(matches!(
            check_inequality_1(&items, 1, 0.0),
            Err(Error::ConstraintCheck(_))
        ));
    }

    #[test]
    fn inequality_2_theta_between_bands() {
        let items = two_clusters();
        // Within-class dots ≈ 0.9..1.2; cross-class ≈ -0.1..0.2.
        let report = check_inequality_2(&items, 1, 0.5, 0.0).unwrap();
        assert!(report.holds, "witness: {:?}", report.witnesses);
    }

    #[test]
    fn inequality_2_huge_theta_violates_lhs() {
        let items = two_clusters();
        let report = check_inequality_2(&items, 1, 1e9, 0.0).unwrap();
        assert!(!report.holds);
        let w = &report.witnesses[0];
        assert!(w.same_support.is_some() && w.other_support.is_none());
    }

    #[test]
    fn inequality_3_single_vector_bands() {
        let items = two_clusters();
        // v = (0.45, 0.45): within-class sims exceed q·v, cross-class fall below.
        let report = check_inequality_3(&items, 1, &[vec![0.45, 0.45]], 0.0).unwrap();
        assert!(report.holds, "witness: {:?}", report.witnesses);
        // A NOTA vector aligned with cluster A breaks the left side for A queries.
        let report = check_inequality_3(&items, 1, &[vec![2.0, 0.0]], 0.0).unwrap();
        assert!(!report.holds);
    }

    #[test]
    fn mnav_extra_vector_never_lowers_nota_logit() {
        let rule1 = DecisionRule::Mnav {
            vectors: vec![vec![0.2, -0.3]],
        };
        let rule2 = DecisionRule::Mnav {
            vectors: vec![vec![0.2, -0.3], vec![-1.0, 0.8]],
        };
        for q in [[0.5, 0.5], [-0.4, 1.0], [0.0, 0.0], [2.0, -2.0]] {
            let (a, _) = rule1.nota_logit(&q).unwrap().unwrap();
            let (b, _) = rule2.nota_logit(&q).unwrap().unwrap();
            assert!(b >= a);
        }
    }
}
