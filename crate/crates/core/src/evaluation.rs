//! Episodic metrics and the exhaustive 1-way 1-shot evaluation.
//!
//! Episodic scoring counts, per episode, exactly one confusion cell over the
//! gold/predicted Named-vs-NOTA partitions; micro precision/recall/F1 over
//! the target relations derive from those cells with NOTA as the negative
//! class: a wrong named prediction is a false positive, a named gold that
//! was not recovered is a false negative. Aggregates over replicas report
//! mean and population standard deviation (divide by the replica count).
//!
//! The exhaustive evaluator scores every 1-way 1-shot episode constructible
//! from a labeled embedding set in O(n²) by computing per-instance false
//! positive/negative rates against the rule's NOTA score, with the strict
//! `>` indicator: ties count as below threshold. Micro precision is
//! `1 - mean FPR` and micro recall `1 - mean FNR` (this differs from the
//! pooled-count definition used for episodic reports; both are intentional).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{LabelId, RelationInstance};
use crate::encoder::VectorSource;
use crate::error::{Error, Result};
use crate::rules::{score_episode, DecisionRule, LabeledEmbedding};
use crate::sampler::{EpisodeSet, SampleConfig, SampleMode};
use crate::training::{train, ModelState, TrainConfig, TrainRegime};
use crate::transform::FewShotDataset;
use crate::util::{dot_unchecked, mean_std};

/// Per-episode confusion cells over the gold/predicted Named-NOTA partitions.
/// Every episode lands in exactly one cell, so the five cells sum to the
/// episode count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    /// Named gold, predicted exactly right.
    pub gold_named_pred_same: usize,
    /// Named gold, a different named relation predicted.
    pub gold_named_pred_other: usize,
    /// Named gold, NOTA predicted.
    pub gold_named_pred_nota: usize,
    /// NOTA gold, a named relation predicted.
    pub gold_nota_pred_named: usize,
    /// NOTA gold, NOTA predicted.
    pub gold_nota_pred_nota: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.gold_named_pred_same
            + self.gold_named_pred_other
            + self.gold_named_pred_nota
            + self.gold_nota_pred_named
            + self.gold_nota_pred_nota
    }

    /// True positives: correct named predictions.
    pub fn tp(&self) -> usize {
        self.gold_named_pred_same
    }

    /// False positives: named predictions that were wrong (including a wrong
    /// named prediction on a named gold).
    pub fn fp(&self) -> usize {
        self.gold_named_pred_other + self.gold_nota_pred_named
    }

    /// False negatives: named golds not recovered.
    pub fn fn_(&self) -> usize {
        self.gold_named_pred_other + self.gold_named_pred_nota
    }

    /// True negatives: NOTA answered on NOTA (counts toward accuracy only).
    pub fn tn(&self) -> usize {
        self.gold_nota_pred_nota
    }

    pub fn correct(&self) -> usize {
        self.gold_named_pred_same + self.gold_nota_pred_nota
    }
}

/// Metrics for one evaluation replica.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaMetrics {
    pub replica: usize,
    pub episodes: usize,
    pub accuracy: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    /// Set when any metric had a zero denominator and was reported as 0.
    pub degenerate: bool,
    pub confusion: ConfusionCounts,
}

impl ReplicaMetrics {
    pub fn from_confusion(replica: usize, confusion: ConfusionCounts) -> ReplicaMetrics {
        let total = confusion.total();
        let mut degenerate = false;
        let mut ratio = |num: usize, den: usize| -> f64 {
            if den == 0 {
                degenerate = true;
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let accuracy = ratio(confusion.correct(), total);
        let precision = ratio(confusion.tp(), confusion.tp() + confusion.fp());
        let recall = ratio(confusion.tp(), confusion.tp() + confusion.fn_());
        let f1 = if precision + recall == 0.0 {
            degenerate = true;
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ReplicaMetrics {
            replica,
            episodes: total,
            accuracy,
            micro_precision: precision,
            micro_recall: recall,
            micro_f1: f1,
            degenerate,
            confusion,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub std: f64,
}

fn aggregate(values: impl Iterator<Item = f64>) -> Aggregate {
    let values: Vec<f64> = values.collect();
    let (mean, std) = mean_std(&values);
    Aggregate { mean, std }
}

/// Episodic evaluation report: per-replica metrics plus mean/std aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Std over replicas divides by the replica count (population std).
    pub std_definition: String,
    pub rule_variant: String,
    pub configs: Vec<SampleConfig>,
    pub per_replica: Vec<ReplicaMetrics>,
    pub accuracy: Aggregate,
    pub micro_precision: Aggregate,
    pub micro_recall: Aggregate,
    pub micro_f1: Aggregate,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("replica,episodes,accuracy,micro_precision,micro_recall,micro_f1,degenerate\n");
        for r in &self.per_replica {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                r.replica, r.episodes, r.accuracy, r.micro_precision, r.micro_recall, r.micro_f1,
                r.degenerate
            ));
        }
        out.push_str(&format!(
            "mean,,{:.6},{:.6},{:.6},{:.6},\n",
            self.accuracy.mean, self.micro_precision.mean, self.micro_recall.mean, self.micro_f1.mean
        ));
        out.push_str(&format!(
            "std,,{:.6},{:.6},{:.6},{:.6},\n",
            self.accuracy.std, self.micro_precision.std, self.micro_recall.std, self.micro_f1.std
        ));
        out
    }
}

/// Scores one episode set against instance vectors drawn from `source`.
fn score_set(
    rule: &DecisionRule,
    source: &VectorSource<'_>,
    set: &EpisodeSet,
    by_id: &HashMap<&str, &RelationInstance>,
    cache: &mut HashMap<String, Vec<f64>>,
) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    for episode in &set.episodes {
        let mut vector_of = |id: &str| -> Result<Vec<f64>> {
            if let Some(v) = cache.get(id) {
                return Ok(v.clone());
            }
            let inst = by_id.get(id).ok_or_else(|| {
                Error::Evaluation(format!("episode references unknown instance id {id}"))
            })?;
            let v = source.vector_for(inst)?;
            cache.insert(id.to_string(), v.clone());
            Ok(v)
        };
        let mut targets = Vec::with_capacity(episode.targets.len());
        for rel in &episode.targets {
            let ids = episode.support.get(rel).ok_or_else(|| {
                Error::Evaluation(format!("episode lists target {rel} without a support set"))
            })?;
            let vecs: Vec<Vec<f64>> = ids
                .iter()
                .map(|id| vector_of(id))
                .collect::<Result<_>>()?;
            targets.push((rel.clone(), crate::rules::prototype(&vecs)?));
        }
        let query = vector_of(&episode.query_id)?;
        let scored = score_episode(&query, &targets, rule)?;
        match (&episode.gold, &scored.prediction) {
            (LabelId::Named(g), LabelId::Named(p)) if g == p => {
                counts.gold_named_pred_same += 1;
            }
            (LabelId::Named(_), LabelId::Named(_)) => counts.gold_named_pred_other += 1,
            (LabelId::Named(_), LabelId::Nota) => counts.gold_named_pred_nota += 1,
            (LabelId::Nota, LabelId::Named(_)) => counts.gold_nota_pred_named += 1,
            (LabelId::Nota, LabelId::Nota) => counts.gold_nota_pred_nota += 1,
        }
    }
    Ok(counts)
}

/// Evaluates episode sets (one per replica) and aggregates over replicas.
pub fn evaluate_episodes(
    rule: &DecisionRule,
    source: &VectorSource<'_>,
    sets: &[EpisodeSet],
    ds: &FewShotDataset,
) -> Result<EvalReport> {
    rule.validate()?;
    let mut per_replica = Vec::with_capacity(sets.len());
    let mut caches: HashMap<crate::corpus::Section, HashMap<String, Vec<f64>>> = HashMap::new();
    for set in sets {
        let section = set.config.section;
        let by_id: HashMap<&str, &RelationInstance> = ds
            .section(section)
            .iter()
            .map(|inst| (inst.id.as_str(), inst))
            .collect();
        let cache = caches.entry(section).or_default();
        let counts = score_set(rule, source, set, &by_id, cache)?;
        per_replica.push(ReplicaMetrics::from_confusion(set.replica, counts));
    }
    Ok(EvalReport {
        std_definition: "population".to_string(),
        rule_variant: rule.variant_name().to_string(),
        configs: sets.iter().map(|s| s.config.clone()).collect(),
        accuracy: aggregate(per_replica.iter().map(|r| r.accuracy)),
        micro_precision: aggregate(per_replica.iter().map(|r| r.micro_precision)),
        micro_recall: aggregate(per_replica.iter().map(|r| r.micro_recall)),
        micro_f1: aggregate(per_replica.iter().map(|r| r.micro_f1)),
        per_replica,
    })
}

/// Convenience wrapper scoring with a trained model's encoder.
pub fn evaluate_model(
    state: &ModelState,
    sets: &[EpisodeSet],
    ds: &FewShotDataset,
) -> Result<EvalReport> {
    evaluate_episodes(&state.rule, &state.vector_source(), sets, ds)
}

/// Per-instance rates for the exhaustive 1-way 1-shot evaluation. Counts are
/// kept as integers so reports can be compared exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRates {
    pub id: String,
    pub label: String,
    /// Other-class supports scored above the NOTA score (false positives).
    pub fp_count: usize,
    pub other_count: usize,
    /// Same-class supports scored at or below the NOTA score (false negatives).
    pub fn_count: usize,
    pub same_count: usize,
    pub fpr: f64,
    /// `None` when the instance's class has no other member (excluded from
    /// recall with a flag).
    pub fnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustiveReport {
    /// Whether the query itself was included in its same-class pool.
    pub include_self: bool,
    pub per_instance: Vec<InstanceRates>,
    /// Instances excluded from FNR averaging (singleton classes).
    pub excluded_fnr: Vec<String>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
}

impl ExhaustiveReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,label,fp_count,other_count,fpr,fn_count,same_count,fnr\n");
        for r in &self.per_instance {
            let fnr = r
                .fnr
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "excluded".to_string());
            out.push_str(&format!(
                "{},{},{},{},{:.6},{},{},{}\n",
                r.id, r.label, r.fp_count, r.other_count, r.fpr, r.fn_count, r.same_count, fnr
            ));
        }
        out
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Exhaustive 1-way 1-shot evaluation over a labeled embedding set.
///
/// For every query `r`, the NOTA score `S_N(r)` is the rule's NOTA logit
/// (θ, `r·v`, or the max over MNAV vectors). A single-instance support `{m}`
/// classifies `r` into `m`'s class iff `r·m > S_N(r)` (strict; ties fall to
/// NOTA). FPR/FNR per query follow by counting over other-class and
/// same-class supports; micro precision/recall are `1 - mean` of those rates,
/// macro variants average within classes first.
pub fn exhaustive_1w1s(
    items: &[LabeledEmbedding],
    rule: &DecisionRule,
    include_self: bool,
) -> Result<ExhaustiveReport> {
    if items.len() < 2 {
        return Err(Error::Evaluation(
            "exhaustive evaluation needs at least two instances".into(),
        ));
    }
    if matches!(rule, DecisionRule::NoNota) {
        return Err(Error::Evaluation(
            "exhaustive evaluation needs a rule with a NOTA score".into(),
        ));
    }
    rule.validate()?;
    let dim = items[0].vector.len();
    for item in items {
        if item.vector.len() != dim {
            return Err(Error::DimMismatch {
                left: dim,
                right: item.vector.len(),
            });
        }
    }
    let distinct_labels: std::collections::BTreeSet<&str> =
        items.iter().map(|i| i.label.as_str()).collect();
    if distinct_labels.len() < 2 {
        return Err(Error::Evaluation(
            "exhaustive evaluation needs at least two classes".into(),
        ));
    }

    let mut per_instance = Vec::with_capacity(items.len());
    let mut excluded_fnr = Vec::new();
    for (qi, query) in items.iter().enumerate() {
        let nota_score = rule
            .nota_logit(&query.vector)?
            .expect("non-NoNota rule scores NOTA")
            .0;
        let mut fp_count = 0usize;
        let mut other_count = 0usize;
        let mut fn_count = 0usize;
        let mut same_count = 0usize;
        for (mi, support) in items.iter().enumerate() {
            if !include_self && mi == qi {
                continue;
            }
            let sim = dot_unchecked(&query.vector, &support.vector);
            let positive = sim > nota_score;
            if support.label == query.label {
                if include_self || mi != qi {
                    same_count += 1;
                    if !positive {
                        fn_count += 1;
                    }
                }
            } else {
                other_count += 1;
                if positive {
                    fp_count += 1;
                }
            }
        }
        let fpr = fp_count as f64 / other_count as f64;
        let fnr = if same_count == 0 {
            excluded_fnr.push(query.id.clone());
            None
        } else {
            Some(fn_count as f64 / same_count as f64)
        };
        per_instance.push(InstanceRates {
            id: query.id.clone(),
            label: query.label.clone(),
            fp_count,
            other_count,
            fn_count,
            same_count,
            fpr,
            fnr,
        });
    }

    let mean_fpr =
        per_instance.iter().map(|r| r.fpr).sum::<f64>() / per_instance.len() as f64;
    let fnrs: Vec<f64> = per_instance.iter().filter_map(|r| r.fnr).collect();
    let mean_fnr = if fnrs.is_empty() {
        0.0
    } else {
        fnrs.iter().sum::<f64>() / fnrs.len() as f64
    };
    let micro_precision = 1.0 - mean_fpr;
    let micro_recall = 1.0 - mean_fnr;

    // Macro: average within each class first.
    let mut class_fpr: Vec<f64> = Vec::new();
    let mut class_fnr: Vec<f64> = Vec::new();
    for label in &distinct_labels {
        let members: Vec<&InstanceRates> = per_instance
            .iter()
            .filter(|r| r.label == *label)
            .collect();
        class_fpr.push(members.iter().map(|r| r.fpr).sum::<f64>() / members.len() as f64);
        let defined: Vec<f64> = members.iter().filter_map(|r| r.fnr).collect();
        if !defined.is_empty() {
            class_fnr.push(defined.iter().sum::<f64>() / defined.len() as f64);
        }
    }
    let macro_precision = 1.0 - class_fpr.iter().sum::<f64>() / class_fpr.len() as f64;
    let macro_recall = if class_fnr.is_empty() {
        0.0
    } else {
        1.0 - class_fnr.iter().sum::<f64>() / class_fnr.len() as f64
    };

    Ok(ExhaustiveReport {
        include_self,
        per_instance,
        excluded_fnr,
        micro_precision,
        micro_recall,
        micro_f1: harmonic(micro_precision, micro_recall),
        macro_precision,
        macro_recall,
        macro_f1: harmonic(macro_precision, macro_recall),
    })
}

/// What a NOTA-rate sweep evaluates at each rate: an already-trained model,
/// or a training recipe rerun per rate.
pub enum SweepSubject<'a> {
    Model(&'a ModelState),
    Recipe(&'a TrainConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    /// In-target query probability; the episode NOTA rate is `1 - p_target`.
    pub p_target: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
}

pub fn sweep_rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p_target,micro_f1\n");
    for row in rows {
        out.push_str(&format!("{:.4},{:.6}\n", row.p_target, row.micro_f1));
    }
    out
}

/// Evaluates (or trains and evaluates) at each fixed-NOTA rate in `rates`,
/// sharing seeds across rates so rows are comparable.
pub fn nota_rate_sweep(
    subject: SweepSubject<'_>,
    ds: &FewShotDataset,
    section: crate::corpus::Section,
    rates: &[f64],
    n: usize,
    k: usize,
    episodes: usize,
    replicas: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if rates.is_empty() {
        return Err(Error::Evaluation("sweep needs at least one rate".into()));
    }
    for &p in rates {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Evaluation(format!(
                "sweep rate {p} outside (0, 1]"
            )));
        }
    }
    let mut rows = Vec::with_capacity(rates.len());
    for &p_target in rates {
        let config = SampleConfig {
            n,
            k,
            mode: SampleMode::FixedNota,
            p_target: Some(p_target),
            seed,
            section,
        };
        let sets = crate::sampler::sample_eval_replicas(ds, &config, episodes, replicas)?;
        let report = match &subject {
            SweepSubject::Model(state) => evaluate_model(state, &sets, ds)?,
            SweepSubject::Recipe(cfg) => {
                let mut cfg = (*cfg).clone();
                cfg.regime = TrainRegime::FixedNota { p_target };
                let (state, _) = train(ds, &cfg)?;
                evaluate_model(&state, &sets, ds)?
            }
        };
        rows.push(SweepRow {
            p_target,
            micro_f1: report.micro_f1.mean,
            accuracy: report.accuracy.mean,
        });
    }
    Ok(rows)
}
